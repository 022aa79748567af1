use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use cnls_kam::kam::{extract_embedding, iterate, Embedding, IterationReport, KamState};
use cnls_kam::lattice::{Block, Lattice};
use cnls_kam::nls::{
    action_angle, default_directions, from_lattice, linear_stability, normal_form_at, quasiperiodicity_diagnostic,
    simulate, to_lattice, verify_assumptions, AssumptionOptions, AssumptionReport, DiagTolerance, DiagnosticReport,
    GrowthExponent, ModeSpec, NlsModel, ParamPoint, SimOptions, SimState,
};
use cnls_kam::resonance::{excluded_fraction, sample_params, MeasureReport};
use cnls_kam::vfield::{parse_field, vf_norm, write_field, DomainParams, PolyVectorField, C64};
use cnls_kam::KamError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{RunConfig, SeedField};

/// Files produced by a command, as (relative path, contents).
#[derive(Clone, Debug, Default)]
pub struct Outputs {
    pub files: Vec<(String, String)>,
}

impl Outputs {
    fn add(&mut self, path: impl Into<String>, contents: String) {
        self.files.push((path.into(), contents));
    }

    pub fn get(&self, path: &str) -> Option<&str> {
        self.files.iter().find(|(p, _)| p == path).map(|(_, c)| c.as_str())
    }

    pub fn write(&self, dir: &Path) -> Result<(), KamError> {
        for (rel, contents) in &self.files {
            let path = dir.join(rel);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent)?;
            }
            fs::write(path, contents)?;
        }
        Ok(())
    }
}

fn with_manifest(manifest: &str, body: &str) -> String {
    let mut s = manifest.to_string();
    s.push_str(body);
    s
}

/// A field file with the manifest placed after the two header lines.
fn field_with_manifest(manifest: &str, field: &PolyVectorField) -> String {
    let text = write_field(field);
    let mut lines = text.splitn(3, '\n');
    let (a, b, rest) = (lines.next().unwrap_or(""), lines.next().unwrap_or(""), lines.next().unwrap_or(""));
    format!("{a}\n{b}\n{manifest}{rest}")
}

pub fn model(cfg: &RunConfig) -> Result<NlsModel, KamError> {
    cfg.validate()?;
    NlsModel::uniform(cfg.lattice.clone(), cfg.domain.s, cfg.model.amplitude_ratio)
}

fn domain(cfg: &RunConfig) -> Result<DomainParams, KamError> {
    DomainParams::new(cfg.domain.r, cfg.domain.s, cfg.domain.rho)
}

/// Configured parameter points followed by `random_zeta` uniform draws.
pub fn parameter_points(cfg: &RunConfig) -> Result<Vec<ParamPoint>, KamError> {
    let mut out = cfg.kam.zeta.iter().map(|z| cfg.param_point(z)).collect::<Result<Vec<_>, _>>()?;
    if cfg.kam.random_zeta > 0 {
        out.extend(sample_params(cfg.lattice.n(), cfg.lattice.m(), cfg.kam.random_zeta, cfg.seed));
    }
    Ok(out)
}

fn zeta_vec(z: &ParamPoint) -> Vec<f64> {
    z.xi.iter().chain(&z.xitilde).copied().collect()
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(";")
}

pub struct BuildResult {
    pub field: PolyVectorField,
    pub report: AssumptionReport,
    pub outputs: Outputs,
}

/// Builds the action-angle field at the first parameter point and checks the standing assumptions.
pub fn cmd_build(cfg: &RunConfig) -> Result<BuildResult, KamError> {
    let model = model(cfg)?;
    let points = parameter_points(cfg)?;
    let (_, p, tr) = action_angle(&model, &points[0], &cfg.expansion())?;
    let dom = domain(cfg)?;
    let opts = AssumptionOptions { c_size: cfg.model.size_constant, l_bound: cfg.kam.l.max(1.0), ..AssumptionOptions::default() };
    let report = verify_assumptions(&model, &p, &points, &dom, &opts)?;
    let eps0 = vf_norm(&p, &dom);
    let manifest = cfg.manifest("build", Some(eps0));
    let mut outputs = Outputs::default();
    outputs.add("field.txt", field_with_manifest(&manifest, &p));
    let mut rep = String::from("check,pass,value,witness\n");
    for c in &report.checks {
        let _ = writeln!(rep, "{},{},{:e},{}", c.name, c.pass, c.value, c.witness.clone().unwrap_or_default().replace(',', ";"));
    }
    let _ = writeln!(rep, "all,{},{:e},", report.all_pass, eps0);
    outputs.add("assumptions.csv", with_manifest(&manifest, &rep));
    let mut info = String::new();
    let _ = writeln!(info, "terms = {}", p.len());
    let _ = writeln!(info, "tuples = {}", tr.tuples);
    let _ = writeln!(info, "tail_estimate = {:e}", tr.tail_estimate);
    let _ = writeln!(info, "norm = {eps0:e}");
    let _ = writeln!(info, "all_pass = {}", report.all_pass);
    outputs.add("build.txt", with_manifest(&manifest, &info));
    Ok(BuildResult { field: p, report, outputs })
}

#[derive(Clone, Debug)]
pub enum ZetaOutcome {
    Done { report: IterationReport, embedding: Embedding, eps_final: f64 },
    Excluded(String),
}

#[derive(Clone, Debug)]
pub struct ZetaRun {
    pub index: usize,
    pub zeta: ParamPoint,
    pub eps0: f64,
    pub outcome: ZetaOutcome,
}

/// Runs the iteration at one parameter point; small-divisor refusals become exclusions.
pub fn run_zeta(cfg: &RunConfig, model: &NlsModel, index: usize, zeta: &ParamPoint) -> Result<ZetaRun, KamError> {
    let (nf, p) = match cfg.kam.seed_field {
        SeedField::Nls => {
            let (nf, p, _) = action_angle(model, zeta, &cfg.expansion())?;
            (nf, p)
        }
        SeedField::Zero => (normal_form_at(model, zeta)?, PolyVectorField::zero(model.lattice.clone())),
    };
    let st = KamState::new(zeta.clone(), nf, p, domain(cfg)?, cfg.kam.l)?;
    let eps0 = st.eps();
    let sched = cfg.schedule(eps0.max(cfg.kam.target));
    let outcome = match iterate(st, &sched, &cfg.kam_options()) {
        Ok((report, fin)) => ZetaOutcome::Done { eps_final: fin.eps(), embedding: extract_embedding(&fin), report },
        Err(e) if matches!(e.root(), KamError::DivisorRefusal { .. }) => ZetaOutcome::Excluded(e.to_string()),
        Err(e) => return Err(e),
    };
    Ok(ZetaRun { index, zeta: zeta.clone(), eps0, outcome })
}

/// Saved form of an embedding, next to one field file per transform.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EmbeddingFile {
    pub zeta: Vec<f64>,
    pub frequencies: Vec<f64>,
    pub eps0: f64,
    pub eps_final: f64,
    pub reached_target: bool,
    pub substeps: usize,
    pub transforms: Vec<String>,
}

pub struct IterateResult {
    pub runs: Vec<ZetaRun>,
    pub outputs: Outputs,
}

fn convex(norms: &[f64]) -> bool {
    let logs: Vec<f64> = norms.iter().map(|x| x.ln()).collect();
    logs.windows(2).all(|w| w[1] < w[0]) && logs.windows(3).all(|w| w[0] - w[1] < w[1] - w[2])
}

/// Runs the iteration at every parameter point in parallel.
pub fn cmd_iterate(cfg: &RunConfig) -> Result<IterateResult, KamError> {
    let model = model(cfg)?;
    let points = parameter_points(cfg)?;
    let runs: Vec<ZetaRun> =
        points.par_iter().enumerate().map(|(i, z)| run_zeta(cfg, &model, i, z)).collect::<Result<_, _>>()?;
    let manifest = cfg.manifest("iterate", runs.first().map(|r| r.eps0));
    let mut outputs = Outputs::default();
    let mut norms = String::from("zeta_index,nu,eps\n");
    let mut steps = format!("zeta_index,{}\n", cnls_kam::kam::StepReport::CSV_HEADER);
    let mut excl = String::from("zeta_index,zeta,reason\n");
    let mut summary = String::from("zeta_index,zeta,steps,eps0,eps_final,max_contraction,convex,eps_sum_ratio,reached_target\n");
    for run in &runs {
        let zs = fmt_list(&zeta_vec(&run.zeta));
        match &run.outcome {
            ZetaOutcome::Excluded(reason) => {
                let _ = writeln!(excl, "{},{zs},{}", run.index, reason.replace(',', ";"));
            }
            ZetaOutcome::Done { report, embedding, eps_final } => {
                for (nu, e) in report.norms.iter().enumerate() {
                    let _ = writeln!(norms, "{},{nu},{e:e}", run.index);
                }
                for st in &report.steps {
                    let _ = writeln!(steps, "{},{}", run.index, st.csv_row());
                    outputs.add(
                        format!("zeta_{}/solve_{}.csv", run.index, st.constants.nu),
                        with_manifest(&manifest, &st.solve.to_csv()),
                    );
                }
                let cmax = report.steps.iter().map(|s| s.contraction).fold(0.0, f64::max);
                let ratio = if run.eps0 > 0.0 { report.eps_sum() / run.eps0 } else { 0.0 };
                let _ = writeln!(
                    summary,
                    "{},{zs},{},{:e},{:e},{:e},{},{},{}",
                    run.index,
                    report.steps.len(),
                    run.eps0,
                    eps_final,
                    cmax,
                    convex(&report.norms),
                    ratio,
                    report.reached_target
                );
                let mut names = Vec::new();
                for (mu, f) in embedding.transforms.iter().enumerate() {
                    let name = format!("transform_{mu}.field");
                    outputs.add(format!("zeta_{}/{name}", run.index), field_with_manifest(&manifest, f));
                    names.push(name);
                }
                let file = EmbeddingFile {
                    zeta: zeta_vec(&run.zeta),
                    frequencies: embedding.frequencies.clone(),
                    eps0: run.eps0,
                    eps_final: *eps_final,
                    reached_target: report.reached_target,
                    substeps: embedding.substeps,
                    transforms: names,
                };
                let toml = toml::to_string_pretty(&file).map_err(|e| KamError::Internal(e.to_string()))?;
                outputs.add(format!("zeta_{}/embedding.toml", run.index), with_manifest(&manifest, &toml));
            }
        }
    }
    outputs.add("norms.csv", with_manifest(&manifest, &norms));
    outputs.add("steps.csv", with_manifest(&manifest, &steps));
    outputs.add("exclusions.csv", with_manifest(&manifest, &excl));
    outputs.add("summary.csv", with_manifest(&manifest, &summary));
    Ok(IterateResult { runs, outputs })
}

pub struct MeasureResult {
    pub report: MeasureReport,
    pub outputs: Outputs,
}

/// Monte-Carlo excluded fraction over the configured γ list.
pub fn cmd_measure(cfg: &RunConfig) -> Result<MeasureResult, KamError> {
    let model = model(cfg)?;
    let report = excluded_fraction(
        &model.lattice,
        |z| normal_form_at(&model, z),
        &cfg.resonance.gammas,
        cfg.kam.tau,
        &cfg.window(),
        cfg.resonance.samples,
        cfg.seed,
    )?;
    let manifest = cfg.manifest("measure", None);
    let mut outputs = Outputs::default();
    outputs.add("scaling.csv", with_manifest(&manifest, &report.to_csv()));
    outputs.add("worst.csv", with_manifest(&manifest, &report.worst_csv()));
    let mut fam = String::from("gamma");
    for (f, _) in report.rows.first().map(|r| r.per_family.as_slice()).unwrap_or(&[]) {
        let _ = write!(fam, ",{f}");
    }
    fam.push('\n');
    for r in &report.rows {
        let _ = write!(fam, "{:e}", r.gamma);
        for (_, c) in &r.per_family {
            let _ = write!(fam, ",{c}");
        }
        fam.push('\n');
    }
    outputs.add("families.csv", with_manifest(&manifest, &fam));
    Ok(MeasureResult { report, outputs })
}

/// Where the validated torus comes from.
#[derive(Clone, Debug)]
pub enum ValidateSource {
    /// iterate at the first parameter point now
    Fresh,
    /// an `iterate` output directory for one parameter point (containing embedding.toml)
    Dir(PathBuf),
    /// the unperturbed linear flow and its trivial torus
    Linear,
    /// random lattice data against a fresh embedding (negative control)
    Random,
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidateReport {
    pub source: String,
    pub eps_final: f64,
    pub torus_distance: f64,
    pub torus_bound: f64,
    pub torus_pass: bool,
    pub frequencies: DiagnosticReport,
    pub growth: Vec<GrowthExponent>,
    pub max_growth: f64,
    pub growth_pass: bool,
    pub pass: bool,
}

pub struct ValidateResult {
    pub report: ValidateReport,
    pub outputs: Outputs,
}

/// Reads an embedding written by `cmd_iterate`.
pub fn load_embedding(dir: &Path, lattice: Arc<Lattice>) -> Result<(EmbeddingFile, Embedding), KamError> {
    let text = fs::read_to_string(dir.join("embedding.toml"))?;
    let file: EmbeddingFile = toml::from_str(&text).map_err(|e| KamError::Config(e.to_string()))?;
    let mut transforms = Vec::new();
    for name in &file.transforms {
        let t = fs::read_to_string(dir.join(name))?;
        transforms.push(parse_field(&t, Some(lattice.clone()))?);
    }
    let emb = Embedding { transforms, frequencies: file.frequencies.clone(), substeps: file.substeps };
    Ok((file, emb))
}

fn mode_specs(lat: &Lattice, freqs: &[f64]) -> Vec<ModeSpec> {
    let n = lat.n();
    let mut out = Vec::new();
    for (b, &site) in lat.tangential(Block::Z).iter().enumerate() {
        out.push(ModeSpec { block: Block::Z, site, expected: freqs[b] });
    }
    for (b, &site) in lat.tangential(Block::W).iter().enumerate() {
        out.push(ModeSpec { block: Block::W, site, expected: freqs[n + b] });
    }
    out
}

fn random_state(model: &NlsModel, s: f64, seed: u64) -> SimState {
    let lat = &model.lattice;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut st = SimState::zero(lat.len());
    for amps in [&mut st.q, &mut st.p] {
        for c in amps.iter_mut() {
            let r = (2.0 * s).sqrt() * rng.gen::<f64>();
            *c = C64::from_polar(r, std::f64::consts::TAU * rng.gen::<f64>());
        }
    }
    st
}

/// Largest scaled distance from the sampled states to the torus; about 50 evenly spaced samples.
pub fn torus_distance(model: &NlsModel, emb: &Embedding, states: &[SimState], s: f64) -> Vec<(f64, f64)> {
    let stride = (states.len() / 50).max(1);
    let picked: Vec<&SimState> = states.iter().step_by(stride).collect();
    picked
        .par_iter()
        .map(|x| (x.time, emb.distance_to_torus(&model.lattice, &from_lattice(model, x), s).0))
        .collect()
}

/// Simulates the embedded torus, checks frequencies, torus distance and linear growth.
pub fn cmd_validate(cfg: &RunConfig, source: &ValidateSource) -> Result<ValidateResult, KamError> {
    let model = model(cfg)?;
    let lat = model.lattice.clone();
    let s = cfg.domain.s;
    let mut nonlinearity = 1.0;
    let (zeta, emb, eps_final, label) = match source {
        ValidateSource::Fresh | ValidateSource::Random => {
            let z = parameter_points(cfg)?.remove(0);
            let run = run_zeta(cfg, &model, 0, &z)?;
            match run.outcome {
                ZetaOutcome::Done { embedding, eps_final, .. } => (z, embedding, eps_final, "fresh"),
                ZetaOutcome::Excluded(r) => return Err(KamError::Precondition(format!("parameter point excluded: {r}"))),
            }
        }
        ValidateSource::Dir(dir) => {
            let (file, emb) = load_embedding(dir, lat.clone())?;
            (cfg.param_point(&file.zeta)?, emb, file.eps_final, "loaded")
        }
        ValidateSource::Linear => {
            nonlinearity = 0.0;
            let z = parameter_points(cfg)?.remove(0);
            let nf = normal_form_at(&model, &z)?;
            let freqs = nf.omega.iter().chain(&nf.omegatilde).copied().collect();
            (z, Embedding { transforms: Vec::new(), frequencies: freqs, substeps: 8 }, 0.0, "linear")
        }
    };
    let label = if matches!(source, ValidateSource::Random) { "random" } else { label };
    let st0 = match source {
        ValidateSource::Random => random_state(&model, s, cfg.seed),
        _ => to_lattice(&model, &emb.eval(&lat, &cfg.sim.angles)),
    };
    let opts = SimOptions { order: cfg.sim.order, sample_every: cfg.sim.sample_every, nonlinearity, ..SimOptions::default() };
    let traj = simulate(&model, &zeta, &st0, cfg.sim.t_end, cfg.sim.dt, &opts)?;
    let dist = torus_distance(&model, &emb, &traj.states, s);
    let torus_distance = dist.iter().map(|d| d.1).fold(0.0, f64::max);
    let torus_bound = cfg.sim.torus_factor * eps_final + cfg.sim.roundoff_floor;
    let tol = DiagTolerance { freq_rel: cfg.sim.tolerance, residual: cfg.sim.residual_power };
    let frequencies = quasiperiodicity_diagnostic(&traj, &lat, &mode_specs(&lat, &emb.frequencies), &tol)?;
    let dirs = default_directions(&model, cfg.sim.normal_radius);
    let growth = linear_stability(&model, &zeta, &st0, cfg.sim.stability_t, cfg.sim.stability_dt, &dirs, &opts)?;
    let max_growth = growth.iter().map(|g| g.exponent).fold(f64::NEG_INFINITY, f64::max);
    let torus_pass = torus_distance <= torus_bound;
    let growth_pass = max_growth <= cfg.sim.growth_tol;
    let report = ValidateReport {
        source: label.into(),
        eps_final,
        torus_distance,
        torus_bound,
        torus_pass,
        pass: torus_pass && frequencies.pass && growth_pass,
        frequencies,
        growth,
        max_growth,
        growth_pass,
    };
    let manifest = cfg.manifest("validate", None);
    let mut outputs = Outputs::default();
    let mut txt = String::new();
    let _ = writeln!(txt, "source = {}", report.source);
    let _ = writeln!(txt, "eps_final = {:e}", report.eps_final);
    let _ = writeln!(txt, "torus_distance = {:e}", report.torus_distance);
    let _ = writeln!(txt, "torus_bound = {:e}", report.torus_bound);
    let _ = writeln!(txt, "torus_pass = {}", report.torus_pass);
    let _ = writeln!(txt, "max_freq_rel_dev = {:e}", report.frequencies.max_rel_dev);
    let _ = writeln!(txt, "max_residual_power = {:e}", report.frequencies.max_residual_power);
    let _ = writeln!(txt, "frequency_pass = {}", report.frequencies.pass);
    let _ = writeln!(txt, "max_growth = {:e}", report.max_growth);
    let _ = writeln!(txt, "growth_pass = {}", report.growth_pass);
    let _ = writeln!(txt, "pass = {}", report.pass);
    outputs.add("validate.txt", with_manifest(&manifest, &txt));
    let mut fr = String::from("mode,expected,measured,rel_dev,residual_power,resolved\n");
    for m in &report.frequencies.modes {
        let _ = writeln!(fr, "{},{},{},{:e},{:e},{}", m.label, m.expected, m.measured, m.rel_dev, m.residual_power, m.resolved);
    }
    outputs.add("frequencies.csv", with_manifest(&manifest, &fr));
    let mut gr = String::from("direction,exponent\n");
    for g in &report.growth {
        let _ = writeln!(gr, "{},{:e}", g.label, g.exponent);
    }
    outputs.add("growth.csv", with_manifest(&manifest, &gr));
    let mut dc = String::from("t,torus_distance\n");
    for (t, d) in &dist {
        let _ = writeln!(dc, "{t},{d:e}");
    }
    outputs.add("distance.csv", with_manifest(&manifest, &dc));
    let mut tc = String::from("t");
    for m in &report.frequencies.modes {
        let _ = write!(tc, ",{0}.re,{0}.im", m.label);
    }
    tc.push('\n');
    let specs = mode_specs(&lat, &emb.frequencies);
    for st in &traj.states {
        let _ = write!(tc, "{}", st.time);
        for m in &specs {
            let c = match m.block {
                Block::Z => st.q[m.site as usize],
                Block::W => st.p[m.site as usize],
            };
            let _ = write!(tc, ",{},{}", c.re, c.im);
        }
        tc.push('\n');
    }
    outputs.add("tangential.csv", with_manifest(&manifest, &tc));
    Ok(ValidateResult { report, outputs })
}

/// The NLS field at the first parameter point in canonical text form.
pub fn cmd_dump(cfg: &RunConfig) -> Result<String, KamError> {
    let model = model(cfg)?;
    let z = parameter_points(cfg)?.remove(0);
    let (_, p, _) = action_angle(&model, &z, &cfg.expansion())?;
    let eps0 = vf_norm(&p, &domain(cfg)?);
    Ok(field_with_manifest(&cfg.manifest("dump", Some(eps0)), &p))
}

#[derive(Clone, Debug, Serialize)]
pub struct LoadSummary {
    pub terms: usize,
    pub max_degree: u32,
    pub norm: f64,
    pub reversibility_defect: f64,
    pub momentum_violations: usize,
    /// writing the parsed field reproduces the term lines of the input
    pub round_trip: bool,
}

/// Parses a field file and reports its size, norm on the configured domain and symmetries.
pub fn cmd_load(cfg: &RunConfig, text: &str) -> Result<LoadSummary, KamError> {
    let f = parse_field(text, None)?;
    let dom = domain(cfg)?;
    let body = |t: &str| t.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#')).map(str::to_string).collect::<Vec<_>>();
    let again = write_field(&f);
    Ok(LoadSummary {
        terms: f.len(),
        max_degree: f.max_degree(),
        norm: vf_norm(&f, &dom),
        reversibility_defect: cnls_kam::vfield::reversibility_defect(&f, cnls_kam::vfield::Symmetry::Reversible),
        momentum_violations: cnls_kam::vfield::check_momentum(&f).len(),
        round_trip: body(text) == body(&again),
    })
}
