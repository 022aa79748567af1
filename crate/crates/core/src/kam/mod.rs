//! One KAM step and the iteration driver.

mod embedding;
mod schedule;

use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use embedding::{extract_embedding, Embedding};
pub use schedule::{schedule_step, KamSchedule, StepConstants};

use crate::error::KamError;
use crate::homological::{normal_part, residual, solve_homological, truncate_r, NormalFormDelta, SolveReport, TruncationSpec};
use crate::nls::{toeplitz_checks, ParamPoint};
use crate::vfield::{
    as_vector_field, check_momentum, lie_bracket_truncated, reversibility_defect, term_norm, vf_norm, DomainParams,
    NormalFormData, PolyVectorField, Symmetry, Truncation, C64,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KamOptions {
    pub nu_max: usize,
    pub target: f64,
    /// number of brackets in the transformed perturbation
    pub lie_order: usize,
    pub max_degree: u32,
    pub max_normal_degree: u32,
    /// terms whose norm on the new domain falls below prune_rel·ε_ν are dropped
    pub prune_rel: f64,
    pub imag_tol: f64,
    pub probe_ts: Vec<i32>,
}

impl Default for KamOptions {
    fn default() -> Self {
        KamOptions {
            nu_max: 6,
            target: 1e-12,
            lie_order: 6,
            max_degree: 6,
            max_normal_degree: 2,
            prune_rel: 1e-14,
            imag_tol: 1e-9,
            probe_ts: vec![0, 1, 2, 3],
        }
    }
}

impl KamOptions {
    pub fn validate(&self) -> Result<(), KamError> {
        if self.nu_max == 0 || self.lie_order == 0 {
            return Err(KamError::Config("nu_max and lie_order must be at least 1".into()));
        }
        if !(self.target >= 0.0 && self.prune_rel >= 0.0 && self.imag_tol > 0.0) {
            return Err(KamError::Config("target, prune_rel and imag_tol must be nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct KamState {
    pub nu: usize,
    pub zeta: ParamPoint,
    pub nf: NormalFormData,
    pub p: PolyVectorField,
    pub dom: DomainParams,
    pub l: f64,
    /// measured ‖P_μ‖ for μ ≤ ν
    pub eps_history: Vec<f64>,
    pub transforms: Vec<PolyVectorField>,
}

impl KamState {
    pub fn new(zeta: ParamPoint, nf: NormalFormData, p: PolyVectorField, dom: DomainParams, l: f64) -> Result<Self, KamError> {
        nf.validate(p.lattice(), None)?;
        let eps = vf_norm(&p, &dom);
        Ok(KamState { nu: 0, zeta, nf, p, dom, l, eps_history: vec![eps], transforms: Vec::new() })
    }

    pub fn eps(&self) -> f64 {
        *self.eps_history.last().unwrap_or(&0.0)
    }
}

/// Everything measured during one step.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StepReport {
    pub constants: StepConstants,
    pub eps: f64,
    pub eps_next: f64,
    /// ‖P₊‖ / ‖P‖^{7/6}
    pub contraction: f64,
    pub r_norm: f64,
    pub r_terms: usize,
    pub f_norm: f64,
    pub f_terms: usize,
    pub p_next_terms: usize,
    pub residual: f64,
    pub solve: SolveReport,
    pub lie_norms: Vec<f64>,
    pub delta: NormalFormDelta,
    pub drift_tangential: f64,
    pub drift_normal: f64,
    pub reversibility: f64,
    pub momentum_violations: usize,
    pub toeplitz_scaled_defect: f64,
    pub toeplitz_budget: f64,
    pub seconds: f64,
}

impl StepReport {
    pub fn structure_ok(&self) -> bool {
        self.reversibility <= 1e-9 && self.momentum_violations == 0 && self.toeplitz_scaled_defect <= self.toeplitz_budget
    }

    pub fn drift_ok(&self) -> bool {
        self.drift_tangential <= self.r_norm && self.drift_normal <= self.r_norm && self.r_norm <= self.eps
    }

    pub const CSV_HEADER: &'static str =
        "nu,delta,r,rho,s,K,eps,eps_next,contraction,log10_eps_predicted,r_norm,f_norm,residual,drift_tangential,drift_normal,reversibility,momentum_violations,toeplitz_scaled_defect";

    pub fn csv_row(&self) -> String {
        let c = &self.constants;
        format!(
            "{},{},{},{},{:e},{},{:e},{:e},{:e},{:.3},{:e},{:e},{:e},{:e},{:e},{:e},{},{:e}",
            c.nu,
            c.delta,
            c.r,
            c.rho,
            c.s,
            c.k,
            self.eps,
            self.eps_next,
            self.contraction,
            c.log10_eps_predicted,
            self.r_norm,
            self.f_norm,
            self.residual,
            self.drift_tangential,
            self.drift_normal,
            self.reversibility,
            self.momentum_violations,
            self.toeplitz_scaled_defect
        )
    }
}

fn prune_abs(x: &mut PolyVectorField, dom: &DomainParams, tol: f64) {
    let lat = x.lattice().clone();
    x.retain(|v, m, c| term_norm(&lat, *v, m, *c, dom) >= tol);
}

/// Coefficient-level reversibility defect of N + P relative to its largest coefficient.
fn relative_reversibility(nf: &NormalFormData, p: &PolyVectorField) -> f64 {
    let x = as_vector_field(nf, p.lattice()).plus(p);
    let scale = x.max_abs_coef();
    if scale == 0.0 {
        0.0
    } else {
        reversibility_defect(&x, Symmetry::Reversible) / scale
    }
}

/// P₊ = P − R + Σ_{n≥1} ad_F^n P/n! + Σ_{n≥2} ad_F^{n−1}([R] − R)/n!, ad_F X = [X,F].
/// With C₁ = [P,F], C₂ = [C₁ + [R] − R, F]/2 and C_n = [C_{n−1}, F]/n the two series merge.
fn transformed_perturbation(
    p: &PolyVectorField,
    r: &PolyVectorField,
    normal: &PolyVectorField,
    f: &PolyVectorField,
    dom: &DomainParams,
    tol: f64,
    opts: &KamOptions,
) -> Result<(PolyVectorField, Vec<f64>), KamError> {
    let trunc = Truncation::new(opts.max_degree, opts.max_normal_degree);
    let mut sum = p.minus(r);
    prune_abs(&mut sum, dom, tol);
    let mut pp = p.clone();
    prune_abs(&mut pp, dom, tol);
    let mut term = lie_bracket_truncated(&pp, f, &trunc);
    prune_abs(&mut term, dom, tol);
    let mut norms = vec![vf_norm(&term, dom)];
    sum.add_scaled(&term, C64::new(1.0, 0.0));
    for n in 2..=opts.lie_order {
        if n == 2 {
            term.add_scaled(&normal.minus(r), C64::new(1.0, 0.0));
        }
        if term.is_empty() {
            break;
        }
        term = lie_bracket_truncated(&term, f, &trunc).scaled(C64::new(1.0 / n as f64, 0.0));
        prune_abs(&mut term, dom, tol);
        let nn = vf_norm(&term, dom);
        if n >= 3 && nn > norms[norms.len() - 1] && nn > 0.0 {
            norms.push(nn);
            return Err(KamError::NonConvergence { norms });
        }
        norms.push(nn);
        sum.add_scaled(&term, C64::new(1.0, 0.0));
    }
    prune_abs(&mut sum, dom, tol);
    Ok((sum, norms))
}

/// One KAM step at the state's parameter point.
pub fn kam_step(state: &KamState, sched: &KamSchedule, opts: &KamOptions) -> Result<(KamState, StepReport), KamError> {
    let t0 = Instant::now();
    let eps = state.eps();
    let c = sched.at(state.nu, eps, state.dom.s, state.l);
    let spec = TruncationSpec::new(c.k)?;
    let r = truncate_r(&state.p, &spec);
    let r_norm = vf_norm(&r, &state.dom);
    let (delta, normal) = normal_part(&r, opts.imag_tol)?;
    let (f, solve) = solve_homological(&state.nf, &r, sched.gamma, sched.tau, c.k)?;
    let res = residual(&state.nf, &f, &r, &state.dom);
    let dom_next = DomainParams::new(c.r_next, c.s_next.max(f64::MIN_POSITIVE), c.rho_next)?;
    let (p_next, lie_norms) = if f.is_empty() && r.is_empty() {
        (state.p.clone(), Vec::new())
    } else {
        transformed_perturbation(&state.p, &r, &normal, &f, &dom_next, opts.prune_rel * eps, opts)?
    };
    let nf_next = delta.apply(&state.nf);
    let eps_next = vf_norm(&p_next, &dom_next);
    let (dt, dn) = delta.max_abs();
    let tz = toeplitz_checks(&p_next, &dom_next, &opts.probe_ts)?;
    let report = StepReport {
        constants: c,
        eps,
        eps_next,
        contraction: if eps > 0.0 { eps_next / eps.powf(7.0 / 6.0) } else { 0.0 },
        r_norm,
        r_terms: r.len(),
        f_norm: vf_norm(&f, &state.dom),
        f_terms: f.len(),
        p_next_terms: p_next.len(),
        residual: res,
        solve,
        lie_norms,
        delta,
        drift_tangential: dt,
        drift_normal: dn,
        reversibility: relative_reversibility(&nf_next, &p_next),
        momentum_violations: check_momentum(&p_next).len(),
        toeplitz_scaled_defect: tz.max_scaled,
        toeplitz_budget: eps_next,
        seconds: t0.elapsed().as_secs_f64(),
    };
    let mut eps_history = state.eps_history.clone();
    eps_history.push(eps_next);
    let mut transforms = state.transforms.clone();
    transforms.push(f);
    let next = KamState {
        nu: state.nu + 1,
        zeta: state.zeta.clone(),
        nf: nf_next,
        p: p_next,
        dom: dom_next,
        l: c.l_next,
        eps_history,
        transforms,
    };
    Ok((next, report))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IterationReport {
    pub steps: Vec<StepReport>,
    pub norms: Vec<f64>,
    pub omega: Vec<Vec<f64>>,
    pub reached_target: bool,
}

impl IterationReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(StepReport::CSV_HEADER);
        s.push('\n');
        for st in &self.steps {
            s.push_str(&st.csv_row());
            s.push('\n');
        }
        s
    }

    /// Σ ε_ν over the recorded norms.
    pub fn eps_sum(&self) -> f64 {
        self.norms.iter().fold(0.0, |a, b| a + b)
    }
}

/// Runs steps until ν = nu_max or ‖P‖ ≤ target.
pub fn iterate(state0: KamState, sched: &KamSchedule, opts: &KamOptions) -> Result<(IterationReport, KamState), KamError> {
    sched.validate()?;
    opts.validate()?;
    let mut state = state0;
    let mut steps = Vec::new();
    let mut omega = vec![freqs(&state.nf)];
    while state.nu < opts.nu_max && state.eps() > opts.target {
        let nu = state.nu;
        let (next, rep) = kam_step(&state, sched, opts).map_err(|e| KamError::AtStep { step: nu, source: Box::new(e) })?;
        omega.push(freqs(&next.nf));
        steps.push(rep);
        state = next;
    }
    let reached_target = state.eps() <= opts.target;
    Ok((IterationReport { steps, norms: state.eps_history.clone(), omega, reached_target }, state))
}

fn freqs(nf: &NormalFormData) -> Vec<f64> {
    nf.omega.iter().chain(&nf.omegatilde).copied().collect()
}
