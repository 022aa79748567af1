use serde::{Deserialize, Serialize};

use super::model::{NlsModel, ParamPoint};
use super::transform::normal_form_at;
use crate::error::KamError;
use crate::lattice::{Block, Sign, Site};
use crate::vfield::{
    check_momentum, reversibility_defect, toeplitz_probe, vf_norm, DomainParams, PolyVectorField, ProbeFamily, Symmetry,
};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AssumptionOptions {
    /// constant in ‖P‖ ≤ c·s^{1/2}
    pub c_size: f64,
    /// bound L on the normal frequency corrections
    pub l_bound: f64,
    pub fd_step: f64,
    pub jacobian_tol: f64,
    pub probe_ts: Vec<i32>,
}

impl Default for AssumptionOptions {
    fn default() -> Self {
        AssumptionOptions { c_size: 1.0, l_bound: 1.0, fd_step: 1e-6, jacobian_tol: 1e-9, probe_ts: vec![0, 1, 2, 3] }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub witness: Option<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub checks: Vec<CheckResult>,
    pub all_pass: bool,
}

impl AssumptionReport {
    pub fn get(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn freq_vector(model: &NlsModel, z: &ParamPoint) -> Result<Vec<f64>, KamError> {
    let nf = normal_form_at(model, z)?;
    Ok(nf.omega.into_iter().chain(nf.omegatilde).collect())
}

/// Finite-difference Jacobian of ζ ↦ (ω, ω̃), max deviation from the identity.
fn jacobian_check(model: &NlsModel, samples: &[ParamPoint], h: f64) -> Result<(f64, Option<String>), KamError> {
    let mut worst: f64 = 0.0;
    let mut witness = None;
    for z in samples {
        for a in 0..z.dim() {
            let x = z.get(a);
            let (lo, hi) = ((x - h).max(0.0), (x + h).min(1.0));
            let (mut zl, mut zh) = (z.clone(), z.clone());
            zl.set(a, lo);
            zh.set(a, hi);
            let (fl, fh) = (freq_vector(model, &zl)?, freq_vector(model, &zh)?);
            for b in 0..fl.len() {
                let d = (fh[b] - fl[b]) / (hi - lo);
                let dev = (d - if a == b { 1.0 } else { 0.0 }).abs();
                if dev > worst {
                    worst = dev;
                    witness = Some(format!("entry ({b},{a}) at ζ = {:?} {:?}", z.xi, z.xitilde));
                }
            }
        }
    }
    Ok((worst, witness))
}

pub(crate) struct ToeplitzSummary {
    pub defect: f64,
    pub max_scaled: f64,
    pub witness: Option<String>,
}

/// Probes the derivative entries of the normal components along both lattice axes
/// from a few interior base points.
pub(crate) fn toeplitz_checks(p: &PolyVectorField, dom: &DomainParams, ts: &[i32]) -> Result<ToeplitzSummary, KamError> {
    let lat = p.lattice();
    let d = lat.d();
    let unit = |a: usize| {
        let mut s = Site::zero(d);
        s.0[a] = 1;
        s
    };
    let mut bases = Vec::new();
    let mut i = Site::zero(d);
    i.0[d - 1] = 2;
    bases.push((i.clone(), i.clone()));
    if d >= 2 {
        let mut j = i.clone();
        j.0[0] += 1;
        j.0[1] -= 1;
        bases.push((i.clone(), j));
    }
    let mut exact_defect: f64 = 0.0;
    let mut max_scaled: f64 = 0.0;
    let mut witness = None;
    for comp in [(Block::Z, Sign::Plus), (Block::W, Sign::Plus)] {
        for wrt in [(Block::Z, Sign::Plus), (Block::W, Sign::Plus), (Block::Z, Sign::Minus), (Block::W, Sign::Minus)] {
            // a conjugate variable pairs with the mirrored index
            let same = wrt.1 == Sign::Plus;
            for (i, j) in &bases {
                let j = if same { j.clone() } else { j.neg() };
                for a in 0..d {
                    let fam = ProbeFamily::Normal { comp, wrt, same_direction: same };
                    let rep = toeplitz_probe(p, fam, i, &j, &unit(a), ts, dom)?;
                    for r in rep.rows.iter().filter(|r| !r.partial) {
                        max_scaled = max_scaled.max(r.scaled_defect);
                        if r.defect > exact_defect {
                            exact_defect = r.defect;
                            witness = Some(format!("{comp:?} wrt {wrt:?} at i={i} j={j} c={} t={}", unit(a), r.t));
                        }
                    }
                }
            }
        }
    }
    Ok(ToeplitzSummary { defect: exact_defect, max_scaled, witness })
}

/// Checks (A1), (A2), (A4), (A5), (A6) and the reversibility of P; (A3) is left to
/// the resonance module.
pub fn verify_assumptions(
    model: &NlsModel,
    p: &PolyVectorField,
    zeta_samples: &[ParamPoint],
    dom: &DomainParams,
    opts: &AssumptionOptions,
) -> Result<AssumptionReport, KamError> {
    let mut checks = Vec::new();
    let (jac, w) = jacobian_check(model, zeta_samples, opts.fd_step)?;
    checks.push(CheckResult { name: "A1".into(), pass: jac <= opts.jacobian_tol, value: jac, witness: w });

    let mut worst_l: f64 = 0.0;
    let mut wl = None;
    for z in zeta_samples {
        let nf = normal_form_at(model, z)?;
        let m = nf.omega0.iter().chain(&nf.omegatilde0).fold(0.0, |a: f64, b| a.max(b.abs()));
        if m > worst_l {
            worst_l = m;
            wl = Some(format!("ζ = {:?} {:?}", z.xi, z.xitilde));
        }
    }
    checks.push(CheckResult { name: "A2".into(), pass: worst_l <= opts.l_bound, value: worst_l, witness: wl });

    let ratio = vf_norm(p, dom) / model.s.sqrt();
    checks.push(CheckResult { name: "A4".into(), pass: ratio <= opts.c_size, value: ratio, witness: None });

    let mv = check_momentum(p);
    checks.push(CheckResult {
        name: "A5".into(),
        pass: mv.is_empty(),
        value: mv.len() as f64,
        witness: mv.first().map(|v| format!("{} {:?} axis {} value {}", v.comp.tag(p.lattice()), v.monomial, v.axis, v.value)),
    });

    let tz = toeplitz_checks(p, dom, &opts.probe_ts)?;
    checks.push(CheckResult { name: "A6".into(), pass: tz.defect == 0.0, value: tz.defect, witness: tz.witness });

    let rev = reversibility_defect(p, Symmetry::Reversible);
    checks.push(CheckResult { name: "reversible".into(), pass: rev == 0.0, value: rev, witness: None });

    let all_pass = checks.iter().all(|c| c.pass);
    Ok(AssumptionReport { checks, all_pass })
}
