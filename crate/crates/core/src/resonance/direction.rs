use serde::{Deserialize, Serialize};

use super::tensor_matrix;
use crate::error::KamError;
use crate::lattice::{Lattice, Site};
use crate::vfield::NormalFormData;

fn factorial(n: usize) -> f64 {
    (1..=n).map(|x| x as f64).product()
}

/// τ > 4(d−1)(d+1)! / ((d−1)!(d+1) − 1)
pub fn mea3_tau_bound(d: usize) -> f64 {
    if d < 2 {
        return 0.0;
    }
    4.0 * (d - 1) as f64 * factorial(d + 1) / (factorial(d - 1) * (d + 1) as f64 - 1.0)
}

/// τ > d!(2d(d+1) + n + m + 1) + 4(d−1)(d+1)! / ((d−1)!(d+1) − 1)
pub fn mea4_tau_bound(d: usize, n: usize, m: usize) -> f64 {
    factorial(d) * (2 * d * (d + 1) + n + m + 1) as f64 + mea3_tau_bound(d)
}

/// i = i₀ + Σ t_l c_l, j = j₀ + Σ t_l c_l.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DirectionDecomposition {
    pub i0: Site,
    pub j0: Site,
    pub c: Vec<Site>,
    pub t: Vec<i64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum DirectionOutcome {
    Decomposition(DirectionDecomposition),
    /// |det D| evaluated directly and found ≥ 1
    DeterminantBound(f64),
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

fn within(s: &Site, bound: f64) -> bool {
    (s.norm2() as f64) <= bound * bound
}

/// Searches, for d ≤ 2, the decomposition with |i₀|, |j₀|, |c| ≤ 3K² and c ⟂ (i − j)
/// primitive; candidates are taken in lexicographic order of c, then by |t|.
/// When none exists the determinant is evaluated by `certificate` and must be ≥ 1.
pub fn decompose_direction(
    i: &Site,
    j: &Site,
    k_max: u32,
    certificate: Option<&dyn Fn() -> f64>,
) -> Result<DirectionOutcome, KamError> {
    let d = i.dim();
    if d > 2 || j.dim() != d || d == 0 {
        return Err(KamError::Precondition(format!("direction search supports d ≤ 2, got d = {d}")));
    }
    let diff = i.sub(j);
    if diff.norm2() > (k_max as i64).pow(2) {
        return Err(KamError::Precondition(format!("|i − j| exceeds K = {k_max}")));
    }
    let bound = 3.0 * (k_max as f64).powi(2);
    if d == 1 {
        if within(i, bound) && within(j, bound) {
            return Ok(DirectionOutcome::Decomposition(DirectionDecomposition { i0: i.clone(), j0: j.clone(), c: vec![], t: vec![] }));
        }
    } else {
        let b = bound.floor() as i32;
        for c0 in -b..=b {
            for c1 in -b..=b {
                let c = Site(vec![c0, c1]);
                if !within(&c, bound) || gcd(c0 as i64, c1 as i64) != 1 || c.dot(&diff) != 0 {
                    continue;
                }
                let cc = c.norm2() as f64;
                let centre = (i.dot(&c) as f64 / cc).round() as i64;
                let reach = (2.0 * bound / cc.sqrt()).ceil() as i64 + 1;
                let mut ts: Vec<i64> = (centre - reach..=centre + reach).collect();
                ts.sort_by_key(|t| (t.abs(), *t));
                for t in ts {
                    let shift = c.scale(t as i32);
                    let (i0, j0) = (i.sub(&shift), j.sub(&shift));
                    if within(&i0, bound) && within(&j0, bound) {
                        return Ok(DirectionOutcome::Decomposition(DirectionDecomposition { i0, j0, c: vec![c], t: vec![t] }));
                    }
                }
            }
        }
    }
    match certificate {
        Some(f) => {
            let v = f();
            if v >= 1.0 {
                Ok(DirectionOutcome::DeterminantBound(v))
            } else {
                Err(KamError::Numerical(format!(
                    "counterexample candidate: no decomposition of i={i}, j={j} and |det| = {v:e} < 1"
                )))
            }
        }
        None => Err(KamError::Numerical(format!("counterexample candidate: no decomposition of i={i}, j={j}"))),
    }
}

/// Limits of the normal-form corrections along i₀ + tc and j₀ + tc:
/// [[Ω⁰, A], [Ã, Ω̃⁰]] without the |·|² part, and the constant |i|² − |j|².
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalLimits {
    pub m_i: [[f64; 2]; 2],
    pub m_j: [[f64; 2]; 2],
    pub quad: f64,
    /// t at which the limits were read
    pub read_at: i64,
}

impl NormalLimits {
    /// Reads the corrections at the farthest t ≥ 1 along the line that stays on
    /// shared sites of the lattice. `None` when c is not orthogonal to i₀ − j₀ or
    /// no such t exists.
    pub fn from_normal_form(nf: &NormalFormData, lat: &Lattice, dec: &DirectionDecomposition) -> Option<Self> {
        let c = dec.c.first()?;
        if c.dot(&dec.i0.sub(&dec.j0)) != 0 {
            return None;
        }
        let corr = |id: u16| {
            let k = id as usize;
            [[nf.omega0[k], nf.a[k]], [nf.atilde[k], nf.omegatilde0[k]]]
        };
        let mut best = None;
        let mut t = 1;
        loop {
            let (i, j) = (dec.i0.add(&c.scale(t)), dec.j0.add(&c.scale(t)));
            match (lat.id(&i), lat.id(&j)) {
                (Some(a), Some(b)) => {
                    if lat.is_shared(a) && lat.is_shared(b) {
                        best = Some((t, a, b));
                    }
                }
                _ => break,
            }
            t += 1;
        }
        let (t, a, b) = best?;
        Some(NormalLimits { m_i: corr(a), m_j: corr(b), quad: (dec.i0.norm2() - dec.j0.norm2()) as f64, read_at: t as i64 })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    /// |t_l| above K^{l!τ/d!+4}: the limit determinant is checked against γ/K^{l!τ/d!}
    Limit,
    /// all |t| below their thresholds: the determinant itself is checked against γ/K^τ
    Finite,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LimitReport {
    pub limit_det: f64,
    pub det_at_t: Option<f64>,
    pub branch: Branch,
    pub t_threshold: f64,
    pub det_threshold: f64,
    pub passes: bool,
    /// |det D(t) − limit|
    pub defect: Option<f64>,
    /// εK⁴/|t|
    pub defect_bound: Option<f64>,
}

/// lim det D(t) for D = aI₄ + M_i ⊗ I₂ − I₂ ⊗ M_jᵀ along the decomposition, with the
/// case-l thresholds (d = 2 has the single case l = 1).
#[allow(clippy::too_many_arguments)]
pub fn limit_determinant(
    nf: &NormalFormData,
    lat: &Lattice,
    k: &[i16],
    dec: &DirectionDecomposition,
    limits: &NormalLimits,
    case_l: usize,
    gamma: f64,
    tau: f64,
    k_max: u32,
    eps: f64,
) -> Result<LimitReport, KamError> {
    let d = lat.d();
    if case_l == 0 || case_l > dec.c.len() {
        return Err(KamError::Precondition(format!("case l = {case_l} outside 1..={}", dec.c.len())));
    }
    let a = nf.divisor(k);
    let limit_det = tensor_matrix(a + limits.quad, limits.m_i, limits.m_j, -1.0).factor().det;
    let kf = k_max as f64;
    let ratio = factorial(case_l) / factorial(d);
    let t_threshold = kf.powf(ratio * tau + 4.0);
    let tl = dec.t[case_l - 1];
    let shift = dec.c.iter().zip(&dec.t).fold(Site::zero(d), |acc, (c, &t)| acc.add(&c.scale(t as i32)));
    let det_at_t = match (lat.id(&dec.i0.add(&shift)), lat.id(&dec.j0.add(&shift))) {
        (Some(i), Some(j)) => {
            Some(tensor_matrix(a, nf.block_matrix(lat, i), nf.block_matrix(lat, j), -1.0).factor().det)
        }
        _ => None,
    };
    let (branch, det_threshold, value) = if (tl.abs() as f64) > t_threshold {
        (Branch::Limit, gamma / kf.powf(ratio * tau), limit_det)
    } else {
        (Branch::Finite, gamma / kf.powf(tau), det_at_t.unwrap_or(limit_det))
    };
    let defect = det_at_t.map(|x| (x - limit_det).abs());
    let defect_bound = (tl != 0).then(|| eps * kf.powi(4) / tl.abs() as f64);
    Ok(LimitReport { limit_det, det_at_t, branch, t_threshold, det_threshold, passes: value.abs() >= det_threshold, defect, defect_bound })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::LatticeConfig;

    #[test]
    fn tau_bounds() {
        assert_eq!(mea3_tau_bound(2), 12.0);
        assert_eq!(mea4_tau_bound(2, 2, 2), 46.0);
    }

    #[test]
    fn equal_sites_decompose() {
        let i = Site(vec![5, 4]);
        match decompose_direction(&i, &i, 1, None).unwrap() {
            DirectionOutcome::Decomposition(d) => {
                assert_eq!(d.i0, d.j0);
                assert_eq!(d.i0.add(&d.c[0].scale(d.t[0] as i32)), i);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn worked_pair() {
        let (i, j) = (Site(vec![5, 0]), Site(vec![3, 0]));
        match decompose_direction(&i, &j, 4, None).unwrap() {
            DirectionOutcome::Decomposition(d) => {
                assert_eq!(d.i0.sub(&d.j0), i.sub(&j));
                assert!(d.i0.norm2() <= 48 * 48 && d.c[0].dot(&i.sub(&j)) == 0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn trivial_limits_give_product() {
        let lat = Lattice::new(LatticeConfig::default()).unwrap();
        let nf = NormalFormData::diagonal(&lat, vec![0.3, 1.6], vec![0.2, 1.8]);
        let dec = DirectionDecomposition { i0: Site(vec![0, 2]), j0: Site(vec![1, 2]), c: vec![Site(vec![0, 1])], t: vec![1] };
        let lim = NormalLimits::from_normal_form(&nf, &lat, &dec).unwrap();
        let k = [1i16, 0, -1, 0];
        let rep = limit_determinant(&nf, &lat, &k, &dec, &lim, 1, 1e-3, 50.0, 2, 0.0).unwrap();
        let x = nf.divisor(&k) + lim.quad;
        assert!((rep.limit_det - x.powi(4)).abs() < 1e-12);
        assert_eq!(rep.branch, Branch::Finite);
        assert_eq!(rep.defect, Some(0.0));
    }
}
