//! Resonant sets, their Monte-Carlo measure, and the direction decomposition used
//! for the 4×4 family.

mod direction;

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use direction::{
    decompose_direction, limit_determinant, mea3_tau_bound, mea4_tau_bound, Branch, DirectionDecomposition,
    DirectionOutcome, LimitReport, NormalLimits,
};

use crate::error::KamError;
use crate::homological::Dense;
use crate::lattice::{Block, Lattice, SiteId};
use crate::nls::ParamPoint;
use crate::vfield::NormalFormData;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Family {
    R0,
    R1,
    R2,
    R11,
    R12,
    R22,
    R3,
    R13,
    R23,
    R34,
}

impl Family {
    pub const ALL: [Family; 10] =
        [Family::R0, Family::R1, Family::R2, Family::R11, Family::R12, Family::R22, Family::R3, Family::R13, Family::R23, Family::R34];

    pub fn has_sign(self) -> bool {
        matches!(self, Family::R11 | Family::R12 | Family::R22 | Family::R13 | Family::R23 | Family::R34)
    }

    pub fn sites(self) -> usize {
        match self {
            Family::R0 => 0,
            Family::R1 | Family::R2 | Family::R3 => 1,
            _ => 2,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Family::R0 => "R0",
            Family::R1 => "R1",
            Family::R2 => "R2",
            Family::R11 => "R11",
            Family::R12 => "R12",
            Family::R22 => "R22",
            Family::R3 => "R3",
            Family::R13 => "R13",
            Family::R23 => "R23",
            Family::R34 => "R34",
        };
        f.write_str(s)
    }
}

/// Index classes: ℤᵈ₁ = normal z sites, ℤᵈ₂ = normal w sites.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SiteClass {
    Z1,
    Z2,
    Z1Only,
    Z2Only,
    Shared,
}

impl SiteClass {
    pub fn contains(self, lat: &Lattice, i: SiteId) -> bool {
        let (z, w) = (lat.is_normal(Block::Z, i), lat.is_normal(Block::W, i));
        match self {
            SiteClass::Z1 => z,
            SiteClass::Z2 => w,
            SiteClass::Z1Only => z && !w,
            SiteClass::Z2Only => w && !z,
            SiteClass::Shared => z && w,
        }
    }
}

impl Family {
    /// Index classes of (i, j) the family prescribes.
    pub fn classes(self) -> (Option<SiteClass>, Option<SiteClass>) {
        use SiteClass::*;
        match self {
            Family::R0 => (None, None),
            Family::R1 => (Some(Z1), None),
            Family::R2 => (Some(Z2), None),
            Family::R11 => (Some(Z1Only), Some(Z1Only)),
            Family::R12 => (Some(Z1Only), Some(Z2Only)),
            Family::R22 => (Some(Z2Only), Some(Z2Only)),
            Family::R3 => (Some(Shared), None),
            Family::R13 => (Some(Z1Only), Some(Shared)),
            Family::R23 => (Some(Z2Only), Some(Shared)),
            Family::R34 => (Some(Shared), Some(Shared)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResonanceTuple {
    pub family: Family,
    /// (k, k̃) in the combined angle order
    pub k: Vec<i16>,
    pub i: Option<SiteId>,
    pub j: Option<SiteId>,
    /// +1 or −1 for the ± families, +1 otherwise
    pub sign: i8,
    pub nu: usize,
}

impl ResonanceTuple {
    pub fn validate(&self, lat: &Lattice) -> Result<(), KamError> {
        if self.k.len() != lat.n() + lat.m() {
            return Err(KamError::Precondition("resonance tuple has wrong k length".into()));
        }
        if self.family == Family::R0 && self.k.iter().all(|&x| x == 0) {
            return Err(KamError::Precondition("R0 requires (k, k̃) ≠ 0".into()));
        }
        if !(self.sign == 1 || (self.sign == -1 && self.family.has_sign())) {
            return Err(KamError::Precondition(format!("bad sign {} for {}", self.sign, self.family)));
        }
        let (ci, cj) = self.family.classes();
        for (class, site) in [(ci, self.i), (cj, self.j)] {
            match (class, site) {
                (None, None) => {}
                (Some(c), Some(s)) if (s as usize) < lat.len() && c.contains(lat, s) => {}
                _ => {
                    return Err(KamError::Precondition(format!("sites of {} outside the prescribed index classes", self.family)));
                }
            }
        }
        Ok(())
    }

    pub fn describe(&self, lat: &Lattice) -> String {
        let site = |s: Option<SiteId>| s.map(|x| lat.site(x).to_string()).unwrap_or_else(|| "-".into());
        let sign = if self.family.has_sign() { if self.sign > 0 { "+" } else { "-" } } else { "" };
        format!("{}{} k={:?} i={} j={}", self.family, sign, self.k, site(self.i), site(self.j))
    }
}

fn det2(m: [[f64; 2]; 2]) -> f64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

/// aI₄ + M_i ⊗ I₂ + σ I₂ ⊗ M_jᵀ
pub fn tensor_matrix(a: f64, mi: [[f64; 2]; 2], mj: [[f64; 2]; 2], sigma: f64) -> Dense {
    let mut d = Dense::zeros(4);
    for p in 0..2 {
        for q in 0..2 {
            for r in 0..2 {
                for s in 0..2 {
                    let mut v = mi[p][r] * if q == s { 1.0 } else { 0.0 };
                    v += sigma * if p == r { 1.0 } else { 0.0 } * mj[s][q];
                    if p == r && q == s {
                        v += a;
                    }
                    d.set(2 * p + q, 2 * r + s, v);
                }
            }
        }
    }
    d
}

/// The family's scalar, 2×2 or 4×4 determinant.
pub fn expression(nf: &NormalFormData, lat: &Lattice, t: &ResonanceTuple) -> f64 {
    let a = nf.divisor(&t.k);
    let sg = t.sign as f64;
    let om = |i: Option<SiteId>| nf.big_omega(lat, i.unwrap_or(0));
    let omt = |i: Option<SiteId>| nf.big_omegatilde(lat, i.unwrap_or(0));
    let mm = |i: Option<SiteId>| nf.block_matrix(lat, i.unwrap_or(0));
    let shifted = |x: f64, m: [[f64; 2]; 2]| det2([[x + sg * m[0][0], sg * m[0][1]], [sg * m[1][0], x + sg * m[1][1]]]);
    match t.family {
        Family::R0 => a,
        Family::R1 => a + om(t.i),
        Family::R2 => a + omt(t.i),
        Family::R11 => a + om(t.i) + sg * om(t.j),
        Family::R12 => a + om(t.i) + sg * omt(t.j),
        Family::R22 => a + omt(t.i) + sg * omt(t.j),
        Family::R3 => {
            let m = mm(t.i);
            det2([[a + m[0][0], m[0][1]], [m[1][0], a + m[1][1]]])
        }
        Family::R13 => shifted(a + om(t.i), mm(t.j)),
        Family::R23 => shifted(a + omt(t.i), mm(t.j)),
        Family::R34 => tensor_matrix(a, mm(t.i), mm(t.j), sg).factor().det,
    }
}

/// |expression| − γ/K^τ; negative means ζ lies in the resonant set.
pub fn margin(nf: &NormalFormData, lat: &Lattice, t: &ResonanceTuple, gamma: f64, tau: f64, k_max: u32) -> f64 {
    expression(nf, lat, t).abs() - gamma / (k_max as f64).powf(tau)
}

/// Enumeration window: K_lo < |k| + |k̃| ≤ K_hi, pair families with |i ∓ j| ≤ K_hi.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub k_lo: u32,
    pub k_hi: u32,
    pub nu: usize,
}

fn k_vectors(nm: usize, lo: u32, hi: u32) -> Vec<Vec<i16>> {
    fn rec(k: &mut Vec<i16>, pos: usize, left: i32, out: &mut Vec<Vec<i16>>) {
        if pos == k.len() {
            out.push(k.clone());
            return;
        }
        for x in -left..=left {
            k[pos] = x as i16;
            rec(k, pos + 1, left - x.abs(), out);
        }
        k[pos] = 0;
    }
    let mut all = Vec::new();
    rec(&mut vec![0; nm], 0, hi as i32, &mut all);
    all.retain(|k| {
        let o: u32 = k.iter().map(|x| x.unsigned_abs() as u32).sum();
        o > lo && o <= hi
    });
    all
}

fn pair_allowed(lat: &Lattice, i: SiteId, j: SiteId, sign: i8, k_hi: u32) -> bool {
    let (a, b) = (lat.site(i), lat.site(j));
    let diff = if sign < 0 { a.sub(b) } else { a.add(b) };
    diff.norm2() <= (k_hi as i64) * (k_hi as i64)
}

/// All tuples of the ten families in the window.
pub fn enumerate_tuples(lat: &Lattice, w: &Window) -> Vec<ResonanceTuple> {
    let ks = k_vectors(lat.n() + lat.m(), w.k_lo, w.k_hi);
    let sites: Vec<SiteId> = (0..lat.len() as SiteId).collect();
    let in_class = |c: SiteClass| sites.iter().copied().filter(|&s| c.contains(lat, s)).collect::<Vec<_>>();
    let mut out = Vec::new();
    for fam in Family::ALL {
        let (ci, cj) = fam.classes();
        let signs: &[i8] = if fam.has_sign() { &[1, -1] } else { &[1] };
        for k in &ks {
            if fam != Family::R0 || k.iter().any(|&x| x != 0) {
                match (ci, cj) {
                    (None, _) => out.push(ResonanceTuple { family: fam, k: k.clone(), i: None, j: None, sign: 1, nu: w.nu }),
                    (Some(c), None) => {
                        for i in in_class(c) {
                            out.push(ResonanceTuple { family: fam, k: k.clone(), i: Some(i), j: None, sign: 1, nu: w.nu });
                        }
                    }
                    (Some(c1), Some(c2)) => {
                        let (l1, l2) = (in_class(c1), in_class(c2));
                        for &sg in signs {
                            for &i in &l1 {
                                for &j in &l2 {
                                    if pair_allowed(lat, i, j, sg, w.k_hi) {
                                        out.push(ResonanceTuple { family: fam, k: k.clone(), i: Some(i), j: Some(j), sign: sg, nu: w.nu });
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// Smallest |expression| per family at one normal form.
pub fn min_expressions(nf: &NormalFormData, lat: &Lattice, tuples: &[ResonanceTuple]) -> [f64; 10] {
    let mut out = [f64::INFINITY; 10];
    for t in tuples {
        let slot = Family::ALL.iter().position(|&f| f == t.family).unwrap_or(0);
        out[slot] = out[slot].min(expression(nf, lat, t).abs());
    }
    out
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MeasureRow {
    pub gamma: f64,
    pub threshold: f64,
    pub excluded: usize,
    pub fraction: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub per_family: Vec<(Family, usize)>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MeasureReport {
    pub samples: usize,
    pub seed: u64,
    pub window: Window,
    pub tau: f64,
    pub tuples: usize,
    pub rows: Vec<MeasureRow>,
    /// slope of log f against log γ over rows with γ > 0 and f > 0
    pub fitted_exponent: Option<f64>,
    /// per family: smallest |expression| over all samples
    pub worst: Vec<(Family, f64)>,
}

impl MeasureReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("gamma,threshold,excluded,fraction,ci_low,ci_high\n");
        for r in &self.rows {
            s.push_str(&format!("{:e},{:e},{},{:e},{:e},{:e}\n", r.gamma, r.threshold, r.excluded, r.fraction, r.ci_low, r.ci_high));
        }
        match self.fitted_exponent {
            Some(e) => s.push_str(&format!("# fitted_exponent,{e}\n")),
            None => s.push_str("# fitted_exponent,nan\n"),
        }
        s
    }

    pub fn worst_csv(&self) -> String {
        let mut s = String::from("family,min_abs_expression\n");
        for (f, v) in &self.worst {
            s.push_str(&format!("{f},{v:e}\n"));
        }
        s
    }
}

/// 95% Wilson interval.
pub fn wilson_interval(successes: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054_f64;
    let nf = n as f64;
    let p = successes as f64 / nf;
    let den = 1.0 + z * z / nf;
    let centre = (p + z * z / (2.0 * nf)) / den;
    let half = z * (p * (1.0 - p) / nf + z * z / (4.0 * nf * nf)).sqrt() / den;
    let lo = if successes == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if successes == n { 1.0 } else { (centre + half).min(1.0) };
    (lo, hi)
}

/// Least-squares slope of log y against log x.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points.iter().filter(|(x, y)| *x > 0.0 && *y > 0.0).map(|(x, y)| (x.ln(), y.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

const CHUNK: usize = 256;

/// Uniform samples of [0,1]^{dim}; chunk c draws from stream c of the master seed.
pub fn sample_params(n: usize, m: usize, samples: usize, seed: u64) -> Vec<ParamPoint> {
    let chunks = samples.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let count = CHUNK.min(samples - c * CHUNK);
            (0..count)
                .map(|_| {
                    let xi = (0..n).map(|_| rng.gen::<f64>()).collect();
                    let xt = (0..m).map(|_| rng.gen::<f64>()).collect();
                    ParamPoint { xi, xitilde: xt }
                })
                .collect::<Vec<_>>()
        })
        .collect()
}

/// Monte-Carlo estimate of the fraction of ζ ∈ [0,1]^{n+m} lying in the union of the
/// resonant sets of the window, for each γ in `gammas`.
pub fn excluded_fraction<F>(
    lat: &Lattice,
    nf_at: F,
    gammas: &[f64],
    tau: f64,
    window: &Window,
    samples: usize,
    seed: u64,
) -> Result<MeasureReport, KamError>
where
    F: Fn(&ParamPoint) -> Result<NormalFormData, KamError> + Sync,
{
    if samples < 100 {
        return Err(KamError::Precondition(format!("at least 100 samples needed, got {samples}")));
    }
    if gammas.iter().any(|g| !(*g >= 0.0)) || !(tau > 0.0) || window.k_hi <= window.k_lo {
        return Err(KamError::Config("measure needs γ ≥ 0, τ > 0 and a nonempty K window".into()));
    }
    let tuples = enumerate_tuples(lat, window);
    let points = sample_params(lat.n(), lat.m(), samples, seed);
    let mins: Vec<[f64; 10]> = points
        .par_iter()
        .map(|z| nf_at(z).map(|nf| min_expressions(&nf, lat, &tuples)))
        .collect::<Result<_, _>>()?;
    let scale = (window.k_hi as f64).powf(tau);
    let mut rows = Vec::new();
    for &g in gammas {
        let thr = g / scale;
        let excluded = mins.iter().filter(|m| m.iter().any(|&x| x < thr)).count();
        let per_family = Family::ALL
            .iter()
            .enumerate()
            .map(|(f, fam)| (*fam, mins.iter().filter(|m| m[f] < thr).count()))
            .collect();
        let (lo, hi) = wilson_interval(excluded, samples);
        rows.push(MeasureRow {
            gamma: g,
            threshold: thr,
            excluded,
            fraction: excluded as f64 / samples as f64,
            ci_low: lo,
            ci_high: hi,
            per_family,
        });
    }
    let fitted = loglog_slope(&rows.iter().map(|r| (r.gamma, r.fraction)).collect::<Vec<_>>());
    let worst = Family::ALL
        .iter()
        .enumerate()
        .map(|(f, fam)| (*fam, mins.iter().map(|m| m[f]).fold(f64::INFINITY, f64::min)))
        .collect();
    Ok(MeasureReport { samples, seed, window: *window, tau, tuples: tuples.len(), rows, fitted_exponent: fitted, worst })
}
