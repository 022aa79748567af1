use rayon::prelude::*;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use super::model::{cubic_coefficient, for_each_tuple, quintic_coefficient, NlsModel, ParamPoint, Slot, CUBIC, QUINTIC};
use crate::error::KamError;
use crate::lattice::{Block, Monomial, NVar, Sign, SiteId, Var};
use crate::vfield::{Key, NormalFormData, PolyVectorField, C64};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpansionOptions {
    /// Taylor degree of each (I + I⁰)^{e/2} factor
    pub action_degree: u32,
    /// at most this many tuple slots outside the tangential sites
    pub normal_cap: usize,
    /// total degree in (I, z, w) of a kept monomial
    pub max_degree: u32,
    /// tolerated relative tail of the action expansion on |I| < s
    pub tail_tol: f64,
}

impl Default for ExpansionOptions {
    fn default() -> Self {
        ExpansionOptions { action_degree: 3, normal_cap: 1, max_degree: 6, tail_tol: 0.1 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TransformReport {
    pub tuples: usize,
    pub contributions: usize,
    pub terms: usize,
    /// worst relative truncation tail over all tuples, summed over factors
    pub tail_estimate: f64,
}

/// Generalized binomial C(a, p).
pub fn binomial(a: f64, p: u32) -> f64 {
    (0..p).fold(1.0, |acc, i| acc * (a - i as f64) / (i as f64 + 1.0))
}

/// Exponent numerators e in (I+I⁰)^{e/2} range over −1..=E_MAX.
const E_MIN: i32 = -1;
const E_MAX: i32 = 7;

struct Tables {
    /// [angle][e − E_MIN][p] = (I⁰)^{e/2−p} · C(e/2, p)
    factor: Vec<Vec<Vec<f64>>>,
    /// [angle][e − E_MIN] = relative tail bound
    tail: Vec<Vec<f64>>,
}

fn tables(model: &NlsModel, deg: u32) -> Tables {
    let nm = model.lattice.n() + model.lattice.m();
    let mut factor = Vec::with_capacity(nm);
    let mut tail = Vec::with_capacity(nm);
    for a in 0..nm {
        let i0 = model.amplitude(a);
        let q = model.s / i0;
        let mut fa = Vec::new();
        let mut ta = Vec::new();
        for e in E_MIN..=E_MAX {
            let h = e as f64 / 2.0;
            fa.push((0..=deg).map(|p| i0.powf(h - p as f64) * binomial(h, p)).collect::<Vec<_>>());
            // |C(h,p)| is nonincreasing in p beyond h, so the tail is dominated by a geometric series
            ta.push(binomial(h, deg + 1).abs() * q.powi(deg as i32 + 1) / (1.0 - q));
        }
        factor.push(fa);
        tail.push(ta);
    }
    Tables { factor, tail }
}

/// Contributions of one transformed tuple: the angle exponents e_a, Fourier vector,
/// normal monomial, component and base coefficient.
struct Shape {
    e: Vec<i32>,
    k: Vec<i16>,
    comp: Var,
    base: C64,
}

fn angle_of(model: &NlsModel, block: Block, id: SiteId) -> Option<usize> {
    let slot = model.lattice.tangential_slot(block, id)?;
    Some(match block {
        Block::Z => slot,
        Block::W => model.lattice.n() + slot,
    })
}

fn emit(
    shape: &Shape,
    normal: &Monomial,
    tab: &Tables,
    opts: &ExpansionOptions,
    out: &mut Vec<(Key, C64)>,
) -> f64 {
    let nm = shape.e.len();
    let involved: Vec<usize> = (0..nm).filter(|&a| shape.e[a] != 0).collect();
    let ndeg = normal.normal_degree();
    let mut tail: f64 = 0.0;
    for &a in &involved {
        tail += tab.tail[a][(shape.e[a] - E_MIN) as usize];
    }
    let k: smallvec::SmallVec<[i16; 4]> = smallvec::SmallVec::from_slice(&shape.k);
    let mut p = vec![0u32; involved.len()];
    loop {
        let total: u32 = p.iter().sum();
        if total + ndeg <= opts.max_degree {
            let mut c = shape.base;
            let mut m = normal.clone();
            m.k = k.clone();
            for (slot, &a) in involved.iter().enumerate() {
                let f = tab.factor[a][(shape.e[a] - E_MIN) as usize][p[slot] as usize];
                c *= f;
                m.l[a] = p[slot] as u16;
            }
            if c != C64::new(0.0, 0.0) {
                out.push(((shape.comp, m), c));
            }
        }
        // odometer over p ∈ [0, deg]^involved
        let mut i = 0;
        loop {
            if i == p.len() {
                return tail;
            }
            p[i] += 1;
            if p[i] <= opts.action_degree {
                break;
            }
            p[i] = 0;
            i += 1;
        }
    }
}

/// Sum contributions key by key in sorted order so equal multisets give equal sums.
fn sorted_sum(mut v: Vec<C64>) -> C64 {
    v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    v.into_iter().fold(C64::new(0.0, 0.0), |acc, c| acc + c)
}

/// Normal form of the integrable part at ζ.
pub fn normal_form_at(model: &NlsModel, zeta: &ParamPoint) -> Result<NormalFormData, KamError> {
    let lat = &model.lattice;
    if zeta.xi.len() != lat.n() || zeta.xitilde.len() != lat.m() {
        return Err(KamError::Precondition("parameter dimension differs from the tangential sets".into()));
    }
    zeta.validate()?;
    let omega = (0..lat.n()).map(|b| model.eigenvalue(zeta, Block::Z, lat.tangential(Block::Z)[b])).collect();
    let omegat = (0..lat.m()).map(|b| model.eigenvalue(zeta, Block::W, lat.tangential(Block::W)[b])).collect();
    Ok(NormalFormData::diagonal(lat, omega, omegat))
}

/// Substitutes q_{i⁽ᵇ⁾} = √(I_b+I⁰_b)e^{iθ_b}, p_{ĩ⁽ᵇ⁾} = √(J_b+J⁰_b)e^{iφ_b}, q_h = z_h, p_h = w_h
/// into the lattice nonlinearity and expands in the actions.
pub fn action_angle(
    model: &NlsModel,
    zeta: &ParamPoint,
    opts: &ExpansionOptions,
) -> Result<(NormalFormData, PolyVectorField, TransformReport), KamError> {
    let nf = normal_form_at(model, zeta)?;
    let lat = model.lattice.clone();
    let nm = lat.n() + lat.m();
    let tab = tables(model, opts.action_degree);
    let d = lat.d();
    let mut tuples: Vec<(usize, Vec<SiteId>, SiteId)> = Vec::new();
    for (which, slots) in [(0usize, &QUINTIC[..]), (1, &CUBIC[..])] {
        for_each_tuple(&lat, slots, opts.normal_cap, |s, h| tuples.push((which, s.to_vec(), h)));
    }
    let results: Vec<(Vec<(Key, C64)>, f64)> = tuples
        .par_chunks(256)
        .map(|chunk| {
            let mut out = Vec::new();
            let mut worst: f64 = 0.0;
            for (which, sites, h) in chunk {
                let (slots, comp_block, base): (&[Slot], Block, C64) = if *which == 0 {
                    (&QUINTIC, Block::Z, quintic_coefficient(d))
                } else {
                    (&CUBIC, Block::W, cubic_coefficient(d))
                };
                let mut e = vec![0i32; nm];
                let mut k = vec![0i16; nm];
                let mut normal = Monomial::one(nm);
                for (sl, &id) in slots.iter().zip(sites) {
                    match angle_of(model, sl.block, id) {
                        Some(a) => {
                            e[a] += 1;
                            k[a] += sl.sign.value() as i16;
                        }
                        None => normal = normal.with_normal(NVar::new(sl.block, sl.sign, id), 1),
                    }
                }
                match angle_of(model, comp_block, *h) {
                    None => {
                        let comp = Var::Normal(NVar::new(comp_block, Sign::Plus, *h));
                        worst = worst.max(emit(&Shape { e, k, comp, base }, &normal, &tab, opts, &mut out));
                    }
                    Some(a) => {
                        // angle: Q/(2i q), action: q̄ Q
                        let (mut ea, mut ka) = (e.clone(), k.clone());
                        ea[a] -= 1;
                        ka[a] -= 1;
                        let sh = Shape { e: ea, k: ka, comp: Var::Angle(a as u8), base: base / C64::new(0.0, 2.0) };
                        worst = worst.max(emit(&sh, &normal, &tab, opts, &mut out));
                        e[a] += 1;
                        k[a] -= 1;
                        let sh = Shape { e, k, comp: Var::Action(a as u8), base };
                        worst = worst.max(emit(&sh, &normal, &tab, opts, &mut out));
                    }
                }
            }
            (out, worst)
        })
        .collect();
    let mut tail: f64 = 0.0;
    let mut grouped: FxHashMap<Key, Vec<C64>> = FxHashMap::default();
    let mut contributions = 0;
    for (out, w) in results {
        tail = tail.max(w);
        contributions += out.len();
        for (key, c) in out {
            grouped.entry(key).or_default().push(c);
        }
    }
    if tail > opts.tail_tol {
        return Err(KamError::Precondition(format!(
            "action expansion tail {tail:.3e} exceeds tolerance {:.3e}; raise the degree or the amplitudes",
            opts.tail_tol
        )));
    }
    let half: FxHashMap<Key, C64> = grouped.into_par_iter().map(|(k, v)| (k, sorted_sum(v))).collect();
    let half = PolyVectorField::from_map(lat.clone(), half);
    let mut p = half.plus(&half.mirror());
    p.drop_zeros();
    let report = TransformReport { tuples: tuples.len(), contributions, terms: p.len(), tail_estimate: tail };
    Ok((nf, p, report))
}

/// Lattice amplitudes (q, p) of a phase point on the real subspace.
pub fn to_lattice(model: &NlsModel, y: &crate::lattice::PhasePoint) -> super::SimState {
    let lat = &model.lattice;
    let mut st = super::SimState::zero(lat.len());
    for (block, amps) in [(Block::Z, &mut st.q), (Block::W, &mut st.p)] {
        for id in 0..lat.len() as SiteId {
            amps[id as usize] = match angle_of(model, block, id) {
                Some(a) => C64::from_polar((y.action(a) + model.amplitude(a)).sqrt(), y.angle(a)),
                None => y.normal(block, true, id),
            };
        }
    }
    st
}

/// Inverse of [`to_lattice`] on the real subspace.
pub fn from_lattice(model: &NlsModel, st: &super::SimState) -> crate::lattice::PhasePoint {
    let lat = &model.lattice;
    let mut y = crate::lattice::PhasePoint::zero(lat);
    for (block, amps) in [(Block::Z, &st.q), (Block::W, &st.p)] {
        for id in 0..lat.len() as SiteId {
            let v = amps[id as usize];
            match angle_of(model, block, id) {
                Some(a) => {
                    let (act, ang) = (v.norm_sqr() - model.amplitude(a), v.arg());
                    if a < lat.n() {
                        y.act_i[a] = act;
                        y.theta[a] = ang;
                    } else {
                        y.act_j[a - lat.n()] = act;
                        y.phi[a - lat.n()] = ang;
                    }
                }
                None => match block {
                    Block::Z => {
                        y.z[id as usize] = v;
                        y.zbar[id as usize] = v.conj();
                    }
                    Block::W => {
                        y.w[id as usize] = v;
                        y.wbar[id as usize] = v.conj();
                    }
                },
            }
        }
    }
    y
}
