use std::f64::consts::PI;
use std::sync::Arc;

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::error::KamError;
use crate::lattice::{Block, Lattice, LatticeConfig, Monomial, NVar, Sign, Site, SiteId, Var};
use crate::vfield::{PolyVectorField, C64};

/// ζ = (ξ, ξ̃) ∈ [0,1]ⁿ × [0,1]ᵐ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamPoint {
    pub xi: Vec<f64>,
    pub xitilde: Vec<f64>,
}

impl ParamPoint {
    pub fn new(xi: Vec<f64>, xitilde: Vec<f64>) -> Result<Self, KamError> {
        let p = ParamPoint { xi, xitilde };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), KamError> {
        if self.xi.iter().chain(&self.xitilde).any(|x| !(0.0..=1.0).contains(x)) {
            return Err(KamError::Config("parameter point outside [0,1]^(n+m)".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.xi.len() + self.xitilde.len()
    }

    /// Combined coordinate a (ξ first, then ξ̃).
    pub fn get(&self, a: usize) -> f64 {
        if a < self.xi.len() {
            self.xi[a]
        } else {
            self.xitilde[a - self.xi.len()]
        }
    }

    pub fn set(&mut self, a: usize, v: f64) {
        let n = self.xi.len();
        if a < n {
            self.xi[a] = v;
        } else {
            self.xitilde[a - n] = v;
        }
    }
}

/// The coupled lattice NLS with G₁ = |u|⁴|v|², G₂ = |u|²|v|².
#[derive(Clone, Debug)]
pub struct NlsModel {
    pub lattice: Arc<Lattice>,
    /// I⁰_b
    pub amp_i: Vec<f64>,
    /// J⁰_b
    pub amp_j: Vec<f64>,
    /// the amplitude scale s with s < I⁰, J⁰ < 2s
    pub s: f64,
}

impl NlsModel {
    pub fn new(cfg: LatticeConfig, amp_i: Vec<f64>, amp_j: Vec<f64>, s: f64) -> Result<Self, KamError> {
        let lattice = Arc::new(Lattice::new(cfg)?);
        if amp_i.len() != lattice.n() || amp_j.len() != lattice.m() {
            return Err(KamError::Config("one amplitude per tangential site is required".into()));
        }
        if !(s > 0.0 && s.is_finite()) {
            return Err(KamError::Config(format!("amplitude scale s must be positive, got {s}")));
        }
        if let Some(a) = amp_i.iter().chain(&amp_j).find(|&&a| !(a > s && a < 2.0 * s)) {
            return Err(KamError::Config(format!("amplitude {a} outside (s, 2s) for s = {s}")));
        }
        Ok(NlsModel { lattice, amp_i, amp_j, s })
    }

    /// All amplitudes equal to ratio·s.
    pub fn uniform(cfg: LatticeConfig, s: f64, ratio: f64) -> Result<Self, KamError> {
        let (n, m) = (cfg.n(), cfg.m());
        NlsModel::new(cfg, vec![ratio * s; n], vec![ratio * s; m], s)
    }

    pub fn d(&self) -> usize {
        self.lattice.d()
    }

    /// Amplitude for the combined angle index.
    pub fn amplitude(&self, a: usize) -> f64 {
        let n = self.amp_i.len();
        if a < n {
            self.amp_i[a]
        } else {
            self.amp_j[a - n]
        }
    }

    /// λ_h (block Z) or λ̃_h (block W).
    pub fn eigenvalue(&self, zeta: &ParamPoint, block: Block, h: SiteId) -> f64 {
        let base = self.lattice.norm2(h) as f64;
        match (block, self.lattice.tangential_slot(block, h)) {
            (Block::Z, Some(b)) => base + zeta.xi[b],
            (Block::W, Some(b)) => base + zeta.xitilde[b],
            _ => base,
        }
    }
}

fn two_pi_pow(e: usize) -> f64 {
    (0..e).fold(1.0, |acc, _| acc * (2.0 * PI))
}

/// 2i/(2π)^{2d}
pub fn quintic_coefficient(d: usize) -> C64 {
    C64::new(0.0, 2.0 / two_pi_pow(2 * d))
}

/// i/(2π)^d
pub fn cubic_coefficient(d: usize) -> C64 {
    C64::new(0.0, 1.0 / two_pi_pow(d))
}

/// Coefficient of q_i q_j p_k q̄_l p̄_m in Q^{(q_h)}.
pub fn gn3_coefficient(i: &Site, j: &Site, k: &Site, l: &Site, m: &Site, h: &Site) -> C64 {
    let conserved = (0..h.dim()).all(|a| i.0[a] + j.0[a] + k.0[a] - l.0[a] - m.0[a] - h.0[a] == 0);
    if conserved {
        quintic_coefficient(h.dim())
    } else {
        C64::new(0.0, 0.0)
    }
}

/// Coefficient of q_i p_j q̄_k in Q̃^{(p_h)}.
pub fn gn4_coefficient(i: &Site, j: &Site, k: &Site, h: &Site) -> C64 {
    let conserved = (0..h.dim()).all(|a| i.0[a] + j.0[a] - k.0[a] - h.0[a] == 0);
    if conserved {
        cubic_coefficient(h.dim())
    } else {
        C64::new(0.0, 0.0)
    }
}

/// Which variable sits in a slot of a nonlinear tuple.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct Slot {
    pub block: Block,
    pub sign: Sign,
}

const fn slot(block: Block, sign: Sign) -> Slot {
    Slot { block, sign }
}

/// q_i q_j p_k q̄_l p̄_m
pub(crate) const QUINTIC: [Slot; 5] = [
    slot(Block::Z, Sign::Plus),
    slot(Block::Z, Sign::Plus),
    slot(Block::W, Sign::Plus),
    slot(Block::Z, Sign::Minus),
    slot(Block::W, Sign::Minus),
];

/// q_i p_j q̄_k
pub(crate) const CUBIC: [Slot; 3] = [slot(Block::Z, Sign::Plus), slot(Block::W, Sign::Plus), slot(Block::Z, Sign::Minus)];

/// Calls `f(sites, h)` for every ordered tuple over `slots` whose output index
/// h = Σ ±site lies in the lattice, using at most `max_normal` non-tangential slots.
pub(crate) fn for_each_tuple(lat: &Lattice, slots: &[Slot], max_normal: usize, mut f: impl FnMut(&[SiteId], SiteId)) {
    let d = lat.d();
    let mut chosen = vec![0 as SiteId; slots.len()];
    let mut acc = vec![0i32; d];
    let normal: [Vec<SiteId>; 2] = [lat.normal_sites(Block::Z).collect(), lat.normal_sites(Block::W).collect()];
    #[allow(clippy::too_many_arguments)]
    fn rec(
        lat: &Lattice,
        slots: &[Slot],
        normal: &[Vec<SiteId>; 2],
        depth: usize,
        budget: usize,
        chosen: &mut [SiteId],
        acc: &mut [i32],
        f: &mut dyn FnMut(&[SiteId], SiteId),
    ) {
        if depth == slots.len() {
            if let Some(h) = lat.id(&Site(acc.to_vec())) {
                f(chosen, h);
            }
            return;
        }
        let sl = slots[depth];
        let sg = sl.sign.value();
        let mut visit = |id: SiteId, budget: usize, chosen: &mut [SiteId], acc: &mut [i32]| {
            chosen[depth] = id;
            let s = lat.site(id);
            for (a, x) in acc.iter_mut().enumerate() {
                *x += sg * s.0[a];
            }
            rec(lat, slots, normal, depth + 1, budget, chosen, acc, f);
            for (a, x) in acc.iter_mut().enumerate() {
                *x -= sg * s.0[a];
            }
        };
        for &id in lat.tangential(sl.block) {
            visit(id, budget, chosen, acc);
        }
        if budget > 0 {
            for &id in &normal[sl.block.index()] {
                visit(id, budget - 1, chosen, acc);
            }
        }
    }
    rec(lat, slots, &normal, 0, max_normal, &mut chosen, &mut acc, &mut f);
}

fn tuple_monomial(nm: usize, slots: &[Slot], sites: &[SiteId]) -> Monomial {
    let mut m = Monomial::one(nm);
    for (sl, &id) in slots.iter().zip(sites) {
        m = m.with_normal(NVar::new(sl.block, sl.sign, id), 1);
    }
    m
}

/// Largest box for which the full lattice field is built (ordered quintic tuples ≤ this).
pub const FULL_TUPLE_LIMIT: f64 = 5e7;

/// P⁰ in plain lattice coordinates: Q^{(q_h)} ∂/∂q_h + Q̃^{(p_h)} ∂/∂p_h and the conjugate
/// components, over every momentum-conserving ordered tuple in the box.
pub fn build_lattice_perturbation(model: &NlsModel) -> Result<PolyVectorField, KamError> {
    let lat = Arc::new(Lattice::all_normal(model.d(), model.lattice.config().radius)?);
    let tuples = (lat.len() as f64).powi(5);
    if tuples > FULL_TUPLE_LIMIT {
        return Err(KamError::Precondition(format!(
            "full lattice field needs {tuples:.2e} tuples; use a smaller radius or the action-angle enumeration"
        )));
    }
    let mut counts: FxHashMap<(Var, Monomial), u32> = FxHashMap::default();
    for (slots, block) in [(&QUINTIC[..], Block::Z), (&CUBIC[..], Block::W)] {
        for_each_tuple(&lat, slots, slots.len(), |sites, h| {
            let comp = Var::Normal(NVar::new(block, Sign::Plus, h));
            *counts.entry((comp, tuple_monomial(0, slots, sites))).or_default() += 1;
        });
    }
    let (cq, cc) = (quintic_coefficient(model.d()), cubic_coefficient(model.d()));
    let mut half = PolyVectorField::zero(lat.clone());
    for ((v, m), n) in counts {
        let c = match v {
            Var::Normal(x) if x.block == Block::Z => cq,
            _ => cc,
        };
        half.set_term(v, m, c * n as f64);
    }
    let mirror = half.mirror();
    Ok(half.plus(&mirror))
}

/// Number of ordered tuples that produce the monomial `m` on the lattice component `comp`,
/// counted directly from the slot pattern.
pub fn tuple_multiplicity(comp: NVar, m: &Monomial) -> u32 {
    let slots: &[Slot] = match comp.block {
        Block::Z => &QUINTIC,
        Block::W => &CUBIC,
    };
    let mut per_slot_type: Vec<(Slot, u32)> = Vec::new();
    for sl in slots {
        match per_slot_type.iter_mut().find(|(s, _)| s == sl) {
            Some((_, c)) => *c += 1,
            None => per_slot_type.push((*sl, 1)),
        }
    }
    let mut total = 1u32;
    for (sl, count) in per_slot_type {
        let exps: Vec<u32> =
            m.nv.iter().filter(|(v, _)| v.block == sl.block && v.sign == sl.sign).map(|&(_, e)| e as u32).collect();
        if exps.iter().sum::<u32>() != count {
            return 0;
        }
        // multinomial count!/Π e!
        let fact = |n: u32| (1..=n).product::<u32>();
        total *= fact(count) / exps.iter().map(|&e| fact(e)).product::<u32>();
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_model() -> NlsModel {
        let cfg = LatticeConfig { radius: 1, ..LatticeConfig::default() };
        NlsModel::uniform(cfg, 1e-2, 1.9).unwrap()
    }

    #[test]
    fn amplitude_bounds_enforced() {
        assert!(NlsModel::uniform(LatticeConfig::default(), 1e-2, 2.0).is_err());
        assert!(NlsModel::uniform(LatticeConfig::default(), 1e-2, 1.0).is_err());
        assert!(NlsModel::uniform(LatticeConfig::default(), 1e-2, 1.5).is_ok());
    }

    #[test]
    fn coefficient_rules() {
        let s = |a: i32, b: i32| Site(vec![a, b]);
        let c = gn3_coefficient(&s(1, 0), &s(0, 1), &s(0, 0), &s(1, 1), &s(0, 0), &s(0, 0));
        assert_eq!(c, quintic_coefficient(2));
        assert_eq!(gn3_coefficient(&s(1, 0), &s(0, 1), &s(0, 0), &s(1, 1), &s(0, 0), &s(1, 0)), C64::new(0.0, 0.0));
        assert_eq!(gn4_coefficient(&s(1, 0), &s(0, 1), &s(1, 1), &s(0, 0)), cubic_coefficient(2));
        assert_eq!(gn4_coefficient(&s(1, 0), &s(0, 1), &s(1, 1), &s(0, 1)), C64::new(0.0, 0.0));
    }

    #[test]
    fn lattice_field_has_counted_coefficients() {
        let model = small_model();
        let p = build_lattice_perturbation(&model).unwrap();
        assert!(!p.is_empty());
        for (v, m, c) in p.iter() {
            let Var::Normal(x) = v else { panic!("angle component in lattice field") };
            let base = if x.block == Block::Z { quintic_coefficient(2) } else { cubic_coefficient(2) };
            let (x, m, c) = if x.sign.is_plus() { (*x, m.clone(), *c) } else { (x.conj(), m.mirror(), c.conj()) };
            assert_eq!(c, base * tuple_multiplicity(x, &m) as f64);
        }
    }

    #[test]
    fn tuple_enumeration_respects_budget() {
        let lat = Lattice::new(LatticeConfig { radius: 2, ..LatticeConfig::default() }).unwrap();
        let mut n0 = 0;
        for_each_tuple(&lat, &CUBIC, 0, |s, _| {
            assert!(s.iter().zip(&CUBIC).all(|(&id, sl)| !lat.is_normal(sl.block, id)));
            n0 += 1;
        });
        // 2·2·2 tangential choices, all outputs inside the box
        assert_eq!(n0, 8);
    }
}
