//! Sparse Taylor–Fourier polynomial vector fields.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex64;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::error::KamError;
use crate::lattice::{Lattice, Monomial, PhasePoint, Var};

mod bracket;
mod lie;
mod norm;
mod normal_form;
mod symmetry;
mod text;
mod toeplitz;

pub use bracket::{directional, lie_bracket, lie_bracket_truncated};
pub use lie::{pushforward, LieSeries};
pub use norm::{function_norm, term_norm, vf_norm};
pub use normal_form::{as_vector_field, NormalFormData};
pub use symmetry::{
    check_invariant, check_momentum, check_reversible, involution_point, random_point, reversibility_defect,
    InvolutionSpec, MomentumViolation, Symmetry,
};
pub use text::{parse_field, write_field};
pub use toeplitz::{toeplitz_probe, ProbeFamily, ProbeReport, ProbeRow};

pub type C64 = Complex64;
pub type Key = (Var, Monomial);

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainParams {
    pub r: f64,
    pub s: f64,
    pub rho: f64,
}

impl DomainParams {
    pub fn new(r: f64, s: f64, rho: f64) -> Result<Self, KamError> {
        if !(r > 0.0 && s > 0.0 && rho > 0.0) {
            return Err(KamError::Config(format!("domain parameters must be positive: r={r} s={s} rho={rho}")));
        }
        Ok(DomainParams { r, s, rho })
    }
}

/// Degree caps applied while building products.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Truncation {
    pub max_degree: u32,
    pub max_normal_degree: u32,
}

impl Truncation {
    pub const NONE: Truncation = Truncation { max_degree: u32::MAX, max_normal_degree: u32::MAX };

    pub fn new(max_degree: u32, max_normal_degree: u32) -> Self {
        Truncation { max_degree, max_normal_degree }
    }

    pub fn admits(&self, m: &Monomial) -> bool {
        m.degree() <= self.max_degree && m.normal_degree() <= self.max_normal_degree
    }
}

/// Value of a field at a phase point, by component.
pub type FieldValue = BTreeMap<Var, C64>;

#[derive(Clone, Debug)]
pub struct PolyVectorField {
    lattice: Arc<Lattice>,
    terms: FxHashMap<Key, C64>,
}

impl PolyVectorField {
    pub fn zero(lattice: Arc<Lattice>) -> Self {
        PolyVectorField { lattice, terms: FxHashMap::default() }
    }

    pub fn from_map(lattice: Arc<Lattice>, terms: FxHashMap<Key, C64>) -> Self {
        let mut f = PolyVectorField { lattice, terms };
        f.drop_zeros();
        f
    }

    pub fn from_terms<I: IntoIterator<Item = (Var, Monomial, C64)>>(lattice: Arc<Lattice>, terms: I) -> Self {
        let mut f = PolyVectorField::zero(lattice);
        for (v, m, c) in terms {
            f.add_term(v, m, c);
        }
        f.drop_zeros();
        f
    }

    pub fn lattice(&self) -> &Arc<Lattice> {
        &self.lattice
    }

    pub fn nm(&self) -> usize {
        self.lattice.n() + self.lattice.m()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Var, &Monomial, &C64)> {
        self.terms.iter().map(|((v, m), c)| (v, m, c))
    }

    pub fn map(&self) -> &FxHashMap<Key, C64> {
        &self.terms
    }

    pub fn into_map(self) -> FxHashMap<Key, C64> {
        self.terms
    }

    pub fn get(&self, v: Var, m: &Monomial) -> C64 {
        self.terms.get(&(v, m.clone())).copied().unwrap_or_default()
    }

    pub fn add_term(&mut self, v: Var, m: Monomial, c: C64) {
        *self.terms.entry((v, m)).or_default() += c;
    }

    pub fn set_term(&mut self, v: Var, m: Monomial, c: C64) {
        if c == C64::default() {
            self.terms.remove(&(v, m));
        } else {
            self.terms.insert((v, m), c);
        }
    }

    pub fn remove(&mut self, v: Var, m: &Monomial) -> Option<C64> {
        self.terms.remove(&(v, m.clone()))
    }

    pub fn drop_zeros(&mut self) {
        self.terms.retain(|_, c| *c != C64::default());
    }

    pub fn retain<F: FnMut(&Var, &Monomial, &C64) -> bool>(&mut self, mut f: F) {
        self.terms.retain(|(v, m), c| f(v, m, c));
    }

    pub fn filtered<F: Fn(&Var, &Monomial, &C64) -> bool>(&self, f: F) -> Self {
        let terms = self.terms.iter().filter(|((v, m), c)| f(v, m, c)).map(|(k, c)| (k.clone(), *c)).collect();
        PolyVectorField { lattice: self.lattice.clone(), terms }
    }

    pub fn scaled(&self, s: C64) -> Self {
        let terms = self.terms.iter().map(|(k, c)| (k.clone(), c * s)).collect();
        PolyVectorField::from_map(self.lattice.clone(), terms)
    }

    pub fn add_scaled(&mut self, other: &PolyVectorField, s: C64) {
        for (k, c) in &other.terms {
            *self.terms.entry(k.clone()).or_default() += c * s;
        }
        self.drop_zeros();
    }

    pub fn plus(&self, other: &PolyVectorField) -> Self {
        let mut f = self.clone();
        f.add_scaled(other, C64::new(1.0, 0.0));
        f
    }

    pub fn minus(&self, other: &PolyVectorField) -> Self {
        let mut f = self.clone();
        f.add_scaled(other, C64::new(-1.0, 0.0));
        f
    }

    /// The conjugate mirror: (v, m, c) ↦ (v̄, m̄, c̄).
    pub fn mirror(&self) -> Self {
        let terms = self.terms.iter().map(|((v, m), c)| ((v.conj(), m.mirror()), c.conj())).collect();
        PolyVectorField { lattice: self.lattice.clone(), terms }
    }

    pub fn max_abs_coef(&self) -> f64 {
        self.terms.values().fold(0.0, |a, c| a.max(c.norm()))
    }

    pub fn max_degree(&self) -> u32 {
        self.terms.keys().map(|(_, m)| m.degree()).max().unwrap_or(0)
    }

    pub fn truncated(&self, t: &Truncation) -> Self {
        self.filtered(|_, m, _| t.admits(m))
    }

    /// Drop terms whose norm contribution on `dom` is below `rel_tol` times the field norm.
    pub fn prune(&mut self, dom: &DomainParams, rel_tol: f64) {
        let total = vf_norm(self, dom);
        if total == 0.0 {
            return;
        }
        let lat = self.lattice.clone();
        self.terms.retain(|(v, m), c| term_norm(&lat, *v, m, *c, dom) >= rel_tol * total);
    }

    /// Terms in canonical order (component, then monomial).
    pub fn sorted_terms(&self) -> Vec<(Var, Monomial, C64)> {
        let mut out: Vec<_> = self.terms.iter().map(|((v, m), c)| (*v, m.clone(), *c)).collect();
        out.sort_by(|a, b| (a.0, &a.1).cmp(&(b.0, &b.1)));
        out
    }

    pub fn components(&self) -> Vec<Var> {
        let mut v: Vec<Var> = self.terms.keys().map(|(v, _)| *v).collect();
        v.sort();
        v.dedup();
        v
    }

    pub fn eval(&self, y: &PhasePoint) -> FieldValue {
        let mut out = FieldValue::new();
        for ((v, m), c) in &self.terms {
            *out.entry(*v).or_default() += c * m.eval(y);
        }
        out
    }

    /// Coefficient-wise sup distance to another field.
    pub fn max_diff(&self, other: &PolyVectorField) -> f64 {
        let mut d: f64 = 0.0;
        for (k, c) in &self.terms {
            d = d.max((c - other.terms.get(k).copied().unwrap_or_default()).norm());
        }
        for (k, c) in &other.terms {
            if !self.terms.contains_key(k) {
                d = d.max(c.norm());
            }
        }
        d
    }
}

impl PartialEq for PolyVectorField {
    fn eq(&self, other: &Self) -> bool {
        self.terms == other.terms
    }
}
