use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{FieldValue, PolyVectorField, C64};
use crate::lattice::{momentum_unchecked, Block, Lattice, Monomial, PhasePoint, Var};

/// The involution S(θ,φ,I,J,z,w,z̄,w̄) = (−θ,−φ,I,J,z̄,w̄,z,w).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct InvolutionSpec;

impl InvolutionSpec {
    pub fn apply(&self, y: &PhasePoint) -> PhasePoint {
        involution_point(y)
    }

    /// DS acting on a tangent vector.
    pub fn apply_tangent(&self, v: &FieldValue) -> FieldValue {
        v.iter()
            .map(|(var, c)| match var {
                Var::Angle(_) => (*var, -c),
                Var::Action(_) => (*var, *c),
                Var::Normal(x) => (Var::Normal(x.conj()), *c),
            })
            .collect()
    }
}

pub fn involution_point(y: &PhasePoint) -> PhasePoint {
    PhasePoint {
        theta: y.theta.iter().map(|x| -x).collect(),
        phi: y.phi.iter().map(|x| -x).collect(),
        act_i: y.act_i.clone(),
        act_j: y.act_j.clone(),
        z: y.zbar.clone(),
        zbar: y.z.clone(),
        w: y.wbar.clone(),
        wbar: y.w.clone(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Symmetry {
    /// DS·X = −X∘S
    Reversible,
    /// DS·X = X∘S
    Invariant,
}

/// A generic complex phase point (z̄ independent of z) with entries of size `scale`.
pub fn random_point(lat: &Lattice, rng: &mut impl Rng, scale: f64) -> PhasePoint {
    let mut y = PhasePoint::zero(lat);
    for t in y.theta.iter_mut().chain(y.phi.iter_mut()) {
        *t = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
    }
    for a in y.act_i.iter_mut().chain(y.act_j.iter_mut()) {
        *a = rng.gen_range(-scale..scale);
    }
    for (block, zs) in [(Block::Z, 0), (Block::W, 1)] {
        for j in 0..lat.len() {
            if !lat.is_normal(block, j as u16) {
                continue;
            }
            let mut c = || C64::new(rng.gen_range(-scale..scale), rng.gen_range(-scale..scale));
            let (a, b) = (c(), c());
            if zs == 0 {
                y.z[j] = a;
                y.zbar[j] = b;
            } else {
                y.w[j] = a;
                y.wbar[j] = b;
            }
        }
    }
    y
}

fn sampled(x: &PolyVectorField, sym: Symmetry, samples: usize, seed: u64) -> f64 {
    let lat = x.lattice();
    let s = InvolutionSpec;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sign = match sym {
        Symmetry::Reversible => 1.0,
        Symmetry::Invariant => -1.0,
    };
    let mut worst: f64 = 0.0;
    for _ in 0..samples.max(1) {
        let y = random_point(lat, &mut rng, 0.3);
        let lhs = s.apply_tangent(&x.eval(&y));
        let rhs = x.eval(&s.apply(&y));
        for v in lhs.keys().chain(rhs.keys()) {
            let a = lhs.get(v).copied().unwrap_or_default();
            let b = rhs.get(v).copied().unwrap_or_default();
            worst = worst.max((a + b * sign).norm());
        }
    }
    worst
}

/// max over sampled points of |DS·X(y) + X(S y)|, component sup.
pub fn check_reversible(x: &PolyVectorField, _s: &InvolutionSpec, samples: usize) -> f64 {
    sampled(x, Symmetry::Reversible, samples, 0x5eed)
}

/// max over sampled points of |DS·X(y) − X(S y)|.
pub fn check_invariant(x: &PolyVectorField, _s: &InvolutionSpec, samples: usize) -> f64 {
    sampled(x, Symmetry::Invariant, samples, 0x5eed)
}

/// Coefficient-level defect: the term (v,m,c) forces (v̄, m̄) to carry ε_v·c.
pub fn reversibility_defect(x: &PolyVectorField, sym: Symmetry) -> f64 {
    let mut worst: f64 = 0.0;
    for (v, m, c) in x.iter() {
        let eps = match (sym, v) {
            (Symmetry::Reversible, Var::Angle(_)) | (Symmetry::Invariant, Var::Action(_) | Var::Normal(_)) => 1.0,
            _ => -1.0,
        };
        let partner = x.get(v.conj(), &m.mirror());
        worst = worst.max((partner - c * eps).norm());
    }
    worst
}

#[derive(Clone, Debug, PartialEq)]
pub struct MomentumViolation {
    pub comp: Var,
    pub monomial: Monomial,
    pub axis: usize,
    pub value: i64,
}

/// All stored terms with nonzero momentum on some axis.
pub fn check_momentum(x: &PolyVectorField) -> Vec<MomentumViolation> {
    let lat = x.lattice();
    let mut out = Vec::new();
    for (v, m, _) in x.iter() {
        for axis in 0..lat.d() {
            let p = momentum_unchecked(lat, m, *v, axis);
            if p != 0 {
                out.push(MomentumViolation { comp: *v, monomial: m.clone(), axis, value: p });
                break;
            }
        }
    }
    out.sort_by(|a, b| (a.comp, &a.monomial).cmp(&(b.comp, &b.monomial)));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{LatticeConfig, NVar, Sign, Site};
    use crate::vfield::{as_vector_field, NormalFormData};
    use std::sync::Arc;

    fn lat() -> Arc<Lattice> {
        Arc::new(Lattice::new(LatticeConfig::default()).unwrap())
    }

    #[test]
    fn normal_form_is_reversible() {
        let lat = lat();
        let mut nf = NormalFormData::diagonal(&lat, vec![0.3, 1.2], vec![0.7, 1.1]);
        let j = lat.id(&Site(vec![1, 1])).unwrap();
        nf.a[j as usize] = 0.2;
        nf.atilde[j as usize] = 0.1;
        let x = as_vector_field(&nf, &lat);
        assert!(check_reversible(&x, &InvolutionSpec, 5) < 1e-15);
        assert_eq!(reversibility_defect(&x, Symmetry::Reversible), 0.0);
    }

    #[test]
    fn action_driven_rotation_is_reversible() {
        let lat = lat();
        let x = PolyVectorField::from_terms(
            lat.clone(),
            [(Var::Angle(0), Monomial::one(4).with_action(0, 1), C64::new(1.0, 0.0))],
        );
        assert!(check_reversible(&x, &InvolutionSpec, 5) < 1e-15);
        assert!(check_invariant(&x, &InvolutionSpec, 5) > 1e-3);
    }

    #[test]
    fn odd_angle_dependence_on_angle_component_fails() {
        // sin θ1 ∂θ1 is the trigonometric stand-in for θ1 ∂θ1
        let lat = lat();
        let x = PolyVectorField::from_terms(
            lat.clone(),
            [
                (Var::Angle(0), Monomial::fourier(&[1, 0, 0, 0]), C64::new(0.0, -0.5)),
                (Var::Angle(0), Monomial::fourier(&[-1, 0, 0, 0]), C64::new(0.0, 0.5)),
            ],
        );
        assert!(check_reversible(&x, &InvolutionSpec, 5) > 1e-3);
        assert!(reversibility_defect(&x, Symmetry::Reversible) > 0.5);
    }

    #[test]
    fn momentum_violation_reported() {
        let lat = lat();
        assert!(check_momentum(&PolyVectorField::zero(lat.clone())).is_empty());
        let a = lat.id(&Site(vec![2, 0])).unwrap();
        let b = lat.id(&Site(vec![1, 1])).unwrap();
        let x = PolyVectorField::from_terms(
            lat.clone(),
            [(
                Var::Normal(NVar::new(Block::Z, Sign::Plus, b)),
                Monomial::one(4).with_normal(NVar::new(Block::Z, Sign::Plus, a), 1),
                C64::new(1.0, 0.0),
            )],
        );
        let v = check_momentum(&x);
        assert_eq!(v.len(), 1);
        assert_eq!((v[0].axis, v[0].value), (0, 1));
    }
}
