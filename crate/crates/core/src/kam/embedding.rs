use super::KamState;
use crate::lattice::{Block, Lattice, PhasePoint, Var};
use crate::vfield::{FieldValue, PolyVectorField};

/// Torus map (θ, φ) ↦ Φ₀∘…∘Φ_ν(θ, φ, 0, 0, 0, 0) with Φ_μ the time-1 flow of F_μ.
#[derive(Clone, Debug)]
pub struct Embedding {
    pub transforms: Vec<PolyVectorField>,
    /// final (ω, ω̃)
    pub frequencies: Vec<f64>,
    pub substeps: usize,
}

pub fn extract_embedding(state: &KamState) -> Embedding {
    Embedding {
        transforms: state.transforms.clone(),
        frequencies: state.nf.omega.iter().chain(&state.nf.omegatilde).copied().collect(),
        substeps: 8,
    }
}

fn axpy(lat: &Lattice, y: &PhasePoint, h: f64, k: &FieldValue) -> PhasePoint {
    let mut out = y.clone();
    let n = lat.n();
    for (v, c) in k {
        match *v {
            Var::Angle(a) if (a as usize) < n => out.theta[a as usize] += h * c.re,
            Var::Angle(a) => out.phi[a as usize - n] += h * c.re,
            Var::Action(a) if (a as usize) < n => out.act_i[a as usize] += h * c.re,
            Var::Action(a) => out.act_j[a as usize - n] += h * c.re,
            Var::Normal(x) => {
                let i = x.site as usize;
                let slot = match (x.block, x.sign.is_plus()) {
                    (Block::Z, true) => &mut out.z[i],
                    (Block::Z, false) => &mut out.zbar[i],
                    (Block::W, true) => &mut out.w[i],
                    (Block::W, false) => &mut out.wbar[i],
                };
                *slot += c * h;
            }
        }
    }
    out
}

/// Time-1 flow of `f` by classical RK4.
pub(crate) fn flow(f: &PolyVectorField, y: &PhasePoint, substeps: usize) -> PhasePoint {
    if f.is_empty() {
        return y.clone();
    }
    let lat = f.lattice();
    let h = 1.0 / substeps as f64;
    let mut y = y.clone();
    for _ in 0..substeps {
        let k1 = f.eval(&y);
        let k2 = f.eval(&axpy(lat, &y, h / 2.0, &k1));
        let k3 = f.eval(&axpy(lat, &y, h / 2.0, &k2));
        let k4 = f.eval(&axpy(lat, &y, h, &k3));
        y = axpy(lat, &y, h / 6.0, &k1);
        y = axpy(lat, &y, h / 3.0, &k2);
        y = axpy(lat, &y, h / 3.0, &k3);
        y = axpy(lat, &y, h / 6.0, &k4);
    }
    y
}

impl Embedding {
    pub fn lattice(&self) -> Option<&std::sync::Arc<Lattice>> {
        self.transforms.first().map(|f| f.lattice())
    }

    /// Phase point of the torus at the given angles (θ first, then φ).
    pub fn eval(&self, lat: &Lattice, angles: &[f64]) -> PhasePoint {
        let mut y = PhasePoint::zero(lat);
        let n = lat.n();
        y.theta.copy_from_slice(&angles[..n]);
        y.phi.copy_from_slice(&angles[n..]);
        for f in self.transforms.iter().rev() {
            y = flow(f, &y, self.substeps);
        }
        y
    }

    /// Distance from `y` to the torus after matching angles: the torus point Ψ(α) whose
    /// angle part equals that of `y` is found by fixed-point iteration, then the largest
    /// action or normal difference is returned divided by `s`.
    pub fn distance_to_torus(&self, lat: &Lattice, y: &PhasePoint, s: f64) -> (f64, Vec<f64>) {
        let nm = lat.n() + lat.m();
        let target: Vec<f64> = (0..nm).map(|b| y.angle(b)).collect();
        let mut alpha = target.clone();
        let mut p = self.eval(lat, &alpha);
        for _ in 0..6 {
            for b in 0..nm {
                alpha[b] += wrap(target[b] - p.angle(b));
            }
            p = self.eval(lat, &alpha);
        }
        let mut worst: f64 = 0.0;
        for b in 0..nm {
            worst = worst.max((y.action(b) - p.action(b)).abs());
        }
        for (u, v) in y.z.iter().zip(&p.z).chain(y.w.iter().zip(&p.w)) {
            worst = worst.max((u - v).norm());
        }
        (worst / s, alpha)
    }

    /// sup over the sample angles of the largest action and normal coordinate.
    pub fn distance_from_trivial(&self, lat: &Lattice, samples: &[Vec<f64>]) -> f64 {
        let mut worst: f64 = 0.0;
        for a in samples {
            let y = self.eval(lat, a);
            let n = lat.n() + lat.m();
            for b in 0..n {
                worst = worst.max(y.action(b).abs());
                worst = worst.max((y.angle(b) - a[b]).abs());
            }
            for v in y.z.iter().chain(&y.zbar).chain(&y.w).chain(&y.wbar) {
                worst = worst.max(v.norm());
            }
        }
        worst
    }
}

fn wrap(x: f64) -> f64 {
    use std::f64::consts::PI;
    (x + PI).rem_euclid(2.0 * PI) - PI
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{LatticeConfig, Monomial};
    use crate::vfield::C64;
    use std::sync::Arc;

    #[test]
    fn no_transforms_is_trivial() {
        let lat = Lattice::new(LatticeConfig::default()).unwrap();
        let e = Embedding { transforms: vec![], frequencies: vec![], substeps: 8 };
        let y = e.eval(&lat, &[0.1, 0.2, 0.3, 0.4]);
        assert_eq!(y.theta, vec![0.1, 0.2]);
        assert!(y.act_i.iter().all(|&x| x == 0.0));
        assert_eq!(e.distance_from_trivial(&lat, &[vec![0.0; 4]]), 0.0);
    }

    #[test]
    fn constant_field_translates() {
        let lat = Arc::new(Lattice::new(LatticeConfig::default()).unwrap());
        let f = PolyVectorField::from_terms(lat.clone(), [(Var::Action(1), Monomial::one(4), C64::new(0.25, 0.0))]);
        let y = flow(&f, &PhasePoint::zero(&lat), 4);
        assert!((y.act_i[1] - 0.25).abs() < 1e-15);
    }
}
