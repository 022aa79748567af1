use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{PolyVectorField, C64};
use crate::error::KamError;
use crate::lattice::{Block, Lattice, Monomial, NVar, Sign, SiteId, Var};

/// Frequencies and couplings of N + 𝒜. Site maps are indexed by [`SiteId`];
/// entries outside the relevant index class are zero and ignored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalFormData {
    pub omega: Vec<f64>,
    pub omegatilde: Vec<f64>,
    pub omega0: Vec<f64>,
    pub omegatilde0: Vec<f64>,
    pub a: Vec<f64>,
    pub atilde: Vec<f64>,
}

impl NormalFormData {
    /// Ω_j = |j|², Ω̃_j = |j|², no couplings.
    pub fn diagonal(lat: &Lattice, omega: Vec<f64>, omegatilde: Vec<f64>) -> Self {
        let z = vec![0.0; lat.len()];
        NormalFormData { omega, omegatilde, omega0: z.clone(), omegatilde0: z.clone(), a: z.clone(), atilde: z }
    }

    /// Tangential frequency for the combined angle index (θ first, then φ).
    pub fn angle_freq(&self, a: usize) -> f64 {
        let n = self.omega.len();
        if a < n {
            self.omega[a]
        } else {
            self.omegatilde[a - n]
        }
    }

    /// ⟨k,ω⟩ + ⟨k̃,ω̃⟩.
    pub fn divisor(&self, k: &[i16]) -> f64 {
        k.iter().enumerate().map(|(a, &ka)| ka as f64 * self.angle_freq(a)).sum()
    }

    pub fn big_omega(&self, lat: &Lattice, j: SiteId) -> f64 {
        lat.norm2(j) as f64 + self.omega0[j as usize]
    }

    pub fn big_omegatilde(&self, lat: &Lattice, j: SiteId) -> f64 {
        lat.norm2(j) as f64 + self.omegatilde0[j as usize]
    }

    pub fn freq(&self, lat: &Lattice, block: Block, j: SiteId) -> f64 {
        match block {
            Block::Z => self.big_omega(lat, j),
            Block::W => self.big_omegatilde(lat, j),
        }
    }

    /// M_j = [[Ω_j, A_j], [Ã_j, Ω̃_j]].
    pub fn block_matrix(&self, lat: &Lattice, j: SiteId) -> [[f64; 2]; 2] {
        let i = j as usize;
        [[self.big_omega(lat, j), self.a[i]], [self.atilde[i], self.big_omegatilde(lat, j)]]
    }

    /// Real matrix D with the linear part of N + 𝒜 equal to i·D on normal variables:
    /// entry (comp, var).
    pub fn linear_entry(&self, lat: &Lattice, comp: NVar, var: NVar) -> f64 {
        if comp.site != var.site || comp.sign != var.sign {
            return 0.0;
        }
        let r = comp.sign.value() as f64;
        let j = comp.site;
        match (comp.block, var.block) {
            (Block::Z, Block::Z) => r * self.big_omega(lat, j),
            (Block::W, Block::W) => r * self.big_omegatilde(lat, j),
            (Block::Z, Block::W) if lat.is_shared(j) => r * self.a[j as usize],
            (Block::W, Block::Z) if lat.is_shared(j) => r * self.atilde[j as usize],
            _ => 0.0,
        }
    }

    pub fn validate(&self, lat: &Lattice, bound: Option<f64>) -> Result<(), KamError> {
        if self.omega.len() != lat.n() || self.omegatilde.len() != lat.m() {
            return Err(KamError::Precondition("tangential frequency vector has wrong length".into()));
        }
        for v in [&self.omega0, &self.omegatilde0, &self.a, &self.atilde] {
            if v.len() != lat.len() {
                return Err(KamError::Precondition("site map has wrong length".into()));
            }
        }
        let finite = self.omega.iter().chain(&self.omegatilde).chain(&self.omega0).chain(&self.omegatilde0);
        if finite.chain(&self.a).chain(&self.atilde).any(|x| !x.is_finite()) {
            return Err(KamError::Numerical("non-finite normal form entry".into()));
        }
        for j in 0..lat.len() as SiteId {
            if !lat.is_shared(j) && (self.a[j as usize] != 0.0 || self.atilde[j as usize] != 0.0) {
                return Err(KamError::Precondition(format!("coupling at non-shared site {}", lat.site(j))));
            }
            if let Some(l) = bound {
                if self.omega0[j as usize].abs() > l || self.omegatilde0[j as usize].abs() > l {
                    return Err(KamError::Precondition(format!("normal frequency correction above L at {}", lat.site(j))));
                }
            }
        }
        Ok(())
    }
}

/// The linear field N + 𝒜.
pub fn as_vector_field(nf: &NormalFormData, lat: &Arc<Lattice>) -> PolyVectorField {
    let nm = lat.n() + lat.m();
    let one = Monomial::one(nm);
    let mut f = PolyVectorField::zero(lat.clone());
    for a in 0..nm {
        f.add_term(Var::Angle(a as u8), one.clone(), C64::new(nf.angle_freq(a), 0.0));
    }
    for block in [Block::Z, Block::W] {
        for j in lat.normal_sites(block) {
            for sign in [Sign::Plus, Sign::Minus] {
                let comp = NVar::new(block, sign, j);
                for vb in [Block::Z, Block::W] {
                    let var = NVar::new(vb, sign, j);
                    if !lat.is_normal(vb, j) {
                        continue;
                    }
                    let d = nf.linear_entry(lat, comp, var);
                    if d != 0.0 {
                        f.add_term(Var::Normal(comp), one.clone().with_normal(var, 1), C64::new(0.0, d));
                    }
                }
            }
        }
    }
    f.drop_zeros();
    f
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{LatticeConfig, PhasePoint, Site};

    #[test]
    fn diagonal_field_and_torus() {
        let lat = Arc::new(Lattice::new(LatticeConfig::default()).unwrap());
        let nf = NormalFormData::diagonal(&lat, vec![0.3, 1.2], vec![0.7, 1.1]);
        let f = as_vector_field(&nf, &lat);
        assert!(f.iter().all(|(v, m, _)| match v {
            Var::Normal(c) => m.nv.len() == 1 && m.nv[0].0.block == c.block,
            _ => true,
        }));
        let at0 = f.eval(&PhasePoint::zero(&lat));
        let nonzero: Vec<_> = at0.iter().filter(|(_, c)| c.norm() > 0.0).collect();
        assert_eq!(nonzero.len(), 4);
        assert_eq!(at0[&Var::Angle(2)], C64::new(0.7, 0.0));
    }

    #[test]
    fn coupled_block_is_i_times_m() {
        let lat = Arc::new(Lattice::new(LatticeConfig::default()).unwrap());
        let mut nf = NormalFormData::diagonal(&lat, vec![0.3, 1.2], vec![0.7, 1.1]);
        let j = lat.id(&Site(vec![2, -1])).unwrap();
        nf.a[j as usize] = 0.25;
        nf.atilde[j as usize] = -0.5;
        nf.omega0[j as usize] = 0.01;
        let f = as_vector_field(&nf, &lat);
        let m = nf.block_matrix(&lat, j);
        let one = Monomial::one(4);
        let zv = NVar::new(Block::Z, Sign::Plus, j);
        let wv = NVar::new(Block::W, Sign::Plus, j);
        let entries = [
            (zv, zv, m[0][0]),
            (zv, wv, m[0][1]),
            (wv, zv, m[1][0]),
            (wv, wv, m[1][1]),
        ];
        for (c, v, x) in entries {
            assert_eq!(f.get(Var::Normal(c), &one.clone().with_normal(v, 1)), C64::new(0.0, x));
            assert_eq!(f.get(Var::Normal(c.conj()), &one.clone().with_normal(v.conj(), 1)), C64::new(0.0, -x));
        }
    }
}
