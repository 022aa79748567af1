//! Truncated lattice, site bookkeeping, weighted sequence norms and momentum.

use std::collections::HashMap;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::KamError;

mod monomial;
pub use monomial::{momentum, Monomial, NVar, NormalExps, Sign, Var};
pub(crate) use monomial::momentum_unchecked;

/// Index of a site in the lexicographically sorted site list of a [`Lattice`].
pub type SiteId = u16;

/// A lattice site in Z^d.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Site(pub Vec<i32>);

impl Site {
    pub fn zero(d: usize) -> Self {
        Site(vec![0; d])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm2(&self) -> i64 {
        self.0.iter().map(|&x| (x as i64) * (x as i64)).sum()
    }

    pub fn sup_norm(&self) -> i32 {
        self.0.iter().map(|x| x.abs()).max().unwrap_or(0)
    }

    pub fn add(&self, other: &Site) -> Site {
        Site(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &Site) -> Site {
        Site(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn scale(&self, t: i32) -> Site {
        Site(self.0.iter().map(|a| a * t).collect())
    }

    pub fn neg(&self) -> Site {
        self.scale(-1)
    }

    pub fn dot(&self, other: &Site) -> i64 {
        self.0.iter().zip(&other.0).map(|(&a, &b)| a as i64 * b as i64).sum()
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, x) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{x}")?;
        }
        write!(f, ")")
    }
}

/// Euclidean norm |j|.
pub fn site_norm(j: &Site) -> f64 {
    (j.norm2() as f64).sqrt()
}

/// Σ_j e^{|j|ρ}|z_j| over a finitely supported sequence.
pub fn weighted_seq_norm<'a, I>(z: I, rho: f64) -> Result<f64, KamError>
where
    I: IntoIterator<Item = (&'a Site, &'a Complex64)>,
{
    if !(rho >= 0.0) {
        return Err(KamError::Config(format!("weight rho must be nonnegative, got {rho}")));
    }
    Ok(z.into_iter().map(|(j, v)| (site_norm(j) * rho).exp() * v.norm()).sum())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeConfig {
    pub d: usize,
    pub radius: i32,
    pub tangential1: Vec<Site>,
    pub tangential2: Vec<Site>,
}

impl Default for LatticeConfig {
    fn default() -> Self {
        LatticeConfig {
            d: 2,
            radius: 5,
            tangential1: vec![Site(vec![0, 0]), Site(vec![1, 0])],
            tangential2: vec![Site(vec![0, 0]), Site(vec![0, 1])],
        }
    }
}

impl LatticeConfig {
    pub fn validate(&self) -> Result<(), KamError> {
        if self.d == 0 {
            return Err(KamError::Config("lattice dimension must be positive".into()));
        }
        if self.radius < 1 {
            return Err(KamError::Config("lattice radius must be at least 1".into()));
        }
        let origin = Site::zero(self.d);
        for (name, set) in [("tangential1", &self.tangential1), ("tangential2", &self.tangential2)] {
            if !set.contains(&origin) {
                return Err(KamError::Config(format!("{name} must contain the origin")));
            }
            for (a, s) in set.iter().enumerate() {
                if s.dim() != self.d {
                    return Err(KamError::Config(format!("{name}: site {s} has wrong dimension")));
                }
                if s.sup_norm() > self.radius {
                    return Err(KamError::Config(format!("{name}: site {s} outside radius")));
                }
                if set[..a].contains(s) {
                    return Err(KamError::Config(format!("{name}: duplicate site {s}")));
                }
            }
        }
        if self.tangential1.len() > 64 || self.tangential2.len() > 64 {
            return Err(KamError::Config("too many tangential sites".into()));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.tangential1.len()
    }

    pub fn m(&self) -> usize {
        self.tangential2.len()
    }
}

/// The two families of normal variables: z lives on Z^d minus I_1, w on Z^d minus I_2.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Block {
    Z,
    W,
}

impl Block {
    pub fn index(self) -> usize {
        match self {
            Block::Z => 0,
            Block::W => 1,
        }
    }
}

/// Immutable truncated lattice with tangential/normal classification.
#[derive(Debug)]
pub struct Lattice {
    config: LatticeConfig,
    sites: Vec<Site>,
    norms: Vec<f64>,
    index: HashMap<Site, SiteId>,
    tangential: [Vec<SiteId>; 2],
    // tangential slot of a site per block, if any
    slot: [Vec<Option<u8>>; 2],
    origin: SiteId,
}

impl Lattice {
    pub fn new(config: LatticeConfig) -> Result<Self, KamError> {
        config.validate()?;
        let d = config.d;
        let r = config.radius;
        let side = (2 * r + 1) as usize;
        let total = side.checked_pow(d as u32).filter(|&t| t < u16::MAX as usize).ok_or_else(|| {
            KamError::Config(format!("lattice with radius {r} in dimension {d} is too large"))
        })?;
        let mut sites = Vec::with_capacity(total);
        for idx in 0..total {
            let mut rem = idx;
            let mut c = vec![0i32; d];
            for a in (0..d).rev() {
                c[a] = (rem % side) as i32 - r;
                rem /= side;
            }
            sites.push(Site(c));
        }
        // odometer order above is already lexicographic
        let norms = sites.iter().map(site_norm).collect();
        let index: HashMap<Site, SiteId> =
            sites.iter().enumerate().map(|(i, s)| (s.clone(), i as SiteId)).collect();
        let mut tangential = [Vec::new(), Vec::new()];
        let mut slot = [vec![None; total], vec![None; total]];
        for (b, set) in [&config.tangential1, &config.tangential2].into_iter().enumerate() {
            for (a, s) in set.iter().enumerate() {
                let id = index[s];
                tangential[b].push(id);
                slot[b][id as usize] = Some(a as u8);
            }
        }
        let origin = index[&Site::zero(d)];
        Ok(Lattice { config, sites, norms, index, tangential, slot, origin })
    }

    /// Lattice of plain coordinates: no tangential sites, every site carries q (as z) and p (as w).
    pub fn all_normal(d: usize, radius: i32) -> Result<Self, KamError> {
        let mut cfg = LatticeConfig { d, radius, tangential1: vec![Site::zero(d)], tangential2: vec![Site::zero(d)] };
        cfg.validate()?;
        let mut lat = Lattice::new(cfg.clone())?;
        cfg.tangential1.clear();
        cfg.tangential2.clear();
        lat.config = cfg;
        lat.tangential = [Vec::new(), Vec::new()];
        lat.slot = [vec![None; lat.sites.len()], vec![None; lat.sites.len()]];
        Ok(lat)
    }

    pub fn config(&self) -> &LatticeConfig {
        &self.config
    }

    pub fn d(&self) -> usize {
        self.config.d
    }

    pub fn n(&self) -> usize {
        self.config.n()
    }

    pub fn m(&self) -> usize {
        self.config.m()
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn site(&self, id: SiteId) -> &Site {
        &self.sites[id as usize]
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn norm(&self, id: SiteId) -> f64 {
        self.norms[id as usize]
    }

    pub fn norm2(&self, id: SiteId) -> i64 {
        self.sites[id as usize].norm2()
    }

    pub fn id(&self, s: &Site) -> Option<SiteId> {
        self.index.get(s).copied()
    }

    pub fn origin(&self) -> SiteId {
        self.origin
    }

    pub fn tangential(&self, block: Block) -> &[SiteId] {
        &self.tangential[block.index()]
    }

    /// Position of `id` in the tangential list of `block`.
    pub fn tangential_slot(&self, block: Block, id: SiteId) -> Option<usize> {
        self.slot[block.index()][id as usize].map(|a| a as usize)
    }

    pub fn is_normal(&self, block: Block, id: SiteId) -> bool {
        self.slot[block.index()][id as usize].is_none()
    }

    /// Normal for both blocks, i.e. in Z^d_1 ∩ Z^d_2.
    pub fn is_shared(&self, id: SiteId) -> bool {
        self.is_normal(Block::Z, id) && self.is_normal(Block::W, id)
    }

    pub fn normal_sites(&self, block: Block) -> impl Iterator<Item = SiteId> + '_ {
        (0..self.sites.len() as SiteId).filter(move |&i| self.is_normal(block, i))
    }

    pub fn translate(&self, id: SiteId, by: &Site) -> Option<SiteId> {
        self.id(&self.site(id).add(by))
    }

    /// Site of the tangential variable with angle index `a` (θ first, then φ).
    pub fn angle_site(&self, a: usize) -> &Site {
        let n = self.n();
        if a < n {
            &self.config.tangential1[a]
        } else {
            &self.config.tangential2[a - n]
        }
    }
}

/// Complex phase point; normal coordinates are indexed by [`SiteId`] over the whole
/// lattice, entries at tangential sites are ignored.
#[derive(Clone, Debug, PartialEq)]
pub struct PhasePoint {
    pub theta: Vec<f64>,
    pub phi: Vec<f64>,
    pub act_i: Vec<f64>,
    pub act_j: Vec<f64>,
    pub z: Vec<Complex64>,
    pub zbar: Vec<Complex64>,
    pub w: Vec<Complex64>,
    pub wbar: Vec<Complex64>,
}

impl PhasePoint {
    pub fn zero(lat: &Lattice) -> Self {
        let zero = vec![Complex64::new(0.0, 0.0); lat.len()];
        PhasePoint {
            theta: vec![0.0; lat.n()],
            phi: vec![0.0; lat.m()],
            act_i: vec![0.0; lat.n()],
            act_j: vec![0.0; lat.m()],
            z: zero.clone(),
            zbar: zero.clone(),
            w: zero.clone(),
            wbar: zero,
        }
    }

    pub fn angle(&self, a: usize) -> f64 {
        let n = self.theta.len();
        if a < n {
            self.theta[a]
        } else {
            self.phi[a - n]
        }
    }

    pub fn action(&self, a: usize) -> f64 {
        let n = self.act_i.len();
        if a < n {
            self.act_i[a]
        } else {
            self.act_j[a - n]
        }
    }

    pub fn normal(&self, block: Block, plus: bool, id: SiteId) -> Complex64 {
        let i = id as usize;
        match (block, plus) {
            (Block::Z, true) => self.z[i],
            (Block::Z, false) => self.zbar[i],
            (Block::W, true) => self.w[i],
            (Block::W, false) => self.wbar[i],
        }
    }

    /// True when zbar = conj(z) and wbar = conj(w) to within `tol`.
    pub fn is_real(&self, tol: f64) -> bool {
        self.z.iter().zip(&self.zbar).all(|(a, b)| (a.conj() - b).norm() <= tol)
            && self.w.iter().zip(&self.wbar).all(|(a, b)| (a.conj() - b).norm() <= tol)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn norms_of_small_sites() {
        assert_eq!(site_norm(&Site(vec![0, 0])), 0.0);
        assert_eq!(site_norm(&Site(vec![3, 4])), 5.0);
        assert!((site_norm(&Site(vec![1, 1])) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn weighted_norm_examples() {
        let empty: Vec<(Site, Complex64)> = vec![];
        assert_eq!(weighted_seq_norm(empty.iter().map(|(a, b)| (a, b)), 0.5).unwrap(), 0.0);
        let one = [(Site(vec![1, 0]), Complex64::new(1.0, 0.0))];
        assert_eq!(weighted_seq_norm(one.iter().map(|(a, b)| (a, b)), 0.0).unwrap(), 1.0);
        let two = [(Site(vec![3, 4]), Complex64::new(2.0, 0.0))];
        let v = weighted_seq_norm(two.iter().map(|(a, b)| (a, b)), 0.1).unwrap();
        assert!((v - 2.0 * 0.5f64.exp()).abs() < 1e-12);
        assert!(weighted_seq_norm(two.iter().map(|(a, b)| (a, b)), -0.1).is_err());
    }

    #[test]
    fn default_lattice_classes() {
        let lat = Lattice::new(LatticeConfig::default()).unwrap();
        assert_eq!(lat.len(), 121);
        assert_eq!(lat.normal_sites(Block::Z).count(), 119);
        assert_eq!(lat.normal_sites(Block::W).count(), 119);
        assert_eq!((0..121u16).filter(|&i| lat.is_shared(i)).count(), 118);
        assert_eq!(lat.site(lat.origin()), &Site(vec![0, 0]));
        let sorted = lat.sites().windows(2).all(|w| w[0] < w[1]);
        assert!(sorted);
    }

    #[test]
    fn config_requires_origin() {
        let mut c = LatticeConfig::default();
        c.tangential1 = vec![Site(vec![1, 0])];
        assert!(matches!(c.validate(), Err(KamError::Config(_))));
    }
}
