use std::cmp::Ordering;
use std::fmt;

use num_complex::Complex64;
use smallvec::SmallVec;

use super::{Block, Lattice, PhasePoint, SiteId};
use crate::error::KamError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }

    pub fn value(self) -> i32 {
        match self {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }

    pub fn is_plus(self) -> bool {
        self == Sign::Plus
    }
}

/// A normal variable z^±_j or w^±_j.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NVar {
    pub block: Block,
    pub sign: Sign,
    pub site: SiteId,
}

impl NVar {
    pub fn new(block: Block, sign: Sign, site: SiteId) -> Self {
        NVar { block, sign, site }
    }

    pub fn conj(self) -> NVar {
        NVar { sign: self.sign.flip(), ..self }
    }
}

/// Component tag / phase variable. Angles and actions use one index over the
/// tangential variables of both blocks: `a < n` is θ_a (I_a), `a >= n` is φ_{a-n} (J_{a-n}).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    Angle(u8),
    Action(u8),
    Normal(NVar),
}

impl Var {
    pub fn conj(self) -> Var {
        match self {
            Var::Normal(v) => Var::Normal(v.conj()),
            other => other,
        }
    }

    pub fn tag(&self, lat: &Lattice) -> String {
        let n = lat.n();
        match *self {
            Var::Angle(a) if (a as usize) < n => format!("th{}", a + 1),
            Var::Angle(a) => format!("ph{}", a as usize - n + 1),
            Var::Action(a) if (a as usize) < n => format!("I{}", a + 1),
            Var::Action(a) => format!("J{}", a as usize - n + 1),
            Var::Normal(v) => {
                let b = match v.block {
                    Block::Z => "z",
                    Block::W => "w",
                };
                let s = if v.sign.is_plus() { "+" } else { "-" };
                format!("{b}{s}{}", lat.site(v.site))
            }
        }
    }
}

pub type NormalExps = SmallVec<[(NVar, u16); 4]>;

/// Taylor–Fourier exponent e^{i<k,(θ,φ)>} (I,J)^l z^α z̄^β w^α̃ w̄^β̃.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Monomial {
    pub k: SmallVec<[i16; 4]>,
    pub l: SmallVec<[u16; 4]>,
    /// sorted by variable, all exponents positive
    pub nv: NormalExps,
}

impl Monomial {
    pub fn one(nm: usize) -> Self {
        Monomial { k: SmallVec::from_elem(0, nm), l: SmallVec::from_elem(0, nm), nv: SmallVec::new() }
    }

    pub fn fourier(k: &[i16]) -> Self {
        let mut m = Monomial::one(k.len());
        m.k.copy_from_slice(k);
        m
    }

    pub fn with_action(mut self, a: usize, e: u16) -> Self {
        self.l[a] += e;
        self
    }

    pub fn with_normal(mut self, v: NVar, e: u16) -> Self {
        if e > 0 {
            self.nv = merge(&self.nv, &[(v, e)]);
        }
        self
    }

    pub fn nm(&self) -> usize {
        self.k.len()
    }

    /// The n-part of k (θ frequencies).
    pub fn k_theta(&self, n: usize) -> &[i16] {
        &self.k[..n]
    }

    pub fn k_phi(&self, n: usize) -> &[i16] {
        &self.k[n..]
    }

    pub fn exponent(&self, v: NVar) -> u16 {
        match self.nv.binary_search_by(|(x, _)| x.cmp(&v)) {
            Ok(p) => self.nv[p].1,
            Err(_) => 0,
        }
    }

    pub fn fourier_order(&self) -> u32 {
        self.k.iter().map(|x| x.unsigned_abs() as u32).sum()
    }

    pub fn is_constant_angle(&self) -> bool {
        self.k.iter().all(|&x| x == 0)
    }

    pub fn action_degree(&self) -> u32 {
        self.l.iter().map(|&x| x as u32).sum()
    }

    pub fn normal_degree(&self) -> u32 {
        self.nv.iter().map(|&(_, e)| e as u32).sum()
    }

    pub fn degree(&self) -> u32 {
        self.action_degree() + self.normal_degree()
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let k = self.k.iter().zip(&other.k).map(|(a, b)| a + b).collect();
        let l = self.l.iter().zip(&other.l).map(|(a, b)| a + b).collect();
        Monomial { k, l, nv: merge(&self.nv, &other.nv) }
    }

    /// ∂/∂v of the monomial as (factor, monomial); `None` when it vanishes.
    pub fn derive(&self, v: Var) -> Option<(Complex64, Monomial)> {
        match v {
            Var::Angle(a) => {
                let ka = self.k[a as usize];
                (ka != 0).then(|| (Complex64::new(0.0, ka as f64), self.clone()))
            }
            Var::Action(a) => {
                let la = self.l[a as usize];
                (la != 0).then(|| {
                    let mut m = self.clone();
                    m.l[a as usize] -= 1;
                    (Complex64::new(la as f64, 0.0), m)
                })
            }
            Var::Normal(x) => {
                let p = self.nv.binary_search_by(|(y, _)| y.cmp(&x)).ok()?;
                let e = self.nv[p].1;
                let mut m = self.clone();
                if e == 1 {
                    m.nv.remove(p);
                } else {
                    m.nv[p].1 -= 1;
                }
                Some((Complex64::new(e as f64, 0.0), m))
            }
        }
    }

    pub fn depends_on(&self, v: Var) -> bool {
        match v {
            Var::Angle(a) => self.k[a as usize] != 0,
            Var::Action(a) => self.l[a as usize] != 0,
            Var::Normal(x) => self.exponent(x) != 0,
        }
    }

    /// Image under the involution / complex conjugation: k ↦ −k, z ↔ z̄, w ↔ w̄.
    pub fn mirror(&self) -> Monomial {
        let k = self.k.iter().map(|x| -x).collect();
        let mut nv: NormalExps = self.nv.iter().map(|&(v, e)| (v.conj(), e)).collect();
        nv.sort_unstable_by(|a, b| a.0.cmp(&b.0));
        Monomial { k, l: self.l.clone(), nv }
    }

    pub fn eval(&self, y: &PhasePoint) -> Complex64 {
        let mut phase = 0.0;
        for (a, &ka) in self.k.iter().enumerate() {
            if ka != 0 {
                phase += ka as f64 * y.angle(a);
            }
        }
        let mut v = Complex64::from_polar(1.0, phase);
        for (a, &la) in self.l.iter().enumerate() {
            if la != 0 {
                v *= y.action(a).powi(la as i32);
            }
        }
        for &(x, e) in &self.nv {
            v *= y.normal(x.block, x.sign.is_plus(), x.site).powu(e as u32);
        }
        v
    }
}

fn merge(a: &[(NVar, u16)], b: &[(NVar, u16)]) -> NormalExps {
    let mut out = NormalExps::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            Ordering::Equal => {
                out.push((a[i].0, a[i].1 + b[j].1));
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

/// π_l of a monomial on component `comp`, minus ϱ j_l for a normal component.
pub fn momentum(lat: &Lattice, mi: &Monomial, comp: Var, axis: usize) -> Result<i64, KamError> {
    if axis >= lat.d() {
        return Err(KamError::Precondition(format!("axis {axis} out of range for d = {}", lat.d())));
    }
    Ok(momentum_unchecked(lat, mi, comp, axis))
}

pub(crate) fn momentum_unchecked(lat: &Lattice, mi: &Monomial, comp: Var, axis: usize) -> i64 {
    let mut p = 0i64;
    for (a, &ka) in mi.k.iter().enumerate() {
        p += ka as i64 * lat.angle_site(a).0[axis] as i64;
    }
    for &(x, e) in &mi.nv {
        p += x.sign.value() as i64 * e as i64 * lat.site(x.site).0[axis] as i64;
    }
    if let Var::Normal(x) = comp {
        p -= x.sign.value() as i64 * lat.site(x.site).0[axis] as i64;
    }
    p
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(if self.is_plus() { "+" } else { "-" })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{LatticeConfig, Site};

    fn lat() -> Lattice {
        Lattice::new(LatticeConfig::default()).unwrap()
    }

    #[test]
    fn empty_monomial_has_zero_momentum() {
        let lat = lat();
        let m = Monomial::one(4);
        for axis in 0..2 {
            assert_eq!(momentum(&lat, &m, Var::Action(0), axis).unwrap(), 0);
        }
        assert!(momentum(&lat, &m, Var::Action(0), 2).is_err());
    }

    #[test]
    fn zero_sum_sites() {
        let lat = lat();
        let i = lat.id(&Site(vec![2, 1])).unwrap();
        let j = lat.id(&Site(vec![-1, 3])).unwrap();
        let h = lat.id(&Site(vec![1, 4])).unwrap();
        let m = Monomial::one(4)
            .with_normal(NVar::new(Block::Z, Sign::Plus, i), 1)
            .with_normal(NVar::new(Block::Z, Sign::Plus, j), 1);
        let comp = Var::Normal(NVar::new(Block::Z, Sign::Plus, h));
        for axis in 0..2 {
            assert_eq!(momentum(&lat, &m, comp, axis).unwrap(), 0);
        }
    }

    #[test]
    fn single_shift_violates_axis_one() {
        let lat = lat();
        let a = lat.id(&Site(vec![1, 0])).unwrap();
        let o = lat.id(&Site(vec![-2, 0])).unwrap();
        let m = Monomial::one(4).with_normal(NVar::new(Block::W, Sign::Plus, a), 1);
        let comp = Var::Normal(NVar::new(Block::W, Sign::Plus, o));
        assert_eq!(momentum(&lat, &m, comp, 0).unwrap(), 3);
        assert_eq!(momentum(&lat, &m, comp, 1).unwrap(), 0);
    }

    #[test]
    fn derive_and_mul() {
        let v = NVar::new(Block::Z, Sign::Minus, 7);
        let m = Monomial::fourier(&[2, 0, -1, 0]).with_action(1, 3).with_normal(v, 2);
        let (f, d) = m.derive(Var::Action(1)).unwrap();
        assert_eq!(f, Complex64::new(3.0, 0.0));
        assert_eq!(d.l[1], 2);
        let (f, _) = m.derive(Var::Angle(2)).unwrap();
        assert_eq!(f, Complex64::new(0.0, -1.0));
        assert!(m.derive(Var::Angle(1)).is_none());
        let (f, d) = m.derive(Var::Normal(v)).unwrap();
        assert_eq!(f.re, 2.0);
        assert_eq!(d.exponent(v), 1);
        let p = d.mul(&Monomial::one(4).with_normal(v, 1));
        assert_eq!(p.exponent(v), 2);
        assert_eq!(m.mirror().mirror(), m);
    }
}
