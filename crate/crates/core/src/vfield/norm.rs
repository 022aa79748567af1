use rayon::prelude::*;

use super::{DomainParams, PolyVectorField, C64};
use crate::lattice::{Lattice, Monomial, Var};

/// sup of |monomial| over D_ρ(r,s) times |c|, with the four normal groups each in their own ball.
pub fn monomial_sup(lat: &Lattice, m: &Monomial, c: C64, dom: &DomainParams) -> f64 {
    let mut v = c.norm() * (m.fourier_order() as f64 * dom.r).exp() * dom.s.powi(m.action_degree() as i32);
    if m.nv.is_empty() {
        return v;
    }
    // nv is sorted by (block, sign, site), so groups are contiguous
    let mut start = 0;
    while start < m.nv.len() {
        let g = (m.nv[start].0.block, m.nv[start].0.sign);
        let mut end = start;
        let mut total = 0u32;
        while end < m.nv.len() && (m.nv[end].0.block, m.nv[end].0.sign) == g {
            total += m.nv[end].1 as u32;
            end += 1;
        }
        let tot = total as f64;
        let mut f = dom.s.powi(total as i32);
        for &(x, e) in &m.nv[start..end] {
            let e = e as f64;
            f *= (e / tot).powf(e) * (-dom.rho * lat.norm(x.site) * e).exp();
        }
        v *= f;
        start = end;
    }
    v
}

pub fn component_weight(lat: &Lattice, v: Var, dom: &DomainParams) -> f64 {
    match v {
        Var::Angle(_) => 1.0,
        Var::Action(_) => 1.0 / dom.s,
        Var::Normal(x) => (dom.rho * lat.norm(x.site)).exp() / dom.s,
    }
}

pub fn term_norm(lat: &Lattice, v: Var, m: &Monomial, c: C64, dom: &DomainParams) -> f64 {
    component_weight(lat, v, dom) * monomial_sup(lat, m, c, dom)
}

/// Weighted majorant norm of a vector field on D_ρ(r,s).
pub fn vf_norm(x: &PolyVectorField, dom: &DomainParams) -> f64 {
    let lat = x.lattice();
    let terms: Vec<_> = x.iter().collect();
    let mut parts: Vec<f64> = terms.par_iter().map(|(v, m, c)| term_norm(lat, **v, m, **c, dom)).collect();
    // order-independent total
    parts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    parts.iter().fold(0.0, |a, b| a + b)
}

/// Majorant norm of a scalar polynomial.
pub fn function_norm<'a, I>(lat: &Lattice, terms: I, dom: &DomainParams) -> f64
where
    I: IntoIterator<Item = (&'a Monomial, &'a C64)>,
{
    let mut parts: Vec<f64> = terms.into_iter().map(|(m, c)| monomial_sup(lat, m, *c, dom)).collect();
    parts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    parts.iter().fold(0.0, |a, b| a + b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{Block, LatticeConfig, NVar, Sign, Site};
    use std::sync::Arc;

    #[test]
    fn single_mode_angle_component() {
        let lat = Arc::new(Lattice::new(LatticeConfig::default()).unwrap());
        let dom = DomainParams::new(0.5, 0.1, 0.3).unwrap();
        let x = PolyVectorField::from_terms(
            lat.clone(),
            [(Var::Angle(0), Monomial::fourier(&[1, 0, 0, 0]), C64::new(1.0, 0.0))],
        );
        assert!((vf_norm(&x, &dom) - 0.5f64.exp()).abs() < 1e-14);
        let c = C64::new(0.3, -0.4);
        let y = PolyVectorField::from_terms(lat.clone(), [(Var::Action(0), Monomial::one(4), c)]);
        assert!((vf_norm(&y, &dom) - 0.5 / 0.1).abs() < 1e-12);
        assert_eq!(vf_norm(&PolyVectorField::zero(lat), &dom), 0.0);
    }

    #[test]
    fn ball_maximum_concentrates_mass() {
        let lat = Lattice::new(LatticeConfig::default()).unwrap();
        let dom = DomainParams::new(0.5, 0.2, 0.3).unwrap();
        let a = lat.id(&Site(vec![2, 0])).unwrap();
        let b = lat.id(&Site(vec![0, 3])).unwrap();
        let m = Monomial::one(4)
            .with_normal(NVar::new(Block::Z, Sign::Plus, a), 2)
            .with_normal(NVar::new(Block::Z, Sign::Plus, b), 1);
        let closed = monomial_sup(&lat, &m, C64::new(1.0, 0.0), &dom);
        // brute force over the simplex x_a + x_b = s, |z_j| = x_j e^{-|j|ρ}
        let mut best: f64 = 0.0;
        for i in 0..=100000 {
            let xa = dom.s * i as f64 / 100000.0;
            let xb = dom.s - xa;
            let za = xa * (-dom.rho * 2.0).exp();
            let zb = xb * (-dom.rho * 3.0).exp();
            best = best.max(za * za * zb);
        }
        assert!((closed - best).abs() <= 1e-9 * closed);
    }
}
