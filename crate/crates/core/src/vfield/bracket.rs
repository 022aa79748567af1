use rayon::prelude::*;
use rustc_hash::FxHashMap;

use super::{Key, PolyVectorField, Truncation, C64};
use crate::lattice::{Monomial, Var};

struct Indexed<'a> {
    terms: Vec<(&'a Var, &'a Monomial, C64)>,
    by_var: FxHashMap<Var, Vec<u32>>,
}

impl<'a> Indexed<'a> {
    fn new(x: &'a PolyVectorField) -> Self {
        let terms: Vec<_> = x.iter().map(|(v, m, c)| (v, m, *c)).collect();
        let mut by_var: FxHashMap<Var, Vec<u32>> = FxHashMap::default();
        for (i, (_, m, _)) in terms.iter().enumerate() {
            for (a, &ka) in m.k.iter().enumerate() {
                if ka != 0 {
                    by_var.entry(Var::Angle(a as u8)).or_default().push(i as u32);
                }
            }
            for (a, &la) in m.l.iter().enumerate() {
                if la != 0 {
                    by_var.entry(Var::Action(a as u8)).or_default().push(i as u32);
                }
            }
            for &(nv, _) in &m.nv {
                by_var.entry(Var::Normal(nv)).or_default().push(i as u32);
            }
        }
        Indexed { terms, by_var }
    }
}

fn merge_into(mut a: FxHashMap<Key, C64>, b: FxHashMap<Key, C64>) -> FxHashMap<Key, C64> {
    let (mut big, small) = if a.len() >= b.len() { (a, b) } else { (b, std::mem::take(&mut a)) };
    for (k, c) in small {
        *big.entry(k).or_default() += c;
    }
    big
}

/// Accumulates `sign · Σ_u Y^u ∂_u X^v` into a fresh map.
fn accumulate(x: &Indexed<'_>, y: &PolyVectorField, sign: f64, trunc: &Truncation) -> FxHashMap<Key, C64> {
    let yterms: Vec<_> = y.iter().collect();
    let parts: Vec<FxHashMap<Key, C64>> = yterms
        .par_chunks(256)
        .map(|ys| {
            let mut out: FxHashMap<Key, C64> = FxHashMap::default();
            for &(u, my, cy) in ys {
                let Some(list) = x.by_var.get(u) else { continue };
                let ydeg = my.degree();
                let yndeg = my.normal_degree();
                let lowers = !matches!(u, Var::Angle(_));
                let nlowers = matches!(u, Var::Normal(_));
                for &ix in list {
                    let (v, mx, cx) = x.terms[ix as usize];
                    let deg = mx.degree() + ydeg - lowers as u32;
                    let ndeg = mx.normal_degree() + yndeg - nlowers as u32;
                    if deg > trunc.max_degree || ndeg > trunc.max_normal_degree {
                        continue;
                    }
                    let (f, dm) = mx.derive(*u).expect("index lists only dependent terms");
                    let m = dm.mul(my);
                    *out.entry((*v, m)).or_default() += cx * cy * f * sign;
                }
            }
            out
        })
        .collect();
    parts.into_iter().fold(FxHashMap::default(), merge_into)
}

/// (Y·∇)X, i.e. component v equals Σ_u Y^u ∂_u X^v.
pub fn directional(x: &PolyVectorField, y: &PolyVectorField, trunc: &Truncation) -> PolyVectorField {
    let ix = Indexed::new(x);
    PolyVectorField::from_map(x.lattice().clone(), accumulate(&ix, y, 1.0, trunc))
}

/// [X,Y]^v = Σ_u (Y^u ∂_u X^v − X^u ∂_u Y^v).
pub fn lie_bracket(x: &PolyVectorField, y: &PolyVectorField) -> PolyVectorField {
    lie_bracket_truncated(x, y, &Truncation::NONE)
}

pub fn lie_bracket_truncated(x: &PolyVectorField, y: &PolyVectorField, trunc: &Truncation) -> PolyVectorField {
    let ix = Indexed::new(x);
    let iy = Indexed::new(y);
    let (a, b) = rayon::join(|| accumulate(&ix, y, 1.0, trunc), || accumulate(&iy, x, -1.0, trunc));
    PolyVectorField::from_map(x.lattice().clone(), merge_into(a, b))
}
