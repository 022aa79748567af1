use std::collections::BTreeMap;

use super::{function_norm, DomainParams, PolyVectorField, C64};
use crate::error::KamError;
use crate::lattice::{Block, Lattice, Monomial, NVar, Sign, Site, Var};

/// Which derivative entry the probe follows along i + tc.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProbeFamily {
    /// ∂X^{(u^σ_{i+tc})}/∂u'^{σ'}_{j+tc} when `same_direction`, else with j − tc.
    Normal { comp: (Block, Sign), wrt: (Block, Sign), same_direction: bool },
    /// ∂X^{(x)}/∂u^σ_{i+tc} for x an angle or action component; `j` is unused.
    Tangential { comp: Var, wrt: (Block, Sign) },
}

#[derive(Clone, Debug)]
pub struct ProbeRow {
    pub t: i32,
    pub partial: bool,
    pub value_norm: f64,
    pub defect: f64,
    /// defect · |t|
    pub scaled_defect: f64,
    pub identical_to_limit: bool,
}

#[derive(Clone, Debug)]
pub struct ProbeReport {
    pub rows: Vec<ProbeRow>,
    pub limit_t: Option<i32>,
    pub limit: Vec<(Monomial, C64)>,
    /// smallest t from which every complete row equals the limit bitwise
    pub stabilized_from: Option<i32>,
    pub max_scaled_defect: f64,
}

type Series = BTreeMap<Monomial, C64>;

fn derivative_at(x: &PolyVectorField, comp: Var, wrt: Var) -> Series {
    let mut out = Series::new();
    for (v, m, c) in x.iter() {
        if *v != comp {
            continue;
        }
        if let Some((f, dm)) = m.derive(wrt) {
            *out.entry(dm).or_default() += c * f;
        }
    }
    out.retain(|_, c| *c != C64::default());
    out
}

fn normal_var(lat: &Lattice, (block, sign): (Block, Sign), site: &Site) -> Option<Var> {
    let id = lat.id(site)?;
    lat.is_normal(block, id).then_some(Var::Normal(NVar::new(block, sign, id)))
}

/// Derivative entries of X along the lattice direction c, with Lipschitz defects
/// measured against the entry at the largest complete |t|.
pub fn toeplitz_probe(
    x: &PolyVectorField,
    family: ProbeFamily,
    i: &Site,
    j: &Site,
    c: &Site,
    ts: &[i32],
    dom: &DomainParams,
) -> Result<ProbeReport, KamError> {
    if c.0.iter().all(|&a| a == 0) {
        return Err(KamError::Precondition("probe direction must be nonzero".into()));
    }
    let lat = x.lattice();
    let mut series: Vec<(i32, Option<Series>)> = Vec::new();
    for &t in ts {
        let it = i.add(&c.scale(t));
        let pair = match family {
            ProbeFamily::Normal { comp, wrt, same_direction } => {
                let jt = if same_direction { j.add(&c.scale(t)) } else { j.sub(&c.scale(t)) };
                normal_var(lat, comp, &it).zip(normal_var(lat, wrt, &jt))
            }
            ProbeFamily::Tangential { comp, wrt } => normal_var(lat, wrt, &it).map(|w| (comp, w)),
        };
        series.push((t, pair.map(|(a, b)| derivative_at(x, a, b))));
    }
    let limit_idx = series
        .iter()
        .enumerate()
        .filter(|(_, (_, s))| s.is_some())
        .max_by_key(|(_, (t, _))| (t.abs(), *t))
        .map(|(k, _)| k);
    let limit: Series = limit_idx.and_then(|k| series[k].1.clone()).unwrap_or_default();
    let mut rows = Vec::new();
    let mut max_scaled: f64 = 0.0;
    for (t, s) in &series {
        match s {
            None => rows.push(ProbeRow {
                t: *t,
                partial: true,
                value_norm: f64::NAN,
                defect: f64::NAN,
                scaled_defect: f64::NAN,
                identical_to_limit: false,
            }),
            Some(s) => {
                let mut diff = s.clone();
                for (m, c) in &limit {
                    *diff.entry(m.clone()).or_default() -= c;
                }
                let defect = function_norm(lat, diff.iter(), dom);
                let scaled = defect * t.abs() as f64;
                max_scaled = max_scaled.max(scaled);
                rows.push(ProbeRow {
                    t: *t,
                    partial: false,
                    value_norm: function_norm(lat, s.iter(), dom),
                    defect,
                    scaled_defect: scaled,
                    identical_to_limit: *s == limit,
                });
            }
        }
    }
    let mut order: Vec<&ProbeRow> = rows.iter().filter(|r| !r.partial).collect();
    order.sort_by_key(|r| r.t.abs());
    let mut stabilized_from = None;
    for r in order.iter().rev() {
        if r.identical_to_limit {
            stabilized_from = Some(r.t);
        } else {
            break;
        }
    }
    Ok(ProbeReport {
        rows,
        limit_t: limit_idx.map(|k| series[k].0),
        limit: limit.into_iter().collect(),
        stabilized_from,
        max_scaled_defect: max_scaled,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::LatticeConfig;
    use crate::vfield::{as_vector_field, NormalFormData};
    use std::sync::Arc;

    #[test]
    fn diagonal_correction_limit() {
        let lat = Arc::new(Lattice::new(LatticeConfig::default()).unwrap());
        let mut nf = NormalFormData::diagonal(&lat, vec![0.0; 2], vec![0.0; 2]);
        for j in 0..lat.len() {
            nf.omega0[j] = 0.125;
        }
        let mut x = as_vector_field(&nf, &lat);
        // keep only the Ω⁰ part: subtract |j|² diagonal
        let base = as_vector_field(&NormalFormData::diagonal(&lat, vec![0.0; 2], vec![0.0; 2]), &lat);
        x = x.minus(&base);
        let dom = DomainParams::new(0.5, 0.1, 0.3).unwrap();
        let fam = ProbeFamily::Normal { comp: (Block::Z, Sign::Plus), wrt: (Block::Z, Sign::Plus), same_direction: true };
        let rep = toeplitz_probe(&x, fam, &Site(vec![0, 2]), &Site(vec![0, 2]), &Site(vec![1, 0]), &[1, 2, 3], &dom).unwrap();
        assert_eq!(rep.limit.len(), 1);
        assert_eq!(rep.limit[0].1, C64::new(0.0, 0.125));
        assert_eq!(rep.max_scaled_defect, 0.0);
        let out = toeplitz_probe(&x, fam, &Site(vec![0, 2]), &Site(vec![0, 2]), &Site(vec![3, 0]), &[1, 2], &dom).unwrap();
        assert!(out.rows[1].partial);
    }

    #[test]
    fn mismatched_single_term_vanishes() {
        let lat = Arc::new(Lattice::new(LatticeConfig::default()).unwrap());
        let i0 = lat.id(&Site(vec![0, -2])).unwrap();
        let h = lat.id(&Site(vec![1, -2])).unwrap();
        let x = PolyVectorField::from_terms(
            lat.clone(),
            [(
                Var::Normal(NVar::new(Block::Z, Sign::Plus, h)),
                Monomial::one(4).with_normal(NVar::new(Block::Z, Sign::Plus, i0), 1),
                C64::new(1.0, 0.0),
            )],
        );
        let dom = DomainParams::new(0.5, 0.1, 0.3).unwrap();
        let fam = ProbeFamily::Normal { comp: (Block::Z, Sign::Plus), wrt: (Block::Z, Sign::Plus), same_direction: true };
        let rep = toeplitz_probe(&x, fam, &Site(vec![1, -2]), &Site(vec![0, -2]), &Site(vec![0, 1]), &[0, 1, 2, 3], &dom).unwrap();
        assert!(rep.limit.is_empty());
        assert!(rep.rows[0].value_norm > 0.0);
        assert_eq!(rep.rows[3].value_norm, 0.0);
    }
}
