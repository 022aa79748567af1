#![allow(dead_code)]

use std::collections::HashMap;
use std::sync::Arc;

use cnls_kam::homological::{is_normal_part, residual, solve_homological, BlockKey, HomFamily, UGroup, VGroup};
use cnls_kam::lattice::{Block, Lattice, LatticeConfig, Monomial, NVar, Sign, SiteId, Var};
use cnls_kam::vfield::{as_vector_field, lie_bracket, vf_norm, DomainParams, NormalFormData, PolyVectorField, C64};
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;

pub fn lattice(radius: i32) -> Arc<Lattice> {
    Arc::new(Lattice::new(LatticeConfig { radius, ..LatticeConfig::default() }).unwrap())
}

pub fn dom() -> DomainParams {
    DomainParams::new(0.5, 0.1, 0.5).unwrap()
}

pub fn random_nf(lat: &Lattice, rng: &mut impl Rng) -> NormalFormData {
    let omega = (0..lat.n()).map(|_| rng.gen_range(0.5..1.5)).collect();
    let omegatilde = (0..lat.m()).map(|_| rng.gen_range(0.5..1.5)).collect();
    let mut nf = NormalFormData::diagonal(lat, omega, omegatilde);
    for j in 0..lat.len() {
        let id = j as SiteId;
        if lat.is_normal(Block::Z, id) {
            nf.omega0[j] = rng.gen_range(-0.3..0.3);
        }
        if lat.is_normal(Block::W, id) {
            nf.omegatilde0[j] = rng.gen_range(-0.3..0.3);
        }
        if lat.is_shared(id) {
            nf.a[j] = rng.gen_range(-0.3..0.3);
            nf.atilde[j] = rng.gen_range(-0.3..0.3);
        }
    }
    nf
}

fn random_k(nm: usize, rng: &mut impl Rng) -> Vec<i16> {
    loop {
        let k: Vec<i16> = (0..nm).map(|_| rng.gen_range(-2..=2)).collect();
        let order: i32 = k.iter().map(|x| x.abs() as i32).sum();
        if order > 0 && order <= 4 {
            return k;
        }
    }
}

fn sign(rng: &mut impl Rng) -> Sign {
    if rng.gen() {
        Sign::Plus
    } else {
        Sign::Minus
    }
}

fn shared_sites(lat: &Lattice) -> Vec<SiteId> {
    (0..lat.len() as SiteId).filter(|&j| lat.is_shared(j)).collect()
}

fn single_sites(lat: &Lattice) -> Vec<SiteId> {
    (0..lat.len() as SiteId).filter(|&j| !lat.is_shared(j) && (lat.is_normal(Block::Z, j) || lat.is_normal(Block::W, j))).collect()
}

/// A block key of the requested family with nonzero Fourier index.
pub fn random_block(lat: &Lattice, fam: HomFamily, rng: &mut impl Rng) -> BlockKey {
    let nm = lat.n() + lat.m();
    let k = random_k(nm, rng).into_iter().collect();
    let shared = shared_sites(lat);
    let single = single_sites(lat);
    let a = rng.gen_range(0..nm) as u8;
    let b = rng.gen_range(0..nm) as u8;
    let sh = |rng: &mut _| *shared.choose(rng).unwrap();
    let si = |rng: &mut _| *single.choose(rng).unwrap();
    let (v, u) = match fam {
        HomFamily::Sheq1 => match rng.gen_range(0..3) {
            0 => (VGroup::Single(Var::Angle(a)), UGroup::Constant),
            1 => (VGroup::Single(Var::Action(a)), UGroup::Constant),
            _ => (VGroup::Single(Var::Action(a)), UGroup::Action(b)),
        },
        HomFamily::Sheq2 => match rng.gen_range(0..4) {
            0 => (VGroup::Single(Var::Action(a)), UGroup::Normal(sign(rng), si(rng))),
            1 => (VGroup::Normal(sign(rng), si(rng)), UGroup::Constant),
            2 => (VGroup::Normal(sign(rng), si(rng)), UGroup::Action(b)),
            _ => (VGroup::Normal(sign(rng), si(rng)), UGroup::Normal(sign(rng), si(rng))),
        },
        HomFamily::Sheq3 => match rng.gen_range(0..5) {
            0 => (VGroup::Single(Var::Action(a)), UGroup::Normal(sign(rng), sh(rng))),
            1 => (VGroup::Normal(sign(rng), sh(rng)), UGroup::Constant),
            2 => (VGroup::Normal(sign(rng), sh(rng)), UGroup::Action(b)),
            3 => (VGroup::Normal(sign(rng), sh(rng)), UGroup::Normal(sign(rng), si(rng))),
            _ => (VGroup::Normal(sign(rng), si(rng)), UGroup::Normal(sign(rng), sh(rng))),
        },
        HomFamily::Sheq4 => (VGroup::Normal(sign(rng), sh(rng)), UGroup::Normal(sign(rng), sh(rng))),
    };
    BlockKey { k, v, u }
}

pub fn block_entries(lat: &Lattice, key: &BlockKey) -> Vec<(Var, Monomial)> {
    let mut out = Vec::new();
    for v in key.components(lat) {
        for m in key.monomials(lat) {
            if !is_normal_part(v, &m) {
                out.push((v, m));
            }
        }
    }
    out
}

fn rand_c(rng: &mut impl Rng) -> C64 {
    C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

pub struct Instance {
    pub nf: NormalFormData,
    pub r: PolyVectorField,
    pub blocks: Vec<BlockKey>,
}

pub fn random_instance(lat: &Arc<Lattice>, fam: HomFamily, blocks: usize, rng: &mut impl Rng) -> Instance {
    let nf = random_nf(lat, rng);
    let mut r = PolyVectorField::zero(lat.clone());
    let mut keys: Vec<BlockKey> = Vec::new();
    while keys.len() < blocks {
        let key = random_block(lat, fam, rng);
        if keys.contains(&key) {
            continue;
        }
        for (v, m) in block_entries(lat, &key) {
            r.add_term(v, m, rand_c(rng));
        }
        keys.push(key);
    }
    Instance { nf, r, blocks: keys }
}

/// Matrix of F ↦ [N+𝒜, F] restricted to one block, assembled column by column
/// from the generic bracket.
pub fn bracket_matrix(nf: &NormalFormData, lat: &Arc<Lattice>, entries: &[(Var, Monomial)]) -> DMatrix<C64> {
    let n = as_vector_field(nf, lat);
    let mut mat = DMatrix::<C64>::zeros(entries.len(), entries.len());
    for (col, (v, m)) in entries.iter().enumerate() {
        let e = PolyVectorField::from_terms(lat.clone(), [(*v, m.clone(), C64::new(1.0, 0.0))]);
        let b = lie_bracket(&n, &e);
        for (row, (v2, m2)) in entries.iter().enumerate() {
            mat[(row, col)] = b.get(*v2, m2);
        }
        // nothing may leak out of the block
        let inside: f64 = entries.iter().map(|(v2, m2)| b.get(*v2, m2).norm()).sum();
        let total: f64 = b.iter().map(|(_, _, c)| c.norm()).sum();
        assert!((total - inside).abs() <= 1e-12 * total.max(1.0), "bracket leaves the block");
    }
    mat
}

pub struct OracleBlock {
    pub entries: Vec<(Var, Monomial)>,
    pub solution: Vec<C64>,
    pub abs_det: f64,
}

pub fn oracle_block(nf: &NormalFormData, lat: &Arc<Lattice>, key: &BlockKey, r: &PolyVectorField) -> OracleBlock {
    let entries = block_entries(lat, key);
    let mat = bracket_matrix(nf, lat, &entries);
    let rhs = DVector::from_iterator(entries.len(), entries.iter().map(|(v, m)| -r.get(*v, m)));
    let abs_det = mat.clone().determinant().norm();
    let solution = mat.lu().solve(&rhs).expect("oracle matrix is singular");
    OracleBlock { entries, solution: solution.iter().copied().collect(), abs_det }
}

#[derive(Debug, Default)]
pub struct FamilyCheck {
    pub instances: usize,
    pub blocks: usize,
    pub worst_residual_ratio: f64,
    pub worst_oracle_rel: f64,
    pub worst_det_rel: f64,
}

impl FamilyCheck {
    pub fn pass(&self) -> bool {
        self.worst_residual_ratio <= 1e-9 && self.worst_oracle_rel <= 1e-12 && self.worst_det_rel <= 1e-12
    }
}

/// Solves `instances` random problems of one family and compares each block with the oracle.
pub fn check_family(fam: HomFamily, instances: usize, seed: u64) -> FamilyCheck {
    use rand::SeedableRng;
    let lat = lattice(2);
    let dom = dom();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut out = FamilyCheck { instances, ..FamilyCheck::default() };
    for _ in 0..instances {
        let inst = random_instance(&lat, fam, 3, &mut rng);
        let (f, rep) = solve_homological(&inst.nf, &inst.r, 1e-14, 1.0, 8).unwrap();
        let fams: Vec<HomFamily> = rep.families.iter().map(|(x, _)| *x).collect();
        assert_eq!(fams, vec![fam], "instance landed in the wrong family");
        let res = residual(&inst.nf, &f, &inst.r, &dom);
        out.worst_residual_ratio = out.worst_residual_ratio.max(res / vf_norm(&inst.r, &dom));
        for key in &inst.blocks {
            let o = oracle_block(&inst.nf, &lat, key, &inst.r);
            let scale = o.solution.iter().fold(0.0f64, |a, c| a.max(c.norm()));
            for ((v, m), x) in o.entries.iter().zip(&o.solution) {
                let d = (f.get(*v, m) - x).norm() / scale;
                out.worst_oracle_rel = out.worst_oracle_rel.max(d);
            }
            let det = cnls_kam::homological::block_operator(&inst.nf, &lat, key).factor().det.abs();
            out.worst_det_rel = out.worst_det_rel.max((det - o.abs_det).abs() / o.abs_det);
            out.blocks += 1;
        }
    }
    out
}

pub fn all_families() -> [HomFamily; 4] {
    [HomFamily::Sheq1, HomFamily::Sheq2, HomFamily::Sheq3, HomFamily::Sheq4]
}

/// Counts ordered tuples by brute force over the whole box.
pub fn brute_force_counts(lat: &Lattice) -> HashMap<(Var, Monomial), u32> {
    let n = lat.len() as u16;
    let mut out = HashMap::new();
    let zp = |i| NVar::new(Block::Z, Sign::Plus, i);
    let zm = |i| NVar::new(Block::Z, Sign::Minus, i);
    let wp = |i| NVar::new(Block::W, Sign::Plus, i);
    let wm = |i| NVar::new(Block::W, Sign::Minus, i);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let ijk = lat.site(i).add(lat.site(j)).add(lat.site(k));
                for l in 0..n {
                    let a = ijk.sub(lat.site(l));
                    for m in 0..n {
                        if let Some(h) = lat.id(&a.sub(lat.site(m))) {
                            let mono = Monomial::one(0)
                                .with_normal(zp(i), 1)
                                .with_normal(zp(j), 1)
                                .with_normal(wp(k), 1)
                                .with_normal(zm(l), 1)
                                .with_normal(wm(m), 1);
                            *out.entry((Var::Normal(zp(h)), mono)).or_insert(0) += 1;
                        }
                    }
                }
                if let Some(h) = lat.id(&lat.site(i).add(lat.site(j)).sub(lat.site(k))) {
                    let mono = Monomial::one(0).with_normal(zp(i), 1).with_normal(wp(j), 1).with_normal(zm(k), 1);
                    *out.entry((Var::Normal(wp(h)), mono)).or_insert(0) += 1;
                }
            }
        }
    }
    out
}
