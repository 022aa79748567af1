//! Truncation R, its normal part [R], and the homological equation [N+𝒜, F] + R = [R].

mod linalg;

use std::fmt;

use rayon::prelude::*;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

pub use linalg::{Dense, Factored};

use crate::error::KamError;
use crate::lattice::{Block, Lattice, Monomial, NVar, Sign, SiteId, Var};
use crate::vfield::{as_vector_field, lie_bracket, vf_norm, DomainParams, NormalFormData, PolyVectorField, C64};

/// Fourier cutoff |k|+|k̃| ≤ K with the fixed jet rule: degree 0 on angle components,
/// degree ≤ 1 in (I, J, z, w) elsewhere.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruncationSpec {
    pub k_max: u32,
}

impl TruncationSpec {
    pub fn new(k_max: u32) -> Result<Self, KamError> {
        if k_max == 0 {
            return Err(KamError::Config("Fourier cutoff K must be at least 1".into()));
        }
        Ok(TruncationSpec { k_max })
    }

    pub fn admits(&self, v: Var, m: &Monomial) -> bool {
        let jet = match v {
            Var::Angle(_) => m.degree() == 0,
            _ => m.degree() <= 1,
        };
        jet && m.fourier_order() <= self.k_max
    }
}

pub fn truncate_r(p: &PolyVectorField, spec: &TruncationSpec) -> PolyVectorField {
    p.filtered(|v, m, _| spec.admits(*v, m))
}

/// Increments of the normal form produced by [R].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalFormDelta {
    /// [R^θ], [R^φ] in the combined angle order
    pub d_omega: Vec<f64>,
    pub d_omega0: Vec<f64>,
    pub d_omegatilde0: Vec<f64>,
    pub d_a: Vec<f64>,
    pub d_atilde: Vec<f64>,
    /// largest discarded imaginary part
    pub max_imag: f64,
}

impl NormalFormDelta {
    pub fn zero(lat: &Lattice) -> Self {
        let z = vec![0.0; lat.len()];
        NormalFormDelta {
            d_omega: vec![0.0; lat.n() + lat.m()],
            d_omega0: z.clone(),
            d_omegatilde0: z.clone(),
            d_a: z.clone(),
            d_atilde: z,
            max_imag: 0.0,
        }
    }

    pub fn apply(&self, nf: &NormalFormData) -> NormalFormData {
        let n = nf.omega.len();
        let add = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x + y).collect::<Vec<_>>();
        NormalFormData {
            omega: add(&nf.omega, &self.d_omega[..n]),
            omegatilde: add(&nf.omegatilde, &self.d_omega[n..]),
            omega0: add(&nf.omega0, &self.d_omega0),
            omegatilde0: add(&nf.omegatilde0, &self.d_omegatilde0),
            a: add(&nf.a, &self.d_a),
            atilde: add(&nf.atilde, &self.d_atilde),
        }
    }

    /// Largest tangential and normal increments.
    pub fn max_abs(&self) -> (f64, f64) {
        let t = self.d_omega.iter().fold(0.0, |a: f64, b| a.max(b.abs()));
        let nrm = self
            .d_omega0
            .iter()
            .chain(&self.d_omegatilde0)
            .chain(&self.d_a)
            .chain(&self.d_atilde)
            .fold(0.0, |a: f64, b| a.max(b.abs()));
        (t, nrm)
    }
}

/// True for the monomial/component pairs that make up [R].
pub fn is_normal_part(v: Var, m: &Monomial) -> bool {
    if !m.is_constant_angle() || m.action_degree() != 0 {
        return false;
    }
    match v {
        Var::Angle(_) => m.nv.is_empty(),
        Var::Action(_) => false,
        Var::Normal(x) => match m.nv.as_slice() {
            [(u, 1)] => u.sign == x.sign && u.site == x.site,
            _ => false,
        },
    }
}

/// Splits off [R] and converts it into frequency and coupling increments
/// (ω₊ = ω + [R^θ], Ω₊ = Ω − i[R^{zz}], A₊ = A − i[R^{zw}], …).
pub fn normal_part(r: &PolyVectorField, imag_tol: f64) -> Result<(NormalFormDelta, PolyVectorField), KamError> {
    let lat = r.lattice();
    let mut delta = NormalFormDelta::zero(lat);
    let part = r.filtered(|v, m, _| is_normal_part(*v, m));
    let scale = part.max_abs_coef().max(f64::MIN_POSITIVE);
    let mut check = |value: C64, what: String| -> Result<f64, KamError> {
        delta.max_imag = delta.max_imag.max(value.im.abs());
        if value.im.abs() > imag_tol * scale {
            return Err(KamError::NonRealIncrement { what, imag: value.im });
        }
        Ok(value.re)
    };
    for (v, m, c) in part.sorted_terms() {
        match v {
            Var::Angle(a) => {
                delta.d_omega[a as usize] = check(c, format!("tangential frequency {}", v.tag(lat)))?;
            }
            Var::Normal(x) if x.sign == Sign::Plus => {
                let u = m.nv[0].0;
                let value = check(c * C64::new(0.0, -1.0), format!("{} in {}", Var::Normal(u).tag(lat), v.tag(lat)))?;
                let j = x.site as usize;
                match (x.block, u.block) {
                    (Block::Z, Block::Z) => delta.d_omega0[j] = value,
                    (Block::W, Block::W) => delta.d_omegatilde0[j] = value,
                    (Block::Z, Block::W) => delta.d_a[j] = value,
                    (Block::W, Block::Z) => delta.d_atilde[j] = value,
                }
            }
            _ => {}
        }
    }
    Ok((delta, part))
}

/// Components coupled by the linear part: a single angle/action, or the normal
/// variables of one sign at one site.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VGroup {
    Single(Var),
    Normal(Sign, SiteId),
}

/// Non-Fourier part of a jet monomial.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum UGroup {
    Constant,
    Action(u8),
    Normal(Sign, SiteId),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum HomFamily {
    Sheq1,
    Sheq2,
    Sheq3,
    Sheq4,
}

impl fmt::Display for HomFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            HomFamily::Sheq1 => "sheq1",
            HomFamily::Sheq2 => "sheq2",
            HomFamily::Sheq3 => "sheq3",
            HomFamily::Sheq4 => "sheq4",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BlockKey {
    pub k: SmallVec<[i16; 4]>,
    pub v: VGroup,
    pub u: UGroup,
}

fn normal_members(lat: &Lattice, sign: Sign, site: SiteId) -> SmallVec<[NVar; 2]> {
    [Block::Z, Block::W].into_iter().filter(|&b| lat.is_normal(b, site)).map(|b| NVar::new(b, sign, site)).collect()
}

impl BlockKey {
    pub fn of(v: Var, m: &Monomial) -> Result<Self, KamError> {
        let vg = match v {
            Var::Normal(x) => VGroup::Normal(x.sign, x.site),
            _ => VGroup::Single(v),
        };
        let ug = match (m.nv.as_slice(), m.action_degree()) {
            ([], 0) => UGroup::Constant,
            ([], 1) => UGroup::Action(m.l.iter().position(|&e| e == 1).unwrap_or(0) as u8),
            ([(u, 1)], 0) => UGroup::Normal(u.sign, u.site),
            _ => return Err(KamError::Precondition("homological input violates the jet rule".into())),
        };
        if matches!(v, Var::Angle(_)) && ug != UGroup::Constant {
            return Err(KamError::Precondition("angle component of R depends on actions or normal variables".into()));
        }
        Ok(BlockKey { k: m.k.clone(), v: vg, u: ug })
    }

    pub fn components(&self, lat: &Lattice) -> SmallVec<[Var; 2]> {
        match self.v {
            VGroup::Single(v) => smallvec::smallvec![v],
            VGroup::Normal(s, j) => normal_members(lat, s, j).into_iter().map(Var::Normal).collect(),
        }
    }

    pub fn monomials(&self, lat: &Lattice) -> SmallVec<[Monomial; 2]> {
        let base = Monomial::fourier(&self.k);
        match self.u {
            UGroup::Constant => smallvec::smallvec![base],
            UGroup::Action(a) => smallvec::smallvec![base.with_action(a as usize, 1)],
            UGroup::Normal(s, i) => normal_members(lat, s, i).into_iter().map(|x| base.clone().with_normal(x, 1)).collect(),
        }
    }

    pub fn family(&self, size: usize) -> HomFamily {
        let tangential = match self.v {
            VGroup::Single(Var::Angle(_)) => true,
            VGroup::Single(Var::Action(_)) => matches!(self.u, UGroup::Constant | UGroup::Action(_)),
            _ => false,
        };
        match size {
            _ if tangential => HomFamily::Sheq1,
            1 => HomFamily::Sheq2,
            2 => HomFamily::Sheq3,
            _ => HomFamily::Sheq4,
        }
    }

    pub fn describe(&self, lat: &Lattice) -> String {
        let v = match self.v {
            VGroup::Single(v) => v.tag(lat),
            VGroup::Normal(s, j) => format!("{s}{}", lat.site(j)),
        };
        let u = match self.u {
            UGroup::Constant => "1".to_string(),
            UGroup::Action(a) => Var::Action(a).tag(lat),
            UGroup::Normal(s, i) => format!("{s}{}", lat.site(i)),
        };
        format!("k={:?} comp={v} var={u}", self.k.as_slice())
    }

    /// True for the k = 0 blocks occupied by [R] (same sign, same site, or angle averages).
    pub fn is_normal_block(&self) -> bool {
        if self.k.iter().any(|&x| x != 0) {
            return false;
        }
        match (self.v, self.u) {
            (VGroup::Single(Var::Angle(_)), UGroup::Constant) => true,
            (VGroup::Normal(s, j), UGroup::Normal(s2, i)) => s == s2 && i == j,
            _ => false,
        }
    }
}

fn linear_matrix(nf: &NormalFormData, lat: &Lattice, vars: &[NVar]) -> Dense {
    let mut d = Dense::zeros(vars.len());
    for (a, &x) in vars.iter().enumerate() {
        for (b, &y) in vars.iter().enumerate() {
            d.set(a, b, nf.linear_entry(lat, x, y));
        }
    }
    d
}

/// Λ = aI − D_v ⊗ I + I ⊗ D_uᵀ acting on row-major vec(C).
pub fn block_operator(nf: &NormalFormData, lat: &Lattice, key: &BlockKey) -> Dense {
    let a = nf.divisor(&key.k);
    let dv = match key.v {
        VGroup::Normal(s, j) => linear_matrix(nf, lat, &normal_members(lat, s, j)),
        VGroup::Single(_) => Dense::zeros(1),
    };
    let du = match key.u {
        UGroup::Normal(s, i) => linear_matrix(nf, lat, &normal_members(lat, s, i)),
        _ => Dense::zeros(1),
    };
    let (nv, nu) = (dv.n, du.n);
    let mut l = Dense::zeros(nv * nu);
    for v in 0..nv {
        for u in 0..nu {
            let row = v * nu + u;
            l.add(row, row, a);
            for v2 in 0..nv {
                l.add(row, v2 * nu + u, -dv.get(v, v2));
            }
            for u2 in 0..nu {
                l.add(row, v * nu + u2, du.get(u2, u));
            }
        }
    }
    l
}

/// γ / K^τ
pub fn divisor_threshold(gamma: f64, tau: f64, k_max: u32) -> f64 {
    gamma / (k_max as f64).powf(tau)
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct FamilyStats {
    pub blocks: usize,
    pub min_abs_det: f64,
    pub max_condition: f64,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct SolveReport {
    pub families: Vec<(HomFamily, FamilyStats)>,
    pub threshold: f64,
    pub worst_block: Option<String>,
    pub worst_abs_det: f64,
}

impl SolveReport {
    pub fn max_condition(&self) -> f64 {
        self.families.iter().map(|(_, s)| s.max_condition).fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("family,blocks,min_abs_det,max_condition\n");
        for (f, st) in &self.families {
            s.push_str(&format!("{f},{},{:e},{:e}\n", st.blocks, st.min_abs_det, st.max_condition));
        }
        s
    }
}

struct Solved {
    family: HomFamily,
    det: f64,
    cond: f64,
    entries: Vec<(Var, Monomial, C64)>,
}

/// Solves [N+𝒜, F] + R = [R] block by block; F has zero normal part.
pub fn solve_homological(
    nf: &NormalFormData,
    r: &PolyVectorField,
    gamma: f64,
    tau: f64,
    k_max: u32,
) -> Result<(PolyVectorField, SolveReport), KamError> {
    let lat = r.lattice().clone();
    nf.validate(&lat, None)?;
    let threshold = divisor_threshold(gamma, tau, k_max);
    let mut blocks: FxHashMap<BlockKey, ()> = FxHashMap::default();
    for (v, m, c) in r.iter() {
        if *c == C64::default() || is_normal_part(*v, m) {
            continue;
        }
        if m.fourier_order() > k_max {
            return Err(KamError::Precondition(format!("term of Fourier order {} above K = {k_max}", m.fourier_order())));
        }
        blocks.insert(BlockKey::of(*v, m)?, ());
    }
    let mut keys: Vec<BlockKey> = blocks.into_keys().collect();
    keys.sort();
    let solved: Vec<Result<Option<Solved>, KamError>> = keys
        .par_iter()
        .map(|key| {
            let comps = key.components(&lat);
            let monos = key.monomials(&lat);
            let nu = monos.len();
            let mut rhs = vec![C64::default(); comps.len() * nu];
            let mut any = false;
            for (a, v) in comps.iter().enumerate() {
                for (b, m) in monos.iter().enumerate() {
                    if is_normal_part(*v, m) {
                        continue;
                    }
                    let c = r.get(*v, m);
                    // divide by i
                    rhs[a * nu + b] = C64::new(c.im, -c.re);
                    any |= c != C64::default();
                }
            }
            if !any {
                return Ok(None);
            }
            if key.k.iter().all(|&x| x == 0) && matches!(key.v, VGroup::Single(Var::Action(_))) {
                return Err(KamError::Internal(format!(
                    "nonzero average on an action component: {}",
                    key.describe(&lat)
                )));
            }
            let op = block_operator(nf, &lat, key);
            let fac = op.factor();
            let family = key.family(op.n);
            if !(fac.det.abs() >= threshold) || fac.det == 0.0 {
                return Err(KamError::DivisorRefusal {
                    tuple: format!("{family} {}", key.describe(&lat)),
                    value: fac.det.abs(),
                    threshold,
                });
            }
            let x = fac.solve(&rhs);
            let cond = fac.condition(&op);
            let mut entries = Vec::with_capacity(x.len());
            for (a, v) in comps.iter().enumerate() {
                for (b, m) in monos.iter().enumerate() {
                    let c = x[a * nu + b];
                    if c != C64::default() {
                        entries.push((*v, m.clone(), c));
                    }
                }
            }
            Ok(Some(Solved { family, det: fac.det, cond, entries }))
        })
        .collect();
    let mut f = PolyVectorField::zero(lat.clone());
    let mut stats: FxHashMap<HomFamily, FamilyStats> = FxHashMap::default();
    let mut report = SolveReport { threshold, worst_abs_det: f64::INFINITY, ..SolveReport::default() };
    for (key, res) in keys.iter().zip(solved) {
        let Some(s) = res? else { continue };
        let st = stats.entry(s.family).or_insert(FamilyStats { blocks: 0, min_abs_det: f64::INFINITY, max_condition: 0.0 });
        st.blocks += 1;
        st.min_abs_det = st.min_abs_det.min(s.det.abs());
        st.max_condition = st.max_condition.max(s.cond);
        if s.det.abs() < report.worst_abs_det {
            report.worst_abs_det = s.det.abs();
            report.worst_block = Some(key.describe(&lat));
        }
        for (v, m, c) in s.entries {
            f.set_term(v, m, c);
        }
    }
    let mut fam: Vec<_> = stats.into_iter().collect();
    fam.sort_by_key(|(f, _)| *f);
    report.families = fam;
    Ok((f, report))
}

/// ‖[N+𝒜, F] + R − [R]‖ on `dom`.
pub fn residual(nf: &NormalFormData, f: &PolyVectorField, r: &PolyVectorField, dom: &DomainParams) -> f64 {
    let lat = r.lattice();
    let n = as_vector_field(nf, lat);
    let mut e = lie_bracket(&n, f);
    e.add_scaled(&r.filtered(|v, m, _| !is_normal_part(*v, m)), C64::new(1.0, 0.0));
    e.drop_zeros();
    vf_norm(&e, dom)
}

/// Smallest |det Λ| − γ/K^τ over every momentum-admissible block with |k| ≤ K.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DivisorReport {
    pub checked: usize,
    pub min_margin: f64,
    pub argmin: Option<String>,
    pub threshold: f64,
}

fn for_each_k(nm: usize, k_max: u32, f: &mut impl FnMut(&[i16])) {
    fn rec(k: &mut Vec<i16>, pos: usize, left: i32, f: &mut impl FnMut(&[i16])) {
        if pos == k.len() {
            f(k);
            return;
        }
        for x in -left..=left {
            k[pos] = x as i16;
            rec(k, pos + 1, left - x.abs(), f);
        }
        k[pos] = 0;
    }
    let mut k = vec![0i16; nm];
    rec(&mut k, 0, k_max as i32, f);
}

/// Evaluates the small-divisor conditions on all blocks a truncated R can populate:
/// every k with |k| ≤ K, every component group and every monomial group compatible
/// with momentum conservation. [R] blocks and k = 0 tangential blocks are skipped.
pub fn check_divisors(nf: &NormalFormData, lat: &Lattice, k_max: u32, gamma: f64, tau: f64) -> DivisorReport {
    let threshold = divisor_threshold(gamma, tau, k_max);
    let nm = lat.n() + lat.m();
    let d = lat.d();
    let mut vgroups: Vec<VGroup> = (0..nm as u8).flat_map(|a| [VGroup::Single(Var::Angle(a)), VGroup::Single(Var::Action(a))]).collect();
    for j in 0..lat.len() as SiteId {
        if lat.is_normal(Block::Z, j) || lat.is_normal(Block::W, j) {
            vgroups.push(VGroup::Normal(Sign::Plus, j));
            vgroups.push(VGroup::Normal(Sign::Minus, j));
        }
    }
    let mut report = DivisorReport { checked: 0, min_margin: f64::INFINITY, argmin: None, threshold };
    for_each_k(nm, k_max, &mut |k| {
        let mut pk = vec![0i32; d];
        for (a, &ka) in k.iter().enumerate() {
            for (ax, p) in pk.iter_mut().enumerate() {
                *p += ka as i32 * lat.angle_site(a).0[ax];
            }
        }
        let zero_k = k.iter().all(|&x| x == 0);
        for &vg in &vgroups {
            // momentum of the component
            let (vp, tangential): (Vec<i32>, bool) = match vg {
                VGroup::Single(_) => (vec![0; d], true),
                VGroup::Normal(s, j) => (lat.site(j).0.iter().map(|&x| s.value() * x).collect(), false),
            };
            let mut ugs: Vec<UGroup> = Vec::new();
            if pk == vp {
                ugs.push(UGroup::Constant);
                ugs.extend((0..nm as u8).map(UGroup::Action));
            }
            for s in [Sign::Plus, Sign::Minus] {
                // σ i = vp − π(k)
                let site: Vec<i32> = vp.iter().zip(&pk).map(|(a, b)| s.value() * (a - b)).collect();
                if let Some(i) = lat.id(&crate::lattice::Site(site)) {
                    if lat.is_normal(Block::Z, i) || lat.is_normal(Block::W, i) {
                        ugs.push(UGroup::Normal(s, i));
                    }
                }
            }
            for ug in ugs {
                if tangential && matches!(vg, VGroup::Single(Var::Angle(_))) && ug != UGroup::Constant {
                    continue;
                }
                let key = BlockKey { k: SmallVec::from_slice(k), v: vg, u: ug };
                if key.is_normal_block() || (zero_k && tangential) {
                    continue;
                }
                let det = block_operator(nf, lat, &key).factor().det.abs();
                report.checked += 1;
                let margin = det - threshold;
                if margin < report.min_margin {
                    report.min_margin = margin;
                    report.argmin = Some(format!("{} {}", key.family(key.components(lat).len() * key.monomials(lat).len()), key.describe(lat)));
                }
            }
        }
    });
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{LatticeConfig, Site};
    use std::sync::Arc;

    fn lat() -> Arc<Lattice> {
        Arc::new(Lattice::new(LatticeConfig { radius: 3, ..LatticeConfig::default() }).unwrap())
    }

    #[test]
    fn zero_input_gives_zero() {
        let lat = lat();
        let nf = NormalFormData::diagonal(&lat, vec![0.3, 1.6], vec![0.2, 1.8]);
        let (f, rep) = solve_homological(&nf, &PolyVectorField::zero(lat.clone()), 1e-3, 4.0, 5).unwrap();
        assert!(f.is_empty());
        assert!(rep.families.is_empty());
        let (d, part) = normal_part(&PolyVectorField::zero(lat.clone()), 1e-9).unwrap();
        assert_eq!(d, NormalFormDelta::zero(&lat));
        assert!(part.is_empty());
    }

    #[test]
    fn single_fourier_mode() {
        // g = e^{iθ₁} on an action component, ω₁ = 1 → f = −i e^{iθ₁}
        let lat = lat();
        let nf = NormalFormData::diagonal(&lat, vec![1.0, 1.6], vec![0.2, 1.8]);
        let m = Monomial::fourier(&[1, 0, 0, 0]);
        let r = PolyVectorField::from_terms(lat.clone(), [(Var::Action(0), m.clone(), C64::new(1.0, 0.0))]);
        let (f, _) = solve_homological(&nf, &r, 1e-3, 4.0, 5).unwrap();
        assert_eq!(f.len(), 1);
        assert!((f.get(Var::Action(0), &m) - C64::new(0.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn normal_part_increments() {
        let lat = lat();
        let j = lat.id(&Site(vec![2, 1])).unwrap();
        let zj = NVar::new(Block::Z, Sign::Plus, j);
        let r = PolyVectorField::from_terms(
            lat.clone(),
            [
                (Var::Normal(zj), Monomial::one(4).with_normal(zj, 1), C64::new(0.0, 0.25)),
                (Var::Angle(0), Monomial::fourier(&[0, 1, 0, 0]), C64::new(0.5, 0.0)),
                (Var::Angle(1), Monomial::one(4), C64::new(0.125, 0.0)),
            ],
        );
        let (d, part) = normal_part(&r, 1e-9).unwrap();
        assert_eq!(d.d_omega0[j as usize], 0.25);
        assert_eq!(d.d_omega, vec![0.0, 0.125, 0.0, 0.0]);
        assert_eq!(part.len(), 2);
        let bad = PolyVectorField::from_terms(lat.clone(), [(Var::Angle(1), Monomial::one(4), C64::new(0.1, 0.3))]);
        assert!(matches!(normal_part(&bad, 1e-9), Err(KamError::NonRealIncrement { .. })));
    }

    #[test]
    fn jet_rule_and_cutoff() {
        let lat = lat();
        let spec = TruncationSpec::new(3).unwrap();
        let j = lat.id(&Site(vec![2, 1])).unwrap();
        let zj = NVar::new(Block::Z, Sign::Plus, j);
        let p = PolyVectorField::from_terms(
            lat.clone(),
            [
                (Var::Angle(0), Monomial::one(4).with_normal(zj, 2), C64::new(1.0, 0.0)),
                (Var::Angle(0), Monomial::fourier(&[4, 0, 0, 0]), C64::new(1.0, 0.0)),
                (Var::Action(0), Monomial::fourier(&[1, 0, 0, 0]).with_normal(zj, 1), C64::new(1.0, 0.0)),
            ],
        );
        let r = truncate_r(&p, &spec);
        assert_eq!(r.len(), 1);
        assert!(r.get(Var::Action(0), &Monomial::fourier(&[1, 0, 0, 0]).with_normal(zj, 1)) != C64::default());
    }

    #[test]
    fn resonant_divisor_refused() {
        let lat = lat();
        // ω₁ − ω₂ = 0 exactly
        let nf = NormalFormData::diagonal(&lat, vec![0.5, 0.5], vec![0.2, 1.8]);
        let m = Monomial::fourier(&[1, -1, 0, 0]);
        let r = PolyVectorField::from_terms(lat.clone(), [(Var::Action(0), m, C64::new(1.0, 0.0))]);
        let err = solve_homological(&nf, &r, 1e-3, 4.0, 5).unwrap_err();
        assert!(matches!(err, KamError::DivisorRefusal { .. }));
        let rep = check_divisors(&nf, &lat, 2, 1e-3, 4.0);
        assert!(rep.min_margin < 0.0);
        assert!(rep.checked > 0);
    }
}
