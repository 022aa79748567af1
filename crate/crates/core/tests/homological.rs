mod common;

use cnls_kam::homological::{residual, solve_homological, truncate_r, HomFamily, TruncationSpec};
use cnls_kam::lattice::LatticeConfig;
use cnls_kam::nls::{action_angle, ExpansionOptions, NlsModel, ParamPoint};
use cnls_kam::vfield::{check_momentum, reversibility_defect, vf_norm, PolyVectorField, Symmetry, C64};
use cnls_kam::KamError;
use common::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn random_instances_match_oracle() {
    for (i, fam) in all_families().into_iter().enumerate() {
        let c = check_family(fam, 20, 100 + i as u64);
        assert!(c.pass(), "{fam}: {c:?}");
        assert_eq!(c.blocks, 60);
    }
}

#[test]
fn perturbed_solution_fails_residual() {
    let lat = lattice(2);
    let dom = dom();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for fam in all_families() {
        let inst = random_instance(&lat, fam, 2, &mut rng);
        let (f, _) = solve_homological(&inst.nf, &inst.r, 1e-14, 1.0, 8).unwrap();
        let rn = vf_norm(&inst.r, &dom);
        assert!(residual(&inst.nf, &f, &inst.r, &dom) <= 1e-9 * rn);
        let (v, m, c) = f.sorted_terms().into_iter().next().unwrap();
        let mut bad = f.clone();
        bad.set_term(v, m, c * 1.001);
        assert!(residual(&inst.nf, &bad, &inst.r, &dom) > 1e-6 * rn, "{fam}: mutation not detected");
    }
}

#[test]
fn solution_is_linear_and_unique() {
    let lat = lattice(2);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let inst = random_instance(&lat, HomFamily::Sheq4, 4, &mut rng);
    let (f0, rep) = solve_homological(&inst.nf, &PolyVectorField::zero(lat.clone()), 1e-14, 1.0, 8).unwrap();
    assert!(f0.is_empty());
    assert!(rep.families.is_empty());
    let (f1, _) = solve_homological(&inst.nf, &inst.r, 1e-14, 1.0, 8).unwrap();
    let (f2, _) = solve_homological(&inst.nf, &inst.r.scaled(C64::new(0.0, -2.0)), 1e-14, 1.0, 8).unwrap();
    let expect = f1.scaled(C64::new(0.0, -2.0));
    assert!(f2.max_diff(&expect) <= 1e-12 * expect.max_abs_coef());
}

#[test]
fn tiny_divisor_is_refused() {
    let lat = lattice(2);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let inst = random_instance(&lat, HomFamily::Sheq3, 1, &mut rng);
    match solve_homological(&inst.nf, &inst.r, 1e6, 1.0, 8) {
        Err(KamError::DivisorRefusal { value, threshold, .. }) => assert!(value < threshold),
        other => panic!("expected a refusal, got {other:?}"),
    }
}

#[test]
fn nls_input_keeps_symmetries() {
    let cfg = LatticeConfig { radius: 2, ..LatticeConfig::default() };
    let s = 1e-3;
    let model = NlsModel::uniform(cfg, s, 1.9).unwrap();
    let zeta = ParamPoint::new(vec![0.31, 0.57], vec![0.23, 0.79]).unwrap();
    let (nf, p, _) = action_angle(&model, &zeta, &ExpansionOptions::default()).unwrap();
    assert!(check_momentum(&p).is_empty());
    assert!(reversibility_defect(&p, Symmetry::Reversible) <= 1e-12 * p.max_abs_coef());
    let r = truncate_r(&p, &TruncationSpec::new(4).unwrap());
    let (f, rep) = solve_homological(&nf, &r, 1e-14, 1.0, 4).unwrap();
    assert!(!f.is_empty());
    assert!(!rep.families.is_empty());
    assert!(check_momentum(&f).is_empty());
    assert!(reversibility_defect(&f, Symmetry::Invariant) <= 1e-12 * f.max_abs_coef());
    let dom = cnls_kam::vfield::DomainParams::new(0.5, s, 0.5).unwrap();
    assert!(residual(&nf, &f, &r, &dom) <= 1e-9 * vf_norm(&r, &dom));
}
