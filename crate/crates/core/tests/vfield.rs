use std::sync::Arc;

use cnls_kam::lattice::{Block, Lattice, LatticeConfig, Monomial, NVar, Sign, Var};
use cnls_kam::vfield::{lie_bracket, parse_field, vf_norm, write_field, DomainParams, PolyVectorField, C64};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn lattice() -> Arc<Lattice> {
    Arc::new(Lattice::new(LatticeConfig { radius: 1, ..LatticeConfig::default() }).unwrap())
}

fn random_var(lat: &Lattice, rng: &mut ChaCha8Rng) -> Var {
    let nm = (lat.n() + lat.m()) as u8;
    match rng.gen_range(0..3) {
        0 => Var::Angle(rng.gen_range(0..nm)),
        1 => Var::Action(rng.gen_range(0..nm)),
        _ => Var::Normal(random_nvar(lat, rng)),
    }
}

fn random_nvar(lat: &Lattice, rng: &mut ChaCha8Rng) -> NVar {
    loop {
        let block = if rng.gen() { Block::Z } else { Block::W };
        let site = rng.gen_range(0..lat.len()) as u16;
        if lat.is_normal(block, site) {
            let sign = if rng.gen() { Sign::Plus } else { Sign::Minus };
            return NVar::new(block, sign, site);
        }
    }
}

fn random_field(lat: &Arc<Lattice>, seed: u64, terms: usize) -> PolyVectorField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nm = lat.n() + lat.m();
    let mut f = PolyVectorField::zero(lat.clone());
    for _ in 0..terms {
        let k: Vec<i16> = (0..nm).map(|_| rng.gen_range(-1..=1)).collect();
        let mut m = Monomial::fourier(&k);
        if rng.gen_bool(0.4) {
            m = m.with_action(rng.gen_range(0..nm), 1);
        }
        for _ in 0..rng.gen_range(0..3) {
            m = m.with_normal(random_nvar(lat, &mut rng), 1);
        }
        let c = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        f.add_term(random_var(lat, &mut rng), m, c);
    }
    f.drop_zeros();
    f
}

fn scale(fs: &[&PolyVectorField]) -> f64 {
    fs.iter().map(|f| f.max_abs_coef()).fold(1.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn bracket_is_antisymmetric(a in any::<u64>(), b in any::<u64>()) {
        let lat = lattice();
        let x = random_field(&lat, a, 6);
        let y = random_field(&lat, b, 6);
        let xy = lie_bracket(&x, &y);
        let yx = lie_bracket(&y, &x);
        prop_assert!(xy.plus(&yx).max_abs_coef() <= 1e-14 * scale(&[&xy]));
        prop_assert!(lie_bracket(&x, &x).max_abs_coef() <= 1e-14 * scale(&[&x]).powi(2));
    }

    #[test]
    fn bracket_satisfies_jacobi(a in any::<u64>(), b in any::<u64>(), c in any::<u64>()) {
        let lat = lattice();
        let x = random_field(&lat, a, 4);
        let y = random_field(&lat, b, 4);
        let z = random_field(&lat, c, 4);
        let j1 = lie_bracket(&x, &lie_bracket(&y, &z));
        let j2 = lie_bracket(&y, &lie_bracket(&z, &x));
        let j3 = lie_bracket(&z, &lie_bracket(&x, &y));
        let sum = j1.plus(&j2).plus(&j3);
        prop_assert!(sum.max_abs_coef() <= 1e-12 * scale(&[&j1, &j2, &j3]));
    }

    #[test]
    fn text_round_trip(a in any::<u64>()) {
        let lat = lattice();
        let x = random_field(&lat, a, 12);
        let text = write_field(&x);
        let back = parse_field(&text, None).unwrap();
        prop_assert_eq!(&back, &x);
        prop_assert_eq!(write_field(&back), text);
    }

    #[test]
    fn norm_is_a_seminorm(a in any::<u64>(), b in any::<u64>(), t in -3.0f64..3.0) {
        let lat = lattice();
        let dom = DomainParams::new(0.5, 0.1, 0.5).unwrap();
        let x = random_field(&lat, a, 6);
        let y = random_field(&lat, b, 6);
        let nx = vf_norm(&x, &dom);
        prop_assert!((vf_norm(&x.scaled(C64::new(t, 0.0)), &dom) - t.abs() * nx).abs() <= 1e-12 * nx.max(1.0));
        prop_assert!(vf_norm(&x.plus(&y), &dom) <= nx + vf_norm(&y, &dom) + 1e-12);
    }
}

#[test]
fn bracket_of_coordinate_fields() {
    // [∂/∂I₁, I₁ ∂/∂θ₁] = −∂/∂θ₁ with the convention Y·∇X − X·∇Y
    let lat = lattice();
    let one = Monomial::one(4);
    let x = PolyVectorField::from_terms(lat.clone(), [(Var::Action(0), one.clone(), C64::new(1.0, 0.0))]);
    let y = PolyVectorField::from_terms(lat.clone(), [(Var::Angle(0), one.clone().with_action(0, 1), C64::new(1.0, 0.0))]);
    let b = lie_bracket(&x, &y);
    assert_eq!(b.len(), 1);
    assert_eq!(b.get(Var::Angle(0), &one), C64::new(-1.0, 0.0));
}
