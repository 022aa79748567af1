mod common;

use std::f64::consts::PI;

use cnls_kam::lattice::{Block, Lattice, LatticeConfig, Sign, Site, Var};
use cnls_kam::nls::{
    build_lattice_perturbation, cubic_coefficient, from_lattice, gn3_coefficient, gn4_coefficient, quintic_coefficient,
    simulate, to_lattice, NlsModel, ParamPoint, SimOptions, SimState,
};
use cnls_kam::vfield::C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn two_pi_to(e: usize) -> f64 {
    let mut x = 1.0;
    for _ in 0..e {
        x *= 2.0 * PI;
    }
    x
}

fn zeta() -> ParamPoint {
    ParamPoint::new(vec![0.3, 0.6], vec![0.2, 0.8]).unwrap()
}

fn random_state(lat: &Lattice, amp: f64, seed: u64) -> SimState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut st = SimState::zero(lat.len());
    for h in 0..lat.len() {
        let decay = (-(lat.norm(h as u16))).exp();
        st.q[h] = C64::from_polar(amp * decay * rng.gen_range(0.5..1.0), rng.gen_range(0.0..2.0 * PI));
        st.p[h] = C64::from_polar(amp * decay * rng.gen_range(0.5..1.0), rng.gen_range(0.0..2.0 * PI));
    }
    st
}

#[test]
fn coefficient_constants() {
    for d in 1..=3 {
        assert_eq!(quintic_coefficient(d), C64::new(0.0, 2.0 / two_pi_to(2 * d)));
        assert_eq!(cubic_coefficient(d), C64::new(0.0, 1.0 / two_pi_to(d)));
    }
}

#[test]
fn coefficient_functions_on_random_tuples() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let site = |rng: &mut ChaCha8Rng| Site(vec![rng.gen_range(-3..=3), rng.gen_range(-3..=3)]);
    let (cq, cc) = (C64::new(0.0, 2.0 / two_pi_to(4)), C64::new(0.0, 1.0 / two_pi_to(2)));
    let mut hits = 0;
    for _ in 0..20000 {
        let (i, j, k, l, m) = (site(&mut rng), site(&mut rng), site(&mut rng), site(&mut rng), site(&mut rng));
        let h = if rng.gen_bool(0.5) { i.add(&j).add(&k).sub(&l).sub(&m) } else { site(&mut rng) };
        let conserved = i.add(&j).add(&k).sub(&l).sub(&m) == h;
        hits += conserved as usize;
        assert_eq!(gn3_coefficient(&i, &j, &k, &l, &m, &h), if conserved { cq } else { C64::default() });
        let h2 = if rng.gen_bool(0.5) { i.add(&j).sub(&k) } else { site(&mut rng) };
        let conserved = i.add(&j).sub(&k) == h2;
        assert_eq!(gn4_coefficient(&i, &j, &k, &h2), if conserved { cc } else { C64::default() });
    }
    assert!(hits > 5000);
}

#[test]
fn lattice_field_matches_brute_force() {
    let model = NlsModel::uniform(LatticeConfig { radius: 1, ..LatticeConfig::default() }, 1e-2, 1.9).unwrap();
    let p = build_lattice_perturbation(&model).unwrap();
    let lat = p.lattice().clone();
    let counts = common::brute_force_counts(&lat);
    let (cq, cc) = (C64::new(0.0, 2.0 / two_pi_to(4)), C64::new(0.0, 1.0 / two_pi_to(2)));
    let mut plus = 0;
    for (v, m, c) in p.iter() {
        let Var::Normal(x) = *v else { panic!("non-normal component") };
        let (key, coef) = if x.sign == Sign::Plus { ((*v, m.clone()), *c) } else { ((v.conj(), m.mirror()), c.conj()) };
        let base = if x.block == Block::Z { cq } else { cc };
        let n = counts.get(&key).copied().unwrap_or(0);
        assert!(n > 0, "term without a momentum-zero tuple");
        assert_eq!(coef, base * n as f64);
        plus += (x.sign == Sign::Plus) as usize;
    }
    assert_eq!(plus, counts.len());
}

#[test]
fn lattice_round_trip() {
    let model = NlsModel::uniform(LatticeConfig { radius: 2, ..LatticeConfig::default() }, 1e-3, 1.9).unwrap();
    let st = random_state(&model.lattice, 1e-3, 4);
    let y = from_lattice(&model, &st);
    let back = to_lattice(&model, &y);
    assert!(back.dist(&st) <= 1e-15);
}

#[test]
fn mass_conserved_per_component() {
    let model = NlsModel::uniform(LatticeConfig { radius: 2, ..LatticeConfig::default() }, 1e-2, 1.5).unwrap();
    let st = random_state(&model.lattice, 3.0, 9);
    let opts = SimOptions { sample_every: 100, ..SimOptions::default() };
    let tr = simulate(&model, &zeta(), &st, 100.0, 0.01, &opts).unwrap();
    let (q0, p0) = st.mass();
    for s in &tr.states {
        let (q, p) = s.mass();
        assert!(((q - q0) / q0).abs() <= 1e-8, "t={} q mass drift {}", s.time, (q - q0) / q0);
        assert!(((p - p0) / p0).abs() <= 1e-8, "t={} p mass drift {}", s.time, (p - p0) / p0);
    }
}

fn observed_order(order: u32) -> f64 {
    let model = NlsModel::uniform(LatticeConfig { radius: 2, ..LatticeConfig::default() }, 1e-2, 1.5).unwrap();
    let st = random_state(&model.lattice, 3.0, 9);
    let run = |dt: f64| {
        let opts = SimOptions { order, sample_every: usize::MAX, ..SimOptions::default() };
        simulate(&model, &zeta(), &st, 2.0, dt, &opts).unwrap().last().unwrap().clone()
    };
    let reference = run(0.0025);
    let e1 = run(0.04).dist(&reference);
    let e2 = run(0.02).dist(&reference);
    (e1 / e2).log2()
}

#[test]
fn convergence_order_matches() {
    let o2 = observed_order(2);
    let o4 = observed_order(4);
    assert!((o2 - 2.0).abs() < 0.2, "order 2 observed {o2}");
    assert!((o4 - 4.0).abs() < 0.3, "order 4 observed {o4}");
}
