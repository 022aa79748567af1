use cnls_kam::kam::{extract_embedding, iterate, schedule_step, KamOptions, KamSchedule, KamState};
use cnls_kam::lattice::LatticeConfig;
use cnls_kam::nls::{action_angle, ExpansionOptions, NlsModel, ParamPoint};
use cnls_kam::vfield::{DomainParams, PolyVectorField};

fn base() -> KamSchedule {
    KamSchedule { r: 1.0, s: 0.1, rho: 0.5, gamma: 1e-3, tau: 40.0, eps0: 1e-6, l: 1.0, c: 1.0 }
}

#[test]
fn schedule_closed_forms() {
    let b = base();
    let mut eps = b.eps0;
    let mut s = b.s;
    let mut l = b.l;
    for nu in 0..=10usize {
        let c = b.at(nu, eps, s, l);
        let p = 2f64.powi(-(nu as i32));
        assert_eq!(c.delta, b.r * p / 8.0);
        assert_eq!(c.r, b.r * (0.5 + p / 2.0));
        assert_eq!(c.r_next, c.r - 2.0 * c.delta);
        assert_eq!(c.rho, b.rho * (0.5 + p / 2.0));
        assert_eq!(c.rho_next, b.rho * (0.5 + p / 4.0));
        let half_log = -0.5 * eps.ln();
        assert!((c.k as f64) * c.delta >= half_log);
        assert!((c.k as f64 - 1.0) * c.delta < half_log);
        assert!((c.eta.powi(3) / eps - 1.0).abs() < 1e-14);
        assert_eq!(c.s_next, c.eta * s / 4.0);
        assert_eq!(c.l_next, l + eps);
        let pred = 10f64.powf(c.log10_eps_predicted);
        if pred.is_finite() && pred > 0.0 {
            let a = b.c * b.gamma.powi(-5) / c.delta * (c.k as f64).powf(5.0 * b.tau + 19.0) * eps.powf(5.0 / 3.0);
            let e = a + eps.powf(7.0 / 6.0);
            if e.is_finite() {
                assert!((pred / e - 1.0).abs() < 1e-10);
            }
        }
        eps = eps.powf(7.0 / 6.0);
        s = c.s_next;
        l = c.l_next;
    }
}

#[test]
fn schedule_spot_values() {
    let c = schedule_step(&base(), 0);
    assert_eq!(c.delta, 0.125);
    assert_eq!(c.k, 56);
    let half = KamSchedule { r: 0.5, ..base() };
    assert_eq!(schedule_step(&half, 0).delta, 0.5 / 8.0);
}

#[test]
fn predicted_chain_in_log_space() {
    let b = KamSchedule { gamma: 0.5, tau: 1.0, eps0: 1e-30, ..base() };
    let c0 = schedule_step(&b, 0);
    let c1 = schedule_step(&b, 1);
    assert_eq!(c1.eps, c0.eps_predicted());
    assert_eq!(c1.s, c0.s_next);
    let ln_a = -5.0 * b.gamma.ln() - c0.delta.ln() + 24.0 * (c0.k as f64).ln() + 5.0 / 3.0 * b.eps0.ln();
    let ln_b = 7.0 / 6.0 * b.eps0.ln();
    let expect = (ln_a.exp() + ln_b.exp()).log10();
    assert!((c0.log10_eps_predicted - expect).abs() < 1e-10);
}

#[test]
fn zero_perturbation_takes_no_steps() {
    let model = NlsModel::uniform(LatticeConfig { radius: 2, ..LatticeConfig::default() }, 1e-6, 1.9).unwrap();
    let zeta = ParamPoint::new(vec![0.3, 0.6], vec![0.2, 0.8]).unwrap();
    let nf = cnls_kam::nls::normal_form_at(&model, &zeta).unwrap();
    let dom = DomainParams::new(0.5, 1e-6, 0.5).unwrap();
    let st = KamState::new(zeta, nf.clone(), PolyVectorField::zero(model.lattice.clone()), dom, 1.0).unwrap();
    let sched = KamSchedule { r: 0.5, s: 1e-6, rho: 0.5, gamma: 1e-4, tau: 50.0, eps0: 1e-12, l: 1.0, c: 1.0 };
    let (rep, fin) = iterate(st, &sched, &KamOptions::default()).unwrap();
    assert!(rep.steps.is_empty());
    assert!(rep.reached_target);
    assert_eq!(fin.nf, nf);
    assert_eq!(rep.norms, vec![0.0]);
}

#[test]
fn small_lattice_iteration_converges() {
    let s = 1.6e-10;
    let model = NlsModel::uniform(LatticeConfig { radius: 2, ..LatticeConfig::default() }, s, 1.9).unwrap();
    let zeta = ParamPoint::new(vec![0.3, 0.6], vec![0.2, 0.8]).unwrap();
    let (nf, p, _) = action_angle(&model, &zeta, &ExpansionOptions::default()).unwrap();
    let dom = DomainParams::new(0.5, s, 0.5).unwrap();
    let st = KamState::new(zeta, nf, p, dom, 1.0).unwrap();
    let eps0 = st.eps();
    let sched = KamSchedule { r: 0.5, s, rho: 0.5, gamma: 1e-4, tau: 50.0, eps0, l: 1.0, c: 1.0 };
    let (rep, fin) = iterate(st, &sched, &KamOptions::default()).unwrap();
    assert!(rep.reached_target);
    assert!(rep.eps_sum() <= 2.0 * eps0);
    for w in rep.norms.windows(2) {
        assert!(w[1] < w[0]);
    }
    for st in &rep.steps {
        assert!(st.structure_ok(), "{}", st.csv_row());
        assert!(st.drift_ok(), "{}", st.csv_row());
        assert!(st.contraction <= sched.c);
    }
    assert_eq!(rep.steps[0].constants.delta, 0.5 / 8.0);
    let emb = extract_embedding(&fin);
    assert_eq!(emb.transforms.len(), rep.steps.len());
    let lat = model.lattice.clone();
    let angles = [0.4, 1.1, 2.3, 5.9];
    let y = emb.eval(&lat, &angles);
    assert!(y.is_real(1e-12 * s));
    let (d, alpha) = emb.distance_to_torus(&lat, &y, s);
    assert!(d < 1e-12);
    for (a, b) in alpha.iter().zip(&angles) {
        assert!((a - b).abs() < 1e-12);
    }
}
