use landis_core::besselkit::{k_ratio, log_bessel_k_quadrature, log_bessel_k};
use landis_core::convexity::*;
use landis_core::heat_sim::*;
use landis_core::lattice::*;
use landis_core::rng::uniform_field;
use landis_core::LogScalar;
use proptest::prelude::*;
use std::sync::Arc;

#[test]
fn weight_examples() {
    let s = WeightSpec::close_to_continuum(4.0, 0.1);
    assert_eq!(weight_at(&s, &[0], 0.0).unwrap(), LogScalar::ONE);
    let a = weight_at(&s, &[7, -3], 0.0).unwrap();
    let b = weight_at(&s, &[-7, 3], 0.0).unwrap();
    assert_eq!(a, b);
    let direct = weight_at(&s, &[10], 0.0).unwrap().logmag();
    let chain: f64 = (0..10).map(|n| k_ratio(n, 400.0).unwrap().ln()).sum();
    assert!((direct - chain).abs() < 1e-8);
    let raw = log_bessel_k(10, 400.0).unwrap().logmag() - log_bessel_k(0, 400.0).unwrap().logmag();
    assert!((direct - raw).abs() < 1e-8);
    // moving weight is normalized at t = 0, so it decreases in t
    let m = WeightSpec::moving(4.0, 0.5);
    assert!(weight_at(&m, &[0], 1.0).unwrap() < weight_at(&m, &[0], 0.0).unwrap());
    let p = WeightSpec::purely_discrete(0.5, 0.5);
    let x = 2.0 / (std::f64::consts::E * 0.25);
    let want = log_bessel_k_quadrature(2.0, x, 256).unwrap().logmag()
        - log_bessel_k_quadrature(0.0, x, 256).unwrap().logmag();
    assert!((weight_at(&p, &[4], 0.0).unwrap().logmag() - want).abs() < 1e-10);
}

#[test]
fn weighted_energy_examples() {
    let bx = LatticeBox::new(2, 0.5, 6).unwrap();
    let spec = WeightSpec::close_to_continuum(4.0, 0.5);
    let zero = LogField::from_linear(&LatticeField::zeros(bx));
    let e = weighted_energy_log(&[0.0], &[zero], &spec).unwrap();
    assert!(e.values[0].is_zero());
    let d = LatticeField::delta(bx, &[0, 0, 0]).unwrap().scaled(3.0);
    let e = weighted_energy_log(&[0.0], &[LogField::from_linear(&d)], &spec).unwrap();
    assert!((e.values[0].to_f64() - 0.25 * 9.0).abs() < 1e-14);
    let wrong = WeightSpec::close_to_continuum(4.0, 0.25);
    assert!(weighted_energy_log(&[0.0], &[LogField::from_linear(&d)], &wrong).is_err());
}

fn example_energy(h: f64, gamma: f64, n: usize) -> WeightedEnergy {
    let bx = LatticeBox::new(1, h, (60.0 / h) as usize).unwrap();
    let ts = uniform_grid(n);
    let snaps: Vec<LogField> = ts.iter().map(|&t| example_solution(bx, t).unwrap()).collect();
    weighted_energy_log(&ts, &snaps, &WeightSpec::close_to_continuum(gamma, h)).unwrap()
}

#[test]
fn example_energy_is_finite_and_log_convex() {
    let mut at_one = vec![];
    for h in [0.5, 0.25, 0.1] {
        let e = example_energy(h, 4.0, 33);
        assert!(e.values.iter().all(|v| v.sign() == 1 && v.logmag().is_finite()));
        let rep = audit_logconvexity(&e, 0.0).unwrap();
        assert!(rep.convex, "h={h}: {}", rep.n_hat);
        at_one.push(e.values.last().unwrap().logmag());
    }
    // bounded uniformly in h: the values settle as h shrinks
    let spread = at_one.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - at_one.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(spread < 1.0, "{at_one:?}");
}

#[test]
fn logconvexity_examples() {
    let flat = WeightedEnergy {
        times: vec![0.0, 0.5, 1.0],
        values: vec![LogScalar::from_f64(2.0); 3],
    };
    assert_eq!(audit_logconvexity(&flat, 0.0).unwrap().n_hat, 0.0);
    let bump = WeightedEnergy {
        times: vec![0.0, 0.5, 1.0],
        values: [1.0, 10.0, 1.0].iter().map(|&v| LogScalar::from_f64(v)).collect(),
    };
    let rep = audit_logconvexity(&bump, 0.0).unwrap();
    assert!((rep.n_hat - 10f64.ln()).abs() < 1e-14);
    assert_eq!(rep.argmax_t, 0.5);
    assert!(!rep.convex);
    let broken = WeightedEnergy {
        times: vec![0.0, 0.5, 1.0],
        values: vec![LogScalar::ZERO, LogScalar::ONE, LogScalar::ONE],
    };
    assert!(audit_logconvexity(&broken, 0.0).is_err());
}

#[test]
fn monotone_energy_examples() {
    let bx = LatticeBox::new(1, 0.5, 40).unwrap();
    let spec = WeightSpec::moving(4.0, 0.5);
    let p = HeatProblem::free(LatticeField::delta(bx, &[0, 0, 0]).unwrap()).unwrap();
    let rep = audit_monotone_energy(&solve(&p, Method::Rk4, 1.0).unwrap(), &spec).unwrap();
    assert!(rep.passed, "{}", rep.worst_increase);

    let zero = HeatProblem::free(LatticeField::zeros(bx)).unwrap();
    assert!(audit_monotone_energy(&solve(&zero, Method::Rk4, 1.0).unwrap(), &spec).unwrap().passed);

    for seed in 0..3 {
        let pot = Arc::new(RandomPotential::new(bx, 2.0, seed, true));
        let psi = uniform_field(bx, seed + 7, 1.0, 4);
        let p = HeatProblem::new(pot, psi, uniform_grid(65)).unwrap();
        let rep = audit_monotone_energy(&solve(&p, Method::Rk4, 1.0).unwrap(), &spec).unwrap();
        assert!(rep.passed, "seed {seed}: {}", rep.worst_increase);
    }
    assert!(audit_monotone_energy(
        &solve(&p, Method::Rk4, 1.0).unwrap(),
        &WeightSpec::close_to_continuum(4.0, 0.5)
    )
    .is_err());
}

#[test]
fn static_splitting_reproduces_conjugation() {
    let bx = LatticeBox::new(2, 0.5, 6).unwrap();
    let spec = WeightSpec::delta(2.0, 0.6, 0.5);
    let f = uniform_field(bx, 4, 1.0, 2);
    let (s, a) = sa_apply(&f, &spec, 0.0).unwrap();
    let w = LatticeField::from_fn(bx, |j| weight_at(&spec, &j[..2], 0.0).unwrap().to_f64());
    let over = LatticeField::new(bx, f.values().iter().zip(w.values()).map(|(x, y)| x / y).collect()).unwrap();
    let lap = discrete_laplacian(&over);
    for i in 0..bx.sites() {
        let want = w.values()[i] * lap.values()[i];
        let got = s.values()[i] + a.values()[i];
        assert!((got - want).abs() < 1e-11 * (1.0 + want.abs()), "site {i}");
    }
}

#[test]
fn commutator_examples() {
    let bx = LatticeBox::new(1, 0.25, 12).unwrap();
    let spec = WeightSpec::close_to_continuum(1.0, 0.25);
    let c = commutator_form(&LatticeField::zeros(bx), &spec).unwrap();
    assert_eq!((c.direct, c.closed_form), (0.0, 0.0));
    let edge = LatticeField::delta(bx, &[11, 0, 0]).unwrap();
    assert!(commutator_form(&edge, &spec).is_err());
    assert!(commutator_form(&edge, &WeightSpec::moving(1.0, 0.25)).is_err());
}

#[test]
fn lambda_examples() {
    let l = lambda_delta(0, 1.0, 1.0).unwrap();
    // the same combination from quadrature-oracle K values
    let k = |n: f64| log_bessel_k_quadrature(n, 1.0, 256).unwrap().logmag();
    let r = |m: f64| k(m + 1.0) - k(m);
    let want = 2.0 * ((2.0 * r(0.0)).sinh() - (2.0 * r(-1.0)).sinh() + (r(0.0) - r(1.0)).sinh() + (r(-2.0) - r(-1.0)).sinh());
    assert!((l - want).abs() < 1e-9 * want.abs());
    assert!(l > 0.0);
    assert_eq!(lambda_delta(5, 3.0, 0.0).unwrap(), 0.0);
    assert!(lambda_delta(0, 0.0, 1.0).is_err());
    let mut worst = f64::INFINITY;
    for j in -10i64..=10 {
        for x in [0.01, 0.1, 0.5, 1.0, 4.0, 30.0, 400.0] {
            for delta in [0.1, 0.5, 0.9, 1.0] {
                let v = lambda_delta(j, x, delta).unwrap();
                worst = worst.min(v - lambda_lower_bound(x));
            }
            assert!(lambda_delta(j, x, 1.0).unwrap() > 0.0, "j={j} x={x}");
        }
    }
    assert!(worst >= 0.0);
}

#[test]
fn truncated_weight_error_terms() {
    let ts = uniform_grid(9);
    for (gamma, h) in [(4.0, 0.5), (1.0, 0.25)] {
        for r in [2, 10, 40] {
            let rep = audit_truncated_weight(gamma, h, r, &ts).unwrap();
            assert!(rep.max_scaled.is_finite());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn s_symmetric_a_antisymmetric(
        seed in 0u64..10_000,
        gamma in 0.5f64..8.0,
        delta in 0.05f64..1.0,
        hi in 0usize..3,
        moving in any::<bool>(),
    ) {
        let h = [0.5, 0.25, 0.1][hi];
        let bx = LatticeBox::new(1, h, 14).unwrap();
        let spec = if moving { WeightSpec::moving(gamma, h) } else { WeightSpec::delta(gamma, delta, h) };
        let f = uniform_field(bx, seed, 1.0, 2);
        let g = uniform_field(bx, seed + 1, 1.0, 2);
        let (sf, af) = sa_apply(&f, &spec, 0.3).unwrap();
        let (sg, _) = sa_apply(&g, &spec, 0.3).unwrap();
        let scale = l2_norm(&sf) * l2_norm(&g) + l2_norm(&f) * l2_norm(&sg);
        prop_assert!((inner(&sf, &g) - inner(&f, &sg)).abs() <= 1e-12 * scale);
        prop_assert!(inner(&f, &af).abs() <= 1e-12 * l2_norm(&f) * l2_norm(&af));
    }

    #[test]
    fn commutator_closed_form_and_bounds(
        seed in 0u64..10_000,
        gamma in prop::sample::select(vec![1.0, 4.0]),
        hi in 0usize..3,
        delta in 0.05f64..1.0,
    ) {
        let h = [0.5, 0.25, 0.1][hi];
        let bx = LatticeBox::new(1, h, 16).unwrap();
        let f = uniform_field(bx, seed, 1.0, 2);
        let one = commutator_form(&f, &WeightSpec::close_to_continuum(gamma, h)).unwrap();
        prop_assert!(one.gap() <= 1e-8, "gap {}", one.gap());
        prop_assert!(one.direct >= -1e-10 * one.scale);
        let part = commutator_form(&f, &WeightSpec::delta(gamma, delta, h)).unwrap();
        prop_assert!(part.gap() <= 1e-8);
        let x = gamma / (h * h);
        let floor = -4.0 / h.powi(4) * (1.0 + 1.0 / x + 0.25 / x.powi(3)) * l2_norm(&f).powi(2);
        prop_assert!(part.direct >= floor - 1e-10 * part.scale);
    }

    #[test]
    fn cross_commutators_vanish(seed in 0u64..10_000, gamma in 0.5f64..6.0, delta in 0.1f64..1.0) {
        let bx = LatticeBox::new(2, 0.5, 7).unwrap();
        let spec = WeightSpec::delta(gamma, delta, 0.5);
        let f = uniform_field(bx, seed, 1.0, 2);
        let c = commutator_form(&f, &spec).unwrap();
        let v = cross_commutator(&f, &spec, 0, 1).unwrap();
        prop_assert!(v.abs() <= 1e-12 * c.scale.max(1e-300), "{v}");
        prop_assert!(c.gap() <= 1e-8);
    }
}
