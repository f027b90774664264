use landis_core::heat_sim::*;
use landis_core::lattice::*;
use landis_core::rng::uniform_field;
use proptest::prelude::*;
use std::sync::Arc;

fn rel_l2(a: &LatticeField, b: &LatticeField) -> f64 {
    l2_norm(&a.axpby(1.0, b, -1.0)) / l2_norm(b)
}

#[test]
fn kernel_mass_is_one() {
    for d in [1, 2] {
        for h in [1.0, 0.25] {
            let bx = LatticeBox::new(d, h, 60).unwrap();
            for t in [0.1, 0.5, 1.0] {
                let k = free_kernel_solution(bx, t, &[0, 0, 0]).unwrap();
                let mass: f64 = k.values().iter().sum();
                assert!((mass - 1.0).abs() < 1e-10, "d={d} h={h} t={t}: {mass}");
            }
        }
    }
}

#[test]
fn kernel_matches_oracle_values() {
    // e^{-2} I_n(2) for n = 0, 3 (40-digit reference)
    let bx = LatticeBox::new(1, 1.0, 10).unwrap();
    let k = free_kernel_solution(bx, 1.0, &[0, 0, 0]).unwrap();
    let want0 = 0.30850832255367103953;
    let want3 = 0.028791222639470898409;
    assert!((k.get(&[0, 0, 0]) / want0 - 1.0).abs() < 1e-12);
    assert!((k.get(&[-3, 0, 0]) / want3 - 1.0).abs() < 1e-12);
    let shifted = free_kernel_solution(bx, 1.0, &[2, 0, 0]).unwrap();
    assert_eq!(shifted.get(&[5, 0, 0]), k.get(&[3, 0, 0]));
}

#[test]
fn exponential_reproduces_kernel_pointwise() {
    let bx = LatticeBox::new(1, 0.25, 120).unwrap();
    let p = HeatProblem::free(LatticeField::delta(bx, &[0, 0, 0]).unwrap()).unwrap();
    let traj = solve(&p, Method::Exponential, 1.0).unwrap();
    let exact = free_kernel_log(bx, 1.0, &[0, 0, 0]).unwrap();
    let got = traj.snapshots.last().unwrap();
    let mut worst: f64 = 0.0;
    // interior: 20 sites away from the truncation
    for i in 0..bx.sites() {
        let e = exact.values()[i];
        if bx.coords(i)[0].abs() <= 100 && e.logmag() > -280.0 * std::f64::consts::LN_10 {
            worst = worst.max((got.values()[i] / e.to_f64() - 1.0).abs());
        }
    }
    assert!(worst < 1e-8, "worst pointwise relative error {worst:e}");
}

#[test]
fn rk4_reproduces_kernel_normwise() {
    for d in [1, 2] {
        let bx = LatticeBox::new(d, 0.25, 40).unwrap();
        let p = HeatProblem::free(LatticeField::delta(bx, &[0, 0, 0]).unwrap()).unwrap();
        let traj = solve(&p, Method::Rk4, 1.0).unwrap();
        let exact = free_kernel_solution(bx, 1.0, &[0, 0, 0]).unwrap();
        let e = rel_l2(traj.snapshots.last().unwrap(), &exact);
        assert!(e < 1e-8, "d={d}: {e:e}");
        let mass: f64 = traj.snapshots.last().unwrap().values().iter().sum();
        assert!((mass - 1.0).abs() < 1e-10);
    }
}

#[test]
fn example_solution_is_a_free_solution() {
    let h = 0.25;
    let bx = LatticeBox::new(1, h, 120).unwrap();
    let start = example_solution(bx, 0.0).unwrap().to_linear().0;
    assert_eq!(start.get(&[0, 0, 0]), 1.0);
    assert!(start.values().iter().all(|&v| v <= 1.0));
    let p = HeatProblem::free(start).unwrap();
    let traj = solve(&p, Method::Exponential, 1.0).unwrap();
    let end = example_solution(bx, 1.0).unwrap().to_linear().0;
    assert!(rel_l2(traj.snapshots.last().unwrap(), &end) < 1e-8);

    // centred time differences against the discrete Laplacian
    let tau = 1e-5;
    for t in [0.3, 0.7] {
        let up = example_solution(bx, t + tau).unwrap().to_linear().0;
        let dn = example_solution(bx, t - tau).unwrap().to_linear().0;
        let mid = example_solution(bx, t).unwrap().to_linear().0;
        let dt = up.axpby(1.0 / (2.0 * tau), &dn, -1.0 / (2.0 * tau));
        let lap = discrete_laplacian(&mid);
        let r = l2_norm(&dt.axpby(1.0, &lap, -1.0)) / l2_norm(&lap);
        assert!(r < 1e-6, "t={t}: {r:e}");
    }
}

#[test]
fn example_solution_point_matches_field() {
    let bx = LatticeBox::new(2, 0.5, 8).unwrap();
    let f = example_solution(bx, 0.4).unwrap();
    let p = example_solution_log_at(0.5, 0.4, &[3, -5]).unwrap();
    assert!((f.get(&[3, -5, 0]).logmag() - p).abs() < 1e-10);
}

#[test]
fn zero_data_stays_zero() {
    let bx = LatticeBox::new(2, 0.5, 8).unwrap();
    let pot = Arc::new(RandomPotential::new(bx, 2.0, 5, true));
    let p = HeatProblem::new(pot, LatticeField::zeros(bx), uniform_grid(9)).unwrap();
    let traj = solve(&p, Method::Rk4, 1.0).unwrap();
    assert_eq!(traj.snapshots.len(), 9);
    assert!(traj.snapshots.iter().all(|s| s.values().iter().all(|&v| v == 0.0)));
    let e = audit_energy(&traj).unwrap();
    assert_eq!(e.min_slack, 0.0);
    let c = audit_caccioppoli(&traj, 2.5).unwrap();
    assert_eq!((c.gradient, c.bulk, c.initial, c.fitted_c2), (0.0, 0.0, 0.0, 0.0));
}

#[test]
fn halving_dt_is_self_consistent() {
    let bx = LatticeBox::new(2, 0.5, 10).unwrap();
    let pot = Arc::new(RandomPotential::new(bx, 1.0, 11, true));
    let psi = uniform_field(bx, 12, 1.0, 1);
    let p = HeatProblem::new(pot, psi, uniform_grid(DEFAULT_SAMPLES)).unwrap();
    let a = solve(&p, Method::Rk4, 1e-3).unwrap();
    let b = solve(&p, Method::Rk4, 5e-4).unwrap();
    let e = rel_l2(a.snapshots.last().unwrap(), b.snapshots.last().unwrap());
    assert!(e < 1e-8, "{e:e}");
    assert!(a.stats.dt <= rk4_stable_dt(&bx, 1.0));
}

#[test]
fn energy_audit_examples() {
    let bx = LatticeBox::new(1, 0.25, 40).unwrap();
    let p = HeatProblem::free(LatticeField::delta(bx, &[0, 0, 0]).unwrap()).unwrap();
    // V = 0 is the equality case, so the slack is pure integrator error
    let traj = solve(&p, Method::Rk4, 1e-3).unwrap();
    let rep = audit_energy(&traj).unwrap();
    assert!(rep.norm_decreasing);
    assert!(rep.in_solver_quadrature);
    assert!(rep.passed, "{}", rep.min_slack);

    for seed in 0..3 {
        let bx = LatticeBox::new(2, 0.5, 10).unwrap();
        let pot = Arc::new(RandomPotential::new(bx, 2.0, seed, true));
        let psi = uniform_field(bx, seed + 100, 1.0, 1);
        let p = HeatProblem::new(pot, psi, uniform_grid(DEFAULT_SAMPLES)).unwrap();
        let rep = audit_energy(&solve(&p, Method::Rk4, 1.0).unwrap()).unwrap();
        assert!(rep.passed, "seed {seed}: {}", rep.min_slack);
    }
}

#[test]
fn caccioppoli_is_stable_under_refinement() {
    let bx = LatticeBox::new(1, 0.25, 32).unwrap();
    let psi = LatticeField::delta(bx, &[0, 0, 0]).unwrap();
    let coarse = HeatProblem::free(psi.clone()).unwrap();
    let fine = HeatProblem::new(Arc::new(ZeroPotential), psi, uniform_grid(513)).unwrap();
    let a = audit_caccioppoli(&solve(&coarse, Method::Rk4, 1.0).unwrap(), 5.0).unwrap();
    let b = audit_caccioppoli(&solve(&fine, Method::Rk4, 1.0).unwrap(), 5.0).unwrap();
    assert!(a.fitted_c2.is_finite() && a.fitted_c2 > 0.0);
    assert!((a.fitted_c2 / b.fitted_c2 - 1.0).abs() < 0.01, "{} {}", a.fitted_c2, b.fitted_c2);
    assert!(a.passed && b.passed);
}

#[test]
fn caccioppoli_is_local() {
    let bx = LatticeBox::new(1, 0.5, 30).unwrap();
    let mut vals = vec![0.0; bx.sites()];
    let idx = bx.index_of(&[26, 0, 0]).unwrap();
    vals[idx] = 1.0;
    let psi = LatticeField::new(bx, vals).unwrap();
    // a static field: zero Laplacian is not needed, the snapshots are copied
    let p = HeatProblem::free(psi.clone()).unwrap();
    let traj = Trajectory {
        snapshots: vec![psi; p.t_grid().len()],
        problem: p,
        dissipation: None,
        stats: IntegratorStats {
            method: Method::Rk4,
            steps: 0,
            dt: 0.0,
            max_step_error: 0.0,
        },
    };
    let c = audit_caccioppoli(&traj, 5.0).unwrap();
    assert_eq!((c.gradient, c.bulk, c.initial), (0.0, 0.0, 0.0));
}

#[test]
fn gaussian_limit_table() {
    let hs: Vec<f64> = (1..=6).map(|k| 0.5f64.powi(k)).collect();
    let tab = gaussian_limit(1.0, 1.0, &hs).unwrap();
    assert!((tab.limit - 0.21969564473386122).abs() < 1e-15);
    assert!(tab.strictly_decreasing && tab.passed);
    assert!(tab.rows.last().unwrap().delta < 1e-3);
    assert!(gaussian_limit(1.0, 1.0, &[0.3]).is_err());
    let quarter = gaussian_limit_value(1.0, 0.25);
    assert!((quarter - 0.20755374871029736).abs() < 1e-15);
}

#[test]
fn growth_beyond_declared_bound_is_rejected() {
    // the solver enforces the bound it is given; a problem built honestly never trips it
    let bx = LatticeBox::new(1, 0.5, 8).unwrap();
    let pot = Arc::new(FnPotential {
        f: |_: &[i64; 3], _| 3.0,
        bound: 3.0,
        is_static: true,
    });
    let psi = uniform_field(bx, 1, 1.0, 1);
    let p = HeatProblem::new(pot, psi, uniform_grid(5)).unwrap();
    assert!(solve(&p, Method::Rk4, 1.0).is_ok());
    assert!(solve(&p, Method::Rk4, 0.0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn solution_map_is_linear(a in -3.0f64..3.0, b in -3.0f64..3.0, s1 in 0u64..1000, s2 in 0u64..1000) {
        let bx = LatticeBox::new(1, 0.5, 10).unwrap();
        let pot: Arc<dyn Potential> = Arc::new(RandomPotential::new(bx, 1.0, 42, true));
        let f = uniform_field(bx, s1, 1.0, 1);
        let g = uniform_field(bx, s2, 1.0, 1);
        let grid = uniform_grid(9);
        let run = |psi: LatticeField| {
            let p = HeatProblem::new(pot.clone(), psi, grid.clone()).unwrap();
            solve(&p, Method::Rk4, 1.0).unwrap().snapshots.pop().unwrap()
        };
        let lhs = run(f.axpby(a, &g, b));
        let rhs = run(f.clone()).axpby(a, &run(g.clone()), b);
        let scale = l2_norm(&rhs) + l2_norm(&f) + l2_norm(&g);
        prop_assert!(l2_norm(&lhs.axpby(1.0, &rhs, -1.0)) <= 1e-12 * scale);
    }

    #[test]
    fn nonnegative_data_stays_nonnegative(seed in 0u64..1000, amp in 0.0f64..3.0) {
        let bx = LatticeBox::new(2, 0.5, 6).unwrap();
        let pot = Arc::new(RandomPotential::new(bx, amp, seed, false));
        let psi = uniform_field(bx, seed, 1.0, 1).map(f64::abs);
        let p = HeatProblem::new(pot, psi, uniform_grid(5)).unwrap();
        for m in [Method::Rk4, Method::Exponential] {
            let traj = solve(&p, m, 1.0).unwrap();
            for s in &traj.snapshots {
                prop_assert!(s.values().iter().all(|&v| v >= 0.0));
            }
        }
    }

    #[test]
    fn energy_inequality_holds(seed in 0u64..1000, amp in 0.0f64..2.0) {
        let bx = LatticeBox::new(1, 0.5, 12).unwrap();
        let pot = Arc::new(RandomPotential::new(bx, amp, seed, true));
        let psi = uniform_field(bx, seed ^ 0x55, 1.0, 1);
        let p = HeatProblem::new(pot, psi, uniform_grid(33)).unwrap();
        let rep = audit_energy(&solve(&p, Method::Rk4, 1.0).unwrap()).unwrap();
        prop_assert!(rep.passed, "{}", rep.min_slack);
    }
}
