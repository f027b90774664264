use landis_core::carleman::{CarlemanConfig, Verdict};
use landis_core::elliptic_uc::*;
use landis_core::lattice::*;
use landis_core::rng::uniform_field;
use landis_core::{LabError, LogScalar};
use proptest::prelude::*;

// mpmath, 30 digits
const J10_2: f64 = 2.51538628271673670963516093752e-7;
const J5_2: f64 = 7.03962975587168548424351218488e-3;

#[test]
fn residual_examples() {
    let bx = LatticeBox::new(2, 0.5, 6).unwrap();
    let zero = EllipticProblem::free(LatticeField::zeros(bx));
    assert!(elliptic_residual(&zero).values().iter().all(|&v| v == 0.0));
    let one = EllipticProblem::free(LatticeField::from_fn(bx, |_| 1.0));
    assert!(elliptic_residual(&one).values().iter().all(|&v| v.abs() < 1e-12));
    assert_eq!(residual_ratio(&zero), 0.0);
    let p = j_testbed(2.0, 60).unwrap();
    assert!(residual_ratio(&p) <= 1e-10);
    assert!(EllipticProblem::new(LatticeField::zeros(bx), vec![1.0; bx.sites()], 0.5).is_err());
}

#[test]
fn shells_of_simple_fields() {
    let bx = LatticeBox::new(1, 1.0, 8).unwrap();
    let delta = EllipticProblem::free(LatticeField::delta(bx, &[0, 0, 0]).unwrap());
    let s = shell_extract(&delta);
    assert_eq!(s.m_at(1).to_f64(), 1.0);
    assert!((2..=8).all(|n| s.m_at(n).is_zero()));
    let geo = EllipticProblem::free(LatticeField::from_fn(bx, |j| 2f64.powi(-(j[0].abs() as i32))));
    let s = shell_extract(&geo);
    for n in 1..=8 {
        assert!((s.m_at(n).to_f64() / 2f64.powi(1 - n as i32) - 1.0).abs() < 1e-14);
    }
    let p = j_testbed(2.0, 40).unwrap();
    let s = shell_extract(&p);
    assert!((s.m_at(11).to_f64() / J10_2 - 1.0).abs() < 1e-12);
    assert!((s.m_at(6).to_f64() / J5_2 - 1.0).abs() < 1e-12);
    assert_eq!(s.q_at(3), 2.0 * (1.0 + 3.0 / 2.0));
}

#[test]
fn recursion_on_genuine_solutions() {
    let p = j_testbed(2.0, 150).unwrap();
    let rep = uc_recursion_audit(&shell_extract(&p)).unwrap();
    assert!(rep.passed);
    assert_eq!(rep.rows.len(), 149);
    let bx = LatticeBox::new(1, 1.0, 12).unwrap();
    let zero = uc_recursion_audit(&shell_extract(&EllipticProblem::free(LatticeField::zeros(bx)))).unwrap();
    assert!(zero.passed && zero.worst_margin == 0.0);
    // u_n = 3^n / ... is not a solution; u_n = n solves the free equation in d = 1
    let lin = EllipticProblem::free(LatticeField::from_fn(bx, |j| j[0] as f64));
    let rep = uc_recursion_audit(&shell_extract(&lin)).unwrap();
    assert!(rep.passed);
    assert!(rep.rows.iter().all(|r| r.factor == 3.0));
}

#[test]
fn recursion_gate() {
    let bx = LatticeBox::new(1, 0.25, 10).unwrap();
    let noise = EllipticProblem::free(uniform_field(bx, 4, 1.0, 1));
    assert!(matches!(uc_recursion_audit(&shell_extract(&noise)), Err(LabError::Residual(_))));
    let syn = geometric_shells(1, 1.0, 4.0, 0.0, 10).unwrap();
    assert!(matches!(uc_recursion_audit(&syn), Err(LabError::Residual(_))));
}

#[test]
fn thresholds() {
    let s = ShellData::new(1.0, 1, vec![LogScalar::ONE; 11], vec![0.0; 11]).unwrap();
    let t = uc_threshold(&s, 10).unwrap();
    assert_eq!(t.logmag(), -10.0 * 3f64.ln());
    assert!(uc_threshold(&s, 0).is_err());
    assert!(uc_threshold(&s, 12).is_err());
    let q = vec![0.3; 20];
    let s = ShellData::new(0.5, 2, vec![LogScalar::from_f64(2.0); 20], q.clone()).unwrap();
    assert_eq!(
        uc_threshold(&s, 17).unwrap().logmag(),
        bounded_threshold(LogScalar::from_f64(2.0), 17, 2, 0.5, 0.3 / 0.25).logmag()
    );
    // varying q: the bounded threshold uses the sup and lies below the product form
    let q: Vec<f64> = (1..=20).map(|k| 0.01 * k as f64).collect();
    let s = ShellData::new(1.0, 1, vec![LogScalar::ONE; 20], q).unwrap();
    assert!(bounded_threshold(LogScalar::ONE, 20, 1, 1.0, 0.2) <= uc_threshold(&s, 20).unwrap());
    let lp = linear_potential_thresholds(LogScalar::ONE, 30, 1, 0.5);
    assert!(lp.simplified <= lp.product);
    let q: Vec<f64> = (1..=30).map(|k| 0.125 * k as f64).collect();
    let s = ShellData::new(0.5, 1, vec![LogScalar::ONE; 30], q).unwrap();
    assert!((uc_threshold(&s, 30).unwrap().logmag() - lp.product.logmag()).abs() < 1e-12);
}

#[test]
fn flagging() {
    let g = geometric_shells(1, 1.0, 4.0, 4.0, 200).unwrap();
    let scan = uc_flag_scan(&g).unwrap();
    let n0 = scan.n0.unwrap();
    assert!(scan.rows.iter().all(|r| r.forces_zero == (r.n >= n0)));
    let j = shell_extract(&j_testbed(2.0, 150).unwrap());
    assert!(uc_flag_scan(&j).unwrap().never_flagged);
}

#[test]
fn jota_trend() {
    let f = jota_fit(2.0, 50, 200).unwrap();
    assert!(f.slope_rel_err < 0.05, "{f:?}");
    assert!(f.r2 > 0.999);
    assert!(jota_fit(2.0, 50, 51).is_err());
}

#[test]
fn alpha_cases() {
    let a = alpha_select_elliptic(10.0, 0.1, 1, EllipticMode::Scaling).unwrap();
    assert_eq!(a.case, EllipticCase::Continuum);
    assert!((a.alpha - 10f64.powf(4.0 / 3.0)).abs() < 1e-9);
    assert!((a.beta.unwrap() - 1.0).abs() < 1e-12);
    let r = 1e4;
    let b = alpha_select_elliptic(r, 0.1, 1, EllipticMode::Scaling).unwrap();
    assert_eq!(b.case, EllipticCase::Intermediate);
    let want = 0.25 * r.powf(1.25) * (0.75 * r.ln());
    assert!((b.alpha / want - 1.0).abs() < 1e-12);
    let c = alpha_select_elliptic(20.0, 0.5, 2, EllipticMode::FixedMesh).unwrap();
    assert_eq!(c.case, EllipticCase::FixedMesh);
    assert!((c.alpha - 40.0 * 10f64.ln()).abs() < 1e-12);
    assert!(alpha_select_elliptic(20.0, 0.01, 1, EllipticMode::FixedMesh).is_err());
    assert!(alpha_select_elliptic(0.5, 0.1, 1, EllipticMode::Scaling).is_err());
    // sinh y >= y gives h^-4 sinh sinh^2 >= 8 c^3 / d
    for (r, h, d) in [(10.0, 0.1, 1), (100.0, 0.2, 2), (4.0, 0.6, 3)] {
        let a = alpha_select_elliptic(r, h, d, EllipticMode::Scaling).unwrap();
        assert!(a.log_condition >= (8.0 / d as f64).ln() - 1e-12);
    }
}

#[test]
fn elliptic_audit_baseline() {
    let a = alpha_select_elliptic(30.0, 0.1, 1, EllipticMode::Scaling).unwrap();
    let cfg = CarlemanConfig::new(a.alpha, 30.0, 0.1, 1).unwrap();
    let x = audit_carleman_elliptic(&cfg, 8, 21).unwrap();
    assert!(x.commutator_ok);
    assert!(x.c_hat.is_finite() && x.c_hat > 0.0);
    assert_eq!(x, audit_carleman_elliptic(&cfg, 8, 21).unwrap());
    let bx = cfg.support_box().unwrap();
    let bad = LatticeField::delta(bx, &[-900, 0, 0]).unwrap();
    assert!(matches!(elliptic_sides(&cfg, &bad), Err(LabError::Support(_))));
}

#[test]
fn gap_examples() {
    let g = landis_elliptic_gap(DecayKind::Continuum, 2.0, 1.0, 5.0).unwrap();
    assert_eq!(g.verdict, Verdict::Contradiction);
    let r = g.crossing_r.unwrap();
    assert!(((2.0 - 1.0) * r.powf(4.0 / 3.0) - 5.0).abs() < 1e-9);
    assert_eq!(landis_elliptic_gap(DecayKind::Continuum, 1.0, 1.0, 0.0).unwrap().verdict, Verdict::Boundary);
    assert_eq!(
        landis_elliptic_gap(DecayKind::FixedMesh { h: 0.5 }, 0.5, 1.0, 0.0).unwrap().verdict,
        Verdict::NoContradiction
    );
    let b = landis_elliptic_gap(DecayKind::Intermediate { beta: 4.0 }, 3.0, 1.0, 10.0).unwrap();
    let r = b.crossing_r.unwrap();
    assert!((2.0 * DecayKind::Intermediate { beta: 4.0 }.rate(r) - 10.0).abs() < 1e-8);
    assert!(landis_elliptic_gap(DecayKind::Intermediate { beta: 2.0 }, 3.0, 1.0, 0.0).is_err());
    assert!(landis_elliptic_gap(DecayKind::Continuum, 3.0, 0.0, 0.0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn elliptic_commutator_nonnegative(seed in any::<u64>(), alpha in 0.0f64..150.0, d in 1usize..3) {
        let cfg = CarlemanConfig::new(alpha, 3.0, 0.25, d).unwrap();
        let f = elliptic_field(&cfg, seed).unwrap();
        let s = elliptic_sides(&cfg, &f).unwrap();
        prop_assert!(s.commutator >= -1e-10 * s.scale.max(1.0));
    }

    #[test]
    fn constant_q_threshold_is_closed_form(q in 0.0f64..5.0, d in 1usize..4, n in 1usize..60, m1 in 1e-3f64..1e3) {
        let s = ShellData::new(1.0, d, vec![LogScalar::from_f64(m1); 60], vec![q; 60]).unwrap();
        let t = uc_threshold(&s, n).unwrap();
        let want = LogScalar::from_f64(m1).scale_ln(-(n as f64) * (4.0 * d as f64 - 1.0 + q).ln());
        prop_assert_eq!(t.logmag(), want.logmag());
    }

    #[test]
    fn free_solutions_satisfy_the_recursion(a in -2.0f64..2.0, b in -2.0f64..2.0, n in 4usize..40) {
        let bx = LatticeBox::new(1, 1.0, n).unwrap();
        let p = EllipticProblem::free(LatticeField::from_fn(bx, |j| a + b * j[0] as f64));
        let rep = uc_recursion_audit(&shell_extract(&p)).unwrap();
        prop_assert!(rep.passed);
    }
}
