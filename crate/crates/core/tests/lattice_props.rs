use landis_core::lattice::*;
use proptest::prelude::*;

fn interior_field(bx: LatticeBox, vals: &[f64], margin: usize) -> LatticeField {
    let lim = (bx.extent() - margin) as i64;
    let values = (0..bx.sites())
        .map(|i| {
            let j = bx.coords(i);
            let inside = (0..bx.d()).all(|k| j[k].abs() < lim);
            if inside {
                vals[i % vals.len()]
            } else {
                0.0
            }
        })
        .collect();
    LatticeField::new(bx, values).unwrap()
}

#[test]
fn laplacian_examples() {
    let bx = LatticeBox::new(2, 0.3, 6).unwrap();
    let c = LatticeField::from_fn(bx, |_| 2.5);
    let lap = discrete_laplacian(&c);
    for i in 0..bx.sites() {
        if !bx.on_boundary(i) {
            assert_eq!(lap.values()[i], 0.0);
        }
    }

    let bx1 = LatticeBox::new(1, 1.0, 5).unwrap();
    let d = LatticeField::delta(bx1, &[0, 0, 0]).unwrap();
    let lap = discrete_laplacian(&d);
    assert_eq!(lap.get(&[-1, 0, 0]), 1.0);
    assert_eq!(lap.get(&[0, 0, 0]), -2.0);
    assert_eq!(lap.get(&[1, 0, 0]), 1.0);
    assert_eq!(lap.get(&[2, 0, 0]), 0.0);

    let bxq = LatticeBox::new(1, 0.5, 8).unwrap();
    let q = LatticeField::from_fn(bxq, |j| (j[0] as f64 * 0.5).powi(2));
    let lap = discrete_laplacian(&q);
    for n in -7i64..=7 {
        assert_eq!(lap.get(&[n, 0, 0]), 2.0);
    }
}

#[test]
fn diff_examples() {
    let bx = LatticeBox::new(1, 1.0, 6).unwrap();
    let lin = LatticeField::from_fn(bx, |j| j[0] as f64);
    let ds = diff_ops(&lin, 0, DiffKind::Symmetric).unwrap();
    for n in -5i64..=5 {
        assert_eq!(ds.get(&[n, 0, 0]), 1.0);
    }
    let c = LatticeField::from_fn(bx, |_| 1.0);
    for kind in [DiffKind::Forward, DiffKind::Backward, DiffKind::Symmetric] {
        let df = diff_ops(&c, 0, kind).unwrap();
        for n in -5i64..=5 {
            assert_eq!(df.get(&[n, 0, 0]), 0.0);
        }
    }
    assert!(diff_ops(&c, 1, DiffKind::Forward).is_err());
}

#[test]
fn laplacian_is_composition_of_differences() {
    let bx = LatticeBox::new(2, 0.37, 5).unwrap();
    let f = LatticeField::from_fn(bx, |j| ((j[0] * 7 + j[1] * 3) as f64).sin());
    let lap = discrete_laplacian(&f);
    let mut comp = LatticeField::zeros(bx);
    for k in 0..2 {
        let dp = diff_ops(&f, k, DiffKind::Forward).unwrap();
        let dmdp = diff_ops(&dp, k, DiffKind::Backward).unwrap();
        comp = comp.axpby(1.0, &dmdp, 1.0);
    }
    for i in 0..bx.sites() {
        if !bx.on_boundary(i) {
            let j = bx.coords(i);
            let mut acc = 0.0;
            for k in 0..2 {
                let dp = diff_ops(&f, k, DiffKind::Forward).unwrap();
                acc += diff_ops(&dp, k, DiffKind::Backward).unwrap().get(&j);
            }
            assert_eq!(lap.values()[i].to_bits(), acc.to_bits());
        }
    }
}

#[test]
fn summation_by_parts_examples() {
    let bx = LatticeBox::new(2, 1.0, 5).unwrap();
    let f = LatticeField::delta(bx, &[0, 0, 0]).unwrap();
    let g = LatticeField::delta(bx, &[1, 0, 0]).unwrap();
    assert_eq!(summation_by_parts_check(&f, &g).unwrap(), 0.0);
    let z = LatticeField::zeros(bx);
    assert_eq!(summation_by_parts_check(&f, &z).unwrap(), 0.0);
    let edge = LatticeField::delta(bx, &[5, 0, 0]).unwrap();
    assert!(summation_by_parts_check(&edge, &f).is_err());
}

#[test]
fn norms_examples() {
    let bx = LatticeBox::new(2, 0.5, 4).unwrap();
    let z = LatticeField::zeros(bx);
    assert_eq!(sup_norm(&z), 0.0);
    assert_eq!(l2_norm(&z), 0.0);
    let d = LatticeField::delta(bx, &[0, 0, 0]).unwrap();
    assert!((l2_norm(&d) - 0.5).abs() < 1e-15);
}

#[test]
fn annulus_examples() {
    let bx = LatticeBox::new(1, 1.0, 10).unwrap();
    let u = LatticeField::delta(bx, &[5, 0, 0]).unwrap();
    assert_eq!(annulus_mass(&[&u], 6.0, Metric::Euclidean, None).unwrap(), 1.0);
    let z = LatticeField::zeros(bx);
    assert_eq!(annulus_mass(&[&z], 6.0, Metric::Euclidean, None).unwrap(), 0.0);
    assert!(annulus_mass(&[&u], 9.5, Metric::Euclidean, None).is_err());
    // boundary sites |j| = 4 and 7 are excluded
    let edge = LatticeField::delta(bx, &[4, 0, 0]).unwrap();
    assert_eq!(annulus_mass(&[&edge], 6.0, Metric::Euclidean, None).unwrap(), 0.0);
    // time integral of a constant snapshot
    let m = annulus_mass(&[&u, &u, &u], 6.0, Metric::Euclidean, Some(&[0.0, 0.5, 1.0])).unwrap();
    assert!((m - 1.0).abs() < 1e-15);
    let lu = LogField::from_linear(&u);
    let lm = annulus_mass_log(&[&lu], 6.0, Metric::Euclidean, None).unwrap();
    assert!((lm.to_f64() - 1.0).abs() < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn adjointness_and_self_adjointness(
        d in 1usize..=3,
        h in 0.05f64..2.0,
        fv in prop::collection::vec(-1.0f64..1.0, 1..40),
        gv in prop::collection::vec(-1.0f64..1.0, 1..40),
    ) {
        let bx = LatticeBox::new(d, h, 4).unwrap();
        let f = interior_field(bx, &fv, 1);
        let g = interior_field(bx, &gv, 1);
        for k in 0..d {
            let lhs = inner(&diff_ops(&f, k, DiffKind::Forward).unwrap(), &g);
            let rhs = -inner(&f, &diff_ops(&g, k, DiffKind::Backward).unwrap());
            let scale = l2_norm(&f) * l2_norm(&g) / h + 1e-300;
            prop_assert!((lhs - rhs).abs() <= 1e-12 * scale);
        }
        let a = inner(&discrete_laplacian(&f), &g);
        let b = inner(&f, &discrete_laplacian(&g));
        let scale = l2_norm(&f) * l2_norm(&g) / (h * h) + 1e-300;
        prop_assert!((a - b).abs() <= 1e-12 * scale);
        let res = summation_by_parts_check(&f, &g).unwrap();
        let raw = (l2_norm(&f) * l2_norm(&g) / bx.cell()) / h;
        prop_assert!(res <= 1e-12 * (raw + 1e-300));
    }

    #[test]
    fn laplacian_is_negative(
        d in 1usize..=3,
        h in 0.05f64..2.0,
        fv in prop::collection::vec(-1.0f64..1.0, 1..40),
    ) {
        let bx = LatticeBox::new(d, h, 4).unwrap();
        let f = interior_field(bx, &fv, 1);
        let q = inner(&discrete_laplacian(&f), &f);
        let grad: f64 = (0..d)
            .map(|k| l2_norm_sq(&diff_ops(&f, k, DiffKind::Forward).unwrap()))
            .sum();
        prop_assert!(q <= 0.0);
        prop_assert!((q + grad).abs() <= 1e-12 * grad.max(1e-300));
    }

    #[test]
    fn zero_extension_is_consistent(
        d in 1usize..=2,
        h in 0.2f64..1.0,
        fv in prop::collection::vec(-1.0f64..1.0, 1..30),
        r in 2.0f64..3.0,
    ) {
        let bx = LatticeBox::new(d, h, 5).unwrap();
        let big = bx.enlarged(8).unwrap();
        let f = interior_field(bx, &fv, 1);
        let fb = f.embed(big).unwrap();
        prop_assert!((l2_norm(&f) - l2_norm(&fb)).abs() <= 1e-14 * l2_norm(&f).max(1e-300));
        prop_assert_eq!(sup_norm(&f), sup_norm(&fb));
        let lap = discrete_laplacian(&f).embed(big).unwrap();
        let lapb = discrete_laplacian(&fb);
        for i in 0..big.sites() {
            prop_assert_eq!(lap.values()[i], lapb.values()[i]);
        }
        let r = r * h;
        if r + 1.0 < bx.extent() as f64 * h {
            let a = annulus_mass(&[&f], r, Metric::Euclidean, None).unwrap();
            let b = annulus_mass(&[&fb], r, Metric::Euclidean, None).unwrap();
            prop_assert!((a - b).abs() <= 1e-14 * a.max(1e-300));
        }
    }

    #[test]
    fn norms_are_homogeneous(
        a in -5.0f64..5.0,
        fv in prop::collection::vec(-1.0f64..1.0, 1..30),
    ) {
        let bx = LatticeBox::new(2, 0.5, 4).unwrap();
        let f = interior_field(bx, &fv, 0);
        let g = f.scaled(a);
        prop_assert!((l2_norm(&g) - a.abs() * l2_norm(&f)).abs() <= 1e-13 * (1.0 + l2_norm(&g)));
        prop_assert!((sup_norm(&g) - a.abs() * sup_norm(&f)).abs() <= 1e-15 * (1.0 + sup_norm(&g)));
    }
}
