//! One function per subcommand: run the audits and collect a [`Report`].

use crate::config::*;
use crate::report::{num, opt, Report, Table};
use anyhow::Result;
use landis_core::besselkit::audit_appendix_b;
use landis_core::carleman::{
    audit_carleman_inequality, commutator_pieces, landis_gap, lower_bound_audit,
    upper_bound_ctc, upper_bound_discrete, Regime, SyntheticField, REFINEMENT_TOL,
};
use landis_core::convexity::{
    audit_logconvexity, commutator_form, lambda_delta, lambda_lower_bound, weighted_energy_log,
    WeightSpec,
};
use landis_core::elliptic_uc::{
    alpha_select_elliptic, audit_carleman_elliptic, bounded_threshold, geometric_shells,
    j_testbed, jota_fit, residual_ratio, shell_extract, uc_flag_scan, uc_recursion_audit,
    uc_threshold,
};
use landis_core::heat_sim::{
    audit_caccioppoli, audit_energy, example_solution, free_kernel_log, free_kernel_solution,
    gaussian_limit, solve, uniform_grid, HeatProblem, Method, RandomPotential,
};
use landis_core::lattice::{l2_norm, LatticeBox, LatticeField, LogField};
use landis_core::rng::uniform_field;
use landis_core::LabError;
use std::sync::Arc;

const ORIGIN: [i64; 3] = [0, 0, 0];

fn flag(b: bool) -> String {
    b.to_string()
}

fn worst<'a>(vals: impl Iterator<Item = &'a f64>, lowest: bool) -> f64 {
    if lowest {
        vals.copied().fold(f64::INFINITY, f64::min)
    } else {
        vals.copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

pub fn bessel_audit(cfg: &BesselConfig) -> Result<Report> {
    let mut rep = Report::new("bessel-audit", cfg.seed, cfg);
    let orders: Vec<i64> = (cfg.order_min..=cfg.order_max).collect();
    let audit = audit_appendix_b(&orders, &cfg.xs, &cfg.policy)?;
    let mut t = Table::new(
        "inequalities",
        &["name", "strict", "evaluated", "min_margin", "argmin_order", "argmin_x", "unresolved", "passed"],
    );
    for m in &audit.inequalities {
        t.push(vec![
            m.name.clone(),
            flag(m.strict),
            m.evaluated.to_string(),
            num(m.min_margin),
            m.argmin_order.to_string(),
            num(m.argmin_x),
            m.unresolved.to_string(),
            flag(m.passed),
        ]);
        rep.check(
            &format!("inequality:{}", m.name),
            m.passed,
            format!("min margin {:e} at n = {}, x = {}", m.min_margin, m.argmin_order, m.argmin_x),
        );
    }
    let w = &audit.wronskian;
    rep.check(
        "wronskian",
        w.passed,
        format!("max relative error {:e} at n = {}, x = {}", w.max_rel_error, w.argmax_order, w.argmax_x),
    );
    rep.result("wronskian", w);
    rep.table(t);
    Ok(rep)
}

fn kernel_checks(k: &KernelCheck, rep: &mut Report) -> Result<()> {
    let mut t = Table::new(
        "kernel",
        &[
            "d",
            "h",
            "closed_form_mass_error",
            "rk4_mass_error",
            "rk4_rel_l2",
            "exp_mass_error",
            "exp_pointwise_rel",
            "exp_sites_compared",
        ],
    );
    let floor = -280.0 * std::f64::consts::LN_10;
    let (mut mass, mut norm, mut point) = (0.0f64, 0.0f64, 0.0f64);
    for &d in &k.dims {
        for &h in &k.hs {
            let bx = LatticeBox::new(d, h, k.extent)?;
            let mut closed = 0.0f64;
            for &time in &k.times {
                let u = free_kernel_solution(bx, time, &ORIGIN)?;
                closed = closed.max((u.values().iter().sum::<f64>() - 1.0).abs());
            }
            let p = HeatProblem::free(LatticeField::delta(bx, &ORIGIN)?)?;
            let mass_err = |snaps: &[LatticeField]| {
                snaps
                    .iter()
                    .map(|s| (s.values().iter().sum::<f64>() - 1.0).abs())
                    .fold(0.0, f64::max)
            };
            let rk = solve(&p, Method::Rk4, 1.0)?;
            let exact = free_kernel_solution(bx, 1.0, &ORIGIN)?;
            let last = rk.snapshots.last().expect("nonempty grid");
            let rel = l2_norm(&last.axpby(1.0, &exact, -1.0)) / l2_norm(&exact);
            let ex = solve(&p, Method::Exponential, 1.0)?;
            let exact_log: LogField = free_kernel_log(bx, 1.0, &ORIGIN)?;
            let got = ex.snapshots.last().expect("nonempty grid");
            let reach = (k.extent - k.interior_margin) as i64;
            let (mut pw, mut compared) = (0.0f64, 0usize);
            for i in 0..bx.sites() {
                let e = exact_log.values()[i];
                let j = bx.coords(i);
                if (0..d).all(|a| j[a].abs() <= reach) && e.logmag() > floor {
                    pw = pw.max((got.values()[i] / e.to_f64() - 1.0).abs());
                    compared += 1;
                }
            }
            let rk_mass = mass_err(&rk.snapshots);
            let ex_mass = mass_err(&ex.snapshots);
            mass = mass.max(closed).max(rk_mass).max(ex_mass);
            norm = norm.max(rel);
            point = point.max(pw);
            t.push(vec![
                d.to_string(),
                num(h),
                num(closed),
                num(rk_mass),
                num(rel),
                num(ex_mass),
                num(pw),
                compared.to_string(),
            ]);
        }
    }
    rep.check("kernel_mass", mass < 1e-10, format!("max |sum u - 1| = {mass:e}"));
    rep.check("kernel_rk4_normwise", norm < 1e-8, format!("max relative l2 error {norm:e}"));
    rep.check(
        "kernel_exponential_pointwise",
        point < 1e-8,
        format!("max pointwise relative error {point:e}"),
    );
    rep.table(t);
    Ok(())
}

pub fn heat_run(cfg: &HeatConfig) -> Result<Report> {
    let mut rep = Report::new("heat-run", cfg.seed, cfg);
    if cfg.kernel.enabled {
        kernel_checks(&cfg.kernel, &mut rep)?;
    }
    if cfg.problems > 0 {
        let bx = LatticeBox::new(cfg.d, cfg.h, cfg.extent)?;
        let mut energy = Table::new(
            "energy",
            &["problem", "potential_seed", "field_seed", "min_slack", "argmin_t", "in_solver_quadrature", "norm_decreasing", "passed"],
        );
        let mut cacc = Table::new(
            "caccioppoli",
            &["problem", "r", "gradient", "bulk", "initial", "fitted_c2", "certified_c2", "certified_slack", "passed"],
        );
        let (mut e_ok, mut c_ok) = (true, true);
        let mut slack = f64::INFINITY;
        for i in 0..cfg.problems as u64 {
            let ps = cfg.seed.wrapping_add(2 * i);
            let fs = ps.wrapping_add(1);
            let pot = Arc::new(RandomPotential::new(bx, cfg.amp, ps, cfg.time_dependent));
            let psi = uniform_field(bx, fs, 1.0, 1);
            let p = HeatProblem::new(pot, psi, uniform_grid(cfg.samples))?;
            let traj = solve(&p, cfg.method, cfg.dt_max)?;
            let e = audit_energy(&traj)?;
            let c = audit_caccioppoli(&traj, cfg.caccioppoli_r)?;
            e_ok &= e.passed;
            c_ok &= c.passed;
            slack = slack.min(e.min_slack);
            energy.push(vec![
                i.to_string(),
                ps.to_string(),
                fs.to_string(),
                num(e.min_slack),
                num(e.argmin_t),
                flag(e.in_solver_quadrature),
                flag(e.norm_decreasing),
                flag(e.passed),
            ]);
            cacc.push(vec![
                i.to_string(),
                num(c.r),
                num(c.gradient),
                num(c.bulk),
                num(c.initial),
                num(c.fitted_c2),
                opt(c.certified_c2),
                opt(c.certified_slack),
                flag(c.passed),
            ]);
        }
        rep.check("energy", e_ok, format!("min relative slack {slack:e}"));
        rep.check("caccioppoli", c_ok, format!("{} problems", cfg.problems));
        rep.table(energy);
        rep.table(cacc);
    }
    Ok(rep)
}

pub fn convexity_audit(cfg: &ConvexityConfig) -> Result<Report> {
    let mut rep = Report::new("convexity-audit", cfg.seed, cfg);
    let combos: Vec<(f64, f64)> = cfg
        .gammas
        .iter()
        .flat_map(|&g| cfg.hs.iter().map(move |&h| (g, h)))
        .collect();
    let mut t = Table::new(
        "commutator",
        &["field", "gamma", "h", "delta", "seed", "direct", "closed_form", "scale", "rel_direct", "gap", "floor"],
    );
    let (mut min_rel, mut max_gap, mut floor_ok) = (f64::INFINITY, 0.0f64, true);
    for k in 0..cfg.fields {
        let (gamma, h) = combos[k % combos.len()];
        let bx = LatticeBox::new(1, h, cfg.extent)?;
        let seed = cfg.seed.wrapping_add(k as u64);
        let f = uniform_field(bx, seed, 1.0, 2);
        let spec = if cfg.delta == 1.0 {
            WeightSpec::close_to_continuum(gamma, h)
        } else {
            WeightSpec::delta(gamma, cfg.delta, h)
        };
        let c = commutator_form(&f, &spec)?;
        let rel = if c.scale > 0.0 { c.direct / c.scale } else { c.direct };
        let x = gamma / (h * h);
        let floor = -4.0 / h.powi(4) * (1.0 + 1.0 / x + 0.25 / x.powi(3)) * l2_norm(&f).powi(2);
        floor_ok &= c.direct >= floor - 1e-10 * c.scale;
        min_rel = min_rel.min(rel);
        max_gap = max_gap.max(c.gap());
        t.push(vec![
            k.to_string(),
            num(gamma),
            num(h),
            num(cfg.delta),
            seed.to_string(),
            num(c.direct),
            num(c.closed_form),
            num(c.scale),
            num(rel),
            num(c.gap()),
            num(floor),
        ]);
    }
    if cfg.fields > 0 {
        if cfg.delta == 1.0 {
            rep.check(
                "commutator_positive",
                min_rel >= -1e-10,
                format!("min <[S,A]f,f>/scale = {min_rel:e} over {} fields", cfg.fields),
            );
        } else {
            rep.check("commutator_floor", floor_ok, format!("{} fields", cfg.fields));
        }
        rep.check("commutator_closed_form", max_gap <= 1e-8, format!("max gap {max_gap:e}"));
    }
    rep.table(t);

    let l = &cfg.lambda;
    let mut lt = Table::new("lambda", &["j", "x", "delta", "lambda", "lower_bound", "margin"]);
    let mut min_margin = f64::INFINITY;
    for j in l.j_min..=l.j_max {
        for &x in &l.xs {
            for &delta in &l.deltas {
                let v = lambda_delta(j, x, delta)?;
                let b = lambda_lower_bound(x);
                min_margin = min_margin.min(v - b);
                lt.push(vec![j.to_string(), num(x), num(delta), num(v), num(b), num(v - b)]);
            }
        }
    }
    rep.check(
        "lambda_lower_bound",
        min_margin >= 0.0,
        format!("min margin {min_margin:e} over {} points", lt.rows.len()),
    );
    rep.table(lt);

    let c = &cfg.logconvexity;
    if !c.hs.is_empty() {
        let mut ct = Table::new("logconvexity", &["h", "n_hat", "argmax_t", "log_h0", "log_h1", "convex"]);
        let mut et = Table::new("energy", &["h", "t", "log_energy"]);
        let mut all = true;
        let mut n_max = 0.0f64;
        for &h in &c.hs {
            let bx = LatticeBox::new(1, h, (c.radius / h).round() as usize)?;
            let ts = uniform_grid(c.samples);
            let snaps: Vec<LogField> = ts.iter().map(|&t| example_solution(bx, t)).collect::<Result<_, _>>()?;
            let e = weighted_energy_log(&ts, &snaps, &WeightSpec::close_to_continuum(c.gamma, h))?;
            let finite = e.values.iter().all(|v| v.sign() == 1 && v.logmag().is_finite());
            let r = audit_logconvexity(&e, 0.0)?;
            all &= finite && r.convex;
            n_max = n_max.max(r.n_hat);
            for (t, v) in e.times.iter().zip(&e.values) {
                et.push(vec![num(h), num(*t), num(v.logmag())]);
            }
            ct.push(vec![
                num(h),
                num(r.n_hat),
                num(r.argmax_t),
                num(e.values[0].logmag()),
                num(e.values.last().expect("samples").logmag()),
                flag(r.convex),
            ]);
        }
        rep.check("logconvexity", all, format!("max fitted N = {n_max:e}"));
        rep.table(ct);
        rep.table(et);
    }
    Ok(rep)
}

pub fn carleman_audit(cfg: &CarlemanAuditConfig) -> Result<Report> {
    let mut rep = Report::new("carleman-audit", cfg.seed, cfg);
    match cfg.mode {
        CarlemanMode::Parabolic => {
            if cfg.parabolic.samples > 0 {
                parabolic_constant(cfg, &mut rep)?;
            }
            if cfg.pieces.fields > 0 {
                parabolic_pieces(cfg, &mut rep)?;
            }
        }
        CarlemanMode::Elliptic => elliptic(cfg, &mut rep)?,
    }
    Ok(rep)
}

fn parabolic_constant(cfg: &CarlemanAuditConfig, rep: &mut Report) -> Result<()> {
    let c = cfg.parabolic_config()?;
    let p = &cfg.parabolic;
    let audit = audit_carleman_inequality(&c, p.samples, cfg.seed, p.intervals)?;
    let mut t = Table::new("carleman_ratios", &["sample", "lhs_over_rhs"]);
    for (i, r) in audit.ratios.iter().enumerate() {
        t.push(vec![i.to_string(), num(*r)]);
    }
    rep.check("carleman_conditions", audit.conditions.passed, format!("clause {:?}", audit.conditions.clause));
    rep.check(
        "carleman_constant_stable",
        audit.stable && audit.c_hat > 0.0,
        format!("C = {:e} on {} intervals, {:e} refined", audit.c_hat, p.intervals, audit.c_hat_refined),
    );
    rep.result("parabolic", audit.conditions);
    rep.result("c_hat", audit.c_hat);
    rep.result("c_hat_refined", audit.c_hat_refined);
    rep.table(t);
    Ok(())
}

fn parabolic_pieces(cfg: &CarlemanAuditConfig, rep: &mut Report) -> Result<()> {
    let c = cfg.pieces_config()?;
    let p = &cfg.pieces;
    let mut t = Table::new(
        "pieces",
        &[
            "field", "seed", "intervals", "i", "ii", "iii", "iv", "total", "direct", "ratio_iii_ii", "direct_gap",
            "refinement_change",
        ],
    );
    let (mut gap, mut rel2, mut change) = (0.0f64, 0.0f64, 0.0f64);
    for k in 0..p.fields as u64 {
        let seed = cfg.seed.wrapping_add(k);
        let f = SyntheticField::random(&c, seed, (p.window[0], p.window[1]))?;
        let coarse = commutator_pieces(&c, &f.sample(p.intervals)?)?;
        let fine = commutator_pieces(&c, &f.sample(2 * p.intervals)?)?;
        let s = fine.scale().max(f64::MIN_POSITIVE);
        let moved = [
            (coarse.i, fine.i),
            (coarse.ii, fine.ii),
            (coarse.iii, fine.iii),
            (coarse.iv, fine.iv),
            (coarse.total, fine.total),
            (coarse.direct, fine.direct),
        ]
        .iter()
        .map(|(a, b)| (a - b).abs() / s)
        .fold(0.0, f64::max);
        let dev = (fine.iii - 2.0 * fine.ii).abs();
        let rel = if fine.ii != 0.0 { dev / (2.0 * fine.ii.abs()) } else { dev };
        gap = gap.max(fine.direct_gap());
        rel2 = rel2.max(rel);
        change = change.max(moved);
        t.push(vec![
            k.to_string(),
            seed.to_string(),
            fine.intervals.to_string(),
            num(fine.i),
            num(fine.ii),
            num(fine.iii),
            num(fine.iv),
            num(fine.total),
            num(fine.direct),
            num(fine.ratio_iii_ii()),
            num(fine.direct_gap()),
            num(moved),
        ]);
    }
    rep.check(
        "pieces_direct_agreement",
        gap <= 1e-6,
        format!("max |direct - sum of pieces| / scale = {gap:e}"),
    );
    rep.check("pieces_iii_twice_ii", rel2 <= 1e-8, format!("max |III - 2 II| / |2 II| = {rel2:e}"));
    rep.check(
        "pieces_refinement",
        change <= REFINEMENT_TOL,
        format!("max change under refinement {change:e}"),
    );
    rep.table(t);
    Ok(())
}

fn elliptic(cfg: &CarlemanAuditConfig, rep: &mut Report) -> Result<()> {
    let c = cfg.elliptic_config()?;
    let e = &cfg.elliptic;
    if e.alpha.is_none() {
        rep.result("alpha_choice", alpha_select_elliptic(e.r, e.h, e.d, e.alpha_mode)?);
    }
    let audit = audit_carleman_elliptic(&c, e.samples, cfg.seed)?;
    let mut t = Table::new("elliptic_ratios", &["sample", "lhs_over_rhs"]);
    for (i, r) in audit.ratios.iter().enumerate() {
        t.push(vec![i.to_string(), num(*r)]);
    }
    rep.check(
        "elliptic_commutator_nonnegative",
        audit.commutator_ok,
        format!("min commutator / scale = {:e}", audit.min_commutator),
    );
    rep.check(
        "elliptic_constant_finite",
        audit.c_hat.is_finite() && audit.c_hat > 0.0,
        format!("C = {:e}", audit.c_hat),
    );
    rep.result("alpha", audit.alpha);
    rep.result("c_hat", audit.c_hat);
    rep.table(t);
    Ok(())
}

pub fn bounds_sweep(cfg: &BoundsConfig) -> Result<Report> {
    let mut rep = Report::new("bounds-sweep", cfg.seed, cfg);
    let u = &cfg.upper;
    if u.enabled {
        let mut t = Table::new(
            "upper",
            &["gamma", "r", "h", "d", "predicted_log", "log_ratio_point", "normalized", "log_sup_annulus", "below_m", "passed"],
        );
        let mut ok = true;
        let mut norm = Vec::new();
        for &r in &u.r {
            let b = upper_bound_ctc(u.gamma, r, u.h, cfg.d, u.m)?;
            ok &= b.passed;
            norm.push(b.normalized);
            t.push(vec![
                num(b.gamma),
                num(b.r),
                num(b.h),
                b.d.to_string(),
                num(b.predicted_log),
                num(b.log_ratio_point),
                num(b.normalized),
                num(b.log_sup_annulus),
                flag(b.below_m),
                flag(b.passed),
            ]);
        }
        rep.check(
            "upper_ratio",
            ok,
            format!(
                "log ratio * gamma / R^2 in [{}, {}], target [-1.1d, -0.9d]",
                worst(norm.iter(), true),
                worst(norm.iter(), false)
            ),
        );
        rep.table(t);
    }
    let u = &cfg.upper_discrete;
    if u.enabled {
        let mut t = Table::new(
            "upper_discrete",
            &["mu", "r", "h", "predicted_log", "log_ratio_direct", "log_ratio_asymptotic", "rel_gap", "passed"],
        );
        let mut ok = true;
        let mut gaps = Vec::new();
        for &r in &u.r {
            let b = upper_bound_discrete(u.mu, r, u.h, cfg.d)?;
            ok &= b.passed;
            gaps.push(b.rel_gap);
            t.push(vec![
                num(b.mu),
                num(b.r),
                num(b.h),
                num(b.predicted_log),
                num(b.log_ratio_direct),
                num(b.log_ratio_asymptotic),
                num(b.rel_gap),
                flag(b.passed),
            ]);
        }
        rep.check(
            "upper_discrete_asymptotics",
            ok,
            format!("max relative gap {}", worst(gaps.iter(), false)),
        );
        rep.table(t);
    }
    if !cfg.lower.is_empty() {
        let mut mt = Table::new("masses", &["h", "r", "rh", "regime", "log_mass"]);
        let mut ft = Table::new(
            "fits",
            &["h", "regime", "exponent", "r2_profile", "c_lower", "r2_quadratic", "slope", "linear", "r2"],
        );
        let mut slopes = Vec::new();
        let mut c_lower = None;
        for b in &cfg.lower {
            let r = lower_bound_audit(&b.r, b.h, cfg.d)?;
            for p in &r.points {
                let regime = match p.regime {
                    Regime::CloseToContinuum => "close_to_continuum",
                    Regime::PurelyDiscrete => "purely_discrete",
                };
                mt.push(vec![num(p.h), num(p.r), num(p.rh), regime.into(), num(p.log_mass)]);
            }
            if let Some(c) = r.continuum {
                let ok = c.r2_profile >= 0.99 && (1.9..=2.1).contains(&c.exponent);
                rep.check(
                    &format!("lower_continuum_h={}", b.h),
                    ok,
                    format!("exponent {} with R^2 {}", c.exponent, c.r2_profile),
                );
                c_lower.get_or_insert(c.c_lower);
                ft.push(vec![
                    num(b.h),
                    "close_to_continuum".into(),
                    num(c.exponent),
                    num(c.r2_profile),
                    num(c.c_lower),
                    num(c.r2_quadratic),
                    String::new(),
                    String::new(),
                    String::new(),
                ]);
            }
            if let Some(f) = r.discrete {
                rep.check(
                    &format!("lower_discrete_h={}", b.h),
                    f.r2 >= 0.99,
                    format!("slope {} with R^2 {}", f.slope, f.r2),
                );
                slopes.push(f.slope);
                ft.push(vec![
                    num(b.h),
                    "purely_discrete".into(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    num(f.slope),
                    num(f.linear),
                    num(f.r2),
                ]);
            }
        }
        if slopes.len() >= 2 {
            let lo = worst(slopes.iter(), true);
            let hi = worst(slopes.iter(), false);
            let spread = (hi - lo) / lo.abs().min(hi.abs());
            rep.check(
                "lower_discrete_slope_stable",
                spread <= cfg.slope_stability,
                format!("relative spread {spread} of slopes {slopes:?}"),
            );
        }
        if let (true, Some(c)) = (cfg.gap.enabled, c_lower) {
            let g = &cfg.gap;
            match landis_gap(g.gamma, c, cfg.d, g.log_offset) {
                Ok(gap) => rep.result("gap", gap),
                Err(LabError::Precondition(m)) => rep.result("gap", format!("not computed: {m}")),
                Err(e) => return Err(e.into()),
            }
        }
        rep.table(mt);
        rep.table(ft);
    }
    Ok(rep)
}

pub fn uc_check(cfg: &UcConfig) -> Result<Report> {
    let mut rep = Report::new("uc-check", cfg.seed, cfg);
    let (shells, recursion) = match cfg.source {
        ShellSource::JTestbed => {
            let j = &cfg.j_testbed;
            let p = j_testbed(j.t0, j.nmax)?;
            let res = residual_ratio(&p);
            rep.check("residual", res <= cfg.residual_tol, format!("residual ratio {res:e}"));
            let s = shell_extract(&p);
            let rec = match uc_recursion_audit(&s) {
                Ok(r) => {
                    rep.check("recursion", r.passed, format!("worst margin {}", r.worst_margin));
                    Some(r)
                }
                Err(LabError::Residual(m)) => {
                    rep.check("recursion", false, m);
                    None
                }
                Err(e) => return Err(e.into()),
            };
            let n = s.len() - 1;
            let product = uc_threshold(&s, n)?;
            let bounded = bounded_threshold(s.m_at(1), n, s.d, s.h, p.v_bound());
            rep.result(
                "thresholds",
                serde_json::json!({
                    "n": n,
                    "window_v_sup": p.v_bound(),
                    "log_product": product.logmag(),
                    "log_bounded": bounded.logmag(),
                }),
            );
            let b = &cfg.jota;
            if b.enabled {
                let f = jota_fit(j.t0, b.n_lo, b.n_hi)?;
                rep.check(
                    "jota_slope",
                    f.slope_rel_err <= b.tol,
                    format!("slope {} against -1, R^2 {}", f.slope, f.r2),
                );
                rep.result("jota", f);
            }
            (s, rec)
        }
        ShellSource::Geometric => {
            let g = &cfg.geometric;
            (geometric_shells(g.d, g.h, g.rate, g.power, g.count)?, None)
        }
    };
    let scan = uc_flag_scan(&shells)?;
    let mut t = Table::new(
        "shells",
        &["n", "log_m_n", "q_n", "factor", "margin", "log_threshold", "log_m_next", "forces_zero"],
    );
    for (k, row) in scan.rows.iter().enumerate() {
        let n = row.n;
        let margin = recursion.as_ref().map(|r| r.rows[k].margin);
        t.push(vec![
            n.to_string(),
            num(shells.m_at(n).logmag()),
            num(shells.q_at(n)),
            num(shells.factor(n)),
            opt(margin),
            num(row.log_threshold),
            num(row.log_m_next),
            flag(row.forces_zero),
        ]);
    }
    let verdict = match scan.n0 {
        Some(_) => "decay forces u = 0",
        None => "no forced vanishing",
    };
    match cfg.expectation() {
        FlagExpectation::ForcesZero => rep.check(
            "flagged_eventually",
            scan.n0.is_some(),
            format!("N0 = {:?}", scan.n0),
        ),
        FlagExpectation::NeverFlagged => rep.check(
            "never_flagged",
            scan.never_flagged,
            format!("{} of {} shells flagged", scan.rows.iter().filter(|r| r.forces_zero).count(), scan.rows.len()),
        ),
    }
    rep.result("n0", scan.n0);
    rep.result("verdict", verdict);
    rep.table(t);
    Ok(rep)
}

pub fn gaussian(cfg: &GaussianConfig) -> Result<Report> {
    let mut rep = Report::new("gaussian-limit", cfg.seed, cfg);
    let tab = gaussian_limit(cfg.x, cfg.t, &cfg.h)?;
    let mut t = Table::new("gaussian", &["h", "order", "discrete", "delta"]);
    for r in &tab.rows {
        t.push(vec![num(r.h), r.order.to_string(), num(r.discrete), num(r.delta)]);
    }
    rep.check(
        "gaussian_convergence",
        tab.passed,
        format!(
            "limit {}, last delta {:e}, strictly decreasing {}",
            tab.limit,
            tab.rows.last().map_or(f64::NAN, |r| r.delta),
            tab.strictly_decreasing
        ),
    );
    rep.result("limit", tab.limit);
    rep.table(t);
    Ok(rep)
}
