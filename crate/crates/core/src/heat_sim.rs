//! Semidiscrete heat equation `u' = Delta u + V u` on a truncated box.
//!
//! Two integrators are provided. `Rk4` is classical fourth-order
//! Runge-Kutta with the step capped at `0.1 h^2 / (2d + ||V|| h^2)`.
//! `Exponential` (time-independent `V` only) applies `exp(tau L)` through
//! its Taylor series after the shift `L + cI`, which makes every matrix
//! entry nonnegative, so nonnegative data never suffers cancellation.
//!
//! The RK4 path also integrates the dissipation `int sum_k |D_{-,k} u|^2`
//! alongside the solution, which the energy audit uses in place of a coarse
//! trapezoid rule that cannot resolve the stiff initial transient.

use crate::besselkit::log_bessel_i_ladder;
use crate::error::{precondition, LabError, Result};
use crate::lattice::{
    annulus_norm_sq, l2_norm_sq, trapezoid, Annulus, LatticeBox, LatticeField, LogField, Metric,
    Site, PAR_THRESHOLD,
};
use crate::logscalar::LogScalar;
use crate::rng::seeded;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

/// Default number of uniform samples on `[0, 1]`.
pub const DEFAULT_SAMPLES: usize = 129;

/// Bounded potential `V(j, t)`.
pub trait Potential: Send + Sync + std::fmt::Debug {
    fn value(&self, site: &Site, t: f64) -> f64;
    /// Declared `||V||_inf`.
    fn sup_bound(&self) -> f64;
    fn is_static(&self) -> bool;

    /// Fills `out[i] = V(site_i, t)` for every site of `bx`.
    fn fill(&self, bx: &LatticeBox, t: f64, out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.value(&bx.coords(i), t);
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroPotential;

impl Potential for ZeroPotential {
    fn value(&self, _: &Site, _: f64) -> f64 {
        0.0
    }
    fn sup_bound(&self) -> f64 {
        0.0
    }
    fn is_static(&self) -> bool {
        true
    }
    fn fill(&self, _: &LatticeBox, _: f64, out: &mut [f64]) {
        out.fill(0.0);
    }
}

/// Time-independent potential given by a field on the box.
#[derive(Debug, Clone)]
pub struct StaticPotential {
    field: LatticeField,
    bound: f64,
}

impl StaticPotential {
    pub fn new(field: LatticeField, bound: f64) -> Self {
        StaticPotential { field, bound }
    }
}

impl Potential for StaticPotential {
    fn value(&self, site: &Site, _: f64) -> f64 {
        self.field.get(site)
    }
    fn sup_bound(&self) -> f64 {
        self.bound
    }
    fn is_static(&self) -> bool {
        true
    }
}

/// Seeded random potential `amp (a_j + b_j sin(2 pi t)) / 2` with
/// `a_j, b_j` uniform in `[-1, 1]`, so `|V| <= amp`.
#[derive(Debug, Clone)]
pub struct RandomPotential {
    bx: LatticeBox,
    amp: f64,
    a: Vec<f64>,
    b: Vec<f64>,
    time_dependent: bool,
}

impl RandomPotential {
    pub fn new(bx: LatticeBox, amp: f64, seed: u64, time_dependent: bool) -> Self {
        let mut rng = seeded(seed);
        let a = (0..bx.sites()).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let b = (0..bx.sites())
            .map(|_| if time_dependent { rng.gen_range(-1.0..=1.0) } else { 0.0 })
            .collect();
        RandomPotential {
            bx,
            amp,
            a,
            b,
            time_dependent,
        }
    }
}

impl Potential for RandomPotential {
    fn value(&self, site: &Site, t: f64) -> f64 {
        self.bx.index_of(site).map_or(0.0, |i| {
            0.5 * self.amp * (self.a[i] + self.b[i] * (2.0 * PI * t).sin())
        })
    }
    fn sup_bound(&self) -> f64 {
        self.amp
    }
    fn is_static(&self) -> bool {
        !self.time_dependent
    }
    fn fill(&self, bx: &LatticeBox, t: f64, out: &mut [f64]) {
        if *bx == self.bx {
            let s = (2.0 * PI * t).sin();
            for (i, o) in out.iter_mut().enumerate() {
                *o = 0.5 * self.amp * (self.a[i] + self.b[i] * s);
            }
        } else {
            for (i, o) in out.iter_mut().enumerate() {
                *o = self.value(&bx.coords(i), t);
            }
        }
    }
}

/// Potential given by a closure.
pub struct FnPotential<F: Fn(&Site, f64) -> f64 + Send + Sync> {
    pub f: F,
    pub bound: f64,
    pub is_static: bool,
}

impl<F: Fn(&Site, f64) -> f64 + Send + Sync> std::fmt::Debug for FnPotential<F> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "FnPotential(bound={})", self.bound)
    }
}

impl<F: Fn(&Site, f64) -> f64 + Send + Sync> Potential for FnPotential<F> {
    fn value(&self, site: &Site, t: f64) -> f64 {
        (self.f)(site, t)
    }
    fn sup_bound(&self) -> f64 {
        self.bound
    }
    fn is_static(&self) -> bool {
        self.is_static
    }
}

/// `n` uniform samples of `[0, 1]`.
pub fn uniform_grid(n: usize) -> Vec<f64> {
    let last = (n - 1) as f64;
    (0..n).map(|i| i as f64 / last).collect()
}

/// Initial value problem on `[0, 1]`.
#[derive(Debug, Clone)]
pub struct HeatProblem {
    bx: LatticeBox,
    potential: Arc<dyn Potential>,
    initial: LatticeField,
    t_grid: Vec<f64>,
}

impl HeatProblem {
    pub fn new(
        potential: Arc<dyn Potential>,
        initial: LatticeField,
        t_grid: Vec<f64>,
    ) -> Result<Self> {
        let bx = *initial.bx();
        if t_grid.len() < 2 || t_grid[0] != 0.0 || *t_grid.last().unwrap() != 1.0 {
            return Err(precondition("t_grid must start at 0 and end at 1"));
        }
        if t_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(precondition("t_grid must increase strictly"));
        }
        let bound = potential.sup_bound();
        if !(bound >= 0.0 && bound.is_finite()) {
            return Err(precondition("declared ||V|| must be finite and nonnegative"));
        }
        let mut buf = vec![0.0; bx.sites()];
        for &t in &t_grid {
            potential.fill(&bx, t, &mut buf);
            let actual = buf.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            if actual > bound * (1.0 + 1e-12) {
                return Err(precondition(format!(
                    "declared ||V|| = {bound} below actual sup {actual} at t = {t}"
                )));
            }
        }
        Ok(HeatProblem {
            bx,
            potential,
            initial,
            t_grid,
        })
    }

    /// Problem with `V = 0` and the default time grid.
    pub fn free(initial: LatticeField) -> Result<Self> {
        Self::new(Arc::new(ZeroPotential), initial, uniform_grid(DEFAULT_SAMPLES))
    }

    pub fn bx(&self) -> &LatticeBox {
        &self.bx
    }

    pub fn potential(&self) -> &Arc<dyn Potential> {
        &self.potential
    }

    pub fn initial(&self) -> &LatticeField {
        &self.initial
    }

    pub fn t_grid(&self) -> &[f64] {
        &self.t_grid
    }

    pub fn v_sup(&self) -> f64 {
        self.potential.sup_bound()
    }

    pub fn with_initial(&self, initial: LatticeField) -> Result<Self> {
        Self::new(self.potential.clone(), initial, self.t_grid.clone())
    }
}

/// Time integrator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Rk4,
    Exponential,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IntegratorStats {
    pub method: Method,
    pub steps: usize,
    /// Largest step used.
    pub dt: f64,
    /// Largest relative step-doubling error estimate (RK4 only).
    pub max_step_error: f64,
}

/// Snapshots of a solution at every `t_grid` entry.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub problem: HeatProblem,
    pub snapshots: Vec<LatticeField>,
    /// Cumulative `h^d int_0^t sum_k sum_j |D_{-,k} u_j|^2`, when the
    /// integrator tracked it.
    pub dissipation: Option<Vec<f64>>,
    pub stats: IntegratorStats,
}

/// `h^d sum_k sum_j |D_{-,k} u_j|^2` over all of `Z^d` under zero extension.
pub fn dissipation_rate(u: &LatticeField) -> f64 {
    dissipation_raw(u.bx(), u.values())
}

fn dissipation_raw(bx: &LatticeBox, v: &[f64]) -> f64 {
    let h = bx.h();
    let mut acc = 0.0;
    for i in 0..bx.sites() {
        for k in 0..bx.d() {
            let up = bx.neighbor(i, k, true).map_or(0.0, |n| v[n]);
            let d = (up - v[i]) / h;
            acc += d * d;
            if bx.neighbor(i, k, false).is_none() {
                let d = v[i] / h;
                acc += d * d;
            }
        }
    }
    acc * bx.cell()
}

struct Operator<'a> {
    bx: LatticeBox,
    potential: &'a dyn Potential,
    vbuf: Vec<f64>,
}

impl Operator<'_> {
    /// `out = Delta u + V(t) u`.
    fn apply(&mut self, u: &[f64], t: f64, out: &mut [f64]) {
        self.potential.fill(&self.bx, t, &mut self.vbuf);
        laplacian_into(&self.bx, u, out);
        for ((o, &v), &ui) in out.iter_mut().zip(&self.vbuf).zip(u) {
            *o += v * ui;
        }
    }
}

fn laplacian_into(bx: &LatticeBox, u: &[f64], out: &mut [f64]) {
    let h2 = bx.h() * bx.h();
    let d = bx.d();
    let site = |i: usize| {
        let mut acc = -2.0 * d as f64 * u[i];
        for k in 0..d {
            acc += bx.neighbor(i, k, true).map_or(0.0, |n| u[n]);
            acc += bx.neighbor(i, k, false).map_or(0.0, |n| u[n]);
        }
        acc / h2
    };
    if out.len() >= PAR_THRESHOLD {
        out.par_iter_mut().enumerate().for_each(|(i, o)| *o = site(i));
    } else {
        for (i, o) in out.iter_mut().enumerate() {
            *o = site(i);
        }
    }
}

fn norm_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

struct Rk4Workspace {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4Workspace {
    fn new(n: usize) -> Self {
        Rk4Workspace {
            k1: vec![0.0; n],
            k2: vec![0.0; n],
            k3: vec![0.0; n],
            k4: vec![0.0; n],
            tmp: vec![0.0; n],
        }
    }
}

/// One RK4 step in place; returns the RK4 quadrature of the dissipation over the step.
fn rk4_step(op: &mut Operator, ws: &mut Rk4Workspace, u: &mut [f64], t: f64, dt: f64) -> f64 {
    let bx = op.bx;
    let g1 = dissipation_raw(&bx, u);
    op.apply(u, t, &mut ws.k1);
    stage(&mut ws.tmp, u, &ws.k1, 0.5 * dt);
    let g2 = dissipation_raw(&bx, &ws.tmp);
    op.apply(&ws.tmp, t + 0.5 * dt, &mut ws.k2);
    stage(&mut ws.tmp, u, &ws.k2, 0.5 * dt);
    let g3 = dissipation_raw(&bx, &ws.tmp);
    op.apply(&ws.tmp, t + 0.5 * dt, &mut ws.k3);
    stage(&mut ws.tmp, u, &ws.k3, dt);
    let g4 = dissipation_raw(&bx, &ws.tmp);
    op.apply(&ws.tmp, t + dt, &mut ws.k4);
    for (i, x) in u.iter_mut().enumerate() {
        *x += dt / 6.0 * (ws.k1[i] + 2.0 * ws.k2[i] + 2.0 * ws.k3[i] + ws.k4[i]);
    }
    dt / 6.0 * (g1 + 2.0 * g2 + 2.0 * g3 + g4)
}

fn stage(out: &mut [f64], u: &[f64], k: &[f64], c: f64) {
    for ((o, &x), &kk) in out.iter_mut().zip(u).zip(k) {
        *o = x + c * kk;
    }
}

/// RK4 step cap `0.1 h^2 / (2d + ||V|| h^2)`.
pub fn rk4_stable_dt(bx: &LatticeBox, v_sup: f64) -> f64 {
    let h2 = bx.h() * bx.h();
    0.1 * h2 / (2.0 * bx.d() as f64 + v_sup * h2)
}

/// Integrates the problem and records a snapshot at every `t_grid` entry.
pub fn solve(problem: &HeatProblem, method: Method, dt_max: f64) -> Result<Trajectory> {
    if !(dt_max > 0.0) {
        return Err(precondition("dt_max must be positive"));
    }
    match method {
        Method::Rk4 => solve_rk4(problem, dt_max),
        Method::Exponential => solve_exponential(problem, dt_max),
    }
}

fn growth_check(problem: &HeatProblem, u: &[f64], n0: f64, t: f64) -> Result<()> {
    let n = norm_sq(u);
    let bound = (2.0 * t * problem.v_sup()).exp() * n0;
    if !n.is_finite() || n > 1.01 * bound + f64::MIN_POSITIVE {
        return Err(LabError::Instability(format!(
            "||u(t)||^2 = {n:e} exceeds e^(2t||V||)||u0||^2 = {bound:e} at t = {t}"
        )));
    }
    Ok(())
}

fn solve_rk4(problem: &HeatProblem, dt_max: f64) -> Result<Trajectory> {
    let bx = problem.bx;
    let n = bx.sites();
    let dt_cap = dt_max.min(rk4_stable_dt(&bx, problem.v_sup()));
    let mut op = Operator {
        bx,
        potential: problem.potential.as_ref(),
        vbuf: vec![0.0; n],
    };
    let mut ws = Rk4Workspace::new(n);
    let mut u = problem.initial.values().to_vec();
    let n0 = norm_sq(&u);
    let mut snapshots = vec![problem.initial.clone()];
    let mut diss = vec![0.0];
    let mut cum = 0.0;
    let mut steps = 0;
    let mut dt_used: f64 = 0.0;
    let mut max_err: f64 = 0.0;
    for (interval, w) in problem.t_grid.windows(2).enumerate() {
        let span = w[1] - w[0];
        let m = (span / dt_cap).ceil().max(1.0) as usize;
        let dt = span / m as f64;
        dt_used = dt_used.max(dt);
        for s in 0..m {
            let t = w[0] + s as f64 * dt;
            if s == 0 && interval % 8 == 0 {
                // step doubling from the current state
                let mut big = u.clone();
                rk4_step(&mut op, &mut ws, &mut big, t, dt);
                let mut small = u.clone();
                rk4_step(&mut op, &mut ws, &mut small, t, 0.5 * dt);
                rk4_step(&mut op, &mut ws, &mut small, t + 0.5 * dt, 0.5 * dt);
                let diff: f64 = big.iter().zip(&small).map(|(a, b)| (a - b) * (a - b)).sum();
                let scale = norm_sq(&small);
                if scale > 0.0 {
                    max_err = max_err.max((diff / scale).sqrt());
                }
            }
            cum += rk4_step(&mut op, &mut ws, &mut u, t, dt);
            steps += 1;
        }
        growth_check(problem, &u, n0, w[1])?;
        snapshots.push(LatticeField::new(bx, u.clone())?);
        diss.push(cum);
    }
    Ok(Trajectory {
        problem: problem.clone(),
        snapshots,
        dissipation: Some(diss),
        stats: IntegratorStats {
            method: Method::Rk4,
            steps,
            dt: dt_used,
            max_step_error: max_err,
        },
    })
}

fn solve_exponential(problem: &HeatProblem, dt_max: f64) -> Result<Trajectory> {
    if !problem.potential.is_static() {
        return Err(precondition("exponential method needs a time-independent potential"));
    }
    let bx = problem.bx;
    let n = bx.sites();
    let offdiag = 2.0 * bx.d() as f64 / (bx.h() * bx.h());
    let mut vals = vec![0.0; n];
    problem.potential.fill(&bx, 0.0, &mut vals);
    let vmin = vals.iter().cloned().fold(0.0_f64, f64::min);
    // M = L + shift I has the nonnegative diagonal V - vmin
    let shift = offdiag - vmin;
    let vmax = vals.iter().cloned().fold(0.0_f64, f64::max);
    let row_bound = vmax - vmin + offdiag;
    let apply = |x: &[f64], out: &mut [f64]| {
        laplacian_into(&bx, x, out);
        for i in 0..n {
            out[i] += (vals[i] + shift) * x[i];
        }
    };
    let mut u = problem.initial.values().to_vec();
    let n0 = norm_sq(&u);
    let mut snapshots = vec![problem.initial.clone()];
    let mut steps = 0;
    let mut dt_used: f64 = 0.0;
    let mut term = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut sum = vec![0.0; n];
    for w in problem.t_grid.windows(2) {
        let span = w[1] - w[0];
        let m = ((span * row_bound / 4.0).ceil() as usize)
            .max((span / dt_max).ceil() as usize)
            .max(1);
        let tau = span / m as f64;
        dt_used = dt_used.max(tau);
        for _ in 0..m {
            term.copy_from_slice(&u);
            sum.copy_from_slice(&u);
            let mut k = 1.0;
            loop {
                apply(&term, &mut next);
                let mut done = true;
                for i in 0..n {
                    let t_i = next[i] * tau / k;
                    term[i] = t_i;
                    sum[i] += t_i;
                    if t_i.abs() > 1e-17 * sum[i].abs() + 1e-300 {
                        done = false;
                    }
                }
                k += 1.0;
                if done {
                    break;
                }
                if k > 4000.0 {
                    return Err(LabError::Instability("Taylor series did not converge".into()));
                }
            }
            let damp = (-shift * tau).exp();
            for (x, s) in u.iter_mut().zip(&sum) {
                *x = s * damp;
            }
            steps += 1;
        }
        growth_check(problem, &u, n0, w[1])?;
        snapshots.push(LatticeField::new(bx, u.clone())?);
    }
    Ok(Trajectory {
        problem: problem.clone(),
        snapshots,
        dissipation: None,
        stats: IntegratorStats {
            method: Method::Exponential,
            steps,
            dt: dt_used,
            max_step_error: 0.0,
        },
    })
}

/// `ln(e^{-x} I_n(x))` for `n = 0..=nmax`.
fn scaled_i_logs(nmax: usize, x: f64) -> Result<Vec<f64>> {
    if x == 0.0 {
        return Ok((0..=nmax)
            .map(|n| if n == 0 { 0.0 } else { f64::NEG_INFINITY })
            .collect());
    }
    Ok(log_bessel_i_ladder(nmax, x)?.iter().map(|v| v - x).collect())
}

/// Heat kernel started from a unit mass at `source`, in the log domain.
pub fn free_kernel_log(bx: LatticeBox, t: f64, source: &Site) -> Result<LogField> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(crate::error::domain("t must be finite and nonnegative"));
    }
    let h = bx.h();
    let d = bx.d();
    let x = 2.0 * t / (h * h);
    let reach = (0..d)
        .map(|k| bx.extent() as i64 + source[k].abs())
        .max()
        .unwrap_or(0) as usize;
    let logs = scaled_i_logs(reach, x)?;
    let values = (0..bx.sites())
        .map(|i| {
            let j = bx.coords(i);
            let l: f64 = (0..d).map(|k| logs[(j[k] - source[k]).unsigned_abs() as usize]).sum();
            if l == f64::NEG_INFINITY {
                LogScalar::ZERO
            } else {
                LogScalar::from_ln(l)
            }
        })
        .collect();
    LogField::new(bx, values)
}

/// Heat kernel `prod_k e^{-2t/h^2} I_{j_k - s_k}(2t/h^2)`; entries below the
/// representable range are flushed to zero.
pub fn free_kernel_solution(bx: LatticeBox, t: f64, source: &Site) -> Result<LatticeField> {
    Ok(free_kernel_log(bx, t, source)?.to_linear().0)
}

/// `ln u_j(t)` for the product solution
/// `prod_k e^{-2t/h^2} I_{j_k}(2t/h^2 + 1/h^2) / I_0(1/h^2)` at one site.
pub fn example_solution_log_at(h: f64, t: f64, site: &[i64]) -> Result<f64> {
    if !(h > 0.0) || !(0.0..=1.0).contains(&t) {
        return Err(crate::error::domain("need h > 0 and t in [0, 1]"));
    }
    let h2 = h * h;
    let x = (2.0 * t + 1.0) / h2;
    let norm = crate::besselkit::log_bessel_i(0, 1.0 / h2)?.logmag();
    let mut acc = 0.0;
    for &j in site {
        acc += crate::besselkit::log_bessel_i(j, x)?.logmag() - norm - 2.0 * t / h2;
    }
    Ok(acc)
}

/// The product solution above on every site of `bx`.
pub fn example_solution(bx: LatticeBox, t: f64) -> Result<LogField> {
    if !(0.0..=1.0).contains(&t) {
        return Err(crate::error::domain("t must lie in [0, 1]"));
    }
    let h2 = bx.h() * bx.h();
    let x = (2.0 * t + 1.0) / h2;
    let ladder = log_bessel_i_ladder(bx.extent(), x)?;
    let norm = crate::besselkit::log_bessel_i(0, 1.0 / h2)?.logmag();
    let logs: Vec<f64> = ladder.iter().map(|v| v - norm - 2.0 * t / h2).collect();
    let values = (0..bx.sites())
        .map(|i| {
            let j = bx.coords(i);
            LogScalar::from_ln((0..bx.d()).map(|k| logs[j[k].unsigned_abs() as usize]).sum())
        })
        .collect();
    LogField::new(bx, values)
}

/// One row of the Gaussian-limit table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GaussianRow {
    pub h: f64,
    pub order: u64,
    pub discrete: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GaussianTable {
    pub x: f64,
    pub t: f64,
    pub limit: f64,
    pub rows: Vec<GaussianRow>,
    pub strictly_decreasing: bool,
    pub passed: bool,
}

/// `(x / sqrt(4 pi t)) e^{-x^2 / 4t}`.
pub fn gaussian_limit_value(x: f64, t: f64) -> f64 {
    x / (4.0 * PI * t).sqrt() * (-x * x / (4.0 * t)).exp()
}

/// Distance between `(1/h) e^{-z} I_{1/h}(z)`, `z = 2t/(xh)^2`, and its
/// Gaussian limit for each mesh in `h_list`.
pub fn gaussian_limit(x: f64, t: f64, h_list: &[f64]) -> Result<GaussianTable> {
    if !(x > 0.0 && t > 0.0) {
        return Err(crate::error::domain("x and t must be positive"));
    }
    if h_list.is_empty() {
        return Err(precondition("empty mesh list"));
    }
    let limit = gaussian_limit_value(x, t);
    let mut rows = Vec::with_capacity(h_list.len());
    for &h in h_list {
        let inv = 1.0 / h;
        let n = inv.round();
        if !(h > 0.0) || (inv - n).abs() > 1e-9 * inv || n < 1.0 {
            return Err(crate::error::domain(format!("1/h must be a positive integer, got h = {h}")));
        }
        let z = 2.0 * t / (x * h).powi(2);
        let l = crate::besselkit::log_bessel_i(n as i64, z)?.logmag() - z + n.ln();
        let discrete = l.exp();
        rows.push(GaussianRow {
            h,
            order: n as u64,
            discrete,
            delta: (discrete - limit).abs(),
        });
    }
    let strictly_decreasing = rows.windows(2).all(|w| w[1].delta < w[0].delta);
    let passed = strictly_decreasing && rows.last().unwrap().delta < 1e-3;
    Ok(GaussianTable {
        x,
        t,
        limit,
        rows,
        strictly_decreasing,
        passed,
    })
}

/// Required lower bound on the relative slack of the energy inequality.
pub const ENERGY_TOL: f64 = -1e-6;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnergyReport {
    /// `(rhs - lhs) / rhs` at each sample time.
    pub slack: Vec<f64>,
    pub min_slack: f64,
    pub argmin_t: f64,
    /// Whether the dissipation integral came from the integrator or from the trapezoid rule.
    pub in_solver_quadrature: bool,
    pub norm_decreasing: bool,
    pub passed: bool,
}

/// Checks `||u(t)||^2 + 2 int_0^t sum_k ||D_{-,k} u||^2 <= e^{2t||V||} ||u(0)||^2`.
pub fn audit_energy(traj: &Trajectory) -> Result<EnergyReport> {
    let ts = traj.problem.t_grid();
    if traj.snapshots.len() != ts.len() {
        return Err(precondition("snapshot count differs from t_grid length"));
    }
    let (diss, in_solver) = match &traj.dissipation {
        Some(d) => (d.clone(), true),
        None => {
            let rates: Vec<f64> = traj.snapshots.iter().map(dissipation_rate).collect();
            let mut cum = vec![0.0; ts.len()];
            for i in 1..ts.len() {
                cum[i] = cum[i - 1] + 0.5 * (ts[i] - ts[i - 1]) * (rates[i] + rates[i - 1]);
            }
            (cum, false)
        }
    };
    let n0 = l2_norm_sq(&traj.snapshots[0]);
    let v = traj.problem.v_sup();
    let mut slack = Vec::with_capacity(ts.len());
    let norms: Vec<f64> = traj.snapshots.iter().map(l2_norm_sq).collect();
    for (i, &t) in ts.iter().enumerate() {
        let rhs = (2.0 * t * v).exp() * n0;
        let lhs = norms[i] + 2.0 * diss[i];
        slack.push(if rhs > 0.0 { (rhs - lhs) / rhs } else { 0.0 });
    }
    let (imin, &min_slack) = slack
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("t_grid is nonempty");
    Ok(EnergyReport {
        min_slack,
        argmin_t: ts[imin],
        in_solver_quadrature: in_solver,
        norm_decreasing: norms.windows(2).all(|w| w[1] <= w[0]),
        passed: min_slack >= ENERGY_TOL,
        slack,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CaccioppoliReport {
    pub r: f64,
    /// `h^d sum_k int_0^1 sum_{A(R-1,R)} |D_{+,k} u|^2`.
    pub gradient: f64,
    /// `int_0^1 ||u||^2` on `A(R-2,R+1)`.
    pub bulk: f64,
    /// `||u(0)||^2` on `A(R-2,R+1)`.
    pub initial: f64,
    /// Smallest `C_2` with `C_1 = 1`.
    pub fitted_c2: f64,
    /// `4d/(1-2h)^2 + 2||V||` from a cutoff with ramps of width `1-2h`; `None` for `h >= 1/2`.
    pub certified_c2: Option<f64>,
    /// Relative slack of the certified bound.
    pub certified_slack: Option<f64>,
    pub passed: bool,
}

/// Caccioppoli ingredients on the rings around radius `r`, time integrals by trapezoid.
pub fn audit_caccioppoli(traj: &Trajectory, r: f64) -> Result<CaccioppoliReport> {
    let bx = *traj.problem.bx();
    let outer = Annulus::standard(r, Metric::Euclidean);
    outer.check_inside(&bx)?;
    if r - 2.0 < 0.0 {
        return Err(precondition("radius must be at least 2"));
    }
    let inner = Annulus {
        r_in: r - 1.0,
        r_out: r,
        metric: Metric::Euclidean,
    };
    let ring = inner.site_indices(&bx);
    let h = bx.h();
    let grad_at = |u: &LatticeField| {
        let v = u.values();
        let mut acc = 0.0;
        for &i in &ring {
            for k in 0..bx.d() {
                let up = bx.neighbor(i, k, true).map_or(0.0, |n| v[n]);
                let g = (up - v[i]) / h;
                acc += g * g;
            }
        }
        acc * bx.cell()
    };
    let ts = traj.problem.t_grid();
    let grads: Vec<f64> = traj.snapshots.iter().map(grad_at).collect();
    let bulks: Vec<f64> = traj.snapshots.iter().map(|u| annulus_norm_sq(u, &outer)).collect();
    let gradient = trapezoid(ts, &grads);
    let bulk = trapezoid(ts, &bulks);
    let initial = bulks[0];
    let excess = gradient - initial;
    let fitted_c2 = if excess <= 0.0 {
        0.0
    } else if bulk > 0.0 {
        excess / bulk
    } else {
        f64::INFINITY
    };
    let (certified_c2, certified_slack) = if h < 0.5 {
        let ramp = 1.0 / (1.0 - 2.0 * h);
        let c2 = 4.0 * bx.d() as f64 * ramp * ramp + 2.0 * traj.problem.v_sup();
        let rhs = initial + c2 * bulk;
        let slack = if rhs > 0.0 { (rhs - gradient) / rhs } else { 0.0 };
        (Some(c2), Some(slack))
    } else {
        (None, None)
    };
    let passed = fitted_c2.is_finite() && certified_slack.map_or(true, |s| s >= ENERGY_TOL);
    Ok(CaccioppoliReport {
        r,
        gradient,
        bulk,
        initial,
        fitted_c2,
        certified_c2,
        certified_slack,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_at_time_zero_is_a_delta() {
        let bx = LatticeBox::new(2, 0.5, 5).unwrap();
        let k = free_kernel_solution(bx, 0.0, &[1, -2, 0]).unwrap();
        assert_eq!(k, LatticeField::delta(bx, &[1, -2, 0]).unwrap());
    }

    #[test]
    fn exponential_matches_rk4_on_a_small_box() {
        let bx = LatticeBox::new(1, 0.5, 12).unwrap();
        let psi = crate::rng::uniform_field(bx, 3, 1.0, 2);
        let pot = Arc::new(RandomPotential::new(bx, 1.5, 9, false));
        let p = HeatProblem::new(pot, psi, uniform_grid(17)).unwrap();
        let a = solve(&p, Method::Rk4, 1.0).unwrap();
        let b = solve(&p, Method::Exponential, 1.0).unwrap();
        let ua = a.snapshots.last().unwrap();
        let ub = b.snapshots.last().unwrap();
        let diff = ua.axpby(1.0, ub, -1.0);
        assert!(crate::lattice::l2_norm(&diff) < 1e-8 * crate::lattice::l2_norm(ub));
    }

    #[test]
    fn exponential_rejects_time_dependent_potential() {
        let bx = LatticeBox::new(1, 0.5, 6).unwrap();
        let pot = Arc::new(RandomPotential::new(bx, 1.0, 1, true));
        let p = HeatProblem::new(pot, LatticeField::zeros(bx), uniform_grid(5)).unwrap();
        assert!(solve(&p, Method::Exponential, 0.1).is_err());
    }

    #[test]
    fn understated_bound_is_rejected() {
        let bx = LatticeBox::new(1, 0.5, 6).unwrap();
        let pot = Arc::new(FnPotential {
            f: |_: &Site, _| 2.0,
            bound: 1.0,
            is_static: true,
        });
        assert!(HeatProblem::new(pot, LatticeField::zeros(bx), uniform_grid(5)).is_err());
    }
}
