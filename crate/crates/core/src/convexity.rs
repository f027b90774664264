//! Macdonald-function weights, weighted energies and the symmetric /
//! antisymmetric splitting of the conjugated Laplacian.
//!
//! Weights are tensor products `omega_j = prod_k w(j_k)` with `w` even in
//! its index. Everything downstream only needs the per-axis log ratios
//! `rho(m) = ln(w(m+1) / w(m))`, so those are computed directly from the
//! `K` ratio recurrence instead of differencing large logarithms.
//!
//! With `f = omega u` the operators act as
//! `S f_j = sum_k h^-2 [cosh rho(j_k) f_{j+e_k} + cosh rho(j_k-1) f_{j-e_k} - 2 f_j] + (d_t omega / omega) f_j`,
//! `A f_j = sum_k h^-2 [-sinh rho(j_k) f_{j+e_k} + sinh rho(j_k-1) f_{j-e_k}]`.

use crate::besselkit::{
    log_bessel_k_real, log_bessel_k_scaled_ladder, log_k_ratio, log_k_ratio_ladder,
    BesselEvalPolicy,
};
use crate::error::{domain, precondition, LabError, Result};
use crate::heat_sim::Trajectory;
use crate::lattice::{inner, l2_norm, LatticeBox, LatticeField, LogField};
use crate::logscalar::LogScalar;
use serde::{Deserialize, Serialize};

/// Family of weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightKind {
    /// `K_n(gamma/h^2)` (or `K_n((gamma + 2t)/h^2)` when time dependent).
    CloseToContinuum { gamma: f64 },
    /// `K_{n mu}(2/(e h^2))`, entering the energy to the first power.
    PurelyDiscrete { mu: f64 },
    /// `K_n(gamma/h^2)^delta`.
    DeltaInterp { gamma: f64, delta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightSpec {
    pub kind: WeightKind,
    pub h: f64,
    #[serde(default)]
    pub time_dependent: bool,
}

impl WeightSpec {
    pub fn close_to_continuum(gamma: f64, h: f64) -> Self {
        WeightSpec {
            kind: WeightKind::CloseToContinuum { gamma },
            h,
            time_dependent: false,
        }
    }

    pub fn delta(gamma: f64, delta: f64, h: f64) -> Self {
        WeightSpec {
            kind: WeightKind::DeltaInterp { gamma, delta },
            h,
            time_dependent: false,
        }
    }

    pub fn purely_discrete(mu: f64, h: f64) -> Self {
        WeightSpec {
            kind: WeightKind::PurelyDiscrete { mu },
            h,
            time_dependent: false,
        }
    }

    pub fn moving(gamma: f64, h: f64) -> Self {
        WeightSpec {
            time_dependent: true,
            ..Self::close_to_continuum(gamma, h)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(domain("h must be positive"));
        }
        match self.kind {
            WeightKind::CloseToContinuum { gamma } if !(gamma > 0.0) => {
                Err(domain("gamma must be positive"))
            }
            WeightKind::PurelyDiscrete { mu } if !(mu > 0.0) => Err(domain("mu must be positive")),
            WeightKind::DeltaInterp { gamma, delta } if !(gamma > 0.0) || !(delta > 0.0 && delta <= 1.0) => {
                Err(domain("need gamma > 0 and delta in (0, 1]"))
            }
            _ if self.time_dependent && !matches!(self.kind, WeightKind::CloseToContinuum { .. }) => {
                Err(domain("only close-to-continuum weights move in time"))
            }
            _ => Ok(()),
        }
    }

    /// Power of the weight inside the energy.
    pub fn energy_power(&self) -> f64 {
        match self.kind {
            WeightKind::PurelyDiscrete { .. } => 1.0,
            _ => 2.0,
        }
    }

    /// Bessel argument at time `t`.
    fn argument(&self, t: f64) -> f64 {
        let h2 = self.h * self.h;
        match self.kind {
            WeightKind::CloseToContinuum { gamma } if self.time_dependent => (gamma + 2.0 * t) / h2,
            WeightKind::CloseToContinuum { gamma } | WeightKind::DeltaInterp { gamma, .. } => gamma / h2,
            WeightKind::PurelyDiscrete { .. } => 2.0 / (std::f64::consts::E * h2),
        }
    }
}

/// Per-axis weight data for indices `|m| <= nmax`.
#[derive(Debug, Clone)]
pub struct AxisProfile {
    nmax: usize,
    /// `ln w(n) - ln w_0`, `n = 0..=nmax`, normalized by the `t = 0` value at `n = 0`.
    log_weight: Vec<f64>,
    /// `rho(n)` for `n = 0..=nmax`.
    rho: Vec<f64>,
    /// `d_t w(n) / w(n)` for time-dependent weights.
    dlog: Option<Vec<f64>>,
}

impl AxisProfile {
    pub fn new(spec: &WeightSpec, t: f64, nmax: usize) -> Result<Self> {
        spec.validate()?;
        if !(0.0..=1.0).contains(&t) {
            return Err(domain("t must lie in [0, 1]"));
        }
        let x = spec.argument(t);
        let x0 = spec.argument(0.0);
        let (log_weight, rho) = match spec.kind {
            WeightKind::CloseToContinuum { .. } | WeightKind::DeltaInterp { .. } => {
                let power = match spec.kind {
                    WeightKind::DeltaInterp { delta, .. } => delta,
                    _ => 1.0,
                };
                let scaled = log_bessel_k_scaled_ladder(nmax + 1, x)?;
                let base = if x == x0 {
                    scaled[0] - x
                } else {
                    log_bessel_k_scaled_ladder(0, x0)?[0] - x0
                };
                let lw = scaled[..=nmax].iter().map(|s| power * (s - x - base)).collect();
                let rho = log_k_ratio_ladder(nmax + 1, x)?.iter().map(|r| power * r).collect();
                (lw, rho)
            }
            WeightKind::PurelyDiscrete { mu } => {
                let policy = BesselEvalPolicy::default();
                let base = log_bessel_k_real(0.0, x, &policy)?.logmag();
                let lw: Vec<f64> = (0..=nmax + 1)
                    .map(|n| Ok(log_bessel_k_real(n as f64 * mu, x, &policy)?.logmag() - base))
                    .collect::<Result<_>>()?;
                let rho = lw.windows(2).map(|w| w[1] - w[0]).collect();
                (lw[..=nmax].to_vec(), rho)
            }
        };
        let dlog = if spec.time_dependent {
            // d_t ln K_n(x(t)) = (2/h^2) K_n'/K_n, and K_n' = -(K_{n-1} + K_{n+1})/2
            let h2 = spec.h * spec.h;
            let r: &Vec<f64> = &rho;
            Some(
                (0..=nmax)
                    .map(|n| {
                        let down = if n == 0 { r[0] } else { -r[n - 1] };
                        -(down.exp() + r[n].exp()) / h2
                    })
                    .collect(),
            )
        } else {
            None
        };
        Ok(AxisProfile {
            nmax,
            log_weight,
            rho,
            dlog,
        })
    }

    pub fn nmax(&self) -> usize {
        self.nmax
    }

    pub fn log_weight(&self, m: i64) -> f64 {
        self.log_weight[m.unsigned_abs() as usize]
    }

    /// `ln(w(m+1)/w(m))` for `-nmax-1 <= m <= nmax`.
    pub fn rho(&self, m: i64) -> f64 {
        if m >= 0 {
            self.rho[m as usize]
        } else {
            -self.rho[(-m - 1) as usize]
        }
    }

    pub fn dlog(&self, m: i64) -> f64 {
        self.dlog.as_ref().map_or(0.0, |v| v[m.unsigned_abs() as usize])
    }
}

/// `prod_k w(j_k)` at time `t`, normalized by the `n = 0` weight at `t = 0`.
pub fn weight_at(spec: &WeightSpec, j: &[i64], t: f64) -> Result<LogScalar> {
    let nmax = j.iter().map(|v| v.unsigned_abs()).max().unwrap_or(0) as usize;
    let p = AxisProfile::new(spec, t, nmax)?;
    Ok(LogScalar::from_ln(j.iter().map(|&m| p.log_weight(m)).sum()))
}

/// `H(t) = h^d sum_j omega_j^p u_j(t)^2` on a time grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeightedEnergy {
    pub times: Vec<f64>,
    pub values: Vec<LogScalar>,
}

fn energy_of(bx: &LatticeBox, logs: impl Iterator<Item = (usize, LogScalar)>, p: &AxisProfile, power: f64) -> LogScalar {
    let d = bx.d();
    let cell = d as f64 * bx.h().ln();
    let terms: Vec<LogScalar> = logs
        .filter(|(_, u)| !u.is_zero())
        .map(|(i, u)| {
            let j = bx.coords(i);
            let w: f64 = (0..d).map(|k| p.log_weight(j[k])).sum();
            LogScalar::from_ln(power * w + 2.0 * u.logmag() + cell)
        })
        .collect();
    LogScalar::sum_slice(&terms)
}

fn check_mesh(spec: &WeightSpec, bx: &LatticeBox) -> Result<()> {
    if (spec.h - bx.h()).abs() > 1e-12 * spec.h {
        return Err(precondition("weight and trajectory meshes differ"));
    }
    Ok(())
}

/// Weighted energy of a trajectory.
pub fn weighted_energy(traj: &Trajectory, spec: &WeightSpec) -> Result<WeightedEnergy> {
    let logs: Vec<LogField> = traj.snapshots.iter().map(LogField::from_linear).collect();
    weighted_energy_log(traj.problem.t_grid(), &logs, spec)
}

/// Weighted energy of log-domain snapshots.
pub fn weighted_energy_log(times: &[f64], snapshots: &[LogField], spec: &WeightSpec) -> Result<WeightedEnergy> {
    if times.len() != snapshots.len() || times.is_empty() {
        return Err(precondition("need one snapshot per time"));
    }
    let bx = *snapshots[0].bx();
    check_mesh(spec, &bx)?;
    let mut values = Vec::with_capacity(times.len());
    let mut fixed = None;
    for (&t, u) in times.iter().zip(snapshots) {
        let p = if spec.time_dependent {
            AxisProfile::new(spec, t, bx.extent())?
        } else {
            fixed.get_or_insert(AxisProfile::new(spec, 0.0, bx.extent())?).clone()
        };
        values.push(energy_of(&bx, u.values().iter().copied().enumerate(), &p, spec.energy_power()));
    }
    Ok(WeightedEnergy {
        times: times.to_vec(),
        values,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MonotoneReport {
    /// `ln(e^{-2t||V||} H(t))` per sample.
    pub damped_log: Vec<f64>,
    /// Largest relative increase of `e^{-2t||V||} H(t)` between samples.
    pub worst_increase: f64,
    pub argmax_t: f64,
    pub passed: bool,
}

pub const MONOTONE_TOL: f64 = 1e-8;

/// Checks that `e^{-2t||V||} H(t)` does not increase, with the moving weight.
pub fn audit_monotone_energy(traj: &Trajectory, spec: &WeightSpec) -> Result<MonotoneReport> {
    if !spec.time_dependent || !matches!(spec.kind, WeightKind::CloseToContinuum { .. }) {
        return Err(precondition("monotone energy needs the moving close-to-continuum weight"));
    }
    let energy = weighted_energy(traj, spec)?;
    let v = traj.problem.v_sup();
    let damped_log: Vec<f64> = energy
        .values
        .iter()
        .zip(&energy.times)
        .map(|(e, &t)| if e.is_zero() { f64::NEG_INFINITY } else { e.logmag() - 2.0 * t * v })
        .collect();
    let mut worst = f64::NEG_INFINITY;
    let mut argmax_t = 0.0;
    for (i, w) in damped_log.windows(2).enumerate() {
        let inc = if w[0] == f64::NEG_INFINITY {
            if w[1] == f64::NEG_INFINITY { 0.0 } else { f64::INFINITY }
        } else {
            (w[1] - w[0]).exp_m1()
        };
        if inc > worst {
            worst = inc;
            argmax_t = energy.times[i + 1];
        }
    }
    Ok(MonotoneReport {
        passed: worst <= MONOTONE_TOL,
        worst_increase: worst,
        argmax_t,
        damped_log,
    })
}

fn profile_for_box(spec: &WeightSpec, bx: &LatticeBox, t: f64) -> Result<AxisProfile> {
    check_mesh(spec, bx)?;
    AxisProfile::new(spec, t, bx.extent() + 2)
}

/// Applies `S` and `A` for the weight at time `t`; values outside the box are zero.
pub fn sa_apply(f: &LatticeField, spec: &WeightSpec, t: f64) -> Result<(LatticeField, LatticeField)> {
    let bx = *f.bx();
    let p = profile_for_box(spec, &bx, t)?;
    Ok(sa_with_profile(f, &p))
}

fn sa_with_profile(f: &LatticeField, p: &AxisProfile) -> (LatticeField, LatticeField) {
    let bx = *f.bx();
    let h2 = bx.h() * bx.h();
    let v = f.values();
    let mut s = vec![0.0; bx.sites()];
    let mut a = vec![0.0; bx.sites()];
    for i in 0..bx.sites() {
        let j = bx.coords(i);
        let (mut si, mut ai) = (0.0, 0.0);
        for k in 0..bx.d() {
            let up = bx.neighbor(i, k, true).map_or(0.0, |n| v[n]);
            let dn = bx.neighbor(i, k, false).map_or(0.0, |n| v[n]);
            let rp = p.rho(j[k]);
            let rm = p.rho(j[k] - 1);
            si += rp.cosh() * up + rm.cosh() * dn - 2.0 * v[i];
            ai += -rp.sinh() * up + rm.sinh() * dn;
            si += h2 * p.dlog(j[k]) * v[i];
        }
        s[i] = si / h2;
        a[i] = ai / h2;
    }
    (
        LatticeField::new(bx, s).expect("sized"),
        LatticeField::new(bx, a).expect("sized"),
    )
}

/// `<[S, A] f, f>` computed two ways.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CommutatorValue {
    /// `<S(Af) - A(Sf), f>`.
    pub direct: f64,
    /// `(h^{d-4}/2) sum_k sum_j [2 sinh(rho(j_k) - rho(j_k - 1)) (f_{j+e_k} - f_{j-e_k})^2 + Lambda(j_k) f_j^2]`.
    pub closed_form: f64,
    /// `2 ||Sf|| ||Af||`, the Cauchy-Schwarz size of the form.
    pub scale: f64,
}

impl CommutatorValue {
    pub fn gap(&self) -> f64 {
        if self.scale > 0.0 {
            (self.direct - self.closed_form).abs() / self.scale
        } else {
            (self.direct - self.closed_form).abs()
        }
    }
}

fn lambda_from_rho(p: &AxisProfile, m: i64) -> f64 {
    let r = |k: i64| p.rho(k);
    2.0 * ((2.0 * r(m)).sinh() - (2.0 * r(m - 1)).sinh() + (r(m) - r(m + 1)).sinh()
        + (r(m - 2) - r(m - 1)).sinh())
}

/// Requires a static weight and `f` vanishing within two sites of the box edge.
pub fn commutator_form(f: &LatticeField, spec: &WeightSpec) -> Result<CommutatorValue> {
    if spec.time_dependent {
        return Err(precondition("commutator form needs a static weight"));
    }
    let bx = *f.bx();
    if !f.supported_inside(2) {
        return Err(LabError::Support("field must vanish within two sites of the edge".into()));
    }
    let p = profile_for_box(spec, &bx, 0.0)?;
    let (sf, af) = sa_with_profile(f, &p);
    let (saf, _) = sa_with_profile(&af, &p);
    let (_, asf) = sa_with_profile(&sf, &p);
    let direct = inner(&saf.axpby(1.0, &asf, -1.0), f);
    let v = f.values();
    let mut acc = 0.0;
    for i in 0..bx.sites() {
        let j = bx.coords(i);
        for k in 0..bx.d() {
            let up = bx.neighbor(i, k, true).map_or(0.0, |n| v[n]);
            let dn = bx.neighbor(i, k, false).map_or(0.0, |n| v[n]);
            let m = j[k];
            let diff = up - dn;
            acc += 2.0 * (p.rho(m) - p.rho(m - 1)).sinh() * diff * diff;
            acc += lambda_from_rho(&p, m) * v[i] * v[i];
        }
    }
    let h = bx.h();
    let closed_form = 0.5 * bx.cell() * acc / h.powi(4);
    Ok(CommutatorValue {
        direct,
        closed_form,
        scale: 2.0 * l2_norm(&sf) * l2_norm(&af),
    })
}

/// `<[S_k, A_m] f, f>` for a pair of axes.
pub fn cross_commutator(f: &LatticeField, spec: &WeightSpec, k: usize, m: usize) -> Result<f64> {
    let bx = *f.bx();
    if k >= bx.d() || m >= bx.d() {
        return Err(precondition("axis out of range"));
    }
    if !f.supported_inside(2) {
        return Err(LabError::Support("field must vanish within two sites of the edge".into()));
    }
    let p = profile_for_box(spec, &bx, 0.0)?;
    let axis = |g: &LatticeField, axis: usize| {
        let h2 = bx.h() * bx.h();
        let v = g.values();
        let mut s = vec![0.0; bx.sites()];
        let mut a = vec![0.0; bx.sites()];
        for i in 0..bx.sites() {
            let j = bx.coords(i);
            let up = bx.neighbor(i, axis, true).map_or(0.0, |n| v[n]);
            let dn = bx.neighbor(i, axis, false).map_or(0.0, |n| v[n]);
            let rp = p.rho(j[axis]);
            let rm = p.rho(j[axis] - 1);
            s[i] = (rp.cosh() * up + rm.cosh() * dn - 2.0 * v[i]) / h2;
            a[i] = (-rp.sinh() * up + rm.sinh() * dn) / h2;
        }
        (
            LatticeField::new(bx, s).expect("sized"),
            LatticeField::new(bx, a).expect("sized"),
        )
    };
    let (sk, _) = axis(f, k);
    let (_, am) = axis(f, m);
    let (sk_am, _) = axis(&am, k);
    let (_, am_sk) = axis(&sk, m);
    Ok(inner(&sk_am.axpby(1.0, &am_sk, -1.0), f))
}

/// The eight-term combination of `K` ratios, written as
/// `2[sinh 2r(j) - sinh 2r(j-1) + sinh(r(j) - r(j+1)) + sinh(r(j-2) - r(j-1))]`
/// with `r(m) = delta ln(K_{m+1}(x)/K_m(x))`.
pub fn lambda_delta(j: i64, x: f64, delta: f64) -> Result<f64> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(domain("x must be positive"));
    }
    if !(0.0..=1.0).contains(&delta) {
        return Err(domain("delta must lie in [0, 1]"));
    }
    if delta == 0.0 {
        return Ok(0.0);
    }
    let r = |m: i64| -> Result<f64> { Ok(delta * log_k_ratio(m, x)?) };
    let (rm2, rm1, r0, rp1) = (r(j - 2)?, r(j - 1)?, r(j)?, r(j + 1)?);
    Ok(2.0 * ((2.0 * r0).sinh() - (2.0 * rm1).sinh() + (r0 - rp1).sinh() + (rm2 - rm1).sinh()))
}

/// `-2 (1 + 1/x + 1/(4x^3))`.
pub fn lambda_lower_bound(x: f64) -> f64 {
    -2.0 * (1.0 + 1.0 / x + 0.25 / (x * x * x))
}

/// Smallest `N` with `H(t) <= e^{N max(||V||, 1)} H(0)^{1-t} H(1)^t` on the grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LogConvexityReport {
    pub n_hat: f64,
    pub argmax_t: f64,
    /// `ln H(t) - (1-t) ln H(0) - t ln H(1)` per sample.
    pub excess: Vec<f64>,
    pub convex: bool,
}

pub const CONVEXITY_TOL: f64 = 1e-6;

pub fn audit_logconvexity(energy: &WeightedEnergy, v_sup: f64) -> Result<LogConvexityReport> {
    let ts = &energy.times;
    if ts.len() < 3 || ts[0] != 0.0 || *ts.last().unwrap() != 1.0 {
        return Err(precondition("need at least three samples with endpoints 0 and 1"));
    }
    let h0 = energy.values[0];
    let h1 = *energy.values.last().unwrap();
    let any_positive = energy.values.iter().any(|v| !v.is_zero());
    if !any_positive {
        return Ok(LogConvexityReport {
            n_hat: 0.0,
            argmax_t: 0.0,
            excess: vec![0.0; ts.len()],
            convex: true,
        });
    }
    if h0.is_zero() || h1.is_zero() {
        return Err(LabError::Degenerate(
            "H vanishes at an endpoint but not everywhere".into(),
        ));
    }
    let (l0, l1) = (h0.logmag(), h1.logmag());
    let excess: Vec<f64> = energy
        .values
        .iter()
        .zip(ts)
        .map(|(v, &t)| {
            if v.is_zero() {
                f64::NEG_INFINITY
            } else {
                v.logmag() - ((1.0 - t) * l0 + t * l1)
            }
        })
        .collect();
    let (imax, &emax) = excess
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("nonempty");
    let n_hat = emax.max(0.0) / v_sup.max(1.0);
    Ok(LogConvexityReport {
        convex: n_hat <= CONVEXITY_TOL,
        n_hat,
        argmax_t: ts[imax],
        excess,
    })
}

/// Error terms of the energy identity for the weight frozen at `|m| = r_trunc`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TruncationReport {
    pub r_trunc: usize,
    /// Largest `h^2 E^R_m` over indices and sample times.
    pub max_scaled: f64,
    pub argmax_m: i64,
    pub argmax_t: f64,
    /// Whether `h^2 E^R_m <= 2` everywhere.
    pub within_claim: bool,
}

/// `h^2 E^R_m = 2 h^2 d_t ln psi_m + psi_{m-1}/psi_m + psi_m/psi_{m+1} + psi_m/psi_{m-1} + psi_{m+1}/psi_m`
/// with `psi_m = K_{min(|m|, R)}((gamma + 2t)/h^2)`.
pub fn audit_truncated_weight(gamma: f64, h: f64, r_trunc: usize, ts: &[f64]) -> Result<TruncationReport> {
    let spec = WeightSpec::moving(gamma, h);
    spec.validate()?;
    let mut best = (f64::NEG_INFINITY, 0i64, 0.0);
    let r = r_trunc as i64;
    for &t in ts {
        let p = AxisProfile::new(&spec, t, r_trunc + 2)?;
        let clamp = |m: i64| m.abs().min(r);
        // log psi differences through rho
        let lpsi = |m: i64| p.log_weight(clamp(m));
        for m in -(r + 2)..=(r + 2) {
            let c = clamp(m);
            let dl = if c == m.abs() { p.dlog(m) } else { p.dlog(r) };
            let ratio = |a: i64, b: i64| (lpsi(a) - lpsi(b)).exp();
            let e = 2.0 * h * h * dl
                + ratio(m - 1, m)
                + ratio(m, m + 1)
                + ratio(m, m - 1)
                + ratio(m + 1, m);
            if e > best.0 {
                best = (e, m, t);
            }
        }
    }
    Ok(TruncationReport {
        r_trunc,
        max_scaled: best.0,
        argmax_m: best.1,
        argmax_t: best.2,
        within_claim: best.0 <= 2.0 + 1e-12,
    })
}
