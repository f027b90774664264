//! Stationary discrete Schrodinger tooling for `Delta u + V u = 0`: residuals,
//! the static-weight Carleman audit, the choice of the Carleman parameter, and
//! the sup-norm shell recursion `M_N <= (4d - 1 + q_N) M_{N+1}` with the
//! thresholds it implies.

use crate::besselkit::log_bessel_j_ladder;
use crate::carleman::{smooth_step, sa_raw, CarlemanConfig, Frame, Verdict};
use crate::error::{domain, precondition, LabError, Result};
use crate::fit::ols;
use crate::lattice::{discrete_laplacian, LatticeBox, LatticeField};
use crate::logscalar::LogScalar;
use crate::rng::seeded;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Largest `sup |Delta u + V u| / sup |u|` accepted as a solution.
pub const RESIDUAL_GATE: f64 = 1e-8;

/// Center of the static weight `alpha |hj/R + 3 e_1|^2`.
pub const ELLIPTIC_CENTER: f64 = 3.0;

/// A field with a potential on the same box; `v_bound` is the declared sup of `|V|`.
#[derive(Debug, Clone)]
pub struct EllipticProblem {
    u: LatticeField,
    potential: Vec<f64>,
    v_bound: f64,
}

impl EllipticProblem {
    pub fn new(u: LatticeField, potential: Vec<f64>, v_bound: f64) -> Result<Self> {
        if potential.len() != u.values().len() {
            return Err(precondition("potential and field sizes differ"));
        }
        let sup = potential.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !(v_bound >= sup) {
            return Err(domain(format!("declared bound {v_bound} below sup |V| = {sup}")));
        }
        Ok(EllipticProblem {
            u,
            potential,
            v_bound,
        })
    }

    /// `V = 0`.
    pub fn free(u: LatticeField) -> Self {
        let n = u.values().len();
        EllipticProblem {
            u,
            potential: vec![0.0; n],
            v_bound: 0.0,
        }
    }

    pub fn u(&self) -> &LatticeField {
        &self.u
    }

    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    pub fn v_bound(&self) -> f64 {
        self.v_bound
    }
}

/// `Delta u + V u` on interior sites, zero on the box boundary.
pub fn elliptic_residual(p: &EllipticProblem) -> LatticeField {
    let bx = *p.u.bx();
    let lap = discrete_laplacian(&p.u);
    let values = (0..bx.sites())
        .map(|i| {
            if bx.on_boundary(i) {
                0.0
            } else {
                lap.values()[i] + p.potential[i] * p.u.values()[i]
            }
        })
        .collect();
    LatticeField::new(bx, values).expect("sized")
}

/// `sup |residual| / sup |u|`, or 0 for `u = 0`.
pub fn residual_ratio(p: &EllipticProblem) -> f64 {
    let sup = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let us = sup(p.u.values());
    if us == 0.0 {
        return 0.0;
    }
    sup(elliptic_residual(p).values()) / us
}

/// `u_n = J_n(t0)` on `|n| <= nmax`, `d = 1`, `h = 1`, with `V(n) = 2(1 - n/t0)`.
/// `J_{-n} = (-1)^n J_n`; the declared bound is the sup of `|V|` over the window.
pub fn j_testbed(t0: f64, nmax: usize) -> Result<EllipticProblem> {
    if !(t0 > 0.0 && t0.is_finite()) || nmax < 2 {
        return Err(domain("need t0 > 0 and nmax >= 2"));
    }
    let ladder = log_bessel_j_ladder(nmax, t0)?;
    let bx = LatticeBox::new(1, 1.0, nmax)?;
    let u = LatticeField::from_fn(bx, |j| {
        let n = j[0].unsigned_abs() as usize;
        let v = ladder[n].to_f64();
        if j[0] < 0 && n % 2 == 1 {
            -v
        } else {
            v
        }
    });
    let potential: Vec<f64> = (0..bx.sites())
        .map(|i| 2.0 * (1.0 - bx.coords(i)[0] as f64 / t0))
        .collect();
    let bound = 2.0 * (1.0 + nmax as f64 / t0);
    EllipticProblem::new(u, potential, bound)
}

/// Shell maxima `M_N = max_{|n|_inf in {N, N-1}} |u_n|` and `q_N = h^2 max_{|n|_inf = N} |V_n|`
/// for `N = 1..=len`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShellData {
    pub h: f64,
    pub d: usize,
    pub m: Vec<LogScalar>,
    pub q: Vec<f64>,
    /// Residual ratio of the problem the shells came from; `None` for synthetic sequences.
    pub residual_ratio: Option<f64>,
}

impl ShellData {
    pub fn new(h: f64, d: usize, m: Vec<LogScalar>, q: Vec<f64>) -> Result<Self> {
        if m.len() != q.len() || m.is_empty() {
            return Err(precondition("need equally many nonempty M_N and q_N"));
        }
        if m.iter().any(|v| v.sign() < 0) || q.iter().any(|v| !(*v >= 0.0)) {
            return Err(domain("M_N and q_N must be nonnegative"));
        }
        if !(h > 0.0) || d == 0 {
            return Err(domain("need h > 0 and d >= 1"));
        }
        Ok(ShellData {
            h,
            d,
            m,
            q,
            residual_ratio: None,
        })
    }

    /// Number of shells; `M_N` is available for `N = 1..=len()`.
    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    /// `M_N`, `N >= 1`.
    pub fn m_at(&self, n: usize) -> LogScalar {
        self.m[n - 1]
    }

    /// `q_N`, `N >= 1`.
    pub fn q_at(&self, n: usize) -> f64 {
        self.q[n - 1]
    }

    /// `4d - 1 + q_N`.
    pub fn factor(&self, n: usize) -> f64 {
        4.0 * self.d as f64 - 1.0 + self.q_at(n)
    }
}

pub fn shell_extract(p: &EllipticProblem) -> ShellData {
    let bx = *p.u.bx();
    let n = bx.extent();
    let mut umax = vec![0.0f64; n + 1];
    let mut vmax = vec![0.0f64; n + 1];
    for i in 0..bx.sites() {
        let j = bx.coords(i);
        let r = (0..bx.d()).map(|k| j[k].unsigned_abs() as usize).max().unwrap_or(0);
        umax[r] = umax[r].max(p.u.values()[i].abs());
        vmax[r] = vmax[r].max(p.potential[i].abs());
    }
    let h2 = bx.h() * bx.h();
    ShellData {
        h: bx.h(),
        d: bx.d(),
        m: (1..=n)
            .map(|k| LogScalar::from_f64(umax[k].max(umax[k - 1])))
            .collect(),
        q: (1..=n).map(|k| h2 * vmax[k]).collect(),
        residual_ratio: Some(residual_ratio(p)),
    }
}

/// `M_N = N^power rate^-N` with `V = 0`.
pub fn geometric_shells(d: usize, h: f64, rate: f64, power: f64, count: usize) -> Result<ShellData> {
    if !(rate > 0.0) || count < 2 {
        return Err(domain("need rate > 0 and at least two shells"));
    }
    let m = (1..=count)
        .map(|n| {
            let n = n as f64;
            LogScalar::from_ln(power * n.ln() - n * rate.ln())
        })
        .collect();
    ShellData::new(h, d, m, vec![0.0; count])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecursionRow {
    pub n: usize,
    pub m_n: f64,
    pub q_n: f64,
    pub factor: f64,
    pub m_next: f64,
    /// `(rhs - lhs) / max(lhs, rhs)` for `lhs = M_N`, `rhs = factor M_{N+1}`; 0 when both vanish.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecursionReport {
    pub rows: Vec<RecursionRow>,
    pub worst_margin: f64,
    pub passed: bool,
}

/// Checks `M_N <= (4d - 1 + q_N) M_{N+1}` for `N = 1..len()-1`.
pub fn uc_recursion_audit(s: &ShellData) -> Result<RecursionReport> {
    match s.residual_ratio {
        Some(r) if r <= RESIDUAL_GATE => {}
        Some(r) => {
            return Err(LabError::Residual(format!(
                "residual ratio {r:.3e} exceeds {RESIDUAL_GATE:e}"
            )))
        }
        None => {
            return Err(LabError::Residual(
                "shells do not come from a residual-checked problem".into(),
            ))
        }
    }
    let rows: Vec<RecursionRow> = (1..s.len())
        .map(|n| {
            let lhs = s.m_at(n);
            let rhs = s.m_at(n + 1) * LogScalar::from_f64(s.factor(n));
            let top = if lhs > rhs { lhs } else { rhs };
            let margin = if top.is_zero() {
                0.0
            } else {
                ((rhs - lhs) / top).to_f64()
            };
            RecursionRow {
                n,
                m_n: lhs.to_f64(),
                q_n: s.q_at(n),
                factor: s.factor(n),
                m_next: s.m_at(n + 1).to_f64(),
                margin,
            }
        })
        .collect();
    let worst_margin = rows.iter().map(|r| r.margin).fold(f64::INFINITY, f64::min);
    Ok(RecursionReport {
        passed: worst_margin >= 0.0,
        worst_margin,
        rows,
    })
}

/// `M_1 / prod_{k=1}^{n} (4d - 1 + q_k)`.
pub fn uc_threshold(s: &ShellData, n: usize) -> Result<LogScalar> {
    if n == 0 || n > s.len() {
        return Err(precondition(format!("shells 1..={n} not available")));
    }
    // runs of equal factors are summed as count * ln, so constant q reproduces the closed form
    let mut log_prod = 0.0;
    let mut k = 1;
    while k <= n {
        let f = s.factor(k);
        let mut run = 1;
        while k + run <= n && s.factor(k + run) == f {
            run += 1;
        }
        log_prod += run as f64 * f.ln();
        k += run;
    }
    Ok(s.m_at(1).scale_ln(-log_prod))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdCheck {
    pub n: usize,
    pub log_m_next: f64,
    pub log_threshold: f64,
    /// `M_{N+1}` below the threshold: the decay forces `u = 0`.
    pub forces_zero: bool,
}

pub fn uc_verdict(s: &ShellData, n: usize) -> Result<ThresholdCheck> {
    if n + 1 > s.len() {
        return Err(precondition(format!("shell {} not available", n + 1)));
    }
    let thr = uc_threshold(s, n)?;
    let next = s.m_at(n + 1);
    Ok(ThresholdCheck {
        n,
        log_m_next: next.logmag(),
        log_threshold: thr.logmag(),
        forces_zero: next < thr,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlagScan {
    pub rows: Vec<ThresholdCheck>,
    /// Smallest `N` from which every available shell is flagged.
    pub n0: Option<usize>,
    pub never_flagged: bool,
}

/// Threshold comparison at every `N = 1..len()-1`.
pub fn uc_flag_scan(s: &ShellData) -> Result<FlagScan> {
    let rows: Vec<ThresholdCheck> = (1..s.len()).map(|n| uc_verdict(s, n)).collect::<Result<_>>()?;
    let n0 = match rows.iter().rposition(|r| !r.forces_zero) {
        None => rows.first().map(|r| r.n),
        Some(k) if k + 1 < rows.len() => Some(rows[k + 1].n),
        Some(_) => None,
    };
    Ok(FlagScan {
        never_flagged: rows.iter().all(|r| !r.forces_zero),
        n0,
        rows,
    })
}

/// `M_1 e^{-N ln(4d - 1 + h^2 ||V||)}`, the threshold for a bounded potential.
pub fn bounded_threshold(m1: LogScalar, n: usize, d: usize, h: f64, v_sup: f64) -> LogScalar {
    m1.scale_ln(-(n as f64) * (4.0 * d as f64 - 1.0 + h * h * v_sup).ln())
}

/// Thresholds for `V(x) = x`, where `q_k = h^3 k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearPotentialThresholds {
    /// `M_1 / prod_{k=1}^{N} (4d - 1 + h^3 k)`.
    pub product: LogScalar,
    /// `M_1 (4d - 1 + h^3 N)^-N`; never larger than `product`.
    pub simplified: LogScalar,
}

pub fn linear_potential_thresholds(m1: LogScalar, n: usize, d: usize, h: f64) -> LinearPotentialThresholds {
    let base = 4.0 * d as f64 - 1.0;
    let h3 = h * h * h;
    let log_prod: f64 = (1..=n).map(|k| (base + h3 * k as f64).ln()).sum();
    LinearPotentialThresholds {
        product: m1.scale_ln(-log_prod),
        simplified: m1.scale_ln(-(n as f64) * (base + h3 * n as f64).ln()),
    }
}

/// Regression of `ln |J_N(t0)|` on `N ln N` and `N` over `N in [n_lo, n_hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JotaFit {
    pub t0: f64,
    pub n_lo: usize,
    pub n_hi: usize,
    /// Coefficient of `N ln N`; the large-order prediction is `-1`.
    pub slope: f64,
    /// Coefficient of `N`.
    pub linear: f64,
    /// `1 + ln(t0/2)`.
    pub predicted_linear: f64,
    pub r2: f64,
    /// `|slope + 1|`.
    pub slope_rel_err: f64,
}

pub fn jota_fit(t0: f64, n_lo: usize, n_hi: usize) -> Result<JotaFit> {
    if !(t0 > 0.0) || n_lo < 2 || n_hi < n_lo + 3 {
        return Err(domain("need t0 > 0 and 2 <= n_lo < n_hi - 2"));
    }
    let ladder = log_bessel_j_ladder(n_hi, t0)?;
    let ns: Vec<f64> = (n_lo..=n_hi).map(|n| n as f64).collect();
    let y: Vec<f64> = (n_lo..=n_hi).map(|n| ladder[n].logmag()).collect();
    let fit = ols(
        &[ns.iter().map(|n| n * n.ln()).collect(), ns.clone()],
        &y,
        true,
    )?;
    Ok(JotaFit {
        t0,
        n_lo,
        n_hi,
        slope: fit.coef[1],
        linear: fit.coef[2],
        predicted_linear: 1.0 + (t0 / 2.0).ln(),
        r2: fit.r2,
        slope_rel_err: (fit.coef[1] + 1.0).abs(),
    })
}

/// Constant of `alpha = c R^{4/3}` and of the fixed-mesh choice. With it,
/// `h^-4 sinh(2 alpha h^2/R^2) sinh^2(2 alpha h/(R sqrt d)) >= 8 c^3 / d` holds for every `(R, h)`.
pub const ELLIPTIC_C: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EllipticMode {
    /// `R = h^-beta` with `h -> 0`.
    Scaling,
    /// `h` held fixed.
    FixedMesh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EllipticCase {
    /// `beta <= 3`: `alpha = c R^{4/3}`.
    Continuum,
    /// `beta > 3`: `alpha = (sqrt(d)/4) R^{1+1/beta} ln(R^{1-1/beta})`.
    Intermediate,
    /// `alpha = c (R/h) ln(Rh)`.
    FixedMesh,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipticAlpha {
    pub alpha: f64,
    pub case: EllipticCase,
    pub beta: Option<f64>,
    /// `ln[h^-4 sinh(2 alpha h^2/R^2) sinh^2(2 alpha h/(R sqrt d))]`.
    pub log_condition: f64,
}

pub fn alpha_select_elliptic(r: f64, h: f64, d: usize, mode: EllipticMode) -> Result<EllipticAlpha> {
    if !(r >= 1.0 && r.is_finite()) || !(h > 0.0) || !(1..=3).contains(&d) {
        return Err(domain("need R >= 1, h > 0 and d in 1..=3"));
    }
    let (alpha, case, beta) = match mode {
        EllipticMode::FixedMesh => {
            if r * h <= 1.0 {
                return Err(domain("fixed-mesh choice needs Rh > 1"));
            }
            (ELLIPTIC_C * r / h * (r * h).ln(), EllipticCase::FixedMesh, None)
        }
        EllipticMode::Scaling => {
            if h >= 1.0 {
                return Err(domain("scaling choice needs h < 1"));
            }
            let beta = -r.ln() / h.ln();
            if beta <= 3.0 {
                (ELLIPTIC_C * r.powf(4.0 / 3.0), EllipticCase::Continuum, Some(beta))
            } else {
                let a = (d as f64).sqrt() / 4.0
                    * r.powf(1.0 + 1.0 / beta)
                    * ((1.0 - 1.0 / beta) * r.ln());
                (a, EllipticCase::Intermediate, Some(beta))
            }
        }
    };
    let ls = |x: f64| if x > 20.0 { x - std::f64::consts::LN_2 } else { x.sinh().ln() };
    let log_condition = -4.0 * h.ln()
        + ls(2.0 * alpha * h * h / (r * r))
        + 2.0 * ls(2.0 * alpha * h / (r * (d as f64).sqrt()));
    Ok(EllipticAlpha {
        alpha,
        case,
        beta,
        log_condition,
    })
}

/// Random unit-norm field `eta(|x|) c_j` with `x = hj/R + 3 e_1` and `c_j` uniform in `[-1, 1]`.
pub fn elliptic_field(cfg: &CarlemanConfig, seed: u64) -> Result<LatticeField> {
    cfg.validate()?;
    let bx = cfg.support_box()?;
    let mut rng = seeded(seed);
    let mut f = LatticeField::from_fn(bx, |j| {
        let c: f64 = rng.gen_range(-1.0..1.0);
        let x = cfg.shift(j, ELLIPTIC_CENTER);
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        smooth_step(r - 1.0).0 * smooth_step(4.0 - r).0 * c
    });
    let norm = (bx.cell() * f.values().iter().map(|v| v * v).sum::<f64>()).sqrt();
    if !(norm > 0.0) {
        return Err(LabError::Degenerate("elliptic test field vanishes".into()));
    }
    f = f.scaled(1.0 / norm);
    Ok(f)
}

/// Both sides of the static-weight inequality and the commutator for one field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipticSides {
    /// `h^-2 sqrt(sinh(2 alpha h^2/R^2)) [sinh(2 alpha h/(R sqrt d)) ||f|| + 2 ||(f_{j+e_k} - f_{j-e_k})/2||]`.
    pub lhs: f64,
    /// `||e^phi Delta (e^-phi f)|| = ||(S + A) f||`.
    pub rhs: f64,
    /// `<[S, A] f, f>`.
    pub commutator: f64,
    /// `2 ||S f|| ||A f||`.
    pub scale: f64,
}

pub fn elliptic_sides(cfg: &CarlemanConfig, f: &LatticeField) -> Result<EllipticSides> {
    cfg.validate()?;
    let bx = *f.bx();
    if bx.d() != cfg.d || bx.h() != cfg.h {
        return Err(precondition("field lattice does not match the configuration"));
    }
    if !f.supported_inside(1) {
        return Err(LabError::Support("field touches the box edge".into()));
    }
    for (i, &v) in f.values().iter().enumerate() {
        if v != 0.0 && !cfg.in_support(&bx.coords(i), ELLIPTIC_CENTER) {
            return Err(LabError::Support(format!(
                "nonzero value outside 1 <= |hj/R + 3 e_1| <= 4 at {:?}",
                &bx.coords(i)[..cfg.d]
            )));
        }
    }
    let fr = Frame::frozen(cfg, &bx, ELLIPTIC_CENTER, 0.0, 0.0);
    let v = f.values();
    let (s, a) = sa_raw(cfg, &bx, v, &fr);
    let (sa, _) = sa_raw(cfg, &bx, &a, &fr);
    let (_, as_) = sa_raw(cfg, &bx, &s, &fr);
    let cell = bx.cell();
    let mut res = 0.0;
    let mut norm = 0.0;
    let mut grad = 0.0;
    let mut comm = 0.0;
    let mut ss = 0.0;
    let mut aa = 0.0;
    for i in 0..bx.sites() {
        res += (s[i] + a[i]).powi(2);
        norm += v[i] * v[i];
        comm += (sa[i] - as_[i]) * v[i];
        ss += s[i] * s[i];
        aa += a[i] * a[i];
        for k in 0..cfg.d {
            let up = bx.neighbor(i, k, true).map_or(0.0, |n| v[n]);
            let dn = bx.neighbor(i, k, false).map_or(0.0, |n| v[n]);
            grad += 0.25 * (up - dn) * (up - dn);
        }
    }
    let (h, r) = (cfg.h, cfg.r);
    let pre = (2.0 * cfg.alpha * h * h / (r * r)).sinh().sqrt() / (h * h);
    let lhs = pre
        * ((2.0 * cfg.alpha * h / (r * (cfg.d as f64).sqrt())).sinh() * (cell * norm).sqrt()
            + 2.0 * (cell * grad).sqrt());
    let out = EllipticSides {
        lhs,
        rhs: (cell * res).sqrt(),
        commutator: cell * comm,
        scale: 2.0 * cell * (ss * aa).sqrt(),
    };
    if [out.lhs, out.rhs, out.commutator, out.scale].iter().any(|x| !x.is_finite()) {
        return Err(LabError::Precondition(
            "elliptic sides overflowed double precision; reduce alpha h / R".into(),
        ));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EllipticAudit {
    pub alpha: f64,
    pub r: f64,
    pub h: f64,
    pub d: usize,
    pub seed: u64,
    /// `max lhs/rhs` over samples (empirical).
    pub c_hat: f64,
    pub ratios: Vec<f64>,
    /// `min <[S, A] f, f> / scale` over samples.
    pub min_commutator: f64,
    /// `min_commutator >= -1e-10`.
    pub commutator_ok: bool,
}

pub fn audit_carleman_elliptic(cfg: &CarlemanConfig, samples: usize, seed: u64) -> Result<EllipticAudit> {
    cfg.validate()?;
    if samples == 0 {
        return Err(precondition("need at least one sample"));
    }
    let mut root = seeded(seed);
    let mut ratios = Vec::with_capacity(samples);
    let mut min_commutator = f64::INFINITY;
    for _ in 0..samples {
        let f = elliptic_field(cfg, root.gen())?;
        let s = elliptic_sides(cfg, &f)?;
        ratios.push(s.lhs / s.rhs);
        let rel = if s.scale > 0.0 { s.commutator / s.scale } else { s.commutator };
        min_commutator = min_commutator.min(rel);
    }
    Ok(EllipticAudit {
        alpha: cfg.alpha,
        r: cfg.r,
        h: cfg.h,
        d: cfg.d,
        seed,
        c_hat: ratios.iter().copied().fold(0.0, f64::max),
        ratios,
        min_commutator,
        commutator_ok: min_commutator >= -1e-10,
    })
}

/// Assumed decay profile of the solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DecayKind {
    /// `e^{-mu0 R^{4/3}}`.
    Continuum,
    /// `e^{-mu0 R^{1+1/beta} ln(R^{1-1/beta})}`, `beta > 3`.
    Intermediate { beta: f64 },
    /// `e^{-(mu0/h) R ln(Rh)}`.
    FixedMesh { h: f64 },
}

impl DecayKind {
    /// Exponent without the constant.
    pub fn rate(&self, r: f64) -> f64 {
        match *self {
            DecayKind::Continuum => r.powf(4.0 / 3.0),
            DecayKind::Intermediate { beta } => {
                r.powf(1.0 + 1.0 / beta) * (1.0 - 1.0 / beta) * r.ln()
            }
            DecayKind::FixedMesh { h } => r / h * (r * h).ln(),
        }
    }

    fn r_min(&self) -> f64 {
        match *self {
            DecayKind::FixedMesh { h } => 1.0 / h,
            _ => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipticGap {
    pub kind: DecayKind,
    pub mu0: f64,
    pub fitted_c: f64,
    pub verdict: Verdict,
    /// Smallest `R` with `(mu0 - C) rate(R) >= log_offset`, when a contradiction is reached.
    pub crossing_r: Option<f64>,
}

/// Compares the assumed decay constant `mu0` with the lower-bound constant `fitted_c`.
/// `log_offset` is the log of the ratio of the two prefactors (0 if unknown).
pub fn landis_elliptic_gap(kind: DecayKind, mu0: f64, fitted_c: f64, log_offset: f64) -> Result<EllipticGap> {
    if !(fitted_c > 0.0) {
        return Err(precondition("fitted constant must be positive"));
    }
    if !(mu0 > 0.0) {
        return Err(domain("mu0 must be positive"));
    }
    match kind {
        DecayKind::Intermediate { beta } if !(beta > 3.0) => {
            return Err(domain("intermediate decay needs beta > 3"))
        }
        DecayKind::FixedMesh { h } if !(h > 0.0) => return Err(domain("h must be positive")),
        _ => {}
    }
    let verdict = if (mu0 - fitted_c).abs() <= 1e-12 * fitted_c {
        Verdict::Boundary
    } else if mu0 > fitted_c {
        Verdict::Contradiction
    } else {
        Verdict::NoContradiction
    };
    let crossing_r = if verdict == Verdict::Contradiction {
        let target = log_offset.max(0.0);
        let g = |r: f64| (mu0 - fitted_c) * kind.rate(r) - target;
        let lo0 = kind.r_min();
        if g(lo0) >= 0.0 {
            Some(lo0)
        } else {
            let mut hi = 2.0 * lo0;
            while g(hi) < 0.0 && hi < 1e15 {
                hi *= 2.0;
            }
            (g(hi) >= 0.0).then(|| {
                let mut lo = lo0;
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if g(mid) >= 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                hi
            })
        }
    } else {
        None
    };
    Ok(EllipticGap {
        kind,
        mu0,
        fitted_c,
        verdict,
        crossing_r,
    })
}
