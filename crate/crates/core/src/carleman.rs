//! Parabolic Carleman machinery for the moving quadratic weight
//! `phi_j(t) = alpha |hj/R + varphi(t) e_1|^2`, plus the regime upper and
//! lower bounds and the contradiction check built on them.
//!
//! With `c = 2 alpha h / R`, `a+_k(j) = c (h (j_k + 1/2) / R + varphi(t) delta_1k)`
//! and `a-_k(j) = a+_k(j - e_k)`, conjugation gives
//! `e^phi (d_t - Delta)(e^-phi f) = d_t f - phi_t f + S f + A f` where
//! `S f_j = h^-2 [2d f_j - sum_k cosh a+_k f_{j+e_k} - sum_k cosh a-_k f_{j-e_k}]`,
//! `A f_j = h^-2 [sum_k sinh a+_k f_{j+e_k} - sum_k sinh a-_k f_{j-e_k}]`.
//! `S~ = S - phi_t` is symmetric and `A~ = A + d_t` antisymmetric.

use crate::besselkit::{log_bessel_i, log_bessel_i_ladder, log_bessel_k_real, log_k_ratio_ladder, BesselEvalPolicy};
use crate::error::{domain, precondition, LabError, Result};
use crate::fit::{ols, power_profile_fit};
use crate::lattice::{LatticeBox, LatticeField, Site};
use crate::logscalar::LogScalar;
use crate::rng::seeded;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::OnceLock;

/// Regime constant of the upper-bound hypotheses.
pub const REGIME_M: f64 = 100.0;

/// Relative change between time grids `n` and `2n` above which pieces are unresolved.
pub const REFINEMENT_TOL: f64 = 1e-4;

/// Smooth step `s(x) = psi(x) / (psi(x) + psi(1 - x))` with `psi(x) = e^{-1/x}`,
/// returned with its first two derivatives.
pub(crate) fn smooth_step(x: f64) -> (f64, f64, f64) {
    if x <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    if x >= 1.0 {
        return (1.0, 0.0, 0.0);
    }
    let psi = |y: f64| {
        let p = (-1.0 / y).exp();
        if p == 0.0 {
            (0.0, 0.0, 0.0)
        } else {
            let y2 = y * y;
            (p, p / y2, p * (1.0 / (y2 * y2) - 2.0 / (y2 * y)))
        }
    };
    let (n0, n1, n2) = psi(x);
    let (b0, b1, b2) = psi(1.0 - x);
    let d0 = n0 + b0;
    let d1 = n1 - b1;
    let d2 = n2 + b2;
    let num = n1 * d0 - n0 * d1;
    let s = n0 / d0;
    let s1 = num / (d0 * d0);
    let s2 = (n2 * d0 - n0 * d2) / (d0 * d0) - 2.0 * d1 * num / (d0 * d0 * d0);
    (s, s1, s2)
}

/// Time profile of the moving center: 0 on `[0, 1/4] u [3/4, 1]`, 3 on
/// `[3/8, 5/8]`, smooth ramps in between.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeProfile {
    #[default]
    Mollified,
}

impl TimeProfile {
    /// Value, first and second derivative at `t`.
    pub fn eval(&self, t: f64) -> (f64, f64, f64) {
        if t <= 0.25 || t >= 0.75 {
            (0.0, 0.0, 0.0)
        } else if t < 0.375 {
            let (s, s1, s2) = smooth_step(8.0 * (t - 0.25));
            (3.0 * s, 24.0 * s1, 192.0 * s2)
        } else if t <= 0.625 {
            (3.0, 0.0, 0.0)
        } else {
            let (s, s1, s2) = smooth_step(8.0 * (0.75 - t));
            (3.0 * s, -24.0 * s1, 192.0 * s2)
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        self.eval(t).0
    }

    /// `(sup |varphi'|, sup |varphi''|)`, sampled once on a fine grid of the ramp.
    pub fn sup_derivatives(&self) -> (f64, f64) {
        static SUPS: OnceLock<(f64, f64)> = OnceLock::new();
        *SUPS.get_or_init(|| {
            let n = 1 << 18;
            (1..n).fold((0.0f64, 0.0f64), |(m1, m2), i| {
                let (_, s1, s2) = smooth_step(i as f64 / n as f64);
                (m1.max(24.0 * s1.abs()), m2.max(192.0 * s2.abs()))
            })
        })
    }
}

fn default_m() -> f64 {
    REGIME_M
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CarlemanConfig {
    pub alpha: f64,
    pub r: f64,
    pub h: f64,
    pub d: usize,
    /// Slack of the large-parameter condition; `None` means `2 sqrt(d) h / R`.
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub profile: TimeProfile,
    #[serde(default = "default_m")]
    pub m: f64,
}

impl CarlemanConfig {
    pub fn new(alpha: f64, r: f64, h: f64, d: usize) -> Result<Self> {
        let cfg = CarlemanConfig {
            alpha,
            r,
            h,
            d,
            epsilon: None,
            profile: TimeProfile::Mollified,
            m: REGIME_M,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r >= 1.0 && self.r.is_finite()) {
            return Err(domain("R must be at least 1"));
        }
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(domain("h must be positive"));
        }
        if !(1..=3).contains(&self.d) {
            return Err(domain("d must be 1, 2 or 3"));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(domain("alpha must be finite and nonnegative"));
        }
        if !(self.m > 0.0) {
            return Err(domain("M must be positive"));
        }
        let eps = self.epsilon();
        if !(eps > 0.0 && eps < 2.0) || self.h / self.r >= eps / (self.d as f64).sqrt() {
            return Err(domain("epsilon must lie in (0, 2) with h/R < epsilon/sqrt(d)"));
        }
        Ok(())
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
            .unwrap_or(2.0 * (self.d as f64).sqrt() * self.h / self.r)
    }

    /// `alpha h / R`, the quantity that selects the clause.
    pub fn ratio(&self) -> f64 {
        self.alpha * self.h / self.r
    }

    pub(crate) fn shift(&self, j: &Site, vphi: f64) -> [f64; 3] {
        let mut x = [0.0; 3];
        for k in 0..self.d {
            x[k] = self.h * j[k] as f64 / self.r;
        }
        x[0] += vphi;
        x
    }

    pub(crate) fn in_support(&self, j: &Site, vphi: f64) -> bool {
        let x = self.shift(j, vphi);
        let n2: f64 = x.iter().map(|v| v * v).sum();
        (1.0..=16.0).contains(&n2)
    }

    /// Smallest box holding every site of `{1 <= |hj/R + varphi e_1| <= 4}` plus two layers.
    pub fn support_box(&self) -> Result<LatticeBox> {
        LatticeBox::new(self.d, self.h, (7.0 * self.r / self.h).ceil() as usize + 2)
    }
}

/// `alpha |hj/R + varphi(t) e_1|^2`.
pub fn carleman_weight(cfg: &CarlemanConfig, j: &[i64], t: f64) -> Result<f64> {
    cfg.validate()?;
    if !(0.0..=1.0).contains(&t) {
        return Err(domain("t must lie in [0, 1]"));
    }
    if j.len() != cfg.d {
        return Err(precondition("site dimension does not match d"));
    }
    let mut site = [0i64; 3];
    site[..cfg.d].copy_from_slice(j);
    let x = cfg.shift(&site, cfg.profile.value(t));
    Ok(cfg.alpha * x.iter().map(|v| v * v).sum::<f64>())
}

/// Time-frozen coefficient data. `ch[k][m + n]`, `sh[k][m + n]` hold `cosh`, `sinh`
/// of `c (h (m + 1/2)/R + varphi delta_1k)` for `m = -n-1..=n`, `n` the box extent.
pub(crate) struct Frame {
    vphi: f64,
    dphi: f64,
    ddphi: f64,
    n: i64,
    ch: Vec<Vec<f64>>,
    sh: Vec<Vec<f64>>,
}

impl Frame {
    fn at(cfg: &CarlemanConfig, bx: &LatticeBox, t: f64) -> Self {
        let (vphi, dphi, ddphi) = cfg.profile.eval(t);
        Self::frozen(cfg, bx, vphi, dphi, ddphi)
    }

    /// Coefficients for a fixed center `vphi e_1`.
    pub(crate) fn frozen(cfg: &CarlemanConfig, bx: &LatticeBox, vphi: f64, dphi: f64, ddphi: f64) -> Self {
        let n = bx.extent() as i64;
        let c = 2.0 * cfg.alpha * cfg.h / cfg.r;
        let mut ch = Vec::with_capacity(cfg.d);
        let mut sh = Vec::with_capacity(cfg.d);
        for k in 0..cfg.d {
            let off = if k == 0 { vphi } else { 0.0 };
            let args: Vec<f64> = (-n - 1..=n)
                .map(|m| c * (cfg.h * (m as f64 + 0.5) / cfg.r + off))
                .collect();
            ch.push(args.iter().map(|a| a.cosh()).collect());
            sh.push(args.iter().map(|a| a.sinh()).collect());
        }
        Frame {
            vphi,
            dphi,
            ddphi,
            n,
            ch,
            sh,
        }
    }

    /// Table positions of `a+_k` and `a-_k` at coordinate `m`.
    fn slots(&self, m: i64) -> (usize, usize) {
        ((m + self.n + 1) as usize, (m + self.n) as usize)
    }
}

/// `(S f, A f)` at a frozen time, zero extension outside the box.
pub(crate) fn sa_raw(cfg: &CarlemanConfig, bx: &LatticeBox, v: &[f64], fr: &Frame) -> (Vec<f64>, Vec<f64>) {
    let inv_h2 = 1.0 / (cfg.h * cfg.h);
    let mut s = vec![0.0; v.len()];
    let mut a = vec![0.0; v.len()];
    for i in 0..v.len() {
        let j = bx.coords(i);
        let mut si = 2.0 * cfg.d as f64 * v[i];
        let mut ai = 0.0;
        for k in 0..cfg.d {
            let (p, m) = fr.slots(j[k]);
            let up = bx.neighbor(i, k, true).map_or(0.0, |n| v[n]);
            let dn = bx.neighbor(i, k, false).map_or(0.0, |n| v[n]);
            si -= fr.ch[k][p] * up + fr.ch[k][m] * dn;
            ai += fr.sh[k][p] * up - fr.sh[k][m] * dn;
        }
        s[i] = si * inv_h2;
        a[i] = ai * inv_h2;
    }
    (s, a)
}

/// `phi_t` and `phi_tt` on every site.
fn phi_time(cfg: &CarlemanConfig, bx: &LatticeBox, fr: &Frame) -> (Vec<f64>, Vec<f64>) {
    (0..bx.sites())
        .map(|i| {
            let x1 = cfg.h * bx.coords(i)[0] as f64 / cfg.r + fr.vphi;
            (
                2.0 * cfg.alpha * x1 * fr.dphi,
                2.0 * cfg.alpha * (fr.dphi * fr.dphi + x1 * fr.ddphi),
            )
        })
        .unzip()
}

fn check_support(cfg: &CarlemanConfig, f: &LatticeField, t: f64) -> Result<()> {
    let bx = f.bx();
    if bx.d() != cfg.d || bx.h() != cfg.h {
        return Err(precondition("field lattice does not match the configuration"));
    }
    if !f.supported_inside(1) {
        return Err(LabError::Support("field touches the box edge".into()));
    }
    let vphi = cfg.profile.value(t);
    for (i, &v) in f.values().iter().enumerate() {
        if v != 0.0 && !cfg.in_support(&bx.coords(i), vphi) {
            return Err(LabError::Support(format!(
                "nonzero value outside 1 <= |hj/R + varphi e_1| <= 4 at {:?}, t = {t}",
                &bx.coords(i)[..cfg.d]
            )));
        }
    }
    Ok(())
}

/// The pieces of `e^phi (d_t - Delta)(e^-phi f)` that act at a frozen time.
#[derive(Debug, Clone)]
pub struct ConjugatedOps {
    /// `S f - phi_t f`.
    pub s_tilde: LatticeField,
    /// `A f` (the `d_t` part of `A~` needs the time direction).
    pub a: LatticeField,
    /// `phi_t f`.
    pub phi_t_f: LatticeField,
}

pub fn conjugated_ops(cfg: &CarlemanConfig, f: &LatticeField, t: f64) -> Result<ConjugatedOps> {
    cfg.validate()?;
    if !(0.0..=1.0).contains(&t) {
        return Err(domain("t must lie in [0, 1]"));
    }
    check_support(cfg, f, t)?;
    let bx = *f.bx();
    let fr = Frame::at(cfg, &bx, t);
    let (s, a) = sa_raw(cfg, &bx, f.values(), &fr);
    let (pt, _) = phi_time(cfg, &bx, &fr);
    let ptf: Vec<f64> = pt.iter().zip(f.values()).map(|(p, v)| p * v).collect();
    let st: Vec<f64> = s.iter().zip(&ptf).map(|(s, p)| s - p).collect();
    Ok(ConjugatedOps {
        s_tilde: LatticeField::new(bx, st)?,
        a: LatticeField::new(bx, a)?,
        phi_t_f: LatticeField::new(bx, ptf)?,
    })
}

/// A field sampled on the uniform grid `t_i = i/n`, `i = 0..=n`.
#[derive(Debug, Clone)]
pub struct SpaceTimeField {
    bx: LatticeBox,
    n: usize,
    slices: Vec<Vec<f64>>,
}

impl SpaceTimeField {
    pub fn sample(bx: LatticeBox, n: usize, f: impl Fn(&Site, f64) -> f64 + Sync) -> Result<Self> {
        if n < 16 {
            return Err(precondition("need at least 16 time intervals"));
        }
        let slices = (0..=n)
            .into_par_iter()
            .map(|i| {
                let t = i as f64 / n as f64;
                (0..bx.sites()).map(|s| f(&bx.coords(s), t)).collect()
            })
            .collect();
        Ok(SpaceTimeField { bx, n, slices })
    }

    pub fn bx(&self) -> &LatticeBox {
        &self.bx
    }

    pub fn intervals(&self) -> usize {
        self.n
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 / self.n as f64
    }

    pub fn slice(&self, i: usize) -> LatticeField {
        LatticeField::new(self.bx, self.slices[i].clone()).expect("sized")
    }

    /// `h^d int_0^1 sum_j f_j^2 dt` by the trapezoid rule.
    pub fn norm_sq(&self) -> f64 {
        let end = |v: &Vec<f64>| v.iter().map(|x| x * x).sum::<f64>();
        let inner: f64 = self.slices[1..self.n].iter().map(end).sum();
        let ends = 0.5 * (end(&self.slices[0]) + end(&self.slices[self.n]));
        self.bx.cell() * self.dt() * (inner + ends)
    }

    fn check_ends(&self) -> Result<()> {
        let n = self.n;
        for i in [0, 1, n - 1, n] {
            if self.slices[i].iter().any(|&v| v != 0.0) {
                return Err(LabError::Support(
                    "field must vanish on the first and last two time samples".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Fourth-order centered difference at sample `i`, zero beyond the grid.
fn time_derivative(slices: &[Vec<f64>], i: usize, dt: f64) -> Vec<f64> {
    let n = slices.len();
    let get = |k: isize| -> Option<&Vec<f64>> {
        if k < 0 || k as usize >= n {
            None
        } else {
            Some(&slices[k as usize])
        }
    };
    let i = i as isize;
    let w = 1.0 / (12.0 * dt);
    let mut out = vec![0.0; slices[0].len()];
    for (k, c) in [(i - 2, 1.0), (i - 1, -8.0), (i + 1, 8.0), (i + 2, -1.0)] {
        if let Some(s) = get(k) {
            for (o, v) in out.iter_mut().zip(s) {
                *o += c * w * v;
            }
        }
    }
    out
}

/// Seeded test field `b(t) eta(|x|) (c0_j + c1_j sin 2 pi t + c2_j cos 2 pi t)` with
/// `x = hj/R + varphi(t) e_1`. It is smooth in time, vanishes outside the time
/// window and outside `1 < |x| < 4`, and has unit norm up to quadrature error.
#[derive(Debug, Clone)]
pub struct SyntheticField {
    cfg: CarlemanConfig,
    bx: LatticeBox,
    coeffs: Vec<[f64; 3]>,
    window: (f64, f64),
    scale: f64,
}

impl SyntheticField {
    pub fn random(cfg: &CarlemanConfig, seed: u64, window: (f64, f64)) -> Result<Self> {
        cfg.validate()?;
        let (w0, w1) = window;
        if !(0.0 < w0 && w0 < w1 && w1 < 1.0) {
            return Err(domain("time window must satisfy 0 < t0 < t1 < 1"));
        }
        let bx = cfg.support_box()?;
        let mut rng = seeded(seed);
        let coeffs = (0..bx.sites())
            .map(|_| {
                [
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                ]
            })
            .collect();
        let mut field = SyntheticField {
            cfg: *cfg,
            bx,
            coeffs,
            window,
            scale: 1.0,
        };
        let norm = field.sample(512)?.norm_sq().sqrt();
        if !(norm > 0.0) {
            return Err(LabError::Degenerate("synthetic field vanishes".into()));
        }
        field.scale = 1.0 / norm;
        Ok(field)
    }

    pub fn bx(&self) -> &LatticeBox {
        &self.bx
    }

    fn value(&self, idx: usize, t: f64) -> f64 {
        let (w0, w1) = self.window;
        let ramp = 0.1 * (w1 - w0);
        let b = smooth_step((t - w0) / ramp).0 * smooth_step((w1 - t) / ramp).0;
        if b == 0.0 {
            return 0.0;
        }
        let x = self.cfg.shift(&self.bx.coords(idx), self.cfg.profile.value(t));
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let eta = smooth_step(r - 1.0).0 * smooth_step(4.0 - r).0;
        if eta == 0.0 {
            return 0.0;
        }
        let c = &self.coeffs[idx];
        let wt = 2.0 * std::f64::consts::PI * t;
        self.scale * b * eta * (c[0] + c[1] * wt.sin() + c[2] * wt.cos())
    }

    pub fn sample(&self, n: usize) -> Result<SpaceTimeField> {
        let bx = self.bx;
        SpaceTimeField::sample(bx, n, |j, t| {
            let idx = bx.index_of(j).expect("site in box");
            self.value(idx, t)
        })
    }
}

/// `<[S~, A~] f, f>` split into its four pieces plus a direct evaluation.
///
/// * `i`: `<[-phi_t, d_t] f, f> = <phi_tt f, f>`.
/// * `ii`: `<[-phi_t, A] f, f>` applied literally.
/// * `iii`: `<[S, d_t] f, f> = 2 <S f, d_t f>` with the difference quotient in time.
/// * `iv`: the displayed form `4 h^{d-4} sinh(2 alpha h^2/R^2) int sum [sum_k sinh^2(c x_k) f_j^2 + |(f_{j+e_k} - f_{j-e_k})/2|^2]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommutatorPieces {
    pub i: f64,
    pub ii: f64,
    pub iii: f64,
    pub iv: f64,
    /// `(4 alpha h / R) h^{d-2} int varphi' sum_j sinh(a+_1(j)) f_j f_{j+e_1} dt`.
    pub cross_reduced: f64,
    /// `<[S, A] f, f>` applied literally.
    pub iv_direct: f64,
    pub total: f64,
    /// `<S~(A~ f) - A~(S~ f), f>` with `d_t` as a difference quotient.
    pub direct: f64,
    pub intervals: usize,
}

impl CommutatorPieces {
    pub fn scale(&self) -> f64 {
        self.i.abs() + self.ii.abs() + self.iii.abs() + self.iv.abs()
    }

    pub fn ratio_iii_ii(&self) -> f64 {
        self.iii / self.ii
    }

    /// `|direct - total| / scale`.
    pub fn direct_gap(&self) -> f64 {
        let s = self.scale();
        if s > 0.0 {
            (self.direct - self.total).abs() / s
        } else {
            (self.direct - self.total).abs()
        }
    }
}

pub fn commutator_pieces(cfg: &CarlemanConfig, f: &SpaceTimeField) -> Result<CommutatorPieces> {
    cfg.validate()?;
    f.check_ends()?;
    for i in 0..=f.n {
        let slice = f.slice(i);
        check_support(cfg, &slice, f.time(i))?;
    }
    let bx = f.bx;
    let dt = f.dt();
    let cell = bx.cell();
    let h = cfg.h;
    let c = 2.0 * cfg.alpha * h / cfg.r;
    let sh = (2.0 * cfg.alpha * h * h / (cfg.r * cfg.r)).sinh();
    let frames: Vec<Frame> = (0..=f.n)
        .into_par_iter()
        .map(|i| Frame::at(cfg, &bx, f.time(i)))
        .collect();
    let s_tilde: Vec<Vec<f64>> = (0..=f.n)
        .into_par_iter()
        .map(|i| {
            let (s, _) = sa_raw(cfg, &bx, &f.slices[i], &frames[i]);
            let (pt, _) = phi_time(cfg, &bx, &frames[i]);
            s.iter()
                .zip(&pt)
                .zip(&f.slices[i])
                .map(|((s, p), v)| s - p * v)
                .collect()
        })
        .collect();
    let dens: Vec<[f64; 7]> = (0..=f.n)
        .into_par_iter()
        .map(|i| {
            let v = &f.slices[i];
            if v.iter().all(|&x| x == 0.0) {
                return [0.0; 7];
            }
            let fr = &frames[i];
            let (pt, ptt) = phi_time(cfg, &bx, fr);
            let (sf, af) = sa_raw(cfg, &bx, v, fr);
            let dot = |a: &[f64], b: &[f64]| cell * a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
            let i_d = cell * v.iter().zip(&ptt).map(|(x, p)| p * x * x).sum::<f64>();
            let w: Vec<f64> = pt.iter().zip(v).map(|(p, x)| p * x).collect();
            let (_, aw) = sa_raw(cfg, &bx, &w, fr);
            let comm2: Vec<f64> = aw.iter().zip(&af).zip(&pt).map(|((a, b), p)| a - p * b).collect();
            let ii_d = dot(&comm2, v);
            let df = time_derivative(&f.slices, i, dt);
            let iii_d = 2.0 * dot(&sf, &df);
            let (saf, _) = sa_raw(cfg, &bx, &af, fr);
            let (_, asf) = sa_raw(cfg, &bx, &sf, fr);
            let ivd: Vec<f64> = saf.iter().zip(&asf).map(|(a, b)| a - b).collect();
            let iv_direct = dot(&ivd, v);
            let mut iv_acc = 0.0;
            let mut cross = 0.0;
            for idx in 0..bx.sites() {
                let j = bx.coords(idx);
                let x = cfg.shift(&j, fr.vphi);
                for k in 0..cfg.d {
                    let up = bx.neighbor(idx, k, true).map_or(0.0, |n| v[n]);
                    let dn = bx.neighbor(idx, k, false).map_or(0.0, |n| v[n]);
                    let q = 0.5 * (up - dn);
                    iv_acc += (c * x[k]).sinh().powi(2) * v[idx] * v[idx] + q * q;
                }
                let up = bx.neighbor(idx, 0, true).map_or(0.0, |n| v[n]);
                cross += fr.sh[0][fr.slots(j[0]).0] * v[idx] * up;
            }
            let iv_d = 4.0 * cell * sh * iv_acc / h.powi(4);
            let cross_d = cell * 4.0 * cfg.alpha / (h * cfg.r) * fr.dphi * cross;
            // direct: S~(A f + d_t f) - A(S~ f) - d_t(S~ f)
            let st = &s_tilde[i];
            let g: Vec<f64> = af.iter().zip(&df).map(|(a, b)| a + b).collect();
            let (sg, _) = sa_raw(cfg, &bx, &g, fr);
            let stg: Vec<f64> = sg.iter().zip(&pt).zip(&g).map(|((s, p), x)| s - p * x).collect();
            let (_, ast) = sa_raw(cfg, &bx, st, fr);
            let dst = time_derivative(&s_tilde, i, dt);
            let dir: Vec<f64> = stg
                .iter()
                .zip(&ast)
                .zip(&dst)
                .map(|((a, b), c)| a - b - c)
                .collect();
            [i_d, ii_d, iii_d, iv_d, cross_d, iv_direct, dot(&dir, v)]
        })
        .collect();
    // integrands vanish at both ends, so the trapezoid rule is a plain sum
    let mut acc = [0.0; 7];
    for row in &dens {
        for (a, v) in acc.iter_mut().zip(row) {
            *a += dt * v;
        }
    }
    let [i, ii, iii, iv, cross_reduced, iv_direct, direct] = acc;
    if acc.iter().any(|v| !v.is_finite()) {
        return Err(LabError::Precondition(
            "commutator overflowed double precision; reduce alpha h / R".into(),
        ));
    }
    Ok(CommutatorPieces {
        i,
        ii,
        iii,
        iv,
        cross_reduced,
        iv_direct,
        total: i + ii + iii + iv,
        direct,
        intervals: f.n,
    })
}

/// Pieces on grids `n` and `2n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefinedPieces {
    pub coarse: CommutatorPieces,
    pub fine: CommutatorPieces,
    /// Largest change of any piece, relative to the fine `scale()`.
    pub max_change: f64,
}

/// Evaluates the pieces at `n` and `2n` intervals; errors when refinement moves
/// any piece by more than [`REFINEMENT_TOL`].
pub fn commutator_pieces_refined(
    cfg: &CarlemanConfig,
    f: &SyntheticField,
    n: usize,
) -> Result<RefinedPieces> {
    let coarse = commutator_pieces(cfg, &f.sample(n)?)?;
    let fine = commutator_pieces(cfg, &f.sample(2 * n)?)?;
    let s = fine.scale().max(f64::MIN_POSITIVE);
    let pairs = [
        (coarse.i, fine.i),
        (coarse.ii, fine.ii),
        (coarse.iii, fine.iii),
        (coarse.iv, fine.iv),
        (coarse.total, fine.total),
        (coarse.direct, fine.direct),
    ];
    let max_change = pairs
        .iter()
        .map(|(a, b)| (a - b).abs() / s)
        .fold(0.0, f64::max);
    if max_change > REFINEMENT_TOL {
        return Err(LabError::Resolution(format!(
            "refinement from {n} to {} intervals changed a piece by {max_change:.3e}",
            2 * n
        )));
    }
    Ok(RefinedPieces {
        coarse,
        fine,
        max_change,
    })
}

/// Which clause of the parameter conditions applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Clause {
    /// `alpha h / R <= 1/10`.
    Small,
    /// `alpha h / R >= sqrt(d)/2`.
    Large,
    /// Between the two clauses; nothing is claimed.
    NoClaim,
}

/// Explicit constants of the conditions, from the absorption inequalities.
///
/// * `c_phi = 1 / (12 ||varphi''||)`: absorbing piece (I) needs
///   `8 alpha ||varphi''|| <= (2/3) h^-4 sinh(2 alpha h^2/R^2) sinh^2(2 alpha h/(R sqrt d))`.
/// * `c_small = (27 d ||varphi'|| / 16) sinh(0.9)/0.9`: absorbing the cross term when
///   `alpha h/R <= 1/10`, using `sinh(9y) <= 9y sinh(0.9)/0.9` and `sinh y >= y`.
/// * `k_large = 3 ||varphi'|| / (1 - e^-2)^2`: absorbing the cross term when
///   `alpha h/R >= sqrt(d)/2`, using `sinh^2(2A) >= e^{4A}(1 - e^-2)^2/4` for
///   `A = alpha h/(R sqrt d) >= 1/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionConstants {
    pub c_phi: f64,
    pub c_small: f64,
    pub k_large: f64,
}

impl ConditionConstants {
    pub fn new(profile: &TimeProfile, d: usize) -> Self {
        let (d1, d2) = profile.sup_derivatives();
        ConditionConstants {
            c_phi: 1.0 / (12.0 * d2),
            c_small: 27.0 * d as f64 * d1 / 16.0 * 0.9f64.sinh() / 0.9,
            k_large: 3.0 * d1 / (1.0 - (-2.0f64).exp()).powi(2),
        }
    }
}

fn ln_sinh(x: f64) -> f64 {
    if x <= 0.0 {
        f64::NEG_INFINITY
    } else if x > 20.0 {
        x - std::f64::consts::LN_2 + (-(-2.0 * x).exp()).ln_1p()
    } else {
        x.sinh().ln()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub alpha: f64,
    pub r: f64,
    pub h: f64,
    pub d: usize,
    pub epsilon: f64,
    /// `alpha h / R`.
    pub ratio: f64,
    pub clause: Clause,
    pub constants: ConditionConstants,
    /// `ln[c_phi h^-4 sinh(2 alpha h^2/R^2) sinh^2(2 alpha h/(R sqrt d))]`, the log of the cap on `alpha`.
    pub log_alpha_cap: f64,
    pub alpha_cap_ok: bool,
    /// `alpha >= c_small R^2`, evaluated in the small clause only.
    pub small_ok: Option<bool>,
    /// `ln[(Rh)^-1 e^{(2 - eps) alpha h/(R sqrt d)}]`.
    pub log_large_value: f64,
    /// `log_large_value >= ln k_large`, evaluated in the large clause only.
    pub large_ok: Option<bool>,
    pub passed: bool,
}

pub fn check_carleman_conditions(cfg: &CarlemanConfig) -> Result<ConditionReport> {
    cfg.validate()?;
    let k = ConditionConstants::new(&cfg.profile, cfg.d);
    let (alpha, r, h) = (cfg.alpha, cfg.r, cfg.h);
    let sd = (cfg.d as f64).sqrt();
    let eps = cfg.epsilon();
    let ratio = cfg.ratio();
    let clause = if ratio <= 0.1 {
        Clause::Small
    } else if ratio >= sd / 2.0 {
        Clause::Large
    } else {
        Clause::NoClaim
    };
    let log_alpha_cap = k.c_phi.ln() - 4.0 * h.ln()
        + ln_sinh(2.0 * alpha * h * h / (r * r))
        + 2.0 * ln_sinh(2.0 * alpha * h / (r * sd));
    let alpha_cap_ok = alpha == 0.0 || alpha.ln() <= log_alpha_cap;
    let log_large_value = -(r * h).ln() + (2.0 - eps) * alpha * h / (r * sd);
    let small_ok = (clause == Clause::Small).then(|| alpha >= k.c_small * r * r);
    let large_ok = (clause == Clause::Large).then(|| log_large_value >= k.k_large.ln());
    let passed = alpha_cap_ok && (small_ok == Some(true) || large_ok == Some(true));
    Ok(ConditionReport {
        alpha,
        r,
        h,
        d: cfg.d,
        epsilon: eps,
        ratio,
        clause,
        constants: k,
        log_alpha_cap,
        alpha_cap_ok,
        small_ok,
        log_large_value,
        large_ok,
        passed,
    })
}

/// Both sides of the Carleman inequality for one sampled field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CarlemanSides {
    pub lhs: f64,
    pub rhs: f64,
}

/// `lhs = h^-2 sqrt(sinh(2 alpha h^2/R^2)) [sinh(2 alpha h/(R sqrt d)) ||f|| + 2 ||(f_{j+e_k} - f_{j-e_k})/2||]`,
/// `rhs = ||d_t f + S~ f + A f||`.
pub fn carleman_sides(cfg: &CarlemanConfig, f: &SpaceTimeField) -> Result<CarlemanSides> {
    cfg.validate()?;
    f.check_ends()?;
    for i in 0..=f.n {
        check_support(cfg, &f.slice(i), f.time(i))?;
    }
    let bx = f.bx;
    let dt = f.dt();
    let rows: Vec<[f64; 3]> = (0..=f.n)
        .into_par_iter()
        .map(|i| {
            let v = &f.slices[i];
            let fr = Frame::at(cfg, &bx, f.time(i));
            let (s, a) = sa_raw(cfg, &bx, v, &fr);
            let (pt, _) = phi_time(cfg, &bx, &fr);
            let df = time_derivative(&f.slices, i, dt);
            let mut res = 0.0;
            let mut norm = 0.0;
            let mut grad = 0.0;
            for idx in 0..bx.sites() {
                let e = df[idx] + s[idx] - pt[idx] * v[idx] + a[idx];
                res += e * e;
                norm += v[idx] * v[idx];
                for k in 0..cfg.d {
                    let up = bx.neighbor(idx, k, true).map_or(0.0, |n| v[n]);
                    let dn = bx.neighbor(idx, k, false).map_or(0.0, |n| v[n]);
                    grad += 0.25 * (up - dn) * (up - dn);
                }
            }
            [res, norm, grad]
        })
        .collect();
    let mut acc = [0.0; 3];
    for row in &rows {
        for (a, v) in acc.iter_mut().zip(row) {
            *a += dt * bx.cell() * v;
        }
    }
    let (h, r) = (cfg.h, cfg.r);
    let pre = (2.0 * cfg.alpha * h * h / (r * r)).sinh().sqrt() / (h * h);
    let lhs = pre
        * ((2.0 * cfg.alpha * h / (r * (cfg.d as f64).sqrt())).sinh() * acc[1].sqrt()
            + 2.0 * acc[2].sqrt());
    let rhs = acc[0].sqrt();
    if !lhs.is_finite() || !rhs.is_finite() {
        return Err(LabError::Precondition(
            "Carleman sides overflowed double precision; reduce alpha h / R".into(),
        ));
    }
    Ok(CarlemanSides { lhs, rhs })
}

/// Empirical constant of the Carleman inequality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CarlemanAudit {
    pub conditions: ConditionReport,
    pub seed: u64,
    pub intervals: usize,
    /// `max lhs/rhs` over samples on `intervals` time steps (empirical).
    pub c_hat: f64,
    /// The same on `2 * intervals` time steps.
    pub c_hat_refined: f64,
    pub ratios: Vec<f64>,
    /// Both estimates finite and within a factor 2 of each other.
    pub stable: bool,
}

/// Samples `samples` unit-norm fields from `seed` and returns `max lhs/rhs`.
pub fn audit_carleman_inequality(
    cfg: &CarlemanConfig,
    samples: usize,
    seed: u64,
    intervals: usize,
) -> Result<CarlemanAudit> {
    let conditions = check_carleman_conditions(cfg)?;
    if !conditions.passed {
        return Err(LabError::Condition(format!(
            "alpha = {}, R = {}, h = {} (clause {:?})",
            cfg.alpha, cfg.r, cfg.h, conditions.clause
        )));
    }
    if samples == 0 {
        return Err(precondition("need at least one sample"));
    }
    let mut root = seeded(seed);
    let seeds: Vec<u64> = (0..samples).map(|_| root.gen()).collect();
    let mut ratios = Vec::with_capacity(samples);
    let mut c_hat_refined = 0.0f64;
    for &s in &seeds {
        let f = SyntheticField::random(cfg, s, (0.02, 0.98))?;
        let a = carleman_sides(cfg, &f.sample(intervals)?)?;
        let b = carleman_sides(cfg, &f.sample(2 * intervals)?)?;
        ratios.push(a.lhs / a.rhs);
        c_hat_refined = c_hat_refined.max(b.lhs / b.rhs);
    }
    let c_hat = ratios.iter().copied().fold(0.0, f64::max);
    let stable = c_hat.is_finite()
        && c_hat_refined.is_finite()
        && c_hat <= 2.0 * c_hat_refined
        && c_hat_refined <= 2.0 * c_hat;
    Ok(CarlemanAudit {
        conditions,
        seed,
        intervals,
        c_hat,
        c_hat_refined,
        ratios,
        stable,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `Rh <= 1`.
    CloseToContinuum,
    /// `Rh > 1`.
    PurelyDiscrete,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeParams {
    pub r: f64,
    pub h: f64,
    pub rh: f64,
    pub regime: Regime,
    /// `beta` with `R = h^-beta`, when `R > 1` and `h < 1`.
    pub beta: Option<f64>,
}

impl RegimeParams {
    pub fn new(r: f64, h: f64) -> Result<Self> {
        if !(r > 0.0 && h > 0.0 && r.is_finite() && h.is_finite()) {
            return Err(domain("R and h must be positive"));
        }
        let rh = r * h;
        Ok(RegimeParams {
            r,
            h,
            rh,
            regime: if rh <= 1.0 {
                Regime::CloseToContinuum
            } else {
                Regime::PurelyDiscrete
            },
            beta: (r > 1.0 && h < 1.0).then(|| -r.ln() / h.ln()),
        })
    }
}

/// Constants of [`alpha_select`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaConstants {
    /// `alpha = c R^2` for `Rh <= 1`.
    pub c: f64,
    /// `alpha = c_tilde (R/h) ln(Rh)` for `Rh > 1`.
    pub c_tilde: f64,
}

/// Dyadic candidates `2^-4, ..., 2^12` for the search.
pub fn dyadic_grid() -> Vec<f64> {
    (-4..=12).map(|k| 2f64.powi(k)).collect()
}

/// Reference `(R, h)` pairs for `c`: `R in {2, 5, 10, 20}`, `Rh in {0.1, 0.25, 0.5, 1}`.
pub fn reference_close() -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for r in [2.0, 5.0, 10.0, 20.0] {
        for rh in [0.1, 0.25, 0.5, 1.0] {
            out.push((r, rh / r));
        }
    }
    out
}

/// Reference `(R, h)` pairs for `c_tilde`: `R in {10, 20, 40}`, `Rh in {2, 4, 8, 16}`.
pub fn reference_discrete() -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for r in [10.0, 20.0, 40.0] {
        for rh in [2.0, 4.0, 8.0, 16.0] {
            out.push((r, rh / r));
        }
    }
    out
}

fn passes(alpha: f64, r: f64, h: f64, d: usize) -> bool {
    CarlemanConfig::new(alpha, r, h, d)
        .and_then(|c| check_carleman_conditions(&c))
        .map(|rep| rep.passed)
        .unwrap_or(false)
}

/// Smallest dyadic `c` and `c_tilde` passing the conditions on every reference pair.
pub fn search_alpha_constants(d: usize) -> Result<AlphaConstants> {
    let grid = dyadic_grid();
    let find = |refs: Vec<(f64, f64)>, alpha: &dyn Fn(f64, f64, f64) -> f64| {
        grid.iter()
            .copied()
            .find(|&c| refs.iter().all(|&(r, h)| passes(alpha(c, r, h), r, h, d)))
    };
    let c = find(reference_close(), &|c, r, _| c * r * r)
        .ok_or_else(|| LabError::Condition("no dyadic c passes the close-to-continuum references".into()))?;
    let c_tilde = find(reference_discrete(), &|c, r, h| c * r / h * (r * h).ln())
        .ok_or_else(|| LabError::Condition("no dyadic c_tilde passes the discrete references".into()))?;
    Ok(AlphaConstants { c, c_tilde })
}

/// Cached result of [`search_alpha_constants`] for `d = 1, 2, 3`.
pub fn alpha_constants(d: usize) -> Result<AlphaConstants> {
    static CACHE: [OnceLock<std::result::Result<AlphaConstants, LabError>>; 3] =
        [OnceLock::new(), OnceLock::new(), OnceLock::new()];
    if !(1..=3).contains(&d) {
        return Err(domain("d must be 1, 2 or 3"));
    }
    CACHE[d - 1].get_or_init(|| search_alpha_constants(d)).clone()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaChoice {
    pub alpha: f64,
    pub regime: RegimeParams,
    pub constant: f64,
}

/// `alpha = c R^2` when `Rh <= 1` and `c_tilde (R/h) ln(Rh)` otherwise.
pub fn alpha_select(r: f64, h: f64, d: usize) -> Result<AlphaChoice> {
    if !(r >= 1.0) {
        return Err(domain("R must be at least 1"));
    }
    let regime = RegimeParams::new(r, h)?;
    let k = alpha_constants(d)?;
    let (alpha, constant) = match regime.regime {
        Regime::CloseToContinuum => (k.c * r * r, k.c),
        Regime::PurelyDiscrete => (k.c_tilde * r / h * regime.rh.ln(), k.c_tilde),
    };
    Ok(AlphaChoice {
        alpha,
        regime,
        constant,
    })
}

/// `ln K_m(x) - ln K_0(x)` for `m = 0..=nmax`.
fn log_k_over_k0(nmax: usize, x: f64) -> Result<Vec<f64>> {
    let rho = log_k_ratio_ladder(nmax, x)?;
    let mut out = Vec::with_capacity(nmax + 1);
    out.push(0.0);
    let mut acc = 0.0;
    for r in rho {
        acc += r;
        out.push(acc);
    }
    Ok(out)
}

/// Close-to-continuum upper bound: prediction against the weight ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpperBoundCtc {
    pub gamma: f64,
    pub r: f64,
    pub h: f64,
    pub d: usize,
    /// `-d R^2 / gamma`.
    pub predicted_log: f64,
    /// `ln prod_k K_0^2(gamma/h^2) / K_{j_k}^2(gamma/h^2)` at `j_k = round(R/h)` on every axis.
    pub log_ratio_point: f64,
    /// `log_ratio_point * gamma / R^2`.
    pub normalized: f64,
    /// Log of the sup of the same product over `R - 2 < |hj| < R + 1`.
    pub log_sup_annulus: f64,
    /// `R/h < M`: below the large-order hypothesis; reported, not rejected.
    pub below_m: bool,
    /// `normalized` within 10% of `-d`.
    pub passed: bool,
}

pub fn upper_bound_ctc(gamma: f64, r: f64, h: f64, d: usize, m: f64) -> Result<UpperBoundCtc> {
    if !(gamma > 0.0 && r > 0.0 && h > 0.0) || !(1..=3).contains(&d) {
        return Err(domain("need gamma, R, h > 0 and d in 1..=3"));
    }
    if r * h >= gamma / 2.0 {
        return Err(LabError::Hypothesis(format!("Rh = {} >= gamma/2", r * h)));
    }
    let x = gamma / (h * h);
    if x < m {
        return Err(LabError::Hypothesis(format!("gamma/h^2 = {x} < M = {m}")));
    }
    let jc = (r / h).round() as usize;
    let n = ((r + 1.0) / h).ceil() as usize + 1;
    let lk = log_k_over_k0(n.max(jc), x)?;
    let log_ratio_point = -2.0 * d as f64 * lk[jc];
    // min of sum_k L(|j_k|) over the annulus; for fixed leading coordinates
    // the last one is taken as small as the inner radius allows
    let (lo, hi) = (((r - 2.0) / h).max(0.0), (r + 1.0) / h);
    let (lo2, hi2) = (lo * lo, hi * hi);
    let mut best = f64::INFINITY;
    let mut lead = vec![0usize; d - 1];
    loop {
        let s2: f64 = lead.iter().map(|&v| (v * v) as f64).sum();
        if s2 < hi2 {
            let need = lo2 - s2;
            let mut last = if need < 0.0 { 0 } else { need.sqrt().floor() as usize };
            while ((last * last) as f64 + s2) <= lo2 && !(need < 0.0) {
                last += 1;
            }
            if ((last * last) as f64 + s2) < hi2 && last < lk.len() {
                let v: f64 = lead.iter().map(|&m| lk[m]).sum::<f64>() + lk[last];
                best = best.min(v);
            }
        }
        // advance the odometer over leading coordinates
        let mut k = 0;
        while k < lead.len() {
            lead[k] += 1;
            if lead[k] <= n.min(lk.len() - 1) {
                break;
            }
            lead[k] = 0;
            k += 1;
        }
        if k == lead.len() {
            break;
        }
    }
    let normalized = log_ratio_point * gamma / (r * r);
    let dd = d as f64;
    Ok(UpperBoundCtc {
        gamma,
        r,
        h,
        d,
        predicted_log: -dd * r * r / gamma,
        log_ratio_point,
        normalized,
        log_sup_annulus: -2.0 * best,
        below_m: r / h < m,
        passed: (-1.1 * dd..=-0.9 * dd).contains(&normalized),
    })
}

/// Largest mesh accepted by [`upper_bound_discrete`].
pub const H0_DISCRETE: f64 = 0.25;

/// Purely discrete upper bound: direct `K` ratio against its asymptotic form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpperBoundDiscrete {
    pub mu: f64,
    pub r: f64,
    pub h: f64,
    pub d: usize,
    /// `-mu (R/h) (ln(Rh) + ln mu)`.
    pub predicted_log: f64,
    /// `ln K_0(x) - ln K_{j mu}(x)`, `x = 2/(e h^2)`, `j = round(R/h)` on the first axis.
    pub log_ratio_direct: f64,
    /// The same from `K_0(x) ~ sqrt(pi/(2x)) e^-x` and
    /// `2 mu K_{j mu}(x) ~ sqrt(h/R) exp[mu (R/h)(ln(Rh) + ln mu)]`.
    pub log_ratio_asymptotic: f64,
    /// `|direct - asymptotic| / |direct|`.
    pub rel_gap: f64,
    pub passed: bool,
}

pub fn upper_bound_discrete(mu: f64, r: f64, h: f64, d: usize) -> Result<UpperBoundDiscrete> {
    if !(mu > 0.0 && r > 0.0 && h > 0.0) || !(1..=3).contains(&d) {
        return Err(domain("need mu, R, h > 0 and d in 1..=3"));
    }
    if r * h < 2.0 / (std::f64::consts::E * mu) {
        return Err(LabError::Hypothesis(format!("Rh = {} < 2/(e mu)", r * h)));
    }
    if h >= H0_DISCRETE {
        return Err(LabError::Hypothesis(format!("h = {h} >= h0 = {H0_DISCRETE}")));
    }
    let x = 2.0 / (std::f64::consts::E * h * h);
    let j = (r / h).round();
    let policy = BesselEvalPolicy::default();
    let k0 = log_bessel_k_real(0.0, x, &policy)?.logmag();
    let kj = log_bessel_k_real(j * mu, x, &policy)?.logmag();
    let direct = k0 - kj;
    let re = j * h;
    let lead = mu * re / h * ((re * h).ln() + mu.ln());
    let asym_k0 = 0.5 * (std::f64::consts::PI / (2.0 * x)).ln() - x;
    let asym_kj = 0.5 * (h / re).ln() + lead - (2.0 * mu).ln();
    let asym = asym_k0 - asym_kj;
    let rel_gap = (direct - asym).abs() / direct.abs();
    Ok(UpperBoundDiscrete {
        mu,
        r,
        h,
        d,
        predicted_log: -lead,
        log_ratio_direct: direct,
        log_ratio_asymptotic: asym,
        rel_gap,
        passed: rel_gap <= 0.1,
    })
}

/// Time samples (intervals) of the log-domain Simpson rule in [`example_log_masses`].
pub const LOWER_TIME_INTERVALS: usize = 256;

/// `ln(h^d sum_{R-2<|hj|<R+1} [|u_j(0)|^2 + int_0^1 |u_j(t)|^2 dt])` for the
/// product solution `prod_k e^{-2t/h^2} I_{j_k}((1+2t)/h^2) / I_0(1/h^2)`, for each radius.
pub fn example_log_masses(r_grid: &[f64], h: f64, d: usize, intervals: usize) -> Result<Vec<f64>> {
    if r_grid.is_empty() {
        return Err(LabError::InsufficientPoints("empty R grid".into()));
    }
    if !(h > 0.0) || !(1..=3).contains(&d) || r_grid.iter().any(|&r| !(r > 0.0)) {
        return Err(domain("need h > 0, R > 0 and d in 1..=3"));
    }
    let intervals = intervals.max(2) & !1;
    let rmax = r_grid.iter().copied().fold(0.0, f64::max);
    let n = ((rmax + 1.0) / h).ceil() as usize + 1;
    let bx = LatticeBox::new(d, h, n)?;
    let annuli: Vec<Vec<usize>> = r_grid
        .iter()
        .map(|&r| crate::lattice::Annulus::standard(r, crate::lattice::Metric::Euclidean).site_indices(&bx))
        .collect();
    let h2 = h * h;
    let norm = log_bessel_i(0, 1.0 / h2)?.logmag();
    let cell = LogScalar::from_f64(bx.cell());
    let mass_at = |t: f64| -> Result<Vec<LogScalar>> {
        let ladder = log_bessel_i_ladder(n, (1.0 + 2.0 * t) / h2)?;
        let logs: Vec<f64> = ladder.iter().map(|v| v - norm - 2.0 * t / h2).collect();
        Ok(annuli
            .iter()
            .map(|sites| {
                let terms: Vec<LogScalar> = sites
                    .iter()
                    .map(|&i| {
                        let j = bx.coords(i);
                        let l: f64 = (0..d).map(|k| logs[j[k].unsigned_abs() as usize]).sum();
                        LogScalar::from_ln(2.0 * l)
                    })
                    .collect();
                LogScalar::sum_slice(&terms) * cell
            })
            .collect())
    };
    let samples: Vec<Vec<LogScalar>> = (0..=intervals)
        .into_par_iter()
        .map(|i| mass_at(i as f64 / intervals as f64))
        .collect::<Result<_>>()?;
    let dt = 1.0 / intervals as f64;
    let out = (0..r_grid.len())
        .map(|k| {
            let mut terms = vec![samples[0][k]];
            for (i, s) in samples.iter().enumerate() {
                let w = if i == 0 || i == intervals {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                terms.push(s[k] * LogScalar::from_f64(w * dt / 3.0));
            }
            LogScalar::sum_slice(&terms).logmag()
        })
        .collect();
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MassPoint {
    pub r: f64,
    pub h: f64,
    pub rh: f64,
    pub regime: Regime,
    pub log_mass: f64,
}

/// Close-to-continuum fit of the log mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuumFit {
    /// Exponent `p` of `ln M = a + b ln R - c R^p`, best over `p in [1, 3]`.
    pub exponent: f64,
    pub r2_profile: f64,
    /// `c` of `ln M = a + b ln R - c R^2` (empirical lower-bound constant).
    pub c_lower: f64,
    pub intercept: f64,
    pub r2_quadratic: f64,
}

/// Purely discrete fit `ln M = a + s (R/h) ln(Rh) + q R/h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscreteFit {
    pub slope: f64,
    pub linear: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Minimum number of in-regime radii for a fit.
pub const MIN_FIT_POINTS: usize = 4;

/// Fit quality required by the lower-bound audit.
pub const FIT_R2_MIN: f64 = 0.99;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundReport {
    pub h: f64,
    pub d: usize,
    pub points: Vec<MassPoint>,
    pub continuum: Option<ContinuumFit>,
    pub discrete: Option<DiscreteFit>,
    pub passed: bool,
}

pub fn fit_continuum(points: &[MassPoint]) -> Result<ContinuumFit> {
    let pts: Vec<&MassPoint> = points.iter().filter(|p| p.regime == Regime::CloseToContinuum).collect();
    if pts.len() < MIN_FIT_POINTS {
        return Err(LabError::InsufficientPoints(format!(
            "{} close-to-continuum radii",
            pts.len()
        )));
    }
    if pts.iter().any(|p| !p.log_mass.is_finite()) {
        return Err(LabError::Degenerate("zero annulus mass".into()));
    }
    let r: Vec<f64> = pts.iter().map(|p| p.r).collect();
    let y: Vec<f64> = pts.iter().map(|p| p.log_mass).collect();
    let grid: Vec<f64> = (0..=2000).map(|i| 1.0 + 0.001 * i as f64).collect();
    let prof = power_profile_fit(&r, &y, &grid)?;
    let quad = ols(
        &[r.iter().map(|v| v.ln()).collect(), r.iter().map(|v| -v * v).collect()],
        &y,
        true,
    )?;
    Ok(ContinuumFit {
        exponent: prof.p,
        r2_profile: prof.r2,
        c_lower: quad.coef[2],
        intercept: quad.coef[0],
        r2_quadratic: quad.r2,
    })
}

pub fn fit_discrete(points: &[MassPoint]) -> Result<DiscreteFit> {
    let pts: Vec<&MassPoint> = points.iter().filter(|p| p.regime == Regime::PurelyDiscrete).collect();
    if pts.len() < MIN_FIT_POINTS {
        return Err(LabError::InsufficientPoints(format!("{} discrete radii", pts.len())));
    }
    if pts.iter().any(|p| !p.log_mass.is_finite()) {
        return Err(LabError::Degenerate("zero annulus mass".into()));
    }
    let y: Vec<f64> = pts.iter().map(|p| p.log_mass).collect();
    let a: Vec<f64> = pts.iter().map(|p| p.r / p.h * p.rh.ln()).collect();
    let b: Vec<f64> = pts.iter().map(|p| p.r / p.h).collect();
    let f = ols(&[a, b], &y, true)?;
    Ok(DiscreteFit {
        slope: f.coef[1],
        linear: f.coef[2],
        intercept: f.coef[0],
        r2: f.r2,
    })
}

/// Annulus mass of the product solution over `r_grid`, with a fit per regime.
pub fn lower_bound_audit(r_grid: &[f64], h: f64, d: usize) -> Result<LowerBoundReport> {
    let logs = example_log_masses(r_grid, h, d, LOWER_TIME_INTERVALS)?;
    let points: Vec<MassPoint> = r_grid
        .iter()
        .zip(&logs)
        .map(|(&r, &log_mass)| {
            let reg = RegimeParams::new(r, h)?;
            Ok(MassPoint {
                r,
                h,
                rh: reg.rh,
                regime: reg.regime,
                log_mass,
            })
        })
        .collect::<Result<_>>()?;
    let continuum = match fit_continuum(&points) {
        Ok(f) => Some(f),
        Err(LabError::InsufficientPoints(_)) => None,
        Err(e) => return Err(e),
    };
    let discrete = match fit_discrete(&points) {
        Ok(f) => Some(f),
        Err(LabError::InsufficientPoints(_)) => None,
        Err(e) => return Err(e),
    };
    if continuum.is_none() && discrete.is_none() {
        return Err(LabError::InsufficientPoints(format!(
            "need {MIN_FIT_POINTS} radii in at least one regime"
        )));
    }
    let passed = continuum.map_or(true, |c| {
        c.r2_profile >= FIT_R2_MIN && (1.9..=2.1).contains(&c.exponent)
    }) && discrete.map_or(true, |f| f.r2 >= FIT_R2_MIN);
    Ok(LowerBoundReport {
        h,
        d,
        points,
        continuum,
        discrete,
        passed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Contradiction,
    Boundary,
    NoContradiction,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LandisGap {
    pub gamma: f64,
    pub c_lower: f64,
    pub d: usize,
    /// `d / c_lower`: decay rates `gamma` below this force `u = 0`.
    pub gamma_star: f64,
    pub verdict: Verdict,
    /// Radius beyond which `e^{-c_lower R^2}` exceeds `e^{log_offset - d R^2/gamma}`.
    pub crossing_r: Option<f64>,
}

/// Compares the lower rate `c_lower R^2` with the upper rate `d R^2 / gamma`.
/// `log_offset` is `ln(C_upper / C_lower)` of the two prefactors (0 if unknown).
pub fn landis_gap(gamma: f64, c_lower: f64, d: usize, log_offset: f64) -> Result<LandisGap> {
    if !(c_lower > 0.0) {
        return Err(precondition("c_lower must be positive"));
    }
    if !(gamma > 0.0) || d == 0 {
        return Err(domain("need gamma > 0 and d >= 1"));
    }
    let dd = d as f64;
    let gamma_star = dd / c_lower;
    let verdict = if (gamma - gamma_star).abs() <= 1e-12 * gamma_star {
        Verdict::Boundary
    } else if gamma < gamma_star {
        Verdict::Contradiction
    } else {
        Verdict::NoContradiction
    };
    let crossing_r = (verdict == Verdict::Contradiction)
        .then(|| (log_offset.max(0.0) / (dd / gamma - c_lower)).sqrt());
    Ok(LandisGap {
        gamma,
        c_lower,
        d,
        gamma_star,
        verdict,
        crossing_r,
    })
}
