//! Truncated boxes of `(hZ)^d`, dense fields on them, and the difference
//! operators, norms and annulus sums used throughout the crate.
//!
//! Sites outside the box are treated as zero (Dirichlet truncation). Axis 0
//! is the slowest index in storage order.

use crate::error::{precondition, LabError, Result};
use crate::logscalar::LogScalar;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Sites at or above this count are processed in parallel.
pub(crate) const PAR_THRESHOLD: usize = 1 << 14;

/// Index bound below which a log value is clamped to zero in linear form.
pub const LINEAR_CLAMP_LN: f64 = -700.0;

/// Lattice point with up to three coordinates; unused trailing entries are 0.
pub type Site = [i64; 3];

/// `[-extent, extent]^d` with mesh `h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeBox {
    d: usize,
    h: f64,
    extent: usize,
}

impl LatticeBox {
    pub fn new(d: usize, h: f64, extent: usize) -> Result<Self> {
        if !(1..=3).contains(&d) {
            return Err(precondition(format!("dimension must be 1, 2 or 3, got {d}")));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(precondition(format!("mesh must be positive, got {h}")));
        }
        if extent < 4 {
            return Err(precondition(format!("extent must be at least 4, got {extent}")));
        }
        let side = 2 * extent + 1;
        if side.checked_pow(d as u32).is_none_or(|n| n > (1usize << 34)) {
            return Err(precondition("box too large"));
        }
        Ok(LatticeBox { d, h, extent })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn extent(&self) -> usize {
        self.extent
    }

    pub fn side(&self) -> usize {
        2 * self.extent + 1
    }

    pub fn sites(&self) -> usize {
        self.side().pow(self.d as u32)
    }

    /// Storage stride of axis `k`.
    pub fn stride(&self, k: usize) -> usize {
        self.side().pow((self.d - 1 - k) as u32)
    }

    /// `h^d`, the volume element.
    pub fn cell(&self) -> f64 {
        self.h.powi(self.d as i32)
    }

    pub fn coords(&self, idx: usize) -> Site {
        let side = self.side();
        let mut out = [0i64; 3];
        let mut rem = idx;
        for k in (0..self.d).rev() {
            out[k] = (rem % side) as i64 - self.extent as i64;
            rem /= side;
        }
        out
    }

    pub fn index_of(&self, j: &Site) -> Option<usize> {
        let n = self.extent as i64;
        let mut idx = 0usize;
        for k in 0..self.d {
            if j[k] < -n || j[k] > n {
                return None;
            }
            idx = idx * self.side() + (j[k] + n) as usize;
        }
        Some(idx)
    }

    /// Index of the neighbor `idx +/- e_k`, or `None` outside the box.
    #[inline]
    pub fn neighbor(&self, idx: usize, k: usize, forward: bool) -> Option<usize> {
        let stride = self.stride(k);
        let pos = (idx / stride) % self.side();
        if forward {
            (pos + 1 < self.side()).then(|| idx + stride)
        } else {
            (pos > 0).then(|| idx - stride)
        }
    }

    /// True when the site lies on the outermost layer of the box.
    pub fn on_boundary(&self, idx: usize) -> bool {
        let j = self.coords(idx);
        (0..self.d).any(|k| j[k].unsigned_abs() as usize == self.extent)
    }

    /// Distance of `hj` from the origin in the given metric.
    pub fn radius(&self, idx: usize, metric: Metric) -> f64 {
        let j = self.coords(idx);
        metric.norm(&j, self.d) * self.h
    }

    /// Same box with a larger extent.
    pub fn enlarged(&self, extent: usize) -> Result<Self> {
        LatticeBox::new(self.d, self.h, extent)
    }
}

/// Norm used for annuli and shells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Metric {
    Euclidean,
    Max,
}

impl Metric {
    pub fn norm(&self, j: &Site, d: usize) -> f64 {
        match self {
            Metric::Euclidean => j[..d]
                .iter()
                .map(|&v| (v as f64) * (v as f64))
                .sum::<f64>()
                .sqrt(),
            Metric::Max => j[..d].iter().map(|v| v.unsigned_abs()).max().unwrap_or(0) as f64,
        }
    }
}

/// Real field on a [`LatticeBox`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeField {
    bx: LatticeBox,
    values: Vec<f64>,
}

impl LatticeField {
    pub fn new(bx: LatticeBox, values: Vec<f64>) -> Result<Self> {
        if values.len() != bx.sites() {
            return Err(precondition(format!(
                "field has {} values for {} sites",
                values.len(),
                bx.sites()
            )));
        }
        Ok(LatticeField { bx, values })
    }

    pub fn zeros(bx: LatticeBox) -> Self {
        LatticeField {
            bx,
            values: vec![0.0; bx.sites()],
        }
    }

    pub fn from_fn(bx: LatticeBox, mut f: impl FnMut(&Site) -> f64) -> Self {
        let values = (0..bx.sites()).map(|i| f(&bx.coords(i))).collect();
        LatticeField { bx, values }
    }

    /// Unit mass at `site`.
    pub fn delta(bx: LatticeBox, site: &Site) -> Result<Self> {
        let mut f = Self::zeros(bx);
        let idx = bx
            .index_of(site)
            .ok_or_else(|| precondition("delta site outside box"))?;
        f.values[idx] = 1.0;
        Ok(f)
    }

    pub fn bx(&self) -> &LatticeBox {
        &self.bx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, j: &Site) -> f64 {
        self.bx.index_of(j).map_or(0.0, |i| self.values[i])
    }

    pub fn scaled(&self, a: f64) -> Self {
        self.map(|v| v * a)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        LatticeField {
            bx: self.bx,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// `a * self + b * other`.
    pub fn axpby(&self, a: f64, other: &LatticeField, b: f64) -> Self {
        debug_assert_eq!(self.bx, other.bx);
        LatticeField {
            bx: self.bx,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        }
    }

    /// Copies the field into a box with a larger extent, zero-filled.
    pub fn embed(&self, target: LatticeBox) -> Result<Self> {
        if target.d() != self.bx.d() || target.h() != self.bx.h() || target.extent() < self.bx.extent() {
            return Err(precondition("embedding target must be a larger box of the same lattice"));
        }
        let mut out = Self::zeros(target);
        for (i, &v) in self.values.iter().enumerate() {
            let idx = target.index_of(&self.bx.coords(i)).expect("inside larger box");
            out.values[idx] = v;
        }
        Ok(out)
    }

    /// True when every nonzero value is at least `margin` sites from the box edge.
    pub fn supported_inside(&self, margin: usize) -> bool {
        let lim = self.bx.extent().saturating_sub(margin) as i64;
        self.values.iter().enumerate().all(|(i, &v)| {
            v == 0.0 || {
                let j = self.bx.coords(i);
                (0..self.bx.d()).all(|k| j[k].abs() < lim)
            }
        })
    }

    /// Rows `(j_1..j_d, value)` for CSV export.
    pub fn rows(&self) -> impl Iterator<Item = (Vec<i64>, f64)> + '_ {
        (0..self.bx.sites()).map(move |i| (self.bx.coords(i)[..self.bx.d()].to_vec(), self.values[i]))
    }
}

/// Signed log-domain field for values far below `f64` range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogField {
    bx: LatticeBox,
    values: Vec<LogScalar>,
}

impl LogField {
    pub fn new(bx: LatticeBox, values: Vec<LogScalar>) -> Result<Self> {
        if values.len() != bx.sites() {
            return Err(precondition("log field length does not match box"));
        }
        Ok(LogField { bx, values })
    }

    pub fn bx(&self) -> &LatticeBox {
        &self.bx
    }

    pub fn values(&self) -> &[LogScalar] {
        &self.values
    }

    pub fn get(&self, j: &Site) -> LogScalar {
        self.bx.index_of(j).map_or(LogScalar::ZERO, |i| self.values[i])
    }

    /// Linear field with values below `e^{-700}` clamped to zero; also returns
    /// the number of clamped nonzero sites.
    pub fn to_linear(&self) -> (LatticeField, usize) {
        let mut clamped = 0;
        let values = self
            .values
            .iter()
            .map(|v| {
                if v.is_zero() {
                    0.0
                } else if v.logmag() < LINEAR_CLAMP_LN {
                    clamped += 1;
                    0.0
                } else {
                    v.to_f64()
                }
            })
            .collect();
        (LatticeField { bx: self.bx, values }, clamped)
    }

    pub fn from_linear(f: &LatticeField) -> Self {
        LogField {
            bx: f.bx,
            values: f.values.iter().map(|&v| LogScalar::from_f64(v)).collect(),
        }
    }
}

/// Discrete Laplacian `h^{-2} sum_k (f_{j+e_k} - 2 f_j + f_{j-e_k})`, zero-extended.
///
/// Evaluated as `sum_k ((f_+ - f)/h - (f - f_-)/h)/h` so that it coincides bit
/// for bit with `sum_k D_{-,k} D_{+,k} f` on interior sites.
pub fn discrete_laplacian(f: &LatticeField) -> LatticeField {
    let bx = f.bx;
    let h = bx.h;
    let v = &f.values;
    let at = |i: usize| -> f64 {
        let mut acc = 0.0;
        for k in 0..bx.d {
            let fp = bx.neighbor(i, k, true).map_or(0.0, |n| v[n]);
            let fm = bx.neighbor(i, k, false).map_or(0.0, |n| v[n]);
            let fwd = (fp - v[i]) / h;
            let bwd = (v[i] - fm) / h;
            acc += (fwd - bwd) / h;
        }
        acc
    };
    let values = if bx.sites() >= PAR_THRESHOLD {
        (0..bx.sites()).into_par_iter().map(at).collect()
    } else {
        (0..bx.sites()).map(at).collect()
    };
    LatticeField { bx, values }
}

/// Kind of first difference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DiffKind {
    /// `D_{+,k} f_j = (f_{j+e_k} - f_j)/h`
    Forward,
    /// `D_{-,k} f_j = (f_j - f_{j-e_k})/h`
    Backward,
    /// `D^s_k f_j = (f_{j+e_k} - f_{j-e_k})/(2h)`
    Symmetric,
}

/// First difference along axis `k`, zero-extended.
pub fn diff_ops(f: &LatticeField, k: usize, kind: DiffKind) -> Result<LatticeField> {
    let bx = f.bx;
    if k >= bx.d {
        return Err(precondition(format!("axis {k} out of range for d = {}", bx.d)));
    }
    let h = bx.h;
    let v = &f.values;
    let values = (0..bx.sites())
        .map(|i| {
            let fp = || bx.neighbor(i, k, true).map_or(0.0, |n| v[n]);
            let fm = || bx.neighbor(i, k, false).map_or(0.0, |n| v[n]);
            match kind {
                DiffKind::Forward => (fp() - v[i]) / h,
                DiffKind::Backward => (v[i] - fm()) / h,
                DiffKind::Symmetric => (fp() - fm()) / (2.0 * h),
            }
        })
        .collect();
    Ok(LatticeField { bx, values })
}

/// `|sum_j sum_k (D_{+,k} f)_j g_j + sum_j sum_k f_j (D_{-,k} g)_j|`.
///
/// Both fields must vanish on the outermost layer so that zero extension
/// does not cut off any term of either sum.
pub fn summation_by_parts_check(f: &LatticeField, g: &LatticeField) -> Result<f64> {
    if f.bx != g.bx {
        return Err(precondition("fields live on different boxes"));
    }
    if !f.supported_inside(1) || !g.supported_inside(1) {
        return Err(precondition("summation by parts needs a one-site margin"));
    }
    let mut acc = 0.0;
    for k in 0..f.bx.d {
        let dpf = diff_ops(f, k, DiffKind::Forward)?;
        let dmg = diff_ops(g, k, DiffKind::Backward)?;
        for i in 0..f.bx.sites() {
            acc += dpf.values[i] * g.values[i] + f.values[i] * dmg.values[i];
        }
    }
    Ok(acc.abs())
}

/// `||f||_inf`.
pub fn sup_norm(f: &LatticeField) -> f64 {
    f.values.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// `(h^d sum_j f_j^2)^{1/2}`.
pub fn l2_norm(f: &LatticeField) -> f64 {
    l2_norm_sq(f).sqrt()
}

pub fn l2_norm_sq(f: &LatticeField) -> f64 {
    f.bx.cell() * f.values.iter().map(|v| v * v).sum::<f64>()
}

/// `h^d sum_j f_j g_j`.
pub fn inner(f: &LatticeField, g: &LatticeField) -> f64 {
    debug_assert_eq!(f.bx, g.bx);
    f.bx.cell() * f.values.iter().zip(&g.values).map(|(a, b)| a * b).sum::<f64>()
}

/// Open annulus `r_in < |hj| < r_out`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Annulus {
    pub r_in: f64,
    pub r_out: f64,
    pub metric: Metric,
}

impl Annulus {
    /// The annulus `R-2 < |hj| < R+1` of the lower-bound statements.
    pub fn standard(r: f64, metric: Metric) -> Self {
        Annulus {
            r_in: r - 2.0,
            r_out: r + 1.0,
            metric,
        }
    }

    pub fn contains(&self, bx: &LatticeBox, idx: usize) -> bool {
        let r = bx.radius(idx, self.metric);
        r > self.r_in && r < self.r_out
    }

    /// Errors unless every site of the annulus lies strictly inside the box.
    pub fn check_inside(&self, bx: &LatticeBox) -> Result<()> {
        if self.r_out < bx.extent() as f64 * bx.h() {
            Ok(())
        } else {
            Err(LabError::Precondition(format!(
                "annulus outside box: outer radius {} >= box half-width {}",
                self.r_out,
                bx.extent() as f64 * bx.h()
            )))
        }
    }

    pub fn site_indices(&self, bx: &LatticeBox) -> Vec<usize> {
        (0..bx.sites()).filter(|&i| self.contains(bx, i)).collect()
    }
}

/// `||f||^2` restricted to an annulus, with the `h^d` weight.
pub fn annulus_norm_sq(f: &LatticeField, ann: &Annulus) -> f64 {
    let bx = f.bx;
    bx.cell()
        * (0..bx.sites())
            .filter(|&i| ann.contains(&bx, i))
            .map(|i| f.values[i] * f.values[i])
            .sum::<f64>()
}

/// Trapezoid rule for samples `ys` at strictly increasing `ts`.
pub fn trapezoid(ts: &[f64], ys: &[f64]) -> f64 {
    ts.windows(2)
        .zip(ys.windows(2))
        .map(|(t, y)| 0.5 * (t[1] - t[0]) * (y[0] + y[1]))
        .sum()
}

/// `h^d sum_{R-2<|hj|<R+1} |u_j|^2`, summed over `fields`, or integrated in
/// time by the trapezoid rule when `times` is given (one time per field).
pub fn annulus_mass(
    fields: &[&LatticeField],
    r: f64,
    metric: Metric,
    times: Option<&[f64]>,
) -> Result<f64> {
    let first = fields.first().ok_or_else(|| precondition("no fields supplied"))?;
    let ann = Annulus::standard(r, metric);
    ann.check_inside(&first.bx)?;
    let masses: Vec<f64> = fields.iter().map(|f| annulus_norm_sq(f, &ann)).collect();
    match times {
        None => Ok(masses.iter().sum()),
        Some(ts) => {
            if ts.len() != fields.len() || ts.windows(2).any(|w| w[1] <= w[0]) {
                return Err(precondition("times must match fields and increase strictly"));
            }
            Ok(trapezoid(ts, &masses))
        }
    }
}

/// Log-domain counterpart of [`annulus_mass`] for deeply decayed fields.
pub fn annulus_mass_log(
    fields: &[&LogField],
    r: f64,
    metric: Metric,
    times: Option<&[f64]>,
) -> Result<LogScalar> {
    let first = fields.first().ok_or_else(|| precondition("no fields supplied"))?;
    let bx = first.bx;
    let ann = Annulus::standard(r, metric);
    ann.check_inside(&bx)?;
    let sites = ann.site_indices(&bx);
    let cell = LogScalar::from_f64(bx.cell());
    let masses: Vec<LogScalar> = fields
        .iter()
        .map(|f| {
            let terms: Vec<LogScalar> = sites.iter().map(|&i| f.values[i].powi(2)).collect();
            LogScalar::sum_slice(&terms) * cell
        })
        .collect();
    match times {
        None => Ok(LogScalar::sum_slice(&masses)),
        Some(ts) => {
            if ts.len() != fields.len() || ts.windows(2).any(|w| w[1] <= w[0]) {
                return Err(precondition("times must match fields and increase strictly"));
            }
            let terms: Vec<LogScalar> = ts
                .windows(2)
                .zip(masses.windows(2))
                .map(|(t, m)| (m[0] + m[1]) * LogScalar::from_f64(0.5 * (t[1] - t[0])))
                .collect();
            Ok(LogScalar::sum_slice(&terms))
        }
    }
}
