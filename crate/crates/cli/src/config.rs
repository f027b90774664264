//! TOML experiment configs, `key=value` overrides and up-front validation.

use landis_core::besselkit::BesselEvalPolicy;
use landis_core::carleman::{
    check_carleman_conditions, CarlemanConfig, Regime, RegimeParams, H0_DISCRETE, MIN_FIT_POINTS,
    REGIME_M,
};
use landis_core::elliptic_uc::EllipticMode;
use landis_core::heat_sim::Method;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Invalid or unreadable configuration (exit code 2).
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn bad(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

type Check = Result<(), ConfigError>;

/// Reads `path` (or starts from an empty table), applies overrides in order and deserializes.
pub fn load<T: DeserializeOwned>(
    path: Option<&Path>,
    overrides: &[String],
    seed: Option<u64>,
) -> Result<T, ConfigError> {
    let mut table = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| bad(format!("cannot read {}: {e}", p.display())))?;
            text.parse::<toml::Table>()
                .map_err(|e| bad(format!("{}: {e}", p.display())))?
        }
        None => toml::Table::new(),
    };
    for o in overrides {
        let (key, raw) = o
            .split_once('=')
            .ok_or_else(|| bad(format!("override `{o}` is not key=value")))?;
        set_path(&mut table, key.trim(), parse_value(raw.trim()))?;
    }
    if let Some(s) = seed {
        let v = i64::try_from(s).map_err(|_| bad("seed must fit in i64"))?;
        table.insert("seed".into(), toml::Value::Integer(v));
    }
    toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| bad(e.to_string()))
}

/// TOML literal when it parses as one, a bare string otherwise.
fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn set_path(table: &mut toml::Table, key: &str, value: toml::Value) -> Check {
    let mut parts = key.split('.').peekable();
    let mut cur = table;
    while let Some(p) = parts.next() {
        if p.is_empty() {
            return Err(bad(format!("empty segment in key `{key}`")));
        }
        if parts.peek().is_none() {
            cur.insert(p.to_string(), value);
            return Ok(());
        }
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| bad(format!("`{p}` in `{key}` is not a table")))?;
    }
    Ok(())
}

fn positive(name: &str, v: f64) -> Check {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(bad(format!("{name} must be positive and finite, got {v}")))
    }
}

fn nonempty<T>(name: &str, v: &[T]) -> Check {
    if v.is_empty() {
        Err(bad(format!("{name} is empty")))
    } else {
        Ok(())
    }
}

fn dimension(d: usize) -> Check {
    if (1..=3).contains(&d) {
        Ok(())
    } else {
        Err(bad(format!("d must be 1, 2 or 3, got {d}")))
    }
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BesselConfig {
    pub seed: u64,
    pub order_min: i64,
    pub order_max: i64,
    pub xs: Vec<f64>,
    pub policy: BesselEvalPolicy,
}

impl Default for BesselConfig {
    fn default() -> Self {
        BesselConfig {
            seed: 0,
            order_min: -20,
            order_max: 20,
            xs: vec![0.1, 1.0, 10.0, 1e3, 1e6],
            policy: BesselEvalPolicy::default(),
        }
    }
}

impl BesselConfig {
    pub fn validate(&self) -> Check {
        if self.order_min > self.order_max {
            return Err(bad("order_min exceeds order_max"));
        }
        nonempty("xs", &self.xs)?;
        for &x in &self.xs {
            positive("x", x)?;
        }
        self.policy.validate().map_err(|e| bad(e.to_string()))
    }
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelCheck {
    pub enabled: bool,
    pub dims: Vec<usize>,
    pub hs: Vec<f64>,
    pub times: Vec<f64>,
    pub extent: usize,
    /// Sites kept clear of the box edge in the pointwise comparison.
    pub interior_margin: usize,
}

impl Default for KernelCheck {
    fn default() -> Self {
        KernelCheck {
            enabled: true,
            dims: vec![1, 2],
            hs: vec![1.0, 0.25],
            times: vec![0.1, 0.5, 1.0],
            extent: 40,
            interior_margin: 20,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeatConfig {
    pub seed: u64,
    pub d: usize,
    pub h: f64,
    pub extent: usize,
    pub method: Method,
    pub dt_max: f64,
    pub samples: usize,
    /// Number of seeded random-potential problems.
    pub problems: usize,
    pub amp: f64,
    pub time_dependent: bool,
    pub caccioppoli_r: f64,
    pub kernel: KernelCheck,
}

impl Default for HeatConfig {
    fn default() -> Self {
        HeatConfig {
            seed: 0,
            d: 1,
            h: 0.25,
            extent: 40,
            method: Method::Rk4,
            dt_max: 1e-3,
            samples: 129,
            problems: 20,
            amp: 1.0,
            time_dependent: true,
            caccioppoli_r: 5.0,
            kernel: KernelCheck::default(),
        }
    }
}

impl HeatConfig {
    pub fn validate(&self) -> Check {
        dimension(self.d)?;
        positive("h", self.h)?;
        positive("dt_max", self.dt_max)?;
        positive("caccioppoli_r", self.caccioppoli_r)?;
        if !(self.amp >= 0.0 && self.amp.is_finite()) {
            return Err(bad("amp must be nonnegative"));
        }
        if self.samples < 2 {
            return Err(bad("samples must be at least 2"));
        }
        if self.extent < 2 {
            return Err(bad("extent must be at least 2"));
        }
        let outer = (self.caccioppoli_r + 1.0) / self.h;
        if self.problems > 0 && outer >= self.extent as f64 {
            return Err(bad(format!(
                "annulus of radius {} + 1 leaves the box of extent {}",
                self.caccioppoli_r, self.extent
            )));
        }
        let k = &self.kernel;
        if k.enabled {
            nonempty("kernel.dims", &k.dims)?;
            nonempty("kernel.hs", &k.hs)?;
            nonempty("kernel.times", &k.times)?;
            for &d in &k.dims {
                dimension(d)?;
            }
            for &h in &k.hs {
                positive("kernel.hs", h)?;
            }
            for &t in &k.times {
                positive("kernel.times", t)?;
            }
            if k.interior_margin >= k.extent {
                return Err(bad("kernel.interior_margin must be below kernel.extent"));
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LambdaGrid {
    pub j_min: i64,
    pub j_max: i64,
    pub xs: Vec<f64>,
    pub deltas: Vec<f64>,
}

impl Default for LambdaGrid {
    fn default() -> Self {
        LambdaGrid {
            j_min: -12,
            j_max: 12,
            xs: vec![0.01, 0.1, 0.5, 1.0, 2.0, 4.0, 10.0, 30.0, 100.0, 400.0],
            deltas: vec![0.1, 0.5, 0.9, 1.0],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogConvexityGrid {
    pub hs: Vec<f64>,
    pub gamma: f64,
    pub samples: usize,
    /// Half width of the box in physical units.
    pub radius: f64,
}

impl Default for LogConvexityGrid {
    fn default() -> Self {
        LogConvexityGrid {
            hs: vec![0.5, 0.25, 0.1],
            gamma: 4.0,
            samples: 33,
            radius: 60.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvexityConfig {
    pub seed: u64,
    pub gammas: Vec<f64>,
    pub hs: Vec<f64>,
    /// Weight exponent; 1 is the plain `K_n(gamma/h^2)` weight.
    pub delta: f64,
    /// Total seeded fields, spread round-robin over the `(gamma, h)` grid.
    pub fields: usize,
    pub extent: usize,
    pub lambda: LambdaGrid,
    pub logconvexity: LogConvexityGrid,
}

impl Default for ConvexityConfig {
    fn default() -> Self {
        ConvexityConfig {
            seed: 0,
            gammas: vec![1.0, 4.0],
            hs: vec![0.5, 0.25, 0.1],
            delta: 1.0,
            fields: 1000,
            extent: 16,
            lambda: LambdaGrid::default(),
            logconvexity: LogConvexityGrid::default(),
        }
    }
}

impl ConvexityConfig {
    pub fn validate(&self) -> Check {
        nonempty("gammas", &self.gammas)?;
        nonempty("hs", &self.hs)?;
        for &g in &self.gammas {
            positive("gamma", g)?;
        }
        for &h in &self.hs {
            positive("h", h)?;
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(bad("delta must lie in (0, 1]"));
        }
        if self.extent < 5 {
            return Err(bad("extent must be at least 5"));
        }
        let l = &self.lambda;
        if l.j_min > l.j_max {
            return Err(bad("lambda.j_min exceeds lambda.j_max"));
        }
        nonempty("lambda.xs", &l.xs)?;
        nonempty("lambda.deltas", &l.deltas)?;
        for &x in &l.xs {
            positive("lambda.xs", x)?;
        }
        for &d in &l.deltas {
            if !(d > 0.0 && d <= 1.0) {
                return Err(bad("lambda.deltas must lie in (0, 1]"));
            }
        }
        let c = &self.logconvexity;
        for &h in &c.hs {
            positive("logconvexity.hs", h)?;
        }
        positive("logconvexity.gamma", c.gamma)?;
        positive("logconvexity.radius", c.radius)?;
        if c.samples < 3 {
            return Err(bad("logconvexity.samples must be at least 3"));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CarlemanMode {
    Parabolic,
    Elliptic,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParabolicBlock {
    pub r: f64,
    pub h: f64,
    pub d: usize,
    /// Explicit `alpha`; the regime rule picks one when absent.
    pub alpha: Option<f64>,
    pub samples: usize,
    pub intervals: usize,
}

impl Default for ParabolicBlock {
    fn default() -> Self {
        ParabolicBlock {
            r: 5.0,
            h: 0.2,
            d: 1,
            alpha: None,
            samples: 3,
            intervals: 256,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PiecesBlock {
    /// Seeded fields; 0 skips the identity checks.
    pub fields: usize,
    pub r: f64,
    pub h: f64,
    pub d: usize,
    pub alpha: f64,
    /// Coarse time intervals; the refined grid doubles them.
    pub intervals: usize,
    pub window: [f64; 2],
}

impl Default for PiecesBlock {
    fn default() -> Self {
        PiecesBlock {
            fields: 50,
            r: 3.0,
            h: 0.25,
            d: 1,
            alpha: 40.0,
            intervals: 512,
            window: [0.02, 0.98],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EllipticBlock {
    pub r: f64,
    pub h: f64,
    pub d: usize,
    pub alpha_mode: EllipticMode,
    pub alpha: Option<f64>,
    pub samples: usize,
}

impl Default for EllipticBlock {
    fn default() -> Self {
        EllipticBlock {
            r: 30.0,
            h: 0.1,
            d: 1,
            alpha_mode: EllipticMode::Scaling,
            alpha: None,
            samples: 8,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CarlemanAuditConfig {
    pub seed: u64,
    pub mode: CarlemanMode,
    pub parabolic: ParabolicBlock,
    pub pieces: PiecesBlock,
    pub elliptic: EllipticBlock,
}

impl Default for CarlemanAuditConfig {
    fn default() -> Self {
        CarlemanAuditConfig {
            seed: 0,
            mode: CarlemanMode::Parabolic,
            parabolic: ParabolicBlock::default(),
            pieces: PiecesBlock::default(),
            elliptic: EllipticBlock::default(),
        }
    }
}

impl CarlemanAuditConfig {
    /// Resolved parabolic configuration; the parameter conditions must hold.
    pub fn parabolic_config(&self) -> Result<CarlemanConfig, ConfigError> {
        let p = &self.parabolic;
        dimension(p.d)?;
        let alpha = match p.alpha {
            Some(a) => a,
            None => {
                landis_core::carleman::alpha_select(p.r, p.h, p.d)
                    .map_err(|e| bad(e.to_string()))?
                    .alpha
            }
        };
        let cfg = CarlemanConfig::new(alpha, p.r, p.h, p.d).map_err(|e| bad(e.to_string()))?;
        let rep = check_carleman_conditions(&cfg).map_err(|e| bad(e.to_string()))?;
        if !rep.passed {
            return Err(bad(format!(
                "alpha = {alpha}, R = {}, h = {} fails the Carleman conditions (clause {:?})",
                p.r, p.h, rep.clause
            )));
        }
        Ok(cfg)
    }

    pub fn pieces_config(&self) -> Result<CarlemanConfig, ConfigError> {
        let p = &self.pieces;
        dimension(p.d)?;
        CarlemanConfig::new(p.alpha, p.r, p.h, p.d).map_err(|e| bad(e.to_string()))
    }

    pub fn elliptic_config(&self) -> Result<CarlemanConfig, ConfigError> {
        let e = &self.elliptic;
        dimension(e.d)?;
        let alpha = match e.alpha {
            Some(a) => a,
            None => {
                landis_core::elliptic_uc::alpha_select_elliptic(e.r, e.h, e.d, e.alpha_mode)
                    .map_err(|x| bad(x.to_string()))?
                    .alpha
            }
        };
        CarlemanConfig::new(alpha, e.r, e.h, e.d).map_err(|x| bad(x.to_string()))
    }

    pub fn validate(&self) -> Check {
        match self.mode {
            CarlemanMode::Parabolic => {
                if self.parabolic.samples > 0 {
                    self.parabolic_config()?;
                    if self.parabolic.intervals < 16 {
                        return Err(bad("parabolic.intervals must be at least 16"));
                    }
                }
                if self.pieces.fields > 0 {
                    self.pieces_config()?;
                    if self.pieces.intervals < 16 {
                        return Err(bad("pieces.intervals must be at least 16"));
                    }
                    let [a, b] = self.pieces.window;
                    if !(0.0 < a && a < b && b < 1.0) {
                        return Err(bad("pieces.window must satisfy 0 < start < end < 1"));
                    }
                }
                if self.parabolic.samples == 0 && self.pieces.fields == 0 {
                    return Err(bad("nothing to do: parabolic.samples and pieces.fields are 0"));
                }
            }
            CarlemanMode::Elliptic => {
                self.elliptic_config()?;
                if self.elliptic.samples == 0 {
                    return Err(bad("elliptic.samples must be positive"));
                }
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UpperBlock {
    pub enabled: bool,
    pub gamma: f64,
    pub h: f64,
    pub r: Vec<f64>,
    pub m: f64,
}

impl Default for UpperBlock {
    fn default() -> Self {
        UpperBlock {
            enabled: true,
            gamma: 4.0,
            h: 0.02,
            r: vec![0.5, 1.0, 1.5],
            m: REGIME_M,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UpperDiscreteBlock {
    pub enabled: bool,
    pub mu: f64,
    pub h: f64,
    pub r: Vec<f64>,
}

impl Default for UpperDiscreteBlock {
    fn default() -> Self {
        UpperDiscreteBlock {
            enabled: true,
            mu: 1.0 / std::f64::consts::E,
            h: 0.05,
            r: vec![80.0, 120.0, 160.0, 240.0, 320.0],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LowerBlock {
    pub h: f64,
    pub r: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GapBlock {
    pub enabled: bool,
    pub gamma: f64,
    pub log_offset: f64,
}

impl Default for GapBlock {
    fn default() -> Self {
        GapBlock {
            enabled: true,
            gamma: 4.0,
            log_offset: 0.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundsConfig {
    pub seed: u64,
    pub d: usize,
    pub upper: UpperBlock,
    pub upper_discrete: UpperDiscreteBlock,
    pub lower: Vec<LowerBlock>,
    /// Allowed relative spread of the discrete slope across meshes.
    pub slope_stability: f64,
    pub gap: GapBlock,
}

impl Default for BoundsConfig {
    fn default() -> Self {
        let discrete_r = vec![3.0, 5.0, 8.0, 12.0, 16.0, 20.0, 25.0, 30.0, 35.0, 40.0];
        BoundsConfig {
            seed: 0,
            d: 1,
            upper: UpperBlock::default(),
            upper_discrete: UpperDiscreteBlock::default(),
            lower: vec![
                LowerBlock {
                    h: 0.02,
                    r: (5..=40).map(f64::from).collect(),
                },
                LowerBlock {
                    h: 0.5,
                    r: discrete_r.clone(),
                },
                LowerBlock { h: 1.0, r: discrete_r },
            ],
            slope_stability: 0.1,
            gap: GapBlock::default(),
        }
    }
}

impl BoundsConfig {
    pub fn validate(&self) -> Check {
        dimension(self.d)?;
        positive("slope_stability", self.slope_stability)?;
        let u = &self.upper;
        if u.enabled {
            nonempty("upper.r", &u.r)?;
            positive("upper.gamma", u.gamma)?;
            positive("upper.h", u.h)?;
            positive("upper.m", u.m)?;
            if u.gamma / (u.h * u.h) < u.m {
                return Err(bad(format!("upper: gamma/h^2 = {} < M = {}", u.gamma / (u.h * u.h), u.m)));
            }
            for &r in &u.r {
                positive("upper.r", r)?;
                if r * u.h >= u.gamma / 2.0 {
                    return Err(bad(format!("upper: Rh = {} >= gamma/2", r * u.h)));
                }
            }
        }
        let u = &self.upper_discrete;
        if u.enabled {
            nonempty("upper_discrete.r", &u.r)?;
            positive("upper_discrete.mu", u.mu)?;
            positive("upper_discrete.h", u.h)?;
            if u.h >= H0_DISCRETE {
                return Err(bad(format!("upper_discrete: h = {} >= h0 = {H0_DISCRETE}", u.h)));
            }
            for &r in &u.r {
                positive("upper_discrete.r", r)?;
                if r * u.h < 2.0 / (std::f64::consts::E * u.mu) {
                    return Err(bad(format!("upper_discrete: Rh = {} < 2/(e mu)", r * u.h)));
                }
            }
        }
        for (i, b) in self.lower.iter().enumerate() {
            nonempty(&format!("lower[{i}].r"), &b.r)?;
            positive("lower.h", b.h)?;
            let mut close = 0;
            for &r in &b.r {
                let reg = RegimeParams::new(r, b.h).map_err(|e| bad(format!("lower[{i}]: {e}")))?;
                close += usize::from(reg.regime == Regime::CloseToContinuum);
            }
            if close < MIN_FIT_POINTS && b.r.len() - close < MIN_FIT_POINTS {
                return Err(bad(format!(
                    "lower[{i}]: need {MIN_FIT_POINTS} radii in at least one regime"
                )));
            }
        }
        let g = &self.gap;
        if g.enabled {
            positive("gap.gamma", g.gamma)?;
            if !g.log_offset.is_finite() {
                return Err(bad("gap.log_offset must be finite"));
            }
        }
        if !self.upper.enabled && !self.upper_discrete.enabled && self.lower.is_empty() {
            return Err(bad("nothing to do: no upper, upper_discrete or lower blocks"));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShellSource {
    /// `J_n(t0)` with its potential on `n in [0, nmax]`.
    JTestbed,
    /// Synthetic `M_N = N^power rate^{-N}` with zero potential.
    Geometric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlagExpectation {
    ForcesZero,
    NeverFlagged,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JTestbedBlock {
    pub t0: f64,
    pub nmax: usize,
}

impl Default for JTestbedBlock {
    fn default() -> Self {
        JTestbedBlock { t0: 2.0, nmax: 150 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometricBlock {
    pub d: usize,
    pub h: f64,
    pub rate: f64,
    pub power: f64,
    pub count: usize,
}

impl Default for GeometricBlock {
    fn default() -> Self {
        GeometricBlock {
            d: 1,
            h: 1.0,
            rate: 4.0,
            power: 0.0,
            count: 200,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JotaBlock {
    pub enabled: bool,
    pub n_lo: usize,
    pub n_hi: usize,
    pub tol: f64,
}

impl Default for JotaBlock {
    fn default() -> Self {
        JotaBlock {
            enabled: true,
            n_lo: 50,
            n_hi: 200,
            tol: 0.05,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UcConfig {
    pub seed: u64,
    pub source: ShellSource,
    /// Defaults to `never_flagged` for the testbed and `forces_zero` for the synthetic.
    pub expect: Option<FlagExpectation>,
    pub residual_tol: f64,
    pub j_testbed: JTestbedBlock,
    pub geometric: GeometricBlock,
    pub jota: JotaBlock,
}

impl Default for UcConfig {
    fn default() -> Self {
        UcConfig {
            seed: 0,
            source: ShellSource::JTestbed,
            expect: None,
            residual_tol: 1e-10,
            j_testbed: JTestbedBlock::default(),
            geometric: GeometricBlock::default(),
            jota: JotaBlock::default(),
        }
    }
}

impl UcConfig {
    pub fn expectation(&self) -> FlagExpectation {
        self.expect.unwrap_or(match self.source {
            ShellSource::JTestbed => FlagExpectation::NeverFlagged,
            ShellSource::Geometric => FlagExpectation::ForcesZero,
        })
    }

    pub fn validate(&self) -> Check {
        positive("residual_tol", self.residual_tol)?;
        match self.source {
            ShellSource::JTestbed => {
                positive("j_testbed.t0", self.j_testbed.t0)?;
                if self.j_testbed.nmax < 3 {
                    return Err(bad("j_testbed.nmax must be at least 3"));
                }
                let j = &self.jota;
                if j.enabled {
                    if j.n_lo < 2 || j.n_hi < j.n_lo + 3 {
                        return Err(bad("jota needs 2 <= n_lo < n_hi - 2"));
                    }
                    positive("jota.tol", j.tol)?;
                }
            }
            ShellSource::Geometric => {
                let g = &self.geometric;
                dimension(g.d)?;
                positive("geometric.h", g.h)?;
                positive("geometric.rate", g.rate)?;
                if !g.power.is_finite() {
                    return Err(bad("geometric.power must be finite"));
                }
                if g.count < 3 {
                    return Err(bad("geometric.count must be at least 3"));
                }
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaussianConfig {
    pub seed: u64,
    pub x: f64,
    pub t: f64,
    pub h: Vec<f64>,
}

impl Default for GaussianConfig {
    fn default() -> Self {
        GaussianConfig {
            seed: 0,
            x: 1.0,
            t: 1.0,
            h: (1..=6).map(|k| 0.5f64.powi(k)).collect(),
        }
    }
}

impl GaussianConfig {
    pub fn validate(&self) -> Check {
        positive("x", self.x)?;
        positive("t", self.t)?;
        nonempty("h", &self.h)?;
        for &h in &self.h {
            positive("h", h)?;
            let inv = 1.0 / h;
            if (inv - inv.round()).abs() > 1e-9 * inv {
                return Err(bad(format!("1/h must be an integer, got h = {h}")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_reach_nested_keys() {
        let o = vec!["pieces.fields=3".to_string(), "mode=elliptic".to_string()];
        let c: CarlemanAuditConfig = load(None, &o, Some(9)).unwrap();
        assert_eq!(c.pieces.fields, 3);
        assert_eq!(c.mode, CarlemanMode::Elliptic);
        assert_eq!(c.seed, 9);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected() {
        assert!(load::<GaussianConfig>(None, &["y=1".into()], None).is_err());
        assert!(load::<GaussianConfig>(None, &["x".into()], None).is_err());
        let c: GaussianConfig = load(None, &["h=[]".into()], None).unwrap();
        assert!(c.validate().is_err());
        let c: BoundsConfig = load(None, &["upper.r=[]".into()], None).unwrap();
        assert!(c.validate().is_err());
    }
}
