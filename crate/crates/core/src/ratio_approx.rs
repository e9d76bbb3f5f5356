//! Log-ratio densities of fading variables and their log-normal surrogates.
//!
//! Fading is normalized throughout: Rayleigh amplitudes have scale 1 and
//! log-normal shadowing is `LN(0, 1)`. All power scaling lives in the
//! deterministic weights built by [`crate::network_model`].
//!
//! For a ratio `e^Z = numerator / denominator` we work with the density of
//! `Z`. Its exact form is known (closed form for Rayleigh/Rayleigh, a single
//! integral evaluated by the trapezoidal rule for log-normal/Rayleigh), and the
//! surrogate is the normal density closest to it in summed absolute pointwise
//! error over a fixed abscissa grid.

use std::collections::BTreeMap;
use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Probability mass allowed outside a moment-quadrature window.
pub const MAX_TAIL_MASS: f64 = 1e-4;

/// Distribution class of a single fading variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Fading {
    /// Outdoor macro link, Rayleigh with unit scale.
    Rayleigh,
    /// Indoor femto link, `LN(0, 1)`.
    LogNormal,
}

/// Which fading ratio a term carries. `psi` is Rayleigh, `phi` is log-normal,
/// the `0` subscript marks the desired-link (denominator) variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RatioKind {
    /// `psi / psi0`: macro interferer seen by a macro user.
    RayleighOverRayleigh,
    /// `phi / psi0`: femto interferer seen by a macro user.
    LogNormalOverRayleigh,
    /// `psi / phi0`: macro interferer seen by a femto user.
    RayleighOverLogNormal,
    /// `phi / phi0`: femto interferer seen by a femto user.
    LogNormalOverLogNormal,
}

impl RatioKind {
    pub const ALL: [RatioKind; 4] = [
        RatioKind::RayleighOverRayleigh,
        RatioKind::LogNormalOverRayleigh,
        RatioKind::RayleighOverLogNormal,
        RatioKind::LogNormalOverLogNormal,
    ];

    pub fn from_parts(numerator: Fading, denominator: Fading) -> Self {
        match (numerator, denominator) {
            (Fading::Rayleigh, Fading::Rayleigh) => RatioKind::RayleighOverRayleigh,
            (Fading::LogNormal, Fading::Rayleigh) => RatioKind::LogNormalOverRayleigh,
            (Fading::Rayleigh, Fading::LogNormal) => RatioKind::RayleighOverLogNormal,
            (Fading::LogNormal, Fading::LogNormal) => RatioKind::LogNormalOverLogNormal,
        }
    }

    pub fn numerator(self) -> Fading {
        match self {
            RatioKind::RayleighOverRayleigh | RatioKind::RayleighOverLogNormal => Fading::Rayleigh,
            RatioKind::LogNormalOverRayleigh | RatioKind::LogNormalOverLogNormal => Fading::LogNormal,
        }
    }

    pub fn denominator(self) -> Fading {
        match self {
            RatioKind::RayleighOverRayleigh | RatioKind::LogNormalOverRayleigh => Fading::Rayleigh,
            RatioKind::RayleighOverLogNormal | RatioKind::LogNormalOverLogNormal => Fading::LogNormal,
        }
    }

    /// The kind of `denominator / numerator`.
    pub fn reciprocal(self) -> Self {
        RatioKind::from_parts(self.denominator(), self.numerator())
    }

    pub fn label(self) -> &'static str {
        match self {
            RatioKind::RayleighOverRayleigh => "psi/psi0",
            RatioKind::LogNormalOverRayleigh => "phi/psi0",
            RatioKind::RayleighOverLogNormal => "psi/phi0",
            RatioKind::LogNormalOverLogNormal => "phi/phi0",
        }
    }

    /// File-name friendly identifier.
    pub fn slug(self) -> &'static str {
        match self {
            RatioKind::RayleighOverRayleigh => "rayleigh_over_rayleigh",
            RatioKind::LogNormalOverRayleigh => "lognormal_over_rayleigh",
            RatioKind::RayleighOverLogNormal => "rayleigh_over_lognormal",
            RatioKind::LogNormalOverLogNormal => "lognormal_over_lognormal",
        }
    }
}

impl fmt::Display for RatioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for RatioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RatioKind::ALL
            .into_iter()
            .find(|k| k.label() == s.trim() || k.slug() == s.trim())
            .ok_or_else(|| Error::InvalidConfig(format!("unknown ratio kind {s:?}")))
    }
}

/// Parameters of `LN(m, s^2)`: the natural log of the variable is `N(m, s^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogNormalParams {
    pub m: f64,
    pub s: f64,
}

impl LogNormalParams {
    pub fn new(m: f64, s: f64) -> Result<Self> {
        if !m.is_finite() || !s.is_finite() || s <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "log-normal parameters need finite m and s > 0, got ({m}, {s})"
            )));
        }
        Ok(LogNormalParams { m, s })
    }

    /// `E[V]` for `V ~ LN(m, s^2)`.
    pub fn mean(&self) -> f64 {
        (self.m + 0.5 * self.s * self.s).exp()
    }

    /// Density of `ln V` at `z`.
    pub fn log_pdf(&self, z: f64) -> f64 {
        normal_pdf(z, self.m, self.s)
    }
}

pub fn normal_pdf(z: f64, mean: f64, std_dev: f64) -> f64 {
    let u = (z - mean) / std_dev;
    INV_SQRT_2PI / std_dev * (-0.5 * u * u).exp()
}

/// Composite trapezoidal rule on `[lower, upper]` with `steps` panels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureConfig {
    pub lower: f64,
    pub upper: f64,
    pub steps: usize,
}

impl QuadratureConfig {
    /// Window used for ratio moments.
    pub const MOMENTS: QuadratureConfig = QuadratureConfig {
        lower: -12.0,
        upper: 12.0,
        steps: 40_000,
    };

    /// Inner integral of the log-normal/Rayleigh density.
    pub const INNER: QuadratureConfig = QuadratureConfig {
        lower: -12.0,
        upper: 12.0,
        steps: 4_000,
    };

    pub fn new(lower: f64, upper: f64, steps: usize) -> Result<Self> {
        let q = QuadratureConfig { lower, upper, steps };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps < 2 {
            return Err(Error::InvalidConfig(format!(
                "quadrature needs at least 2 steps, got {}",
                self.steps
            )));
        }
        if !(self.lower.is_finite() && self.upper.is_finite() && self.lower < self.upper) {
            return Err(Error::InvalidConfig(format!(
                "quadrature window [{}, {}] is empty",
                self.lower, self.upper
            )));
        }
        Ok(())
    }

    pub fn node(&self, i: usize) -> f64 {
        self.lower + (self.upper - self.lower) * (i as f64) / (self.steps as f64)
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.steps).map(move |i| self.node(i))
    }

    pub fn step(&self) -> f64 {
        (self.upper - self.lower) / self.steps as f64
    }

    /// Trapezoidal rule applied to samples taken at [`Self::nodes`].
    pub fn integrate_samples(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.steps + 1);
        let n = values.len();
        let interior: f64 = values[1..n - 1].iter().sum();
        self.step() * (0.5 * (values[0] + values[n - 1]) + interior)
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        let mut acc = 0.5 * (f(self.lower) + f(self.upper));
        for i in 1..self.steps {
            acc += f(self.node(i));
        }
        acc * self.step()
    }
}

/// Density of `Z = ln(psi / psi0)` for i.i.d. Rayleigh `psi`, `psi0`:
/// `2 e^{2z} / (1 + e^{2z})^2`, a logistic density with scale 1/2.
pub fn rayleigh_ratio_log_pdf(z: f64) -> f64 {
    // Written in terms of |z| so that f(z) == f(-z) bit for bit.
    let t = (-2.0 * z.abs()).exp();
    2.0 * t / ((1.0 + t) * (1.0 + t))
}

/// Density of `Z = ln(phi / psi)` with `phi ~ LN(0, 1)` and Rayleigh `psi`.
///
/// `f(z) = e^{2 - 2z} / sqrt(2 pi) * Int exp{-(mu^2 + e^{-2(z-2)} e^{2 mu}) / 2} d mu`,
/// where the integral over `mu` is taken with the trapezoidal rule on `quad`.
pub fn lognormal_rayleigh_ratio_log_pdf(z: f64, quad: &QuadratureConfig) -> Result<f64> {
    quad.validate()?;
    // The prefactor is folded into the exponent so neither piece overflows.
    let lead = 2.0 - 2.0 * z;
    let shift = 2.0 * (2.0 - z);
    let integral = quad.integrate(|mu| {
        let e = lead - 0.5 * mu * mu - 0.5 * (shift + 2.0 * mu).exp();
        e.exp()
    });
    Ok(INV_SQRT_2PI * integral)
}

/// Exact density of `Z = ln(ratio)` for any of the four kinds.
pub fn ratio_log_pdf(kind: RatioKind, z: f64) -> Result<f64> {
    match kind {
        RatioKind::RayleighOverRayleigh => Ok(rayleigh_ratio_log_pdf(z)),
        RatioKind::LogNormalOverRayleigh => lognormal_rayleigh_ratio_log_pdf(z, &QuadratureConfig::INNER),
        RatioKind::RayleighOverLogNormal => lognormal_rayleigh_ratio_log_pdf(-z, &QuadratureConfig::INNER),
        RatioKind::LogNormalOverLogNormal => Ok(normal_pdf(z, 0.0, SQRT_2)),
    }
}

/// `(E[Z], V[Z])` of the log-ratio by quadrature against its exact density.
///
/// The log-normal/log-normal case is the difference of two independent
/// `N(0, 1)` variables and is returned as `(0, 2)` directly.
pub fn ratio_moments(kind: RatioKind, quad: &QuadratureConfig) -> Result<(f64, f64)> {
    quad.validate()?;
    if kind == RatioKind::LogNormalOverLogNormal {
        return Ok((0.0, 2.0));
    }
    let nodes: Vec<f64> = quad.nodes().collect();
    let density = nodes
        .par_iter()
        .map(|&z| ratio_log_pdf(kind, z))
        .collect::<Result<Vec<f64>>>()?;

    let mass = quad.integrate_samples(&density);
    let tail_mass = (1.0 - mass).abs();
    if tail_mass > MAX_TAIL_MASS {
        return Err(Error::WindowTooSmall {
            lower: quad.lower,
            upper: quad.upper,
            tail_mass,
        });
    }
    let weighted: Vec<f64> = nodes.iter().zip(&density).map(|(z, f)| z * f).collect();
    let mean = quad.integrate_samples(&weighted) / mass;
    let centered: Vec<f64> = nodes
        .iter()
        .zip(&density)
        .map(|(z, f)| (z - mean) * (z - mean) * f)
        .collect();
    let var = quad.integrate_samples(&centered) / mass;
    Ok((mean, var))
}

/// Inclusive arithmetic grid `lo, lo + step, ..., <= hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridRange {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl GridRange {
    pub fn new(lo: f64, hi: f64, step: f64) -> Self {
        GridRange { lo, hi, step }
    }

    pub fn len(&self) -> usize {
        if !(self.step > 0.0) || self.hi < self.lo {
            return 0;
        }
        ((self.hi - self.lo) / self.step + 1e-9).floor() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn value(&self, i: usize) -> f64 {
        self.lo + self.step * i as f64
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.value(i)).collect()
    }

    fn contains(&self, x: f64) -> bool {
        let last = self.value(self.len().saturating_sub(1));
        self.lo <= x && x <= last
    }
}

/// Abscissae and parameter grids for the surrogate search.
#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub z_grid: Vec<f64>,
    pub m_range: GridRange,
    pub s_range: GridRange,
}

impl FitConfig {
    /// Default search around the moment-matched normal: `z` on `[-6, 6]` step
    /// 0.01, `m` within 0.5 of the mean and `s` in `[0.3, 1.5]` times the
    /// standard deviation, both in steps of 0.001.
    pub fn around(mean: f64, std_dev: f64) -> Self {
        Self::with_steps(mean, std_dev, 0.01, 0.001)
    }

    /// Same windows as [`Self::around`] with custom resolutions.
    pub fn with_steps(mean: f64, std_dev: f64, z_step: f64, param_step: f64) -> Self {
        FitConfig {
            z_grid: GridRange::new(-6.0, 6.0, z_step).values(),
            m_range: GridRange::new(mean - 0.5, mean + 0.5, param_step),
            s_range: GridRange::new(0.3 * std_dev, 1.5 * std_dev, param_step),
        }
    }

    fn validate(&self, mean: f64, std_dev: f64) -> Result<()> {
        if self.z_grid.is_empty() || self.m_range.is_empty() || self.s_range.is_empty() {
            return Err(Error::InvalidConfig("fit grids must be non-empty".into()));
        }
        if self.s_range.lo <= 0.0 {
            return Err(Error::InvalidConfig(
                "the s search range must be strictly positive".into(),
            ));
        }
        if !self.m_range.contains(mean) || !self.s_range.contains(std_dev) {
            return Err(Error::InvalidConfig(format!(
                "fit ranges must bracket the moment-matched point ({mean:.4}, {std_dev:.4})"
            )));
        }
        Ok(())
    }
}

/// Exact moments of a log-ratio together with its fitted surrogate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioApproximation {
    pub kind: RatioKind,
    pub exact_mean: f64,
    pub exact_var: f64,
    pub fitted: LogNormalParams,
}

impl RatioApproximation {
    /// Normal with the exact mean and variance of the log-ratio.
    pub fn moment_matched(&self) -> LogNormalParams {
        LogNormalParams {
            m: self.exact_mean,
            s: self.exact_var.sqrt(),
        }
    }
}

/// Summed absolute difference between `density` (sampled on `z_grid`) and a
/// normal density.
pub fn fit_error(z_grid: &[f64], density: &[f64], params: LogNormalParams) -> f64 {
    let norm = INV_SQRT_2PI / params.s;
    let k = -0.5 / (params.s * params.s);
    z_grid
        .iter()
        .zip(density)
        .map(|(&z, &f)| {
            let d = z - params.m;
            (f - norm * (k * d * d).exp()).abs()
        })
        .sum()
}

/// Fits the log-normal surrogate of a ratio with the default grids.
pub fn fit_default(kind: RatioKind, quad: &QuadratureConfig) -> Result<RatioApproximation> {
    let (mean, var) = ratio_moments(kind, quad)?;
    fit_with_moments(kind, &FitConfig::around(mean, var.sqrt()), mean, var)
}

/// Exhaustive grid search for the normal density closest to the exact
/// log-ratio density. Ties go to the smaller `s`, then the smaller `|m|`.
pub fn fit_lognormal_surrogate(
    kind: RatioKind,
    fit: &FitConfig,
    quad: &QuadratureConfig,
) -> Result<RatioApproximation> {
    let (mean, var) = ratio_moments(kind, quad)?;
    fit_with_moments(kind, fit, mean, var)
}

fn fit_with_moments(kind: RatioKind, fit: &FitConfig, mean: f64, var: f64) -> Result<RatioApproximation> {
    if kind == RatioKind::LogNormalOverLogNormal {
        // Exactly log-normal; nothing to fit.
        return Ok(RatioApproximation {
            kind,
            exact_mean: 0.0,
            exact_var: 2.0,
            fitted: LogNormalParams { m: 0.0, s: SQRT_2 },
        });
    }
    fit.validate(mean, var.sqrt())?;

    let density = fit
        .z_grid
        .par_iter()
        .map(|&z| ratio_log_pdf(kind, z))
        .collect::<Result<Vec<f64>>>()?;

    let n_m = fit.m_range.len();
    let n_s = fit.s_range.len();
    let best = (0..n_m)
        .into_par_iter()
        .map(|i| {
            let m = fit.m_range.value(i);
            let mut best = Candidate::worst();
            for j in 0..n_s {
                let s = fit.s_range.value(j);
                let err = fit_error(&fit.z_grid, &density, LogNormalParams { m, s });
                best = best.better(Candidate { err, m, s, i, j });
            }
            best
        })
        .reduce(Candidate::worst, Candidate::better);

    if best.i == 0 || best.i + 1 == n_m {
        return Err(Error::BoundaryHit {
            param: "m",
            value: best.m,
        });
    }
    if best.j == 0 || best.j + 1 == n_s {
        return Err(Error::BoundaryHit {
            param: "s",
            value: best.s,
        });
    }

    Ok(RatioApproximation {
        kind,
        exact_mean: mean,
        exact_var: var,
        fitted: LogNormalParams { m: best.m, s: best.s },
    })
}

#[derive(Clone, Copy)]
struct Candidate {
    err: f64,
    m: f64,
    s: f64,
    i: usize,
    j: usize,
}

impl Candidate {
    fn worst() -> Self {
        Candidate {
            err: f64::INFINITY,
            m: f64::INFINITY,
            s: f64::INFINITY,
            i: usize::MAX,
            j: usize::MAX,
        }
    }

    // Total order on parameter values, so the winner does not depend on
    // the order in which candidates are visited.
    fn better(self, other: Candidate) -> Candidate {
        let key = |c: &Candidate| (c.err, c.s, c.m.abs(), c.m);
        let (a, b) = (key(&self), key(&other));
        let ord =
            a.0.total_cmp(&b.0)
                .then(a.1.total_cmp(&b.1))
                .then(a.2.total_cmp(&b.2))
                .then(a.3.total_cmp(&b.3));
        if ord.is_le() {
            self
        } else {
            other
        }
    }
}

/// Surrogate for the reciprocal ratio: `e^{-Z}` is `LN(-m, s^2)`.
pub fn reciprocal_surrogate(a: &RatioApproximation) -> RatioApproximation {
    RatioApproximation {
        kind: a.kind.reciprocal(),
        exact_mean: -a.exact_mean,
        exact_var: a.exact_var,
        fitted: LogNormalParams {
            m: -a.fitted.m,
            s: a.fitted.s,
        },
    }
}

/// The surrogate used for each ratio kind.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateSet {
    params: BTreeMap<RatioKind, LogNormalParams>,
}

impl SurrogateSet {
    /// Output of [`fit_default`] under [`QuadratureConfig::MOMENTS`], frozen
    /// so callers do not pay for the grid search on every run.
    pub fn fitted_defaults() -> Self {
        SurrogateSet::from_pairs([
            (
                RatioKind::RayleighOverRayleigh,
                LogNormalParams {
                    m: 0.0,
                    s: 0.815_069_902_691_023_5,
                },
            ),
            (
                RatioKind::LogNormalOverRayleigh,
                LogNormalParams {
                    m: -0.105_965_759_580_707_25,
                    s: 1.165_386_047_060_042_6,
                },
            ),
            (
                RatioKind::RayleighOverLogNormal,
                LogNormalParams {
                    m: 0.105_965_759_580_707_25,
                    s: 1.165_386_047_060_042_6,
                },
            ),
            (RatioKind::LogNormalOverLogNormal, LogNormalParams { m: 0.0, s: SQRT_2 }),
        ])
    }

    /// Builds the full set from the two fitted ratios; the other two kinds
    /// follow by reciprocity and the exact log-normal/log-normal law.
    pub fn from_fits(
        rayleigh_over_rayleigh: &RatioApproximation,
        lognormal_over_rayleigh: &RatioApproximation,
    ) -> Self {
        let rl = reciprocal_surrogate(lognormal_over_rayleigh);
        SurrogateSet::from_pairs([
            (RatioKind::RayleighOverRayleigh, rayleigh_over_rayleigh.fitted),
            (RatioKind::LogNormalOverRayleigh, lognormal_over_rayleigh.fitted),
            (RatioKind::RayleighOverLogNormal, rl.fitted),
            (RatioKind::LogNormalOverLogNormal, LogNormalParams { m: 0.0, s: SQRT_2 }),
        ])
    }

    /// Normals with the exact log-ratio moments.
    pub fn moment_matched() -> Self {
        let euler = 0.577_215_664_901_532_9_f64;
        // ln of a unit Rayleigh: mean (ln 2 - gamma)/2, variance pi^2/24.
        let ln_rayleigh_mean = 0.5 * (2f64.ln() - euler);
        let ln_rayleigh_var = PI * PI / 24.0;
        let lr_sd = (1.0 + ln_rayleigh_var).sqrt();
        SurrogateSet::from_pairs([
            (
                RatioKind::RayleighOverRayleigh,
                LogNormalParams {
                    m: 0.0,
                    s: (2.0 * ln_rayleigh_var).sqrt(),
                },
            ),
            (
                RatioKind::LogNormalOverRayleigh,
                LogNormalParams {
                    m: -ln_rayleigh_mean,
                    s: lr_sd,
                },
            ),
            (
                RatioKind::RayleighOverLogNormal,
                LogNormalParams {
                    m: ln_rayleigh_mean,
                    s: lr_sd,
                },
            ),
            (RatioKind::LogNormalOverLogNormal, LogNormalParams { m: 0.0, s: SQRT_2 }),
        ])
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (RatioKind, LogNormalParams)>) -> Self {
        SurrogateSet {
            params: pairs.into_iter().collect(),
        }
    }

    pub fn get(&self, kind: RatioKind) -> LogNormalParams {
        self.params[&kind]
    }

    pub fn set(&mut self, kind: RatioKind, params: LogNormalParams) {
        self.params.insert(kind, params);
    }
}

impl Default for SurrogateSet {
    fn default() -> Self {
        SurrogateSet::fitted_defaults()
    }
}
