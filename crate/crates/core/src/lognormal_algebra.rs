//! Sums of correlated log-normals collapsed to one log-normal
//! (Fenton-Wilkinson), and the ln-domain correlation coefficients those sums
//! need.

use std::collections::BTreeMap;
use std::f64::consts::SQRT_2;
use std::fmt;

use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::ratio_approx::{LogNormalParams, RatioKind, SurrogateSet};
use crate::simulation::{sample_fading, EmpiricalCcdf, RandomStream};

/// Gaussian tail probability `P{N(0,1) > x}`.
pub fn q_function(x: f64) -> f64 {
    0.5 * erfc(x / SQRT_2)
}

/// `P{V > threshold}` for `V ~ LN(m, s^2)`.
pub fn lognormal_ccdf(p: LogNormalParams, threshold: f64) -> Result<f64> {
    if !(threshold > 0.0) {
        return Err(Error::Domain(format!(
            "log-normal CCDF needs a positive threshold, got {threshold}"
        )));
    }
    Ok(q_function((threshold.ln() - p.m) / p.s))
}

/// `weight * e^{Z}` where `e^{Z}` is a fading ratio with a log-normal
/// surrogate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedTerm {
    pub weight: f64,
    pub kind: RatioKind,
    pub surrogate: LogNormalParams,
}

impl WeightedTerm {
    pub fn new(weight: f64, kind: RatioKind, surrogate: LogNormalParams) -> Result<Self> {
        if !(weight > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "term weights must be positive, got {weight}"
            )));
        }
        if !(surrogate.s > 0.0 && surrogate.s.is_finite() && surrogate.m.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "invalid surrogate ({}, {})",
                surrogate.m, surrogate.s
            )));
        }
        Ok(WeightedTerm {
            weight,
            kind,
            surrogate,
        })
    }
}

/// Symmetric table of ln-domain correlation coefficients by ratio kind.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CorrelationTable {
    delta: BTreeMap<(RatioKind, RatioKind), f64>,
}

fn ordered(a: RatioKind, b: RatioKind) -> (RatioKind, RatioKind) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

impl CorrelationTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Coefficients fitted against simulated CCDFs of equal-weight pair sums
    /// in the reference two-tier study.
    pub fn reference() -> Self {
        use RatioKind::*;
        let mut t = CorrelationTable::new();
        for (a, b, d) in [
            (RayleighOverRayleigh, RayleighOverRayleigh, 0.4857),
            (RayleighOverRayleigh, LogNormalOverRayleigh, 0.3879),
            (LogNormalOverRayleigh, LogNormalOverRayleigh, 0.4895),
            (RayleighOverLogNormal, RayleighOverLogNormal, 0.5252),
            (RayleighOverLogNormal, LogNormalOverLogNormal, 0.4856),
            (LogNormalOverLogNormal, LogNormalOverLogNormal, 0.5),
        ] {
            t.set(a, b, d).expect("reference coefficients are in range");
        }
        t
    }

    /// Same pairs as [`Self::reference`], every coefficient zero.
    pub fn zeros() -> Self {
        let mut t = Self::reference();
        for v in t.delta.values_mut() {
            *v = 0.0;
        }
        t
    }

    pub fn set(&mut self, a: RatioKind, b: RatioKind, delta: f64) -> Result<()> {
        if !(-1.0..=1.0).contains(&delta) {
            return Err(Error::InvalidConfig(format!(
                "correlation for ({a}, {b}) must lie in [-1, 1], got {delta}"
            )));
        }
        self.delta.insert(ordered(a, b), delta);
        Ok(())
    }

    pub fn get(&self, a: RatioKind, b: RatioKind) -> Option<f64> {
        self.delta.get(&ordered(a, b)).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = ((RatioKind, RatioKind), f64)> + '_ {
        self.delta.iter().map(|(&k, &v)| (k, v))
    }

    /// `pair,delta` rows with pairs written as `psi/psi0|phi/psi0`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("pair,delta\n");
        for ((a, b), d) in self.iter() {
            out.push_str(&format!("{}|{},{}\n", a.label(), b.label(), d));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut t = CorrelationTable::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (lineno == 0 && line.starts_with("pair")) {
                continue;
            }
            let bad = || Error::InvalidConfig(format!("correlation CSV line {}: {line:?}", lineno + 1));
            let (pair, delta) = line.split_once(',').ok_or_else(bad)?;
            let (a, b) = pair.split_once('|').ok_or_else(bad)?;
            let delta: f64 = delta.trim().parse().map_err(|_| bad())?;
            t.set(a.parse()?, b.parse()?, delta)?;
        }
        Ok(t)
    }
}

/// Fenton-Wilkinson moment match of `sum_k weight_k e^{Z_k}`.
///
/// With `u1 = E[sum]` and `u2 = E[sum^2]`,
///
/// ```text
/// u1 = sum_k w_k exp(m_k + s_k^2 / 2)
/// u2 = sum_k w_k^2 exp(2 m_k + 2 s_k^2)
///    + sum_{k != l} w_k w_l exp(m_k + m_l + (s_k^2 + s_l^2 + 2 d_kl s_k s_l) / 2)
/// m  = 2 ln u1 - ln u2 / 2,   s^2 = ln u2 - 2 ln u1
/// ```
///
/// Terms are accumulated in `(kind, weight)` order and grouped by kind and
/// surrogate; weights are divided by the largest one so the moments stay
/// finite whatever the dynamic range of the path losses.
pub fn fenton_wilkinson_combine(terms: &[WeightedTerm], corr: &CorrelationTable) -> Result<LogNormalParams> {
    if terms.is_empty() {
        return Err(Error::InvalidConfig("cannot combine an empty sum".into()));
    }
    for (index, t) in terms.iter().enumerate() {
        if !t.weight.is_finite() || !(t.weight > 0.0) {
            return Err(Error::Range { index });
        }
    }

    let mut order: Vec<usize> = (0..terms.len()).collect();
    order.sort_by(|&i, &j| {
        let (a, b) = (&terms[i], &terms[j]);
        a.kind
            .cmp(&b.kind)
            .then(a.surrogate.m.total_cmp(&b.surrogate.m))
            .then(a.surrogate.s.total_cmp(&b.surrogate.s))
            .then(a.weight.total_cmp(&b.weight))
    });
    let w_max = terms.iter().map(|t| t.weight).fold(0.0, f64::max);

    struct Group {
        kind: RatioKind,
        params: LogNormalParams,
        sum: f64,
        sum_sq: f64,
        first: usize,
    }
    let mut groups: Vec<Group> = Vec::new();
    for &i in &order {
        let t = &terms[i];
        let w = t.weight / w_max;
        match groups.last_mut() {
            Some(g) if g.kind == t.kind && g.params == t.surrogate => {
                g.sum += w;
                g.sum_sq += w * w;
            }
            _ => groups.push(Group {
                kind: t.kind,
                params: t.surrogate,
                sum: w,
                sum_sq: w * w,
                first: i,
            }),
        }
    }

    let mut u1 = 0.0;
    let mut u2 = 0.0;
    for (c, g) in groups.iter().enumerate() {
        let (m, s) = (g.params.m, g.params.s);
        u1 += g.sum * (m + 0.5 * s * s).exp();
        u2 += g.sum_sq * (2.0 * m + 2.0 * s * s).exp();
        for (d, h) in groups.iter().enumerate() {
            let cross = if c == d {
                g.sum * g.sum - g.sum_sq
            } else {
                g.sum * h.sum
            };
            if cross <= 0.0 {
                continue;
            }
            let delta = corr
                .get(g.kind, h.kind)
                .ok_or(Error::MissingCorrelation(g.kind, h.kind))?;
            let (m2, s2) = (h.params.m, h.params.s);
            u2 += cross * (m + m2 + 0.5 * (s * s + s2 * s2 + 2.0 * delta * s * s2)).exp();
        }
    }

    if !u1.is_finite() || !u2.is_finite() {
        let worst = groups
            .iter()
            .max_by(|a, b| a.params.s.total_cmp(&b.params.s))
            .map_or(0, |g| g.first);
        return Err(Error::Range { index: worst });
    }
    let (l1, l2) = (u1.ln(), u2.ln());
    let variance = l2 - 2.0 * l1;
    if !(variance > 0.0) {
        return Err(Error::DegenerateCombination { variance });
    }
    Ok(LogNormalParams {
        m: 2.0 * l1 - 0.5 * l2 + w_max.ln(),
        s: variance.sqrt(),
    })
}

/// How a pairwise coefficient is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeltaMethod {
    /// Sample correlation of the two simulated log-ratios.
    Calculated,
    /// Simulated covariance over the product of surrogate standard deviations.
    Approximated,
    /// Coefficient whose Fenton-Wilkinson CCDF of the unit-weight pair sum is
    /// closest, in squared error, to the simulated CCDF.
    MinError,
}

impl fmt::Display for DeltaMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DeltaMethod::Calculated => "calculated",
            DeltaMethod::Approximated => "approximated",
            DeltaMethod::MinError => "min-error",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaEstimate {
    pub delta_cal: f64,
    pub delta_apprx: f64,
    pub delta_minerr: f64,
}

/// Resolution of the min-error search over `[0, 1]`.
pub const MIN_ERROR_DELTA_STEP: f64 = 1e-4;

/// Thresholds at which the min-error CCDFs are compared: 50 points spaced
/// logarithmically over `[0.1, 10]`.
pub fn min_error_thresholds() -> Vec<f64> {
    log_spaced(0.1, 10.0, 50)
}

pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

struct PairSamples {
    z1: Vec<f64>,
    z2: Vec<f64>,
}

fn sample_pair(pair: (RatioKind, RatioKind), samples: usize, seed: u64) -> Result<PairSamples> {
    let (a, b) = pair;
    if a.denominator() != b.denominator() {
        return Err(Error::UnsupportedPair(a, b));
    }
    if samples < 2 {
        return Err(Error::InvalidConfig("need at least 2 samples".into()));
    }
    let mut rng = RandomStream::new(seed, 0).rng();
    let mut z1 = Vec::with_capacity(samples);
    let mut z2 = Vec::with_capacity(samples);
    for _ in 0..samples {
        let den = sample_fading(a.denominator(), &mut rng).ln();
        let n1 = sample_fading(a.numerator(), &mut rng).ln();
        let n2 = sample_fading(b.numerator(), &mut rng).ln();
        z1.push(n1 - den);
        z2.push(n2 - den);
    }
    Ok(PairSamples { z1, z2 })
}

fn covariance(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    let d = n - 1.0;
    (sxy / d, sxx / d, syy / d)
}

/// Estimates the ln-domain correlation between two ratios that share their
/// denominator variable. Deterministic in `(samples, seed)`.
pub fn estimate_delta(
    pair: (RatioKind, RatioKind),
    method: DeltaMethod,
    samples: usize,
    seed: u64,
    surrogates: &SurrogateSet,
) -> Result<f64> {
    let draws = sample_pair(pair, samples, seed)?;
    Ok(match method {
        DeltaMethod::Calculated => {
            let (cxy, cxx, cyy) = covariance(&draws.z1, &draws.z2);
            (cxy / (cxx * cyy).sqrt()).clamp(-1.0, 1.0)
        }
        DeltaMethod::Approximated => {
            let (cxy, _, _) = covariance(&draws.z1, &draws.z2);
            let (sa, sb) = (surrogates.get(pair.0).s, surrogates.get(pair.1).s);
            (cxy / (sa * sb)).clamp(-1.0, 1.0)
        }
        DeltaMethod::MinError => min_error_delta(pair, &draws, surrogates)?,
    })
}

/// All three estimates from one joint sample.
pub fn estimate_all(
    pair: (RatioKind, RatioKind),
    samples: usize,
    seed: u64,
    surrogates: &SurrogateSet,
) -> Result<DeltaEstimate> {
    let draws = sample_pair(pair, samples, seed)?;
    let (cxy, cxx, cyy) = covariance(&draws.z1, &draws.z2);
    let (sa, sb) = (surrogates.get(pair.0).s, surrogates.get(pair.1).s);
    Ok(DeltaEstimate {
        delta_cal: (cxy / (cxx * cyy).sqrt()).clamp(-1.0, 1.0),
        delta_apprx: (cxy / (sa * sb)).clamp(-1.0, 1.0),
        delta_minerr: min_error_delta(pair, &draws, surrogates)?,
    })
}

fn min_error_delta(pair: (RatioKind, RatioKind), draws: &PairSamples, surrogates: &SurrogateSet) -> Result<f64> {
    let thresholds = min_error_thresholds();
    let mut sums: Vec<f64> = draws.z1.iter().zip(&draws.z2).map(|(a, b)| a.exp() + b.exp()).collect();
    let empirical = EmpiricalCcdf::from_samples(&mut sums, &thresholds)?;

    let terms = [
        WeightedTerm::new(1.0, pair.0, surrogates.get(pair.0))?,
        WeightedTerm::new(1.0, pair.1, surrogates.get(pair.1))?,
    ];
    let steps = (1.0 / MIN_ERROR_DELTA_STEP).round() as usize;
    let mut best = (f64::INFINITY, 0.0);
    for i in 0..=steps {
        let delta = i as f64 * MIN_ERROR_DELTA_STEP;
        let mut table = CorrelationTable::new();
        table.set(pair.0, pair.1, delta)?;
        let fw = match fenton_wilkinson_combine(&terms, &table) {
            Ok(p) => p,
            Err(Error::DegenerateCombination { .. }) => continue,
            Err(e) => return Err(e),
        };
        let err: f64 = thresholds
            .iter()
            .zip(&empirical.probabilities)
            .map(|(&t, &p)| {
                let a = q_function((t.ln() - fw.m) / fw.s);
                (a - p) * (a - p)
            })
            .sum();
        if err < best.0 {
            best = (err, delta);
        }
    }
    Ok(best.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    use RatioKind::*;

    #[test]
    fn q_function_values() {
        assert_eq!(q_function(0.0), 0.5);
        assert!((q_function(1.6449) - 0.05).abs() < 1e-4);
        assert!((q_function(-2.0) - (1.0 - q_function(2.0))).abs() < 1e-15);
        let mut last = 1.0;
        for i in -40..=40 {
            let q = q_function(i as f64 * 0.2);
            assert!(q < last);
            last = q;
        }
    }

    #[test]
    fn q_function_against_density_quadrature() {
        // Q(1.6449) = int_{1.6449}^{inf} phi(t) dt, trapezoid on a long window
        let (a, b, n) = (1.6449_f64, 40.0_f64, 400_000);
        let h = (b - a) / n as f64;
        let phi = |t: f64| (-0.5 * t * t).exp() / (2.0 * PI).sqrt();
        let mut acc = 0.5 * (phi(a) + phi(b));
        for i in 1..n {
            acc += phi(a + i as f64 * h);
        }
        assert!((acc * h - q_function(1.6449)).abs() < 1e-9);
    }

    #[test]
    fn lognormal_ccdf_medians() {
        assert_eq!(lognormal_ccdf(LogNormalParams { m: 0.0, s: 1.0 }, 1.0).unwrap(), 0.5);
        let p = LogNormalParams { m: 2.0, s: 0.7 };
        assert!((lognormal_ccdf(p, 2f64.exp()).unwrap() - 0.5).abs() < 1e-15);
        let gamma = 1.0;
        let rr = LogNormalParams { m: 0.0, s: 0.7979 };
        assert_eq!(lognormal_ccdf(rr, 1.0 / gamma).unwrap(), 0.5);
        assert!(matches!(lognormal_ccdf(rr, 0.0), Err(Error::Domain(_))));
        assert!(matches!(lognormal_ccdf(rr, -1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn single_term_is_returned_unchanged() {
        let p = LogNormalParams { m: -0.4, s: 1.3 };
        let t = WeightedTerm::new(1.0, RayleighOverRayleigh, p).unwrap();
        let out = fenton_wilkinson_combine(&[t], &CorrelationTable::new()).unwrap();
        assert!((out.m - p.m).abs() < 1e-12);
        assert!((out.s - p.s).abs() < 1e-12);
    }

    #[test]
    fn two_independent_terms_by_hand() {
        let p = LogNormalParams { m: 0.0, s: 1.0 };
        let terms = [
            WeightedTerm::new(1.0, RayleighOverRayleigh, p).unwrap(),
            WeightedTerm::new(1.0, RayleighOverRayleigh, p).unwrap(),
        ];
        let mut corr = CorrelationTable::new();
        corr.set(RayleighOverRayleigh, RayleighOverRayleigh, 0.0).unwrap();
        let out = fenton_wilkinson_combine(&terms, &corr).unwrap();
        let e = std::f64::consts::E;
        let u1 = 2.0 * e.sqrt();
        let u2 = 2.0 * e * e + 2.0 * e;
        assert!((out.m - (2.0 * u1.ln() - 0.5 * u2.ln())).abs() < 1e-12);
        assert!((out.s - (u2.ln() - 2.0 * u1.ln()).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn weight_scaling_shifts_mean() {
        let corr = CorrelationTable::reference();
        let s = SurrogateSet::fitted_defaults();
        let base: Vec<WeightedTerm> = [
            (0.3, RayleighOverRayleigh),
            (2.0, LogNormalOverRayleigh),
            (0.05, RayleighOverRayleigh),
        ]
        .iter()
        .map(|&(w, k)| WeightedTerm::new(w, k, s.get(k)).unwrap())
        .collect();
        let scaled: Vec<WeightedTerm> = base
            .iter()
            .map(|t| WeightedTerm {
                weight: 10.0 * t.weight,
                ..*t
            })
            .collect();
        let a = fenton_wilkinson_combine(&base, &corr).unwrap();
        let b = fenton_wilkinson_combine(&scaled, &corr).unwrap();
        assert!((b.m - a.m - 10f64.ln()).abs() < 1e-12);
        assert!((b.s - a.s).abs() < 1e-12);
    }

    #[test]
    fn missing_pair_and_bad_weights() {
        let s = SurrogateSet::fitted_defaults();
        let terms = [
            WeightedTerm::new(1.0, RayleighOverRayleigh, s.get(RayleighOverRayleigh)).unwrap(),
            WeightedTerm::new(1.0, LogNormalOverLogNormal, s.get(LogNormalOverLogNormal)).unwrap(),
        ];
        assert!(matches!(
            fenton_wilkinson_combine(&terms, &CorrelationTable::reference()),
            Err(Error::MissingCorrelation(..))
        ));
        let inf = WeightedTerm {
            weight: f64::INFINITY,
            ..terms[0]
        };
        assert!(matches!(
            fenton_wilkinson_combine(&[terms[0], inf], &CorrelationTable::reference()),
            Err(Error::Range { index: 1 })
        ));
        assert!(WeightedTerm::new(0.0, RayleighOverRayleigh, s.get(RayleighOverRayleigh)).is_err());
        assert!(fenton_wilkinson_combine(&[], &CorrelationTable::reference()).is_err());
    }

    #[test]
    fn huge_dynamic_range_does_not_overflow() {
        let s = SurrogateSet::fitted_defaults();
        let terms = [
            WeightedTerm::new(1e300, RayleighOverRayleigh, s.get(RayleighOverRayleigh)).unwrap(),
            WeightedTerm::new(1e-300, RayleighOverRayleigh, s.get(RayleighOverRayleigh)).unwrap(),
        ];
        let out = fenton_wilkinson_combine(&terms, &CorrelationTable::reference()).unwrap();
        assert!(out.m.is_finite() && out.s.is_finite());
        assert!((out.m - 300.0 * 10f64.ln()).abs() < 1e-6);
    }

    #[test]
    fn table_is_symmetric_and_round_trips_csv() {
        let t = CorrelationTable::reference();
        for a in RatioKind::ALL {
            for b in RatioKind::ALL {
                assert_eq!(t.get(a, b), t.get(b, a));
            }
        }
        assert_eq!(t.get(LogNormalOverRayleigh, RayleighOverRayleigh), Some(0.3879));
        let back = CorrelationTable::from_csv(&t.to_csv()).unwrap();
        assert_eq!(back, t);
        assert!(CorrelationTable::new()
            .set(RayleighOverRayleigh, RayleighOverRayleigh, 1.5)
            .is_err());
        assert!(CorrelationTable::from_csv("pair,delta\npsi/psi0,0.3\n").is_err());
    }

    #[test]
    fn shared_lognormal_denominator_gives_one_half() {
        let s = SurrogateSet::fitted_defaults();
        let d = estimate_delta(
            (LogNormalOverLogNormal, LogNormalOverLogNormal),
            DeltaMethod::Calculated,
            200_000,
            3,
            &s,
        )
        .unwrap();
        assert!((d - 0.5).abs() < 0.01, "{d}");
    }

    #[test]
    fn mismatched_denominators_are_rejected() {
        let s = SurrogateSet::fitted_defaults();
        let err = estimate_delta(
            (RayleighOverRayleigh, RayleighOverLogNormal),
            DeltaMethod::MinError,
            1_000,
            1,
            &s,
        );
        assert!(matches!(err, Err(Error::UnsupportedPair(..))));
    }

    #[test]
    fn estimates_are_deterministic() {
        let s = SurrogateSet::fitted_defaults();
        let pair = (RayleighOverRayleigh, LogNormalOverRayleigh);
        let a = estimate_all(pair, 20_000, 11, &s).unwrap();
        let b = estimate_all(pair, 20_000, 11, &s).unwrap();
        assert_eq!(a, b);
        for d in [a.delta_cal, a.delta_apprx, a.delta_minerr] {
            assert!((-1.0..=1.0).contains(&d));
        }
    }
}
