//! Monte Carlo oracle: direct sampling of fading, femtocell placements and
//! SIR, with no log-normal surrogate anywhere.
//!
//! Randomness comes from ChaCha8 keyed by `seed`. Independent work items use
//! distinct `stream_id`s, and chunks inside one work item use disjoint
//! substreams of that stream (`2^40` words apart), so results do not depend on
//! how the work is scheduled across threads.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::function::erf::erfc_inv;

use crate::error::{Error, Result};
use crate::network_model::{Network, Point2};
use crate::outage_analysis::{OutageQuery, Tier};
use crate::ratio_approx::{Fading, RatioKind};

/// Trials evaluated per substream by [`simulate_outage`].
pub const CHUNK_TRIALS: usize = 8192;

const SUBSTREAM_SHIFT: u32 = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RandomStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RandomStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        RandomStream { seed, stream_id }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        self.substream(0)
    }

    /// Generator positioned at the start of block `k` of this stream.
    pub fn substream(&self, k: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng.set_word_pos((k as u128) << SUBSTREAM_SHIFT);
        rng
    }

    /// A sibling stream with a derived id, for nesting work items.
    pub fn derive(&self, tag: u64) -> RandomStream {
        let mixed = self.stream_id.wrapping_mul(0x9E37_79B9_7F4A_7C15).rotate_left(29)
            ^ tag.wrapping_mul(0xBF58_476D_1CE4_E5B9);
        RandomStream::new(self.seed, mixed)
    }
}

/// Uniform on the open interval `(0, 1)`.
pub fn open_uniform<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

/// Rayleigh(1) by inverse transform of `u`.
pub fn rayleigh_from_uniform(u: f64) -> f64 {
    (-2.0 * u.ln()).sqrt()
}

/// Standard normal by inverse CDF of `u`.
pub fn normal_from_uniform(u: f64) -> f64 {
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * u)
}

pub fn sample_fading<R: RngCore + ?Sized>(kind: Fading, rng: &mut R) -> f64 {
    let u = open_uniform(rng);
    match kind {
        Fading::Rayleigh => rayleigh_from_uniform(u),
        Fading::LogNormal => normal_from_uniform(u).exp(),
    }
}

pub fn sample_rayleigh(stream: &RandomStream, n: usize) -> Vec<f64> {
    let mut rng = stream.rng();
    (0..n).map(|_| sample_fading(Fading::Rayleigh, &mut rng)).collect()
}

pub fn sample_lognormal(stream: &RandomStream, n: usize) -> Vec<f64> {
    let mut rng = stream.rng();
    (0..n).map(|_| sample_fading(Fading::LogNormal, &mut rng)).collect()
}

/// `ln(numerator / denominator)` for independently drawn fading variables.
pub fn sample_log_ratio(kind: RatioKind, stream: &RandomStream, n: usize) -> Vec<f64> {
    let mut rng = stream.rng();
    (0..n)
        .map(|_| {
            let den = sample_fading(kind.denominator(), &mut rng);
            let num = sample_fading(kind.numerator(), &mut rng);
            num.ln() - den.ln()
        })
        .collect()
}

/// `P{X > t}` estimated at a fixed set of thresholds.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCcdf {
    pub thresholds: Vec<f64>,
    pub probabilities: Vec<f64>,
    pub samples: usize,
}

impl EmpiricalCcdf {
    /// Sorts `samples` in place and counts exceedances.
    pub fn from_samples(samples: &mut [f64], thresholds: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidConfig("empirical CCDF needs samples".into()));
        }
        if thresholds.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidConfig("thresholds must be sorted ascending".into()));
        }
        samples.sort_by(f64::total_cmp);
        let n = samples.len() as f64;
        let probabilities = thresholds
            .iter()
            .map(|&t| {
                let below = samples.partition_point(|&x| x <= t);
                (samples.len() - below) as f64 / n
            })
            .collect();
        Ok(EmpiricalCcdf {
            thresholds: thresholds.to_vec(),
            probabilities,
            samples: samples.len(),
        })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("threshold,ccdf\n");
        for (t, p) in self.thresholds.iter().zip(&self.probabilities) {
            out.push_str(&format!("{t:.9e},{p:.9e}\n"));
        }
        out
    }
}

/// Empirical CCDF of `sum_k weights_k * ratio_k`, all ratios sharing one
/// denominator draw per trial.
pub fn simulate_ratio_ccdf(
    kinds: &[RatioKind],
    weights: &[f64],
    thresholds: &[f64],
    trials: usize,
    stream: &RandomStream,
) -> Result<EmpiricalCcdf> {
    if kinds.is_empty() || kinds.len() != weights.len() {
        return Err(Error::InvalidConfig(
            "need one weight per ratio kind and at least one kind".into(),
        ));
    }
    if trials == 0 {
        return Err(Error::InvalidConfig("trials must be at least 1".into()));
    }
    let den = kinds[0].denominator();
    if let Some(&k) = kinds.iter().find(|k| k.denominator() != den) {
        return Err(Error::UnsupportedPair(kinds[0], k));
    }
    let chunks = trials.div_ceil(CHUNK_TRIALS);
    let mut sums: Vec<f64> = (0..chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut rng = stream.substream(c as u64);
            let n = CHUNK_TRIALS.min(trials - c * CHUNK_TRIALS);
            (0..n)
                .map(|_| {
                    let d = sample_fading(den, &mut rng);
                    kinds
                        .iter()
                        .zip(weights)
                        .map(|(k, w)| w * sample_fading(k.numerator(), &mut rng))
                        .sum::<f64>()
                        / d
                })
                .collect::<Vec<_>>()
        })
        .collect();
    EmpiricalCcdf::from_samples(&mut sums, thresholds)
}

/// Kolmogorov-Smirnov distance between the empirical law of `samples` and
/// `cdf`. Sorts `samples` in place.
pub fn ks_statistic(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Empirical outage fraction with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulatedOutage {
    pub probability: f64,
    pub std_error: f64,
    pub trials: usize,
}

struct Link {
    gain: f64,
    fading: Fading,
}

struct SirModel {
    signal_gain: f64,
    signal_fading: Fading,
    fixed: Vec<Link>,
    femto_gains: Vec<f64>,
    femto_fading: Fading,
    excluded: Option<usize>,
    p: f64,
}

fn sir_model(net: &Network, query: &OutageQuery) -> Result<SirModel> {
    let layout = &net.layout;
    if !layout.contains(query.position) {
        return Err(Error::Geometry(format!(
            "position ({:.3}, {:.3}) is outside the central cell",
            query.position.x, query.position.y
        )));
    }
    let alpha = net.pathloss.alpha;
    let beta = net.pathloss.beta;
    let wall = net.pathloss.wall_gain();
    let pm = net.powers.macro_mw();
    let pf = net.powers.femto_mw();
    let dist = |a: Point2, b: Point2| {
        let d = a.distance(b);
        if d > 0.0 {
            Ok(d)
        } else {
            Err(Error::Geometry(format!(
                "receiver at ({:.3}, {:.3}) is collocated with a transmitter",
                a.x, a.y
            )))
        }
    };
    match query.tier {
        Tier::Macro => {
            let r = query.position;
            let fixed = layout
                .interfering_macros()
                .iter()
                .map(|&m| {
                    Ok(Link {
                        gain: pm * dist(r, m)?.powf(-alpha),
                        fading: Fading::Rayleigh,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let femto_gains = net
                .grid
                .centers
                .iter()
                .map(|&c| Ok(wall * pf * dist(r, c)?.powf(-beta)))
                .collect::<Result<Vec<_>>>()?;
            Ok(SirModel {
                signal_gain: pm * dist(r, Point2::ORIGIN)?.powf(-alpha),
                signal_fading: Fading::Rayleigh,
                fixed,
                femto_gains,
                femto_fading: Fading::LogNormal,
                excluded: None,
                p: net.grid.p_occupancy,
            })
        }
        Tier::Femto => {
            let user = net.femto_user_position(query.position);
            let serving = net.grid.nearest(query.position);
            let fixed = layout
                .macro_positions
                .iter()
                .map(|&m| {
                    Ok(Link {
                        gain: wall * pm * dist(user, m)?.powf(-alpha),
                        fading: Fading::Rayleigh,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let femto_gains = net
                .grid
                .centers
                .iter()
                .enumerate()
                .map(|(i, &c)| {
                    if i == serving {
                        Ok(0.0)
                    } else {
                        Ok(wall * wall * pf * dist(user, c)?.powf(-beta))
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(SirModel {
                signal_gain: pf * layout.r_femto_m.powf(-beta),
                signal_fading: Fading::LogNormal,
                fixed,
                femto_gains,
                femto_fading: Fading::LogNormal,
                excluded: Some(serving),
                p: net.grid.p_occupancy,
            })
        }
    }
}

impl SirModel {
    /// One trial: `true` when the SIR falls below `gamma`.
    fn trial<R: RngCore + ?Sized>(&self, gamma: f64, rng: &mut R) -> bool {
        let signal = self.signal_gain * sample_fading(self.signal_fading, rng);
        let mut interference = 0.0;
        for link in &self.fixed {
            interference += link.gain * sample_fading(link.fading, rng);
        }
        if self.p > 0.0 {
            // Bernoulli(p) occupancy sampled by geometric gaps between hits.
            let log_q = (-self.p).ln_1p();
            let n = self.femto_gains.len();
            let mut i = 0usize;
            loop {
                let skip = if self.p >= 1.0 {
                    0.0
                } else {
                    (open_uniform(rng).ln() / log_q).floor()
                };
                if skip >= (n - i) as f64 {
                    break;
                }
                i += skip as usize;
                if self.excluded != Some(i) {
                    interference += self.femto_gains[i] * sample_fading(self.femto_fading, rng);
                }
                i += 1;
                if i >= n {
                    break;
                }
            }
        }
        signal < gamma * interference
    }
}

/// Direct Monte Carlo estimate of `P{SIR < target_sir}`.
///
/// Each trial draws a fresh femtocell placement (independent occupancy with
/// the grid's probability) and fresh fading on every link.
pub fn simulate_outage(
    query: &OutageQuery,
    trials: usize,
    stream: &RandomStream,
    net: &Network,
) -> Result<SimulatedOutage> {
    if trials == 0 {
        return Err(Error::InvalidConfig("trials must be at least 1".into()));
    }
    if !(query.target_sir > 0.0) {
        return Err(Error::InvalidConfig("target SIR must be positive".into()));
    }
    let net = net.with_intensity(query.intensity)?;
    let model = sir_model(&net, query)?;
    let chunks = trials.div_ceil(CHUNK_TRIALS);
    let hits: usize = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = stream.substream(c as u64);
            let n = CHUNK_TRIALS.min(trials - c * CHUNK_TRIALS);
            (0..n).filter(|_| model.trial(query.target_sir, &mut rng)).count()
        })
        .sum();
    let p = hits as f64 / trials as f64;
    Ok(SimulatedOutage {
        probability: p,
        std_error: (p * (1.0 - p) / trials as f64).sqrt(),
        trials,
    })
}
