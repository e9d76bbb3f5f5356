//! Analytic outage probabilities for macro and femto users.
//!
//! For a fixed femtocell placement the interference-to-signal ratio is a
//! weighted sum of fading ratios; each ratio is replaced by its log-normal
//! surrogate, the sum is collapsed with Fenton-Wilkinson, and the outage
//! `P{SIR < gamma} = P{Y > 1/gamma}` is a Q-function. Placements are then
//! averaged either exhaustively (small grids) or by sampling them with their
//! own probabilities.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lognormal_algebra::{fenton_wilkinson_combine, lognormal_ccdf, CorrelationTable, WeightedTerm};
use crate::network_model::{
    configuration_probability, fue_weighted_terms, mue_weighted_terms, sample_configuration, FemtoConfiguration,
    Network, NetworkLayout, Point2,
};
use crate::ratio_approx::SurrogateSet;
use crate::simulation::RandomStream;

/// Grids up to this size are averaged exhaustively by [`outage_probability`].
pub const ENUMERATION_LIMIT: usize = 16;

/// Hard cap for [`outage_enumerated`].
pub const MAX_ENUMERATED_SUBREGIONS: usize = 20;

/// Positions used by [`average_outage`] unless told otherwise.
pub const DEFAULT_POSITIONS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Tier {
    Macro,
    Femto,
}

impl Tier {
    pub fn label(self) -> &'static str {
        match self {
            Tier::Macro => "mue",
            Tier::Femto => "fue",
        }
    }
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Tier {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mue" | "macro" => Ok(Tier::Macro),
            "fue" | "femto" => Ok(Tier::Femto),
            other => Err(Error::InvalidConfig(format!("unknown tier {other:?}"))),
        }
    }
}

/// Where and against what target outage is evaluated. For [`Tier::Macro`]
/// `position` is the user; for [`Tier::Femto`] it is the serving FBS centre.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutageQuery {
    pub tier: Tier,
    pub position: Point2,
    pub target_sir: f64,
    /// Femtocells per m^2.
    pub intensity: f64,
}

impl OutageQuery {
    pub fn new(tier: Tier, position: Point2, target_sir: f64, intensity: f64) -> Result<Self> {
        let q = OutageQuery {
            tier,
            position,
            target_sir,
            intensity,
        };
        q.validate()?;
        Ok(q)
    }

    fn validate(&self) -> Result<()> {
        if !(self.target_sir > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "target SIR must be positive, got {}",
                self.target_sir
            )));
        }
        if !(self.intensity >= 0.0 && self.intensity.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "femtocell intensity must be non-negative, got {}",
                self.intensity
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutageResult {
    pub probability: f64,
    pub configs_used: usize,
    /// Zero when the value is exact (enumeration, or no femtocells).
    pub std_error: f64,
}

/// Network plus the surrogate and correlation choices the analysis uses.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub network: Network,
    pub surrogates: SurrogateSet,
    pub correlations: CorrelationTable,
}

impl Scenario {
    /// Frozen fitted surrogates and the reference correlation table.
    pub fn new(network: Network) -> Self {
        Scenario {
            network,
            surrogates: SurrogateSet::fitted_defaults(),
            correlations: CorrelationTable::reference(),
        }
    }

    pub fn weighted_terms(&self, query: &OutageQuery, config: &FemtoConfiguration) -> Result<Vec<WeightedTerm>> {
        match query.tier {
            Tier::Macro => mue_weighted_terms(&self.network, &self.surrogates, query.position, config),
            Tier::Femto => fue_weighted_terms(&self.network, &self.surrogates, query.position, config),
        }
    }

    fn at_intensity(&self, intensity: f64) -> Result<Scenario> {
        Ok(Scenario {
            network: self.network.with_intensity(intensity)?,
            ..self.clone()
        })
    }
}

/// Outage for one femtocell placement.
pub fn outage_given_config(scn: &Scenario, query: &OutageQuery, config: &FemtoConfiguration) -> Result<f64> {
    query.validate()?;
    let terms = scn.weighted_terms(query, config)?;
    if terms.is_empty() {
        return Ok(0.0);
    }
    let y = fenton_wilkinson_combine(&terms, &scn.correlations)?;
    lognormal_ccdf(y, 1.0 / query.target_sir)
}

fn check_position(layout: &NetworkLayout, query: &OutageQuery) -> Result<()> {
    if layout.contains(query.position) {
        Ok(())
    } else {
        Err(Error::Geometry(format!(
            "position ({:.3}, {:.3}) is outside the central cell",
            query.position.x, query.position.y
        )))
    }
}

/// Mean of [`outage_given_config`] over `n_configs` sampled placements.
///
/// Placement `j` is drawn from substream `j` of `stream`, one uniform per
/// subregion, so runs at a higher intensity see a superset of the femtocells
/// seen at a lower one.
pub fn outage_sampled(
    scn: &Scenario,
    query: &OutageQuery,
    n_configs: usize,
    stream: &RandomStream,
) -> Result<OutageResult> {
    query.validate()?;
    if n_configs == 0 {
        return Err(Error::InvalidConfig("need at least one configuration".into()));
    }
    let scn = scn.at_intensity(query.intensity)?;
    check_position(&scn.network.layout, query)?;
    let grid = &scn.network.grid;
    if grid.p_occupancy == 0.0 {
        let q = outage_given_config(&scn, query, &FemtoConfiguration::empty(grid.n_subregions()))?;
        return Ok(OutageResult {
            probability: q,
            configs_used: n_configs,
            std_error: 0.0,
        });
    }
    let values = (0..n_configs)
        .into_par_iter()
        .map(|j| {
            let mut rng = stream.substream(j as u64);
            let config = sample_configuration(grid, &mut rng);
            outage_given_config(&scn, query, &config)
        })
        .collect::<Result<Vec<f64>>>()?;
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std_error = if values.len() > 1 {
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    } else {
        0.0
    };
    Ok(OutageResult {
        probability: mean.clamp(0.0, 1.0),
        configs_used: values.len(),
        std_error,
    })
}

/// Exact average over all `2^N` placements, each weighted by its
/// probability.
pub fn outage_enumerated(scn: &Scenario, query: &OutageQuery) -> Result<OutageResult> {
    query.validate()?;
    let scn = scn.at_intensity(query.intensity)?;
    check_position(&scn.network.layout, query)?;
    let grid = &scn.network.grid;
    let n = grid.n_subregions();
    if n > MAX_ENUMERATED_SUBREGIONS {
        return Err(Error::InvalidConfig(format!(
            "exhaustive averaging is limited to {MAX_ENUMERATED_SUBREGIONS} subregions, grid has {n}"
        )));
    }
    let count = 1u64 << n;
    let total = (0..count)
        .into_par_iter()
        .map(|mask| {
            let config = FemtoConfiguration::from_mask(mask, n);
            let w = configuration_probability(grid, &config)?;
            if w == 0.0 {
                return Ok(0.0);
            }
            Ok(w * outage_given_config(&scn, query, &config)?)
        })
        .collect::<Result<Vec<f64>>>()?
        .iter()
        .sum::<f64>();
    Ok(OutageResult {
        probability: total.clamp(0.0, 1.0),
        configs_used: count as usize,
        std_error: 0.0,
    })
}

/// Placement-averaged outage: exhaustive when the grid has at most
/// [`ENUMERATION_LIMIT`] subregions, sampled otherwise.
pub fn outage_probability(
    scn: &Scenario,
    query: &OutageQuery,
    n_configs: usize,
    stream: &RandomStream,
) -> Result<OutageResult> {
    if n_configs == 0 {
        return Err(Error::InvalidConfig("need at least one configuration".into()));
    }
    if scn.network.grid.n_subregions() <= ENUMERATION_LIMIT {
        outage_enumerated(scn, query)
    } else {
        outage_sampled(scn, query, n_configs, stream)
    }
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut x = 0.0;
    while i > 0 {
        x += (i % base) as f64 * f;
        i /= base;
        f *= inv;
    }
    x
}

/// First `n` points of the base-(2, 3) Halton sequence mapped onto the
/// hexagon's bounding box, keeping those inside the hexagon.
pub fn hexagon_positions(layout: &NetworkLayout, n: usize) -> Vec<Point2> {
    let (hx, hy) = (layout.r_macro_m, layout.apothem());
    let mut out = Vec::with_capacity(n);
    let mut i = 1u64;
    while out.len() < n {
        let p = Point2::new(
            hx * (2.0 * radical_inverse(i, 2) - 1.0),
            hy * (2.0 * radical_inverse(i, 3) - 1.0),
        );
        if layout.contains(p) && p.norm() > 0.0 {
            out.push(p);
        }
        i += 1;
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct AverageOutage {
    pub probability: f64,
    pub positions: Vec<Point2>,
    pub per_position: Vec<f64>,
}

/// Outage averaged over users (macro tier) or serving FBS centres (femto
/// tier) spread uniformly over the central hexagon.
///
/// Position `i` uses stream `stream.derive(i)` for its placements, so the
/// same positions and placements are reused across intensities.
pub fn average_outage(
    scn: &Scenario,
    tier: Tier,
    intensity: f64,
    target_sir: f64,
    n_positions: usize,
    n_configs: usize,
    stream: &RandomStream,
) -> Result<AverageOutage> {
    if n_positions == 0 {
        return Err(Error::InvalidConfig("need at least one position".into()));
    }
    let positions = hexagon_positions(&scn.network.layout, n_positions);
    let per_position = positions
        .par_iter()
        .enumerate()
        .map(|(i, &p)| {
            let q = OutageQuery::new(tier, p, target_sir, intensity)?;
            Ok(outage_probability(scn, &q, n_configs, &stream.derive(i as u64))?.probability)
        })
        .collect::<Result<Vec<f64>>>()?;
    let probability = per_position.iter().sum::<f64>() / per_position.len() as f64;
    Ok(AverageOutage {
        probability,
        positions,
        per_position,
    })
}
