//! Spatial throughput and QoS-limited transmission capacity.
//!
//! Both are read off average-outage curves tabulated on a grid of femtocell
//! intensities. The tabulated values are forced non-decreasing (pool adjacent
//! violators) and interpolated linearly, which keeps the inverse-outage search
//! well posed despite Monte Carlo noise.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::outage_analysis::{average_outage, Scenario, Tier};
use crate::simulation::RandomStream;

/// Relative tolerance of the inverse-outage bisection.
pub const BISECTION_REL_TOL: f64 = 1e-3;

/// Mean femtocell counts per macrocell at which outage curves are tabulated
/// by default.
pub const DEFAULT_FEMTOCELL_GRID: [f64; 9] = [0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QosConstraint {
    pub eps_macro: f64,
    pub eps_femto: f64,
}

impl QosConstraint {
    pub fn new(eps_macro: f64, eps_femto: f64) -> Result<Self> {
        for (name, e) in [("eps_macro", eps_macro), ("eps_femto", eps_femto)] {
            if !(e > 0.0 && e < 1.0) {
                return Err(Error::InvalidConfig(format!("{name} must lie in (0, 1), got {e}")));
            }
        }
        Ok(QosConstraint { eps_macro, eps_femto })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapacityResult {
    /// Successful transmissions per m^2 at the optimal intensity.
    pub spatial_throughput: f64,
    /// Femtocells per m^2.
    pub optimal_intensity: f64,
    pub transmission_capacity: f64,
}

/// How the outage curves are tabulated.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveSettings {
    /// Mean femtocells per macrocell at each grid point, ascending from 0.
    pub femtocells: Vec<f64>,
    pub target_macro: f64,
    pub target_femto: f64,
    pub positions: usize,
    pub configs: usize,
}

/// Least-squares non-decreasing fit (pool adjacent violators, unit weights).
pub fn isotonic_non_decreasing(values: &[f64]) -> Vec<f64> {
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(values.len());
    for &v in values {
        blocks.push((v, 1));
        while blocks.len() > 1 {
            let (b, nb) = blocks[blocks.len() - 1];
            let (a, na) = blocks[blocks.len() - 2];
            if a <= b {
                break;
            }
            blocks.pop();
            let last = blocks.last_mut().expect("two blocks present");
            *last = ((a * na as f64 + b * nb as f64) / (na + nb) as f64, na + nb);
        }
    }
    blocks
        .into_iter()
        .flat_map(|(v, n)| std::iter::repeat_n(v, n))
        .collect()
}

/// Smoothed average-outage curves `q_m(lambda)` and `q_f(lambda)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OutageCurves {
    /// Femtocells per m^2, ascending from 0.
    pub intensities: Vec<f64>,
    pub raw_macro: Vec<f64>,
    pub raw_femto: Vec<f64>,
    pub q_macro: Vec<f64>,
    pub q_femto: Vec<f64>,
    pub area_m2: f64,
}

impl OutageCurves {
    pub fn from_values(area_m2: f64, intensities: Vec<f64>, raw_macro: Vec<f64>, raw_femto: Vec<f64>) -> Result<Self> {
        if intensities.len() < 2 || intensities.len() != raw_macro.len() || intensities.len() != raw_femto.len() {
            return Err(Error::InvalidConfig(
                "outage curves need at least two points and matching lengths".into(),
            ));
        }
        if intensities[0] != 0.0 || intensities.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig(
                "curve intensities must start at 0 and increase strictly".into(),
            ));
        }
        if !(area_m2 > 0.0) {
            return Err(Error::InvalidConfig("cell area must be positive".into()));
        }
        let q_macro = isotonic_non_decreasing(&raw_macro);
        let q_femto = isotonic_non_decreasing(&raw_femto);
        Ok(OutageCurves {
            intensities,
            raw_macro,
            raw_femto,
            q_macro,
            q_femto,
            area_m2,
        })
    }

    /// Tabulates both tiers with [`average_outage`]. Grid point `k` and tier
    /// `t` share one stream across intensities, so the same positions and
    /// placement draws are reused at every density.
    pub fn compute(scn: &Scenario, settings: &CurveSettings, stream: &RandomStream) -> Result<Self> {
        let area = scn.network.layout.area_m2;
        let intensities: Vec<f64> = settings.femtocells.iter().map(|n| n / area).collect();
        let tier_stream = |t: Tier| stream.derive(t as u64);
        let eval = |t: Tier, target: f64| {
            intensities
                .par_iter()
                .map(|&l| {
                    average_outage(scn, t, l, target, settings.positions, settings.configs, &tier_stream(t))
                        .map(|a| a.probability)
                })
                .collect::<Result<Vec<f64>>>()
        };
        let raw_macro = eval(Tier::Macro, settings.target_macro)?;
        let raw_femto = eval(Tier::Femto, settings.target_femto)?;
        OutageCurves::from_values(area, intensities, raw_macro, raw_femto)
    }

    pub fn search_max(&self) -> f64 {
        *self.intensities.last().expect("at least two points")
    }

    fn interpolate(&self, values: &[f64], intensity: f64) -> f64 {
        let xs = &self.intensities;
        if intensity <= xs[0] {
            return values[0];
        }
        let k = xs.partition_point(|&x| x <= intensity);
        if k >= xs.len() {
            return values[xs.len() - 1];
        }
        let t = (intensity - xs[k - 1]) / (xs[k] - xs[k - 1]);
        values[k - 1] + t * (values[k] - values[k - 1])
    }

    /// Smoothed macro-user average outage; flat beyond the last grid point.
    pub fn q_macro_at(&self, intensity: f64) -> f64 {
        self.interpolate(&self.q_macro, intensity)
    }

    /// Smoothed femto-user average outage; flat beyond the last grid point.
    pub fn q_femto_at(&self, intensity: f64) -> f64 {
        self.interpolate(&self.q_femto, intensity)
    }
}

/// `(1/|H|) (1 - q_m) + lambda (1 - q_f)` on the smoothed curves.
pub fn spatial_throughput(curves: &OutageCurves, intensity: f64) -> Result<f64> {
    if !(intensity >= 0.0 && intensity.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "intensity must be non-negative, got {intensity}"
        )));
    }
    Ok(throughput(
        curves.area_m2,
        curves.q_macro_at(intensity),
        curves.q_femto_at(intensity),
        intensity,
    ))
}

fn throughput(area: f64, q_m: f64, q_f: f64, intensity: f64) -> f64 {
    (1.0 - q_m) / area + intensity * (1.0 - q_f)
}

/// Spatial throughput from freshly computed average outages, bypassing the
/// tabulated curves.
pub fn spatial_throughput_direct(
    scn: &Scenario,
    intensity: f64,
    settings: &CurveSettings,
    stream: &RandomStream,
) -> Result<f64> {
    let q = |t: Tier, target: f64| {
        average_outage(
            scn,
            t,
            intensity,
            target,
            settings.positions,
            settings.configs,
            &stream.derive(t as u64),
        )
        .map(|a| a.probability)
    };
    let q_m = q(Tier::Macro, settings.target_macro)?;
    let q_f = if intensity > 0.0 {
        q(Tier::Femto, settings.target_femto)?
    } else {
        0.0
    };
    Ok(throughput(scn.network.layout.area_m2, q_m, q_f, intensity))
}

/// Largest intensity in `[0, search_max]` whose outage stays within `eps`,
/// found by bisection on the non-decreasing curve.
fn inverse_outage(q: impl Fn(f64) -> f64, eps: f64, search_max: f64) -> f64 {
    if q(search_max) <= eps {
        return search_max;
    }
    let (mut lo, mut hi) = (0.0, search_max);
    while hi - lo > BISECTION_REL_TOL * hi {
        let mid = 0.5 * (lo + hi);
        if q(mid) <= eps {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// `min(q_m^-1(eps_m), q_f^-1(eps_f))` on `[0, search_max]`.
pub fn optimal_intensity(curves: &OutageCurves, qos: &QosConstraint, search_max: f64) -> Result<f64> {
    let q_m0 = curves.q_macro_at(0.0);
    if q_m0 > qos.eps_macro {
        return Err(Error::InfeasibleQos {
            tier: "macro",
            outage: q_m0,
            eps: qos.eps_macro,
        });
    }
    let q_f0 = curves.q_femto_at(0.0);
    if q_f0 > qos.eps_femto {
        return Err(Error::InfeasibleQos {
            tier: "femto",
            outage: q_f0,
            eps: qos.eps_femto,
        });
    }
    if !(search_max > 0.0) {
        return Err(Error::InvalidConfig("search_max must be positive".into()));
    }
    let macro_limit = inverse_outage(|l| curves.q_macro_at(l), qos.eps_macro, search_max);
    let femto_limit = inverse_outage(|l| curves.q_femto_at(l), qos.eps_femto, search_max);
    Ok(macro_limit.min(femto_limit))
}

/// Spatial throughput at the QoS-optimal intensity.
pub fn transmission_capacity(curves: &OutageCurves, qos: &QosConstraint) -> Result<CapacityResult> {
    let optimal = optimal_intensity(curves, qos, curves.search_max())?;
    let tau = spatial_throughput(curves, optimal)?;
    Ok(CapacityResult {
        spatial_throughput: tau,
        optimal_intensity: optimal,
        transmission_capacity: tau,
    })
}

/// Capacity seen when `intensity` femtocells per m^2 are requested: the
/// throughput at that intensity until the QoS limit, constant beyond it.
pub fn capacity_at(curves: &OutageCurves, qos: &QosConstraint, intensity: f64) -> Result<f64> {
    let optimal = optimal_intensity(curves, qos, curves.search_max())?;
    spatial_throughput(curves, intensity.min(optimal))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> OutageCurves {
        let area = 1000.0;
        let xs: Vec<f64> = (0..5).map(|k| k as f64 * 10.0 / area).collect();
        OutageCurves::from_values(
            area,
            xs,
            vec![0.1, 0.3, 0.25, 0.6, 0.8],
            vec![0.01, 0.02, 0.03, 0.05, 0.07],
        )
        .unwrap()
    }

    #[test]
    fn pav_matches_hand_results() {
        assert_eq!(isotonic_non_decreasing(&[1.0, 3.0, 2.0, 4.0]), vec![1.0, 2.5, 2.5, 4.0]);
        assert_eq!(isotonic_non_decreasing(&[3.0, 2.0, 1.0]), vec![2.0, 2.0, 2.0]);
        assert_eq!(isotonic_non_decreasing(&[]), Vec::<f64>::new());
        let up = [0.0, 0.1, 0.1, 0.7];
        assert_eq!(isotonic_non_decreasing(&up), up.to_vec());
    }

    #[test]
    fn interpolation_and_extrapolation() {
        let c = toy();
        assert_eq!(c.q_macro, vec![0.1, 0.275, 0.275, 0.6, 0.8]);
        assert!((c.q_macro_at(0.005) - 0.1875).abs() < 1e-12);
        assert_eq!(c.q_macro_at(1.0), 0.8);
        assert_eq!(c.q_femto_at(0.0), 0.01);
    }

    #[test]
    fn throughput_limits() {
        let c = toy();
        assert!((spatial_throughput(&c, 0.0).unwrap() - 0.9 / 1000.0).abs() < 1e-15);
        assert!(spatial_throughput(&c, -1.0).is_err());
    }

    #[test]
    fn optimal_intensity_satisfies_constraints() {
        let c = toy();
        let qos = QosConstraint::new(0.45, 0.045).unwrap();
        let l = optimal_intensity(&c, &qos, c.search_max()).unwrap();
        assert!(l > 0.0 && l < c.search_max());
        assert!(c.q_macro_at(l) <= qos.eps_macro + 1e-12);
        assert!(c.q_femto_at(l) <= qos.eps_femto + 1e-12);
        let slack = l * (1.0 + 2.0 * BISECTION_REL_TOL);
        assert!(c.q_macro_at(slack) > qos.eps_macro || c.q_femto_at(slack) > qos.eps_femto);
    }

    #[test]
    fn loose_constraints_never_bind() {
        let c = toy();
        let qos = QosConstraint::new(0.999, 0.999).unwrap();
        assert_eq!(optimal_intensity(&c, &qos, c.search_max()).unwrap(), c.search_max());
    }

    #[test]
    fn infeasible_at_zero() {
        let c = toy();
        let qos = QosConstraint::new(0.05, 0.5).unwrap();
        assert!(matches!(
            transmission_capacity(&c, &qos),
            Err(Error::InfeasibleQos { tier: "macro", .. })
        ));
        assert!(QosConstraint::new(0.0, 0.5).is_err());
        assert!(QosConstraint::new(0.5, 1.0).is_err());
    }

    #[test]
    fn capacity_saturates_and_relaxing_helps() {
        let c = toy();
        let strict = QosConstraint::new(0.45, 0.045).unwrap();
        let loose = QosConstraint::new(0.475, 0.045).unwrap();
        let r = transmission_capacity(&c, &strict).unwrap();
        assert_eq!(
            r.transmission_capacity,
            spatial_throughput(&c, r.optimal_intensity).unwrap()
        );
        let above: Vec<f64> = [1.1, 1.5, 3.0]
            .iter()
            .map(|f| capacity_at(&c, &strict, f * r.optimal_intensity).unwrap())
            .collect();
        assert!(above.iter().all(|&v| v == r.transmission_capacity));
        let relaxed = transmission_capacity(&c, &loose).unwrap();
        assert!(relaxed.optimal_intensity >= r.optimal_intensity);
        assert!(relaxed.transmission_capacity >= r.transmission_capacity);
    }
}
