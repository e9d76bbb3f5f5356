//! The four subcommands. Each writes CSV under the configured output
//! directory and returns what it wrote so callers can inspect it.
//!
//! Stream ids: outage analytic placements use stream 1, outage simulation
//! stream 2 (one derived stream per tier and distance index), capacity
//! curves stream 3. Scenarios share streams, so comparisons between them use
//! common random numbers.

use std::fs;
use std::path::{Path, PathBuf};

use twotier::capacity::{
    capacity_at, optimal_intensity, spatial_throughput, CurveSettings, OutageCurves, QosConstraint,
};
use twotier::network_model::Point2;
use twotier::outage_analysis::{outage_probability, OutageQuery, Tier};
use twotier::ratio_approx::{
    fit_default, fit_error, ratio_log_pdf, FitConfig, QuadratureConfig, RatioApproximation, RatioKind,
};
use twotier::simulation::{simulate_outage, RandomStream};
use twotier::Error as ModelError;

use crate::config::{RunConfig, SweepScenario};
use crate::error::Result;
use crate::format::sig9;

pub const ANALYTIC_STREAM: u64 = 1;
pub const SIMULATION_STREAM: u64 = 2;
pub const CAPACITY_STREAM: u64 = 3;

/// Kinds fitted by `fit-ratios`; the other two follow by reciprocity and are
/// exactly log-normal respectively.
pub const FITTED_KINDS: [RatioKind; 2] = [RatioKind::RayleighOverRayleigh, RatioKind::LogNormalOverRayleigh];

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub struct FitOutput {
    pub fits: Vec<RatioApproximation>,
    pub files: Vec<PathBuf>,
}

/// Fits both Rayleigh-denominator ratios and tabulates exact, moment-matched
/// and fitted log-ratio densities.
pub fn fit_ratios(cfg: &RunConfig) -> Result<FitOutput> {
    ensure_dir(&cfg.output)?;
    let quad = QuadratureConfig::MOMENTS;
    let mut fits = Vec::new();
    let mut files = Vec::new();
    let mut summary = Vec::new();
    for kind in FITTED_KINDS {
        let fit = fit_default(kind, &quad)?;
        let grid = FitConfig::around(fit.exact_mean, fit.exact_var.sqrt()).z_grid;
        let exact = grid
            .iter()
            .map(|&z| ratio_log_pdf(kind, z))
            .collect::<twotier::Result<Vec<f64>>>()?;
        let moment = fit.moment_matched();
        summary.push(vec![
            kind.label().to_string(),
            sig9(fit.exact_mean),
            sig9(fit.exact_var),
            sig9(moment.m),
            sig9(moment.s),
            sig9(fit.fitted.m),
            sig9(fit.fitted.s),
            sig9(fit_error(&grid, &exact, moment)),
            sig9(fit_error(&grid, &exact, fit.fitted)),
        ]);
        let path = cfg.output.join(format!("ratio_pdf_{}.csv", kind.slug()));
        write_csv(
            &path,
            &["z", "exact", "moment_matched", "fitted"],
            grid.iter()
                .zip(&exact)
                .map(|(&z, &f)| vec![sig9(z), sig9(f), sig9(moment.log_pdf(z)), sig9(fit.fitted.log_pdf(z))]),
        )?;
        files.push(path);
        fits.push(fit);
    }
    let path = cfg.output.join("ratio_fits.csv");
    write_csv(
        &path,
        &[
            "kind",
            "exact_mean",
            "exact_variance",
            "moment_m",
            "moment_s",
            "fitted_m",
            "fitted_s",
            "l1_error_moment",
            "l1_error_fitted",
        ],
        summary,
    )?;
    files.insert(0, path);
    Ok(FitOutput { fits, files })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub tier: Tier,
    pub distance_m: f64,
    pub scenario: SweepScenario,
    pub analytic_q: f64,
    pub analytic_stderr: f64,
    pub simulated_q: f64,
    pub sim_stderr: f64,
}

fn target(cfg: &RunConfig, tier: Tier) -> f64 {
    match tier {
        Tier::Macro => cfg.gamma_macro,
        Tier::Femto => cfg.gamma_femto,
    }
}

/// Analytic and simulated outage at `(distance, 0)` for every listed
/// distance. Distance index `k` always uses the same streams.
pub fn radial_outage(cfg: &RunConfig, s: &SweepScenario, tier: Tier, distances: &[f64]) -> Result<Vec<SweepRow>> {
    let scn = cfg.scenario(s)?;
    let analytic_stream = RandomStream::new(cfg.seed, ANALYTIC_STREAM);
    let sim_base = RandomStream::new(cfg.seed, SIMULATION_STREAM);
    let intensity = scn.network.grid.intensity;
    distances
        .iter()
        .enumerate()
        .map(|(k, &d)| {
            let q = OutageQuery::new(tier, Point2::new(d, 0.0), target(cfg, tier), intensity)?;
            let a = outage_probability(&scn, &q, cfg.configs, &analytic_stream)?;
            let sim_stream = sim_base.derive((tier as u64) << 32 | k as u64);
            let m = simulate_outage(&q, cfg.trials, &sim_stream, &scn.network)?;
            Ok(SweepRow {
                tier,
                distance_m: d,
                scenario: *s,
                analytic_q: a.probability,
                analytic_stderr: a.std_error,
                simulated_q: m.probability,
                sim_stderr: m.std_error,
            })
        })
        .collect()
}

pub const SWEEP_HEADER: [&str; 8] = [
    "tier",
    "distance_m",
    "P_f_dbm",
    "P_m_dbm",
    "R_m",
    "analytic_q",
    "simulated_q",
    "sim_stderr",
];

/// Outage against distance for every configured scenario and both tiers;
/// rows ordered by scenario (as listed), tier, distance.
pub fn outage_sweep(cfg: &RunConfig) -> Result<Vec<SweepRow>> {
    ensure_dir(&cfg.output)?;
    let mut rows = Vec::new();
    for s in &cfg.sweep_scenarios {
        let distances = cfg.distances(s.r_macro_m);
        for tier in [Tier::Macro, Tier::Femto] {
            rows.extend(radial_outage(cfg, s, tier, &distances)?);
        }
    }
    write_csv(
        &cfg.output.join("outage_sweep.csv"),
        &SWEEP_HEADER,
        rows.iter().map(|r| {
            vec![
                r.tier.label().to_string(),
                sig9(r.distance_m),
                sig9(r.scenario.p_femto_dbm),
                sig9(r.scenario.p_macro_dbm),
                sig9(r.scenario.r_macro_m),
                sig9(r.analytic_q),
                sig9(r.simulated_q),
                sig9(r.sim_stderr),
            ]
        }),
    )?;
    Ok(rows)
}

/// Column name for the transmission capacity under macro limit `eps`:
/// `0.45` becomes `tc_eps045`.
pub fn tc_column(eps: f64) -> String {
    format!("tc_eps{}", sig9(eps).replace('.', ""))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CapacitySummary {
    pub curves: OutageCurves,
    /// `(eps_macro, optimal intensity)`; `None` when the limits cannot be met
    /// even without femtocells.
    pub optimal: Vec<(f64, Option<f64>)>,
    pub femtocells: Vec<f64>,
    pub spatial_throughput: Vec<f64>,
    /// One column per `eps_macro`, aligned with `femtocells`.
    pub capacity: Vec<Vec<Option<f64>>>,
    pub warnings: Vec<String>,
}

pub fn capacity_curves(cfg: &RunConfig) -> Result<OutageCurves> {
    let scn = cfg.scenario(&cfg.base())?;
    let settings = CurveSettings {
        femtocells: cfg.capacity_femtocells.clone(),
        target_macro: cfg.gamma_macro,
        target_femto: cfg.gamma_femto,
        positions: cfg.positions,
        configs: cfg.capacity_configs,
    };
    Ok(OutageCurves::compute(
        &scn,
        &settings,
        &RandomStream::new(cfg.seed, CAPACITY_STREAM),
    )?)
}

/// Spatial throughput and transmission capacity over the femtocell grid.
pub fn capacity_sweep(cfg: &RunConfig) -> Result<CapacitySummary> {
    ensure_dir(&cfg.output)?;
    let curves = capacity_curves(cfg)?;
    let femtocells = cfg.capacity_femtocells.clone();
    let intensities = curves.intensities.clone();
    let spatial = intensities
        .iter()
        .map(|&l| spatial_throughput(&curves, l))
        .collect::<twotier::Result<Vec<f64>>>()?;

    let mut warnings = Vec::new();
    let mut optimal = Vec::new();
    let mut capacity = Vec::new();
    for &eps in &cfg.eps_macro {
        let qos = QosConstraint::new(eps, cfg.eps_femto)?;
        match optimal_intensity(&curves, &qos, curves.search_max()) {
            Ok(l) => {
                optimal.push((eps, Some(l)));
                capacity.push(
                    intensities
                        .iter()
                        .map(|&x| capacity_at(&curves, &qos, x).map(Some))
                        .collect::<twotier::Result<Vec<_>>>()?,
                );
            }
            Err(e @ ModelError::InfeasibleQos { .. }) => {
                warnings.push(format!("eps_macro = {}: {e}", sig9(eps)));
                optimal.push((eps, None));
                capacity.push(vec![None; intensities.len()]);
            }
            Err(e) => return Err(e.into()),
        }
    }

    let mut header = vec!["avg_femtocells".to_string(), "spatial_throughput".to_string()];
    header.extend(cfg.eps_macro.iter().map(|&e| tc_column(e)));
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(
        &cfg.output.join("capacity_sweep.csv"),
        &header_refs,
        (0..femtocells.len()).map(|i| {
            let mut row = vec![sig9(femtocells[i]), sig9(spatial[i])];
            row.extend(capacity.iter().map(|col| col[i].map(sig9).unwrap_or_default()));
            row
        }),
    )?;
    write_csv(
        &cfg.output.join("capacity_outage_curves.csv"),
        &["avg_femtocells", "q_macro_raw", "q_macro", "q_femto_raw", "q_femto"],
        (0..femtocells.len()).map(|i| {
            vec![
                sig9(femtocells[i]),
                sig9(curves.raw_macro[i]),
                sig9(curves.q_macro[i]),
                sig9(curves.raw_femto[i]),
                sig9(curves.q_femto[i]),
            ]
        }),
    )?;
    Ok(CapacitySummary {
        curves,
        optimal,
        femtocells,
        spatial_throughput: spatial,
        capacity,
        warnings,
    })
}
