//! Oracle suite behind `twotier validate`.
//!
//! Each check compares a measured value against a limit. When the configured
//! sample sizes cannot resolve the limit (three worst-case standard errors
//! exceed half of it) a check is reported as WARN instead of PASS/FAIL.

use std::fmt::Write as _;
use std::fs;

use twotier::capacity::{capacity_at, optimal_intensity, spatial_throughput, QosConstraint};
use twotier::lognormal_algebra::{
    estimate_delta, fenton_wilkinson_combine, log_spaced, lognormal_ccdf, q_function, DeltaMethod, WeightedTerm,
};
use twotier::outage_analysis::Tier;
use twotier::ratio_approx::{RatioKind, SurrogateSet};
use twotier::simulation::{ks_statistic, sample_log_ratio, simulate_ratio_ccdf, RandomStream};

use crate::commands::{capacity_curves, radial_outage};
use crate::config::RunConfig;
use crate::error::Result;
use crate::format::sig9;

pub const KS_STREAM: u64 = 10;
pub const CCDF_STREAM: u64 = 20;

/// Limits applied by the suite.
pub const KS_LIMIT_RAYLEIGH: f64 = 0.06;
pub const KS_LIMIT_LOGNORMAL: f64 = 0.08;
pub const CCDF_LIMIT: f64 = 0.05;
pub const OUTAGE_LIMIT: f64 = 0.05;
pub const DELTA_LIMIT: f64 = 0.01;
pub const SATURATION_LIMIT: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Warn,
}

impl Status {
    fn label(self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Warn => "WARN",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub status: Status,
    pub measured: f64,
    pub limit: f64,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Report {
    pub header: Vec<String>,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn failures(&self) -> usize {
        self.checks.iter().filter(|c| c.status == Status::Fail).count()
    }

    pub fn warnings(&self) -> usize {
        self.checks.iter().filter(|c| c.status == Status::Warn).count()
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for h in &self.header {
            let _ = writeln!(out, "# {h}");
        }
        for c in &self.checks {
            let _ = write!(
                out,
                "{} {:<28} measured={} limit={}",
                c.status.label(),
                c.name,
                sig9(c.measured),
                sig9(c.limit)
            );
            if !c.note.is_empty() {
                let _ = write!(out, " ({})", c.note);
            }
            out.push('\n');
        }
        let _ = writeln!(
            out,
            "# {} checks: {} passed, {} failed, {} warnings",
            self.checks.len(),
            self.checks.iter().filter(|c| c.status == Status::Pass).count(),
            self.failures(),
            self.warnings()
        );
        out
    }

    /// `ok` decides PASS/FAIL unless `resolvable` is false, which gives WARN.
    fn push(&mut self, name: impl Into<String>, measured: f64, limit: f64, ok: bool, resolvable: bool, note: String) {
        let status = match (resolvable, ok) {
            (false, _) => Status::Warn,
            (true, true) => Status::Pass,
            (true, false) => Status::Fail,
        };
        let note = if resolvable {
            note
        } else if note.is_empty() {
            "insufficient precision".to_string()
        } else {
            format!("insufficient precision; {note}")
        };
        self.checks.push(Check {
            name: name.into(),
            status,
            measured,
            limit,
            note,
        });
    }
}

fn resolvable(worst_se: f64, limit: f64) -> bool {
    3.0 * worst_se <= 0.5 * limit
}

fn normal_cdf(x: f64, m: f64, s: f64) -> f64 {
    1.0 - q_function((x - m) / s)
}

/// Runs every check. Deterministic in the configuration.
pub fn run(cfg: &RunConfig) -> Result<Report> {
    let mut report = Report {
        header: vec![
            "twotier validation report".into(),
            format!(
                "seed={} samples={} trials={} configs={} positions={} capacity_configs={}",
                cfg.seed, cfg.samples, cfg.trials, cfg.configs, cfg.positions, cfg.capacity_configs
            ),
        ],
        checks: Vec::new(),
    };
    let surrogates = SurrogateSet::fitted_defaults();
    let n = cfg.samples;

    // Surrogate fidelity: KS distance between simulated log-ratios and the
    // fitted normals. Critical value 1.36/sqrt(n) stands in for the noise.
    for (i, (kind, limit)) in [
        (RatioKind::RayleighOverRayleigh, KS_LIMIT_RAYLEIGH),
        (RatioKind::LogNormalOverRayleigh, KS_LIMIT_LOGNORMAL),
    ]
    .into_iter()
    .enumerate()
    {
        let mut zs = sample_log_ratio(kind, &RandomStream::new(cfg.seed, KS_STREAM + i as u64), n);
        let p = surrogates.get(kind);
        let d = ks_statistic(&mut zs, |z| normal_cdf(z, p.m, p.s));
        let ok = 1.36 / (n as f64).sqrt() <= 0.5 * limit;
        report.push(format!("ks_{}", kind.slug()), d, limit, d <= limit, ok, String::new());
    }

    // Shared-denominator correlation of two Rayleigh ratios is exactly 1/2.
    let rr = RatioKind::RayleighOverRayleigh;
    let d = estimate_delta((rr, rr), DeltaMethod::Calculated, n, cfg.seed, &surrogates)?;
    report.push(
        "delta_rayleigh_shared",
        (d - 0.5).abs(),
        DELTA_LIMIT,
        (d - 0.5).abs() <= DELTA_LIMIT,
        resolvable(1.0 / (n as f64).sqrt(), DELTA_LIMIT),
        format!("delta={}", sig9(d)),
    );

    // Two equal-weight Rayleigh ratios: Fenton-Wilkinson CCDF with the
    // configured coefficient against simulation.
    let corr = cfg.correlations()?;
    let delta = corr.get(rr, rr);
    let thresholds = log_spaced(0.1, 10.0, 100);
    let (worst, note) = match delta {
        Some(delta) => {
            let terms = [
                WeightedTerm::new(1.0, rr, surrogates.get(rr))?,
                WeightedTerm::new(1.0, rr, surrogates.get(rr))?,
            ];
            let y = fenton_wilkinson_combine(&terms, &corr)?;
            let sim = simulate_ratio_ccdf(
                &[rr, rr],
                &[1.0, 1.0],
                &thresholds,
                n,
                &RandomStream::new(cfg.seed, CCDF_STREAM),
            )?;
            let mut worst = 0.0f64;
            for (&t, &p) in thresholds.iter().zip(&sim.probabilities) {
                worst = worst.max((lognormal_ccdf(y, t)? - p).abs());
            }
            (worst, format!("delta={}", sig9(delta)))
        }
        None => (f64::INFINITY, "no coefficient for the pair".to_string()),
    };
    report.push(
        "fw_ccdf_two_rayleigh",
        worst,
        CCDF_LIMIT,
        worst <= CCDF_LIMIT,
        resolvable(0.5 / (n as f64).sqrt(), CCDF_LIMIT),
        note,
    );

    // Analytic against simulated outage at ten radii per tier.
    let base = cfg.base();
    let radii: Vec<f64> = (1..=10).map(|k| base.r_macro_m * k as f64 / 10.0).collect();
    for tier in [Tier::Macro, Tier::Femto] {
        for row in radial_outage(cfg, &base, tier, &radii)? {
            let gap = (row.analytic_q - row.simulated_q).abs();
            let se = (0.25 / cfg.trials as f64 + row.analytic_stderr * row.analytic_stderr).sqrt();
            report.push(
                format!("outage_{}_{:04.0}m", tier.label(), row.distance_m),
                gap,
                OUTAGE_LIMIT,
                gap <= OUTAGE_LIMIT,
                resolvable(se, OUTAGE_LIMIT),
                format!("analytic={} simulated={}", sig9(row.analytic_q), sig9(row.simulated_q)),
            );
        }
    }

    // Capacity behaviour on the tabulated outage curves.
    let curves = capacity_curves(cfg)?;
    let area = curves.area_m2;
    let st0 = spatial_throughput(&curves, 0.0)?;
    let st_op = spatial_throughput(&curves, cfg.avg_femtocells / area)?;
    report.push(
        "st_femtocells_over_none",
        st_op / st0,
        1.0,
        st_op > st0,
        true,
        format!("st0={} st={}", sig9(st0), sig9(st_op)),
    );

    let mut eps_m = cfg.eps_macro.clone();
    eps_m.sort_by(f64::total_cmp);
    let eps_f = [cfg.eps_femto, (cfg.eps_femto * 1.1).min(0.999)];
    let mut grid = Vec::new();
    for &em in &eps_m {
        for &ef in &eps_f {
            let qos = QosConstraint::new(em, ef)?;
            grid.push((em, ef, optimal_intensity(&curves, &qos, curves.search_max()).ok()));
        }
    }
    let tc = |em: f64, ef: f64, l: f64| -> Result<f64> { Ok(capacity_at(&curves, &QosConstraint::new(em, ef)?, l)?) };
    let top = curves.search_max();
    let mut worst_drop = 0.0f64;
    let mut feasible = true;
    for &(em, ef, l) in &grid {
        if l.is_none() {
            feasible = false;
            continue;
        }
        for &(em2, ef2, l2) in &grid {
            if em2 >= em && ef2 >= ef && l2.is_some() {
                worst_drop = worst_drop.max(tc(em, ef, top)? - tc(em2, ef2, top)?);
            }
        }
    }
    report.push(
        "tc_relaxing_qos",
        worst_drop,
        0.0,
        feasible && worst_drop <= 0.0,
        true,
        if feasible {
            String::new()
        } else {
            "infeasible at zero density".into()
        },
    );

    let mut worst_var = 0.0f64;
    let mut lambdas = Vec::new();
    for &em in &eps_m {
        let qos = QosConstraint::new(em, cfg.eps_femto)?;
        if let Ok(l) = optimal_intensity(&curves, &qos, top) {
            lambdas.push(format!("{}:{}", sig9(em), sig9(l * area)));
            let at = capacity_at(&curves, &qos, l)?;
            for f in [1.25, 1.5, 2.0] {
                worst_var = worst_var.max((capacity_at(&curves, &qos, f * l.max(top / 100.0))? - at).abs());
            }
        }
    }
    report.push(
        "tc_constant_above_optimum",
        worst_var,
        SATURATION_LIMIT,
        !lambdas.is_empty() && worst_var < SATURATION_LIMIT,
        true,
        format!("optimal femtocells {}", lambdas.join(" ")),
    );

    Ok(report)
}

/// Runs the suite and writes `validate_report.txt` to the output directory.
pub fn validate(cfg: &RunConfig) -> Result<Report> {
    let report = run(cfg)?;
    fs::create_dir_all(&cfg.output)?;
    fs::write(cfg.output.join("validate_report.txt"), report.render())?;
    Ok(report)
}
