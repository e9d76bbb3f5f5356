//! Run configuration: flat `key = value` text, one key per line, `#` starts a
//! comment. Every key is optional; the defaults describe the reference
//! deployment (500 m macrocells, 20 m femtocells, 50/22 dBm, alpha = 4,
//! beta = 3, 12 dB walls, 20 femtocells per macrocell on average).

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use twotier::lognormal_algebra::CorrelationTable;
use twotier::network_model::{build_layout, Network, PathLossParams, PowerProfile};
use twotier::outage_analysis::Scenario;
use twotier::ratio_approx::SurrogateSet;

use crate::error::{CliError, Result};

/// Every accepted key with its unit and meaning.
pub const KEYS: &[(&str, &str)] = &[
    ("r_macro_m", "macrocell radius, m"),
    ("r_femto_m", "femtocell radius, m"),
    ("rings", "rings of interfering macrocells (1 or 2)"),
    ("p_macro_dbm", "macro transmit power, dBm"),
    ("p_femto_dbm", "femto transmit power, dBm"),
    ("alpha", "outdoor path-loss exponent"),
    ("beta", "indoor path-loss exponent"),
    ("wall_loss_db", "loss per wall crossing, dB"),
    ("gamma_macro", "macro user SIR target, linear"),
    ("gamma_femto", "femto user SIR target, linear"),
    ("eps_macro", "macro outage limits, comma separated"),
    ("eps_femto", "femto outage limit"),
    ("avg_femtocells", "mean femtocells per macrocell for outage runs"),
    (
        "capacity_femtocells",
        "mean femtocells per macrocell grid for capacity runs, ascending from 0",
    ),
    ("subregions", "subregions per macrocell"),
    ("distance_points", "distances per outage sweep"),
    (
        "distance_start_fraction",
        "first sweep distance as a fraction of r_macro_m",
    ),
    (
        "sweep_scenarios",
        "p_femto_dbm/p_macro_dbm/r_macro_m triples, comma separated",
    ),
    ("trials", "Monte Carlo trials per simulated point"),
    ("configs", "femtocell placements per analytic point"),
    ("positions", "user or femtocell positions per average outage"),
    ("capacity_configs", "placements per position for capacity curves"),
    ("samples", "samples for ratio and correlation checks"),
    ("seed", "base random seed"),
    ("output", "output directory"),
    (
        "correlation_csv",
        "pair,delta table replacing the reference coefficients",
    ),
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepScenario {
    pub p_femto_dbm: f64,
    pub p_macro_dbm: f64,
    pub r_macro_m: f64,
}

impl FromStr for SweepScenario {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split('/').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(CliError::Config(format!(
                "sweep scenario {s:?} must look like p_femto/p_macro/r_macro"
            )));
        }
        let num = |t: &str| parse_f64("sweep_scenarios", t);
        Ok(SweepScenario {
            p_femto_dbm: num(parts[0])?,
            p_macro_dbm: num(parts[1])?,
            r_macro_m: num(parts[2])?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub r_macro_m: f64,
    pub r_femto_m: f64,
    pub rings: u32,
    pub p_macro_dbm: f64,
    pub p_femto_dbm: f64,
    pub alpha: f64,
    pub beta: f64,
    pub wall_loss_db: f64,
    pub gamma_macro: f64,
    pub gamma_femto: f64,
    pub eps_macro: Vec<f64>,
    pub eps_femto: f64,
    pub avg_femtocells: f64,
    pub capacity_femtocells: Vec<f64>,
    pub subregions: usize,
    pub distance_points: usize,
    pub distance_start_fraction: f64,
    pub sweep_scenarios: Vec<SweepScenario>,
    pub trials: usize,
    pub configs: usize,
    pub positions: usize,
    pub capacity_configs: usize,
    pub samples: usize,
    pub seed: u64,
    pub output: PathBuf,
    pub correlation_csv: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let scenario = |p_femto_dbm, p_macro_dbm, r_macro_m| SweepScenario {
            p_femto_dbm,
            p_macro_dbm,
            r_macro_m,
        };
        RunConfig {
            r_macro_m: 500.0,
            r_femto_m: 20.0,
            rings: 2,
            p_macro_dbm: 50.0,
            p_femto_dbm: 22.0,
            alpha: 4.0,
            beta: 3.0,
            wall_loss_db: 12.0,
            gamma_macro: 1.0,
            gamma_femto: 10.0,
            eps_macro: vec![0.45, 0.475],
            eps_femto: 0.045,
            avg_femtocells: 20.0,
            capacity_femtocells: twotier::capacity::DEFAULT_FEMTOCELL_GRID.to_vec(),
            subregions: 400,
            distance_points: 20,
            distance_start_fraction: 0.1,
            sweep_scenarios: vec![
                scenario(22.0, 50.0, 500.0),
                scenario(25.0, 50.0, 500.0),
                scenario(22.0, 53.0, 500.0),
                scenario(22.0, 50.0, 1000.0),
            ],
            trials: 100_000,
            configs: 2000,
            positions: 64,
            capacity_configs: 500,
            samples: 1_000_000,
            seed: 1,
            output: PathBuf::from("out"),
            correlation_csv: None,
        }
    }
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    v.trim()
        .parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| CliError::Config(format!("{key}: expected a number, got {v:?}")))
}

fn parse_int<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse::<T>()
        .map_err(|_| CliError::Config(format!("{key}: expected a non-negative integer, got {v:?}")))
}

fn parse_list(key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',').map(|t| parse_f64(key, t)).collect()
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Defaults overridden by the keys in `text`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected key = value", lineno + 1)))?;
            cfg.set(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        match key {
            "r_macro_m" => self.r_macro_m = parse_f64(key, v)?,
            "r_femto_m" => self.r_femto_m = parse_f64(key, v)?,
            "rings" => self.rings = parse_int(key, v)?,
            "p_macro_dbm" => self.p_macro_dbm = parse_f64(key, v)?,
            "p_femto_dbm" => self.p_femto_dbm = parse_f64(key, v)?,
            "alpha" => self.alpha = parse_f64(key, v)?,
            "beta" => self.beta = parse_f64(key, v)?,
            "wall_loss_db" => self.wall_loss_db = parse_f64(key, v)?,
            "gamma_macro" => self.gamma_macro = parse_f64(key, v)?,
            "gamma_femto" => self.gamma_femto = parse_f64(key, v)?,
            "eps_macro" => self.eps_macro = parse_list(key, v)?,
            "eps_femto" => self.eps_femto = parse_f64(key, v)?,
            "avg_femtocells" => self.avg_femtocells = parse_f64(key, v)?,
            "capacity_femtocells" => self.capacity_femtocells = parse_list(key, v)?,
            "subregions" => self.subregions = parse_int(key, v)?,
            "distance_points" => self.distance_points = parse_int(key, v)?,
            "distance_start_fraction" => self.distance_start_fraction = parse_f64(key, v)?,
            "sweep_scenarios" => self.sweep_scenarios = v.split(',').map(str::parse).collect::<Result<_>>()?,
            "trials" => self.trials = parse_int(key, v)?,
            "configs" => self.configs = parse_int(key, v)?,
            "positions" => self.positions = parse_int(key, v)?,
            "capacity_configs" => self.capacity_configs = parse_int(key, v)?,
            "samples" => self.samples = parse_int(key, v)?,
            "seed" => self.seed = parse_int(key, v)?,
            "output" => self.output = PathBuf::from(v),
            "correlation_csv" => self.correlation_csv = if v.is_empty() { None } else { Some(PathBuf::from(v)) },
            other => {
                let known: Vec<&str> = KEYS.iter().map(|k| k.0).collect();
                return Err(CliError::Config(format!(
                    "unknown key {other:?}; accepted keys: {}",
                    known.join(", ")
                )));
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CliError::Config(m));
        for (name, n) in [
            ("trials", self.trials),
            ("configs", self.configs),
            ("positions", self.positions),
            ("capacity_configs", self.capacity_configs),
            ("subregions", self.subregions),
        ] {
            if n == 0 {
                return bad(format!("{name} must be at least 1"));
            }
        }
        if self.samples < 2 {
            return bad("samples must be at least 2".into());
        }
        if self.distance_points < 2 {
            return bad("distance_points must be at least 2".into());
        }
        if !(self.distance_start_fraction > 0.0 && self.distance_start_fraction < 1.0) {
            return bad("distance_start_fraction must lie in (0, 1)".into());
        }
        if !(self.gamma_macro > 0.0 && self.gamma_femto > 0.0) {
            return bad("SIR targets must be positive".into());
        }
        if self.eps_macro.is_empty() {
            return bad("eps_macro needs at least one value".into());
        }
        for &e in self.eps_macro.iter().chain([&self.eps_femto]) {
            if !(e > 0.0 && e < 1.0) {
                return bad(format!("outage limits must lie in (0, 1), got {e}"));
            }
        }
        let grid = &self.capacity_femtocells;
        if grid.len() < 2 || grid[0] != 0.0 || grid.windows(2).any(|w| w[0] >= w[1]) {
            return bad("capacity_femtocells must start at 0, increase strictly and hold at least two values".into());
        }
        if self.sweep_scenarios.is_empty() {
            return bad("sweep_scenarios needs at least one entry".into());
        }
        if self.avg_femtocells.is_nan() || self.avg_femtocells < 0.0 {
            return bad("avg_femtocells must be non-negative".into());
        }
        PathLossParams::new(self.alpha, self.beta, self.wall_loss_db)?;
        PowerProfile::new(self.p_macro_dbm, self.p_femto_dbm)?;
        for s in &self.sweep_scenarios {
            build_layout(s.r_macro_m, self.rings, self.r_femto_m)?;
        }
        build_layout(self.r_macro_m, self.rings, self.r_femto_m)?;
        Ok(())
    }

    /// Scenario of the base parameters.
    pub fn base(&self) -> SweepScenario {
        SweepScenario {
            p_femto_dbm: self.p_femto_dbm,
            p_macro_dbm: self.p_macro_dbm,
            r_macro_m: self.r_macro_m,
        }
    }

    /// Network for `s` carrying `avg_femtocells` femtocells per macrocell.
    pub fn network(&self, s: &SweepScenario) -> Result<Network> {
        let layout = build_layout(s.r_macro_m, self.rings, self.r_femto_m)?;
        let intensity = self.avg_femtocells / layout.area_m2;
        Ok(Network::new(
            layout,
            self.subregions,
            intensity,
            PowerProfile::new(s.p_macro_dbm, s.p_femto_dbm)?,
            PathLossParams::new(self.alpha, self.beta, self.wall_loss_db)?,
        )?)
    }

    pub fn correlations(&self) -> Result<CorrelationTable> {
        match &self.correlation_csv {
            None => Ok(CorrelationTable::reference()),
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
                Ok(CorrelationTable::from_csv(&text)?)
            }
        }
    }

    pub fn scenario(&self, s: &SweepScenario) -> Result<Scenario> {
        Ok(Scenario {
            network: self.network(s)?,
            surrogates: SurrogateSet::fitted_defaults(),
            correlations: self.correlations()?,
        })
    }

    /// Sweep distances for a macrocell of radius `r_macro_m`.
    pub fn distances(&self, r_macro_m: f64) -> Vec<f64> {
        let f0 = self.distance_start_fraction;
        let n = self.distance_points;
        (0..n)
            .map(|k| r_macro_m * (f0 + (1.0 - f0) * k as f64 / (n - 1) as f64))
            .collect()
    }
}
