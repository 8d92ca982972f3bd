//! Run configuration: defaults, flat TOML files and flag overrides.

use std::f64::consts::{FRAC_PI_4, PI};
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;

use sqclock::atom::{AtomParams, ClockTemplate, MicrowaveCalibration};
use sqclock::noise::NoiseSpec;
use sqclock::squeezing::{squeeze_parameter, SqueezedVacuumSpec};

use crate::units::{parse_list, parse_quantity, Dim};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MwCalibration {
    /// `pi` for fringe scans, `return` for the noise experiments.
    Auto,
    Pi,
    Return,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum TomoMethod {
    Radon,
    Mle,
}

/// Classical clock noise in units of the standard quantum limit.
pub const DEFAULT_CLASSICAL_RATIO: f64 = 1.48;

/// Every tunable parameter, in SI units (fields in gauss).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub atoms: u64,
    /// Spin-changing collision rate (rad/s).
    pub omega: f64,
    pub t_spin: f64,
    /// Overrides `omega * t_spin` when set.
    pub r: Option<f64>,
    pub tau_mw: f64,
    pub tau_rf: f64,
    pub tau_ramsey: f64,
    pub mw_calibration: MwCalibration,
    /// Operating (mid-fringe) detuning (Hz).
    pub delta: f64,
    /// Scan detunings (Hz).
    pub deltas: Vec<f64>,
    pub q: f64,
    pub delta_rf: f64,
    pub sigma_b: f64,
    pub kappa_b: f64,
    pub field_offset: f64,
    pub detection_sigma: f64,
    pub technical_sigma: f64,
    pub rf_power_sigma: f64,
    pub mw_power_sigma: f64,
    /// Classical `N (Delta theta)^2` the technical floor is tuned to; when
    /// unset, `technical_sigma` is used as given.
    pub target_sql_ratio: Option<f64>,
    pub n_shots: usize,
    pub k_c: f64,
    pub grid_points: usize,
    pub grid_half_width: f64,
    pub phases: usize,
    pub samples: usize,
    pub tomo_method: TomoMethod,
    pub n_max: usize,
    pub iterations: usize,
    pub bin_width: f64,
    /// Local-oscillator phase at zero adjustment time (rad).
    pub phi0: f64,
    /// Phase advance rate during the adjustment time (Hz).
    pub nu_adj: f64,
    pub adjust_times: Vec<f64>,
    pub clock_hz: f64,
    pub dt: f64,
    pub overlapping: bool,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            atoms: 10_000,
            omega: 2.0 * PI * 3.9,
            t_spin: 0.032,
            r: None,
            tau_mw: ClockTemplate::NOMINAL_TAU_MW,
            tau_rf: ClockTemplate::NOMINAL_TAU_RF,
            tau_ramsey: 0.0,
            mw_calibration: MwCalibration::Auto,
            delta: -5.5e3,
            deltas: (0..=400).map(|k| -20e3 + 100.0 * k as f64).collect(),
            q: 0.0,
            delta_rf: 0.0,
            sigma_b: 100e-6,
            kappa_b: 7.0e5,
            field_offset: 0.0,
            detection_sigma: 16.0,
            technical_sigma: 0.0,
            rf_power_sigma: 0.0,
            mw_power_sigma: 0.0,
            target_sql_ratio: Some(DEFAULT_CLASSICAL_RATIO),
            n_shots: 10_000,
            k_c: 2.0,
            grid_points: 61,
            grid_half_width: 4.0,
            phases: 20,
            samples: 100,
            tomo_method: TomoMethod::Radon,
            n_max: sqclock::tomography::DEFAULT_MLE_N_MAX,
            iterations: sqclock::tomography::DEFAULT_ITERATIONS,
            bin_width: sqclock::tomography::DEFAULT_BIN_WIDTH,
            phi0: 0.0,
            nu_adj: 1.0 / (8.0 * 300e-6),
            adjust_times: (0..=50).map(|k| 20e-6 * k as f64).collect(),
            clock_hz: sqclock::stability::RB87_CLOCK_HZ,
            dt: 1.0,
            overlapping: false,
            seed: 0,
        }
    }
}

/// Accepted keys, in config files (snake_case) and as flags (kebab-case).
pub const KEYS: &[&str] = &[
    "atoms",
    "omega",
    "t_spin",
    "r",
    "tau_mw",
    "tau_rf",
    "tau_ramsey",
    "mw_calibration",
    "delta",
    "deltas",
    "q",
    "delta_rf",
    "sigma_b",
    "kappa_b",
    "field_offset",
    "detection_sigma",
    "technical_sigma",
    "rf_power_sigma",
    "mw_power_sigma",
    "target_sql_ratio",
    "n_shots",
    "k_c",
    "grid_points",
    "grid_half_width",
    "phases",
    "samples",
    "tomo_method",
    "n_max",
    "iterations",
    "bin_width",
    "phi0",
    "nu_adj",
    "adjust_times",
    "clock_hz",
    "dt",
    "overlapping",
    "seed",
];

fn parse_usize(v: &str) -> Result<usize> {
    v.trim()
        .replace('_', "")
        .parse()
        .map_err(|e| anyhow!("{e}"))
}

fn parse_count(v: &str) -> Result<u64> {
    let t = v.trim().replace('_', "");
    if let Ok(n) = t.parse::<u64>() {
        return Ok(n);
    }
    let f: f64 = t
        .parse()
        .map_err(|_| anyhow!("cannot parse {v:?} as a count"))?;
    if f < 0.0 || f.fract() != 0.0 || f > u64::MAX as f64 {
        bail!("{v:?} is not a non-negative integer");
    }
    Ok(f as u64)
}

impl RunConfig {
    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.replace('-', "_");
        let v = value;
        (|| -> Result<()> {
            match key.as_str() {
                "atoms" => self.atoms = parse_count(v)?,
                "omega" => self.omega = parse_quantity(v, Dim::Rate)?,
                "t_spin" => self.t_spin = parse_quantity(v, Dim::Time)?,
                "r" => {
                    self.r = match v.trim() {
                        "" | "auto" => None,
                        s => Some(parse_quantity(s, Dim::Plain)?),
                    }
                }
                "tau_mw" => self.tau_mw = parse_quantity(v, Dim::Time)?,
                "tau_rf" => self.tau_rf = parse_quantity(v, Dim::Time)?,
                "tau_ramsey" | "tau_R" | "tau_r" => self.tau_ramsey = parse_quantity(v, Dim::Time)?,
                "mw_calibration" => {
                    self.mw_calibration = match v.trim() {
                        "auto" => MwCalibration::Auto,
                        "pi" => MwCalibration::Pi,
                        "return" => MwCalibration::Return,
                        other => bail!("expected auto, pi or return, got {other:?}"),
                    }
                }
                "delta" => self.delta = parse_quantity(v, Dim::Frequency)?,
                "deltas" => self.deltas = parse_list(v, Dim::Frequency, 100.0)?,
                "q" => self.q = parse_quantity(v, Dim::Rate)?,
                "delta_rf" => self.delta_rf = parse_quantity(v, Dim::Rate)?,
                "sigma_b" => self.sigma_b = parse_quantity(v, Dim::Field)?,
                "kappa_b" => self.kappa_b = parse_quantity(v, Dim::Plain)?,
                "field_offset" => self.field_offset = parse_quantity(v, Dim::Field)?,
                "detection_sigma" => self.detection_sigma = parse_quantity(v, Dim::Plain)?,
                "technical_sigma" => {
                    self.technical_sigma = parse_quantity(v, Dim::Plain)?;
                    self.target_sql_ratio = None;
                }
                "rf_power_sigma" => self.rf_power_sigma = parse_quantity(v, Dim::Plain)?,
                "mw_power_sigma" => self.mw_power_sigma = parse_quantity(v, Dim::Plain)?,
                "target_sql_ratio" => {
                    self.target_sql_ratio = match v.trim() {
                        "" | "off" | "none" => None,
                        s => Some(parse_quantity(s, Dim::Plain)?),
                    }
                }
                "n_shots" | "shots" => self.n_shots = parse_count(v)? as usize,
                "k_c" | "kc" => self.k_c = parse_quantity(v, Dim::Plain)?,
                "grid_points" | "grid" => self.grid_points = parse_usize(v)?,
                "grid_half_width" => self.grid_half_width = parse_quantity(v, Dim::Plain)?,
                "phases" => self.phases = parse_usize(v)?,
                "samples" => self.samples = parse_count(v)? as usize,
                "tomo_method" | "method" => {
                    self.tomo_method = match v.trim() {
                        "radon" => TomoMethod::Radon,
                        "mle" => TomoMethod::Mle,
                        other => bail!("expected radon or mle, got {other:?}"),
                    }
                }
                "n_max" => self.n_max = parse_usize(v)?,
                "iterations" => self.iterations = parse_usize(v)?,
                "bin_width" => self.bin_width = parse_quantity(v, Dim::Plain)?,
                "phi0" => self.phi0 = parse_quantity(v, Dim::Plain)?,
                "nu_adj" => self.nu_adj = parse_quantity(v, Dim::Frequency)?,
                "adjust_times" => self.adjust_times = parse_list(v, Dim::Time, 20e-6)?,
                "clock_hz" => self.clock_hz = parse_quantity(v, Dim::Frequency)?,
                "dt" => self.dt = parse_quantity(v, Dim::Time)?,
                "overlapping" => {
                    self.overlapping = v
                        .trim()
                        .parse()
                        .map_err(|_| anyhow!("expected true or false"))?
                }
                "seed" => self.seed = parse_count(v)?,
                _ => bail!("unknown key (known keys: {})", KEYS.join(", ")),
            }
            Ok(())
        })()
        .with_context(|| format!("invalid value for `{key}`: {value:?}"))
    }

    /// Applies a flat TOML table; values may be numbers, booleans or strings with units.
    pub fn apply_toml(&mut self, text: &str) -> Result<()> {
        let table: toml::Table = text.parse().context("config is not valid TOML")?;
        for (key, value) in &table {
            let s = match value {
                toml::Value::String(s) => s.clone(),
                toml::Value::Integer(i) => i.to_string(),
                toml::Value::Float(f) => format!("{f:?}"),
                toml::Value::Boolean(b) => b.to_string(),
                toml::Value::Array(items) => items
                    .iter()
                    .map(|i| match i {
                        toml::Value::String(s) => Ok(s.clone()),
                        toml::Value::Integer(i) => Ok(i.to_string()),
                        toml::Value::Float(f) => Ok(format!("{f:?}")),
                        _ => Err(anyhow!("invalid array element for `{key}`")),
                    })
                    .collect::<Result<Vec<_>>>()?
                    .join(","),
                _ => bail!("config key `{key}` must be a flat value"),
            };
            self.set(key, &s)?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let mut cfg = RunConfig::default();
        cfg.apply_toml(&text)
            .with_context(|| format!("in config {}", path.display()))?;
        Ok(cfg)
    }

    pub fn squeeze_r(&self) -> Result<f64> {
        match self.r {
            Some(r) => Ok(r),
            None => Ok(squeeze_parameter(self.omega, self.t_spin)?),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| -> Result<()> {
            if !(v > 0.0) {
                bail!("invalid value for `{name}`: must be > 0, got {v}");
            }
            Ok(())
        };
        let non_negative = |name: &str, v: f64| -> Result<()> {
            if !(v >= 0.0) {
                bail!("invalid value for `{name}`: must be >= 0, got {v}");
            }
            Ok(())
        };
        if self.atoms == 0 {
            bail!("invalid value for `atoms`: must be >= 1");
        }
        non_negative("t_spin", self.t_spin)?;
        if let Some(r) = self.r {
            non_negative("r", r)?;
        }
        self.squeeze_r()?;
        positive("tau_mw", self.tau_mw)?;
        positive("tau_rf", self.tau_rf)?;
        non_negative("tau_ramsey", self.tau_ramsey)?;
        non_negative("sigma_b", self.sigma_b)?;
        non_negative("detection_sigma", self.detection_sigma)?;
        non_negative("technical_sigma", self.technical_sigma)?;
        non_negative("rf_power_sigma", self.rf_power_sigma)?;
        non_negative("mw_power_sigma", self.mw_power_sigma)?;
        if let Some(t) = self.target_sql_ratio {
            positive("target_sql_ratio", t)?;
        }
        if self.n_shots == 0 {
            bail!("invalid value for `n_shots`: must be >= 1");
        }
        positive("k_c", self.k_c)?;
        if self.grid_points < 2 {
            bail!("invalid value for `grid_points`: must be >= 2");
        }
        positive("grid_half_width", self.grid_half_width)?;
        if self.phases < 2 {
            bail!("invalid value for `phases`: must be >= 2");
        }
        if self.samples == 0 {
            bail!("invalid value for `samples`: must be >= 1");
        }
        if self.n_max < 2 {
            bail!("invalid value for `n_max`: must be >= 2");
        }
        positive("bin_width", self.bin_width)?;
        positive("clock_hz", self.clock_hz)?;
        positive("dt", self.dt)?;
        if self.adjust_times.is_empty() {
            bail!("invalid value for `adjust_times`: empty");
        }
        if self.deltas.is_empty() {
            bail!("invalid value for `deltas`: empty");
        }
        Ok(())
    }

    pub fn atom_params(&self) -> AtomParams {
        AtomParams {
            delta_rf: self.delta_rf,
            q: self.q,
            ..Default::default()
        }
    }

    /// Clock template; `noise_experiment` picks the `auto` calibration.
    pub fn template(&self, noise_experiment: bool) -> ClockTemplate {
        let microwave = match (self.mw_calibration, noise_experiment) {
            (MwCalibration::Pi, _) | (MwCalibration::Auto, false) => MicrowaveCalibration::PiPulse,
            (MwCalibration::Return, _) | (MwCalibration::Auto, true) => {
                MicrowaveCalibration::ReturnAt {
                    delta_hz: self.delta,
                }
            }
        };
        ClockTemplate {
            tau_rf: self.tau_rf,
            tau_mw: self.tau_mw,
            microwave,
        }
    }

    /// Squeezed input measured along its squeezed quadrature.
    pub fn squeezed_spec(&self) -> Result<SqueezedVacuumSpec> {
        Ok(SqueezedVacuumSpec::new(
            self.squeeze_r()?,
            FRAC_PI_4,
            self.atoms,
        )?)
    }

    pub fn noise_spec(&self) -> NoiseSpec {
        NoiseSpec {
            sigma_b: self.sigma_b,
            field_offset: self.field_offset,
            kappa_b: self.kappa_b,
            detection_sigma: self.detection_sigma,
            technical_sigma_f: self.technical_sigma,
            rf_power_sigma: self.rf_power_sigma,
            mw_power_sigma: self.mw_power_sigma,
            mixing_time: None,
            n_shots: self.n_shots,
            seed: self.seed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = RunConfig::default();
        assert_eq!(c.atoms, 10_000);
        assert!((c.squeeze_r().unwrap() - 0.784).abs() < 5e-4);
        assert_eq!(c.deltas.len(), 401);
        assert_eq!(c.sigma_b, 100e-6);
        c.validate().unwrap();
    }

    #[test]
    fn set_and_diagnose() {
        let mut c = RunConfig::default();
        c.set("tau-R", "250us").unwrap();
        assert_eq!(c.tau_ramsey, 250e-6);
        c.set("deltas", "-1k..1k:500").unwrap();
        assert_eq!(c.deltas.len(), 5);
        let err = c.set("tau_mw", "long").unwrap_err();
        assert!(format!("{err:#}").contains("tau_mw"));
        assert!(c.set("bogus", "1").is_err());
        c.set("atoms", "1e4").unwrap();
        assert_eq!(c.atoms, 10_000);
        assert!(c.set("atoms", "1.5").is_err());
        c.set("technical_sigma", "1e-3").unwrap();
        assert_eq!(c.target_sql_ratio, None);
    }

    #[test]
    fn toml_file() {
        let mut c = RunConfig::default();
        c.apply_toml(
            "atoms = 5000\nsigma_b = \"50uG\"\ndeltas = [\"-1k\", 0, 1000.0]\noverlapping = true\n",
        )
        .unwrap();
        assert_eq!(c.atoms, 5000);
        assert_eq!(c.sigma_b, 50e-6);
        assert_eq!(c.deltas, vec![-1e3, 0.0, 1e3]);
        assert!(c.overlapping);
        assert!(c.apply_toml("[section]\na = 1\n").is_err());
    }

    #[test]
    fn zero_atoms_invalid() {
        let c = RunConfig {
            atoms: 0,
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }
}
