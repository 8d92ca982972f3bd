//! Command-line definition and dispatch.

use std::path::PathBuf;

use anyhow::{anyhow, Result};
use clap::{Args, Parser, Subcommand};

use crate::commands;
use crate::config::RunConfig;
use crate::output::{emit, Dataset, Format};

/// Flag groups; every flag is a string parsed by [`RunConfig::set`] under
/// the key named after the field.
macro_rules! flag_group {
    ($name:ident { $($field:ident : $long:literal => $help:literal),* $(,)? }) => {
        #[derive(Debug, Clone, Default, Args)]
        pub struct $name {
            $(
                #[arg(long = $long, value_name = "VALUE", help = $help, allow_hyphen_values = true)]
                pub $field: Option<String>,
            )*
        }

        impl $name {
            fn overrides(&self) -> Vec<(&'static str, &str)> {
                let mut v = Vec::new();
                $(
                    if let Some(x) = &self.$field {
                        v.push((stringify!($field), x.as_str()));
                    }
                )*
                v
            }
        }
    };
}

flag_group!(Physics {
    atoms: "atoms" => "Atom number N [default 1e4]",
    omega: "omega" => "Spin-changing collision rate, rad/s or Hz [default 2 pi x 3.9 Hz]",
    t_spin: "t-spin" => "Squeezing time [default 32ms]",
    r: "r" => "Squeezing parameter; overrides omega x t-spin",
    tau_mw: "tau-mw" => "Microwave pulse length [default 45.2us]",
    tau_rf: "tau-rf" => "rf pulse length [default 47us]",
    tau_ramsey: "tau-R" => "Free evolution time between the microwave pulses [default 0]",
    mw_calibration: "mw-calibration" => "auto | pi | return [default auto]",
    q: "q" => "Quadratic Zeeman shift, rad/s or Hz [default 0]",
    delta_rf: "delta-rf" => "rf detuning, rad/s or Hz [default 0]",
});

flag_group!(Operating {
    delta: "delta" => "Operating detuning [default -5.5kHz]",
});

flag_group!(Scan {
    deltas: "deltas" => "Detunings: a,b,c or lo..hi[:step] [default -20k..20k:100]",
});

flag_group!(FringeScan {
    deltas: "delta" => "Detunings: a,b,c or lo..hi[:step] [default -20k..20k:100]",
});

flag_group!(Noise {
    sigma_b: "sigma-b" => "Shot-to-shot magnetic field noise [default 100uG]",
    kappa_b: "kappa-b" => "Differential Zeeman coefficient, Hz/G [default 7e5]",
    field_offset: "field-offset" => "Static field offset [default 0]",
    detection_sigma: "detection-sigma" => "Detection noise per count, atoms [default 16]",
    technical_sigma: "technical-sigma" => "Flat technical noise on the fraction; disables --calibrate-floor",
    rf_power_sigma: "rf-power-sigma" => "Relative rf power noise [default 0]",
    mw_power_sigma: "mw-power-sigma" => "Relative microwave power noise [default 0]",
    target_sql_ratio: "calibrate-floor" => "Tune the technical floor so the classical clock sits at this multiple of the SQL, or off [default 1.48]",
    n_shots: "shots" => "Monte-Carlo shots per point [default 1e4]",
});

flag_group!(TomoFlags {
    phases: "phases" => "Local oscillator phases [default 20]",
    samples: "samples" => "Samples per phase [default 100]",
    k_c: "kc" => "Back-projection cutoff [default 2]",
    grid_points: "grid" => "Grid points per axis [default 61]",
    grid_half_width: "grid-half-width" => "Grid half width [default 4]",
    tomo_method: "method" => "radon | mle [default radon]",
    n_max: "n-max" => "Fock cutoff for maximum likelihood [default 60]",
    iterations: "iterations" => "Maximum-likelihood iteration budget [default 500]",
    bin_width: "bin-width" => "Histogram bin width [default 0.1]",
});

flag_group!(Phase {
    phi0: "phi0" => "Local oscillator phase at zero adjustment time, rad [default 0]",
    nu_adj: "nu-adj" => "Phase advance rate [default 416.7Hz]",
    adjust_times: "adjust-times" => "Adjustment times: a,b or lo..hi[:step] [default 0..1ms:20us]",
});

flag_group!(Stability {
    dt: "dt" => "Sample spacing [default 1s]",
    clock_hz: "clock-hz" => "Clock frequency [default 6.834682610904GHz]",
});

#[derive(Debug, Parser)]
#[command(
    name = "sqclock",
    version,
    about = "Squeezed-vacuum atomic clock simulator"
)]
pub struct Cli {
    /// Flat TOML file of parameters
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<String>,
    /// Output file (stdout when omitted); a manifest is written beside it
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value = "csv")]
    pub format: Format,
    /// Set any parameter by key
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Ramsey fringe: level populations against detuning
    Fringe {
        #[command(flatten)]
        physics: Physics,
        #[command(flatten)]
        scan: FringeScan,
    },
    /// Clock-signal variance and phase sensitivity against detuning
    VarianceScan {
        #[command(flatten)]
        physics: Physics,
        #[command(flatten)]
        operating: Operating,
        #[command(flatten)]
        scan: Scan,
        #[command(flatten)]
        noise: Noise,
    },
    /// Classical and squeezed phase uncertainty at the operating point
    Sensitivity {
        #[command(flatten)]
        physics: Physics,
        #[command(flatten)]
        operating: Operating,
        #[command(flatten)]
        noise: Noise,
    },
    /// Analytic noise terms at the operating point
    NoiseBudget {
        #[command(flatten)]
        physics: Physics,
        #[command(flatten)]
        operating: Operating,
        #[command(flatten)]
        noise: Noise,
    },
    /// Squeezed clock variance against the local-oscillator adjustment time
    PhaseScan {
        #[command(flatten)]
        physics: Physics,
        #[command(flatten)]
        operating: Operating,
        #[command(flatten)]
        noise: Noise,
        #[command(flatten)]
        phase: Phase,
    },
    /// Wigner function reconstruction from homodyne data
    Tomo {
        #[command(flatten)]
        physics: Physics,
        #[command(flatten)]
        tomo: TomoFlags,
        /// Homodyne samples, one `phi x` pair per line (simulated when omitted)
        #[arg(long, value_name = "PATH")]
        input: Option<PathBuf>,
    },
    /// Allan deviation of a fractional-frequency series
    Allan {
        #[command(flatten)]
        physics: Physics,
        #[command(flatten)]
        operating: Operating,
        #[command(flatten)]
        noise: Noise,
        #[command(flatten)]
        stability: Stability,
        /// Series file (simulated from the clock model when omitted)
        #[arg(long, value_name = "PATH")]
        input: Option<PathBuf>,
        /// 0-based column of the input file
        #[arg(long, default_value_t = 0)]
        column: usize,
        /// Overlapping estimator
        #[arg(long)]
        overlapping: bool,
    },
    /// Resolved parameters, derived quantities and warnings
    Validate {
        #[command(flatten)]
        physics: Physics,
        #[command(flatten)]
        operating: Operating,
    },
}

impl Command {
    fn overrides(&self) -> Vec<(&'static str, &str)> {
        match self {
            Command::Fringe { physics, scan } => [physics.overrides(), scan.overrides()].concat(),
            Command::VarianceScan {
                physics,
                operating,
                scan,
                noise,
            } => [
                physics.overrides(),
                operating.overrides(),
                scan.overrides(),
                noise.overrides(),
            ]
            .concat(),
            Command::Sensitivity {
                physics,
                operating,
                noise,
            }
            | Command::NoiseBudget {
                physics,
                operating,
                noise,
            } => [
                physics.overrides(),
                operating.overrides(),
                noise.overrides(),
            ]
            .concat(),
            Command::PhaseScan {
                physics,
                operating,
                noise,
                phase,
            } => [
                physics.overrides(),
                operating.overrides(),
                noise.overrides(),
                phase.overrides(),
            ]
            .concat(),
            Command::Tomo { physics, tomo, .. } => [physics.overrides(), tomo.overrides()].concat(),
            Command::Allan {
                physics,
                operating,
                noise,
                stability,
                overlapping,
                ..
            } => {
                let mut v = [
                    physics.overrides(),
                    operating.overrides(),
                    noise.overrides(),
                    stability.overrides(),
                ]
                .concat();
                if *overlapping {
                    v.push(("overlapping", "true"));
                }
                v
            }
            Command::Validate { physics, operating } => {
                [physics.overrides(), operating.overrides()].concat()
            }
        }
    }
}

/// Defaults, then the config file, then `--set`, then flags, then `--seed`.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    for kv in &cli.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| anyhow!("--set expects KEY=VALUE, got {kv:?}"))?;
        cfg.set(k.trim(), v)?;
    }
    for (k, v) in cli.command.overrides() {
        cfg.set(k, v)?;
    }
    if let Some(seed) = &cli.seed {
        cfg.set("seed", seed)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn execute(cli: &Cli, cfg: &RunConfig) -> Result<Dataset> {
    match &cli.command {
        Command::Fringe { .. } => commands::fringe(cfg),
        Command::VarianceScan { .. } => commands::variance_scan(cfg),
        Command::Sensitivity { .. } => commands::sensitivity(cfg),
        Command::NoiseBudget { .. } => commands::noise_budget(cfg),
        Command::PhaseScan { .. } => commands::phase_scan(cfg),
        Command::Tomo { input, .. } => commands::tomo(cfg, input.as_deref()),
        Command::Allan { input, column, .. } => commands::allan(cfg, input.as_deref(), *column),
        Command::Validate { .. } => commands::validate(cfg),
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    let cfg = resolve_config(cli)?;
    let data = execute(cli, &cfg)?;
    for w in &data.warnings {
        eprintln!("warning: {w}");
    }
    emit(&data, cli.format, &cfg, cfg.seed, cli.out.as_deref())
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn flags_override_set_and_seed() {
        let cli = Cli::try_parse_from([
            "sqclock",
            "--set",
            "atoms=500",
            "--seed",
            "9",
            "validate",
            "--atoms",
            "700",
            "--tau-R",
            "1ms",
        ])
        .unwrap();
        let cfg = resolve_config(&cli).unwrap();
        assert_eq!(cfg.atoms, 700);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.tau_ramsey, 1e-3);
    }

    #[test]
    fn negative_values_parse_as_flags() {
        let cli = Cli::try_parse_from(["sqclock", "sensitivity", "--delta", "-6k"]).unwrap();
        assert_eq!(resolve_config(&cli).unwrap().delta, -6e3);
    }
}
