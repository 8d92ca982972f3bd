//! One function per experiment; each returns the dataset to emit.

use std::f64::consts::PI;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};

use sqclock::atom::{ideal_fringe, ramsey_scan, ClockTemplate};
use sqclock::fock::{evolve_truncated, CUTOFF_TOLERANCE, DEFAULT_N_MAX};
use sqclock::noise::{
    calibrate_technical_floor, variance_vs_detuning, ClockSetup, NoiseSpec, NoiseTerms,
};
use sqclock::squeezing::{
    db_vs_sql, estimate_phase, fringe_slope, mean_pair_population, phase_uncertainty,
    quadrature_variance, simulate_shots, SqueezedVacuumSpec,
};
use sqclock::stability::{
    allan_deviation, octave_factors, overlapping_allan_deviation, TimeSeries,
};
use sqclock::tomography::{
    fit_gaussian, fit_squeezed_gaussian, mle_reconstruct, reconstruct_wigner, wigner_from_density,
    GridSpec, HomodyneDataset, MleOptions, MleStatus, WignerGrid,
};

use crate::config::{RunConfig, TomoMethod};
use crate::output::{Cell, Dataset};

fn theta_at(template: &ClockTemplate, tau_ramsey: f64, delta_hz: f64) -> f64 {
    2.0 * PI * delta_hz * template.phase_time(tau_ramsey)
}

/// Noise settings with the technical floor resolved against the classical clock.
fn resolved_noise(cfg: &RunConfig, template: &ClockTemplate) -> Result<NoiseSpec> {
    let mut noise = cfg.noise_spec();
    if let Some(target) = cfg.target_sql_ratio {
        let params = cfg.atom_params();
        let vacuum = SqueezedVacuumSpec::vacuum(cfg.atoms);
        let setup = ClockSetup {
            params: &params,
            template,
            tau_ramsey: cfg.tau_ramsey,
            spec: &vacuum,
        };
        noise.technical_sigma_f = calibrate_technical_floor(&setup, &noise, cfg.delta, target)
            .context("cannot reach the requested classical noise floor")?;
    }
    Ok(noise)
}

pub fn fringe(cfg: &RunConfig) -> Result<Dataset> {
    let template = cfg.template(false);
    let curve = ramsey_scan(&cfg.atom_params(), &cfg.deltas, cfg.tau_ramsey, &template)?;
    let tau = template.phase_time(cfg.tau_ramsey);
    let mut d = Dataset::new(
        "fringe",
        &[
            "detuning_hz",
            "f_minus1",
            "f_0",
            "f_plus1",
            "f_excited",
            "f_clock",
            "f_ideal",
        ],
    );
    d.meta("tau_ramsey_s", cfg.tau_ramsey);
    d.meta("phase_time_s", tau);
    for (&delta, f) in curve.detunings_hz.iter().zip(&curve.fractions) {
        d.push(vec![
            delta.into(),
            f.minus_one.into(),
            f.zero.into(),
            f.plus_one.into(),
            f.excited.into(),
            f.clock_fraction().into(),
            ideal_fringe(delta, tau).into(),
        ]);
    }
    Ok(d)
}

pub fn variance_scan(cfg: &RunConfig) -> Result<Dataset> {
    let template = cfg.template(true);
    let noise = resolved_noise(cfg, &template)?;
    let params = cfg.atom_params();
    let spec = cfg.squeezed_spec()?;
    let setup = ClockSetup {
        params: &params,
        template: &template,
        tau_ramsey: cfg.tau_ramsey,
        spec: &spec,
    };
    let curve = variance_vs_detuning(&setup, &noise, &cfg.deltas)?;
    let mut d = Dataset::new(
        "variance-scan",
        &[
            "detuning_hz",
            "theta",
            "f_id",
            "mean_f",
            "var_f",
            "var_f_se",
            "var_quantum",
            "var_antisymmetric",
            "var_detection",
            "var_technical",
            "var_analytic",
            "db_vs_sql",
            "db_vs_sql_analytic",
        ],
    );
    d.meta("r", spec.r);
    d.meta("technical_sigma", noise.technical_sigma_f);
    for p in &curve.points {
        d.push(vec![
            p.delta_hz.into(),
            p.theta.into(),
            p.f_id.into(),
            p.mean_f.into(),
            p.var_f.into(),
            p.var_f_se.into(),
            p.analytic.quantum.into(),
            p.analytic.antisymmetric.into(),
            p.analytic.detection.into(),
            p.analytic.technical.into(),
            p.analytic.total().into(),
            p.db_vs_sql.into(),
            p.analytic_db_vs_sql.into(),
        ]);
    }
    Ok(d)
}

pub fn sensitivity(cfg: &RunConfig) -> Result<Dataset> {
    let template = cfg.template(true);
    let noise = resolved_noise(cfg, &template)?;
    let params = cfg.atom_params();
    let inputs = [
        ("classical", SqueezedVacuumSpec::vacuum(cfg.atoms)),
        ("squeezed", cfg.squeezed_spec()?),
    ];
    let mut d = Dataset::new(
        "sensitivity",
        &[
            "input",
            "r",
            "mean_f",
            "var_f",
            "var_f_se",
            "var_theta",
            "sql_ratio",
            "db_vs_sql",
            "db_vs_sql_analytic",
        ],
    );
    d.meta("detuning_hz", cfg.delta);
    d.meta("theta", theta_at(&template, cfg.tau_ramsey, cfg.delta));
    d.meta("technical_sigma", noise.technical_sigma_f);
    let mut dbs = Vec::new();
    for (name, spec) in &inputs {
        let setup = ClockSetup {
            params: &params,
            template: &template,
            tau_ramsey: cfg.tau_ramsey,
            spec,
        };
        let p = variance_vs_detuning(&setup, &noise, &[cfg.delta])?.points[0];
        let var_theta = p
            .var_theta
            .ok_or_else(|| anyhow!("zero fringe slope at {} Hz", cfg.delta))?;
        dbs.push(p.db_vs_sql);
        d.push(vec![
            (*name).into(),
            spec.r.into(),
            p.mean_f.into(),
            p.var_f.into(),
            p.var_f_se.into(),
            var_theta.into(),
            (spec.n() * var_theta).into(),
            p.db_vs_sql.into(),
            p.analytic_db_vs_sql.into(),
        ]);
    }
    if let (Some(c), Some(s)) = (dbs[0], dbs[1]) {
        d.meta("gain_db", s - c);
    }
    Ok(d)
}

fn budget_db(terms: &NoiseTerms, slope: f64, n: f64) -> Option<f64> {
    let v = phase_uncertainty(terms.total(), slope).ok()?;
    db_vs_sql(v, n).ok()
}

pub fn noise_budget(cfg: &RunConfig) -> Result<Dataset> {
    let template = cfg.template(true);
    let noise = resolved_noise(cfg, &template)?;
    let params = cfg.atom_params();
    let classical = SqueezedVacuumSpec::vacuum(cfg.atoms);
    let squeezed = cfg.squeezed_spec()?;
    let terms = |spec: &SqueezedVacuumSpec| {
        ClockSetup {
            params: &params,
            template: &template,
            tau_ramsey: cfg.tau_ramsey,
            spec,
        }
        .analytic_terms(&noise, cfg.delta)
    };
    let (tc, ts) = (terms(&classical)?, terms(&squeezed)?);
    let theta = theta_at(&template, cfg.tau_ramsey, cfg.delta);
    let slope = fringe_slope(theta);
    let n = cfg.atoms as f64;
    let mut d = Dataset::new(
        "noise-budget",
        &["term", "classical_var_f", "squeezed_var_f"],
    );
    d.meta("detuning_hz", cfg.delta);
    d.meta("theta", theta);
    d.meta("slope", slope);
    d.meta("r", squeezed.r);
    d.meta("technical_sigma", noise.technical_sigma_f);
    let rows = [
        ("quantum", tc.quantum, ts.quantum),
        ("antisymmetric", tc.antisymmetric, ts.antisymmetric),
        ("detection", tc.detection, ts.detection),
        ("technical", tc.technical, ts.technical),
        ("total", tc.total(), ts.total()),
    ];
    for (name, c, s) in rows {
        d.push(vec![name.into(), c.into(), s.into()]);
    }
    let (dc, ds) = (budget_db(&tc, slope, n), budget_db(&ts, slope, n));
    d.meta("classical_db_vs_sql", dc);
    d.meta("squeezed_db_vs_sql", ds);
    if let (Some(c), Some(s)) = (dc, ds) {
        d.meta("gain_db", s - c);
    }
    Ok(d)
}

/// Variance of the squeezed clock against the local-oscillator adjustment time.
pub fn phase_scan(cfg: &RunConfig) -> Result<Dataset> {
    let template = cfg.template(true);
    let theta = theta_at(&template, cfg.tau_ramsey, cfg.delta);
    let slope = fringe_slope(theta);
    let base = cfg.squeezed_spec()?;
    let mut d = Dataset::new(
        "phase-scan",
        &[
            "t_adjust_s",
            "phi",
            "var_x",
            "sql_ratio",
            "sql_ratio_se",
            "db_vs_sql",
        ],
    );
    d.meta("theta", theta);
    d.meta("r", base.r);
    d.meta("nu_adj_hz", cfg.nu_adj);
    for (k, &t) in cfg.adjust_times.iter().enumerate() {
        let phi = cfg.phi0 + 2.0 * PI * cfg.nu_adj * t;
        let spec = base.with_phi(phi);
        let seed = cfg.seed.wrapping_add(k as u64);
        let shots = simulate_shots(theta, &spec, cfg.n_shots, cfg.detection_sigma, seed)?;
        let f: Vec<f64> = shots.iter().map(|s| s.f).collect();
        let est = estimate_phase(&f, slope, cfg.atoms)?;
        d.push(vec![
            t.into(),
            phi.into(),
            quadrature_variance(&spec).into(),
            est.sql_ratio.into(),
            est.sql_ratio_se.into(),
            est.db_vs_sql.into(),
        ]);
    }
    Ok(d)
}

fn wigner_rows(d: &mut Dataset, w: &WignerGrid) {
    for (ix, &x) in w.x_axis.iter().enumerate() {
        for (ip, &p) in w.p_axis.iter().enumerate() {
            d.push(vec![x.into(), p.into(), w.at(ix, ip).into()]);
        }
    }
}

pub fn tomo(cfg: &RunConfig, input: Option<&Path>) -> Result<Dataset> {
    let data = match input {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read {}", path.display()))?;
            HomodyneDataset::parse(&text).with_context(|| format!("in {}", path.display()))?
        }
        None => {
            HomodyneDataset::simulate(&cfg.squeezed_spec()?, cfg.phases, cfg.samples, cfg.seed)?
        }
    };
    let grid = GridSpec::square(cfg.grid_half_width, cfg.grid_points);
    let mut d = Dataset::new("tomo", &["x", "p", "w"]);
    d.meta("phases", data.n_phases());
    d.meta("total_samples", data.n_samples());
    let raw = fit_gaussian(&data)?;
    let (lo, hi, angle) = raw.principal();
    d.meta("data_var_squeezed", lo);
    d.meta("data_var_anti", hi);
    d.meta("data_angle", angle);
    let w = match cfg.tomo_method {
        TomoMethod::Radon => {
            d.meta("method", "radon");
            d.meta("k_c", cfg.k_c);
            let w = reconstruct_wigner(&data, &grid, cfg.k_c)?;
            let fit = fit_squeezed_gaussian(&w, &data, cfg.k_c)?;
            d.meta("fit_var_squeezed", fit.var_squeezed);
            d.meta("fit_var_anti", fit.var_anti);
            d.meta("fit_angle", fit.angle);
            d.meta("fit_mean_x", fit.mean_x);
            d.meta("fit_mean_p", fit.mean_p);
            d.meta("fit_rms_residual", fit.rms_residual);
            w
        }
        TomoMethod::Mle => {
            d.meta("method", "mle");
            let opts = MleOptions {
                n_max: cfg.n_max,
                n_iterations: cfg.iterations,
                bin_width: cfg.bin_width,
                ..Default::default()
            };
            let res = mle_reconstruct(&data, &opts)?;
            d.meta("n_max", cfg.n_max);
            d.meta("iterations", res.iterations);
            let status = match res.status {
                MleStatus::Converged => "converged",
                MleStatus::MaxIterations => "max-iterations",
            };
            d.meta("status", status);
            if res.status == MleStatus::MaxIterations {
                d.warnings
                    .push("maximum-likelihood iteration budget exhausted".into());
            }
            d.meta("min_eigenvalue", res.rho.min_eigenvalue());
            d.meta("mean_photon_number", {
                let rho = &res.rho;
                (0..rho.dim())
                    .map(|n| n as f64 * rho.population(n))
                    .sum::<f64>()
            });
            wigner_from_density(&res.rho, &grid)?
        }
    };
    d.meta("w_min", w.min());
    d.meta("w_max", w.max());
    d.meta("w_integral", w.integral());
    wigner_rows(&mut d, &w);
    Ok(d)
}

/// Reads column `column` (0-based) of a comma- or whitespace-separated file;
/// `#` lines are comments and one non-numeric header line is skipped.
pub fn read_column(text: &str, column: usize) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    let mut header_seen = false;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .collect();
        let field = fields
            .get(column)
            .ok_or_else(|| anyhow!("line {}: no column {column}", lineno + 1))?;
        match field.parse::<f64>() {
            Ok(v) => out.push(v),
            Err(_) if !header_seen && out.is_empty() => header_seen = true,
            Err(_) => bail!("line {}: cannot parse {field:?}", lineno + 1),
        }
    }
    Ok(out)
}

pub fn allan(cfg: &RunConfig, input: Option<&Path>, column: usize) -> Result<Dataset> {
    let mut d = Dataset::new("allan", &["tau_s", "sigma", "count"]);
    let values = match input {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read {}", path.display()))?;
            d.meta("source", "file");
            read_column(&text, column).with_context(|| format!("in {}", path.display()))?
        }
        None => {
            let template = cfg.template(true);
            let noise = resolved_noise(cfg, &template)?;
            let params = cfg.atom_params();
            let spec = cfg.squeezed_spec()?;
            let setup = ClockSetup {
                params: &params,
                template: &template,
                tau_ramsey: cfg.tau_ramsey,
                spec: &spec,
            };
            let theta = theta_at(&template, cfg.tau_ramsey, cfg.delta);
            let slope = fringe_slope(theta);
            if slope == 0.0 {
                bail!("zero fringe slope at {} Hz", cfg.delta);
            }
            let f = setup.simulate(&noise, cfg.delta)?;
            let mean = f.iter().sum::<f64>() / f.len() as f64;
            let scale = 2.0 * PI * cfg.clock_hz * template.phase_time(cfg.tau_ramsey);
            d.meta("source", "simulated");
            d.meta("r", spec.r);
            f.iter().map(|v| (v - mean) / slope / scale).collect()
        }
    };
    let series = TimeSeries::new(cfg.dt, values)?;
    let factors = octave_factors(series.len());
    if factors.is_empty() {
        bail!("need at least 2 samples, got {}", series.len());
    }
    let curve = if cfg.overlapping {
        overlapping_allan_deviation(&series, &factors)?
    } else {
        allan_deviation(&series, &factors)?
    };
    d.meta("dt_s", cfg.dt);
    d.meta(
        "overlapping",
        if cfg.overlapping { "true" } else { "false" },
    );
    d.meta("samples", series.len());
    if curve.taus.len() >= 2 && curve.sigmas.iter().all(|&s| s > 0.0) {
        d.meta("log_slope", curve.log_slope()?);
    }
    for ((&tau, &s), &c) in curve.taus.iter().zip(&curve.sigmas).zip(&curve.counts) {
        d.push(vec![tau.into(), s.into(), c.into()]);
    }
    Ok(d)
}

/// Resolved parameters, derived quantities and warnings.
pub fn validate(cfg: &RunConfig) -> Result<Dataset> {
    cfg.validate()?;
    let r = cfg.squeeze_r()?;
    let template = cfg.template(true);
    let theta = theta_at(&template, cfg.tau_ramsey, cfg.delta);
    let spec = cfg.squeezed_spec()?;
    let mut d = Dataset::new("validate", &["quantity", "value", "unit"]);
    let mut row = |name: &str, v: Cell, unit: &str| {
        d.rows.push(vec![name.into(), v, unit.into()]);
    };
    row("atoms", Cell::Int(cfg.atoms), "");
    row("r", r.into(), "");
    row("sinh2_r", mean_pair_population(r).into(), "atoms per mode");
    row("theta_mid_fringe", theta.abs().into(), "rad");
    row(
        "phase_time",
        template.phase_time(cfg.tau_ramsey).into(),
        "s",
    );
    row(
        "exposure_time",
        template.exposure_time(cfg.tau_ramsey).into(),
        "s",
    );
    row("omega_rf", template.omega_rf().into(), "rad/s");
    row("omega_mw", template.omega_mw()?.into(), "rad/s");
    row("var_x_squeezed", quadrature_variance(&spec).into(), "");
    let quantum_db = 10.0 * (2.0 * quadrature_variance(&spec)).log10();
    row("quantum_limited_db_vs_sql", quantum_db.into(), "dB");
    let cutoff = evolve_truncated(r, 1.0, DEFAULT_N_MAX)?.cutoff_population();
    row("fock_cutoff_population", cutoff.into(), "");
    if r == 0.0 {
        d.warnings.push("vacuum input (classical clock)".into());
    }
    if cutoff > CUTOFF_TOLERANCE {
        d.warnings.push(format!(
            "Fock cutoff n_max={DEFAULT_N_MAX} inadequate for r={r} (cutoff population {cutoff:.1e})"
        ));
    }
    if (theta.abs() - PI / 2.0).abs() > 0.1 {
        d.warnings.push(format!(
            "operating point theta={theta:.3} rad is away from mid-fringe"
        ));
    }
    Ok(d)
}
