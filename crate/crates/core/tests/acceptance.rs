//! End-to-end acceptance checks, one PASS/FAIL line per criterion.
//!
//! Runs under `cargo test`; `cargo test -p sqclock-core --test acceptance 7`
//! runs only the criteria whose name contains `7`.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::panic;
use std::process::ExitCode;
use std::time::Instant;

use sqclock::atom::{
    fringe_zeros, ideal_fringe, ramsey_scan, AtomParams, ClockTemplate, MicrowaveCalibration,
};
use sqclock::fock::{evolve_truncated, fock_spin_dynamics, Mode};
use sqclock::noise::{calibrate_technical_floor, variance_vs_detuning, ClockSetup, NoiseSpec};
use sqclock::squeezing::{
    estimate_phase, fringe_slope, mean_pair_population, quadrature_variance_at, simulate_shots,
    squeeze_parameter, SqueezedVacuumSpec,
};
use sqclock::stability::{
    allan_deviation, drift_rejection_gain, octave_factors, two_sample_variance, TimeSeries,
};
use sqclock::tomography::{
    fit_squeezed_gaussian, mle_reconstruct, reconstruct_wigner, wigner_from_density, GridSpec,
    HomodyneDataset, MleOptions, DEFAULT_KC,
};

const N_ATOMS: u64 = 10_000;
const MID_FRINGE_HZ: f64 = -5.5e3;

fn r_nominal() -> f64 {
    squeeze_parameter(2.0 * PI * 3.9, 0.032).unwrap()
}

fn report(id: u32, name: &str, pass: bool, started: Instant, detail: String) -> bool {
    println!(
        "criterion {id:>2} [{}] {name}: {detail} ({:.2} s)",
        if pass { "PASS" } else { "FAIL" },
        started.elapsed().as_secs_f64()
    );
    pass
}

fn rel(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}

fn mid_fringe_template() -> ClockTemplate {
    ClockTemplate {
        microwave: MicrowaveCalibration::ReturnAt {
            delta_hz: MID_FRINGE_HZ,
        },
        ..Default::default()
    }
}

fn criterion_01_parameter_consistency() -> bool {
    let t0 = Instant::now();
    let r = r_nominal();
    let pairs = mean_pair_population(r);
    let pass = (r - 0.784).abs() < 5e-4 && rel(pairs, 0.751) < 0.01 && rel(pairs, 0.75) < 0.01;
    report(
        1,
        "parameter consistency",
        pass,
        t0,
        format!("r = {r:.5}, sinh^2 r = {pairs:.4}"),
    )
}

fn criterion_02_mid_fringe_geometry() -> bool {
    let t0 = Instant::now();
    let theta = 2.0 * PI * ClockTemplate::NOMINAL_TAU_MW * MID_FRINGE_HZ.abs();
    let pass = (theta - 1.562).abs() < 5e-4 && rel(theta, FRAC_PI_2) < 0.01;
    report(
        2,
        "mid-fringe geometry",
        pass,
        t0,
        format!("theta = {theta:.4} rad"),
    )
}

fn criterion_03_sql_recovery() -> bool {
    let t0 = Instant::now();
    let theta = FRAC_PI_2;
    let spec = SqueezedVacuumSpec::vacuum(N_ATOMS);
    let shots = simulate_shots(theta, &spec, 100_000, 0.0, 3).unwrap();
    let f: Vec<f64> = shots.iter().map(|s| s.f).collect();
    let est = estimate_phase(&f, fringe_slope(theta), N_ATOMS).unwrap();
    let z = (est.sql_ratio - 1.0) / est.sql_ratio_se;
    let pass = z.abs() < 4.0 && t0.elapsed().as_secs_f64() < 5.0;
    report(
        3,
        "SQL recovery",
        pass,
        t0,
        format!(
            "N var_theta = {:.4} +- {:.4} ({z:+.2} se)",
            est.sql_ratio, est.sql_ratio_se
        ),
    )
}

fn criterion_04_squeezed_clock_gain() -> bool {
    let t0 = Instant::now();
    let r = r_nominal();
    let params = AtomParams::default();
    let template = mid_fringe_template();
    let classical = SqueezedVacuumSpec::vacuum(N_ATOMS);
    let setup = ClockSetup {
        params: &params,
        template: &template,
        tau_ramsey: 0.0,
        spec: &classical,
    };
    let quiet = NoiseSpec::quiet(100_000, 41);
    let sigma = calibrate_technical_floor(&setup, &quiet, MID_FRINGE_HZ, 1.48).unwrap();
    let noise = NoiseSpec {
        technical_sigma_f: sigma,
        ..quiet
    };
    let classical_pt = variance_vs_detuning(&setup, &noise, &[MID_FRINGE_HZ])
        .unwrap()
        .points[0];
    let squeezed = SqueezedVacuumSpec::new(r, FRAC_PI_4, N_ATOMS).unwrap();
    let squeezed_setup = ClockSetup {
        spec: &squeezed,
        ..setup
    };
    let pt = variance_vs_detuning(
        &squeezed_setup,
        &NoiseSpec { seed: 42, ..noise },
        &[MID_FRINGE_HZ],
    )
    .unwrap()
    .points[0];
    let classical_ratio = classical_pt.var_theta.unwrap() * N_ATOMS as f64;
    let db = pt.db_vs_sql.unwrap();
    let oracle = 10.0 * (2.0 * (0.5 * (-2.0 * r).exp() + 0.24)).log10();
    let pass = (db - (-1.6)).abs() <= 0.5 && (classical_ratio - 1.48).abs() < 0.05;
    report(
        4,
        "squeezed-clock gain",
        pass,
        t0,
        format!(
            "classical N var_theta = {classical_ratio:.3}, squeezed {db:.2} dB (oracle {oracle:.2} dB)"
        ),
    )
}

fn criterion_05_ideal_squeezing_bound() -> bool {
    let t0 = Instant::now();
    let r = r_nominal();
    let theta = FRAC_PI_2;
    let spec = SqueezedVacuumSpec::new(r, FRAC_PI_4, N_ATOMS).unwrap();
    let shots = simulate_shots(theta, &spec, 100_000, 0.0, 5).unwrap();
    let f: Vec<f64> = shots.iter().map(|s| s.f).collect();
    let est = estimate_phase(&f, fringe_slope(theta), N_ATOMS).unwrap();
    let bound = 10.0 * (-2.0 * r).exp().log10();
    let pass = (est.db_vs_sql - bound).abs() < 0.2 && (bound - (-6.81)).abs() < 0.01;
    report(
        5,
        "ideal squeezing bound",
        pass,
        t0,
        format!("MC {:.3} dB vs {bound:.3} dB", est.db_vs_sql),
    )
}

fn criterion_06_fringe_law() -> bool {
    let t0 = Instant::now();
    let params = AtomParams::default();
    let short = ClockTemplate::default().scaled(100.0);
    let deltas: Vec<f64> = (0..=4000).map(|k| -20e3 + 10.0 * k as f64).collect();
    let mut worst: f64 = 0.0;
    for tau_r in [250e-6, 500e-6, 1000e-6] {
        let f = ramsey_scan(&params, &deltas, tau_r, &short)
            .unwrap()
            .clock_fractions();
        let tau = short.phase_time(tau_r);
        for (d, fk) in deltas.iter().zip(&f) {
            worst = worst.max((fk - ideal_fringe(*d, tau)).abs());
        }
    }

    let nominal = ClockTemplate::default();
    let mut spacing_err: f64 = 0.0;
    let mut n_zeros = 0;
    for tau_r in [250e-6, 500e-6, 1000e-6] {
        let zeros = fringe_zeros(&params, &nominal, tau_r, (-20e3, 20e3), 2.0, 1e-3).unwrap();
        let tau = nominal.phase_time(tau_r);
        n_zeros += zeros.len();
        for w in zeros.windows(2) {
            spacing_err = spacing_err.max(((w[1] - w[0]) * tau - 1.0).abs());
        }
    }
    let pass = worst < 1e-3 && spacing_err < 0.02 && n_zeros >= 6;
    report(
        6,
        "fringe law",
        pass,
        t0,
        format!(
            "short-pulse max deviation {worst:.2e}; {n_zeros} zeros, worst spacing error {:.2}%",
            100.0 * spacing_err
        ),
    )
}

fn criterion_07_fock_oracle() -> bool {
    let t0 = Instant::now();
    let n_max = 40;
    let mut failures = vec![];
    let mut worst: f64 = 0.0;
    for k in 1..=15 {
        let r = 0.1 * k as f64;
        let s = evolve_truncated(1.0, r, n_max).unwrap();
        let err = [
            s.quadrature_variance(Mode::Symmetric, FRAC_PI_4)
                - quadrature_variance_at(r, FRAC_PI_4, FRAC_PI_4),
            s.mean_occupation_plus() - mean_pair_population(r),
            s.mean_occupation_minus() - mean_pair_population(r),
        ]
        .iter()
        .fold(0.0f64, |a, e| a.max(e.abs()));
        let adequate = fock_spin_dynamics(1.0, r, n_max).is_ok();
        if err >= 1e-4 || !adequate {
            failures.push(format!(
                "r={r:.1}: error {err:.1e}, cutoff population {:.1e}",
                s.cutoff_population()
            ));
        } else {
            worst = worst.max(err);
        }
    }
    let pass = failures.is_empty() && t0.elapsed().as_secs_f64() < 10.0;
    report(
        7,
        "Fock-oracle equivalence",
        pass,
        t0,
        if failures.is_empty() {
            format!("max error {worst:.1e} for r <= 1.5 at n_max = {n_max}")
        } else {
            format!(
                "max passing error {worst:.1e}; failing: {}",
                failures.join("; ")
            )
        },
    )
}

fn criterion_08_tomography_round_trip() -> bool {
    let t0 = Instant::now();
    let r = r_nominal();
    let v_sq = 0.5 * (-2.0 * r).exp();
    let v_anti = 0.5 * (2.0 * r).exp();
    let spec = SqueezedVacuumSpec::new(r, 0.0, N_ATOMS).unwrap();
    let grid = GridSpec::default();

    let small = HomodyneDataset::simulate(&spec, 20, 100, 81).unwrap();
    let w_small = reconstruct_wigner(&small, &grid, DEFAULT_KC).unwrap();
    let fit_small = fit_squeezed_gaussian(&w_small, &small, DEFAULT_KC).unwrap();

    let large = HomodyneDataset::simulate(&spec, 20, 2000, 82).unwrap();
    let w_large = reconstruct_wigner(&large, &grid, DEFAULT_KC).unwrap();
    let fit_large = fit_squeezed_gaussian(&w_large, &large, DEFAULT_KC).unwrap();

    let mle = mle_reconstruct(&small, &MleOptions::default()).unwrap();
    let psd = mle.rho.validate().is_ok();
    let w_mle = wigner_from_density(&mle.rho, &grid).unwrap();

    let errs = [
        rel(fit_small.var_squeezed, v_sq),
        rel(fit_small.var_anti, v_anti),
        rel(fit_large.var_squeezed, v_sq),
        rel(fit_large.var_anti, v_anti),
    ];
    let integrals = [w_small.integral(), w_large.integral()];
    let pass = errs[0] < 0.25
        && errs[1] < 0.25
        && errs[2] < 0.10
        && errs[3] < 0.10
        && integrals.iter().all(|i| (i - 1.0).abs() <= 0.1)
        && psd
        && w_mle.min() >= -1e-6
        && t0.elapsed().as_secs_f64() < 30.0;
    report(
        8,
        "tomography round-trip",
        pass,
        t0,
        format!(
            "20x100: {:.3}/{:.3}; 20x2000: {:.3}/{:.3} (truth {v_sq:.3}/{v_anti:.3}); \
             integrals {:.3}/{:.3}; MLE {:?} after {} it, min eigenvalue {:.1e}, min W {:.1e}",
            fit_small.var_squeezed,
            fit_small.var_anti,
            fit_large.var_squeezed,
            fit_large.var_anti,
            integrals[0],
            integrals[1],
            mle.status,
            mle.iterations,
            mle.rho.min_eigenvalue(),
            w_mle.min()
        ),
    )
}

fn criterion_09_allan_scaling() -> bool {
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};
    let t0 = Instant::now();
    let n = 100_000;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
    let y: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let series = TimeSeries::new(1.0, y.clone()).unwrap();
    let curve = allan_deviation(&series, &octave_factors(n / 16)).unwrap();
    let slope = curve.log_slope().unwrap();
    let tsv = two_sample_variance(&y).unwrap();
    let exact_first = curve.sigmas[0] == tsv.sqrt();

    let drifted: Vec<f64> = y
        .iter()
        .enumerate()
        .map(|(i, v)| v + 1e-3 * i as f64)
        .collect();
    let clean = drift_rejection_gain(&y).unwrap();
    let with_drift = drift_rejection_gain(&drifted).unwrap();
    let tsv_drift = with_drift.two_sample;
    let inflation = with_drift.ordinary / clean.ordinary;
    let pass = (slope + 0.5).abs() <= 0.03
        && exact_first
        && rel(tsv_drift, tsv) < 0.01
        && inflation > 10.0;
    report(
        9,
        "Allan scaling",
        pass,
        t0,
        format!(
            "slope {slope:.3}; first point exact: {exact_first}; drift changes two-sample variance by {:.2e}, ordinary variance x{inflation:.0}",
            rel(tsv_drift, tsv)
        ),
    )
}

fn criterion_10_noise_budget() -> bool {
    let t0 = Instant::now();
    let params = AtomParams::default();
    let template = mid_fringe_template();
    let spec = SqueezedVacuumSpec::new(r_nominal(), FRAC_PI_4, N_ATOMS).unwrap();
    let setup = ClockSetup {
        params: &params,
        template: &template,
        tau_ramsey: 0.0,
        spec: &spec,
    };
    let noise = NoiseSpec {
        n_shots: 10_000,
        seed: 10,
        ..Default::default()
    };
    let deltas = [-1e3, -2.5e3, -4e3, -5.5e3, -7e3, -8.5e3, -10e3];
    let curve = variance_vs_detuning(&setup, &noise, &deltas).unwrap();
    let z: Vec<f64> = curve
        .points
        .iter()
        .map(|p| (p.var_f - p.analytic.total()) / p.var_f_se)
        .collect();
    let mixing: Vec<f64> = curve
        .points
        .iter()
        .map(|p| p.analytic.antisymmetric)
        .collect();
    let decreasing = mixing.windows(2).all(|w| w[1] < w[0]);
    let worst = z.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let pass = worst < 4.0 && decreasing && t0.elapsed().as_secs_f64() < 30.0;
    report(
        10,
        "noise-budget consistency",
        pass,
        t0,
        format!(
            "max |MC - analytic| = {worst:.2} se over {} detunings; mixing term {:.2e} -> {:.2e}",
            deltas.len(),
            mixing[0],
            mixing[mixing.len() - 1]
        ),
    )
}

type Criterion = fn() -> bool;

fn main() -> ExitCode {
    let criteria: &[(&str, Criterion)] = &[
        (
            "criterion_01_parameter_consistency",
            criterion_01_parameter_consistency,
        ),
        (
            "criterion_02_mid_fringe_geometry",
            criterion_02_mid_fringe_geometry,
        ),
        ("criterion_03_sql_recovery", criterion_03_sql_recovery),
        (
            "criterion_04_squeezed_clock_gain",
            criterion_04_squeezed_clock_gain,
        ),
        (
            "criterion_05_ideal_squeezing_bound",
            criterion_05_ideal_squeezing_bound,
        ),
        ("criterion_06_fringe_law", criterion_06_fringe_law),
        ("criterion_07_fock_oracle", criterion_07_fock_oracle),
        (
            "criterion_08_tomography_round_trip",
            criterion_08_tomography_round_trip,
        ),
        ("criterion_09_allan_scaling", criterion_09_allan_scaling),
        ("criterion_10_noise_budget", criterion_10_noise_budget),
    ];
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        for (name, _) in criteria {
            println!("{name}: test");
        }
        return ExitCode::SUCCESS;
    }
    let filters: Vec<&String> = args.iter().filter(|a| !a.starts_with('-')).collect();
    let mut failed = Vec::new();
    let mut run = 0;
    for &(name, check) in criteria {
        if !filters.is_empty() && !filters.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        run += 1;
        match panic::catch_unwind(check) {
            Ok(true) => {}
            Ok(false) => failed.push(name),
            Err(_) => {
                println!("{name} [FAIL] panicked");
                failed.push(name);
            }
        }
    }
    println!(
        "acceptance: {} passed, {} failed{}",
        run - failed.len(),
        failed.len(),
        if failed.is_empty() {
            String::new()
        } else {
            format!(" ({})", failed.join(", "))
        }
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
