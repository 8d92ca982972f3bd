//! Technical-noise Monte Carlo for the clock signal.
//!
//! Shot-to-shot magnetic-field fluctuations give the `|1,+-1>` levels a
//! differential phase that rotates part of the symmetric state into the
//! antisymmetric one. Antisymmetric atoms stay in `|1,+-1>` and are counted
//! in the signal, `f = f_id + (1 - f_id) N_a / N`. Quantum (quadrature),
//! detection and a flat technical fraction noise are added independently.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Binomial, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::atom::{
    ramsey_scan, run_sequence, AtomParams, ClockTemplate, Level, SegmentKind, StateVec4,
};
use crate::error::{ensure_finite, ensure_non_negative, Error, Result};
use crate::rng;
use crate::squeezing::{
    db_vs_sql, fringe_slope, mean_pair_population, phase_uncertainty, quadrature_variance,
    SampleMoments, SqueezedVacuumSpec,
};

/// Technical-noise inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    /// Shot-to-shot field fluctuation (G).
    pub sigma_b: f64,
    /// Mean field offset from rf resonance (G).
    pub field_offset: f64,
    /// Differential Zeeman coefficient (Hz/G).
    pub kappa_b: f64,
    /// Detection noise per output component (atoms).
    pub detection_sigma: f64,
    /// Flat Gaussian noise on the fraction (fraction units).
    pub technical_sigma_f: f64,
    /// Relative rf coupling fluctuation.
    pub rf_power_sigma: f64,
    /// Relative microwave coupling fluctuation.
    pub mw_power_sigma: f64,
    /// Field-exposure time override (s); defaults to the template's exposure time.
    pub mixing_time: Option<f64>,
    pub n_shots: usize,
    pub seed: u64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec {
            sigma_b: 100e-6,
            field_offset: 0.0,
            kappa_b: 7.0e5,
            detection_sigma: 16.0,
            technical_sigma_f: 0.0,
            rf_power_sigma: 0.0,
            mw_power_sigma: 0.0,
            mixing_time: None,
            n_shots: 10_000,
            seed: 0,
        }
    }
}

impl NoiseSpec {
    /// Every technical term switched off.
    pub fn quiet(n_shots: usize, seed: u64) -> Self {
        NoiseSpec {
            sigma_b: 0.0,
            detection_sigma: 0.0,
            n_shots,
            seed,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure_non_negative("sigma_b", self.sigma_b)?;
        ensure_finite("field_offset", self.field_offset)?;
        ensure_finite("kappa_b", self.kappa_b)?;
        ensure_non_negative("detection_sigma", self.detection_sigma)?;
        ensure_non_negative("technical_sigma_f", self.technical_sigma_f)?;
        ensure_non_negative("rf_power_sigma", self.rf_power_sigma)?;
        ensure_non_negative("mw_power_sigma", self.mw_power_sigma)?;
        if let Some(t) = self.mixing_time {
            ensure_non_negative("mixing_time", t)?;
        }
        if self.n_shots == 0 {
            return Err(Error::param("n_shots", "must be >= 1"));
        }
        Ok(())
    }
}

/// `delta_phi = 2 pi kappa_B Delta_B t`.
pub fn differential_phase(delta_b: f64, t: f64, kappa_b: f64) -> Result<f64> {
    ensure_finite("delta_b", delta_b)?;
    ensure_non_negative("t", t)?;
    ensure_finite("kappa_b", kappa_b)?;
    Ok(2.0 * PI * kappa_b * delta_b * t)
}

/// Symmetric and antisymmetric weights `(cos^2, sin^2)` after a differential phase.
pub fn antisymmetric_mixing(delta_phi: f64) -> (f64, f64) {
    let (s, c) = delta_phi.sin_cos();
    (c * c, s * s)
}

/// `f = f_id + (1 - f_id) N_a / N`.
pub fn noisy_fraction(f_id: f64, n_a: f64, n: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&f_id) {
        return Err(Error::param("f_id", format!("{f_id} outside [0, 1]")));
    }
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::param("n", "must be > 0"));
    }
    if !(0.0..=n).contains(&n_a) {
        return Err(Error::param("n_a", format!("{n_a} outside [0, {n}]")));
    }
    Ok(f_id + (1.0 - f_id) * n_a / n)
}

/// Moments of `p = sin^2(x)` for `x ~ Normal(mu, s^2)`.
fn sin2_moments(mu: f64, s: f64) -> (f64, f64) {
    let e2 = (2.0 * mu).cos() * (-2.0 * s * s).exp();
    let e4 = (4.0 * mu).cos() * (-8.0 * s * s).exp();
    let mean = 0.5 * (1.0 - e2);
    let second = (3.0 - 4.0 * e2 + e4) / 8.0;
    (mean, second)
}

/// Independent contributions to `(Delta f)^2`, in fraction units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseTerms {
    pub quantum: f64,
    pub antisymmetric: f64,
    pub detection: f64,
    pub technical: f64,
}

impl NoiseTerms {
    pub fn total(&self) -> f64 {
        self.quantum + self.antisymmetric + self.detection + self.technical
    }
}

/// Closed-form variance of the antisymmetric population `N_a`, drawn as
/// `Binomial(M, sin^2(delta_phi))` with Gaussian `delta_phi`.
pub fn antisymmetric_population_variance(
    population: f64,
    mean_phase: f64,
    sigma_phase: f64,
) -> f64 {
    let (m1, m2) = sin2_moments(mean_phase, sigma_phase);
    population * (m1 - m2) + population * population * (m2 - m1 * m1)
}

/// One detuning of a variance scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoisePoint {
    pub delta_hz: f64,
    pub theta: f64,
    pub f_id: f64,
    pub slope: f64,
    pub mean_f: f64,
    pub var_f: f64,
    pub var_f_se: f64,
    pub analytic: NoiseTerms,
    /// Phase figures are absent where the fringe slope vanishes.
    pub var_theta: Option<f64>,
    pub db_vs_sql: Option<f64>,
    pub analytic_db_vs_sql: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct NoiseCurve {
    pub points: Vec<NoisePoint>,
}

/// Deterministic model ingredients at one detuning.
#[derive(Debug, Clone, Copy)]
struct Working {
    theta: f64,
    f_id: f64,
    slope: f64,
    at_risk: f64,
    phase_mean: f64,
    phase_sigma: f64,
}

/// Problem definition shared by the Monte Carlo and the analytic budget.
#[derive(Debug, Clone, Copy)]
pub struct ClockSetup<'a> {
    pub params: &'a AtomParams,
    pub template: &'a ClockTemplate,
    pub tau_ramsey: f64,
    pub spec: &'a SqueezedVacuumSpec,
}

impl ClockSetup<'_> {
    fn working(&self, noise: &NoiseSpec, delta_hz: f64) -> Result<Working> {
        ensure_finite("delta", delta_hz)?;
        let tau = self.template.phase_time(self.tau_ramsey);
        let theta = 2.0 * PI * delta_hz * tau;
        let f_id = ramsey_scan(self.params, &[delta_hz], self.tau_ramsey, self.template)?
            .clock_fractions()[0];
        let slope = fringe_slope(theta);
        let t_mix = noise
            .mixing_time
            .unwrap_or_else(|| self.template.exposure_time(self.tau_ramsey));
        let first_rf = self.template.sequence(self.params, self.tau_ramsey)?;
        let after_rf = first_rf
            .segments
            .iter()
            .take_while(|s| s.kind == SegmentKind::Rf)
            .try_fold(StateVec4::basis(Level::Zero), |psi, s| {
                Ok::<_, Error>(psi.apply(&s.unitary()?))
            })?;
        let n = self.spec.n();
        let at_risk = (n * after_rf.populations().clock_fraction()
            + 2.0 * mean_pair_population(self.spec.r))
        .round();
        Ok(Working {
            theta,
            f_id,
            slope,
            at_risk,
            phase_mean: differential_phase(noise.field_offset, t_mix, noise.kappa_b)?,
            phase_sigma: differential_phase(noise.sigma_b, t_mix, noise.kappa_b)?.abs(),
        })
    }

    fn terms(&self, noise: &NoiseSpec, w: &Working) -> NoiseTerms {
        let n = self.spec.n();
        let var_na = antisymmetric_population_variance(w.at_risk, w.phase_mean, w.phase_sigma);
        NoiseTerms {
            quantum: quadrature_variance(self.spec) * w.theta.sin().powi(2) / (2.0 * n),
            antisymmetric: (1.0 - w.f_id).powi(2) * var_na / (n * n),
            detection: 2.0 * noise.detection_sigma.powi(2) / (n * n),
            technical: noise.technical_sigma_f.powi(2),
        }
    }

    /// Closed-form noise budget at one detuning.
    pub fn analytic_terms(&self, noise: &NoiseSpec, delta_hz: f64) -> Result<NoiseTerms> {
        noise.validate()?;
        self.spec.validate()?;
        let w = self.working(noise, delta_hz)?;
        Ok(self.terms(noise, &w))
    }

    fn shot_fraction(&self, noise: &NoiseSpec, w: &Working, rng: &mut impl Rng) -> f64 {
        let n = self.spec.n();
        let sd_x = quadrature_variance(self.spec).sqrt();
        let x = sd_x * rng.sample::<f64, _>(StandardNormal);
        let mut f_id = w.f_id;
        if noise.rf_power_sigma > 0.0 || noise.mw_power_sigma > 0.0 {
            let e_rf: f64 = rng.sample(StandardNormal);
            let e_mw: f64 = rng.sample(StandardNormal);
            f_id = self
                .perturbed_fraction(
                    w,
                    1.0 + noise.rf_power_sigma * e_rf,
                    1.0 + noise.mw_power_sigma * e_mw,
                )
                .unwrap_or(w.f_id);
        }
        let mut n_a = 0.0;
        if w.phase_sigma > 0.0 || w.phase_mean != 0.0 {
            let z: f64 = rng.sample(StandardNormal);
            let (_, p) = antisymmetric_mixing(w.phase_mean + w.phase_sigma * z);
            if w.at_risk > 0.0 && p > 0.0 {
                n_a = Binomial::new(w.at_risk as u64, p.min(1.0))
                    .map(|b| b.sample(rng) as f64)
                    .unwrap_or(0.0);
            }
        }
        let mut f = f_id + (1.0 - f_id) * n_a / n + w.theta.sin() * x / (2.0 * n).sqrt();
        if noise.detection_sigma > 0.0 {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            f += noise.detection_sigma * (a + b) / n;
        }
        if noise.technical_sigma_f > 0.0 {
            let t: f64 = rng.sample(StandardNormal);
            f += noise.technical_sigma_f * t;
        }
        f
    }

    fn perturbed_fraction(&self, w: &Working, rf_scale: f64, mw_scale: f64) -> Result<f64> {
        let mut seq = self.template.sequence(self.params, self.tau_ramsey)?;
        let tau = self.template.phase_time(self.tau_ramsey);
        let delta = w.theta / tau;
        for s in &mut seq.segments {
            s.params.omega_rf *= rf_scale;
            s.params.omega_mw *= mw_scale;
            s.params.delta = delta;
        }
        Ok(run_sequence(&seq, &StateVec4::basis(Level::Zero))?
            .populations()
            .clock_fraction())
    }

    /// Monte-Carlo fractions at one detuning.
    pub fn simulate(&self, noise: &NoiseSpec, delta_hz: f64) -> Result<Vec<f64>> {
        noise.validate()?;
        self.spec.validate()?;
        let w = self.working(noise, delta_hz)?;
        Ok(rng::par_generate(noise.seed, noise.n_shots, |r| {
            self.shot_fraction(noise, &w, r)
        }))
    }

    /// Monte-Carlo fractions with a slow field drift (G) added to the
    /// offset of shot `k` as `drift[k % drift.len()]`.
    pub fn simulate_with_field_drift(
        &self,
        noise: &NoiseSpec,
        delta_hz: f64,
        drift: &[f64],
    ) -> Result<Vec<f64>> {
        noise.validate()?;
        self.spec.validate()?;
        if drift.is_empty() {
            return self.simulate(noise, delta_hz);
        }
        if let Some(b) = drift.iter().find(|b| !b.is_finite()) {
            return Err(Error::param("drift", format!("non-finite value {b}")));
        }
        let w = self.working(noise, delta_hz)?;
        let t_mix = noise
            .mixing_time
            .unwrap_or_else(|| self.template.exposure_time(self.tau_ramsey));
        let phase_per_gauss = differential_phase(1.0, t_mix, noise.kappa_b)?;
        Ok(rng::par_generate_indexed(
            noise.seed,
            noise.n_shots,
            |k, r| {
                let shifted = Working {
                    phase_mean: w.phase_mean + phase_per_gauss * drift[k % drift.len()],
                    ..w
                };
                self.shot_fraction(noise, &shifted, r)
            },
        ))
    }

    fn point(&self, noise: &NoiseSpec, delta_hz: f64, seed: u64) -> Result<NoisePoint> {
        let w = self.working(noise, delta_hz)?;
        let shots = rng::par_generate(seed, noise.n_shots, |r| self.shot_fraction(noise, &w, r));
        let m = SampleMoments::from_slice(&shots)?;
        let analytic = self.terms(noise, &w);
        let n = self.spec.n();
        let phase_db = |var_f: f64| -> Result<Option<(f64, f64)>> {
            match phase_uncertainty(var_f, w.slope) {
                Ok(v) => Ok(Some((v, db_vs_sql(v, n)?))),
                Err(Error::DegenerateSlope) => Ok(None),
                Err(e) => Err(e),
            }
        };
        let measured = phase_db(m.variance)?;
        Ok(NoisePoint {
            delta_hz,
            theta: w.theta,
            f_id: w.f_id,
            slope: w.slope,
            mean_f: m.mean,
            var_f: m.variance,
            var_f_se: m.variance_se,
            analytic,
            var_theta: measured.map(|v| v.0),
            db_vs_sql: measured.map(|v| v.1),
            analytic_db_vs_sql: phase_db(analytic.total())?.map(|v| v.1),
        })
    }
}

/// Variance of the clock signal and phase uncertainty across detunings (Hz).
///
/// Detuning `k` uses the substream seed `noise.seed + k`.
pub fn variance_vs_detuning(
    setup: &ClockSetup<'_>,
    noise: &NoiseSpec,
    deltas_hz: &[f64],
) -> Result<NoiseCurve> {
    noise.validate()?;
    setup.spec.validate()?;
    if noise.n_shots < 100 {
        return Err(Error::param("n_shots", "variance scans need >= 100 shots"));
    }
    if deltas_hz.is_empty() {
        return Err(Error::param("deltas", "empty detuning list"));
    }
    let points = deltas_hz
        .par_iter()
        .enumerate()
        .map(|(k, &d)| setup.point(noise, d, noise.seed.wrapping_add(k as u64)))
        .collect::<Result<Vec<_>>>()?;
    Ok(NoiseCurve { points })
}

/// Flat technical fraction noise (standard deviation) that brings the
/// classical clock at `delta_hz` to `target_ratio` times the standard quantum
/// limit, given the other technical terms in `noise`.
pub fn calibrate_technical_floor(
    setup: &ClockSetup<'_>,
    noise: &NoiseSpec,
    delta_hz: f64,
    target_ratio: f64,
) -> Result<f64> {
    ensure_non_negative("target_ratio", target_ratio)?;
    let classical = SqueezedVacuumSpec {
        r: 0.0,
        ..*setup.spec
    };
    let setup = ClockSetup {
        spec: &classical,
        ..*setup
    };
    let quiet_floor = NoiseSpec {
        technical_sigma_f: 0.0,
        ..*noise
    };
    let w = setup.working(&quiet_floor, delta_hz)?;
    let terms = setup.terms(&quiet_floor, &w);
    let target = target_ratio * w.slope * w.slope / classical.n();
    let missing = target - terms.total();
    if missing < 0.0 {
        return Err(Error::param(
            "target_ratio",
            format!(
                "other noise terms already give {:.3} x SQL",
                terms.total() * classical.n() / (w.slope * w.slope)
            ),
        ));
    }
    Ok(missing.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::atom::MicrowaveCalibration;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn template() -> ClockTemplate {
        ClockTemplate {
            microwave: MicrowaveCalibration::ReturnAt { delta_hz: -5.5e3 },
            ..Default::default()
        }
    }

    #[test]
    fn differential_phase_values() {
        assert_eq!(differential_phase(0.0, 1e-3, 7e5).unwrap(), 0.0);
        assert_abs_diff_eq!(
            differential_phase(100e-6, 1e-3, 7e5).unwrap(),
            0.4398,
            epsilon = 1e-4
        );
        let a = differential_phase(1e-4, 2e-4, 7e5).unwrap();
        let b = differential_phase(2e-4, 2e-4, 7e5).unwrap();
        assert_abs_diff_eq!(b, 2.0 * a, epsilon = 1e-15);
        assert!(differential_phase(1e-4, -1.0, 7e5).is_err());
    }

    #[test]
    fn mixing_limits() {
        assert_eq!(antisymmetric_mixing(0.0), (1.0, 0.0));
        let (g, a) = antisymmetric_mixing(PI / 2.0);
        assert_abs_diff_eq!(g, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(a, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn noisy_fraction_values() {
        assert_eq!(noisy_fraction(0.3, 0.0, 1e4).unwrap(), 0.3);
        assert_eq!(noisy_fraction(1.0, 500.0, 1e4).unwrap(), 1.0);
        assert_abs_diff_eq!(
            noisy_fraction(0.5, 100.0, 1e4).unwrap(),
            0.505,
            epsilon = 1e-15
        );
        assert!(noisy_fraction(1.2, 0.0, 1e4).is_err());
        assert!(noisy_fraction(0.5, 2e4, 1e4).is_err());
    }

    #[test]
    fn sin2_moments_match_quadrature() {
        // brute-force Gauss-Hermite-free check: fine midpoint rule over +-10 sigma
        let (mu, s) = (0.3, 0.2);
        let n = 200_000;
        let (mut a, mut b, mut z) = (0.0, 0.0, 0.0);
        for k in 0..n {
            let x = mu - 10.0 * s + 20.0 * s * (k as f64 + 0.5) / n as f64;
            let w = (-(x - mu).powi(2) / (2.0 * s * s)).exp();
            let p = x.sin().powi(2);
            a += w * p;
            b += w * p * p;
            z += w;
        }
        let (m1, m2) = sin2_moments(mu, s);
        assert_abs_diff_eq!(m1, a / z, epsilon = 1e-10);
        assert_abs_diff_eq!(m2, b / z, epsilon = 1e-10);
    }

    #[test]
    fn zero_noise_reduces_to_closed_forms() {
        let spec = SqueezedVacuumSpec::new(0.784, std::f64::consts::FRAC_PI_4, 10_000).unwrap();
        let p = AtomParams::default();
        let t = template();
        let setup = ClockSetup {
            params: &p,
            template: &t,
            tau_ramsey: 0.0,
            spec: &spec,
        };
        let noise = NoiseSpec::quiet(1000, 1);
        let terms = setup.analytic_terms(&noise, -5.5e3).unwrap();
        let theta = 2.0 * PI * -5.5e3 * 45.2e-6;
        let closed = crate::squeezing::fraction_statistics(theta, &spec).unwrap();
        assert_eq!(terms.antisymmetric, 0.0);
        assert_eq!(terms.detection, 0.0);
        assert_eq!(terms.technical, 0.0);
        assert_eq!(terms.quantum, closed.variance);
    }

    #[test]
    fn sql_at_mid_fringe_without_noise() {
        let spec = SqueezedVacuumSpec::vacuum(10_000);
        let p = AtomParams::default();
        let t = template();
        let setup = ClockSetup {
            params: &p,
            template: &t,
            tau_ramsey: 0.0,
            spec: &spec,
        };
        let noise = NoiseSpec::quiet(40_000, 2);
        let curve = variance_vs_detuning(&setup, &noise, &[-5.5e3]).unwrap();
        let pt = curve.points[0];
        assert_abs_diff_eq!(pt.analytic_db_vs_sql.unwrap(), 0.0, epsilon = 0.05);
        assert!((pt.var_f - pt.analytic.total()).abs() < 4.0 * pt.var_f_se);
    }

    #[test]
    fn scan_needs_enough_shots() {
        let spec = SqueezedVacuumSpec::vacuum(10_000);
        let p = AtomParams::default();
        let t = template();
        let setup = ClockSetup {
            params: &p,
            template: &t,
            tau_ramsey: 0.0,
            spec: &spec,
        };
        assert!(variance_vs_detuning(&setup, &NoiseSpec::quiet(50, 0), &[0.0]).is_err());
        let dark = variance_vs_detuning(&setup, &NoiseSpec::quiet(200, 0), &[0.0]).unwrap();
        assert_eq!(dark.points[0].var_theta, None);
    }

    #[test]
    fn calibration_hits_target() {
        let spec = SqueezedVacuumSpec::vacuum(10_000);
        let p = AtomParams::default();
        let t = template();
        let setup = ClockSetup {
            params: &p,
            template: &t,
            tau_ramsey: 0.0,
            spec: &spec,
        };
        let noise = NoiseSpec::default();
        let sigma = calibrate_technical_floor(&setup, &noise, -5.5e3, 1.48).unwrap();
        let tuned = NoiseSpec {
            technical_sigma_f: sigma,
            ..noise
        };
        let w = setup.working(&tuned, -5.5e3).unwrap();
        let total = setup.terms(&tuned, &w).total();
        assert_abs_diff_eq!(total * 1e4 / (w.slope * w.slope), 1.48, epsilon = 1e-9);
        assert!(calibrate_technical_floor(&setup, &noise, -5.5e3, 0.5).is_err());
    }

    #[test]
    fn zero_drift_matches_plain_simulation() {
        let spec = SqueezedVacuumSpec::vacuum(10_000);
        let p = AtomParams::default();
        let t = template();
        let setup = ClockSetup {
            params: &p,
            template: &t,
            tau_ramsey: 0.0,
            spec: &spec,
        };
        let noise = NoiseSpec {
            n_shots: 5000,
            seed: 3,
            ..Default::default()
        };
        let plain = setup.simulate(&noise, -5.5e3).unwrap();
        let zero = setup
            .simulate_with_field_drift(&noise, -5.5e3, &[0.0])
            .unwrap();
        assert_eq!(plain, zero);
        let ramp: Vec<f64> = (0..5000).map(|k| 1e-3 * k as f64 / 5000.0).collect();
        let drifted = setup
            .simulate_with_field_drift(&noise, -5.5e3, &ramp)
            .unwrap();
        let late = SampleMoments::from_slice(&drifted[4000..]).unwrap();
        let early = SampleMoments::from_slice(&drifted[..1000]).unwrap();
        assert!(late.mean > early.mean);
    }

    proptest! {
        #[test]
        fn mixing_weights_sum_to_one(phi in -100.0..100.0f64) {
            let (g, a) = antisymmetric_mixing(phi);
            prop_assert!((g + a - 1.0).abs() < 1e-14);
        }

        #[test]
        fn antisymmetric_term_shrinks_toward_bright_fringe(f1 in 0.0..1.0f64, f2 in 0.0..1.0f64) {
            let var_na = antisymmetric_population_variance(5000.0, 0.0, 0.08);
            let (lo, hi) = if f1 < f2 { (f1, f2) } else { (f2, f1) };
            prop_assert!((1.0 - hi).powi(2) * var_na <= (1.0 - lo).powi(2) * var_na);
        }
    }
}
