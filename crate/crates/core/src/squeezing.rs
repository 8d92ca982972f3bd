//! Squeezed-vacuum statistics and the homodyne picture of the clock output.
//!
//! The symmetric mode `g` holds a squeezed vacuum with squeeze parameter `r`.
//! At mid-fringe the interferometer reads out the quadrature
//! `X(phi) = (e^{-i phi} g + e^{i phi} g^dag) / sqrt(2)`, whose variance is
//! `1/2` for vacuum and `e^{-2r}/2` along the squeezed axis `phi_sq`.

use std::f64::consts::FRAC_PI_4;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, ensure_non_negative, Error, Result};
use crate::rng;

/// Squeeze parameter, local-oscillator phase, total atom number and the
/// orientation of the squeezed quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SqueezedVacuumSpec {
    pub r: f64,
    pub phi: f64,
    pub atoms: u64,
    pub phi_sq: f64,
}

impl SqueezedVacuumSpec {
    pub fn new(r: f64, phi: f64, atoms: u64) -> Result<Self> {
        let spec = SqueezedVacuumSpec {
            r,
            phi,
            atoms,
            phi_sq: FRAC_PI_4,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Vacuum input (classical clock) at the given atom number.
    pub fn vacuum(atoms: u64) -> Self {
        SqueezedVacuumSpec {
            r: 0.0,
            phi: FRAC_PI_4,
            atoms,
            phi_sq: FRAC_PI_4,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure_non_negative("r", self.r)?;
        ensure_finite("phi", self.phi)?;
        ensure_finite("phi_sq", self.phi_sq)?;
        if self.atoms == 0 {
            return Err(Error::param("atoms", "must be >= 1"));
        }
        Ok(())
    }

    pub fn with_phi(self, phi: f64) -> Self {
        SqueezedVacuumSpec { phi, ..self }
    }

    pub fn n(&self) -> f64 {
        self.atoms as f64
    }
}

/// `r = Omega * t`.
pub fn squeeze_parameter(omega: f64, t: f64) -> Result<f64> {
    ensure_finite("omega", omega)?;
    ensure_non_negative("t", t)?;
    Ok(omega * t)
}

/// Mean number of atoms per mode, `sinh^2 r`.
pub fn mean_pair_population(r: f64) -> f64 {
    r.sinh().powi(2)
}

/// Quadrature variance at an arbitrary angle `phi` from the squeezed axis.
pub fn quadrature_variance_at(r: f64, phi: f64, phi_sq: f64) -> f64 {
    let (s, c) = (phi - phi_sq).sin_cos();
    0.5 * ((-2.0 * r).exp() * c * c + (2.0 * r).exp() * s * s)
}

pub fn quadrature_variance(spec: &SqueezedVacuumSpec) -> f64 {
    quadrature_variance_at(spec.r, spec.phi, spec.phi_sq)
}

/// Gaussian homodyne samples of `X(phi)`; deterministic for a fixed seed.
pub fn sample_homodyne(spec: &SqueezedVacuumSpec, n_samples: usize, seed: u64) -> Result<Vec<f64>> {
    spec.validate()?;
    if n_samples == 0 {
        return Err(Error::param("n_samples", "must be >= 1"));
    }
    let sd = quadrature_variance(spec).sqrt();
    Ok(rng::par_generate(seed, n_samples, |rng| {
        sd * rng.sample::<f64, _>(StandardNormal)
    }))
}

/// Mean and variance of the clock fraction at phase `theta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FractionStats {
    pub mean: f64,
    pub variance: f64,
}

pub fn fraction_statistics(theta: f64, spec: &SqueezedVacuumSpec) -> Result<FractionStats> {
    spec.validate()?;
    ensure_finite("theta", theta)?;
    Ok(FractionStats {
        mean: (theta / 2.0).sin().powi(2),
        variance: quadrature_variance(spec) * theta.sin().powi(2) / (2.0 * spec.n()),
    })
}

/// Fringe slope `d f / d theta = sin(theta) / 2`.
pub fn fringe_slope(theta: f64) -> f64 {
    0.5 * theta.sin()
}

/// One simulated experimental shot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShotRecord {
    pub phi: f64,
    pub theta: f64,
    pub f: f64,
    pub x_sample: f64,
}

/// Simulate clock shots: quadrature noise mapped through the fringe, plus
/// Gaussian detection noise of `detection_sigma` atoms on each of the two
/// `|1,+-1>` counts.
pub fn simulate_shots(
    theta: f64,
    spec: &SqueezedVacuumSpec,
    n_shots: usize,
    detection_sigma: f64,
    seed: u64,
) -> Result<Vec<ShotRecord>> {
    spec.validate()?;
    ensure_finite("theta", theta)?;
    ensure_non_negative("detection_sigma", detection_sigma)?;
    if n_shots == 0 {
        return Err(Error::param("n_shots", "must be >= 1"));
    }
    let n = spec.n();
    let sd = quadrature_variance(spec).sqrt();
    let mean = (theta / 2.0).sin().powi(2);
    let gain = theta.sin() / (2.0 * n).sqrt();
    let phi = spec.phi;
    Ok(rng::par_generate(seed, n_shots, |rng| {
        let x = sd * rng.sample::<f64, _>(StandardNormal);
        let mut f = mean + gain * x;
        if detection_sigma > 0.0 {
            let d_plus: f64 = rng.sample(StandardNormal);
            let d_minus: f64 = rng.sample(StandardNormal);
            f += detection_sigma * (d_plus + d_minus) / n;
        }
        ShotRecord {
            phi,
            theta,
            f: f.clamp(0.0, 1.0),
            x_sample: x,
        }
    }))
}

/// `(Delta theta)^2 = (Delta f)^2 / slope^2`.
pub fn phase_uncertainty(var_f: f64, slope: f64) -> Result<f64> {
    ensure_non_negative("var_f", var_f)?;
    ensure_finite("slope", slope)?;
    if slope == 0.0 {
        return Err(Error::DegenerateSlope);
    }
    Ok(var_f / (slope * slope))
}

/// Phase variance relative to the standard quantum limit `1/N`, in dB.
pub fn db_vs_sql(var_theta: f64, atoms: f64) -> Result<f64> {
    ensure_finite("var_theta", var_theta)?;
    if var_theta <= 0.0 {
        return Err(Error::param(
            "var_theta",
            format!("must be > 0, got {var_theta}"),
        ));
    }
    if !(atoms >= 1.0) {
        return Err(Error::param("atoms", "must be >= 1"));
    }
    Ok(10.0 * (atoms * var_theta).log10())
}

/// Mean-field collective spin of the `(g, e)` pseudo-spin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PseudoSpin {
    pub jx: f64,
    pub jy: f64,
    pub jz: f64,
}

pub fn quadrature_to_pseudospin(x: f64, p: f64, atoms: u64) -> Result<PseudoSpin> {
    if atoms == 0 {
        return Err(Error::param("atoms", "must be >= 1"));
    }
    let n = atoms as f64;
    Ok(PseudoSpin {
        jx: n.sqrt() * x,
        jy: n.sqrt() * p,
        jz: n / 2.0,
    })
}

/// Sample mean and unbiased variance, with the standard error of the variance
/// estimated from the fourth central moment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleMoments {
    pub count: usize,
    pub mean: f64,
    pub variance: f64,
    pub variance_se: f64,
}

impl SampleMoments {
    pub fn from_slice(values: &[f64]) -> Result<Self> {
        let count = values.len();
        if count < 2 {
            return Err(Error::Data("need at least two samples".into()));
        }
        let n = count as f64;
        let mean = values.iter().sum::<f64>() / n;
        let (m2, m4) = values.iter().fold((0.0, 0.0), |(a, b), v| {
            let d = (v - mean) * (v - mean);
            (a + d, b + d * d)
        });
        let variance = m2 / (n - 1.0);
        let m2n = m2 / n;
        let m4n = m4 / n;
        let variance_se = ((m4n - m2n * m2n).max(0.0) / n).sqrt();
        Ok(SampleMoments {
            count,
            mean,
            variance,
            variance_se,
        })
    }
}

/// Phase-estimation summary of a set of shots at a known fringe slope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseEstimate {
    pub moments: SampleMoments,
    pub var_theta: f64,
    /// `N * (Delta theta)^2`, 1 at the standard quantum limit.
    pub sql_ratio: f64,
    pub sql_ratio_se: f64,
    pub db_vs_sql: f64,
}

pub fn estimate_phase(fractions: &[f64], slope: f64, atoms: u64) -> Result<PhaseEstimate> {
    let moments = SampleMoments::from_slice(fractions)?;
    let var_theta = phase_uncertainty(moments.variance, slope)?;
    let n = atoms as f64;
    let scale = n / (slope * slope);
    Ok(PhaseEstimate {
        moments,
        var_theta,
        sql_ratio: var_theta * n,
        sql_ratio_se: moments.variance_se * scale,
        db_vs_sql: db_vs_sql(var_theta, n)?,
    })
}
