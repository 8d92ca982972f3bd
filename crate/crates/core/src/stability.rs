//! Allan deviation and fractional frequency stability.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};

/// Rb-87 ground-state hyperfine splitting (Hz).
pub const RB87_CLOCK_HZ: f64 = 6.834_682_610_904e9;

/// Evenly sampled series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub dt: f64,
    pub values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(dt: f64, values: Vec<f64>) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::param("dt", "must be > 0"));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite sample {v}")));
        }
        Ok(TimeSeries { dt, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllanCurve {
    pub taus: Vec<f64>,
    pub sigmas: Vec<f64>,
    /// Number of averaging-window pairs behind each point.
    pub counts: Vec<usize>,
    /// Requested averaging factors dropped for lack of data.
    pub skipped: Vec<usize>,
}

impl AllanCurve {
    /// Least-squares slope of `log sigma` against `log tau`.
    pub fn log_slope(&self) -> Result<f64> {
        log_log_slope(&self.taus, &self.sigmas)
    }
}

/// `sigma^2 = <(y_{k+1} - y_k)^2> / 2` over adjacent samples.
pub fn two_sample_variance(y: &[f64]) -> Result<f64> {
    if y.len() < 2 {
        return Err(Error::Data("need at least two samples".into()));
    }
    let s: f64 = y.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
    Ok(s / (2.0 * (y.len() - 1) as f64))
}

fn block_means(y: &[f64], m: usize) -> Vec<f64> {
    y.chunks_exact(m)
        .map(|c| c.iter().sum::<f64>() / m as f64)
        .collect()
}

/// Non-overlapping Allan deviation at averaging factors `m` (`tau = m dt`).
pub fn allan_deviation(series: &TimeSeries, factors: &[usize]) -> Result<AllanCurve> {
    allan_impl(series, factors, false)
}

/// Overlapping Allan deviation at averaging factors `m`.
pub fn overlapping_allan_deviation(series: &TimeSeries, factors: &[usize]) -> Result<AllanCurve> {
    allan_impl(series, factors, true)
}

fn allan_impl(series: &TimeSeries, factors: &[usize], overlapping: bool) -> Result<AllanCurve> {
    if series.len() < 3 {
        return Err(Error::Data(
            "Allan analysis needs at least three samples".into(),
        ));
    }
    let mut sorted = factors.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let mut curve = AllanCurve {
        taus: vec![],
        sigmas: vec![],
        counts: vec![],
        skipped: vec![],
    };
    for &m in &sorted {
        if m == 0 {
            return Err(Error::param("factors", "averaging factor must be >= 1"));
        }
        let (var, count) = if m == 1 {
            (two_sample_variance(&series.values)?, series.len() - 1)
        } else if overlapping {
            overlapping_variance(&series.values, m)
        } else {
            let means = block_means(&series.values, m);
            if means.len() < 2 {
                (f64::NAN, 0)
            } else {
                (two_sample_variance(&means)?, means.len() - 1)
            }
        };
        if count == 0 {
            curve.skipped.push(m);
            continue;
        }
        curve.taus.push(m as f64 * series.dt);
        curve.sigmas.push(var.sqrt());
        curve.counts.push(count);
    }
    Ok(curve)
}

fn overlapping_variance(y: &[f64], m: usize) -> (f64, usize) {
    if y.len() < 2 * m {
        return (f64::NAN, 0);
    }
    let mut prefix = Vec::with_capacity(y.len() + 1);
    prefix.push(0.0);
    for v in y {
        prefix.push(prefix.last().unwrap() + v);
    }
    let count = y.len() + 1 - 2 * m;
    let mut s = 0.0;
    for i in 0..count {
        let a = (prefix[i + m] - prefix[i]) / m as f64;
        let b = (prefix[i + 2 * m] - prefix[i + m]) / m as f64;
        s += (b - a).powi(2);
    }
    (s / (2.0 * count as f64), count)
}

/// Averaging factors 1, 2, 4, ... up to half the series length.
pub fn octave_factors(len: usize) -> Vec<usize> {
    let mut out = vec![];
    let mut m = 1;
    while 2 * m <= len {
        out.push(m);
        m *= 2;
    }
    out
}

/// Ordinary and two-sample variance of the same series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftRejection {
    pub ordinary: f64,
    pub two_sample: f64,
}

/// Both variance estimators; a slow drift inflates the ordinary variance
/// while barely touching the two-sample one.
pub fn drift_rejection_gain(y: &[f64]) -> Result<DriftRejection> {
    if y.len() < 3 {
        return Err(Error::Data("need at least three samples".into()));
    }
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let ordinary = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(DriftRejection {
        ordinary,
        two_sample: two_sample_variance(y)?,
    })
}

/// `sigma_y = delta_theta / (2 pi nu_0 T)`.
pub fn fractional_instability(delta_theta: f64, nu0: f64, ramsey_time: f64) -> Result<f64> {
    ensure_finite("delta_theta", delta_theta)?;
    if !(nu0 > 0.0) || !(ramsey_time > 0.0) || !nu0.is_finite() || !ramsey_time.is_finite() {
        return Err(Error::param("nu0/ramsey_time", "must be > 0"));
    }
    Ok(delta_theta.abs() / (2.0 * PI * nu0 * ramsey_time))
}

pub fn log_log_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Data("need two or more matched points".into()));
    }
    if x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return Err(Error::Data("log-log fit needs positive values".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Data("all taus identical".into()));
    }
    Ok(sxy / sxx)
}
