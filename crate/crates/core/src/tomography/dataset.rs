use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::squeezing::{quadrature_variance_at, SqueezedVacuumSpec};

/// Quadrature samples recorded at one local-oscillator phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseRecord {
    pub phi: f64,
    pub samples: Vec<f64>,
}

/// Homodyne data with phases reduced to `[0, pi)` and sorted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomodyneDataset {
    records: Vec<PhaseRecord>,
}

fn reduce(phi: f64, x: f64) -> (f64, f64) {
    let turns = (phi / PI).floor();
    let mut reduced = phi - turns * PI;
    if reduced >= PI {
        reduced -= PI;
    }
    if turns.rem_euclid(2.0) == 0.0 {
        (reduced, x)
    } else {
        (reduced, -x)
    }
}

impl HomodyneDataset {
    /// Canonicalizes phases mod pi (`X(phi + pi) = -X(phi)`) and merges
    /// records that land on the same phase.
    pub fn new(records: Vec<PhaseRecord>) -> Result<Self> {
        let mut merged: Vec<PhaseRecord> = Vec::new();
        for rec in records {
            if !rec.phi.is_finite() {
                return Err(Error::Data(format!("non-finite phase {}", rec.phi)));
            }
            if let Some(x) = rec.samples.iter().find(|x| !x.is_finite()) {
                return Err(Error::Data(format!("non-finite sample {x}")));
            }
            if rec.samples.is_empty() {
                continue;
            }
            let (phi, _) = reduce(rec.phi, 0.0);
            let samples: Vec<f64> = rec.samples.iter().map(|&x| reduce(rec.phi, x).1).collect();
            match merged.iter_mut().find(|r| (r.phi - phi).abs() < 1e-12) {
                Some(r) => r.samples.extend(samples),
                None => merged.push(PhaseRecord { phi, samples }),
            }
        }
        if merged.len() < 2 {
            return Err(Error::Data(format!(
                "need at least 2 distinct phases with samples, got {}",
                merged.len()
            )));
        }
        merged.sort_by(|a, b| a.phi.total_cmp(&b.phi));
        Ok(HomodyneDataset { records: merged })
    }

    pub fn records(&self) -> &[PhaseRecord] {
        &self.records
    }

    pub fn n_phases(&self) -> usize {
        self.records.len()
    }

    pub fn n_samples(&self) -> usize {
        self.records.iter().map(|r| r.samples.len()).sum()
    }

    /// Every phase shifted by `delta`, then canonicalized again.
    pub fn rotated(&self, delta: f64) -> Result<Self> {
        HomodyneDataset::new(
            self.records
                .iter()
                .map(|r| PhaseRecord {
                    phi: r.phi + delta,
                    samples: r.samples.clone(),
                })
                .collect(),
        )
    }

    /// Parses `phi x` records, one per line; `#` starts a comment line.
    pub fn parse(text: &str) -> Result<Self> {
        let mut records: Vec<PhaseRecord> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|s| !s.is_empty())
                .collect();
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| Error::Data(format!("line {}: {e}: {s:?}", lineno + 1)))
            };
            if fields.len() != 2 {
                return Err(Error::Data(format!(
                    "line {}: expected 2 fields, found {}",
                    lineno + 1,
                    fields.len()
                )));
            }
            let (phi, x) = (parse(fields[0])?, parse(fields[1])?);
            match records.last_mut() {
                Some(r) if r.phi == phi => r.samples.push(x),
                _ => records.push(PhaseRecord {
                    phi,
                    samples: vec![x],
                }),
            }
        }
        if records.is_empty() {
            return Err(Error::Data("empty dataset".into()));
        }
        HomodyneDataset::new(records)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from("# phi_rad x\n");
        for r in &self.records {
            for x in &r.samples {
                let _ = writeln!(s, "{:?} {:?}", r.phi, x);
            }
        }
        s
    }

    /// Gaussian homodyne data for a squeezed vacuum at `n_phases` equally
    /// spaced phases in `[0, pi)`.
    pub fn simulate(
        spec: &SqueezedVacuumSpec,
        n_phases: usize,
        per_phase: usize,
        seed: u64,
    ) -> Result<Self> {
        spec.validate()?;
        if n_phases < 2 || per_phase == 0 {
            return Err(Error::param(
                "n_phases/per_phase",
                "need >= 2 phases and >= 1 sample",
            ));
        }
        let phases: Vec<f64> = (0..n_phases)
            .map(|k| PI * k as f64 / n_phases as f64)
            .collect();
        let sd: Vec<f64> = phases
            .iter()
            .map(|&phi| quadrature_variance_at(spec.r, phi, spec.phi_sq).sqrt())
            .collect();
        let flat = rng::par_generate(seed, n_phases * per_phase, |r| {
            use rand::Rng;
            r.sample::<f64, _>(rand_distr::StandardNormal)
        });
        let records = phases
            .iter()
            .enumerate()
            .map(|(k, &phi)| PhaseRecord {
                phi,
                samples: flat[k * per_phase..(k + 1) * per_phase]
                    .iter()
                    .map(|z| sd[k] * z)
                    .collect(),
            })
            .collect();
        HomodyneDataset::new(records)
    }

    /// Pools two datasets recorded at the same phases.
    pub fn pooled(&self, other: &HomodyneDataset) -> Result<Self> {
        HomodyneDataset::new(self.records.iter().chain(&other.records).cloned().collect())
    }
}

/// Gaussian moments of the state inferred from homodyne data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianEstimate {
    pub mean_x: f64,
    pub mean_p: f64,
    /// Covariance `[[s_xx, s_xp], [s_xp, s_pp]]`.
    pub cov: [[f64; 2]; 2],
}

impl GaussianEstimate {
    /// `Var X(phi)` implied by the covariance.
    pub fn variance_at(&self, phi: f64) -> f64 {
        let (s, c) = phi.sin_cos();
        self.cov[0][0] * c * c + 2.0 * self.cov[0][1] * s * c + self.cov[1][1] * s * s
    }

    /// `(minimum variance, maximum variance, phase of the minimum in [0, pi))`.
    pub fn principal(&self) -> (f64, f64, f64) {
        let [[a, b], [_, d]] = self.cov;
        let mean = (a + d) / 2.0;
        let rad = (((a - d) / 2.0).powi(2) + b * b).sqrt();
        let angle = 0.5 * (2.0 * b).atan2(a - d) + PI / 2.0;
        (mean - rad, mean + rad, angle.rem_euclid(PI))
    }
}

fn solve3(m: [[f64; 3]; 3], v: [f64; 3]) -> Option<[f64; 3]> {
    let det = |m: [[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(m);
    if d.abs() < 1e-300 {
        return None;
    }
    let mut out = [0.0; 3];
    for (k, o) in out.iter_mut().enumerate() {
        let mut mk = m;
        for i in 0..3 {
            mk[i][k] = v[i];
        }
        *o = det(mk) / d;
    }
    Some(out)
}

/// Maximum-likelihood Gaussian fit: means by least squares on
/// `mu(phi) = mu_x cos(phi) + mu_p sin(phi)`, then the variance model
/// `A + C cos 2phi + S sin 2phi` by Fisher scoring.
pub fn fit_gaussian(data: &HomodyneDataset) -> Result<GaussianEstimate> {
    let mut m = [[0.0; 2]; 2];
    let mut v = [0.0; 2];
    for r in data.records() {
        let (s, c) = r.phi.sin_cos();
        let n = r.samples.len() as f64;
        let sum: f64 = r.samples.iter().sum();
        m[0][0] += n * c * c;
        m[0][1] += n * c * s;
        m[1][1] += n * s * s;
        v[0] += c * sum;
        v[1] += s * sum;
    }
    let det = m[0][0] * m[1][1] - m[0][1] * m[0][1];
    if det.abs() < 1e-12 {
        return Err(Error::Data(
            "phases do not span the quadrature plane".into(),
        ));
    }
    let mean_x = (m[1][1] * v[0] - m[0][1] * v[1]) / det;
    let mean_p = (m[0][0] * v[1] - m[0][1] * v[0]) / det;

    let basis = |phi: f64| [1.0, (2.0 * phi).cos(), (2.0 * phi).sin()];
    let mut theta = [0.5, 0.0, 0.0];
    {
        // unweighted start
        let (mut a, mut b) = ([[0.0; 3]; 3], [0.0; 3]);
        for r in data.records() {
            let g = basis(r.phi);
            let mu = mean_x * r.phi.cos() + mean_p * r.phi.sin();
            for x in &r.samples {
                let z = (x - mu).powi(2);
                for i in 0..3 {
                    b[i] += g[i] * z;
                    for j in 0..3 {
                        a[i][j] += g[i] * g[j];
                    }
                }
            }
        }
        if let Some(t) = solve3(a, b) {
            theta = t;
        }
    }
    for _ in 0..50 {
        let (mut a, mut b) = ([[0.0; 3]; 3], [0.0; 3]);
        for r in data.records() {
            let g = basis(r.phi);
            let var = (g[0] * theta[0] + g[1] * theta[1] + g[2] * theta[2]).max(1e-8);
            let w = 1.0 / (var * var);
            let mu = mean_x * r.phi.cos() + mean_p * r.phi.sin();
            let z: f64 = r.samples.iter().map(|x| (x - mu).powi(2)).sum();
            let n = r.samples.len() as f64;
            for i in 0..3 {
                b[i] += w * g[i] * z;
                for j in 0..3 {
                    a[i][j] += w * n * g[i] * g[j];
                }
            }
        }
        let Some(next) = solve3(a, b) else { break };
        let change = (0..3)
            .map(|i| (next[i] - theta[i]).abs())
            .fold(0.0, f64::max);
        theta = next;
        if change < 1e-12 {
            break;
        }
    }
    let [a, c, s] = theta;
    Ok(GaussianEstimate {
        mean_x,
        mean_p,
        cov: [[a + c, s], [s, a - c]],
    })
}
