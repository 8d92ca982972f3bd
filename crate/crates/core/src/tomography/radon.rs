use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::{fit_gaussian, HomodyneDataset};
use super::quad::gauss_legendre;
use super::wigner::{GridSpec, WignerGrid};
use crate::error::{Error, Result};

pub const DEFAULT_KC: f64 = 2.0;

/// Back-projection kernel `[cos(k_c x) + k_c x sin(k_c x) - 1] / x^2`.
pub fn radon_kernel(x: f64, k_c: f64) -> f64 {
    let u = k_c * x;
    if u.abs() < 1e-3 {
        // series: k_c^2 (1/2 - u^2/8 + u^4/144)
        let u2 = u * u;
        return k_c * k_c * (0.5 - u2 / 8.0 + u2 * u2 / 144.0);
    }
    (u.cos() + u * u.sin() - 1.0) / (x * x)
}

fn check_kc(k_c: f64) -> Result<()> {
    if !(k_c > 0.0) || !k_c.is_finite() {
        return Err(Error::param("k_c", "must be > 0"));
    }
    Ok(())
}

/// Sample-sum filtered back-projection.
pub fn reconstruct_wigner(data: &HomodyneDataset, grid: &GridSpec, k_c: f64) -> Result<WignerGrid> {
    check_kc(k_c)?;
    let norm = 1.0 / (2.0 * PI * data.n_phases() as f64);
    let recs = data.records();
    WignerGrid::from_fn(grid, |x, p| {
        let mut w = 0.0;
        for r in recs {
            let u = x * r.phi.cos() + p * r.phi.sin();
            let s: f64 = r.samples.iter().map(|xj| radon_kernel(u - xj, k_c)).sum();
            w += s / r.samples.len() as f64;
        }
        norm * w
    })
}

/// Back-projection of per-phase histograms with bin width `bin_width`.
pub fn reconstruct_wigner_binned(
    data: &HomodyneDataset,
    grid: &GridSpec,
    k_c: f64,
    bin_width: f64,
) -> Result<WignerGrid> {
    check_kc(k_c)?;
    if !(bin_width > 0.0) {
        return Err(Error::param("bin_width", "must be > 0"));
    }
    let hist: Vec<(f64, Vec<(f64, f64)>)> = data
        .records()
        .iter()
        .map(|r| {
            let mut counts = std::collections::BTreeMap::<i64, usize>::new();
            for x in &r.samples {
                *counts.entry((x / bin_width).floor() as i64).or_default() += 1;
            }
            let n = r.samples.len() as f64;
            let bins = counts
                .into_iter()
                .map(|(k, c)| ((k as f64 + 0.5) * bin_width, c as f64 / n))
                .collect();
            (r.phi, bins)
        })
        .collect();
    let norm = 1.0 / (2.0 * PI * data.n_phases() as f64);
    WignerGrid::from_fn(grid, |x, p| {
        let mut w = 0.0;
        for (phi, bins) in &hist {
            let u = x * phi.cos() + p * phi.sin();
            w += bins
                .iter()
                .map(|(c, f)| f * radon_kernel(u - c, k_c))
                .sum::<f64>();
        }
        norm * w
    })
}

/// Gaussian parameters read off a band-limited reconstruction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SqueezeFit {
    pub var_squeezed: f64,
    pub var_anti: f64,
    /// Quadrature phase of the squeezed variance, in `[0, pi)`.
    pub angle: f64,
    pub mean_x: f64,
    pub mean_p: f64,
    pub rms_residual: f64,
}

/// Expected back-projection of a Gaussian state through the band-limited
/// kernel, evaluated on fixed points and phases.
struct BandLimitedModel {
    phases: Vec<f64>,
    nodes: Vec<(f64, f64)>,
    /// `cos(k_i u)` for each point, phase and node.
    cos_table: Vec<f64>,
    n_points: usize,
}

impl BandLimitedModel {
    fn new(points: &[(f64, f64)], centre: (f64, f64), phases: Vec<f64>, k_c: f64) -> Self {
        let nodes = gauss_legendre(32, 0.0, k_c);
        let (nph, nk) = (phases.len(), nodes.len());
        let mut cos_table = vec![0.0; points.len() * nph * nk];
        cos_table
            .par_chunks_mut(nph * nk)
            .zip(points.par_iter())
            .for_each(|(row, &(x, p))| {
                for (a, phi) in phases.iter().enumerate() {
                    let u = (x - centre.0) * phi.cos() + (p - centre.1) * phi.sin();
                    for (i, (k, _)) in nodes.iter().enumerate() {
                        row[a * nk + i] = (k * u).cos();
                    }
                }
            });
        BandLimitedModel {
            phases,
            nodes,
            cos_table,
            n_points: points.len(),
        }
    }

    /// Parameters `[ln v_sq, ln v_anti, angle]`.
    fn eval(&self, theta: &[f64; 3]) -> Vec<f64> {
        let (v1, v2, alpha) = (theta[0].exp(), theta[1].exp(), theta[2]);
        let nk = self.nodes.len();
        let norm = 1.0 / (2.0 * PI * self.phases.len() as f64);
        let weights: Vec<f64> = self
            .phases
            .iter()
            .flat_map(|phi| {
                let (s, c) = (phi - alpha).sin_cos();
                let v = v1 * c * c + v2 * s * s;
                self.nodes
                    .iter()
                    .map(move |(k, w)| norm * w * k * (-k * k * v / 2.0).exp())
            })
            .collect();
        let stride = self.phases.len() * nk;
        (0..self.n_points)
            .into_par_iter()
            .map(|g| {
                let row = &self.cos_table[g * stride..(g + 1) * stride];
                row.iter().zip(&weights).map(|(c, w)| c * w).sum()
            })
            .collect()
    }
}

fn residual_norm(model: &[f64], data: &[f64]) -> f64 {
    model.iter().zip(data).map(|(m, d)| (m - d).powi(2)).sum()
}

/// Least-squares fit of a Gaussian state, passed through the same
/// band-limited back-projection, to a reconstructed Wigner grid.
///
/// Means come from the raw homodyne data; variances and orientation from a
/// Levenberg-Marquardt fit over the grid.
pub fn fit_squeezed_gaussian(
    wigner: &WignerGrid,
    data: &HomodyneDataset,
    k_c: f64,
) -> Result<SqueezeFit> {
    check_kc(k_c)?;
    let start = fit_gaussian(data)?;
    let (lo, hi, angle) = start.principal();
    let phases: Vec<f64> = if data.n_phases() <= 64 {
        data.records().iter().map(|r| r.phi).collect()
    } else {
        (0..64).map(|k| PI * k as f64 / 64.0).collect()
    };
    let points: Vec<(f64, f64)> = wigner
        .x_axis
        .iter()
        .flat_map(|&x| wigner.p_axis.iter().map(move |&p| (x, p)))
        .collect();
    let model = BandLimitedModel::new(&points, (start.mean_x, start.mean_p), phases, k_c);
    let target = &wigner.values;

    let mut theta = [lo.max(1e-3).ln(), hi.max(1e-3).ln(), angle];
    let mut current = model.eval(&theta);
    let mut cost = residual_norm(&current, target);
    let mut lambda = 1e-3;
    for _ in 0..200 {
        let mut jac = [vec![], vec![], vec![]];
        for (i, col) in jac.iter_mut().enumerate() {
            let mut t = theta;
            t[i] += 1e-6;
            *col = model
                .eval(&t)
                .iter()
                .zip(&current)
                .map(|(a, b)| (a - b) / 1e-6)
                .collect();
        }
        let mut jtj = [[0.0; 3]; 3];
        let mut jtr = [0.0; 3];
        for g in 0..current.len() {
            let r = target[g] - current[g];
            for i in 0..3 {
                jtr[i] += jac[i][g] * r;
                for j in 0..3 {
                    jtj[i][j] += jac[i][g] * jac[j][g];
                }
            }
        }
        let mut improved = false;
        while lambda < 1e12 {
            let mut a = jtj;
            for (i, row) in a.iter_mut().enumerate() {
                row[i] += lambda * jtj[i][i].max(1e-300);
            }
            let Some(step) = solve_small(a, jtr) else {
                lambda *= 10.0;
                continue;
            };
            let trial = [theta[0] + step[0], theta[1] + step[1], theta[2] + step[2]];
            let next = model.eval(&trial);
            let c = residual_norm(&next, target);
            if c < cost {
                let rel = (cost - c) / cost.max(1e-300);
                theta = trial;
                current = next;
                cost = c;
                lambda = (lambda / 10.0).max(1e-12);
                improved = rel > 1e-12;
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    let (mut v1, mut v2, mut alpha) = (theta[0].exp(), theta[1].exp(), theta[2]);
    if v1 > v2 {
        std::mem::swap(&mut v1, &mut v2);
        alpha += PI / 2.0;
    }
    Ok(SqueezeFit {
        var_squeezed: v1,
        var_anti: v2,
        angle: alpha.rem_euclid(PI),
        mean_x: start.mean_x,
        mean_p: start.mean_p,
        rms_residual: (cost / current.len() as f64).sqrt(),
    })
}

fn solve_small(m: [[f64; 3]; 3], v: [f64; 3]) -> Option<[f64; 3]> {
    let a = nalgebra::Matrix3::from_fn(|i, j| m[i][j]);
    a.lu()
        .solve(&nalgebra::Vector3::from(v))
        .map(|x| [x[0], x[1], x[2]])
}
