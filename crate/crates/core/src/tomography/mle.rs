use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::dataset::{fit_gaussian, GaussianEstimate, HomodyneDataset};
use super::quad::gauss_legendre;
use super::wigner::{GridSpec, WignerGrid};
use crate::error::{Error, Result};
use crate::fock::CUTOFF_TOLERANCE;

pub const DEFAULT_BIN_WIDTH: f64 = 0.1;
pub const DEFAULT_ITERATIONS: usize = 500;
/// Large enough that truncating a squeezed vacuum near r = 0.8 leaves no
/// visible negativity in the Wigner function.
pub const DEFAULT_MLE_N_MAX: usize = 60;

/// Fock-basis density matrix, `dim = n_max + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    rho: DMatrix<Complex64>,
}

impl DensityMatrix {
    pub fn new(rho: DMatrix<Complex64>) -> Result<Self> {
        let d = DensityMatrix { rho };
        d.validate()?;
        Ok(d)
    }

    pub fn fock(n: usize, n_max: usize) -> Result<Self> {
        if n > n_max {
            return Err(Error::param("n", "above cutoff"));
        }
        let mut rho = DMatrix::zeros(n_max + 1, n_max + 1);
        rho[(n, n)] = Complex64::new(1.0, 0.0);
        Ok(DensityMatrix { rho })
    }

    pub fn from_pure(amps: &[Complex64]) -> Result<Self> {
        let v = nalgebra::DVector::from_column_slice(amps);
        let norm = v.norm();
        if !(norm > 0.0) {
            return Err(Error::param("amps", "zero vector"));
        }
        let v = v / Complex64::new(norm, 0.0);
        DensityMatrix::new(&v * v.adjoint())
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.rho
    }

    pub fn dim(&self) -> usize {
        self.rho.nrows()
    }

    pub fn n_max(&self) -> usize {
        self.dim() - 1
    }

    pub fn trace(&self) -> f64 {
        self.rho.trace().re
    }

    pub fn hermiticity_error(&self) -> f64 {
        (&self.rho - self.rho.adjoint()).camax()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let h = (&self.rho + self.rho.adjoint()) * Complex64::new(0.5, 0.0);
        h.symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn population(&self, n: usize) -> f64 {
        self.rho[(n, n)].re
    }

    /// Hermitian within 1e-10, trace 1 within 1e-10, eigenvalues >= -1e-10.
    pub fn validate(&self) -> Result<()> {
        if self.rho.nrows() != self.rho.ncols() || self.rho.nrows() < 2 {
            return Err(Error::Data(
                "density matrix must be square with dim >= 2".into(),
            ));
        }
        if self.hermiticity_error() > 1e-10 {
            return Err(Error::Data("density matrix not Hermitian".into()));
        }
        if (self.trace() - 1.0).abs() > 1e-10 {
            return Err(Error::Data(format!("trace {} != 1", self.trace())));
        }
        let lo = self.min_eigenvalue();
        if lo < -1e-10 {
            return Err(Error::Data(format!("negative eigenvalue {lo}")));
        }
        Ok(())
    }

    /// `<X(phi)^2> - <X(phi)>^2` from the matrix elements.
    pub fn quadrature_variance(&self, phi: f64) -> f64 {
        let d = self.dim();
        let mut a = DMatrix::<Complex64>::zeros(d, d);
        for n in 1..d {
            a[(n - 1, n)] = Complex64::new((n as f64).sqrt(), 0.0);
        }
        let e = Complex64::from_polar(1.0, -phi);
        let x = (&a * e + a.adjoint() * e.conj())
            * Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let mean = (&self.rho * &x).trace().re;
        let second = (&self.rho * &x * &x).trace().re;
        second - mean * mean
    }
}

/// How the per-phase quadrature distributions entering the likelihood are formed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MleInput {
    /// Raw histograms of the samples.
    Histogram,
    /// Gaussian distributions at each phase, fitted to the samples.
    GaussianModel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MleOptions {
    pub n_max: usize,
    pub n_iterations: usize,
    pub bin_width: f64,
    pub tolerance: f64,
    pub input: MleInput,
}

impl Default for MleOptions {
    fn default() -> Self {
        MleOptions {
            n_max: DEFAULT_MLE_N_MAX,
            n_iterations: DEFAULT_ITERATIONS,
            bin_width: DEFAULT_BIN_WIDTH,
            tolerance: 1e-8,
            input: MleInput::GaussianModel,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MleStatus {
    Converged,
    /// Iteration budget exhausted; the last iterate is returned.
    MaxIterations,
}

#[derive(Debug, Clone)]
pub struct MleResult {
    pub rho: DensityMatrix,
    pub status: MleStatus,
    pub iterations: usize,
    /// Mean log-likelihood per phase after each iteration.
    pub log_likelihood: Vec<f64>,
}

/// Harmonic-oscillator eigenfunctions `psi_0..psi_{n_max}` at `x`.
pub(crate) fn hermite_functions(x: f64, n_max: usize) -> Vec<f64> {
    let mut psi = vec![0.0; n_max + 1];
    psi[0] = std::f64::consts::PI.powf(-0.25) * (-x * x / 2.0).exp();
    if n_max >= 1 {
        psi[1] = std::f64::consts::SQRT_2 * x * psi[0];
    }
    for n in 1..n_max {
        let nf = n as f64;
        psi[n + 1] = (2.0 / (nf + 1.0)).sqrt() * x * psi[n] - (nf / (nf + 1.0)).sqrt() * psi[n - 1];
    }
    psi
}

/// `B[m, n] = int_bin psi_m psi_n dx`, stored row-major.
fn bin_overlap(lo: f64, hi: f64, dim: usize) -> Vec<f64> {
    let mut b = vec![0.0; dim * dim];
    for (x, w) in gauss_legendre(6, lo, hi) {
        let psi = hermite_functions(x, dim - 1);
        for m in 0..dim {
            for n in m..dim {
                b[m * dim + n] += w * psi[m] * psi[n];
            }
        }
    }
    for m in 0..dim {
        for n in 0..m {
            b[m * dim + n] = b[n * dim + m];
        }
    }
    b
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Complementary error function, fractional error below 1.2e-7.
fn erfc(x: f64) -> f64 {
    let z = x.abs();
    let t = 1.0 / (1.0 + 0.5 * z);
    let r = t
        * (-z * z - 1.26551223
            + t * (1.00002368
                + t * (0.37409196
                    + t * (0.09678418
                        + t * (-0.18628806
                            + t * (0.27886807
                                + t * (-1.13520398
                                    + t * (1.48851587 + t * (-0.82215223 + t * 0.17087277)))))))))
            .exp();
    if x >= 0.0 {
        r
    } else {
        2.0 - r
    }
}

/// Scales the covariance up to the nearest physical (uncertainty-respecting) one.
fn physical(mut g: GaussianEstimate) -> GaussianEstimate {
    let (lo, hi, _) = g.principal();
    if lo > 0.0 && lo * hi >= 0.25 {
        return g;
    }
    let lo = lo.max(1e-6);
    let scale = (0.25 / (lo * hi.max(lo))).sqrt();
    for row in g.cov.iter_mut() {
        for v in row.iter_mut() {
            *v *= scale;
        }
    }
    g
}

struct Phase {
    /// `e^{i m phi}`
    d: Vec<Complex64>,
    /// (bin index, observed frequency)
    freqs: Vec<(usize, f64)>,
}

/// Iterative `R rho R` maximum-likelihood reconstruction over binned
/// quadrature projectors.
pub fn mle_reconstruct(data: &HomodyneDataset, opts: &MleOptions) -> Result<MleResult> {
    if opts.n_max < 2 {
        return Err(Error::param("n_max", "must be >= 2"));
    }
    if !(opts.bin_width > 0.0) {
        return Err(Error::param("bin_width", "must be > 0"));
    }
    if opts.n_iterations == 0 {
        return Err(Error::param("n_iterations", "must be >= 1"));
    }
    let dim = opts.n_max + 1;
    let gauss = physical(fit_gaussian(data)?);
    let (_, hi, _) = gauss.principal();
    let spread = 7.0 * hi.sqrt() + gauss.mean_x.hypot(gauss.mean_p);
    let max_abs = data
        .records()
        .iter()
        .flat_map(|r| r.samples.iter())
        .fold(0.0f64, |a, x| a.max(x.abs()));
    let half = match opts.input {
        MleInput::Histogram => max_abs + opts.bin_width,
        MleInput::GaussianModel => spread,
    };
    let n_bins = (2.0 * half / opts.bin_width).ceil() as usize;
    let lo = -(n_bins as f64) * opts.bin_width / 2.0;
    let edges: Vec<f64> = (0..=n_bins)
        .map(|k| lo + k as f64 * opts.bin_width)
        .collect();
    let bins: Vec<Vec<f64>> = (0..n_bins)
        .map(|k| bin_overlap(edges[k], edges[k + 1], dim))
        .collect();

    let phases: Vec<Phase> = data
        .records()
        .iter()
        .map(|r| {
            let mut f = vec![0.0; n_bins];
            match opts.input {
                MleInput::Histogram => {
                    for x in &r.samples {
                        let k = ((x - lo) / opts.bin_width).floor();
                        if k >= 0.0 && (k as usize) < n_bins {
                            f[k as usize] += 1.0;
                        }
                    }
                }
                MleInput::GaussianModel => {
                    let mu = gauss.mean_x * r.phi.cos() + gauss.mean_p * r.phi.sin();
                    let sd = gauss.variance_at(r.phi).sqrt();
                    for (k, fk) in f.iter_mut().enumerate() {
                        *fk =
                            normal_cdf((edges[k + 1] - mu) / sd) - normal_cdf((edges[k] - mu) / sd);
                    }
                }
            }
            let total: f64 = f.iter().sum();
            Phase {
                d: (0..dim)
                    .map(|m| Complex64::from_polar(1.0, m as f64 * r.phi))
                    .collect(),
                freqs: f
                    .iter()
                    .enumerate()
                    .filter(|(_, v)| **v / total > 1e-14)
                    .map(|(k, v)| (k, v / total))
                    .collect(),
            }
        })
        .collect();

    let n_phi = phases.len() as f64;
    // returns (log-likelihood, R)
    let evaluate = |rho: &DMatrix<Complex64>| -> (f64, DMatrix<Complex64>) {
        use rayon::prelude::*;
        let parts: Vec<(f64, DMatrix<Complex64>)> = phases
            .par_iter()
            .map(|ph| {
                // rho_phi[n, m] = conj(d_n) rho[n, m] d_m
                let rho_phi =
                    DMatrix::from_fn(dim, dim, |n, m| ph.d[n].conj() * rho[(n, m)] * ph.d[m]);
                let mut r_phi = vec![0.0; dim * dim];
                let mut ll = 0.0;
                for &(k, f) in &ph.freqs {
                    let b = &bins[k];
                    let mut p = 0.0;
                    for m in 0..dim {
                        for n in 0..dim {
                            p += b[m * dim + n] * rho_phi[(n, m)].re;
                        }
                    }
                    let p = p.max(1e-300);
                    ll += f * p.ln();
                    let w = f / p;
                    for (acc, bv) in r_phi.iter_mut().zip(b) {
                        *acc += w * bv;
                    }
                }
                let r = DMatrix::from_fn(dim, dim, |m, n| {
                    ph.d[m] * Complex64::new(r_phi[m * dim + n], 0.0) * ph.d[n].conj()
                });
                (ll, r)
            })
            .collect();
        let mut ll = 0.0;
        let mut r = DMatrix::<Complex64>::zeros(dim, dim);
        for (l, m) in parts {
            ll += l;
            r += m;
        }
        (ll / n_phi, r / Complex64::new(n_phi, 0.0))
    };
    let normalize = |m: DMatrix<Complex64>| {
        let h = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
        let tr = h.trace().re;
        h / Complex64::new(tr, 0.0)
    };

    let mut rho = DMatrix::<Complex64>::identity(dim, dim) / Complex64::new(dim as f64, 0.0);
    let (mut ll, mut r) = evaluate(&rho);
    let mut history = Vec::with_capacity(opts.n_iterations);
    let mut status = MleStatus::MaxIterations;
    let mut iterations = 0;
    for _ in 0..opts.n_iterations {
        iterations += 1;
        let mut eps = f64::INFINITY;
        let (next, next_ll, next_r) = loop {
            // full step R rho R, or the diluted (I + eps R) rho (I + eps R)
            let op = if eps.is_infinite() {
                r.clone()
            } else {
                DMatrix::<Complex64>::identity(dim, dim) + &r * Complex64::new(eps, 0.0)
            };
            let cand = normalize(&op * &rho * op.adjoint());
            let (cl, cr) = evaluate(&cand);
            if cl >= ll || eps < 1e-8 {
                break (cand, cl, cr);
            }
            eps = if eps.is_infinite() { 1.0 } else { eps / 2.0 };
        };
        let gain = next_ll - ll;
        if gain < 0.0 {
            // no ascent direction left at machine precision
            history.push(ll);
            status = MleStatus::Converged;
            break;
        }
        rho = next;
        ll = next_ll;
        r = next_r;
        history.push(ll);
        if gain < opts.tolerance {
            status = MleStatus::Converged;
            break;
        }
    }
    let rho = DensityMatrix { rho };
    Ok(MleResult {
        rho,
        status,
        iterations,
        log_likelihood: history,
    })
}

fn ln_factorials(n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n + 1];
    for k in 1..=n {
        out[k] = out[k - 1] + (k as f64).ln();
    }
    out
}

/// Wigner function of a Fock-basis density matrix on a grid.
///
/// Fails with a cutoff error when the top Fock level carries more than
/// the cutoff tolerance, since the truncated matrix no longer represents
/// the state.
pub fn wigner_from_density(rho: &DensityMatrix, grid: &GridSpec) -> Result<WignerGrid> {
    rho.validate()?;
    let d = rho.dim();
    let top = rho.population(d - 1);
    if top > CUTOFF_TOLERANCE {
        return Err(Error::Cutoff {
            n_max: d - 1,
            population: top,
        });
    }
    let lf = ln_factorials(d);
    let m = rho.matrix();
    WignerGrid::from_fn(grid, |x, p| {
        let r2 = x * x + p * p;
        let y = 2.0 * r2;
        let z = Complex64::new(x, -p) * std::f64::consts::SQRT_2;
        let ln_abs = if r2 > 0.0 {
            z.norm().ln()
        } else {
            f64::NEG_INFINITY
        };
        let unit = if r2 > 0.0 {
            z / z.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        let mut w = 0.0;
        for alpha in 0..d {
            if alpha > 0 && r2 == 0.0 {
                break;
            }
            let af = alpha as f64;
            // Laguerre L_n^{alpha}(y) by upward recurrence
            let phase = unit.powu(alpha as u32);
            let (mut prev, mut cur) = (0.0, 1.0);
            for n in 0..d - alpha {
                let nf = n as f64;
                if n > 0 {
                    let next = ((2.0 * nf - 1.0 + af - y) * cur - (nf - 1.0 + af) * prev) / nf;
                    prev = cur;
                    cur = next;
                }
                let mm = n + alpha;
                let ln_pow = if alpha == 0 { 0.0 } else { af * ln_abs };
                let mag = (0.5 * (lf[n] - lf[mm]) + ln_pow - r2).exp();
                let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
                let term = m[(mm, n)] * phase * (sign * mag * cur / std::f64::consts::PI);
                w += if alpha == 0 { term.re } else { 2.0 * term.re };
            }
        }
        w
    })
}
