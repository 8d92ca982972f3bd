//! Brute-force two-mode Fock-space oracle for spin-changing collisions.
//!
//! Evolves the two-mode vacuum of `|1,+1>` and `|1,-1>` under
//! `H = Omega (a_+^dag a_-^dag + a_+ a_-)` on the truncated product basis
//! `|n_+, n_->`, `n_+- <= n_max`. Observables of the symmetric and
//! antisymmetric modes are computed by applying the ladder operators to the
//! state vector; nothing here uses the closed-form squeezing results.

use num_complex::Complex64;

use crate::error::{ensure_finite, ensure_non_negative, Error, Result};

/// Largest tolerated population in the cutoff level of either mode.
pub const CUTOFF_TOLERANCE: f64 = 1e-6;
pub const DEFAULT_N_MAX: usize = 40;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// State on the two-mode number basis, `amps[n_plus * (n_max + 1) + n_minus]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FockState {
    n_max: usize,
    amps: Vec<Complex64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// `g = (a_+ + a_-) / sqrt(2)`
    Symmetric,
    /// `a = (a_+ - a_-) / sqrt(2)`
    Antisymmetric,
}

impl FockState {
    pub fn vacuum(n_max: usize) -> Self {
        let dim = n_max + 1;
        let mut amps = vec![ZERO; dim * dim];
        amps[0] = Complex64::new(1.0, 0.0);
        FockState { n_max, amps }
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn amplitude(&self, n_plus: usize, n_minus: usize) -> Complex64 {
        self.amps[n_plus * (self.n_max + 1) + n_minus]
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Population with either mode in its highest retained level.
    pub fn cutoff_population(&self) -> f64 {
        let d = self.n_max + 1;
        let mut p = 0.0;
        for i in 0..d {
            for j in 0..d {
                if i == self.n_max || j == self.n_max {
                    p += self.amps[i * d + j].norm_sqr();
                }
            }
        }
        p
    }

    pub fn mean_occupation_plus(&self) -> f64 {
        self.weighted(|i, _| i as f64)
    }

    pub fn mean_occupation_minus(&self) -> f64 {
        self.weighted(|_, j| j as f64)
    }

    fn weighted(&self, w: impl Fn(usize, usize) -> f64) -> f64 {
        let d = self.n_max + 1;
        self.amps
            .iter()
            .enumerate()
            .map(|(k, z)| w(k / d, k % d) * z.norm_sqr())
            .sum()
    }

    /// `<X(phi)>` for the chosen mode.
    pub fn quadrature_mean(&self, mode: Mode, phi: f64) -> f64 {
        let x = self.apply_quadrature(mode, phi);
        let d = self.n_max + 1;
        let big = self.n_max + 2;
        let mut acc = ZERO;
        for i in 0..d {
            for j in 0..d {
                acc += self.amps[i * d + j].conj() * x[i * big + j];
            }
        }
        acc.re
    }

    /// `Var X(phi) = ||X psi||^2 - <X>^2`.
    pub fn quadrature_variance(&self, mode: Mode, phi: f64) -> f64 {
        let x = self.apply_quadrature(mode, phi);
        let second: f64 = x.iter().map(|z| z.norm_sqr()).sum();
        let mean = self.quadrature_mean(mode, phi);
        second - mean * mean
    }

    /// `X(phi) psi` on a basis one level larger per mode, so that raising the
    /// top retained level is not truncated away.
    fn apply_quadrature(&self, mode: Mode, phi: f64) -> Vec<Complex64> {
        let d = self.n_max + 1;
        let big = d + 1;
        let sign = match mode {
            Mode::Symmetric => 1.0,
            Mode::Antisymmetric => -1.0,
        };
        let lower = Complex64::from_polar(0.5, -phi);
        let raise = Complex64::from_polar(0.5, phi);
        let mut out = vec![ZERO; big * big];
        for i in 0..d {
            for j in 0..d {
                let c = self.amps[i * d + j];
                if c == ZERO {
                    continue;
                }
                // X = (e^{-i phi} m + e^{i phi} m^dag)/sqrt(2), m = (a_+ +- a_-)/sqrt(2)
                if i > 0 {
                    out[(i - 1) * big + j] += lower * (i as f64).sqrt() * c;
                }
                if j > 0 {
                    out[i * big + j - 1] += sign * lower * (j as f64).sqrt() * c;
                }
                out[(i + 1) * big + j] += raise * ((i + 1) as f64).sqrt() * c;
                out[i * big + j + 1] += sign * raise * ((j + 1) as f64).sqrt() * c;
            }
        }
        out
    }

    /// `H psi / Omega` on the truncated basis.
    fn apply_pair_hamiltonian(&self, v: &[Complex64], out: &mut [Complex64]) {
        let d = self.n_max + 1;
        out.iter_mut().for_each(|z| *z = ZERO);
        for i in 0..d {
            for j in 0..d {
                let c = v[i * d + j];
                if c == ZERO {
                    continue;
                }
                if i < self.n_max && j < self.n_max {
                    out[(i + 1) * d + j + 1] += (((i + 1) * (j + 1)) as f64).sqrt() * c;
                }
                if i > 0 && j > 0 {
                    out[(i - 1) * d + j - 1] += ((i * j) as f64).sqrt() * c;
                }
            }
        }
    }

    /// `exp(-i r K) psi` with `K = a_+^dag a_-^dag + a_+ a_-`, by Taylor
    /// series on sub-steps short enough that the series converges to
    /// machine precision.
    fn propagate(&mut self, r: f64) {
        if r == 0.0 {
            return;
        }
        // ||K|| <= 2 n_max on this basis
        let bound = 2.0 * self.n_max.max(1) as f64;
        let steps = (r.abs() * bound).ceil().max(1.0) as usize;
        let h = r / steps as f64;
        let n = self.amps.len();
        let mut term = vec![ZERO; n];
        let mut next = vec![ZERO; n];
        let minus_i_h = Complex64::new(0.0, -h);
        for _ in 0..steps {
            term.copy_from_slice(&self.amps);
            let mut acc = self.amps.clone();
            for k in 1..200 {
                self.apply_pair_hamiltonian(&term, &mut next);
                let scale = minus_i_h / k as f64;
                let mut size = 0.0;
                for (t, x) in term.iter_mut().zip(&next) {
                    *t = scale * x;
                    size += t.norm_sqr();
                }
                for (a, t) in acc.iter_mut().zip(&term) {
                    *a += t;
                }
                if size.sqrt() < 1e-18 {
                    break;
                }
            }
            self.amps = acc;
        }
    }
}

/// Evolve the two-mode vacuum under the pair-creation Hamiltonian for time `t`.
pub fn fock_spin_dynamics(omega: f64, t: f64, n_max: usize) -> Result<FockState> {
    let state = evolve_truncated(omega, t, n_max)?;
    let population = state.cutoff_population();
    if population > CUTOFF_TOLERANCE {
        return Err(Error::Cutoff { n_max, population });
    }
    Ok(state)
}

/// Same evolution without the cutoff-adequacy check, for studying
/// truncation error.
pub fn evolve_truncated(omega: f64, t: f64, n_max: usize) -> Result<FockState> {
    ensure_finite("omega", omega)?;
    ensure_non_negative("t", t)?;
    if n_max == 0 {
        return Err(Error::param("n_max", "must be >= 1"));
    }
    let mut state = FockState::vacuum(n_max);
    state.propagate(omega * t);
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::squeezing::{mean_pair_population, quadrature_variance_at};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    #[test]
    fn zero_time_is_vacuum() {
        let s = fock_spin_dynamics(1.0, 0.0, 10).unwrap();
        assert_eq!(s, FockState::vacuum(10));
        assert_abs_diff_eq!(
            s.quadrature_variance(Mode::Symmetric, 0.3),
            0.5,
            epsilon = 1e-15
        );
    }

    #[test]
    fn nominal_parameters_match_closed_form() {
        let omega = 2.0 * PI * 3.9;
        let t = 0.032;
        let r = omega * t;
        let s = fock_spin_dynamics(omega, t, 40).unwrap();
        assert_abs_diff_eq!(s.norm(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            s.quadrature_variance(Mode::Symmetric, FRAC_PI_4),
            0.5 * (-2.0 * r).exp(),
            epsilon = 1e-4
        );
        assert_abs_diff_eq!(
            s.mean_occupation_plus(),
            mean_pair_population(r),
            epsilon = 1e-4
        );
        assert_abs_diff_eq!(
            s.mean_occupation_minus(),
            mean_pair_population(r),
            epsilon = 1e-4
        );
    }

    #[test]
    fn antisymmetric_mode_is_rotated_by_quarter_turn() {
        let s = fock_spin_dynamics(1.0, 0.6, 40).unwrap();
        for phi in [0.0, 0.3, FRAC_PI_4, 1.2] {
            let g = s.quadrature_variance(Mode::Symmetric, phi);
            let a = s.quadrature_variance(Mode::Antisymmetric, phi + FRAC_PI_2);
            assert_abs_diff_eq!(g, a, epsilon = 1e-10);
            assert_abs_diff_eq!(
                s.quadrature_variance(Mode::Antisymmetric, phi),
                quadrature_variance_at(0.6, phi, -FRAC_PI_4),
                epsilon = 1e-8
            );
        }
    }

    #[test]
    fn quadrature_means_vanish() {
        let s = fock_spin_dynamics(2.0, 0.4, 30).unwrap();
        assert_abs_diff_eq!(
            s.quadrature_mean(Mode::Symmetric, 0.7),
            0.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn inadequate_cutoff_reports_population() {
        match fock_spin_dynamics(1.0, 1.5, 10) {
            Err(Error::Cutoff { n_max, population }) => {
                assert_eq!(n_max, 10);
                assert!(population > CUTOFF_TOLERANCE);
            }
            other => panic!("expected cutoff error, got {other:?}"),
        }
        let s = evolve_truncated(1.0, 1.5, 10).unwrap();
        assert!(s.cutoff_population() > CUTOFF_TOLERANCE);
    }
}
