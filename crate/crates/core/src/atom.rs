//! Single-atom four-level model of the clock interferometer.
//!
//! Basis ordering is `[|1,+1>, |1,0>, |1,-1>, |2,0>]`. All frequencies are
//! angular (rad/s); detunings handed in by callers in Hz are converted at the
//! boundary (`ramsey_scan`, `ClockTemplate`).

use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

use nalgebra::{Matrix4, Vector4};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, ensure_non_negative, Error, Result};

pub type HermitianMatrix4 = Matrix4<Complex64>;
pub type Unitary4 = Matrix4<Complex64>;

/// Couplings, detunings and quadratic shift of the single-atom Hamiltonian.
///
/// `omega_rf` and `omega_mw` are coupling magnitudes; their complex phases are
/// carried separately in `rf_phase` and `mw_phase`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AtomParams {
    pub omega_rf: f64,
    pub rf_phase: f64,
    pub omega_mw: f64,
    pub mw_phase: f64,
    pub delta_rf: f64,
    pub delta: f64,
    pub q: f64,
}

impl AtomParams {
    pub fn validate(&self) -> Result<()> {
        ensure_finite("omega_rf", self.omega_rf)?;
        ensure_finite("rf_phase", self.rf_phase)?;
        ensure_finite("omega_mw", self.omega_mw)?;
        ensure_finite("mw_phase", self.mw_phase)?;
        ensure_finite("delta_rf", self.delta_rf)?;
        ensure_finite("delta", self.delta)?;
        ensure_finite("q", self.q)
    }

    fn rf_coupling(&self) -> Complex64 {
        Complex64::from_polar(self.omega_rf, self.rf_phase)
    }

    fn mw_coupling(&self) -> Complex64 {
        Complex64::from_polar(self.omega_mw, self.mw_phase)
    }
}

/// Zeeman/hyperfine level in basis order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    PlusOne = 0,
    Zero = 1,
    MinusOne = 2,
    Excited = 3,
}

/// Normalized single-atom state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateVec4(Vector4<Complex64>);

impl StateVec4 {
    pub const NORM_TOLERANCE: f64 = 1e-12;

    pub fn new(amplitudes: [Complex64; 4]) -> Result<Self> {
        let v = Vector4::from(amplitudes);
        let norm = v.norm();
        if !norm.is_finite() || (norm - 1.0).abs() > Self::NORM_TOLERANCE {
            return Err(Error::param("state", format!("norm must be 1, got {norm}")));
        }
        Ok(StateVec4(v))
    }

    pub fn basis(level: Level) -> Self {
        let mut v = Vector4::zeros();
        v[level as usize] = Complex64::new(1.0, 0.0);
        StateVec4(v)
    }

    pub fn amplitude(&self, level: Level) -> Complex64 {
        self.0[level as usize]
    }

    pub fn amplitudes(&self) -> [Complex64; 4] {
        [self.0[0], self.0[1], self.0[2], self.0[3]]
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn populations(&self) -> LevelFractions {
        LevelFractions {
            plus_one: self.0[0].norm_sqr(),
            zero: self.0[1].norm_sqr(),
            minus_one: self.0[2].norm_sqr(),
            excited: self.0[3].norm_sqr(),
        }
    }

    /// Amplitude of the symmetric state `(|+1> + |-1>)/sqrt(2)`.
    pub fn symmetric(&self) -> Complex64 {
        (self.0[0] + self.0[2]) * FRAC_1_SQRT_2
    }

    /// Amplitude of the antisymmetric state `(|+1> - |-1>)/sqrt(2)`.
    pub fn antisymmetric(&self) -> Complex64 {
        (self.0[0] - self.0[2]) * FRAC_1_SQRT_2
    }

    pub fn apply(&self, u: &Unitary4) -> Self {
        StateVec4(u * self.0)
    }
}

/// Fractional populations of the four levels.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LevelFractions {
    pub minus_one: f64,
    pub zero: f64,
    pub plus_one: f64,
    pub excited: f64,
}

impl LevelFractions {
    pub fn total(&self) -> f64 {
        self.minus_one + self.zero + self.plus_one + self.excited
    }

    /// Interferometer signal `f = (N_{+1} + N_{-1}) / N`.
    pub fn clock_fraction(&self) -> f64 {
        self.plus_one + self.minus_one
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("minus_one", self.minus_one),
            ("zero", self.zero),
            ("plus_one", self.plus_one),
            ("excited", self.excited),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::param(name, format!("fraction {v} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Build the single-atom Hamiltonian (units of rad/s, hbar = 1).
pub fn build_hamiltonian(p: &AtomParams) -> Result<HermitianMatrix4> {
    p.validate()?;
    let c = |re: f64| Complex64::new(re, 0.0);
    let rf = p.rf_coupling() / (2.0 * SQRT_2);
    let mw = p.mw_coupling() / 2.0;
    let mut h = Matrix4::from_element(c(0.0));
    h[(0, 0)] = c(p.delta_rf + p.q / 2.0);
    h[(2, 2)] = c(-p.delta_rf + p.q / 2.0);
    h[(3, 3)] = c(-p.delta);
    h[(0, 1)] = rf;
    h[(1, 0)] = rf.conj();
    h[(1, 2)] = rf.conj();
    h[(2, 1)] = rf;
    h[(1, 3)] = mw;
    h[(3, 1)] = mw.conj();
    Ok(h)
}

/// `U(t) = exp(-i t H)` by spectral decomposition of the Hermitian `H`.
pub fn evolve(h: &HermitianMatrix4, t: f64) -> Result<Unitary4> {
    ensure_non_negative("t", t)?;
    if t == 0.0 {
        return Ok(Unitary4::identity());
    }
    let eig = h.symmetric_eigen();
    let v = eig.eigenvectors;
    let phases =
        Matrix4::from_diagonal(&eig.eigenvalues.map(|e| Complex64::from_polar(1.0, -e * t)));
    Ok(v * phases * v.adjoint())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentKind {
    /// Radio-frequency coupling on, microwave off.
    Rf,
    /// Microwave coupling on, radio frequency off.
    Microwave,
    /// Free evolution: both couplings off.
    Hold,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub kind: SegmentKind,
    pub duration: f64,
    pub params: AtomParams,
}

impl Segment {
    pub fn new(kind: SegmentKind, duration: f64, params: AtomParams) -> Self {
        Segment {
            kind,
            duration,
            params,
        }
    }

    /// Parameters with the couplings this segment does not drive switched off.
    pub fn effective_params(&self) -> AtomParams {
        let mut p = self.params;
        match self.kind {
            SegmentKind::Rf => p.omega_mw = 0.0,
            SegmentKind::Microwave => p.omega_rf = 0.0,
            SegmentKind::Hold => {
                p.omega_rf = 0.0;
                p.omega_mw = 0.0;
            }
        }
        p
    }

    pub fn unitary(&self) -> Result<Unitary4> {
        evolve(&build_hamiltonian(&self.effective_params())?, self.duration)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PulseSequence {
    pub segments: Vec<Segment>,
}

impl PulseSequence {
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        let seq = PulseSequence { segments };
        seq.validate()?;
        Ok(seq)
    }

    pub fn validate(&self) -> Result<()> {
        if self.segments.is_empty() {
            return Err(Error::param("sequence", "at least one segment required"));
        }
        for s in &self.segments {
            ensure_non_negative("duration", s.duration)?;
            s.params.validate()?;
        }
        Ok(())
    }

    pub fn total_duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    /// Replace the microwave detuning (rad/s) in every segment.
    pub fn with_delta(mut self, delta: f64) -> Self {
        for s in &mut self.segments {
            s.params.delta = delta;
        }
        self
    }
}

/// Apply the per-segment unitaries in order.
pub fn run_sequence(seq: &PulseSequence, initial: &StateVec4) -> Result<StateVec4> {
    seq.validate()?;
    let n = initial.norm();
    if (n - 1.0).abs() > StateVec4::NORM_TOLERANCE {
        return Err(Error::param("initial", format!("state norm {n} != 1")));
    }
    let mut psi = *initial;
    for s in &seq.segments {
        psi = psi.apply(&s.unitary()?);
    }
    Ok(psi)
}

/// How the microwave coupling of the clock pulses is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MicrowaveCalibration {
    /// Resonant pi pulse: `omega_mw = pi / tau_mw`.
    PiPulse,
    /// Coupling chosen so that at the reference detuning (Hz) the two
    /// microwave pulses together complete one full generalized Rabi cycle,
    /// returning the atoms to `|1,0>`.
    ReturnAt { delta_hz: f64 },
    /// Explicit coupling in rad/s.
    Fixed { omega: f64 },
}

/// Pulse timings and couplings of the rf / microwave / hold / microwave / rf clock.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClockTemplate {
    /// Duration of each radio-frequency pulse (s).
    pub tau_rf: f64,
    /// Duration of each microwave pulse (s).
    pub tau_mw: f64,
    pub microwave: MicrowaveCalibration,
}

impl ClockTemplate {
    pub const NOMINAL_TAU_RF: f64 = 47e-6;
    pub const NOMINAL_TAU_MW: f64 = 45.2e-6;

    pub fn new(tau_rf: f64, tau_mw: f64) -> Self {
        ClockTemplate {
            tau_rf,
            tau_mw,
            microwave: MicrowaveCalibration::PiPulse,
        }
    }

    /// All pulses shortened by `factor` at fixed pulse area.
    pub fn scaled(&self, factor: f64) -> Self {
        let microwave = match self.microwave {
            MicrowaveCalibration::Fixed { omega } => MicrowaveCalibration::Fixed {
                omega: omega * factor,
            },
            MicrowaveCalibration::ReturnAt { delta_hz } => MicrowaveCalibration::ReturnAt {
                delta_hz: delta_hz * factor,
            },
            MicrowaveCalibration::PiPulse => MicrowaveCalibration::PiPulse,
        };
        ClockTemplate {
            tau_rf: self.tau_rf / factor,
            tau_mw: self.tau_mw / factor,
            microwave,
        }
    }

    /// rf coupling producing the balanced 25/50/25 split in `tau_rf`.
    ///
    /// The effective `|0> <-> |g>` coupling is `omega_rf / 2`, so a quarter
    /// Rabi cycle needs `omega_rf * tau_rf = pi / 2`.
    pub fn omega_rf(&self) -> f64 {
        PI / (2.0 * self.tau_rf)
    }

    pub fn omega_mw(&self) -> Result<f64> {
        match self.microwave {
            MicrowaveCalibration::PiPulse => Ok(PI / self.tau_mw),
            MicrowaveCalibration::Fixed { omega } => Ok(omega),
            MicrowaveCalibration::ReturnAt { delta_hz } => {
                let full = PI / self.tau_mw;
                let d = 2.0 * PI * delta_hz;
                if d.abs() >= full {
                    return Err(Error::param(
                        "microwave",
                        format!(
                            "no return coupling exists at |delta| = {} Hz",
                            delta_hz.abs()
                        ),
                    ));
                }
                Ok((full * full - d * d).sqrt())
            }
        }
    }

    /// Phase evolution time `tau = tau_R + tau_mw` entering `theta = 2 pi delta tau`.
    pub fn phase_time(&self, tau_ramsey: f64) -> f64 {
        tau_ramsey + self.tau_mw
    }

    /// Time the rf-transferred atoms spend in `|1,+-1>` between the pulse centres.
    pub fn exposure_time(&self, tau_ramsey: f64) -> f64 {
        self.tau_rf + 2.0 * self.tau_mw + tau_ramsey
    }

    /// Full clock sequence for the given base parameters. The base couplings
    /// are replaced by the template's calibrated values.
    pub fn sequence(&self, base: &AtomParams, tau_ramsey: f64) -> Result<PulseSequence> {
        ensure_non_negative("tau_rf", self.tau_rf)?;
        ensure_non_negative("tau_mw", self.tau_mw)?;
        ensure_non_negative("tau_ramsey", tau_ramsey)?;
        let mut p = *base;
        p.omega_rf = self.omega_rf();
        p.omega_mw = self.omega_mw()?;
        PulseSequence::new(vec![
            Segment::new(SegmentKind::Rf, self.tau_rf, p),
            Segment::new(SegmentKind::Microwave, self.tau_mw, p),
            Segment::new(SegmentKind::Hold, tau_ramsey, p),
            Segment::new(SegmentKind::Microwave, self.tau_mw, p),
            Segment::new(SegmentKind::Rf, self.tau_rf, p),
        ])
    }
}

impl Default for ClockTemplate {
    fn default() -> Self {
        ClockTemplate::new(Self::NOMINAL_TAU_RF, Self::NOMINAL_TAU_MW)
    }
}

/// Mean level fractions against microwave detuning.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FringeCurve {
    pub detunings_hz: Vec<f64>,
    pub fractions: Vec<LevelFractions>,
}

impl FringeCurve {
    pub fn clock_fractions(&self) -> Vec<f64> {
        self.fractions
            .iter()
            .map(LevelFractions::clock_fraction)
            .collect()
    }
}

/// Run the clock sequence at every detuning (Hz) starting from `|1,0>`.
pub fn ramsey_scan(
    p: &AtomParams,
    deltas_hz: &[f64],
    tau_ramsey: f64,
    template: &ClockTemplate,
) -> Result<FringeCurve> {
    if deltas_hz.is_empty() {
        return Err(Error::param("deltas", "empty detuning list"));
    }
    let seq = template.sequence(p, tau_ramsey)?;
    let start = StateVec4::basis(Level::Zero);
    let fractions = deltas_hz
        .par_iter()
        .map(|&d| {
            ensure_finite("delta", d)?;
            let s = seq.clone().with_delta(2.0 * PI * d);
            Ok(run_sequence(&s, &start)?.populations())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FringeCurve {
        detunings_hz: deltas_hz.to_vec(),
        fractions,
    })
}

/// Detunings (Hz) of the fringe zeros inside `[lo_hz, hi_hz]`: local minima of
/// the clock fraction below `threshold`, located on a `step_hz` grid and
/// refined by a parabola through the neighbouring samples.
pub fn fringe_zeros(
    p: &AtomParams,
    template: &ClockTemplate,
    tau_ramsey: f64,
    (lo_hz, hi_hz): (f64, f64),
    step_hz: f64,
    threshold: f64,
) -> Result<Vec<f64>> {
    if !(step_hz > 0.0) || !(hi_hz > lo_hz) {
        return Err(Error::param("scan", "need step > 0 and hi > lo"));
    }
    let n = ((hi_hz - lo_hz) / step_hz).floor() as usize + 1;
    let deltas: Vec<f64> = (0..n).map(|k| lo_hz + k as f64 * step_hz).collect();
    let f = ramsey_scan(p, &deltas, tau_ramsey, template)?.clock_fractions();
    let mut zeros = Vec::new();
    for k in 1..n.saturating_sub(1) {
        if f[k] < threshold && f[k] <= f[k - 1] && f[k] < f[k + 1] {
            let curv = f[k - 1] - 2.0 * f[k] + f[k + 1];
            let shift = if curv > 0.0 {
                0.5 * (f[k - 1] - f[k + 1]) / curv
            } else {
                0.0
            };
            zeros.push(deltas[k] + shift * step_hz);
        }
    }
    Ok(zeros)
}

/// Noiseless Ramsey law `sin^2(pi delta tau)` for ideal pulses.
pub fn ideal_fringe(delta_hz: f64, tau: f64) -> f64 {
    (PI * delta_hz * tau).sin().powi(2)
}

/// Reassign `|2,0>` atoms the way the absorption detection sees them:
/// a fraction `p_plus` of them lands with `|1,-1>`, `p_minus` with `|1,+1>`,
/// and the remainder with `|1,0>`.
pub fn leakage_correction(
    fractions: &LevelFractions,
    p_plus: f64,
    p_minus: f64,
) -> Result<LevelFractions> {
    fractions.validate()?;
    ensure_non_negative("p_plus", p_plus)?;
    ensure_non_negative("p_minus", p_minus)?;
    if p_plus + p_minus > 1.0 {
        return Err(Error::param(
            "p_plus + p_minus",
            format!("must be <= 1, got {}", p_plus + p_minus),
        ));
    }
    let ne = fractions.excited;
    Ok(LevelFractions {
        minus_one: fractions.minus_one + p_plus * ne,
        plus_one: fractions.plus_one + p_minus * ne,
        zero: fractions.zero + (1.0 - p_plus - p_minus) * ne,
        excited: 0.0,
    })
}
