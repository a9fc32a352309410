//! Time-dependent propagation under tanh-edged voltage pulses.
//!
//! Each step of length `dt` applies `exp(-i H(t_mid) dt)` exactly, with `H`
//! diagonalized at the midpoint of the step. The potential is even in `phi`,
//! so `H` splits into blocks of the reflection `n -> -n`; the blocks are
//! diagonalized separately, which is about four times cheaper than the full
//! matrix.

use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};
use std::io::{self, Write};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, RotorError};
use crate::rotor::{angle_grid, hamiltonian_element, DimensionlessParams, FourierState};

/// Which potential amplitude a pulse drives.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Knob {
    V1,
    V2,
}

/// `vbar/2 [tanh((tau - tau2)/T) - tanh((tau - tau1)/T) + 2]`: at `vbar` outside
/// the window `[tau1, tau2]`, near zero inside, with edges of width `T`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseProfile {
    pub knob: Knob,
    pub vbar: f64,
    pub tau1: f64,
    pub tau2: f64,
    pub tsmooth: f64,
}

impl PulseProfile {
    pub fn new(knob: Knob, vbar: f64, tau1: f64, tau2: f64, tsmooth: f64) -> Result<Self> {
        let p = Self {
            knob,
            vbar,
            tau1,
            tau2,
            tsmooth,
        };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<()> {
        if !(self.vbar.is_finite() && self.vbar >= 0.0) {
            return Err(RotorError::invalid("vbar", format!("{} must be >= 0", self.vbar)));
        }
        if !(self.tsmooth.is_finite() && self.tsmooth > 0.0) {
            return Err(RotorError::invalid("tsmooth", format!("{} must be > 0", self.tsmooth)));
        }
        // tau1 == tau2 is the empty window: the pulse is flat at vbar.
        if !(self.tau1.is_finite() && self.tau2.is_finite() && self.tau1 <= self.tau2) {
            return Err(RotorError::invalid(
                "tau2",
                format!("window [{}, {}] is not ordered", self.tau1, self.tau2),
            ));
        }
        Ok(())
    }

    pub fn value(&self, tau: f64) -> f64 {
        0.5 * self.vbar
            * (((tau - self.tau2) / self.tsmooth).tanh() - ((tau - self.tau1) / self.tsmooth).tanh()
                + 2.0)
    }

    pub fn window(&self) -> f64 {
        self.tau2 - self.tau1
    }

    /// The pulse played backwards over `[0, duration]`.
    pub fn mirrored(&self, duration: f64) -> Self {
        Self {
            tau1: duration - self.tau2,
            tau2: duration - self.tau1,
            ..*self
        }
    }
}

pub fn pulse_value(profile: &PulseProfile, tau: f64) -> f64 {
    profile.value(tau)
}

/// Default integration step.
pub const DEFAULT_STEP: f64 = 1e-3;
/// Largest tolerated deviation of `sum |alpha|^2` from one.
pub const NORM_DRIFT_LIMIT: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvolutionSpec {
    pub duration: f64,
    pub step: f64,
    pub pulses: Vec<PulseProfile>,
    /// Knob values used for any knob without a pulse.
    pub static_params: DimensionlessParams,
    pub cutoff: usize,
    /// Record every `k`-th step; `None` keeps only the endpoints.
    pub sample_stride: Option<usize>,
    /// Round knob values to this grid before diagonalizing, so repeated values
    /// reuse the cached decomposition. `None` caches on exact values only.
    pub knob_quantum: Option<f64>,
}

impl EvolutionSpec {
    pub fn new(
        duration: f64,
        step: f64,
        pulses: Vec<PulseProfile>,
        static_params: DimensionlessParams,
        cutoff: usize,
    ) -> Result<Self> {
        let spec = Self {
            duration,
            step,
            pulses,
            static_params,
            cutoff,
            sample_stride: None,
            knob_quantum: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Static evolution with no pulses.
    pub fn idle(duration: f64, step: f64, params: DimensionlessParams, cutoff: usize) -> Result<Self> {
        Self::new(duration, step, Vec::new(), params, cutoff)
    }

    pub fn with_sample_stride(mut self, stride: usize) -> Self {
        self.sample_stride = Some(stride.max(1));
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration.is_finite() && self.duration >= 0.0) {
            return Err(RotorError::invalid("duration", format!("{} must be >= 0", self.duration)));
        }
        if !(self.step.is_finite() && self.step > 0.0) {
            return Err(RotorError::invalid("step", format!("{} must be > 0", self.step)));
        }
        if self.cutoff < 1 {
            return Err(RotorError::CutoffTooSmall {
                min: 1,
                got: self.cutoff,
            });
        }
        for p in &self.pulses {
            p.validate()?;
        }
        if self.pulses.len() > 2
            || (self.pulses.len() == 2 && self.pulses[0].knob == self.pulses[1].knob)
        {
            return Err(RotorError::invalid("pulses", "at most one pulse per knob"));
        }
        if let Some(q) = self.knob_quantum {
            if !(q.is_finite() && q > 0.0) {
                return Err(RotorError::invalid("knob_quantum", format!("{q} must be > 0")));
            }
        }
        Ok(())
    }

    /// `(v1, v2)` at time `tau`.
    pub fn knobs_at(&self, tau: f64) -> (f64, f64) {
        let mut v1 = self.static_params.v1();
        let mut v2 = self.static_params.v2();
        for p in &self.pulses {
            match p.knob {
                Knob::V1 => v1 = p.value(tau),
                Knob::V2 => v2 = p.value(tau),
            }
        }
        (v1, v2)
    }

    pub fn params_at(&self, tau: f64) -> Result<DimensionlessParams> {
        let (v1, v2) = self.knobs_at(tau);
        DimensionlessParams::new(v1, v2)
    }

    /// Number of steps and the actual step length, `dt <= step`.
    pub fn steps(&self) -> (usize, f64) {
        if self.duration == 0.0 {
            return (0, 0.0);
        }
        let n = ((self.duration / self.step) - 1e-9).ceil().max(1.0) as usize;
        (n, self.duration / n as f64)
    }

    /// The same schedule with every pulse played backwards.
    pub fn mirrored(&self) -> Self {
        Self {
            pulses: self.pulses.iter().map(|p| p.mirrored(self.duration)).collect(),
            ..self.clone()
        }
    }
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<FourierState>,
    /// Largest `|1 - sum |alpha|^2|` seen at any step.
    pub norm_drift: f64,
}

impl Trajectory {
    pub fn final_state(&self) -> &FourierState {
        self.states.last().expect("trajectory holds at least the initial state")
    }

    /// Columns `tau, abs_psi_000..` on a `points`-angle grid covering `[-pi, pi)`.
    pub fn write_density_csv<W: Write + ?Sized>(&self, points: usize, out: &mut W) -> io::Result<()> {
        let grid = angle_grid(points);
        writeln!(out, "# phi_k = -pi + 2 pi k / {points}")?;
        write!(out, "tau")?;
        for k in 0..points {
            write!(out, ",abs_psi_{k:03}")?;
        }
        writeln!(out)?;
        for (t, s) in self.times.iter().zip(&self.states) {
            write!(out, "{t}")?;
            for &phi in &grid {
                write!(out, ",{}", s.evaluate(phi).norm())?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// Evolve one state; see [`propagate_many`].
pub fn propagate(initial: &FourierState, spec: &EvolutionSpec) -> Result<Trajectory> {
    Ok(propagate_many(std::slice::from_ref(initial), spec)?
        .pop()
        .expect("one trajectory per initial state"))
}

/// Evolve several states under the same schedule, sharing the per-step
/// diagonalizations.
pub fn propagate_many(initials: &[FourierState], spec: &EvolutionSpec) -> Result<Vec<Trajectory>> {
    spec.validate()?;
    for s in initials {
        if s.cutoff() != spec.cutoff {
            return Err(RotorError::DimensionMismatch {
                expected: 2 * spec.cutoff + 1,
                got: s.len(),
            });
        }
        let n2 = s.norm_sqr();
        if (n2 - 1.0).abs() > 1e-10 {
            return Err(RotorError::NotNormalized { norm_sqr: n2 });
        }
    }

    let cutoff = spec.cutoff;
    let (n_steps, dt) = spec.steps();
    let stride = spec.sample_stride.unwrap_or(usize::MAX);
    let mut coords: Vec<BlockCoords> = initials.iter().map(|s| BlockCoords::from_state(s)).collect();
    let mut trajectories: Vec<Trajectory> = initials
        .iter()
        .map(|s| Trajectory {
            times: vec![0.0],
            states: vec![s.clone()],
            norm_drift: 0.0,
        })
        .collect();

    let mut stepper = Stepper::new(cutoff, dt, spec.knob_quantum);
    let mut scratch = vec![Complex64::new(0.0, 0.0); cutoff + 1];
    for k in 0..n_steps {
        let t_mid = (k as f64 + 0.5) * dt;
        let (v1, v2) = spec.knobs_at(t_mid);
        let step = stepper.propagator(v1, v2);
        let tau = (k + 1) as f64 * dt;
        let record = (k + 1) % stride == 0 || k + 1 == n_steps;
        for (c, traj) in coords.iter_mut().zip(trajectories.iter_mut()) {
            step.even.apply(&mut c.even, &mut scratch);
            step.odd.apply(&mut c.odd, &mut scratch);
            let drift = (1.0 - c.norm_sqr()).abs();
            traj.norm_drift = traj.norm_drift.max(drift);
            if drift > NORM_DRIFT_LIMIT {
                return Err(RotorError::NormDrift {
                    drift,
                    limit: NORM_DRIFT_LIMIT,
                    tau,
                });
            }
            if record {
                traj.times.push(tau);
                traj.states.push(c.to_state(cutoff));
            }
        }
    }
    Ok(trajectories)
}

/// Pass/fail of the requirement that every pulse returns to its plateau at
/// both ends of the schedule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CyclicityReport {
    pub pass: bool,
    pub start_deviation: f64,
    pub end_deviation: f64,
}

/// Default relative tolerance of [`cyclicity_check`].
pub const DEFAULT_CYCLICITY_TOL: f64 = 2e-2;

pub fn cyclicity_check(spec: &EvolutionSpec, tol: f64) -> CyclicityReport {
    let deviation = |tau: f64| {
        spec.pulses
            .iter()
            .filter(|p| p.vbar > 0.0)
            .map(|p| (p.value(tau) - p.vbar).abs() / p.vbar)
            .fold(0.0, f64::max)
    };
    let start_deviation = deviation(0.0);
    let end_deviation = deviation(spec.duration);
    CyclicityReport {
        pass: start_deviation <= tol && end_deviation <= tol,
        start_deviation,
        end_deviation,
    }
}

/// Amplitudes in the reflection-adapted basis:
/// even `e_0 = |0>`, `e_k = (|k> + |-k>)/sqrt 2`; odd `o_k = (|k> - |-k>)/sqrt 2`.
struct BlockCoords {
    even: Vec<Complex64>,
    odd: Vec<Complex64>,
}

impl BlockCoords {
    fn from_state(s: &FourierState) -> Self {
        let n = s.cutoff() as i64;
        let mut even = vec![s.amp(0)];
        let mut odd = Vec::with_capacity(n as usize);
        for k in 1..=n {
            even.push((s.amp(k) + s.amp(-k)) * FRAC_1_SQRT_2);
            odd.push((s.amp(k) - s.amp(-k)) * FRAC_1_SQRT_2);
        }
        Self { even, odd }
    }

    fn to_state(&self, cutoff: usize) -> FourierState {
        let mut amps = DVector::zeros(2 * cutoff + 1);
        amps[cutoff] = self.even[0];
        for k in 1..=cutoff {
            let (e, o) = (self.even[k], self.odd[k - 1]);
            amps[cutoff + k] = (e + o) * FRAC_1_SQRT_2;
            amps[cutoff - k] = (e - o) * FRAC_1_SQRT_2;
        }
        FourierState::from_vector(cutoff, amps)
    }

    fn norm_sqr(&self) -> f64 {
        self.even.iter().chain(&self.odd).map(|a| a.norm_sqr()).sum()
    }
}

/// Even and odd reflection blocks of `H(v1, v2)`.
pub(crate) fn parity_blocks(cutoff: usize, v1: f64, v2: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let h = |n: usize, m: usize, sign: i64| {
        hamiltonian_element(n as i64, m as i64, v1, v2)
            + sign as f64 * hamiltonian_element(n as i64, -(m as i64), v1, v2)
    };
    let even = DMatrix::from_fn(cutoff + 1, cutoff + 1, |k, l| match (k, l) {
        (0, 0) => hamiltonian_element(0, 0, v1, v2),
        (0, l) => SQRT_2 * hamiltonian_element(0, l as i64, v1, v2),
        (k, 0) => SQRT_2 * hamiltonian_element(k as i64, 0, v1, v2),
        (k, l) => h(k, l, 1),
    });
    let odd = DMatrix::from_fn(cutoff, cutoff, |k, l| h(k + 1, l + 1, -1));
    (even, odd)
}

/// `V diag(exp(-i lambda dt)) V^T` for one real symmetric block.
struct BlockPropagator {
    vectors: DMatrix<f64>,
    phases: Vec<Complex64>,
}

impl BlockPropagator {
    fn new(block: DMatrix<f64>, dt: f64) -> Self {
        let eig = SymmetricEigen::new(block);
        let phases = eig
            .eigenvalues
            .iter()
            .map(|&l| Complex64::from_polar(1.0, -l * dt))
            .collect();
        Self {
            vectors: eig.eigenvectors,
            phases,
        }
    }

    fn apply(&self, c: &mut [Complex64], scratch: &mut [Complex64]) {
        let dim = c.len();
        let y = &mut scratch[..dim];
        for (j, yj) in y.iter_mut().enumerate() {
            let col = self.vectors.column(j);
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..dim {
                acc += c[i] * col[i];
            }
            *yj = acc * self.phases[j];
        }
        c.fill(Complex64::new(0.0, 0.0));
        for (j, &yj) in y.iter().enumerate() {
            let col = self.vectors.column(j);
            for i in 0..dim {
                c[i] += yj * col[i];
            }
        }
    }
}

struct StepPropagator {
    even: BlockPropagator,
    odd: BlockPropagator,
}

/// Builds step propagators, reusing the last one while the knobs repeat.
struct Stepper {
    cutoff: usize,
    dt: f64,
    quantum: Option<f64>,
    cached: Option<((u64, u64), StepPropagator)>,
}

impl Stepper {
    fn new(cutoff: usize, dt: f64, quantum: Option<f64>) -> Self {
        Self {
            cutoff,
            dt,
            quantum,
            cached: None,
        }
    }

    fn propagator(&mut self, v1: f64, v2: f64) -> &StepPropagator {
        let (v1, v2) = match self.quantum {
            Some(q) => ((v1 / q).round() * q, (v2 / q).round() * q),
            None => (v1, v2),
        };
        let key = (v1.to_bits(), v2.to_bits());
        if self.cached.as_ref().map(|(k, _)| *k) != Some(key) {
            let (even, odd) = parity_blocks(self.cutoff, v1, v2);
            let step = StepPropagator {
                even: BlockPropagator::new(even, self.dt),
                odd: BlockPropagator::new(odd, self.dt),
            };
            self.cached = Some((key, step));
        }
        &self.cached.as_ref().expect("just filled").1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rotor::build_hamiltonian;
    use crate::spectral::{qubit_basis, solve_spectrum};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn params(v1: f64, v2: f64) -> DimensionlessParams {
        DimensionlessParams::new(v1, v2).unwrap()
    }

    fn not_pulse(tau2: f64) -> PulseProfile {
        PulseProfile::new(Knob::V2, 20.0, 4.0, tau2, 2.0).unwrap()
    }

    #[test]
    fn pulse_shape() {
        let p = PulseProfile::new(Knob::V1, 3.0, 10.0, 50.0, 1.0).unwrap();
        assert_abs_diff_eq!(p.value(-1e3), 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.value(1e3), 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.value(30.0), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.value(10.0), 1.5, epsilon = 1e-12);
        assert_abs_diff_eq!(pulse_value(&p, 50.0), 1.5, epsilon = 1e-12);
        assert!(PulseProfile::new(Knob::V1, 1.0, 5.0, 4.0, 1.0).is_err());
        assert!(PulseProfile::new(Knob::V1, 1.0, 4.0, 5.0, 0.0).is_err());
        assert!(PulseProfile::new(Knob::V1, -1.0, 4.0, 5.0, 1.0).is_err());
    }

    #[test]
    fn blocks_reproduce_full_spectrum() {
        for (v1, v2) in [(0.0, 0.0), (1.0, 20.0), (3.5, 0.7)] {
            let full = solve_spectrum(&build_hamiltonian(&params(v1, v2), 7).unwrap())
                .unwrap()
                .eigenvalues;
            let (e, o) = parity_blocks(7, v1, v2);
            let mut split: Vec<f64> = SymmetricEigen::new(e)
                .eigenvalues
                .iter()
                .chain(SymmetricEigen::new(o).eigenvalues.iter())
                .copied()
                .collect();
            split.sort_by(f64::total_cmp);
            for (a, b) in full.iter().zip(&split) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn block_coordinates_round_trip() {
        let s = FourierState::new(
            3,
            (0..7).map(|k| Complex64::new(k as f64 - 2.5, 0.3 * k as f64)).collect(),
        )
        .unwrap();
        let back = BlockCoords::from_state(&s).to_state(3);
        assert!((back.amps() - s.amps()).norm() < 1e-14);
    }

    #[test]
    fn zero_mode_of_free_rotor_is_stationary() {
        let s = FourierState::plane_wave(6, 0).unwrap();
        let spec = EvolutionSpec::idle(5.0, 1e-2, params(0.0, 0.0), 6).unwrap();
        let t = propagate(&s, &spec).unwrap();
        assert!((t.final_state().amps() - s.amps()).norm() < 1e-13);
    }

    #[test]
    fn eigenstate_acquires_phase() {
        let h = build_hamiltonian(&params(1.0, 20.0), 12).unwrap();
        let spec_h = solve_spectrum(&h).unwrap();
        let (e, v) = (spec_h.eigenvalues[2], &spec_h.eigenvectors[2]);
        let t = 3.7;
        let spec = EvolutionSpec::idle(t, 1e-3, params(1.0, 20.0), 12).unwrap();
        let traj = propagate(v, &spec).unwrap();
        let want = v.scaled(Complex64::from_polar(1.0, -e * t));
        assert!((traj.final_state().amps() - want.amps()).norm() < 1e-10);
        assert!(traj.norm_drift < 1e-10);
    }

    #[test]
    fn sampling_and_zero_duration() {
        let s = FourierState::plane_wave(4, 1).unwrap();
        let spec = EvolutionSpec::idle(1.0, 0.01, params(0.5, 2.0), 4)
            .unwrap()
            .with_sample_stride(10);
        let t = propagate(&s, &spec).unwrap();
        assert_eq!(t.times.len(), 11);
        assert_abs_diff_eq!(*t.times.last().unwrap(), 1.0, epsilon = 1e-12);

        let spec = EvolutionSpec::idle(0.0, 0.01, params(0.5, 2.0), 4).unwrap();
        let t = propagate(&s, &spec).unwrap();
        assert_eq!(t.states.len(), 1);
        assert_eq!(t.final_state(), &s);
    }

    #[test]
    fn rejects_bad_inputs() {
        let s = FourierState::plane_wave(4, 1).unwrap();
        let spec = EvolutionSpec::idle(1.0, 0.01, params(0.5, 2.0), 5).unwrap();
        assert!(matches!(propagate(&s, &spec), Err(RotorError::DimensionMismatch { .. })));
        let spec = EvolutionSpec::idle(1.0, 0.01, params(0.5, 2.0), 4).unwrap();
        let unnormalized = s.scaled(Complex64::new(2.0, 0.0));
        assert!(matches!(propagate(&unnormalized, &spec), Err(RotorError::NotNormalized { .. })));
        let p = not_pulse(10.0);
        assert!(EvolutionSpec::new(1.0, 0.01, vec![p, p], params(0.0, 2.0), 4).is_err());
        assert!(EvolutionSpec::idle(1.0, 0.0, params(0.0, 2.0), 4).is_err());
        assert!(EvolutionSpec::idle(-1.0, 0.1, params(0.0, 2.0), 4).is_err());
    }

    #[test]
    fn cyclicity_examples() {
        let spec = EvolutionSpec::new(20.0, 1e-3, vec![not_pulse(12.6)], params(0.0, 20.0), 12).unwrap();
        let r = cyclicity_check(&spec, 0.02);
        assert!(r.pass);
        // (1 - tanh 2)/2 from the leading edge, plus a tiny tail of the trailing one.
        assert_abs_diff_eq!(r.start_deviation, 0.01799, epsilon = 1e-4);

        let far = PulseProfile::new(Knob::V2, 20.0, 40.0, 60.0, 2.0).unwrap();
        let spec = EvolutionSpec::new(100.0, 1e-3, vec![far], params(0.0, 20.0), 12).unwrap();
        assert!(cyclicity_check(&spec, 1e-6).pass);

        let open = PulseProfile::new(Knob::V2, 20.0, 0.0, 10.0, 2.0).unwrap();
        let spec = EvolutionSpec::new(20.0, 1e-3, vec![open], params(0.0, 20.0), 12).unwrap();
        let r = cyclicity_check(&spec, 0.02);
        assert!(!r.pass);
        assert_abs_diff_eq!(r.start_deviation, 0.5, epsilon = 1e-4);
    }

    #[test]
    fn not_pulse_moves_density_to_pi() {
        let b = qubit_basis(&params(0.0, 20.0), 12).unwrap();
        let spec = EvolutionSpec::new(20.0, 1e-3, vec![not_pulse(12.6)], params(0.0, 20.0), 12).unwrap();
        let t = propagate(&b.state0, &spec).unwrap();
        let f = t.final_state();
        assert!(f.evaluate(PI).norm() > 10.0 * f.evaluate(0.0).norm());
        assert!(f.right_half_probability() < 0.01);
        assert!(t.norm_drift < NORM_DRIFT_LIMIT);
    }

    #[test]
    fn quantized_cache_stays_close() {
        let b = qubit_basis(&params(0.0, 20.0), 12).unwrap();
        let mut spec =
            EvolutionSpec::new(20.0, 1e-2, vec![not_pulse(12.6)], params(0.0, 20.0), 12).unwrap();
        let exact = propagate(&b.state0, &spec).unwrap();
        spec.knob_quantum = Some(1e-7);
        let quantized = propagate(&b.state0, &spec).unwrap();
        let overlap = exact.final_state().inner(quantized.final_state()).unwrap().norm();
        assert!(1.0 - overlap < 1e-10);
    }
}
