//! Effective one-qubit gates from simulated pulses, and the calibrations of
//! the phase, NOT and partial-NOT pulses.

use std::f64::consts::{PI, TAU};
use std::io::{self, Write};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::algebra::GateMatrix;
use crate::dynamics::{
    cyclicity_check, propagate, propagate_many, EvolutionSpec, Knob, PulseProfile, DEFAULT_CYCLICITY_TOL,
    DEFAULT_STEP,
};
use crate::error::{Result, RotorError};
use crate::exec::Execution;
use crate::rotor::{DimensionlessParams, FourierState, DEFAULT_CUTOFF};
use crate::search::{bisect, golden_section_min};
use crate::spectral::{qubit_basis, QubitBasis};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct QubitAmplitudes {
    pub c0: Complex64,
    pub c1: Complex64,
    /// `1 - |c0|^2 - |c1|^2`.
    pub leakage: f64,
}

pub fn project_to_qubit(state: &FourierState, basis: &QubitBasis) -> Result<QubitAmplitudes> {
    let c0 = basis.state0.inner(state)?;
    let c1 = basis.state1.inner(state)?;
    Ok(QubitAmplitudes {
        c0,
        c1,
        leakage: (state.norm_sqr() - c0.norm_sqr() - c1.norm_sqr()).max(0.0),
    })
}

/// Gates leaking more than this are returned but marked invalid.
pub const LEAKAGE_LIMIT: f64 = 1e-2;

#[derive(Clone, Debug, PartialEq)]
pub struct OneQubitGate {
    /// `U[i][q] = <state_i | psi_final(q)>`.
    pub matrix: GateMatrix,
    pub leakage_max: f64,
    /// Frobenius norm of `U^dagger U - I`.
    pub unitarity_residual: f64,
    pub valid: bool,
}

/// Runs both basis states through `spec` without checking the pulse edges.
pub fn simulate_gate(spec: &EvolutionSpec, basis: &QubitBasis) -> Result<OneQubitGate> {
    let runs = propagate_many(&[basis.state0.clone(), basis.state1.clone()], spec)?;
    let mut m = DMatrix::zeros(2, 2);
    let mut leakage_max: f64 = 0.0;
    for (q, run) in runs.iter().enumerate() {
        let a = project_to_qubit(run.final_state(), basis)?;
        m[(0, q)] = a.c0;
        m[(1, q)] = a.c1;
        leakage_max = leakage_max.max(a.leakage);
    }
    let matrix = GateMatrix::new(m)?;
    Ok(OneQubitGate {
        unitarity_residual: matrix.unitarity_residual(),
        matrix,
        leakage_max,
        valid: leakage_max <= LEAKAGE_LIMIT,
    })
}

/// [`simulate_gate`] for schedules whose pulses sit on their plateau at both
/// ends, within relative tolerance `tol`.
pub fn extract_unitary(spec: &EvolutionSpec, basis: &QubitBasis, tol: f64) -> Result<OneQubitGate> {
    let c = cyclicity_check(spec, tol);
    if !c.pass {
        return Err(RotorError::NotCyclic {
            start: c.start_deviation,
            end: c.end_deviation,
            tol,
        });
    }
    simulate_gate(spec, basis)
}

/// Removes the free evolution `diag(e^{-i eps0 T}, e^{-i eps1 T})` of the
/// basis from a gate of duration `duration`.
pub fn idle_frame(gate: &GateMatrix, basis: &QubitBasis, duration: f64) -> Result<GateMatrix> {
    let undo = GateMatrix::from_diagonal(&[
        Complex64::from_polar(1.0, basis.energies[0] * duration),
        Complex64::from_polar(1.0, basis.energies[1] * duration),
    ])?;
    undo.mul(gate)
}

pub fn prepare_state(bit: u8, basis: &QubitBasis) -> Result<FourierState> {
    match bit {
        0 | 1 => Ok(basis.state(bit).clone()),
        _ => Err(RotorError::invalid("bit", format!("{bit} is not 0 or 1"))),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Readout {
    pub p0: f64,
    pub p1: f64,
}

/// Probability of finding the rotor in the half circle `|phi| < pi/2` (reads
/// as 0) or in the other half (reads as 1).
pub fn measure_probabilities(state: &FourierState) -> Result<Readout> {
    let n2 = state.norm_sqr();
    if (n2 - 1.0).abs() > 1e-8 {
        return Err(RotorError::NotNormalized { norm_sqr: n2 });
    }
    let p0 = state.right_half_probability().clamp(0.0, 1.0);
    Ok(Readout { p0, p1: 1.0 - p0 })
}

/// Schedule of the phase gate: `V1` drops from `vbar1` inside
/// `[tau1, tau1 + window]` while `V2` stays on.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseSetup {
    pub v2: f64,
    pub vbar1: f64,
    pub tau1: f64,
    pub tsmooth: f64,
    #[serde(rename = "T")]
    pub duration: f64,
    pub step: f64,
    pub cutoff: usize,
}

impl Default for PhaseSetup {
    fn default() -> Self {
        Self {
            v2: 20.0,
            vbar1: 1.0,
            tau1: 4.0,
            tsmooth: 2.0,
            duration: 10.0,
            step: DEFAULT_STEP,
            cutoff: DEFAULT_CUTOFF,
        }
    }
}

impl PhaseSetup {
    pub fn basis(&self) -> Result<QubitBasis> {
        qubit_basis(&DimensionlessParams::new(self.vbar1, self.v2)?, self.cutoff)
    }

    pub fn pulse(&self, window: f64) -> Result<PulseProfile> {
        PulseProfile::new(Knob::V1, self.vbar1, self.tau1, self.tau1 + window, self.tsmooth)
    }

    pub fn spec(&self, window: f64) -> Result<EvolutionSpec> {
        EvolutionSpec::new(
            self.duration,
            self.step,
            vec![self.pulse(window)?],
            DimensionlessParams::new(self.vbar1, self.v2)?,
            self.cutoff,
        )
    }
}

/// Windows `0.41 p` for `p = 0..=8`.
pub fn default_phase_windows() -> Vec<f64> {
    (0..=8).map(|p| 0.41 * p as f64).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PhasePoint {
    pub window: f64,
    /// Unwrapped phase, relative to free evolution over the same time.
    pub theta: f64,
    pub leakage: f64,
    /// `|U01| + |U10|`.
    pub offdiag: f64,
    /// Worst relative distance of the pulse from its plateau at the ends.
    pub edge_deviation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhaseCalibration {
    pub v2: f64,
    pub vbar1: f64,
    pub tau1: f64,
    pub tsmooth: f64,
    #[serde(rename = "T")]
    pub duration: f64,
    /// `f` in `theta / 2 pi = vbar1 f window`.
    pub slope: f64,
    pub fit_r2: f64,
    /// Largest `|theta - 2 pi vbar1 f window|` over the grid.
    pub max_residual: f64,
    pub grid: Vec<PhasePoint>,
}

/// Adjacent unwrapped phases further apart than this are ambiguous.
pub const UNWRAP_LIMIT: f64 = PI / 2.0;

/// Measures `theta = arg U00 - arg U11 - (eps1 - eps0) T` for each window and
/// fits `theta / 2 pi = vbar1 f window` through the origin.
pub fn calibrate_phase(setup: &PhaseSetup, windows: &[f64], exec: Execution) -> Result<PhaseCalibration> {
    if windows.is_empty() || windows.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(RotorError::invalid("windows", "need at least one finite window >= 0"));
    }
    if windows.windows(2).any(|p| p[1] <= p[0]) {
        return Err(RotorError::invalid("windows", "must be strictly ascending"));
    }
    if !windows.iter().any(|&w| w > 0.0) {
        return Err(RotorError::invalid("windows", "need a window > 0 to fit a slope"));
    }
    if setup.vbar1 <= 0.0 {
        return Err(RotorError::invalid("vbar1", "must be > 0"));
    }
    let basis = setup.basis()?;
    let idle = (basis.energies[1] - basis.energies[0]) * setup.duration;

    let raw = exec.try_map(windows, |&w| -> Result<PhasePoint> {
        let spec = setup.spec(w)?;
        let gate = simulate_gate(&spec, &basis)?;
        let u = &gate.matrix;
        let edges = cyclicity_check(&spec, DEFAULT_CYCLICITY_TOL);
        Ok(PhasePoint {
            window: w,
            theta: u.get(0, 0).arg() - u.get(1, 1).arg() - idle,
            leakage: gate.leakage_max,
            offdiag: u.get(0, 1).norm() + u.get(1, 0).norm(),
            edge_deviation: edges.start_deviation.max(edges.end_deviation),
        })
    })?;

    let mut grid = Vec::with_capacity(raw.len());
    let mut prev: Option<(f64, f64)> = None;
    for mut p in raw {
        let wrapped = (p.theta + PI).rem_euclid(TAU) - PI;
        p.theta = match prev {
            None => wrapped,
            Some((_, last)) => wrapped + TAU * ((last - wrapped) / TAU).round(),
        };
        if let Some((lo, last)) = prev {
            let jump = p.theta - last;
            if jump.abs() > UNWRAP_LIMIT {
                return Err(RotorError::PhaseUnwrapAmbiguity { lo, hi: p.window, jump });
            }
        }
        prev = Some((p.window, p.theta));
        grid.push(p);
    }

    let y: Vec<f64> = grid.iter().map(|p| p.theta / TAU).collect();
    let sxy: f64 = grid.iter().zip(&y).map(|(p, y)| p.window * y).sum();
    let sxx: f64 = grid.iter().map(|p| p.window * p.window).sum();
    let slope = sxy / (setup.vbar1 * sxx);
    let fitted = |w: f64| setup.vbar1 * slope * w;
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let ss_res: f64 = grid.iter().zip(&y).map(|(p, y)| (y - fitted(p.window)).powi(2)).sum();
    let ss_tot: f64 = y.iter().map(|y| (y - mean).powi(2)).sum();
    let fit_r2 = if ss_tot > 0.0 {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    } else if ss_res == 0.0 {
        1.0
    } else {
        0.0
    };
    let max_residual = grid
        .iter()
        .map(|p| (p.theta - TAU * fitted(p.window)).abs())
        .fold(0.0, f64::max);

    Ok(PhaseCalibration {
        v2: setup.v2,
        vbar1: setup.vbar1,
        tau1: setup.tau1,
        tsmooth: setup.tsmooth,
        duration: setup.duration,
        slope,
        fit_r2,
        max_residual,
        grid,
    })
}

impl PhaseCalibration {
    pub fn setup(&self, step: f64, cutoff: usize) -> PhaseSetup {
        PhaseSetup {
            v2: self.v2,
            vbar1: self.vbar1,
            tau1: self.tau1,
            tsmooth: self.tsmooth,
            duration: self.duration,
            step,
            cutoff,
        }
    }

    /// Window needed for `U_Z(theta)` in the free-evolution frame, taken in
    /// `[0, period)` where one period turns the phase by `2 pi`.
    pub fn window_for(&self, theta: f64) -> Result<f64> {
        let rate = -TAU * self.vbar1 * self.slope;
        if !(rate.is_finite() && rate != 0.0) {
            return Err(RotorError::invalid("slope", "calibrated slope is zero"));
        }
        Ok((theta / rate).rem_euclid(TAU / rate.abs()))
    }
}

/// Pulse realizing `U_Z(theta)` up to global phase, relative to free
/// evolution over the calibration duration.
pub fn phase_gate_schedule(theta: f64, cal: &PhaseCalibration) -> Result<PulseProfile> {
    let w = cal.window_for(theta)?;
    PulseProfile::new(Knob::V1, cal.vbar1, cal.tau1, cal.tau1 + w, cal.tsmooth)
}

/// Schedule of the NOT gate: `V2` drops from `vbar2` inside `[tau1, tau2]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NotSetup {
    pub vbar2: f64,
    pub v1: f64,
    pub tau1: f64,
    pub tsmooth: f64,
    #[serde(rename = "T")]
    pub duration: f64,
    pub step: f64,
    pub cutoff: usize,
}

impl Default for NotSetup {
    fn default() -> Self {
        Self {
            vbar2: 20.0,
            v1: 0.0,
            tau1: 4.0,
            tsmooth: 2.0,
            duration: 20.0,
            step: DEFAULT_STEP,
            cutoff: DEFAULT_CUTOFF,
        }
    }
}

impl NotSetup {
    pub fn basis(&self) -> Result<QubitBasis> {
        qubit_basis(&DimensionlessParams::new(self.v1, self.vbar2)?, self.cutoff)
    }

    pub fn spec(&self, tau2: f64) -> Result<EvolutionSpec> {
        EvolutionSpec::new(
            self.duration,
            self.step,
            vec![PulseProfile::new(Knob::V2, self.vbar2, self.tau1, tau2, self.tsmooth)?],
            DimensionlessParams::new(self.v1, self.vbar2)?,
            self.cutoff,
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NotScanRow {
    pub tau2: f64,
    pub abs_psi_0: f64,
    pub abs_psi_pi: f64,
    /// Population moved to the other basis state.
    pub transfer: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NotCalibration {
    #[serde(flatten)]
    pub setup: NotSetup,
    pub initial_bit: u8,
    pub tau2_star: f64,
    pub transfer_prob: f64,
    /// `|psi(phi_start, T)| / |psi(phi_start, 0)|` at `tau2_star`.
    pub residual_ratio: f64,
    /// False when the minimum never drops below [`NOT_RESIDUAL_LIMIT`].
    pub converged: bool,
    pub grid: Vec<NotScanRow>,
}

/// Scan resolution in `tau2`.
pub const NOT_SCAN_STEP: f64 = 0.1;
/// Refinement stops when the golden-section bracket is this short.
pub const NOT_REFINE_TOL: f64 = 1e-4;
/// A NOT minimum counts as found when the amplitude left at the start angle
/// is below this fraction of its initial value.
pub const NOT_RESIDUAL_LIMIT: f64 = 0.1;

/// Evenly spaced `tau2` values from `lo` to `hi` at most `step` apart.
pub fn scan_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = (((hi - lo) / step) - 1e-9).ceil().max(1.0) as usize;
    (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect()
}

fn not_row(setup: &NotSetup, basis: &QubitBasis, bit: u8, tau2: f64) -> Result<NotScanRow> {
    let run = propagate(basis.state(bit), &setup.spec(tau2)?)?;
    let f = run.final_state();
    Ok(NotScanRow {
        tau2,
        abs_psi_0: f.evaluate(0.0).norm(),
        abs_psi_pi: f.evaluate(PI).norm(),
        transfer: basis.state(1 - bit).inner(f)?.norm_sqr(),
    })
}

/// Scans `tau2` over `[lo, hi]` and refines the minimum of the amplitude left
/// at the starting well (`phi = 0` for bit 0, `phi = pi` for bit 1).
pub fn calibrate_not(setup: &NotSetup, range: (f64, f64), initial_bit: u8, exec: Execution) -> Result<NotCalibration> {
    let (lo, hi) = range;
    if !(lo.is_finite() && hi.is_finite() && setup.tau1 <= lo && lo < hi && hi < setup.duration) {
        return Err(RotorError::invalid(
            "range",
            format!("[{lo}, {hi}] must satisfy tau1 <= lo < hi < T"),
        ));
    }
    if initial_bit > 1 {
        return Err(RotorError::invalid("initial_bit", "must be 0 or 1"));
    }
    let basis = setup.basis()?;
    let taus = scan_grid(lo, hi, NOT_SCAN_STEP);
    let grid = exec.try_map(&taus, |&t| not_row(setup, &basis, initial_bit, t))?;

    let left = |r: &NotScanRow| if initial_bit == 0 { r.abs_psi_0 } else { r.abs_psi_pi };
    let best = (0..grid.len())
        .min_by(|&a, &b| left(&grid[a]).total_cmp(&left(&grid[b])))
        .expect("grid is nonempty");
    let a = grid[best.saturating_sub(1)].tau2;
    let b = grid[(best + 1).min(grid.len() - 1)].tau2;

    let mut failure = None;
    let (tau2_star, _) = golden_section_min(
        |t| match not_row(setup, &basis, initial_bit, t) {
            Ok(r) => left(&r),
            Err(e) => {
                failure.get_or_insert(e);
                f64::INFINITY
            }
        },
        a,
        b,
        NOT_REFINE_TOL,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let star = not_row(setup, &basis, initial_bit, tau2_star)?;
    let start_angle = if initial_bit == 0 { 0.0 } else { PI };
    let psi_max = basis.state(initial_bit).evaluate(start_angle).norm();
    let residual_ratio = left(&star) / psi_max;
    Ok(NotCalibration {
        setup: *setup,
        initial_bit,
        tau2_star,
        transfer_prob: star.transfer,
        residual_ratio,
        converged: residual_ratio < NOT_RESIDUAL_LIMIT,
        grid,
    })
}

impl NotCalibration {
    /// Columns `tau2, abs_psi_0, abs_psi_pi, transfer_prob`.
    pub fn write_scan_csv<W: Write + ?Sized>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "# tau2_star={}", self.tau2_star)?;
        writeln!(out, "# transfer_prob={}", self.transfer_prob)?;
        writeln!(out, "tau2,abs_psi_0,abs_psi_pi,transfer_prob")?;
        for r in &self.grid {
            writeln!(out, "{},{},{},{}", r.tau2, r.abs_psi_0, r.abs_psi_pi, r.transfer)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PartialNot {
    pub target: f64,
    pub tau2: f64,
    pub transfer: f64,
    pub gate: OneQubitGate,
}

/// Targets within this much above the calibrated NOT transfer resolve to the
/// NOT itself.
pub const PARTIAL_SLACK: f64 = 0.05;
const PARTIAL_TOL: f64 = 1e-6;

/// Finds the first `tau2` (up to `tau2_star`) whose transfer from `|0>`
/// reaches `p`, and extracts the gate there.
pub fn calibrate_partial_not(p: f64, cal: &NotCalibration) -> Result<PartialNot> {
    if !(0.0..=1.0).contains(&p) {
        return Err(RotorError::invalid("target_pop", format!("{p} is outside [0, 1]")));
    }
    if cal.initial_bit != 0 {
        return Err(RotorError::invalid("initial_bit", "partial NOT needs a scan started from |0>"));
    }
    let setup = &cal.setup;
    let basis = setup.basis()?;
    let transfer = |t: f64| -> Result<f64> { Ok(not_row(setup, &basis, 0, t)?.transfer) };

    // Scan points before the optimum, then the optimum itself.
    let mut points: Vec<(f64, f64)> = cal
        .grid
        .iter()
        .take_while(|r| r.tau2 < cal.tau2_star)
        .map(|r| (r.tau2, r.transfer))
        .collect();
    points.push((cal.tau2_star, cal.transfer_prob));

    let tau2 = if p == 0.0 {
        points[0].0
    } else if let Some(i) = points.iter().position(|&(_, tr)| tr >= p) {
        if i == 0 {
            points[0].0
        } else {
            let mut failure = None;
            let root = bisect(
                |t| match transfer(t) {
                    Ok(v) => v - p,
                    Err(e) => {
                        failure.get_or_insert(e);
                        0.0
                    }
                },
                points[i - 1].0,
                points[i].0,
                PARTIAL_TOL,
            );
            if let Some(e) = failure {
                return Err(e);
            }
            root.unwrap_or(points[i].0)
        }
    } else if p - cal.transfer_prob <= PARTIAL_SLACK {
        cal.tau2_star
    } else {
        let max_reached = cal.grid.iter().map(|r| r.transfer).fold(cal.transfer_prob, f64::max);
        return Err(RotorError::UnreachablePopulation { target: p, max_reached });
    };

    let gate = extract_unitary(&setup.spec(tau2)?, &basis, DEFAULT_CYCLICITY_TOL)?;
    Ok(PartialNot {
        target: p,
        tau2,
        transfer: gate.matrix.get(1, 0).norm_sqr(),
        gate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{average_gate_fidelity, u_z};
    use crate::spectral::solve_spectrum;
    use crate::rotor::build_hamiltonian;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn basis(v1: f64) -> QubitBasis {
        qubit_basis(&DimensionlessParams::new(v1, 20.0).unwrap(), 12).unwrap()
    }

    #[test]
    fn projections() {
        let b = basis(1.0);
        let a = project_to_qubit(&b.state0, &b).unwrap();
        assert_abs_diff_eq!(a.c0.re, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(a.c1.norm(), 0.0, epsilon = 1e-12);
        assert!(a.leakage < 1e-12);

        let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
        let sup = FourierState::superpose(&[(h, &b.state0), (h, &b.state1)]).unwrap();
        let a = project_to_qubit(&sup, &b).unwrap();
        assert_abs_diff_eq!(a.c0.re, FRAC_1_SQRT_2, epsilon = 1e-12);
        assert_abs_diff_eq!(a.c1.re, FRAC_1_SQRT_2, epsilon = 1e-12);

        let h = build_hamiltonian(&b.params, 12).unwrap();
        let third = &solve_spectrum(&h).unwrap().eigenvectors[2];
        assert!(project_to_qubit(third, &b).unwrap().leakage > 0.99);
    }

    #[test]
    fn prepare_and_measure() {
        let b = basis(0.0);
        let s0 = prepare_state(0, &b).unwrap();
        let s1 = prepare_state(1, &b).unwrap();
        assert!(s0.expect_cos() > 0.9);
        assert!(s1.expect_cos() < -0.9);
        assert!(s0.inner(&s1).unwrap().norm() < 1e-12);
        assert!(prepare_state(2, &b).is_err());

        let r = measure_probabilities(&s0).unwrap();
        assert!(r.p0 > 0.99);
        assert_eq!(r.p0 + r.p1, 1.0);
        let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
        let sup = FourierState::superpose(&[(h, &s0), (h, &s1)]).unwrap();
        assert_abs_diff_eq!(measure_probabilities(&sup).unwrap().p0, 0.5, epsilon = 1e-6);
        assert!(measure_probabilities(&s0.scaled(Complex64::new(2.0, 0.0))).is_err());
    }

    #[test]
    fn static_evolution_is_diagonal() {
        let b = basis(1.0);
        let t = 3.0;
        let spec = EvolutionSpec::idle(t, 1e-3, b.params, 12).unwrap();
        let g = extract_unitary(&spec, &b, 0.02).unwrap();
        assert!(g.valid);
        let e = solve_spectrum(&build_hamiltonian(&b.params, 12).unwrap()).unwrap().eigenvalues;
        let want = [Complex64::from_polar(1.0, -e[0] * t), Complex64::from_polar(1.0, -e[1] * t)];
        // Fix the global phase on U00.
        let phase = want[0] / g.matrix.get(0, 0);
        assert!((g.matrix.get(1, 1) * phase - want[1]).norm() < 1e-6);
        assert!(g.matrix.get(0, 1).norm() < 1e-6);
        let framed = idle_frame(&g.matrix, &b, t).unwrap();
        assert!((framed.entries() - GateMatrix::identity(2).unwrap().entries()).norm() < 1e-6);
    }

    #[test]
    fn zero_duration_is_identity() {
        let b = basis(0.0);
        let spec = EvolutionSpec::idle(0.0, 1e-3, b.params, 12).unwrap();
        let g = extract_unitary(&spec, &b, 0.02).unwrap();
        assert!((g.matrix.entries() - GateMatrix::identity(2).unwrap().entries()).norm() < 1e-12);
        assert!(g.unitarity_residual <= 4.0 * g.leakage_max + 1e-8);
    }

    #[test]
    fn not_pulse_swaps_wells() {
        let setup = NotSetup::default();
        let b = setup.basis().unwrap();
        let g = extract_unitary(&setup.spec(12.6).unwrap(), &b, 0.02).unwrap();
        assert!(g.valid);
        assert!(g.matrix.get(0, 1).norm() > 0.97 && g.matrix.get(1, 0).norm() > 0.97);
        assert!(g.unitarity_residual <= 4.0 * g.leakage_max + 1e-8);
        // Twice the NOT is the identity up to phase. A rotation moving
        // population p squares to one with infidelity (8/3) p (1 - p).
        let sq = g.matrix.mul(&g.matrix).unwrap();
        let inf = 1.0 - average_gate_fidelity(&sq, &GateMatrix::identity(2).unwrap()).unwrap();
        let transfer = g.matrix.get(1, 0).norm_sqr();
        assert!(inf < 3.0 * (1.0 - transfer));
    }

    #[test]
    fn open_pulse_is_rejected() {
        let setup = NotSetup::default();
        let b = setup.basis().unwrap();
        let open = PulseProfile::new(Knob::V2, 20.0, 0.0, 12.0, 2.0).unwrap();
        let spec = EvolutionSpec::new(20.0, 1e-3, vec![open], b.params, 12).unwrap();
        assert!(matches!(extract_unitary(&spec, &b, 0.02), Err(RotorError::NotCyclic { .. })));
    }

    #[test]
    fn phase_calibration_small_grid() {
        let setup = PhaseSetup {
            step: 5e-3,
            ..PhaseSetup::default()
        };
        let windows: Vec<f64> = (0..=4).map(|p| 0.41 * p as f64).collect();
        let cal = calibrate_phase(&setup, &windows, Execution::Parallel).unwrap();
        assert!((cal.slope + 0.3).abs() < 0.03, "slope {}", cal.slope);
        assert!(cal.fit_r2 > 0.999);
        for p in &cal.grid {
            assert!(p.offdiag < 1e-3);
        }
        assert_abs_diff_eq!(cal.window_for(std::f64::consts::FRAC_PI_4).unwrap(), 0.125 / cal.slope.abs(), epsilon = 1e-12);
        assert_eq!(cal.window_for(0.0).unwrap(), 0.0);

        // T gate in the free-evolution frame.
        let pulse = phase_gate_schedule(std::f64::consts::FRAC_PI_4, &cal).unwrap();
        let b = setup.basis().unwrap();
        let spec = EvolutionSpec::new(setup.duration, setup.step, vec![pulse], b.params, 12).unwrap();
        let g = extract_unitary(&spec, &b, 0.02).unwrap();
        let framed = idle_frame(&g.matrix, &b, setup.duration).unwrap();
        let f = average_gate_fidelity(&framed, &u_z(std::f64::consts::FRAC_PI_4)).unwrap();
        assert!(1.0 - f < 1e-3, "infidelity {}", 1.0 - f);
    }

    #[test]
    fn phase_calibration_rejects_bad_windows() {
        let s = PhaseSetup::default();
        assert!(calibrate_phase(&s, &[], Execution::Sequential).is_err());
        assert!(calibrate_phase(&s, &[1.0, 0.5], Execution::Sequential).is_err());
        assert!(calibrate_phase(&s, &[0.0], Execution::Sequential).is_err());
        assert!(calibrate_phase(&s, &[-0.1, 0.4], Execution::Sequential).is_err());
    }

    #[test]
    fn not_calibration_on_coarse_narrow_range() {
        let setup = NotSetup {
            step: 2e-3,
            ..NotSetup::default()
        };
        let cal = calibrate_not(&setup, (12.2, 13.0), 0, Execution::Parallel).unwrap();
        assert!((cal.tau2_star - 12.6).abs() < 0.3, "tau2* {}", cal.tau2_star);
        assert!(cal.transfer_prob > 0.95);
        assert!(cal.converged);
        assert_eq!(cal.grid.len(), 9);

        let from_one = calibrate_not(&setup, (12.2, 13.0), 1, Execution::Sequential).unwrap();
        assert!((from_one.tau2_star - cal.tau2_star).abs() < 1e-3);

        let mut csv = Vec::new();
        cal.write_scan_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.contains("tau2,abs_psi_0,abs_psi_pi,transfer_prob\n"));
        assert!(calibrate_not(&setup, (2.0, 13.0), 0, Execution::Sequential).is_err());
        assert!(calibrate_not(&setup, (12.0, 25.0), 0, Execution::Sequential).is_err());
    }

    #[test]
    fn scan_grid_spacing() {
        let g = scan_grid(4.0, 16.0, 0.1);
        assert_eq!(g.len(), 121);
        assert_eq!(g[0], 4.0);
        assert_eq!(*g.last().unwrap(), 16.0);
        assert_abs_diff_eq!(g[1] - g[0], 0.1, epsilon = 1e-12);
    }
}
