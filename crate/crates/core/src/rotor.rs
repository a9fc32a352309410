//! Single-rotor model: the two-cosine potential, its truncated Fourier
//! Hamiltonian, wavefunction evaluation and physical unit conversion.
//!
//! Angles are in radians, time and energy are dimensionless: energies are in
//! units of `hbar^2 / (2 I)` and time in units of `2 I / hbar`, where `I` is the
//! moment of inertia of the rotator.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, RotorError};

/// Reduced Planck constant (J s).
pub const HBAR: f64 = 1.054_571_817e-34;
/// Vacuum permittivity (F/m).
pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_812_8e-12;
/// Fourier cutoff used when none is given.
pub const DEFAULT_CUTOFF: usize = 12;

/// Amplitudes of the `cos phi` (`v1`) and `cos 2phi` (`v2`) potential terms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimensionlessParams {
    v1: f64,
    v2: f64,
}

impl DimensionlessParams {
    pub fn new(v1: f64, v2: f64) -> Result<Self> {
        check_amplitude("v1", v1)?;
        check_amplitude("v2", v2)?;
        Ok(Self { v1, v2 })
    }

    pub fn v1(&self) -> f64 {
        self.v1
    }

    pub fn v2(&self) -> f64 {
        self.v2
    }
}

fn check_amplitude(name: &'static str, v: f64) -> Result<()> {
    if !v.is_finite() {
        return Err(RotorError::invalid(name, format!("{v} is not finite")));
    }
    if v < 0.0 {
        return Err(RotorError::invalid(name, format!("{v} is negative")));
    }
    Ok(())
}

/// `V(phi) = -v2 cos 2phi - v1 cos phi`.
pub fn potential_value(phi: f64, params: &DimensionlessParams) -> f64 {
    -params.v2 * (2.0 * phi).cos() - params.v1 * phi.cos()
}

/// SI constants of a rotator device.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    /// Moment of inertia `mu r^2` (kg m^2).
    pub inertia: f64,
    /// Reduced Planck constant (J s).
    pub hbar: f64,
    /// Inner/outer plate capacitance (F).
    pub capacitance: f64,
    /// Permittivity (F/m).
    pub permittivity: f64,
    /// Plate area (m^2).
    pub plate_area: f64,
    /// Plate gap (m).
    pub plate_gap: f64,
}

impl PhysicalConstants {
    pub fn new(
        inertia: f64,
        hbar: f64,
        capacitance: f64,
        permittivity: f64,
        plate_area: f64,
        plate_gap: f64,
    ) -> Result<Self> {
        for (name, v) in [
            ("inertia", inertia),
            ("hbar", hbar),
            ("capacitance", capacitance),
            ("permittivity", permittivity),
            ("plate_area", plate_area),
            ("plate_gap", plate_gap),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(RotorError::invalid(name, format!("{v} must be positive")));
            }
        }
        Ok(Self {
            inertia,
            hbar,
            capacitance,
            permittivity,
            plate_area,
            plate_gap,
        })
    }

    /// Nanotube device scale: inertia 1e-30 kg m^2, C = 1e-21 F, a (10 nm)^2
    /// plate at 100 nm.
    pub fn nanotube_defaults() -> Self {
        Self {
            inertia: 1e-30,
            hbar: HBAR,
            capacitance: 1e-21,
            permittivity: VACUUM_PERMITTIVITY,
            plate_area: 1e-16,
            plate_gap: 1e-7,
        }
    }

    /// Energy unit `hbar^2 / (2 I)` in joules.
    pub fn energy_unit(&self) -> f64 {
        self.hbar * self.hbar / (2.0 * self.inertia)
    }

    /// Seconds per dimensionless time unit, `2 I / hbar`.
    pub fn time_unit(&self) -> f64 {
        2.0 * self.inertia / self.hbar
    }
}

/// A plate voltage expressed as a dimensionless potential amplitude.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DimensionlessVoltage {
    /// Electrostatic energy `C V^2 / 2` (J).
    pub energy_j: f64,
    /// The amplitude `2 I A / hbar^2`.
    pub value: f64,
    /// Seconds per unit of dimensionless time.
    pub time_unit_s: f64,
}

pub fn to_dimensionless(phys: &PhysicalConstants, volts: f64) -> Result<DimensionlessVoltage> {
    if !(volts.is_finite() && volts >= 0.0) {
        return Err(RotorError::invalid("volts", format!("{volts} must be >= 0")));
    }
    let energy_j = 0.5 * phys.capacitance * volts * volts;
    Ok(DimensionlessVoltage {
        energy_j,
        value: energy_j / phys.energy_unit(),
        time_unit_s: phys.time_unit(),
    })
}

/// Inverse of [`to_dimensionless`]: the voltage producing amplitude `value`.
pub fn to_physical(phys: &PhysicalConstants, value: f64) -> Result<f64> {
    check_amplitude("value", value)?;
    let energy = value * phys.energy_unit();
    Ok((2.0 * energy / phys.capacitance).sqrt())
}

/// Truncated Fourier amplitudes `alpha_n`, `n = -N..=N`, stored at index `n + N`.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierState {
    cutoff: usize,
    amps: DVector<Complex64>,
}

impl FourierState {
    pub fn new(cutoff: usize, amps: Vec<Complex64>) -> Result<Self> {
        check_cutoff(cutoff)?;
        if amps.len() != 2 * cutoff + 1 {
            return Err(RotorError::DimensionMismatch {
                expected: 2 * cutoff + 1,
                got: amps.len(),
            });
        }
        Ok(Self {
            cutoff,
            amps: DVector::from_vec(amps),
        })
    }

    pub fn from_real(cutoff: usize, amps: &[f64]) -> Result<Self> {
        Self::new(cutoff, amps.iter().map(|&a| Complex64::new(a, 0.0)).collect())
    }

    pub(crate) fn from_vector(cutoff: usize, amps: DVector<Complex64>) -> Self {
        debug_assert_eq!(amps.len(), 2 * cutoff + 1);
        Self { cutoff, amps }
    }

    /// The single mode `e^{i n phi}`.
    pub fn plane_wave(cutoff: usize, n: i64) -> Result<Self> {
        check_cutoff(cutoff)?;
        if n.unsigned_abs() as usize > cutoff {
            return Err(RotorError::invalid("n", format!("|{n}| exceeds cutoff {cutoff}")));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 2 * cutoff + 1];
        amps[(n + cutoff as i64) as usize] = Complex64::new(1.0, 0.0);
        Self::new(cutoff, amps)
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn len(&self) -> usize {
        self.amps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amps.is_empty()
    }

    pub fn amps(&self) -> &DVector<Complex64> {
        &self.amps
    }

    /// Amplitude of mode `n`; zero outside the cutoff.
    pub fn amp(&self, n: i64) -> Complex64 {
        if n.unsigned_abs() as usize > self.cutoff {
            Complex64::new(0.0, 0.0)
        } else {
            self.amps[(n + self.cutoff as i64) as usize]
        }
    }

    pub fn modes(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        let n0 = self.cutoff as i64;
        self.amps.iter().enumerate().map(move |(k, &a)| (k as i64 - n0, a))
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn normalized(&self) -> Result<Self> {
        let norm = self.norm_sqr().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(RotorError::NotNormalized { norm_sqr: norm * norm });
        }
        Ok(Self {
            cutoff: self.cutoff,
            amps: self.amps.unscale(norm),
        })
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &FourierState) -> Result<Complex64> {
        self.check_same_cutoff(other)?;
        Ok(self.amps.dotc(&other.amps))
    }

    pub(crate) fn check_same_cutoff(&self, other: &FourierState) -> Result<()> {
        if self.cutoff != other.cutoff {
            return Err(RotorError::DimensionMismatch {
                expected: self.len(),
                got: other.len(),
            });
        }
        Ok(())
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        Self {
            cutoff: self.cutoff,
            amps: self.amps.map(|a| a * c),
        }
    }

    /// `sum_k c_k |state_k>`.
    pub fn superpose(terms: &[(Complex64, &FourierState)]) -> Result<Self> {
        let (_, first) = terms
            .first()
            .ok_or_else(|| RotorError::invalid("terms", "empty superposition"))?;
        let mut amps = DVector::zeros(first.len());
        for (c, s) in terms {
            first.check_same_cutoff(s)?;
            amps.axpy(*c, &s.amps, Complex64::new(1.0, 0.0));
        }
        Ok(Self::from_vector(first.cutoff, amps))
    }

    /// `psi(phi) = (2 pi)^{-1/2} sum_n alpha_n e^{i n phi}`.
    pub fn evaluate(&self, phi: f64) -> Complex64 {
        self.modes()
            .map(|(n, a)| a * Complex64::from_polar(1.0, n as f64 * phi))
            .sum::<Complex64>()
            / (2.0 * PI).sqrt()
    }

    /// The state translated by half a turn: `psi(phi) -> psi(phi + pi)`.
    pub fn shifted_by_pi(&self) -> Self {
        let n0 = self.cutoff as i64;
        let amps = DVector::from_iterator(
            self.len(),
            self.amps.iter().enumerate().map(|(k, &a)| {
                if (k as i64 - n0) % 2 == 0 {
                    a
                } else {
                    -a
                }
            }),
        );
        Self::from_vector(self.cutoff, amps)
    }

    /// Expectation value `<cos phi>`.
    pub fn expect_cos(&self) -> f64 {
        // cos phi couples n and n + 1 with weight 1/2 each way.
        let a = &self.amps;
        (0..a.len() - 1)
            .map(|k| (a[k].conj() * a[k + 1]).re)
            .sum::<f64>()
            / self.norm_sqr()
    }

    /// Probability of finding the rotor in the half circle `|phi| < pi/2`.
    pub fn right_half_probability(&self) -> f64 {
        // int_{-pi/2}^{pi/2} e^{i k phi} dphi = pi (k = 0) or 2 sin(k pi/2) / k.
        let weight = |k: i64| -> f64 {
            match k {
                0 => PI,
                k if k % 2 == 0 => 0.0,
                k => 2.0 * (k as f64 * PI / 2.0).sin() / k as f64,
            }
        };
        let mut p = 0.0;
        for (n, an) in self.modes() {
            for (m, am) in self.modes() {
                let w = weight(n - m);
                if w != 0.0 {
                    p += (am.conj() * an).re * w;
                }
            }
        }
        p / (2.0 * PI) / self.norm_sqr()
    }
}

fn check_cutoff(cutoff: usize) -> Result<()> {
    if cutoff < 1 {
        return Err(RotorError::CutoffTooSmall { min: 1, got: cutoff });
    }
    Ok(())
}

/// Samples of the wavefunction on the given angles.
pub fn evaluate_state(state: &FourierState, grid: &[f64]) -> Vec<Complex64> {
    grid.iter().map(|&phi| state.evaluate(phi)).collect()
}

/// `points` equally spaced angles covering `[-pi, pi)`.
pub fn angle_grid(points: usize) -> Vec<f64> {
    (0..points)
        .map(|k| -PI + 2.0 * PI * k as f64 / points as f64)
        .collect()
}

/// Real symmetric operator on the truncated Fourier basis.
///
/// The two-cosine potential only couples modes with `|n - m| <= 2` and all
/// couplings are real, so the Hamiltonian is a real pentadiagonal matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorMatrix {
    cutoff: usize,
    entries: DMatrix<f64>,
}

const HERMITIAN_TOL: f64 = 1e-14;

impl OperatorMatrix {
    pub fn from_dense(cutoff: usize, entries: DMatrix<f64>) -> Result<Self> {
        check_cutoff(cutoff)?;
        let dim = 2 * cutoff + 1;
        if entries.nrows() != dim || entries.ncols() != dim {
            return Err(RotorError::DimensionMismatch {
                expected: dim,
                got: entries.nrows().max(entries.ncols()),
            });
        }
        let scale = entries.amax().max(1.0);
        let mut asymmetry: f64 = 0.0;
        for i in 0..dim {
            for j in 0..dim {
                let x = entries[(i, j)];
                if x != 0.0 && i.abs_diff(j) > 2 {
                    return Err(RotorError::OutsideBand {
                        offset: i.abs_diff(j),
                    });
                }
                asymmetry = asymmetry.max((x - entries[(j, i)]).abs());
            }
        }
        if asymmetry > HERMITIAN_TOL * scale {
            return Err(RotorError::NotHermitian { asymmetry });
        }
        Ok(Self { cutoff, entries })
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Element `<n|H|m>` addressed by mode numbers.
    pub fn element(&self, n: i64, m: i64) -> f64 {
        let c = self.cutoff as i64;
        self.entries[((n + c) as usize, (m + c) as usize)]
    }

    /// `H |state>`.
    pub fn apply(&self, state: &FourierState) -> Result<FourierState> {
        if state.cutoff() != self.cutoff {
            return Err(RotorError::DimensionMismatch {
                expected: self.dim(),
                got: state.len(),
            });
        }
        let h = self.entries.map(|x| Complex64::new(x, 0.0));
        Ok(FourierState::from_vector(self.cutoff, h * state.amps()))
    }
}

/// `<n|H|m>` for the kinetic term plus the two-cosine potential.
pub(crate) fn hamiltonian_element(n: i64, m: i64, v1: f64, v2: f64) -> f64 {
    match n.abs_diff(m) {
        0 => (n * n) as f64,
        1 => -0.5 * v1,
        2 => -0.5 * v2,
        _ => 0.0,
    }
}

/// Fourier-space matrix of `-d^2/dphi^2 - v2 cos 2phi - v1 cos phi`.
pub fn build_hamiltonian(params: &DimensionlessParams, cutoff: usize) -> Result<OperatorMatrix> {
    check_cutoff(cutoff)?;
    let dim = 2 * cutoff + 1;
    let c = cutoff as i64;
    let entries = DMatrix::from_fn(dim, dim, |i, j| {
        hamiltonian_element(i as i64 - c, j as i64 - c, params.v1, params.v2)
    });
    Ok(OperatorMatrix { cutoff, entries })
}
