//! Capacitively coupled rotor pair: plate energies at the four parallel
//! configurations, their exact Ising form, and the resulting diagonal gates.
//!
//! Spin `s = +1` is the rotor at `phi = 0` (qubit `|0>`), `s = -1` at
//! `phi = pi`. Opposite orientations move the plates to `ell + 2R` or
//! `ell - 2R` apart.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::algebra::{phase_minimized_distance, u_z, GateMatrix};
use crate::error::{Result, RotorError};
use crate::rotor::{HBAR, VACUUM_PERMITTIVITY};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairGeometry {
    /// Support spacing in m.
    pub ell: f64,
    /// Rotation radius in m.
    pub radius: f64,
    /// Plate area in m^2.
    pub area: f64,
    pub permittivity: f64,
    /// Voltage between the rotors in V.
    pub v12: f64,
}

impl PairGeometry {
    pub fn new(ell: f64, radius: f64, area: f64, permittivity: f64, v12: f64) -> Result<Self> {
        let g = Self {
            ell,
            radius,
            area,
            permittivity,
            v12,
        };
        g.validate()?;
        Ok(g)
    }

    /// Vacuum gap.
    pub fn in_vacuum(ell: f64, radius: f64, area: f64, v12: f64) -> Result<Self> {
        Self::new(ell, radius, area, VACUUM_PERMITTIVITY, v12)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("ell", self.ell), ("area", self.area), ("permittivity", self.permittivity)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(RotorError::invalid(name, format!("{v} must be > 0")));
            }
        }
        if !(self.radius.is_finite() && self.radius >= 0.0) {
            return Err(RotorError::invalid("radius", format!("{} must be >= 0", self.radius)));
        }
        if !self.v12.is_finite() {
            return Err(RotorError::invalid("v12", "must be finite"));
        }
        if 2.0 * self.radius >= self.ell {
            return Err(RotorError::DivergentGeometry {
                two_r: 2.0 * self.radius,
                ell: self.ell,
            });
        }
        Ok(())
    }

    /// Electrostatic energy `eps S V^2 / (2 L)` of plates `distance` apart.
    fn plate_energy(&self, distance: f64) -> f64 {
        self.permittivity * self.area * self.v12 * self.v12 / (2.0 * distance)
    }
}

/// Energies in J: `e0` for parallel orientations, `eplus` for plates at
/// `ell + 2R`, `eminus` at `ell - 2R`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairEnergies {
    pub e0: f64,
    pub eplus: f64,
    pub eminus: f64,
}

pub fn pair_energies(geom: &PairGeometry) -> Result<PairEnergies> {
    geom.validate()?;
    Ok(PairEnergies {
        e0: geom.plate_energy(geom.ell),
        eplus: geom.plate_energy(geom.ell + 2.0 * geom.radius),
        eminus: geom.plate_energy(geom.ell - 2.0 * geom.radius),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsingCoefficients {
    pub j: f64,
    /// Field on the left spin; the right spin sees `-b`.
    pub b: f64,
    pub ebar: f64,
    /// `(E- - E+)/2`, the splitting used by the approximate gate.
    pub ex: f64,
}

pub fn ising_coefficients(e: &PairEnergies) -> IsingCoefficients {
    IsingCoefficients {
        j: (2.0 * e.e0 - e.eplus - e.eminus) / 4.0,
        b: (e.eplus - e.eminus) / 4.0,
        ebar: (2.0 * e.e0 + e.eplus + e.eminus) / 4.0,
        ex: (e.eminus - e.eplus) / 2.0,
    }
}

/// `J s s' + B s - B s' + Ebar`.
pub fn pair_hamiltonian(c: &IsingCoefficients, s: i8, s_next: i8) -> f64 {
    let (s, t) = (f64::from(s), f64::from(s_next));
    c.j * s * t + c.b * s - c.b * t + c.ebar
}

/// Largest relative mismatch between `pair_hamiltonian` and the energies at
/// the four configurations.
pub fn reconstruction_residual(e: &PairEnergies, c: &IsingCoefficients) -> f64 {
    let scale = e.e0.abs().max(e.eplus.abs()).max(e.eminus.abs());
    if scale == 0.0 {
        return 0.0;
    }
    [(1, 1, e.e0), (1, -1, e.eplus), (-1, 1, e.eminus), (-1, -1, e.e0)]
        .iter()
        .map(|&(s, t, w)| (pair_hamiltonian(c, s, t) - w).abs() / scale)
        .fold(0.0, f64::max)
}

/// Sum of nearest-neighbour pair terms along a chain; `coeffs[j]` couples
/// `spins[j]` and `spins[j + 1]`.
pub fn chain_energy(spins: &[i8], coeffs: &[IsingCoefficients]) -> Result<f64> {
    if spins.len() != coeffs.len() + 1 {
        return Err(RotorError::LengthMismatch {
            what: format!("{} spins need {} pair couplings, got {}", spins.len(), spins.len().saturating_sub(1), coeffs.len()),
        });
    }
    if let Some(s) = spins.iter().find(|s| s.abs() != 1) {
        return Err(RotorError::invalid("spins", format!("{s} is not +1 or -1")));
    }
    Ok(coeffs
        .iter()
        .enumerate()
        .map(|(j, c)| pair_hamiltonian(c, spins[j], spins[j + 1]))
        .sum())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateMode {
    /// Phases `(E0, E+, E-, E0) t / hbar`.
    Exact,
    /// `diag(1, e^{i Ex t}, e^{-i Ex t}, 1)` with `Ex = (E- - E+)/2`, which
    /// drops the coupling `J`.
    FirstOrder,
}

/// `diag(e^{-i phi00}, e^{-i phi01}, e^{-i phi10}, e^{-i phi11})`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DiagonalTwoQubitGate {
    pub phases: [f64; 4],
}

impl DiagonalTwoQubitGate {
    pub fn matrix(&self) -> Result<GateMatrix> {
        let d: Vec<Complex64> = self.phases.iter().map(|&p| Complex64::from_polar(1.0, -p)).collect();
        GateMatrix::from_diagonal(&d)
    }
}

pub fn two_qubit_phase_gate(e: &PairEnergies, t: f64, mode: GateMode) -> Result<DiagonalTwoQubitGate> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(RotorError::invalid("t", format!("{t} must be >= 0")));
    }
    let w = t / HBAR;
    let phases = match mode {
        GateMode::Exact => [e.e0 * w, e.eplus * w, e.eminus * w, e.e0 * w],
        GateMode::FirstOrder => {
            let ex = ising_coefficients(e).ex * w;
            [0.0, -ex, ex, 0.0]
        }
    };
    Ok(DiagonalTwoQubitGate { phases })
}

/// Tolerance on off-diagonal magnitude for [`entangling_phase`].
pub const DIAGONAL_TOL: f64 = 1e-12;

/// `chi = (a00 - a01 - a10 + a11)/4` over the diagonal arguments, reduced mod
/// `pi/2` into `(-pi/4, pi/4]`. Zero means a product of local phase gates,
/// `pi/4` means CZ up to local Z rotations.
pub fn entangling_phase(gate: &GateMatrix) -> Result<f64> {
    if gate.dim() != 4 {
        return Err(RotorError::DimensionMismatch {
            expected: 4,
            got: gate.dim(),
        });
    }
    if !gate.is_diagonal(DIAGONAL_TOL) {
        let offdiag = (0..4)
            .flat_map(|r| (0..4).map(move |c| (r, c)))
            .filter(|(r, c)| r != c)
            .map(|(r, c)| gate.get(r, c).norm())
            .fold(0.0, f64::max);
        return Err(RotorError::NotDiagonal { offdiag });
    }
    let a: Vec<f64> = (0..4).map(|k| gate.get(k, k).arg()).collect();
    Ok(reduce_chi((a[0] - a[1] - a[2] + a[3]) / 4.0))
}

fn reduce_chi(raw: f64) -> f64 {
    let r = raw - FRAC_PI_2 * ((raw - FRAC_PI_4) / FRAC_PI_2).ceil();
    if (r + FRAC_PI_4).abs() < 1e-12 {
        FRAC_PI_4
    } else {
        r
    }
}

/// `theta1, theta2, delta` with `e^{i delta} U_Z(theta1) ⊗ U_Z(theta2)`
/// matching a diagonal gate on `|00>, |01>, |10>`, and the Frobenius
/// mismatch left on `|11>` (zero exactly when `chi = 0`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LocalPhases {
    pub theta1: f64,
    pub theta2: f64,
    pub delta: f64,
    pub residual: f64,
}

pub fn local_phase_decomposition(gate: &GateMatrix) -> Result<LocalPhases> {
    entangling_phase(gate)?;
    let a: Vec<f64> = (0..4).map(|k| gate.get(k, k).arg()).collect();
    let (delta, theta2, theta1) = (a[0], a[1] - a[0], a[2] - a[0]);
    let product = u_z(theta1)
        .kron(&u_z(theta2))?
        .scaled(Complex64::from_polar(1.0, delta));
    let residual = (product.entries() - gate.entries()).norm();
    Ok(LocalPhases {
        theta1: theta1.rem_euclid(TAU),
        theta2: theta2.rem_euclid(TAU),
        delta: delta.rem_euclid(TAU),
        residual,
    })
}

/// Smallest phase-minimized distance from `gate` to any `U_Z(t1) ⊗ U_Z(t2)`
/// on a `grid x grid` lattice of angles.
pub fn local_product_distance(gate: &GateMatrix, grid: usize) -> Result<f64> {
    let h = TAU / grid.max(1) as f64;
    let mut best = f64::INFINITY;
    for i in 0..grid.max(1) {
        for j in 0..grid.max(1) {
            let p = u_z(i as f64 * h).kron(&u_z(j as f64 * h))?;
            best = best.min(phase_minimized_distance(gate, &p)?);
        }
    }
    Ok(best)
}

/// Time and local corrections turning the exact pair gate into CZ:
/// `e^{i delta} (U_Z(theta1) ⊗ U_Z(theta2)) G(t_star) = CZ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CzTiming {
    pub t_star: f64,
    pub theta1: f64,
    pub theta2: f64,
    pub global_phase: f64,
}

pub fn cz_time(e: &PairEnergies) -> Result<CzTiming> {
    let c = ising_coefficients(e);
    if c.j == 0.0 || c.j.abs() < 1e-14 * c.ebar.abs() {
        return Err(RotorError::NoCoupling);
    }
    let t_star = PI * HBAR / (4.0 * c.j.abs());
    let w = t_star / HBAR;
    Ok(CzTiming {
        t_star,
        theta1: ((e.eminus - e.e0) * w).rem_euclid(TAU),
        theta2: ((e.eplus - e.e0) * w).rem_euclid(TAU),
        global_phase: (e.e0 * w).rem_euclid(TAU),
    })
}

/// Scalar summary of one geometry.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PairReport {
    #[serde(rename = "E0")]
    pub e0: f64,
    #[serde(rename = "Eplus")]
    pub eplus: f64,
    #[serde(rename = "Eminus")]
    pub eminus: f64,
    #[serde(rename = "J")]
    pub j: f64,
    #[serde(rename = "B")]
    pub b: f64,
    #[serde(rename = "Ebar")]
    pub ebar: f64,
    #[serde(rename = "Ex")]
    pub ex: f64,
    pub t_star_cz: f64,
    pub chi_at_tstar: f64,
}

pub fn pair_report(geom: &PairGeometry) -> Result<PairReport> {
    let e = pair_energies(geom)?;
    let c = ising_coefficients(&e);
    let timing = cz_time(&e)?;
    let gate = two_qubit_phase_gate(&e, timing.t_star, GateMode::Exact)?;
    Ok(PairReport {
        e0: e.e0,
        eplus: e.eplus,
        eminus: e.eminus,
        j: c.j,
        b: c.b,
        ebar: c.ebar,
        ex: c.ex,
        t_star_cz: timing.t_star,
        chi_at_tstar: entangling_phase(&gate.matrix()?)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{cz_gate, zz_gate};
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    fn example() -> PairGeometry {
        PairGeometry::in_vacuum(100e-9, 10e-9, 1e-16, 1e-3).unwrap()
    }

    #[test]
    fn example_energies() {
        let e = pair_energies(&example()).unwrap();
        assert_relative_eq!(e.e0, 4.427e-27, max_relative = 1e-3);
        assert_relative_eq!(e.eplus, e.e0 * 100.0 / 120.0, max_relative = 1e-12);
        assert_relative_eq!(e.eminus, e.e0 * 100.0 / 80.0, max_relative = 1e-12);
    }

    #[test]
    fn geometry_validation() {
        assert!(matches!(
            PairGeometry::in_vacuum(1e-7, 5e-8, 1e-16, 1e-3),
            Err(RotorError::DivergentGeometry { .. })
        ));
        assert!(PairGeometry::in_vacuum(1e-7, -1e-9, 1e-16, 1e-3).is_err());
        assert!(PairGeometry::in_vacuum(0.0, 0.0, 1e-16, 1e-3).is_err());
    }

    #[test]
    fn zero_radius_has_no_coupling() {
        let g = PairGeometry::in_vacuum(1e-7, 0.0, 1e-16, 1e-3).unwrap();
        let e = pair_energies(&g).unwrap();
        assert_eq!(e.eplus, e.e0);
        assert_eq!(e.eminus, e.e0);
        let c = ising_coefficients(&e);
        assert_eq!((c.j, c.b), (0.0, 0.0));
        assert!(matches!(cz_time(&e), Err(RotorError::NoCoupling)));
    }

    #[test]
    fn chain_of_two_matches_pair_energies() {
        let e = pair_energies(&example()).unwrap();
        let c = ising_coefficients(&e);
        assert_relative_eq!(chain_energy(&[1, 1], &[c]).unwrap(), e.e0, max_relative = 1e-14);
        assert_relative_eq!(chain_energy(&[1, -1], &[c]).unwrap(), e.eplus, max_relative = 1e-14);
        assert_relative_eq!(chain_energy(&[-1, 1], &[c]).unwrap(), e.eminus, max_relative = 1e-14);
        assert!(chain_energy(&[1, 1, 1], &[c]).is_err());
        assert!(chain_energy(&[1, 0], &[c]).is_err());

        let field_only = IsingCoefficients {
            j: 0.0,
            b: 1.0,
            ebar: 0.0,
            ex: 0.0,
        };
        // Interior field terms cancel pairwise; only the ends remain.
        let e3 = chain_energy(&[1, -1, -1], &[field_only, field_only]).unwrap();
        assert_abs_diff_eq!(e3, 1.0 - (-1.0), epsilon = 1e-15);
    }

    #[test]
    fn gate_examples() {
        let e = pair_energies(&example()).unwrap();
        let id = two_qubit_phase_gate(&e, 0.0, GateMode::Exact).unwrap().matrix().unwrap();
        assert!((id.entries() - GateMatrix::identity(4).unwrap().entries()).norm() < 1e-15);

        let ex = ising_coefficients(&e).ex;
        let t = PI * HBAR / ex;
        let g = two_qubit_phase_gate(&e, t, GateMode::FirstOrder).unwrap().matrix().unwrap();
        assert!((g.entries() - zz_gate().entries()).norm() < 1e-12);

        let t = 1e-9;
        let p = two_qubit_phase_gate(&e, t, GateMode::Exact).unwrap().phases;
        let j = ising_coefficients(&e).j;
        assert_relative_eq!(p[0] - p[1] - p[2] + p[3], 4.0 * j * t / HBAR, max_relative = 1e-9);
        assert!(two_qubit_phase_gate(&e, -1.0, GateMode::Exact).is_err());
    }

    #[test]
    fn entangling_phase_examples() {
        assert_abs_diff_eq!(entangling_phase(&cz_gate()).unwrap(), FRAC_PI_4, epsilon = 1e-15);
        assert_abs_diff_eq!(entangling_phase(&zz_gate()).unwrap(), 0.0, epsilon = 1e-15);
        let x = 1.234;
        let g = GateMatrix::from_diagonal(&[
            Complex64::new(1.0, 0.0),
            Complex64::from_polar(1.0, -x),
            Complex64::from_polar(1.0, x),
            Complex64::new(1.0, 0.0),
        ])
        .unwrap();
        assert_abs_diff_eq!(entangling_phase(&g).unwrap(), 0.0, epsilon = 1e-15);
        assert!(matches!(
            entangling_phase(&crate::algebra::cnot_gate()),
            Err(RotorError::NotDiagonal { .. })
        ));
    }

    #[test]
    fn cz_is_not_a_local_product() {
        assert!(local_product_distance(&cz_gate(), 360).unwrap() >= 0.1);
        assert!(local_phase_decomposition(&cz_gate()).unwrap().residual > 1.0);
        assert!(local_product_distance(&zz_gate(), 4).unwrap() < 1e-12);
    }

    #[test]
    fn cz_timing_gives_cz() {
        let e = pair_energies(&example()).unwrap();
        let s = cz_time(&e).unwrap();
        assert!(s.t_star > 0.0 && s.t_star.is_finite());
        let g = two_qubit_phase_gate(&e, s.t_star, GateMode::Exact).unwrap().matrix().unwrap();
        let built = u_z(s.theta1)
            .kron(&u_z(s.theta2))
            .unwrap()
            .mul(&g)
            .unwrap()
            .scaled(Complex64::from_polar(1.0, s.global_phase));
        assert!((built.entries() - cz_gate().entries()).norm() < 1e-10);
        let r = pair_report(&example()).unwrap();
        assert_abs_diff_eq!(r.chi_at_tstar, FRAC_PI_4, epsilon = 1e-9);
    }

    #[test]
    fn approx_departs_from_exact_linearly_in_j() {
        let e = pair_energies(&example()).unwrap();
        let j = ising_coefficients(&e).j;
        for t in [1e-11, 1e-10] {
            let exact = two_qubit_phase_gate(&e, t, GateMode::Exact).unwrap().matrix().unwrap();
            let approx = two_qubit_phase_gate(&e, t, GateMode::FirstOrder).unwrap().matrix().unwrap();
            // The phases differ by J t/hbar on |00>, |11> relative to |01>, |10>.
            let d = local_product_distance_free(&exact, &approx);
            assert_relative_eq!(d, 2.0 * (j * t / HBAR).abs(), max_relative = 1e-3);
        }
    }

    fn local_product_distance_free(a: &GateMatrix, b: &GateMatrix) -> f64 {
        phase_minimized_distance(a, b).unwrap()
    }

    proptest! {
        #[test]
        fn ising_reconstruction_and_signs(
            ell in 1e-8f64..1e-6,
            frac in 0.01f64..0.99,
            area in 1e-18f64..1e-14,
            v in 1e-4f64..1.0,
        ) {
            let g = PairGeometry::in_vacuum(ell, 0.5 * frac * ell, area, v).unwrap();
            let e = pair_energies(&g).unwrap();
            let c = ising_coefficients(&e);
            prop_assert!(reconstruction_residual(&e, &c) < 1e-12);
            prop_assert!(e.eminus > e.e0 && e.e0 > e.eplus && e.eplus > 0.0);
            prop_assert!(c.j < 0.0 && c.b < 0.0);
        }

        #[test]
        fn separable_diagonals_decompose(a in 0.0f64..TAU, b in 0.0f64..TAU, d in 0.0f64..TAU) {
            let g = u_z(a).kron(&u_z(b)).unwrap().scaled(Complex64::from_polar(1.0, d));
            prop_assert!(entangling_phase(&g).unwrap().abs() < 1e-12);
            prop_assert!(local_phase_decomposition(&g).unwrap().residual < 1e-10);
        }
    }
}
