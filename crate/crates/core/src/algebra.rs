//! Ideal gates, products, identity checks and small synthesis problems.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4, PI, TAU};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Result, RotorError};
use crate::exec::Execution;
use crate::two_qubit::{cz_time, two_qubit_phase_gate, GateMode, PairEnergies};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// A one- or two-qubit gate in the computational basis `|0>, |1>` or
/// `|00>, |01>, |10>, |11>`.
#[derive(Clone, Debug, PartialEq)]
pub struct GateMatrix {
    entries: DMatrix<Complex64>,
}

impl GateMatrix {
    pub fn new(entries: DMatrix<Complex64>) -> Result<Self> {
        let (r, c) = entries.shape();
        if r != c || !(r == 2 || r == 4) {
            return Err(RotorError::DimensionMismatch {
                expected: if r == 4 { 4 } else { 2 },
                got: if r == c { r } else { c },
            });
        }
        Ok(Self { entries })
    }

    fn from_rows(dim: usize, rows: &[Complex64]) -> Self {
        Self {
            entries: DMatrix::from_row_slice(dim, dim, rows),
        }
    }

    pub fn from_diagonal(diag: &[Complex64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(diag)))
    }

    pub fn identity(dim: usize) -> Result<Self> {
        Self::new(DMatrix::identity(dim, dim))
    }

    /// `c` times the identity, for global phase factors in a product.
    pub fn scalar(c: Complex64, dim: usize) -> Result<Self> {
        Ok(Self::identity(dim)?.scaled(c))
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.entries[(row, col)]
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        Self {
            entries: self.entries.map(|z| z * c),
        }
    }

    pub fn adjoint(&self) -> Self {
        Self {
            entries: self.entries.adjoint(),
        }
    }

    pub fn mul(&self, rhs: &GateMatrix) -> Result<Self> {
        if self.dim() != rhs.dim() {
            return Err(RotorError::DimensionMismatch {
                expected: self.dim(),
                got: rhs.dim(),
            });
        }
        Ok(Self {
            entries: &self.entries * &rhs.entries,
        })
    }

    /// `self ⊗ rhs`; the first factor acts on the first (left) qubit.
    pub fn kron(&self, rhs: &GateMatrix) -> Result<Self> {
        Self::new(self.entries.kronecker(&rhs.entries))
    }

    /// Frobenius norm of `U^dagger U - I`.
    pub fn unitarity_residual(&self) -> f64 {
        let d = self.dim();
        (self.entries.adjoint() * &self.entries - DMatrix::<Complex64>::identity(d, d)).norm()
    }

    /// `tr(self^dagger other)`.
    pub fn overlap(&self, other: &GateMatrix) -> Result<Complex64> {
        if self.dim() != other.dim() {
            return Err(RotorError::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        Ok(self.entries.iter().zip(other.entries.iter()).map(|(a, b)| a.conj() * b).sum())
    }

    pub fn is_diagonal(&self, tol: f64) -> bool {
        let d = self.dim();
        (0..d).all(|r| (0..d).all(|c| r == c || self.entries[(r, c)].norm() <= tol))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.norm()
    }
}

/// `diag(1, e^{i theta})`.
pub fn u_z(theta: f64) -> GateMatrix {
    GateMatrix::from_rows(2, &[ONE, ZERO, ZERO, Complex64::from_polar(1.0, theta)])
}

pub fn t_gate() -> GateMatrix {
    u_z(FRAC_PI_4)
}

/// Pauli Z as realized by the phase gate, `-i U_Z(pi) = diag(-i, i)`.
pub fn pauli_z() -> GateMatrix {
    u_z(PI).scaled(-I)
}

pub fn not_gate() -> GateMatrix {
    GateMatrix::from_rows(2, &[ZERO, ONE, ONE, ZERO])
}

pub fn hadamard() -> GateMatrix {
    let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
    GateMatrix::from_rows(2, &[h, h, h, -h])
}

/// `diag(1, -1, -1, 1)`, which equals `Z ⊗ Z`.
pub fn zz_gate() -> GateMatrix {
    GateMatrix::from_rows(
        4,
        &[
            ONE, ZERO, ZERO, ZERO, ZERO, -ONE, ZERO, ZERO, ZERO, ZERO, -ONE, ZERO, ZERO, ZERO, ZERO, ONE,
        ],
    )
}

pub fn cz_gate() -> GateMatrix {
    GateMatrix::from_rows(
        4,
        &[
            ONE, ZERO, ZERO, ZERO, ZERO, ONE, ZERO, ZERO, ZERO, ZERO, ONE, ZERO, ZERO, ZERO, ZERO, -ONE,
        ],
    )
}

/// Control on the first qubit.
pub fn cnot_gate() -> GateMatrix {
    GateMatrix::from_rows(
        4,
        &[
            ONE, ZERO, ZERO, ZERO, ZERO, ONE, ZERO, ZERO, ZERO, ZERO, ZERO, ONE, ZERO, ZERO, ONE, ZERO,
        ],
    )
}

/// Hadamard on the second qubit, `I ⊗ H`.
pub fn hadamard_on_second() -> GateMatrix {
    GateMatrix::identity(2)
        .and_then(|i| i.kron(&hadamard()))
        .expect("2x2 ⊗ 2x2 is 4x4")
}

pub fn ideal_gates() -> Vec<(&'static str, GateMatrix)> {
    vec![
        ("U_Z(pi/2)", u_z(FRAC_PI_2)),
        ("T", t_gate()),
        ("Z", pauli_z()),
        ("NOT", not_gate()),
        ("H", hadamard()),
        ("ZZ", zz_gate()),
        ("CZ", cz_gate()),
        ("CNOT", cnot_gate()),
    ]
}

/// Product in written order: `[A, B, C]` is `A B C`.
pub fn compose(sequence: &[GateMatrix]) -> Result<GateMatrix> {
    let first = sequence
        .first()
        .ok_or_else(|| RotorError::invalid("sequence", "empty gate sequence"))?;
    sequence[1..].iter().try_fold(first.clone(), |acc, g| acc.mul(g))
}

/// `min_delta ||a - e^{i delta} b||_F`.
pub fn phase_minimized_distance(a: &GateMatrix, b: &GateMatrix) -> Result<f64> {
    // The optimum is delta = arg tr(b^dagger a). Taking the norm of the
    // difference directly avoids the cancellation in the expanded form.
    let phase = Complex64::from_polar(1.0, b.overlap(a)?.arg());
    Ok((a.entries() - b.entries().map(|z| z * phase)).norm())
}

/// Deviations below this count as an identity holding.
pub const IDENTITY_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IdentityReport {
    pub lhs_label: String,
    pub rhs_label: String,
    pub deviation: f64,
    pub pass: bool,
}

pub fn verify_identity(
    lhs_label: &str,
    sequence: &[GateMatrix],
    rhs_label: &str,
    target: &GateMatrix,
) -> Result<IdentityReport> {
    let product = compose(sequence)?;
    let deviation = phase_minimized_distance(&product, target)?;
    Ok(IdentityReport {
        lhs_label: lhs_label.to_string(),
        rhs_label: rhs_label.to_string(),
        deviation,
        pass: deviation < IDENTITY_TOL,
    })
}

/// The three textbook compositions: CNOT from CZ and Hadamards, the Z-X-Z
/// route to a Hadamard, and the ZZ route to CZ.
pub fn standard_identities() -> Vec<IdentityReport> {
    let h2 = hadamard_on_second();
    let uz2 = u_z(FRAC_PI_2);
    let cases = [
        ("H2 CZ H2", vec![h2.clone(), cz_gate(), h2], "CNOT", cnot_gate()),
        (
            "-i Z NOT Z",
            vec![GateMatrix::scalar(-I, 2).expect("dim 2"), pauli_z(), not_gate(), pauli_z()],
            "H",
            hadamard(),
        ),
        (
            "e^{i pi/4} (U_Z(pi/2) ⊗ U_Z(pi/2)) ZZ",
            vec![
                GateMatrix::scalar(Complex64::from_polar(1.0, FRAC_PI_4), 4).expect("dim 4"),
                uz2.kron(&uz2).expect("4x4"),
                zz_gate(),
            ],
            "CZ",
            cz_gate(),
        ),
    ];
    cases
        .into_iter()
        .map(|(l, seq, r, t)| verify_identity(l, &seq, r, &t).expect("fixed dimensions agree"))
        .collect()
}

/// `(|tr(U^dagger V)|^2 + d) / (d (d + 1))`.
pub fn average_gate_fidelity(u: &GateMatrix, v: &GateMatrix) -> Result<f64> {
    let d = u.dim() as f64;
    let t = u.overlap(v)?.norm_sqr();
    Ok((t + d) / (d * (d + 1.0)))
}

/// Angles and phase of `e^{i delta} U_Z(theta1) M U_Z(theta2)` (one qubit) or
/// `e^{i delta} (U_Z(theta1) ⊗ U_Z(theta2)) M` (two qubits) closest to a target.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LocalZFit {
    pub theta1: f64,
    pub theta2: f64,
    pub delta: f64,
    pub infidelity: f64,
}

/// Synthesis counts as failed above this infidelity.
pub const SYNTHESIS_TOL: f64 = 1e-2;
const COARSE_GRID: usize = 64;
const REFINE_STEP: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HadamardSynthesis {
    #[serde(flatten)]
    pub fit: LocalZFit,
    pub success: bool,
}

fn wrap_angle(x: f64) -> f64 {
    x.rem_euclid(TAU)
}

/// Minimizes `1 - F` over two angles: a coarse `grid x grid` scan on
/// `[0, 2 pi)^2`, then a compass search down to a step of `1e-7`.
fn fit_two_angles<F>(assemble: F, target: &GateMatrix, grid: usize, exec: Execution) -> Result<LocalZFit>
where
    F: Fn(f64, f64) -> GateMatrix + Sync + Send,
{
    let infid = |t1: f64, t2: f64| -> f64 {
        1.0 - average_gate_fidelity(&assemble(t1, t2), target).expect("dimensions fixed by caller")
    };
    let h = TAU / grid as f64;
    let rows: Vec<usize> = (0..grid).collect();
    let best_per_row = exec.map(&rows, |&i| {
        (0..grid)
            .map(|j| (i, j, infid(i as f64 * h, j as f64 * h)))
            .fold((0, 0, f64::INFINITY), |b, c| if c.2 < b.2 { c } else { b })
    });
    let (bi, bj, mut best) = best_per_row
        .into_iter()
        .fold((0, 0, f64::INFINITY), |b, c| if c.2 < b.2 { c } else { b });
    let (mut t1, mut t2) = (bi as f64 * h, bj as f64 * h);

    let mut step = h;
    while step > REFINE_STEP {
        let mut moved = false;
        for (d1, d2) in [(step, 0.0), (-step, 0.0), (0.0, step), (0.0, -step)] {
            let v = infid(t1 + d1, t2 + d2);
            if v < best {
                best = v;
                t1 += d1;
                t2 += d2;
                moved = true;
                break;
            }
        }
        if !moved {
            step *= 0.5;
        }
    }
    let assembled = assemble(t1, t2);
    let delta = assembled.overlap(target)?.arg();
    Ok(LocalZFit {
        theta1: wrap_angle(t1),
        theta2: wrap_angle(t2),
        delta: wrap_angle(delta),
        infidelity: best.max(0.0),
    })
}

/// Best `e^{i delta} U_Z(theta1) M U_Z(theta2)` approximation of the Hadamard.
pub fn synthesize_hadamard(partial_not: &GateMatrix, exec: Execution) -> Result<HadamardSynthesis> {
    if partial_not.dim() != 2 {
        return Err(RotorError::DimensionMismatch {
            expected: 2,
            got: partial_not.dim(),
        });
    }
    let h = hadamard();
    let fit = fit_two_angles(
        |t1, t2| u_z(t1).mul(partial_not).and_then(|m| m.mul(&u_z(t2))).expect("2x2"),
        &h,
        COARSE_GRID,
        exec,
    )?;
    Ok(HadamardSynthesis {
        fit,
        success: fit.infidelity <= SYNTHESIS_TOL,
    })
}

/// Best `e^{i delta} (U_Z(theta1) ⊗ U_Z(theta2)) G` approximation of `target`
/// for a two-qubit `G`, on a `grid x grid` start.
pub fn local_z_fit(gate: &GateMatrix, target: &GateMatrix, grid: usize, exec: Execution) -> Result<LocalZFit> {
    if gate.dim() != 4 || target.dim() != 4 {
        return Err(RotorError::DimensionMismatch {
            expected: 4,
            got: if gate.dim() != 4 { gate.dim() } else { target.dim() },
        });
    }
    fit_two_angles(
        |t1, t2| u_z(t1).kron(&u_z(t2)).and_then(|l| l.mul(gate)).expect("4x4"),
        target,
        grid.max(1),
        exec,
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CzSynthesis {
    pub t: f64,
    pub theta1: f64,
    pub theta2: f64,
    pub delta: f64,
    pub infidelity: f64,
}

/// CZ from the exact pair gate at `t*` plus closed-form local Z corrections.
pub fn synthesize_cz(energies: &PairEnergies) -> Result<CzSynthesis> {
    let sol = cz_time(energies)?;
    let gate = two_qubit_phase_gate(energies, sol.t_star, GateMode::Exact)?;
    let assembled = u_z(sol.theta1)
        .kron(&u_z(sol.theta2))?
        .mul(&gate.matrix()?)?
        .scaled(Complex64::from_polar(1.0, sol.global_phase));
    let infidelity = 1.0 - average_gate_fidelity(&assembled, &cz_gate())?;
    Ok(CzSynthesis {
        t: sol.t_star,
        theta1: sol.theta1,
        theta2: sol.theta2,
        delta: sol.global_phase,
        infidelity: infidelity.max(0.0),
    })
}
