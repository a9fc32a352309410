//! Stationary spectrum of the rotor and the qubit basis built from its lowest
//! doublet.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::io::{self, Write};

use nalgebra::SymmetricEigen;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, RotorError};
use crate::exec::Execution;
use crate::rotor::{build_hamiltonian, DimensionlessParams, FourierState, OperatorMatrix};

/// Eigenpairs in ascending order of energy.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<FourierState>,
}

impl Spectrum {
    /// Largest `||H v - e v||` over all pairs.
    pub fn max_residual(&self, matrix: &OperatorMatrix) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for (e, v) in self.eigenvalues.iter().zip(&self.eigenvectors) {
            let hv = matrix.apply(v)?;
            let r = (hv.amps() - v.amps().map(|a| a * *e)).norm();
            worst = worst.max(r);
        }
        Ok(worst)
    }
}

/// Dense symmetric diagonalization, eigenvalues ascending.
///
/// Eigenvectors are real; each is signed so that its largest component is
/// positive.
pub fn solve_spectrum(matrix: &OperatorMatrix) -> Result<Spectrum> {
    let cutoff = matrix.cutoff();
    let eig = SymmetricEigen::new(matrix.entries().clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let mut eigenvalues = Vec::with_capacity(order.len());
    let mut eigenvectors = Vec::with_capacity(order.len());
    for k in order {
        let col = eig.eigenvectors.column(k);
        let pivot = col.iamax();
        let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        let amps: Vec<f64> = col.iter().map(|x| sign * x).collect();
        eigenvalues.push(eig.eigenvalues[k]);
        eigenvectors.push(FourierState::from_real(cutoff, &amps)?);
    }
    Ok(Spectrum {
        eigenvalues,
        eigenvectors,
    })
}

/// Below this `v1` the lowest doublet is treated as exactly degenerate.
pub const TIE_THRESHOLD: f64 = 1e-8;

/// A qubit subspace requires `eps2 - eps1 > GAP_RATIO * (eps1 - eps0)`.
pub const GAP_RATIO: f64 = 3.0;

/// Localized computational states spanning the lowest doublet.
#[derive(Clone, Debug)]
pub struct QubitBasis {
    /// Localized at `phi = 0`, with `psi(0)` real positive.
    pub state0: FourierState,
    /// Localized at `phi = pi`, with `psi(pi)` real positive.
    pub state1: FourierState,
    /// `<state_q|H|state_q>` for q = 0, 1.
    pub energies: [f64; 2],
    /// `eps2 - eps1`.
    pub gap_to_rest: f64,
    /// True when the states were built as `(psi+ +- psi-)/sqrt 2`.
    pub degenerate: bool,
    pub params: DimensionlessParams,
}

impl QubitBasis {
    pub fn cutoff(&self) -> usize {
        self.state0.cutoff()
    }

    pub fn state(&self, bit: u8) -> &FourierState {
        if bit == 0 {
            &self.state0
        } else {
            &self.state1
        }
    }
}

pub fn qubit_basis(params: &DimensionlessParams, cutoff: usize) -> Result<QubitBasis> {
    if params.v2() <= 0.0 {
        return Err(RotorError::invalid("v2", "a qubit needs a confining cos 2phi term (v2 > 0)"));
    }
    let h = build_hamiltonian(params, cutoff)?;
    let spec = solve_spectrum(&h)?;
    let e = &spec.eigenvalues;
    let splitting = e[1] - e[0];
    let gap_rest = e[2] - e[1];
    if gap_rest <= GAP_RATIO * splitting {
        return Err(RotorError::NoQubitSubspace {
            splitting,
            gap_rest,
            ratio: GAP_RATIO,
        });
    }

    let lower = &spec.eigenvectors[0];
    let upper = &spec.eigenvectors[1];
    let degenerate = params.v1() < TIE_THRESHOLD;
    let (state0, state1) = if degenerate {
        let plus = sign_at(lower, 0.0);
        let minus = sign_at(upper, 0.0);
        let r = Complex64::new(FRAC_1_SQRT_2, 0.0);
        (
            FourierState::superpose(&[(r, &plus), (r, &minus)])?,
            FourierState::superpose(&[(r, &plus), (-r, &minus)])?,
        )
    } else {
        let localization = |s: &FourierState| s.evaluate(0.0).norm() - s.evaluate(PI).norm();
        let (a, b) = if localization(lower) >= localization(upper) {
            (lower, upper)
        } else {
            (upper, lower)
        };
        (sign_at(a, 0.0), sign_at(b, PI))
    };

    let energies = [expectation(&h, &state0)?, expectation(&h, &state1)?];
    Ok(QubitBasis {
        state0,
        state1,
        energies,
        gap_to_rest: gap_rest,
        degenerate,
        params: *params,
    })
}

/// Multiply by a phase making `psi(phi)` real and non-negative.
fn sign_at(state: &FourierState, phi: f64) -> FourierState {
    let v = state.evaluate(phi);
    if v.norm() == 0.0 {
        return state.clone();
    }
    state.scaled(v.conj() / v.norm())
}

fn expectation(h: &OperatorMatrix, s: &FourierState) -> Result<f64> {
    Ok(s.inner(&h.apply(s)?)?.re)
}

/// `(N, eps0, eps1)` for each cutoff, with deviations from the largest one.
#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceRow {
    pub cutoff: usize,
    pub eps0: f64,
    pub eps1: f64,
    pub delta0: f64,
    pub delta1: f64,
}

pub fn convergence_scan(params: &DimensionlessParams, cutoffs: &[usize]) -> Result<Vec<ConvergenceRow>> {
    if cutoffs.is_empty() {
        return Err(RotorError::invalid("cutoffs", "empty list"));
    }
    if cutoffs.windows(2).any(|w| w[0] >= w[1]) {
        return Err(RotorError::invalid("cutoffs", "must be strictly ascending"));
    }
    let lowest = cutoffs
        .iter()
        .map(|&n| {
            let s = solve_spectrum(&build_hamiltonian(params, n)?)?;
            Ok((n, s.eigenvalues[0], s.eigenvalues[1]))
        })
        .collect::<Result<Vec<_>>>()?;
    let &(_, ref0, ref1) = lowest.last().expect("non-empty");
    Ok(lowest
        .into_iter()
        .map(|(cutoff, eps0, eps1)| ConvergenceRow {
            cutoff,
            eps0,
            eps1,
            delta0: (eps0 - ref0).abs(),
            delta1: (eps1 - ref1).abs(),
        })
        .collect())
}

/// Number of levels reported per sweep point.
pub const SWEEP_LEVELS: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepAxis {
    V1,
    V2,
}

#[derive(Clone, Copy, Debug)]
pub struct SweepRequest {
    pub axis: SweepAxis,
    pub lo: f64,
    pub hi: f64,
    pub steps: usize,
    /// Value of the parameter that is not swept.
    pub fixed: f64,
    pub cutoff: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub levels: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepTable {
    pub axis: SweepAxis,
    pub fixed: f64,
    pub cutoff: usize,
    pub rows: Vec<SweepRow>,
}

impl SweepRequest {
    pub fn values(&self) -> Vec<f64> {
        let span = self.hi - self.lo;
        (0..self.steps)
            .map(|k| self.lo + span * k as f64 / (self.steps - 1) as f64)
            .collect()
    }

    pub fn params_at(&self, value: f64) -> Result<DimensionlessParams> {
        match self.axis {
            SweepAxis::V1 => DimensionlessParams::new(value, self.fixed),
            SweepAxis::V2 => DimensionlessParams::new(self.fixed, value),
        }
    }
}

/// Lowest [`SWEEP_LEVELS`] eigenvalues along one parameter axis.
pub fn spectrum_sweep(req: &SweepRequest, exec: Execution) -> Result<SweepTable> {
    if req.steps < 2 {
        return Err(RotorError::invalid("steps", "a sweep needs at least 2 points"));
    }
    if !(req.lo.is_finite() && req.hi.is_finite() && req.lo < req.hi) {
        return Err(RotorError::invalid("range", "need finite lo < hi"));
    }
    if 2 * req.cutoff + 1 < SWEEP_LEVELS {
        return Err(RotorError::CutoffTooSmall {
            min: SWEEP_LEVELS / 2,
            got: req.cutoff,
        });
    }
    let rows = exec.try_map(&req.values(), |&value| {
        let params = req.params_at(value)?;
        let spec = solve_spectrum(&build_hamiltonian(&params, req.cutoff)?)?;
        Ok::<_, RotorError>(SweepRow {
            value,
            levels: spec.eigenvalues[..SWEEP_LEVELS].to_vec(),
        })
    })?;
    Ok(SweepTable {
        axis: req.axis,
        fixed: req.fixed,
        cutoff: req.cutoff,
        rows,
    })
}

impl SweepTable {
    /// Columns `sweep_value, eps0..eps9`; a `# lowest_two` line marks the
    /// qubit doublet columns.
    pub fn write_csv<W: Write + ?Sized>(&self, out: &mut W) -> io::Result<()> {
        writeln!(out, "# lowest_two=eps0,eps1")?;
        write!(out, "sweep_value")?;
        for k in 0..SWEEP_LEVELS {
            write!(out, ",eps{k}")?;
        }
        writeln!(out)?;
        for row in &self.rows {
            write!(out, "{}", row.value)?;
            for e in &row.levels {
                write!(out, ",{e}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}
