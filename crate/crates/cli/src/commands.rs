//! One function per command. Each writes its artifacts and returns, or fails
//! before writing anything except where a partial result is still useful
//! (an invalid gate is written, then reported).

use num_complex::Complex64;
use rotorq_core::algebra::{
    average_gate_fidelity, cz_gate, hadamard, ideal_gates, local_z_fit, pauli_z, standard_identities,
    synthesize_cz, synthesize_hadamard, verify_identity, CzSynthesis, GateMatrix, HadamardSynthesis,
    IdentityReport, LocalZFit,
};
use rotorq_core::analytic::{
    harmonic_approx, physical_estimates, HarmonicApprox, wkb_gamma, wkb_gamma_closed_form, wkb_gamma_physical, PhysicalEstimate,
    TunnelingEstimate,
};
use rotorq_core::dynamics::{cyclicity_check, propagate, CyclicityReport, DEFAULT_CYCLICITY_TOL};
use rotorq_core::gate_lab::{
    calibrate_not, calibrate_partial_not, calibrate_phase, default_phase_windows, extract_unitary, idle_frame,
    measure_probabilities, phase_gate_schedule, prepare_state, project_to_qubit, NotCalibration, OneQubitGate,
    PhaseCalibration, Readout, LEAKAGE_LIMIT,
};
use rotorq_core::rotor::{
    angle_grid, build_hamiltonian, potential_value, to_dimensionless, DimensionlessParams, DimensionlessVoltage,
    PhysicalConstants,
};
use rotorq_core::spectral::{convergence_scan, qubit_basis, solve_spectrum, spectrum_sweep, SweepRequest};
use rotorq_core::two_qubit::{
    cz_time, entangling_phase, pair_energies, pair_report, two_qubit_phase_gate, GateMode, PairEnergies,
};
use rotorq_core::{Execution, RotorError};
use serde::Serialize;

use crate::config::{
    evolution_spec, plateau_params, CzConfig, EstimateConfig, EvolveConfig, GateConfig, GeometryConfig,
    IdentitiesConfig, NotConfig, PhaseConfig, RunConfig, SpectrumConfig, SweepConfig, TunnelingConfig,
    WavefunctionConfig,
};
use crate::output::{Artifacts, MatrixJson};
use crate::CliError;

pub fn dispatch(config: &RunConfig, out: &mut Artifacts, exec: Execution) -> Result<(), CliError> {
    match config {
        RunConfig::Spectrum(c) => spectrum(c, out),
        RunConfig::Sweep(c) => sweep(c, out, exec),
        RunConfig::Wavefunction(c) => wavefunction(c, out),
        RunConfig::Tunneling(c) => tunneling(c, out),
        RunConfig::Estimate(c) => estimate(c, out),
        RunConfig::Evolve(c) => evolve(c, out),
        RunConfig::CalibratePhase(c) => calibrate_phase_cmd(c, out, exec),
        RunConfig::CalibrateNot(c) => calibrate_not_cmd(c, out, exec),
        RunConfig::GateUnitary(c) => gate_unitary(c, out),
        RunConfig::PairReport(c) => pair_report_cmd(c, out),
        RunConfig::CzSynthesis(c) => cz_synthesis(c, out, exec),
        RunConfig::VerifyIdentities(c) => verify_identities(c, out),
    }
}

fn spectrum(c: &SpectrumConfig, out: &mut Artifacts) -> Result<(), CliError> {
    let params = DimensionlessParams::new(c.v1, c.v2)?;
    let h = build_hamiltonian(&params, c.cutoff)?;
    let spec = solve_spectrum(&h)?;
    let residual = spec.max_residual(&h)?;
    let levels = c.levels.min(spec.eigenvalues.len());
    out.csv("spectrum.csv", |w| {
        writeln!(w, "# v1={} v2={} cutoff={}", c.v1, c.v2, c.cutoff)?;
        writeln!(w, "# max_residual={residual:e}")?;
        writeln!(w, "level,eps")?;
        for (k, e) in spec.eigenvalues[..levels].iter().enumerate() {
            writeln!(w, "{k},{e}")?;
        }
        Ok(())
    })?;
    if !c.convergence_cutoffs.is_empty() {
        let rows = convergence_scan(&params, &c.convergence_cutoffs)?;
        out.csv("convergence.csv", |w| {
            writeln!(w, "cutoff,eps0,eps1,delta0,delta1")?;
            for r in &rows {
                writeln!(w, "{},{},{},{},{}", r.cutoff, r.eps0, r.eps1, r.delta0, r.delta1)?;
            }
            Ok(())
        })?;
    }
    Ok(())
}

fn sweep(c: &SweepConfig, out: &mut Artifacts, exec: Execution) -> Result<(), CliError> {
    let req = SweepRequest {
        axis: c.axis,
        lo: c.lo,
        hi: c.hi,
        steps: c.steps,
        fixed: c.fixed,
        cutoff: c.cutoff,
    };
    let table = spectrum_sweep(&req, exec)?;
    out.csv("sweep.csv", |w| {
        writeln!(w, "# axis={:?} fixed={} cutoff={}", c.axis, c.fixed, c.cutoff)?;
        table.write_csv(w)
    })?;
    Ok(())
}

fn wavefunction(c: &WavefunctionConfig, out: &mut Artifacts) -> Result<(), CliError> {
    let params = DimensionlessParams::new(c.v1, c.v2)?;
    let spec = solve_spectrum(&build_hamiltonian(&params, c.cutoff)?)?;
    let (psi0, psi1) = (&spec.eigenvectors[0], &spec.eigenvectors[1]);
    // The Gaussians only exist where the well is confining.
    let h0 = harmonic_approx(0, &params).ok();
    let h1 = harmonic_approx(1, &params).ok();
    let cell = |h: &Option<HarmonicApprox>, phi: f64| match h {
        Some(h) => h.wavefunction(phi).to_string(),
        None => String::new(),
    };
    out.csv("wavefunction.csv", |w| {
        writeln!(w, "# v1={} v2={} cutoff={}", c.v1, c.v2, c.cutoff)?;
        writeln!(w, "# eps0={} eps1={}", spec.eigenvalues[0], spec.eigenvalues[1])?;
        writeln!(w, "phi,potential,psi0,psi1,harmonic0,harmonic1")?;
        for phi in angle_grid(c.points) {
            writeln!(
                w,
                "{phi},{},{},{},{},{}",
                potential_value(phi, &params),
                psi0.evaluate(phi).re,
                psi1.evaluate(phi).re,
                cell(&h0, phi),
                cell(&h1, phi),
            )?;
        }
        Ok(())
    })?;
    Ok(())
}

fn tunneling(c: &TunnelingConfig, out: &mut Artifacts) -> Result<(), CliError> {
    let values: Vec<f64> = if c.steps == 1 {
        vec![c.v2_lo]
    } else {
        (0..c.steps)
            .map(|k| c.v2_lo + (c.v2_hi - c.v2_lo) * k as f64 / (c.steps - 1) as f64)
            .collect()
    };
    let rows = values
        .iter()
        .map(|&v2| Ok((v2, wkb_gamma(v2)?, wkb_gamma_closed_form(v2))))
        .collect::<Result<Vec<_>, RotorError>>()?;
    out.csv("tunneling.csv", |w| {
        writeln!(w, "v2,gamma,gamma_closed_form,rel_error,rate")?;
        for (v2, est, closed) in &rows {
            let rel = (est.gamma - closed).abs() / closed;
            writeln!(w, "{v2},{},{closed},{rel},{}", est.gamma, est.rate)?;
        }
        Ok(())
    })?;
    Ok(())
}

#[derive(Serialize)]
struct VoltageEstimate {
    electrostatics: PhysicalEstimate,
    dimensionless: DimensionlessVoltage,
    tunneling: TunnelingEstimate,
}

#[derive(Serialize)]
struct EstimateReport {
    constants: PhysicalConstants,
    voltages: Vec<VoltageEstimate>,
}

fn estimate(c: &EstimateConfig, out: &mut Artifacts) -> Result<(), CliError> {
    let phys = PhysicalConstants::new(
        c.inertia_kgm2,
        c.hbar_js,
        c.capacitance_f,
        c.permittivity_f_per_m,
        c.plate_area_m2,
        c.plate_gap_m,
    )?;
    let voltages = c
        .voltages_v
        .iter()
        .map(|&v| {
            Ok(VoltageEstimate {
                electrostatics: physical_estimates(&phys, v)?,
                dimensionless: to_dimensionless(&phys, v)?,
                tunneling: wkb_gamma_physical(&phys, v)?,
            })
        })
        .collect::<Result<Vec<_>, RotorError>>()?;
    out.json(
        "estimate.json",
        &EstimateReport {
            constants: phys,
            voltages,
        },
    )?;
    Ok(())
}

#[derive(Serialize)]
struct EvolveReport {
    duration: f64,
    step: f64,
    samples: usize,
    norm_drift: f64,
    plateau: DimensionlessParams,
    initial_bit: u8,
    cyclicity: CyclicityReport,
    final_readout: Readout,
    final_leakage: f64,
}

fn evolve(c: &EvolveConfig, out: &mut Artifacts) -> Result<(), CliError> {
    let spec = evolution_spec(c.v1, c.v2, c.duration, c.step, c.cutoff, c.pulse.as_ref())?
        .with_sample_stride(c.sample_stride.max(1));
    let basis = qubit_basis(&plateau_params(c.v1, c.v2, c.pulse.as_ref())?, c.cutoff)?;
    let cyclicity = cyclicity_check(&spec, c.cyclicity_tol);
    let traj = propagate(&prepare_state(c.initial_bit, &basis)?, &spec)?;
    let last = traj.final_state();
    let leakage = project_to_qubit(last, &basis)?.leakage;
    out.csv("trajectory.csv", |w| traj.write_density_csv(c.grid_points, w))?;
    out.json(
        "evolve.json",
        &EvolveReport {
            duration: c.duration,
            step: c.step,
            samples: traj.times.len(),
            norm_drift: traj.norm_drift,
            plateau: basis.params,
            initial_bit: c.initial_bit,
            cyclicity,
            final_readout: measure_probabilities(last)?,
            final_leakage: leakage,
        },
    )?;
    // Leakage is only meaningful when the pulse returns to the plateau.
    if cyclicity.pass && leakage > LEAKAGE_LIMIT {
        return Err(CliError::Leakage {
            leakage,
            limit: LEAKAGE_LIMIT,
        });
    }
    Ok(())
}

#[derive(Serialize)]
struct PhaseSchedule {
    theta: f64,
    window: f64,
    tau2: f64,
}

#[derive(Serialize)]
struct PhaseReport<'a> {
    calibration: &'a PhaseCalibration,
    schedules: Vec<PhaseSchedule>,
}

fn calibrate_phase_cmd(c: &PhaseConfig, out: &mut Artifacts, exec: Execution) -> Result<(), CliError> {
    let windows = c.windows.clone().unwrap_or_else(default_phase_windows);
    let cal = calibrate_phase(&c.setup(), &windows, exec)?;
    let schedules = c
        .targets
        .iter()
        .map(|&theta| {
            let p = phase_gate_schedule(theta, &cal)?;
            Ok(PhaseSchedule {
                theta,
                window: p.window(),
                tau2: p.tau2,
            })
        })
        .collect::<Result<Vec<_>, RotorError>>()?;
    out.csv("phase_grid.csv", |w| {
        writeln!(w, "# slope={} fit_r2={}", cal.slope, cal.fit_r2)?;
        writeln!(w, "window,theta,leakage,offdiag,edge_deviation")?;
        for p in &cal.grid {
            writeln!(w, "{},{},{},{},{}", p.window, p.theta, p.leakage, p.offdiag, p.edge_deviation)?;
        }
        Ok(())
    })?;
    out.json(
        "phase_calibration.json",
        &PhaseReport {
            calibration: &cal,
            schedules,
        },
    )?;
    Ok(())
}

#[derive(Serialize)]
pub struct GateJson {
    pub matrix: MatrixJson,
    pub leakage_max: f64,
    pub unitarity_residual: f64,
    pub valid: bool,
}

impl From<&OneQubitGate> for GateJson {
    fn from(g: &OneQubitGate) -> Self {
        Self {
            matrix: (&g.matrix).into(),
            leakage_max: g.leakage_max,
            unitarity_residual: g.unitarity_residual,
            valid: g.valid,
        }
    }
}

#[derive(Serialize)]
struct PartialJson {
    target: f64,
    tau2: f64,
    transfer: f64,
    gate: GateJson,
}

#[derive(Serialize)]
struct NotReport<'a> {
    calibration: &'a NotCalibration,
    partial: Vec<PartialJson>,
    hadamard: Option<HadamardSynthesis>,
}

fn calibrate_not_cmd(c: &NotConfig, out: &mut Artifacts, exec: Execution) -> Result<(), CliError> {
    let cal = calibrate_not(&c.setup(), (c.tau2_lo, c.tau2_hi), c.initial_bit, exec)?;
    let partial = c
        .partial_targets
        .iter()
        .map(|&p| calibrate_partial_not(p, &cal))
        .collect::<Result<Vec<_>, RotorError>>()?;
    let hadamard = if c.hadamard {
        let half = calibrate_partial_not(0.5, &cal)?;
        Some(synthesize_hadamard(&half.gate.matrix, exec)?)
    } else {
        None
    };
    out.csv("not_scan.csv", |w| cal.write_scan_csv(w))?;
    out.json(
        "not_calibration.json",
        &NotReport {
            calibration: &cal,
            partial: partial
                .iter()
                .map(|p| PartialJson {
                    target: p.target,
                    tau2: p.tau2,
                    transfer: p.transfer,
                    gate: (&p.gate).into(),
                })
                .collect(),
            hadamard,
        },
    )?;
    Ok(())
}

#[derive(Serialize)]
struct IdealMatch {
    name: &'static str,
    fidelity: f64,
}

#[derive(Serialize)]
struct GateReport {
    duration: f64,
    gate: GateJson,
    /// The gate with the plateau's free evolution removed.
    idle_frame: MatrixJson,
    /// Average gate fidelity of the idle-frame matrix to each ideal gate.
    ideal: Vec<IdealMatch>,
}

fn gate_unitary(c: &GateConfig, out: &mut Artifacts) -> Result<(), CliError> {
    let spec = evolution_spec(c.v1, c.v2, c.duration, c.step, c.cutoff, c.pulse.as_ref())?;
    let basis = qubit_basis(&plateau_params(c.v1, c.v2, c.pulse.as_ref())?, c.cutoff)?;
    let gate = extract_unitary(&spec, &basis, c.cyclicity_tol)?;
    let framed = idle_frame(&gate.matrix, &basis, c.duration)?;
    let ideal = ideal_gates()
        .into_iter()
        .filter(|(_, g)| g.dim() == 2)
        .map(|(name, g)| {
            Ok(IdealMatch {
                name,
                fidelity: average_gate_fidelity(&framed, &g)?,
            })
        })
        .collect::<Result<Vec<_>, RotorError>>()?;
    out.json(
        "gate.json",
        &GateReport {
            duration: c.duration,
            gate: (&gate).into(),
            idle_frame: (&framed).into(),
            ideal,
        },
    )?;
    if !gate.valid {
        return Err(CliError::Leakage {
            leakage: gate.leakage_max,
            limit: LEAKAGE_LIMIT,
        });
    }
    Ok(())
}

fn pair_report_cmd(c: &GeometryConfig, out: &mut Artifacts) -> Result<(), CliError> {
    out.json("pair_report.json", &pair_report(&c.geometry()?)?)?;
    Ok(())
}

#[derive(Serialize)]
struct ApproxFloor {
    /// Entangling phase of the approximate gate at `t*`.
    chi: f64,
    best_cz: LocalZFit,
}

#[derive(Serialize)]
struct CzReport {
    energies: PairEnergies,
    exact: CzSynthesis,
    exact_chi: f64,
    first_order: ApproxFloor,
}

fn cz_synthesis(c: &CzConfig, out: &mut Artifacts, exec: Execution) -> Result<(), CliError> {
    let energies = pair_energies(&c.geometry()?)?;
    let exact = synthesize_cz(&energies)?;
    let t = cz_time(&energies)?.t_star;
    let exact_gate = two_qubit_phase_gate(&energies, t, GateMode::Exact)?.matrix()?;
    let approx = two_qubit_phase_gate(&energies, t, GateMode::FirstOrder)?.matrix()?;
    out.json(
        "cz_synthesis.json",
        &CzReport {
            energies,
            exact,
            exact_chi: entangling_phase(&exact_gate)?,
            first_order: ApproxFloor {
                chi: entangling_phase(&approx)?,
                best_cz: local_z_fit(&approx, &cz_gate(), c.grid, exec)?,
            },
        },
    )?;
    Ok(())
}

#[derive(Serialize)]
struct SimulatedNot {
    tau2: f64,
    gate: GateJson,
    idle_frame: MatrixJson,
    identity: IdentityReport,
}

#[derive(Serialize)]
struct IdentitiesReport {
    identities: Vec<IdentityReport>,
    /// Same as the second identity with the simulated NOT in place of X.
    simulated_not: Option<SimulatedNot>,
}

fn verify_identities(c: &IdentitiesConfig, out: &mut Artifacts) -> Result<(), CliError> {
    let simulated_not = match c.simulated_not_tau2 {
        Some(tau2) => {
            let setup = c.not_setup();
            let basis = setup.basis()?;
            let spec = setup.spec(tau2)?;
            let gate = extract_unitary(&spec, &basis, DEFAULT_CYCLICITY_TOL)?;
            let framed = idle_frame(&gate.matrix, &basis, setup.duration)?;
            let seq = [
                GateMatrix::scalar(Complex64::new(0.0, -1.0), 2)?,
                pauli_z(),
                framed.clone(),
                pauli_z(),
            ];
            let identity = verify_identity("-i Z NOT_sim Z", &seq, "H", &hadamard())?;
            Some(SimulatedNot {
                tau2,
                gate: (&gate).into(),
                idle_frame: (&framed).into(),
                identity,
            })
        }
        None => None,
    };
    out.json(
        "identities.json",
        &IdentitiesReport {
            identities: standard_identities(),
            simulated_not,
        },
    )?;
    Ok(())
}
