//! Run configuration: one JSON object per run, keyed by `command`.
//!
//! Unknown keys are rejected, and physical quantities must carry their unit in
//! the key (`ell_m`, `v12_v`, `capacitance_f`, ...). Dimensionless model
//! parameters (`v1`, `tau1`, `duration`, ...) are bare.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::fs;
use std::path::Path;

use clap::ValueEnum;
use rotorq_core::dynamics::{EvolutionSpec, Knob, PulseProfile, DEFAULT_CYCLICITY_TOL, DEFAULT_STEP};
use rotorq_core::gate_lab::{NotSetup, PhaseSetup};
use rotorq_core::rotor::{DimensionlessParams, PhysicalConstants, DEFAULT_CUTOFF, HBAR, VACUUM_PERMITTIVITY};
use rotorq_core::spectral::SweepAxis;
use rotorq_core::two_qubit::PairGeometry;
use rotorq_core::RotorError;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use serde_path_to_error::Segment;
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Spectrum,
    Sweep,
    Wavefunction,
    Tunneling,
    Estimate,
    Evolve,
    CalibratePhase,
    CalibrateNot,
    GateUnitary,
    PairReport,
    CzSynthesis,
    VerifyIdentities,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::Sweep => "sweep",
            Command::Wavefunction => "wavefunction",
            Command::Tunneling => "tunneling",
            Command::Estimate => "estimate",
            Command::Evolve => "evolve",
            Command::CalibratePhase => "calibrate-phase",
            Command::CalibrateNot => "calibrate-not",
            Command::GateUnitary => "gate-unitary",
            Command::PairReport => "pair-report",
            Command::CzSynthesis => "cz-synthesis",
            Command::VerifyIdentities => "verify-identities",
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("cannot read {path}: {message}")]
    Read { path: String, message: String },
    #[error("line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("config must be a JSON object")]
    NotAnObject,
    #[error("config names command `{found}` but `{expected}` was requested")]
    CommandMismatch { expected: String, found: String },
    #[error("unknown command `{0}`")]
    UnknownCommand(String),
    #[error("unknown key `{key}`{}", at_line(*line))]
    UnknownKey { key: String, line: Option<usize> },
    #[error("key `{key}` needs a unit suffix, e.g. `{suggestion}`{}", at_line(*line))]
    UnitSuffix {
        key: String,
        suggestion: String,
        line: Option<usize>,
    },
    #[error("invalid value for `{key}`{}: {message}", at_line(*line))]
    Invalid {
        key: String,
        line: Option<usize>,
        message: String,
    },
}

fn at_line(line: Option<usize>) -> String {
    line.map(|l| format!(" (line {l})")).unwrap_or_default()
}

impl ConfigError {
    pub fn kind(&self) -> &'static str {
        match self {
            ConfigError::Read { .. } => "config_read",
            ConfigError::Parse { .. } => "config_parse",
            ConfigError::NotAnObject | ConfigError::CommandMismatch { .. } | ConfigError::UnknownCommand(_) => {
                "config_command"
            }
            ConfigError::UnknownKey { .. } => "unknown_key",
            ConfigError::UnitSuffix { .. } => "unit_suffix",
            ConfigError::Invalid { .. } => "invalid_value",
        }
    }

    pub fn key(&self) -> Option<&str> {
        match self {
            ConfigError::UnknownKey { key, .. } | ConfigError::UnitSuffix { key, .. } | ConfigError::Invalid { key, .. } => {
                Some(key)
            }
            _ => None,
        }
    }

    pub fn line(&self) -> Option<usize> {
        match self {
            ConfigError::Parse { line, .. } => Some(*line),
            ConfigError::UnknownKey { line, .. }
            | ConfigError::UnitSuffix { line, .. }
            | ConfigError::Invalid { line, .. } => *line,
            _ => None,
        }
    }
}

/// Bare names of physical quantities and the suffixed key expected instead.
const UNIT_KEYS: &[(&str, &str)] = &[
    ("ell", "ell_m"),
    ("radius", "radius_m"),
    ("area", "area_m2"),
    ("plate_area", "plate_area_m2"),
    ("plate_gap", "plate_gap_m"),
    ("gap", "plate_gap_m"),
    ("v12", "v12_v"),
    ("voltage", "voltage_v"),
    ("voltages", "voltages_v"),
    ("volts", "voltages_v"),
    ("capacitance", "capacitance_f"),
    ("inertia", "inertia_kgm2"),
    ("permittivity", "permittivity_f_per_m"),
    ("hbar", "hbar_js"),
    ("time", "t_s"),
    ("t", "t_s"),
    ("energy", "energy_j"),
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum RunConfig {
    Spectrum(SpectrumConfig),
    Sweep(SweepConfig),
    Wavefunction(WavefunctionConfig),
    Tunneling(TunnelingConfig),
    Estimate(EstimateConfig),
    Evolve(EvolveConfig),
    CalibratePhase(PhaseConfig),
    CalibrateNot(NotConfig),
    GateUnitary(GateConfig),
    PairReport(GeometryConfig),
    CzSynthesis(CzConfig),
    VerifyIdentities(IdentitiesConfig),
}

fn default_cutoff() -> usize {
    DEFAULT_CUTOFF
}
fn default_step() -> f64 {
    DEFAULT_STEP
}
fn default_tol() -> f64 {
    DEFAULT_CYCLICITY_TOL
}
fn default_levels() -> usize {
    10
}
fn default_points() -> usize {
    256
}
fn default_v2() -> f64 {
    20.0
}
fn default_one() -> f64 {
    1.0
}
fn default_tau1() -> f64 {
    4.0
}
fn default_tsmooth() -> f64 {
    2.0
}
fn default_phase_duration() -> f64 {
    10.0
}
fn default_not_duration() -> f64 {
    20.0
}
fn default_tau2_hi() -> f64 {
    16.0
}
fn default_stride() -> usize {
    100
}
fn default_grid() -> usize {
    64
}
fn default_phase_targets() -> Vec<f64> {
    vec![FRAC_PI_4, FRAC_PI_2, PI]
}
fn default_voltages() -> Vec<f64> {
    vec![1e-3, 0.1]
}
fn default_inertia() -> f64 {
    PhysicalConstants::nanotube_defaults().inertia
}
fn default_capacitance() -> f64 {
    PhysicalConstants::nanotube_defaults().capacitance
}
fn default_plate_area() -> f64 {
    PhysicalConstants::nanotube_defaults().plate_area
}
fn default_plate_gap() -> f64 {
    PhysicalConstants::nanotube_defaults().plate_gap
}
fn default_permittivity() -> f64 {
    VACUUM_PERMITTIVITY
}
fn default_hbar() -> f64 {
    HBAR
}
fn default_wkb_lo() -> f64 {
    1.0
}
fn default_wkb_hi() -> f64 {
    100.0
}
fn default_wkb_steps() -> usize {
    100
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    #[serde(default)]
    pub v1: f64,
    pub v2: f64,
    #[serde(default = "default_cutoff")]
    pub cutoff: usize,
    #[serde(default = "default_levels")]
    pub levels: usize,
    /// Also tabulate the lowest two levels against these cutoffs.
    #[serde(default)]
    pub convergence_cutoffs: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub axis: SweepAxis,
    pub lo: f64,
    pub hi: f64,
    pub steps: usize,
    /// Value of the other parameter.
    #[serde(default)]
    pub fixed: f64,
    #[serde(default = "default_cutoff")]
    pub cutoff: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WavefunctionConfig {
    #[serde(default)]
    pub v1: f64,
    pub v2: f64,
    #[serde(default = "default_cutoff")]
    pub cutoff: usize,
    #[serde(default = "default_points")]
    pub points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TunnelingConfig {
    #[serde(default = "default_wkb_lo")]
    pub v2_lo: f64,
    #[serde(default = "default_wkb_hi")]
    pub v2_hi: f64,
    #[serde(default = "default_wkb_steps")]
    pub steps: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateConfig {
    #[serde(default = "default_inertia")]
    pub inertia_kgm2: f64,
    #[serde(default = "default_hbar")]
    pub hbar_js: f64,
    #[serde(default = "default_capacitance")]
    pub capacitance_f: f64,
    #[serde(default = "default_permittivity")]
    pub permittivity_f_per_m: f64,
    #[serde(default = "default_plate_area")]
    pub plate_area_m2: f64,
    #[serde(default = "default_plate_gap")]
    pub plate_gap_m: f64,
    #[serde(default = "default_voltages")]
    pub voltages_v: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseConfig {
    pub knob: Knob,
    pub vbar: f64,
    pub tau1: f64,
    pub tau2: f64,
    pub tsmooth: f64,
}

impl PulseConfig {
    pub fn profile(&self) -> Result<PulseProfile, RotorError> {
        PulseProfile::new(self.knob, self.vbar, self.tau1, self.tau2, self.tsmooth)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveConfig {
    #[serde(default)]
    pub v1: f64,
    pub v2: f64,
    pub duration: f64,
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default = "default_cutoff")]
    pub cutoff: usize,
    #[serde(default)]
    pub pulse: Option<PulseConfig>,
    #[serde(default)]
    pub initial_bit: u8,
    #[serde(default = "default_stride")]
    pub sample_stride: usize,
    #[serde(default = "default_points")]
    pub grid_points: usize,
    #[serde(default = "default_tol")]
    pub cyclicity_tol: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseConfig {
    #[serde(default = "default_v2")]
    pub v2: f64,
    #[serde(default = "default_one")]
    pub vbar1: f64,
    #[serde(default = "default_tau1")]
    pub tau1: f64,
    #[serde(default = "default_tsmooth")]
    pub tsmooth: f64,
    #[serde(default = "default_phase_duration")]
    pub duration: f64,
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default = "default_cutoff")]
    pub cutoff: usize,
    /// Defaults to `0.41 p` for `p = 0..=8`.
    #[serde(default)]
    pub windows: Option<Vec<f64>>,
    /// Phase-gate angles to schedule from the fit.
    #[serde(default = "default_phase_targets")]
    pub targets: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NotConfig {
    #[serde(default = "default_v2")]
    pub vbar2: f64,
    #[serde(default)]
    pub v1: f64,
    #[serde(default = "default_tau1")]
    pub tau1: f64,
    #[serde(default = "default_tsmooth")]
    pub tsmooth: f64,
    #[serde(default = "default_not_duration")]
    pub duration: f64,
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default = "default_cutoff")]
    pub cutoff: usize,
    #[serde(default = "default_tau1")]
    pub tau2_lo: f64,
    #[serde(default = "default_tau2_hi")]
    pub tau2_hi: f64,
    #[serde(default)]
    pub initial_bit: u8,
    /// Transfer populations to calibrate partial NOTs for.
    #[serde(default)]
    pub partial_targets: Vec<f64>,
    /// Synthesize a Hadamard from the `p = 0.5` partial NOT.
    #[serde(default)]
    pub hadamard: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateConfig {
    #[serde(default)]
    pub v1: f64,
    pub v2: f64,
    pub duration: f64,
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default = "default_cutoff")]
    pub cutoff: usize,
    #[serde(default)]
    pub pulse: Option<PulseConfig>,
    #[serde(default = "default_tol")]
    pub cyclicity_tol: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub ell_m: f64,
    pub radius_m: f64,
    pub area_m2: f64,
    pub v12_v: f64,
    #[serde(default = "default_permittivity")]
    pub permittivity_f_per_m: f64,
}

impl GeometryConfig {
    pub fn geometry(&self) -> Result<PairGeometry, RotorError> {
        PairGeometry::new(self.ell_m, self.radius_m, self.area_m2, self.permittivity_f_per_m, self.v12_v)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CzConfig {
    pub ell_m: f64,
    pub radius_m: f64,
    pub area_m2: f64,
    pub v12_v: f64,
    #[serde(default = "default_permittivity")]
    pub permittivity_f_per_m: f64,
    /// Coarse grid per angle for the best local-Z correction of the
    /// approximate gate.
    #[serde(default = "default_grid")]
    pub grid: usize,
}

impl CzConfig {
    pub fn geometry(&self) -> Result<PairGeometry, RotorError> {
        PairGeometry::new(self.ell_m, self.radius_m, self.area_m2, self.permittivity_f_per_m, self.v12_v)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentitiesConfig {
    /// Also check the Z-NOT-Z route with a simulated NOT at this `tau2`
    /// (remaining pulse parameters at their NOT defaults).
    #[serde(default)]
    pub simulated_not_tau2: Option<f64>,
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default = "default_cutoff")]
    pub cutoff: usize,
}

impl IdentitiesConfig {
    pub fn not_setup(&self) -> NotSetup {
        NotSetup {
            step: self.step,
            cutoff: self.cutoff,
            ..NotSetup::default()
        }
    }
}

impl NotConfig {
    pub fn setup(&self) -> NotSetup {
        NotSetup {
            vbar2: self.vbar2,
            v1: self.v1,
            tau1: self.tau1,
            tsmooth: self.tsmooth,
            duration: self.duration,
            step: self.step,
            cutoff: self.cutoff,
        }
    }
}

impl PhaseConfig {
    pub fn setup(&self) -> PhaseSetup {
        PhaseSetup {
            v2: self.v2,
            vbar1: self.vbar1,
            tau1: self.tau1,
            tsmooth: self.tsmooth,
            duration: self.duration,
            step: self.step,
            cutoff: self.cutoff,
        }
    }
}

/// Schedule shared by `evolve` and `gate-unitary`.
pub fn evolution_spec(
    v1: f64,
    v2: f64,
    duration: f64,
    step: f64,
    cutoff: usize,
    pulse: Option<&PulseConfig>,
) -> Result<EvolutionSpec, RotorError> {
    let pulses = pulse.map(|p| p.profile()).transpose()?.into_iter().collect();
    EvolutionSpec::new(duration, step, pulses, DimensionlessParams::new(v1, v2)?, cutoff)
}

/// Knob values on the pulse plateau, where the qubit basis is defined.
pub fn plateau_params(v1: f64, v2: f64, pulse: Option<&PulseConfig>) -> Result<DimensionlessParams, RotorError> {
    match pulse {
        Some(p) if p.knob == Knob::V1 => DimensionlessParams::new(p.vbar, v2),
        Some(p) => DimensionlessParams::new(v1, p.vbar),
        None => DimensionlessParams::new(v1, v2),
    }
}

impl RunConfig {
    pub fn command(&self) -> Command {
        match self {
            RunConfig::Spectrum(_) => Command::Spectrum,
            RunConfig::Sweep(_) => Command::Sweep,
            RunConfig::Wavefunction(_) => Command::Wavefunction,
            RunConfig::Tunneling(_) => Command::Tunneling,
            RunConfig::Estimate(_) => Command::Estimate,
            RunConfig::Evolve(_) => Command::Evolve,
            RunConfig::CalibratePhase(_) => Command::CalibratePhase,
            RunConfig::CalibrateNot(_) => Command::CalibrateNot,
            RunConfig::GateUnitary(_) => Command::GateUnitary,
            RunConfig::PairReport(_) => Command::PairReport,
            RunConfig::CzSynthesis(_) => Command::CzSynthesis,
            RunConfig::VerifyIdentities(_) => Command::VerifyIdentities,
        }
    }

    /// Cheap checks that build the core parameter types without running
    /// anything expensive.
    pub fn validate(&self) -> Result<(), RotorError> {
        let cutoff_ok = |n: usize| {
            if n < 1 {
                Err(RotorError::CutoffTooSmall { min: 1, got: n })
            } else {
                Ok(())
            }
        };
        match self {
            RunConfig::Spectrum(c) => {
                DimensionlessParams::new(c.v1, c.v2)?;
                cutoff_ok(c.cutoff)?;
                if c.convergence_cutoffs.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(RotorError::invalid_key("convergence_cutoffs", "must be strictly ascending"));
                }
            }
            RunConfig::Sweep(c) => {
                cutoff_ok(c.cutoff)?;
                if c.steps < 2 {
                    return Err(RotorError::invalid_key("steps", "a sweep needs at least 2 points"));
                }
                if !(c.lo.is_finite() && c.hi.is_finite() && c.lo < c.hi) {
                    return Err(RotorError::invalid_key("hi", "range must satisfy lo < hi"));
                }
                let (v1, v2) = match c.axis {
                    SweepAxis::V1 => (c.lo, c.fixed),
                    SweepAxis::V2 => (c.fixed, c.lo),
                };
                DimensionlessParams::new(v1, v2)?;
            }
            RunConfig::Wavefunction(c) => {
                DimensionlessParams::new(c.v1, c.v2)?;
                cutoff_ok(c.cutoff)?;
                if c.points < 2 {
                    return Err(RotorError::invalid_key("points", "need at least 2 grid points"));
                }
            }
            RunConfig::Tunneling(c) => {
                if !(c.v2_lo > 0.0 && c.v2_lo <= c.v2_hi && c.v2_hi.is_finite()) {
                    return Err(RotorError::invalid_key("v2_lo", "range must satisfy 0 < v2_lo <= v2_hi"));
                }
                if c.steps < 1 {
                    return Err(RotorError::invalid_key("steps", "need at least 1 point"));
                }
            }
            RunConfig::Estimate(c) => {
                PhysicalConstants::new(
                    c.inertia_kgm2,
                    c.hbar_js,
                    c.capacitance_f,
                    c.permittivity_f_per_m,
                    c.plate_area_m2,
                    c.plate_gap_m,
                )?;
                if c.voltages_v.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                    return Err(RotorError::invalid_key("voltages_v", "voltages must be positive"));
                }
            }
            RunConfig::Evolve(c) => {
                evolution_spec(c.v1, c.v2, c.duration, c.step, c.cutoff, c.pulse.as_ref())?;
                plateau_params(c.v1, c.v2, c.pulse.as_ref())?;
                if c.initial_bit > 1 {
                    return Err(RotorError::invalid_key("initial_bit", "must be 0 or 1"));
                }
                if c.grid_points < 2 {
                    return Err(RotorError::invalid_key("grid_points", "need at least 2 grid points"));
                }
            }
            RunConfig::CalibratePhase(c) => {
                c.setup().spec(0.0)?;
            }
            RunConfig::CalibrateNot(c) => {
                c.setup().spec(c.tau2_hi.max(c.tau1))?;
                if c.initial_bit > 1 {
                    return Err(RotorError::invalid_key("initial_bit", "must be 0 or 1"));
                }
                if c.partial_targets.iter().any(|p| !(0.0..=1.0).contains(p)) {
                    return Err(RotorError::invalid_key("partial_targets", "populations must lie in [0, 1]"));
                }
                if (c.hadamard || !c.partial_targets.is_empty()) && c.initial_bit != 0 {
                    return Err(RotorError::invalid_key("initial_bit", "partial NOTs need a scan from bit 0"));
                }
            }
            RunConfig::GateUnitary(c) => {
                evolution_spec(c.v1, c.v2, c.duration, c.step, c.cutoff, c.pulse.as_ref())?;
                plateau_params(c.v1, c.v2, c.pulse.as_ref())?;
            }
            RunConfig::PairReport(c) => {
                c.geometry()?;
            }
            RunConfig::CzSynthesis(c) => {
                c.geometry()?;
                if c.grid < 1 {
                    return Err(RotorError::invalid_key("grid", "must be >= 1"));
                }
            }
            RunConfig::VerifyIdentities(c) => {
                if let Some(t) = c.simulated_not_tau2 {
                    c.not_setup().spec(t)?;
                }
            }
        }
        Ok(())
    }
}

trait InvalidKey {
    fn invalid_key(name: &'static str, reason: &str) -> RotorError;
}

impl InvalidKey for RotorError {
    fn invalid_key(name: &'static str, reason: &str) -> RotorError {
        RotorError::InvalidParameter {
            name,
            reason: reason.to_string(),
        }
    }
}

/// 1-based line of the first `"key":` in `text`.
pub fn key_line(text: &str, key: &str) -> Option<usize> {
    let needle = format!("\"{key}\"");
    let mut from = 0;
    while let Some(pos) = text[from..].find(&needle) {
        let at = from + pos;
        let rest = text[at + needle.len()..].trim_start();
        if rest.starts_with(':') {
            return Some(text[..at].matches('\n').count() + 1);
        }
        from = at + needle.len();
    }
    None
}

/// Config key for a parameter name reported by the core library.
fn config_key(name: &str) -> &str {
    match name {
        "radius" => "radius_m",
        "ell" => "ell_m",
        "area" => "area_m2",
        "v12" => "v12_v",
        "permittivity" => "permittivity_f_per_m",
        "inertia" => "inertia_kgm2",
        "hbar" => "hbar_js",
        "capacitance" => "capacitance_f",
        "plate_area" => "plate_area_m2",
        "plate_gap" => "plate_gap_m",
        "volts" => "voltages_v",
        other => other,
    }
}

fn check_units(value: &Value, text: &str) -> Result<(), ConfigError> {
    match value {
        Value::Object(map) => {
            for (k, v) in map {
                if let Some((_, suggestion)) = UNIT_KEYS.iter().find(|(bare, _)| bare == k) {
                    return Err(ConfigError::UnitSuffix {
                        key: k.clone(),
                        suggestion: suggestion.to_string(),
                        line: key_line(text, k),
                    });
                }
                check_units(v, text)?;
            }
            Ok(())
        }
        Value::Array(items) => items.iter().try_for_each(|v| check_units(v, text)),
        _ => Ok(()),
    }
}

// Straight into the per-command struct: going through the tagged enum would
// buffer the content and lose the error path.
fn deserialize_for(command: Command, value: Value) -> Result<RunConfig, serde_path_to_error::Error<serde_json::Error>> {
    use serde_path_to_error::deserialize as de;
    Ok(match command {
        Command::Spectrum => RunConfig::Spectrum(de(value)?),
        Command::Sweep => RunConfig::Sweep(de(value)?),
        Command::Wavefunction => RunConfig::Wavefunction(de(value)?),
        Command::Tunneling => RunConfig::Tunneling(de(value)?),
        Command::Estimate => RunConfig::Estimate(de(value)?),
        Command::Evolve => RunConfig::Evolve(de(value)?),
        Command::CalibratePhase => RunConfig::CalibratePhase(de(value)?),
        Command::CalibrateNot => RunConfig::CalibrateNot(de(value)?),
        Command::GateUnitary => RunConfig::GateUnitary(de(value)?),
        Command::PairReport => RunConfig::PairReport(de(value)?),
        Command::CzSynthesis => RunConfig::CzSynthesis(de(value)?),
        Command::VerifyIdentities => RunConfig::VerifyIdentities(de(value)?),
    })
}

/// Parses and validates a config. When `expected` is given, a missing
/// `command` key is filled from it and a different one is rejected.
pub fn parse_config(text: &str, expected: Option<Command>) -> Result<RunConfig, ConfigError> {
    let mut value: Value = serde_json::from_str(text).map_err(|e| ConfigError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let map = value.as_object_mut().ok_or(ConfigError::NotAnObject)?;
    let command = match (map.remove("command"), expected) {
        (None, Some(cmd)) => cmd,
        (None, None) => {
            return Err(ConfigError::Invalid {
                key: "command".into(),
                line: None,
                message: "missing".into(),
            })
        }
        (Some(Value::String(found)), expected) => {
            let cmd = Command::from_str(&found, false).map_err(|_| ConfigError::UnknownCommand(found.clone()))?;
            match expected {
                Some(e) if e != cmd => {
                    return Err(ConfigError::CommandMismatch {
                        expected: e.name().into(),
                        found,
                    })
                }
                _ => cmd,
            }
        }
        (Some(_), _) => {
            return Err(ConfigError::Invalid {
                key: "command".into(),
                line: key_line(text, "command"),
                message: "must be a string".into(),
            })
        }
    };
    check_units(&value, text)?;

    let config = deserialize_for(command, value).map_err(|e| {
        let key = e
            .path()
            .iter()
            .filter_map(|s| match s {
                Segment::Map { key } => Some(key.clone()),
                _ => None,
            })
            .next_back();
        let message = e.inner().to_string();
        if let Some(unknown) = message.strip_prefix("unknown field `").and_then(|m| m.split('`').next()) {
            return ConfigError::UnknownKey {
                key: unknown.to_string(),
                line: key_line(text, unknown),
            };
        }
        let key = key.or_else(|| {
            message
                .strip_prefix("missing field `")
                .and_then(|m| m.split('`').next())
                .map(str::to_string)
        });
        let key = key.unwrap_or_else(|| "config".into());
        ConfigError::Invalid {
            line: key_line(text, &key),
            key,
            message,
        }
    })?;

    config.validate().map_err(|e| {
        let key = match &e {
            RotorError::InvalidParameter { name, .. } => config_key(name).to_string(),
            RotorError::CutoffTooSmall { .. } => "cutoff".into(),
            RotorError::DivergentGeometry { .. } => "radius_m".into(),
            _ => "config".into(),
        };
        ConfigError::Invalid {
            line: key_line(text, &key),
            key,
            message: e.to_string(),
        }
    })?;
    Ok(config)
}

pub fn load_config(path: &Path, expected: Option<Command>) -> Result<(RunConfig, Vec<u8>), ConfigError> {
    let bytes = fs::read(path).map_err(|e| ConfigError::Read {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let text = std::str::from_utf8(&bytes).map_err(|e| ConfigError::Parse {
        line: 1,
        column: 1,
        message: format!("not UTF-8: {e}"),
    })?;
    Ok((parse_config(text, expected)?, bytes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_spectrum_gets_defaults() {
        let c = parse_config(r#"{"command": "spectrum", "v2": 20, "v1": 0}"#, None).unwrap();
        match c {
            RunConfig::Spectrum(s) => {
                assert_eq!(s.cutoff, 12);
                assert_eq!(s.levels, 10);
                assert_eq!(s.v2, 20.0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn command_can_come_from_cli() {
        let c = parse_config(r#"{"v2": 20}"#, Some(Command::Spectrum)).unwrap();
        assert_eq!(c.command(), Command::Spectrum);
        let e = parse_config(r#"{"command": "sweep"}"#, Some(Command::Spectrum)).unwrap_err();
        assert!(matches!(e, ConfigError::CommandMismatch { .. }));
        let e = parse_config(r#"{"command": "plot"}"#, None).unwrap_err();
        assert!(matches!(e, ConfigError::UnknownCommand(_)));
    }

    #[test]
    fn unknown_key_is_named_with_line() {
        let text = "{\n  \"command\": \"spectrum\",\n  \"v2\": 20,\n  \"colour\": 1\n}";
        let e = parse_config(text, None).unwrap_err();
        assert_eq!(
            e,
            ConfigError::UnknownKey {
                key: "colour".into(),
                line: Some(4)
            }
        );
    }

    #[test]
    fn bare_physical_keys_need_units() {
        let text = "{\"command\": \"pair-report\",\n\"ell\": 1e-7, \"radius_m\": 1e-8, \"area_m2\": 1e-16, \"v12_v\": 1e-3}";
        let e = parse_config(text, None).unwrap_err();
        assert_eq!(e.key(), Some("ell"));
        assert_eq!(e.line(), Some(2));
        assert!(e.to_string().contains("ell_m"));

        let e = parse_config(r#"{"command": "estimate", "voltage": 1}"#, None).unwrap_err();
        assert_eq!(e.key(), Some("voltage"));
        assert_eq!(e.kind(), "unit_suffix");
    }

    #[test]
    fn validation_errors_point_at_key() {
        let text = "{\"command\": \"spectrum\",\n \"v2\": -3}";
        let e = parse_config(text, None).unwrap_err();
        assert_eq!(e.key(), Some("v2"));
        assert_eq!(e.line(), Some(2));

        let text = "{\"command\": \"pair-report\", \"ell_m\": 1e-7,\n \"radius_m\": 6e-8, \"area_m2\": 1e-16, \"v12_v\": 1e-3}";
        let e = parse_config(text, None).unwrap_err();
        assert_eq!(e.key(), Some("radius_m"));
        assert_eq!(e.line(), Some(2));

        let e = parse_config(r#"{"command": "spectrum", "v2": "x"}"#, None).unwrap_err();
        assert_eq!(e.key(), Some("v2"));
        let e = parse_config(r#"{"command": "spectrum"}"#, None).unwrap_err();
        assert_eq!(e.key(), Some("v2"));
    }

    #[test]
    fn nested_pulse_keys_are_checked() {
        let text = r#"{"command": "evolve", "v2": 20, "duration": 1,
            "pulse": {"knob": "v2", "vbar": 20, "tau1": 0, "tau2": 1, "tsmooth": 1, "extra": 0}}"#;
        let e = parse_config(text, None).unwrap_err();
        assert_eq!(e.key(), Some("extra"));
        assert_eq!(e.line(), Some(2));
    }

    #[test]
    fn syntax_errors_carry_position() {
        let e = parse_config("{\n\"command\": \"spectrum\",,\n}", None).unwrap_err();
        assert!(matches!(e, ConfigError::Parse { line: 2, .. }));
        assert_eq!(parse_config("[1, 2]", None).unwrap_err(), ConfigError::NotAnObject);
    }

    #[test]
    fn key_line_skips_values() {
        let text = "{\n\"a\": \"v2\",\n\"v2\": 3}";
        assert_eq!(key_line(text, "v2"), Some(3));
        assert_eq!(key_line(text, "v1"), None);
    }
}
