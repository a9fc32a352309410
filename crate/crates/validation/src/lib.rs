//! Helpers for the acceptance run in `tests/acceptance.rs`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rotorq_cli::{run, Command};
use rotorq_core::Execution;

pub struct Outcome {
    pub pass: bool,
    pub detail: String,
}

pub fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

/// Least-squares line `y = a + b x`; returns `(b, a, r2)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let ss_tot: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    (slope, intercept, 1.0 - ss_res / ss_tot)
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

/// Light versions of every command.
pub const SUITE: &[(Command, &str)] = &[
    (Command::Spectrum, r#"{"v1": 1.0, "v2": 20.0, "convergence_cutoffs": [8, 12, 16]}"#),
    (Command::Sweep, r#"{"axis": "v2", "lo": 0.0, "hi": 40.0, "steps": 41}"#),
    (Command::Wavefunction, r#"{"v1": 1.0, "v2": 20.0, "points": 64}"#),
    (Command::Tunneling, r#"{"steps": 20}"#),
    (Command::Estimate, r#"{"voltages_v": [0.001, 0.1]}"#),
    (
        Command::Evolve,
        r#"{"v2": 20.0, "duration": 20.0, "sample_stride": 500, "grid_points": 32,
            "pulse": {"knob": "v2", "vbar": 20.0, "tau1": 4.0, "tau2": 12.6, "tsmooth": 2.0}}"#,
    ),
    (Command::CalibratePhase, r#"{"windows": [0.0, 0.41, 0.82, 1.23], "step": 0.005}"#),
    (
        Command::CalibrateNot,
        r#"{"tau2_lo": 12.0, "tau2_hi": 13.0, "step": 0.005, "partial_targets": [0.5], "hadamard": true}"#,
    ),
    (
        Command::GateUnitary,
        r#"{"v2": 20.0, "duration": 10.0, "step": 0.005,
            "pulse": {"knob": "v1", "vbar": 1.0, "tau1": 4.0, "tau2": 5.0, "tsmooth": 0.5}}"#,
    ),
    (Command::PairReport, r#"{"ell_m": 1e-7, "radius_m": 1e-8, "area_m2": 1e-16, "v12_v": 1e-3}"#),
    (
        Command::CzSynthesis,
        r#"{"ell_m": 1e-7, "radius_m": 1e-8, "area_m2": 1e-16, "v12_v": 1e-3, "grid": 16}"#,
    ),
    (Command::VerifyIdentities, r#"{"simulated_not_tau2": 12.6, "step": 0.005}"#),
];

/// Runs [`SUITE`] under `root` and returns every artifact keyed by its path
/// relative to the output root.
pub fn run_suite(root: &Path, exec: Execution) -> Result<BTreeMap<PathBuf, Vec<u8>>, String> {
    let configs = root.join("configs");
    let out = root.join("out");
    fs::create_dir_all(&configs).map_err(|e| e.to_string())?;
    let mut files = BTreeMap::new();
    for (cmd, body) in SUITE {
        let cfg = configs.join(format!("{}.json", cmd.name()));
        fs::write(&cfg, body).map_err(|e| e.to_string())?;
        let written = run(*cmd, &cfg, &out.join(cmd.name()), exec).map_err(|e| format!("{}: {e}", cmd.name()))?;
        for path in written {
            let rel = path.strip_prefix(&out).unwrap().to_path_buf();
            files.insert(rel, fs::read(&path).map_err(|e| e.to_string())?);
        }
    }
    Ok(files)
}
