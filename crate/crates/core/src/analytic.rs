//! Closed-form deep-well approximations, WKB tunneling and device-scale
//! estimates.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Result, RotorError};
use crate::rotor::{DimensionlessParams, PhysicalConstants};

/// Harmonic expansion of the well centred at `q pi`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HarmonicApprox {
    pub q: u8,
    /// Gaussian width: `psi ~ exp(-alpha phi_q^2)`.
    pub alpha_q: f64,
    pub eps_q: f64,
    pub center: f64,
}

impl HarmonicApprox {
    /// Normalized Gaussian `(2 alpha / pi)^{1/4} exp(-alpha phi_q^2)` with
    /// `phi_q` the angle from the well centre, wrapped into `[-pi, pi)`.
    pub fn wavefunction(&self, phi: f64) -> f64 {
        let d = (phi - self.center + PI).rem_euclid(2.0 * PI) - PI;
        (2.0 * self.alpha_q / PI).powf(0.25) * (-self.alpha_q * d * d).exp()
    }
}

pub fn harmonic_approx(q: u8, params: &DimensionlessParams) -> Result<HarmonicApprox> {
    let sign = match q {
        0 => 1.0,
        1 => -1.0,
        _ => return Err(RotorError::invalid("q", format!("qubit index {q} is not 0 or 1"))),
    };
    let curvature = 2.0 * params.v2() + sign * params.v1() / 2.0;
    if curvature <= 0.0 {
        return Err(RotorError::invalid(
            "params",
            format!("well {q} has non-positive curvature {curvature}"),
        ));
    }
    Ok(HarmonicApprox {
        q,
        alpha_q: curvature.sqrt() / 2.0,
        eps_q: -(params.v2() + sign * params.v1()) + curvature.sqrt(),
        center: q as f64 * PI,
    })
}

/// WKB barrier exponent `gamma` and rate `exp(-2 gamma)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TunnelingEstimate {
    pub gamma: f64,
    pub rate: f64,
}

impl TunnelingEstimate {
    fn from_gamma(gamma: f64) -> Self {
        Self {
            gamma,
            rate: (-2.0 * gamma).exp(),
        }
    }
}

/// `gamma = int_0^pi sqrt(v2 (1 - cos 2phi)) dphi`, evaluated by quadrature.
///
/// The integrand is the barrier height above the well bottom, in dimensionless
/// energy units.
pub fn wkb_gamma(v2: f64) -> Result<TunnelingEstimate> {
    if !(v2.is_finite() && v2 >= 0.0) {
        return Err(RotorError::invalid("v2", format!("{v2} must be >= 0")));
    }
    let integrand = |phi: f64| (v2 * (1.0 - (2.0 * phi).cos())).max(0.0).sqrt();
    let gamma = adaptive_simpson(&integrand, 0.0, PI, 1e-12 * v2.sqrt().max(1.0), 50);
    Ok(TunnelingEstimate::from_gamma(gamma))
}

/// `2 sqrt(2 v2)`, the closed form of [`wkb_gamma`].
pub fn wkb_gamma_closed_form(v2: f64) -> f64 {
    2.0 * (2.0 * v2).sqrt()
}

/// `gamma = 4 sqrt(I A) / hbar` with `A = C V^2 / 2` at the given voltage.
pub fn wkb_gamma_physical(phys: &PhysicalConstants, volts: f64) -> Result<TunnelingEstimate> {
    if !(volts.is_finite() && volts >= 0.0) {
        return Err(RotorError::invalid("volts", format!("{volts} must be >= 0")));
    }
    let energy = 0.5 * phys.capacitance * volts * volts;
    Ok(TunnelingEstimate::from_gamma(
        4.0 * (phys.inertia * energy).sqrt() / phys.hbar,
    ))
}

/// Adaptive Simpson quadrature of `f` on `[a, b]`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, max_depth: u32) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
        h / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(fa, flm, fm, m - a);
        let right = simpson(fm, frm, fb, b - m);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
            + recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    recurse(f, a, b, fa, fm, fb, simpson(fa, fm, fb, b - a), tol, max_depth)
}

/// An SI value together with its decade.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Magnitude {
    pub value: f64,
    pub order: String,
}

impl Magnitude {
    fn new(value: f64) -> Self {
        Self {
            value,
            order: format!("1e{}", value.abs().log10().floor() as i32),
        }
    }
}

/// Orders of magnitude quoted for the nanotube device.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QuotedOrders {
    pub capacitance_f: f64,
    pub energy_j: Option<f64>,
    pub operating_time_s: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhysicalEstimate {
    pub voltage_v: f64,
    pub capacitance_f: Magnitude,
    pub energy_j: Magnitude,
    /// `hbar / E`.
    pub timescale_s: Magnitude,
    pub quoted: QuotedOrders,
}

/// Plate capacitance `eps0 S / L`, electrostatic energy `C V^2 / 2` and the
/// time scale `hbar / E`.
pub fn physical_estimates(phys: &PhysicalConstants, volts: f64) -> Result<PhysicalEstimate> {
    if !(volts.is_finite() && volts > 0.0) {
        return Err(RotorError::invalid("volts", format!("{volts} must be positive")));
    }
    let capacitance = phys.permittivity * phys.plate_area / phys.plate_gap;
    let energy = 0.5 * capacitance * volts * volts;
    let near = |x: f64| (volts - x).abs() <= 1e-9 * x;
    let (energy_q, time_q) = if near(1e-3) {
        (Some(1e-26), Some(1e-5))
    } else if near(0.1) {
        (Some(1e-22), Some(1e-9))
    } else {
        (None, None)
    };
    Ok(PhysicalEstimate {
        voltage_v: volts,
        capacitance_f: Magnitude::new(capacitance),
        energy_j: Magnitude::new(energy),
        timescale_s: Magnitude::new(phys.hbar / energy),
        quoted: QuotedOrders {
            capacitance_f: 1e-21,
            energy_j: energy_q,
            operating_time_s: time_q,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rotor::{build_hamiltonian, VACUUM_PERMITTIVITY};
    use crate::spectral::solve_spectrum;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn params(v1: f64, v2: f64) -> DimensionlessParams {
        DimensionlessParams::new(v1, v2).unwrap()
    }

    #[test]
    fn harmonic_examples() {
        let h = harmonic_approx(0, &params(0.0, 20.0)).unwrap();
        assert_abs_diff_eq!(h.alpha_q, 10f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(h.eps_q, -13.675_444_679_663_24, epsilon = 1e-10);
        let h = harmonic_approx(0, &params(1.0, 20.0)).unwrap();
        assert_abs_diff_eq!(h.eps_q, -21.0 + 40.5f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(h.eps_q, -14.6360, epsilon = 1e-4);
        let h0 = harmonic_approx(0, &params(0.0, 7.0)).unwrap();
        let h1 = harmonic_approx(1, &params(0.0, 7.0)).unwrap();
        assert_eq!(h0.eps_q, h1.eps_q);
        assert_eq!(h0.alpha_q, h1.alpha_q);
        assert_eq!(h1.center, PI);
    }

    #[test]
    fn harmonic_rejects_inverted_well() {
        assert!(harmonic_approx(1, &params(8.0, 1.0)).is_err());
        assert!(harmonic_approx(2, &params(0.0, 1.0)).is_err());
    }

    #[test]
    fn gaussian_is_normalized_on_the_line() {
        let h = harmonic_approx(1, &params(1.0, 20.0)).unwrap();
        let norm = adaptive_simpson(&|p: f64| h.wavefunction(p).powi(2), 0.0, 2.0 * PI, 1e-12, 40);
        assert_abs_diff_eq!(norm, 1.0, epsilon = 1e-8);
        assert_abs_diff_eq!(h.wavefunction(PI), (2.0 * h.alpha_q / PI).powf(0.25), epsilon = 1e-14);
    }

    #[test]
    fn harmonic_tracks_numerical_ground_level() {
        for v2 in [15.0, 20.0, 30.0, 40.0] {
            for v1 in [0.0, 0.5, 1.0] {
                let p = params(v1, v2);
                let e0 = solve_spectrum(&build_hamiltonian(&p, 24).unwrap()).unwrap().eigenvalues[0];
                let h = harmonic_approx(0, &p).unwrap();
                assert!(((h.eps_q - e0) / e0).abs() < 0.05, "v2={v2} v1={v1}");
            }
        }
    }

    #[test]
    fn wkb_examples() {
        let t = wkb_gamma(20.0).unwrap();
        assert_abs_diff_eq!(t.gamma, 12.6491, epsilon = 1e-3);
        assert_abs_diff_eq!(t.gamma, wkb_gamma_closed_form(20.0), epsilon = 1e-9);
        let z = wkb_gamma(0.0).unwrap();
        assert_eq!(z.gamma, 0.0);
        assert_eq!(z.rate, 1.0);
        assert!(wkb_gamma(-1.0).is_err());
    }

    #[test]
    fn physical_wkb_matches_dimensionless_route() {
        let phys = PhysicalConstants::nanotube_defaults();
        for volts in [1e-3, 1e-2, 1e-1] {
            let g = wkb_gamma_physical(&phys, volts).unwrap().gamma;
            let v2 = crate::rotor::to_dimensionless(&phys, volts).unwrap().value;
            assert_abs_diff_eq!(g / wkb_gamma_closed_form(v2), 1.0, epsilon = 1e-12);
        }
        let g = wkb_gamma_physical(&phys, 1e-3).unwrap().gamma;
        assert!((8.0e5..9.0e5).contains(&g), "{g}");
        let g = wkb_gamma_physical(&phys, 0.1).unwrap().gamma;
        assert!((8.0e7..9.0e7).contains(&g), "{g}");
    }

    #[test]
    fn device_estimates() {
        let phys = PhysicalConstants::nanotube_defaults();
        let e = physical_estimates(&phys, 0.1).unwrap();
        assert_abs_diff_eq!(e.capacitance_f.value, VACUUM_PERMITTIVITY * 1e-9, epsilon = 1e-30);
        assert_eq!(e.capacitance_f.order, "1e-21");
        assert_abs_diff_eq!(e.energy_j.value, 4.427e-23, epsilon = 1e-26);
        assert_eq!(e.quoted.energy_j, Some(1e-22));
        let e1 = physical_estimates(&phys, 1e-3).unwrap();
        assert_eq!(e1.quoted.operating_time_s, Some(1e-5));
        let e2 = physical_estimates(&phys, 2e-3).unwrap();
        assert_abs_diff_eq!(e2.energy_j.value / e1.energy_j.value, 4.0, epsilon = 1e-12);
        assert_eq!(e2.quoted.energy_j, None);
        assert!(physical_estimates(&phys, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn quadrature_matches_closed_form(v2 in 1.0f64..100.0) {
            let g = wkb_gamma(v2).unwrap().gamma;
            prop_assert!((g / wkb_gamma_closed_form(v2) - 1.0).abs() < 1e-3);
        }

        #[test]
        fn rate_decreases_with_depth(v2 in 0.0f64..100.0, dv in 0.01f64..10.0) {
            prop_assert!(wkb_gamma(v2 + dv).unwrap().rate < wkb_gamma(v2).unwrap().rate);
        }
    }
}
