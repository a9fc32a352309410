//! One-dimensional minimization and root bracketing used by the calibrations.

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for a minimum of a unimodal `f` on `[lo, hi]`.
/// Returns `(x, f(x))` once the bracket is shorter than `tol`.
pub fn golden_section_min<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, tol: f64) -> (f64, f64) {
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Bisection for a sign change of `f` on `[lo, hi]`; `f(lo)` and `f(hi)` must
/// differ in sign (zero counts as either).
pub fn bisect<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, tol: f64) -> Option<f64> {
    let (mut a, mut b) = (lo, hi);
    let mut fa = f(a);
    let fb = f(b);
    if fa == 0.0 {
        return Some(a);
    }
    if fb == 0.0 {
        return Some(b);
    }
    if fa.signum() == fb.signum() {
        return None;
    }
    while (b - a).abs() > tol {
        let m = 0.5 * (a + b);
        let fm = f(m);
        if fm == 0.0 {
            return Some(m);
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Some(0.5 * (a + b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn golden_finds_parabola_vertex() {
        let mut calls = 0;
        let (x, fx) = golden_section_min(
            |x| {
                calls += 1;
                (x - 1.3).powi(2) + 2.0
            },
            0.0,
            4.0,
            1e-8,
        );
        assert!((x - 1.3).abs() < 1e-7);
        assert!((fx - 2.0).abs() < 1e-12);
        // One evaluation per shrink after the first two.
        assert!(calls < 50);
    }

    #[test]
    fn bisect_cases() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-12).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-11);
        assert_eq!(bisect(|x| x * x + 1.0, -1.0, 1.0, 1e-6), None);
        assert_eq!(bisect(|x| x, 0.0, 1.0, 1e-6), Some(0.0));
    }

    proptest! {
        #[test]
        fn golden_on_shifted_cosh(c in -3.0f64..3.0) {
            let (x, _) = golden_section_min(|x| (x - c).cosh(), -5.0, 5.0, 1e-9);
            prop_assert!((x - c).abs() < 1e-6);
        }
    }
}
