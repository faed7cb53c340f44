//! One-dimensional quadrature and monotone inversion.

use crate::error::{Result, TubeError};

const MAX_DEPTH: u32 = 48;
const REL_FLOOR: f64 = 1e-15;

/// Adaptive Simpson integration of `f` over `[a, b]` to absolute tolerance
/// `tol`, floored at a few ulps of the integral's magnitude so that large
/// integrals terminate.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let tol = tol.max(REL_FLOOR * whole.abs());
    let v = recurse(&f, a, b, fa, fm, fb, whole, tol, MAX_DEPTH);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(TubeError::Quadrature { a, b })
    }
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
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    // Stop when the interval cannot be split further in floating point.
    if depth == 0 || delta.abs() <= 15.0 * tol || lm <= a || rm >= b {
        return left + right + delta / 15.0;
    }
    recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Composite Simpson weights for `n` equal cells of width `h`; `n` must be even.
pub fn simpson_weights(n: usize, h: f64) -> Vec<f64> {
    assert!(n >= 2 && n.is_multiple_of(2), "composite Simpson needs an even cell count");
    let mut w = vec![0.0; n + 1];
    for (i, wi) in w.iter_mut().enumerate() {
        *wi = if i == 0 || i == n {
            h / 3.0
        } else if i % 2 == 1 {
            4.0 * h / 3.0
        } else {
            2.0 * h / 3.0
        };
    }
    w
}

/// Solves `f(s) = y` for increasing `f` on `[lo, hi]` by bisection until the
/// bracket is narrower than `xtol`.
pub fn invert_increasing<F: Fn(f64) -> Result<f64>>(
    f: F,
    y: f64,
    lo: f64,
    hi: f64,
    xtol: f64,
) -> Result<f64> {
    let flo = f(lo)?;
    let fhi = f(hi)?;
    if !(y >= flo && y <= fhi) {
        return Err(TubeError::InversionRange { y, lo: flo, hi: fhi });
    }
    let (mut a, mut b) = (lo, hi);
    while b - a > xtol {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if f(m)? < y {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn simpson_polynomials() {
        let v = adaptive_simpson(|x| x * x * x - 2.0 * x, 0.0, 2.0, 1e-13).unwrap();
        assert_relative_eq!(v, 0.0, epsilon = 1e-13);
        let v = adaptive_simpson(f64::exp, 0.0, 1.0, 1e-13).unwrap();
        assert_relative_eq!(v, std::f64::consts::E - 1.0, epsilon = 1e-12);
    }

    #[test]
    fn large_integrals_terminate() {
        let v = adaptive_simpson(|x| (6.0 * x).exp(), 0.0, 5.0, 1e-13).unwrap();
        assert_relative_eq!(v, ((30.0f64).exp() - 1.0) / 6.0, max_relative = 1e-13);
    }

    #[test]
    fn weights_sum_to_length() {
        let w = simpson_weights(10, 0.1);
        assert_relative_eq!(w.iter().sum::<f64>(), 1.0, epsilon = 1e-15);
        let xs: Vec<f64> = (0..=10).map(|i| i as f64 * 0.1).collect();
        let cubic: f64 = w.iter().zip(&xs).map(|(w, x)| w * x.powi(3)).sum();
        assert_relative_eq!(cubic, 0.25, epsilon = 1e-15);
    }

    #[test]
    fn inversion_of_cube() {
        let s = invert_increasing(|x| Ok(x * x * x), 0.343, 0.0, 2.0, 1e-13).unwrap();
        assert_relative_eq!(s, 0.7, epsilon = 1e-12);
        assert!(invert_increasing(Ok, 3.0, 0.0, 2.0, 1e-13).is_err());
    }
}
