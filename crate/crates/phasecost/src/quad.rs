//! Adaptive quadrature helpers.
//!
//! Adaptive Simpson on finite intervals, with utilities for square-root
//! endpoint singularities (handled by substitution at the call sites) and
//! for improper integrals via interval doubling.

use crate::error::{Error, Result};

/// Adaptive Simpson quadrature of `f` on `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_rec(f, a, b, fa, fm, fb, whole, tol, 52)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F: Fn(f64) -> f64>(
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
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
}

/// Integrate `f` on `[a, b]` splitting at the given interior points first.
/// Useful when the integrand has kinks at known locations.
pub fn adaptive_simpson_split<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    splits: &[f64],
    tol: f64,
) -> f64 {
    let mut pts: Vec<f64> = std::iter::once(a)
        .chain(splits.iter().copied().filter(|&s| s > a && s < b))
        .chain(std::iter::once(b))
        .collect();
    pts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let n = (pts.len() - 1).max(1);
    pts.windows(2)
        .map(|p| adaptive_simpson(f, p[0], p[1], tol / n as f64))
        .sum()
}

/// Integrate `f` on `[a, inf)` by doubling the upper limit until the tail
/// contribution drops below `tol`. Errors out if no convergence is detected,
/// which signals a divergent (or too slowly decaying) tail.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(f: &F, a: f64, tol: f64) -> Result<f64> {
    let mut hi = if a.abs() > 1.0 { 2.0 * a.abs() } else { a + 1.0 };
    let mut total = adaptive_simpson(f, a, hi, tol);
    for _ in 0..60 {
        let next = 2.0 * hi;
        let piece = adaptive_simpson(f, hi, next, tol);
        total += piece;
        hi = next;
        if piece.abs() <= tol * (1.0 + total.abs()) {
            return Ok(total);
        }
    }
    Err(Error::Numeric(format!(
        "improper integral did not converge (reached upper limit {hi:.3e}, total {total:.6e})"
    )))
}

/// Integral of sqrt(c(phi)) over `[0, 1]` with dyadic refinement towards 0.
/// Returns `None` if the partial sums keep growing under refinement,
/// indicating a divergent endpoint singularity.
pub fn sqrt_integral_with_divergence_check<F: Fn(f64) -> f64>(c: &F, tol: f64) -> Option<f64> {
    let g = |phi: f64| c(phi).max(0.0).sqrt();
    let mut total = 0.0;
    let mut hi = 1.0;
    // Dyadic shells [2^-k-1, 2^-k]; a divergent endpoint shows up as
    // shell contributions that stop decaying.
    let mut last_shells = Vec::new();
    for _ in 0..200 {
        let lo = 0.5 * hi;
        let piece = adaptive_simpson(&g, lo, hi, tol * hi);
        total += piece;
        last_shells.push(piece);
        if piece.abs() <= tol {
            return Some(total);
        }
        if total > 1e12 {
            return None;
        }
        // Non-decaying shells mean the integral grows at least like log(1/phi).
        if last_shells.len() >= 8 {
            let n = last_shells.len();
            if last_shells[n - 1] >= 0.98 * last_shells[n - 8] && last_shells[n - 1] > tol {
                return None;
            }
        }
        hi = lo;
    }
    Some(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn simpson_polynomial_is_near_exact() {
        let v = adaptive_simpson(&|x: f64| x * x * x - 2.0 * x + 1.0, 0.0, 2.0, 1e-12);
        assert_relative_eq!(v, 2.0, max_relative = 1e-12);
    }

    #[test]
    fn simpson_sqrt_endpoint() {
        let v = adaptive_simpson(&|x: f64| x.sqrt(), 0.0, 1.0, 1e-10);
        assert_relative_eq!(v, 2.0 / 3.0, epsilon = 1e-8);
    }

    #[test]
    fn improper_integral_power_tail() {
        // int_1^inf x^-2 dx = 1
        let v = integrate_to_infinity(&|x: f64| x.powi(-2), 1.0, 1e-10).unwrap();
        assert_relative_eq!(v, 1.0, epsilon = 1e-8);
    }

    #[test]
    fn divergent_sqrt_integral_detected() {
        // sqrt(phi^-3) = phi^-1.5, divergent at 0
        assert!(sqrt_integral_with_divergence_check(&|phi: f64| phi.powi(-3), 1e-9).is_none());
    }

    #[test]
    fn convergent_sqrt_integral() {
        let v = sqrt_integral_with_divergence_check(&|phi: f64| phi, 1e-9).unwrap();
        assert_relative_eq!(v, 2.0 / 3.0, epsilon = 1e-6);
    }
}
