//! Adaptive Simpson quadrature, used as the independent numeric route for
//! the covariance double integral.

/// Adaptive Simpson on `[a, b]` with an absolute error budget.
pub fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_rec(f, a, b, fa, fm, fb, whole, tol, 52)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec(
    f: &impl Fn(f64) -> f64,
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

/// The covariance double integral, evaluated numerically:
/// `eps^2 int_(2s/eps^2)^(2t/eps^2) int_(2s/eps^2)^(x2) e^(-2(x2-x1)) dx1 dx2`.
///
/// Both integration layers are adaptive; no antiderivative of the inner
/// integrand is used, keeping this route independent of the closed form.
pub fn covariance_double_integral(epsilon: f64, s: f64, t: f64) -> f64 {
    let lo = 2.0 * s / (epsilon * epsilon);
    let hi = 2.0 * t / (epsilon * epsilon);
    let inner_tol = 1e-14;
    let outer = |x2: f64| {
        if x2 <= lo {
            0.0
        } else {
            adaptive_simpson(&|x1: f64| (-2.0 * (x2 - x1)).exp(), lo, x2, inner_tol)
        }
    };
    let outer_tol = 1e-11 * (hi - lo).max(1.0);
    epsilon * epsilon * adaptive_simpson(&outer, lo, hi, outer_tol)
}

/// Closed form of the covariance double integral:
/// `(t-s) + (eps^2/4)(e^(-4(t-s)/eps^2) - 1)`.
pub fn covariance_closed_form(epsilon: f64, s: f64, t: f64) -> f64 {
    let d = t - s;
    d + epsilon * epsilon / 4.0 * ((-4.0 * d / (epsilon * epsilon)).exp() - 1.0)
}
