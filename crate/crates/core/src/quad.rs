//! Adaptive Gauss-Legendre quadrature.
//!
//! Nodes and weights are computed at runtime by Newton iteration on the
//! Legendre recurrence, so no tabulated constants are needed.

use crate::error::{Result, TubeError};

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1].
///
/// Exact for polynomials of degree <= 2n - 1.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Chebyshev-like initial guess for the i-th root of P_n.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Evaluate P_n(x) and P_n'(x) by the three-term recurrence.
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pm) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Fixed n-point Gauss-Legendre estimate of the integral of f over [a, b].
pub fn fixed_gl<F: FnMut(f64) -> f64>(
    f: &mut F,
    a: f64,
    b: f64,
    nodes: &[f64],
    weights: &[f64],
) -> f64 {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut sum = 0.0;
    for (&x, &w) in nodes.iter().zip(weights) {
        sum += w * f(mid + half * x);
    }
    sum * half
}

const PANEL_ORDER: usize = 15;
const MAX_DEPTH: u32 = 48;

/// Adaptive Gauss-Legendre integration of f over [a, b].
///
/// Panels are bisected until the discrepancy between the single-panel
/// estimate and the two-half estimate is below the per-panel share of the
/// requested tolerance.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, rel_tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let (nodes, weights) = gauss_legendre(PANEL_ORDER);
    let rough = fixed_gl(&mut f, a, b, &nodes, &weights);
    let rough_abs = fixed_gl(&mut |x| f(x).abs(), a, b, &nodes, &weights);
    let scale = rough.abs().max(rough_abs).max(1e-300);
    let abs_tol = rel_tol * scale;
    let total_width = (b - a).abs();
    let mut acc = 0.0;
    // Explicit stack of (a, b, whole_estimate, depth).
    let mut stack = vec![(a, b, rough, 0u32)];
    while let Some((pa, pb, whole, depth)) = stack.pop() {
        let mid = 0.5 * (pa + pb);
        let left = fixed_gl(&mut f, pa, mid, &nodes, &weights);
        let right = fixed_gl(&mut f, mid, pb, &nodes, &weights);
        let split = left + right;
        let budget = abs_tol * (pb - pa).abs() / total_width;
        if (whole - split).abs() <= budget.max(1e-300) {
            acc += split;
        } else if depth >= MAX_DEPTH {
            return Err(TubeError::StepFailure {
                reason: format!(
                    "quadrature failed to converge on [{pa}, {pb}] (residual {:.3e})",
                    (whole - split).abs()
                ),
            });
        } else {
            stack.push((pa, mid, left, depth + 1));
            stack.push((mid, pb, right, depth + 1));
        }
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn nodes_are_exact_for_high_degree_polynomials() {
        // 7-point rule integrates x^13 exactly on [0, 1]: 1/14.
        let (n, w) = gauss_legendre(7);
        let got = fixed_gl(&mut |x: f64| x.powi(13), 0.0, 1.0, &n, &w);
        assert_relative_eq!(got, 1.0 / 14.0, max_relative = 1e-14);
        // Weights sum to the interval length of [-1, 1].
        assert_relative_eq!(w.iter().sum::<f64>(), 2.0, max_relative = 1e-14);
    }

    #[test]
    fn integrates_elementary_functions() {
        let s = integrate(|x| x.sin(), 0.0, std::f64::consts::PI, 1e-12).unwrap();
        assert_relative_eq!(s, 2.0, max_relative = 1e-11);
        let e = integrate(|x| x.exp(), 0.0, 1.0, 1e-12).unwrap();
        assert_relative_eq!(e, std::f64::consts::E - 1.0, max_relative = 1e-11);
    }

    #[test]
    fn handles_oscillatory_integrand() {
        // int_0^10 sin(20 x) dx = (1 - cos(200)) / 20.
        let got = integrate(|x| (20.0 * x).sin(), 0.0, 10.0, 1e-12).unwrap();
        let want = (1.0 - (200.0f64).cos()) / 20.0;
        assert_relative_eq!(got, want, epsilon = 1e-10);
    }

    #[test]
    fn ellipse_perimeter_matches_agm_oracle() {
        // Perimeter of x = 2 cos t, y = 2.5 sin t equals 10 E(0.6) where E is
        // the complete elliptic integral of the second kind; the oracle value
        // below was computed with an arithmetic-geometric-mean iteration.
        let f = |t: f64| {
            let dx = -2.0 * t.sin();
            let dy = 2.5 * t.cos();
            dx.hypot(dy)
        };
        let got = integrate(f, 0.0, 2.0 * std::f64::consts::PI, 1e-12).unwrap();
        assert_relative_eq!(got, 14.180833944487243, max_relative = 1e-10);
    }

    #[test]
    fn reversed_interval_changes_sign() {
        let fwd = integrate(|x| x * x, 0.0, 2.0, 1e-12).unwrap();
        let rev = integrate(|x| x * x, 2.0, 0.0, 1e-12).unwrap();
        assert_relative_eq!(fwd, 8.0 / 3.0, max_relative = 1e-12);
        assert_relative_eq!(rev, -fwd, max_relative = 1e-12);
    }
}
