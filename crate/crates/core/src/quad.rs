//! Thin layer over double-exponential quadrature: piecewise integration
//! across caller-supplied breakpoints with an aggregate error check.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub evaluations: u64,
}

/// Integrates `f` over consecutive intervals of `breaks` (ascending), each at
/// the full double-exponential level set. Fails when the summed error estimate
/// exceeds `rel_tol * |value| + abs_floor`.
pub fn integrate_pieces<F>(f: F, breaks: &[f64], rel_tol: f64, abs_floor: f64) -> Result<Estimate>
where
    F: Fn(f64) -> f64,
{
    let mut value = 0.0;
    let mut error = 0.0;
    let mut evaluations = 0u64;
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let out = quadrature::integrate(&f, a, b, 0.0);
        value += out.integral;
        error += out.error_estimate;
        evaluations += out.num_function_evaluations as u64;
    }
    let target = rel_tol * value.abs() + abs_floor;
    if !(error <= target) {
        return Err(Error::Numeric {
            what: "quadrature",
            achieved: error,
            target,
        });
    }
    Ok(Estimate {
        value,
        error,
        evaluations,
    })
}

/// Single-interval convenience form.
pub fn integrate<F>(f: F, a: f64, b: f64, rel_tol: f64, abs_floor: f64) -> Result<Estimate>
where
    F: Fn(f64) -> f64,
{
    integrate_pieces(f, &[a, b], rel_tol, abs_floor)
}

/// Breakpoints on [0, upper] that resolve a feature of width `scale` near 0.
pub fn graded_breaks(scale: f64, upper: f64) -> Vec<f64> {
    let mut out = vec![0.0];
    let mut x = scale;
    while x < upper {
        out.push(x);
        x *= 4.0;
    }
    out.push(upper);
    out
}

/// Fixed Gauss-Legendre rule on [-1, 1], nodes and weights by Newton iteration.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut rule = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        rule.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    rule
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn piecewise_exponential() {
        let est = integrate_pieces(|x| (-x).exp(), &graded_breaks(0.1, 40.0), 1e-12, 0.0).unwrap();
        assert!((est.value - (1.0 - (-40f64).exp())).abs() < 1e-13);
    }

    #[test]
    fn gauss_legendre_is_exact_for_polynomials() {
        let rule = gauss_legendre(8);
        let s: f64 = rule.iter().map(|(x, w)| w * x.powi(14)).sum();
        assert!((s - 2.0 / 15.0).abs() < 1e-14);
        let total: f64 = rule.iter().map(|(_, w)| w).sum();
        assert!((total - 2.0).abs() < 1e-14);
    }

    #[test]
    fn reports_failure() {
        let err = integrate(|x| (1.0 / x).sin() / x, 1e-9, 1.0, 1e-14, 0.0);
        assert!(err.is_err());
    }
}
