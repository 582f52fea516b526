//! Safeguarded Newton search for the Lagrange multiplier.
//!
//! Solves `h(mu) = sum_n lambda_n |c_n|^2 / (mu + lambda_n)^2 = 1` for the
//! unique `mu > 0`. `h` decreases monotonically on `mu > 0`, so the root is
//! bracketed by `[0, sqrt(sum lambda_n |c_n|^2)]`. Newton steps are taken on
//! `1/sqrt(h) - 1`, which is concave and nearly linear in `mu` (exactly
//! linear with one term), and fall back to bisection when a step leaves the
//! bracket.

use crate::error::{Error, Result};

pub const MAX_ITERATIONS: usize = 200;
pub const TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootSolveReport {
    pub root: f64,
    /// `|h(root) - 1|`.
    pub residual: f64,
    pub iterations: usize,
    pub bracket: (f64, f64),
}

/// `h(mu)`; zero eigenvalues contribute nothing for `mu > 0`.
pub fn constraint_value(eigenvalues: &[f64], coeffs: &[f64], mu: f64) -> f64 {
    if mu == 0.0 {
        return constraint_at_zero(eigenvalues, coeffs);
    }
    eigenvalues
        .iter()
        .zip(coeffs)
        .filter(|(&l, _)| l > 0.0)
        .map(|(&l, &c)| l * c / ((mu + l) * (mu + l)))
        .sum()
}

/// `h(0) = sum |c_n|^2 / lambda_n` over positive eigenvalues.
pub fn constraint_at_zero(eigenvalues: &[f64], coeffs: &[f64]) -> f64 {
    eigenvalues
        .iter()
        .zip(coeffs)
        .filter(|(&l, _)| l > 0.0)
        .map(|(&l, &c)| c / l)
        .sum()
}

/// `h(mu)` and `-h'(mu) / 2`.
fn eval(eigenvalues: &[f64], coeffs: &[f64], mu: f64) -> (f64, f64) {
    let mut h = 0.0;
    let mut slope = 0.0;
    for (&l, &c) in eigenvalues.iter().zip(coeffs) {
        if l > 0.0 {
            let s = mu + l;
            let t = l * c / (s * s);
            h += t;
            slope += t / s;
        }
    }
    (h, slope)
}

pub fn newton_mu(eigenvalues: &[f64], coeffs: &[f64]) -> Result<RootSolveReport> {
    if eigenvalues.len() != coeffs.len() {
        return Err(Error::InvalidInput(format!(
            "{} eigenvalues for {} coefficients",
            eigenvalues.len(),
            coeffs.len()
        )));
    }
    if eigenvalues.iter().chain(coeffs).any(|&x| !(x >= 0.0)) {
        return Err(Error::InvalidInput(
            "eigenvalues and coefficients must be non-negative".into(),
        ));
    }
    let h0 = constraint_at_zero(eigenvalues, coeffs);
    if !(h0 > 1.0) {
        return Err(Error::NoRoot { h0 });
    }

    let weight: f64 = eigenvalues.iter().zip(coeffs).map(|(&l, &c)| l * c).sum();
    let mut lo = 0.0_f64;
    let mut hi = weight.sqrt();
    // h(0) = inf cannot seed a Newton step; start inside the bracket
    let mut mu = if h0.is_finite() { 0.0 } else { 0.5 * hi };
    let mut best = (f64::INFINITY, mu);

    for iter in 1..=MAX_ITERATIONS {
        let (h, slope) = eval(eigenvalues, coeffs, mu);
        let (h, slope) = if mu == 0.0 { (h0, slope) } else { (h, slope) };
        let residual = (h - 1.0).abs();
        if residual < best.0 {
            best = (residual, mu);
        }
        if residual < TOLERANCE {
            debug_assert!(lo <= mu && mu <= hi);
            return Ok(RootSolveReport {
                root: mu,
                residual,
                iterations: iter,
                bracket: (lo, hi),
            });
        }
        if h > 1.0 {
            lo = mu;
        } else {
            hi = mu;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
        // phi = h^{-1/2} - 1, phi' = h^{-3/2} * slope
        let step = if slope > 0.0 && h.is_finite() {
            let phi = 1.0 / h.sqrt() - 1.0;
            let dphi = slope / (h * h.sqrt());
            mu - phi / dphi
        } else {
            f64::NAN
        };
        mu = if step.is_finite() && step > lo && step < hi {
            step
        } else {
            0.5 * (lo + hi)
        };
    }

    let (residual, root) = best;
    if residual < TOLERANCE {
        return Ok(RootSolveReport {
            root,
            residual,
            iterations: MAX_ITERATIONS,
            bracket: (lo, hi),
        });
    }
    Err(Error::NoConvergence {
        iterations: MAX_ITERATIONS,
        residual,
    })
}
