//! Small statistical utilities: cosine-fringe fitting and an empirical
//! uniformity statistic used by the self-consistency tests.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

/// Least-squares fit of `y = offset * (1 + visibility * cos(phi - phase))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FringeFit {
    /// Mean level of the fringe.
    pub offset: f64,
    /// Amplitude of the cosine component.
    pub amplitude: f64,
    /// Phase of the cosine component, in radians.
    pub phase: f64,
    /// `amplitude / offset`.
    pub visibility: f64,
}

/// Fits a raised cosine to `(phases, values)` by linear least squares on the
/// basis `(1, cos phi, sin phi)`.
///
/// # Errors
///
/// Rejects mismatched or short inputs (fewer than four points), non-finite
/// samples, phase grids that leave the fit degenerate, and data whose mean
/// level is not positive (the fractional visibility is undefined there).
pub fn fit_fringe(phases: &[f64], values: &[f64]) -> Result<FringeFit> {
    if phases.len() != values.len() {
        return Err(Error::param(
            "phases",
            format!(
                "length {} does not match {} values",
                phases.len(),
                values.len()
            ),
        ));
    }
    if phases.len() < 4 {
        return Err(Error::param(
            "phases",
            format!("need at least 4 samples, got {}", phases.len()),
        ));
    }
    if phases.iter().chain(values).any(|x| !x.is_finite()) {
        return Err(Error::param("values", "samples must be finite"));
    }

    // Normal equations for the three-parameter linear model
    // y = a + b cos phi + c sin phi.
    let mut m = Matrix3::zeros();
    let mut rhs = Vector3::zeros();
    for (&phi, &y) in phases.iter().zip(values) {
        let row = Vector3::new(1.0, phi.cos(), phi.sin());
        m += row * row.transpose();
        rhs += row * y;
    }
    // The normal matrix loses rank when the phases provide fewer than
    // three independent directions (all equal, or collinear on the
    // circle). LU may still "solve" such a system with garbage, so gate
    // on the determinant relative to the matrix scale (m[0,0] = n).
    let n = phases.len() as f64;
    let degenerate = || Error::param("phases", "phase grid leaves the fringe fit degenerate");
    if m.determinant().abs() < 1e-12 * n * n * n {
        return Err(degenerate());
    }
    let solution = m.lu().solve(&rhs).ok_or_else(degenerate)?;
    let (a, b, c) = (solution[0], solution[1], solution[2]);
    if a <= 0.0 {
        return Err(Error::param(
            "values",
            format!("mean level {a:.3e} is not positive; visibility undefined"),
        ));
    }
    let amplitude = b.hypot(c);
    Ok(FringeFit {
        offset: a,
        amplitude,
        phase: c.atan2(b),
        visibility: amplitude / a,
    })
}

/// Kolmogorov-Smirnov distance between a sample and the uniform law on
/// `[0, 1]`. Used to check that p-values from a correctly specified test are
/// uniformly distributed.
///
/// # Panics
///
/// Panics on an empty sample.
pub fn ks_uniform_statistic(samples: &[f64]) -> f64 {
    assert!(!samples.is_empty(), "need at least one sample");
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("samples must be comparable"));
    let n = sorted.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let x = x.clamp(0.0, 1.0);
        let above = (i as f64 + 1.0) / n - x;
        let below = x - i as f64 / n;
        d = d.max(above).max(below);
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn fit_recovers_exact_cosine() {
        let phases: Vec<f64> = (0..16).map(|k| 2.0 * PI * k as f64 / 16.0).collect();
        let values: Vec<f64> = phases
            .iter()
            .map(|p| 0.25 * (1.0 + 0.8 * (p - 0.3).cos()))
            .collect();
        let fit = fit_fringe(&phases, &values).unwrap();
        assert_abs_diff_eq!(fit.offset, 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.visibility, 0.8, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.phase, 0.3, epsilon = 1e-12);
    }

    #[test]
    fn fit_rejects_bad_inputs() {
        let phases = [0.0, 1.0, 2.0, 3.0];
        assert!(fit_fringe(&phases[..3], &[1.0, 1.0, 1.0]).is_err());
        assert!(fit_fringe(&phases, &[1.0, 1.0, 1.0]).is_err());
        assert!(fit_fringe(&phases, &[1.0, 1.0, 1.0, f64::NAN]).is_err());
        // Identical phases: degenerate design matrix.
        assert!(fit_fringe(&[1.0; 8], &[1.0; 8]).is_err());
        // Zero mean level: visibility undefined.
        let values: Vec<f64> = phases.iter().map(|p| p.cos()).collect();
        assert!(fit_fringe(&phases, &values).is_err());
    }

    #[test]
    fn ks_statistic_detects_non_uniform_samples() {
        let uniform: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        assert!(ks_uniform_statistic(&uniform) < 0.01);
        let clumped = vec![0.5; 1000];
        assert!(ks_uniform_statistic(&clumped) > 0.49);
    }
}
