//! Two-photon polarization algebra for a Franson-type interferometer.
//!
//! A pump photon is down-converted into a signal/idler pair whose
//! polarization encodes which interferometer arms the pair took. Path
//! mismatch beyond the pair's coherence length destroys the coherence
//! between the `|HH>` and `|VV>` components, which this module models as a
//! dephased Bell state: a 4x4 density matrix over the product basis
//! `(HH, HV, VH, VV)` that keeps both populations at 1/2 and scales the
//! off-diagonal coherence by a single visibility factor `V`:
//!
//! ```text
//! rho = 1/2 (|HH><HH| + |VV><VV|) + V/2 (e^{i phi}|VV><HH| + e^{-i phi}|HH><VV|)
//! ```
//!
//! Each photon then meets a half-wave plate and a polarizing beam splitter.
//! Detecting both photons in the transmitted ports projects the pair onto a
//! product of linear polarizations set by the plate angles; with both plates
//! near 22.5 degrees the coincidence rate traces the two-photon fringe
//! `1/4 (1 +/- V cos phi)`.

use nalgebra::{Matrix2, Matrix4, Vector4};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Basis index of `|HH>`.
const HH: usize = 0;
/// Basis index of `|HV>`. Named to document the ordering even though the
/// dephased states built here have no population there.
#[allow(dead_code)]
const HV: usize = 1;
/// Basis index of `|VH>`. See [`HV`].
#[allow(dead_code)]
const VH: usize = 2;
/// Basis index of `|VV>`.
const VV: usize = 3;

/// Largest tolerated asymmetry `max |rho - rho^dagger|` of a valid state.
pub const HERMITICITY_TOL: f64 = 1e-12;
/// Largest tolerated deviation of the trace from one.
pub const TRACE_TOL: f64 = 1e-12;
/// Most negative eigenvalue a state may have before it is rejected as
/// unphysical; slack above the hermiticity/trace tolerances because the
/// eigensolver itself works at finite precision.
pub const EIGENVALUE_TOL: f64 = -1e-10;

/// Parameters of a dephased Bell state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DephasedBellParams {
    /// Two-photon phase accumulated between the `|HH>` and `|VV>` paths,
    /// in radians.
    pub phi: f64,
    /// Residual coherence in `[0, 1]`; 1 is a pure Bell state, 0 a fully
    /// dephased mixture.
    pub visibility: f64,
}

/// Half-wave-plate orientation, stored in radians from the H axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveplateSetting {
    /// Fast-axis angle in radians.
    pub angle: f64,
}

impl WaveplateSetting {
    /// Plate at 22.5 degrees: maps diagonal polarization onto H.
    pub const DIAGONAL: WaveplateSetting = WaveplateSetting {
        angle: std::f64::consts::FRAC_PI_8,
    };

    /// Plate at -22.5 degrees: maps anti-diagonal polarization onto H.
    pub const ANTIDIAGONAL: WaveplateSetting = WaveplateSetting {
        angle: -std::f64::consts::FRAC_PI_8,
    };

    /// Setting from an angle in radians.
    pub fn from_radians(angle: f64) -> Self {
        WaveplateSetting { angle }
    }

    /// Setting from an angle in degrees.
    pub fn from_degrees(angle: f64) -> Self {
        WaveplateSetting {
            angle: angle.to_radians(),
        }
    }
}

/// Density matrix of a signal/idler polarization pair over `(HH, HV, VH, VV)`.
///
/// A value of this type is not guaranteed valid unless it came from
/// [`TwoPhotonState::new`] or [`make_dephased_bell`]; the unchecked
/// constructor exists so tests and future noise models can build arbitrary
/// matrices and have downstream operations reject them.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoPhotonState {
    rho: Matrix4<Complex64>,
}

impl TwoPhotonState {
    /// Validating constructor: accepts only Hermitian, unit-trace,
    /// positive-semidefinite matrices (within the documented tolerances).
    pub fn new(rho: Matrix4<Complex64>) -> Result<Self> {
        let state = TwoPhotonState { rho };
        state.validate()?;
        Ok(state)
    }

    /// Wraps a matrix without validation.
    pub fn from_matrix_unchecked(rho: Matrix4<Complex64>) -> Self {
        TwoPhotonState { rho }
    }

    /// The underlying density matrix.
    pub fn matrix(&self) -> &Matrix4<Complex64> {
        &self.rho
    }

    /// Checks hermiticity, unit trace and positivity.
    pub fn validate(&self) -> Result<()> {
        let asym = (self.rho - self.rho.adjoint()).camax();
        if asym > HERMITICITY_TOL {
            return Err(Error::InvalidState(format!(
                "not Hermitian: max |rho - rho^dagger| = {asym:.3e}"
            )));
        }
        let trace = self.rho.trace();
        if (trace.re - 1.0).abs() > TRACE_TOL || trace.im.abs() > TRACE_TOL {
            return Err(Error::InvalidState(format!(
                "trace {trace} differs from one"
            )));
        }
        let min_eig = self
            .rho
            .symmetric_eigenvalues()
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        if min_eig < EIGENVALUE_TOL {
            return Err(Error::InvalidState(format!(
                "not positive semidefinite: minimum eigenvalue {min_eig:.3e}"
            )));
        }
        Ok(())
    }
}

/// Builds the dephased Bell state for the given phase and visibility.
///
/// # Errors
///
/// Rejects a non-finite phase and any visibility outside `[0, 1]`.
pub fn make_dephased_bell(params: DephasedBellParams) -> Result<TwoPhotonState> {
    if !params.phi.is_finite() {
        return Err(Error::param("phi", format!("must be finite, got {}", params.phi)));
    }
    if !(0.0..=1.0).contains(&params.visibility) {
        return Err(Error::param(
            "visibility",
            format!("must lie in [0, 1], got {}", params.visibility),
        ));
    }
    let mut rho = Matrix4::zeros();
    let half = Complex64::new(0.5, 0.0);
    let coherence = Complex64::from_polar(params.visibility / 2.0, params.phi);
    rho[(HH, HH)] = half;
    rho[(VV, VV)] = half;
    // <VV| rho |HH> carries e^{+i phi}; its mirror carries the conjugate.
    rho[(VV, HH)] = coherence;
    rho[(HH, VV)] = coherence.conj();
    Ok(TwoPhotonState { rho })
}

/// Jones matrix of a half-wave plate with its fast axis at `setting.angle`:
/// `[[cos 2t, sin 2t], [sin 2t, -cos 2t]]` over `(H, V)`. Involutory, so
/// applying the same plate twice is the identity.
pub fn hwp_jones(setting: WaveplateSetting) -> Matrix2<f64> {
    let (s, c) = (2.0 * setting.angle).sin_cos();
    Matrix2::new(c, s, s, -c)
}

/// Outcome amplitudes after both photons of a pure state
/// `(|HH> + e^{i phi}|VV>)/sqrt(2)` pass half-wave plates at 22.5 degrees,
/// in basis order `(HH, HV, VH, VV)`.
///
/// The equal-polarization outcomes interfere constructively and carry
/// `(1 + e^{i phi})/(2 sqrt(2))`; the crossed outcomes carry
/// `(1 - e^{i phi})/(2 sqrt(2))`. Squared magnitudes sum to one.
pub fn postselect_amplitudes(phi: f64) -> [Complex64; 4] {
    let norm = 1.0 / (2.0 * std::f64::consts::SQRT_2);
    let rot = Complex64::from_polar(1.0, phi);
    let same = (Complex64::new(1.0, 0.0) + rot) * norm;
    let crossed = (Complex64::new(1.0, 0.0) - rot) * norm;
    [same, crossed, crossed, same]
}

/// Probability that both photons exit the transmitted ports of their
/// polarizing beam splitters, with the signal and idler half-wave plates at
/// the given settings.
///
/// A plate at angle `t` followed by a transmitted-port detection projects
/// that photon onto `|d_t> = cos 2t |H> + sin 2t |V>`, so the coincidence
/// probability is the expectation of `|d_s d_i><d_s d_i|` in the state.
///
/// # Errors
///
/// Returns the state-validation error if `state` violates its invariants.
pub fn coincidence_probability(
    state: &TwoPhotonState,
    signal: WaveplateSetting,
    idler: WaveplateSetting,
) -> Result<f64> {
    state.validate()?;
    let (ss, cs) = (2.0 * signal.angle).sin_cos();
    let (si, ci) = (2.0 * idler.angle).sin_cos();
    let ket = Vector4::new(
        Complex64::new(cs * ci, 0.0),
        Complex64::new(cs * si, 0.0),
        Complex64::new(ss * ci, 0.0),
        Complex64::new(ss * si, 0.0),
    );
    let value = (ket.adjoint() * state.rho * ket)[(0, 0)].re;
    Ok(value.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::fit_fringe;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;
    use rand::Rng;
    use std::f64::consts::PI;

    fn bell(phi: f64, visibility: f64) -> TwoPhotonState {
        make_dephased_bell(DephasedBellParams { phi, visibility }).unwrap()
    }

    #[test]
    fn pure_bell_state_entries() {
        let state = bell(0.0, 1.0);
        let rho = state.matrix();
        assert_eq!(rho[(HH, HH)], Complex64::new(0.5, 0.0));
        assert_eq!(rho[(VV, VV)], Complex64::new(0.5, 0.0));
        assert_eq!(rho[(VV, HH)], Complex64::new(0.5, 0.0));
        assert_eq!(rho[(HV, HV)], Complex64::new(0.0, 0.0));
        assert_eq!(rho[(VH, VH)], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn fully_dephased_state_is_diagonal() {
        let state = bell(1.234, 0.0);
        assert_eq!(state.matrix()[(VV, HH)], Complex64::new(0.0, 0.0));
        assert_eq!(state.matrix()[(HH, VV)], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn quarter_turn_phase_gives_imaginary_coherence() {
        let state = bell(PI / 2.0, 1.0);
        let c = state.matrix()[(VV, HH)];
        assert_abs_diff_eq!(c.re, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(c.im, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn visibility_outside_unit_interval_is_rejected() {
        for bad in [-0.1, 1.1, f64::NAN] {
            let result = make_dephased_bell(DephasedBellParams {
                phi: 0.0,
                visibility: bad,
            });
            assert!(matches!(
                result,
                Err(Error::InvalidParameter { name: "visibility", .. })
            ));
        }
    }

    #[test]
    fn non_finite_phase_is_rejected() {
        for bad in [f64::NAN, f64::INFINITY] {
            let result = make_dephased_bell(DephasedBellParams {
                phi: bad,
                visibility: 1.0,
            });
            assert!(matches!(
                result,
                Err(Error::InvalidParameter { name: "phi", .. })
            ));
        }
    }

    #[test]
    fn hwp_at_zero_flips_v() {
        let m = hwp_jones(WaveplateSetting::from_radians(0.0));
        assert_relative_eq!(m, Matrix2::new(1.0, 0.0, 0.0, -1.0), epsilon = 1e-15);
    }

    #[test]
    fn hwp_at_diagonal_is_hadamard_like() {
        let m = hwp_jones(WaveplateSetting::DIAGONAL);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert_relative_eq!(m, Matrix2::new(r, r, r, -r), epsilon = 1e-15);
    }

    proptest! {
        #[test]
        fn hwp_is_involutory(angle in -PI..PI) {
            let m = hwp_jones(WaveplateSetting::from_radians(angle));
            let id = m * m;
            prop_assert!((id - Matrix2::identity()).abs().max() < 1e-12);
        }

        #[test]
        fn coincidence_bases_sum_to_half(
            phi in -10.0f64..10.0,
            visibility in 0.0f64..=1.0,
        ) {
            let state = bell(phi, visibility);
            let con = coincidence_probability(
                &state,
                WaveplateSetting::DIAGONAL,
                WaveplateSetting::DIAGONAL,
            ).unwrap();
            let des = coincidence_probability(
                &state,
                WaveplateSetting::DIAGONAL,
                WaveplateSetting::ANTIDIAGONAL,
            ).unwrap();
            prop_assert!((con + des - 0.5).abs() < 1e-12);
        }

        #[test]
        fn coincidence_matches_closed_form(
            phi in -10.0f64..10.0,
            visibility in 0.0f64..=1.0,
        ) {
            let state = bell(phi, visibility);
            let con = coincidence_probability(
                &state,
                WaveplateSetting::DIAGONAL,
                WaveplateSetting::DIAGONAL,
            ).unwrap();
            let des = coincidence_probability(
                &state,
                WaveplateSetting::DIAGONAL,
                WaveplateSetting::ANTIDIAGONAL,
            ).unwrap();
            prop_assert!((con - 0.25 * (1.0 + visibility * phi.cos())).abs() < 1e-12);
            prop_assert!((des - 0.25 * (1.0 - visibility * phi.cos())).abs() < 1e-12);
        }
    }

    #[test]
    fn coincidence_examples() {
        let con = |phi, vis| {
            coincidence_probability(
                &bell(phi, vis),
                WaveplateSetting::DIAGONAL,
                WaveplateSetting::DIAGONAL,
            )
            .unwrap()
        };
        let des = |phi, vis| {
            coincidence_probability(
                &bell(phi, vis),
                WaveplateSetting::DIAGONAL,
                WaveplateSetting::ANTIDIAGONAL,
            )
            .unwrap()
        };
        assert_abs_diff_eq!(con(0.0, 1.0), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(des(0.0, 1.0), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(con(PI, 1.0), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(des(PI, 1.0), 0.5, epsilon = 1e-15);
        // Full dephasing: both bases flat at 1/4 for any phase.
        assert_abs_diff_eq!(con(0.77, 0.0), 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(des(0.77, 0.0), 0.25, epsilon = 1e-15);
    }

    #[test]
    fn postselect_amplitudes_examples() {
        // phi = 0: all weight on the equal-polarization outcomes,
        // |1 + 1|^2 / 8 = 1/2 each.
        let a = postselect_amplitudes(0.0);
        assert_abs_diff_eq!(a[HH].norm_sqr(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(a[HV].norm_sqr(), 0.0, epsilon = 1e-15);
        // phi = pi: all weight on the crossed outcomes.
        let a = postselect_amplitudes(PI);
        assert_abs_diff_eq!(a[HH].norm_sqr(), 0.0, epsilon = 1e-30);
        assert_abs_diff_eq!(a[VH].norm_sqr(), 0.5, epsilon = 1e-15);
        // phi = pi/2: |1 +/- i|^2 / 8 = 1/4 on every outcome.
        let a = postselect_amplitudes(PI / 2.0);
        let norm = 1.0 / (2.0 * std::f64::consts::SQRT_2);
        let expect_same = (Complex64::new(1.0, 0.0) + Complex64::new(0.0, 1.0)) * norm;
        let expect_crossed = (Complex64::new(1.0, 0.0) - Complex64::new(0.0, 1.0)) * norm;
        assert_abs_diff_eq!((a[HH] - expect_same).norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!((a[HV] - expect_crossed).norm(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(a[HH].norm_sqr(), 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(a[VV].norm_sqr(), 0.25, epsilon = 1e-15);
    }

    #[test]
    fn amplitudes_are_normalized_and_group_into_fringe_probabilities() {
        // On a phase grid, the same-polarization and crossed-polarization
        // amplitude groups must reproduce twice the two coincidence
        // probabilities of the pure (V = 1) state.
        for k in 0..100 {
            let phi = -10.0 + 20.0 * (k as f64) / 99.0;
            let a = postselect_amplitudes(phi);
            let total: f64 = a.iter().map(|c| c.norm_sqr()).sum();
            assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
            let state = bell(phi, 1.0);
            let con = coincidence_probability(
                &state,
                WaveplateSetting::DIAGONAL,
                WaveplateSetting::DIAGONAL,
            )
            .unwrap();
            let des = coincidence_probability(
                &state,
                WaveplateSetting::DIAGONAL,
                WaveplateSetting::ANTIDIAGONAL,
            )
            .unwrap();
            let same_group = a[HH].norm_sqr() + a[VV].norm_sqr();
            let crossed_group = a[HV].norm_sqr() + a[VH].norm_sqr();
            assert_abs_diff_eq!(same_group, 2.0 * con, epsilon = 1e-12);
            assert_abs_diff_eq!(crossed_group, 2.0 * des, epsilon = 1e-12);
        }
    }

    #[test]
    fn random_parameters_always_yield_valid_states() {
        let mut rng = crate::rng::stream(11, crate::rng::StreamDomain::CardPattern, 0);
        for _ in 0..1000 {
            let phi = rng.random_range(-30.0..30.0);
            let visibility = rng.random_range(0.0..=1.0);
            let state = bell(phi, visibility);
            state.validate().expect("dephased Bell state must be valid");
        }
    }

    #[test]
    fn validation_rejects_broken_matrices() {
        // Non-Hermitian.
        let mut rho = Matrix4::zeros();
        rho[(0, 0)] = Complex64::new(0.5, 0.0);
        rho[(3, 3)] = Complex64::new(0.5, 0.0);
        rho[(0, 3)] = Complex64::new(0.4, 0.0);
        rho[(3, 0)] = Complex64::new(0.1, 0.0);
        assert!(matches!(
            TwoPhotonState::new(rho),
            Err(Error::InvalidState(_))
        ));

        // Wrong trace.
        let rho = Matrix4::identity().map(|x: f64| Complex64::new(x, 0.0));
        assert!(matches!(
            TwoPhotonState::new(rho),
            Err(Error::InvalidState(_))
        ));

        // Hermitian, unit trace, but indefinite.
        let mut rho = Matrix4::zeros();
        rho[(0, 0)] = Complex64::new(0.6, 0.0);
        rho[(1, 1)] = Complex64::new(0.5, 0.0);
        rho[(2, 2)] = Complex64::new(-0.1, 0.0);
        rho[(3, 3)] = Complex64::new(0.0, 0.0);
        let err = TwoPhotonState::new(rho).unwrap_err();
        assert!(err.to_string().contains("positive semidefinite"), "{err}");
    }

    #[test]
    fn coincidence_probability_rejects_invalid_states() {
        let state = TwoPhotonState::from_matrix_unchecked(Matrix4::zeros());
        let result = coincidence_probability(
            &state,
            WaveplateSetting::DIAGONAL,
            WaveplateSetting::DIAGONAL,
        );
        assert!(matches!(result, Err(Error::InvalidState(_))));
    }

    #[test]
    fn analytic_sweep_fit_recovers_visibility() {
        for &v in &[1.0, 0.62, 0.0] {
            let phis: Vec<f64> = (0..32).map(|k| 2.0 * PI * k as f64 / 32.0).collect();
            let rates: Vec<f64> = phis
                .iter()
                .map(|&phi| {
                    coincidence_probability(
                        &bell(phi, v),
                        WaveplateSetting::DIAGONAL,
                        WaveplateSetting::DIAGONAL,
                    )
                    .unwrap()
                })
                .collect();
            let fit = fit_fringe(&phis, &rates).unwrap();
            assert_abs_diff_eq!(fit.visibility, v, epsilon = 1e-9);
        }
    }
}
