//! Simulator for two-photon interferometric imaging of phase objects and
//! for phase-card authentication.
//!
//! # The instrument
//!
//! A pump laser drives spontaneous parametric down-conversion, producing
//! photon pairs whose creation time is uncertain over the pump's long
//! coherence time but whose two halves are born together. Signal and
//! idler each enter their own Sagnac-type loop, where polarization decides
//! the travel direction: one polarization takes the clockwise path, the
//! other the anticlockwise path, and only the clockwise path passes
//! through whatever transparent object is under study.
//!
//! Detection post-selects the pairs in which both photons took the same
//! kind of path (both delayed or both undelayed). Those two alternatives
//! are indistinguishable once each photon's polarization is measured in a
//! rotated basis, so they interfere; the resulting two-photon fringe
//! depends on the *sum* of the two loop delays through the phase and on
//! their *difference* through a coherence-length envelope. Each photon by
//! itself shows no fringe at all — the observable lives only in
//! coincidences.
//!
//! Two consequences drive everything in this crate:
//!
//! * A phase object in one loop suppresses the fringe locally (its delay
//!   exceeds the pair's coherence length). Placing an *identical* object
//!   in the other loop restores it, because the delay difference returns
//!   to zero while the summed delay only shifts the fringe phase. Imaging
//!   the coincidence rate in two complementary analyzer bases and
//!   subtracting yields pictures of objects that neither camera arm could
//!   see alone.
//! * Two parties holding transparent key cards can compare them without
//!   revealing the patterns: matched cards keep the destructive output
//!   dark, mismatched cards split detections evenly, and a handful of
//!   detected pairs decides between those hypotheses with exact binomial
//!   error bounds.
//!
//! # Crate layout
//!
//! * [`polarization`] — two-photon density matrices, analyzer settings,
//!   and closed-form coincidence probabilities.
//! * [`scene`] — pixel grids, glass objects, beam profiles, and the
//!   per-pixel fringe field they generate.
//! * [`imaging`] — analytic rate maps, Monte Carlo frame simulation,
//!   difference images, contrast and goodness-of-fit statistics.
//! * [`auth`] — key-card generation, the bucket authentication run, and
//!   exact binomial sample-size planning.
//! * [`stats`] — fringe fitting and small statistical helpers.
//! * [`io`] — PGM images, JSON scene documents, stats and sweep files.
//! * [`rng`] — counter-addressed random streams that make every
//!   simulation reproducible.
//!
//! # Determinism and parallelism
//!
//! Every stochastic routine takes an explicit seed, gives each photon
//! pair (and each pixel's noise draw) its own addressed random stream,
//! and accumulates in integers, so results are bit-identical across
//! runs, thread counts, and the `parallel` feature flag. With the
//! default `parallel` feature, pair loops and per-pixel maps run on
//! rayon; disabling it leaves a pure sequential build.

pub mod auth;
pub mod error;
pub mod imaging;
pub mod io;
mod parallel;
pub mod polarization;
pub mod rng;
pub mod scene;
pub mod stats;

pub use auth::{
    generate_card, generate_card_with_step, required_pairs, run_authentication, tamper_model,
    AuthResult, Decision, KeyCard,
};
pub use error::{Error, Result, SceneDocError};
pub use imaging::{
    chi2_frame_test, difference_image, expected_counts, expected_rate_map, phase_sweep,
    predicted_snr, simulate_frame, snr, Basis, Chi2Report, DetectionFrame, DifferenceImage,
    SnrReport, SweepRow,
};
pub use polarization::{
    coincidence_probability, hwp_jones, make_dephased_bell, postselect_amplitudes,
    DephasedBellParams, TwoPhotonState, WaveplateSetting,
};
pub use scene::{
    auto_trim, beam_weights, fringe_field, glass_opd, rasterize_arm, visibility_envelope,
    BeamProfile, Footprint, FringeField, GlassObject, GridSpec, NoiseModel, PhaseMap, RegionSpec,
    SceneConfig,
};
pub use stats::{fit_fringe, FringeFit};
