//! Two-party authentication with phase key cards.
//!
//! Each party holds a transparent card whose per-pixel delay is a random
//! pattern quantized to half-wavelength steps. Inserting both cards into
//! the two clockwise paths and trimming the global phase turns the whole
//! interferometer into a bucket comparator:
//!
//! * **Matched cards** cancel pixel-for-pixel (`delta = 0` everywhere) and
//!   every pixel's total phase is an exact multiple of `2 pi`, so the
//!   destructive output stays perfectly dark. The physical comparison
//!   happens without either card's pattern ever being readable from a
//!   single arm — each photon alone carries no fringe.
//! * **Mismatched cards** scatter the relative delay far beyond the
//!   coherence length at most pixels and randomize the parity elsewhere,
//!   so detected pairs split evenly between the outputs.
//!
//! Authentication therefore reduces to counting: a destructive fraction
//! near zero means "same card", a fraction near one half means "different
//! card". Sample-size planning for that decision is exact binomial, not a
//! normal approximation, because the budgets of interest sit in the
//! small-count regime.

use rand::Rng;
use rand_distr::{Poisson, StandardNormal};
use statrs::distribution::{Binomial, DiscreteCDF};

use crate::error::{Error, Result};
use crate::imaging::{Basis, PairSampler, MAX_PAIRS};
use crate::parallel;
use crate::rng::{self, StreamDomain};
use crate::scene::{
    beam_weights, fringe_field_from_maps, rasterize_arm, wrap_angle, GridSpec, PhaseMap,
    SceneConfig, DEFAULT_PUMP_WAVELENGTH,
};

/// Pairs per work unit when bucket totals are accumulated in parallel.
const PAIR_BATCH: u64 = 8192;

/// Smallest card delay level, in half-wavelength steps.
pub const CARD_LEVEL_MIN: u32 = 120;
/// Largest card delay level, in half-wavelength steps.
pub const CARD_LEVEL_MAX: u32 = 320;
/// Default card quantization step: half the down-converted photon
/// wavelength, which equals the pump wavelength.
pub const DEFAULT_CARD_STEP: f64 = DEFAULT_PUMP_WAVELENGTH;
/// Default acceptance threshold on the destructive fraction.
pub const DEFAULT_THRESHOLD: f64 = 0.05;
/// Search cap for [`required_pairs`].
const MAX_REQUIRED_PAIRS: u64 = 10_000_000;

/// A phase key card: an identifier plus a non-negative per-pixel delay
/// pattern in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct KeyCard {
    id: String,
    pattern: PhaseMap,
}

impl KeyCard {
    /// Wraps an existing delay pattern as a card.
    ///
    /// # Errors
    ///
    /// Every delay must be non-negative (the map itself already guarantees
    /// finiteness).
    pub fn new(id: impl Into<String>, pattern: PhaseMap) -> Result<Self> {
        if pattern.values().iter().any(|&v| v < 0.0) {
            return Err(Error::param("pattern", "card delays must be non-negative"));
        }
        Ok(KeyCard {
            id: id.into(),
            pattern,
        })
    }

    /// Card identifier.
    pub fn id(&self) -> &str {
        &self.id
    }

    /// The card's delay pattern.
    pub fn pattern(&self) -> &PhaseMap {
        &self.pattern
    }

    /// The grid the card is printed on.
    pub fn grid(&self) -> &GridSpec {
        self.pattern.grid()
    }
}

/// Outcome of an authentication run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    /// Destructive fraction at or below the threshold: cards match.
    Accept,
    /// Destructive fraction above the threshold: cards differ.
    Reject,
}

/// Counts and verdict of one authentication run.
#[derive(Debug, Clone, PartialEq)]
pub struct AuthResult {
    /// Pairs detected in the constructive output.
    pub n_constructive: u64,
    /// Pairs detected in the destructive output.
    pub n_destructive: u64,
    /// `n_destructive / (n_constructive + n_destructive)`.
    pub destructive_fraction: f64,
    /// Accept or reject at the configured threshold.
    pub decision: Decision,
    /// Probability that fully mismatched cards (which split detections
    /// evenly) would produce at most the observed destructive count. A
    /// tiny value certifies the match.
    pub p_value: f64,
}

/// Deterministically generates a card for `seed` with delays of
/// [`CARD_LEVEL_MIN`]..=[`CARD_LEVEL_MAX`] steps of `step` meters.
pub fn generate_card_with_step(
    grid: GridSpec,
    seed: u64,
    id: impl Into<String>,
    step: f64,
) -> Result<KeyCard> {
    grid.validate()?;
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::param(
            "step",
            format!("must be finite and positive, got {step}"),
        ));
    }
    let values = (0..grid.len())
        .map(|i| {
            let mut rng = rng::stream(seed, StreamDomain::CardPattern, i as u64);
            let level: u32 = rng.random_range(CARD_LEVEL_MIN..=CARD_LEVEL_MAX);
            level as f64 * step
        })
        .collect();
    KeyCard::new(id, PhaseMap::new(grid, values)?)
}

/// [`generate_card_with_step`] at the default half-wavelength step.
pub fn generate_card(grid: GridSpec, seed: u64, id: impl Into<String>) -> Result<KeyCard> {
    generate_card_with_step(grid, seed, id, DEFAULT_CARD_STEP)
}

/// Adds seeded Gaussian delay noise of the given RMS to a card, clamping
/// at zero. The same seed always produces the same unit noise pattern, so
/// sweeping `noise_rms` scales a fixed perturbation rather than redrawing
/// it.
pub fn tamper_model(card: &KeyCard, noise_rms: f64, seed: u64) -> Result<KeyCard> {
    if !(noise_rms.is_finite() && noise_rms >= 0.0) {
        return Err(Error::param(
            "noise_rms",
            format!("must be finite and non-negative, got {noise_rms}"),
        ));
    }
    let grid = *card.grid();
    let values = card
        .pattern
        .values()
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let mut rng = rng::stream(seed, StreamDomain::CardNoise, i as u64);
            let z: f64 = rng.sample(StandardNormal);
            (v + noise_rms * z).max(0.0)
        })
        .collect();
    KeyCard::new(
        format!("{}#tampered", card.id),
        PhaseMap::new(grid, values)?,
    )
}

/// Base scene for bucket authentication on a card grid: default optics,
/// no objects, and no dark counts (the comparator integrates the whole
/// field onto one detector pair, so per-pixel dark rates do not apply).
pub fn default_auth_scene(grid: GridSpec) -> SceneConfig {
    let mut scene = SceneConfig::with_defaults(grid);
    scene.noise.dark_rate = 0.0;
    scene
}

fn bucket_dark(dark_rate: f64, seed: u64, domain: StreamDomain) -> u64 {
    if dark_rate <= 0.0 {
        return 0;
    }
    let poisson = Poisson::new(dark_rate).expect("validated dark rate");
    let mut rng = rng::stream(seed, domain, 0);
    let draw: f64 = rng.sample(poisson);
    draw as u64
}

fn count_detected(sampler: &PairSampler, domain: StreamDomain, pairs: u64, seed: u64) -> u64 {
    let batches = pairs.div_ceil(PAIR_BATCH) as usize;
    parallel::sum_batches(batches, |batch| {
        let start = batch as u64 * PAIR_BATCH;
        let end = (start + PAIR_BATCH).min(pairs);
        let mut hits = 0u64;
        for pair in start..end {
            let mut rng = rng::stream(seed, domain, pair);
            if sampler.draw(&mut rng).is_some() {
                hits += 1;
            }
        }
        hits
    })
}

/// Runs one bucket authentication: Alice's card in the idler clockwise
/// path, Bob's in the signal clockwise path, on top of whatever objects
/// the scene already carries.
///
/// Half the pair budget is spent in each output basis. Before counting,
/// the global trim phase is calibrated on the verifier's optics alone —
/// the circular mean of the card-free fringe phase is zeroed, falling
/// back to no trim when the bare phases cancel completely. The inserted
/// cards never influence the trim: a genuine pair sits on the
/// half-wavelength lattice and is constructive under the bare
/// calibration, while a forged pair must not be allowed to re-align the
/// interferometer to its own accidental phase average.
///
/// # Errors
///
/// Card grids must match the scene grid, the threshold must lie in
/// `[0, 0.5)`, and the run must detect at least one pair — otherwise the
/// comparison is reported as indeterminate rather than guessed.
pub fn run_authentication(
    scene: &SceneConfig,
    card_alice: &KeyCard,
    card_bob: &KeyCard,
    pairs: u64,
    seed: u64,
    threshold: f64,
) -> Result<AuthResult> {
    scene.validate()?;
    if !(threshold.is_finite() && (0.0..0.5).contains(&threshold)) {
        return Err(Error::param(
            "threshold",
            format!("must lie in [0, 0.5), got {threshold}"),
        ));
    }
    if pairs > MAX_PAIRS {
        return Err(Error::param(
            "pairs",
            format!("budget {pairs} exceeds the supported maximum {MAX_PAIRS}"),
        ));
    }
    for (label, card) in [("alice", card_alice), ("bob", card_bob)] {
        if card.grid() != &scene.grid {
            return Err(Error::GridMismatch(format!(
                "card {:?} ({label}) is {}x{}, scene grid is {}x{}",
                card.id,
                card.grid().width,
                card.grid().height,
                scene.grid.width,
                scene.grid.height
            )));
        }
    }

    // Trim: zero the circular mean of the phase of the verifier's own
    // optics, before any card goes in. Calibrating on the inserted cards
    // instead would align the interferometer to a forged card's
    // accidental phase resultant and hand the forger a lower destructive
    // fraction than the design analysis assumes. Genuine cards need no
    // further trim: their half-wavelength lattice contributes a multiple
    // of 2 pi at every pixel.
    let bare_signal = rasterize_arm(&scene.signal_cw_objects, &scene.grid)?;
    let bare_idler = rasterize_arm(&scene.idler_cw_objects, &scene.grid)?;
    let mut trimmed = scene.clone();
    let bare_field = fringe_field_from_maps(&trimmed, &bare_signal, &bare_idler)?;
    let (mut sum_cos, mut sum_sin) = (0.0, 0.0);
    for &phi in bare_field.phi_total() {
        sum_cos += phi.cos();
        sum_sin += phi.sin();
    }
    let count = bare_field.phi_total().len() as f64;
    if (sum_cos / count).hypot(sum_sin / count) >= 1e-12 {
        trimmed.trim_phase += wrap_angle(-sum_sin.atan2(sum_cos));
    }

    let mut signal_map = bare_signal;
    signal_map.add_assign(&card_bob.pattern)?;
    let mut idler_map = bare_idler;
    idler_map.add_assign(&card_alice.pattern)?;
    let field = fringe_field_from_maps(&trimmed, &signal_map, &idler_map)?;

    let weights = beam_weights(&scene.grid, &scene.beam)?;
    let eta = scene.noise.heralding_efficiency;
    let pairs_con = pairs / 2;
    let pairs_des = pairs - pairs_con;
    let sampler_con = PairSampler::new(&weights, &field, eta, Basis::Constructive);
    let sampler_des = PairSampler::new(&weights, &field, eta, Basis::Destructive);
    let mut n_con = count_detected(
        &sampler_con,
        StreamDomain::PairConstructive,
        pairs_con,
        seed,
    );
    let mut n_des = count_detected(
        &sampler_des,
        StreamDomain::PairDestructive,
        pairs_des,
        seed,
    );
    n_con += bucket_dark(scene.noise.dark_rate, seed, StreamDomain::DarkConstructive);
    n_des += bucket_dark(scene.noise.dark_rate, seed, StreamDomain::DarkDestructive);

    let total = n_con + n_des;
    if total == 0 {
        return Err(Error::IndeterminateAuth);
    }
    let fraction = n_des as f64 / total as f64;
    let decision = if fraction <= threshold {
        Decision::Accept
    } else {
        Decision::Reject
    };
    let p_value = Binomial::new(0.5, total)
        .expect("valid binomial")
        .cdf(n_des);
    Ok(AuthResult {
        n_constructive: n_con,
        n_destructive: n_des,
        destructive_fraction: fraction,
        decision,
        p_value,
    })
}

fn binomial_cdf(n: u64, p: f64, k: i64) -> f64 {
    if k < 0 {
        return 0.0;
    }
    if k >= n as i64 {
        return 1.0;
    }
    Binomial::new(p, n).expect("valid binomial").cdf(k as u64)
}

/// Smallest pair budget (in *detected* pairs) for which a cutoff on the
/// destructive count separates mismatched from matched cards with the
/// requested error rates.
///
/// `alpha` bounds the false-accept probability: cards whose destructive
/// probability per detection is `mismatch_fraction` must fall at or below
/// the cutoff with probability at most `alpha`. `beta` bounds the
/// false-reject probability for genuine cards at `match_fraction`. The
/// search is exact binomial at every candidate size.
///
/// # Errors
///
/// Fails when the error rates are not probabilities strictly inside
/// `(0, 1)`, when the fractions are not probabilities, or when
/// `match_fraction >= mismatch_fraction`, in which case no sample size can
/// ever separate the hypotheses.
pub fn required_pairs(
    alpha: f64,
    beta: f64,
    mismatch_fraction: f64,
    match_fraction: f64,
) -> Result<u64> {
    for (name, value) in [("alpha", alpha), ("beta", beta)] {
        if !(value.is_finite() && 0.0 < value && value < 1.0) {
            return Err(Error::param(
                name,
                format!("must lie strictly inside (0, 1), got {value}"),
            ));
        }
    }
    for (name, value) in [
        ("mismatch_fraction", mismatch_fraction),
        ("match_fraction", match_fraction),
    ] {
        if !(value.is_finite() && (0.0..=1.0).contains(&value)) {
            return Err(Error::param(
                name,
                format!("must lie in [0, 1], got {value}"),
            ));
        }
    }
    if match_fraction >= mismatch_fraction {
        return Err(Error::NoFiniteSampleSize(format!(
            "match fraction {match_fraction} does not fall below mismatch fraction \
             {mismatch_fraction}; the hypotheses are inseparable"
        )));
    }
    for n in 1..=MAX_REQUIRED_PAIRS {
        // Largest cutoff that keeps the false-accept rate at or below
        // alpha. cdf is monotone in the cutoff, so binary search works.
        let (mut lo, mut hi) = (-1i64, n as i64);
        // Invariant: cdf(lo) <= alpha < cdf(hi + 1); start with lo = -1
        // (cdf 0) and shrink from above.
        while lo < hi {
            let mid = lo + (hi - lo + 1) / 2;
            if binomial_cdf(n, mismatch_fraction, mid) <= alpha {
                lo = mid;
            } else {
                hi = mid - 1;
            }
        }
        let cutoff = lo;
        let false_reject = 1.0 - binomial_cdf(n, match_fraction, cutoff);
        if false_reject <= beta {
            return Ok(n);
        }
    }
    Err(Error::NoFiniteSampleSize(format!(
        "no budget up to {MAX_REQUIRED_PAIRS} meets alpha = {alpha}, beta = {beta} for \
         fractions {mismatch_fraction} vs {match_fraction}"
    )))
}
