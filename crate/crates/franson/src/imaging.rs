//! Coincidence imaging: turning a fringe field into detected frames.
//!
//! Every down-converted pair either ends up in the constructive output
//! (projection on diagonal polarization at both analyzers) or, with the
//! idler analyzer rotated to the antidiagonal, in the destructive output.
//! Per pixel the detection probability is
//!
//! ```text
//! p = beam * eta * (1 +/- V cos phi) / 4
//! ```
//!
//! with `+` for the constructive basis and `-` for the destructive one;
//! `beam` is the normalized illumination weight, `eta` the heralding
//! efficiency, and `V`, `phi` come from the scene's fringe field. The two
//! branches always sum to `beam * eta / 2`: post-selection onto the
//! interfering half of the pairs costs a factor of two before any object
//! enters the picture.
//!
//! Monte Carlo frames draw one position and one acceptance decision per
//! pair from a counter-addressed random stream, so a frame is a pure
//! function of `(scene, basis, pairs, seed)` and does not depend on how
//! many worker threads accumulated it.

use rand::Rng;
use rand_distr::Poisson;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::parallel;
use crate::rng::{self, StreamDomain};
use crate::scene::{beam_weights, fringe_field, FringeField, GridSpec, RegionSpec, SceneConfig};

/// Pairs per work unit when a frame is accumulated in parallel.
const PAIR_BATCH: u64 = 8192;

/// Largest accepted pair budget; keeps per-pixel counters comfortably
/// inside `u32`.
pub const MAX_PAIRS: u64 = 4_000_000_000;

/// Pixels with a smaller expected count are excluded from the frame
/// goodness-of-fit test; the Pearson statistic is only chi-square
/// distributed when every cell carries enough mass.
pub const CHI2_MIN_EXPECTED: f64 = 5.0;

/// Which interferometer output a frame was recorded in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Basis {
    /// Both analyzers at the diagonal setting; fringes peak where
    /// `cos phi = 1`.
    Constructive,
    /// Idler analyzer rotated to the antidiagonal; the fringe inverts.
    Destructive,
}

impl Basis {
    /// Stable lowercase label used in file metadata.
    pub fn label(&self) -> &'static str {
        match self {
            Basis::Constructive => "constructive",
            Basis::Destructive => "destructive",
        }
    }

    /// Parses the label written by [`Basis::label`].
    pub fn from_label(label: &str) -> Result<Self> {
        match label {
            "constructive" => Ok(Basis::Constructive),
            "destructive" => Ok(Basis::Destructive),
            other => Err(Error::BasisMismatch(format!(
                "unknown basis label {other:?}"
            ))),
        }
    }

    fn pair_domain(&self) -> StreamDomain {
        match self {
            Basis::Constructive => StreamDomain::PairConstructive,
            Basis::Destructive => StreamDomain::PairDestructive,
        }
    }

    fn dark_domain(&self) -> StreamDomain {
        match self {
            Basis::Constructive => StreamDomain::DarkConstructive,
            Basis::Destructive => StreamDomain::DarkDestructive,
        }
    }

    /// Fringe sign: `+1` for constructive, `-1` for destructive.
    pub fn sign(&self) -> f64 {
        match self {
            Basis::Constructive => 1.0,
            Basis::Destructive => -1.0,
        }
    }
}

/// One simulated coincidence frame.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionFrame {
    grid: GridSpec,
    counts: Vec<u32>,
    basis: Basis,
    pairs_budget: u64,
    seed: u64,
}

impl DetectionFrame {
    /// Rebuilds a frame from stored parts (for example a decoded image
    /// file).
    pub fn from_parts(
        grid: GridSpec,
        counts: Vec<u32>,
        basis: Basis,
        pairs_budget: u64,
        seed: u64,
    ) -> Result<Self> {
        grid.validate()?;
        if counts.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} counts for a {}x{} grid",
                counts.len(),
                grid.width,
                grid.height
            )));
        }
        Ok(DetectionFrame {
            grid,
            counts,
            basis,
            pairs_budget,
            seed,
        })
    }

    /// The grid the frame was recorded on.
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Row-major coincidence counts.
    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    /// Which output port the frame comes from.
    pub fn basis(&self) -> Basis {
        self.basis
    }

    /// Number of generated pairs the acquisition was budgeted.
    pub fn pairs_budget(&self) -> u64 {
        self.pairs_budget
    }

    /// Seed the acquisition was drawn from.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Sum of all pixel counts.
    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }
}

/// Constructive-minus-destructive image; positive where the fringe is
/// bright, negative where an object flipped it.
#[derive(Debug, Clone, PartialEq)]
pub struct DifferenceImage {
    grid: GridSpec,
    values: Vec<i64>,
}

impl DifferenceImage {
    /// Builds a difference image from raw values (for example a decoded
    /// file).
    pub fn new(grid: GridSpec, values: Vec<i64>) -> Result<Self> {
        grid.validate()?;
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a {}x{} grid",
                values.len(),
                grid.width,
                grid.height
            )));
        }
        Ok(DifferenceImage { grid, values })
    }

    /// The grid the image lives on.
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Row-major signed values.
    pub fn values(&self) -> &[i64] {
        &self.values
    }

    /// Value at pixel `(x, y)`.
    pub fn get(&self, x: u32, y: u32) -> i64 {
        self.values[self.grid.index(x, y)]
    }
}

/// Contrast of a difference image between two disjoint regions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnrReport {
    /// Mean difference value inside the first region.
    pub mean_in: f64,
    /// Mean difference value inside the second region.
    pub mean_out: f64,
    /// Sample standard deviation of the first region.
    pub std_in: f64,
    /// Sample standard deviation of the second region.
    pub std_out: f64,
    /// Combined noise scale `sqrt(std_in^2 + std_out^2)`.
    pub sigma: f64,
    /// `|mean_in - mean_out| / sigma`.
    pub snr: f64,
}

/// Result of the per-pixel goodness-of-fit test of a frame against its
/// expected counts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Chi2Report {
    /// Pearson statistic summed over tested pixels.
    pub statistic: f64,
    /// Number of tested pixels. Pixel counts are independent, so no
    /// constraint is subtracted.
    pub dof: usize,
    /// Upper-tail probability of the statistic.
    pub p_value: f64,
}

/// Per-pair, per-pixel detection probabilities for one basis.
pub(crate) fn rate_map_from_parts(
    weights: &[f64],
    field: &FringeField,
    eta: f64,
    basis: Basis,
) -> Vec<f64> {
    let sign = basis.sign();
    let vis = field.visibility();
    let phi = field.phi_total();
    weights
        .iter()
        .enumerate()
        .map(|(i, &w)| w * eta * 0.25 * (1.0 + sign * vis[i] * phi[i].cos()))
        .collect()
}

/// Probability per generated pair that a coincidence lands in each pixel,
/// for the given output basis.
pub fn expected_rate_map(scene: &SceneConfig, basis: Basis) -> Result<Vec<f64>> {
    let field = fringe_field(scene)?;
    let weights = beam_weights(&scene.grid, &scene.beam)?;
    Ok(rate_map_from_parts(
        &weights,
        &field,
        scene.noise.heralding_efficiency,
        basis,
    ))
}

/// Expected pixel counts for a budget of `pairs`, dark counts included.
pub fn expected_counts(scene: &SceneConfig, basis: Basis, pairs: u64) -> Result<Vec<f64>> {
    let rates = expected_rate_map(scene, basis)?;
    let dark = scene.noise.dark_rate;
    Ok(rates.iter().map(|r| r * pairs as f64 + dark).collect())
}

/// Shared sampling state for drawing pairs against a fringe field.
pub(crate) struct PairSampler {
    cdf: Vec<f64>,
    accept: Vec<f64>,
}

impl PairSampler {
    pub(crate) fn new(weights: &[f64], field: &FringeField, eta: f64, basis: Basis) -> Self {
        let mut cdf = Vec::with_capacity(weights.len());
        let mut acc = 0.0;
        for &w in weights {
            acc += w;
            cdf.push(acc);
        }
        let sign = basis.sign();
        let vis = field.visibility();
        let phi = field.phi_total();
        let accept = (0..weights.len())
            .map(|i| eta * 0.25 * (1.0 + sign * vis[i] * phi[i].cos()))
            .collect();
        PairSampler { cdf, accept }
    }

    /// Draws one pair: its landing pixel from the beam profile, then an
    /// acceptance decision at that pixel's fringe probability. Returns the
    /// pixel index when the pair is detected.
    pub(crate) fn draw<R: Rng>(&self, rng: &mut R) -> Option<usize> {
        let u_pos: f64 = rng.random();
        let pixel = self
            .cdf
            .partition_point(|&c| c <= u_pos)
            .min(self.cdf.len() - 1);
        let u_acc: f64 = rng.random();
        if u_acc < self.accept[pixel] {
            Some(pixel)
        } else {
            None
        }
    }
}

fn validated_sampler(scene: &SceneConfig, basis: Basis, pairs: u64) -> Result<PairSampler> {
    scene.validate()?;
    if pairs > MAX_PAIRS {
        return Err(Error::param(
            "pairs",
            format!("budget {pairs} exceeds the supported maximum {MAX_PAIRS}"),
        ));
    }
    let field = fringe_field(scene)?;
    let weights = beam_weights(&scene.grid, &scene.beam)?;
    Ok(PairSampler::new(
        &weights,
        &field,
        scene.noise.heralding_efficiency,
        basis,
    ))
}

fn dark_counts_for_pixel(dark_rate: f64, seed: u64, domain: StreamDomain, pixel: u64) -> u32 {
    // Poisson::new only rejects non-finite or non-positive rates; the zero
    // case is short-circuited by the caller.
    let poisson = Poisson::new(dark_rate).expect("validated dark rate");
    let mut rng = rng::stream(seed, domain, pixel);
    let draw: f64 = rng.sample(poisson);
    draw as u32
}

fn finish_frame(
    scene: &SceneConfig,
    basis: Basis,
    pairs: u64,
    seed: u64,
    mut counts: Vec<u32>,
    parallel_dark: bool,
) -> DetectionFrame {
    let dark_rate = scene.noise.dark_rate;
    if dark_rate > 0.0 {
        let domain = basis.dark_domain();
        let dark = if parallel_dark {
            parallel::map_indexed(scene.grid.len(), |i| {
                dark_counts_for_pixel(dark_rate, seed, domain, i as u64)
            })
        } else {
            parallel::map_indexed_seq(scene.grid.len(), |i| {
                dark_counts_for_pixel(dark_rate, seed, domain, i as u64)
            })
        };
        for (c, d) in counts.iter_mut().zip(dark) {
            *c += d;
        }
    }
    DetectionFrame {
        grid: scene.grid,
        counts,
        basis,
        pairs_budget: pairs,
        seed,
    }
}

fn batch_fill(
    sampler: &PairSampler,
    basis: Basis,
    pairs: u64,
    seed: u64,
) -> impl Fn(usize, &mut [u32]) + Sync + Send + '_ {
    let domain = basis.pair_domain();
    move |batch, acc| {
        let start = batch as u64 * PAIR_BATCH;
        let end = (start + PAIR_BATCH).min(pairs);
        for pair in start..end {
            let mut rng = rng::stream(seed, domain, pair);
            if let Some(pixel) = sampler.draw(&mut rng) {
                acc[pixel] += 1;
            }
        }
    }
}

/// Simulates one coincidence frame.
///
/// The result is bit-identical for a given `(scene, basis, pairs, seed)`
/// regardless of thread count or of whether the parallel feature is
/// enabled.
pub fn simulate_frame(
    scene: &SceneConfig,
    basis: Basis,
    pairs: u64,
    seed: u64,
) -> Result<DetectionFrame> {
    let sampler = validated_sampler(scene, basis, pairs)?;
    let batches = pairs.div_ceil(PAIR_BATCH) as usize;
    let counts = parallel::accumulate_counts(
        batches,
        scene.grid.len(),
        batch_fill(&sampler, basis, pairs, seed),
    );
    Ok(finish_frame(scene, basis, pairs, seed, counts, true))
}

/// Single-threaded variant of [`simulate_frame`], kept for the benchmark
/// suite and determinism tests.
pub fn simulate_frame_sequential(
    scene: &SceneConfig,
    basis: Basis,
    pairs: u64,
    seed: u64,
) -> Result<DetectionFrame> {
    let sampler = validated_sampler(scene, basis, pairs)?;
    let batches = pairs.div_ceil(PAIR_BATCH) as usize;
    let counts = parallel::accumulate_counts_seq(
        batches,
        scene.grid.len(),
        batch_fill(&sampler, basis, pairs, seed),
    );
    Ok(finish_frame(scene, basis, pairs, seed, counts, false))
}

/// Explicit rayon variant of [`simulate_frame`].
#[cfg(feature = "parallel")]
pub fn simulate_frame_parallel(
    scene: &SceneConfig,
    basis: Basis,
    pairs: u64,
    seed: u64,
) -> Result<DetectionFrame> {
    let sampler = validated_sampler(scene, basis, pairs)?;
    let batches = pairs.div_ceil(PAIR_BATCH) as usize;
    let counts = parallel::accumulate_counts_par(
        batches,
        scene.grid.len(),
        batch_fill(&sampler, basis, pairs, seed),
    );
    Ok(finish_frame(scene, basis, pairs, seed, counts, true))
}

/// Constructive-minus-destructive difference of two frames.
///
/// # Errors
///
/// The first frame must be constructive and the second destructive, on the
/// same grid.
pub fn difference_image(
    constructive: &DetectionFrame,
    destructive: &DetectionFrame,
) -> Result<DifferenceImage> {
    if constructive.basis != Basis::Constructive {
        return Err(Error::BasisMismatch(
            "first frame must come from the constructive output".into(),
        ));
    }
    if destructive.basis != Basis::Destructive {
        return Err(Error::BasisMismatch(
            "second frame must come from the destructive output".into(),
        ));
    }
    if constructive.grid != destructive.grid {
        return Err(Error::GridMismatch(format!(
            "constructive frame is {}x{}, destructive is {}x{}",
            constructive.grid.width,
            constructive.grid.height,
            destructive.grid.width,
            destructive.grid.height
        )));
    }
    let values = constructive
        .counts
        .iter()
        .zip(&destructive.counts)
        .map(|(&c, &d)| c as i64 - d as i64)
        .collect();
    Ok(DifferenceImage {
        grid: constructive.grid,
        values,
    })
}

fn region_stats(image: &DifferenceImage, region: &RegionSpec) -> Result<(f64, f64)> {
    region.validate(image.grid())?;
    let n = region.len();
    if n < 2 {
        return Err(Error::InvalidRegion(format!(
            "region needs at least 2 pixels for a sample deviation, has {n}"
        )));
    }
    let mut sum = 0.0;
    for (x, y) in region.pixels() {
        sum += image.get(x, y) as f64;
    }
    let mean = sum / n as f64;
    let mut ss = 0.0;
    for (x, y) in region.pixels() {
        let d = image.get(x, y) as f64 - mean;
        ss += d * d;
    }
    Ok((mean, (ss / (n as f64 - 1.0)).sqrt()))
}

/// Region contrast of a difference image.
///
/// Pixel statistics are computed with the sample (n-1) deviation inside
/// each region; the noise scale combines both regions in quadrature.
///
/// # Errors
///
/// Regions must lie inside the grid, contain at least two pixels each, and
/// not overlap. If both regions are exactly constant the contrast is
/// undefined and [`Error::ZeroVariance`] is returned.
pub fn snr(
    image: &DifferenceImage,
    region_in: &RegionSpec,
    region_out: &RegionSpec,
) -> Result<SnrReport> {
    if region_in.intersects(region_out) {
        return Err(Error::InvalidRegion(
            "contrast regions overlap; they must be disjoint".into(),
        ));
    }
    let (mean_in, std_in) = region_stats(image, region_in)?;
    let (mean_out, std_out) = region_stats(image, region_out)?;
    let sigma = std_in.hypot(std_out);
    if sigma == 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok(SnrReport {
        mean_in,
        mean_out,
        std_in,
        std_out,
        sigma,
        snr: (mean_in - mean_out).abs() / sigma,
    })
}

/// Predicted region contrast for a finite photon budget, by error
/// propagation instead of simulation.
///
/// Pixel counts are treated as independent Poisson draws; the predicted
/// sample variance of a region combines the spatial variance of the
/// expected difference with the mean per-pixel shot variance
/// (`expected_con + expected_des`, dark counts included).
pub fn predicted_snr(
    scene: &SceneConfig,
    pairs: u64,
    region_in: &RegionSpec,
    region_out: &RegionSpec,
) -> Result<f64> {
    if region_in.intersects(region_out) {
        return Err(Error::InvalidRegion(
            "contrast regions overlap; they must be disjoint".into(),
        ));
    }
    let mu_con = expected_counts(scene, Basis::Constructive, pairs)?;
    let mu_des = expected_counts(scene, Basis::Destructive, pairs)?;
    let grid = &scene.grid;
    let stats = |region: &RegionSpec| -> Result<(f64, f64)> {
        region.validate(grid)?;
        let n = region.len();
        if n < 2 {
            return Err(Error::InvalidRegion(format!(
                "region needs at least 2 pixels for a sample deviation, has {n}"
            )));
        }
        let mut sum_d = 0.0;
        let mut sum_v = 0.0;
        for (x, y) in region.pixels() {
            let i = grid.index(x, y);
            sum_d += mu_con[i] - mu_des[i];
            sum_v += mu_con[i] + mu_des[i];
        }
        let mean_d = sum_d / n as f64;
        let mut spatial = 0.0;
        for (x, y) in region.pixels() {
            let i = grid.index(x, y);
            let dev = mu_con[i] - mu_des[i] - mean_d;
            spatial += dev * dev;
        }
        let variance = spatial / (n as f64 - 1.0) + sum_v / n as f64;
        Ok((mean_d, variance))
    };
    let (mean_in, var_in) = stats(region_in)?;
    let (mean_out, var_out) = stats(region_out)?;
    let sigma = (var_in + var_out).sqrt();
    if sigma == 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok((mean_in - mean_out).abs() / sigma)
}

/// Pearson goodness-of-fit of a frame against expected counts.
///
/// Pixels whose expectation falls below [`CHI2_MIN_EXPECTED`] are skipped;
/// the degrees of freedom equal the number of tested pixels.
///
/// # Errors
///
/// Fails when `expected` does not match the frame size or when no pixel
/// clears the expectation threshold.
pub fn chi2_frame_test(frame: &DetectionFrame, expected: &[f64]) -> Result<Chi2Report> {
    if expected.len() != frame.counts.len() {
        return Err(Error::GridMismatch(format!(
            "{} expected values for {} pixels",
            expected.len(),
            frame.counts.len()
        )));
    }
    let mut statistic = 0.0;
    let mut dof = 0usize;
    for (&observed, &mu) in frame.counts.iter().zip(expected) {
        if mu >= CHI2_MIN_EXPECTED {
            let d = observed as f64 - mu;
            statistic += d * d / mu;
            dof += 1;
        }
    }
    if dof == 0 {
        return Err(Error::NoTestablePixels {
            threshold: CHI2_MIN_EXPECTED,
        });
    }
    let dist = ChiSquared::new(dof as f64).expect("positive degrees of freedom");
    Ok(Chi2Report {
        statistic,
        dof,
        p_value: dist.sf(statistic),
    })
}

/// One step of a trim-phase sweep: total counts in both outputs with the
/// trim set to `phase`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    /// Trim phase of this step, in radians.
    pub phase: f64,
    /// Total constructive counts at this step.
    pub constructive_counts: u64,
    /// Total destructive counts at this step.
    pub destructive_counts: u64,
    /// Pair budget spent per basis at this step.
    pub pairs_per_basis: u64,
}

impl SweepRow {
    /// Constructive counts per generated pair.
    pub fn constructive_rate(&self) -> f64 {
        self.constructive_counts as f64 / self.pairs_per_basis as f64
    }

    /// Destructive counts per generated pair.
    pub fn destructive_rate(&self) -> f64 {
        self.destructive_counts as f64 / self.pairs_per_basis as f64
    }
}

/// Sweeps the trim phase over `steps` uniform points in `[0, 2 pi)`,
/// spending `pairs` per basis at each step with an independent child seed.
///
/// Fitting the constructive rate against the phase recovers the scene's
/// effective fringe visibility: the heralding efficiency scales offset and
/// amplitude alike and cancels from their ratio.
///
/// # Errors
///
/// Needs at least 4 steps (the fit solves for three parameters).
pub fn phase_sweep(
    scene: &SceneConfig,
    pairs: u64,
    steps: u32,
    seed: u64,
) -> Result<Vec<SweepRow>> {
    if steps < 4 {
        return Err(Error::param(
            "steps",
            format!("a sweep needs at least 4 steps, got {steps}"),
        ));
    }
    let mut rows = Vec::with_capacity(steps as usize);
    for k in 0..steps {
        let phase = 2.0 * std::f64::consts::PI * k as f64 / steps as f64;
        let mut stepped = scene.clone();
        stepped.trim_phase = phase;
        let step_seed = rng::child_seed(seed, k as u64);
        let con = simulate_frame(&stepped, Basis::Constructive, pairs, step_seed)?;
        let des = simulate_frame(&stepped, Basis::Destructive, pairs, step_seed)?;
        rows.push(SweepRow {
            phase,
            constructive_counts: con.total(),
            destructive_counts: des.total(),
            pairs_per_basis: pairs,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{Footprint, GlassObject, SceneConfig};
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    fn test_grid() -> GridSpec {
        GridSpec::new(8, 8, 1e-5).unwrap()
    }

    fn flat_scene() -> SceneConfig {
        let mut scene = SceneConfig::with_defaults(test_grid());
        scene.noise.dark_rate = 0.0;
        scene.noise.heralding_efficiency = 1.0;
        scene
    }

    fn half_plate_scene() -> SceneConfig {
        let mut scene = flat_scene();
        scene.idler_cw_objects = vec![GlassObject {
            footprint: Footprint::Rectangle {
                x0: 0,
                y0: 0,
                x1: 3,
                y1: 7,
            },
            thickness: 1e-3,
            refractive_index: 1.52,
            tilt_opd_offset: 0.0,
        }];
        scene
    }

    #[test]
    fn rate_map_of_a_flat_scene_splits_the_beam() {
        // phi = 0 and V = 1 everywhere: every accepted pair is
        // constructive, so that map carries beam / 2 and the destructive
        // map vanishes.
        let scene = flat_scene();
        let weights = beam_weights(&scene.grid, &scene.beam).unwrap();
        let con = expected_rate_map(&scene, Basis::Constructive).unwrap();
        let des = expected_rate_map(&scene, Basis::Destructive).unwrap();
        for i in 0..scene.grid.len() {
            assert_relative_eq!(con[i], weights[i] / 2.0, max_relative = 1e-12);
            assert_abs_diff_eq!(des[i], 0.0, epsilon = 1e-16);
        }
        let total: f64 = con.iter().sum();
        assert_abs_diff_eq!(total, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn rate_maps_of_both_bases_sum_to_half_the_beam() {
        let scene = half_plate_scene();
        let weights = beam_weights(&scene.grid, &scene.beam).unwrap();
        let con = expected_rate_map(&scene, Basis::Constructive).unwrap();
        let des = expected_rate_map(&scene, Basis::Destructive).unwrap();
        let eta = scene.noise.heralding_efficiency;
        for i in 0..scene.grid.len() {
            assert_abs_diff_eq!(con[i] + des[i], weights[i] * eta / 2.0, epsilon = 1e-12);
        }
    }

    proptest! {
        /// The two output ports always split exactly half the beam,
        /// whatever phase and visibility a scene produces.
        #[test]
        fn rate_sum_invariant_holds_for_any_phase(
            crystal in -10.0f64..10.0,
            trim in -10.0f64..10.0,
            eta in 0.05f64..1.0,
        ) {
            let mut scene = flat_scene();
            scene.crystal_phase = crystal;
            scene.trim_phase = trim;
            scene.noise.heralding_efficiency = eta;
            let weights = beam_weights(&scene.grid, &scene.beam).unwrap();
            let con = expected_rate_map(&scene, Basis::Constructive).unwrap();
            let des = expected_rate_map(&scene, Basis::Destructive).unwrap();
            for i in 0..scene.grid.len() {
                prop_assert!((con[i] + des[i] - weights[i] * eta / 2.0).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn expected_counts_include_dark() {
        let mut scene = flat_scene();
        scene.noise.dark_rate = 0.25;
        let rates = expected_rate_map(&scene, Basis::Constructive).unwrap();
        let counts = expected_counts(&scene, Basis::Constructive, 1000).unwrap();
        for i in 0..rates.len() {
            assert_relative_eq!(counts[i], rates[i] * 1000.0 + 0.25, max_relative = 1e-12);
        }
    }

    #[test]
    fn frames_are_reproducible_and_seed_sensitive() {
        let scene = half_plate_scene();
        let a = simulate_frame(&scene, Basis::Constructive, 20_000, 7).unwrap();
        let b = simulate_frame(&scene, Basis::Constructive, 20_000, 7).unwrap();
        assert_eq!(a.counts(), b.counts());
        let c = simulate_frame(&scene, Basis::Constructive, 20_000, 8).unwrap();
        assert_ne!(a.counts(), c.counts());
        let d = simulate_frame(&scene, Basis::Destructive, 20_000, 7).unwrap();
        assert_ne!(a.counts(), d.counts());
    }

    #[test]
    fn sequential_and_dispatched_frames_agree() {
        let mut scene = half_plate_scene();
        scene.noise.dark_rate = 0.2;
        let a = simulate_frame(&scene, Basis::Destructive, 30_000, 11).unwrap();
        let b = simulate_frame_sequential(&scene, Basis::Destructive, 30_000, 11).unwrap();
        assert_eq!(a.counts(), b.counts());
        #[cfg(feature = "parallel")]
        {
            let c = simulate_frame_parallel(&scene, Basis::Destructive, 30_000, 11).unwrap();
            assert_eq!(a.counts(), c.counts());
        }
    }

    #[test]
    fn simulated_totals_track_the_analytic_rate() {
        let scene = half_plate_scene();
        let pairs = 200_000u64;
        for (basis, seed) in [(Basis::Constructive, 3u64), (Basis::Destructive, 4u64)] {
            let rates = expected_rate_map(&scene, basis).unwrap();
            let p: f64 = rates.iter().sum();
            let frame = simulate_frame(&scene, basis, pairs, seed).unwrap();
            let mean = pairs as f64 * p;
            let sd = (pairs as f64 * p * (1.0 - p)).sqrt();
            let total = frame.total() as f64;
            assert!(
                (total - mean).abs() < 5.0 * sd,
                "total {total} vs mean {mean} (sd {sd})"
            );
        }
    }

    #[test]
    fn frame_passes_its_own_goodness_of_fit() {
        let scene = half_plate_scene();
        let pairs = 150_000u64;
        let frame = simulate_frame(&scene, Basis::Constructive, pairs, 42).unwrap();
        let expected = expected_counts(&scene, Basis::Constructive, pairs).unwrap();
        let report = chi2_frame_test(&frame, &expected).unwrap();
        assert!(report.dof > 10);
        assert!(
            report.p_value > 1e-4,
            "p = {} (stat {}, dof {})",
            report.p_value,
            report.statistic,
            report.dof
        );
    }

    #[test]
    fn goodness_of_fit_rejects_the_wrong_model() {
        // At a uniform phase of pi/3 the two bases predict rates in a 3:1
        // ratio at every pixel, so testing a constructive frame against
        // the destructive model must fail decisively.
        let mut scene = flat_scene();
        scene.crystal_phase = std::f64::consts::FRAC_PI_3;
        let pairs = 150_000u64;
        let frame = simulate_frame(&scene, Basis::Constructive, pairs, 42).unwrap();
        let wrong = expected_counts(&scene, Basis::Destructive, pairs).unwrap();
        let report = chi2_frame_test(&frame, &wrong).unwrap();
        assert!(
            report.p_value < 1e-6,
            "wrong-model p = {}",
            report.p_value
        );
    }

    #[test]
    fn chi2_statistic_matches_a_hand_oracle() {
        // Two tested pixels: counts {6, 8} against expectations {7, 7},
        // statistic 2/7. With two degrees of freedom the upper tail is
        // exactly exp(-x/2).
        let grid = GridSpec::new(2, 1, 1e-5).unwrap();
        let frame =
            DetectionFrame::from_parts(grid, vec![6, 8], Basis::Constructive, 100, 0).unwrap();
        let report = chi2_frame_test(&frame, &[7.0, 7.0]).unwrap();
        assert_relative_eq!(report.statistic, 2.0 / 7.0, max_relative = 1e-12);
        assert_eq!(report.dof, 2);
        let oracle = (-(2.0 / 7.0) / 2.0f64).exp();
        assert_relative_eq!(report.p_value, oracle, max_relative = 1e-10);
    }

    #[test]
    fn chi2_skips_low_expectation_pixels() {
        let grid = GridSpec::new(2, 1, 1e-5).unwrap();
        let frame =
            DetectionFrame::from_parts(grid, vec![6, 8], Basis::Constructive, 100, 0).unwrap();
        let report = chi2_frame_test(&frame, &[7.0, 3.0]).unwrap();
        assert_eq!(report.dof, 1);
        assert_relative_eq!(report.statistic, 1.0 / 7.0, max_relative = 1e-12);
        assert!(report.p_value > 0.0 && report.p_value < 1.0);
        let none = chi2_frame_test(&frame, &[3.0, 3.0]);
        assert!(matches!(none, Err(Error::NoTestablePixels { .. })));
    }

    #[test]
    fn difference_image_subtracts_and_checks_bases() {
        let grid = GridSpec::new(2, 2, 1e-5).unwrap();
        let con =
            DetectionFrame::from_parts(grid, vec![5, 0, 7, 2], Basis::Constructive, 10, 0).unwrap();
        let des =
            DetectionFrame::from_parts(grid, vec![1, 3, 0, 2], Basis::Destructive, 10, 0).unwrap();
        let diff = difference_image(&con, &des).unwrap();
        assert_eq!(diff.values(), &[4, -3, 7, 0]);
        assert!(matches!(
            difference_image(&des, &con),
            Err(Error::BasisMismatch(_))
        ));
        assert!(matches!(
            difference_image(&con, &con),
            Err(Error::BasisMismatch(_))
        ));
        let small = GridSpec::new(1, 2, 1e-5).unwrap();
        let other =
            DetectionFrame::from_parts(small, vec![1, 1], Basis::Destructive, 10, 0).unwrap();
        assert!(matches!(
            difference_image(&con, &other),
            Err(Error::GridMismatch(_))
        ));
    }

    #[test]
    fn snr_matches_a_hand_oracle() {
        // First row {10, 12, 11, 11}: mean 11, sample variance 2/3.
        // Second row {2, 1, 3, 2}: mean 2, sample variance 2/3.
        // sigma = sqrt(4/3), contrast = 9 / sigma = 9 * sqrt(3) / 2.
        let grid = GridSpec::new(4, 2, 1e-5).unwrap();
        let image = DifferenceImage::new(grid, vec![10, 12, 11, 11, 2, 1, 3, 2]).unwrap();
        let top = RegionSpec::new(0, 0, 3, 0).unwrap();
        let bottom = RegionSpec::new(0, 1, 3, 1).unwrap();
        let report = snr(&image, &top, &bottom).unwrap();
        assert_abs_diff_eq!(report.mean_in, 11.0, epsilon = 1e-12);
        assert_abs_diff_eq!(report.mean_out, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(report.std_in, (2.0f64 / 3.0).sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(report.sigma, (4.0f64 / 3.0).sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(report.snr, 7.794228634059948, epsilon = 1e-9);
    }

    #[test]
    fn snr_rejects_degenerate_regions() {
        let grid = GridSpec::new(4, 2, 1e-5).unwrap();
        let image = DifferenceImage::new(grid, vec![5; 8]).unwrap();
        let top = RegionSpec::new(0, 0, 3, 0).unwrap();
        let bottom = RegionSpec::new(0, 1, 3, 1).unwrap();
        // Constant image: no variance anywhere.
        assert!(matches!(snr(&image, &top, &bottom), Err(Error::ZeroVariance)));
        // Overlap.
        let all = grid.full_region();
        assert!(matches!(
            snr(&image, &all, &bottom),
            Err(Error::InvalidRegion(_))
        ));
        // Single pixel.
        let dot = RegionSpec::new(0, 0, 0, 0).unwrap();
        assert!(matches!(
            snr(&image, &dot, &bottom),
            Err(Error::InvalidRegion(_))
        ));
        // Outside the grid.
        let out = RegionSpec::new(0, 0, 9, 0).unwrap();
        assert!(matches!(
            snr(&image, &out, &bottom),
            Err(Error::OutOfBounds(_))
        ));
    }

    #[test]
    fn predicted_snr_grows_with_the_photon_budget() {
        let mut scene = SceneConfig::with_defaults(GridSpec::new(32, 32, 1e-5).unwrap());
        scene.noise.dark_rate = 0.05;
        scene.idler_cw_objects = vec![GlassObject {
            footprint: Footprint::Rectangle {
                x0: 0,
                y0: 0,
                x1: 15,
                y1: 31,
            },
            thickness: 1e-3,
            refractive_index: 1.52,
            tilt_opd_offset: 0.0,
        }];
        let inside = RegionSpec::new(10, 12, 13, 19).unwrap();
        let outside = RegionSpec::new(18, 12, 21, 19).unwrap();
        let mut last = 0.0;
        for pairs in [10_000u64, 40_000, 160_000, 640_000] {
            let s = predicted_snr(&scene, pairs, &inside, &outside).unwrap();
            assert!(s > last, "snr {s} did not grow past {last}");
            last = s;
        }
    }

    #[test]
    fn oversized_budget_is_rejected() {
        let scene = flat_scene();
        let result = simulate_frame(&scene, Basis::Constructive, MAX_PAIRS + 1, 0);
        assert!(matches!(result, Err(Error::InvalidParameter { .. })));
    }

    #[test]
    fn phase_sweep_traces_a_unit_visibility_fringe() {
        let scene = flat_scene();
        let rows = phase_sweep(&scene, 20_000, 8, 5).unwrap();
        assert_eq!(rows.len(), 8);
        let phases: Vec<f64> = rows.iter().map(|r| r.phase).collect();
        let rates: Vec<f64> = rows.iter().map(|r| r.constructive_rate()).collect();
        let fit = crate::stats::fit_fringe(&phases, &rates).unwrap();
        assert!(
            (fit.visibility - 1.0).abs() < 0.1,
            "fitted visibility {}",
            fit.visibility
        );
        // Complementary outputs: con + des totals stay near pairs / 2.
        for row in &rows {
            let sum = row.constructive_rate() + row.destructive_rate();
            assert!((sum - 0.5).abs() < 0.02, "port sum {sum}");
        }
        assert!(matches!(
            phase_sweep(&scene, 100, 3, 5),
            Err(Error::InvalidParameter { .. })
        ));
    }
}
