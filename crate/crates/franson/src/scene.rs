//! Transparent phase objects on a pixel grid and the two-photon fringe
//! field they imprint.
//!
//! The interferometer under study is two Sagnac loops, one per photon. A
//! transparent object sitting in a loop's clockwise path delays that photon
//! without absorbing it: a pure phase object. Per pixel the object adds an
//! optical path difference (OPD) of `(n - 1) * thickness` plus a small
//! tunable offset from its insertion angle.
//!
//! What a coincidence camera sees is governed by two per-pixel quantities:
//!
//! * `delta = OPD_signal - OPD_idler`, the *imbalance* between the two
//!   clockwise delays. Interference survives only while `|delta|` stays
//!   within the pair's coherence length; the visibility envelope is
//!   Gaussian, `exp(-(delta / l_c)^2)`.
//! * `phi = (2 pi / lambda) * (OPD_signal + OPD_idler) + phi_crystal +
//!   phi_trim`, the *total* two-photon phase, which picks the constructive
//!   or destructive branch of the fringe. `lambda` is the down-converted
//!   photon wavelength (twice the pump wavelength); the pump phase advances
//!   with the sum of the two delays.
//!
//! Placing identical objects in both clockwise paths therefore erases the
//! distinguishing delay (`delta = 0`, full visibility) even though each arm
//! alone would show none — the nonlocal erasure this crate simulates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parallel;

/// Default pump wavelength in meters (ultraviolet, 355 nm).
pub const DEFAULT_PUMP_WAVELENGTH: f64 = 355e-9;
/// Default coherence length of the down-converted pair in meters (0.02 mm).
pub const DEFAULT_COHERENCE_LENGTH: f64 = 2e-5;
/// Default refractive index of a glass object.
pub const DEFAULT_REFRACTIVE_INDEX: f64 = 1.52;
/// Default heralding efficiency applied to every detected pair.
pub const DEFAULT_HERALDING_EFFICIENCY: f64 = 0.5;
/// Default expected dark counts per pixel per acquired frame.
pub const DEFAULT_DARK_RATE: f64 = 0.05;
/// Default grid edge in pixels.
pub const DEFAULT_GRID_EDGE: u32 = 256;

/// Relative tolerance on the pump/photon wavelength relation
/// `lambda_photon = 2 * lambda_pump`.
pub const WAVELENGTH_RELATION_TOL: f64 = 1e-15;

/// Resultant length below which a circular mean carries no direction and
/// [`auto_trim`] reports the region as ambiguous.
const TRIM_RESULTANT_TOL: f64 = 1e-12;

/// Pixel grid of the imaging plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Number of pixel columns; at least 1.
    pub width: u32,
    /// Number of pixel rows; at least 1.
    pub height: u32,
    /// Physical pixel pitch in meters; strictly positive.
    pub pitch: f64,
}

impl GridSpec {
    /// Validating constructor.
    pub fn new(width: u32, height: u32, pitch: f64) -> Result<Self> {
        let grid = GridSpec {
            width,
            height,
            pitch,
        };
        grid.validate()?;
        Ok(grid)
    }

    /// Checks the dimension and pitch invariants.
    pub fn validate(&self) -> Result<()> {
        if self.width < 1 || self.height < 1 {
            return Err(Error::param(
                "grid",
                format!("must be at least 1x1, got {}x{}", self.width, self.height),
            ));
        }
        if !(self.pitch.is_finite() && self.pitch > 0.0) {
            return Err(Error::param(
                "pitch",
                format!("must be finite and positive, got {}", self.pitch),
            ));
        }
        Ok(())
    }

    /// Number of pixels.
    pub fn len(&self) -> usize {
        self.width as usize * self.height as usize
    }

    /// True for a degenerate zero-pixel grid (never for a validated one).
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row-major index of pixel `(x, y)`.
    #[inline]
    pub fn index(&self, x: u32, y: u32) -> usize {
        debug_assert!(x < self.width && y < self.height);
        y as usize * self.width as usize + x as usize
    }

    /// Region covering the whole grid.
    pub fn full_region(&self) -> RegionSpec {
        RegionSpec {
            x0: 0,
            y0: 0,
            x1: self.width - 1,
            y1: self.height - 1,
        }
    }
}

/// Inclusive rectangular pixel region `[x0, x1] x [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionSpec {
    /// Leftmost column, inclusive.
    pub x0: u32,
    /// Topmost row, inclusive.
    pub y0: u32,
    /// Rightmost column, inclusive.
    pub x1: u32,
    /// Bottommost row, inclusive.
    pub y1: u32,
}

impl RegionSpec {
    /// Validating constructor.
    pub fn new(x0: u32, y0: u32, x1: u32, y1: u32) -> Result<Self> {
        if x1 < x0 || y1 < y0 {
            return Err(Error::InvalidRegion(format!(
                "bounds are inverted: [{x0}, {x1}] x [{y0}, {y1}]"
            )));
        }
        Ok(RegionSpec { x0, y0, x1, y1 })
    }

    /// Ensures the region is well-formed and fits inside `grid`.
    pub fn validate(&self, grid: &GridSpec) -> Result<()> {
        if self.x1 < self.x0 || self.y1 < self.y0 {
            return Err(Error::InvalidRegion(format!(
                "bounds are inverted: [{}, {}] x [{}, {}]",
                self.x0, self.x1, self.y0, self.y1
            )));
        }
        if self.x1 >= grid.width || self.y1 >= grid.height {
            return Err(Error::OutOfBounds(format!(
                "region [{}, {}] x [{}, {}] exceeds the {}x{} grid",
                self.x0, self.x1, self.y0, self.y1, grid.width, grid.height
            )));
        }
        Ok(())
    }

    /// Number of pixels covered.
    pub fn len(&self) -> usize {
        (self.x1 - self.x0 + 1) as usize * (self.y1 - self.y0 + 1) as usize
    }

    /// Always false: a region covers at least one pixel by construction.
    pub fn is_empty(&self) -> bool {
        false
    }

    /// True if the pixel lies inside the region.
    pub fn contains(&self, x: u32, y: u32) -> bool {
        (self.x0..=self.x1).contains(&x) && (self.y0..=self.y1).contains(&y)
    }

    /// Iterator over covered pixels in row-major order.
    pub fn pixels(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        (self.y0..=self.y1).flat_map(move |y| (self.x0..=self.x1).map(move |x| (x, y)))
    }

    /// True if the two regions share any pixel.
    pub fn intersects(&self, other: &RegionSpec) -> bool {
        self.x0 <= other.x1 && other.x0 <= self.x1 && self.y0 <= other.y1 && other.y0 <= self.y1
    }
}

/// Pixel footprint of a phase object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Footprint {
    /// Axis-aligned rectangle with inclusive pixel bounds.
    Rectangle {
        /// Leftmost column.
        x0: u32,
        /// Topmost row.
        y0: u32,
        /// Rightmost column, inclusive.
        x1: u32,
        /// Bottommost row, inclusive.
        y1: u32,
    },
    /// Simple polygon in pixel coordinates (pixel centers sit at integer
    /// coordinates). A pixel is covered when its center is inside by the
    /// even-odd rule.
    Polygon {
        /// Corner coordinates, in order; at least three.
        vertices: Vec<(f64, f64)>,
    },
    /// Explicit raster mask anchored at `(x0, y0)`.
    Mask {
        /// Leftmost column of the mask.
        x0: u32,
        /// Topmost row of the mask.
        y0: u32,
        /// Mask width in pixels.
        width: u32,
        /// Mask height in pixels.
        height: u32,
        /// Row-major coverage flags, `width * height` entries.
        cells: Vec<bool>,
    },
}

impl Footprint {
    /// Checks internal consistency and containment in `grid`.
    pub fn validate(&self, grid: &GridSpec) -> Result<()> {
        match self {
            Footprint::Rectangle { x0, y0, x1, y1 } => {
                if x1 < x0 || y1 < y0 {
                    return Err(Error::param(
                        "footprint",
                        format!("rectangle bounds are inverted: [{x0}, {x1}] x [{y0}, {y1}]"),
                    ));
                }
                if *x1 >= grid.width || *y1 >= grid.height {
                    return Err(Error::OutOfBounds(format!(
                        "rectangle [{x0}, {x1}] x [{y0}, {y1}] exceeds the {}x{} grid",
                        grid.width, grid.height
                    )));
                }
            }
            Footprint::Polygon { vertices } => {
                if vertices.len() < 3 {
                    return Err(Error::param(
                        "footprint",
                        format!("polygon needs at least 3 vertices, got {}", vertices.len()),
                    ));
                }
                for &(x, y) in vertices {
                    if !(x.is_finite() && y.is_finite()) {
                        return Err(Error::param("footprint", "polygon vertices must be finite"));
                    }
                    if x < 0.0 || y < 0.0 || x > (grid.width - 1) as f64 || y > (grid.height - 1) as f64
                    {
                        return Err(Error::OutOfBounds(format!(
                            "polygon vertex ({x}, {y}) exceeds the {}x{} grid",
                            grid.width, grid.height
                        )));
                    }
                }
            }
            Footprint::Mask {
                x0,
                y0,
                width,
                height,
                cells,
            } => {
                if *width < 1 || *height < 1 {
                    return Err(Error::param("footprint", "mask must be at least 1x1"));
                }
                if cells.len() != *width as usize * *height as usize {
                    return Err(Error::param(
                        "footprint",
                        format!(
                            "mask carries {} cells for a {width}x{height} area",
                            cells.len()
                        ),
                    ));
                }
                let (x_end, y_end) = (x0.checked_add(*width), y0.checked_add(*height));
                match (x_end, y_end) {
                    (Some(xe), Some(ye)) if xe <= grid.width && ye <= grid.height => {}
                    _ => {
                        return Err(Error::OutOfBounds(format!(
                            "mask at ({x0}, {y0}) sized {width}x{height} exceeds the {}x{} grid",
                            grid.width, grid.height
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// True when pixel `(x, y)` is covered.
    pub fn covers(&self, x: u32, y: u32) -> bool {
        match self {
            Footprint::Rectangle { x0, y0, x1, y1 } => {
                (*x0..=*x1).contains(&x) && (*y0..=*y1).contains(&y)
            }
            Footprint::Polygon { vertices } => {
                point_in_polygon(x as f64, y as f64, vertices)
            }
            Footprint::Mask {
                x0,
                y0,
                width,
                height,
                cells,
            } => {
                if x < *x0 || y < *y0 || x >= x0 + width || y >= y0 + height {
                    return false;
                }
                cells[((y - y0) * width + (x - x0)) as usize]
            }
        }
    }
}

/// Even-odd point-in-polygon test on pixel-center coordinates.
fn point_in_polygon(px: f64, py: f64, vertices: &[(f64, f64)]) -> bool {
    let mut inside = false;
    let n = vertices.len();
    for i in 0..n {
        let (x0, y0) = vertices[i];
        let (x1, y1) = vertices[(i + 1) % n];
        if (y0 > py) != (y1 > py) {
            let x_cross = x0 + (x1 - x0) * (py - y0) / (y1 - y0);
            if px < x_cross {
                inside = !inside;
            }
        }
    }
    inside
}

/// A transparent object inserted into one clockwise path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlassObject {
    /// Pixels the object covers.
    pub footprint: Footprint,
    /// Physical thickness in meters; non-negative.
    pub thickness: f64,
    /// Refractive index; strictly greater than one.
    pub refractive_index: f64,
    /// Extra OPD from the insertion angle, in meters. Sub-wavelength in
    /// practice: it steers the fringe phase without touching visibility.
    pub tilt_opd_offset: f64,
}

impl GlassObject {
    /// Checks material parameters and footprint containment.
    pub fn validate(&self, grid: &GridSpec) -> Result<()> {
        if !(self.thickness.is_finite() && self.thickness >= 0.0) {
            return Err(Error::param(
                "thickness",
                format!("must be finite and non-negative, got {}", self.thickness),
            ));
        }
        if !(self.refractive_index.is_finite() && self.refractive_index > 1.0) {
            return Err(Error::param(
                "refractive_index",
                format!("must be finite and exceed 1, got {}", self.refractive_index),
            ));
        }
        if !self.tilt_opd_offset.is_finite() {
            return Err(Error::param("tilt_opd_offset", "must be finite"));
        }
        self.footprint.validate(grid)
    }
}

/// Optical path difference added by one object wherever it covers a pixel:
/// `(n - 1) * thickness + tilt_opd_offset`.
pub fn glass_opd(object: &GlassObject) -> f64 {
    (object.refractive_index - 1.0) * object.thickness + object.tilt_opd_offset
}

/// Per-pixel optical path delay of one clockwise arm, in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseMap {
    grid: GridSpec,
    opd: Vec<f64>,
}

impl PhaseMap {
    /// All-zero map over `grid`.
    pub fn zeros(grid: GridSpec) -> Result<Self> {
        grid.validate()?;
        Ok(PhaseMap {
            opd: vec![0.0; grid.len()],
            grid,
        })
    }

    /// Map from raw row-major values.
    pub fn new(grid: GridSpec, opd: Vec<f64>) -> Result<Self> {
        grid.validate()?;
        if opd.len() != grid.len() {
            return Err(Error::param(
                "opd",
                format!("carries {} values for {} pixels", opd.len(), grid.len()),
            ));
        }
        if opd.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("opd", "all values must be finite"));
        }
        Ok(PhaseMap { grid, opd })
    }

    /// The grid this map lives on.
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Row-major OPD values in meters.
    pub fn values(&self) -> &[f64] {
        &self.opd
    }

    /// OPD at pixel `(x, y)`.
    pub fn get(&self, x: u32, y: u32) -> f64 {
        self.opd[self.grid.index(x, y)]
    }

    /// Adds another map pixel-wise.
    ///
    /// # Errors
    ///
    /// Fails if the grids differ.
    pub fn add_assign(&mut self, other: &PhaseMap) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch(format!(
                "{}x{} map cannot absorb a {}x{} map",
                self.grid.width, self.grid.height, other.grid.width, other.grid.height
            )));
        }
        for (a, b) in self.opd.iter_mut().zip(&other.opd) {
            *a += b;
        }
        Ok(())
    }
}

/// Gaussian illumination profile in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamProfile {
    /// Beam center `(x, y)`; pixel centers sit at integer coordinates.
    pub center: (f64, f64),
    /// 1/e^2 intensity radius in pixels; strictly positive.
    pub radius: f64,
}

impl BeamProfile {
    /// Checks finiteness and a positive radius.
    pub fn validate(&self) -> Result<()> {
        if !(self.center.0.is_finite() && self.center.1.is_finite()) {
            return Err(Error::param("beam.center", "must be finite"));
        }
        if !(self.radius.is_finite() && self.radius > 0.0) {
            return Err(Error::param(
                "beam.radius",
                format!("must be finite and positive, got {}", self.radius),
            ));
        }
        Ok(())
    }
}

/// Detection imperfections applied to a simulated frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Expected dark counts per pixel per frame; non-negative.
    pub dark_rate: f64,
    /// Probability that a generated pair is heralded and detected, in `(0, 1]`.
    pub heralding_efficiency: f64,
}

impl NoiseModel {
    /// Checks both rates.
    pub fn validate(&self) -> Result<()> {
        if !(self.dark_rate.is_finite() && self.dark_rate >= 0.0) {
            return Err(Error::param(
                "dark_rate",
                format!("must be finite and non-negative, got {}", self.dark_rate),
            ));
        }
        let eta = self.heralding_efficiency;
        if !(eta.is_finite() && eta > 0.0 && eta <= 1.0) {
            return Err(Error::param(
                "heralding_efficiency",
                format!("must lie in (0, 1], got {eta}"),
            ));
        }
        Ok(())
    }
}

/// Complete description of one imaging configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneConfig {
    /// Imaging grid.
    pub grid: GridSpec,
    /// Pump wavelength in meters.
    pub pump_wavelength: f64,
    /// Down-converted photon wavelength in meters; must equal twice the
    /// pump wavelength.
    pub photon_wavelength: f64,
    /// Coherence length of the pair in meters.
    pub coherence_length: f64,
    /// Phase offset contributed by the source crystal, in radians.
    pub crystal_phase: f64,
    /// Global trim phase added by the experimenter, in radians.
    pub trim_phase: f64,
    /// Objects in the signal loop's clockwise path.
    pub signal_cw_objects: Vec<GlassObject>,
    /// Objects in the idler loop's clockwise path.
    pub idler_cw_objects: Vec<GlassObject>,
    /// Illumination profile.
    pub beam: BeamProfile,
    /// Detection noise parameters.
    pub noise: NoiseModel,
}

impl SceneConfig {
    /// Scene with default optics over `grid`: 355 nm pump, 710 nm photons,
    /// 0.02 mm coherence length, beam centered on the grid with a 1/e^2
    /// radius of a quarter of its smaller edge, no objects, no phases.
    pub fn with_defaults(grid: GridSpec) -> Self {
        let center = (
            (grid.width - 1) as f64 / 2.0,
            (grid.height - 1) as f64 / 2.0,
        );
        let radius = (grid.width.min(grid.height) as f64 / 4.0).max(1.0);
        SceneConfig {
            grid,
            pump_wavelength: DEFAULT_PUMP_WAVELENGTH,
            photon_wavelength: 2.0 * DEFAULT_PUMP_WAVELENGTH,
            coherence_length: DEFAULT_COHERENCE_LENGTH,
            crystal_phase: 0.0,
            trim_phase: 0.0,
            signal_cw_objects: Vec::new(),
            idler_cw_objects: Vec::new(),
            beam: BeamProfile { center, radius },
            noise: NoiseModel {
                dark_rate: DEFAULT_DARK_RATE,
                heralding_efficiency: DEFAULT_HERALDING_EFFICIENCY,
            },
        }
    }

    /// Checks every invariant of the configuration.
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if !(self.pump_wavelength.is_finite() && self.pump_wavelength > 0.0) {
            return Err(Error::param(
                "pump_wavelength",
                format!("must be finite and positive, got {}", self.pump_wavelength),
            ));
        }
        let expected = 2.0 * self.pump_wavelength;
        if !(self.photon_wavelength.is_finite()
            && (self.photon_wavelength - expected).abs() <= WAVELENGTH_RELATION_TOL * expected)
        {
            return Err(Error::param(
                "photon_wavelength",
                format!(
                    "must equal twice the pump wavelength ({expected:e}), got {:e}",
                    self.photon_wavelength
                ),
            ));
        }
        if !(self.coherence_length.is_finite() && self.coherence_length > 0.0) {
            return Err(Error::param(
                "coherence_length",
                format!("must be finite and positive, got {}", self.coherence_length),
            ));
        }
        if !self.crystal_phase.is_finite() {
            return Err(Error::param("crystal_phase", "must be finite"));
        }
        if !self.trim_phase.is_finite() {
            return Err(Error::param("trim_phase", "must be finite"));
        }
        self.beam.validate()?;
        self.noise.validate()?;
        for object in self.signal_cw_objects.iter().chain(&self.idler_cw_objects) {
            object.validate(&self.grid)?;
        }
        Ok(())
    }
}

/// Per-pixel fringe parameters derived from a scene.
#[derive(Debug, Clone, PartialEq)]
pub struct FringeField {
    grid: GridSpec,
    phi_total: Vec<f64>,
    visibility: Vec<f64>,
    delta: Vec<f64>,
}

impl FringeField {
    /// The grid the field lives on.
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Row-major total two-photon phase in radians.
    pub fn phi_total(&self) -> &[f64] {
        &self.phi_total
    }

    /// Row-major fringe visibility in `[0, 1]`.
    pub fn visibility(&self) -> &[f64] {
        &self.visibility
    }

    /// Row-major arm imbalance `OPD_signal - OPD_idler` in meters.
    pub fn delta(&self) -> &[f64] {
        &self.delta
    }
}

/// Sums the OPD of every listed object over the grid.
///
/// Objects stack additively: a shard sitting behind a plate delays by the
/// sum of both.
///
/// # Errors
///
/// Fails if any object is invalid or extends outside the grid.
pub fn rasterize_arm(objects: &[GlassObject], grid: &GridSpec) -> Result<PhaseMap> {
    grid.validate()?;
    let mut map = PhaseMap::zeros(*grid)?;
    for object in objects {
        object.validate(grid)?;
        let opd = glass_opd(object);
        for y in 0..grid.height {
            for x in 0..grid.width {
                if object.footprint.covers(x, y) {
                    map.opd[grid.index(x, y)] += opd;
                }
            }
        }
    }
    Ok(map)
}

/// Gaussian visibility envelope `exp(-(delta / coherence_length)^2)`.
///
/// `coherence_length` must be positive; `delta` is the arm imbalance in
/// meters. At `|delta| = coherence_length` the envelope has fallen to `1/e`.
pub fn visibility_envelope(delta: f64, coherence_length: f64) -> f64 {
    debug_assert!(coherence_length > 0.0);
    let ratio = delta / coherence_length;
    (-ratio * ratio).exp()
}

/// Computes the fringe field of a scene from its object lists.
pub fn fringe_field(scene: &SceneConfig) -> Result<FringeField> {
    scene.validate()?;
    let signal = rasterize_arm(&scene.signal_cw_objects, &scene.grid)?;
    let idler = rasterize_arm(&scene.idler_cw_objects, &scene.grid)?;
    fringe_field_from_maps(scene, &signal, &idler)
}

/// Sequential variant of [`fringe_field`], kept for the benchmark suite and
/// determinism tests.
pub fn fringe_field_sequential(scene: &SceneConfig) -> Result<FringeField> {
    scene.validate()?;
    let signal = rasterize_arm(&scene.signal_cw_objects, &scene.grid)?;
    let idler = rasterize_arm(&scene.idler_cw_objects, &scene.grid)?;
    field_from_maps_checked(scene, &signal, &idler, false)
}

/// Explicit rayon variant of [`fringe_field`].
#[cfg(feature = "parallel")]
pub fn fringe_field_parallel(scene: &SceneConfig) -> Result<FringeField> {
    scene.validate()?;
    let signal = rasterize_arm(&scene.signal_cw_objects, &scene.grid)?;
    let idler = rasterize_arm(&scene.idler_cw_objects, &scene.grid)?;
    field_from_maps_checked(scene, &signal, &idler, true)
}

/// Computes the fringe field from explicit per-arm delay maps. Used by the
/// authentication protocol, where key-card patterns are injected directly
/// into the arms on top of any scene objects.
pub fn fringe_field_from_maps(
    scene: &SceneConfig,
    signal_opd: &PhaseMap,
    idler_opd: &PhaseMap,
) -> Result<FringeField> {
    scene.validate()?;
    field_from_maps_checked(scene, signal_opd, idler_opd, cfg!(feature = "parallel"))
}

fn field_from_maps_checked(
    scene: &SceneConfig,
    signal_opd: &PhaseMap,
    idler_opd: &PhaseMap,
    parallel: bool,
) -> Result<FringeField> {
    if signal_opd.grid != scene.grid || idler_opd.grid != scene.grid {
        return Err(Error::GridMismatch(format!(
            "arm maps ({}x{}, {}x{}) must match the scene grid {}x{}",
            signal_opd.grid.width,
            signal_opd.grid.height,
            idler_opd.grid.width,
            idler_opd.grid.height,
            scene.grid.width,
            scene.grid.height
        )));
    }
    let wavenumber = 2.0 * std::f64::consts::PI / scene.photon_wavelength;
    let phase_offset = scene.crystal_phase + scene.trim_phase;
    let coherence_length = scene.coherence_length;
    let signal = &signal_opd.opd;
    let idler = &idler_opd.opd;
    let per_pixel = |i: usize| {
        let delta = signal[i] - idler[i];
        let phi = wavenumber * (signal[i] + idler[i]) + phase_offset;
        (phi, visibility_envelope(delta, coherence_length), delta)
    };
    let values = if parallel {
        #[cfg(feature = "parallel")]
        {
            parallel::map_indexed_par(scene.grid.len(), per_pixel)
        }
        #[cfg(not(feature = "parallel"))]
        {
            parallel::map_indexed_seq(scene.grid.len(), per_pixel)
        }
    } else {
        parallel::map_indexed_seq(scene.grid.len(), per_pixel)
    };
    let mut phi_total = Vec::with_capacity(values.len());
    let mut visibility = Vec::with_capacity(values.len());
    let mut delta = Vec::with_capacity(values.len());
    for (phi, vis, d) in values {
        phi_total.push(phi);
        visibility.push(vis);
        delta.push(d);
    }
    Ok(FringeField {
        grid: scene.grid,
        phi_total,
        visibility,
        delta,
    })
}

/// Normalized beam weights over the grid: a Gaussian `exp(-2 r^2 / radius^2)`
/// around the beam center, scaled to sum to one.
pub fn beam_weights(grid: &GridSpec, beam: &BeamProfile) -> Result<Vec<f64>> {
    grid.validate()?;
    beam.validate()?;
    let mut weights = Vec::with_capacity(grid.len());
    let inv_r2 = 1.0 / (beam.radius * beam.radius);
    for y in 0..grid.height {
        for x in 0..grid.width {
            let dx = x as f64 - beam.center.0;
            let dy = y as f64 - beam.center.1;
            weights.push((-2.0 * (dx * dx + dy * dy) * inv_r2).exp());
        }
    }
    let total: f64 = weights.iter().sum();
    if !(total.is_finite() && total > 0.0) {
        return Err(Error::param(
            "beam",
            "profile vanishes over the entire grid; no pixel carries weight",
        ));
    }
    for w in &mut weights {
        *w /= total;
    }
    Ok(weights)
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(angle: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let r = angle.rem_euclid(two_pi);
    if r > std::f64::consts::PI {
        r - two_pi
    } else {
        r
    }
}

/// Trim phase that zeroes the circular mean of `phi_total` over `region`.
///
/// Returns the additive correction `t`: recomputing the field after
/// `scene.trim_phase += t` leaves the circular mean of the region's phase at
/// zero (within floating-point error). The result lies in `(-pi, pi]`.
///
/// # Errors
///
/// Fails when the region is invalid for the grid, or when the phases in the
/// region cancel so completely that no mean direction exists (for example
/// half the pixels at 0 and half at pi). That situation is reported as
/// [`Error::AmbiguousTrim`] rather than silently picking a direction.
pub fn auto_trim(scene: &SceneConfig, region: &RegionSpec) -> Result<f64> {
    let field = fringe_field(scene)?;
    region.validate(&scene.grid)?;
    let mut sum_cos = 0.0;
    let mut sum_sin = 0.0;
    for (x, y) in region.pixels() {
        let phi = field.phi_total[scene.grid.index(x, y)];
        sum_cos += phi.cos();
        sum_sin += phi.sin();
    }
    let count = region.len() as f64;
    let resultant = (sum_cos / count).hypot(sum_sin / count);
    if resultant < TRIM_RESULTANT_TOL {
        return Err(Error::AmbiguousTrim);
    }
    Ok(wrap_angle(-sum_sin.atan2(sum_cos)))
}
