//! 16-bit binary PGM images with `key=value` comment metadata.
//!
//! Frames, difference images, and key cards all travel as P5 PGM files
//! with a maxval of 65535 and big-endian samples, so any standard image
//! viewer opens them. Everything this crate needs beyond the raster —
//! basis, seed, budget, pixel pitch, delay quantization — rides in
//! comment lines of the form `# key=value` between the magic number and
//! the dimensions.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::imaging::{Basis, DetectionFrame, DifferenceImage};
use crate::scene::{GridSpec, PhaseMap};

/// Offset added to difference values so they fit an unsigned sample.
pub const DIFF_OFFSET: i64 = 32768;

const MAXVAL: u32 = 65535;

/// A decoded 16-bit PGM: dimensions, samples, and comment metadata.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pgm16 {
    /// Image width in pixels.
    pub width: u32,
    /// Image height in pixels.
    pub height: u32,
    /// Row-major samples.
    pub pixels: Vec<u16>,
    /// `key=value` comment lines, in file order.
    pub metadata: Vec<(String, String)>,
}

impl Pgm16 {
    /// Looks up a metadata value by key.
    pub fn meta(&self, key: &str) -> Option<&str> {
        self.metadata
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    fn require(&self, path: &Path, key: &str) -> Result<&str> {
        self.meta(key).ok_or_else(|| Error::Pgm {
            path: path.to_path_buf(),
            reason: format!("missing metadata key {key:?}"),
        })
    }
}

fn check_metadata(metadata: &[(String, String)]) -> Result<()> {
    for (key, value) in metadata {
        if key.is_empty()
            || key.contains(['=', '\n', '\r'])
            || key.chars().any(|c| c.is_whitespace())
        {
            return Err(Error::param(
                "metadata",
                format!("key {key:?} must be non-empty without whitespace or '='"),
            ));
        }
        if value.contains(['\n', '\r']) {
            return Err(Error::param(
                "metadata",
                format!("value for {key:?} must be a single line"),
            ));
        }
    }
    Ok(())
}

/// Writes a 16-bit big-endian PGM.
pub fn write_pgm16(
    path: &Path,
    width: u32,
    height: u32,
    pixels: &[u16],
    metadata: &[(String, String)],
) -> Result<()> {
    if pixels.len() != width as usize * height as usize {
        return Err(Error::param(
            "pixels",
            format!("{} samples for {width}x{height}", pixels.len()),
        ));
    }
    check_metadata(metadata)?;
    let mut out = Vec::with_capacity(pixels.len() * 2 + 128);
    out.extend_from_slice(b"P5\n");
    for (key, value) in metadata {
        out.extend_from_slice(format!("# {key}={value}\n").as_bytes());
    }
    out.extend_from_slice(format!("{width} {height}\n{MAXVAL}\n").as_bytes());
    for &px in pixels {
        out.extend_from_slice(&px.to_be_bytes());
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

struct HeaderScanner<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
    metadata: Vec<(String, String)>,
}

impl<'a> HeaderScanner<'a> {
    fn fail(&self, reason: impl Into<String>) -> Error {
        Error::Pgm {
            path: self.path.to_path_buf(),
            reason: reason.into(),
        }
    }

    /// Skips whitespace and comment lines, harvesting `key=value` pairs.
    fn skip_separators(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b' ' | b'\t' | b'\r' | b'\n' => self.pos += 1,
                b'#' => {
                    let start = self.pos + 1;
                    let end = self.bytes[start..]
                        .iter()
                        .position(|&b| b == b'\n')
                        .map(|off| start + off)
                        .unwrap_or(self.bytes.len());
                    let line = String::from_utf8_lossy(&self.bytes[start..end]);
                    let line = line.trim();
                    if let Some((key, value)) = line.split_once('=') {
                        self.metadata
                            .push((key.trim().to_string(), value.trim().to_string()));
                    }
                    self.pos = end;
                }
                _ => break,
            }
        }
    }

    fn token(&mut self) -> Result<&'a str> {
        self.skip_separators();
        let start = self.pos;
        while self.pos < self.bytes.len()
            && !self.bytes[self.pos].is_ascii_whitespace()
            && self.bytes[self.pos] != b'#'
        {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(self.fail("truncated header"));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .map_err(|_| self.fail("header is not ASCII"))
    }

    fn number(&mut self, what: &str) -> Result<u32> {
        let tok = self.token()?;
        tok.parse()
            .map_err(|_| self.fail(format!("{what} is not a number: {tok:?}")))
    }
}

/// Reads a 16-bit big-endian PGM.
pub fn read_pgm16(path: &Path) -> Result<Pgm16> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut scanner = HeaderScanner {
        bytes: &bytes,
        pos: 0,
        path,
        metadata: Vec::new(),
    };
    let magic = scanner.token()?;
    if magic != "P5" {
        return Err(scanner.fail(format!("not a binary PGM (magic {magic:?})")));
    }
    let width = scanner.number("width")?;
    let height = scanner.number("height")?;
    let maxval = scanner.number("maxval")?;
    if maxval != MAXVAL {
        return Err(scanner.fail(format!("expected maxval {MAXVAL}, found {maxval}")));
    }
    // Exactly one whitespace byte separates the header from the raster.
    match bytes.get(scanner.pos) {
        Some(b) if b.is_ascii_whitespace() => scanner.pos += 1,
        _ => return Err(scanner.fail("missing raster separator after maxval")),
    }
    let expected = width as usize * height as usize * 2;
    let raster = &bytes[scanner.pos..];
    if raster.len() != expected {
        return Err(scanner.fail(format!(
            "raster holds {} bytes, expected {expected} for {width}x{height}",
            raster.len()
        )));
    }
    let pixels = raster
        .chunks_exact(2)
        .map(|c| u16::from_be_bytes([c[0], c[1]]))
        .collect();
    Ok(Pgm16 {
        width,
        height,
        pixels,
        metadata: scanner.metadata,
    })
}

fn parse_meta<T: std::str::FromStr>(path: &Path, key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Pgm {
        path: path.to_path_buf(),
        reason: format!("metadata {key}={value:?} is not valid"),
    })
}

fn grid_from_meta(path: &Path, pgm: &Pgm16) -> Result<GridSpec> {
    let pitch: f64 = parse_meta(path, "pitch", pgm.require(path, "pitch")?)?;
    GridSpec::new(pgm.width, pgm.height, pitch)
}

/// Saves a detection frame. Counts saturate at 65535 per pixel.
pub fn write_frame(path: &Path, frame: &DetectionFrame) -> Result<()> {
    let pixels: Vec<u16> = frame
        .counts()
        .iter()
        .map(|&c| c.min(u16::MAX as u32) as u16)
        .collect();
    let metadata = vec![
        ("pitch".into(), frame.grid().pitch.to_string()),
        ("basis".into(), frame.basis().label().into()),
        ("pairs".into(), frame.pairs_budget().to_string()),
        ("seed".into(), frame.seed().to_string()),
    ];
    write_pgm16(path, frame.grid().width, frame.grid().height, &pixels, &metadata)
}

/// Restores a detection frame written by [`write_frame`].
pub fn read_frame(path: &Path) -> Result<DetectionFrame> {
    let pgm = read_pgm16(path)?;
    let grid = grid_from_meta(path, &pgm)?;
    let basis = Basis::from_label(pgm.require(path, "basis")?)?;
    let pairs: u64 = parse_meta(path, "pairs", pgm.require(path, "pairs")?)?;
    let seed: u64 = parse_meta(path, "seed", pgm.require(path, "seed")?)?;
    let counts = pgm.pixels.iter().map(|&p| p as u32).collect();
    DetectionFrame::from_parts(grid, counts, basis, pairs, seed)
}

/// Saves a difference image, offset by [`DIFF_OFFSET`] and clamped to the
/// sample range.
pub fn write_difference(path: &Path, image: &DifferenceImage) -> Result<()> {
    let pixels: Vec<u16> = image
        .values()
        .iter()
        .map(|&v| (v + DIFF_OFFSET).clamp(0, MAXVAL as i64) as u16)
        .collect();
    let metadata = vec![
        ("pitch".into(), image.grid().pitch.to_string()),
        ("encoding".into(), format!("offset{DIFF_OFFSET}")),
    ];
    write_pgm16(path, image.grid().width, image.grid().height, &pixels, &metadata)
}

/// Restores a difference image written by [`write_difference`].
pub fn read_difference(path: &Path) -> Result<DifferenceImage> {
    let pgm = read_pgm16(path)?;
    let encoding = pgm.require(path, "encoding")?;
    if encoding != format!("offset{DIFF_OFFSET}") {
        return Err(Error::Pgm {
            path: path.to_path_buf(),
            reason: format!("unknown difference encoding {encoding:?}"),
        });
    }
    let grid = grid_from_meta(path, &pgm)?;
    let values = pgm.pixels.iter().map(|&p| p as i64 - DIFF_OFFSET).collect();
    DifferenceImage::new(grid, values)
}

/// Saves a key card's delay pattern as quantization levels.
///
/// Samples hold `round(delay / step)`; the step rides in the metadata.
/// Delays that do not sit on the quantization lattice (within a relative
/// 1e-6) or overflow 16 bits are rejected rather than silently distorted.
pub fn write_card(path: &Path, card: &crate::auth::KeyCard, step: f64) -> Result<()> {
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::param("step", format!("must be positive, got {step}")));
    }
    let grid = card.grid();
    let mut pixels = Vec::with_capacity(grid.len());
    for &v in card.pattern().values() {
        let level = v / step;
        let rounded = level.round();
        if (level - rounded).abs() > 1e-6 * rounded.max(1.0) {
            return Err(Error::param(
                "card",
                format!("delay {v:e} is not a multiple of the step {step:e}"),
            ));
        }
        if rounded < 0.0 || rounded > u16::MAX as f64 {
            return Err(Error::param(
                "card",
                format!("level {rounded} does not fit a 16-bit sample"),
            ));
        }
        pixels.push(rounded as u16);
    }
    let metadata = vec![
        ("pitch".into(), grid.pitch.to_string()),
        ("opd_step".into(), step.to_string()),
        ("card_id".into(), card.id().to_string()),
    ];
    write_pgm16(path, grid.width, grid.height, &pixels, &metadata)
}

/// Restores a key card written by [`write_card`].
pub fn read_card(path: &Path) -> Result<crate::auth::KeyCard> {
    let pgm = read_pgm16(path)?;
    let grid = grid_from_meta(path, &pgm)?;
    let step: f64 = parse_meta(path, "opd_step", pgm.require(path, "opd_step")?)?;
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::Pgm {
            path: path.to_path_buf(),
            reason: format!("opd_step must be positive, found {step}"),
        });
    }
    let id = pgm.require(path, "card_id")?.to_string();
    let values = pgm.pixels.iter().map(|&p| p as f64 * step).collect();
    crate::auth::KeyCard::new(id, PhaseMap::new(grid, values)?)
}
