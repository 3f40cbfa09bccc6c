//! File formats: 16-bit PGM rasters, JSON scene documents, and
//! line-oriented text reports.

pub mod pgm;
pub mod report;
pub mod scene_doc;
