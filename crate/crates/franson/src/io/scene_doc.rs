//! JSON scene documents: a declarative front end for [`SceneConfig`].
//!
//! A document names the grid, optics, objects, and named analysis regions
//! of one imaging configuration:
//!
//! ```json
//! {
//!   "grid": { "width": 256, "height": 256, "pitch": 1e-5 },
//!   "objects": {
//!     "plate": { "shape": { "type": "rectangle", "x0": 0, "y0": 0,
//!                            "x1": 119, "y1": 191 },
//!                "thickness": 1e-3 }
//!   },
//!   "signal_arm": ["plate"],
//!   "regions": { "covered": { "x0": 88, "y0": 120, "x1": 103, "y1": 135 } },
//!   "snr": [ { "in": "covered", "out": "open" } ]
//! }
//! ```
//!
//! Only `grid.width` and `grid.height` are mandatory; everything else
//! falls back to the documented defaults. Unknown keys are rejected, all
//! missing required keys are reported together, and references to
//! undefined objects or regions are named individually.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, SceneDocError};
use crate::scene::{
    Footprint, GlassObject, GridSpec, RegionSpec, SceneConfig, DEFAULT_REFRACTIVE_INDEX,
};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneDocument {
    #[serde(skip_serializing_if = "Option::is_none")]
    grid: Option<GridDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pump_wavelength: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    photon_wavelength: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    coherence_length: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    crystal_phase: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    trim_phase: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    beam: Option<BeamDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    noise: Option<NoiseDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    objects: Option<BTreeMap<String, ObjectDoc>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    signal_arm: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    idler_arm: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    regions: Option<BTreeMap<String, RegionDoc>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    snr: Option<Vec<SnrPairDoc>>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridDoc {
    #[serde(skip_serializing_if = "Option::is_none")]
    width: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    height: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pitch: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BeamDoc {
    #[serde(skip_serializing_if = "Option::is_none")]
    center: Option<[f64; 2]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    radius: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NoiseDoc {
    #[serde(skip_serializing_if = "Option::is_none")]
    dark_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    heralding_efficiency: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObjectDoc {
    #[serde(skip_serializing_if = "Option::is_none")]
    shape: Option<ShapeDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    thickness: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    refractive_index: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tilt_opd_offset: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum ShapeDoc {
    Rectangle { x0: u32, y0: u32, x1: u32, y1: u32 },
    Polygon { vertices: Vec<[f64; 2]> },
    Mask { x0: u32, y0: u32, width: u32, height: u32, cells: Vec<u8> },
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RegionDoc {
    #[serde(skip_serializing_if = "Option::is_none")]
    x0: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    y0: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    x1: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    y1: Option<u32>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SnrPairDoc {
    #[serde(rename = "in", skip_serializing_if = "Option::is_none")]
    region_in: Option<String>,
    #[serde(rename = "out", skip_serializing_if = "Option::is_none")]
    region_out: Option<String>,
}

/// A fully resolved scene document: the scene plus its named analysis
/// regions and requested contrast pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedScene {
    /// The scene itself, validated.
    pub scene: SceneConfig,
    /// Named rectangular regions for analysis.
    pub regions: BTreeMap<String, RegionSpec>,
    /// Requested contrast measurements as `(in, out)` region names.
    pub snr_pairs: Vec<(String, String)>,
}

fn semantic(key: impl Into<String>, reason: impl Into<String>) -> Error {
    Error::SceneDocument(SceneDocError::Semantic {
        key: key.into(),
        reason: reason.into(),
    })
}

fn shape_to_footprint(name: &str, shape: &ShapeDoc) -> Result<Footprint> {
    Ok(match shape {
        ShapeDoc::Rectangle { x0, y0, x1, y1 } => Footprint::Rectangle {
            x0: *x0,
            y0: *y0,
            x1: *x1,
            y1: *y1,
        },
        ShapeDoc::Polygon { vertices } => Footprint::Polygon {
            vertices: vertices.iter().map(|v| (v[0], v[1])).collect(),
        },
        ShapeDoc::Mask {
            x0,
            y0,
            width,
            height,
            cells,
        } => {
            if cells.len() != *width as usize * *height as usize {
                return Err(semantic(
                    format!("objects.{name}.shape"),
                    format!(
                        "mask carries {} cells for a {width}x{height} area",
                        cells.len()
                    ),
                ));
            }
            Footprint::Mask {
                x0: *x0,
                y0: *y0,
                width: *width,
                height: *height,
                cells: cells.iter().map(|&c| c != 0).collect(),
            }
        }
    })
}

fn build_arm(
    arm_key: &str,
    names: &[String],
    objects: &BTreeMap<String, GlassObject>,
) -> Result<Vec<GlassObject>> {
    names
        .iter()
        .map(|name| {
            objects.get(name).cloned().ok_or_else(|| {
                semantic(arm_key, format!("references unknown object {name:?}"))
            })
        })
        .collect()
}

/// Parses and validates a JSON scene document.
pub fn parse_scene_document(text: &str) -> Result<ParsedScene> {
    let doc: SceneDocument = serde_json::from_str(text).map_err(|e| {
        Error::SceneDocument(SceneDocError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    })?;

    // Collect every missing required key before failing.
    let mut missing = Vec::new();
    match &doc.grid {
        None => missing.push("grid".to_string()),
        Some(grid) => {
            if grid.width.is_none() {
                missing.push("grid.width".to_string());
            }
            if grid.height.is_none() {
                missing.push("grid.height".to_string());
            }
        }
    }
    if let Some(objects) = &doc.objects {
        for (name, object) in objects {
            if object.shape.is_none() {
                missing.push(format!("objects.{name}.shape"));
            }
            if object.thickness.is_none() {
                missing.push(format!("objects.{name}.thickness"));
            }
        }
    }
    if let Some(regions) = &doc.regions {
        for (name, region) in regions {
            for (field, value) in [
                ("x0", region.x0),
                ("y0", region.y0),
                ("x1", region.x1),
                ("y1", region.y1),
            ] {
                if value.is_none() {
                    missing.push(format!("regions.{name}.{field}"));
                }
            }
        }
    }
    if let Some(snr) = &doc.snr {
        for (i, pair) in snr.iter().enumerate() {
            if pair.region_in.is_none() {
                missing.push(format!("snr[{i}].in"));
            }
            if pair.region_out.is_none() {
                missing.push(format!("snr[{i}].out"));
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::SceneDocument(SceneDocError::MissingKeys {
            keys: missing,
        }));
    }

    let grid_doc = doc.grid.as_ref().expect("checked above");
    let grid = GridSpec::new(
        grid_doc.width.expect("checked above"),
        grid_doc.height.expect("checked above"),
        grid_doc.pitch.unwrap_or(1e-5),
    )?;

    let mut scene = SceneConfig::with_defaults(grid);
    if let Some(pump) = doc.pump_wavelength {
        scene.pump_wavelength = pump;
        scene.photon_wavelength = 2.0 * pump;
    }
    if let Some(photon) = doc.photon_wavelength {
        scene.photon_wavelength = photon;
    }
    if let Some(lc) = doc.coherence_length {
        scene.coherence_length = lc;
    }
    if let Some(phase) = doc.crystal_phase {
        scene.crystal_phase = phase;
    }
    if let Some(phase) = doc.trim_phase {
        scene.trim_phase = phase;
    }
    if let Some(beam) = &doc.beam {
        if let Some(center) = beam.center {
            scene.beam.center = (center[0], center[1]);
        }
        if let Some(radius) = beam.radius {
            scene.beam.radius = radius;
        }
    }
    if let Some(noise) = &doc.noise {
        if let Some(dark) = noise.dark_rate {
            scene.noise.dark_rate = dark;
        }
        if let Some(eta) = noise.heralding_efficiency {
            scene.noise.heralding_efficiency = eta;
        }
    }

    let mut object_library = BTreeMap::new();
    if let Some(objects) = &doc.objects {
        for (name, object) in objects {
            let footprint =
                shape_to_footprint(name, object.shape.as_ref().expect("checked above"))?;
            object_library.insert(
                name.clone(),
                GlassObject {
                    footprint,
                    thickness: object.thickness.expect("checked above"),
                    refractive_index: object
                        .refractive_index
                        .unwrap_or(DEFAULT_REFRACTIVE_INDEX),
                    tilt_opd_offset: object.tilt_opd_offset.unwrap_or(0.0),
                },
            );
        }
    }
    scene.signal_cw_objects = build_arm(
        "signal_arm",
        doc.signal_arm.as_deref().unwrap_or(&[]),
        &object_library,
    )?;
    scene.idler_cw_objects = build_arm(
        "idler_arm",
        doc.idler_arm.as_deref().unwrap_or(&[]),
        &object_library,
    )?;

    let mut regions = BTreeMap::new();
    if let Some(docs) = &doc.regions {
        for (name, r) in docs {
            let region = RegionSpec::new(
                r.x0.expect("checked above"),
                r.y0.expect("checked above"),
                r.x1.expect("checked above"),
                r.y1.expect("checked above"),
            )
            .and_then(|region| {
                region.validate(&grid)?;
                Ok(region)
            })
            .map_err(|e| semantic(format!("regions.{name}"), e.to_string()))?;
            regions.insert(name.clone(), region);
        }
    }

    let mut snr_pairs = Vec::new();
    if let Some(snr) = &doc.snr {
        for (i, pair) in snr.iter().enumerate() {
            let r_in = pair.region_in.clone().expect("checked above");
            let r_out = pair.region_out.clone().expect("checked above");
            for name in [&r_in, &r_out] {
                if !regions.contains_key(name) {
                    return Err(semantic(
                        format!("snr[{i}]"),
                        format!("references unknown region {name:?}"),
                    ));
                }
            }
            snr_pairs.push((r_in, r_out));
        }
    }

    scene.validate()?;
    Ok(ParsedScene {
        scene,
        regions,
        snr_pairs,
    })
}

/// Reads and parses a scene document from disk.
pub fn load_scene_document(path: &Path) -> Result<ParsedScene> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_scene_document(&text)
}

fn footprint_to_shape(footprint: &Footprint) -> ShapeDoc {
    match footprint {
        Footprint::Rectangle { x0, y0, x1, y1 } => ShapeDoc::Rectangle {
            x0: *x0,
            y0: *y0,
            x1: *x1,
            y1: *y1,
        },
        Footprint::Polygon { vertices } => ShapeDoc::Polygon {
            vertices: vertices.iter().map(|&(x, y)| [x, y]).collect(),
        },
        Footprint::Mask {
            x0,
            y0,
            width,
            height,
            cells,
        } => ShapeDoc::Mask {
            x0: *x0,
            y0: *y0,
            width: *width,
            height: *height,
            cells: cells.iter().map(|&c| c as u8).collect(),
        },
    }
}

/// Renders a resolved scene back to document text. Object names are
/// synthesized per arm; all defaults are written out explicitly, so
/// parsing the result reproduces the input scene exactly.
pub fn render_scene_document(parsed: &ParsedScene) -> String {
    let scene = &parsed.scene;
    let mut objects = BTreeMap::new();
    let mut signal_arm = Vec::new();
    let mut idler_arm = Vec::new();
    for (prefix, list, arm) in [
        ("signal", &scene.signal_cw_objects, &mut signal_arm),
        ("idler", &scene.idler_cw_objects, &mut idler_arm),
    ] {
        for (i, object) in list.iter().enumerate() {
            let name = format!("{prefix}_{i}");
            objects.insert(
                name.clone(),
                ObjectDoc {
                    shape: Some(footprint_to_shape(&object.footprint)),
                    thickness: Some(object.thickness),
                    refractive_index: Some(object.refractive_index),
                    tilt_opd_offset: Some(object.tilt_opd_offset),
                },
            );
            arm.push(name);
        }
    }
    let doc = SceneDocument {
        grid: Some(GridDoc {
            width: Some(scene.grid.width),
            height: Some(scene.grid.height),
            pitch: Some(scene.grid.pitch),
        }),
        pump_wavelength: Some(scene.pump_wavelength),
        photon_wavelength: Some(scene.photon_wavelength),
        coherence_length: Some(scene.coherence_length),
        crystal_phase: Some(scene.crystal_phase),
        trim_phase: Some(scene.trim_phase),
        beam: Some(BeamDoc {
            center: Some([scene.beam.center.0, scene.beam.center.1]),
            radius: Some(scene.beam.radius),
        }),
        noise: Some(NoiseDoc {
            dark_rate: Some(scene.noise.dark_rate),
            heralding_efficiency: Some(scene.noise.heralding_efficiency),
        }),
        objects: if objects.is_empty() {
            None
        } else {
            Some(objects)
        },
        signal_arm: Some(signal_arm),
        idler_arm: Some(idler_arm),
        regions: if parsed.regions.is_empty() {
            None
        } else {
            Some(
                parsed
                    .regions
                    .iter()
                    .map(|(name, r)| {
                        (
                            name.clone(),
                            RegionDoc {
                                x0: Some(r.x0),
                                y0: Some(r.y0),
                                x1: Some(r.x1),
                                y1: Some(r.y1),
                            },
                        )
                    })
                    .collect(),
            )
        },
        snr: if parsed.snr_pairs.is_empty() {
            None
        } else {
            Some(
                parsed
                    .snr_pairs
                    .iter()
                    .map(|(r_in, r_out)| SnrPairDoc {
                        region_in: Some(r_in.clone()),
                        region_out: Some(r_out.clone()),
                    })
                    .collect(),
            )
        },
    };
    serde_json::to_string_pretty(&doc).expect("document serialization cannot fail")
}
