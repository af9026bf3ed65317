//! Image decoding, manifest files and dataset loading.
//!
//! A manifest is a comma-separated text file with the header
//! `image_path,dmos,artifact_label,ref_id`. Lines starting with `#` are
//! ignored and image paths are resolved against the manifest's directory.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use image::DynamicImage;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::map::GrayImage;
use crate::pipeline::LabeledImage;
use crate::regression::Artifact;

pub const MANIFEST_HEADER: [&str; 4] = ["image_path", "dmos", "artifact_label", "ref_id"];

/// BT.601 luma weights for R, G, B.
pub const LUMA_WEIGHTS: [f64; 3] = [0.299, 0.587, 0.114];

/// Decodes PNG, BMP or JPEG into real-valued luma in `[0, 255]`.
///
/// Grayscale files pass through unchanged; color files are reduced with
/// BT.601 weights. 16-bit samples are rescaled to the 8-bit range.
pub fn load_image_grayscale(path: &Path) -> Result<GrayImage> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let decoded = image::load_from_memory(&bytes).map_err(|e| Error::Decode {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    to_gray(&decoded).map_err(|e| match e {
        Error::InvalidInput(message) => Error::Decode {
            path: path.to_path_buf(),
            message,
        },
        other => other,
    })
}

pub fn to_gray(img: &DynamicImage) -> Result<GrayImage> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data: Vec<f64> = match img {
        DynamicImage::ImageLuma8(g) => g.as_raw().iter().map(|&v| f64::from(v)).collect(),
        DynamicImage::ImageLumaA8(g) => g.pixels().map(|p| f64::from(p.0[0])).collect(),
        DynamicImage::ImageLuma16(g) => g.as_raw().iter().map(|&v| f64::from(v) / 257.0).collect(),
        DynamicImage::ImageLumaA16(g) => g.pixels().map(|p| f64::from(p.0[0]) / 257.0).collect(),
        DynamicImage::ImageRgb16(_) | DynamicImage::ImageRgba16(_) => img
            .to_rgb16()
            .pixels()
            .map(|p| luma(p.0.map(|c| f64::from(c) / 257.0)))
            .collect(),
        _ => img.to_rgb8().pixels().map(|p| luma(p.0.map(f64::from))).collect(),
    };
    GrayImage::new(w, h, data)
}

fn luma([r, g, b]: [f64; 3]) -> f64 {
    LUMA_WEIGHTS[0] * r + LUMA_WEIGHTS[1] * g + LUMA_WEIGHTS[2] * b
}

pub fn save_png(img: &DynamicImage, path: &Path) -> Result<()> {
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| match e {
            image::ImageError::IoError(io) => Error::io(path, io),
            other => Error::Format {
                path: path.to_path_buf(),
                message: other.to_string(),
            },
        })
}

/// Distortion label of a manifest row.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArtifactLabel {
    Blur,
    Noise,
    Reference,
    Unknown,
}

impl ArtifactLabel {
    pub fn artifact(self) -> Option<Artifact> {
        match self {
            ArtifactLabel::Blur => Some(Artifact::Blur),
            ArtifactLabel::Noise => Some(Artifact::Noise),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ArtifactLabel::Blur => "blur",
            ArtifactLabel::Noise => "noise",
            ArtifactLabel::Reference => "reference",
            ArtifactLabel::Unknown => "unknown",
        }
    }
}

impl From<Option<Artifact>> for ArtifactLabel {
    fn from(a: Option<Artifact>) -> Self {
        match a {
            Some(Artifact::Blur) => ArtifactLabel::Blur,
            Some(Artifact::Noise) => ArtifactLabel::Noise,
            None => ArtifactLabel::Reference,
        }
    }
}

impl fmt::Display for ArtifactLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ArtifactLabel {
    type Err = std::convert::Infallible;

    /// Known aliases map to their class; anything else (e.g. other LIVE
    /// subsets such as `jpeg` or `fastfading`) becomes `Unknown`.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "blur" | "gblur" | "gaussian_blur" | "gaussian-blur" => ArtifactLabel::Blur,
            "noise" | "wn" | "white_noise" | "white-noise" | "awgn" => ArtifactLabel::Noise,
            "reference" | "ref" | "refimgs" | "original" | "pristine" => ArtifactLabel::Reference,
            _ => ArtifactLabel::Unknown,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ManifestRecord {
    /// Resolved against the manifest's directory.
    pub image_path: PathBuf,
    pub dmos: f64,
    pub artifact_label: ArtifactLabel,
    pub ref_id: String,
}

pub fn load_manifest(path: &Path) -> Result<Vec<ManifestRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new(""));
    parse_manifest(&text, base).map_err(|(row, message)| Error::Manifest {
        path: path.to_path_buf(),
        row,
        message,
    })
}

/// Parses manifest text; errors carry the 1-based line number (0 for file-level problems).
pub fn parse_manifest(
    text: &str,
    base: &Path,
) -> std::result::Result<Vec<ManifestRecord>, (usize, String)> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(false)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| (0, format!("cannot read header: {e}")))?
        .clone();
    if headers.is_empty() {
        return Err((0, "empty manifest".into()));
    }
    let mut columns = [0usize; 4];
    for (slot, name) in columns.iter_mut().zip(MANIFEST_HEADER) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| (1, format!("missing column `{name}`")))?;
    }
    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| (e.position().map_or(0, |p| p.line() as usize), e.to_string()))?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        let field = |i: usize| row.get(columns[i]).unwrap_or("");
        let image_path = field(0);
        if image_path.is_empty() {
            return Err((line, "empty image_path".into()));
        }
        let dmos: f64 = field(1)
            .parse()
            .map_err(|_| (line, format!("dmos `{}` is not a number", field(1))))?;
        if !dmos.is_finite() {
            return Err((line, format!("dmos `{}` is not finite", field(1))));
        }
        let ref_id = field(3);
        if ref_id.is_empty() {
            return Err((line, "empty ref_id".into()));
        }
        records.push(ManifestRecord {
            image_path: base.join(image_path),
            dmos,
            artifact_label: field(2).parse().expect("infallible"),
            ref_id: ref_id.to_string(),
        });
    }
    if records.is_empty() {
        return Err((0, "manifest has no data rows".into()));
    }
    Ok(records)
}

/// Writes a manifest whose image paths are stored relative to `path`'s directory
/// when possible.
pub fn write_manifest(path: &Path, records: &[ManifestRecord]) -> Result<()> {
    let base = path.parent().unwrap_or_else(|| Path::new(""));
    let mut writer = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    writer
        .write_record(MANIFEST_HEADER)
        .map_err(|e| csv_error(path, e))?;
    for r in records {
        let rel = r.image_path.strip_prefix(base).unwrap_or(&r.image_path);
        writer
            .write_record([
                rel.to_string_lossy().as_ref(),
                &r.dmos.to_string(),
                r.artifact_label.as_str(),
                &r.ref_id,
            ])
            .map_err(|e| csv_error(path, e))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Format {
            path: path.to_path_buf(),
            message: format!("{other:?}"),
        },
    }
}

/// Loads every image of a manifest, in manifest order.
pub fn load_dataset(records: &[ManifestRecord]) -> Result<Vec<LabeledImage>> {
    records
        .par_iter()
        .map(|r| {
            Ok(LabeledImage {
                image: load_image_grayscale(&r.image_path)?,
                dmos: r.dmos,
                artifact: r.artifact_label.artifact(),
                ref_id: r.ref_id.clone(),
            })
        })
        .collect()
}
