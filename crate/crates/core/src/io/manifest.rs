//! On-disk dataset layout: a JSON manifest next to 8-bit grayscale PNG
//! frames and per-picker PNG masks.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::Label;
use crate::descriptor::MorMask;
use crate::error::{Error, Result};
use crate::frame::GrayFrame;
use crate::pipeline::MaskIndex;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameEntry {
    pub index: usize,
    /// Relative to the manifest's directory.
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskEntry {
    pub frame: usize,
    pub picker: String,
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    /// Directory the relative paths resolve against; not serialized.
    #[serde(skip)]
    pub root: PathBuf,
    pub fps: f64,
    pub width: usize,
    pub height: usize,
    pub frames: Vec<FrameEntry>,
    pub masks: Vec<MaskEntry>,
    /// Per-picker label of every frame, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<BTreeMap<String, Vec<Label>>>,
}

impl DatasetManifest {
    pub fn validate(&self) -> Result<()> {
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(Error::Manifest(format!("fps must be positive, got {}", self.fps)));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::Manifest("frame size must be non-zero".into()));
        }
        for (i, f) in self.frames.iter().enumerate() {
            if f.index != i {
                return Err(Error::Manifest(format!(
                    "frame indices must be contiguous from 0: position {i} holds index {}",
                    f.index
                )));
            }
        }
        let mut seen = BTreeMap::new();
        for m in &self.masks {
            if m.frame >= self.frames.len() {
                return Err(Error::Manifest(format!(
                    "mask for picker `{}` references missing frame {}",
                    m.picker, m.frame
                )));
            }
            if seen.insert((m.frame, m.picker.as_str()), ()).is_some() {
                return Err(Error::Manifest(format!(
                    "duplicate mask for frame {} picker `{}`",
                    m.frame, m.picker
                )));
            }
        }
        if let Some(truth) = &self.truth {
            for (picker, labels) in truth {
                if labels.len() != self.frames.len() {
                    return Err(Error::Manifest(format!(
                        "truth for picker `{picker}` has {} labels for {} frames",
                        labels.len(),
                        self.frames.len()
                    )));
                }
            }
        }
        Ok(())
    }

    /// Reads a manifest from a file, or from `manifest.json` inside a directory.
    pub fn load(path: &Path) -> Result<Self> {
        let file = manifest_path(path);
        let text = fs::read_to_string(&file).map_err(|e| Error::io(&file, e))?;
        let mut manifest: DatasetManifest = serde_json::from_str(&text)?;
        manifest.root = file.parent().map(Path::to_path_buf).unwrap_or_default();
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn save(&self, dir: &Path) -> Result<PathBuf> {
        self.validate()?;
        let file = dir.join(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(&file, text).map_err(|e| Error::io(&file, e))?;
        Ok(file)
    }
}

/// `path` itself if it names a file, else `path/manifest.json`.
pub fn manifest_path(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.join(MANIFEST_FILE)
    } else {
        path.to_path_buf()
    }
}

/// A manifest with its frames and masks decoded.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub frames: Vec<GrayFrame>,
    pub masks: MaskIndex,
}

impl Dataset {
    pub fn pickers(&self) -> Vec<String> {
        crate::pipeline::picker_ids(&self.masks)
    }

    pub fn truth(&self, picker: &str) -> Option<&[Label]> {
        self.manifest
            .truth
            .as_ref()
            .and_then(|t| t.get(picker))
            .map(Vec::as_slice)
    }
}

fn read_gray(path: &Path, width: usize, height: usize, what: &str) -> Result<Vec<u8>> {
    let img = image::open(path).map_err(|source| match source {
        image::ImageError::IoError(e) => Error::io(path, e),
        source => Error::Image {
            path: path.to_path_buf(),
            source,
        },
    })?;
    if img.width() as usize != width || img.height() as usize != height {
        return Err(Error::Dimension(format!(
            "{what} {} is {}x{}, expected {width}x{height}",
            path.display(),
            img.width(),
            img.height()
        )));
    }
    Ok(img.into_luma8().into_raw())
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let manifest = DatasetManifest::load(path)?;
    let (w, h) = (manifest.width, manifest.height);
    let frames = manifest
        .frames
        .par_iter()
        .map(|entry| {
            let file = manifest.root.join(&entry.path);
            let bytes = read_gray(&file, w, h, "frame")?;
            GrayFrame::from_luma8(w, h, &bytes, entry.index)
        })
        .collect::<Result<Vec<_>>>()?;
    let masks = manifest
        .masks
        .par_iter()
        .map(|entry| {
            let file = manifest.root.join(&entry.path);
            if !file.is_file() {
                return Err(Error::MissingMask {
                    frame: entry.frame,
                    picker: entry.picker.clone(),
                    path: file,
                });
            }
            let bytes = read_gray(&file, w, h, "mask")?;
            let mask = MorMask::from_luma8(w, h, &bytes, entry.picker.clone(), entry.frame)?;
            Ok(((entry.frame, entry.picker.clone()), mask))
        })
        .collect::<Result<MaskIndex>>()?;
    Ok(Dataset {
        manifest,
        frames,
        masks,
    })
}

pub(crate) fn write_gray(path: &Path, width: usize, height: usize, bytes: Vec<u8>) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let img = image::GrayImage::from_raw(width as u32, height as u32, bytes)
        .ok_or_else(|| Error::Dimension(format!("buffer does not fit {width}x{height}")))?;
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })
}
