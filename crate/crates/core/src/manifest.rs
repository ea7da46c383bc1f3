//! JSON manifest describing one study: raster size, an optional display
//! radiograph and one 16-bit PNG per channel. Relative paths resolve against
//! the manifest's directory.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heatmap::{quantize_sample, ChannelName, ChannelRaster, Heatmap, Side};
use crate::raster_io;

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub width: usize,
    pub height: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<PathBuf>,
    pub channels: Vec<ManifestChannel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestChannel {
    pub name: String,
    pub file: PathBuf,
    pub side: Side,
}

/// A manifest together with the directory its relative paths refer to.
#[derive(Debug, Clone)]
pub struct Study {
    pub manifest_path: PathBuf,
    pub manifest: Manifest,
    pub heatmap: Heatmap,
}

impl Study {
    /// Absolute location of the display radiograph, if any.
    pub fn image_path(&self) -> Option<PathBuf> {
        let base = self.manifest_path.parent().unwrap_or(Path::new("."));
        self.manifest.image.as_ref().map(|p| base.join(p))
    }

    /// Sides present according to the manifest's channel `side` fields.
    pub fn sides(&self) -> Vec<Side> {
        Side::ALL
            .into_iter()
            .filter(|s| self.manifest.channels.iter().any(|c| c.side == *s))
            .collect()
    }
}

impl Manifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::Manifest {
            path: path.to_owned(),
            reason: e.to_string(),
        })?;
        if manifest.version != MANIFEST_VERSION {
            return Err(Error::Manifest {
                path: path.to_owned(),
                reason: format!("unsupported version {}", manifest.version),
            });
        }
        Ok(manifest)
    }
}

/// Loads the heatmap a manifest describes, decoding samples as `v / 65535`.
pub fn load_heatmap(manifest_path: &Path) -> Result<Heatmap> {
    load_study(manifest_path).map(|s| s.heatmap)
}

pub fn load_study(manifest_path: &Path) -> Result<Study> {
    let manifest = Manifest::read(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let mut channels = Vec::with_capacity(manifest.channels.len());
    for entry in &manifest.channels {
        let name: ChannelName = entry.name.parse()?;
        if name.side != entry.side {
            return Err(Error::Manifest {
                path: manifest_path.to_owned(),
                reason: format!("channel {name} declared with side {}", entry.side),
            });
        }
        let (w, h, samples) = raster_io::read_gray16(&base.join(&entry.file))?;
        if (w, h) != (manifest.width, manifest.height) {
            return Err(Error::DimensionMismatch {
                expected: (manifest.width, manifest.height),
                found: (w, h),
            });
        }
        let values = samples.into_iter().map(|s| f64::from(s) / 65535.0).collect();
        channels.push(ChannelRaster::new(name, w, h, values)?);
    }
    let heatmap = Heatmap::new(manifest.width, manifest.height, channels)?;
    Ok(Study {
        manifest_path: manifest_path.to_owned(),
        manifest,
        heatmap,
    })
}

fn channel_file_name(name: ChannelName) -> String {
    format!("{}.png", name.to_string().to_lowercase().replace(' ', "_"))
}

/// Writes `manifest.json` plus one PNG per channel into `dir`. Values are
/// quantized to 16 bits on the way out.
pub fn save_heatmap(heatmap: &Heatmap, dir: &Path, image: Option<&Path>) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::with_capacity(heatmap.channels().len());
    for channel in heatmap.channels() {
        let file = channel_file_name(channel.name());
        let samples: Vec<u16> = channel.values().iter().map(|&v| quantize_sample(v)).collect();
        raster_io::write_gray16(&dir.join(&file), heatmap.width(), heatmap.height(), &samples)?;
        entries.push(ManifestChannel {
            name: channel.name().to_string(),
            file: file.into(),
            side: channel.name().side,
        });
    }
    let manifest = Manifest {
        version: MANIFEST_VERSION,
        width: heatmap.width(),
        height: heatmap.height(),
        image: image.map(Path::to_owned),
        channels: entries,
    };
    let path = dir.join("manifest.json");
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Json {
        path: path.clone(),
        source: e,
    })?;
    fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}
