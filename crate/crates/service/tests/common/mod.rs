#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use ccd_core::synth::{generate_case, SyntheticSpec};
use ccd_core::{save_heatmap, Heatmap, Side};
use ccd_service::session::SessionConfig;

pub fn small_spec(seed: u64) -> SyntheticSpec {
    SyntheticSpec {
        width: 256,
        height: 256,
        seed,
        ..SyntheticSpec::default()
    }
}

/// Writes synthetic case `index` restricted to `sides` into `dir`.
pub fn write_study(dir: &Path, index: u64, sides: &[Side]) -> PathBuf {
    let case = generate_case(&small_spec(0), index).unwrap();
    let channels = case
        .heatmap
        .channels()
        .iter()
        .filter(|c| sides.contains(&c.name().side))
        .cloned()
        .collect();
    let heatmap = Heatmap::new(case.heatmap.width(), case.heatmap.height(), channels).unwrap();
    save_heatmap(&heatmap, dir, None).unwrap()
}

pub fn config(watch: Option<&Path>, save: Option<&Path>) -> Arc<SessionConfig> {
    Arc::new(SessionConfig {
        watch_folder: watch.map(Path::to_owned),
        save_folder: save.map(Path::to_owned),
        ..SessionConfig::default()
    })
}
