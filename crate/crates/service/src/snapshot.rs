//! Snapshot export: an overlay PNG of the current layout plus a JSON sidecar
//! with the timestamp, dictated note, angles and endpoints.

use std::fs::OpenOptions;
use std::path::{Path, PathBuf};

use ccd_core::raster_io::{read_display_gray8, write_rgb8};
use ccd_core::{FemurMeasurement, Point, Side};
use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Result, ServiceError};
use crate::font::{glyph, GLYPH_H, GLYPH_W};
use crate::session::{DisplaySlot, OpenStudy, ViewState};

const NECK_COLOR: [u8; 3] = [255, 200, 0];
const SHAFT_COLOR: [u8; 3] = [0, 200, 255];
const HANDLE_COLOR: [u8; 3] = [255, 60, 60];
const TEXT_COLOR: [u8; 3] = [255, 255, 255];
const TEXT_BACKGROUND: [u8; 3] = [0, 0, 0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotMeasurement {
    pub side: Side,
    pub ccd_degrees: f64,
    pub degenerate: bool,
    pub neck_endpoints: [Point; 2],
    pub shaft_endpoints: [Point; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotStudy {
    pub slot: DisplaySlot,
    pub manifest: PathBuf,
    pub measurements: Vec<SnapshotMeasurement>,
}

/// Contents of the sidecar JSON; also what the API returns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub timestamp: String,
    pub note: String,
    pub view: ViewState,
    pub image: PathBuf,
    pub sidecar: PathBuf,
    pub studies: Vec<SnapshotStudy>,
}

struct Canvas {
    width: usize,
    height: usize,
    rgb: Vec<u8>,
}

impl Canvas {
    fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            rgb: vec![0; width * height * 3],
        }
    }

    fn put(&mut self, x: i64, y: i64, color: [u8; 3]) {
        if x < 0 || y < 0 || x as usize >= self.width || y as usize >= self.height {
            return;
        }
        let i = (y as usize * self.width + x as usize) * 3;
        self.rgb[i..i + 3].copy_from_slice(&color);
    }

    fn fill_rect(&mut self, x: i64, y: i64, w: i64, h: i64, color: [u8; 3]) {
        for yy in y..y + h {
            for xx in x..x + w {
                self.put(xx, yy, color);
            }
        }
    }

    fn dot(&mut self, (x, y): Point, radius: f64, color: [u8; 3]) {
        let r = radius.ceil() as i64;
        let (cx, cy) = (x.round() as i64, y.round() as i64);
        for dy in -r..=r {
            for dx in -r..=r {
                if ((dx * dx + dy * dy) as f64) <= radius * radius {
                    self.put(cx + dx, cy + dy, color);
                }
            }
        }
    }

    fn segment(&mut self, a: Point, b: Point, radius: f64, color: [u8; 3]) {
        let len = (b.0 - a.0).hypot(b.1 - a.1);
        let steps = (len * 2.0).ceil().max(1.0) as usize;
        for i in 0..=steps {
            let t = i as f64 / steps as f64;
            self.dot((a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1)), radius, color);
        }
    }

    /// Draws one line of text on a dark box; returns the height used.
    fn text(&mut self, x: i64, y: i64, text: &str, scale: usize) -> i64 {
        let sc = scale as i64;
        let advance = (GLYPH_W as i64 + 1) * sc;
        let n = text.chars().count() as i64;
        let pad = sc;
        let box_h = GLYPH_H as i64 * sc + 2 * pad;
        self.fill_rect(x, y, n * advance + 2 * pad - sc, box_h, TEXT_BACKGROUND);
        for (i, c) in text.chars().enumerate() {
            let gx = x + pad + i as i64 * advance;
            for (row, bits) in glyph(c).iter().enumerate() {
                for col in 0..GLYPH_W {
                    if bits & (0x10 >> col) != 0 {
                        self.fill_rect(
                            gx + col as i64 * sc,
                            y + pad + row as i64 * sc,
                            sc,
                            sc,
                            TEXT_COLOR,
                        );
                    }
                }
            }
        }
        box_h
    }

    fn crop_columns(self, from: usize, to: usize) -> Canvas {
        let w = to - from;
        let mut out = Canvas::new(w, self.height);
        for y in 0..self.height {
            let src = (y * self.width + from) * 3;
            out.rgb[y * w * 3..(y + 1) * w * 3].copy_from_slice(&self.rgb[src..src + w * 3]);
        }
        out
    }
}

fn side_label(side: Side) -> &'static str {
    match side {
        Side::Left => "L",
        Side::Right => "R",
    }
}

fn summarize(m: &FemurMeasurement) -> SnapshotMeasurement {
    SnapshotMeasurement {
        side: m.side,
        ccd_degrees: m.ccd_degrees,
        degenerate: m.degenerate,
        neck_endpoints: m.neck_endpoints,
        shaft_endpoints: m.shaft_endpoints,
    }
}

/// Word-wraps to at most `max_lines` lines of `width` characters.
fn wrap(text: &str, width: usize, max_lines: usize) -> Vec<String> {
    let mut lines: Vec<String> = Vec::new();
    let mut current = String::new();
    for word in text.split_whitespace() {
        let mut word: String = word.chars().take(width).collect();
        if !current.is_empty() && current.chars().count() + 1 + word.chars().count() > width {
            lines.push(std::mem::take(&mut current));
        }
        if !current.is_empty() {
            current.push(' ');
        }
        current.push_str(&std::mem::take(&mut word));
    }
    if !current.is_empty() {
        lines.push(current);
    }
    if lines.len() > max_lines {
        lines.truncate(max_lines);
        if let Some(last) = lines.last_mut() {
            let keep = width.saturating_sub(3);
            *last = last.chars().take(keep).collect::<String>() + "...";
        }
    }
    lines
}

/// Loads the radiograph if the manifest names one; otherwise a black panel
/// the size of the heatmap. Lines are scaled from heatmap to image pixels.
fn panel(study: &OpenStudy) -> (usize, usize, Vec<u8>) {
    let hm_w = study.study.heatmap.width();
    let hm_h = study.study.heatmap.height();
    if let Some(path) = study.study.image_path() {
        match read_display_gray8(&path) {
            Ok(img) => return (img.width, img.height, img.pixels),
            Err(e) => tracing::warn!("snapshot without radiograph: {e}"),
        }
    }
    (hm_w, hm_h, vec![0; hm_w * hm_h])
}

fn render(layout: &[(DisplaySlot, &OpenStudy)], view: ViewState, stamp: &str, note: &str) -> Canvas {
    let panels: Vec<_> = layout.iter().map(|(_, s)| panel(s)).collect();
    let width: usize = panels.iter().map(|p| p.0).sum::<usize>().max(1);
    let height = panels.iter().map(|p| p.1).max().unwrap_or(1).max(1);
    let mut canvas = Canvas::new(width, height);
    let scale = (height / 256).max(1);
    let mut x0 = 0usize;
    for ((_, study), (pw, ph, gray)) in layout.iter().zip(&panels) {
        for y in 0..*ph {
            for x in 0..*pw {
                let v = gray[y * pw + x];
                canvas.put((x0 + x) as i64, y as i64, [v, v, v]);
            }
        }
        let sx = *pw as f64 / study.study.heatmap.width() as f64;
        let sy = *ph as f64 / study.study.heatmap.height() as f64;
        let map = |(x, y): Point| (x0 as f64 + (x + 0.5) * sx - 0.5, (y + 0.5) * sy - 0.5);
        let radius = scale as f64;
        let mut ty = scale as i64 * 2;
        for result in &study.results {
            let label = match &result.measurement {
                Some(m) => {
                    for (ends, color) in [(m.neck_endpoints, NECK_COLOR), (m.shaft_endpoints, SHAFT_COLOR)] {
                        canvas.segment(map(ends[0]), map(ends[1]), radius, color);
                        for p in ends {
                            canvas.dot(map(p), radius * 2.5, HANDLE_COLOR);
                        }
                    }
                    format!("{} CCD {:.1}°", side_label(result.side), m.ccd_degrees)
                }
                None => format!("{} CCD --", side_label(result.side)),
            };
            ty += canvas.text(x0 as i64 + 2 * scale as i64, ty, &label, scale) + scale as i64;
        }
        x0 += pw;
    }

    let (from, to) = match view {
        ViewState::Both => (0, width),
        ViewState::LeftZoom => (0, width.div_ceil(2)),
        ViewState::RightZoom => (width / 2, width),
    };
    let mut canvas = if (from, to) == (0, width) {
        canvas
    } else {
        canvas.crop_columns(from, to)
    };

    let advance = (GLYPH_W + 1) * scale;
    let cols = (canvas.width.saturating_sub(4 * scale) / advance).max(1);
    let mut lines = vec![stamp.to_owned()];
    lines.extend(wrap(note, cols, 3));
    let line_h = (GLYPH_H + 3) * scale;
    let mut y = canvas.height as i64 - (lines.len() * line_h) as i64 - scale as i64;
    for line in lines {
        let line: String = line.chars().take(cols).collect();
        y += canvas.text(2 * scale as i64, y, &line, scale) + scale as i64;
    }
    canvas
}

/// Reserves `snapshot_<stamp>[_n].png` without clobbering an existing file.
fn reserve(folder: &Path, stem: &str) -> Result<(PathBuf, PathBuf)> {
    for n in 0u32.. {
        let base = if n == 0 {
            stem.to_owned()
        } else {
            format!("{stem}_{n}")
        };
        let png = folder.join(format!("{base}.png"));
        match OpenOptions::new().write(true).create_new(true).open(&png) {
            Ok(_) => return Ok((png, folder.join(format!("{base}.json")))),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(ServiceError::io(png, e)),
        }
    }
    unreachable!()
}

pub fn write_snapshot(
    folder: &Path,
    layout: &[(DisplaySlot, &OpenStudy)],
    view: ViewState,
    note: &str,
    wall: DateTime<Utc>,
) -> Result<Snapshot> {
    std::fs::create_dir_all(folder).map_err(|e| ServiceError::io(folder, e))?;
    let timestamp = wall.to_rfc3339_opts(SecondsFormat::Millis, true);
    let stem = format!("snapshot_{}", wall.format("%Y%m%dT%H%M%S%.3fZ"));
    let (image, sidecar) = reserve(folder, &stem)?;

    let stamp = wall.format("%Y-%m-%d %H:%M:%S UTC").to_string();
    let canvas = render(layout, view, &stamp, note);
    write_rgb8(&image, canvas.width, canvas.height, &canvas.rgb)?;

    let snapshot = Snapshot {
        timestamp,
        note: note.to_owned(),
        view,
        image,
        sidecar: sidecar.clone(),
        studies: layout
            .iter()
            .map(|(slot, s)| SnapshotStudy {
                slot: *slot,
                manifest: s.manifest_path().to_owned(),
                measurements: s
                    .results
                    .iter()
                    .filter_map(|r| r.measurement.as_ref().map(summarize))
                    .collect(),
            })
            .collect(),
    };
    let json = serde_json::to_vec_pretty(&snapshot).expect("snapshot serializes");
    std::fs::write(&sidecar, json).map_err(|e| ServiceError::io(&sidecar, e))?;
    Ok(snapshot)
}
