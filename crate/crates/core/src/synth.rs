//! Synthetic studies rendered from known femur geometry. They stand in for
//! network output when checking the fitting and measurement pipeline end to
//! end: every case carries the exact segments and CCD angle it was drawn
//! from.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ccd_angle, line_from_endpoints};
use crate::heatmap::{ChannelName, ChannelRaster, Heatmap, Side, Structure, DEFAULT_CUTOFF};
use crate::line::Point;
use crate::manifest::save_heatmap;

/// Perpendicular offset of the medial and lateral lines from the centerline.
pub const EDGE_OFFSET_PX: f64 = 8.0;
pub const CCD_RANGE_DEG: (f64, f64) = (110.0, 145.0);
pub const MAX_SHAFT_TILT_DEG: f64 = 12.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub width: usize,
    pub height: usize,
    /// Gaussian profile width of each rendered line, in pixels.
    pub sigma: f64,
    /// Outlier pixels per channel, as a fraction of the channel's clean
    /// above-cutoff pixel count.
    pub outlier_fraction: f64,
    /// Amplitude `a` of the additive `U(-a, a)` noise on every pixel.
    pub blur_noise: f64,
    pub seed: u64,
    pub cases: usize,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            width: 512,
            height: 512,
            sigma: 3.0,
            outlier_fraction: 0.0,
            blur_noise: 0.0,
            seed: 0,
            cases: 1,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.width < 64 || self.height < 64 {
            return Err(Error::InvalidSpec("raster must be at least 64x64"));
        }
        if self.sigma.is_nan() || self.sigma <= 0.0 {
            return Err(Error::InvalidSpec("sigma must be positive"));
        }
        if !(0.0..1.0).contains(&self.outlier_fraction) {
            return Err(Error::InvalidSpec("outlier_fraction must be in [0, 1)"));
        }
        if !(0.0..=0.1).contains(&self.blur_noise) {
            return Err(Error::InvalidSpec("blur_noise must be in [0, 0.1]"));
        }
        if self.cases == 0 {
            return Err(Error::InvalidSpec("cases must be positive"));
        }
        Ok(())
    }
}

/// Ground-truth centerline segments of one femur.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SideTruth {
    pub neck: [Point; 2],
    pub shaft: [Point; 2],
    pub ccd: f64,
}

impl SideTruth {
    pub fn segment(&self, structure: Structure) -> Option<[Point; 2]> {
        match structure {
            Structure::NeckCenterline => Some(self.neck),
            Structure::ShaftCenterline => Some(self.shaft),
            _ => None,
        }
    }
}

/// Contents of `truth.json`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub left: Option<SideTruth>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub right: Option<SideTruth>,
}

impl Truth {
    pub fn side(&self, side: Side) -> Option<&SideTruth> {
        match side {
            Side::Left => self.left.as_ref(),
            Side::Right => self.right.as_ref(),
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Json {
            path: path.to_owned(),
            source: e,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self).map_err(|e| Error::Json {
            path: path.to_owned(),
            source: e,
        })?;
        fs::write(path, json).map_err(|e| Error::io(path, e))
    }
}

/// Geometry of one femur in pixel space. The shaft runs from the junction
/// downwards; the neck leaves the junction towards the image centre at
/// `ccd_deg` from the shaft.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FemurGeometry {
    pub junction: Point,
    /// Shaft deviation from vertical, degrees.
    pub shaft_tilt_deg: f64,
    pub ccd_deg: f64,
    pub shaft_length: f64,
    pub neck_length: f64,
}

impl FemurGeometry {
    /// Neck and shaft centerline segments, each ordered from the junction.
    pub fn segments(&self, side: Side) -> ([Point; 2], [Point; 2]) {
        // the right femur is displayed on the image's left, so its medial
        // direction is +x
        let medial = match side {
            Side::Right => 1.0,
            Side::Left => -1.0,
        };
        let tilt = self.shaft_tilt_deg.to_radians();
        let neck_angle = tilt + medial * self.ccd_deg.to_radians();
        let (jx, jy) = self.junction;
        let shaft_end = (
            jx + self.shaft_length * tilt.sin(),
            jy + self.shaft_length * tilt.cos(),
        );
        let neck_end = (
            jx + self.neck_length * neck_angle.sin(),
            jy + self.neck_length * neck_angle.cos(),
        );
        ([self.junction, neck_end], [self.junction, shaft_end])
    }
}

#[derive(Debug, Clone)]
pub struct GroundTruthCase {
    pub heatmap: Heatmap,
    pub truth: Truth,
}

fn point_segment_distance_sq(p: Point, a: Point, b: Point) -> f64 {
    let (abx, aby) = (b.0 - a.0, b.1 - a.1);
    let (apx, apy) = (p.0 - a.0, p.1 - a.1);
    let t = ((apx * abx + apy * aby) / (abx * abx + aby * aby)).clamp(0.0, 1.0);
    let (dx, dy) = (apx - t * abx, apy - t * aby);
    dx * dx + dy * dy
}

/// Renders `exp(-d^2 / (2 sigma^2))` where `d` is each pixel centre's
/// distance to the segment.
pub fn render_line_heatmap(
    name: ChannelName,
    segment: [Point; 2],
    sigma: f64,
    width: usize,
    height: usize,
) -> Result<ChannelRaster> {
    let [a, b] = segment;
    let inside = |p: Point| {
        (0.0..=(width as f64 - 1.0)).contains(&p.0) && (0.0..=(height as f64 - 1.0)).contains(&p.1)
    };
    if a == b || !inside(a) || !inside(b) {
        return Err(Error::DegenerateSegment);
    }
    let inv = 1.0 / (2.0 * sigma * sigma);
    let mut values = vec![0.0; width * height];
    for (i, v) in values.iter_mut().enumerate() {
        let p = ((i % width) as f64, (i / width) as f64);
        let e = point_segment_distance_sq(p, a, b) * inv;
        // exp underflows to exactly zero beyond this
        if e < 746.0 {
            *v = (-e).exp();
        }
    }
    ChannelRaster::new(name, width, height, values)
}

fn offset_segment(segment: [Point; 2], offset: f64) -> [Point; 2] {
    let [a, b] = segment;
    let len = (b.0 - a.0).hypot(b.1 - a.1);
    let (nx, ny) = (-(b.1 - a.1) / len, (b.0 - a.0) / len);
    [
        (a.0 + offset * nx, a.1 + offset * ny),
        (b.0 + offset * nx, b.1 + offset * ny),
    ]
}

fn side_truth(side: Side, geometry: &FemurGeometry) -> Result<SideTruth> {
    let (neck, shaft) = geometry.segments(side);
    let ccd = ccd_angle(
        &line_from_endpoints(neck[0], neck[1])?,
        &line_from_endpoints(shaft[0], shaft[1])?,
    );
    Ok(SideTruth { neck, shaft, ccd })
}

/// The six line segments of one femur, keyed by structure.
fn femur_segments(truth: &SideTruth, side: Side) -> [(Structure, [Point; 2]); 6] {
    // medial edges sit towards the image centre for the shaft and below the
    // neck axis
    let medial = match side {
        Side::Right => 1.0,
        Side::Left => -1.0,
    };
    let shaft_off = |s: f64| {
        let seg = offset_segment(truth.shaft, EDGE_OFFSET_PX);
        let sign = if (seg[0].0 - truth.shaft[0].0) * medial >= 0.0 { s } else { -s };
        offset_segment(truth.shaft, sign * EDGE_OFFSET_PX)
    };
    let neck_off = |s: f64| {
        let seg = offset_segment(truth.neck, EDGE_OFFSET_PX);
        let sign = if seg[0].1 >= truth.neck[0].1 { s } else { -s };
        offset_segment(truth.neck, sign * EDGE_OFFSET_PX)
    };
    [
        (Structure::NeckMedial, neck_off(1.0)),
        (Structure::NeckCenterline, truth.neck),
        (Structure::NeckLateral, neck_off(-1.0)),
        (Structure::ShaftMedial, shaft_off(1.0)),
        (Structure::ShaftCenterline, truth.shaft),
        (Structure::ShaftLateral, shaft_off(-1.0)),
    ]
}

fn corrupt(channel: &mut ChannelRaster, spec: &SyntheticSpec, rng: &mut ChaCha8Rng) {
    let clean_band = channel.values().iter().filter(|&&v| v > DEFAULT_CUTOFF).count();
    let (w, h) = channel.dims();
    if spec.blur_noise > 0.0 {
        let a = spec.blur_noise;
        for y in 0..h {
            for x in 0..w {
                let v = channel.get(x, y) + rng.random_range(-a..a);
                channel.set(x, y, v);
            }
        }
    }
    let outliers = (spec.outlier_fraction * clean_band as f64).round() as usize;
    for _ in 0..outliers {
        let x = rng.random_range(0..w);
        let y = rng.random_range(0..h);
        // (0.9, 1.0]
        let v = 1.0 - 0.1 * rng.random::<f64>();
        channel.set(x, y, v);
    }
}

/// Renders all twelve channels for the given femurs and applies the `spec`
/// corruption.
pub fn render_study(
    spec: &SyntheticSpec,
    femurs: &[(Side, FemurGeometry)],
    rng: &mut ChaCha8Rng,
) -> Result<GroundTruthCase> {
    let mut truth = Truth::default();
    let mut channels = Vec::with_capacity(6 * femurs.len());
    for &(side, geometry) in femurs {
        let st = side_truth(side, &geometry)?;
        for (structure, segment) in femur_segments(&st, side) {
            let name = ChannelName::new(side, structure);
            let mut channel =
                render_line_heatmap(name, segment, spec.sigma, spec.width, spec.height)?;
            corrupt(&mut channel, spec, rng);
            channels.push(channel);
        }
        match side {
            Side::Left => truth.left = Some(st),
            Side::Right => truth.right = Some(st),
        }
    }
    Ok(GroundTruthCase {
        heatmap: Heatmap::new(spec.width, spec.height, channels)?,
        truth,
    })
}

fn random_geometry(side: Side, spec: &SyntheticSpec, rng: &mut ChaCha8Rng) -> FemurGeometry {
    let (w, h) = (spec.width as f64, spec.height as f64);
    let cx = match side {
        Side::Right => 0.28,
        Side::Left => 0.72,
    };
    FemurGeometry {
        junction: (
            w * (cx + rng.random_range(-0.04..0.04)),
            h * (0.38 + rng.random_range(-0.04..0.04)),
        ),
        shaft_tilt_deg: rng.random_range(-MAX_SHAFT_TILT_DEG..MAX_SHAFT_TILT_DEG),
        ccd_deg: rng.random_range(CCD_RANGE_DEG.0..CCD_RANGE_DEG.1),
        shaft_length: h * rng.random_range(0.35..0.45),
        neck_length: h.min(w) * rng.random_range(0.14..0.2),
    }
}

fn case_rng(seed: u64, case_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(case_index);
    rng
}

/// Case `case_index` of the dataset described by `spec`. Deterministic in
/// `(spec.seed, case_index)`.
pub fn generate_case(spec: &SyntheticSpec, case_index: u64) -> Result<GroundTruthCase> {
    spec.validate()?;
    let mut rng = case_rng(spec.seed, case_index);
    let right = random_geometry(Side::Right, spec, &mut rng);
    let left = random_geometry(Side::Left, spec, &mut rng);
    render_study(spec, &[(Side::Left, left), (Side::Right, right)], &mut rng)
}

pub fn case_dir_name(case_index: usize) -> String {
    format!("case_{case_index:04}")
}

fn write_case(spec: &SyntheticSpec, out_dir: &Path, index: usize) -> Result<PathBuf> {
    let case = generate_case(spec, index as u64)?;
    let dir = out_dir.join(case_dir_name(index));
    let manifest = save_heatmap(&case.heatmap, &dir, None)?;
    case.truth.write(&dir.join("truth.json"))?;
    Ok(manifest)
}

/// Writes `spec.cases` case directories, each holding `manifest.json`, the
/// twelve channel PNGs and `truth.json`. Returns the manifest paths in case
/// order.
pub fn write_dataset(spec: &SyntheticSpec, out_dir: &Path) -> Result<Vec<PathBuf>> {
    spec.validate()?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..spec.cases)
            .into_par_iter()
            .map(|i| write_case(spec, out_dir, i))
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..spec.cases).map(|i| write_case(spec, out_dir, i)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fit::RansacConfig;
    use crate::geometry::measure_femur;
    use crate::heatmap::threshold_points;
    use crate::line::residual;

    const NAME: ChannelName = ChannelName::new(Side::Left, Structure::ShaftCenterline);

    #[test]
    fn on_segment_pixel_is_one_and_sigma_pixel_is_exp_half() {
        let c = render_line_heatmap(NAME, [(10.0, 5.0), (10.0, 50.0)], 3.0, 64, 64).unwrap();
        assert_eq!(c.get(10, 20), 1.0);
        assert_eq!(c.get(13, 20), (-0.5f64).exp());
        // beyond the end cap the distance is to the endpoint
        assert_eq!(c.get(10, 53), (-0.5f64).exp());
    }

    #[test]
    fn degenerate_segments_are_rejected() {
        assert!(render_line_heatmap(NAME, [(3.0, 3.0), (3.0, 3.0)], 3.0, 16, 16).is_err());
        assert!(render_line_heatmap(NAME, [(3.0, 3.0), (30.0, 3.0)], 3.0, 16, 16).is_err());
    }

    #[test]
    fn perpendicular_scanline_matches_discrete_gaussian() {
        let sigma = 2.5;
        let c = render_line_heatmap(NAME, [(31.0, 2.0), (31.0, 61.0)], sigma, 64, 64).unwrap();
        // brute force: per-pixel horizontal distance to x = 31
        let expected: f64 = (0..64)
            .map(|x| {
                let d = x as f64 - 31.0;
                (-d * d / (2.0 * sigma * sigma)).exp()
            })
            .sum();
        let row: f64 = (0..64).map(|x| c.get(x, 30)).sum();
        assert!((row - expected).abs() < 64.0 / 65535.0);
    }

    #[test]
    fn thresholded_band_stays_within_closed_form_half_width() {
        let sigma = 3.0;
        let half_width = sigma * (-2.0 * 0.9f64.ln()).sqrt();
        let seg = [(20.3, 11.7), (97.9, 100.2)];
        let c = render_line_heatmap(NAME, seg, sigma, 128, 128).unwrap();
        let cloud = threshold_points(&c, 0.9);
        assert!(!cloud.is_empty());
        // brute force over every raster pixel
        for y in 0..128 {
            for x in 0..128 {
                let d = point_segment_distance_sq((x as f64, y as f64), seg[0], seg[1]).sqrt();
                let kept = c.get(x, y) > 0.9;
                if kept {
                    assert!(d <= half_width + 1e-9, "pixel ({x},{y}) d={d}");
                } else {
                    assert!(d >= half_width - 1e-9, "pixel ({x},{y}) d={d}");
                }
            }
        }
    }

    #[test]
    fn symmetric_segment_centroid_is_the_midpoint() {
        let c = render_line_heatmap(NAME, [(20.0, 30.0), (80.0, 90.0)], 3.0, 128, 128).unwrap();
        let cloud = threshold_points(&c, 0.9);
        let n = cloud.len() as f64;
        let mean = (
            cloud.iter().map(|p| p.x).sum::<f64>() / n,
            cloud.iter().map(|p| p.y).sum::<f64>() / n,
        );
        let c = crate::heatmap::centroid(&cloud).unwrap();
        assert_eq!(c, mean);
        assert!((c.0 - 50.0).abs() < 0.5 && (c.1 - 60.0).abs() < 0.5);
    }

    #[test]
    fn display_endpoints_of_rendered_segment_are_close_to_truth() {
        let seg = [(30.0, 20.0), (60.0, 110.0)];
        let c = render_line_heatmap(NAME, seg, 3.0, 128, 128).unwrap();
        let cloud = threshold_points(&c, 0.9);
        let fit = crate::fit::ransac_fit(&cloud, &RansacConfig::default()).unwrap();
        let [a, b] = crate::geometry::endpoints_for_display(&fit.line, &cloud).unwrap();
        let d = |p: Point, q: Point| (p.0 - q.0).hypot(p.1 - q.1);
        assert!(d(a, seg[0]) < 1.5 && d(b, seg[1]) < 1.5, "{a:?} {b:?}");
    }

    #[test]
    fn stored_ccd_matches_segments_and_sampling_bounds() {
        let spec = SyntheticSpec { width: 128, height: 128, ..Default::default() };
        for i in 0..1000 {
            let mut rng = case_rng(7, i);
            for side in Side::ALL {
                let g = random_geometry(side, &spec, &mut rng);
                let st = side_truth(side, &g).unwrap();
                assert!((st.ccd - g.ccd_deg).abs() < 1e-9);
                assert!(st.ccd >= CCD_RANGE_DEG.0 - 1e-9 && st.ccd <= CCD_RANGE_DEG.1 + 1e-9);
                let (dx, dy) = (st.shaft[1].0 - st.shaft[0].0, st.shaft[1].1 - st.shaft[0].1);
                assert!(dx.atan2(dy).to_degrees().abs() <= 15.0);
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = SyntheticSpec {
            width: 96,
            height: 96,
            outlier_fraction: 0.2,
            blur_noise: 0.05,
            seed: 3,
            ..Default::default()
        };
        let a = generate_case(&spec, 5).unwrap();
        let b = generate_case(&spec, 5).unwrap();
        assert_eq!(a.heatmap, b.heatmap);
        assert_eq!(a.truth, b.truth);
        assert_ne!(generate_case(&spec, 6).unwrap().heatmap, a.heatmap);
        assert_eq!(a.heatmap.channels().len(), 12);
    }

    #[test]
    fn clean_band_points_lie_near_the_true_centerline() {
        let spec = SyntheticSpec::default();
        let case = generate_case(&spec, 0).unwrap();
        let half_width = spec.sigma * (-2.0 * 0.9f64.ln()).sqrt();
        for side in Side::ALL {
            let st = case.truth.side(side).unwrap();
            let line = line_from_endpoints(st.neck[0], st.neck[1]).unwrap();
            let cloud =
                threshold_points(case.heatmap.channel(ChannelName::neck_centerline(side)).unwrap(), 0.9);
            assert!(cloud.iter().all(|p| residual(&line, p.xy()) <= half_width));
        }
    }

    #[test]
    fn clean_case_recovers_ccd() {
        let spec = SyntheticSpec::default();
        let case = generate_case(&spec, 1).unwrap();
        for side in Side::ALL {
            let m = measure_femur(&case.heatmap, side, &RansacConfig::default(), 0.9).unwrap();
            let truth = case.truth.side(side).unwrap().ccd;
            assert!((m.ccd_degrees - truth).abs() < 0.1, "{side}: {} vs {truth}", m.ccd_degrees);
        }
    }

    #[test]
    fn known_126_degree_femur_is_measured() {
        let spec = SyntheticSpec::default();
        let geometry = FemurGeometry {
            junction: (360.0, 190.0),
            shaft_tilt_deg: 6.0,
            ccd_deg: 126.0,
            shaft_length: 210.0,
            neck_length: 90.0,
        };
        let mut rng = case_rng(0, 0);
        let case = render_study(&spec, &[(Side::Left, geometry)], &mut rng).unwrap();
        assert!((case.truth.left.unwrap().ccd - 126.0).abs() < 1e-9);
        assert!(case.truth.right.is_none());
        let m = measure_femur(&case.heatmap, Side::Left, &RansacConfig::default(), 0.9).unwrap();
        assert!((m.ccd_degrees - 126.0).abs() < 0.5, "{}", m.ccd_degrees);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        for spec in [
            SyntheticSpec { sigma: 0.0, ..Default::default() },
            SyntheticSpec { outlier_fraction: 1.0, ..Default::default() },
            SyntheticSpec { blur_noise: 0.2, ..Default::default() },
            SyntheticSpec { cases: 0, ..Default::default() },
            SyntheticSpec { width: 10, ..Default::default() },
        ] {
            assert!(matches!(spec.validate(), Err(Error::InvalidSpec(_))));
        }
    }
}
