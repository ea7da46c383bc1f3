//! Multi-channel line-probability rasters and the pixel-level operations on
//! them: thresholding into point clouds, centroids and raster MSE.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cutoff applied to network probabilities before fitting.
pub const DEFAULT_CUTOFF: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub const ALL: [Side; 2] = [Side::Left, Side::Right];

    pub fn label(self) -> &'static str {
        match self {
            Side::Left => "Left",
            Side::Right => "Right",
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Side {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "left" => Ok(Side::Left),
            "right" => Ok(Side::Right),
            _ => Err(Error::UnknownChannel(s.to_owned())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Structure {
    NeckMedial,
    NeckCenterline,
    NeckLateral,
    ShaftMedial,
    ShaftCenterline,
    ShaftLateral,
}

impl Structure {
    pub const ALL: [Structure; 6] = [
        Structure::NeckMedial,
        Structure::NeckCenterline,
        Structure::NeckLateral,
        Structure::ShaftMedial,
        Structure::ShaftCenterline,
        Structure::ShaftLateral,
    ];

    fn label(self) -> &'static str {
        match self {
            Structure::NeckMedial => "Femoral Neck Medial",
            Structure::NeckCenterline => "Femoral Neck Centerline",
            Structure::NeckLateral => "Femoral Neck Lateral",
            Structure::ShaftMedial => "Femoral Shaft Medial",
            Structure::ShaftCenterline => "Femoral Shaft Centerline",
            Structure::ShaftLateral => "Femoral Shaft Lateral",
        }
    }

    pub fn is_centerline(self) -> bool {
        matches!(self, Structure::NeckCenterline | Structure::ShaftCenterline)
    }
}

/// One of the twelve predicted line channels. Serialized as the annotation
/// label, e.g. `"Femoral Neck Centerline Left"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ChannelName {
    pub side: Side,
    pub structure: Structure,
}

impl ChannelName {
    pub const fn new(side: Side, structure: Structure) -> Self {
        Self { side, structure }
    }

    /// All twelve channels, left side first.
    pub fn all() -> impl Iterator<Item = ChannelName> {
        Side::ALL
            .into_iter()
            .flat_map(|side| Structure::ALL.into_iter().map(move |s| ChannelName::new(side, s)))
    }

    pub fn neck_centerline(side: Side) -> Self {
        Self::new(side, Structure::NeckCenterline)
    }

    pub fn shaft_centerline(side: Side) -> Self {
        Self::new(side, Structure::ShaftCenterline)
    }
}

impl fmt::Display for ChannelName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.structure.label(), self.side.label())
    }
}

impl FromStr for ChannelName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ChannelName::all()
            .find(|c| c.to_string() == s)
            .ok_or_else(|| Error::UnknownChannel(s.to_owned()))
    }
}

impl TryFrom<String> for ChannelName {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ChannelName> for String {
    fn from(c: ChannelName) -> Self {
        c.to_string()
    }
}

/// A single probability map, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRaster {
    name: ChannelName,
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl ChannelRaster {
    pub fn new(name: ChannelName, width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidSize { width, height });
        }
        if values.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: (width, height),
                found: (values.len(), 1),
            });
        }
        if let Some((index, &value)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(Error::ValueOutOfRange { index, value });
        }
        Ok(Self {
            name,
            width,
            height,
            values,
        })
    }

    pub fn zeros(name: ChannelName, width: usize, height: usize) -> Result<Self> {
        Self::new(name, width, height, vec![0.0; width * height])
    }

    pub fn name(&self) -> ChannelName {
        self.name
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value at column `x`, row `y`.
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    /// Sets a pixel, clamping into `[0, 1]`.
    pub fn set(&mut self, x: usize, y: usize, value: f64) {
        self.values[y * self.width + x] = value.clamp(0.0, 1.0);
    }

    pub fn with_name(mut self, name: ChannelName) -> Self {
        self.name = name;
        self
    }

    /// Rounds every value to the nearest multiple of 1/65535, the precision
    /// of the on-disk format.
    pub fn quantize(&mut self) {
        for v in &mut self.values {
            *v = f64::from(quantize_sample(*v)) / 65535.0;
        }
    }
}

pub(crate) fn quantize_sample(v: f64) -> u16 {
    (v.clamp(0.0, 1.0) * 65535.0).round() as u16
}

#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    width: usize,
    height: usize,
    channels: Vec<ChannelRaster>,
}

impl Heatmap {
    pub fn new(width: usize, height: usize, channels: Vec<ChannelRaster>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidSize { width, height });
        }
        for (i, c) in channels.iter().enumerate() {
            if c.dims() != (width, height) {
                return Err(Error::DimensionMismatch {
                    expected: (width, height),
                    found: c.dims(),
                });
            }
            if channels[..i].iter().any(|o| o.name == c.name) {
                return Err(Error::DuplicateChannel(c.name));
            }
        }
        Ok(Self {
            width,
            height,
            channels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> &[ChannelRaster] {
        &self.channels
    }

    pub fn channel(&self, name: ChannelName) -> Option<&ChannelRaster> {
        self.channels.iter().find(|c| c.name == name)
    }

    pub fn has_side(&self, side: Side) -> bool {
        self.channels.iter().any(|c| c.name.side == side)
    }

    /// Sides for which both centerline channels are present.
    pub fn measurable_sides(&self) -> Vec<Side> {
        Side::ALL
            .into_iter()
            .filter(|&s| {
                self.channel(ChannelName::neck_centerline(s)).is_some()
                    && self.channel(ChannelName::shaft_centerline(s)).is_some()
            })
            .collect()
    }

    pub fn quantize(&mut self) {
        self.channels.iter_mut().for_each(ChannelRaster::quantize);
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CloudPoint {
    pub x: f64,
    pub y: f64,
    pub weight: f64,
}

impl CloudPoint {
    pub fn new(x: f64, y: f64, weight: f64) -> Self {
        Self { x, y, weight }
    }

    pub fn xy(&self) -> (f64, f64) {
        (self.x, self.y)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<CloudPoint>,
}

impl PointCloud {
    pub fn new(points: Vec<CloudPoint>) -> Self {
        Self { points }
    }

    /// Unit-weight cloud from bare coordinates.
    pub fn from_xy(coords: impl IntoIterator<Item = (f64, f64)>) -> Self {
        Self::new(coords.into_iter().map(|(x, y)| CloudPoint::new(x, y, 1.0)).collect())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, CloudPoint> {
        self.points.iter()
    }

    /// Points whose flag is set.
    pub fn select(&self, flags: &[bool]) -> PointCloud {
        PointCloud::new(
            self.points
                .iter()
                .zip(flags)
                .filter(|(_, &f)| f)
                .map(|(p, _)| *p)
                .collect(),
        )
    }
}

/// Keeps every pixel whose probability strictly exceeds `cutoff`, in
/// row-major order. Coordinates are pixel centres: `x` is the column and
/// `y` the row.
pub fn threshold_points(channel: &ChannelRaster, cutoff: f64) -> PointCloud {
    let w = channel.width;
    PointCloud::new(
        channel
            .values
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > cutoff)
            .map(|(i, &v)| CloudPoint::new((i % w) as f64, (i / w) as f64, v))
            .collect(),
    )
}

/// Unweighted mean of the cloud's coordinates.
pub fn centroid(cloud: &PointCloud) -> Result<(f64, f64)> {
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let n = cloud.len() as f64;
    let (sx, sy) = cloud
        .iter()
        .fold((0.0, 0.0), |(sx, sy), p| (sx + p.x, sy + p.y));
    Ok((sx / n, sy / n))
}

/// Pixel-wise mean squared error.
pub fn heatmap_mse(predicted: &ChannelRaster, target: &ChannelRaster) -> Result<f64> {
    if predicted.dims() != target.dims() {
        return Err(Error::DimensionMismatch {
            expected: target.dims(),
            found: predicted.dims(),
        });
    }
    let sum: f64 = predicted
        .values
        .iter()
        .zip(&target.values)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(sum / predicted.values.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const NAME: ChannelName = ChannelName::new(Side::Left, Structure::NeckCenterline);

    fn raster(width: usize, height: usize, values: Vec<f64>) -> ChannelRaster {
        ChannelRaster::new(NAME, width, height, values).unwrap()
    }

    #[test]
    fn channel_names_round_trip_and_are_unique() {
        let names: Vec<_> = ChannelName::all().collect();
        assert_eq!(names.len(), 12);
        for n in &names {
            assert_eq!(n.to_string().parse::<ChannelName>().unwrap(), *n);
        }
        assert_eq!(
            ChannelName::neck_centerline(Side::Left).to_string(),
            "Femoral Neck Centerline Left"
        );
        assert!("Femoral Head Circle Left".parse::<ChannelName>().is_err());
        let json = serde_json::to_string(&ChannelName::shaft_centerline(Side::Right)).unwrap();
        assert_eq!(json, "\"Femoral Shaft Centerline Right\"");
    }

    #[test]
    fn raster_rejects_out_of_range_values() {
        assert!(matches!(
            ChannelRaster::new(NAME, 2, 1, vec![0.0, 1.5]),
            Err(Error::ValueOutOfRange { index: 1, .. })
        ));
        assert!(ChannelRaster::new(NAME, 2, 2, vec![0.0; 3]).is_err());
        assert!(ChannelRaster::new(NAME, 0, 2, vec![]).is_err());
    }

    #[test]
    fn heatmap_rejects_mismatched_and_duplicate_channels() {
        let a = raster(2, 2, vec![0.0; 4]);
        let b = ChannelRaster::zeros(ChannelName::shaft_centerline(Side::Left), 3, 2).unwrap();
        assert!(matches!(
            Heatmap::new(2, 2, vec![a.clone(), b]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            Heatmap::new(2, 2, vec![a.clone(), a]),
            Err(Error::DuplicateChannel(_))
        ));
    }

    #[test]
    fn threshold_keeps_only_pixels_above_cutoff() {
        let mut c = ChannelRaster::zeros(NAME, 12, 12).unwrap();
        c.set(5, 5, 0.95);
        c.set(9, 9, 0.50);
        let cloud = threshold_points(&c, 0.9);
        assert_eq!(cloud.points, vec![CloudPoint::new(5.0, 5.0, 0.95)]);
    }

    #[test]
    fn threshold_is_strict_and_empty_on_zeros() {
        let c = ChannelRaster::zeros(NAME, 4, 4).unwrap();
        assert!(threshold_points(&c, 0.9).is_empty());
        let c = raster(2, 1, vec![0.9, 0.9000001]);
        let cloud = threshold_points(&c, 0.9);
        assert_eq!(cloud.len(), 1);
        assert_eq!(cloud.points[0].x, 1.0);
    }

    #[test]
    fn threshold_orders_row_major_with_column_as_x() {
        let c = raster(3, 2, vec![0.0, 0.0, 1.0, 1.0, 0.0, 0.0]);
        let xy: Vec<_> = threshold_points(&c, 0.5).iter().map(|p| p.xy()).collect();
        assert_eq!(xy, vec![(2.0, 0.0), (0.0, 1.0)]);
    }

    #[test]
    fn centroid_cases() {
        assert_eq!(
            centroid(&PointCloud::from_xy([(0.0, 0.0), (2.0, 2.0)])).unwrap(),
            (1.0, 1.0)
        );
        assert_eq!(centroid(&PointCloud::from_xy([(7.0, 3.0)])).unwrap(), (7.0, 3.0));
        assert!(matches!(centroid(&PointCloud::default()), Err(Error::EmptyCloud)));
    }

    #[test]
    fn mse_cases() {
        let zeros = raster(2, 2, vec![0.0; 4]);
        let ones = raster(2, 2, vec![1.0; 4]);
        assert_eq!(heatmap_mse(&zeros, &zeros).unwrap(), 0.0);
        assert_eq!(heatmap_mse(&zeros, &ones).unwrap(), 1.0);
        assert_eq!(
            heatmap_mse(&raster(2, 1, vec![0.0, 0.5]), &raster(2, 1, vec![0.0, 0.0])).unwrap(),
            0.125
        );
        assert!(heatmap_mse(&zeros, &raster(4, 1, vec![0.0; 4])).is_err());
    }

    #[test]
    fn quantize_hits_endpoints() {
        let mut c = raster(3, 1, vec![0.0, 1.0, 0.5]);
        c.quantize();
        assert_eq!(c.values()[0], 0.0);
        assert_eq!(c.values()[1], 1.0);
        assert_eq!(c.values()[2], 32768.0 / 65535.0);
    }

    fn arb_raster() -> impl Strategy<Value = ChannelRaster> {
        (1usize..8, 1usize..8).prop_flat_map(|(w, h)| {
            prop::collection::vec(0.0f64..=1.0, w * h).prop_map(move |v| raster(w, h, v))
        })
    }

    proptest! {
        #[test]
        fn threshold_is_monotone(c in arb_raster(), t1 in 0.0f64..1.0, t2 in 0.0f64..1.0) {
            let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
            let low = threshold_points(&c, lo);
            let high = threshold_points(&c, hi);
            prop_assert!(high.iter().all(|p| low.points.contains(p)));
        }

        #[test]
        fn centroid_is_translation_equivariant(
            pts in prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 1..40),
            dx in -50.0f64..50.0,
            dy in -50.0f64..50.0,
        ) {
            let (cx, cy) = centroid(&PointCloud::from_xy(pts.iter().copied())).unwrap();
            let shifted = PointCloud::from_xy(pts.iter().map(|&(x, y)| (x + dx, y + dy)));
            let (sx, sy) = centroid(&shifted).unwrap();
            prop_assert!((sx - cx - dx).abs() < 1e-9);
            prop_assert!((sy - cy - dy).abs() < 1e-9);
        }

        #[test]
        fn mse_is_symmetric_and_zero_iff_equal(a in arb_raster(), seed in any::<u64>()) {
            let mut b = a.clone();
            let idx = (seed as usize) % b.values.len();
            b.values[idx] = 1.0 - b.values[idx];
            let ab = heatmap_mse(&a, &b).unwrap();
            prop_assert_eq!(ab, heatmap_mse(&b, &a).unwrap());
            prop_assert_eq!(heatmap_mse(&a, &a).unwrap(), 0.0);
            prop_assert_eq!(ab == 0.0, a == b);
        }
    }
}
