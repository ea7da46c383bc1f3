//! Angles between fitted lines and the caput-collum-diaphyseal (CCD) angle.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{ransac_fit, FitResult, RansacConfig};
use crate::heatmap::{threshold_points, ChannelName, Heatmap, PointCloud, Side};
use crate::line::{Line2D, Point};

/// Angle between two infinite lines, in degrees within `[0, 90]`.
pub fn undirected_angle(l1: &Line2D, l2: &Line2D) -> f64 {
    let (ax, ay) = l1.direction();
    let (bx, by) = l2.direction();
    let cross = (ax * by - ay * bx).abs();
    let dot = (ax * bx + ay * by).abs();
    if dot == 0.0 {
        return 90.0;
    }
    cross.atan2(dot).to_degrees().min(90.0)
}

/// CCD angle in degrees: the supplement of the undirected angle between the
/// neck and shaft centerlines. Lies in `[90, 180]`; exactly 180 means the
/// lines are parallel (see [`is_degenerate_ccd`]).
pub fn ccd_angle(neck: &Line2D, shaft: &Line2D) -> f64 {
    180.0 - undirected_angle(neck, shaft)
}

/// Parallel neck and shaft lines cannot occur anatomically and point at a
/// failed fit upstream.
pub fn is_degenerate_ccd(ccd_degrees: f64) -> bool {
    ccd_degrees >= 180.0
}

pub fn line_from_endpoints(p1: Point, p2: Point) -> Result<Line2D> {
    Line2D::through(p1, p2)
}

/// Finite segment covering the cloud: projections of the points with the
/// smallest and largest position along the line.
pub fn endpoints_for_display(line: &Line2D, cloud: &PointCloud) -> Result<[Point; 2]> {
    let (lo, hi) = cloud
        .iter()
        .map(|p| line.project_scalar(p.xy()))
        .fold(None, |acc: Option<(f64, f64)>, t| match acc {
            None => Some((t, t)),
            Some((lo, hi)) => Some((lo.min(t), hi.max(t))),
        })
        .ok_or(Error::EmptyCloud)?;
    Ok([line.point_at(lo), line.point_at(hi)])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FemurMeasurement {
    pub side: Side,
    pub neck_centerline: Line2D,
    pub shaft_centerline: Line2D,
    pub ccd_degrees: f64,
    pub neck_endpoints: [Point; 2],
    pub shaft_endpoints: [Point; 2],
    pub degenerate: bool,
    pub neck_inliers: usize,
    pub shaft_inliers: usize,
}

impl FemurMeasurement {
    /// Measurement defined purely by display endpoints, as after a manual
    /// edit. The angle comes from the lines through those endpoints.
    pub fn from_endpoints(side: Side, neck: [Point; 2], shaft: [Point; 2]) -> Result<Self> {
        let neck_centerline = line_from_endpoints(neck[0], neck[1])?;
        let shaft_centerline = line_from_endpoints(shaft[0], shaft[1])?;
        let ccd_degrees = ccd_angle(&neck_centerline, &shaft_centerline);
        Ok(Self {
            side,
            neck_centerline,
            shaft_centerline,
            ccd_degrees,
            neck_endpoints: neck,
            shaft_endpoints: shaft,
            degenerate: is_degenerate_ccd(ccd_degrees),
            neck_inliers: 0,
            shaft_inliers: 0,
        })
    }
}

/// Thresholds one channel and fits a line to it. Errors carry the channel
/// name.
pub fn fit_channel(
    heatmap: &Heatmap,
    name: ChannelName,
    config: &RansacConfig,
    cutoff: f64,
) -> Result<(PointCloud, FitResult)> {
    let channel = heatmap.channel(name).ok_or(Error::MissingChannel(name))?;
    let cloud = threshold_points(channel, cutoff);
    let fit = ransac_fit(&cloud, config).map_err(|e| e.in_channel(name))?;
    Ok((cloud, fit))
}

pub fn measure_femur(
    heatmap: &Heatmap,
    side: Side,
    config: &RansacConfig,
    cutoff: f64,
) -> Result<FemurMeasurement> {
    let neck_name = ChannelName::neck_centerline(side);
    let shaft_name = ChannelName::shaft_centerline(side);
    for name in [neck_name, shaft_name] {
        if heatmap.channel(name).is_none() {
            return Err(Error::MissingChannel(name));
        }
    }
    let (neck_cloud, neck_fit) = fit_channel(heatmap, neck_name, config, cutoff)?;
    let (shaft_cloud, shaft_fit) = fit_channel(heatmap, shaft_name, config, cutoff)?;
    let neck_endpoints =
        endpoints_for_display(&neck_fit.line, &neck_cloud.select(&neck_fit.inlier_flags))
            .map_err(|e| e.in_channel(neck_name))?;
    let shaft_endpoints =
        endpoints_for_display(&shaft_fit.line, &shaft_cloud.select(&shaft_fit.inlier_flags))
            .map_err(|e| e.in_channel(shaft_name))?;
    let ccd_degrees = ccd_angle(&neck_fit.line, &shaft_fit.line);
    Ok(FemurMeasurement {
        side,
        neck_centerline: neck_fit.line,
        shaft_centerline: shaft_fit.line,
        ccd_degrees,
        neck_endpoints,
        shaft_endpoints,
        degenerate: is_degenerate_ccd(ccd_degrees),
        neck_inliers: neck_fit.inlier_count,
        shaft_inliers: shaft_fit.inlier_count,
    })
}
