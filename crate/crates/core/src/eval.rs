//! Evaluation of predicted heatmaps against ground truth: per-line centroid
//! distance and angular error, per-side CCD absolute error, and dataset
//! aggregates laid out like the usual "per centerline" and "CCD MAE" tables.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{ransac_fit, RansacConfig};
use crate::geometry::{ccd_angle, undirected_angle};
use crate::heatmap::{
    centroid, threshold_points, ChannelName, ChannelRaster, Heatmap, Side, Structure, DEFAULT_CUTOFF,
};
use crate::line::{Line2D, Point};
use crate::manifest::load_heatmap;
use crate::synth::{render_line_heatmap, Truth};

/// Row order of the per-line table.
pub const CENTERLINES: [ChannelName; 4] = [
    ChannelName::new(Side::Left, Structure::ShaftCenterline),
    ChannelName::new(Side::Left, Structure::NeckCenterline),
    ChannelName::new(Side::Right, Structure::NeckCenterline),
    ChannelName::new(Side::Right, Structure::ShaftCenterline),
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub cutoff: f64,
    pub ransac: RansacConfig,
    /// Profile width used to render the truth masks.
    pub sigma: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            cutoff: DEFAULT_CUTOFF,
            ransac: RansacConfig::default(),
            sigma: 3.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineMetrics {
    pub channel: ChannelName,
    /// Pixels between the thresholded prediction and truth mask centroids.
    pub centroid_distance: f64,
    /// Degrees in `[0, 90]` between the fitted prediction and truth lines.
    pub angular_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineReport {
    pub channel: ChannelName,
    pub metrics: Option<LineMetrics>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SideReport {
    pub side: Side,
    pub predicted_ccd: Option<f64>,
    /// Angle between the lines fitted to the rendered truth masks, the same
    /// reference the line metrics use.
    pub true_ccd: Option<f64>,
    pub ccd_error: Option<f64>,
    /// Angle of the truth segments themselves, from `truth.json`.
    pub geometric_ccd: Option<f64>,
    pub geometric_ccd_error: Option<f64>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseReport {
    pub case_id: String,
    pub lines: Vec<LineReport>,
    pub sides: Vec<SideReport>,
}

impl CaseReport {
    pub fn failures(&self) -> usize {
        self.lines.iter().filter(|l| l.failure.is_some()).count()
            + self.sides.iter().filter(|s| s.failure.is_some()).count()
    }

    pub fn failed(&self) -> bool {
        self.failures() > 0
    }

    /// A case where nothing could be evaluated.
    pub fn unreadable(case_id: impl Into<String>, reason: &str) -> Self {
        Self {
            case_id: case_id.into(),
            lines: CENTERLINES
                .iter()
                .map(|&channel| LineReport {
                    channel,
                    metrics: None,
                    failure: Some(reason.to_owned()),
                })
                .collect(),
            sides: [Side::Left, Side::Right]
                .into_iter()
                .map(|side| SideReport {
                    side,
                    predicted_ccd: None,
                    true_ccd: None,
                    ccd_error: None,
                    geometric_ccd: None,
                    geometric_ccd_error: None,
                    failure: Some(reason.to_owned()),
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineAggregate {
    pub channel: ChannelName,
    pub count: usize,
    pub mean_centroid_distance: Option<f64>,
    pub mean_angular_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SideAggregate {
    pub side: Side,
    pub count: usize,
    pub ccd_mae: Option<f64>,
    pub geometric_ccd_mae: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub case_count: usize,
    /// Cases with at least one failed line or side.
    pub failure_count: usize,
    pub line_failures: usize,
    pub lines: Vec<LineAggregate>,
    pub ccd: Vec<SideAggregate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub config: EvalConfig,
    pub cases: Vec<CaseReport>,
    pub aggregate: AggregateReport,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn evaluate_line(
    pred: &ChannelRaster,
    truth_segment: [Point; 2],
    config: &EvalConfig,
) -> Result<(LineMetrics, Line2D, Line2D)> {
    let name = pred.name();
    let pred_cloud = threshold_points(pred, config.cutoff);
    if pred_cloud.is_empty() {
        return Err(Error::EmptyCloud.in_channel(name));
    }
    let truth = render_line_heatmap(
        name,
        truth_segment,
        config.sigma,
        pred.width(),
        pred.height(),
    )?;
    let truth_cloud = threshold_points(&truth, config.cutoff);
    let (px, py) = centroid(&pred_cloud)?;
    let (tx, ty) = centroid(&truth_cloud).map_err(|e| e.in_channel(name))?;
    let pred_fit = ransac_fit(&pred_cloud, &config.ransac).map_err(|e| e.in_channel(name))?;
    let truth_fit = ransac_fit(&truth_cloud, &config.ransac).map_err(|e| e.in_channel(name))?;
    let metrics = LineMetrics {
        channel: name,
        centroid_distance: (px - tx).hypot(py - ty),
        angular_error: undirected_angle(&pred_fit.line, &truth_fit.line),
    };
    Ok((metrics, pred_fit.line, truth_fit.line))
}

/// Centroid distance and angular error of one predicted channel against the
/// noise-free rendering of its truth segment. Both masks are thresholded
/// and fitted identically.
pub fn line_metrics(
    pred: &ChannelRaster,
    truth_segment: [Point; 2],
    config: &EvalConfig,
) -> Result<LineMetrics> {
    evaluate_line(pred, truth_segment, config).map(|(m, ..)| m)
}

pub fn evaluate_case(pred_manifest: &Path, truth_file: &Path, config: &EvalConfig) -> Result<CaseReport> {
    let truth = Truth::read(truth_file)?;
    let heatmap = load_heatmap(pred_manifest)?;
    let case_id = pred_manifest
        .parent()
        .and_then(Path::file_name)
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(evaluate_heatmap(case_id, &heatmap, &truth, config))
}

/// [`evaluate_case`] on an in-memory prediction.
pub fn evaluate_heatmap(
    case_id: impl Into<String>,
    heatmap: &Heatmap,
    truth: &Truth,
    config: &EvalConfig,
) -> CaseReport {
    let mut lines = Vec::with_capacity(CENTERLINES.len());
    let mut fitted: Vec<(ChannelName, Line2D, Line2D)> = Vec::new();
    for channel in CENTERLINES {
        let outcome = (|| {
            let pred = heatmap
                .channel(channel)
                .ok_or(Error::MissingChannel(channel))?;
            let segment = truth
                .side(channel.side)
                .and_then(|t| t.segment(channel.structure))
                .ok_or_else(|| Error::MissingTruth(channel.to_string()))?;
            evaluate_line(pred, segment, config)
        })();
        match outcome {
            Ok((metrics, line, truth_line)) => {
                fitted.push((channel, line, truth_line));
                lines.push(LineReport {
                    channel,
                    metrics: Some(metrics),
                    failure: None,
                });
            }
            Err(e) => lines.push(LineReport {
                channel,
                metrics: None,
                failure: Some(e.to_string()),
            }),
        }
    }

    let find = |name: ChannelName| {
        fitted
            .iter()
            .find(|(c, ..)| *c == name)
            .map(|&(_, pred, truth)| (pred, truth))
    };
    let sides = [Side::Left, Side::Right]
        .into_iter()
        .map(|side| {
            let geometric = truth.side(side).map(|t| t.ccd);
            let pair = find(ChannelName::neck_centerline(side)).zip(find(ChannelName::shaft_centerline(side)));
            let predicted = pair.map(|((neck, _), (shaft, _))| ccd_angle(&neck, &shaft));
            let true_ccd = pair.map(|((_, neck), (_, shaft))| ccd_angle(&neck, &shaft));
            let failure = match (predicted, geometric) {
                (Some(_), Some(_)) => None,
                (None, _) => Some(format!("{side} centerline fit unavailable")),
                (_, None) => Some(format!("no {side} truth")),
            };
            SideReport {
                side,
                predicted_ccd: predicted,
                true_ccd,
                ccd_error: predicted.zip(true_ccd).map(|(p, t)| (p - t).abs()),
                geometric_ccd: geometric,
                geometric_ccd_error: predicted.zip(geometric).map(|(p, t)| (p - t).abs()),
                failure,
            }
        })
        .collect();
    CaseReport {
        case_id: case_id.into(),
        lines,
        sides,
    }
}

/// Mean over a sorted copy so the result does not depend on case order.
fn order_free_mean(mut values: Vec<f64>) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len() as f64;
    Some(values.into_iter().sum::<f64>() / n)
}

pub fn aggregate(reports: &[CaseReport]) -> AggregateReport {
    let lines = CENTERLINES
        .iter()
        .map(|&channel| {
            let metrics: Vec<LineMetrics> = reports
                .iter()
                .flat_map(|r| &r.lines)
                .filter(|l| l.channel == channel)
                .filter_map(|l| l.metrics)
                .collect();
            LineAggregate {
                channel,
                count: metrics.len(),
                mean_centroid_distance: order_free_mean(
                    metrics.iter().map(|m| m.centroid_distance).collect(),
                ),
                mean_angular_error: order_free_mean(metrics.iter().map(|m| m.angular_error).collect()),
            }
        })
        .collect();
    let ccd = [Side::Left, Side::Right]
        .into_iter()
        .map(|side| {
            let sides: Vec<&SideReport> = reports
                .iter()
                .flat_map(|r| &r.sides)
                .filter(|s| s.side == side)
                .collect();
            let errors: Vec<f64> = sides.iter().filter_map(|s| s.ccd_error).collect();
            SideAggregate {
                side,
                count: errors.len(),
                ccd_mae: order_free_mean(errors),
                geometric_ccd_mae: order_free_mean(sides.iter().filter_map(|s| s.geometric_ccd_error).collect()),
            }
        })
        .collect();
    AggregateReport {
        case_count: reports.len(),
        failure_count: reports.iter().filter(|r| r.failed()).count(),
        line_failures: reports
            .iter()
            .flat_map(|r| &r.lines)
            .filter(|l| l.failure.is_some())
            .count(),
        lines,
        ccd,
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_owned(), |v| format!("{v:.2}"))
}

fn row_label(channel: ChannelName) -> String {
    let part = match channel.structure {
        Structure::NeckCenterline => "neck",
        _ => "shaft",
    };
    format!("{} {part} centerline", channel.side)
}

/// Plain-text tables: one row per centerline, then one CCD MAE row per side.
pub fn render_text(aggregate: &AggregateReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<24}{:>36}{:>32}",
        "Femur line", "Mean Centroids Euclidean distance", "Mean Angular error(degrees)"
    );
    for line in &aggregate.lines {
        let _ = writeln!(
            out,
            "{:<24}{:>36}{:>32}",
            row_label(line.channel),
            fmt_opt(line.mean_centroid_distance),
            fmt_opt(line.mean_angular_error)
        );
    }
    out.push('\n');
    let _ = writeln!(
        out,
        "{:<24}{:>36}{:>32}",
        "Femur", "Mean Absolute Error (degrees)", "vs truth segments (degrees)"
    );
    for side in &aggregate.ccd {
        let _ = writeln!(
            out,
            "{:<24}{:>36}{:>32}",
            format!("{} Femur", side.side),
            fmt_opt(side.ccd_mae),
            fmt_opt(side.geometric_ccd_mae)
        );
    }
    out.push('\n');
    let _ = writeln!(
        out,
        "cases: {}  failed cases: {}  failed lines: {}",
        aggregate.case_count, aggregate.failure_count, aggregate.line_failures
    );
    out
}

/// Case directories under `truth_dir` that hold a `truth.json`, sorted.
fn case_ids(truth_dir: &Path) -> Result<Vec<String>> {
    let mut ids = Vec::new();
    for entry in fs::read_dir(truth_dir).map_err(|e| Error::io(truth_dir, e))? {
        let entry = entry.map_err(|e| Error::io(truth_dir, e))?;
        if entry.path().join("truth.json").is_file() {
            ids.push(entry.file_name().to_string_lossy().into_owned());
        }
    }
    ids.sort();
    Ok(ids)
}

/// Evaluates every case under `truth_dir` against the same-named case
/// directory under `pred_dir`. An unreadable prediction becomes a failed
/// case; an unreadable truth aborts.
pub fn evaluate_dataset(pred_dir: &Path, truth_dir: &Path, config: &EvalConfig) -> Result<EvalReport> {
    let ids = case_ids(truth_dir)?;
    let run = |id: &String| -> Result<CaseReport> {
        let truth_file = truth_dir.join(id).join("truth.json");
        // surface truth problems before looking at the prediction
        Truth::read(&truth_file)?;
        let pred_manifest: PathBuf = pred_dir.join(id).join("manifest.json");
        match evaluate_case(&pred_manifest, &truth_file, config) {
            Ok(mut report) => {
                report.case_id = id.clone();
                Ok(report)
            }
            Err(e) => Ok(CaseReport::unreadable(id.clone(), &e.to_string())),
        }
    };
    #[cfg(feature = "parallel")]
    let cases: Result<Vec<CaseReport>> = {
        use rayon::prelude::*;
        ids.par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let cases: Result<Vec<CaseReport>> = ids.iter().map(run).collect();
    let cases = cases?;
    let aggregate = aggregate(&cases);
    Ok(EvalReport {
        config: *config,
        cases,
        aggregate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn side_report(side: Side, pred: f64, truth: f64) -> SideReport {
        SideReport {
            side,
            predicted_ccd: Some(pred),
            true_ccd: Some(truth),
            ccd_error: Some((pred - truth).abs()),
            geometric_ccd: Some(truth),
            geometric_ccd_error: Some((pred - truth).abs()),
            failure: None,
        }
    }

    fn case(id: &str, left: (f64, f64), dist: f64, ang: f64) -> CaseReport {
        CaseReport {
            case_id: id.into(),
            lines: CENTERLINES
                .iter()
                .map(|&channel| LineReport {
                    channel,
                    metrics: Some(LineMetrics {
                        channel,
                        centroid_distance: dist,
                        angular_error: ang,
                    }),
                    failure: None,
                })
                .collect(),
            sides: vec![
                side_report(Side::Left, left.0, left.1),
                side_report(Side::Right, 120.0, 120.5),
            ],
        }
    }

    #[test]
    fn ccd_mae_by_hand() {
        let agg = aggregate(&[case("a", (130.0, 126.0), 1.0, 0.5), case("b", (120.0, 124.0), 2.0, 1.5)]);
        assert_eq!(agg.ccd[0].side, Side::Left);
        assert_eq!(agg.ccd[0].ccd_mae, Some(4.0));
        assert_eq!(agg.ccd[1].ccd_mae, Some(0.5));
        assert_eq!(agg.lines[0].mean_centroid_distance, Some(1.5));
        assert_eq!(agg.lines[3].mean_angular_error, Some(1.0));
    }

    #[test]
    fn single_report_aggregates_to_itself() {
        let agg = aggregate(&[case("a", (131.25, 126.0), 3.5, 0.25)]);
        assert_eq!(agg.ccd[0].ccd_mae, Some(5.25));
        assert!(agg.lines.iter().all(|l| l.mean_centroid_distance == Some(3.5)));
        assert!(agg.lines.iter().all(|l| l.mean_angular_error == Some(0.25)));
        assert_eq!((agg.case_count, agg.failure_count), (1, 0));
    }

    #[test]
    fn failed_cases_are_counted_not_averaged() {
        let mut reports: Vec<CaseReport> =
            (0..9).map(|i| case(&i.to_string(), (126.0, 125.0), 1.0, 1.0)).collect();
        reports.push(CaseReport::unreadable("bad", "missing manifest"));
        let agg = aggregate(&reports);
        assert_eq!(agg.case_count, 10);
        assert_eq!(agg.failure_count, 1);
        assert_eq!(agg.line_failures, 4);
        assert_eq!(agg.ccd[0].count, 9);
        assert_eq!(agg.ccd[0].ccd_mae, Some(1.0));
        assert!(agg.lines.iter().all(|l| l.count == 9));
    }

    #[test]
    fn empty_input_has_no_means() {
        let agg = aggregate(&[]);
        assert_eq!(agg.case_count, 0);
        assert!(agg.ccd.iter().all(|s| s.ccd_mae.is_none() && s.count == 0));
        assert!(agg.lines.iter().all(|l| l.mean_angular_error.is_none()));
        assert!(render_text(&agg).contains("n/a"));
    }

    #[test]
    fn aggregation_ignores_case_order() {
        let mut reports: Vec<CaseReport> = (0..17)
            .map(|i| {
                let f = i as f64;
                case(&i.to_string(), (120.0 + 0.37 * f, 121.3), 0.1 * f + 0.013, 0.7 / (f + 1.0))
            })
            .collect();
        let forward = aggregate(&reports);
        reports.reverse();
        reports.swap(3, 11);
        assert_eq!(aggregate(&reports), forward);
    }

    #[test]
    fn mae_is_label_symmetric() {
        let a = aggregate(&[case("a", (130.0, 126.0), 0.0, 0.0)]);
        let b = aggregate(&[case("a", (126.0, 130.0), 0.0, 0.0)]);
        assert_eq!(a.ccd, b.ccd);
    }

    #[test]
    fn text_report_has_table_rows() {
        let text = render_text(&aggregate(&[case("a", (130.0, 126.0), 1.0, 0.5)]));
        for label in [
            "Left shaft centerline",
            "Left neck centerline",
            "Right neck centerline",
            "Right shaft centerline",
            "Left Femur",
            "Right Femur",
        ] {
            assert_eq!(text.lines().filter(|l| l.starts_with(label)).count(), 1, "{label}");
        }
    }
}
