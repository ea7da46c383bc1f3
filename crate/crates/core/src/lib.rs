//! Femur CCD angle measurement from line-probability heatmaps.
//!
//! The pipeline thresholds each centerline channel, fits a line with seeded
//! RANSAC plus Huber refinement, and reports the angle between the neck and
//! shaft centerlines. Synthetic studies with known geometry, evaluation
//! metrics and the voice-command state machine used by the measurement
//! service live here too.

pub mod error;
pub mod eval;
pub mod fit;
pub mod geometry;
pub mod heatmap;
pub mod line;
pub mod manifest;
pub mod raster_io;
pub mod synth;
pub mod voice;

pub use error::{Error, Result};
pub use fit::{huber_refine, least_squares_line, ransac_fit, FitResult, RansacConfig};
pub use geometry::{
    ccd_angle, endpoints_for_display, line_from_endpoints, measure_femur, undirected_angle,
    FemurMeasurement,
};
pub use heatmap::{
    centroid, heatmap_mse, threshold_points, ChannelName, ChannelRaster, CloudPoint, Heatmap,
    PointCloud, Side, Structure, DEFAULT_CUTOFF,
};
pub use line::{residual, Line2D, Point};
pub use manifest::{load_heatmap, load_study, save_heatmap, Manifest, Study};
