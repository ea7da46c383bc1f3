//! Robust single-line fitting: orthogonal least squares, seeded RANSAC
//! consensus and Huber-loss refinement by iteratively reweighted least
//! squares.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heatmap::PointCloud;
use crate::line::{residual, Line2D};

const HUBER_MAX_ITERATIONS: usize = 100;
const HUBER_TOLERANCE: f64 = 1e-9;
const MAD_TO_SIGMA: f64 = 1.4826;
const MIN_SCALE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RansacConfig {
    /// Maximum orthogonal distance, in pixels, for a point to count as an inlier.
    pub residual_threshold: f64,
    pub max_iterations: usize,
    pub seed: u64,
    pub min_inliers: usize,
    /// Huber transition point, in units of the robust residual scale
    /// (1.4826 x median absolute residual) re-estimated every iteration.
    pub huber_delta: f64,
    /// Apply Huber refinement after the consensus fit.
    pub refine: bool,
}

impl Default for RansacConfig {
    fn default() -> Self {
        Self {
            residual_threshold: 2.0,
            max_iterations: 200,
            seed: 0,
            min_inliers: 10,
            huber_delta: 1.35,
            refine: true,
        }
    }
}

impl RansacConfig {
    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.residual_threshold.is_nan() || self.residual_threshold <= 0.0 {
            return Err(Error::InvalidConfig("residual_threshold must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig("max_iterations must be at least 1"));
        }
        if self.min_inliers < 2 {
            return Err(Error::InvalidConfig("min_inliers must be at least 2"));
        }
        if self.huber_delta.is_nan() || self.huber_delta <= 0.0 {
            return Err(Error::InvalidConfig("huber_delta must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub line: Line2D,
    pub inlier_flags: Vec<bool>,
    pub inlier_count: usize,
    /// Iterations that produced a candidate line (degenerate samples excluded).
    pub iterations_run: usize,
}

/// Weighted orthogonal regression. Returns `None` when the weighted scatter
/// collapses to a single point.
fn weighted_principal_line<'a>(
    points: impl Iterator<Item = ((f64, f64), f64)> + Clone + 'a,
) -> Option<Line2D> {
    let (mut sw, mut sx, mut sy) = (0.0, 0.0, 0.0);
    for ((x, y), w) in points.clone() {
        sw += w;
        sx += w * x;
        sy += w * y;
    }
    if sw.is_nan() || sw <= 0.0 {
        return None;
    }
    let (mx, my) = (sx / sw, sy / sw);
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for ((x, y), w) in points {
        let (dx, dy) = (x - mx, y - my);
        sxx += w * dx * dx;
        sxy += w * dx * dy;
        syy += w * dy * dy;
    }
    if sxx == 0.0 && syy == 0.0 {
        return None;
    }
    // Largest eigenvalue of the 2x2 scatter matrix and its eigenvector; of
    // the two algebraically equivalent eigenvector forms, take the better
    // conditioned one.
    let half_diff = 0.5 * (sxx - syy);
    let lambda = 0.5 * (sxx + syy) + half_diff.hypot(sxy);
    let v1 = (sxy, lambda - sxx);
    let v2 = (lambda - syy, sxy);
    let dir = if v1.0.hypot(v1.1) >= v2.0.hypot(v2.1) { v1 } else { v2 };
    let dir = if dir == (0.0, 0.0) { (1.0, 0.0) } else { dir };
    Line2D::new((mx, my), dir)
}

/// Total least squares line: anchor at the mean, direction along the
/// principal axis. Point weights are ignored.
pub fn least_squares_line(points: &PointCloud) -> Result<Line2D> {
    let distinct = match points.points.first() {
        None => 0,
        Some(first) if points.iter().all(|p| p.xy() == first.xy()) => 1,
        Some(_) => 2,
    };
    if distinct < 2 {
        return Err(Error::TooFewPoints { distinct });
    }
    weighted_principal_line(points.iter().map(|p| (p.xy(), 1.0)))
        .ok_or(Error::TooFewPoints { distinct: 1 })
}

/// Normal-consistent median absolute residual, floored so exactly collinear
/// data keeps a usable threshold.
fn robust_scale(residuals: &[f64]) -> f64 {
    let mut sorted = residuals.to_vec();
    let mid = sorted.len() / 2;
    let (_, median, _) = sorted.select_nth_unstable_by(mid, f64::total_cmp);
    (MAD_TO_SIGMA * *median).max(MIN_SCALE)
}

fn huber_weight(r: f64, delta: f64) -> f64 {
    if r <= delta {
        1.0
    } else {
        delta / r
    }
}

fn angle_between(a: &Line2D, b: &Line2D) -> f64 {
    let (ax, ay) = a.direction();
    let (bx, by) = b.direction();
    (ax * by - ay * bx).atan2(ax * bx + ay * by).abs()
}

/// Minimizes the summed Huber loss of orthogonal residuals over the flagged
/// points by IRLS, starting from `initial`.
///
/// Residuals below `delta` times the current robust scale are weighted
/// quadratically, larger ones linearly. Stops once successive lines differ
/// by less than 1e-9 rad and 1e-9 px, or after 100 iterations.
pub fn huber_refine(
    points: &PointCloud,
    inlier_flags: &[bool],
    initial: Line2D,
    delta: f64,
) -> Result<Line2D> {
    let inliers: Vec<(f64, f64)> = points
        .iter()
        .zip(inlier_flags)
        .filter(|(_, &f)| f)
        .map(|(p, _)| p.xy())
        .collect();
    if inliers.len() < 2 {
        return Err(Error::TooFewPoints {
            distinct: inliers.len(),
        });
    }
    let mut line = initial;
    for _ in 0..HUBER_MAX_ITERATIONS {
        let residuals: Vec<f64> = inliers.iter().map(|&p| residual(&line, p)).collect();
        let threshold = delta * robust_scale(&residuals);
        let weights: Vec<f64> = residuals
            .iter()
            .map(|&r| huber_weight(r, threshold))
            .collect();
        let Some(next) =
            weighted_principal_line(inliers.iter().copied().zip(weights.iter().copied()))
        else {
            return Err(Error::TooFewPoints { distinct: 1 });
        };
        let (ax, ay) = line.anchor();
        let (bx, by) = next.anchor();
        let converged = angle_between(&line, &next) < HUBER_TOLERANCE
            && (ax - bx).hypot(ay - by) < HUBER_TOLERANCE;
        line = next;
        if converged {
            break;
        }
    }
    Ok(line)
}

fn flag_inliers(points: &PointCloud, line: &Line2D, threshold: f64) -> (Vec<bool>, usize) {
    let flags: Vec<bool> = points
        .iter()
        .map(|p| residual(line, p.xy()) <= threshold)
        .collect();
    let count = flags.iter().filter(|&&f| f).count();
    (flags, count)
}

/// Seeded RANSAC consensus followed by a least-squares fit on the winning
/// inliers and (optionally) Huber refinement. Deterministic for a given
/// point order and seed.
pub fn ransac_fit(points: &PointCloud, config: &RansacConfig) -> Result<FitResult> {
    config.validate()?;
    let n = points.len();
    if n < 2 {
        return Err(Error::TooFewPoints { distinct: n });
    }
    if n < config.min_inliers {
        return Err(Error::FitFailed {
            best: n,
            required: config.min_inliers,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut best: Option<(Line2D, usize)> = None;
    let mut iterations_run = 0;
    for _ in 0..config.max_iterations {
        let i = rng.random_range(0..n);
        let mut j = rng.random_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        let Ok(candidate) = Line2D::through(points.points[i].xy(), points.points[j].xy()) else {
            continue;
        };
        iterations_run += 1;
        let count = points
            .iter()
            .filter(|p| residual(&candidate, p.xy()) <= config.residual_threshold)
            .count();
        if best.is_none_or(|(_, c)| count > c) {
            best = Some((candidate, count));
        }
    }
    let Some((candidate, best_count)) = best else {
        return Err(Error::FitFailed {
            best: 0,
            required: config.min_inliers,
        });
    };
    if best_count < config.min_inliers {
        return Err(Error::FitFailed {
            best: best_count,
            required: config.min_inliers,
        });
    }
    let (consensus, _) = flag_inliers(points, &candidate, config.residual_threshold);
    let mut line = least_squares_line(&points.select(&consensus))?;
    if config.refine {
        line = huber_refine(points, &consensus, line, config.huber_delta)?;
    }
    let (inlier_flags, inlier_count) = flag_inliers(points, &line, config.residual_threshold);
    Ok(FitResult {
        line,
        inlier_flags,
        inlier_count,
        iterations_run,
    })
}
