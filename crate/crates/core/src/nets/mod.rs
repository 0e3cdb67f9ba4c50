//! Covering nets and packings.
//!
//! Explicit nets ([`NetExplicit`]) hold their points. The low-rank and product
//! nets used for Schatten balls are factorized: they store component nets and
//! decode a matrix factor by factor, which is also how their covering radius is
//! proven.

pub mod dyadic;
pub mod greedy;
pub mod io;
pub mod low_rank;
pub mod lq_grid;
pub mod product;
pub mod stiefel;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::schatten::{lp_norm, schatten_norm, Exponent, Mat};

pub use dyadic::{dyadic_decompose, DyadicDecomposition};
pub use greedy::{greedy_separated_set, GreedyConfig, GreedyStats};
pub use low_rank::{low_rank_ball_net, LowRankBallSpec, LowRankNet, StiefelBackend};
pub use lq_grid::{lq_ball_net, GridNet};
pub use product::{schatten_net_build, ProductNet, ProductNetParams, Quantized};
pub use stiefel::{stiefel_net, StiefelMode, StiefelNet};

/// Distance used by a net.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MetricSpec {
    /// `‖X − Y‖_{S_q}`.
    Schatten { q: Exponent },
    /// Largest singular value of `X − Y`; also used for rectangular frames.
    Operator,
    /// `ℓ_q` distance of the entries, for vectors stored as columns.
    EuclideanVector { q: Exponent },
}

impl MetricSpec {
    pub fn distance(&self, a: &Mat, b: &Mat) -> Result<f64> {
        let d = a - b;
        match self {
            MetricSpec::Schatten { q } => schatten_norm(&d, *q),
            MetricSpec::Operator => Ok(stiefel::op_norm_fast(&d)),
            MetricSpec::EuclideanVector { q } => Ok(lp_norm(d.as_slice(), *q)),
        }
    }

    /// Exponent `r` of the triangle inequality `d(x,z)^r ≤ d(x,y)^r + d(y,z)^r`.
    pub fn triangle_exponent(&self) -> f64 {
        match self {
            MetricSpec::Schatten { q } | MetricSpec::EuclideanVector { q } => q.bar(),
            MetricSpec::Operator => 1.0,
        }
    }
}

/// A finite point set with its covering radius.
///
/// `separation` is a lower bound on pairwise distances, checked when the net
/// is built. Greedy packings have `separation == radius` with every pair
/// strictly farther apart than that.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NetExplicit {
    pub points: Vec<Mat>,
    pub radius: f64,
    pub separation: f64,
    pub metric: MetricSpec,
    pub saturated: bool,
    #[serde(default)]
    pub stats: GreedyStats,
}

impl NetExplicit {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn log2_cardinality(&self) -> f64 {
        (self.points.len() as f64).log2()
    }

    /// Nearest point by linear scan: `(index, distance)`.
    pub fn nearest(&self, x: &Mat) -> Result<(usize, f64)> {
        let mut best = (usize::MAX, f64::INFINITY);
        for (i, y) in self.points.iter().enumerate() {
            let d = self.metric.distance(x, y)?;
            if d < best.1 {
                best = (i, d);
            }
        }
        if best.0 == usize::MAX {
            return Err(LabError::EmptySupport);
        }
        Ok(best)
    }

    /// Smallest pairwise distance, `∞` for fewer than two points.
    pub fn min_pairwise_distance(&self) -> Result<f64> {
        let n = self.points.len();
        let per_row: Result<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut m = f64::INFINITY;
                for j in (i + 1)..n {
                    m = m.min(self.metric.distance(&self.points[i], &self.points[j])?);
                }
                Ok(m)
            })
            .collect();
        Ok(per_row?.into_iter().fold(f64::INFINITY, f64::min))
    }

    /// Exact check that every pair is strictly farther apart than `separation`.
    pub fn assert_separated(&self) -> Result<()> {
        let m = self.min_pairwise_distance()?;
        if m > self.separation || self.points.len() < 2 {
            Ok(())
        } else {
            Err(LabError::NumericFailure {
                what: format!("net separation {m} does not exceed {}", self.separation),
                rows: self.points.first().map_or(0, |p| p.nrows()),
                cols: self.points.first().map_or(0, |p| p.ncols()),
                frobenius: m,
                max_abs: self.separation,
            })
        }
    }
}

/// Outcome of probing a net with fresh samples.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CoverageAudit {
    pub probes: usize,
    pub violations: usize,
    pub max_distance: f64,
    pub mean_distance: f64,
}

impl CoverageAudit {
    pub fn violation_rate(&self) -> f64 {
        if self.probes == 0 {
            0.0
        } else {
            self.violations as f64 / self.probes as f64
        }
    }

    pub fn from_distances(distances: &[f64], radius: f64) -> Self {
        let probes = distances.len();
        let violations = distances.iter().filter(|d| **d > radius).count();
        let max_distance = distances.iter().copied().fold(0.0, f64::max);
        let mean_distance = if probes == 0 { 0.0 } else { distances.iter().sum::<f64>() / probes as f64 };
        Self { probes, violations, max_distance, mean_distance }
    }
}

/// Nearest-point distances of `probes` to an explicit net, against `radius`.
pub fn audit_explicit(net: &NetExplicit, probes: &[Mat], radius: f64) -> Result<CoverageAudit> {
    let d: Result<Vec<f64>> = probes.par_iter().map(|x| net.nearest(x).map(|r| r.1)).collect();
    Ok(CoverageAudit::from_distances(&d?, radius))
}
