//! Greedy maximal separated sets.

use serde::{Deserialize, Serialize};

use super::{MetricSpec, NetExplicit};
use crate::error::{LabError, Result};
use crate::schatten::{schatten_norm, Mat};

/// Stopping rules for greedy packing.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GreedyConfig {
    /// Points are kept only if farther than `delta` from every kept point.
    pub delta: f64,
    /// Consecutive rejections after which the set is declared saturated.
    pub budget: usize,
    /// Global proposal cap.
    pub max_proposals: u64,
    /// Cap on retained points.
    pub max_points: usize,
}

impl GreedyConfig {
    pub fn new(delta: f64) -> Self {
        Self { delta, budget: 2000, max_proposals: 2_000_000, max_points: 200_000 }
    }

    pub fn budget(mut self, budget: usize) -> Self {
        self.budget = budget;
        self
    }

    pub fn max_proposals(mut self, cap: u64) -> Self {
        self.max_proposals = cap;
        self
    }

    pub fn max_points(mut self, cap: usize) -> Self {
        self.max_points = cap;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0) || !self.delta.is_finite() {
            return Err(LabError::invalid(format!("greedy delta must be positive, got {}", self.delta)));
        }
        if self.budget == 0 || self.max_proposals == 0 || self.max_points == 0 {
            return Err(LabError::invalid("greedy budgets must be at least 1"));
        }
        Ok(())
    }
}

/// What a greedy run did.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GreedyStats {
    pub proposals: u64,
    pub accepted: u64,
    /// Length of the rejection streak when the run stopped.
    pub final_streak: usize,
}

/// Greedy packing over arbitrary items with a caller-supplied distance.
///
/// `seeds` are kept first and must themselves be separated. Returns the kept
/// items, run statistics and whether the consecutive-rejection rule fired.
pub fn greedy_core<T, S, D>(seeds: Vec<T>, mut sampler: S, dist: D, config: &GreedyConfig) -> Result<(Vec<T>, GreedyStats, bool)>
where
    S: FnMut() -> Result<T>,
    D: Fn(&T, &T) -> f64,
{
    config.validate()?;
    let delta = config.delta;
    let mut kept: Vec<T> = Vec::new();
    for s in seeds {
        if kept.iter().any(|k| dist(k, &s) <= delta) {
            return Err(LabError::invalid("greedy seed points are not delta-separated"));
        }
        kept.push(s);
    }
    let mut stats = GreedyStats::default();
    let mut streak = 0usize;
    let mut saturated = false;
    while stats.proposals < config.max_proposals && kept.len() < config.max_points {
        let x = sampler()?;
        stats.proposals += 1;
        // newest points first: recent acceptances sit near recent proposals
        if kept.iter().rev().all(|k| dist(k, &x) > delta) {
            kept.push(x);
            stats.accepted += 1;
            streak = 0;
        } else {
            streak += 1;
            if streak >= config.budget {
                saturated = true;
                break;
            }
        }
    }
    stats.final_streak = streak;
    if kept.is_empty() {
        return Err(LabError::EmptySupport);
    }
    if !saturated {
        log::warn!(
            "greedy packing stopped unsaturated: {} points after {} proposals (streak {})",
            kept.len(),
            stats.proposals,
            streak
        );
    }
    Ok((kept, stats, saturated))
}

/// Greedy `delta`-separated set of matrices drawn from `sampler`.
pub fn greedy_separated_set<S>(sampler: S, metric: MetricSpec, config: &GreedyConfig) -> Result<NetExplicit>
where
    S: FnMut() -> Result<Mat>,
{
    greedy_separated_set_seeded(Vec::new(), sampler, metric, config)
}

/// As [`greedy_separated_set`] with points that are kept unconditionally first.
pub fn greedy_separated_set_seeded<S>(seeds: Vec<Mat>, sampler: S, metric: MetricSpec, config: &GreedyConfig) -> Result<NetExplicit>
where
    S: FnMut() -> Result<Mat>,
{
    let delta = config.delta;
    // only the side of delta matters to the greedy rule, so Frobenius bounds settle most pairs;
    // distance failures only come from non-finite samples and count as "too close"
    let dist = |a: &Mat, b: &Mat| match metric {
        MetricSpec::Schatten { q } => {
            let d = a - b;
            let f = d.norm();
            let r = d.nrows().min(d.ncols()) as f64;
            let c = r.powf(q.recip() - 0.5);
            let (lo, hi) = (f * c.min(1.0), f * c.max(1.0));
            if lo > delta {
                lo
            } else if hi <= delta {
                hi
            } else {
                schatten_norm(&d, q).unwrap_or(0.0)
            }
        }
        _ => metric.distance(a, b).unwrap_or(0.0),
    };
    let (points, stats, saturated) = greedy_core(seeds, sampler, dist, config)?;
    Ok(NetExplicit { points, radius: config.delta, separation: config.delta, metric, saturated, stats })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schatten::Exponent;

    fn scalar(x: f64) -> Mat {
        Mat::from_element(1, 1, x)
    }

    #[test]
    fn interval_sweep_gives_four_points() {
        let mut i = 0u64;
        let sampler = || {
            let x = (i % 1001) as f64 / 1000.0;
            i += 1;
            Ok(scalar(x))
        };
        let net = greedy_separated_set(sampler, MetricSpec::Operator, &GreedyConfig::new(0.3).budget(1500)).unwrap();
        assert_eq!(net.len(), 4);
        assert!(net.saturated);
        let mut pts: Vec<f64> = net.points.iter().map(|p| p[(0, 0)]).collect();
        pts.sort_by(f64::total_cmp);
        assert_eq!(pts[0], 0.0);
        for w in pts.windows(2) {
            assert!(w[1] - w[0] > 0.3 && w[1] - w[0] < 0.302, "{pts:?}");
        }
        for t in 0..=1000 {
            let x = t as f64 / 1000.0;
            assert!(pts.iter().any(|p| (p - x).abs() <= 0.3));
        }
        net.assert_separated().unwrap();
    }

    #[test]
    fn two_point_space() {
        let mut flip = false;
        let sampler = || {
            flip = !flip;
            Ok(scalar(if flip { 1.0 } else { -1.0 }))
        };
        let net = greedy_separated_set(sampler, MetricSpec::Operator, &GreedyConfig::new(0.5)).unwrap();
        assert_eq!(net.len(), 2);
        assert!(net.saturated);
    }

    #[test]
    fn empty_support_and_bad_config() {
        let failing = || Err::<Mat, _>(LabError::EmptySupport);
        assert!(greedy_separated_set(failing, MetricSpec::Operator, &GreedyConfig::new(0.5)).is_err());
        let sampler = || Ok(scalar(0.0));
        assert!(matches!(
            greedy_separated_set(sampler, MetricSpec::Operator, &GreedyConfig::new(0.0)),
            Err(LabError::InvalidInput(_))
        ));
    }

    #[test]
    fn proposal_cap_marks_unsaturated() {
        let mut i = 0;
        let sampler = || {
            i += 1;
            Ok(scalar(i as f64))
        };
        let cfg = GreedyConfig::new(0.5).max_proposals(10);
        let net = greedy_separated_set(sampler, MetricSpec::Schatten { q: Exponent::TWO }, &cfg).unwrap();
        assert!(!net.saturated);
        assert_eq!(net.len(), 10);
    }

    #[test]
    fn seeds_are_kept_and_checked() {
        let sampler = || Ok(scalar(0.1));
        let net = greedy_separated_set_seeded(vec![scalar(0.0)], sampler, MetricSpec::Operator, &GreedyConfig::new(0.5).budget(5)).unwrap();
        assert_eq!(net.len(), 1);
        assert!(greedy_separated_set_seeded(vec![scalar(0.0), scalar(0.2)], || Ok(scalar(0.0)), MetricSpec::Operator, &GreedyConfig::new(0.5)).is_err());
    }

    #[test]
    fn frobenius_shortcut_matches_exact_distances() {
        use crate::sampling::{gaussian_with, StreamKey};
        for (i, q) in [Exponent::of(0.5), Exponent::ONE, Exponent::of(3.0), Exponent::INF].into_iter().enumerate() {
            let metric = MetricSpec::Schatten { q };
            let cfg = GreedyConfig::new(2.0).budget(50).max_points(60);
            let mut rng = StreamKey::new(9, i as u64).rng();
            let fast = greedy_separated_set(|| Ok(gaussian_with(&mut rng, 3, 3)), metric, &cfg).unwrap();
            let mut rng = StreamKey::new(9, i as u64).rng();
            let exact = greedy_core(Vec::new(), || Ok(gaussian_with(&mut rng, 3, 3)), |a: &Mat, b: &Mat| metric.distance(a, b).unwrap(), &cfg).unwrap();
            assert_eq!(fast.points, exact.0);
            assert_eq!(fast.stats, exact.1);
        }
    }
}
