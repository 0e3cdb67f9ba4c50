//! Volumes of Schatten balls and Haar measures of Grassmann metric balls.
//!
//! Schatten-ball volumes are estimated by rejection from the enclosing
//! Frobenius ball and reported as the normalized root `vol(B_p^N)^{1/N²}`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{LabError, Result};
use crate::nets::stiefel::principal_cosines;
use crate::sampling::{enclosing_frobenius_radius, haar_stiefel_with, BallSampler, SamplingMode, StreamKey, MAX_REJECTION_DIM};
use crate::schatten::{BallSpec, Exponent, Mat};
use crate::stats::{loglog_fit, ols, LineFit};

/// Proposals per parallel batch; fixed so results do not depend on thread count.
pub const BATCH: u64 = 20_000;

/// Hits below which a Grassmann measure point is flagged.
pub const MIN_HITS: u64 = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VolumeMethod {
    Exact,
    Rejection,
}

/// Estimate of `vol(B)^{1/dim}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VolumeEstimate {
    pub n_dim: usize,
    pub value: f64,
    pub std_error: f64,
    pub n_samples: u64,
    pub accepted: u64,
    pub method: VolumeMethod,
}

/// `ln` of `π^{d/2} r^d / Γ(d/2 + 1)`.
pub fn ln_euclidean_ball_volume(dim: usize, radius: f64) -> f64 {
    let d = dim as f64;
    0.5 * d * std::f64::consts::PI.ln() + d * radius.ln() - ln_gamma(0.5 * d + 1.0)
}

/// Volume of the Euclidean ball of radius `radius` in `dim` dimensions.
pub fn euclidean_ball_volume(dim: usize, radius: f64) -> Result<f64> {
    if dim == 0 || !(radius > 0.0) {
        return Err(LabError::invalid("ball volume needs dim >= 1 and radius > 0"));
    }
    Ok(ln_euclidean_ball_volume(dim, radius).exp())
}

/// `vol(B_2^N)^{1/N²}` in closed form.
pub fn frobenius_ball_root(n_dim: usize) -> f64 {
    let d = n_dim * n_dim;
    (ln_euclidean_ball_volume(d, 1.0) / d as f64).exp()
}

/// Count hits in batches `0..batches`, batch `b` drawing from `stream.child(b)`.
fn batched_hits<F>(n_samples: u64, stream: StreamKey, work: F) -> Result<u64>
where
    F: Fn(u64, StreamKey) -> Result<u64> + Sync,
{
    let batches = n_samples.div_ceil(BATCH);
    let hits: Result<Vec<u64>> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let size = BATCH.min(n_samples - b * BATCH);
            work(size, stream.child(b))
        })
        .collect();
    Ok(hits?.into_iter().sum())
}

/// Monte Carlo estimate of `vol(B_p^N)^{1/N²}`; exact for `N = 1` and `p = 2`.
pub fn schatten_ball_volume_mc(spec: BallSpec, n_samples: u64, stream: StreamKey) -> Result<VolumeEstimate> {
    let n = spec.n_dim;
    if n == 1 {
        return Ok(VolumeEstimate { n_dim: 1, value: 2.0, std_error: 0.0, n_samples: 0, accepted: 0, method: VolumeMethod::Exact });
    }
    if spec.p == Exponent::TWO {
        let value = frobenius_ball_root(n);
        return Ok(VolumeEstimate { n_dim: n, value, std_error: 0.0, n_samples: 0, accepted: 0, method: VolumeMethod::Exact });
    }
    if n > MAX_REJECTION_DIM {
        return Err(LabError::invalid(format!("volume estimation is limited to N <= {MAX_REJECTION_DIM}, got {n}")));
    }
    if n_samples == 0 {
        return Err(LabError::invalid("n_samples must be positive"));
    }
    let sampler = BallSampler::new(spec, SamplingMode::Rejection)?;
    let accepted = batched_hits(n_samples, stream, |size, key| {
        let mut rng = key.rng();
        let mut hits = 0;
        for _ in 0..size {
            if sampler.propose(&mut rng)?.is_some() {
                hits += 1;
            }
        }
        Ok(hits)
    })?;
    if accepted == 0 {
        return Err(LabError::DegenerateEstimate(format!(
            "no accepted proposals out of {n_samples} for N={n}, p={}; increase n_samples",
            spec.p
        )));
    }
    let d = (n * n) as f64;
    let rate = accepted as f64 / n_samples as f64;
    let ln_vol = rate.ln() + ln_euclidean_ball_volume(n * n, enclosing_frobenius_radius(&spec));
    let value = (ln_vol / d).exp();
    let std_error = value * ((1.0 - rate) / (n_samples as f64 * rate)).sqrt() / d;
    Ok(VolumeEstimate { n_dim: n, value, std_error, n_samples, accepted, method: VolumeMethod::Rejection })
}

/// Slope of `log vol(B_p^N)^{1/N²}` against `log N`, with the per-size estimates.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VolumeFit {
    pub p: Exponent,
    pub fit: LineFit,
    /// `−(1/2 + 1/p)`.
    pub reference_slope: f64,
    pub estimates: Vec<VolumeEstimate>,
}

pub fn volume_scaling_fit(p: Exponent, n_dims: &[usize], n_samples: u64, stream: StreamKey) -> Result<VolumeFit> {
    if n_dims.len() < 2 {
        return Err(LabError::invalid("a scaling fit needs at least two sizes"));
    }
    if n_dims.iter().any(|n| *n < 2 || (p != Exponent::TWO && *n > MAX_REJECTION_DIM)) {
        return Err(LabError::invalid(format!("sizes must lie in 2..={MAX_REJECTION_DIM} (any size >= 2 for p = 2)")));
    }
    let estimates: Result<Vec<VolumeEstimate>> = n_dims
        .iter()
        .map(|n| schatten_ball_volume_mc(BallSpec::new(*n, p)?, n_samples, stream.child(*n as u64)))
        .collect();
    let estimates = estimates?;
    let xs: Vec<f64> = estimates.iter().map(|e| e.n_dim as f64).collect();
    let ys: Vec<f64> = estimates.iter().map(|e| e.value).collect();
    let fit = loglog_fit(&xs, &ys)?;
    Ok(VolumeFit { p, fit, reference_slope: -(0.5 + p.recip()), estimates })
}

/// One point of the measure curve `δ ↦ μ(B(F, δ))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurePoint {
    pub delta: f64,
    pub probability: f64,
    pub std_error: f64,
    pub hits: u64,
    /// Fewer than [`MIN_HITS`] hits; `std_error` uses the add-two-successes correction.
    pub widened_ci: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GrassmannMeasure {
    pub n_dim: usize,
    pub k: usize,
    pub q: Exponent,
    pub n_samples: u64,
    pub points: Vec<MeasurePoint>,
}

impl GrassmannMeasure {
    /// Log-log slope over points with at least one hit; estimates `k(N − k)`.
    pub fn exponent_fit(&self) -> Result<LineFit> {
        let pts: Vec<&MeasurePoint> = self.points.iter().filter(|p| p.hits > 0).collect();
        let xs: Vec<f64> = pts.iter().map(|p| p.delta.ln()).collect();
        let ys: Vec<f64> = pts.iter().map(|p| p.probability.ln()).collect();
        ols(&xs, &ys)
    }

    /// Probabilities never drop by more than `tol` combined standard errors as `δ` grows.
    pub fn is_monotone_within(&self, tol: f64) -> bool {
        let mut pts = self.points.clone();
        pts.sort_by(|a, b| a.delta.total_cmp(&b.delta));
        pts.windows(2).all(|w| {
            let se = (w[0].std_error.powi(2) + w[1].std_error.powi(2)).sqrt();
            w[1].probability >= w[0].probability - tol * se
        })
    }
}

fn projection_distance(cosines: &[f64], q: Exponent) -> f64 {
    let sines = cosines.iter().map(|c| (1.0 - c * c).max(0.0).sqrt());
    match q {
        Exponent::Infinity => sines.fold(0.0, f64::max),
        Exponent::Finite(qv) => (2.0 * sines.map(|s| s.powf(qv)).sum::<f64>()).powf(1.0 / qv),
    }
}

/// `P(‖P_E − P_F‖_{S_q} < δ)` for Haar `E`, with `F` spanned by the first `k` coordinates.
pub fn grassmann_ball_measure_mc(n_dim: usize, k: usize, q: Exponent, deltas: &[f64], n_samples: u64, stream: StreamKey) -> Result<GrassmannMeasure> {
    grassmann_ball_measure_mc_at(None, n_dim, k, q, deltas, n_samples, stream)
}

/// As [`grassmann_ball_measure_mc`] around the column space of `reference` (orthonormal `N×k`).
pub fn grassmann_ball_measure_mc_at(
    reference: Option<&Mat>,
    n_dim: usize,
    k: usize,
    q: Exponent,
    deltas: &[f64],
    n_samples: u64,
    stream: StreamKey,
) -> Result<GrassmannMeasure> {
    if k == 0 || 2 * k > n_dim {
        return Err(LabError::invalid(format!("Grassmann measure needs 1 <= k <= N/2, got k={k}, N={n_dim}")));
    }
    if q < Exponent::ONE {
        return Err(LabError::invalid("Grassmann measure needs q >= 1"));
    }
    let cap = (k as f64).powf(q.recip());
    if deltas.is_empty() || deltas.iter().any(|d| !(*d > 0.0 && *d < cap)) {
        return Err(LabError::invalid(format!("deltas must lie in (0, {cap})")));
    }
    if n_samples == 0 {
        return Err(LabError::invalid("n_samples must be positive"));
    }
    if let Some(r) = reference {
        if r.nrows() != n_dim || r.ncols() != k {
            return Err(LabError::invalid("reference frame has the wrong shape"));
        }
    }
    let batches = n_samples.div_ceil(BATCH);
    let per_batch: Result<Vec<Vec<u64>>> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let size = BATCH.min(n_samples - b * BATCH);
            let mut rng = stream.child(b).rng();
            let mut hits = vec![0u64; deltas.len()];
            for _ in 0..size {
                let u = haar_stiefel_with(&mut rng, n_dim, k)?.u;
                let cos = match reference {
                    None => principal_cosines(&Mat::identity(n_dim, k), &u),
                    Some(f) => principal_cosines(f, &u),
                };
                let d = projection_distance(&cos, q);
                for (h, delta) in hits.iter_mut().zip(deltas) {
                    if d < *delta {
                        *h += 1;
                    }
                }
            }
            Ok(hits)
        })
        .collect();
    let mut totals = vec![0u64; deltas.len()];
    for h in per_batch? {
        totals.iter_mut().zip(h).for_each(|(t, x)| *t += x);
    }
    let nf = n_samples as f64;
    let points = deltas
        .iter()
        .zip(&totals)
        .map(|(delta, hits)| {
            let probability = *hits as f64 / nf;
            let widened_ci = *hits < MIN_HITS;
            let ps = if widened_ci { (*hits as f64 + 2.0) / (nf + 4.0) } else { probability };
            MeasurePoint { delta: *delta, probability, std_error: (ps * (1.0 - ps) / nf).sqrt(), hits: *hits, widened_ci }
        })
        .collect();
    Ok(GrassmannMeasure { n_dim, k, q, n_samples, points })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn euclidean_examples() {
        assert!((euclidean_ball_volume(1, 1.0).unwrap() - 2.0).abs() < 1e-14);
        assert!((euclidean_ball_volume(2, 1.0).unwrap() - std::f64::consts::PI).abs() < 1e-13);
        assert!((euclidean_ball_volume(4, 1.0).unwrap() - 4.934_802_200_544_679).abs() < 1e-12);
        assert!(euclidean_ball_volume(36, 1.0).unwrap().is_finite());
        assert!(euclidean_ball_volume(0, 1.0).is_err());
    }

    #[test]
    fn exact_paths() {
        let one = schatten_ball_volume_mc(BallSpec::new(1, Exponent::of(0.5)).unwrap(), 10, StreamKey::new(0, 0)).unwrap();
        assert_eq!((one.value, one.method), (2.0, VolumeMethod::Exact));
        let two = schatten_ball_volume_mc(BallSpec::new(2, Exponent::TWO).unwrap(), 10, StreamKey::new(0, 0)).unwrap();
        assert!((two.value - (std::f64::consts::PI.powi(2) / 2.0).powf(0.25)).abs() < 1e-12);
        assert!((two.value - 1.49045).abs() < 1e-5);
        assert_eq!(two.std_error, 0.0);
    }

    #[test]
    fn nuclear_ball_of_two_by_two() {
        // vol(B_1^2) = π²/4 exactly
        let est = schatten_ball_volume_mc(BallSpec::new(2, Exponent::ONE).unwrap(), 400_000, StreamKey::new(1, 0)).unwrap();
        let exact = (std::f64::consts::PI.powi(2) / 4.0).powf(0.25);
        assert!((est.value - exact).abs() < 4.0 * est.std_error, "{} vs {exact} ± {}", est.value, est.std_error);
    }

    #[test]
    fn deterministic_and_independent_of_threads() {
        let spec = BallSpec::new(2, Exponent::INF).unwrap();
        let a = schatten_ball_volume_mc(spec, 50_000, StreamKey::new(3, 0)).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| schatten_ball_volume_mc(spec, 50_000, StreamKey::new(3, 0)).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn zero_hits_is_degenerate() {
        let spec = BallSpec::new(6, Exponent::of(0.3)).unwrap();
        assert!(matches!(schatten_ball_volume_mc(spec, 100, StreamKey::new(0, 0)), Err(LabError::DegenerateEstimate(_))));
    }

    #[test]
    fn circle_measure_matches_arcsine_law() {
        let m = grassmann_ball_measure_mc(2, 1, Exponent::INF, &[0.25, 0.5], 100_000, StreamKey::new(4, 0)).unwrap();
        for pt in &m.points {
            let exact = 2.0 / std::f64::consts::PI * pt.delta.asin();
            assert!((pt.probability - exact).abs() < 3.0 * pt.std_error);
        }
        assert!(m.is_monotone_within(2.0));
    }

    #[test]
    fn measure_argument_checks() {
        assert!(grassmann_ball_measure_mc(3, 2, Exponent::INF, &[0.5], 10, StreamKey::new(0, 0)).is_err());
        assert!(grassmann_ball_measure_mc(4, 1, Exponent::INF, &[1.0], 10, StreamKey::new(0, 0)).is_err());
        assert!(grassmann_ball_measure_mc(4, 1, Exponent::of(0.5), &[0.5], 10, StreamKey::new(0, 0)).is_err());
    }
}
