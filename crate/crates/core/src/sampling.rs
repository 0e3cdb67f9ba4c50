//! Seeded randomness: Gaussian matrices, Haar frames and points of Schatten balls.
//!
//! Every draw is a pure function of a [`StreamKey`]. Parallel work derives child
//! keys instead of sharing a generator.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::schatten::{lp_norm, schatten_norm, BallSpec, Exponent, Mat};

/// Proposal cap for rejection sampling.
pub const DEFAULT_REJECTION_BUDGET: u64 = 10_000_000;

/// Largest side length for which rejection from the Frobenius ball is attempted.
pub const MAX_REJECTION_DIM: usize = 6;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Address of one independent random stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StreamKey {
    pub master_seed: u64,
    pub stream_index: u64,
}

impl StreamKey {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        Self { master_seed, stream_index }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_index);
        rng
    }

    /// Key of sub-task `label`, e.g. trial `t` of this experiment.
    pub fn child(&self, label: u64) -> Self {
        let mixed = splitmix64(self.stream_index ^ splitmix64(label.wrapping_add(0x51_7cc1_b727_220a)));
        Self { master_seed: self.master_seed, stream_index: mixed }
    }

    /// Key of a named sub-experiment.
    pub fn named(&self, name: &str) -> Self {
        // FNV-1a
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in name.bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        self.child(h)
    }
}

/// An `N×K` matrix with orthonormal columns.
#[derive(Clone, Debug)]
pub struct StiefelPoint {
    pub u: Mat,
}

impl StiefelPoint {
    /// Manifold dimension `K(N − (K+1)/2)`.
    pub fn manifold_dim(n_dim: usize, k: usize) -> f64 {
        k as f64 * (n_dim as f64 - (k as f64 + 1.0) / 2.0)
    }

    pub fn projection(&self) -> Mat {
        &self.u * self.u.transpose()
    }
}

/// An orthogonal projection of rank `k`.
#[derive(Clone, Debug)]
pub struct GrassmannPoint {
    pub projection: Mat,
    pub rank: usize,
}

pub fn gaussian_with<R: Rng + ?Sized>(rng: &mut R, n_rows: usize, n_cols: usize) -> Mat {
    Mat::from_fn(n_rows, n_cols, |_, _| StandardNormal.sample(rng))
}

/// Matrix of i.i.d. standard normal entries.
pub fn gaussian_matrix(n_rows: usize, n_cols: usize, stream: StreamKey) -> Result<Mat> {
    if n_rows == 0 || n_cols == 0 {
        return Err(LabError::invalid("matrix dimensions must be at least 1"));
    }
    Ok(gaussian_with(&mut stream.rng(), n_rows, n_cols))
}

pub fn haar_stiefel_with<R: Rng + ?Sized>(rng: &mut R, n_dim: usize, k: usize) -> Result<StiefelPoint> {
    if k == 0 || k > n_dim {
        return Err(LabError::invalid(format!("Stiefel frame needs 1 <= k <= N, got k={k}, N={n_dim}")));
    }
    let qr = gaussian_with(rng, n_dim, k).qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..k {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    Ok(StiefelPoint { u: q })
}

/// Haar-distributed point of the Stiefel manifold (QR of a Gaussian matrix, `diag(R) > 0`).
pub fn haar_stiefel(n_dim: usize, k: usize, stream: StreamKey) -> Result<StiefelPoint> {
    haar_stiefel_with(&mut stream.rng(), n_dim, k)
}

pub fn haar_orthogonal_with<R: Rng + ?Sized>(rng: &mut R, n_dim: usize) -> Result<Mat> {
    Ok(haar_stiefel_with(rng, n_dim, n_dim)?.u)
}

pub fn haar_grassmann_with<R: Rng + ?Sized>(rng: &mut R, n_dim: usize, k: usize) -> Result<GrassmannPoint> {
    let frame = haar_stiefel_with(rng, n_dim, k)?;
    let mut projection = frame.projection();
    // exact symmetry
    let sym = (&projection + projection.transpose()) * 0.5;
    projection = sym;
    Ok(GrassmannPoint { projection, rank: k })
}

/// Haar-distributed `k`-dimensional subspace, as its orthogonal projection.
pub fn haar_grassmann(n_dim: usize, k: usize, stream: StreamKey) -> Result<GrassmannPoint> {
    haar_grassmann_with(&mut stream.rng(), n_dim, k)
}

/// How points of a Schatten ball are drawn.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    /// Uniform, by rejection from the enclosing Frobenius ball.
    Rejection,
    /// Haar singular vectors, spectrum on the `ℓ_p` sphere times a random radius.
    Spectral,
    /// As `Spectral` with a uniformly chosen rank.
    LowRank,
}

/// Running proposal/acceptance counts of a rejection sampler.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RejectionStats {
    pub proposals: u64,
    pub accepted: u64,
}

impl RejectionStats {
    pub fn rate(&self) -> f64 {
        if self.proposals == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposals as f64
        }
    }

    pub fn merge(self, other: Self) -> Self {
        Self { proposals: self.proposals + other.proposals, accepted: self.accepted + other.accepted }
    }
}

/// Radius `R` of the Frobenius ball containing `B_p^N`: `N^{max(0, 1/2 − 1/p)}`.
pub fn enclosing_frobenius_radius(spec: &BallSpec) -> f64 {
    (spec.n_dim as f64).powf((0.5 - spec.p.recip()).max(0.0))
}

/// Uniform point of the Euclidean ball of given radius in `d = rows·cols` dimensions.
pub fn frobenius_ball_point<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, radius: f64) -> Mat {
    let mut g = gaussian_with(rng, rows, cols);
    let d = (rows * cols) as f64;
    let norm = g.norm();
    let u: f64 = rng.random();
    g *= radius * u.powf(1.0 / d) / norm;
    g
}

/// Point of the `ℓ_p` unit sphere of dimension `k` (cone measure).
pub fn lp_sphere_vector<R: Rng + ?Sized>(rng: &mut R, k: usize, p: Exponent) -> Vec<f64> {
    let mut x: Vec<f64> = match p {
        Exponent::Infinity => {
            let mut v: Vec<f64> = (0..k).map(|_| rng.random::<f64>()).collect();
            let hot = rng.random_range(0..k);
            v[hot] = 1.0;
            v
        }
        Exponent::Finite(pv) => {
            let gamma = Gamma::new(1.0 / pv, 1.0).expect("positive shape");
            (0..k).map(|_| gamma.sample(rng).powf(1.0 / pv)).collect()
        }
    };
    let norm = lp_norm(&x, p);
    if norm > 0.0 {
        x.iter_mut().for_each(|v| *v /= norm);
    } else {
        x[0] = 1.0;
    }
    x
}

/// Uniform point of the `ℓ_q^k` unit ball, signed coordinates.
pub fn lq_ball_vector<R: Rng + ?Sized>(rng: &mut R, k: usize, q: Exponent) -> Vec<f64> {
    match q {
        Exponent::Infinity => (0..k).map(|_| rng.random_range(-1.0..=1.0)).collect(),
        Exponent::Finite(qv) => {
            // generalized Gaussian coordinates with an exponential slack variable
            let gamma = Gamma::new(1.0 / qv, 1.0).expect("positive shape");
            let mut g: Vec<f64> = (0..k)
                .map(|_| {
                    let mag: f64 = gamma.sample(rng).powf(1.0 / qv);
                    if rng.random::<bool>() { mag } else { -mag }
                })
                .collect();
            let slack: f64 = Exp1.sample(rng);
            let total = g.iter().map(|x| x.abs().powf(qv)).sum::<f64>() + slack;
            let scale = total.powf(-1.0 / qv);
            g.iter_mut().for_each(|x| *x *= scale);
            g
        }
    }
}

/// `U·diag(σ)·Vᵀ` with independent Haar frames of width `σ.len()`.
pub fn random_with_spectrum<R: Rng + ?Sized>(rng: &mut R, n_dim: usize, sigma: &[f64]) -> Result<Mat> {
    let r = sigma.len();
    let u = haar_stiefel_with(rng, n_dim, r)?.u;
    let v = haar_stiefel_with(rng, n_dim, r)?.u;
    let mut us = u;
    for (j, s) in sigma.iter().enumerate() {
        us.column_mut(j).scale_mut(*s);
    }
    Ok(us * v.transpose())
}

/// Sampler for one Schatten ball in one mode.
#[derive(Clone, Copy, Debug)]
pub struct BallSampler {
    pub spec: BallSpec,
    pub mode: SamplingMode,
    pub budget: u64,
}

impl BallSampler {
    pub fn new(spec: BallSpec, mode: SamplingMode) -> Result<Self> {
        if mode == SamplingMode::Rejection && spec.n_dim > MAX_REJECTION_DIM {
            return Err(LabError::invalid(format!(
                "rejection sampling is limited to N <= {MAX_REJECTION_DIM}, got N={}",
                spec.n_dim
            )));
        }
        Ok(Self { spec, mode, budget: DEFAULT_REJECTION_BUDGET })
    }

    pub fn with_budget(mut self, budget: u64) -> Self {
        self.budget = budget.max(1);
        self
    }

    /// One rejection proposal; `Some` when it lands in the ball.
    pub fn propose<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Option<Mat>> {
        let n = self.spec.n_dim;
        let x = frobenius_ball_point(rng, n, n, enclosing_frobenius_radius(&self.spec));
        if self.spec.p == Exponent::TWO {
            return Ok(Some(x));
        }
        Ok((schatten_norm(&x, self.spec.p)? <= 1.0).then_some(x))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, stats: &mut RejectionStats) -> Result<Mat> {
        let n = self.spec.n_dim;
        match self.mode {
            SamplingMode::Rejection => {
                let mut local = RejectionStats::default();
                while local.proposals < self.budget {
                    local.proposals += 1;
                    if let Some(x) = self.propose(rng)? {
                        local.accepted += 1;
                        *stats = stats.merge(local);
                        return Ok(x);
                    }
                }
                *stats = stats.merge(local);
                Err(LabError::BudgetExhausted { proposals: local.proposals, accepted: 0, rate: stats.rate() })
            }
            SamplingMode::Spectral => {
                let mut sigma = lp_sphere_vector(rng, n, self.spec.p);
                let radius = rng.random::<f64>().powf(1.0 / n as f64);
                sigma.iter_mut().for_each(|s| *s *= radius);
                random_with_spectrum(rng, n, &sigma)
            }
            SamplingMode::LowRank => {
                let rank = rng.random_range(1..=n);
                let mut sigma = lp_sphere_vector(rng, rank, self.spec.p);
                let radius = rng.random::<f64>().powf(1.0 / rank as f64);
                sigma.iter_mut().for_each(|s| *s *= radius);
                random_with_spectrum(rng, n, &sigma)
            }
        }
    }
}

/// One point of `B_p^N` drawn in the given mode.
pub fn sample_schatten_ball(spec: BallSpec, mode: SamplingMode, stream: StreamKey) -> Result<Mat> {
    BallSampler::new(spec, mode)?.sample(&mut stream.rng(), &mut RejectionStats::default())
}

/// `count` points, point `i` drawn from `stream.child(i)`; parallel and order-stable.
pub fn sample_many(spec: BallSpec, mode: SamplingMode, count: usize, stream: StreamKey) -> Result<Vec<Mat>> {
    let sampler = BallSampler::new(spec, mode)?;
    (0..count)
        .into_par_iter()
        .map(|i| sampler.sample(&mut stream.child(i as u64).rng(), &mut RejectionStats::default()))
        .collect()
}

/// Column vector helper for code that works on flattened matrices.
pub fn flatten(a: &Mat) -> DVector<f64> {
    DVector::from_column_slice(a.as_slice())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_is_deterministic_per_stream() {
        let k = StreamKey::new(3, 9);
        assert_eq!(gaussian_matrix(2, 2, k).unwrap(), gaussian_matrix(2, 2, k).unwrap());
        let a = gaussian_matrix(1, 1, StreamKey::new(3, 1)).unwrap();
        let b = gaussian_matrix(1, 1, StreamKey::new(3, 2)).unwrap();
        assert_ne!(a, b);
        assert!(gaussian_matrix(0, 2, k).is_err());
    }

    #[test]
    fn gaussian_mean_is_near_zero() {
        let g = gaussian_matrix(64, 64, StreamKey::new(11, 0)).unwrap();
        // 3 / sqrt(4096) < 0.05
        assert!(g.mean().abs() < 0.05, "mean {}", g.mean());
    }

    #[test]
    fn child_keys_are_distinct_and_stable() {
        let k = StreamKey::new(1, 0);
        assert_eq!(k.child(5), k.child(5));
        assert_ne!(k.child(5), k.child(6));
        assert_ne!(k.named("volume"), k.named("grassmann"));
    }

    #[test]
    fn stiefel_examples() {
        for i in 0..20 {
            let u = haar_stiefel(1, 1, StreamKey::new(0, i)).unwrap().u[(0, 0)];
            assert!(u == 1.0 || u == -1.0);
        }
        let f = haar_stiefel(8, 3, StreamKey::new(0, 1)).unwrap();
        assert!((f.u.transpose() * &f.u - Mat::identity(3, 3)).amax() < 1e-12);
        let o = haar_stiefel(4, 4, StreamKey::new(0, 2)).unwrap();
        assert!((o.u.determinant().abs() - 1.0).abs() < 1e-10);
        assert!(haar_stiefel(2, 3, StreamKey::new(0, 0)).is_err());
        assert!((StiefelPoint::manifold_dim(6, 2) - 9.0).abs() < 1e-15);
    }

    #[test]
    fn grassmann_projection_invariants() {
        for (n, k) in [(2, 1), (5, 2), (4, 4)] {
            let g = haar_grassmann(n, k, StreamKey::new(5, n as u64)).unwrap();
            let p = &g.projection;
            assert!((p - p.transpose()).amax() < 1e-12);
            assert!((p * p - p).amax() < 1e-10);
            assert!((p.trace() - k as f64).abs() < 1e-10);
            if n == k {
                assert!((p - Mat::identity(n, n)).amax() < 1e-10);
            }
        }
    }

    #[test]
    fn spectral_and_low_rank_stay_in_ball() {
        for p in [0.5, 1.0, 2.0, 3.0, f64::INFINITY] {
            let spec = BallSpec::new(5, Exponent::of(p)).unwrap();
            for mode in [SamplingMode::Spectral, SamplingMode::LowRank] {
                for x in sample_many(spec, mode, 50, StreamKey::new(2, 0)).unwrap() {
                    assert!(schatten_norm(&x, spec.p).unwrap() <= 1.0 + 1e-10);
                }
            }
        }
    }

    #[test]
    fn rejection_is_capped_and_frobenius_accepts_everything() {
        assert!(BallSampler::new(BallSpec::new(7, Exponent::ONE).unwrap(), SamplingMode::Rejection).is_err());
        let s = BallSampler::new(BallSpec::new(3, Exponent::TWO).unwrap(), SamplingMode::Rejection).unwrap();
        let mut stats = RejectionStats::default();
        let mut rng = StreamKey::new(0, 0).rng();
        for _ in 0..200 {
            s.sample(&mut rng, &mut stats).unwrap();
        }
        assert_eq!(stats.rate(), 1.0);
    }

    #[test]
    fn rejection_budget_exhaustion_is_reported() {
        let s = BallSampler::new(BallSpec::new(6, Exponent::of(0.5)).unwrap(), SamplingMode::Rejection)
            .unwrap()
            .with_budget(10);
        let err = s.sample(&mut StreamKey::new(0, 0).rng(), &mut RejectionStats::default()).unwrap_err();
        assert!(matches!(err, LabError::BudgetExhausted { proposals: 10, .. }));
    }

    #[test]
    fn lq_ball_vectors_are_inside() {
        let mut rng = StreamKey::new(4, 4).rng();
        for q in [0.5, 1.0, 2.0, f64::INFINITY] {
            for _ in 0..200 {
                let x = lq_ball_vector(&mut rng, 3, Exponent::of(q));
                assert!(lp_norm(&x, Exponent::of(q)) <= 1.0 + 1e-12);
            }
        }
    }
}
