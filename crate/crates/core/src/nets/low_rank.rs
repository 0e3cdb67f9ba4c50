//! Nets of low-rank Schatten balls `R^N_{K,q} = {X : rank X ≤ K, ‖X‖_q ≤ 1}`.
//!
//! Points are `Ũ·diag(σ̃)·Ṽᵀ` with `Ũ, Ṽ` from a frame net and `σ̃` from a grid
//! net of the sorted non-negative part of `B_{ℓ_q^K}`. A matrix is decoded
//! factor by factor from its SVD; with radius `r_σ = ε/3^{1/q̄}` for the
//! spectrum and `r_U^{q̄} = (ε^{q̄}/3)/(1 + ε^{q̄}/3)` for the frames each of the
//! three terms of `‖X − Y‖_q^{q̄}` stays below `ε^{q̄}/3`.

use serde::{Deserialize, Serialize};

use super::greedy::GreedyConfig;
use super::lq_grid::{GridNet, GridRegion};
use super::stiefel::{op_norm_fast, stiefel_net_with, LatticeStiefel, StiefelMode};
use super::{MetricSpec, NetExplicit};
use crate::error::{LabError, Result};
use crate::sampling::StreamKey;
use crate::schatten::{schatten_norm, thin_svd, Exponent, Mat};

/// Shape of one low-rank ball.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LowRankBallSpec {
    pub n_dim: usize,
    pub k: usize,
    pub q: Exponent,
}

impl LowRankBallSpec {
    pub fn new(n_dim: usize, k: usize, q: Exponent) -> Result<Self> {
        if k == 0 || k > n_dim {
            return Err(LabError::invalid(format!("low-rank ball needs 1 <= K <= N, got K={k}, N={n_dim}")));
        }
        Ok(Self { n_dim, k, q })
    }

    /// Exponent `K(2N − K)` of the covering bound.
    pub fn covering_exponent(&self) -> f64 {
        (self.k * (2 * self.n_dim - self.k)) as f64
    }
}

/// Which frame net a low-rank net uses.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StiefelBackend {
    /// Lattice rounding followed by the polar factor; covering holds for every frame.
    Lattice,
    /// Greedy packing of Haar frames; covering is audited, not guaranteed.
    Greedy(GreedyConfig),
}

#[derive(Clone, Debug)]
pub enum FrameNet {
    Lattice(LatticeStiefel),
    Explicit(NetExplicit),
}

impl FrameNet {
    pub fn decode(&self, u: &Mat) -> Result<Mat> {
        match self {
            FrameNet::Lattice(l) => l.decode(u),
            FrameNet::Explicit(net) => {
                let mut best = (0, f64::INFINITY);
                for (i, p) in net.points.iter().enumerate() {
                    let d = op_norm_fast(&(u - p));
                    if d < best.1 {
                        best = (i, d);
                    }
                }
                Ok(net.points[best.0].clone())
            }
        }
    }

    pub fn log2_cardinality(&self) -> f64 {
        match self {
            FrameNet::Lattice(l) => l.log2_cardinality_bound(),
            FrameNet::Explicit(net) => net.log2_cardinality(),
        }
    }
}

/// Factorized net of `R^N_{K,q}` at radius `eps`; `{0}` when `eps ≥ 1`.
#[derive(Clone, Debug)]
pub struct LowRankNet {
    pub spec: LowRankBallSpec,
    pub eps: f64,
    pub frame_radius: f64,
    pub sigma_radius: f64,
    pub sigma: Option<GridNet>,
    pub frames: Option<FrameNet>,
    pub log2_cardinality: f64,
}

fn component_radii(eps: f64, q: Exponent) -> (f64, f64) {
    let qb = q.bar();
    let third = eps.powf(qb) / 3.0;
    let sigma = third.powf(1.0 / qb);
    let frame = (third / (1.0 + third)).powf(1.0 / qb);
    (frame, sigma)
}

/// Net of `R^N_{K,q}` with lattice frame nets.
pub fn low_rank_ball_net(spec: LowRankBallSpec, eps: f64, stream: StreamKey) -> Result<LowRankNet> {
    low_rank_ball_net_with(spec, eps, StiefelBackend::Lattice, stream)
}

pub fn low_rank_ball_net_with(spec: LowRankBallSpec, eps: f64, backend: StiefelBackend, stream: StreamKey) -> Result<LowRankNet> {
    LowRankBallSpec::new(spec.n_dim, spec.k, spec.q)?;
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(LabError::invalid(format!("low-rank net radius must be positive, got {eps}")));
    }
    let (frame_radius, sigma_radius) = component_radii(eps, spec.q);
    if eps >= 1.0 {
        return Ok(LowRankNet { spec, eps, frame_radius, sigma_radius, sigma: None, frames: None, log2_cardinality: 0.0 });
    }
    let sigma = GridNet::new(spec.k, spec.q, sigma_radius, GridRegion::SortedOrthant)?;
    let frames = match backend {
        StiefelBackend::Lattice => FrameNet::Lattice(LatticeStiefel::new(spec.n_dim, spec.k, frame_radius)?),
        StiefelBackend::Greedy(cfg) => {
            FrameNet::Explicit(stiefel_net_with(spec.n_dim, spec.k, frame_radius, StiefelMode::Direct, stream, &cfg)?.net)
        }
    };
    let log2_cardinality = 2.0 * frames.log2_cardinality() + sigma.log2_cardinality();
    Ok(LowRankNet { spec, eps, frame_radius, sigma_radius, sigma: Some(sigma), frames: Some(frames), log2_cardinality })
}

impl LowRankNet {
    pub fn is_trivial(&self) -> bool {
        self.sigma.is_none()
    }

    /// Decode from factors `X = U·diag(σ)·Vᵀ` (`U, V` with `K` columns, `σ` sorted).
    /// Returns the better of the decoded point and zero, with its distance.
    pub fn nearest_factored(&self, x: &Mat, u: &Mat, sigma: &[f64], v: &Mat) -> Result<(Mat, f64)> {
        let zero = Mat::zeros(x.nrows(), x.ncols());
        let d0 = schatten_norm(x, self.spec.q)?;
        let (Some(grid), Some(frames)) = (&self.sigma, &self.frames) else {
            return Ok((zero, d0));
        };
        if sigma.iter().all(|s| *s == 0.0) {
            return Ok((zero, d0));
        }
        let st = grid.decode(sigma)?;
        let ut = frames.decode(u)?;
        let vt = frames.decode(v)?;
        let mut us = ut;
        for (j, s) in st.iter().enumerate() {
            us.column_mut(j).scale_mut(*s);
        }
        let y = us * vt.transpose();
        let dy = schatten_norm(&(x - &y), self.spec.q)?;
        Ok(if dy <= d0 { (y, dy) } else { (zero, d0) })
    }

    /// Decode an arbitrary matrix of rank at most `K`.
    pub fn nearest(&self, x: &Mat) -> Result<(Mat, f64)> {
        let k = self.spec.k;
        if x.nrows() != self.spec.n_dim || x.ncols() != self.spec.n_dim {
            return Err(LabError::invalid("matrix shape does not match the low-rank net"));
        }
        let f = thin_svd(x)?;
        let u = f.u.columns(0, k).into_owned();
        let v = f.v.columns(0, k).into_owned();
        self.nearest_factored(x, &u, &f.sigma[..k], &v)
    }

    /// All points, for greedy frame nets of manageable size.
    pub fn to_explicit(&self, limit: usize) -> Result<NetExplicit> {
        let n = self.spec.n_dim;
        let metric = MetricSpec::Schatten { q: self.spec.q };
        let (Some(grid), Some(frames)) = (&self.sigma, &self.frames) else {
            return Ok(NetExplicit {
                points: vec![Mat::zeros(n, n)],
                radius: self.eps,
                separation: f64::INFINITY,
                metric,
                saturated: true,
                stats: Default::default(),
            });
        };
        let FrameNet::Explicit(fnet) = frames else {
            return Err(LabError::invalid("lattice frame nets are implicit; use a greedy backend to enumerate"));
        };
        let total = fnet.len() * fnet.len() * grid.cardinality as usize;
        if total > limit {
            return Err(LabError::Capacity { what: "low-rank net enumeration".into(), requested: total as f64, limit: limit as f64 });
        }
        let sigmas = grid.points();
        let mut points = vec![Mat::zeros(n, n)];
        for ut in &fnet.points {
            for vt in &fnet.points {
                for st in sigmas.iter().skip(1) {
                    let mut us = ut.clone();
                    for (j, s) in st.iter().enumerate() {
                        us.column_mut(j).scale_mut(*s);
                    }
                    points.push(us * vt.transpose());
                }
            }
        }
        Ok(NetExplicit { points, radius: self.eps, separation: 0.0, metric, saturated: fnet.saturated, stats: fnet.stats })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{lp_sphere_vector, random_with_spectrum};

    #[test]
    fn component_radii_split_the_budget() {
        let (f, s) = component_radii(0.9, Exponent::TWO);
        assert!((s - 0.3).abs() < 1e-15);
        assert!((f - 0.3 / 1.3).abs() < 1e-15);
        let (f, s) = component_radii(0.5, Exponent::of(0.5));
        let third = 0.5f64.sqrt() / 3.0;
        assert!((s - third * third).abs() < 1e-15);
        assert!((f.sqrt() * (1.0 + third) - third).abs() < 1e-15);
    }

    #[test]
    fn scalar_case_covers_the_interval() {
        let spec = LowRankBallSpec::new(1, 1, Exponent::INF).unwrap();
        let net = low_rank_ball_net(spec, 0.25, StreamKey::new(0, 0)).unwrap();
        for i in 0..=200 {
            let x = Mat::from_element(1, 1, -1.0 + i as f64 / 100.0);
            assert!(net.nearest(&x).unwrap().1 <= 0.25);
        }
    }

    #[test]
    fn every_rank_k_matrix_is_covered() {
        let mut rng = StreamKey::new(3, 3).rng();
        for (n, k, q, eps) in [(3, 1, 2.0, 0.9), (4, 2, 1.0, 0.5), (5, 2, f64::INFINITY, 0.3), (4, 2, 0.5, 0.6)] {
            let q = Exponent::of(q);
            let spec = LowRankBallSpec::new(n, k, q).unwrap();
            let net = low_rank_ball_net(spec, eps, StreamKey::new(0, 1)).unwrap();
            for _ in 0..300 {
                let mut s = lp_sphere_vector(&mut rng, k, q);
                s.sort_by(|a, b| b.total_cmp(a));
                let x = random_with_spectrum(&mut rng, n, &s).unwrap();
                let (y, d) = net.nearest(&x).unwrap();
                assert!(d <= eps, "N={n} K={k} q={q} err {d}");
                assert!((schatten_norm(&(&x - &y), q).unwrap() - d).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn trivial_and_zero_inputs() {
        let spec = LowRankBallSpec::new(3, 1, Exponent::TWO).unwrap();
        let net = low_rank_ball_net(spec, 1.0, StreamKey::new(0, 0)).unwrap();
        assert!(net.is_trivial());
        assert_eq!(net.log2_cardinality, 0.0);
        let small = low_rank_ball_net(spec, 0.5, StreamKey::new(0, 0)).unwrap();
        let (y, d) = small.nearest(&Mat::zeros(3, 3)).unwrap();
        assert_eq!(d, 0.0);
        assert_eq!(y, Mat::zeros(3, 3));
    }

    #[test]
    fn greedy_backend_enumerates() {
        let spec = LowRankBallSpec::new(2, 1, Exponent::TWO).unwrap();
        let cfg = GreedyConfig::new(1.0).budget(500);
        let net = low_rank_ball_net_with(spec, 0.9, StiefelBackend::Greedy(cfg), StreamKey::new(4, 0)).unwrap();
        let explicit = net.to_explicit(1_000_000).unwrap();
        assert!(explicit.len() > 1);
        assert!(low_rank_ball_net(spec, 0.9, StreamKey::new(0, 0)).unwrap().to_explicit(1000).is_err());
    }
}
