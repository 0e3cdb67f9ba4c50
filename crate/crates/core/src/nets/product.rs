//! The dyadic product net of `B_p^N` in `S_q^N` and its quantizer.
//!
//! Level `j` covers the rescaled piece `2^{(j−1)(1/p−1/q)} A_j ∈ R^N_{2^{j−1},q}`
//! at radius `ε_j = c_q·2^{(j−ℓ)(1/p−1/q+α)}`; a representative of `A` is the
//! sum of the decoded pieces scaled back. The remainder `A^c` is dropped and
//! accounts for the last term of the error budget.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dyadic::{dyadic_decompose, remainder_bound};
use super::low_rank::{low_rank_ball_net_with, LowRankBallSpec, LowRankNet, StiefelBackend};
use super::CoverageAudit;
use crate::error::{LabError, Result};
use crate::sampling::StreamKey;
use crate::schatten::{schatten_norm, Exponent, Mat};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProductNetParams {
    pub n_dim: usize,
    pub p: Exponent,
    pub q: Exponent,
    pub levels: usize,
    pub alpha: f64,
    pub c_q: f64,
}

impl ProductNetParams {
    pub fn new(n_dim: usize, p: Exponent, q: Exponent, levels: usize) -> Self {
        Self { n_dim, p, q, levels, alpha: 1.0, c_q: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_dim == 0 {
            return Err(LabError::invalid("N must be at least 1"));
        }
        if self.p > self.q {
            return Err(LabError::invalid(format!("product nets need p <= q, got p={}, q={}", self.p, self.q)));
        }
        if self.levels >= usize::BITS as usize || (1usize << self.levels) > self.n_dim {
            return Err(LabError::invalid(format!("2^levels must not exceed N: levels={}, N={}", self.levels, self.n_dim)));
        }
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(LabError::invalid(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !(self.c_q >= 1.0) || !self.c_q.is_finite() {
            return Err(LabError::invalid(format!("c_q must be at least 1, got {}", self.c_q)));
        }
        Ok(())
    }

    /// `1/p − 1/q`.
    pub fn gap(&self) -> f64 {
        self.p.recip() - self.q.recip()
    }

    /// `n = 2^ℓ·N`.
    pub fn nominal_index(&self) -> u64 {
        (1u64 << self.levels) * self.n_dim as u64
    }

    pub fn level_radius(&self, j: usize) -> f64 {
        self.c_q * ((j as f64 - self.levels as f64) * (self.gap() + self.alpha)).exp2()
    }

    pub fn level_scale(&self, j: usize) -> f64 {
        (-(j as f64 - 1.0) * self.gap()).exp2()
    }

    /// `ε` with `ε^{q̄} = Σ_j [2^{−(j−1)(1/p−1/q)} ε_j]^{q̄} + 2^{ℓ q̄ (1/q−1/p)}`.
    pub fn error_budget(&self) -> f64 {
        let qb = self.q.bar();
        let levels: f64 = (1..=self.levels).map(|j| (self.level_scale(j) * self.level_radius(j)).powf(qb)).sum();
        (levels + remainder_bound(self.levels, self.p, self.q).powf(qb)).powf(1.0 / qb)
    }

    /// `2(1/p − 1/q + α)·n`, the cardinality budget of the construction in bits.
    pub fn cardinality_budget(&self) -> f64 {
        2.0 * (self.gap() + self.alpha) * self.nominal_index() as f64
    }
}

/// `Σ_{j=1}^{ℓ} 2^j (ℓ − j)`, which never exceeds `2^{ℓ+1}`.
pub fn dyadic_weight_sum(levels: u32) -> u128 {
    (1..=levels as u128).map(|j| (1u128 << j) * (levels as u128 - j)).sum()
}

#[derive(Clone, Debug)]
pub struct ProductNet {
    pub params: ProductNetParams,
    pub level_nets: Vec<LowRankNet>,
    pub level_scales: Vec<f64>,
    pub level_radii: Vec<f64>,
    pub error_budget: f64,
    pub log2_cardinality: f64,
}

/// Result of quantizing one matrix.
#[derive(Clone, Debug)]
pub struct Quantized {
    pub representative: Mat,
    pub achieved_error: f64,
    /// `S_q` error of each rescaled piece against its level net.
    pub level_errors: Vec<f64>,
    pub remainder_norm: f64,
}

/// Product net with lattice frame nets.
pub fn schatten_net_build(params: ProductNetParams, stream: StreamKey) -> Result<ProductNet> {
    schatten_net_build_with(params, StiefelBackend::Lattice, stream)
}

pub fn schatten_net_build_with(params: ProductNetParams, backend: StiefelBackend, stream: StreamKey) -> Result<ProductNet> {
    params.validate()?;
    let level_radii: Vec<f64> = (1..=params.levels).map(|j| params.level_radius(j)).collect();
    let level_scales: Vec<f64> = (1..=params.levels).map(|j| params.level_scale(j)).collect();
    let level_nets: Result<Vec<LowRankNet>> = (1..=params.levels)
        .into_par_iter()
        .map(|j| {
            let spec = LowRankBallSpec::new(params.n_dim, 1 << (j - 1), params.q)?;
            low_rank_ball_net_with(spec, level_radii[j - 1], backend, stream.child(j as u64)).map_err(|e| e.at_level(j))
        })
        .collect();
    let level_nets = level_nets?;
    let log2_cardinality = level_nets.iter().map(|n| n.log2_cardinality).sum::<f64>() + 0.0;
    Ok(ProductNet { params, level_nets, level_scales, level_radii, error_budget: params.error_budget(), log2_cardinality })
}

impl ProductNet {
    pub fn quantize(&self, a: &Mat) -> Result<Quantized> {
        let pr = &self.params;
        if a.nrows() != pr.n_dim || a.ncols() != pr.n_dim {
            return Err(LabError::invalid(format!("expected a {0}x{0} matrix", pr.n_dim)));
        }
        let dec = dyadic_decompose(a, pr.levels, pr.p, pr.q)?;
        let mut representative = Mat::zeros(pr.n_dim, pr.n_dim);
        let mut level_errors = Vec::with_capacity(pr.levels);
        for (i, net) in self.level_nets.iter().enumerate() {
            let j = i + 1;
            let scale = self.level_scales[i];
            let (u, sigma, v) = dec.piece_factors(j);
            let lifted: Vec<f64> = sigma.iter().map(|s| s / scale).collect();
            let x = &dec.pieces[i] / scale;
            let (z, err) = net.nearest_factored(&x, &u, &lifted, &v).map_err(|e| e.at_level(j))?;
            representative += z * scale;
            level_errors.push(err);
        }
        let achieved_error = schatten_norm(&(a - &representative), pr.q)?;
        let remainder_norm = schatten_norm(&dec.remainder, pr.q)?;
        Ok(Quantized { representative, achieved_error, level_errors, remainder_norm })
    }

    /// Quantize every probe in parallel and compare with the error budget.
    pub fn audit(&self, probes: &[Mat]) -> Result<CoverageAudit> {
        let errs: Result<Vec<f64>> = probes.par_iter().map(|a| self.quantize(a).map(|r| r.achieved_error)).collect();
        Ok(CoverageAudit::from_distances(&errs?, self.error_budget))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{sample_many, SamplingMode};
    use crate::schatten::BallSpec;

    fn params(n: usize, p: f64, q: f64, l: usize) -> ProductNetParams {
        ProductNetParams::new(n, Exponent::of(p), Exponent::of(q), l)
    }

    #[test]
    fn step_three_budget_example() {
        let pr = params(4, 1.0, 2.0, 2);
        let want = 2f64.powf(-1.5) + 2f64.powf(-0.5) + 0.5;
        assert!((pr.error_budget() - want).abs() < 1e-15);
        assert!((pr.error_budget() - 1.56066).abs() < 1e-5);
        let rate = (4.0f64 / 16.0).sqrt();
        assert!((pr.error_budget() / rate - 3.1213).abs() < 1e-4);
    }

    #[test]
    fn zero_levels_is_the_zero_net() {
        let net = schatten_net_build(params(3, 1.0, 2.0, 0), StreamKey::new(0, 0)).unwrap();
        assert_eq!(net.error_budget, 1.0);
        assert_eq!(net.log2_cardinality, 0.0);
        let a = Mat::identity(3, 3) / 3.0;
        assert!(net.quantize(&a).unwrap().representative.amax() == 0.0);
    }

    #[test]
    fn weight_sum_identity() {
        for l in 0..40u32 {
            assert!(dyadic_weight_sum(l) <= 1u128 << (l + 1));
        }
        assert_eq!(dyadic_weight_sum(3), 2 * 2 + 4);
    }

    #[test]
    fn quantizer_respects_budget() {
        for (p, q) in [(1.0, 2.0), (1.0, f64::INFINITY), (0.5, 1.0)] {
            let pr = params(4, p, q, 2);
            let net = schatten_net_build(pr, StreamKey::new(1, 0)).unwrap();
            let spec = BallSpec::new(4, pr.p).unwrap();
            for mode in [SamplingMode::Spectral, SamplingMode::LowRank] {
                let probes = sample_many(spec, mode, 60, StreamKey::new(2, 0)).unwrap();
                let audit = net.audit(&probes).unwrap();
                assert_eq!(audit.violations, 0, "p={p} q={q} max {} budget {}", audit.max_distance, net.error_budget);
            }
            let zero = net.quantize(&Mat::zeros(4, 4)).unwrap();
            assert_eq!(zero.achieved_error, 0.0);
        }
    }

    #[test]
    fn rejects_bad_params() {
        assert!(schatten_net_build(params(4, 2.0, 1.0, 1), StreamKey::new(0, 0)).is_err());
        assert!(schatten_net_build(params(4, 1.0, 2.0, 3), StreamKey::new(0, 0)).is_err());
        let mut pr = params(4, 1.0, 2.0, 1);
        pr.c_q = 0.5;
        assert!(schatten_net_build(pr, StreamKey::new(0, 0)).is_err());
    }
}
