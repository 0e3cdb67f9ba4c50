//! Splitting a matrix into dyadic blocks of singular values.
//!
//! `A_1` carries `σ_1`, `A_j` carries `σ_{2^{j-1}}, …, σ_{2^j − 1}` and the
//! remainder `A^c` carries the tail from `σ_{2^ℓ}` on.

use std::ops::Range;

use crate::error::{LabError, Result};
use crate::schatten::{schatten_norm, svd, Exponent, Mat, SvdFactors};

#[derive(Clone, Debug)]
pub struct DyadicDecomposition {
    pub pieces: Vec<Mat>,
    pub remainder: Mat,
    pub levels: usize,
    pub p: Exponent,
    pub q: Exponent,
    /// SVD of the source matrix; pieces are assembled from its triplets.
    pub factors: SvdFactors,
}

/// Zero-based singular-value indices of piece `j` (1-based).
pub fn piece_range(j: usize) -> Range<usize> {
    ((1usize << (j - 1)) - 1)..((1usize << j) - 1)
}

/// `2^{(j−1)(1/q−1/p)}`, the `S_q` bound on piece `j` of a matrix in `B_p`.
pub fn piece_bound(j: usize, p: Exponent, q: Exponent) -> f64 {
    ((j as f64 - 1.0) * (q.recip() - p.recip())).exp2()
}

/// `2^{ℓ(1/q−1/p)}`, the `S_q` bound on the remainder.
pub fn remainder_bound(levels: usize, p: Exponent, q: Exponent) -> f64 {
    (levels as f64 * (q.recip() - p.recip())).exp2()
}

impl DyadicDecomposition {
    pub fn reconstruct(&self) -> Mat {
        self.pieces.iter().fold(self.remainder.clone(), |acc, a| acc + a)
    }

    /// `(U_j, σ_j, V_j)` with `2^{j−1}` columns, so that `A_j = U_j diag(σ_j) V_jᵀ`.
    pub fn piece_factors(&self, j: usize) -> (Mat, Vec<f64>, Mat) {
        let r = piece_range(j);
        let u = self.factors.u.columns(r.start, r.len()).into_owned();
        let v = self.factors.v.columns(r.start, r.len()).into_owned();
        (u, self.factors.sigma[r].to_vec(), v)
    }

    /// Largest excess of a piece or the remainder over its `S_q` bound (negative when all hold).
    pub fn worst_bound_excess(&self) -> Result<f64> {
        let mut worst = schatten_norm(&self.remainder, self.q)? - remainder_bound(self.levels, self.p, self.q);
        for (i, a) in self.pieces.iter().enumerate() {
            worst = worst.max(schatten_norm(a, self.q)? - piece_bound(i + 1, self.p, self.q));
        }
        Ok(worst)
    }
}

/// Dyadic decomposition of `a ∈ B_p^N` with `ℓ = levels` pieces.
pub fn dyadic_decompose(a: &Mat, levels: usize, p: Exponent, q: Exponent) -> Result<DyadicDecomposition> {
    let n = a.nrows();
    if !a.is_square() {
        return Err(LabError::invalid("dyadic decomposition expects a square matrix"));
    }
    if levels >= usize::BITS as usize || (1usize << levels) > n {
        return Err(LabError::invalid(format!("2^levels must not exceed N: levels={levels}, N={n}")));
    }
    let norm = schatten_norm(a, p)?;
    if norm > 1.0 + 1e-10 {
        return Err(LabError::invalid(format!("source must lie in the unit ball of S_{p}, norm is {norm}")));
    }
    let factors = svd(a)?;
    let pieces: Vec<Mat> = (1..=levels).map(|j| factors.partial(piece_range(j))).collect();
    let remainder = factors.partial(((1usize << levels) - 1)..n);
    Ok(DyadicDecomposition { pieces, remainder, levels, p, q, factors })
}
