//! Schatten-class linear algebra.
//!
//! Singular value decompositions, Schatten (quasi-)norms `‖A‖_p = ‖σ(A)‖_p`,
//! ball membership and the piecewise entropy-rate evaluator for the identity
//! `S_p^N → S_q^N`.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{LabError, Result};

/// Dense real matrix; the carrier for every matrix-valued quantity in the crate.
pub type Mat = DMatrix<f64>;

/// Relative threshold below which a singular value counts as zero.
pub const RANK_TOL: f64 = 1e-9;


/// A Schatten/Lebesgue exponent `p ∈ (0, ∞]`.
///
/// `∞` is its own variant so that `1/∞` is exactly zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Exponent {
    Finite(f64),
    Infinity,
}

impl Exponent {
    pub fn new(value: f64) -> Result<Self> {
        if value == f64::INFINITY {
            Ok(Exponent::Infinity)
        } else if value.is_finite() && value > 0.0 {
            Ok(Exponent::Finite(value))
        } else {
            Err(LabError::invalid(format!("exponent must lie in (0, inf], got {value}")))
        }
    }

    /// Shorthand for tests and constants; panics on invalid input.
    pub fn of(value: f64) -> Self {
        Self::new(value).expect("valid exponent")
    }

    pub const ONE: Exponent = Exponent::Finite(1.0);
    pub const TWO: Exponent = Exponent::Finite(2.0);
    pub const INF: Exponent = Exponent::Infinity;

    /// The exponent as a float, `f64::INFINITY` for `∞`.
    pub fn value(self) -> f64 {
        match self {
            Exponent::Finite(p) => p,
            Exponent::Infinity => f64::INFINITY,
        }
    }

    /// `1/p`, exactly `0` for `p = ∞`.
    pub fn recip(self) -> f64 {
        match self {
            Exponent::Finite(p) => 1.0 / p,
            Exponent::Infinity => 0.0,
        }
    }

    /// `min(1, p)`: the exponent of the triangle inequality `‖x+y‖^r ≤ ‖x‖^r + ‖y‖^r`.
    pub fn bar(self) -> f64 {
        match self {
            Exponent::Finite(p) => p.min(1.0),
            Exponent::Infinity => 1.0,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Exponent::Infinity)
    }

    /// Conjugate exponent `p'` with `1/p + 1/p' = 1`, for `p ≥ 1`.
    pub fn conjugate(self) -> Result<Self> {
        match self {
            Exponent::Infinity => Ok(Exponent::ONE),
            Exponent::Finite(1.0) => Ok(Exponent::Infinity),
            Exponent::Finite(p) if p > 1.0 => Exponent::new(p / (p - 1.0)),
            Exponent::Finite(p) => Err(LabError::invalid(format!("no conjugate for p = {p} < 1"))),
        }
    }
}

impl PartialOrd for Exponent {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        self.value().partial_cmp(&other.value())
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exponent::Finite(p) => write!(f, "{p}"),
            Exponent::Infinity => f.write_str("inf"),
        }
    }
}

impl FromStr for Exponent {
    type Err = LabError;

    /// Accepts decimals, fractions such as `1/2`, and `inf`/`infinity`/`∞`.
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        match t.to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "∞" => return Ok(Exponent::Infinity),
            _ => {}
        }
        let value = if let Some((num, den)) = t.split_once('/') {
            let num: f64 = num.trim().parse().map_err(|_| LabError::invalid(format!("bad exponent '{s}'")))?;
            let den: f64 = den.trim().parse().map_err(|_| LabError::invalid(format!("bad exponent '{s}'")))?;
            num / den
        } else {
            t.parse().map_err(|_| LabError::invalid(format!("bad exponent '{s}'")))?
        };
        Exponent::new(value)
    }
}

impl Serialize for Exponent {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Exponent::Finite(p) => serializer.serialize_f64(*p),
            Exponent::Infinity => serializer.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        let parsed = match Raw::deserialize(deserializer)? {
            Raw::Num(v) => Exponent::new(v),
            Raw::Text(s) => s.parse(),
        };
        parsed.map_err(serde::de::Error::custom)
    }
}

/// `U · diag(σ) · Vᵀ` with σ sorted non-increasingly.
#[derive(Clone, Debug)]
pub struct SvdFactors {
    pub u: Mat,
    pub sigma: Vec<f64>,
    pub v: Mat,
}

impl SvdFactors {
    pub fn reconstruct(&self) -> Mat {
        let mut us = self.u.clone();
        for (j, s) in self.sigma.iter().enumerate() {
            us.column_mut(j).scale_mut(*s);
        }
        us * self.v.transpose()
    }

    /// Matrix assembled from singular triplets `range` (0-based, half-open).
    pub fn partial(&self, range: std::ops::Range<usize>) -> Mat {
        let mut out = Mat::zeros(self.u.nrows(), self.v.nrows());
        for j in range {
            let s = self.sigma[j];
            if s != 0.0 {
                out.ger(s, &self.u.column(j), &self.v.column(j), 1.0);
            }
        }
        out
    }

    pub fn rank(&self) -> usize {
        numerical_rank(&self.sigma)
    }
}

/// Domain of one Schatten unit ball `B_p^N`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallSpec {
    pub n_dim: usize,
    pub p: Exponent,
}

impl BallSpec {
    pub fn new(n_dim: usize, p: Exponent) -> Result<Self> {
        if n_dim == 0 {
            return Err(LabError::invalid("ball dimension must be at least 1"));
        }
        Ok(Self { n_dim, p })
    }

    pub fn contains(&self, a: &Mat, tol: f64) -> Result<bool> {
        Ok(schatten_norm(a, self.p)? <= 1.0 + tol)
    }
}

/// Parameters of one entropy-rate evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateQuery {
    pub p: Exponent,
    pub q: Exponent,
    pub entropy_index: u64,
    pub n_dim: u64,
}

impl RateQuery {
    pub fn new(p: Exponent, q: Exponent, entropy_index: u64, n_dim: u64) -> Result<Self> {
        if entropy_index == 0 || n_dim == 0 {
            return Err(LabError::invalid("entropy index and dimension must be at least 1"));
        }
        Ok(Self { p, q, entropy_index, n_dim })
    }
}

pub(crate) fn ensure_finite(a: &Mat) -> Result<()> {
    if a.is_empty() {
        return Err(LabError::invalid("matrix has no entries"));
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(LabError::invalid("matrix has non-finite entries"));
    }
    Ok(())
}

fn failure(what: &str, a: &Mat) -> LabError {
    LabError::NumericFailure {
        what: what.to_string(),
        rows: a.nrows(),
        cols: a.ncols(),
        frobenius: a.norm(),
        max_abs: a.amax(),
    }
}

// nalgebra's bidiagonal SVD returns wrong singular vectors for some
// rank-deficient inputs, so decompositions go through faer.
fn to_faer(a: &Mat) -> faer::Mat<f64> {
    faer::Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

fn from_faer(m: faer::MatRef<'_, f64>) -> Mat {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn factors(a: &Mat, thin: bool) -> Result<SvdFactors> {
    ensure_finite(a)?;
    let f = to_faer(a);
    let dec = if thin { f.thin_svd() } else { f.svd() }.map_err(|_| failure("svd did not converge", a))?;
    let s = dec.S().column_vector();
    Ok(SvdFactors { u: from_faer(dec.U()), sigma: (0..s.nrows()).map(|i| s[i]).collect(), v: from_faer(dec.V()) })
}

/// Full singular value decomposition of a square matrix.
pub fn svd(a: &Mat) -> Result<SvdFactors> {
    if !a.is_square() {
        return Err(LabError::invalid(format!("svd expects a square matrix, got {}x{}", a.nrows(), a.ncols())));
    }
    factors(a, false)
}

/// Thin SVD of an arbitrary (rectangular) matrix: `(U, σ, V)` with `min(r, c)` columns.
pub fn thin_svd(a: &Mat) -> Result<SvdFactors> {
    factors(a, true)
}

/// Singular values of any matrix, non-increasing.
pub fn singular_values(a: &Mat) -> Result<Vec<f64>> {
    ensure_finite(a)?;
    to_faer(a).singular_values().map_err(|_| failure("singular values did not converge", a))
}

/// `ℓ_p` (quasi-)norm of a vector; `p = ∞` gives the largest magnitude.
pub fn lp_norm(values: &[f64], p: Exponent) -> f64 {
    let top = values.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    match p {
        Exponent::Infinity => top,
        _ if top == 0.0 => 0.0,
        Exponent::Finite(2.0) => {
            top * values.iter().map(|x| (x / top).powi(2)).sum::<f64>().sqrt()
        }
        Exponent::Finite(1.0) => values.iter().map(|x| x.abs()).sum(),
        Exponent::Finite(p) => top * values.iter().map(|x| (x.abs() / top).powf(p)).sum::<f64>().powf(1.0 / p),
    }
}

/// `‖A‖_{S_p} = ‖σ(A)‖_p`. Rectangular inputs are accepted (operator-norm use on frames).
///
/// For `p < 1`, singular values below `σ_1·max(r, c)·ε` are treated as zero:
/// roundoff of that size would otherwise add `ε^p`-sized terms.
pub fn schatten_norm(a: &Mat, p: Exponent) -> Result<f64> {
    if p == Exponent::TWO {
        ensure_finite(a)?;
        return Ok(a.norm());
    }
    let mut sigma = singular_values(a)?;
    if p < Exponent::ONE {
        let floor = sigma.first().copied().unwrap_or(0.0) * a.nrows().max(a.ncols()) as f64 * f64::EPSILON;
        sigma.retain(|s| *s > floor);
    }
    Ok(lp_norm(&sigma, p))
}

/// Largest singular value.
pub fn op_norm(a: &Mat) -> Result<f64> {
    schatten_norm(a, Exponent::Infinity)
}

/// Count of `σ_j > RANK_TOL · σ_1`.
pub fn numerical_rank(sigma: &[f64]) -> usize {
    let top = sigma.iter().fold(0.0f64, |m, s| m.max(*s));
    if top == 0.0 {
        return 0;
    }
    sigma.iter().filter(|s| **s > RANK_TOL * top).count()
}

pub fn matrix_rank(a: &Mat) -> Result<usize> {
    Ok(numerical_rank(&singular_values(a)?))
}

/// Trace pairing `⟨A, B⟩ = tr(AᵀB)`.
pub fn frobenius_inner(a: &Mat, b: &Mat) -> f64 {
    a.dot(b)
}

/// Order of `e_n(S_p^N → S_q^N)` with all equivalence constants set to one.
///
/// For `q ≤ p` the rate is `2^{-n/N²} N^{1/q-1/p}` for every `n`. For `p < q`
/// it is `1` up to `n = N`, `(N/n)^{1/p-1/q}` on `[N, N²]` (closed on the
/// right), and `2^{-n/N²} N^{1/q-1/p}` beyond `N²`.
pub fn theory_rate(query: &RateQuery) -> f64 {
    let n = query.entropy_index as f64;
    let dim = query.n_dim as f64;
    let gap = query.p.recip() - query.q.recip();
    let tail = || (-n / (dim * dim)).exp2() * dim.powf(-gap);
    if query.q <= query.p {
        return tail();
    }
    if query.entropy_index <= query.n_dim {
        1.0
    } else if query.entropy_index <= query.n_dim * query.n_dim {
        (dim / n).powf(gap)
    } else {
        tail()
    }
}
