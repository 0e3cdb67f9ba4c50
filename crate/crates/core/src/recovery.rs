//! Low-rank recovery from linear measurements.
//!
//! An information map is stored as an `m × N²` matrix whose row `i` is the
//! column-major flattening of sensor `A_i`, so `𝒜(X)_i = ⟨A_i, X⟩`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::sampling::{flatten, lp_sphere_vector, random_with_spectrum, StreamKey};
use crate::schatten::{schatten_norm, svd, Exponent, Mat};
use crate::stats::spearman;

/// Consecutive residual increases treated as divergence.
pub const DIVERGENCE_STREAK: usize = 10;

/// Step halvings tried by [`recover`] before giving up.
pub const MAX_BACKTRACKS: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensorKind {
    Gaussian,
    Basis,
}

#[derive(Clone, Debug)]
pub struct InformationMap {
    pub n_dim: usize,
    pub m: usize,
    pub kind: SensorKind,
    matrix: DMatrix<f64>,
}

impl InformationMap {
    /// `m` i.i.d. Gaussian sensors with entry variance `1/m`.
    pub fn gaussian(n_dim: usize, m: usize, stream: StreamKey) -> Result<Self> {
        if n_dim == 0 || m == 0 {
            return Err(LabError::invalid("information map needs N >= 1 and m >= 1"));
        }
        let normal = Normal::new(0.0, (1.0 / m as f64).sqrt()).expect("positive variance");
        let mut rng = stream.rng();
        let d = n_dim * n_dim;
        // row-major fill keeps sensor i a function of the first i draws
        let data: Vec<f64> = (0..m * d).map(|_| normal.sample(&mut rng)).collect();
        Ok(Self { n_dim, m, kind: SensorKind::Gaussian, matrix: DMatrix::from_row_slice(m, d, &data) })
    }

    /// The `N²` standard basis sensors `E_ij`.
    pub fn basis(n_dim: usize) -> Result<Self> {
        if n_dim == 0 {
            return Err(LabError::invalid("information map needs N >= 1"));
        }
        let d = n_dim * n_dim;
        Ok(Self { n_dim, m: d, kind: SensorKind::Basis, matrix: DMatrix::identity(d, d) })
    }

    pub fn sensor(&self, i: usize) -> Mat {
        let row: Vec<f64> = self.matrix.row(i).iter().copied().collect();
        Mat::from_column_slice(self.n_dim, self.n_dim, &row)
    }

    pub fn sensors(&self) -> Vec<Mat> {
        (0..self.m).map(|i| self.sensor(i)).collect()
    }

    pub fn apply(&self, x: &Mat) -> Result<DVector<f64>> {
        if x.nrows() != self.n_dim || x.ncols() != self.n_dim {
            return Err(LabError::invalid(format!("expected a {0}x{0} matrix", self.n_dim)));
        }
        Ok(&self.matrix * flatten(x))
    }

    pub fn adjoint(&self, y: &DVector<f64>) -> Result<Mat> {
        if y.len() != self.m {
            return Err(LabError::invalid(format!("expected {} measurements, got {}", self.m, y.len())));
        }
        let v = self.matrix.tr_mul(y);
        Ok(Mat::from_column_slice(self.n_dim, self.n_dim, v.as_slice()))
    }

    /// Ratio of extreme singular values of the `m × N²` matrix.
    pub fn condition_number(&self) -> f64 {
        let s = self.matrix.singular_values();
        let max = s.iter().copied().fold(0.0, f64::max);
        let min = s.iter().copied().fold(f64::INFINITY, f64::min);
        max / min
    }
}

pub fn make_information_map(n_dim: usize, m: usize, stream: StreamKey) -> Result<InformationMap> {
    InformationMap::gaussian(n_dim, m, stream)
}

/// Best rank-`r` approximation.
pub fn hard_threshold(x: &Mat, rank: usize) -> Result<Mat> {
    let f = svd(x)?;
    Ok(f.partial(0..rank.min(f.sigma.len())))
}

/// Iterative hard thresholding from `X = 0`.
pub fn iht_recover(y: &DVector<f64>, map: &InformationMap, rank: usize, iters: usize, step: f64) -> Result<Mat> {
    if rank == 0 || iters == 0 {
        return Err(LabError::invalid("rank and iteration count must be at least 1"));
    }
    if !(step > 0.0) || !step.is_finite() {
        return Err(LabError::invalid(format!("step must be positive, got {step}")));
    }
    let n = map.n_dim;
    let mut x = Mat::zeros(n, n);
    let y_norm = y.norm();
    if y_norm == 0.0 {
        return Ok(x);
    }
    let mut trace = Vec::with_capacity(iters);
    let mut residual = y.clone();
    let mut prev = y_norm;
    let mut rising = 0usize;
    for _ in 0..iters {
        let grad = map.adjoint(&residual)?;
        x = hard_threshold(&(x + grad * step), rank)?;
        residual = y - map.apply(&x)?;
        let r = residual.norm();
        trace.push(r);
        if !r.is_finite() {
            return Err(LabError::Diverged { trace });
        }
        if r > prev {
            rising += 1;
            if rising >= DIVERGENCE_STREAK {
                return Err(LabError::Diverged { trace });
            }
        } else {
            rising = 0;
        }
        prev = r;
        if r <= 1e-15 * y_norm {
            break;
        }
    }
    Ok(x)
}

/// IHT with the step halved after each divergence; returns the iterate and the step used.
pub fn recover(y: &DVector<f64>, map: &InformationMap, rank: usize, iters: usize, step: f64) -> Result<(Mat, f64)> {
    let mut step = step;
    for attempt in 0..=MAX_BACKTRACKS {
        match iht_recover(y, map, rank, iters, step) {
            Ok(x) => return Ok((x, step)),
            Err(LabError::Diverged { trace }) if attempt < MAX_BACKTRACKS => {
                log::debug!("iht diverged at step {step} after {} iterations; halving", trace.len());
                step *= 0.5;
            }
            Err(e) => return Err(e),
        }
    }
    unreachable!("the last attempt returns")
}

/// `min{1, N/m}^{1/p − 1/q}`.
pub fn theory_lower(n_dim: usize, m: usize, p: Exponent, q: Exponent) -> f64 {
    (n_dim as f64 / m as f64).min(1.0).powf(p.recip() - q.recip())
}

/// Kinds of test matrices, all on the boundary of `B_p^N`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Instance {
    Rank(usize),
    /// All `N` singular values equal to `N^{−1/p}`.
    Flat,
}

pub const INSTANCE_POOL: [Instance; 4] = [Instance::Rank(1), Instance::Rank(2), Instance::Rank(4), Instance::Flat];

pub fn boundary_instance<R: Rng + ?Sized>(rng: &mut R, n_dim: usize, p: Exponent, kind: Instance) -> Result<Mat> {
    let sigma = match kind {
        Instance::Rank(r) => lp_sphere_vector(rng, r.clamp(1, n_dim), p),
        Instance::Flat => vec![(n_dim as f64).powf(-p.recip()); n_dim],
    };
    random_with_spectrum(rng, n_dim, &sigma)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmConfig {
    pub iters: usize,
    pub step: f64,
    /// Rank used by the recovery map; defaults to the largest `r` with `3r(2N − r) ≤ m`.
    pub rank: Option<usize>,
    /// Use the basis sensors (rank `N` recovery) whenever `m = N²`.
    pub basis_override: bool,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self { iters: 300, step: 1.0, rank: None, basis_override: false }
    }
}

pub fn default_rank(n_dim: usize, m: usize) -> usize {
    (1..=n_dim).take_while(|r| 3 * r * (2 * n_dim - r) <= m).last().unwrap_or(1)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryRow {
    pub m: usize,
    pub sensors: SensorKind,
    pub rank: usize,
    pub worst_error: f64,
    pub worst_instance: Instance,
    pub mean_error: f64,
    pub theory_lower: f64,
    /// Smallest step that IHT needed over the trials.
    pub min_step: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub n_dim: usize,
    pub m_grid: Vec<usize>,
    pub p: Exponent,
    pub q: Exponent,
    pub trials: usize,
    pub config: EmConfig,
    pub rows: Vec<RecoveryRow>,
    /// Rank correlation of `m` with the mean error.
    pub spearman: f64,
    /// The worst error is measured for one map pair, so it bounds `E_m` from above only.
    pub note: String,
}

impl RecoveryReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("m,worst_error,theory_lower\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{}\n", r.m, r.worst_error, r.theory_lower));
        }
        out
    }

    /// Rows where the worst error falls below `slack·theory_lower`.
    pub fn inconsistent_rows(&self, slack: f64) -> Vec<usize> {
        self.rows.iter().filter(|r| r.worst_error < slack * r.theory_lower).map(|r| r.m).collect()
    }
}

pub fn em_experiment(n_dim: usize, m_grid: &[usize], p: Exponent, q: Exponent, trials: usize, stream: StreamKey) -> Result<RecoveryReport> {
    em_experiment_with(n_dim, m_grid, p, q, trials, &EmConfig::default(), stream)
}

pub fn em_experiment_with(
    n_dim: usize,
    m_grid: &[usize],
    p: Exponent,
    q: Exponent,
    trials: usize,
    config: &EmConfig,
    stream: StreamKey,
) -> Result<RecoveryReport> {
    if p > q {
        return Err(LabError::invalid(format!("recovery experiment needs p <= q, got p={p}, q={q}")));
    }
    if n_dim == 0 || trials == 0 || m_grid.is_empty() {
        return Err(LabError::invalid("need N >= 1, trials >= 1 and a non-empty m grid"));
    }
    let full = n_dim * n_dim;
    if let Some(m) = m_grid.iter().find(|m| **m == 0 || **m > full) {
        return Err(LabError::invalid(format!("m = {m} outside [1, N²] = [1, {full}]")));
    }
    let mut rows = Vec::with_capacity(m_grid.len());
    for &m in m_grid {
        let key = stream.child(m as u64);
        let (map, rank) = if config.basis_override && m == full {
            (InformationMap::basis(n_dim)?, n_dim)
        } else {
            (InformationMap::gaussian(n_dim, m, key.named("map"))?, config.rank.unwrap_or_else(|| default_rank(n_dim, m)))
        };
        let results: Result<Vec<(f64, Instance, f64)>> = (0..trials)
            .into_par_iter()
            .map(|t| {
                let kind = INSTANCE_POOL[t % INSTANCE_POOL.len()];
                let mut rng = key.named("instances").child(t as u64).rng();
                let x = boundary_instance(&mut rng, n_dim, p, kind)?;
                let y = map.apply(&x)?;
                let (xh, step) = recover(&y, &map, rank, config.iters, config.step)?;
                Ok((schatten_norm(&(x - xh), q)?, kind, step))
            })
            .collect();
        let results = results?;
        let (worst_error, worst_instance) = results.iter().fold((f64::NEG_INFINITY, Instance::Flat), |acc, r| if r.0 > acc.0 { (r.0, r.1) } else { acc });
        rows.push(RecoveryRow {
            m,
            sensors: map.kind,
            rank,
            worst_error,
            worst_instance,
            mean_error: results.iter().map(|r| r.0).sum::<f64>() / trials as f64,
            theory_lower: theory_lower(n_dim, m, p, q),
            min_step: results.iter().map(|r| r.2).fold(f64::INFINITY, f64::min),
        });
    }
    let ms: Vec<f64> = rows.iter().map(|r| r.m as f64).collect();
    let errs: Vec<f64> = rows.iter().map(|r| r.mean_error).collect();
    Ok(RecoveryReport {
        n_dim,
        m_grid: m_grid.to_vec(),
        p,
        q,
        trials,
        config: config.clone(),
        rows,
        spearman: spearman(&ms, &errs),
        note: "worst errors are for one (information map, recovery map) pair over a finite instance pool; they bound E_m from above and can only check consistency with the lower bound, not tightness".into(),
    })
}
