//! Cell-centre grid nets of `ℓ_q^k` unit balls.
//!
//! Cells are `h·[t, t+1]` per coordinate magnitude; a cell is kept when its
//! point closest to the origin lies strictly inside the ball. Every point of
//! the ball is within `(h/2)·k^{1/q}` of its cell centre.

use serde::{Deserialize, Serialize};

use super::{MetricSpec, NetExplicit};
use crate::error::{LabError, Result};
use crate::schatten::{lp_norm, Exponent, Mat};

/// Largest grid the net builders will enumerate.
pub const MAX_GRID_POINTS: u64 = 100_000_000;

/// Which part of the ball a grid covers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridRegion {
    /// The whole ball.
    Full,
    /// Non-negative, non-increasing vectors only (singular-value profiles).
    SortedOrthant,
}

/// Grid net described by its spacing; points are enumerated on demand.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridNet {
    pub k: usize,
    pub q: Exponent,
    pub eps: f64,
    pub spacing: f64,
    pub region: GridRegion,
    /// Number of net points, the zero vector included.
    pub cardinality: u64,
}

fn inside(h: f64, t: &[u64], q: Exponent) -> bool {
    match q {
        Exponent::Infinity => t.iter().all(|ti| h * (*ti as f64) < 1.0),
        Exponent::Finite(qv) => t.iter().map(|ti| (h * *ti as f64).powf(qv)).sum::<f64>() < 1.0,
    }
}

/// Visit all kept magnitude-index tuples; `sorted` restricts to non-increasing ones.
fn visit(h: f64, k: usize, q: Exponent, sorted: bool, f: &mut dyn FnMut(&[u64]) -> bool) {
    fn rec(h: f64, q: Exponent, sorted: bool, t: &mut Vec<u64>, k: usize, f: &mut dyn FnMut(&[u64]) -> bool) -> bool {
        if t.len() == k {
            return f(t);
        }
        let cap = if sorted { t.last().copied().unwrap_or(u64::MAX) } else { u64::MAX };
        let mut v = 0u64;
        while v <= cap {
            t.push(v);
            let ok = inside(h, t, q);
            let cont = ok && rec(h, q, sorted, t, k, f);
            t.pop();
            if !ok {
                break;
            }
            if !cont {
                return false;
            }
            v += 1;
        }
        true
    }
    rec(h, q, sorted, &mut Vec::with_capacity(k), k, f);
}

impl GridNet {
    pub fn new(k: usize, q: Exponent, eps: f64, region: GridRegion) -> Result<Self> {
        if k == 0 {
            return Err(LabError::invalid("grid dimension must be at least 1"));
        }
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(LabError::invalid(format!("grid radius must lie in (0, 1], got {eps}")));
        }
        let spacing = 2.0 * eps * (k as f64).powf(-q.recip());
        let sorted = region == GridRegion::SortedOrthant;
        let mut count: u64 = 0;
        let mut over = false;
        visit(spacing, k, q, sorted, &mut |t| {
            let signs = if sorted { 1 } else { 1u64 << t.len() };
            count += signs;
            if count > MAX_GRID_POINTS {
                over = true;
                return false;
            }
            true
        });
        if over {
            return Err(LabError::Capacity {
                what: format!("l_{q} grid in dimension {k} at radius {eps}"),
                requested: count as f64,
                limit: MAX_GRID_POINTS as f64,
            });
        }
        Ok(Self { k, q, eps, spacing, region, cardinality: count + 1 })
    }

    pub fn log2_cardinality(&self) -> f64 {
        (self.cardinality as f64).log2()
    }

    fn cell_indices(&self, x: &[f64]) -> Vec<u64> {
        x.iter().map(|v| ((v.abs() / self.spacing).ceil() - 1.0).max(0.0) as u64).collect()
    }

    fn centre(&self, x: &[f64], t: &[u64]) -> Vec<f64> {
        x.iter()
            .zip(t)
            .map(|(v, ti)| {
                let c = self.spacing * (*ti as f64 + 0.5);
                if *v < 0.0 { -c } else { c }
            })
            .collect()
    }

    /// Closest of (own cell centre, zero) to `x`; points slightly outside the ball are pulled in first.
    pub fn decode(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.k {
            return Err(LabError::invalid(format!("grid expects length {}, got {}", self.k, x.len())));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(LabError::invalid("grid input has non-finite entries"));
        }
        if self.region == GridRegion::SortedOrthant && (x.iter().any(|v| *v < 0.0) || x.windows(2).any(|w| w[0] < w[1])) {
            return Err(LabError::invalid("sorted-orthant grid expects a non-negative non-increasing vector"));
        }
        let zero = vec![0.0; self.k];
        if x.iter().all(|v| *v == 0.0) {
            return Ok(zero);
        }
        let mut t = self.cell_indices(x);
        if !inside(self.spacing, &t, self.q) {
            let norm = lp_norm(x, self.q);
            if norm > 1.0 + 1e-9 {
                return Err(LabError::invalid(format!("grid input has l_{} norm {norm}, outside the unit ball", self.q)));
            }
            let shrunk: Vec<f64> = x.iter().map(|v| v * (1.0 - 1e-12) / norm).collect();
            t = self.cell_indices(&shrunk);
            if !inside(self.spacing, &t, self.q) {
                return Err(LabError::invalid(format!("grid input has l_{} norm {norm}, outside the unit ball", self.q)));
            }
        }
        let c = self.centre(x, &t);
        let dc = lp_norm(&x.iter().zip(&c).map(|(a, b)| a - b).collect::<Vec<_>>(), self.q);
        Ok(if dc <= lp_norm(x, self.q) { c } else { zero })
    }

    /// All points, zero first.
    pub fn points(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.k]];
        let sorted = self.region == GridRegion::SortedOrthant;
        let h = self.spacing;
        visit(h, self.k, self.q, sorted, &mut |t| {
            let mags: Vec<f64> = t.iter().map(|ti| h * (*ti as f64 + 0.5)).collect();
            if sorted {
                out.push(mags);
            } else {
                for mask in 0..(1u64 << t.len()) {
                    out.push(mags.iter().enumerate().map(|(i, m)| if mask >> i & 1 == 1 { -m } else { *m }).collect());
                }
            }
            true
        });
        out
    }
}

/// Grid net of the whole `ℓ_q^k` ball at radius `eps`, zero included.
pub fn lq_ball_net(k: usize, q: Exponent, eps: f64) -> Result<NetExplicit> {
    let grid = GridNet::new(k, q, eps, GridRegion::Full)?;
    let points: Vec<Mat> = grid.points().into_iter().map(|v| Mat::from_column_slice(k, 1, &v)).collect();
    // adjacent centres differ by h in one coordinate; zero sits eps from the innermost centres
    let separation = grid.spacing.min(eps) * (1.0 - 1e-9);
    let net = NetExplicit {
        points,
        radius: eps,
        separation,
        metric: MetricSpec::EuclideanVector { q },
        saturated: true,
        stats: Default::default(),
    };
    Ok(net)
}
