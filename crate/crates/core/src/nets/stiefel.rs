//! Nets of Stiefel manifolds and Grassmannians in the operator norm.

use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use super::greedy::{greedy_core, GreedyConfig, GreedyStats};
use super::{MetricSpec, NetExplicit};
use crate::error::{LabError, Result};
use crate::sampling::{haar_orthogonal_with, haar_stiefel_with, StreamKey};
use crate::schatten::{singular_values, thin_svd, Exponent, Mat};

/// Operator norm through the smaller Gram matrix.
pub fn op_norm_fast(d: &Mat) -> f64 {
    if d.nrows() == 1 || d.ncols() == 1 {
        return d.norm();
    }
    let gram = if d.ncols() <= d.nrows() { d.transpose() * d } else { d * d.transpose() };
    if gram.nrows() == 2 {
        let (a, b, c) = (gram[(0, 0)], gram[(0, 1)], gram[(1, 1)]);
        let half = 0.5 * (a + c);
        let disc = (0.25 * (a - c) * (a - c) + b * b).sqrt();
        return (half + disc).max(0.0).sqrt();
    }
    let eig = SymmetricEigen::new(gram);
    eig.eigenvalues.iter().copied().fold(0.0, f64::max).sqrt()
}

/// Nearest matrix with orthonormal columns in every unitarily invariant norm.
pub fn polar(g: &Mat) -> Result<Mat> {
    let f = thin_svd(g)?;
    Ok(f.u * f.v.transpose())
}

/// Cosines of the principal angles between the column spaces of two frames.
pub fn principal_cosines(ua: &Mat, ub: &Mat) -> Vec<f64> {
    let m = ua.transpose() * ub;
    let s = if m.nrows() == 1 && m.ncols() == 1 {
        vec![m[(0, 0)].abs()]
    } else {
        singular_values(&m).unwrap_or_else(|_| vec![0.0; m.nrows().min(m.ncols())])
    };
    s.into_iter().map(|c| c.clamp(0.0, 1.0)).collect()
}

/// `‖P_E − P_F‖_{S_q}` from orthonormal frames of `E` and `F`.
///
/// The singular values of `P_E − P_F` are the sines of the principal angles,
/// each appearing twice.
pub fn grassmann_distance(ua: &Mat, ub: &Mat, q: Exponent) -> f64 {
    let sines: Vec<f64> = principal_cosines(ua, ub).iter().map(|c| (1.0 - c * c).max(0.0).sqrt()).collect();
    match q {
        Exponent::Infinity => sines.iter().copied().fold(0.0, f64::max),
        Exponent::Finite(qv) => (2.0 * sines.iter().map(|s| s.powf(qv)).sum::<f64>()).powf(1.0 / qv),
    }
}

/// How [`stiefel_net`] builds its points.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StiefelMode {
    /// Greedy packing of Haar frames.
    Direct,
    /// `{U_E Z}` from a Grassmann net and an orthogonal-group net.
    Composite,
}

/// How a composite net handled one frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CompositeDecode {
    pub subspace: usize,
    pub rotation: usize,
    /// `‖U − U_E Z‖_op`.
    pub distance: f64,
    /// `‖P_F − P_E‖_op`.
    pub projection_gap: f64,
    /// `‖U_Eᵀ U − Z‖_op`.
    pub rotation_gap: f64,
}

/// A net of `V_K^N` together with its composite structure, if any.
#[derive(Clone, Debug)]
pub struct StiefelNet {
    pub n_dim: usize,
    pub k: usize,
    pub eps: f64,
    pub mode: StiefelMode,
    /// Frames; `radius` is the covering claim (`eps`, or `3·eps` for composite nets).
    pub net: NetExplicit,
    pub subspace_frames: Vec<Mat>,
    pub rotations: Vec<Mat>,
    pub subspace_stats: GreedyStats,
}

impl StiefelNet {
    pub fn manifold_dim(&self) -> f64 {
        crate::sampling::StiefelPoint::manifold_dim(self.n_dim, self.k)
    }

    /// Factor-wise decoding of the composite proof: nearest subspace, then nearest rotation.
    pub fn decode_composite(&self, u: &Mat) -> Result<CompositeDecode> {
        if self.mode != StiefelMode::Composite {
            return Err(LabError::invalid("decode_composite needs a composite net"));
        }
        let (mut subspace, mut projection_gap) = (0, f64::INFINITY);
        for (i, ue) in self.subspace_frames.iter().enumerate() {
            let d = grassmann_distance(u, ue, Exponent::INF);
            if d < projection_gap {
                subspace = i;
                projection_gap = d;
            }
        }
        let ue = &self.subspace_frames[subspace];
        let w = ue.transpose() * u;
        let (mut rotation, mut rotation_gap) = (0, f64::INFINITY);
        for (i, z) in self.rotations.iter().enumerate() {
            let d = op_norm_fast(&(&w - z));
            if d < rotation_gap {
                rotation = i;
                rotation_gap = d;
            }
        }
        let distance = op_norm_fast(&(u - ue * &self.rotations[rotation]));
        Ok(CompositeDecode { subspace, rotation, distance, projection_gap, rotation_gap })
    }
}

fn check_args(n_dim: usize, k: usize, eps: f64) -> Result<()> {
    if k == 0 || k > n_dim {
        return Err(LabError::invalid(format!("Stiefel net needs 1 <= k <= N, got k={k}, N={n_dim}")));
    }
    if !(eps > 0.0 && eps < 2.0) {
        return Err(LabError::invalid(format!("Stiefel net radius must lie in (0, 2), got {eps}")));
    }
    Ok(())
}

/// Net of `V_K^N` in the operator norm with the default greedy budget.
pub fn stiefel_net(n_dim: usize, k: usize, eps: f64, mode: StiefelMode, stream: StreamKey) -> Result<StiefelNet> {
    stiefel_net_with(n_dim, k, eps, mode, stream, &GreedyConfig::new(eps))
}

/// Net of `V_K^N`; `greedy` supplies the stopping rules (its `delta` is replaced by `eps`).
pub fn stiefel_net_with(n_dim: usize, k: usize, eps: f64, mode: StiefelMode, stream: StreamKey, greedy: &GreedyConfig) -> Result<StiefelNet> {
    check_args(n_dim, k, eps)?;
    let config = GreedyConfig { delta: eps, ..*greedy };
    let mut rng = stream.rng();
    match mode {
        StiefelMode::Direct => {
            let sampler = || haar_stiefel_with(&mut rng, n_dim, k).map(|f| f.u);
            let (points, stats, saturated) = greedy_core(Vec::new(), sampler, |a: &Mat, b: &Mat| op_norm_fast(&(a - b)), &config)?;
            let net = NetExplicit { points, radius: eps, separation: eps, metric: MetricSpec::Operator, saturated, stats };
            Ok(StiefelNet { n_dim, k, eps, mode, net, subspace_frames: Vec::new(), rotations: Vec::new(), subspace_stats: stats })
        }
        StiefelMode::Composite => {
            let mut rng_r = stream.named("rotations").rng();
            let sub_sampler = || haar_stiefel_with(&mut rng, n_dim, k).map(|f| f.u);
            let (frames, sub_stats, sub_sat) =
                greedy_core(Vec::new(), sub_sampler, |a: &Mat, b: &Mat| grassmann_distance(a, b, Exponent::INF), &config)?;
            let rot_sampler = || haar_orthogonal_with(&mut rng_r, k);
            let (rotations, rot_stats, rot_sat) = greedy_core(Vec::new(), rot_sampler, |a: &Mat, b: &Mat| op_norm_fast(&(a - b)), &config)?;
            let points: Vec<Mat> = frames.iter().flat_map(|ue| rotations.iter().map(move |z| ue * z)).collect();
            let stats = GreedyStats {
                proposals: sub_stats.proposals + rot_stats.proposals,
                accepted: sub_stats.accepted + rot_stats.accepted,
                final_streak: sub_stats.final_streak.min(rot_stats.final_streak),
            };
            let net = NetExplicit {
                points,
                radius: 3.0 * eps,
                separation: eps,
                metric: MetricSpec::Operator,
                saturated: sub_sat && rot_sat,
                stats,
            };
            Ok(StiefelNet { n_dim, k, eps, mode, net, subspace_frames: frames, rotations, subspace_stats: sub_stats })
        }
    }
}

/// Implicit net of `V_K^N`: polar factors of the points of a cubic lattice.
///
/// With spacing `h = r/√(NK)`, rounding `U` to the lattice moves it by at most
/// `r/2` in Frobenius norm and the polar factor at most doubles that in the
/// operator norm, so every frame lies within `r` of its decoded point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeStiefel {
    pub n_dim: usize,
    pub k: usize,
    pub radius: f64,
    pub spacing: f64,
}

impl LatticeStiefel {
    pub fn new(n_dim: usize, k: usize, radius: f64) -> Result<Self> {
        check_args(n_dim, k, radius)?;
        let spacing = radius / ((n_dim * k) as f64).sqrt();
        Ok(Self { n_dim, k, radius, spacing })
    }

    /// Lattice points whose entries fit in `[-1, 1]` after rounding; an upper bound on the net size.
    pub fn log2_cardinality_bound(&self) -> f64 {
        let m = (1.0 / self.spacing).round();
        (self.n_dim * self.k) as f64 * (2.0 * m + 1.0).log2()
    }

    pub fn decode(&self, u: &Mat) -> Result<Mat> {
        if u.nrows() != self.n_dim || u.ncols() != self.k {
            return Err(LabError::invalid("frame shape does not match the lattice net"));
        }
        let h = self.spacing;
        let g = u.map(|x| h * (x / h).round());
        polar(&g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schatten::op_norm;

    #[test]
    fn fast_op_norm_matches_svd() {
        let mut rng = StreamKey::new(8, 8).rng();
        for (r, c) in [(1, 1), (5, 1), (6, 2), (2, 7), (5, 5)] {
            let a = crate::sampling::gaussian_with(&mut rng, r, c);
            assert!((op_norm_fast(&a) - op_norm(&a).unwrap()).abs() < 1e-10 * op_norm(&a).unwrap());
        }
    }

    #[test]
    fn grassmann_distance_matches_projection_norms() {
        let mut rng = StreamKey::new(9, 1).rng();
        for q in [Exponent::ONE, Exponent::TWO, Exponent::INF] {
            let a = haar_stiefel_with(&mut rng, 6, 2).unwrap();
            let b = haar_stiefel_with(&mut rng, 6, 2).unwrap();
            let direct = crate::schatten::schatten_norm(&(a.projection() - b.projection()), q).unwrap();
            assert!((grassmann_distance(&a.u, &b.u, q) - direct).abs() < 1e-9);
        }
    }

    #[test]
    fn one_by_one_net_is_plus_minus_one() {
        let net = stiefel_net(1, 1, 0.5, StiefelMode::Direct, StreamKey::new(0, 0)).unwrap();
        let mut v: Vec<f64> = net.net.points.iter().map(|p| p[(0, 0)]).collect();
        v.sort_by(f64::total_cmp);
        assert_eq!(v, vec![-1.0, 1.0]);
    }

    #[test]
    fn composite_net_is_separated() {
        let net = stiefel_net(3, 2, 0.9, StiefelMode::Composite, StreamKey::new(1, 0)).unwrap();
        assert_eq!(net.net.len(), net.subspace_frames.len() * net.rotations.len());
        net.net.assert_separated().unwrap();
        for p in &net.net.points {
            assert!((p.transpose() * p - Mat::identity(2, 2)).amax() < 1e-10);
        }
    }

    #[test]
    fn lattice_decode_is_within_radius() {
        let mut rng = StreamKey::new(2, 2).rng();
        for (n, k, r) in [(4, 1, 0.3), (6, 3, 0.2), (8, 4, 0.05), (2, 2, 0.7)] {
            let lat = LatticeStiefel::new(n, k, r).unwrap();
            for _ in 0..200 {
                let u = haar_stiefel_with(&mut rng, n, k).unwrap().u;
                let q = lat.decode(&u).unwrap();
                assert!((q.transpose() * &q - Mat::identity(k, k)).amax() < 1e-10);
                assert!(op_norm_fast(&(&q - &u)) <= r);
            }
            assert!(lat.log2_cardinality_bound().is_finite());
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(stiefel_net(2, 3, 0.5, StiefelMode::Direct, StreamKey::new(0, 0)).is_err());
        assert!(stiefel_net(2, 1, 2.0, StiefelMode::Direct, StreamKey::new(0, 0)).is_err());
        assert!(LatticeStiefel::new(3, 1, 0.0).is_err());
    }
}
