//! Entropy-number bounds from coverings, volumes and packings.
//!
//! Index bookkeeping: `2^{n−1}` balls are allowed at index `n`. A covering of
//! size `M` therefore bounds `e_n` from above for `n ≥ ⌈log2 M⌉ + 1`, and a
//! packing of size `M` bounds it from below for `2^{n−1} < M`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::nets::greedy::{greedy_core, GreedyConfig, GreedyStats};
use crate::nets::stiefel::grassmann_distance;
use crate::nets::{greedy_separated_set, schatten_net_build, CoverageAudit, MetricSpec, ProductNetParams};
use crate::sampling::{haar_stiefel_with, sample_many, BallSampler, RejectionStats, SamplingMode, StreamKey, MAX_REJECTION_DIM};
use crate::schatten::{theory_rate, BallSpec, Exponent, Mat, RateQuery};

/// Slack for comparisons between bounds.
pub const BOUND_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundMethod {
    Exact,
    Covering,
    GridNet,
    ProductNet,
    GreedyNet,
    Volume,
    Packing,
    GrassmannPacking,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyBound {
    pub entropy_index: u64,
    pub lower: f64,
    pub upper: Option<f64>,
    pub method_lower: Option<BoundMethod>,
    pub method_upper: Option<BoundMethod>,
}

impl EntropyBound {
    pub fn is_consistent(&self) -> bool {
        self.upper.is_none_or(|u| self.lower <= u + BOUND_TOL)
    }

    fn upper(n: u64, upper: f64, method: BoundMethod) -> Self {
        Self { entropy_index: n, lower: 0.0, upper: Some(upper), method_lower: None, method_upper: Some(method) }
    }

    fn lower(n: u64, lower: f64, method: BoundMethod) -> Self {
        Self { entropy_index: n, lower, upper: None, method_lower: Some(method), method_upper: None }
    }
}

/// Smallest `n` with `2^{n−1} ≥ 2^{log2_card}`.
pub fn covering_index(log2_cardinality: f64) -> u64 {
    // nets built from power-of-two grids land on integers up to rounding
    let l = log2_cardinality.max(0.0);
    let r = l.round();
    let bits = if (l - r).abs() < 1e-9 { r } else { l.ceil() };
    bits as u64 + 1
}

/// Largest `n` with `2^{n−1} < size`.
pub fn packing_index(size: u64) -> Result<u64> {
    if size < 2 {
        return Err(LabError::invalid(format!("a packing needs at least 2 points, got {size}")));
    }
    Ok((size - 1).ilog2() as u64 + 1)
}

/// `e_n ≤ covering_radius` for the smallest `n` allowing `cardinality` balls.
pub fn upper_from_net(net_cardinality: u64, covering_radius: f64) -> Result<EntropyBound> {
    if net_cardinality == 0 {
        return Err(LabError::invalid("net cardinality must be at least 1"));
    }
    Ok(upper_from_log2(net_cardinality.next_power_of_two().ilog2() as f64, covering_radius, BoundMethod::Covering))
}

/// As [`upper_from_net`] for nets only known through `log2` of their size.
pub fn upper_from_log2(log2_cardinality: f64, covering_radius: f64, method: BoundMethod) -> EntropyBound {
    EntropyBound::upper(covering_index(log2_cardinality), covering_radius, method)
}

/// `(vol B_p / vol B_q)^{1/N²} ≥ N^{min(0, 1/q − 1/p)}` from `N^{1/q−1/p} B_q ⊆ B_p`.
pub fn containment_ratio_root(p: Exponent, q: Exponent, n_dim: usize) -> f64 {
    (n_dim as f64).powf((q.recip() - p.recip()).min(0.0))
}

/// `e_n ≥ ratio·2^{−(n−1)/N²}`.
pub fn lower_from_volume(p: Exponent, q: Exponent, entropy_index: u64, n_dim: usize, vol_ratio_root: f64) -> Result<EntropyBound> {
    let _ = (p, q);
    if entropy_index == 0 || n_dim == 0 {
        return Err(LabError::invalid("entropy index and N must be at least 1"));
    }
    if !(vol_ratio_root > 0.0) || !vol_ratio_root.is_finite() {
        return Err(LabError::invalid(format!("volume ratio must be positive, got {vol_ratio_root}")));
    }
    let d = (n_dim * n_dim) as f64;
    let lower = vol_ratio_root * (-((entropy_index - 1) as f64) / d).exp2();
    Ok(EntropyBound::lower(entropy_index, lower, BoundMethod::Volume))
}

/// `e_n ≥ δ / 2^{1/q̄}` for the largest `n` with `2^{n−1} < packing_size`.
pub fn lower_from_packing(packing_size: u64, separation: f64, q: Exponent) -> Result<EntropyBound> {
    let n = packing_index(packing_size)?;
    if !(separation >= 0.0) {
        return Err(LabError::invalid(format!("separation must be non-negative, got {separation}")));
    }
    Ok(EntropyBound::lower(n, separation * (-1.0 / q.bar()).exp2(), BoundMethod::Packing))
}

/// `2^{1−n}`, the entropy numbers of `[−1, 1]` in itself.
pub fn oracle_dim1(entropy_index: u64) -> Result<f64> {
    if entropy_index == 0 {
        return Err(LabError::invalid("entropy index must be at least 1"));
    }
    Ok((1.0 - entropy_index as f64).exp2())
}

/// Upper bound from `2^{n−1}` equal intervals of `[−1, 1]`, radius measured from the centres.
pub fn dim1_grid_upper(entropy_index: u64) -> Result<EntropyBound> {
    if entropy_index == 0 || entropy_index > 40 {
        return Err(LabError::invalid("1-D grid index must lie in 1..=40"));
    }
    let m = 1u64 << (entropy_index - 1);
    let h = 2.0 / m as f64;
    let centre = |i: u64| -1.0 + h * (i as f64 + 0.5);
    let mut radius = (centre(0) + 1.0).max(1.0 - centre(m - 1));
    for i in 1..m {
        radius = radius.max(0.5 * (centre(i) - centre(i - 1)));
    }
    let mut b = upper_from_net(m, radius)?;
    b.method_upper = Some(BoundMethod::GridNet);
    Ok(b)
}

/// Greedy packing of scaled projections `k^{−1/p} P_E` in `S_q`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GrassmannPacking {
    pub n_dim: usize,
    pub k: usize,
    pub p: Exponent,
    pub q: Exponent,
    /// `c·k^{1/q−1/p}`.
    pub target: f64,
    pub size: usize,
    pub min_separation: f64,
    pub saturated: bool,
    pub stats: GreedyStats,
    pub bound: EntropyBound,
    #[serde(skip)]
    pub frames: Vec<Mat>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PackingConfig {
    pub c: f64,
    pub greedy: GreedyConfig,
}

impl Default for PackingConfig {
    fn default() -> Self {
        Self { c: 0.25, greedy: GreedyConfig::new(1.0).max_points(1024).max_proposals(200_000) }
    }
}

pub fn grassmann_packing_lower(n_dim: usize, k: usize, p: Exponent, q: Exponent, stream: StreamKey) -> Result<GrassmannPacking> {
    grassmann_packing_lower_with(n_dim, k, p, q, &PackingConfig::default(), stream)
}

pub fn grassmann_packing_lower_with(n_dim: usize, k: usize, p: Exponent, q: Exponent, config: &PackingConfig, stream: StreamKey) -> Result<GrassmannPacking> {
    if k == 0 || 2 * k > n_dim {
        return Err(LabError::invalid(format!("projection packing needs 1 <= k <= N/2, got k={k}, N={n_dim}")));
    }
    if q < Exponent::ONE {
        return Err(LabError::invalid("projection packing needs q >= 1"));
    }
    if !(config.c > 0.0) {
        return Err(LabError::invalid("packing constant must be positive"));
    }
    let kf = k as f64;
    let scale = kf.powf(-p.recip());
    let target = config.c * kf.powf(q.recip() - p.recip());
    // greedy runs in projection units; scaled distances are `scale` times these
    let greedy = GreedyConfig { delta: target / scale, ..config.greedy };
    let mut rng = stream.rng();
    let sampler = || haar_stiefel_with(&mut rng, n_dim, k).map(|s| s.u);
    let (frames, stats, saturated) = greedy_core(Vec::new(), sampler, |a: &Mat, b: &Mat| grassmann_distance(a, b, q), &greedy)?;
    if frames.len() < 2 {
        return Err(LabError::DegeneratePacking(frames.len()));
    }
    let min_separation = min_pairwise(&frames, |a, b| scale * grassmann_distance(a, b, q));
    if !(min_separation > target) {
        return Err(LabError::NumericFailure {
            what: format!("packing separation {min_separation} does not exceed target {target}"),
            rows: n_dim,
            cols: k,
            frobenius: f64::NAN,
            max_abs: f64::NAN,
        });
    }
    let mut bound = lower_from_packing(frames.len() as u64, min_separation, q)?;
    bound.method_lower = Some(BoundMethod::GrassmannPacking);
    Ok(GrassmannPacking { n_dim, k, p, q, target, size: frames.len(), min_separation, saturated, stats, bound, frames })
}

fn min_pairwise<T: Sync>(items: &[T], dist: impl Fn(&T, &T) -> f64 + Sync) -> f64 {
    (0..items.len())
        .into_par_iter()
        .map(|i| items[i + 1..].iter().map(|b| dist(&items[i], b)).fold(f64::INFINITY, f64::min))
        .reduce(|| f64::INFINITY, f64::min)
}

/// Best three lines in the plane over an angle grid of `steps` directions in `[0, π)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LineTriple {
    pub angles: [f64; 3],
    /// `min |sin(θ_a − θ_b)|`, the operator-norm distance of the projections.
    pub separation: f64,
    pub bound: EntropyBound,
}

pub fn line_triple_packing(steps: usize) -> Result<LineTriple> {
    if steps < 3 {
        return Err(LabError::invalid("angle grid needs at least 3 steps"));
    }
    let angle = |i: usize| std::f64::consts::PI * i as f64 / steps as f64;
    let d = |i: usize, j: usize| (angle(i) - angle(j)).sin().abs();
    let mut best = (0.0, [0usize; 3]);
    // rotating the plane fixes the first line at angle 0
    for b in 1..steps {
        for c in b + 1..steps {
            let s = d(0, b).min(d(0, c)).min(d(b, c));
            if s > best.0 {
                best = (s, [0, b, c]);
            }
        }
    }
    let idx = best.1;
    let frames: Vec<Mat> = idx.iter().map(|i| Mat::from_column_slice(2, 1, &[angle(*i).cos(), angle(*i).sin()])).collect();
    let separation = min_pairwise(&frames, |a, b| grassmann_distance(a, b, Exponent::INF));
    let mut bound = lower_from_packing(3, separation, Exponent::INF)?;
    bound.method_lower = Some(BoundMethod::GrassmannPacking);
    Ok(LineTriple { angles: idx.map(angle), separation, bound })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpperMethod {
    /// Product net when `p ≤ q`, greedy net otherwise.
    Auto,
    ProductNet,
    GreedyNet,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SandwichConfig {
    pub upper: UpperMethod,
    pub alpha: f64,
    pub c_q: f64,
    /// Quantizer audit probes per product-net row.
    pub audit_samples: usize,
    /// Projection ranks for packing lower bounds.
    pub grassmann_ranks: Vec<usize>,
    pub packing: PackingConfig,
    /// Overrides the containment bound on `(vol B_p / vol B_q)^{1/N²}`.
    pub volume_ratio_root: Option<f64>,
    /// Consecutive rejections that saturate a greedy upper net.
    pub greedy_budget: usize,
    pub greedy_max_points: usize,
}

impl Default for SandwichConfig {
    fn default() -> Self {
        Self {
            upper: UpperMethod::Auto,
            alpha: 1.0,
            c_q: 1.0,
            audit_samples: 200,
            grassmann_ranks: vec![1],
            packing: PackingConfig::default(),
            volume_ratio_root: None,
            greedy_budget: 2000,
            greedy_max_points: 1000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SandwichRow {
    pub level: usize,
    /// Index the upper bound is attributed to: `2^ℓ·N` for product nets, the covering index for greedy nets.
    pub n: u64,
    /// Covering index implied by the constructed net's size.
    pub certified_n: u64,
    /// `n' / n`.
    pub gamma: f64,
    /// Index at which the lower bound is evaluated, `max(n, n')`; it never exceeds `e_{n'}`.
    pub lower_index: u64,
    pub lower: f64,
    pub upper: f64,
    /// Running minimum of `upper` over rows with smaller `n`.
    pub upper_monotone: f64,
    pub theory: f64,
    pub ratio: f64,
    pub method_lower: BoundMethod,
    pub method_upper: BoundMethod,
    pub log2_cardinality: f64,
    pub audit: Option<CoverageAudit>,
    pub flags: Vec<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SandwichReport {
    pub p: Exponent,
    pub q: Exponent,
    pub n_dim: usize,
    pub stream: StreamKey,
    pub config: SandwichConfig,
    pub rows: Vec<SandwichRow>,
    pub packings: Vec<EntropyBound>,
}

impl SandwichReport {
    /// Fails on the first row where the lower bound exceeds the upper bound.
    pub fn check_sandwich(&self) -> Result<()> {
        for r in &self.rows {
            if r.lower > r.upper + BOUND_TOL {
                return Err(LabError::NumericFailure {
                    what: format!("sandwich violated at n={}: lower {} > upper {}", r.n, r.lower, r.upper),
                    rows: self.n_dim,
                    cols: self.n_dim,
                    frobenius: f64::NAN,
                    max_abs: f64::NAN,
                });
            }
        }
        Ok(())
    }

    /// Log-log slope of `upper` against `n` over rows with `N ≤ n ≤ N²`.
    pub fn middle_regime_slope(&self) -> Result<f64> {
        let (n, n2) = (self.n_dim as u64, (self.n_dim * self.n_dim) as u64);
        let rows: Vec<&SandwichRow> = self.rows.iter().filter(|r| r.n >= n && r.n <= n2 && r.level > 0).collect();
        let xs: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
        let ys: Vec<f64> = rows.iter().map(|r| r.upper).collect();
        Ok(crate::stats::loglog_fit(&xs, &ys)?.slope)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,lower,upper,theory,ratio\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{},{},{}\n", r.n, r.lower, r.upper, r.theory, r.ratio));
        }
        out
    }
}

fn resolve_upper(config: &SandwichConfig, p: Exponent, q: Exponent) -> Result<UpperMethod> {
    match config.upper {
        UpperMethod::Auto => Ok(if p <= q { UpperMethod::ProductNet } else { UpperMethod::GreedyNet }),
        UpperMethod::ProductNet if p > q => Err(LabError::invalid("product-net uppers need p <= q")),
        m => Ok(m),
    }
}

struct UpperRow {
    level: usize,
    n: u64,
    certified_n: u64,
    upper: f64,
    method: BoundMethod,
    log2_cardinality: f64,
    audit: Option<CoverageAudit>,
    packing: Option<EntropyBound>,
    flags: Vec<String>,
}

fn product_upper(p: Exponent, q: Exponent, n_dim: usize, level: usize, config: &SandwichConfig, stream: StreamKey) -> Result<UpperRow> {
    let params = ProductNetParams { n_dim, p, q, levels: level, alpha: config.alpha, c_q: config.c_q };
    let net = schatten_net_build(params, stream.named("net"))?;
    let mut flags = Vec::new();
    let audit = if config.audit_samples > 0 {
        let spec = BallSpec::new(n_dim, p)?;
        let half = config.audit_samples / 2;
        let mut probes = sample_many(spec, SamplingMode::Spectral, config.audit_samples - half, stream.named("probes_spectral"))?;
        probes.extend(sample_many(spec, SamplingMode::LowRank, half, stream.named("probes_low_rank"))?);
        let audit = net.audit(&probes)?;
        if audit.violations > 0 {
            flags.push(format!("audit_violations={}", audit.violations));
        }
        Some(audit)
    } else {
        None
    };
    let certified_n = covering_index(net.log2_cardinality);
    if certified_n > params.nominal_index() {
        flags.push("certified_index_exceeds_nominal".into());
    }
    Ok(UpperRow {
        level,
        n: params.nominal_index(),
        certified_n,
        upper: net.error_budget,
        method: BoundMethod::ProductNet,
        log2_cardinality: net.log2_cardinality,
        audit,
        packing: None,
        flags,
    })
}

fn greedy_upper(p: Exponent, q: Exponent, n_dim: usize, level: usize, config: &SandwichConfig, stream: StreamKey) -> Result<UpperRow> {
    let spec = BallSpec::new(n_dim, p)?;
    let mode = if n_dim <= MAX_REJECTION_DIM { SamplingMode::Rejection } else { SamplingMode::Spectral };
    let sampler = BallSampler::new(spec, mode)?;
    let diameter = (n_dim as f64).powf((q.recip() - p.recip()).max(0.0));
    let delta = diameter * (-(level as f64) / 2.0).exp2();
    let greedy = GreedyConfig::new(delta).budget(config.greedy_budget).max_points(config.greedy_max_points);
    let mut rng = stream.named("greedy").rng();
    let mut stats = RejectionStats::default();
    let net = greedy_separated_set(|| sampler.sample(&mut rng, &mut stats), MetricSpec::Schatten { q }, &greedy)?;
    net.assert_separated()?;
    let mut flags = vec!["empirical_covering".to_string()];
    if !net.saturated {
        flags.push("unsaturated".into());
    }
    let packing = if net.len() >= 2 { Some(lower_from_packing(net.len() as u64, net.separation, q)?) } else { None };
    let certified_n = covering_index(net.log2_cardinality());
    Ok(UpperRow {
        level,
        n: certified_n,
        certified_n,
        upper: delta,
        method: BoundMethod::GreedyNet,
        log2_cardinality: net.log2_cardinality(),
        audit: None,
        packing,
        flags,
    })
}

/// Upper bounds from nets and lower bounds from volume and packings, one row per level.
pub fn sandwich_report(p: Exponent, q: Exponent, n_dim: usize, levels: &[usize], stream: StreamKey) -> Result<SandwichReport> {
    sandwich_report_with(p, q, n_dim, levels, &SandwichConfig::default(), stream)
}

pub fn sandwich_report_with(p: Exponent, q: Exponent, n_dim: usize, levels: &[usize], config: &SandwichConfig, stream: StreamKey) -> Result<SandwichReport> {
    if n_dim == 0 || levels.is_empty() {
        return Err(LabError::invalid("sandwich report needs N >= 1 and at least one level"));
    }
    let method = resolve_upper(config, p, q)?;
    let uppers: Result<Vec<UpperRow>> = levels
        .par_iter()
        .map(|&l| {
            let key = stream.child(l as u64);
            match method {
                UpperMethod::GreedyNet => greedy_upper(p, q, n_dim, l, config, key),
                _ => product_upper(p, q, n_dim, l, config, key),
            }
            .map_err(|e| e.at_level(l))
        })
        .collect();
    let mut uppers = uppers?;
    uppers.sort_by_key(|u| (u.n, u.level));

    let mut packings: Vec<EntropyBound> = uppers.iter().filter_map(|u| u.packing).collect();
    let max_row = uppers.iter().map(|u| u.n.max(u.certified_n)).min().unwrap_or(1);
    if q >= Exponent::ONE {
        for &k in &config.grassmann_ranks {
            if k == 0 || 2 * k > n_dim {
                continue;
            }
            // a packing only helps rows with index below its own
            let best_possible = packing_index(config.packing.greedy.max_points.max(2) as u64)?;
            if best_possible < max_row {
                continue;
            }
            match grassmann_packing_lower_with(n_dim, k, p, q, &config.packing, stream.named("grassmann").child(k as u64)) {
                Ok(g) => packings.push(g.bound),
                Err(LabError::DegeneratePacking(_)) => {}
                Err(e) => return Err(e),
            }
        }
    }

    let ratio_root = config.volume_ratio_root.unwrap_or_else(|| containment_ratio_root(p, q, n_dim));
    let mut rows = Vec::with_capacity(uppers.len());
    let mut running = f64::INFINITY;
    for u in uppers {
        let m = u.n.max(u.certified_n);
        let vol = lower_from_volume(p, q, m, n_dim, ratio_root)?;
        let pack = packings.iter().filter(|b| b.entropy_index >= m).map(|b| b.lower).fold(0.0, f64::max);
        let (lower, method_lower) = if pack > vol.lower { (pack, BoundMethod::Packing) } else { (vol.lower, BoundMethod::Volume) };
        running = running.min(u.upper);
        let theory = theory_rate(&RateQuery::new(p, q, u.n, n_dim as u64)?);
        rows.push(SandwichRow {
            level: u.level,
            n: u.n,
            certified_n: u.certified_n,
            gamma: u.certified_n as f64 / u.n as f64,
            lower_index: m,
            lower,
            upper: u.upper,
            upper_monotone: running,
            theory,
            ratio: u.upper / lower,
            method_lower,
            method_upper: u.method,
            log2_cardinality: u.log2_cardinality,
            audit: u.audit,
            flags: u.flags,
        });
    }
    let report = SandwichReport { p, q, n_dim, stream, config: config.clone(), rows, packings };
    report.check_sandwich()?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn covering_and_packing_indices() {
        assert_eq!(upper_from_net(8, 0.2).unwrap().entropy_index, 4);
        assert_eq!(upper_from_net(8, 0.2).unwrap().upper, Some(0.2));
        assert_eq!(upper_from_net(1, 1.0).unwrap().entropy_index, 1);
        // five balls need 2^{n-1} >= 5
        assert_eq!(upper_from_net(5, 0.1).unwrap().entropy_index, 4);
        assert!(upper_from_net(0, 0.1).is_err());
        assert_eq!(covering_index(3.0000000001), 4);
        assert_eq!(packing_index(5).unwrap(), 3);
        assert_eq!(packing_index(2).unwrap(), 1);
        assert_eq!(packing_index(9).unwrap(), 4);
    }

    #[test]
    fn packing_examples() {
        let b = lower_from_packing(5, 0.4, Exponent::ONE).unwrap();
        assert_eq!((b.entropy_index, b.lower), (3, 0.2));
        let b = lower_from_packing(2, 2.0, Exponent::INF).unwrap();
        assert_eq!((b.entropy_index, b.lower), (1, 1.0));
        let b = lower_from_packing(5, 0.4, Exponent::of(0.5)).unwrap();
        assert!((b.lower - 0.1).abs() < 1e-15);
        assert!(lower_from_packing(1, 0.4, Exponent::ONE).unwrap_err().is_invalid_input());
    }

    #[test]
    fn volume_examples() {
        for n in 1..=20 {
            let b = lower_from_volume(Exponent::ONE, Exponent::INF, n, 1, 1.0).unwrap();
            assert_eq!(b.lower, oracle_dim1(n).unwrap());
        }
        let b = lower_from_volume(Exponent::TWO, Exponent::TWO, 5, 2, 1.0).unwrap();
        assert_eq!(b.lower, 0.5);
        assert_eq!(containment_ratio_root(Exponent::ONE, Exponent::TWO, 4), 0.5);
        assert_eq!(containment_ratio_root(Exponent::TWO, Exponent::ONE, 4), 1.0);
    }

    #[test]
    fn oracle_examples() {
        assert_eq!(oracle_dim1(1).unwrap(), 1.0);
        assert_eq!(oracle_dim1(4).unwrap(), 0.125);
        assert!(oracle_dim1(0).is_err());
        for n in 1..=20 {
            let g = dim1_grid_upper(n).unwrap();
            assert_eq!(g.entropy_index, n);
            assert!((g.upper.unwrap() - oracle_dim1(n).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn line_triple_reproduces_sixty_degrees() {
        let t = line_triple_packing(180).unwrap();
        assert!((t.separation - 60f64.to_radians().sin()).abs() < 1e-12);
        assert_eq!(t.bound.entropy_index, 2);
        assert!((t.bound.lower - 0.433).abs() < 1e-3);
    }

    #[test]
    fn greedy_line_packing_is_separated() {
        let g = grassmann_packing_lower(2, 1, Exponent::INF, Exponent::INF, StreamKey::new(5, 0)).unwrap();
        assert!(g.min_separation > g.target);
        for (i, a) in g.frames.iter().enumerate() {
            for b in &g.frames[i + 1..] {
                assert!(grassmann_distance(a, b, Exponent::INF) > g.target);
            }
        }
        assert!(g.bound.lower > 0.0);
    }

    #[test]
    fn small_product_sandwich() {
        let r = sandwich_report(Exponent::ONE, Exponent::TWO, 4, &[0, 1, 2], StreamKey::new(6, 0)).unwrap();
        assert_eq!(r.rows.len(), 3);
        for row in &r.rows {
            assert!(row.lower <= row.upper && row.ratio.is_finite());
            assert!(row.audit.as_ref().unwrap().violations == 0);
        }
        assert!(r.to_csv().starts_with("n,lower,upper,theory,ratio\n4,"));
    }

    #[test]
    fn greedy_sandwich_for_two_by_two() {
        let cfg = SandwichConfig { upper: UpperMethod::GreedyNet, ..Default::default() };
        let r = sandwich_report_with(Exponent::TWO, Exponent::TWO, 2, &[1, 2], &cfg, StreamKey::new(7, 0)).unwrap();
        for row in &r.rows {
            assert!(row.lower <= row.upper);
            assert_eq!(row.method_upper, BoundMethod::GreedyNet);
        }
    }
}
