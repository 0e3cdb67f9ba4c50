//! Versioned JSON files for nets.
//!
//! An explicit net is one file with row-major point data. A product net is an
//! index file plus one file per level; level files describe their frame and
//! spectrum components and point to an explicit frame-net file when there is one.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::greedy::GreedyStats;
use super::low_rank::{FrameNet, LowRankBallSpec, LowRankNet};
use super::lq_grid::GridNet;
use super::product::{ProductNet, ProductNetParams};
use super::stiefel::LatticeStiefel;
use super::{MetricSpec, NetExplicit};
use crate::error::{LabError, Result};
use crate::schatten::Mat;

pub const FORMAT_VERSION: u32 = 1;

fn io_err(path: &Path, e: impl std::fmt::Display) -> LabError {
    LabError::Io(format!("{}: {e}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| io_err(path, e))?;
    fs::write(path, text + "\n").map_err(|e| io_err(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| io_err(path, e))
}

fn expect_header(path: &Path, kind: &str, found: &str, version: u32) -> Result<()> {
    if found != kind {
        return Err(io_err(path, format!("expected a '{kind}' file, found '{found}'")));
    }
    if version != FORMAT_VERSION {
        return Err(io_err(path, format!("unsupported format version {version}")));
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct NetFile {
    #[serde(rename = "type")]
    kind: String,
    version: u32,
    metric: MetricSpec,
    radius: f64,
    separation: f64,
    saturated: bool,
    #[serde(default)]
    stats: GreedyStats,
    rows: usize,
    cols: usize,
    points: Vec<Vec<f64>>,
}

fn row_major(m: &Mat) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        out.extend(m.row(i).iter());
    }
    out
}

pub fn net_to_json(net: &NetExplicit) -> Result<String> {
    let (rows, cols) = net.points.first().map_or((0, 0), |p| (p.nrows(), p.ncols()));
    let file = NetFile {
        kind: "net".into(),
        version: FORMAT_VERSION,
        metric: net.metric,
        // infinite separation (single-point nets) has no JSON number
        radius: net.radius,
        separation: if net.separation.is_finite() { net.separation } else { 0.0 },
        saturated: net.saturated,
        stats: net.stats,
        rows,
        cols,
        points: net.points.iter().map(row_major).collect(),
    };
    serde_json::to_string(&file).map_err(|e| LabError::Io(e.to_string()))
}

pub fn net_from_json(text: &str) -> Result<NetExplicit> {
    let file: NetFile = serde_json::from_str(text).map_err(|e| LabError::Io(e.to_string()))?;
    expect_header(Path::new("<net>"), "net", &file.kind, file.version)?;
    let mut points = Vec::with_capacity(file.points.len());
    for p in &file.points {
        if p.len() != file.rows * file.cols {
            return Err(LabError::Io(format!("point has {} entries, expected {}x{}", p.len(), file.rows, file.cols)));
        }
        points.push(Mat::from_row_slice(file.rows, file.cols, p));
    }
    Ok(NetExplicit {
        points,
        radius: file.radius,
        separation: file.separation,
        metric: file.metric,
        saturated: file.saturated,
        stats: file.stats,
    })
}

pub fn write_net(path: &Path, net: &NetExplicit) -> Result<()> {
    fs::write(path, net_to_json(net)? + "\n").map_err(|e| io_err(path, e))
}

pub fn read_net(path: &Path) -> Result<NetExplicit> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    net_from_json(&text).map_err(|e| io_err(path, e))
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum FrameRecord {
    Lattice(LatticeStiefel),
    Explicit { file: String },
}

#[derive(Serialize, Deserialize)]
struct LevelFile {
    #[serde(rename = "type")]
    kind: String,
    version: u32,
    level: usize,
    spec: LowRankBallSpec,
    eps: f64,
    frame_radius: f64,
    sigma_radius: f64,
    log2_cardinality: f64,
    sigma: Option<GridNet>,
    frames: Option<FrameRecord>,
}

#[derive(Serialize, Deserialize)]
struct LevelRef {
    level: usize,
    file: String,
}

#[derive(Serialize, Deserialize)]
struct ProductFile {
    #[serde(rename = "type")]
    kind: String,
    version: u32,
    params: ProductNetParams,
    error_budget: f64,
    log2_cardinality: f64,
    level_radii: Vec<f64>,
    level_scales: Vec<f64>,
    levels: Vec<LevelRef>,
}

/// Write `<dir>/<stem>.json` and one file per level; returns the index path.
pub fn write_product_net(dir: &Path, stem: &str, net: &ProductNet) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut levels = Vec::new();
    for (i, lnet) in net.level_nets.iter().enumerate() {
        let j = i + 1;
        let level_name = format!("{stem}_level{j}.json");
        let frames = match &lnet.frames {
            None => None,
            Some(FrameNet::Lattice(l)) => Some(FrameRecord::Lattice(*l)),
            Some(FrameNet::Explicit(e)) => {
                let name = format!("{stem}_level{j}_frames.json");
                write_net(&dir.join(&name), e)?;
                Some(FrameRecord::Explicit { file: name })
            }
        };
        let record = LevelFile {
            kind: "low_rank_net".into(),
            version: FORMAT_VERSION,
            level: j,
            spec: lnet.spec,
            eps: lnet.eps,
            frame_radius: lnet.frame_radius,
            sigma_radius: lnet.sigma_radius,
            log2_cardinality: lnet.log2_cardinality,
            sigma: lnet.sigma,
            frames,
        };
        write_json(&dir.join(&level_name), &record)?;
        levels.push(LevelRef { level: j, file: level_name });
    }
    let index = ProductFile {
        kind: "product_net".into(),
        version: FORMAT_VERSION,
        params: net.params,
        error_budget: net.error_budget,
        log2_cardinality: net.log2_cardinality,
        level_radii: net.level_radii.clone(),
        level_scales: net.level_scales.clone(),
        levels,
    };
    let path = dir.join(format!("{stem}.json"));
    write_json(&path, &index)?;
    Ok(path)
}

pub fn read_product_net(path: &Path) -> Result<ProductNet> {
    let index: ProductFile = read_json(path)?;
    expect_header(path, "product_net", &index.kind, index.version)?;
    index.params.validate()?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut level_nets = Vec::new();
    for r in &index.levels {
        let lpath = dir.join(&r.file);
        let rec: LevelFile = read_json(&lpath)?;
        expect_header(&lpath, "low_rank_net", &rec.kind, rec.version)?;
        let frames = match rec.frames {
            None => None,
            Some(FrameRecord::Lattice(l)) => Some(FrameNet::Lattice(l)),
            Some(FrameRecord::Explicit { file }) => Some(FrameNet::Explicit(read_net(&dir.join(file))?)),
        };
        level_nets.push(LowRankNet {
            spec: rec.spec,
            eps: rec.eps,
            frame_radius: rec.frame_radius,
            sigma_radius: rec.sigma_radius,
            sigma: rec.sigma,
            frames,
            log2_cardinality: rec.log2_cardinality,
        });
    }
    if level_nets.len() != index.params.levels {
        return Err(io_err(path, "level count does not match params"));
    }
    Ok(ProductNet {
        params: index.params,
        level_nets,
        level_scales: index.level_scales,
        level_radii: index.level_radii,
        error_budget: index.error_budget,
        log2_cardinality: index.log2_cardinality,
    })
}
