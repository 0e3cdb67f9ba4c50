use std::collections::BTreeSet;
use std::path::PathBuf;

use schatten_lab::entropy::{grassmann_packing_lower, sandwich_report_with, SandwichConfig};
use schatten_lab::error::LabError;
use schatten_lab::nets::io::{read_product_net, write_product_net};
use schatten_lab::nets::{schatten_net_build, ProductNet, ProductNetParams};
use schatten_lab::recovery::{em_experiment_with, EmConfig};
use schatten_lab::sampling::{sample_many, SamplingMode, StreamKey, MAX_REJECTION_DIM};
use schatten_lab::schatten::{theory_rate, BallSpec, Exponent, RateQuery};
use schatten_lab::volumes::{grassmann_ball_measure_mc, schatten_ball_volume_mc, volume_scaling_fit};
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::params::*;
use crate::Failure;

/// What a command hands back to the report writer.
pub struct Outcome {
    pub params: Value,
    pub results: Map<String, Value>,
    pub provenance: Value,
    pub csv: String,
    pub summary: String,
}

fn to_map<T: Serialize>(v: &T) -> Map<String, Value> {
    match serde_json::to_value(v) {
        Ok(Value::Object(m)) => m,
        _ => Map::new(),
    }
}

fn echo<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

fn regime(p: Exponent, q: Exponent, n: u64, n_dim: u64) -> &'static str {
    if q <= p {
        "exponential"
    } else if n <= n_dim {
        "plateau"
    } else if n <= n_dim * n_dim {
        "middle"
    } else {
        "tail"
    }
}

pub fn rate(flags: &RateParams, file: Map<String, Value>) -> Result<Outcome, Failure> {
    let prm = resolve(flags, file)?;
    let (p, q) = (need(prm.p, "p")?, need(prm.q, "q")?);
    let (n_dim, n) = (need(prm.n_dim, "N")?, need(prm.index, "n")?);
    let rate = theory_rate(&RateQuery::new(p, q, n, n_dim)?);
    let regime = regime(p, q, n, n_dim);
    let mut results = Map::new();
    results.insert("rate".into(), json!(rate));
    results.insert("regime".into(), json!(regime));
    Ok(Outcome {
        params: echo(&prm),
        results,
        provenance: json!({ "rate": format!("closed_form:{regime}") }),
        csv: format!("p,q,N,n,rate\n{p},{q},{n_dim},{n},{rate}\n"),
        summary: format!("rate p={p} q={q} N={n_dim} n={n}: {rate} ({regime})"),
    })
}

pub fn volume(flags: &VolumeParams, file: Map<String, Value>, seed: u64) -> Result<Outcome, Failure> {
    let mut prm = resolve(flags, file)?;
    prm.samples.get_or_insert(1_000_000);
    let p = need(prm.p, "p")?;
    let sizes = need(prm.n_dims.clone(), "N")?;
    let samples = prm.samples.unwrap_or_default();
    let key = StreamKey::new(seed, 0);
    let mut results = Map::new();
    let estimates = if sizes.len() == 1 {
        let est = schatten_ball_volume_mc(BallSpec::new(sizes[0], p)?, samples, key.child(sizes[0] as u64))?;
        vec![est]
    } else {
        let fit = volume_scaling_fit(p, &sizes, samples, key)?;
        results.insert("fit".into(), echo(&fit.fit));
        results.insert("reference_slope".into(), json!(fit.reference_slope));
        fit.estimates
    };
    let mut csv = String::from("N,value,std_error,n_samples,accepted,method\n");
    for e in &estimates {
        csv.push_str(&format!("{},{},{},{},{},{}\n", e.n_dim, e.value, e.std_error, e.n_samples, e.accepted, echo(&e.method).as_str().unwrap_or("")));
    }
    let methods: BTreeSet<String> = estimates.iter().map(|e| echo(&e.method).as_str().unwrap_or("").to_string()).collect();
    let summary = match results.get("fit") {
        Some(fit) => format!("volume p={p} N={sizes:?}: slope {} (reference {})", fit["slope"], results["reference_slope"]),
        None => format!("volume p={p} N={}: vol^(1/N^2) = {} ± {}", sizes[0], estimates[0].value, estimates[0].std_error),
    };
    results.insert("estimates".into(), echo(&estimates));
    Ok(Outcome { params: echo(&prm), results, provenance: json!({ "volume": methods }), csv, summary })
}

pub fn grassmann(flags: &GrassmannParams, file: Map<String, Value>, seed: u64) -> Result<Outcome, Failure> {
    let mut prm = resolve(flags, file)?;
    prm.k.get_or_insert(1);
    prm.q.get_or_insert(Exponent::TWO);
    prm.samples.get_or_insert(100_000);
    let n_dim = need(prm.n_dim, "N")?;
    let deltas = need(prm.delta_grid.clone(), "delta_grid")?;
    let (k, q, samples) = (prm.k.unwrap_or(1), prm.q.unwrap_or(Exponent::TWO), prm.samples.unwrap_or_default());
    let key = StreamKey::new(seed, 0);
    let measure = grassmann_ball_measure_mc(n_dim, k, q, &deltas, samples, key.named("measure"))?;
    let mut results = to_map(&measure);
    let mut provenance = json!({ "measure": "monte_carlo" });
    let reference = (k * (n_dim - k)) as f64;
    results.insert("reference_exponent".into(), json!(reference));
    let fit = measure.exponent_fit().ok();
    results.insert("exponent_fit".into(), echo(&fit));
    if let Some(p) = prm.p {
        let packing = grassmann_packing_lower(n_dim, k, p, q, key.named("packing"))?;
        results.insert("packing".into(), echo(&packing));
        provenance["packing"] = json!("greedy_haar_projections");
    }
    let mut csv = String::from("delta,probability,std_error,hits,widened_ci\n");
    for m in &measure.points {
        csv.push_str(&format!("{},{},{},{},{}\n", m.delta, m.probability, m.std_error, m.hits, m.widened_ci));
    }
    let slope = fit.map(|f| f.slope.to_string()).unwrap_or_else(|| "n/a".into());
    let summary = format!("grassmann N={n_dim} k={k} q={q}: exponent {slope} (reference {reference})");
    Ok(Outcome { params: echo(&prm), results, provenance, csv, summary })
}

fn net_params(prm: &NetParams) -> Result<ProductNetParams, Failure> {
    let mut params = ProductNetParams::new(need(prm.n_dim, "N")?, need(prm.p, "p")?, need(prm.q, "q")?, need(prm.levels, "levels")?);
    if let Some(a) = prm.alpha {
        params.alpha = a;
    }
    if let Some(c) = prm.cq {
        params.c_q = c;
    }
    params.validate()?;
    Ok(params)
}

fn net_summary(net: &ProductNet) -> (Map<String, Value>, String) {
    let mut results = Map::new();
    results.insert("net_params".into(), echo(&net.params));
    results.insert("error_budget".into(), json!(net.error_budget));
    results.insert("log2_cardinality".into(), json!(net.log2_cardinality));
    results.insert("nominal_index".into(), json!(net.params.nominal_index()));
    results.insert("cardinality_budget".into(), json!(net.params.cardinality_budget()));
    let mut csv = String::from("level,radius,scale,log2_cardinality\n");
    let mut levels = Vec::new();
    for (i, l) in net.level_nets.iter().enumerate() {
        let (r, s) = (net.level_radii[i], net.level_scales[i]);
        csv.push_str(&format!("{},{},{},{}\n", i + 1, r, s, l.log2_cardinality));
        levels.push(json!({ "level": i + 1, "radius": r, "scale": s, "log2_cardinality": l.log2_cardinality }));
    }
    results.insert("levels".into(), Value::Array(levels));
    (results, csv)
}

pub fn net_build(flags: &NetParams, file: Map<String, Value>, seed: u64) -> Result<Outcome, Failure> {
    let mut prm = resolve(flags, file)?;
    prm.net_dir.get_or_insert(PathBuf::from("net"));
    let params = net_params(&prm)?;
    let net = schatten_net_build(params, StreamKey::new(seed, 0).named("net"))?;
    let dir = prm.net_dir.clone().unwrap_or_default();
    let index = write_product_net(&dir, "net", &net)?;
    let (mut results, csv) = net_summary(&net);
    results.insert("index_file".into(), json!(index.display().to_string()));
    let summary = format!(
        "net-build N={} levels={}: log2|net| = {}, error budget {}, index {}",
        params.n_dim,
        params.levels,
        net.log2_cardinality,
        net.error_budget,
        index.display()
    );
    Ok(Outcome { params: echo(&prm), results, provenance: json!({ "frames": "lattice", "spectra": "lq_grid" }), csv, summary })
}

pub fn net_audit(flags: &NetParams, file: Map<String, Value>, seed: u64) -> Result<Outcome, Failure> {
    let mut prm = resolve(flags, file)?;
    prm.samples.get_or_insert(1000);
    let key = StreamKey::new(seed, 0);
    let net = match &prm.net {
        Some(path) => read_product_net(path)?,
        None => schatten_net_build(net_params(&prm)?, key.named("net"))?,
    };
    let count = prm.samples.unwrap_or_default();
    if count == 0 {
        return Err(Failure::Invalid("samples must be positive".into()));
    }
    let spec = BallSpec::new(net.params.n_dim, net.params.p)?;
    let third = count / 3;
    let mut probes = sample_many(spec, SamplingMode::LowRank, third, key.named("low_rank"))?;
    if spec.n_dim <= MAX_REJECTION_DIM {
        probes.extend(sample_many(spec, SamplingMode::Rejection, third, key.named("uniform"))?);
    }
    probes.extend(sample_many(spec, SamplingMode::Spectral, count - probes.len(), key.named("spectral"))?);
    let audit = net.audit(&probes)?;
    let (mut results, _) = net_summary(&net);
    results.insert("audit".into(), echo(&audit));
    results.insert("covered".into(), json!(audit.violations == 0));
    let csv = format!(
        "probes,violations,max_distance,mean_distance,error_budget\n{},{},{},{},{}\n",
        audit.probes, audit.violations, audit.max_distance, audit.mean_distance, net.error_budget
    );
    let summary = format!(
        "net-audit N={}: {}/{} probes within {} (max distance {})",
        net.params.n_dim,
        audit.probes - audit.violations,
        audit.probes,
        net.error_budget,
        audit.max_distance
    );
    let provenance = json!({ "probes": ["low_rank", "rejection", "spectral"], "net": if prm.net.is_some() { "file" } else { "rebuilt" } });
    Ok(Outcome { params: echo(&prm), results, provenance, csv, summary })
}

pub fn sandwich(flags: &SandwichParams, file: Map<String, Value>, seed: u64) -> Result<Outcome, Failure> {
    let mut prm = resolve(flags, file)?;
    let mut cfg = prm.settings.clone().unwrap_or_else(SandwichConfig::default);
    if let Some(a) = prm.alpha {
        cfg.alpha = a;
    }
    if let Some(c) = prm.cq {
        cfg.c_q = c;
    }
    prm.settings = Some(cfg.clone());
    let (p, q, n_dim) = (need(prm.p, "p")?, need(prm.q, "q")?, need(prm.n_dim, "N")?);
    let levels = need(prm.levels.clone(), "levels")?;
    let report = sandwich_report_with(p, q, n_dim, &levels, &cfg, StreamKey::new(seed, 0))?;
    report.check_sandwich()?;
    let slope = report.middle_regime_slope().ok();
    let mut results = to_map(&report);
    results.remove("config");
    results.insert("middle_regime_slope".into(), echo(&slope));
    let lower: BTreeSet<String> = report.rows.iter().map(|r| echo(&r.method_lower).as_str().unwrap_or("").to_string()).collect();
    let upper: BTreeSet<String> = report.rows.iter().map(|r| echo(&r.method_upper).as_str().unwrap_or("").to_string()).collect();
    let worst = report.rows.iter().map(|r| r.ratio).fold(f64::NAN, f64::max);
    let summary = format!("sandwich p={p} q={q} N={n_dim}: {} rows, max upper/lower {worst}, middle slope {}", report.rows.len(), slope.map_or("n/a".into(), |s| s.to_string()));
    Ok(Outcome { params: echo(&prm), results, provenance: json!({ "lower": lower, "upper": upper }), csv: report.to_csv(), summary })
}

pub fn recovery(flags: &RecoveryParams, file: Map<String, Value>, seed: u64) -> Result<Outcome, Failure> {
    let mut prm = resolve(flags, file)?;
    prm.p.get_or_insert(Exponent::ONE);
    prm.q.get_or_insert(Exponent::TWO);
    prm.trials.get_or_insert(20);
    let cfg = prm.settings.clone().unwrap_or_else(EmConfig::default);
    prm.settings = Some(cfg.clone());
    let n_dim = need(prm.n_dim, "N")?;
    let grid = need(prm.m_grid.clone(), "m_grid")?;
    let (p, q, trials) = (prm.p.unwrap_or(Exponent::ONE), prm.q.unwrap_or(Exponent::TWO), prm.trials.unwrap_or(1));
    let report = em_experiment_with(n_dim, &grid, p, q, trials, &cfg, StreamKey::new(seed, 0))?;
    let mut results = to_map(&report);
    results.remove("config");
    results.insert("rows_below_theory_lower".into(), json!(report.inconsistent_rows(1.0)));
    let sensors: BTreeSet<String> = report.rows.iter().map(|r| echo(&r.sensors).as_str().unwrap_or("").to_string()).collect();
    let summary = format!("recovery N={n_dim} p={p} q={q}: {} grid points, spearman {}", report.rows.len(), report.spearman);
    Ok(Outcome { params: echo(&prm), results, provenance: json!({ "sensors": sensors, "decoder": "iht" }), csv: report.to_csv(), summary })
}

impl From<LabError> for Failure {
    fn from(e: LabError) -> Self {
        if e.is_invalid_input() {
            Failure::Invalid(e.to_string())
        } else {
            Failure::Numeric(e.to_string())
        }
    }
}
