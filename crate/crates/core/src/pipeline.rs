//! End-to-end runs, batches of edge-list files, and Monte Carlo experiments.
//!
//! A run is fully determined by its [`PipelineConfig`]. The master seed is
//! split into independent streams for the latent positions, the graph, the
//! clique search and the bootstrap, and the resolved values are echoed in
//! the report.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cliques::{select_cliques, CliqueSet, SelectOptions};
use crate::curvature::CurvatureOptions;
use crate::distance::{estimate_d, estimate_e_nu, estimate_p, DistanceMatrix, ENuEstimate};
use crate::error::{Error, Result};
use crate::geometry::GeometryKind;
use crate::graph::{load_edge_list, Graph, Indexing};
use crate::linalg::SymMatrix;
use crate::netgen::{sample_graph, sample_latent, SimConfig};
use crate::seeds;
use crate::testing::{
    bootstrap_distance, classify_distances, dimension_for, test_with_bootstrap, BootstrapConfig, Classification,
    ClassifyOptions, GeometryReport,
};

pub const ARTIFACT_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

const STREAM_LATENT: u64 = 1;
const STREAM_GRAPH: u64 = 2;
const STREAM_CLIQUES: u64 = 3;
const STREAM_BOOT: u64 = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphSource {
    Input {
        path: PathBuf,
        #[serde(default)]
        indexing: Indexing,
    },
    Simulate(SimConfig),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    #[default]
    Json,
    Csv,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(Error::invalid(format!("unknown report format '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub source: GraphSource,
    pub k: usize,
    pub ell: usize,
    /// Almost-clique threshold; `None` means `ell - 1`.
    #[serde(default)]
    pub t: Option<usize>,
    pub select: SelectOptions,
    pub bootstrap: BootstrapConfig,
    pub curvature: CurvatureOptions,
    #[serde(default)]
    pub dimension_floor: bool,
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub format: ReportFormat,
    /// Adds wall-clock stage timings to the report, which then no longer
    /// compares equal across reruns.
    #[serde(default)]
    pub record_timing: bool,
}

impl PipelineConfig {
    pub fn new(source: GraphSource, k: usize, ell: usize, seed: u64) -> Self {
        PipelineConfig {
            source,
            k,
            ell,
            t: None,
            select: SelectOptions::default(),
            bootstrap: BootstrapConfig::default(),
            curvature: CurvatureOptions::default(),
            dimension_floor: false,
            seed,
            output: None,
            format: ReportFormat::Json,
            record_timing: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 3 || self.ell < 2 {
            return Err(Error::invalid(format!("need K >= 3 and ell >= 2, got K={} ell={}", self.k, self.ell)));
        }
        if let Some(t) = self.t {
            if t == 0 || t >= self.ell {
                return Err(Error::invalid(format!("need 1 <= t < ell, got t={t} ell={}", self.ell)));
            }
        }
        if let GraphSource::Simulate(sim) = &self.source {
            sim.validate()?;
        }
        self.bootstrap.validate(self.ell)
    }

    /// The configuration actually executed: `t` filled in and the
    /// simulation and bootstrap seeds derived from the master seed.
    pub fn resolved(&self) -> Self {
        let mut cfg = self.clone();
        cfg.t = Some(self.t.unwrap_or((self.ell - 1).max(1)));
        cfg.bootstrap.seed = seeds::derive(self.seed, STREAM_BOOT);
        if let GraphSource::Simulate(sim) = &mut cfg.source {
            sim.seed = seeds::derive(self.seed, STREAM_LATENT);
        }
        cfg
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphSummary {
    pub nodes: usize,
    pub edges: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CliqueSummary {
    pub k: usize,
    pub ell: usize,
    pub overlap_score: usize,
    pub cliques: Vec<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<Vec<String>>>,
}

impl CliqueSummary {
    fn new(g: &Graph, cs: &CliqueSet) -> Self {
        CliqueSummary {
            k: cs.k(),
            ell: cs.ell,
            overlap_score: cs.overlap_score,
            cliques: cs.cliques.clone(),
            labels: g
                .labels()
                .map(|l| cs.cliques.iter().map(|c| c.iter().map(|&v| l[v].clone()).collect()).collect()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub artifact_version: String,
    pub seed: u64,
    pub config: PipelineConfig,
    pub graph: GraphSummary,
    pub cliques: CliqueSummary,
    pub p_hat: SymMatrix,
    pub floored_pairs: usize,
    pub e_nu: ENuEstimate,
    pub distances: DistanceMatrix,
    pub geometry: GeometryReport,
    /// Milliseconds per stage, only with `record_timing`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<BTreeMap<String, f64>>,
}

const SUMMARY_HEADER: &str =
    "nodes,edges,k,ell,classification,p_euclidean,p_spherical,p_hyperbolic,kappa_spherical,kappa_hyperbolic,r_hat,p_hat";

fn opt_csv<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    fn summary_fields(&self) -> String {
        let pv = |k: GeometryKind| self.geometry.tests.iter().find(|t| t.geometry == k).map(|t| t.p_value);
        let dim = self.geometry.dimension.as_ref();
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.graph.nodes,
            self.graph.edges,
            self.cliques.k,
            self.cliques.ell,
            self.geometry.classification,
            opt_csv(pv(GeometryKind::Euclidean)),
            opt_csv(pv(GeometryKind::Spherical)),
            opt_csv(pv(GeometryKind::Hyperbolic)),
            opt_csv(self.geometry.kappa_spherical),
            opt_csv(self.geometry.kappa_hyperbolic),
            opt_csv(dim.map(|d| d.r_hat)),
            opt_csv(dim.map(|d| d.p_hat)),
        )
    }

    /// One-row CSV summary.
    pub fn to_csv(&self) -> String {
        format!("{SUMMARY_HEADER}\n{}\n", self.summary_fields())
    }

    pub fn render(&self, format: ReportFormat) -> String {
        match format {
            ReportFormat::Json => self.to_json(),
            ReportFormat::Csv => self.to_csv(),
        }
    }
}

pub fn write_output(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads or simulates the graph named by a resolved config.
pub fn obtain_graph(cfg: &PipelineConfig) -> Result<Graph> {
    match &cfg.source {
        GraphSource::Input { path, indexing } => load_edge_list(path, *indexing).map_err(|e| e.at_stage("ingest")),
        GraphSource::Simulate(sim) => {
            let lat = sample_latent(sim).map_err(|e| e.at_stage("simulate"))?;
            Ok(sample_graph(&lat, seeds::derive(cfg.seed, STREAM_GRAPH)))
        }
    }
}

/// Runs ingestion or simulation, clique selection, distance estimation and
/// classification (with curvature and dimension), then writes the report to
/// `cfg.output` if set.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<RunReport> {
    cfg.validate()?;
    let cfg = cfg.resolved();
    let t = cfg.t.expect("resolved");
    let mut timing = BTreeMap::new();
    let mut clock = Instant::now();
    let mut lap = |name: &str, timing: &mut BTreeMap<String, f64>| {
        timing.insert(name.to_string(), clock.elapsed().as_secs_f64() * 1e3);
        clock = Instant::now();
    };

    let g = obtain_graph(&cfg)?;
    lap("graph", &mut timing);
    let cs = select_cliques(&g, cfg.k, cfg.ell, &cfg.select, seeds::derive(cfg.seed, STREAM_CLIQUES))
        .map_err(|e| e.at_stage("cliques"))?;
    lap("cliques", &mut timing);
    let (p, e_nu, d_hat) = (|| {
        let p = estimate_p(&g, &cs)?;
        let e = estimate_e_nu(&g, &cs, t)?;
        let d = estimate_d(&p.p, e.value)?;
        Ok((p, e, d))
    })()
    .map_err(|e: Error| e.at_stage("distances"))?;
    lap("distances", &mut timing);
    let boot = bootstrap_distance(&g, &cs, d_hat.e_nu_hat, &cfg.bootstrap).map_err(|e| e.at_stage("bootstrap"))?;
    lap("bootstrap", &mut timing);
    let opts = ClassifyOptions {
        t,
        curvature: cfg.curvature,
        dimension: true,
        dimension_floor: cfg.dimension_floor,
    };
    let geometry = classify_distances(&d_hat.d, &boot, cfg.ell, &cfg.bootstrap, &opts).map_err(|e| e.at_stage("classify"))?;
    lap("classify", &mut timing);

    let report = RunReport {
        artifact_version: ARTIFACT_VERSION.to_string(),
        seed: cfg.seed,
        graph: GraphSummary {
            nodes: g.n(),
            edges: g.edge_count(),
        },
        cliques: CliqueSummary::new(&g, &cs),
        floored_pairs: p.floor_count(),
        p_hat: p.p,
        e_nu,
        distances: d_hat,
        geometry,
        timing: cfg.record_timing.then_some(timing),
        config: cfg,
    };
    if let Some(path) = &report.config.output {
        write_output(path, &report.render(report.config.format)).map_err(|e| e.at_stage("output"))?;
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchItem {
    pub path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<RunReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassShare {
    pub classification: Classification,
    pub count: usize,
    /// Share of the successfully processed files.
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchReport {
    pub items: Vec<BatchItem>,
    pub summary: Vec<ClassShare>,
    pub failed: usize,
}

impl BatchReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One row per file followed by nothing else; failed files carry the
    /// error in the last column.
    pub fn to_csv(&self) -> String {
        let mut out = format!("path,{SUMMARY_HEADER},error\n");
        for item in &self.items {
            let path = item.path.display();
            match (&item.report, &item.error) {
                (Some(r), _) => {
                    let _ = writeln!(out, "{path},{},", r.summary_fields());
                }
                (None, err) => {
                    let msg = err.as_deref().unwrap_or("").replace(['"', '\n'], " ");
                    let _ = writeln!(out, "{path},{}\"{msg}\"", ",".repeat(12));
                }
            }
        }
        out
    }

    /// Classification shares as `classification,count,fraction`.
    pub fn summary_csv(&self) -> String {
        let mut out = String::from("classification,count,fraction\n");
        for s in &self.summary {
            let _ = writeln!(out, "{},{},{}", s.classification, s.count, s.fraction);
        }
        out
    }
}

fn panic_message(p: Box<dyn std::any::Any + Send>) -> String {
    p.downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| p.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "unknown panic".into())
}

/// Runs `template` on every file in `paths`. Files are processed in
/// parallel and independently; an error or panic in one file is recorded
/// in its item. Per-file output paths are not written.
pub fn run_batch(paths: &[PathBuf], template: &PipelineConfig) -> BatchReport {
    let indexing = match &template.source {
        GraphSource::Input { indexing, .. } => *indexing,
        GraphSource::Simulate(_) => Indexing::default(),
    };
    let items: Vec<BatchItem> = paths
        .par_iter()
        .map(|path| {
            let mut cfg = template.clone();
            cfg.source = GraphSource::Input {
                path: path.clone(),
                indexing,
            };
            cfg.output = None;
            let outcome = catch_unwind(AssertUnwindSafe(|| run_pipeline(&cfg)));
            let (report, error) = match outcome {
                Ok(Ok(r)) => (Some(r), None),
                Ok(Err(e)) => (None, Some(e.to_string())),
                Err(p) => (None, Some(format!("panic: {}", panic_message(p)))),
            };
            BatchItem {
                path: path.clone(),
                report,
                error,
            }
        })
        .collect();
    let ok: Vec<&RunReport> = items.iter().filter_map(|i| i.report.as_ref()).collect();
    let summary = [
        Classification::Euclidean,
        Classification::Spherical,
        Classification::Hyperbolic,
        Classification::Na,
    ]
    .into_iter()
    .map(|c| {
        let count = ok.iter().filter(|r| r.geometry.classification == c).count();
        ClassShare {
            classification: c,
            count,
            fraction: if ok.is_empty() { 0.0 } else { count as f64 / ok.len() as f64 },
        }
    })
    .collect();
    BatchReport {
        failed: items.len() - ok.len(),
        items,
        summary,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Type1,
    Power,
    Dimension,
}

impl std::str::FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "type1" | "type-1" | "size" => Ok(ExperimentKind::Type1),
            "power" => Ok(ExperimentKind::Power),
            "dimension" | "dim" => Ok(ExperimentKind::Dimension),
            other => Err(Error::invalid(format!("unknown experiment '{other}'"))),
        }
    }
}

/// A Monte Carlo design. Replicate `r` uses latent set `r / graphs_per_set`
/// of each truth and draws a fresh graph from it.
///
/// * `type1`: each truth is tested against its own null, with a fresh
///   clique selection per `(ell, K)` cell.
/// * `power`: cliques are selected once at the largest K for each `ell`;
///   smaller K use a random subset of them. Each truth is tested against
///   `nulls` (default: every other geometry).
/// * `dimension`: ladle dimension under the true geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    /// Simulation settings per truth; their seeds are replaced.
    pub truths: Vec<SimConfig>,
    pub reps: usize,
    pub graphs_per_set: usize,
    pub ells: Vec<usize>,
    pub ks: Vec<usize>,
    #[serde(default)]
    pub nulls: Option<Vec<GeometryKind>>,
    pub select: SelectOptions,
    /// `seed` is replaced per replicate.
    pub bootstrap: BootstrapConfig,
    pub curvature: CurvatureOptions,
    #[serde(default)]
    pub dimension_floor: bool,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind, truths: Vec<SimConfig>, reps: usize, seed: u64) -> Self {
        ExperimentConfig {
            kind,
            truths,
            reps,
            graphs_per_set: 4,
            ells: vec![9],
            ks: vec![5],
            nulls: None,
            select: SelectOptions {
                draws: 20_000,
                ..SelectOptions::default()
            },
            bootstrap: BootstrapConfig::default(),
            curvature: CurvatureOptions::default(),
            dimension_floor: kind == ExperimentKind::Dimension,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 || self.graphs_per_set == 0 {
            return Err(Error::invalid("reps and graphs_per_set must be at least 1"));
        }
        if self.truths.is_empty() || self.ells.is_empty() || self.ks.is_empty() {
            return Err(Error::invalid("truths, ells and ks must be non-empty"));
        }
        if let Some(&k) = self.ks.iter().find(|&&k| k < 3) {
            return Err(Error::invalid(format!("K={k} is below 3")));
        }
        for t in &self.truths {
            t.validate()?;
        }
        for &ell in &self.ells {
            if ell < 2 {
                return Err(Error::invalid(format!("ell={ell} is below 2")));
            }
            self.bootstrap.validate(ell)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub truth: GeometryKind,
    pub curvature: f64,
    pub null: GeometryKind,
    pub k: usize,
    pub ell: usize,
    /// Replicates that produced a test.
    pub reps: usize,
    pub failures: usize,
    pub rejections: usize,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionRow {
    pub truth: GeometryKind,
    pub curvature: f64,
    pub k: usize,
    pub ell: usize,
    pub p_hat: usize,
    pub count: usize,
    /// Replicates that produced a dimension; `fraction` is `count / reps`.
    pub reps: usize,
    pub failures: usize,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "table", content = "rows", rename_all = "lowercase")]
pub enum ExperimentTable {
    Rates(Vec<RateRow>),
    Dimensions(Vec<DimensionRow>),
}

impl ExperimentTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        match self {
            ExperimentTable::Rates(rows) => {
                out.push_str("truth,curvature,null,k,ell,reps,failures,rejections,rate\n");
                for r in rows {
                    let _ = writeln!(
                        out,
                        "{},{},{},{},{},{},{},{},{}",
                        r.truth, r.curvature, r.null, r.k, r.ell, r.reps, r.failures, r.rejections, r.rate
                    );
                }
            }
            ExperimentTable::Dimensions(rows) => {
                out.push_str("truth,curvature,k,ell,p_hat,count,reps,failures,fraction\n");
                for r in rows {
                    let _ = writeln!(
                        out,
                        "{},{},{},{},{},{},{},{},{}",
                        r.truth, r.curvature, r.k, r.ell, r.p_hat, r.count, r.reps, r.failures, r.fraction
                    );
                }
            }
        }
        out
    }

    /// Rejection rate of a cell, if present.
    pub fn rate(&self, truth: GeometryKind, null: GeometryKind, k: usize, ell: usize) -> Option<f64> {
        match self {
            ExperimentTable::Rates(rows) => rows
                .iter()
                .find(|r| r.truth == truth && r.null == null && r.k == k && r.ell == ell)
                .map(|r| r.rate),
            ExperimentTable::Dimensions(_) => None,
        }
    }

    /// Share of attempted replicates with `p_hat` in `dims`; failed replicates
    /// count as misses.
    pub fn dimension_share(&self, truth: GeometryKind, k: usize, ell: usize, dims: &[usize]) -> Option<f64> {
        match self {
            ExperimentTable::Dimensions(rows) => {
                let cell: Vec<&DimensionRow> = rows.iter().filter(|r| r.truth == truth && r.k == k && r.ell == ell).collect();
                let attempted = cell.first().map(|r| r.reps + r.failures)?;
                let hits: usize = cell.iter().filter(|r| dims.contains(&r.p_hat)).map(|r| r.count).sum();
                Some(hits as f64 / attempted as f64)
            }
            ExperimentTable::Rates(_) => None,
        }
    }
}

/// Outcome of one replicate in one cell.
#[derive(Debug, Clone, Copy)]
enum Outcome {
    Reject(bool),
    Dim(usize),
    Failed,
}

type CellKey = (usize, GeometryKind, usize, usize);

fn replicate_graph(truth: &SimConfig, ti: usize, r: usize, cfg: &ExperimentConfig) -> Result<(Graph, u64)> {
    let set = (r / cfg.graphs_per_set) as u64;
    let mut sim = truth.clone();
    sim.seed = seeds::derive(seeds::derive(cfg.seed, ti as u64), set);
    let lat = sample_latent(&sim)?;
    let graph_seed = seeds::derive(sim.seed, 1 + (r % cfg.graphs_per_set) as u64);
    Ok((sample_graph(&lat, graph_seed), graph_seed))
}

fn cell_boot(cfg: &ExperimentConfig, graph_seed: u64, k: usize, ell: usize) -> BootstrapConfig {
    let mut b = cfg.bootstrap;
    b.seed = seeds::derive(graph_seed, (STREAM_BOOT << 32) ^ ((ell as u64) << 16) ^ k as u64);
    b
}

fn distances_for(g: &Graph, cs: &CliqueSet, ell: usize) -> Result<DistanceMatrix> {
    let p = estimate_p(g, cs)?;
    let e = estimate_e_nu(g, cs, (ell - 1).max(1))?;
    estimate_d(&p.p, e.value)
}

/// All cells of one replicate of one truth.
fn run_replicate(cfg: &ExperimentConfig, ti: usize, r: usize) -> Vec<(CellKey, Outcome)> {
    let truth = &cfg.truths[ti];
    let kind = truth.manifold.kind;
    let mut out = Vec::new();
    let (g, graph_seed) = match replicate_graph(truth, ti, r, cfg) {
        Ok(x) => x,
        Err(e) => {
            log::warn!("replicate {r}: {e}");
            for &ell in &cfg.ells {
                for &k in &cfg.ks {
                    for null in nulls_for(cfg, kind) {
                        out.push(((ti, null, k, ell), Outcome::Failed));
                    }
                }
            }
            return out;
        }
    };
    let select_seed = |k: usize, ell: usize| seeds::derive(graph_seed, (STREAM_CLIQUES << 32) ^ ((ell as u64) << 16) ^ k as u64);
    for &ell in &cfg.ells {
        match cfg.kind {
            ExperimentKind::Type1 | ExperimentKind::Dimension => {
                for &k in &cfg.ks {
                    let res = (|| {
                        let cs = select_cliques(&g, k, ell, &cfg.select, select_seed(k, ell))?;
                        let d = distances_for(&g, &cs, ell)?;
                        let bcfg = cell_boot(cfg, graph_seed, k, ell);
                        let boot = bootstrap_distance(&g, &cs, d.e_nu_hat, &bcfg)?;
                        let run = test_with_bootstrap(&d.d, &boot, kind, ell, &bcfg, &cfg.curvature)?;
                        Ok(match cfg.kind {
                            ExperimentKind::Dimension => {
                                Outcome::Dim(dimension_for(kind, &run.fit, &run.boot, cfg.dimension_floor)?.p_hat)
                            }
                            _ => Outcome::Reject(run.result.reject),
                        })
                    })();
                    out.push(((ti, kind, k, ell), res.unwrap_or_else(|e: Error| {
                        log::warn!("replicate {r}, K={k}, ell={ell}: {e}");
                        Outcome::Failed
                    })));
                }
            }
            ExperimentKind::Power => {
                let nulls = nulls_for(cfg, kind);
                let kmax = *cfg.ks.iter().max().expect("validated");
                let full = select_cliques(&g, kmax, ell, &cfg.select, select_seed(kmax, ell));
                for &k in &cfg.ks {
                    let res = (|| {
                        let full = full.as_ref().map_err(|e| match e {
                            Error::CliqueSelectionInfeasible(m) => Error::CliqueSelectionInfeasible(m.clone()),
                            other => Error::invalid(other.to_string()),
                        })?;
                        let cs = if k == kmax {
                            full.clone()
                        } else {
                            let mut rng = seeds::rng(select_seed(k, ell));
                            let mut idx = index::sample(&mut rng, kmax, k).into_vec();
                            idx.sort_unstable();
                            full.subset(&idx)?
                        };
                        let d = distances_for(&g, &cs, ell)?;
                        let bcfg = cell_boot(cfg, graph_seed, k, ell);
                        let boot = bootstrap_distance(&g, &cs, d.e_nu_hat, &bcfg)?;
                        nulls
                            .iter()
                            .map(|&null| Ok(test_with_bootstrap(&d.d, &boot, null, ell, &bcfg, &cfg.curvature)?.result.reject))
                            .collect::<Result<Vec<bool>>>()
                    })();
                    match res {
                        Ok(rejects) => {
                            for (&null, rej) in nulls.iter().zip(rejects) {
                                out.push(((ti, null, k, ell), Outcome::Reject(rej)));
                            }
                        }
                        Err(e) => {
                            log::warn!("replicate {r}, K={k}, ell={ell}: {e}");
                            for &null in &nulls {
                                out.push(((ti, null, k, ell), Outcome::Failed));
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

fn nulls_for(cfg: &ExperimentConfig, truth: GeometryKind) -> Vec<GeometryKind> {
    match (cfg.kind, &cfg.nulls) {
        (ExperimentKind::Power, Some(n)) => n.iter().copied().filter(|&k| k != truth).collect(),
        (ExperimentKind::Power, None) => GeometryKind::ALL.into_iter().filter(|&k| k != truth).collect(),
        _ => vec![truth],
    }
}

/// Runs a Monte Carlo design and tabulates rejection rates or dimension
/// frequencies. Replicates run in parallel; rows are ordered by truth, then
/// null, `ell` and K.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentTable> {
    cfg.validate()?;
    let jobs: Vec<(usize, usize)> = (0..cfg.truths.len()).flat_map(|ti| (0..cfg.reps).map(move |r| (ti, r))).collect();
    let results: Vec<Vec<(CellKey, Outcome)>> = jobs.par_iter().map(|&(ti, r)| run_replicate(cfg, ti, r)).collect();

    let mut cells: BTreeMap<(usize, GeometryKind, usize, usize), Vec<Outcome>> = BTreeMap::new();
    for (key, o) in results.into_iter().flatten() {
        let (ti, null, k, ell) = key;
        cells.entry((ti, null, ell, k)).or_default().push(o);
    }
    Ok(match cfg.kind {
        ExperimentKind::Type1 | ExperimentKind::Power => ExperimentTable::Rates(
            cells
                .into_iter()
                .map(|((ti, null, ell, k), outs)| {
                    let truth = &cfg.truths[ti].manifold;
                    let failures = outs.iter().filter(|o| matches!(o, Outcome::Failed)).count();
                    let rejections = outs.iter().filter(|o| matches!(o, Outcome::Reject(true))).count();
                    let reps = outs.len() - failures;
                    RateRow {
                        truth: truth.kind,
                        curvature: truth.curvature,
                        null,
                        k,
                        ell,
                        reps,
                        failures,
                        rejections,
                        rate: if reps == 0 { f64::NAN } else { rejections as f64 / reps as f64 },
                    }
                })
                .collect(),
        ),
        ExperimentKind::Dimension => {
            let mut rows = Vec::new();
            for ((ti, _, ell, k), outs) in cells {
                let truth = &cfg.truths[ti].manifold;
                let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
                for o in &outs {
                    if let Outcome::Dim(p) = o {
                        *counts.entry(*p).or_default() += 1;
                    }
                }
                let reps: usize = counts.values().sum();
                let failures = outs.len() - reps;
                for (p_hat, count) in counts {
                    rows.push(DimensionRow {
                        truth: truth.kind,
                        curvature: truth.curvature,
                        k,
                        ell,
                        p_hat,
                        count,
                        reps,
                        failures,
                        fraction: count as f64 / reps as f64,
                    });
                }
            }
            ExperimentTable::Dimensions(rows)
        }
    })
}
