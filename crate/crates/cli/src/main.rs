use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use netgeom::cliques::{select_cliques, CliqueSet, SelectOptions};
use netgeom::curvature::{estimate_curvature, CurvatureOptions};
use netgeom::distance::{estimate_d, estimate_e_nu, estimate_p};
use netgeom::graph::{load_edge_list, save_edge_list, Graph, Indexing};
use netgeom::netgen::{sample_graph, sample_latent, NuDist, SimConfig};
use netgeom::pipeline::{
    run_batch, run_experiment, run_pipeline, write_output, ExperimentConfig, ExperimentKind, GraphSource,
    PipelineConfig, ReportFormat,
};
use netgeom::testing::{
    bootstrap_distance, classify_distances, dimension_for, test_with_bootstrap, BootstrapConfig, ClassifyOptions,
    DEFAULT_ALPHA, DEFAULT_B, DEFAULT_RATE,
};
use netgeom::{seeds, Error, GeometryKind, ManifoldSpec, SymMatrix};

const EXIT_CONFIG: u8 = 2;
const EXIT_STAGE: u8 = 3;

#[derive(Parser)]
#[command(name = "netgeom", version, about = "Latent geometry of networks: manifold class, curvature and dimension")]
struct Cli {
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Write the result here instead of stdout.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true, default_value = "json")]
    format: ReportFormat,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate a graph from the latent space model and write its edge list.
    Simulate {
        #[command(flatten)]
        sim: SimArgs,
        /// Also write latent positions as CSV.
        #[arg(long)]
        latent: Option<PathBuf>,
    },
    /// Select K cliques of size ell.
    Cliques {
        #[command(flatten)]
        graph: GraphArgs,
        #[command(flatten)]
        sel: SelectArgs,
    },
    /// Estimate the clique distance matrix.
    Distances {
        #[command(flatten)]
        graph: GraphArgs,
        #[command(flatten)]
        sel: SelectArgs,
    },
    /// Estimate curvature from a distance matrix CSV or from a graph.
    Curvature {
        #[arg(long, short, default_value = "spherical")]
        geometry: GeometryKind,
        /// Distance matrix as CSV rows.
        #[arg(long, conflicts_with = "input")]
        distances: Option<PathBuf>,
        #[command(flatten)]
        graph: GraphArgs,
        #[command(flatten)]
        sel: SelectArgs,
        #[arg(long, default_value_t = 1)]
        q: usize,
    },
    /// Ladle dimension estimate under a given geometry.
    Dimension {
        #[arg(long, short)]
        geometry: GeometryKind,
        #[command(flatten)]
        graph: GraphArgs,
        #[command(flatten)]
        sel: SelectArgs,
        #[command(flatten)]
        boot: BootArgs,
        /// Report at least dimension 2.
        #[arg(long)]
        floor: bool,
    },
    /// Bootstrap test of one geometry null.
    Test {
        #[arg(long)]
        null: GeometryKind,
        #[command(flatten)]
        graph: GraphArgs,
        #[command(flatten)]
        sel: SelectArgs,
        #[command(flatten)]
        boot: BootArgs,
    },
    /// Test all three nulls and classify.
    Classify {
        #[command(flatten)]
        graph: GraphArgs,
        #[command(flatten)]
        sel: SelectArgs,
        #[command(flatten)]
        boot: BootArgs,
        #[arg(long)]
        floor: bool,
    },
    /// Full run from a graph file, a simulation, a JSON config, or a batch of files.
    Pipeline {
        /// PipelineConfig as JSON; other options are ignored.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Simulate instead of reading --input.
        #[arg(long)]
        simulate: bool,
        #[command(flatten)]
        sim: SimArgs,
        #[command(flatten)]
        graph: GraphArgs,
        #[command(flatten)]
        sel: SelectArgs,
        #[command(flatten)]
        boot: BootArgs,
        #[arg(long)]
        floor: bool,
        /// Edge-list files processed independently.
        #[arg(long, num_args = 1.., conflicts_with_all = ["input", "simulate", "config"])]
        batch: Vec<PathBuf>,
        #[arg(long)]
        timing: bool,
    },
    /// Monte Carlo experiments; writes a CSV table.
    Experiment {
        kind: ExperimentKind,
        /// Truth geometries as kind[:curvature], e.g. spherical:1 hyperbolic:-0.75.
        #[arg(long, num_args = 1.., default_values = ["euclidean", "spherical:1", "hyperbolic:-1"])]
        truth: Vec<String>,
        #[arg(long, default_value_t = 100)]
        reps: usize,
        #[arg(long, default_value_t = 4)]
        graphs_per_set: usize,
        #[arg(long, num_args = 1.., default_values_t = [9])]
        ell: Vec<usize>,
        #[arg(long = "k", num_args = 1.., default_values_t = [5])]
        ks: Vec<usize>,
        #[arg(long, num_args = 1..)]
        nulls: Option<Vec<GeometryKind>>,
        #[arg(long, default_value_t = 1200)]
        n: usize,
        #[arg(long)]
        spread: Option<f64>,
        #[command(flatten)]
        boot: BootArgs,
        #[arg(long, default_value_t = 20_000)]
        draws: usize,
    },
}

#[derive(Args, Clone)]
struct GraphArgs {
    /// Edge-list file.
    #[arg(long, short)]
    input: Option<PathBuf>,
    #[arg(long, default_value = "zero")]
    indexing: Indexing,
}

#[derive(Args, Clone)]
struct SelectArgs {
    #[arg(long = "k", short = 'k', default_value_t = 5)]
    k: usize,
    #[arg(long, short = 'l', default_value_t = 9)]
    ell: usize,
    /// Almost-clique threshold (default ell - 1).
    #[arg(long)]
    t: Option<usize>,
    /// Minimum edge density of a candidate set.
    #[arg(long, default_value_t = 1.0)]
    density: f64,
    #[arg(long, default_value_t = netgeom::cliques::DEFAULT_DRAWS)]
    draws: usize,
}

impl SelectArgs {
    fn options(&self) -> SelectOptions {
        SelectOptions {
            draws: self.draws,
            density: self.density,
            ..SelectOptions::default()
        }
    }

    fn t(&self) -> usize {
        self.t.unwrap_or(self.ell.saturating_sub(1).max(1))
    }
}

#[derive(Args, Clone)]
struct BootArgs {
    #[arg(long = "bootstrap", short = 'B', default_value_t = DEFAULT_B)]
    b: usize,
    /// Subsample size per clique (default ceil(ell / 2)).
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_RATE)]
    rate: f64,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long)]
    without_replacement: bool,
}

impl BootArgs {
    fn config(&self, seed: u64) -> BootstrapConfig {
        BootstrapConfig {
            b: self.b,
            m: self.m,
            rate: self.rate,
            alpha: self.alpha,
            seed,
            with_replacement: !self.without_replacement,
        }
    }
}

#[derive(Args, Clone)]
struct SimArgs {
    #[arg(long, default_value = "spherical")]
    geometry: GeometryKind,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    /// Defaults to 1, -1 or 0 by geometry.
    #[arg(long, allow_hyphen_values = true)]
    curvature: Option<f64>,
    #[arg(long, default_value_t = 1200)]
    n: usize,
    #[arg(long, default_value_t = 15)]
    centers: usize,
    #[arg(long)]
    spread: Option<f64>,
    #[arg(long)]
    center_scale: Option<f64>,
    /// Fixed effects uniform on (-width, 0).
    #[arg(long)]
    nu_width: Option<f64>,
}

impl SimArgs {
    fn config(&self, seed: u64) -> Result<SimConfig, Error> {
        let kappa = self.curvature.unwrap_or(match self.geometry {
            GeometryKind::Euclidean => 0.0,
            GeometryKind::Spherical => 1.0,
            GeometryKind::Hyperbolic => -1.0,
        });
        let mut sim = SimConfig::defaults(ManifoldSpec::new(self.geometry, self.dim, kappa)?, seed);
        sim.n = self.n;
        sim.n_centers = self.centers;
        if let Some(s) = self.spread {
            sim.spread = s;
        }
        if let Some(s) = self.center_scale {
            sim.center_scale = s;
        }
        if let Some(width) = self.nu_width {
            sim.nu_dist = NuDist::Uniform { width };
        }
        sim.validate()?;
        Ok(sim)
    }
}

enum Failure {
    Config(String),
    Stage(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_config_error() {
            Failure::Config(e.to_string())
        } else {
            Failure::Stage(e.to_string())
        }
    }
}

type CliResult<T> = Result<T, Failure>;

fn stage<T>(name: &'static str, r: Result<T, Error>) -> CliResult<T> {
    r.map_err(|e| if e.is_config_error() { Failure::Config(e.to_string()) } else { Failure::Stage(format!("{name} stage failed: {e}")) })
}

fn emit(cli: &Cli, text: &str) -> CliResult<()> {
    match &cli.output {
        Some(path) => Ok(write_output(path, text)?),
        None => {
            print!("{text}");
            if !text.ends_with('\n') {
                println!();
            }
            Ok(())
        }
    }
}

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable")
}

fn load_graph(g: &GraphArgs) -> CliResult<Graph> {
    let path = g.input.as_ref().ok_or_else(|| Failure::Config("--input is required".into()))?;
    stage("ingest", load_edge_list(path, g.indexing))
}

fn cliques_for(cli: &Cli, g: &Graph, sel: &SelectArgs) -> CliResult<CliqueSet> {
    stage("cliques", select_cliques(g, sel.k, sel.ell, &sel.options(), seeds::derive(cli.seed, 3)))
}

fn read_matrix_csv(path: &Path) -> CliResult<SymMatrix> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    let rows = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.split(',').map(|x| x.trim().parse::<f64>()).collect::<Result<Vec<_>, _>>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    Ok(SymMatrix::from_rows(&rows)?)
}

fn parse_truth(s: &str, n: usize, spread: Option<f64>) -> Result<SimConfig, Error> {
    let (kind, kappa) = match s.split_once(':') {
        Some((k, c)) => (k.parse::<GeometryKind>()?, Some(c.parse::<f64>().map_err(|e| Error::invalid(format!("curvature '{c}': {e}")))?)),
        None => (s.parse::<GeometryKind>()?, None),
    };
    let (dim, default_kappa) = match kind {
        GeometryKind::Euclidean => (3, 0.0),
        GeometryKind::Spherical => (2, 1.0),
        GeometryKind::Hyperbolic => (2, -1.0),
    };
    let mut sim = SimConfig::defaults(ManifoldSpec::new(kind, dim, kappa.unwrap_or(default_kappa))?, 0);
    sim.n = n;
    if let (Some(s), true) = (spread, kind != GeometryKind::Euclidean) {
        sim.spread = s;
    }
    Ok(sim)
}

fn run(cli: &Cli) -> CliResult<()> {
    let boot_seed = seeds::derive(cli.seed, 4);
    match &cli.cmd {
        Cmd::Simulate { sim, latent } => {
            let cfg = sim.config(seeds::derive(cli.seed, 1))?;
            let lat = stage("simulate", sample_latent(&cfg))?;
            let g = sample_graph(&lat, seeds::derive(cli.seed, 2));
            if let Some(path) = latent {
                write_output(path, &lat.to_csv())?;
            }
            match &cli.output {
                Some(path) => save_edge_list(&g, path)?,
                None => print!("{}", g.to_edge_list()),
            }
        }
        Cmd::Cliques { graph, sel } => {
            let g = load_graph(graph)?;
            let cs = cliques_for(cli, &g, sel)?;
            let text = match cli.format {
                ReportFormat::Json => json(&cs),
                ReportFormat::Csv => cs
                    .cliques
                    .iter()
                    .map(|c| c.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",") + "\n")
                    .collect(),
            };
            emit(cli, &text)?;
        }
        Cmd::Distances { graph, sel } => {
            let g = load_graph(graph)?;
            let cs = cliques_for(cli, &g, sel)?;
            let p = stage("distances", estimate_p(&g, &cs))?;
            let e = stage("distances", estimate_e_nu(&g, &cs, sel.t()))?;
            let d = stage("distances", estimate_d(&p.p, e.value))?;
            let text = match cli.format {
                ReportFormat::Json => json(&serde_json::json!({ "cliques": cs.cliques, "p_hat": p, "e_nu": e, "distances": d })),
                ReportFormat::Csv => d.to_csv(),
            };
            emit(cli, &text)?;
        }
        Cmd::Curvature {
            geometry,
            distances,
            graph,
            sel,
            q,
        } => {
            let d = match distances {
                Some(path) => read_matrix_csv(path)?,
                None => {
                    let g = load_graph(graph)?;
                    let cs = cliques_for(cli, &g, sel)?;
                    let p = stage("distances", estimate_p(&g, &cs))?;
                    let e = stage("distances", estimate_e_nu(&g, &cs, sel.t()))?;
                    stage("distances", estimate_d(&p.p, e.value))?.d
                }
            };
            let opts = CurvatureOptions {
                q: *q,
                ..CurvatureOptions::default()
            };
            let est = stage("curvature", estimate_curvature(&d, *geometry, &opts))?;
            let text = match cli.format {
                ReportFormat::Json => json(&est),
                ReportFormat::Csv => format!("geometry,kappa_hat,objective\n{},{},{}\n", est.kind, est.kappa_hat, est.objective_at_min),
            };
            emit(cli, &text)?;
        }
        Cmd::Dimension {
            geometry,
            graph,
            sel,
            boot,
            floor,
        } => {
            let g = load_graph(graph)?;
            let cs = cliques_for(cli, &g, sel)?;
            let d = stage("distances", netgeom::testing::estimate_distances(&g, &cs, sel.t()))?;
            let bcfg = boot.config(boot_seed);
            let reps = stage("bootstrap", bootstrap_distance(&g, &cs, d.e_nu_hat, &bcfg))?;
            let run = stage("test", test_with_bootstrap(&d.d, &reps, *geometry, sel.ell, &bcfg, &CurvatureOptions::default()))?;
            let rep = stage("dimension", dimension_for(*geometry, &run.fit, &run.boot, *floor))?;
            let text = match cli.format {
                ReportFormat::Json => json(&rep),
                ReportFormat::Csv => format!("geometry,r_hat,p_hat\n{},{},{}\n", rep.geometry, rep.r_hat, rep.p_hat),
            };
            emit(cli, &text)?;
        }
        Cmd::Test { null, graph, sel, boot } => {
            let g = load_graph(graph)?;
            let cs = cliques_for(cli, &g, sel)?;
            let d = stage("distances", netgeom::testing::estimate_distances(&g, &cs, sel.t()))?;
            let bcfg = boot.config(boot_seed);
            let reps = stage("bootstrap", bootstrap_distance(&g, &cs, d.e_nu_hat, &bcfg))?;
            let res = stage("test", test_with_bootstrap(&d.d, &reps, *null, sel.ell, &bcfg, &CurvatureOptions::default()))?.result;
            let text = match cli.format {
                ReportFormat::Json => json(&res),
                ReportFormat::Csv => format!(
                    "geometry,lambda_hat,stat,critical_value,p_value,reject\n{},{},{},{},{},{}\n",
                    res.geometry, res.lambda_hat, res.stat_observed, res.critical_value, res.p_value, res.reject
                ),
            };
            emit(cli, &text)?;
        }
        Cmd::Classify { graph, sel, boot, floor } => {
            let g = load_graph(graph)?;
            let cs = cliques_for(cli, &g, sel)?;
            let d = stage("distances", netgeom::testing::estimate_distances(&g, &cs, sel.t()))?;
            let bcfg = boot.config(boot_seed);
            let reps = stage("bootstrap", bootstrap_distance(&g, &cs, d.e_nu_hat, &bcfg))?;
            let opts = ClassifyOptions {
                dimension_floor: *floor,
                t: sel.t(),
                ..ClassifyOptions::for_ell(sel.ell)
            };
            let rep = stage("classify", classify_distances(&d.d, &reps, sel.ell, &bcfg, &opts))?;
            let text = match cli.format {
                ReportFormat::Json => json(&rep),
                ReportFormat::Csv => {
                    let mut s = String::from("geometry,p_value,reject,kappa\n");
                    for t in &rep.tests {
                        s += &format!("{},{},{},{}\n", t.geometry, t.p_value, t.reject, t.kappa_used.map(|k| k.to_string()).unwrap_or_default());
                    }
                    s += &format!("classification,{},,\n", rep.classification);
                    s
                }
            };
            emit(cli, &text)?;
        }
        Cmd::Pipeline {
            config,
            simulate,
            sim,
            graph,
            sel,
            boot,
            floor,
            batch,
            timing,
        } => {
            let mut cfg = match config {
                Some(path) => {
                    let text = std::fs::read_to_string(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
                    serde_json::from_str::<PipelineConfig>(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?
                }
                None => {
                    let source = if *simulate {
                        GraphSource::Simulate(sim.config(0)?)
                    } else if !batch.is_empty() {
                        GraphSource::Input {
                            path: PathBuf::new(),
                            indexing: graph.indexing,
                        }
                    } else {
                        GraphSource::Input {
                            path: graph.input.clone().ok_or_else(|| Failure::Config("--input, --simulate, --batch or --config is required".into()))?,
                            indexing: graph.indexing,
                        }
                    };
                    let mut cfg = PipelineConfig::new(source, sel.k, sel.ell, cli.seed);
                    cfg.t = sel.t;
                    cfg.select = sel.options();
                    cfg.bootstrap = boot.config(0);
                    cfg.dimension_floor = *floor;
                    cfg.format = cli.format;
                    cfg.record_timing = *timing;
                    cfg
                }
            };
            if !batch.is_empty() {
                let report = run_batch(batch, &cfg);
                let text = match cli.format {
                    ReportFormat::Json => report.to_json(),
                    ReportFormat::Csv => report.to_csv(),
                };
                emit(cli, &text)?;
                eprint!("{}", report.summary_csv());
                if report.failed > 0 {
                    eprintln!("{} of {} files failed", report.failed, report.items.len());
                }
            } else {
                let out = cli.output.clone().or(cfg.output.take());
                let report = run_pipeline(&cfg)?;
                let text = report.render(cli.format);
                match out {
                    Some(path) => write_output(&path, &text)?,
                    None => println!("{text}"),
                }
            }
        }
        Cmd::Experiment {
            kind,
            truth,
            reps,
            graphs_per_set,
            ell,
            ks,
            nulls,
            n,
            spread,
            boot,
            draws,
        } => {
            let truths = truth.iter().map(|t| parse_truth(t, *n, *spread)).collect::<Result<Vec<_>, _>>()?;
            let mut cfg = ExperimentConfig::new(*kind, truths, *reps, cli.seed);
            cfg.graphs_per_set = *graphs_per_set;
            cfg.ells = ell.clone();
            cfg.ks = ks.clone();
            cfg.nulls = nulls.clone();
            cfg.bootstrap = boot.config(0);
            cfg.select.draws = *draws;
            let table = stage("experiment", run_experiment(&cfg))?;
            let text = match cli.format {
                ReportFormat::Json => json(&table),
                ReportFormat::Csv => table.to_csv(),
            };
            emit(cli, &text)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Stage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_STAGE)
        }
    }
}
