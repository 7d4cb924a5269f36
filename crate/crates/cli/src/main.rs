use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use mixgraph::bench::{run_grid, BenchConfig};
use mixgraph::estimator::{estimate_graph, EstimatorConfig, Rule, Selector};
use mixgraph::gencov::{
    four_cycle_inverses, verify_block_structure, StructureMode, StructureOptions, EXACT_NONZERO_TOL,
    EXACT_ZERO_TOL,
};
use mixgraph::glm::DEFAULT_EBIC_GAMMA;
use mixgraph::graph::{centrality, CentralityOptions};
use mixgraph::model::{build_simulation_model, SimulationKind, DEFAULT_RETRY_CAP};
use mixgraph::sampler::{enforce_data_requirements, gibbs_sample, DEFAULT_BURN_IN, DEFAULT_THINNING};
use mixgraph::{graph, io, rng, Error, MixedModel};

/// On-disk format revision of the JSON and CSV artifacts.
const FORMAT_VERSION: u32 = 1;

fn long_version() -> &'static str {
    Box::leak(
        format!(
            "{} (format {FORMAT_VERSION}; {}-{}; {} build)",
            env!("CARGO_PKG_VERSION"),
            std::env::consts::ARCH,
            std::env::consts::OS,
            if cfg!(debug_assertions) { "debug" } else { "release" },
        )
        .into_boxed_str(),
    )
}

#[derive(Parser)]
#[command(name = "mixgraph", version = long_version(), about = "Structure estimation for mixed graphical models")]
struct Cli {
    /// Master seed for every stochastic step.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output directory (created if missing).
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Only print errors.
    #[arg(long, global = true)]
    quiet: bool,
    /// Worker threads. Outputs do not depend on it.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Gibbs-sample a dataset from a model file (or a simulated model).
    Sample(SampleArgs),
    /// Estimate the graph of a dataset by nodewise regression.
    Estimate(EstimateArgs),
    /// Check the zero pattern of exact generalized inverse covariances.
    GencovCheck(GencovArgs),
    /// Print the inverse covariances of the binary/Gaussian 4-cycle example.
    DemoFig1(DemoArgs),
    /// Run a simulation grid.
    Bench(BenchArgs),
    /// Degree, closeness and betweenness of an edge list.
    Centrality(CentralityArgs),
}

#[derive(Args)]
struct SampleArgs {
    /// Model JSON. Omit when using --simulate.
    model: Option<PathBuf>,
    /// Build a simulation model of this kind on a random graph instead.
    #[arg(long, value_name = "KIND", conflicts_with = "model")]
    simulate: Option<String>,
    /// Node count for --simulate.
    #[arg(long, default_value_t = 16)]
    p: usize,
    /// Edge probability for --simulate.
    #[arg(long, default_value_t = 0.1)]
    p_edge: f64,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = DEFAULT_BURN_IN)]
    burn_in: usize,
    #[arg(long, default_value_t = DEFAULT_THINNING)]
    thin: usize,
    /// Enforce minimum category shares and Poisson mode limits.
    #[arg(long)]
    repair: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum SelectArg {
    Cv,
    Ebic,
}

#[derive(Clone, Copy, ValueEnum)]
enum RuleArg {
    And,
    Or,
}

#[derive(Args)]
struct EstimateArgs {
    data: PathBuf,
    schema: PathBuf,
    /// Largest subset size in the augmented design.
    #[arg(long, default_value_t = 2)]
    d: usize,
    #[arg(long, value_enum, default_value = "and")]
    rule: RuleArg,
    #[arg(long, value_enum, default_value = "cv")]
    select: SelectArg,
    #[arg(long, default_value_t = 10)]
    folds: usize,
    /// Largest penalty within one standard error of the CV minimum.
    #[arg(long)]
    one_se: bool,
    #[arg(long, default_value_t = DEFAULT_EBIC_GAMMA)]
    gamma: f64,
    /// Constant of the post-fit threshold.
    #[arg(long, default_value_t = 1.0)]
    tau_c: f64,
    /// Treat every variable as Gaussian.
    #[arg(long)]
    all_gaussian: bool,
    /// Average absolute values of categorical blocks instead of signed ones.
    #[arg(long)]
    absolute_blocks: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Theorem1,
    Cor1,
    Cor2,
}

#[derive(Args)]
struct GencovArgs {
    model: PathBuf,
    #[arg(long, value_enum, default_value = "cor2")]
    mode: ModeArg,
    /// Zero tolerance.
    #[arg(long, default_value_t = EXACT_ZERO_TOL)]
    tol: f64,
    /// Minimum magnitude of claimed nonzero blocks.
    #[arg(long, default_value_t = EXACT_NONZERO_TOL)]
    nonzero_tol: f64,
    /// Candidate-neighborhood size for cor1 (default: each node's degree).
    #[arg(long)]
    d: Option<usize>,
}

#[derive(Args)]
struct DemoArgs {
    #[arg(long, default_value_t = 0.1, allow_negative_numbers = true)]
    theta_node: f64,
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    theta_edge: f64,
    /// Also write the model and both reports as JSON to --out.
    #[arg(long)]
    write: bool,
}

#[derive(Args)]
struct BenchArgs {
    /// Bench configuration JSON (missing fields take defaults).
    config: Option<PathBuf>,
    /// 100 repetitions per cell.
    #[arg(long)]
    paper_scale: bool,
    /// Fill the seconds column (makes output time dependent).
    #[arg(long)]
    timing: bool,
}

#[derive(Args)]
struct CentralityArgs {
    edges: PathBuf,
    /// Node count (default: one more than the largest index).
    #[arg(long)]
    p: Option<usize>,
    /// Ignore edge weights.
    #[arg(long)]
    unweighted: bool,
    /// Weighted degree sums signed weights.
    #[arg(long)]
    signed: bool,
}

enum Failure {
    Claims,
    Err(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Err(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Err(Error::Io(e))
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::CvInfeasible { .. } => 4,
        Error::SamplerAbort(_)
        | Error::NotNormalizable { .. }
        | Error::Numerical(_)
        | Error::RetryCapExceeded(_) => 3,
        _ => 2,
    }
}

fn write(out: &Path, name: &str, contents: &str) -> Result<(), Failure> {
    let path = out.join(name);
    fs::write(&path, contents)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn cmd_sample(cli: &Cli, a: &SampleArgs) -> Result<(), Failure> {
    let model = match (&a.model, &a.simulate) {
        (Some(path), None) => MixedModel::from_json(&io::read_to_string(path)?)?,
        (None, Some(kind)) => {
            let kind = SimulationKind::parse(kind)?;
            let g = graph::erdos_renyi(a.p, a.p_edge, rng::derive(cli.seed, 10))?;
            let m = build_simulation_model(kind, &g, rng::derive(cli.seed, 11), DEFAULT_RETRY_CAP)?;
            write(&cli.out, "model.json", &m.to_json()?)?;
            write(&cli.out, "graph.json", &io::graph_to_json(m.graph())?)?;
            m
        }
        _ => return Err(Error::InvalidArgument("give a model file or --simulate KIND".into()).into()),
    };
    let data = gibbs_sample(&model, a.n, a.burn_in, a.thin, rng::derive(cli.seed, 0))?;
    let data = if a.repair {
        let (fixed, report) = enforce_data_requirements(&data, rng::derive(cli.seed, 1))?;
        write(&cli.out, "repair.json", &serde_json::to_string_pretty(&report).map_err(Error::from)?)?;
        log::info!("repair replaced {:.4} of all entries", report.proportion);
        fixed
    } else {
        data
    };
    write(&cli.out, "dataset.csv", &io::dataset_to_csv(&data))?;
    write(&cli.out, "schema.json", &io::schema_to_json(data.specs())?)?;
    Ok(())
}

fn cmd_estimate(cli: &Cli, a: &EstimateArgs) -> Result<(), Failure> {
    let specs = io::schema_from_json(&io::read_to_string(&a.schema)?)?;
    let data = io::dataset_from_csv(&io::read_to_string(&a.data)?, specs)?;
    let cfg = EstimatorConfig {
        d: a.d,
        selector: match a.select {
            SelectArg::Cv => Selector::Cv {
                folds: a.folds,
                one_se: a.one_se,
            },
            SelectArg::Ebic => Selector::Ebic { gamma: a.gamma },
        },
        rule: match a.rule {
            RuleArg::And => Rule::And,
            RuleArg::Or => Rule::Or,
        },
        tau_constant: a.tau_c,
        treat_all_as_gaussian: a.all_gaussian,
        absolute_blocks: a.absolute_blocks,
        seed: cli.seed,
        jobs: cli.jobs,
    };
    let result = estimate_graph(&data, &cfg)?;
    let columns: usize = result.nodes.iter().map(|f| f.labels.len()).sum();
    log::info!("{} design columns over all nodes; {} edges", columns, result.edges.len());
    write(&cli.out, "result.json", &result.to_json()?)?;
    write(&cli.out, "edges.csv", &result.edges_csv())?;
    Ok(())
}

fn cmd_gencov(cli: &Cli, a: &GencovArgs) -> Result<(), Failure> {
    let model = MixedModel::from_json(&io::read_to_string(&a.model)?)?;
    let opts = StructureOptions {
        mode: match a.mode {
            ModeArg::Theorem1 => StructureMode::Theorem1,
            ModeArg::Cor1 => StructureMode::Cor1,
            ModeArg::Cor2 => StructureMode::Cor2,
        },
        zero_tol: a.tol,
        nonzero_tol: a.nonzero_tol,
        d: a.d,
    };
    let report = verify_block_structure(&model, opts)?;
    write(&cli.out, "report.json", &serde_json::to_string_pretty(&report).map_err(Error::from)?)?;
    if !cli.quiet {
        println!(
            "{}: {} zero claims ({} violated), {} nonzero claims ({} violated)",
            opts.mode, report.zero_claims, report.zero_violations, report.nonzero_claims, report.nonzero_violations
        );
    }
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Claims)
    }
}

fn cmd_demo(cli: &Cli, a: &DemoArgs) -> Result<(), Failure> {
    let start = Instant::now();
    let (plain, augmented) = four_cycle_inverses(a.theta_node, a.theta_edge)?;
    let elapsed = start.elapsed();
    println!("{}", plain.to_text());
    println!("{}", augmented.to_text());
    if !cli.quiet {
        println!("computed in {:.3} s", elapsed.as_secs_f64());
    }
    if a.write {
        let model = MixedModel::four_cycle_example(a.theta_node, a.theta_edge);
        write(&cli.out, "fig1-model.json", &model.to_json()?)?;
        write(&cli.out, "fig1-inverse.json", &serde_json::to_string_pretty(&plain).map_err(Error::from)?)?;
        write(
            &cli.out,
            "fig1-augmented-inverse.json",
            &serde_json::to_string_pretty(&augmented).map_err(Error::from)?,
        )?;
    }
    Ok(())
}

fn cmd_bench(cli: &Cli, a: &BenchArgs) -> Result<(), Failure> {
    let mut cfg = match &a.config {
        Some(path) => BenchConfig::from_json(&io::read_to_string(path)?)?,
        None => BenchConfig::default(),
    };
    if a.paper_scale {
        cfg = cfg.paper_scale();
    }
    cfg.timing |= a.timing;
    cfg.jobs = cli.jobs;
    if a.config.is_none() || cli.seed != 0 {
        cfg.seed = cli.seed;
    }
    let report = run_grid(&cfg)?;
    for c in report.flagged() {
        log::warn!(
            "{} p_edge={} n/p={} d={} flagged: {}",
            c.kind.label(),
            c.p_edge,
            c.n_over_p,
            c.d,
            c.flag.as_deref().unwrap_or_default()
        );
    }
    write(&cli.out, "bench.csv", &report.to_csv())?;
    write(&cli.out, "bench.json", &report.to_json()?)?;
    Ok(())
}

fn fmt_row(name: &str, raw: &graph::NodeCentrality, z: &graph::NodeCentrality) -> String {
    format!(
        "{name},{},{},{},{},{},{}\n",
        raw.degree, raw.closeness, raw.betweenness, z.degree, z.closeness, z.betweenness
    )
}

fn cmd_centrality(cli: &Cli, a: &CentralityArgs) -> Result<(), Failure> {
    let g = io::graph_from_csv(&io::read_to_string(&a.edges)?, a.p)?;
    let c = centrality(
        &g,
        CentralityOptions {
            weighted: !a.unweighted,
            absolute: !a.signed,
        },
    )?;
    if c.disconnected {
        log::warn!("graph is disconnected; closeness uses reachable nodes only");
    }
    let mut out = String::from("node,degree,closeness,betweenness,degree_z,closeness_z,betweenness_z\n");
    for (s, (raw, z)) in c.raw.iter().zip(&c.standardized).enumerate() {
        out.push_str(&fmt_row(&s.to_string(), raw, z));
    }
    write(&cli.out, "centrality.csv", &out)?;
    Ok(())
}

fn run(cli: &Cli) -> Result<(), Failure> {
    fs::create_dir_all(&cli.out)?;
    match &cli.command {
        Command::Sample(a) => cmd_sample(cli, a),
        Command::Estimate(a) => cmd_estimate(cli, a),
        Command::GencovCheck(a) => cmd_gencov(cli, a),
        Command::DemoFig1(a) => cmd_demo(cli, a),
        Command::Bench(a) => cmd_bench(cli, a),
        Command::Centrality(a) => cmd_centrality(cli, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "error" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Claims) => {
            eprintln!("error: structure claims failed (see report.json)");
            ExitCode::from(1)
        }
        Err(Failure::Err(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
