use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use mas_trigger::asymptotics::{
    gumbel_cdf, gumbel_moments, ks_distance, normalize_exit_samples,
    normalize_exit_samples_with_kappa, AsymptoticReport, TWO_SIDED_KAPPA,
};
use mas_trigger::estimators::mean_ci;
use mas_trigger::experiment::{
    emit_csv, find_crossover, long_run_oracle, run_experiment_with_workers, ExperimentConfig,
};
use mas_trigger::triggering::{run_batch, BatchSpec};
use mas_trigger::{make_stream, Graph, GraphKind, Mode};

#[derive(Parser)]
#[command(
    name = "mas-trigger",
    version,
    about = "Time- vs event-triggered consensus under Brownian noise"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the event/periodic cost ratio over a grid of agent counts.
    Simulate(SimulateArgs),
    /// Tabulate the large-N formulas for the exit time and cost.
    Asymptotics(AsymptoticsArgs),
    /// Compare normalised simulated exit times against the Gumbel law.
    GumbelCheck(GumbelArgs),
    /// Long-horizon cost of a full trajectory with resets at every trigger.
    Oracle(OracleArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// JSON document with ExperimentConfig fields; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Agent counts, e.g. `2,3,5` or `2-10,20`.
    #[arg(long)]
    agents: Option<String>,
    #[arg(long)]
    delta: Option<f64>,
    /// Euler-Maruyama step in seconds.
    #[arg(long)]
    step: Option<f64>,
    /// Runs used for the mean inter-event time.
    #[arg(long)]
    runs_t: Option<usize>,
    /// Runs used for the R(T)^4 moment.
    #[arg(long)]
    runs_q: Option<usize>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// complete, ring, path or star.
    #[arg(long)]
    graph: Option<GraphKind>,
    /// Edge-list file (one `i j` pair per line) instead of a generated graph.
    #[arg(long)]
    edges_file: Option<PathBuf>,
    /// Output CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Reduced desk-scale profile.
    #[arg(long, conflicts_with = "paper")]
    quick: bool,
    /// Full-scale profile (default).
    #[arg(long)]
    paper: bool,
    /// Also compute the direct integral estimator.
    #[arg(long)]
    cross_check: bool,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct AsymptoticsArgs {
    #[arg(long)]
    agents: String,
    /// Directed edge count, or a graph kind to derive it per agent count.
    #[arg(long, default_value = "complete")]
    edges: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GumbelArgs {
    #[arg(long)]
    agents: usize,
    #[arg(long, default_value_t = 10_000)]
    runs: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 1e-4)]
    step: f64,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct OracleArgs {
    /// Graph kind (needs --agents) or path to an edge-list file.
    #[arg(long, default_value = "complete")]
    graph: String,
    #[arg(long)]
    agents: Option<usize>,
    /// `event:<delta>` or `periodic:<period>`.
    #[arg(long)]
    scheme: String,
    #[arg(long, default_value_t = 1e4)]
    horizon: f64,
    #[arg(long, default_value_t = 1e-4)]
    step: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Run index of the stream used for the trajectory.
    #[arg(long, default_value_t = 0)]
    run: u64,
}

fn parse_agent_list(text: &str) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if let Some((a, b)) = part.split_once('-') {
            let a: usize = a.trim().parse().with_context(|| format!("bad range {part:?}"))?;
            let b: usize = b.trim().parse().with_context(|| format!("bad range {part:?}"))?;
            if a > b {
                bail!("empty range {part:?}");
            }
            out.extend(a..=b);
        } else {
            out.push(part.parse().with_context(|| format!("bad agent count {part:?}"))?);
        }
    }
    if out.is_empty() {
        bail!("no agent counts given");
    }
    Ok(out)
}

fn parse_scheme(text: &str) -> Result<Mode> {
    let (kind, value) = text
        .split_once(':')
        .ok_or_else(|| anyhow!("scheme must look like event:1.0 or periodic:0.5, got {text:?}"))?;
    let value: f64 = value
        .parse()
        .with_context(|| format!("bad scheme parameter {value:?}"))?;
    match kind {
        "event" => Ok(Mode::Event { delta: value }),
        "periodic" => Ok(Mode::Periodic { t_period: value }),
        other => bail!("unknown scheme {other:?}"),
    }
}

fn write_output(out: Option<&PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn with_pool<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        Some(w) => Ok(rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()?
            .install(f)),
        None => Ok(f()),
    }
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None if args.quick => ExperimentConfig::quick(),
        None => ExperimentConfig::paper(),
    };
    if args.config.is_some() && args.quick {
        let quick = ExperimentConfig::quick();
        cfg.agent_counts = quick.agent_counts;
        cfg.runs_t = quick.runs_t;
        cfg.runs_q = quick.runs_q;
    }
    if let Some(a) = &args.agents {
        cfg.agent_counts = parse_agent_list(a)?;
    }
    if let Some(v) = args.delta {
        cfg.delta = v;
    }
    if let Some(v) = args.step {
        cfg.step_h = v;
    }
    if let Some(v) = args.runs_t {
        cfg.runs_t = v;
    }
    if let Some(v) = args.runs_q {
        cfg.runs_q = v;
    }
    if let Some(v) = args.gamma {
        cfg.gamma = v;
    }
    if let Some(v) = args.seed {
        cfg.master_seed = v;
    }
    if let Some(v) = args.graph {
        cfg.graph_kind = v;
    }
    if let Some(p) = args.edges_file {
        cfg.edge_list = Some(p);
    }
    cfg.cross_check |= args.cross_check;

    let workers = args.workers.unwrap_or_else(rayon::current_num_threads);
    let rows = run_experiment_with_workers(&cfg, workers)?;
    write_output(args.out.as_ref(), &emit_csv(&rows))?;

    for r in &rows {
        if r.r4.skew_warning() || r.e_t.skew_warning() {
            eprintln!(
                "warning: N = {}: samples too skewed for a normal interval at this run count",
                r.n_agents
            );
        }
        if let Some(d) = &r.q_direct {
            eprintln!(
                "N = {}: q_bessel {:.6} ± {:.6}, q_direct {:.6} ± {:.6}",
                r.n_agents,
                r.q_bessel.mean,
                r.q_bessel.half_width(),
                d.mean,
                d.half_width()
            );
        }
    }
    match find_crossover(&rows) {
        Some(c) => eprintln!(
            "crossover: ETC significantly better up to N = {}, TTC significantly better from N = {}",
            c.n_low.map_or("-".to_string(), |n| n.to_string()),
            c.n_high
        ),
        None => eprintln!("crossover: not resolved on this grid"),
    }
    Ok(())
}

fn asymptotics(args: AsymptoticsArgs) -> Result<()> {
    let counts = parse_agent_list(&args.agents)?;
    let fixed_edges: Option<f64> = args.edges.parse().ok();
    let kind: Option<GraphKind> = match fixed_edges {
        Some(_) => None,
        None => Some(args.edges.parse()?),
    };
    let mut text = String::from(AsymptoticReport::CSV_HEADER);
    text.push('\n');
    for n in counts {
        let edges = match (fixed_edges, kind) {
            (Some(e), _) => e,
            (None, Some(k)) => Graph::generate(k, n)?.directed_edge_count() as f64,
            (None, None) => unreachable!(),
        };
        text.push_str(&AsymptoticReport::new(n as f64, edges)?.csv_line());
        text.push('\n');
    }
    write_output(args.out.as_ref(), &text)
}

fn gumbel_check(args: GumbelArgs) -> Result<()> {
    if args.runs < 2 {
        bail!("need at least 2 runs");
    }
    let spec = BatchSpec {
        n_agents: args.agents,
        h: args.step,
        master_seed: args.seed,
        first_run: 0,
        n_runs: args.runs,
        mode: Mode::Event { delta: 1.0 },
    };
    let samples = with_pool(args.workers, || run_batch(&spec))??;
    let t: Vec<f64> = samples.iter().map(|s| s.t_exit).collect();
    let n = args.agents as f64;
    let g = gumbel_moments();
    println!("centering,ks_stat,mean_x,var_x,gumbel_mean,gumbel_var");
    for (label, x) in [
        ("published", normalize_exit_samples(&t, n)?),
        ("two_sided", normalize_exit_samples_with_kappa(&t, n, TWO_SIDED_KAPPA)?),
    ] {
        let ks = ks_distance(&x, gumbel_cdf)?;
        let m = mean_ci(&x, 0.95)?;
        println!(
            "{label},{ks:.9e},{:.9e},{:.9e},{:.9e},{:.9e}",
            m.mean, m.var, g.mean, g.variance
        );
    }
    Ok(())
}

fn oracle(args: OracleArgs) -> Result<()> {
    let graph = match args.graph.parse::<GraphKind>() {
        Ok(kind) => {
            let n = args
                .agents
                .ok_or_else(|| anyhow!("--agents is required with a generated graph"))?;
            Graph::generate(kind, n)?
        }
        Err(_) => {
            let text = fs::read_to_string(&args.graph)
                .with_context(|| format!("reading edge list {}", args.graph))?;
            Graph::load_edge_list(&text)?
        }
    };
    let scheme = parse_scheme(&args.scheme)?;
    let mut stream = make_stream(args.seed, args.run);
    let cost = long_run_oracle(&graph, scheme, args.horizon, args.step, &mut stream)?;
    println!("{cost:.9e}");
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Asymptotics(a) => asymptotics(a),
        Command::GumbelCheck(a) => gumbel_check(a),
        Command::Oracle(a) => oracle(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mas-trigger: {e:#}");
            ExitCode::FAILURE
        }
    }
}
