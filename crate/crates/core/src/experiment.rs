//! End-to-end cost comparison over a grid of agent counts.
//!
//! For every `N` the driver draws two disjoint blocks of runs from the same
//! master seed: run indices `[0, runs_t)` estimate the mean inter-event time
//! and `[runs_t, runs_t + runs_q)` estimate `E[R(T)⁴]`. The periodic scheme
//! it compares against always uses the estimated mean inter-event time as its
//! period, so both schemes trigger at the same average rate.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::asymptotics::{expected_exit_asymptote, variance_asymptote, AsymptoticError, ExitOrder};
use crate::estimators::{
    bessel_scale, cost_ratio, j_ttc, mean_ci, EstimateError, EstimateWithCI, RatioWithCI,
};
use crate::graph::{Graph, GraphError, GraphKind};
use crate::stochastic::{check_step, IncrementSource};
use crate::triggering::{
    periodic_step_count, run_batch, BatchSpec, Mode, TriggerError, DEFAULT_STEP_CAP,
};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("communication graph for N = {0} is not connected")]
    Disconnected(usize),
    #[error("cannot read edge list {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Trigger(#[from] TriggerError),
    #[error(transparent)]
    Estimate(#[from] EstimateError),
    #[error(transparent)]
    Asymptotic(#[from] AsymptoticError),
}

impl From<crate::stochastic::StochasticError> for ExperimentError {
    fn from(e: crate::stochastic::StochasticError) -> Self {
        ExperimentError::Trigger(e.into())
    }
}

/// Agent counts used for the full-scale comparison.
pub fn paper_agent_grid() -> Vec<usize> {
    let mut grid: Vec<usize> = (2..=10).collect();
    grid.extend([12, 15, 20]);
    grid.extend((25..=80).step_by(5));
    grid
}

pub fn quick_agent_grid() -> Vec<usize> {
    vec![2, 3, 5, 8, 10, 20, 40, 60, 80]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub agent_counts: Vec<usize>,
    pub delta: f64,
    pub step_h: f64,
    pub runs_t: usize,
    pub runs_q: usize,
    pub gamma: f64,
    pub master_seed: u64,
    pub graph_kind: GraphKind,
    /// Edge-list file; overrides `graph_kind` and fixes `N` to its node count.
    pub edge_list: Option<PathBuf>,
    /// Also report the direct `|E| · E[∫ v₁²]` estimate.
    pub cross_check: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::paper()
    }
}

impl ExperimentConfig {
    pub fn paper() -> Self {
        Self {
            agent_counts: paper_agent_grid(),
            delta: 1.0,
            step_h: 1e-4,
            runs_t: 10_000,
            runs_q: 250_000,
            gamma: 0.975,
            master_seed: 42,
            graph_kind: GraphKind::Complete,
            edge_list: None,
            cross_check: false,
        }
    }

    pub fn quick() -> Self {
        Self {
            agent_counts: quick_agent_grid(),
            runs_t: 2_000,
            runs_q: 20_000,
            ..Self::paper()
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |msg: String| Err(ExperimentError::InvalidConfig(msg));
        if self.agent_counts.is_empty() {
            return bad("agent_counts is empty".into());
        }
        if let Some(&n) = self.agent_counts.iter().find(|&&n| n < 2) {
            return bad(format!("agent count {n} is below 2"));
        }
        if self.runs_t < 2 || self.runs_q < 2 {
            return bad(format!(
                "runs_t and runs_q must be at least 2 (got {} and {})",
                self.runs_t, self.runs_q
            ));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad(format!("gamma must lie in (0, 1), got {}", self.gamma));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return bad(format!("delta must be positive, got {}", self.delta));
        }
        if !(self.step_h > 0.0 && self.step_h.is_finite()) {
            return bad(format!("step must be positive, got {}", self.step_h));
        }
        Ok(())
    }

    fn load_edge_list(&self) -> Result<Option<Graph>, ExperimentError> {
        let Some(path) = &self.edge_list else {
            return Ok(None);
        };
        let text = std::fs::read_to_string(path).map_err(|source| ExperimentError::Io {
            path: path.clone(),
            source,
        })?;
        Ok(Some(Graph::load_edge_list(&text)?))
    }
}

fn graph_for(cfg: &ExperimentConfig, fixed: Option<&Graph>, n: usize) -> Result<Graph, ExperimentError> {
    let graph = match fixed {
        Some(g) if g.n_nodes() == n => g.clone(),
        Some(g) => {
            return Err(ExperimentError::InvalidConfig(format!(
                "edge list has {} nodes but N = {n} was requested",
                g.n_nodes()
            )))
        }
        None => Graph::generate(cfg.graph_kind, n)?,
    };
    if !graph.is_connected() {
        return Err(ExperimentError::Disconnected(n));
    }
    Ok(graph)
}

/// Results for one agent count.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRow {
    pub n_agents: usize,
    pub edge_count: usize,
    /// Mean inter-event time `g₂`.
    pub e_t: EstimateWithCI,
    /// Mean of `R(T)⁴`, `g₁`.
    pub r4: EstimateWithCI,
    pub q_bessel: EstimateWithCI,
    pub q_direct: Option<EstimateWithCI>,
    /// Periodic cost at period `e_t.mean`.
    pub j_ttc_at_e_t: f64,
    /// Event-triggered cost `q_bessel.mean / e_t.mean`.
    pub j_et: f64,
    pub ratio: RatioWithCI,
    pub e_t_refined_theory: f64,
    pub var_t: f64,
    pub var_t_theory: f64,
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ExperimentRow>, ExperimentError> {
    cfg.validate()?;
    let fixed = cfg.load_edge_list()?;
    let mut counts = cfg.agent_counts.clone();
    counts.sort_unstable();
    counts.dedup();
    // Check every graph before any simulation starts.
    let graphs = counts
        .iter()
        .map(|&n| graph_for(cfg, fixed.as_ref(), n))
        .collect::<Result<Vec<_>, _>>()?;
    graphs
        .iter()
        .map(|g| run_agent_count(cfg, g))
        .collect()
}

/// Runs the experiment on a dedicated pool of `workers` threads. The result
/// does not depend on `workers`.
pub fn run_experiment_with_workers(
    cfg: &ExperimentConfig,
    workers: usize,
) -> Result<Vec<ExperimentRow>, ExperimentError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| ExperimentError::InvalidConfig(format!("thread pool: {e}")))?;
    pool.install(|| run_experiment(cfg))
}

fn run_agent_count(cfg: &ExperimentConfig, graph: &Graph) -> Result<ExperimentRow, ExperimentError> {
    let n = graph.n_nodes();
    let edge_count = graph.directed_edge_count();
    let mode = Mode::Event { delta: cfg.delta };
    let spec_t = BatchSpec {
        n_agents: n,
        h: cfg.step_h,
        master_seed: cfg.master_seed,
        first_run: 0,
        n_runs: cfg.runs_t,
        mode,
    };
    let spec_q = BatchSpec {
        first_run: cfg.runs_t as u64,
        n_runs: cfg.runs_q,
        ..spec_t
    };

    let t_samples: Vec<f64> = run_batch(&spec_t)?.iter().map(|s| s.t_exit).collect();
    let q_batch = run_batch(&spec_q)?;
    let r4_samples: Vec<f64> = q_batch.iter().map(|s| s.r4).collect();

    let e_t = mean_ci(&t_samples, cfg.gamma)?;
    let r4 = mean_ci(&r4_samples, cfg.gamma)?;
    let q_bessel = r4.scaled(bessel_scale(n, edge_count));
    let q_direct = if cfg.cross_check {
        let q1: Vec<f64> = q_batch.iter().map(|s| s.q1).collect();
        Some(mean_ci(&q1, cfg.gamma)?.scaled(edge_count as f64))
    } else {
        None
    };
    let d2 = cfg.delta * cfg.delta;
    let nf = n as f64;
    Ok(ExperimentRow {
        n_agents: n,
        edge_count,
        e_t,
        r4,
        q_bessel,
        q_direct,
        j_ttc_at_e_t: j_ttc(edge_count, e_t.mean)?,
        j_et: q_bessel.mean / e_t.mean,
        ratio: cost_ratio(&r4, &e_t, n)?,
        e_t_refined_theory: d2 * expected_exit_asymptote(nf, ExitOrder::Refined)?,
        var_t: e_t.var,
        var_t_theory: d2 * d2 * variance_asymptote(nf)?,
    })
}

/// Bracket of the agent count beyond which periodic triggering wins.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Crossover {
    /// Largest `N` whose ratio interval lies entirely below 1.
    pub n_low: Option<usize>,
    /// Smallest `N` from which on every ratio interval lies entirely above 1.
    pub n_high: usize,
}

/// Locates the crossover in rows sorted by `N`. Returns `None` when no
/// suffix of the grid is significantly above 1.
pub fn find_crossover(rows: &[ExperimentRow]) -> Option<Crossover> {
    let above = |r: &ExperimentRow| r.ratio.lo > 1.0;
    let tail = rows.iter().rev().take_while(|r| above(r)).count();
    if tail == 0 {
        return None;
    }
    let n_high = rows[rows.len() - tail].n_agents;
    let n_low = rows
        .iter()
        .filter(|r| r.ratio.hi < 1.0)
        .map(|r| r.n_agents)
        .max();
    Some(Crossover { n_low, n_high })
}

/// Simulates the full trajectory over `horizon` seconds with a reset to the
/// origin at every trigger and returns the time-averaged `xᵀ L x`.
pub fn long_run_oracle<S: IncrementSource>(
    graph: &Graph,
    scheme: Mode,
    horizon: f64,
    h: f64,
    source: &mut S,
) -> Result<f64, ExperimentError> {
    if !graph.is_connected() {
        return Err(ExperimentError::Disconnected(graph.n_nodes()));
    }
    check_step(h)?;
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(ExperimentError::InvalidConfig(format!(
            "horizon must be positive, got {horizon}"
        )));
    }
    let period_steps = match scheme {
        Mode::Event { delta } if !(delta > 0.0 && delta.is_finite()) => {
            return Err(TriggerError::InvalidThreshold(delta).into())
        }
        Mode::Event { .. } => None,
        Mode::Periodic { t_period } if !(t_period > 0.0 && t_period.is_finite()) => {
            return Err(TriggerError::InvalidPeriod(t_period).into())
        }
        Mode::Periodic { t_period } => Some(periodic_step_count(t_period, h)),
    };
    let n_steps = periodic_step_count(horizon, h);
    if n_steps > DEFAULT_STEP_CAP {
        return Err(TriggerError::StepCapExceeded {
            steps: n_steps,
            delta: match scheme {
                Mode::Event { delta } => delta,
                Mode::Periodic { .. } => f64::NAN,
            },
            h,
        }
        .into());
    }

    let edges: Vec<(usize, usize)> = graph.edges().collect();
    let n = graph.n_nodes();
    let mut x = vec![0.0; n];
    let mut dx = vec![0.0; n];
    let mut integral = 0.0;
    let mut prev_energy = 0.0;
    let mut since_reset: u64 = 0;
    for k in 0..n_steps {
        let dt = if k + 1 == n_steps {
            horizon - (n_steps - 1) as f64 * h
        } else {
            h
        };
        source.fill_increments(dt, &mut dx);
        for (xi, di) in x.iter_mut().zip(&dx) {
            *xi += di;
        }
        since_reset += 1;
        let energy: f64 = edges
            .iter()
            .map(|&(i, j)| {
                let d = x[i] - x[j];
                d * d
            })
            .sum();
        integral += 0.5 * dt * (prev_energy + energy);
        let fire = match (scheme, period_steps) {
            (Mode::Event { delta }, _) => x.iter().any(|v| v.abs() >= delta),
            (_, Some(p)) => since_reset == p,
            (Mode::Periodic { .. }, None) => unreachable!(),
        };
        if fire {
            x.iter_mut().for_each(|v| *v = 0.0);
            prev_energy = 0.0;
            since_reset = 0;
        } else {
            prev_energy = energy;
        }
    }
    Ok(integral / horizon)
}

pub const CSV_COLUMNS: [&str; 14] = [
    "n_agents",
    "e_t_mean",
    "e_t_lo",
    "e_t_hi",
    "q_bessel_mean",
    "q_bessel_lo",
    "q_bessel_hi",
    "j_ttc",
    "ratio",
    "ratio_lo",
    "ratio_hi",
    "e_t_theory_refined",
    "var_t",
    "var_t_theory",
];

/// Renders rows as CSV with a header line, 17 significant digits per value,
/// and `\n` line endings.
pub fn emit_csv(rows: &[ExperimentRow]) -> String {
    let mut out = CSV_COLUMNS.join(",");
    out.push('\n');
    for r in rows {
        let values = [
            r.e_t.mean,
            r.e_t.lo,
            r.e_t.hi,
            r.q_bessel.mean,
            r.q_bessel.lo,
            r.q_bessel.hi,
            r.j_ttc_at_e_t,
            r.ratio.ratio,
            r.ratio.lo,
            r.ratio.hi,
            r.e_t_refined_theory,
            r.var_t,
            r.var_t_theory,
        ];
        out.push_str(&r.n_agents.to_string());
        for v in values {
            out.push_str(&format!(",{v:.16e}"));
        }
        out.push('\n');
    }
    out
}
