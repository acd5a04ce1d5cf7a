//! One renewal interval per Monte Carlo run.
//!
//! All agents start at the origin (the state right after a reset to
//! consensus) and follow independent Brownian motions. Under the level
//! trigger the interval ends at the first grid time where some coordinate
//! satisfies `|x_i| >= delta`; under periodic triggering it ends at the fixed
//! period. Exit detection happens on the simulation grid only and the
//! overshot grid state is kept, so `t_exit` is always a whole number of steps.

use rayon::prelude::*;
use thiserror::Error;

use crate::graph::Graph;
use crate::stochastic::{check_step, make_stream, IncrementSource, StochasticError};

pub const DEFAULT_STEP_CAP: u64 = 1_000_000_000;

#[derive(Debug, Error, PartialEq)]
pub enum TriggerError {
    #[error(transparent)]
    Step(#[from] StochasticError),
    #[error("need at least one agent")]
    NoAgents,
    #[error("threshold must be positive and finite, got {0}")]
    InvalidThreshold(f64),
    #[error("period must be positive and finite, got {0}")]
    InvalidPeriod(f64),
    #[error("batch needs at least one run")]
    EmptyBatch,
    #[error(
        "no trigger after {steps} steps (threshold {delta}, step {h}); \
         the threshold is probably far too large for this step size"
    )]
    StepCapExceeded { steps: u64, delta: f64, h: f64 },
}

/// Quantities recorded for one renewal interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriggerSample {
    /// Interval length in seconds.
    pub t_exit: f64,
    /// Fourth power of the Bessel radius at the end of the interval.
    pub r4: f64,
    /// Trapezoidal integral of the first agent's squared state.
    pub q1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExitOptions {
    pub step_cap: u64,
    /// Also declare an exit when a Brownian bridge between two grid points
    /// crosses the threshold. Off by default; meant for bias studies.
    pub bridge_crossing: bool,
}

impl Default for ExitOptions {
    fn default() -> Self {
        Self {
            step_cap: DEFAULT_STEP_CAP,
            bridge_crossing: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mode {
    Event { delta: f64 },
    Periodic { t_period: f64 },
}

fn check_threshold(delta: f64) -> Result<(), TriggerError> {
    if delta > 0.0 && delta.is_finite() {
        Ok(())
    } else {
        Err(TriggerError::InvalidThreshold(delta))
    }
}

fn check_period(t_period: f64) -> Result<(), TriggerError> {
    if t_period > 0.0 && t_period.is_finite() {
        Ok(())
    } else {
        Err(TriggerError::InvalidPeriod(t_period))
    }
}

/// Probability that a Brownian bridge of variance `h` from `a` to `b`
/// touches `±delta`, both endpoints strictly inside.
fn bridge_crossing_probability(a: f64, b: f64, delta: f64, h: f64) -> f64 {
    let upper = (-2.0 * (delta - a) * (delta - b) / h).exp();
    let lower = (-2.0 * (delta + a) * (delta + b) / h).exp();
    (upper + lower).min(1.0)
}

/// Level-trigger interval. `observe` sees the state after every step
/// together with a flag telling whether this step ended the interval.
fn simulate_exit<S, F>(
    n_agents: usize,
    delta: f64,
    h: f64,
    source: &mut S,
    opts: &ExitOptions,
    mut observe: F,
) -> Result<TriggerSample, TriggerError>
where
    S: IncrementSource,
    F: FnMut(&[f64], bool),
{
    if n_agents == 0 {
        return Err(TriggerError::NoAgents);
    }
    check_threshold(delta)?;
    check_step(h)?;

    let mut x = vec![0.0; n_agents];
    let mut dx = vec![0.0; n_agents];
    let mut q1 = 0.0;
    let mut steps: u64 = 0;
    loop {
        if steps >= opts.step_cap {
            return Err(TriggerError::StepCapExceeded { steps, delta, h });
        }
        source.fill_increments(h, &mut dx);
        steps += 1;

        let first_before = x[0];
        let mut hit = false;
        for (xi, di) in x.iter_mut().zip(&dx) {
            *xi += di;
            hit |= xi.abs() >= delta;
        }
        if !hit && opts.bridge_crossing {
            for (xi, di) in x.iter().zip(&dx) {
                let p = bridge_crossing_probability(xi - di, *xi, delta, h);
                if p > 0.0 && source.next_uniform() < p {
                    hit = true;
                    break;
                }
            }
        }
        q1 += 0.5 * h * (first_before * first_before + x[0] * x[0]);
        observe(&x, hit);
        if hit {
            break;
        }
    }
    let r2: f64 = x.iter().map(|v| v * v).sum();
    Ok(TriggerSample {
        t_exit: steps as f64 * h,
        r4: r2 * r2,
        q1,
    })
}

/// Samples the first level-trigger interval of `n_agents` agents.
pub fn sample_exit<S: IncrementSource>(
    n_agents: usize,
    delta: f64,
    h: f64,
    source: &mut S,
) -> Result<TriggerSample, TriggerError> {
    simulate_exit(n_agents, delta, h, source, &ExitOptions::default(), |_, _| {})
}

pub fn sample_exit_with<S: IncrementSource>(
    n_agents: usize,
    delta: f64,
    h: f64,
    source: &mut S,
    opts: &ExitOptions,
) -> Result<TriggerSample, TriggerError> {
    simulate_exit(n_agents, delta, h, source, opts, |_, _| {})
}

/// Like [`sample_exit`] on `graph.n_nodes()` agents, additionally returning
/// the trapezoidal integral of `xᵀ L x` over the same path. This is the
/// pairwise cost that `|E| · q1` estimates.
pub fn sample_exit_with_energy<S: IncrementSource>(
    graph: &Graph,
    delta: f64,
    h: f64,
    source: &mut S,
) -> Result<(TriggerSample, f64), TriggerError> {
    let mut energy = 0.0;
    let mut prev = 0.0;
    let sample = simulate_exit(
        graph.n_nodes(),
        delta,
        h,
        source,
        &ExitOptions::default(),
        |x, _| {
            let e = graph.energy_unchecked(x);
            energy += 0.5 * h * (prev + e);
            prev = e;
        },
    )?;
    Ok((sample, energy))
}

/// Samples one interval of fixed length `t_period`. The final step is
/// shortened when the period is not a whole number of steps.
pub fn sample_ttc_interval<S: IncrementSource>(
    n_agents: usize,
    t_period: f64,
    h: f64,
    source: &mut S,
) -> Result<TriggerSample, TriggerError> {
    if n_agents == 0 {
        return Err(TriggerError::NoAgents);
    }
    check_period(t_period)?;
    check_step(h)?;

    let n_steps = periodic_step_count(t_period, h);
    let mut x = vec![0.0; n_agents];
    let mut dx = vec![0.0; n_agents];
    let mut q1 = 0.0;
    for k in 0..n_steps {
        let dt = if k + 1 == n_steps {
            t_period - (n_steps - 1) as f64 * h
        } else {
            h
        };
        source.fill_increments(dt, &mut dx);
        let first_before = x[0];
        for (xi, di) in x.iter_mut().zip(&dx) {
            *xi += di;
        }
        q1 += 0.5 * dt * (first_before * first_before + x[0] * x[0]);
    }
    let r2: f64 = x.iter().map(|v| v * v).sum();
    Ok(TriggerSample {
        t_exit: t_period,
        r4: r2 * r2,
        q1,
    })
}

/// `ceil(t_period / h)`, ignoring round-off just above an integer.
pub(crate) fn periodic_step_count(t_period: f64, h: f64) -> u64 {
    let ratio = t_period / h;
    let nearest = ratio.round();
    if (ratio - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        (nearest as u64).max(1)
    } else {
        (ratio.ceil() as u64).max(1)
    }
}

/// A block of Monte Carlo runs over consecutive run indices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchSpec {
    pub n_agents: usize,
    pub h: f64,
    pub master_seed: u64,
    /// Index of the first run; run `first_run + k` uses stream
    /// `make_stream(master_seed, first_run + k)`.
    pub first_run: u64,
    pub n_runs: usize,
    pub mode: Mode,
}

/// Runs the batch on the current rayon pool. The output is ordered by run
/// index regardless of how the runs were scheduled.
pub fn run_batch(spec: &BatchSpec) -> Result<Vec<TriggerSample>, TriggerError> {
    run_batch_with(spec, &ExitOptions::default())
}

pub fn run_batch_with(
    spec: &BatchSpec,
    opts: &ExitOptions,
) -> Result<Vec<TriggerSample>, TriggerError> {
    if spec.n_runs == 0 {
        return Err(TriggerError::EmptyBatch);
    }
    if spec.n_agents == 0 {
        return Err(TriggerError::NoAgents);
    }
    check_step(spec.h)?;
    match spec.mode {
        Mode::Event { delta } => check_threshold(delta)?,
        Mode::Periodic { t_period } => check_period(t_period)?,
    }
    (0..spec.n_runs as u64)
        .into_par_iter()
        .map(|k| {
            let mut stream = make_stream(spec.master_seed, spec.first_run + k);
            match spec.mode {
                Mode::Event { delta } => {
                    sample_exit_with(spec.n_agents, delta, spec.h, &mut stream, opts)
                }
                Mode::Periodic { t_period } => {
                    sample_ttc_interval(spec.n_agents, t_period, spec.h, &mut stream)
                }
            }
        })
        .collect()
}
