//! Reproducible random streams and Brownian stepping.
//!
//! Every Monte Carlo run owns one [`RngStream`], keyed by `(master_seed,
//! run_index)`. The stream is a ChaCha8 generator whose key is derived from
//! the master seed and whose 64-bit stream id is the run index, so run `k`
//! draws the same numbers no matter which worker executes it or in which
//! order runs are scheduled.
//!
//! Simulation code never talks to the generator directly; it pulls
//! increments through [`IncrementSource`], which lets tests substitute
//! prescribed increments.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StochasticError {
    #[error("step size must be positive and finite, got {0}")]
    InvalidStep(f64),
}

pub(crate) fn check_step(h: f64) -> Result<(), StochasticError> {
    if h > 0.0 && h.is_finite() {
        Ok(())
    } else {
        Err(StochasticError::InvalidStep(h))
    }
}

/// Source of Gaussian increments for `n` independent coordinates.
pub trait IncrementSource {
    /// Fills `out` with independent Normal(0, h) draws, one per coordinate.
    fn fill_increments(&mut self, h: f64, out: &mut [f64]);

    /// Uniform draw on `[0, 1)`. Only the Brownian-bridge crossing test uses it.
    fn next_uniform(&mut self) -> f64;
}

impl<S: IncrementSource + ?Sized> IncrementSource for &mut S {
    fn fill_increments(&mut self, h: f64, out: &mut [f64]) {
        (**self).fill_increments(h, out)
    }

    fn next_uniform(&mut self) -> f64 {
        (**self).next_uniform()
    }
}

/// Deterministic per-run random stream.
#[derive(Debug, Clone)]
pub struct RngStream {
    master_seed: u64,
    run_index: u64,
    rng: ChaCha8Rng,
}

pub fn make_stream(master_seed: u64, run_index: u64) -> RngStream {
    RngStream::new(master_seed, run_index)
}

impl RngStream {
    pub fn new(master_seed: u64, run_index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(run_index);
        Self {
            master_seed,
            run_index,
            rng,
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn run_index(&self) -> u64 {
        self.run_index
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    #[inline]
    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// One Normal(0, h) draw.
    pub fn gaussian_increment(&mut self, h: f64) -> Result<f64, StochasticError> {
        check_step(h)?;
        Ok(h.sqrt() * self.standard_normal())
    }
}

impl IncrementSource for RngStream {
    #[inline]
    fn fill_increments(&mut self, h: f64, out: &mut [f64]) {
        // sqrt(c² h) == c sqrt(h) exactly for power-of-two c, which keeps
        // paths at matched step sizes exact rescalings of each other.
        let sd = h.sqrt();
        for v in out {
            *v = sd * self.standard_normal();
        }
    }

    fn next_uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }
}

/// Prescribed increments for deterministic tests.
///
/// Values are consumed coordinate by coordinate, step by step. In `raw` mode
/// they are used as the increments themselves; in `standard` mode they are
/// treated as standard normal draws and scaled by `sqrt(h)`. Once the script
/// runs out every further increment is zero.
#[derive(Debug, Clone)]
pub struct ScriptedIncrements {
    values: Vec<f64>,
    pos: usize,
    scale_by_step: bool,
    uniform: f64,
}

impl ScriptedIncrements {
    pub fn raw(values: Vec<f64>) -> Self {
        Self {
            values,
            pos: 0,
            scale_by_step: false,
            uniform: 1.0,
        }
    }

    pub fn standard(values: Vec<f64>) -> Self {
        Self {
            scale_by_step: true,
            ..Self::raw(values)
        }
    }

    pub fn zeros() -> Self {
        Self::raw(Vec::new())
    }

    /// Value returned by every `next_uniform` call. Defaults to 1.0, which
    /// never triggers a bridge crossing.
    pub fn with_uniform(mut self, u: f64) -> Self {
        self.uniform = u;
        self
    }

    pub fn consumed(&self) -> usize {
        self.pos
    }
}

impl IncrementSource for ScriptedIncrements {
    fn fill_increments(&mut self, h: f64, out: &mut [f64]) {
        let scale = if self.scale_by_step { h.sqrt() } else { 1.0 };
        for v in out {
            *v = self.values.get(self.pos).map_or(0.0, |z| scale * z);
            self.pos += 1;
        }
    }

    fn next_uniform(&mut self) -> f64 {
        self.uniform
    }
}

/// Flips the sign of one coordinate's increments.
#[derive(Debug)]
pub struct NegateAgent<S> {
    inner: S,
    agent: usize,
}

impl<S> NegateAgent<S> {
    pub fn new(inner: S, agent: usize) -> Self {
        Self { inner, agent }
    }
}

impl<S: IncrementSource> IncrementSource for NegateAgent<S> {
    fn fill_increments(&mut self, h: f64, out: &mut [f64]) {
        self.inner.fill_increments(h, out);
        if let Some(v) = out.get_mut(self.agent) {
            *v = -*v;
        }
    }

    fn next_uniform(&mut self) -> f64 {
        self.inner.next_uniform()
    }
}

/// Relabels coordinates: coordinate `i` receives the increment the inner
/// source produced for coordinate `perm[i]`.
#[derive(Debug)]
pub struct PermuteAgents<S> {
    inner: S,
    perm: Vec<usize>,
    buf: Vec<f64>,
}

impl<S> PermuteAgents<S> {
    pub fn new(inner: S, perm: Vec<usize>) -> Self {
        let mut check = perm.clone();
        check.sort_unstable();
        assert!(
            check.iter().enumerate().all(|(i, &p)| i == p),
            "not a permutation: {perm:?}"
        );
        let buf = vec![0.0; perm.len()];
        Self { inner, perm, buf }
    }
}

impl<S: IncrementSource> IncrementSource for PermuteAgents<S> {
    fn fill_increments(&mut self, h: f64, out: &mut [f64]) {
        assert_eq!(out.len(), self.perm.len(), "permutation size mismatch");
        self.inner.fill_increments(h, &mut self.buf);
        for (o, &p) in out.iter_mut().zip(&self.perm) {
            *o = self.buf[p];
        }
    }

    fn next_uniform(&mut self) -> f64 {
        self.inner.next_uniform()
    }
}

/// Agent states inside one renewal interval. Between triggers no control
/// acts, so `x` is the Brownian vector accumulated since the last reset.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub t: f64,
    pub x: Vec<f64>,
}

impl AgentState {
    /// State right after a reset to consensus at the origin.
    pub fn origin(n_agents: usize) -> Self {
        Self {
            t: 0.0,
            x: vec![0.0; n_agents],
        }
    }

    /// Euler-Maruyama step with zero input. `scratch` must have one slot per agent.
    pub fn advance<S: IncrementSource>(
        &mut self,
        source: &mut S,
        h: f64,
        scratch: &mut [f64],
    ) -> Result<(), StochasticError> {
        check_step(h)?;
        source.fill_increments(h, scratch);
        for (x, dx) in self.x.iter_mut().zip(scratch.iter()) {
            *x += dx;
        }
        self.t += h;
        Ok(())
    }

    pub fn squared_radius(&self) -> f64 {
        self.x.iter().map(|v| v * v).sum()
    }

    /// Radius of the Bessel process, the Euclidean norm of the state.
    pub fn bessel_radius(&self) -> f64 {
        self.squared_radius().sqrt()
    }
}

pub fn step_agents<S: IncrementSource>(
    state: &AgentState,
    source: &mut S,
    h: f64,
) -> Result<AgentState, StochasticError> {
    let mut next = state.clone();
    let mut scratch = vec![0.0; next.x.len()];
    next.advance(source, h, &mut scratch)?;
    Ok(next)
}

pub fn bessel_radius(state: &AgentState) -> f64 {
    state.bessel_radius()
}
