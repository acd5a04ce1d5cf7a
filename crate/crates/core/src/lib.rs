//! Monte Carlo comparison of time-triggered and event-triggered consensus for
//! single-integrator agents driven by independent Brownian noise.
//!
//! Agents are reset to consensus at every trigger, so the long-run cost is a
//! renewal-reward ratio over the first inter-event interval. The periodic
//! cost has a closed form; the event-triggered cost is estimated from
//! simulated level-trigger intervals. See the crate README for the CLI.

pub mod asymptotics;
pub mod estimators;
pub mod experiment;
pub mod graph;
pub mod stochastic;
pub mod triggering;

pub use estimators::{EstimateWithCI, RatioWithCI};
pub use experiment::{ExperimentConfig, ExperimentRow};
pub use graph::{Graph, GraphKind};
pub use stochastic::{make_stream, IncrementSource, RngStream};
pub use triggering::{Mode, TriggerSample};
