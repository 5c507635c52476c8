//! Profitability laboratory for deviant Bitcoin mining strategies.
//!
//! Closed-form revenue ratios and apparent hashrates for lead-stubborn and
//! equal-fork-stubborn mining, a discrete-event Monte Carlo simulator of
//! the underlying Poisson block races that validates them, and a
//! (q, gamma) parameter sweep that maps which strategy wins where.

pub mod catalan;
pub mod cli;
pub mod closed_form;
pub mod race_sim;
pub mod sweep;

#[cfg(test)]
pub(crate) mod test_support;

pub use catalan::{CatalanDistribution, CatalanKind};
pub use closed_form::{GammaZeroMode, MiningParams, StrategyMetrics};
pub use race_sim::{
    run_monte_carlo, simulate_cycle, CycleOutcome, MonteCarloEstimate, SimulatedMetrics,
    StrategyKind,
};
pub use sweep::{compute_map, emit_map, GridSpec, MapFormat, RegionMap, SmMode};
