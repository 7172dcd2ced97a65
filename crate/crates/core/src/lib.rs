//! Secretary-problem stopping rules with a precursor signal that arrives no
//! later than the best item.
//!
//! Exact formulas for the random-order and adversarial models, the
//! multi-signal full-history model, brute-force oracles, executable policies
//! and a seeded Monte Carlo harness.

pub mod adversarial;
pub mod error;
pub mod experiments;
pub mod full_history;
pub mod monte_carlo;
pub mod numeric;
pub mod oracle;
pub mod policy;
pub mod random_order;
pub mod signal;

pub use error::{PrecursorError, Result};
pub use experiments::{Experiment, ExperimentConfig, ExperimentRegistry, NRange, Table};
pub use monte_carlo::{ExperimentReport, MonteCarlo};
pub use policy::{
    Decision, DecisionContext, PolicyKind, PolicyParams, PolicyRegistry, StoppingRule,
};
pub use signal::{SignalEvent, SignalKind, SignalSpec};
