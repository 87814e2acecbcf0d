//! Expert-guided Bayesian optimisation.
//!
//! At every iteration the loop proposes the utility-optimal point together
//! with a small set of alternates chosen at the knee of a bi-objective
//! trade-off between their summed utility and their spread (log-determinant
//! of the kernel matrix). A practitioner, human or simulated, picks one of
//! these to evaluate.
//!
//! Modules, bottom up:
//!
//! * [`gp`]: Matérn 5/2 Gaussian-process surrogate.
//! * [`acquisition`]: UCB, its maximisation, batch utility and variability.
//! * [`nsga2`]: bi-objective NSGA-II and knee-point selection.
//! * [`engine`]: the propose → select → evaluate loop.
//! * [`practitioner`]: simulated selection behaviours.
//! * [`benchmark`]: test functions, regret and experiment grids.

pub mod acquisition;
pub mod benchmark;
pub mod data;
pub mod engine;
pub mod error;
pub mod gp;
pub mod lhs;
pub mod nsga2;
pub mod optim;
pub mod practitioner;
pub mod rng;

pub use data::{Bounds, Dataset};
pub use engine::{
    initial_design, run_loop, run_loop_with, Choice, ChoiceSet, ChoiceSource, HistoryRecord,
    LoopConfig, LoopOutcome, LoopState, ParetoSummary, Proposal, Selection, Selector,
};
pub use error::{Error, Result};
pub use gp::{fit_gp, FitConfig, GpHyperparams, GpModel};
pub use practitioner::Behavior;
