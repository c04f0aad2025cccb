//! Neural network training in random subspaces that are re-drawn every
//! step, with the fixed-subspace and evolution-strategies baselines, a
//! simulated multi-worker variant and diagnostics.
//!
//! Random directions are never stored: every basis vector is regenerated on
//! demand from a counter-based stream addressed by
//! `(seed, step, worker, compartment, direction)`.

pub mod analysis;
pub mod config;
pub mod data;
pub mod distrib;
pub mod error;
pub mod experiment;
pub mod nn;
pub mod objective;
pub mod optim;
pub mod output;
pub mod prng;
pub mod subspace;

pub use error::{Error, Result};
pub use nn::{NetworkSpec, ParamVector};
pub use objective::Objective;
pub use optim::{Optimizer, OptimizerConfig, Rule};
pub use prng::{Distribution, StreamKey};
pub use subspace::{Basis, BasisDescriptor, CompartmentScheme, SchemeKind};
