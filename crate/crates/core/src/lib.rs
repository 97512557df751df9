//! Constant step-size SGD and accelerated SGD for finite sums satisfying
//! growth conditions, with growth-constant estimators, a margin data
//! generator and an experiment harness.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod growth;
pub mod harness;
pub mod numerics;
pub mod objectives;
pub mod optimizers;

pub use error::{Error, Result};
pub use growth::{GrowthEstimate, GrowthRoute};
pub use harness::record::{MetricRow, RunRecord, CSV_HEADER};
pub use numerics::{Matrix, Rng, Vector};
pub use objectives::{Dataset, FiniteSum, LossKind, Objective, Smoothness};
pub use optimizers::{AccelMode, AccelSchedule, AccelState, Method, RunSettings, Sgd, SgdConfig};
