//! Probabilistic cost-effectiveness analysis from cost/survival data.
//!
//! This crate estimates the *net benefit separation* (NBS) — the probability
//! that a randomly sampled individual net benefit under treatment exceeds one
//! under control — together with the classical net monetary benefit (NMB),
//! over a grid of willingness-to-pay thresholds. The NBS plotted against the
//! threshold is the cost-effectiveness determination (CED) curve; the share
//! of positive bootstrapped NMB estimates is the acceptability (CEA) curve.
//!
//! Observational data are handled by Monte-Carlo standardization over the
//! empirical covariate distribution (confounding) and inverse
//! probability-of-censoring weights (informative cost censoring). A
//! simulation lab generates benchmark scenarios and replication reports.
//!
//! See the `book/` guide for a narrative walk-through; its code snippets are
//! compiled as doc-tests of this crate.

pub mod domain;
pub mod inference;
pub mod ipcw;
pub mod models;
pub mod rankstats;
pub mod rng;
pub mod simlab;
pub mod standardize;

mod frame;

#[cfg(doctest)]
mod book;

pub use domain::{
    validate_dataset, CostEffectivenessDataset, CurvePoint, Observation, ValidatedDataset,
    ValidationReport, WtpGrid,
};
