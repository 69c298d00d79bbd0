//! Inverter open-switch fault and false-data-injection diagnosis workbench.
//!
//! The crate covers the whole path from synthetic three-phase waveforms to a
//! staged diagnosis:
//!
//! - [`sim`] synthesizes healthy and open-switch-faulted inverter outputs,
//! - [`anomaly`] injects FDI noise into the current sensors,
//! - [`features`] maps records to αβ/dq window statistics,
//! - [`classifiers`] holds the DT/KNN/SVM/MLP learners,
//! - [`pipeline`] runs detection, anomaly-vs-hardware typing and switch
//!   localization,
//! - [`store`] generates and persists corpora, splits them and scores models,
//! - [`eval`] builds the per-scenario comparison and evaluation reports,
//! - [`bundle`] saves and reloads trained predictors.

pub mod anomaly;
pub mod bundle;
pub mod classifiers;
pub mod error;
pub mod eval;
pub mod features;
pub mod pipeline;
pub mod rng;
pub mod sim;
pub mod store;

pub use error::{Error, Result};
