//! Distribution-free prediction sets for regression and classification on
//! network-linked data.
//!
//! The crate generates exchangeable network data (graphon, dot-product, and
//! latent-space models, with an optional autoregressive response), extracts
//! node covariates from graph structure (degrees, spectral embeddings,
//! neighborhood summaries), and wraps any of the bundled predictors in split
//! conformal calibration: scores on a held-out calibration set give a
//! finite-sample threshold, and inverting the score at a new node yields an
//! interval (or label set) with guaranteed marginal coverage.
//!
//! Start with the `examples/` directory — each file is a runnable walkthrough
//! of one capability — or with [`experiments`] for the end-to-end simulation
//! studies and `netconform` (the CLI binary) for file-driven runs.

pub mod cli;
pub mod conformal;
pub mod covariates;
pub mod data;
pub mod error;
pub mod experiments;
pub mod graph;
pub mod graphgen;
pub mod linalg;
pub mod regress;
pub mod rng;

pub use error::{Error, Result};
pub use graph::Graph;
pub use rng::{Purpose, RngStream};
