//! # emoconn
//!
//! Emotion recognition from EEG functional connectivity.
//!
//! ```text
//! Recording ──► signal::preprocess ──► signal::band_decompose ──► signal::segment
//!                                                                     │
//!            connectivity::{pearson_matrix, coherence_matrix} ◄───────┘
//!                          │
//!            subnetwork::select_critical_subnetwork (training fold only)
//!                          │
//!            subnetwork::apply_mask ──► graph_features::{strength, clustering, eigencentrality}
//!                                                     │
//!            smoothing::lds_smooth ──► selection::mrmr_select
//!                                                     │
//!            fusion::train_dcca (optional, with a second modality) ──► classify::svm_train
//! ```
//!
//! The [`harness`] module wires these stages into the SEED / SEED-V / DEAP
//! evaluation protocols, generates synthetic planted-connectivity datasets and
//! writes reports. The `emoconn` binary exposes the same stages as subcommands.

pub mod classify;
pub mod connectivity;
pub mod error;
pub mod fusion;
pub mod graph_features;
pub mod harness;
pub mod linalg;
pub mod selection;
pub mod signal;
pub mod smoothing;
pub mod subnetwork;
pub mod table;

pub use error::{Error, Result};
