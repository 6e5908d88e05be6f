//! Constructive incremental transfer learning for few-label regression,
//! with battery state-of-health estimation as the motivating task.
//!
//! A source model is grown node by node on a data-rich domain ([`rscn`]);
//! a target model is then grown on a handful of labeled target cycles plus
//! unlabeled ones, guided by the source model's pseudo-labels and a graph
//! Laplacian over target inputs ([`citl`]).

pub mod citl;
pub mod data;
pub mod error;
pub mod eval;
pub mod growth;
pub mod model;
pub mod numcore;
pub mod oracle;
pub mod rscn;

pub use error::{Error, Result};
pub use model::{Activation, ModelKind, ShallowModel};
pub use numcore::{Matrix, RngStream};
