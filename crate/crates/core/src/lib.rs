//! Hierarchical classification with an ultrametric win.
//!
//! - [`taxonomy`]: the class tree and its path queries.
//! - [`hierloss`]: propagation, wins, win weights, training losses, decoding.
//! - [`textmodel`]: a fastText-style linear classifier over unigrams and
//!   hashed bigrams.
//! - [`trainer`]: SGD with a linearly decaying learning rate.
//! - [`evaluation`]: the per-run metric table.
//! - [`synth`]: random taxonomies and synthetic corpora for tests and demos.

pub mod evaluation;
pub mod fnv;
pub mod hierloss;
pub mod synth;
pub mod taxonomy;
pub mod textmodel;
pub mod trainer;

pub use hierloss::{LossGrad, WinKind, WinWeights};
pub use taxonomy::{NodeId, Taxonomy, TaxonomyError};
