//! Online learning to rank with a neural pairwise ranker.
//!
//! The crate implements a small fully-connected scoring network that is
//! trained online from simulated click feedback. Exploration is confined to
//! document pairs whose predicted order is still statistically uncertain:
//! confident pairwise orders become edges of a DAG, and results are served by
//! a randomized topological sort that preserves every confident order while
//! shuffling the rest.
//!
//! Module map:
//! - [`data`]: LETOR/SVMLight loading, symmetric feature augmentation, and
//!   seeded synthetic datasets with a known ground-truth scorer.
//! - [`neural`]: the scoring network, tangent features, the pairwise
//!   cross-entropy objective, and full-batch gradient-descent training.
//! - [`exploration`]: the regularized design-matrix state, pairwise
//!   confidence widths, certain-order edges, and randomized topological sort.
//! - [`clicks`]: dependent click model personas and independent-pair harvest.
//! - [`metrics`]: NDCG@k, discounted cumulative NDCG, and pairwise
//!   (Kendall-tau) regret.
//! - [`baselines`]: epsilon-greedy and exploit-only serving over the same
//!   trained scorer.
//! - [`runner`]: the experiment loop, config parsing, and CSV/JSON emission.

pub mod baselines;
pub mod clicks;
pub mod data;
mod error;
pub mod exploration;
pub mod metrics;
pub mod neural;
pub mod runner;

pub use error::{Error, Result};

/// A served ranking: element `r` is the document index placed at rank `r`
/// (rank 0 is the top position).
pub type Ranking = Vec<usize>;
