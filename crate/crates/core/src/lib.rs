//! Non-Markovian Monte Carlo (NMMC) sampling on directed graphs.
//!
//! A target distribution over the nodes of a directed graph, or the graph's
//! eigenvector centrality, is realized as the quasi-stationary distribution
//! (QSD) of a transient chain built from a proposal walk plus an acceptance
//! rule. The QSD is then estimated by history-dependent random walks that,
//! instead of getting absorbed on rejection, relocate to a node drawn from
//! their own weighted visit history.
//!
//! Module map:
//!
//! - [`graph`]: edge-list loading, SCC / reachability decomposition.
//! - [`oracle`]: power iteration for exact reference distributions.
//! - [`target`]: proposal chains and acceptance ratios that map a target onto a QSD.
//! - [`empirical`]: the weighted historical empirical measure.
//! - [`engine`]: the static and dynamic NMMC simulators.
//! - [`baselines`]: Metropolis-Hastings walks and DURW.
//! - [`metrics`]: TVD, NRMSE, log-log slope, metrics CSV.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod empirical;
pub mod engine;
mod error;
pub mod graph;
pub mod metrics;
pub mod oracle;
pub mod target;

pub use error::{Error, Result};
