//! Unit-quantity continuous double auction on the price grid `1..=N`.
//!
//! * [`model`]: order book and the placement and matching rules.
//! * [`simulator`]: event-driven Monte Carlo of the four Poisson order streams.
//! * [`chain`]: the low-traffic trade-price Markov chain, its invariant
//!   distribution and mean first-passage times.
//! * [`fpt`]: the two-barrier step distribution and the Gamma-mixture
//!   approximation of the first-passage time for `n = 1`.
//! * [`stats`]: ECDFs, histograms and the two-sample KS test.

pub mod chain;
pub mod error;
pub mod fpt;
pub mod model;
pub mod rng;
pub mod simulator;
pub mod stats;

pub use chain::{
    block_matrix, invariant_distribution, mean_fpt_continuous, mean_fpt_discrete,
    transition_matrix, transition_matrix_exact, BlockParams, ExactTransitionMatrix,
    PriceDistribution, TransitionMatrix,
};
pub use error::{Error, Result};
pub use fpt::{discrete_fpt_pmf, DiscreteFptDist, MixtureApprox};
pub use model::{AuctionState, Event, EventKind, ModelParams, OrderBook, Price, Side, Trade};
pub use rng::{RngSpec, SimRng, StreamPurpose};
pub use simulator::{first_passage_sample, run_path, Auction, FptSample, PricePath};
pub use stats::{ks_two_sample, Ecdf, KsResult};
