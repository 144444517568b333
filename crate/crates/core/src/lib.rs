//! Physician collaboration networks from hospital insurance claims.
//!
//! The crate covers the whole analysis chain: parsing or synthesizing claims
//! ([`claims`]), building per-hospital patient–physician graphs and their
//! physician projections ([`network`]), Freeman centralization
//! ([`centrality`]), Markov random graph sampling and estimation
//! ([`ergm`]), regression and t-tests ([`stats`]) and the staged pipeline
//! that ties them together ([`pipeline`]).

pub mod centrality;
pub mod claims;
pub mod ergm;
pub mod network;
pub mod pipeline;
pub mod stats;
