//! Multi-organisation federated learning simulator for flow-based network
//! intrusion detection.
//!
//! The pipeline is: NetFlow CSV ingestion ([`dataio`]), class balancing /
//! splitting / min-max scaling ([`preprocess`]), a from-scratch feed-forward
//! detector with Adam ([`model`]), federated averaging with a server-side
//! optimizer plus the centralised and localised baselines ([`federation`]),
//! and the evaluation metrics reported by the experiment runner ([`metrics`]).

pub mod dataio;
pub mod error;
pub mod federation;
pub mod fixture;
pub mod metrics;
pub mod model;
pub mod preprocess;
pub mod seed;

pub use error::{Error, Result};
