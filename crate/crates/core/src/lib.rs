//! Relay-assisted over-the-air aggregation for federated learning.
//!
//! Devices send normalized model updates over a shared wireless medium in two
//! phases; amplify-and-forward relays repeat the first phase so the access
//! point can combine both receptions into one estimate of the weighted sum.

pub mod aggregation;
pub mod channel;
pub mod error;
pub mod experiment;
pub mod federated;
pub mod optimizer;
#[cfg(any(test, feature = "oracles"))]
pub mod oracles;
pub mod seeds;
pub mod single_relay;

pub use aggregation::{
    norelay_optimum, relay_mse, DeviceWeights, NoRelaySolution, NormalizationStats, PowerBudget, TransceiverConfig,
};
pub use channel::{ChannelRealization, NodeLayout, PathGains, PathLossParams};
pub use error::{Error, Result};
pub use optimizer::{SchemeVariant, SolverConfig, SolverTrace, Termination};
pub use seeds::{StreamPurpose, TrialSeed};
