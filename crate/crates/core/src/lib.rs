//! Learning the best path between two nodes of a noisy quantum network.

pub mod baselines;
pub mod bench;
pub mod channel;
pub mod design;
pub mod error;
pub mod harness;
pub mod link_learner;
pub mod network;
pub mod path_learner;
pub mod qkd;
pub mod trace;

pub use error::{Error, Result};

/// Random stream used by a single trial.
pub type TrialRng = rand_chacha::ChaCha8Rng;
