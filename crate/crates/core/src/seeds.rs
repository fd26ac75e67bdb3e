//! Deterministic per-trial random streams.
//!
//! Every Monte Carlo trial gets its own ChaCha stream keyed by
//! `(master seed, trial index, purpose)`, so a trial's draws do not depend on
//! which other trials ran, or in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a stream is used for. Separate purposes never share draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum StreamPurpose {
    Layout = 0,
    Channel = 1,
    Task = 2,
    Partition = 3,
    Noise = 4,
    CsiError = 5,
    Instance = 6,
}

const PURPOSES: u64 = 8;

/// Factory for the random streams of one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialSeed {
    pub master: u64,
    pub trial: u64,
}

impl TrialSeed {
    pub fn new(master: u64, trial: u64) -> Self {
        Self { master, trial }
    }

    pub fn rng(&self, purpose: StreamPurpose) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master);
        rng.set_stream(self.trial.wrapping_mul(PURPOSES).wrapping_add(purpose as u64));
        rng
    }
}
