//! Fixtures shared by the benchmarks.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use relayfl_core::channel::{NodeLayout, PathGains, PathLossParams};
use relayfl_core::ChannelRealization;

/// A line-topology channel draw with `k` devices and `n` relays.
pub fn line_instance(k: usize, n: usize, seed: u64) -> ChannelRealization {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layout = NodeLayout::line(&Default::default(), k, n, &mut rng);
    let gains = PathGains::from_layout(&layout, &PathLossParams::default()).expect("valid gains");
    gains.realize(&mut rng)
}

/// Channel with every coefficient equal to one.
pub fn unit_instance(k: usize, n: usize) -> ChannelRealization {
    let one = Complex64::new(1.0, 0.0);
    ChannelRealization::new(vec![one; k], vec![one; k * n], vec![one; n]).expect("valid channel")
}
