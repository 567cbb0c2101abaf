//! Coverage and capacity optimization for multi-sector cellular networks.
//!
//! The crate simulates per-sector RSRP maps, turns a joint downtilt/power
//! configuration into two coverage objectives, and provides three black-box
//! optimizers over that configuration space: uniform random search,
//! multi-objective Bayesian optimization with expected hypervolume
//! improvement, and DDPG over scalarized rewards.

pub mod ddpg;
pub mod error;
pub mod gp;
pub mod mobo;
pub mod objectives;
pub mod pareto;
pub mod random;
pub mod rfmap;

pub use error::{Error, Result};

/// Derives an independent 64-bit seed for sub-stream `stream` of `seed`.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    use rand::{RngCore, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng.next_u64()
}
