//! The experiment protocols. Each returns a sealed [`ExperimentReport`](crate::report::ExperimentReport);
//! trial `k` draws from `Rng::new(seed).substream(k)`.

pub mod classify;
pub mod fig1;
pub mod serial;
pub mod table1;
pub mod uci;

use pim::stats::Rng;

/// A fresh 53-bit seed for an inner generator such as the minibatch order.
pub(crate) fn derive_seed(rng: &mut Rng) -> u64 {
    (rng.uniform() * (1u64 << 53) as f64) as u64
}
