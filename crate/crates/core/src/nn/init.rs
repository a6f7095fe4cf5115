use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{cast, Scalar};
use crate::template::scale_factor;

/// Independent random stream for one parameter block. Streams keep layers
/// decoupled: re-initializing one layer never shifts another's draws.
pub fn layer_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `n` draws from `U[-√3·σ, √3·σ]` with `σ = √(2 / (height·width·in_channels))`,
/// which gives standard deviation `σ`.
pub fn he_uniform<T: Scalar>(
    n: usize,
    height: usize,
    width: usize,
    in_channels: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<T> {
    let sigma = scale_factor(height, width, in_channels).expect("layer dimensions are positive");
    let bound = 3f64.sqrt() * sigma;
    let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
    (0..n).map(|_| cast(dist.sample(rng))).collect()
}
