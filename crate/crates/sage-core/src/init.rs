//! Depth-scaled truncated-normal weight initialization.
//!
//! Entries are drawn from N(0, σ²) with σ = 0.02/√(2L), where L is the
//! layer count, and resampled until they land inside ±2σ. Sampling is done
//! in `f64` and converted afterwards so the stream of draws is identical
//! for every scalar type.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{CoreError, CoreResult};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// σ = 0.02/√(2L).
pub fn init_sigma(num_layers: usize) -> f64 {
    0.02 / (2.0 * num_layers as f64).sqrt()
}

/// One truncated-normal draw: N(0, σ²) conditioned on |v| ≤ 2σ, by
/// rejection. Acceptance probability is ~95%, so the loop is short.
pub fn truncated_normal_draw<R: Rng + ?Sized>(rng: &mut R, sigma: f64) -> f64 {
    loop {
        let z: f64 = rng.sample(StandardNormal);
        let v = z * sigma;
        if v.abs() <= 2.0 * sigma {
            return v;
        }
    }
}

/// Fills a slice with truncated-normal draws at the given σ.
pub fn fill_truncated_normal<S: Scalar, R: Rng + ?Sized>(rng: &mut R, sigma: f64, out: &mut [S]) {
    for slot in out {
        *slot = S::of_f64(truncated_normal_draw(rng, sigma));
    }
}

/// Fresh weight matrix for a network of `num_layers` layers, deterministic
/// per seed.
pub fn init_weights<S: Scalar>(
    rows: usize,
    cols: usize,
    num_layers: usize,
    seed: u64,
) -> CoreResult<Tensor<S>> {
    if rows == 0 || cols == 0 {
        return Err(CoreError::InvalidArgument(format!(
            "init_weights: non-positive dimensions {rows}x{cols}"
        )));
    }
    if num_layers == 0 {
        return Err(CoreError::InvalidArgument(
            "init_weights: num_layers must be at least 1".into(),
        ));
    }
    let sigma = init_sigma(num_layers);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = vec![S::zero(); rows * cols];
    fill_truncated_normal(&mut rng, sigma, &mut data);
    Tensor::matrix(rows, cols, data)
}
