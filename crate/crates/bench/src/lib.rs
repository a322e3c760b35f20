//! Synthetic inputs shared by the benchmarks.

use ndarray::Array2;
use spnorm_core::Sample;

/// Deterministic `n × d` sample with mildly irregular entries.
pub fn synthetic_sample(n: usize, d: usize, salt: u64) -> Sample {
    let data = Array2::from_shape_fn((n, d), |(i, j)| {
        let h = spnorm_core::rng::splitmix64(salt ^ ((i as u64) << 32 | j as u64));
        (h >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    });
    Sample::new(data).expect("finite synthetic data")
}
