//! Shared helpers for unit tests.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::channel::{ChannelModel, ChannelTap};
use crate::grid::{DelayDopplerFrame, ReferenceGrid};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_c64(r: &mut ChaCha8Rng) -> Complex<f64> {
    Complex::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0))
}

pub fn random_frame(r: &mut ChaCha8Rng, m: usize, n: usize) -> DelayDopplerFrame<f64> {
    let v = (0..m * n).map(|_| random_c64(r)).collect();
    DelayDopplerFrame::from_vec(m, n, v).unwrap()
}

/// The two-tap example channel `h0 = 1` at (0, 0) and `h1 = 0.5` at (1, 1).
pub fn example_model(grid: ReferenceGrid) -> ChannelModel<f64> {
    ChannelModel::new(
        vec![
            ChannelTap::new(Complex::new(1.0, 0.0), 0, 0.0),
            ChannelTap::new(Complex::new(0.5, 0.0), 1, 1.0),
        ],
        grid,
    )
    .unwrap()
}
