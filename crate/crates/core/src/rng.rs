use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::C64;
use crate::model::{phase_point, Quantization};

/// ChaCha8 stream ids, one per consumer of a realization seed.
pub(crate) const STREAM_PDD: u64 = 1;
pub(crate) const STREAM_SO: u64 = 2;
pub(crate) const STREAM_RANDOM: u64 = 3;

pub(crate) fn solver_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform draw from the phase alphabet (or the unit circle).
pub(crate) fn random_phase<R: Rng>(rng: &mut R, quant: Quantization) -> C64 {
    match quant {
        Quantization::Bits(bits) => phase_point(rng.random_range(0..1usize << bits), bits),
        Quantization::Continuous => {
            C64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU))
        }
    }
}
