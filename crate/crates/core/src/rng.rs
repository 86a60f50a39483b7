//! Seeded random streams.
//!
//! Every random quantity in a drop comes from a [`SimRng`] derived from the base
//! seed and a path of integers (drop index, UE id, purpose tag), so independent
//! parts of the simulation never share a stream.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

#[allow(unused_imports)] // float math without std
use num_traits::Float as _;

use crate::C64;

pub type SimRng = ChaCha8Rng;

/// Purpose tags for derived streams.
pub mod stream {
    pub const PLACEMENT: u64 = 1;
    pub const PATHLOSS: u64 = 2;
    pub const CLUSTERS: u64 = 3;
    pub const EVOLUTION: u64 = 4;
    pub const VERDICT: u64 = 5;
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a seed with a path of indices into a new seed.
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix(base), |acc, &p| {
        splitmix(acc ^ splitmix(p.wrapping_add(0x5851_F42D_4C95_7F2D)))
    })
}

pub fn substream(base: u64, path: &[u64]) -> SimRng {
    SimRng::seed_from_u64(derive_seed(base, path))
}

/// Circularly-symmetric complex Gaussian sample with the given variance.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> C64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re * s, im * s)
}
