//! Deterministic random streams.
//!
//! Every consumer of randomness gets its own PCG generator whose seed is a
//! SplitMix64 mix of the master seed and a chain of stream labels. Results are
//! therefore independent of scheduling and thread count.

use rand::SeedableRng;
use rand_pcg::Pcg64Mcg;

/// Generator type used throughout the crate.
pub type StreamRng = Pcg64Mcg;

/// Stream labels for the top-level consumers.
pub mod label {
    pub const POSITIONS: u64 = 1;
    pub const GNP: u64 = 2;
    pub const CALIBRATION: u64 = 3;
    pub const VALIDATION: u64 = 4;
    pub const PATTERN: u64 = 5;
    pub const GAMMA: u64 = 6;
    pub const BOOTSTRAP: u64 = 7;
    pub const SWEEP_RGG: u64 = 8;
    pub const SWEEP_GNP: u64 = 9;
    pub const SPECTRUM: u64 = 10;
    pub const TRACE: u64 = 11;
    pub const KAPPA: u64 = 12;
    pub const WALKS: u64 = 13;
}

#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A node in the stream tree. Cheap to copy; children are derived by label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Stream(u64);

impl Stream {
    pub fn root(master_seed: u64) -> Self {
        Stream(splitmix64(master_seed ^ 0x5EED_0F_70_2A5))
    }

    pub fn child(self, label: u64) -> Self {
        Stream(splitmix64(self.0 ^ splitmix64(label.wrapping_add(0xA076_1D64_78BD_642F))))
    }

    pub fn id(self) -> u64 {
        self.0
    }

    pub fn rng(self) -> StreamRng {
        let hi = splitmix64(self.0);
        let lo = splitmix64(hi ^ self.0);
        Pcg64Mcg::from_seed(((u128::from(hi) << 64) | u128::from(lo)).to_le_bytes())
    }
}

/// Uniform on `[-1/2, 1/2)` with 53 bits of resolution.
#[inline]
pub fn torus_coord<R: rand::RngCore>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64) - 0.5
}

/// Uniform on `[0, 1)`.
#[inline]
pub fn unit<R: rand::RngCore>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}
