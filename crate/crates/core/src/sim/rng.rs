//! Per-path random streams keyed by `(seed, axis, path)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent noise sources of one path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    /// Driving noise of the transversal process.
    X = 0,
    /// Longitudinal noise in the layered model.
    Y = 1,
}

/// ChaCha8 keyed by the seed and axis, with the path index as its 64-bit stream id.
pub fn path_rng(seed: u64, axis: Axis, path: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8] = axis as u8;
    key[31] = 0x5d;
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(path);
    rng
}
