//! Root-seed splitting.
//!
//! Every random draw in a run comes from one root seed. Each subsystem gets
//! its own ChaCha stream, so adding draws in one subsystem never shifts the
//! numbers another subsystem sees.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Projection = 1,
    MlpInit = 2,
    Dropout = 3,
    Synthetic = 4,
    Benchmark = 5,
}

pub fn rng_for(root: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(root);
    rng.set_stream(stream as u64);
    rng
}
