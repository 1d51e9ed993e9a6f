use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream ids keep initialization and swap randomness independent for one seed.
pub(crate) const STREAM_INIT: u64 = 1;
pub(crate) const STREAM_SWAP: u64 = 2;

pub(crate) fn seeded(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Seeded permutation of `0..m`, the candidate visiting order of the swap
/// phase. Shared by the sparse and dense solvers so that both can be run on
/// the same order.
pub fn candidate_order(m: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(&mut seeded(seed, STREAM_SWAP));
    order
}
