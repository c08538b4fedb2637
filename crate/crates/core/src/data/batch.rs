use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Row indices for one epoch, shuffled by a permutation derived only from
/// `(shuffle_seed, epoch)`. The last batch may be short.
pub fn batch_iter(n: usize, batch_size: usize, shuffle_seed: u64, epoch: u64) -> Vec<Vec<usize>> {
    assert!(batch_size >= 1, "batch_size must be positive");
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(shuffle_seed);
    rng.set_stream(epoch);
    order.shuffle(&mut rng);
    order.chunks(batch_size).map(<[usize]>::to_vec).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn large_batch_holds_everything() {
        let b = batch_iter(7, 100, 1, 0);
        assert_eq!(b.len(), 1);
        assert_eq!(b[0].len(), 7);
    }

    #[test]
    fn deterministic_per_seed_and_epoch() {
        assert_eq!(batch_iter(50, 8, 3, 2), batch_iter(50, 8, 3, 2));
        assert_ne!(batch_iter(50, 8, 3, 2), batch_iter(50, 8, 3, 3));
    }

    #[test]
    fn short_tail() {
        let b = batch_iter(10, 4, 0, 0);
        assert_eq!(b.iter().map(Vec::len).collect::<Vec<_>>(), vec![4, 4, 2]);
    }
}
