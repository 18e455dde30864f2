use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Shuffled partition of `0..len` into batches of `batch_size`; the final
/// partial batch is kept. The permutation depends only on `(seed, epoch)`.
pub fn batches(len: usize, batch_size: usize, seed: u64, epoch: u64) -> Vec<Vec<usize>> {
    let batch_size = batch_size.max(1);
    let mut order: Vec<usize> = (0..len).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(epoch.wrapping_add(0x5eed));
    order.shuffle(&mut rng);
    order.chunks(batch_size).map(<[usize]>::to_vec).collect()
}

/// Unshuffled partition, used where iteration order must follow the data.
pub fn sequential_batches(len: usize, batch_size: usize) -> Vec<Vec<usize>> {
    let idx: Vec<usize> = (0..len).collect();
    idx.chunks(batch_size.max(1)).map(<[usize]>::to_vec).collect()
}

/// Borrow the examples named by each index batch.
pub fn gather<'a, T>(items: &'a [T], index_batches: &[Vec<usize>]) -> Vec<Vec<&'a T>> {
    index_batches
        .iter()
        .map(|b| b.iter().map(|&i| &items[i]).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_sizes() {
        let b = batches(10, 4, 1, 0);
        assert_eq!(b.iter().map(Vec::len).collect::<Vec<_>>(), vec![4, 4, 2]);
        let mut all: Vec<usize> = b.concat();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn same_key_same_order() {
        assert_eq!(batches(50, 7, 3, 2), batches(50, 7, 3, 2));
    }

    #[test]
    fn epochs_permute_differently() {
        let a = batches(100, 100, 3, 0).concat();
        let b = batches(100, 100, 3, 1).concat();
        assert_ne!(a, b);
        let c = batches(100, 100, 4, 0).concat();
        assert_ne!(a, c);
    }
}
