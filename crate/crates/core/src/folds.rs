use rand::seq::SliceRandom;

/// Seeded shuffle of `0..n` cut into `k` contiguous blocks whose sizes differ
/// by at most one. Returns the held-out positions of each fold.
pub(crate) fn kfold(n: usize, k: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut crate::stream_rng(seed, crate::Stream::Folds));
    let base = n / k;
    let extra = n % k;
    let mut out = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = base + usize::from(f < extra);
        out.push(idx[start..start + len].to_vec());
        start += len;
    }
    out
}

/// Complement of a held-out fold, ascending.
pub(crate) fn complement(n: usize, held_out: &[usize]) -> Vec<usize> {
    let mut mask = vec![true; n];
    for &i in held_out {
        mask[i] = false;
    }
    (0..n).filter(|&i| mask[i]).collect()
}
