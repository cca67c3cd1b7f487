use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

const GLOBAL_STREAM_BASE: u64 = 1 << 63;

/// Generator for region `i`'s conditional permutations.
pub(crate) fn region_rng(seed: u64, region: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(region as u64);
    rng
}

/// Generator for the `k`-th global permutation.
pub(crate) fn global_rng(seed: u64, k: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(GLOBAL_STREAM_BASE | k as u64);
    rng
}

/// Fisher-Yates shuffle.
pub(crate) fn shuffle<T>(rng: &mut ChaCha8Rng, items: &mut [T]) {
    for t in (1..items.len()).rev() {
        let j = rng.random_range(0..=t);
        items.swap(t, j);
    }
}

/// Draws `k` distinct entries of `scratch` (ordered) by a partial
/// Fisher-Yates shuffle, writes them to `out`, and restores `scratch`.
/// Cost is O(k) regardless of `scratch.len()`.
pub(crate) fn sample_distinct(
    rng: &mut ChaCha8Rng,
    scratch: &mut [usize],
    k: usize,
    swaps: &mut Vec<usize>,
    out: &mut Vec<usize>,
) {
    let m = scratch.len();
    debug_assert!(k <= m);
    out.clear();
    swaps.clear();
    for t in 0..k {
        let j = rng.random_range(t..m);
        scratch.swap(t, j);
        swaps.push(j);
        out.push(scratch[t]);
    }
    for t in (0..k).rev() {
        scratch.swap(t, swaps[t]);
    }
}

/// Number of ordered selections of `k` from `m`, saturating above the limit.
pub(crate) fn arrangements(m: usize, k: usize) -> u128 {
    let mut total: u128 = 1;
    for f in (m - k + 1)..=m {
        total = total.saturating_mul(f as u128);
        if total > u64::MAX as u128 {
            return total;
        }
    }
    total
}

pub(crate) fn check_enumerable(count: u128, limit: u128) -> Result<()> {
    if count > limit {
        Err(Error::EnumerationTooLarge(count))
    } else {
        Ok(())
    }
}

/// Visits every permutation of `items` in place (Heap's algorithm),
/// starting with the original order.
pub(crate) fn for_each_permutation<T>(items: &mut [T], mut visit: impl FnMut(&[T])) {
    let n = items.len();
    let mut c = vec![0usize; n];
    visit(items);
    let mut i = 1;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                items.swap(0, i);
            } else {
                items.swap(c[i], i);
            }
            visit(items);
            c[i] += 1;
            i = 1;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
}

/// Visits every ordered selection of `k` distinct values from `pool`, passing
/// the left-to-right sum `Σ_t weights[t] * pool[pick_t]`.
pub(crate) fn for_each_weighted_selection(
    pool: &[f64],
    weights: &[f64],
    mut visit: impl FnMut(f64),
) {
    fn recurse(
        pool: &[f64],
        weights: &[f64],
        used: &mut [bool],
        depth: usize,
        acc: f64,
        visit: &mut dyn FnMut(f64),
    ) {
        if depth == weights.len() {
            visit(acc);
            return;
        }
        for p in 0..pool.len() {
            if !used[p] {
                used[p] = true;
                recurse(pool, weights, used, depth + 1, acc + weights[depth] * pool[p], visit);
                used[p] = false;
            }
        }
    }
    let mut used = vec![false; pool.len()];
    recurse(pool, weights, &mut used, 0, 0.0, &mut visit);
}
