//! Seeded stratified splits and seed derivation.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Mixes `parts` into `base` (splitmix64 finalizer per part), giving
/// independent-looking seeds for folds, repeats and noise draws.
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    let mut s = base;
    for &p in parts {
        s = s.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(p.wrapping_mul(0xD1B5_4A32_D192_ED03));
        let mut z = s;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        s = z ^ (z >> 31);
    }
    s
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn shuffled_by_class(labels: &[usize], seed: u64) -> Vec<Vec<usize>> {
    let m = labels.iter().max().map_or(0, |&y| y + 1);
    let mut by_class = vec![Vec::new(); m];
    for (i, &y) in labels.iter().enumerate() {
        by_class[y].push(i);
    }
    let mut rng = rng(seed);
    for members in &mut by_class {
        members.shuffle(&mut rng);
    }
    by_class
}

/// Stratified k-fold assignment. Each class is shuffled and dealt
/// round-robin, continuing from where the previous class stopped, so
/// classes smaller than `folds` still spread over distinct folds.
/// Returned folds hold ascending sample ids.
pub fn stratified_folds(labels: &[usize], folds: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new(); folds];
    let mut slot = 0;
    for members in shuffled_by_class(labels, seed) {
        for i in members {
            out[slot % folds].push(i);
            slot += 1;
        }
    }
    for f in &mut out {
        f.sort_unstable();
    }
    out
}

/// Stratified train / held-out split; `round(count * fraction)` of each
/// class is held out. Returns `(train, held_out)`, both ascending.
pub fn stratified_holdout(labels: &[usize], fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut train = Vec::new();
    let mut held = Vec::new();
    for members in shuffled_by_class(labels, seed) {
        let take = (members.len() as f64 * fraction).round() as usize;
        held.extend_from_slice(&members[..take]);
        train.extend_from_slice(&members[take..]);
    }
    train.sort_unstable();
    held.sort_unstable();
    (train, held)
}
