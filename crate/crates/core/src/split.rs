//! Seeded stratified splitting.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// The generator every seeded operation in this crate draws from.
pub type SeededRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Number of members of a class of size `n` that go to the held-out side:
/// `round(n * fraction)` clamped so both sides keep at least one.
pub fn held_out_count(n: usize, fraction: f64) -> usize {
    let k = libm::round(n as f64 * fraction) as usize;
    k.clamp(1, n.saturating_sub(1).max(1))
}

/// Splits row indices into `(kept, held_out)` class by class.
///
/// Classes are visited in id order and each class's members are shuffled in
/// their incoming order, so the outcome depends only on `labels`, `fraction`
/// and the generator state. Both returned lists are ascending.
pub fn stratified_split(
    labels: &[usize],
    n_classes: usize,
    fraction: f64,
    rng: &mut SeededRng,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::invalid("split fraction must lie in (0, 1)"));
    }
    let mut members = vec![Vec::new(); n_classes];
    for (i, &l) in labels.iter().enumerate() {
        if l >= n_classes {
            return Err(Error::invalid(alloc::format!("class id {l} out of range")));
        }
        members[l].push(i);
    }
    let mut kept = Vec::with_capacity(labels.len());
    let mut held = Vec::new();
    for (class, mut rows) in members.into_iter().enumerate() {
        if rows.len() < 2 {
            return Err(Error::ClassTooSmall {
                label: alloc::format!("{class}"),
                count: rows.len(),
                required: 2,
            });
        }
        rows.shuffle(rng);
        let h = held_out_count(rows.len(), fraction);
        held.extend_from_slice(&rows[..h]);
        kept.extend_from_slice(&rows[h..]);
    }
    kept.sort_unstable();
    held.sort_unstable();
    Ok((kept, held))
}
