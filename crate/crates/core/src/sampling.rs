//! Deterministic randomness.
//!
//! Every stochastic routine takes an explicit `u64` seed. Per-item streams
//! (sample pairs, Monte-Carlo batches) come from ChaCha's stream counter, so a
//! given item draws the same numbers no matter which thread evaluates it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::interval::Interval;

/// Generator for the item with index `id` under `seed`.
pub fn stream_rng(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Independent seed for sub-task `index` (splitmix64 finalizer).
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Pair of points inside `element` drawn for pair number `id`.
///
/// Three quarters of the pairs are uniform. The rest approach one of the
/// endpoints geometrically (down to distances near 2^-200, or 2^20 ulps where that is coarser) so that
/// degenerate behaviour at neutral points is actually probed.
pub fn sample_pair(element: &Interval, seed: u64, id: u64) -> (f64, f64) {
    let mut rng = stream_rng(seed, id);
    let len = element.length();
    if len == 0.0 {
        return (element.lo, element.lo);
    }
    match id % 8 {
        0 => {
            let a = if element.lo_closed { element.lo } else { element.lo.next_up() };
            let scale = (-200.0 * rng.gen::<f64>()).exp2();
            let b = (a + (len * scale).max(resolution(a))).min(element.hi);
            (a, b)
        }
        1 => {
            let a = if element.hi_closed { element.hi } else { element.hi.next_down() };
            let scale = (-200.0 * rng.gen::<f64>()).exp2();
            let b = (a - (len * scale).max(resolution(a))).max(element.lo);
            (b, a)
        }
        _ => {
            let x = element.lerp(rng.gen_range(f64::EPSILON..1.0 - f64::EPSILON));
            let y = element.lerp(rng.gen_range(f64::EPSILON..1.0 - f64::EPSILON));
            (x, y)
        }
    }
}

/// Smallest separation at which difference quotients near `a` are not
/// dominated by rounding: 2^20 ulps.
fn resolution(a: f64) -> f64 {
    (a.abs().next_up() - a.abs()) * 1_048_576.0
}

/// Uniform point in the interior of `element` for sample number `id`.
pub fn sample_point(element: &Interval, seed: u64, id: u64) -> f64 {
    let mut rng = stream_rng(seed, id);
    element.lerp(rng.gen_range(f64::EPSILON..1.0 - f64::EPSILON))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairs_are_reproducible_and_inside() {
        let e = Interval::left_open(0.5, 1.0);
        for id in 0..500 {
            let p = sample_pair(&e, 9, id);
            assert_eq!(p, sample_pair(&e, 9, id));
            assert!(e.contains(p.0) && e.contains(p.1), "{p:?}");
        }
    }

    #[test]
    fn some_pairs_are_extremely_close_to_the_low_end() {
        let e = Interval::closed(0.0, 0.5);
        let min = (0..400).map(|id| sample_pair(&e, 1, id).1).fold(1.0, f64::min);
        assert!(min < 1e-30);
    }
}
