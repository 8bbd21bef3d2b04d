//! Seeding conventions. Every sampler draws from ChaCha8 (`rand_chacha`),
//! seeded with `seed_from_u64(seed)` and put on a stream derived from the
//! caller's context, so results are platform-stable and independent of how
//! work is split across threads. OS entropy is never used.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// 64-bit FNV-1a, used to turn ids into stream numbers.
pub fn stable_hash(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

pub fn stream_rng(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Generator for one named unit of work, e.g. a complex id.
pub fn keyed_rng(seed: u64, key: &str) -> Rng {
    stream_rng(seed, stable_hash(key.as_bytes()))
}

/// Uniform integer in `0..n` from whole `next_u64` draws: with
/// `r = 2^64 mod n`, draws above `u64::MAX - r` are rejected and the
/// accepted draw is reduced modulo `n`.
pub fn uniform_below(rng: &mut impl RngCore, n: u64) -> u64 {
    assert!(n > 0, "uniform_below needs a non-empty range");
    let r = (u64::MAX % n + 1) % n;
    loop {
        let x = rng.next_u64();
        if r == 0 || x <= u64::MAX - r {
            return x % n;
        }
    }
}

/// Fisher-Yates shuffle of `0..n`, swapping position `i` with
/// `i + uniform_below(n - i)` for `i = 0, 1, ...`.
pub fn permutation(rng: &mut impl RngCore, n: usize) -> Vec<usize> {
    let mut v: Vec<usize> = (0..n).collect();
    for i in 0..n.saturating_sub(1) {
        let j = i + uniform_below(rng, (n - i) as u64) as usize;
        v.swap(i, j);
    }
    v
}

/// The first `k` entries of a partial Fisher-Yates shuffle of `0..n`.
pub fn sample_distinct(rng: &mut impl RngCore, n: usize, k: usize) -> Vec<usize> {
    assert!(k <= n, "cannot draw {k} distinct items from {n}");
    let mut v: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = i + uniform_below(rng, (n - i) as u64) as usize;
        v.swap(i, j);
    }
    v.truncate(k);
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    #[test]
    fn fnv_reference_values() {
        assert_eq!(stable_hash(b""), 0xcbf29ce484222325);
        assert_eq!(stable_hash(b"a"), 0xaf63dc4c8601ec8c);
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<u64> = (0..4).map({
            let mut r = keyed_rng(3, "x");
            move |_| r.random()
        }).collect();
        let b: Vec<u64> = (0..4).map({
            let mut r = keyed_rng(3, "x");
            move |_| r.random()
        }).collect();
        let c: u64 = keyed_rng(3, "y").random();
        assert_eq!(a, b);
        assert_ne!(a[0], c);
    }

    #[test]
    fn uniform_below_is_unbiased_enough() {
        let mut rng = stream_rng(1, 2);
        let mut counts = [0usize; 6];
        for _ in 0..60_000 {
            counts[uniform_below(&mut rng, 6) as usize] += 1;
        }
        assert!(counts.iter().all(|&c| (9_500..10_500).contains(&c)), "{counts:?}");
        assert_eq!(uniform_below(&mut rng, 1), 0);
    }

    #[test]
    fn permutations_and_samples() {
        let mut rng = stream_rng(5, 0);
        let mut p = permutation(&mut rng, 50);
        p.sort_unstable();
        assert_eq!(p, (0..50).collect::<Vec<_>>());
        let s = sample_distinct(&mut rng, 12, 10);
        let mut d = s.clone();
        d.sort_unstable();
        d.dedup();
        assert_eq!(d.len(), 10);
        assert!(s.iter().all(|&i| i < 12));
        assert!(permutation(&mut rng, 0).is_empty());
    }
}
