//! Cross-checks the edit-distance implementation against two independent
//! recursive oracles that follow the textbook recurrence directly: a pure
//! brute-force recursion, and the same recursion with a memo table (needed
//! for long sequences, where the brute force is intractable). The brute
//! force validates the memoized oracle on small lengths; the acceptance
//! suite widens the exhaustive range.

use rallykit_core::metrics::levenshtein_by;

/// Brute-force recursion, no memoization.
fn naive_lev(a: &[u8], b: &[u8]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    if a[0] == b[0] {
        return naive_lev(&a[1..], &b[1..]);
    }
    let delete = naive_lev(&a[1..], b);
    let insert = naive_lev(a, &b[1..]);
    let substitute = naive_lev(&a[1..], &b[1..]);
    1 + delete.min(insert).min(substitute)
}

/// The same recurrence with a memo table over suffix pairs.
fn memo_lev(a: &[u8], b: &[u8]) -> usize {
    fn go(a: &[u8], b: &[u8], i: usize, j: usize, memo: &mut [Vec<Option<usize>>]) -> usize {
        if let Some(v) = memo[i][j] {
            return v;
        }
        let v = if i == a.len() {
            b.len() - j
        } else if j == b.len() {
            a.len() - i
        } else if a[i] == b[j] {
            go(a, b, i + 1, j + 1, memo)
        } else {
            1 + go(a, b, i + 1, j, memo)
                .min(go(a, b, i, j + 1, memo))
                .min(go(a, b, i + 1, j + 1, memo))
        };
        memo[i][j] = Some(v);
        v
    }
    let mut memo = vec![vec![None; b.len() + 1]; a.len() + 1];
    go(a, b, 0, 0, &mut memo)
}

fn impl_lev(a: &[u8], b: &[u8]) -> usize {
    levenshtein_by(a, b, |x, y| x == y)
}

/// All sequences over `alphabet` symbols with length <= max_len.
fn all_sequences(alphabet: u8, max_len: usize) -> Vec<Vec<u8>> {
    let mut out = vec![Vec::new()];
    let mut frontier = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for seq in &frontier {
            for symbol in 0..alphabet {
                let mut extended = seq.clone();
                extended.push(symbol);
                next.push(extended);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

struct SplitMix64(u64);

impl SplitMix64 {
    fn next(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    fn below(&mut self, bound: usize) -> usize {
        (self.next() % bound as u64) as usize
    }
}

#[test]
fn frozen_example_from_oracle() {
    // the unit test's [x, z] vs [x, y, z] = 1, recomputed here from scratch
    assert_eq!(naive_lev(&[0, 2], &[0, 1, 2]), 1);
    assert_eq!(memo_lev(&[0, 2], &[0, 1, 2]), 1);
    assert_eq!(impl_lev(&[0, 2], &[0, 1, 2]), 1);
}

#[test]
fn exhaustive_small_vs_brute_force() {
    // lengths <= 4 over 3 symbols: 121 sequences, 14,641 pairs
    let seqs = all_sequences(3, 4);
    assert_eq!(seqs.len(), 121);
    for a in &seqs {
        for b in &seqs {
            let expected = naive_lev(a, b);
            assert_eq!(impl_lev(a, b), expected, "{a:?} vs {b:?}");
            assert_eq!(memo_lev(a, b), expected, "{a:?} vs {b:?}");
        }
    }
}

#[test]
fn random_long_pairs_vs_memo_oracle() {
    let mut rng = SplitMix64(0x5eed);
    for _ in 0..200 {
        let la = rng.below(35);
        let lb = rng.below(35);
        let a: Vec<u8> = (0..la).map(|_| rng.below(4) as u8).collect();
        let b: Vec<u8> = (0..lb).map(|_| rng.below(4) as u8).collect();
        assert_eq!(impl_lev(&a, &b), memo_lev(&a, &b), "{a:?} vs {b:?}");
    }
}

#[test]
fn triangle_inequality_sampled() {
    let mut rng = SplitMix64(42);
    for _ in 0..300 {
        let seq = |rng: &mut SplitMix64| -> Vec<u8> {
            let len = rng.below(12);
            (0..len).map(|_| rng.below(3) as u8).collect()
        };
        let a = seq(&mut rng);
        let b = seq(&mut rng);
        let c = seq(&mut rng);
        assert!(impl_lev(&a, &c) <= impl_lev(&a, &b) + impl_lev(&b, &c));
    }
}
