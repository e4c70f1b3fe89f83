//! Segmented sieve of Eratosthenes.

/// Primes `p ≤ n` by a plain sieve.
pub fn small_primes(n: u64) -> Vec<u64> {
    if n < 2 {
        return Vec::new();
    }
    let n = n as usize;
    let mut composite = vec![false; n + 1];
    let mut out = Vec::new();
    for i in 2..=n {
        if !composite[i] {
            out.push(i as u64);
            let mut j = i * i;
            while j <= n {
                composite[j] = true;
                j += i;
            }
        }
    }
    out
}

/// All primes in `[lo, hi)`, ascending.
pub fn primes_in_range(lo: u64, hi: u64) -> Vec<u64> {
    const SEGMENT: u64 = 1 << 16;
    if hi <= lo || hi <= 2 {
        return Vec::new();
    }
    let lo = lo.max(2);
    let base = small_primes((hi as f64).sqrt() as u64 + 1);
    let mut out = Vec::new();
    let mut seg = vec![false; SEGMENT as usize];
    let mut start = lo;
    while start < hi {
        let end = (start + SEGMENT).min(hi);
        let len = (end - start) as usize;
        seg[..len].iter_mut().for_each(|c| *c = false);
        for &p in &base {
            if p * p >= end {
                break;
            }
            let mut m = (start.div_ceil(p) * p).max(p * p);
            while m < end {
                seg[(m - start) as usize] = true;
                m += p;
            }
        }
        out.extend(
            seg[..len]
                .iter()
                .enumerate()
                .filter(|(_, &c)| !c)
                .map(|(i, _)| start + i as u64),
        );
        start = end;
    }
    out
}

/// Primes `q` with `M ≤ q < 2M`.
pub fn primes_in_scale(m: u64) -> Vec<u64> {
    primes_in_range(m, 2 * m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn scale_examples() {
        assert_eq!(primes_in_scale(10), vec![11, 13, 17, 19]);
        assert_eq!(primes_in_scale(100).len(), 21);
        assert_eq!(primes_in_scale(2), vec![2, 3]);
        assert_eq!(primes_in_scale(16), vec![17, 19, 23, 29, 31]);
    }

    #[test]
    fn counts() {
        // π(10^6) = 78498
        assert_eq!(primes_in_range(0, 1_000_000).len(), 78498);
        // π(2·10^6) − π(10^6) = 148933 − 78498
        assert_eq!(primes_in_scale(1_000_000).len(), 148933 - 78498);
    }

    proptest! {
        #[test]
        fn segmented_matches_plain(lo in 0u64..300_000, len in 0u64..200_000) {
            let hi = lo + len;
            let plain: Vec<u64> = small_primes(hi).into_iter().filter(|&p| p >= lo && p < hi).collect();
            prop_assert_eq!(primes_in_range(lo, hi), plain);
        }
    }
}
