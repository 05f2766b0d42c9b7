//! Scalar modular arithmetic for word-sized NTT primes.
//!
//! All moduli in the ring layer are odd primes below 2⁶⁰, so every product
//! fits in a `u128` and Shoup multiplication (precomputed `⌊w·2⁶⁴/q⌋`) gives
//! a two-multiply reduction for the hot loops.

/// `(a + b) mod q`, assuming both operands are already reduced.
#[inline(always)]
pub fn add_mod(a: u64, b: u64, q: u64) -> u64 {
    let s = a + b;
    if s >= q {
        s - q
    } else {
        s
    }
}

/// `(a - b) mod q`, assuming both operands are already reduced.
#[inline(always)]
pub fn sub_mod(a: u64, b: u64, q: u64) -> u64 {
    if a >= b {
        a - b
    } else {
        a + q - b
    }
}

/// `(a * b) mod q` via a 128-bit product.
#[inline(always)]
pub fn mul_mod(a: u64, b: u64, q: u64) -> u64 {
    ((a as u128 * b as u128) % q as u128) as u64
}

/// Shoup precomputation for a fixed multiplicand `w < q`: `⌊w·2⁶⁴/q⌋`.
#[inline(always)]
pub fn shoup_precompute(w: u64, q: u64) -> u64 {
    (((w as u128) << 64) / q as u128) as u64
}

/// `(a * w) mod q` with `w_shoup = shoup_precompute(w, q)`.
///
/// The result lands in `[0, 2q)`; callers in lazy loops keep it that way,
/// everyone else subtracts the final `q`.
#[inline(always)]
pub fn shoup_mul_lazy(a: u64, w: u64, w_shoup: u64, q: u64) -> u64 {
    let hi = ((a as u128 * w_shoup as u128) >> 64) as u64;
    a.wrapping_mul(w).wrapping_sub(hi.wrapping_mul(q))
}

/// `(a * w) mod q`, fully reduced, with precomputed Shoup constant.
#[inline(always)]
pub fn shoup_mul(a: u64, w: u64, w_shoup: u64, q: u64) -> u64 {
    let r = shoup_mul_lazy(a, w, w_shoup, q);
    if r >= q {
        r - q
    } else {
        r
    }
}

/// A modulus with its 128-bit Barrett constant `⌊2¹²⁸/q⌋ = (ratio_hi, ratio_lo)`.
///
/// Shoup multiplication needs a fixed multiplicand; the tensor / key-switch
/// accumulation loops multiply arbitrary pairs, so they reduce 128-bit
/// products against the limb's fixed modulus instead. Safe for any
/// `x < 2¹²⁴`, which covers sums of up to 16 products of 60-bit residues.
#[derive(Clone, Copy, Debug)]
pub struct Modulus {
    pub q: u64,
    ratio_hi: u64,
    ratio_lo: u64,
}

impl Modulus {
    pub fn new(q: u64) -> Self {
        assert!(q > 1 && q < 1 << 60, "modulus {} out of range", q);
        // ⌊2¹²⁸/q⌋ == ⌊(2¹²⁸−1)/q⌋ for odd q > 1
        let ratio = u128::MAX / q as u128;
        Modulus { q, ratio_hi: (ratio >> 64) as u64, ratio_lo: ratio as u64 }
    }

    /// `x mod q` for `x < 2¹²⁴`.
    #[inline(always)]
    pub fn reduce128(&self, x: u128) -> u64 {
        let xlo = x as u64;
        let xhi = (x >> 64) as u64;
        // estimate ⌊x·ratio/2¹²⁸⌋ from the three cross products
        let t = (xlo as u128 * self.ratio_lo as u128) >> 64;
        let mid = xhi as u128 * self.ratio_lo as u128 + t + xlo as u128 * self.ratio_hi as u128;
        let q_est = xhi as u128 * self.ratio_hi as u128 + (mid >> 64);
        let mut r = (x - q_est * self.q as u128) as u64;
        while r >= self.q {
            r -= self.q;
        }
        r
    }

    /// `(a * b) mod q` for reduced operands.
    #[inline(always)]
    pub fn mul(&self, a: u64, b: u64) -> u64 {
        self.reduce128(a as u128 * b as u128)
    }
}

/// `b^e mod q` by square-and-multiply.
pub fn pow_mod(mut b: u64, mut e: u64, q: u64) -> u64 {
    let mut acc: u64 = 1 % q;
    b %= q;
    while e > 0 {
        if e & 1 == 1 {
            acc = mul_mod(acc, b, q);
        }
        b = mul_mod(b, b, q);
        e >>= 1;
    }
    acc
}

/// `a⁻¹ mod q` for prime `q` (Fermat).
pub fn inv_mod(a: u64, q: u64) -> u64 {
    debug_assert!(a % q != 0, "inverse of zero mod {}", q);
    pow_mod(a, q - 2, q)
}

/// Deterministic Miller–Rabin, valid for all `n < 2⁶⁴` with this witness set.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n == p {
            return true;
        }
        if n % p == 0 {
            return false;
        }
    }
    let mut d = n - 1;
    let mut r = 0u32;
    while d & 1 == 0 {
        d >>= 1;
        r += 1;
    }
    'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..r {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Finds `count` NTT-friendly primes `q ≡ 1 (mod 2·degree)` near `2^target_bits`.
///
/// Candidates are scanned outward from `2^target_bits` alternating below and
/// above, which keeps the returned chain centred on the target scale (the
/// CKKS scale-tracking code relies on scaling primes hugging Δ).
pub fn find_ntt_primes(target_bits: u32, degree: usize, count: usize) -> Vec<u64> {
    assert!(degree.is_power_of_two(), "degree {} not a power of two", degree);
    assert!(target_bits >= 12 && target_bits < 62, "target bits {} out of range", target_bits);
    let step = 2 * degree as u64;
    let center = 1u64 << target_bits;
    let k0 = center / step;
    let mut found = Vec::with_capacity(count);
    let mut offset = 0u64;
    while found.len() < count {
        offset += 1;
        // below, then above, so the chain straddles the target
        for k in [k0.saturating_sub(offset), k0 + offset] {
            if k == 0 {
                continue;
            }
            let cand = k * step + 1;
            if is_prime(cand) && !found.contains(&cand) {
                found.push(cand);
                if found.len() == count {
                    break;
                }
            }
        }
        assert!(
            offset < (1 << 24),
            "prime search exhausted near 2^{} for degree {}",
            target_bits,
            degree
        );
    }
    found
}

/// Smallest primitive `2d`-th root of unity mod `q` (by generator search).
pub fn primitive_root_2d(q: u64, degree: usize) -> u64 {
    let two_d = 2 * degree as u64;
    assert!((q - 1) % two_d == 0, "q = {} is not NTT-friendly for degree {}", q, degree);
    let mut g = 2u64;
    loop {
        let cand = pow_mod(g, (q - 1) / two_d, q);
        // primitive iff cand^d = -1
        if pow_mod(cand, degree as u64, q) == q - 1 {
            return cand;
        }
        g += 1;
        assert!(g < 1000, "no primitive root found mod {}", q);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pow_and_inv_agree() {
        let q = 97u64;
        for a in 1..q {
            assert_eq!(mul_mod(a, inv_mod(a, q), q), 1, "a = {}", a);
        }
    }

    #[test]
    fn shoup_matches_schoolbook() {
        let q = 1152921504606830593u64; // 60-bit prime
        let mut state = 0x9e3779b97f4a7c15u64;
        for _ in 0..10_000 {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let a = state % q;
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let w = state % q;
            let ws = shoup_precompute(w, q);
            assert_eq!(shoup_mul(a, w, ws, q), mul_mod(a, w, q), "a={} w={}", a, w);
        }
    }

    #[test]
    fn shoup_lazy_accepts_unreduced_operands() {
        // the NTT feeds values in [0, 4q) into the multiply path
        let q = (1u64 << 59) - 0x1ff; // any q < 2^62/4 works for the bound
        let w = q - 12345;
        let ws = shoup_precompute(w, q);
        for a in [0u64, 1, q - 1, q, 2 * q - 1, 4 * q - 1, u64::MAX] {
            let r = shoup_mul_lazy(a, w, ws, q);
            assert!(r < 2 * q, "lazy product out of range for a = {}", a);
            assert_eq!(r % q, ((a as u128 * w as u128) % q as u128) as u64, "a = {}", a);
        }
    }

    #[test]
    fn barrett_matches_division() {
        for &q in &[3u64, 97, 12289, (1 << 40) + 0x8001, (1 << 59) + 0x9e01, (1 << 60) - 93] {
            if !is_prime(q) {
                continue; // the constants only assume oddness; test with primes anyway
            }
            let m = Modulus::new(q);
            let mut state = 0xdeadbeefcafeu64;
            for _ in 0..5_000 {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let a = state % q;
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let b = state % q;
                assert_eq!(m.mul(a, b), mul_mod(a, b, q));
            }
            // accumulator-shaped inputs: sums of 16 products of residues
            let big = q as u128 - 1;
            let mut acc: u128 = 0;
            for i in 0..16u128 {
                acc += (big - i % q as u128) * big;
            }
            assert_eq!(m.reduce128(acc), (acc % q as u128) as u64);
        }
    }

    #[test]
    fn miller_rabin_agrees_with_trial_division() {
        let naive = |n: u64| {
            if n < 2 {
                return false;
            }
            let mut d = 2;
            while d * d <= n {
                if n % d == 0 {
                    return false;
                }
                d += 1;
            }
            true
        };
        for n in 0..2000u64 {
            assert_eq!(is_prime(n), naive(n), "n = {}", n);
        }
        assert!(is_prime(1152921504606830593)); // 60-bit NTT prime
        assert!(!is_prime(1152921504606830595));
    }

    #[test]
    fn prime_search_returns_ntt_friendly_primes() {
        let primes = find_ntt_primes(40, 8192, 10);
        assert_eq!(primes.len(), 10);
        for &q in &primes {
            assert!(is_prime(q));
            assert_eq!((q - 1) % (2 * 8192), 0, "q = {} not 1 mod 2d", q);
            let drift = (q as i128 - (1i128 << 40)).unsigned_abs();
            assert!(drift < 1 << 30, "q = {} strays too far from 2^40", q);
        }
        // all distinct
        let mut sorted = primes.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), primes.len());
    }

    #[test]
    fn primitive_root_has_exact_order() {
        for &(q, d) in &[(97u64, 16usize), (193, 16), (12289, 64)] {
            let psi = primitive_root_2d(q, d);
            assert_eq!(pow_mod(psi, d as u64, q), q - 1, "psi^d must be -1 mod {}", q);
            assert_eq!(pow_mod(psi, 2 * d as u64, q), 1);
        }
    }
}
