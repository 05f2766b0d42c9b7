//! Negacyclic number-theoretic transform over Z_q[X]/(X^d + 1).
//!
//! The 2d-th root ψ is merged into the twiddle tables, so the forward
//! transform evaluates a polynomial at the odd powers ψ, ψ³, ψ⁵, … directly —
//! no separate twisting pass. Butterflies are Harvey-style lazy: values
//! travel in `[0, 4q)` and are reduced once at the end, with Shoup constants
//! for every twiddle. One table is built per (prime, degree) pair and shared
//! through `RingParams`.
//!
//! Ordering contract: `forward` maps natural-order coefficients to
//! evaluations in *bit-reversed* point order — slot `j` holds
//! `a(ψ^(2·rev(j)+1))` where `rev` reverses `log2(d)` bits. `inverse`
//! consumes that order and returns natural-order coefficients. Pointwise
//! products only need the two sides to agree, and the unit tests pin the
//! exact point mapping against a schoolbook DFT.

use super::arith::{inv_mod, pow_mod, primitive_root_2d, shoup_mul_lazy, shoup_precompute};

/// Precomputed twiddle tables for one (prime, degree) pair.
#[derive(Clone, Debug)]
pub struct NttTable {
    pub q: u64,
    pub degree: usize,
    /// ψ^rev(i) for the forward butterflies, indexed as w[m + i].
    w: Vec<u64>,
    w_shoup: Vec<u64>,
    /// ψ^-rev(i) for the inverse butterflies.
    winv: Vec<u64>,
    winv_shoup: Vec<u64>,
    /// d⁻¹ mod q, folded into the last inverse pass.
    d_inv: u64,
    d_inv_shoup: u64,
}

impl NttTable {
    pub fn new(q: u64, degree: usize) -> Self {
        assert!(degree.is_power_of_two() && degree >= 2, "degree {} invalid", degree);
        assert!(q < 1 << 60, "q = {} exceeds the lazy-reduction headroom", q);
        let psi = primitive_root_2d(q, degree);
        let psi_inv = inv_mod(psi, q);
        let log_d = degree.trailing_zeros();
        let mut w = vec![0u64; degree];
        let mut winv = vec![0u64; degree];
        for i in 0..degree {
            let rev = (i as u64).reverse_bits() >> (64 - log_d);
            w[i] = pow_mod(psi, rev, q);
            winv[i] = pow_mod(psi_inv, rev, q);
        }
        let w_shoup = w.iter().map(|&x| shoup_precompute(x, q)).collect();
        let winv_shoup = winv.iter().map(|&x| shoup_precompute(x, q)).collect();
        let d_inv = inv_mod(degree as u64, q);
        NttTable {
            q,
            degree,
            w,
            w_shoup,
            winv,
            winv_shoup,
            d_inv,
            d_inv_shoup: shoup_precompute(d_inv, q),
        }
    }

    /// In-place forward transform: natural-order coefficients (reduced mod q)
    /// to bit-reversed-order evaluations, fully reduced on exit.
    pub fn forward(&self, a: &mut [u64]) {
        let d = self.degree;
        debug_assert_eq!(a.len(), d);
        let q = self.q;
        let q2 = q << 1;
        let mut t = d;
        let mut m = 1usize;
        while m < d {
            t >>= 1;
            for i in 0..m {
                let w = self.w[m + i];
                let ws = self.w_shoup[m + i];
                let base = 2 * i * t;
                let (lo, hi) = a[base..base + 2 * t].split_at_mut(t);
                for (x, y) in lo.iter_mut().zip(hi.iter_mut()) {
                    // x enters in [0, 4q); renormalize to [0, 2q) before use
                    let mut u = *x;
                    if u >= q2 {
                        u -= q2;
                    }
                    let v = shoup_mul_lazy(*y, w, ws, q); // in [0, 2q)
                    *x = u + v;
                    *y = u + q2 - v;
                }
            }
            m <<= 1;
        }
        for x in a.iter_mut() {
            let mut v = *x;
            if v >= q2 {
                v -= q2;
            }
            if v >= q {
                v -= q;
            }
            *x = v;
        }
    }

    /// In-place inverse transform: bit-reversed-order evaluations back to
    /// natural-order coefficients (including the d⁻¹ normalization), fully
    /// reduced on exit.
    pub fn inverse(&self, a: &mut [u64]) {
        let d = self.degree;
        debug_assert_eq!(a.len(), d);
        let q = self.q;
        let q2 = q << 1;
        let mut t = 1usize;
        let mut m = d;
        while m > 1 {
            let h = m >> 1;
            for i in 0..h {
                let w = self.winv[h + i];
                let ws = self.winv_shoup[h + i];
                let base = 2 * i * t;
                let (lo, hi) = a[base..base + 2 * t].split_at_mut(t);
                for (x, y) in lo.iter_mut().zip(hi.iter_mut()) {
                    // both operands stay in [0, 2q)
                    let u = *x;
                    let v = *y;
                    let mut s = u + v;
                    if s >= q2 {
                        s -= q2;
                    }
                    *x = s;
                    *y = shoup_mul_lazy(u + q2 - v, w, ws, q);
                }
            }
            t <<= 1;
            m = h;
        }
        for x in a.iter_mut() {
            let r = shoup_mul_lazy(*x, self.d_inv, self.d_inv_shoup, q);
            *x = if r >= q { r - q } else { r };
        }
    }

    /// The evaluation point order produced by `forward`: entry `j` is the
    /// exponent e(j) with slot j holding `a(ψ^e(j))`, e(j) = 2·rev(j) + 1.
    pub fn point_exponents(&self) -> Vec<u64> {
        let log_d = self.degree.trailing_zeros();
        (0..self.degree)
            .map(|j| 2 * ((j as u64).reverse_bits() >> (64 - log_d)) + 1)
            .collect()
    }

    /// ψ, the primitive 2d-th root the tables are built from.
    pub fn psi(&self) -> u64 {
        self.w[self.degree / 2] // rev(d/2) = 1 for the forward table
    }
}
