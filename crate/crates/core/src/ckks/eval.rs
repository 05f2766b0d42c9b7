//! Polynomial evaluation on ciphertexts, refresh, and precision probes.
//!
//! Smooth functions are applied to encrypted slots by evaluating a Chebyshev
//! interpolant. The evaluator uses a baby-step/giant-step schedule: powers
//! T₁…T₈ and the giants T₁₆, T₃₂ are built by doubling (logarithmic depth),
//! the coefficient polynomial is recursively split as p = T_m·q + r at the
//! largest power-of-two order m, and sub-polynomials of degree ≤ 8 become
//! plaintext linear combinations of the cached powers. A degree-50
//! interpolant costs 15 ciphertext products and 7 levels including the
//! domain map — against 50 levels for naive Horner evaluation.
//!
//! All intermediate results stay on the canonical scale ladder: operands are
//! aligned with `adjust_level` before every product, so scales agree by
//! construction and the schedule's depth is deterministic.

use super::{engine::RelinKey, engine::SecretKey, Ciphertext, CkksContext};
use super::engine::PublicKey;
use rand::Rng;

/// Highest interpolant degree the schedule supports (three giant doublings).
pub const MAX_EVAL_DEGREE: usize = 63;

// ═══════════════════════════════════════════════════════════════════════════
// Chebyshev fitting (plain arithmetic)
// ═══════════════════════════════════════════════════════════════════════════

/// Chebyshev interpolation coefficients of `f` on [a, b]: returns c such
/// that f(x) ≈ Σ c_k·T_k(y) with y = (2x − a − b)/(b − a).
pub fn chebyshev_fit<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, degree: usize) -> Vec<f64> {
    assert!(b > a, "empty fit interval [{}, {}]", a, b);
    let n = degree + 1;
    let samples: Vec<f64> = (0..n)
        .map(|j| {
            let y = (std::f64::consts::PI * (j as f64 + 0.5) / n as f64).cos();
            f(0.5 * ((b - a) * y + a + b))
        })
        .collect();
    (0..n)
        .map(|k| {
            let mut acc = 0.0;
            for (j, &s) in samples.iter().enumerate() {
                acc += s * (std::f64::consts::PI * k as f64 * (j as f64 + 0.5) / n as f64).cos();
            }
            acc * if k == 0 { 1.0 } else { 2.0 } / n as f64
        })
        .collect()
}

/// Clenshaw evaluation of a Chebyshev series on [a, b] at x.
pub fn clenshaw(coeffs: &[f64], a: f64, b: f64, x: f64) -> f64 {
    let y = (2.0 * x - a - b) / (b - a);
    let mut b1 = 0.0;
    let mut b2 = 0.0;
    for &c in coeffs.iter().skip(1).rev() {
        let t = 2.0 * y * b1 - b2 + c;
        b2 = b1;
        b1 = t;
    }
    y * b1 - b2 + coeffs[0]
}

/// Splits p = q·T_m + r in the Chebyshev basis (deg p < 2m), using
/// T_i·T_m = (T_{i+m} + T_{m−i})/2. Returns (q, r) with deg r < m.
fn cheb_divmod(p: &[f64], m: usize) -> (Vec<f64>, Vec<f64>) {
    let deg = p.len() - 1;
    assert!(deg >= m && deg < 2 * m, "split wants m ≤ deg < 2m, got deg {} m {}", deg, m);
    let mut q = vec![0.0; deg - m + 1];
    q[0] = p[m];
    for i in 1..=deg - m {
        q[i] = 2.0 * p[m + i];
    }
    let mut r = p[..m].to_vec();
    for i in 1..=deg - m {
        r[m - i] -= q[i] / 2.0;
    }
    (q, r)
}

// ═══════════════════════════════════════════════════════════════════════════
// Homomorphic evaluation
// ═══════════════════════════════════════════════════════════════════════════

impl CkksContext {
    /// Applies a Chebyshev series to every encrypted slot. `coeffs[k]`
    /// multiplies T_k on the fit interval [a, b]; slot values must lie in
    /// that interval (the interpolant diverges fast outside it).
    ///
    /// Consumes [`Self::chebyshev_levels`] levels.
    pub fn eval_chebyshev(
        &self,
        ct: &Ciphertext,
        coeffs: &[f64],
        (a, b): (f64, f64),
        rlk: &RelinKey,
    ) -> Ciphertext {
        let degree = effective_degree(coeffs);
        assert!(degree <= MAX_EVAL_DEGREE, "degree {} beyond the schedule", degree);
        let need = chebyshev_depth(degree);
        assert!(
            ct.level >= need,
            "chebyshev degree {} needs {} levels, ciphertext has {}",
            degree,
            need,
            ct.level
        );

        // domain map y = (2x − a − b)/(b − a), one level
        let y = {
            let scaled = self.mul_const(ct, 2.0 / (b - a));
            self.add_const(&scaled, -(a + b) / (b - a))
        };
        if degree == 0 {
            // collapse to the constant: a zero product keeps the object shape
            let zero = self.mul_const(&y, 0.0);
            return self.add_const(&zero, coeffs[0]);
        }

        // baby powers T_1..T_min(degree,8) by doubling
        let top_baby = degree.min(8);
        let mut babies: Vec<Ciphertext> = Vec::with_capacity(top_baby + 1);
        babies.push(y.clone()); // index 0 holds T_1
        for k in 2..=top_baby {
            let hi = &babies[(k + 1) / 2 - 1];
            let lo = &babies[k / 2 - 1];
            let lvl = hi.level.min(lo.level);
            let prod = self.mul_relin_rescale(
                &self.adjust_level(hi, lvl),
                &self.adjust_level(lo, lvl),
                rlk,
            );
            let doubled = self.add(&prod, &prod);
            let t = if k % 2 == 0 {
                self.add_const(&doubled, -1.0) // 2T_n² − T_0
            } else {
                let t1 = self.adjust_level(&babies[0], doubled.level);
                self.sub(&doubled, &t1) // 2T_{n+1}T_n − T_1
            };
            babies.push(t);
        }

        // align every baby at the deepest baby level: leaves combine them
        let leaf_level = babies.iter().map(|c| c.level).min().unwrap();
        let babies: Vec<Ciphertext> =
            babies.iter().map(|c| self.adjust_level(c, leaf_level)).collect();

        // giants T_16, T_32, by doubling up to the largest split order
        let mut giants: Vec<(usize, Ciphertext)> = Vec::new();
        if degree >= 16 {
            let top = prev_power_of_two(degree);
            let mut prev = babies[7].clone();
            let mut order = 8;
            while order < top {
                let sq = self.mul_relin_rescale(&prev, &prev, rlk);
                let doubled = self.add(&sq, &sq);
                let t = self.add_const(&doubled, -1.0);
                order *= 2;
                giants.push((order, t.clone()));
                prev = t;
            }
        }

        self.eval_cheb_node(coeffs, degree, &babies, &giants, rlk)
    }

    /// Recursive schedule node: leaf for degree ≤ 8, otherwise split at the
    /// largest power-of-two giant.
    fn eval_cheb_node(
        &self,
        coeffs: &[f64],
        degree: usize,
        babies: &[Ciphertext],
        giants: &[(usize, Ciphertext)],
        rlk: &RelinKey,
    ) -> Ciphertext {
        if degree <= 8 {
            return self.eval_cheb_leaf(&coeffs[..=degree], babies);
        }
        let m = prev_power_of_two(degree);
        let (q, r) = cheb_divmod(&coeffs[..=degree], m);
        // structural degrees keep the executed depth equal to the static one
        let qc = self.eval_cheb_node(&q, q.len() - 1, babies, giants, rlk);
        let rc = self.eval_cheb_node(&r, r.len() - 1, babies, giants, rlk);
        let giant = if m == 8 {
            &babies[7] // T_8 doubles as the smallest split order
        } else {
            &giants.iter().find(|(o, _)| *o == m).expect("giant missing").1
        };
        let lvl = giant.level.min(qc.level);
        let prod = self.mul_relin_rescale(
            &self.adjust_level(giant, lvl),
            &self.adjust_level(&qc, lvl),
            rlk,
        );
        let rc = self.adjust_level(&rc, prod.level);
        self.add(&prod, &rc)
    }

    /// Leaf: c_0 + Σ c_k·T_k as plaintext scalar products of the cached
    /// babies, one shared rescale.
    fn eval_cheb_leaf(&self, coeffs: &[f64], babies: &[Ciphertext]) -> Ciphertext {
        let base = &babies[0];
        let mut acc: Option<Ciphertext> = None;
        for (k, &c) in coeffs.iter().enumerate().skip(1) {
            if c == 0.0 {
                continue;
            }
            let term =
                self.mul_plain(&babies[k - 1], &self.encode_scalar(c, base.level, base.scale));
            acc = Some(match acc {
                None => term,
                Some(s) => self.add(&s, &term),
            });
        }
        // an all-zero tail still needs a ciphertext to carry the constant
        let acc = acc
            .unwrap_or_else(|| self.mul_plain(base, &self.encode_scalar(0.0, base.level, base.scale)));
        self.add_const(&self.rescale(&acc), coeffs[0])
    }

    /// Levels consumed by [`Self::eval_chebyshev`] for a given degree,
    /// including the domain map.
    pub fn chebyshev_levels(&self, degree: usize) -> usize {
        chebyshev_depth(degree)
    }

    // ── refresh and probes ────────────────────────────────────────────────

    /// Decrypt-re-encrypt refresh: returns a fresh top-level encryption of
    /// the current slot values. This is the key custodian's replacement for
    /// in-circuit bootstrapping at experiment scale.
    pub fn refresh<R: Rng + ?Sized>(
        &self,
        sk: &SecretKey,
        pk: &PublicKey,
        ct: &Ciphertext,
        rng: &mut R,
    ) -> Ciphertext {
        let values = self.decrypt_values(sk, ct);
        let top = self.max_level();
        let pt = self.encode(&values, top, self.scale_of(top));
        self.encrypt(pk, &pt, rng)
    }

    /// Bits of agreement between decrypted slots and a reference:
    /// −log₂ of the worst slot error across `reference.len()` slots.
    pub fn precision_bits(&self, sk: &SecretKey, ct: &Ciphertext, reference: &[f64]) -> f64 {
        let got = self.decrypt_values(sk, ct);
        let max_err = reference
            .iter()
            .zip(&got)
            .map(|(r, g)| (r - g).abs())
            .fold(0.0f64, f64::max);
        -max_err.max(f64::MIN_POSITIVE).log2()
    }
}

/// Depth of the schedule, mirroring the recursion: domain map, doubling
/// ladders for powers, one rung per leaf rescale and per split product.
fn chebyshev_depth(degree: usize) -> usize {
    if degree == 0 {
        return 2; // map + the zero-product collapse
    }
    let leaf_align = ceil_log2(degree.min(8)); // deepest baby below y
    1 + node_depth(degree, leaf_align)
}

fn node_depth(degree: usize, leaf_align: usize) -> usize {
    if degree <= 8 {
        return leaf_align + 1; // aligned babies, one leaf rescale
    }
    let m = prev_power_of_two(degree);
    let giant = ceil_log2(m); // T_m sits ⌈log₂ m⌉ below y
    let q = node_depth(degree - m, leaf_align);
    let r = node_depth(m - 1, leaf_align);
    (giant.max(q) + 1).max(r)
}

fn effective_degree(coeffs: &[f64]) -> usize {
    coeffs.iter().rposition(|&c| c != 0.0).unwrap_or(0)
}

fn prev_power_of_two(n: usize) -> usize {
    let mut m = 1;
    while m * 2 <= n {
        m *= 2;
    }
    m
}

fn ceil_log2(n: usize) -> usize {
    (usize::BITS - (n - 1).leading_zeros()) as usize
}

// ═══════════════════════════════════════════════════════════════════════════
// Tests
// ═══════════════════════════════════════════════════════════════════════════
