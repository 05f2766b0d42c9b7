//! Slot encoding: real vectors ↔ scaled integer polynomials.
//!
//! A degree-d negacyclic polynomial with real coefficients is determined by
//! its values at the d primitive 2d-th roots of unity, which come in d/2
//! conjugate pairs. Each pair carries one complex slot; we use the real part
//! only, giving d/2 real slots per polynomial. Slot j sits at the root
//! exponent 5^j mod 2d (an enumeration of half the odd residues; their
//! negatives hold the conjugate values).
//!
//! Encoding interpolates the slot values, scales by a large factor, and
//! rounds to integers; decoding evaluates the integer polynomial back at the
//! slot roots and divides the scale out. Products of encoded polynomials
//! therefore decode to slot-wise products — evaluation at fixed points is
//! multiplicative — which is the property the whole homomorphic layer leans
//! on.
//!
//! The interpolation itself rides on an FFT of length 2d: placing the slot
//! values at their odd positions, zero at even positions, and transforming
//! back yields half the coefficients of the wanted polynomial directly
//! (the even-position zeros multiply the interpolant by (1 − X^d)/2, which
//! is identically 1 on the odd nodes).

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

pub struct Encoder {
    degree: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// root exponent t_j = 5^j mod 2d for slot j; conjugate at 2d − t_j
    slot_pos: Vec<usize>,
}

impl std::fmt::Debug for Encoder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Encoder").field("degree", &self.degree).finish()
    }
}

impl Encoder {
    pub fn new(degree: usize) -> Self {
        assert!(degree.is_power_of_two() && degree >= 16, "bad encoder degree {}", degree);
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(2 * degree);
        let inverse = planner.plan_fft_inverse(2 * degree);
        let m = 2 * degree;
        let mut slot_pos = Vec::with_capacity(degree / 2);
        let mut t = 1usize;
        for _ in 0..degree / 2 {
            slot_pos.push(t);
            t = t * 5 % m;
        }
        Encoder { degree, forward, inverse, slot_pos }
    }

    pub fn slots(&self) -> usize {
        self.degree / 2
    }

    /// Interpolates `values` (padded with zeros to the slot count), scales by
    /// `scale`, and rounds to signed integers given as (negative, magnitude).
    pub fn encode(&self, values: &[f64], scale: f64) -> Vec<(bool, u128)> {
        assert!(values.len() <= self.slots(), "{} values exceed slot count", values.len());
        assert!(scale >= 1.0 && scale.is_finite(), "bad encoding scale {}", scale);
        let m = 2 * self.degree;
        let mut buf = vec![Complex::new(0.0, 0.0); m];
        for (j, &v) in values.iter().enumerate() {
            assert!(v.is_finite(), "slot {} is not finite", j);
            let t = self.slot_pos[j];
            buf[t] = Complex::new(v, 0.0);
            buf[m - t] = Complex::new(v, 0.0); // conjugate of a real value
        }
        self.inverse.process(&mut buf);
        // unnormalized inverse FFT: divide by 2d, then double to undo the
        // (1 − X^d)/2 mask — net divide by d
        let inv_d = 1.0 / self.degree as f64;
        buf[..self.degree]
            .iter()
            .map(|c| {
                let x = c.re * inv_d * scale;
                (x < 0.0, x.abs().round() as u128)
            })
            .collect()
    }

    /// Evaluates centered coefficients at the slot roots and divides by
    /// `scale`. Small imaginary parts (noise) are discarded.
    pub fn decode(&self, coeffs: &[f64], scale: f64) -> Vec<f64> {
        assert_eq!(coeffs.len(), self.degree, "coefficient count != degree");
        let m = 2 * self.degree;
        let mut buf = vec![Complex::new(0.0, 0.0); m];
        for (k, &c) in coeffs.iter().enumerate() {
            buf[k] = Complex::new(c, 0.0);
        }
        self.forward.process(&mut buf);
        self.slot_pos.iter().map(|&t| buf[t].re / scale).collect()
    }
}

// ═══════════════════════════════════════════════════════════════════════════
// Tests
// ═══════════════════════════════════════════════════════════════════════════

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn wide_to_f64(w: &[(bool, u128)]) -> Vec<f64> {
        w.iter().map(|&(neg, mag)| if neg { -(mag as f64) } else { mag as f64 }).collect()
    }

    #[test]
    fn slot_positions_are_distinct_odd_conjugate_free() {
        let enc = Encoder::new(64);
        let m = 128;
        let mut seen = std::collections::HashSet::new();
        for &t in &enc.slot_pos {
            assert_eq!(t % 2, 1, "slot exponent {} must be odd", t);
            assert!(seen.insert(t), "duplicate slot exponent {}", t);
            assert!(!seen.contains(&(m - t)), "conjugate pair collision at {}", t);
        }
        assert_eq!(enc.slot_pos.len(), 32);
    }

    #[test]
    fn encode_decode_round_trip_is_tight() {
        let enc = Encoder::new(64);
        let mut rng = ChaCha20Rng::seed_from_u64(21);
        let scale = (1u64 << 40) as f64;
        let values: Vec<f64> = (0..32).map(|_| rng.random_range(-2000.0..2000.0)).collect();
        let coeffs = wide_to_f64(&enc.encode(&values, scale));
        let back = enc.decode(&coeffs, scale);
        for (j, (&v, &b)) in values.iter().zip(&back).enumerate() {
            assert!(
                (v - b).abs() < 1e-9,
                "slot {}: expected {}, got {} (err {})",
                j,
                v,
                b,
                (v - b).abs()
            );
        }
    }

    #[test]
    fn short_input_pads_remaining_slots_with_zero() {
        let enc = Encoder::new(32);
        let scale = (1u64 << 30) as f64;
        let coeffs = wide_to_f64(&enc.encode(&[7.0, -3.0], scale));
        let back = enc.decode(&coeffs, scale);
        assert!((back[0] - 7.0).abs() < 1e-6);
        assert!((back[1] + 3.0).abs() < 1e-6);
        for (j, &b) in back.iter().enumerate().skip(2) {
            assert!(b.abs() < 1e-6, "slot {} should be 0, got {}", j, b);
        }
    }

    #[test]
    fn scalar_constant_polynomial_fills_every_slot() {
        // the fast path for scalar plaintexts writes v·scale into the
        // constant coefficient only; all slots must read back v
        let enc = Encoder::new(64);
        let scale = (1u64 << 35) as f64;
        let mut coeffs = vec![0.0; 64];
        coeffs[0] = (0.731_f64 * scale).round();
        let back = enc.decode(&coeffs, scale);
        for (j, &b) in back.iter().enumerate() {
            assert!((b - 0.731).abs() < 1e-9, "slot {}: got {}", j, b);
        }
    }

    #[test]
    fn products_of_encodings_decode_to_slot_products() {
        // the multiplicativity that underwrites homomorphic multiplication:
        // negacyclic product of two encodings at scale s decodes, at scale
        // s², to the slot-wise product
        let degree = 32;
        let enc = Encoder::new(degree);
        let mut rng = ChaCha20Rng::seed_from_u64(22);
        let scale = (1u64 << 20) as f64;
        let u: Vec<f64> = (0..16).map(|_| rng.random_range(-3.0..3.0)).collect();
        let v: Vec<f64> = (0..16).map(|_| rng.random_range(-3.0..3.0)).collect();
        let a: Vec<i128> = enc
            .encode(&u, scale)
            .iter()
            .map(|&(n, m)| if n { -(m as i128) } else { m as i128 })
            .collect();
        let b: Vec<i128> = enc
            .encode(&v, scale)
            .iter()
            .map(|&(n, m)| if n { -(m as i128) } else { m as i128 })
            .collect();
        // schoolbook negacyclic convolution in exact integers
        let mut prod = vec![0i128; degree];
        for i in 0..degree {
            for j in 0..degree {
                let t = a[i] * b[j];
                if i + j < degree {
                    prod[i + j] += t;
                } else {
                    prod[i + j - degree] -= t;
                }
            }
        }
        let prod_f: Vec<f64> = prod.iter().map(|&x| x as f64).collect();
        let back = enc.decode(&prod_f, scale * scale);
        for j in 0..16 {
            let expected = u[j] * v[j];
            assert!(
                (back[j] - expected).abs() < 1e-4,
                "slot {}: expected {}, got {}",
                j,
                expected,
                back[j]
            );
        }
        for (j, &b) in back.iter().enumerate().skip(16) {
            assert!(b.abs() < 1e-4, "slot {} should be 0, got {}", j, b);
        }
    }
}
