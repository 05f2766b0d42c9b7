//! Operation-level error bounds for decoded values.
//!
//! Every homomorphic operation perturbs the encoded values by a small
//! amount: encoding rounds coefficients, encryption adds sampled errors,
//! key switching folds digit/key-error products into the result, and
//! rescaling rounds once more. This module predicts, per operation, a bound
//! on the resulting slot-value error so callers can check decryptions
//! against an a-priori budget instead of a hand-tuned tolerance.
//!
//! The bounds are high-probability estimates, not worst cases: each noise
//! term is modelled by its slot-domain standard deviation (a polynomial with
//! iid mean-zero coefficients of variance v evaluates at a canonical root to
//! a value of variance d·v; products of independent polynomials multiply
//! these variances), and the final bound is [`HP_FACTOR`] standard
//! deviations. Error tails of product form decay like e^(−x) rather than
//! e^(−x²/2), so the factor is chosen far out on the tail; across the
//! 10³-trial acceptance sweep the expected number of exceedances is ≪ 1.
//!
//! All bounds are expressed in value units (the same units as decoded
//! slots), so they compose across operations by ordinary arithmetic.

use super::engine::digit_plan;
use super::CkksContext;

/// Multiplier on the slot standard deviation used for every bound.
pub const HP_FACTOR: f64 = 16.0;

/// Per-coefficient variance of the ternary secret and encryption masks
/// (coefficients uniform on {−1, 0, 1}).
const TERNARY_VAR: f64 = 2.0 / 3.0;

/// Per-coefficient variance of a rounding offset (uniform on ±1/2).
const ROUND_VAR: f64 = 1.0 / 12.0;

/// Noise calculator for one parameter set.
///
/// Construction walks the digit decomposition once; the per-level digit
/// power table is what makes key-switching bounds depend on the level.
pub struct NoiseModel {
    degree: f64,
    sigma: f64,
    /// `digit_power[l]` = Σ 2^(2·width) over decomposition digits sourced
    /// from limbs active at level l
    digit_power: Vec<f64>,
}

impl NoiseModel {
    pub fn new(ctx: &CkksContext) -> Self {
        let plan = digit_plan(ctx.ring());
        let levels = ctx.max_level();
        let digit_power = (0..=levels)
            .map(|level| {
                plan.iter()
                    .filter(|slot| slot.limb <= level)
                    .map(|slot| (2.0f64).powi(2 * slot.width as i32))
                    .sum()
            })
            .collect();
        NoiseModel {
            degree: ctx.config().degree as f64,
            sigma: ctx.config().sigma,
            digit_power,
        }
    }

    /// Error of encoding alone: one rounding per coefficient.
    pub fn encode_bound(&self, scale: f64) -> f64 {
        HP_FACTOR * (self.degree * ROUND_VAR).sqrt() / scale
    }

    /// Error of an encode–encrypt–decrypt round trip: encoding rounding
    /// plus the encryption noise e₀ − u·e_pk + e₁·s.
    pub fn fresh_bound(&self, scale: f64) -> f64 {
        let d = self.degree;
        let s2 = self.sigma * self.sigma;
        let slot_var = d * s2 + 2.0 * d * d * TERNARY_VAR * s2;
        self.encode_bound(scale) + HP_FACTOR * slot_var.sqrt() / scale
    }

    /// Addition and subtraction: errors add (a conservative composition
    /// that also covers correlated operands).
    pub fn add_bound(&self, a: f64, b: f64) -> f64 {
        a + b
    }

    /// Multiplication by an encoded constant, including the rescale the
    /// engine performs: the input error scales by |c|, the constant's own
    /// rounding scales by the input magnitude, and the rescale rounds once.
    pub fn mul_const_bound(
        &self,
        input: f64,
        c: f64,
        input_magnitude: f64,
        const_scale: f64,
        output_scale: f64,
    ) -> f64 {
        c.abs() * input + input_magnitude * 0.5 / const_scale + self.rescale_round(output_scale)
    }

    /// Ciphertext multiplication with relinearization and rescale. `level`
    /// is the operands' level (the key-switch digit set depends on it), the
    /// scales are the operands' scales before rescaling.
    #[allow(clippy::too_many_arguments)]
    pub fn mul_bound(
        &self,
        a: f64,
        b: f64,
        mag_a: f64,
        mag_b: f64,
        level: usize,
        scale_a: f64,
        scale_b: f64,
        output_scale: f64,
    ) -> f64 {
        mag_a * b
            + mag_b * a
            + a * b
            + self.key_switch_bound(level, scale_a * scale_b)
            + self.rescale_round(output_scale)
    }

    /// Rescaling an existing ciphertext: the value-space error carries over
    /// and one rounding is added at the output scale.
    pub fn rescale_bound(&self, input: f64, output_scale: f64) -> f64 {
        input + self.rescale_round(output_scale)
    }

    /// Key-switch noise Σ dₜ·eₜ at the product scale: digit coefficients
    /// have variance 2^(2w)/12, key errors variance σ².
    fn key_switch_bound(&self, level: usize, product_scale: f64) -> f64 {
        let d = self.degree;
        let power = self.digit_power[level.min(self.digit_power.len() - 1)];
        HP_FACTOR * d * self.sigma * (power * ROUND_VAR).sqrt() / product_scale
    }

    /// The rounding term of a single rescale: a ±1/2 offset on both
    /// ciphertext components, one of which meets the secret.
    fn rescale_round(&self, output_scale: f64) -> f64 {
        let d = self.degree;
        let slot_var = d * ROUND_VAR * (1.0 + d * TERNARY_VAR);
        HP_FACTOR * slot_var.sqrt() / output_scale
    }
}

// ═══════════════════════════════════════════════════════════════════════════
// Tests
// ═══════════════════════════════════════════════════════════════════════════
