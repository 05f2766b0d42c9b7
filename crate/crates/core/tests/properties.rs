//! Property-based invariants over randomly drawn inputs: algebraic
//! identities of the rating oracle, structural guarantees of the ladder and
//! bit-width arithmetic, homomorphism of the commitment scheme, and
//! mutation-soundness of signatures and range proofs.
//!
//! Group-operation-heavy properties run with reduced case counts so the
//! whole file stays in the seconds range; the acceptance suite covers the
//! same ground at volume with fixed seeds.

use curve25519_dalek::scalar::Scalar;
use helo_core::elo;
use helo_core::prims::{PedersenGens, SigningKey};
use helo_core::zkrp::{prove_range, range_bits, verify_range, RangeProof};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

// ═══════════════════════════════════════════════════════════════════════════
// Rating oracle
// ═══════════════════════════════════════════════════════════════════════════

proptest! {
    /// A head-to-head update is zero-sum whenever neither side can clamp:
    /// whatever one player gains the other loses.
    #[test]
    fn pair_updates_conserve_total_rating(
        r_a in 200.0..3800.0f64,
        r_b in 200.0..3800.0f64,
        score in prop::sample::select(vec![0.0, 0.5, 1.0]),
    ) {
        let (na, nb) = elo::update_pair(r_a, r_b, score);
        let drift = ((na + nb) - (r_a + r_b)).abs();
        prop_assert!(drift < 1e-9, "expected zero-sum, got drift {drift:.3e}");
    }

    /// Expected score is a probability and grows with the player's own
    /// rating.
    #[test]
    fn expected_score_is_a_monotone_probability(
        r in 0.0..4000.0f64,
        opp in 0.0..4000.0f64,
        step in 1.0..400.0f64,
    ) {
        let e = elo::expected_score(r, opp);
        prop_assert!(e > 0.0 && e < 1.0, "expected a probability, got {e}");
        if r + step <= 4000.0 {
            let stronger = elo::expected_score(r + step, opp);
            prop_assert!(stronger > e, "expected {stronger} > {e} after gaining {step}");
        }
    }

    /// Every rating lands in exactly the band whose half-open interval
    /// contains it.
    #[test]
    fn band_lookup_matches_interval_arithmetic(r in 0.0..4000.0f64) {
        let band = elo::band_of(r);
        let (lo, hi) = elo::band_range(band);
        prop_assert!(lo <= r && r < hi, "rating {r} outside its band [{lo}, {hi})");
    }

    /// The update direction follows the sign of (actual − expected) and its
    /// magnitude is exactly K-linear before clamping.
    #[test]
    fn update_is_linear_in_the_score_surplus(
        r in 500.0..3500.0f64,
        expected in 0.0..3.0f64,
        actual in 0.0..3.0f64,
    ) {
        let updated = elo::update_rating(r, expected, actual);
        let predicted = r + elo::K_FACTOR * (actual - expected);
        prop_assert!(
            (updated - predicted).abs() < 1e-9,
            "expected {predicted}, got {updated}"
        );
    }
}

// ═══════════════════════════════════════════════════════════════════════════
// Bit-width arithmetic
// ═══════════════════════════════════════════════════════════════════════════

proptest! {
    /// `range_bits` returns the least width whose domain covers the span.
    #[test]
    fn range_bits_is_the_least_sufficient_width(min in 0..100_000u64, span in 0..100_000u64) {
        let bits = range_bits(min, min + span);
        prop_assert!((1u64 << bits) > span, "2^{bits} must exceed span {span}");
        if bits > 1 {
            prop_assert!(
                (1u64 << (bits - 1)) <= span,
                "width {bits} is not minimal for span {span}"
            );
        }
    }
}

// ═══════════════════════════════════════════════════════════════════════════
// Commitments and signatures
// ═══════════════════════════════════════════════════════════════════════════

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Pedersen commitments are additively homomorphic in both the value
    /// and the blinding.
    #[test]
    fn commitments_add_homomorphically(
        a in 0..1u64 << 40,
        b in 0..1u64 << 40,
        seed in any::<u64>(),
    ) {
        let gens = PedersenGens::default();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let (r, s) = (helo_core::prims::random_scalar(&mut rng),
                      helo_core::prims::random_scalar(&mut rng));
        let sum = gens.commit(Scalar::from(a) + Scalar::from(b), r + s);
        let parts = gens.commit_u64(a, r) + gens.commit_u64(b, s);
        prop_assert_eq!(sum.compress(), parts.compress(), "homomorphism failed");
    }

    /// A signature verifies on its message and on nothing else: any flipped
    /// message byte or signature bit must be rejected.
    #[test]
    fn signatures_bind_to_the_exact_message(
        msg in prop::collection::vec(any::<u8>(), 1..64),
        flip_byte in any::<prop::sample::Index>(),
        flip_bit in 0..8u32,
        seed in any::<u64>(),
    ) {
        let key = SigningKey::generate(&mut ChaCha20Rng::seed_from_u64(seed));
        let vk = key.verifying_key();
        let sig = key.sign(&msg);
        prop_assert!(vk.verify(&msg, &sig).is_ok(), "honest signature must verify");

        let mut mangled_msg = msg.clone();
        let i = flip_byte.index(mangled_msg.len());
        mangled_msg[i] ^= 1 << flip_bit;
        prop_assert!(vk.verify(&mangled_msg, &sig).is_err(), "flipped message accepted");

        let mut sig_bytes = sig.to_bytes();
        let j = flip_byte.index(sig_bytes.len());
        sig_bytes[j] ^= 1 << flip_bit;
        if let Ok(mangled_sig) = helo_core::prims::Signature::from_bytes(&sig_bytes) {
            prop_assert!(vk.verify(&msg, &mangled_sig).is_err(), "flipped signature accepted");
        }
    }
}

// ═══════════════════════════════════════════════════════════════════════════
// Range proofs
// ═══════════════════════════════════════════════════════════════════════════

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    /// Honest proofs verify; the same proof with any single serialized bit
    /// flipped never does.
    #[test]
    fn range_proofs_verify_honestly_and_reject_any_bit_flip(
        min in 0..4000u64,
        span in 1..31u64,
        offset in any::<prop::sample::Index>(),
        flip in any::<prop::sample::Index>(),
        seed in any::<u64>(),
    ) {
        let gens = PedersenGens::default();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let max = min + span;
        let value = min + (offset.index(span as usize + 1) as u64);
        let blinding = helo_core::prims::random_scalar(&mut rng);
        let proof = prove_range(&gens, value, blinding, min, max, b"prop", &mut rng)
            .expect("in-range witness proves");
        let commitment = gens.commit_u64(value, blinding);
        prop_assert!(
            verify_range(&gens, &commitment, min, max, b"prop", &proof).is_ok(),
            "honest proof rejected for {value} in [{min}, {max}]"
        );

        let mut bytes = proof.to_bytes();
        let pos = flip.index(bytes.len() * 8);
        bytes[pos / 8] ^= 1 << (pos % 8);
        let bits = range_bits(min, max);
        if let Ok(mangled) = RangeProof::from_bytes(&bytes, bits) {
            prop_assert!(
                verify_range(&gens, &commitment, min, max, b"prop", &mangled).is_err(),
                "bit-flipped proof accepted (flip at {pos})"
            );
        }
    }

    /// The prover refuses witnesses outside the statement.
    #[test]
    fn prover_rejects_out_of_range_witnesses(
        min in 1..4000u64,
        span in 1..31u64,
        outside in 1..5u64,
        seed in any::<u64>(),
    ) {
        let gens = PedersenGens::default();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let blinding = helo_core::prims::random_scalar(&mut rng);
        prop_assert!(
            prove_range(&gens, min + span + outside, blinding, min, min + span, b"p", &mut rng)
                .is_err(),
            "witness above the range must be refused"
        );
        prop_assert!(
            prove_range(&gens, min.saturating_sub(outside.min(min)), blinding, min, min + span,
                        b"p", &mut rng)
                .is_err(),
            "witness below the range must be refused"
        );
    }
}
