//! Zero-knowledge rank range proofs.
//!
//! A player proves that the rating inside a Pedersen commitment lies in a
//! public band without revealing the rating. The construction is a two-sided
//! bit decomposition: for inclusive bounds `[min, max]` the prover shows
//! `v − min ∈ [0, 2^B)` and `max − v ∈ [0, 2^B)` where `2^B > max − min`,
//! which together pin `min ≤ v ≤ max`. Each side commits to the bits of the
//! shifted value and proves every bit is 0 or 1 with a simulated-branch OR
//! proof; the bit blindings are chosen so the weighted sum of bit
//! commitments telescopes to the shifted value commitment, making the
//! aggregation check a plain group equation.
//!
//! Proofs are non-interactive through the [`Transcript`] chain and carry a
//! caller-supplied context string — the protocol binds each proof to the
//! digest of the ciphertext registered alongside the commitment, so a proof
//! cannot be replayed against a different ciphertext.

use curve25519_dalek::ristretto::{CompressedRistretto, RistrettoPoint};
use curve25519_dalek::scalar::Scalar;
use curve25519_dalek::traits::Identity;
use rand::RngCore;
use sha2::{Digest, Sha256};

use crate::elo::{band_range, BAND_COUNT};
use crate::prims::{decode_scalar, random_scalar, PedersenGens, PrimError, Transcript};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ZkrpError {
    #[error("bounds are empty or reversed")]
    BadBounds,
    #[error("value lies outside the claimed bounds")]
    OutOfRange,
    #[error("weighted bit commitments do not reconstruct the shifted commitment")]
    AggregationMismatch,
    #[error("bit {0} failed its 0/1 proof")]
    BitRejected(usize),
    #[error("proof has the wrong shape for the claimed bounds")]
    LengthMismatch,
    #[error("encoding error: {0}")]
    Encoding(#[from] PrimError),
}

/// Domain separator of the proof transcript; published so external
/// verifiers can reproduce the Fiat–Shamir challenges.
pub const TRANSCRIPT_DOMAIN: &str = "helo/zkrp/v1";

/// Inclusive integer bounds a band proof must cover. Interior bands are
/// half-open `[lo, hi)`, so their inclusive top is `hi − 1`; the top band
/// closes at the rating ceiling itself.
pub fn band_bounds(band: usize) -> (u64, u64) {
    let (lo, hi) = band_range(band);
    let max = if band == BAND_COUNT - 1 { hi as u64 } else { hi as u64 - 1 };
    (lo as u64, max)
}

/// Number of bits needed so `2^B > max − min` (at least one, so the blinding
/// telescope has a slot to land in).
pub fn range_bits(min: u64, max: u64) -> usize {
    let span = max - min;
    let mut bits = 0usize;
    while (1u64 << bits) <= span {
        bits += 1;
    }
    bits.max(1)
}

/// SHA-256 digest used to tie a proof context to a serialized ciphertext.
pub fn context_digest(bytes: &[u8]) -> [u8; 32] {
    Sha256::digest(bytes).into()
}

// ═══════════════════════════════════════════════════════════════════════════
// Proof structure
// ═══════════════════════════════════════════════════════════════════════════

/// OR proof that a bit commitment opens to 0 or 1: one branch is answered
/// honestly, the other simulated, and the verifier only learns that the two
/// sub-challenges add up to the transcript challenge.
#[derive(Clone, Debug, PartialEq, Eq)]
struct BitProof {
    a0: CompressedRistretto,
    a1: CompressedRistretto,
    e0: Scalar,
    z0: Scalar,
    z1: Scalar,
}

/// One side of the range argument: commitments to the bits of a shifted
/// value plus their 0/1 proofs.
#[derive(Clone, Debug, PartialEq, Eq)]
struct SideProof {
    bits: Vec<CompressedRistretto>,
    proofs: Vec<BitProof>,
}

/// Two-sided range proof for a Pedersen commitment.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RangeProof {
    lower: SideProof,
    upper: SideProof,
}

const BIT_PROOF_LEN: usize = 5 * 32;

impl RangeProof {
    /// Serialized size for bounds covered by `bits` bit positions.
    pub fn byte_len(bits: usize) -> usize {
        2 * bits * (32 + BIT_PROOF_LEN)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(Self::byte_len(self.lower.bits.len()));
        for side in [&self.lower, &self.upper] {
            for c in &side.bits {
                out.extend_from_slice(c.as_bytes());
            }
            for p in &side.proofs {
                out.extend_from_slice(p.a0.as_bytes());
                out.extend_from_slice(p.a1.as_bytes());
                out.extend_from_slice(p.e0.as_bytes());
                out.extend_from_slice(p.z0.as_bytes());
                out.extend_from_slice(p.z1.as_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], bits: usize) -> Result<Self, ZkrpError> {
        if bytes.len() != Self::byte_len(bits) {
            return Err(ZkrpError::LengthMismatch);
        }
        let mut at = 0usize;
        let mut take = |n: usize| {
            let s = &bytes[at..at + n];
            at += n;
            s
        };
        let mut sides = Vec::with_capacity(2);
        for _ in 0..2 {
            let mut cs = Vec::with_capacity(bits);
            for _ in 0..bits {
                cs.push(CompressedRistretto(take(32).try_into().unwrap()));
            }
            let mut proofs = Vec::with_capacity(bits);
            for _ in 0..bits {
                let a0 = CompressedRistretto(take(32).try_into().unwrap());
                let a1 = CompressedRistretto(take(32).try_into().unwrap());
                let e0 = decode_scalar(take(32))?;
                let z0 = decode_scalar(take(32))?;
                let z1 = decode_scalar(take(32))?;
                proofs.push(BitProof { a0, a1, e0, z0, z1 });
            }
            sides.push(SideProof { bits: cs, proofs });
        }
        let upper = sides.pop().unwrap();
        let lower = sides.pop().unwrap();
        Ok(RangeProof { lower, upper })
    }
}

// ═══════════════════════════════════════════════════════════════════════════
// Proving
// ═══════════════════════════════════════════════════════════════════════════

/// Prove `min ≤ value ≤ max` for `C = g·value + h·blinding`. The `context`
/// bytes are folded into every challenge; verification requires the same
/// context.
pub fn prove_range<R: RngCore + ?Sized>(
    gens: &PedersenGens,
    value: u64,
    blinding: Scalar,
    min: u64,
    max: u64,
    context: &[u8],
    rng: &mut R,
) -> Result<RangeProof, ZkrpError> {
    if max < min {
        return Err(ZkrpError::BadBounds);
    }
    if value < min || value > max {
        return Err(ZkrpError::OutOfRange);
    }
    let bits = range_bits(min, max);
    let commitment = gens.commit_u64(value, blinding);
    let mut t = proof_transcript(&commitment, min, max, context);

    // lower side: value − min with the commitment blinding, upper side:
    // max − value with its negation (g·max − C = g·(max−v) − h·r).
    let lower = prove_side(gens, value - min, blinding, bits, &mut t, rng);
    let upper = prove_side(gens, max - value, -blinding, bits, &mut t, rng);
    Ok(RangeProof { lower, upper })
}

fn proof_transcript(c: &RistrettoPoint, min: u64, max: u64, context: &[u8]) -> Transcript {
    let mut t = Transcript::new(TRANSCRIPT_DOMAIN);
    t.append_u64("min", min);
    t.append_u64("max", max);
    t.append_point("C", c);
    t.append_bytes("context", context);
    t
}

/// Blindings for the bit commitments chosen so Σ 2^i·r_i equals `rho`; the
/// weighted commitment sum then reconstructs the shifted commitment exactly.
fn split_blinding<R: RngCore + ?Sized>(rho: Scalar, bits: usize, rng: &mut R) -> Vec<Scalar> {
    let mut rs = vec![Scalar::ZERO; bits];
    let mut acc = Scalar::ZERO;
    for (i, r) in rs.iter_mut().enumerate().skip(1) {
        *r = random_scalar(rng);
        acc += Scalar::from(1u64 << i) * *r;
    }
    rs[0] = rho - acc;
    rs
}

fn prove_side<R: RngCore + ?Sized>(
    gens: &PedersenGens,
    shifted: u64,
    rho: Scalar,
    bits: usize,
    t: &mut Transcript,
    rng: &mut R,
) -> SideProof {
    let rs = split_blinding(rho, bits, rng);
    let bit_points: Vec<RistrettoPoint> = (0..bits)
        .map(|i| gens.commit_u64((shifted >> i) & 1, rs[i]))
        .collect();
    let bit_cs: Vec<CompressedRistretto> = bit_points.iter().map(|p| p.compress()).collect();
    for c in &bit_cs {
        t.append_bytes("bit", c.as_bytes());
    }

    let mut proofs = Vec::with_capacity(bits);
    for i in 0..bits {
        let bit = (shifted >> i) & 1;
        proofs.push(prove_bit(gens, &bit_points[i], bit == 1, rs[i], t, rng));
    }
    SideProof { bits: bit_cs, proofs }
}

/// OR proof for `P = h·ρ  ∨  P − g = h·ρ`, honest on the branch selected by
/// `bit` and simulated on the other.
fn prove_bit<R: RngCore + ?Sized>(
    gens: &PedersenGens,
    p: &RistrettoPoint,
    bit: bool,
    rho: Scalar,
    t: &mut Transcript,
    rng: &mut R,
) -> BitProof {
    let p0 = *p;
    let p1 = *p - gens.g;
    let w = random_scalar(rng);
    if !bit {
        // honest branch 0, simulate branch 1
        let (e1, z1) = (random_scalar(rng), random_scalar(rng));
        let a0 = gens.h * w;
        let a1 = gens.h * z1 - p1 * e1;
        let e = bit_challenge(t, &a0, &a1);
        let e0 = e - e1;
        BitProof { a0: a0.compress(), a1: a1.compress(), e0, z0: w + e0 * rho, z1 }
    } else {
        // honest branch 1, simulate branch 0
        let (e0, z0) = (random_scalar(rng), random_scalar(rng));
        let a1 = gens.h * w;
        let a0 = gens.h * z0 - p0 * e0;
        let e = bit_challenge(t, &a0, &a1);
        let e1 = e - e0;
        BitProof { a0: a0.compress(), a1: a1.compress(), e0, z0, z1: w + e1 * rho }
    }
}

fn bit_challenge(t: &mut Transcript, a0: &RistrettoPoint, a1: &RistrettoPoint) -> Scalar {
    t.append_point("A0", a0);
    t.append_point("A1", a1);
    t.challenge_scalar("e")
}

// ═══════════════════════════════════════════════════════════════════════════
// Verifying
// ═══════════════════════════════════════════════════════════════════════════

/// Verify a range proof against a commitment, inclusive bounds, and context.
pub fn verify_range(
    gens: &PedersenGens,
    commitment: &RistrettoPoint,
    min: u64,
    max: u64,
    context: &[u8],
    proof: &RangeProof,
) -> Result<(), ZkrpError> {
    if max < min {
        return Err(ZkrpError::BadBounds);
    }
    let bits = range_bits(min, max);
    for side in [&proof.lower, &proof.upper] {
        if side.bits.len() != bits || side.proofs.len() != bits {
            return Err(ZkrpError::LengthMismatch);
        }
    }
    let mut t = proof_transcript(commitment, min, max, context);

    // shifted commitments the bit sums must telescope to
    let d_lower = *commitment - gens.g * Scalar::from(min);
    let d_upper = gens.g * Scalar::from(max) - *commitment;
    verify_side(gens, &d_lower, &proof.lower, &mut t)?;
    verify_side(gens, &d_upper, &proof.upper, &mut t)
}

fn verify_side(
    gens: &PedersenGens,
    target: &RistrettoPoint,
    side: &SideProof,
    t: &mut Transcript,
) -> Result<(), ZkrpError> {
    let mut points = Vec::with_capacity(side.bits.len());
    for c in &side.bits {
        points.push(c.decompress().ok_or(PrimError::InvalidPoint)?);
        t.append_bytes("bit", c.as_bytes());
    }

    let mut sum = RistrettoPoint::identity();
    for (i, p) in points.iter().enumerate() {
        sum += p * Scalar::from(1u64 << i);
    }
    if sum != *target {
        return Err(ZkrpError::AggregationMismatch);
    }

    for (i, (p, pr)) in points.iter().zip(&side.proofs).enumerate() {
        let a0 = pr.a0.decompress().ok_or(PrimError::InvalidPoint)?;
        let a1 = pr.a1.decompress().ok_or(PrimError::InvalidPoint)?;
        let e = bit_challenge(t, &a0, &a1);
        let e1 = e - pr.e0;
        let ok0 = gens.h * pr.z0 == a0 + p * pr.e0;
        let ok1 = gens.h * pr.z1 == a1 + (p - gens.g) * e1;
        if !(ok0 && ok1) {
            return Err(ZkrpError::BitRejected(i));
        }
    }
    Ok(())
}

// ═══════════════════════════════════════════════════════════════════════════
// Tests
// ═══════════════════════════════════════════════════════════════════════════

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn setup(seed: u64) -> (PedersenGens, ChaCha20Rng) {
        (PedersenGens::default(), ChaCha20Rng::seed_from_u64(seed))
    }

    #[test]
    fn band_bounds_cover_the_ladder() {
        assert_eq!(band_bounds(0), (0, 499));
        assert_eq!(band_bounds(3), (1500, 1999));
        assert_eq!(band_bounds(BAND_COUNT - 1), (3500, 4000), "top band keeps the ceiling");
        assert_eq!(range_bits(1500, 1999), 9, "expected 9, got {}", range_bits(1500, 1999));
        assert_eq!(range_bits(3500, 4000), 9);
        assert_eq!(range_bits(7, 7), 1, "degenerate bounds still use one bit");
    }

    #[test]
    fn honest_proofs_verify_across_bands_and_edges() {
        let (gens, mut rng) = setup(71);
        for band in [0usize, 3, BAND_COUNT - 1] {
            let (min, max) = band_bounds(band);
            for v in [min, min + 137 % (max - min), (min + max) / 2, max] {
                let r = random_scalar(&mut rng);
                let c = gens.commit_u64(v, r);
                let proof = prove_range(&gens, v, r, min, max, b"ctx", &mut rng)
                    .expect("honest proof must build");
                assert_eq!(
                    verify_range(&gens, &c, min, max, b"ctx", &proof),
                    Ok(()),
                    "band {} value {} must verify",
                    band,
                    v
                );
            }
        }
    }

    #[test]
    fn prover_refuses_out_of_range_values() {
        let (gens, mut rng) = setup(72);
        let r = random_scalar(&mut rng);
        let (min, max) = band_bounds(3);
        assert_eq!(
            prove_range(&gens, min - 1, r, min, max, b"", &mut rng).unwrap_err(),
            ZkrpError::OutOfRange
        );
        assert_eq!(
            prove_range(&gens, max + 1, r, min, max, b"", &mut rng).unwrap_err(),
            ZkrpError::OutOfRange
        );
        assert_eq!(prove_range(&gens, 5, r, 9, 3, b"", &mut rng).unwrap_err(), ZkrpError::BadBounds);
    }

    #[test]
    fn verification_is_bound_to_statement_and_context() {
        let (gens, mut rng) = setup(73);
        let (min, max) = band_bounds(3);
        let v = 1700u64;
        let r = random_scalar(&mut rng);
        let c = gens.commit_u64(v, r);
        let proof = prove_range(&gens, v, r, min, max, b"ciphertext-digest", &mut rng).unwrap();

        assert_eq!(verify_range(&gens, &c, min, max, b"ciphertext-digest", &proof), Ok(()));
        assert!(
            verify_range(&gens, &c, min, max, b"other-digest", &proof).is_err(),
            "different context must invalidate the proof"
        );
        let (min2, max2) = band_bounds(4);
        assert!(
            verify_range(&gens, &c, min2, max2, b"ciphertext-digest", &proof).is_err(),
            "different band must invalidate the proof"
        );
        let c2 = gens.commit_u64(v, random_scalar(&mut rng));
        assert!(
            verify_range(&gens, &c2, min, max, b"ciphertext-digest", &proof).is_err(),
            "different commitment must invalidate the proof"
        );
    }

    #[test]
    fn mismatched_commitment_value_hits_the_aggregation_check() {
        let (gens, mut rng) = setup(74);
        let (min, max) = band_bounds(3);
        let r = random_scalar(&mut rng);
        // proof built for an in-band value, presented for a commitment to an
        // out-of-band one under the same blinding
        let proof = prove_range(&gens, 1500, r, min, max, b"", &mut rng).unwrap();
        let c_bad = gens.commit_u64(1499, r);
        assert_eq!(
            verify_range(&gens, &c_bad, min, max, b"", &proof),
            Err(ZkrpError::AggregationMismatch)
        );
    }

    #[test]
    fn tampered_bytes_are_rejected() {
        let (gens, mut rng) = setup(75);
        let (min, max) = band_bounds(2);
        let v = 1234u64;
        let r = random_scalar(&mut rng);
        let c = gens.commit_u64(v, r);
        let proof = prove_range(&gens, v, r, min, max, b"", &mut rng).unwrap();
        let bits = range_bits(min, max);
        let bytes = proof.to_bytes();
        assert_eq!(bytes.len(), RangeProof::byte_len(bits), "serialized length must match");

        for flip_at in [0usize, bits * 32 + 7, bytes.len() - 1] {
            let mut bad = bytes.clone();
            bad[flip_at] ^= 0x40;
            match RangeProof::from_bytes(&bad, bits) {
                Ok(p) => assert!(
                    verify_range(&gens, &c, min, max, b"", &p).is_err(),
                    "flip at {} must not verify",
                    flip_at
                ),
                Err(_) => {} // non-canonical encoding is an acceptable rejection
            }
        }
        assert_eq!(
            RangeProof::from_bytes(&bytes[..bytes.len() - 1], bits).unwrap_err(),
            ZkrpError::LengthMismatch
        );
    }

    #[test]
    fn serialization_round_trips_bit_exactly() {
        let (gens, mut rng) = setup(76);
        let (min, max) = band_bounds(5);
        let r = random_scalar(&mut rng);
        let proof = prove_range(&gens, 2750, r, min, max, b"ctx", &mut rng).unwrap();
        let bytes = proof.to_bytes();
        let back = RangeProof::from_bytes(&bytes, range_bits(min, max)).expect("round trip");
        assert_eq!(proof, back);
        assert_eq!(back.to_bytes(), bytes);
    }

    #[test]
    fn context_digest_is_stable_and_input_sensitive() {
        let d1 = context_digest(b"ciphertext bytes");
        let d2 = context_digest(b"ciphertext bytes");
        let d3 = context_digest(b"ciphertext bytez");
        assert_eq!(d1, d2);
        assert_ne!(d1, d3);
    }
}
