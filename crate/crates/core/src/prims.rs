//! Commitment and signature primitives on the Ristretto group.
//!
//! Everything the rank-proof layer needs from discrete-log land lives here:
//! Pedersen commitments (perfectly hiding, binding under DL), a
//! Fiat–Shamir transcript with length-framed absorption, and Schnorr
//! signatures for custodian attestations. Randomness comes from caller
//! supplied RNGs as raw bytes, so the group library's own RNG trait plumbing
//! is never involved.

use curve25519_dalek::constants::RISTRETTO_BASEPOINT_POINT;
use curve25519_dalek::ristretto::{CompressedRistretto, RistrettoPoint};
use curve25519_dalek::scalar::Scalar;
use rand::RngCore;
use sha2::{Digest, Sha512};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum PrimError {
    #[error("invalid group element encoding")]
    InvalidPoint,
    #[error("invalid scalar encoding")]
    InvalidScalar,
    #[error("signature rejected")]
    BadSignature,
    #[error("truncated encoding")]
    Truncated,
}

// ═══════════════════════════════════════════════════════════════════════════
// Scalars and points
// ═══════════════════════════════════════════════════════════════════════════

/// Uniform scalar from caller randomness.
pub fn random_scalar<R: RngCore + ?Sized>(rng: &mut R) -> Scalar {
    let mut wide = [0u8; 64];
    rng.fill_bytes(&mut wide);
    Scalar::from_bytes_mod_order_wide(&wide)
}

/// Domain-separated hash to a scalar.
pub fn hash_to_scalar(domain: &str, data: &[u8]) -> Scalar {
    let mut h = Sha512::new();
    h.update((domain.len() as u32).to_le_bytes());
    h.update(domain.as_bytes());
    h.update(data);
    let wide: [u8; 64] = h.finalize().into();
    Scalar::from_bytes_mod_order_wide(&wide)
}

/// Domain-separated hash to a group element (Elligator-style map inside the
/// group library; discrete log of the result is unknown to everyone).
pub fn hash_to_point(domain: &str, data: &[u8]) -> RistrettoPoint {
    let mut h = Sha512::new();
    h.update((domain.len() as u32).to_le_bytes());
    h.update(domain.as_bytes());
    h.update(data);
    let wide: [u8; 64] = h.finalize().into();
    RistrettoPoint::from_uniform_bytes(&wide)
}

pub fn decode_point(bytes: &[u8]) -> Result<RistrettoPoint, PrimError> {
    let arr: [u8; 32] = bytes.try_into().map_err(|_| PrimError::Truncated)?;
    CompressedRistretto(arr).decompress().ok_or(PrimError::InvalidPoint)
}

pub fn decode_scalar(bytes: &[u8]) -> Result<Scalar, PrimError> {
    let arr: [u8; 32] = bytes.try_into().map_err(|_| PrimError::Truncated)?;
    Option::<Scalar>::from(Scalar::from_canonical_bytes(arr)).ok_or(PrimError::InvalidScalar)
}

// ═══════════════════════════════════════════════════════════════════════════
// Pedersen commitments
// ═══════════════════════════════════════════════════════════════════════════

/// Commitment bases (g, h) with h derived by hashing, so no one knows
/// log_g(h).
#[derive(Clone, Debug)]
pub struct PedersenGens {
    pub g: RistrettoPoint,
    pub h: RistrettoPoint,
}

impl Default for PedersenGens {
    fn default() -> Self {
        let g = RISTRETTO_BASEPOINT_POINT;
        let h = hash_to_point("helo/pedersen/h/v1", g.compress().as_bytes());
        PedersenGens { g, h }
    }
}

impl PedersenGens {
    /// C = g·value + h·blinding.
    pub fn commit(&self, value: Scalar, blinding: Scalar) -> RistrettoPoint {
        self.g * value + self.h * blinding
    }

    pub fn commit_u64(&self, value: u64, blinding: Scalar) -> RistrettoPoint {
        self.commit(Scalar::from(value), blinding)
    }
}

// ═══════════════════════════════════════════════════════════════════════════
// Fiat–Shamir transcript
// ═══════════════════════════════════════════════════════════════════════════

/// Running hash with unambiguous framing: every absorbed item carries a tag,
/// a length-prefixed label, and a length-prefixed payload; emitted
/// challenges are folded back into the chain so no challenge can repeat.
pub struct Transcript {
    chain: [u8; 64],
}

const TAG_ABSORB: u8 = 1;
const TAG_CHALLENGE: u8 = 2;

impl Transcript {
    pub fn new(domain: &str) -> Self {
        let mut h = Sha512::new();
        h.update(b"helo/transcript/v1");
        h.update((domain.len() as u32).to_le_bytes());
        h.update(domain.as_bytes());
        Transcript { chain: h.finalize().into() }
    }

    pub fn append_bytes(&mut self, label: &str, data: &[u8]) {
        let mut h = Sha512::new();
        h.update(self.chain);
        h.update([TAG_ABSORB]);
        h.update((label.len() as u32).to_le_bytes());
        h.update(label.as_bytes());
        h.update((data.len() as u32).to_le_bytes());
        h.update(data);
        self.chain = h.finalize().into();
    }

    pub fn append_point(&mut self, label: &str, p: &RistrettoPoint) {
        self.append_bytes(label, p.compress().as_bytes());
    }

    pub fn append_scalar(&mut self, label: &str, s: &Scalar) {
        self.append_bytes(label, s.as_bytes());
    }

    pub fn append_u64(&mut self, label: &str, x: u64) {
        self.append_bytes(label, &x.to_le_bytes());
    }

    pub fn challenge_scalar(&mut self, label: &str) -> Scalar {
        let mut h = Sha512::new();
        h.update(self.chain);
        h.update([TAG_CHALLENGE]);
        h.update((label.len() as u32).to_le_bytes());
        h.update(label.as_bytes());
        let wide: [u8; 64] = h.finalize().into();
        self.chain = wide;
        Scalar::from_bytes_mod_order_wide(&wide)
    }
}

// ═══════════════════════════════════════════════════════════════════════════
// Schnorr signatures
// ═══════════════════════════════════════════════════════════════════════════

pub struct SigningKey {
    x: Scalar,
    public: RistrettoPoint,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VerifyingKey {
    pub point: RistrettoPoint,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Signature {
    pub r: CompressedRistretto,
    pub s: Scalar,
}

impl SigningKey {
    pub fn generate<R: RngCore + ?Sized>(rng: &mut R) -> Self {
        let x = random_scalar(rng);
        SigningKey { x, public: RISTRETTO_BASEPOINT_POINT * x }
    }

    pub fn verifying_key(&self) -> VerifyingKey {
        VerifyingKey { point: self.public }
    }

    /// The secret scalar, for key storage. The public point is recomputed
    /// on load.
    pub fn to_bytes(&self) -> [u8; 32] {
        self.x.to_bytes()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, PrimError> {
        let x = decode_scalar(bytes)?;
        Ok(SigningKey { x, public: RISTRETTO_BASEPOINT_POINT * x })
    }

    /// Schnorr signature with a deterministic nonce bound to the key and
    /// message (no per-signature randomness to misuse).
    pub fn sign(&self, msg: &[u8]) -> Signature {
        let mut h = Sha512::new();
        h.update(b"helo/schnorr/nonce/v1");
        h.update(self.x.as_bytes());
        h.update((msg.len() as u64).to_le_bytes());
        h.update(msg);
        let wide: [u8; 64] = h.finalize().into();
        let k = Scalar::from_bytes_mod_order_wide(&wide);
        let r_point = RISTRETTO_BASEPOINT_POINT * k;
        let e = schnorr_challenge(&r_point, &self.public, msg);
        Signature { r: r_point.compress(), s: k + e * self.x }
    }
}

impl VerifyingKey {
    pub fn verify(&self, msg: &[u8], sig: &Signature) -> Result<(), PrimError> {
        let r_point = sig.r.decompress().ok_or(PrimError::InvalidPoint)?;
        let e = schnorr_challenge(&r_point, &self.point, msg);
        if RISTRETTO_BASEPOINT_POINT * sig.s == r_point + self.point * e {
            Ok(())
        } else {
            Err(PrimError::BadSignature)
        }
    }

    pub fn to_bytes(&self) -> [u8; 32] {
        self.point.compress().to_bytes()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, PrimError> {
        Ok(VerifyingKey { point: decode_point(bytes)? })
    }
}

fn schnorr_challenge(r: &RistrettoPoint, public: &RistrettoPoint, msg: &[u8]) -> Scalar {
    let mut t = Transcript::new("helo/schnorr/v1");
    t.append_point("R", r);
    t.append_point("P", public);
    t.append_bytes("msg", msg);
    t.challenge_scalar("e")
}

impl Signature {
    pub fn to_bytes(&self) -> [u8; 64] {
        let mut out = [0u8; 64];
        out[..32].copy_from_slice(self.r.as_bytes());
        out[32..].copy_from_slice(self.s.as_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, PrimError> {
        if bytes.len() != 64 {
            return Err(PrimError::Truncated);
        }
        let r = CompressedRistretto(bytes[..32].try_into().unwrap());
        let s = decode_scalar(&bytes[32..])?;
        Ok(Signature { r, s })
    }
}

// ═══════════════════════════════════════════════════════════════════════════
// Tests
// ═══════════════════════════════════════════════════════════════════════════

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn signing_key_round_trips_through_bytes() {
        let mut rng = ChaCha20Rng::seed_from_u64(59);
        let key = SigningKey::generate(&mut rng);
        let back = SigningKey::from_bytes(&key.to_bytes()).expect("stored key must load");
        assert_eq!(back.verifying_key(), key.verifying_key(), "public point must survive");
        let sig = back.sign(b"stored-key message");
        key.verifying_key().verify(b"stored-key message", &sig).expect("signature must verify");
    }

    #[test]
    fn pedersen_bases_are_sound() {
        let gens = PedersenGens::default();
        assert_ne!(gens.g, gens.h, "bases must differ");
        assert_ne!(gens.h, RistrettoPoint::default(), "h must not be the identity");
        let again = PedersenGens::default();
        assert_eq!(gens.h, again.h, "base derivation must be deterministic");
    }

    #[test]
    fn commitments_are_additively_homomorphic() {
        let gens = PedersenGens::default();
        let mut rng = ChaCha20Rng::seed_from_u64(61);
        let (r1, r2) = (random_scalar(&mut rng), random_scalar(&mut rng));
        let lhs = gens.commit_u64(1234, r1) + gens.commit_u64(4321, r2);
        let rhs = gens.commit_u64(5555, r1 + r2);
        assert_eq!(lhs, rhs, "C(a)+C(b) must equal C(a+b) under summed blinding");
    }

    #[test]
    fn commitments_hide_values_under_fresh_blinding() {
        let gens = PedersenGens::default();
        let mut rng = ChaCha20Rng::seed_from_u64(62);
        let c1 = gens.commit_u64(1500, random_scalar(&mut rng));
        let c2 = gens.commit_u64(1500, random_scalar(&mut rng));
        assert_ne!(c1, c2, "same value, fresh blinding must give distinct commitments");
    }

    #[test]
    fn transcript_is_deterministic_and_order_sensitive() {
        let run = |order: &[(&str, &[u8])]| {
            let mut t = Transcript::new("test");
            for (l, d) in order {
                t.append_bytes(l, d);
            }
            t.challenge_scalar("c")
        };
        let a = run(&[("x", b"1"), ("y", b"2")]);
        let b = run(&[("x", b"1"), ("y", b"2")]);
        let c = run(&[("y", b"2"), ("x", b"1")]);
        assert_eq!(a, b, "same absorption must give the same challenge");
        assert_ne!(a, c, "order must matter");

        // framing: ("ab", "c") and ("a", "bc") must differ
        let d = run(&[("ab", b"c")]);
        let e = run(&[("a", b"bc")]);
        assert_ne!(d, e, "length framing must separate label/data splits");
    }

    #[test]
    fn consecutive_challenges_differ() {
        let mut t = Transcript::new("test");
        t.append_bytes("seed", b"fixed");
        let c1 = t.challenge_scalar("c");
        let c2 = t.challenge_scalar("c");
        assert_ne!(c1, c2, "challenge emission must advance the chain");
    }

    #[test]
    fn schnorr_round_trip_and_rejections() {
        let mut rng = ChaCha20Rng::seed_from_u64(63);
        let sk = SigningKey::generate(&mut rng);
        let vk = sk.verifying_key();
        let msg = b"attestation payload";
        let sig = sk.sign(msg);
        assert_eq!(vk.verify(msg, &sig), Ok(()));

        assert_eq!(
            vk.verify(b"attestation payloaD", &sig),
            Err(PrimError::BadSignature),
            "modified message must fail"
        );

        let other = SigningKey::generate(&mut rng).verifying_key();
        assert_eq!(other.verify(msg, &sig), Err(PrimError::BadSignature), "wrong key must fail");

        let mut tampered = sig.to_bytes();
        tampered[40] ^= 1;
        let bad = Signature::from_bytes(&tampered).expect("still decodable");
        assert!(vk.verify(msg, &bad).is_err(), "tampered signature must fail");
    }

    #[test]
    fn signature_and_key_encodings_round_trip() {
        let mut rng = ChaCha20Rng::seed_from_u64(64);
        let sk = SigningKey::generate(&mut rng);
        let vk = sk.verifying_key();
        let sig = sk.sign(b"x");

        let vk2 = VerifyingKey::from_bytes(&vk.to_bytes()).expect("vk round trip");
        assert_eq!(vk, vk2);
        let sig2 = Signature::from_bytes(&sig.to_bytes()).expect("sig round trip");
        assert_eq!(sig, sig2);
        assert_eq!(vk2.verify(b"x", &sig2), Ok(()));
    }

    #[test]
    fn invalid_encodings_are_rejected() {
        assert_eq!(decode_point(&[0xFFu8; 32]).unwrap_err(), PrimError::InvalidPoint);
        assert_eq!(decode_point(&[0u8; 16]).unwrap_err(), PrimError::Truncated);
        // a scalar ≥ the group order is non-canonical
        assert_eq!(decode_scalar(&[0xFFu8; 32]).unwrap_err(), PrimError::InvalidScalar);
    }

    #[test]
    fn deterministic_nonce_keeps_signatures_stable() {
        let mut rng = ChaCha20Rng::seed_from_u64(65);
        let sk = SigningKey::generate(&mut rng);
        assert_eq!(sk.sign(b"m").to_bytes(), sk.sign(b"m").to_bytes());
        assert_ne!(sk.sign(b"m").to_bytes(), sk.sign(b"n").to_bytes());
    }
}
