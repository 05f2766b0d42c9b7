//! Key generation, encryption, and the homomorphic operation set.
//!
//! Keys are held at the full limb chain and reused at every level via
//! prefix views. Relinearization keys carry one entry per decomposition
//! digit: each limb of the chain contributes one digit, except limbs wider
//! than ~44 bits, which are split into shorter digits so the key-switching
//! noise stays far below the rescaling floor. Digits are balanced (signed,
//! mean zero) so the fixed key errors contribute noise but no systematic
//! drift to multiplication results.
//!
//! Level/scale contract (see the module-root docs): operands of an addition
//! must agree in level and scale; multiplication leaves a product scale that
//! `rescale` divides back onto the canonical ladder; `adjust_level` moves a
//! ciphertext down to a target level, landing exactly on the ladder scale.

use super::{
    read_exact, read_header, read_poly, write_header, Ciphertext, CkksContext, CkksError,
    Plaintext, OBJ_PUBLIC_KEY, OBJ_RELIN_KEY, OBJ_SECRET_KEY,
};
use crate::ring::{Domain, RingParams, RnsPolynomial};
use rand::Rng;
use std::io;

/// Relative scale mismatch tolerated in additions; the ladder keeps true
/// mismatches at the floating-point epsilon level.
const SCALE_TOLERANCE: f64 = 1e-9;

/// Digits wider than this get split; keeps digit·error products ≈ 2⁵⁰ or
/// below against a rescale divisor of ~2⁴⁰.
const MAX_DIGIT_BITS: usize = 44;

// ═══════════════════════════════════════════════════════════════════════════
// Keys
// ═══════════════════════════════════════════════════════════════════════════

pub struct SecretKey {
    /// ternary secret, evaluation domain, full chain
    pub(crate) s: RnsPolynomial,
}

#[derive(Clone)]
pub struct PublicKey {
    /// (b, a) with b = −(a·s + e), evaluation domain, full chain
    pub(crate) b: RnsPolynomial,
    pub(crate) a: RnsPolynomial,
}

/// One decomposition digit: which limb it comes from, which bit window.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct DigitSlot {
    pub limb: usize,
    pub shift: usize,
    pub width: usize,
}

pub struct RelinKeyEntry {
    pub(crate) slot: DigitSlot,
    pub(crate) b: RnsPolynomial,
    pub(crate) a: RnsPolynomial,
}

/// Key-switching key for squaring the secret: entry t encrypts
/// 2^shift · s² restricted to its source limb.
pub struct RelinKey {
    pub(crate) entries: Vec<RelinKeyEntry>,
}

/// The digit decomposition induced by a prime chain.
pub(crate) fn digit_plan(ring: &RingParams) -> Vec<DigitSlot> {
    let mut plan = Vec::new();
    for (j, &q) in ring.primes().iter().enumerate() {
        let bits = 64 - q.leading_zeros() as usize;
        let n = bits.div_ceil(MAX_DIGIT_BITS);
        let width = bits.div_ceil(n);
        for t in 0..n {
            plan.push(DigitSlot { limb: j, shift: t * width, width });
        }
    }
    plan
}

// ═══════════════════════════════════════════════════════════════════════════
// Engine
// ═══════════════════════════════════════════════════════════════════════════

impl CkksContext {
    pub fn keygen<R: Rng + ?Sized>(&self, rng: &mut R) -> (SecretKey, PublicKey, RelinKey) {
        let ring = self.ring();
        let limbs = ring.limb_count();

        let mut s = ring.sample_ternary(rng, limbs);
        ring.ntt_forward(&mut s);

        let (b, a) = self.rlwe_pair(rng, &s);
        let pk = PublicKey { b, a };

        // relinearization key: per digit, (−(a·s + e) + 2^shift·s²|limb, a)
        let s2 = ring.pointwise_mul(&s, &s);
        let mut entries = Vec::new();
        for slot in digit_plan(ring) {
            let (mut b_t, a_t) = self.rlwe_pair(rng, &s);
            let q = ring.primes()[slot.limb];
            let factor = ring.modulus(slot.limb).reduce128(1u128 << slot.shift);
            let s2_limb = s2.limb(slot.limb);
            let b_limb = b_t.limb_mut(slot.limb);
            let m = ring.modulus(slot.limb);
            for (x, &y) in b_limb.iter_mut().zip(s2_limb) {
                *x = crate::ring::arith::add_mod(*x, m.mul(factor, y), q);
            }
            entries.push(RelinKeyEntry { slot, b: b_t, a: a_t });
        }
        (SecretKey { s }, pk, RelinKey { entries })
    }

    /// Fresh RLWE pair (−(a·s + e), a) at the full chain.
    fn rlwe_pair<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        s: &RnsPolynomial,
    ) -> (RnsPolynomial, RnsPolynomial) {
        let ring = self.ring();
        let limbs = ring.limb_count();
        let a = ring.sample_uniform(rng, limbs, Domain::Evaluation);
        let mut e = ring.sample_gaussian(rng, limbs, self.config().sigma);
        ring.ntt_forward(&mut e);
        let mut b = ring.pointwise_mul(&a, s);
        ring.add_assign(&mut b, &e);
        ring.neg_assign(&mut b);
        (b, a)
    }

    // ── encryption ────────────────────────────────────────────────────────

    pub fn encrypt<R: Rng + ?Sized>(
        &self,
        pk: &PublicKey,
        pt: &Plaintext,
        rng: &mut R,
    ) -> Ciphertext {
        let ring = self.ring();
        let limbs = self.limbs_at(pt.level);
        let mut u = ring.sample_ternary(rng, limbs);
        ring.ntt_forward(&mut u);
        let mut e0 = ring.sample_gaussian(rng, limbs, self.config().sigma);
        ring.ntt_forward(&mut e0);
        let mut e1 = ring.sample_gaussian(rng, limbs, self.config().sigma);
        ring.ntt_forward(&mut e1);

        let mut c0 = ring.pointwise_mul_prefix(&u, &pk.b);
        ring.add_assign(&mut c0, &e0);
        let m = self.plain_eval(pt);
        ring.add_assign(&mut c0, &m);
        let mut c1 = ring.pointwise_mul_prefix(&u, &pk.a);
        ring.add_assign(&mut c1, &e1);
        Ciphertext { c0, c1, level: pt.level, scale: pt.scale }
    }

    pub fn decrypt(&self, sk: &SecretKey, ct: &Ciphertext) -> Plaintext {
        let ring = self.ring();
        let mut m = ring.pointwise_mul_prefix(&ct.c1, &sk.s);
        ring.add_assign(&mut m, &ct.c0);
        ring.ntt_inverse(&mut m);
        Plaintext { poly: m, level: ct.level, scale: ct.scale }
    }

    /// Decrypts and decodes in one step.
    pub fn decrypt_values(&self, sk: &SecretKey, ct: &Ciphertext) -> Vec<f64> {
        self.decode(&self.decrypt(sk, ct))
    }

    // ── additive ops ──────────────────────────────────────────────────────

    pub fn add(&self, a: &Ciphertext, b: &Ciphertext) -> Ciphertext {
        self.check_aligned(a.level, a.scale, b.level, b.scale);
        let mut out = a.clone();
        self.ring().add_assign(&mut out.c0, &b.c0);
        self.ring().add_assign(&mut out.c1, &b.c1);
        out
    }

    pub fn sub(&self, a: &Ciphertext, b: &Ciphertext) -> Ciphertext {
        self.check_aligned(a.level, a.scale, b.level, b.scale);
        let mut out = a.clone();
        self.ring().sub_assign(&mut out.c0, &b.c0);
        self.ring().sub_assign(&mut out.c1, &b.c1);
        out
    }

    pub fn negate(&self, a: &Ciphertext) -> Ciphertext {
        let mut out = a.clone();
        self.ring().neg_assign(&mut out.c0);
        self.ring().neg_assign(&mut out.c1);
        out
    }

    pub fn add_plain(&self, a: &Ciphertext, pt: &Plaintext) -> Ciphertext {
        self.check_aligned(a.level, a.scale, pt.level, pt.scale);
        let mut out = a.clone();
        let m = self.plain_eval(pt);
        self.ring().add_assign(&mut out.c0, &m);
        out
    }

    pub fn sub_plain(&self, a: &Ciphertext, pt: &Plaintext) -> Ciphertext {
        self.check_aligned(a.level, a.scale, pt.level, pt.scale);
        let mut out = a.clone();
        let m = self.plain_eval(pt);
        self.ring().sub_assign(&mut out.c0, &m);
        out
    }

    /// Adds the same constant to every slot.
    pub fn add_const(&self, a: &Ciphertext, v: f64) -> Ciphertext {
        self.add_plain(a, &self.encode_scalar(v, a.level, a.scale))
    }

    // ── multiplicative ops ────────────────────────────────────────────────

    /// Plaintext multiplication; scale becomes the product of scales and the
    /// caller rescales when back on a ladder-divisible scale.
    pub fn mul_plain(&self, a: &Ciphertext, pt: &Plaintext) -> Ciphertext {
        assert_eq!(a.level, pt.level, "level mismatch: {} vs {}", a.level, pt.level);
        let m = self.plain_eval(pt);
        Ciphertext {
            c0: self.ring().pointwise_mul(&a.c0, &m),
            c1: self.ring().pointwise_mul(&a.c1, &m),
            level: a.level,
            scale: a.scale * pt.scale,
        }
    }

    /// Multiplies every slot by a constant, consuming one level: the
    /// constant is encoded at the operand's own scale, so the product
    /// rescales exactly onto the next ladder rung.
    pub fn mul_const(&self, a: &Ciphertext, v: f64) -> Ciphertext {
        let pt = self.encode_scalar(v, a.level, a.scale);
        self.rescale(&self.mul_plain(a, &pt))
    }

    /// Ciphertext multiplication with relinearization, no rescale. The
    /// result carries scale a.scale · b.scale.
    pub fn mul_relin(&self, a: &Ciphertext, b: &Ciphertext, rlk: &RelinKey) -> Ciphertext {
        assert_eq!(a.level, b.level, "level mismatch: {} vs {}", a.level, b.level);
        let ring = self.ring();
        let d0 = ring.pointwise_mul(&a.c0, &b.c0);
        let mut d1 = ring.pointwise_mul(&a.c0, &b.c1);
        ring.pointwise_mul_acc(&mut d1, &a.c1, &b.c0);
        let d2 = ring.pointwise_mul(&a.c1, &b.c1);
        let (r0, r1) = self.key_switch_square(rlk, &d2);
        let mut c0 = d0;
        ring.add_assign(&mut c0, &r0);
        let mut c1 = d1;
        ring.add_assign(&mut c1, &r1);
        Ciphertext { c0, c1, level: a.level, scale: a.scale * b.scale }
    }

    /// Convenience: multiply, relinearize, rescale onto the next rung.
    pub fn mul_relin_rescale(
        &self,
        a: &Ciphertext,
        b: &Ciphertext,
        rlk: &RelinKey,
    ) -> Ciphertext {
        self.rescale(&self.mul_relin(a, b, rlk))
    }

    /// Folds the s²-component `d2` back onto (1, s) using the digit keys:
    /// decomposes d2 limb-wise into short digits, multiplies each against
    /// its key entry, and accumulates.
    fn key_switch_square(
        &self,
        rlk: &RelinKey,
        d2: &RnsPolynomial,
    ) -> (RnsPolynomial, RnsPolynomial) {
        let ring = self.ring();
        let limbs = d2.limbs();
        let mut d2c = d2.clone();
        ring.ntt_inverse(&mut d2c);

        let mut acc0 = ring.zero(limbs, Domain::Evaluation);
        let mut acc1 = ring.zero(limbs, Domain::Evaluation);
        for entry in &rlk.entries {
            if entry.slot.limb >= limbs {
                continue; // digit sources beyond the active chain do not exist
            }
            let digit = self.extract_digit(&d2c, entry.slot, limbs);
            ring.pointwise_mul_acc_prefix(&mut acc0, &digit, &entry.b);
            ring.pointwise_mul_acc_prefix(&mut acc1, &digit, &entry.a);
        }
        (acc0, acc1)
    }

    /// Builds the digit polynomial for one slot: take the source limb's
    /// residues, select the bit window of the balanced decomposition, and
    /// spread the short signed values across all active limbs,
    /// NTT-transformed.
    ///
    /// Digits are balanced (range ±2^{width−1}) rather than plain windows of
    /// the raw residue. Plain windows have mean 2^{width−1}, and that mean
    /// multiplies the fixed key errors into a deterministic offset that every
    /// multiplication repeats — the power basis then amplifies it into a
    /// visible per-update bias. Balancing is done without carry chains: lift
    /// the residue to ±q/2, add an offset that pre-loads every window with
    /// 2^{width−1}, and subtract that half-window from each extracted value.
    fn extract_digit(&self, d2c: &RnsPolynomial, slot: DigitSlot, limbs: usize) -> RnsPolynomial {
        let ring = self.ring();
        let mask = (1u64 << slot.width) - 1;
        let half_window = 1i64 << (slot.width - 1);
        let q_src = ring.primes()[slot.limb];
        let bits = 64 - q_src.leading_zeros() as usize;
        let windows = bits.div_ceil(slot.width);
        // offset = Σ_t 2^{t·width + width − 1}: one half-window per digit, so
        // unsigned extraction of (centered + offset) yields digit + half.
        let offset: i64 = (0..windows).map(|t| 1i64 << (t * slot.width + slot.width - 1)).sum();
        let src = d2c.limb(slot.limb);
        let mut digit = ring.zero(limbs, Domain::Coefficient);
        for i in 0..limbs {
            let m = ring.modulus(i);
            let dl = digit.limb_mut(i);
            for (o, &x) in dl.iter_mut().zip(src) {
                let centered = if x > q_src / 2 { x as i64 - q_src as i64 } else { x as i64 };
                let v = (((centered + offset) as u64 >> slot.shift) & mask) as i64 - half_window;
                let r = m.reduce128(v.unsigned_abs() as u128);
                *o = if v >= 0 || r == 0 { r } else { m.q - r };
            }
        }
        ring.ntt_forward(&mut digit);
        digit
    }

    // ── level management ──────────────────────────────────────────────────

    /// Drops the top prime: divides values by q_level and moves one level
    /// down. Snaps the scale onto the canonical ladder when the
    /// floating-point drift is negligible.
    pub fn rescale(&self, a: &Ciphertext) -> Ciphertext {
        assert!(a.level >= 1, "no level left to rescale");
        let ring = self.ring();
        let q = ring.primes()[a.level] as f64;
        let new_level = a.level - 1;
        let raw = a.scale / q;
        let canon = self.scale_of(new_level);
        let scale =
            if ((raw - canon) / canon).abs() < SCALE_TOLERANCE { canon } else { raw };
        let drop = |p: &RnsPolynomial| {
            let mut c = p.clone();
            ring.ntt_inverse(&mut c);
            let mut d = ring.drop_limb(&c);
            ring.ntt_forward(&mut d);
            d
        };
        Ciphertext { c0: drop(&a.c0), c1: drop(&a.c1), level: new_level, scale }
    }

    /// Brings a ciphertext down to `target` level with the canonical ladder
    /// scale: truncates spare limbs, then multiplies by an encoding of 1
    /// whose scale is chosen so the final rescale lands exactly on the rung.
    pub fn adjust_level(&self, a: &Ciphertext, target: usize) -> Ciphertext {
        assert!(target <= a.level, "cannot raise level {} to {}", a.level, target);
        let on_ladder = (a.scale - self.scale_of(a.level)).abs() / a.scale < SCALE_TOLERANCE;
        if a.level == target && on_ladder {
            return a.clone();
        }
        assert!(
            a.level > target || !on_ladder,
            "adjust_level at same level requires an off-ladder scale"
        );
        let ring = self.ring();
        let hop = Ciphertext {
            c0: ring.truncate_limbs(&a.c0, target + 2),
            c1: ring.truncate_limbs(&a.c1, target + 2),
            level: target + 1,
            scale: a.scale,
        };
        let tau = self.scale_of(target) * ring.primes()[target + 1] as f64 / a.scale;
        assert!(tau >= 1.0, "level adjustment scale {} collapsed below 1", tau);
        let one = self.encode_scalar(1.0, hop.level, tau);
        self.rescale(&self.mul_plain(&hop, &one))
    }

    // ── internals ─────────────────────────────────────────────────────────

    /// Evaluation-domain view of a plaintext polynomial.
    pub(crate) fn plain_eval(&self, pt: &Plaintext) -> RnsPolynomial {
        match pt.poly.domain() {
            Domain::Evaluation => pt.poly.clone(),
            Domain::Coefficient => {
                let mut p = pt.poly.clone();
                self.ring().ntt_forward(&mut p);
                p
            }
        }
    }

    fn check_aligned(&self, la: usize, sa: f64, lb: usize, sb: f64) {
        assert_eq!(la, lb, "level mismatch: {} vs {}", la, lb);
        assert!(
            ((sa - sb) / sa).abs() < SCALE_TOLERANCE,
            "scale mismatch: {} vs {}",
            sa,
            sb
        );
    }
}

// ═══════════════════════════════════════════════════════════════════════════
// Key wire formats
// ═══════════════════════════════════════════════════════════════════════════

impl SecretKey {
    pub fn serialize(&self, ctx: &CkksContext) -> Vec<u8> {
        let mut out = Vec::new();
        write_header(&mut out, OBJ_SECRET_KEY, &ctx.config().label);
        out.extend_from_slice(&self.s.serialize(ctx.ring()));
        out
    }

    pub fn deserialize(ctx: &CkksContext, bytes: &[u8]) -> Result<Self, CkksError> {
        let mut r = io::Cursor::new(bytes);
        read_header(&mut r, OBJ_SECRET_KEY, &ctx.config().label)?;
        let s = read_poly(ctx.ring(), &mut r)?;
        expect_full_eval(ctx, &s, "secret key")?;
        expect_end(&r, bytes.len())?;
        Ok(SecretKey { s })
    }
}

impl PublicKey {
    pub fn serialize(&self, ctx: &CkksContext) -> Vec<u8> {
        let mut out = Vec::new();
        write_header(&mut out, OBJ_PUBLIC_KEY, &ctx.config().label);
        out.extend_from_slice(&self.b.serialize(ctx.ring()));
        out.extend_from_slice(&self.a.serialize(ctx.ring()));
        out
    }

    pub fn deserialize(ctx: &CkksContext, bytes: &[u8]) -> Result<Self, CkksError> {
        let mut r = io::Cursor::new(bytes);
        read_header(&mut r, OBJ_PUBLIC_KEY, &ctx.config().label)?;
        let b = read_poly(ctx.ring(), &mut r)?;
        let a = read_poly(ctx.ring(), &mut r)?;
        expect_full_eval(ctx, &b, "public key b")?;
        expect_full_eval(ctx, &a, "public key a")?;
        expect_end(&r, bytes.len())?;
        Ok(PublicKey { b, a })
    }
}

impl RelinKey {
    /// Body: entry count u16, then per entry limb u16 | shift u8 | b | a.
    /// The digit layout is recomputed from the parameters on load and the
    /// serialized layout must match it exactly.
    pub fn serialize(&self, ctx: &CkksContext) -> Vec<u8> {
        let mut out = Vec::new();
        write_header(&mut out, OBJ_RELIN_KEY, &ctx.config().label);
        out.extend_from_slice(&(self.entries.len() as u16).to_le_bytes());
        for e in &self.entries {
            out.extend_from_slice(&(e.slot.limb as u16).to_le_bytes());
            out.push(e.slot.shift as u8);
            out.extend_from_slice(&e.b.serialize(ctx.ring()));
            out.extend_from_slice(&e.a.serialize(ctx.ring()));
        }
        out
    }

    pub fn deserialize(ctx: &CkksContext, bytes: &[u8]) -> Result<Self, CkksError> {
        let mut r = io::Cursor::new(bytes);
        read_header(&mut r, OBJ_RELIN_KEY, &ctx.config().label)?;
        let plan = digit_plan(ctx.ring());
        let mut b2 = [0u8; 2];
        read_exact(&mut r, &mut b2)?;
        let count = u16::from_le_bytes(b2) as usize;
        if count != plan.len() {
            return Err(CkksError::Malformed(format!(
                "relin key has {} digit entries, parameters require {}",
                count,
                plan.len()
            )));
        }
        let mut entries = Vec::with_capacity(count);
        for slot in plan {
            read_exact(&mut r, &mut b2)?;
            let limb = u16::from_le_bytes(b2) as usize;
            let mut b1 = [0u8; 1];
            read_exact(&mut r, &mut b1)?;
            let shift = b1[0] as usize;
            if limb != slot.limb || shift != slot.shift {
                return Err(CkksError::Malformed(format!(
                    "digit entry (limb {}, shift {}) does not match layout (limb {}, shift {})",
                    limb, shift, slot.limb, slot.shift
                )));
            }
            let b = read_poly(ctx.ring(), &mut r)?;
            let a = read_poly(ctx.ring(), &mut r)?;
            expect_full_eval(ctx, &b, "relin entry b")?;
            expect_full_eval(ctx, &a, "relin entry a")?;
            entries.push(RelinKeyEntry { slot, b, a });
        }
        expect_end(&r, bytes.len())?;
        Ok(RelinKey { entries })
    }
}

fn expect_full_eval(ctx: &CkksContext, p: &RnsPolynomial, what: &str) -> Result<(), CkksError> {
    if p.limbs() != ctx.ring().limb_count() {
        return Err(CkksError::Malformed(format!("{} not at the full chain", what)));
    }
    if p.domain() != Domain::Evaluation {
        return Err(CkksError::Malformed(format!("{} not in evaluation domain", what)));
    }
    Ok(())
}

fn expect_end(r: &io::Cursor<&[u8]>, len: usize) -> Result<(), CkksError> {
    if r.position() as usize != len {
        return Err(CkksError::Malformed("trailing bytes after object".into()));
    }
    Ok(())
}

// ═══════════════════════════════════════════════════════════════════════════
// Tests
// ═══════════════════════════════════════════════════════════════════════════
