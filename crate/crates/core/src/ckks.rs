//! Approximate homomorphic arithmetic on real slot vectors.
//!
//! The scheme encrypts d/2 real slots per ciphertext and supports addition,
//! multiplication, and scalar operations directly on ciphertexts, consuming
//! one rung of a modulus ladder per multiplication. Residue form keeps every
//! coefficient in word-sized limbs: a base prime (never dropped, sized so
//! level-0 decoding still has headroom) plus one ~40-bit prime per available
//! multiplication level.
//!
//! Submodules:
//! - [`encoding`]: slot vectors ↔ scaled integer polynomials;
//! - [`engine`]: key generation, encryption, and the homomorphic ops;
//! - [`eval`]: polynomial evaluation, refresh, and precision measurement.
//!
//! Scale discipline: every level has one canonical scale, fixed by the
//! ladder `scale(top) = Δ`, `scale(l−1) = scale(l)² / q_l`. Operands at the
//! same level always carry the same scale, so additions never need scale
//! repair; constants are encoded at the operand's current scale so products
//! rescale exactly back onto the ladder.

pub mod encoding;
pub mod engine;
pub mod eval;
pub mod noise;

use crate::ring::{arith, Domain, RingError, RingParams, RnsPolynomial};
use encoding::Encoder;
use std::io::{self, Read};

// ═══════════════════════════════════════════════════════════════════════════
// Errors
// ═══════════════════════════════════════════════════════════════════════════

#[derive(Debug, thiserror::Error)]
pub enum CkksError {
    #[error("bad magic bytes in object header")]
    BadMagic,
    #[error("unsupported wire version {0}")]
    UnsupportedVersion(u8),
    #[error("wrong object type: expected {expected}, got {got}")]
    WrongObjectType { expected: u8, got: u8 },
    #[error("parameter label mismatch: expected {expected:?}, got {got:?}")]
    LabelMismatch { expected: String, got: String },
    #[error("malformed object: {0}")]
    Malformed(String),
    #[error("truncated object encoding")]
    Truncated,
    #[error(transparent)]
    Ring(#[from] RingError),
}

// ═══════════════════════════════════════════════════════════════════════════
// Configuration
// ═══════════════════════════════════════════════════════════════════════════

/// Parameter preset for one scheme instantiation. The label travels with
/// every serialized object and is checked on load, so ciphertexts cannot be
/// fed to a context with different parameters.
#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct CkksConfig {
    pub degree: usize,
    pub base_prime_bits: u32,
    pub scaling_prime_bits: u32,
    /// number of multiplication levels (scaling primes in the chain)
    pub scaling_levels: usize,
    /// log2 of the encoding scale Δ
    pub scale_bits: u32,
    /// error distribution width
    pub sigma: f64,
    pub label: String,
}

impl CkksConfig {
    /// Reduced-strength parameters for correctness work and experiments on a
    /// single core: ring degree 2¹³ with a 9-level chain. Not a hardened
    /// production parameter set.
    pub fn toy() -> Self {
        CkksConfig {
            degree: 1 << 13,
            base_prime_bits: 59,
            scaling_prime_bits: 40,
            scaling_levels: 9,
            scale_bits: 40,
            sigma: 3.2,
            label: "toy-d8192-L9".into(),
        }
    }

    /// Mid-strength tier: the toy chain on a 2¹⁴ ring. With the 419-bit
    /// modulus this clears the ~80-bit deployment tier comfortably, at
    /// roughly twice the per-operation cost of `toy`.
    pub fn mid() -> Self {
        CkksConfig {
            degree: 1 << 14,
            base_prime_bits: 59,
            scaling_prime_bits: 40,
            scaling_levels: 9,
            scale_bits: 40,
            sigma: 3.2,
            label: "mid-d16384-L9".into(),
        }
    }

    /// Standard-strength tier: the toy chain on a 2¹⁵ ring, sized so the
    /// 419-bit modulus sits far inside the ~128-bit budget for this
    /// dimension.
    pub fn standard() -> Self {
        CkksConfig {
            degree: 1 << 15,
            base_prime_bits: 59,
            scaling_prime_bits: 40,
            scaling_levels: 9,
            scale_bits: 40,
            sigma: 3.2,
            label: "std-d32768-L9".into(),
        }
    }

    /// Tiny ring for high-throughput statistical batteries. Offers no
    /// meaningful cryptographic hardness; the batteries only examine the
    /// statistics of decrypted outputs, never security margins.
    pub fn battery() -> Self {
        CkksConfig {
            degree: 1 << 10,
            base_prime_bits: 59,
            scaling_prime_bits: 40,
            scaling_levels: 9,
            scale_bits: 40,
            sigma: 3.2,
            label: "battery-d1024-L9".into(),
        }
    }

    /// Preset lookup by tier name as used on the command line.
    pub fn from_tier(name: &str) -> Option<Self> {
        match name {
            "toy" => Some(Self::toy()),
            "mid" => Some(Self::mid()),
            "std" => Some(Self::standard()),
            _ => None,
        }
    }
}

// ═══════════════════════════════════════════════════════════════════════════
// Context
// ═══════════════════════════════════════════════════════════════════════════

/// All precomputation for one parameter set: ring tables, encoder plans, and
/// the canonical per-level scale ladder.
#[derive(Debug)]
pub struct CkksContext {
    config: CkksConfig,
    ring: RingParams,
    encoder: Encoder,
    /// canonical scale for each level, index 0 ..= scaling_levels
    scales: Vec<f64>,
}

impl CkksContext {
    pub fn new(config: CkksConfig) -> Self {
        assert!(config.scaling_levels >= 1, "need at least one scaling level");
        assert!(
            config.base_prime_bits > config.scale_bits + 12,
            "base prime too small to decode rating-magnitude slots at level 0"
        );
        let base = arith::find_ntt_primes(config.base_prime_bits, config.degree, 1);
        let scaling =
            arith::find_ntt_primes(config.scaling_prime_bits, config.degree, config.scaling_levels);
        let mut primes = base;
        primes.extend(scaling);
        let ring = RingParams::new(config.degree, primes);

        let mut scales = vec![0.0; config.scaling_levels + 1];
        scales[config.scaling_levels] = (1u64 << config.scale_bits) as f64;
        for l in (1..=config.scaling_levels).rev() {
            scales[l - 1] = scales[l] * scales[l] / ring.primes()[l] as f64;
        }
        for (l, &s) in scales.iter().enumerate() {
            let drift = s.log2() - config.scale_bits as f64;
            assert!(
                drift.abs() < 2.0,
                "scale ladder drifted to 2^{} at level {}",
                s.log2(),
                l
            );
        }
        let encoder = Encoder::new(config.degree);
        CkksContext { config, ring, encoder, scales }
    }

    pub fn config(&self) -> &CkksConfig {
        &self.config
    }

    pub fn ring(&self) -> &RingParams {
        &self.ring
    }

    pub fn encoder(&self) -> &Encoder {
        &self.encoder
    }

    pub fn slots(&self) -> usize {
        self.config.degree / 2
    }

    pub fn max_level(&self) -> usize {
        self.config.scaling_levels
    }

    /// Canonical scale for a level on the ladder.
    pub fn scale_of(&self, level: usize) -> f64 {
        self.scales[level]
    }

    /// Limbs active at a level: the base prime plus one per remaining rung.
    pub fn limbs_at(&self, level: usize) -> usize {
        level + 1
    }

    // ── encoding ──────────────────────────────────────────────────────────

    /// Encodes a slot vector at the given level and scale.
    pub fn encode(&self, values: &[f64], level: usize, scale: f64) -> Plaintext {
        assert!(level <= self.max_level(), "level {} out of range", level);
        let wide = self.encoder.encode(values, scale);
        let poly = self.ring.from_signed_wide(self.limbs_at(level), &wide);
        Plaintext { poly, level, scale }
    }

    /// Encodes the same scalar into every slot. A scalar is a constant
    /// polynomial, so this skips interpolation and transforms entirely: the
    /// evaluation-domain representation is the constant in every position.
    pub fn encode_scalar(&self, value: f64, level: usize, scale: f64) -> Plaintext {
        assert!(level <= self.max_level(), "level {} out of range", level);
        assert!(value.is_finite() && scale >= 1.0, "bad scalar encode ({}, {})", value, scale);
        let x = value * scale;
        let neg = x < 0.0;
        let mag = x.abs().round() as u128;
        let limbs = self.limbs_at(level);
        let mut poly = self.ring.zero(limbs, Domain::Evaluation);
        for i in 0..limbs {
            let m = self.ring.modulus(i);
            let r = m.reduce128(mag);
            let r = if neg && r != 0 { m.q - r } else { r };
            poly.limb_mut(i).fill(r);
        }
        Plaintext { poly, level, scale }
    }

    /// Decodes a plaintext back to slot values.
    ///
    /// Works on the first two limbs only, which is value-preserving as long
    /// as centered coefficients stay below q₀·q₁/2 ≈ 2⁹⁸ — guaranteed here,
    /// where slot magnitudes stay below 2¹³ and scales below 2⁴².
    pub fn decode(&self, pt: &Plaintext) -> Vec<f64> {
        let coeffs = self.centered_coeffs(&pt.poly);
        self.encoder.decode(&coeffs, pt.scale)
    }

    /// Centered two-limb interpretation of a coefficient-domain polynomial.
    pub(crate) fn centered_coeffs(&self, poly: &RnsPolynomial) -> Vec<f64> {
        assert_eq!(poly.domain(), Domain::Coefficient, "decode expects coefficient domain");
        let q0 = self.ring.primes()[0];
        if poly.limbs() == 1 {
            let half = q0 >> 1;
            return poly
                .limb(0)
                .iter()
                .map(|&x| if x > half { -((q0 - x) as f64) } else { x as f64 })
                .collect();
        }
        // two-limb lift: x = x₀ + q₀·t, t = (x₁ − x₀)·q₀⁻¹ mod q₁, then center
        let q1 = self.ring.primes()[1];
        let q0_inv = arith::inv_mod(q0 % q1, q1);
        let modulus = q0 as u128 * q1 as u128;
        let half = modulus >> 1;
        let l0 = poly.limb(0);
        let l1 = poly.limb(1);
        (0..poly.degree())
            .map(|k| {
                let x0 = l0[k];
                let x1 = l1[k];
                let t = arith::mul_mod(arith::sub_mod(x1 % q1, x0 % q1, q1), q0_inv, q1);
                let x = x0 as u128 + q0 as u128 * t as u128;
                if x > half {
                    -((modulus - x) as f64)
                } else {
                    x as f64
                }
            })
            .collect()
    }
}

// ═══════════════════════════════════════════════════════════════════════════
// Elements
// ═══════════════════════════════════════════════════════════════════════════

/// Encoded (unencrypted) slot vector with its level and scale.
#[derive(Clone, Debug)]
pub struct Plaintext {
    pub(crate) poly: RnsPolynomial,
    pub level: usize,
    pub scale: f64,
}

/// Encrypted slot vector. Components live in evaluation domain so that
/// multiplications are pointwise; they only leave it for rescaling.
#[derive(Clone, Debug)]
pub struct Ciphertext {
    pub(crate) c0: RnsPolynomial,
    pub(crate) c1: RnsPolynomial,
    pub level: usize,
    pub scale: f64,
}

// ═══════════════════════════════════════════════════════════════════════════
// Wire format
// ═══════════════════════════════════════════════════════════════════════════
//
// Common header: magic "HELO" | version u8 | object type u8 |
// label length u8 | label bytes. The label names the parameter set and is
// rejected on mismatch. Body layout depends on the object type.

const CKKS_MAGIC: &[u8; 4] = b"HELO";
pub const CKKS_WIRE_VERSION: u8 = 1;

pub(crate) const OBJ_CIPHERTEXT: u8 = 0;
pub(crate) const OBJ_SECRET_KEY: u8 = 1;
pub(crate) const OBJ_PUBLIC_KEY: u8 = 2;
pub(crate) const OBJ_RELIN_KEY: u8 = 3;

pub(crate) fn write_header(out: &mut Vec<u8>, obj_type: u8, label: &str) {
    assert!(label.len() <= u8::MAX as usize, "label too long");
    out.extend_from_slice(CKKS_MAGIC);
    out.push(CKKS_WIRE_VERSION);
    out.push(obj_type);
    out.push(label.len() as u8);
    out.extend_from_slice(label.as_bytes());
}

pub(crate) fn read_header<R: Read>(
    r: &mut R,
    expected_type: u8,
    expected_label: &str,
) -> Result<(), CkksError> {
    let mut magic = [0u8; 4];
    read_exact(r, &mut magic)?;
    if &magic != CKKS_MAGIC {
        return Err(CkksError::BadMagic);
    }
    let mut b1 = [0u8; 1];
    read_exact(r, &mut b1)?;
    if b1[0] != CKKS_WIRE_VERSION {
        return Err(CkksError::UnsupportedVersion(b1[0]));
    }
    read_exact(r, &mut b1)?;
    if b1[0] != expected_type {
        return Err(CkksError::WrongObjectType { expected: expected_type, got: b1[0] });
    }
    read_exact(r, &mut b1)?;
    let mut label = vec![0u8; b1[0] as usize];
    read_exact(r, &mut label)?;
    let label = String::from_utf8(label)
        .map_err(|_| CkksError::Malformed("label is not UTF-8".into()))?;
    if label != expected_label {
        return Err(CkksError::LabelMismatch { expected: expected_label.into(), got: label });
    }
    Ok(())
}

pub(crate) fn read_exact<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<(), CkksError> {
    r.read_exact(buf).map_err(|_| CkksError::Truncated)
}

pub(crate) fn read_poly<R: Read>(
    ring: &RingParams,
    r: &mut R,
) -> Result<RnsPolynomial, CkksError> {
    RnsPolynomial::read_from(ring, r).map_err(|e| match e {
        RingError::Truncated => CkksError::Truncated,
        other => CkksError::Ring(other),
    })
}

impl Ciphertext {
    /// Body: level u16 | scale f64 bits u64 | c0 | c1, all little-endian.
    pub fn serialize(&self, ctx: &CkksContext) -> Vec<u8> {
        let mut out = Vec::new();
        write_header(&mut out, OBJ_CIPHERTEXT, &ctx.config.label);
        out.extend_from_slice(&(self.level as u16).to_le_bytes());
        out.extend_from_slice(&self.scale.to_bits().to_le_bytes());
        out.extend_from_slice(&self.c0.serialize(ctx.ring()));
        out.extend_from_slice(&self.c1.serialize(ctx.ring()));
        out
    }

    pub fn deserialize(ctx: &CkksContext, bytes: &[u8]) -> Result<Self, CkksError> {
        let mut r = io::Cursor::new(bytes);
        let ct = Self::read_from(ctx, &mut r)?;
        if r.position() as usize != bytes.len() {
            return Err(CkksError::Malformed("trailing bytes after ciphertext".into()));
        }
        Ok(ct)
    }

    pub fn read_from<R: Read>(ctx: &CkksContext, r: &mut R) -> Result<Self, CkksError> {
        read_header(r, OBJ_CIPHERTEXT, &ctx.config.label)?;
        let mut b2 = [0u8; 2];
        read_exact(r, &mut b2)?;
        let level = u16::from_le_bytes(b2) as usize;
        if level > ctx.max_level() {
            return Err(CkksError::Malformed(format!("level {} out of range", level)));
        }
        let mut b8 = [0u8; 8];
        read_exact(r, &mut b8)?;
        let scale = f64::from_bits(u64::from_le_bytes(b8));
        if !scale.is_finite() || scale < 1.0 || scale > (1u128 << 80) as f64 {
            return Err(CkksError::Malformed(format!("implausible scale {}", scale)));
        }
        let c0 = read_poly(ctx.ring(), r)?;
        let c1 = read_poly(ctx.ring(), r)?;
        let expected_limbs = ctx.limbs_at(level);
        for (name, p) in [("c0", &c0), ("c1", &c1)] {
            if p.limbs() != expected_limbs {
                return Err(CkksError::Malformed(format!(
                    "{} has {} limbs, level {} requires {}",
                    name,
                    p.limbs(),
                    level,
                    expected_limbs
                )));
            }
            if p.domain() != Domain::Evaluation {
                return Err(CkksError::Malformed(format!("{} not in evaluation domain", name)));
            }
        }
        Ok(Ciphertext { c0, c1, level, scale })
    }

    /// Serialized size in bytes, for traffic accounting.
    pub fn byte_len(&self, ctx: &CkksContext) -> usize {
        7 + ctx.config.label.len() + 10 + 2 * (12 + self.c0.limbs() * (8 + 8 * self.c0.degree()))
    }
}

// ═══════════════════════════════════════════════════════════════════════════
// Tests
// ═══════════════════════════════════════════════════════════════════════════
