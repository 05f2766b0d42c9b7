//! Negacyclic polynomial rings Z_Q[X]/(X^d + 1) with Q in residue form.
//!
//! The big modulus Q = q₀·q₁·…·q_L never materializes: a polynomial is a
//! stack of limbs, one per prime, and every operation works limb-wise.
//! Primes are word-sized, NTT-friendly (q ≡ 1 mod 2d), and found by scanning
//! outward from a target power of two. Limb order is fixed: limb 0 is the
//! base prime (never dropped), higher limbs are the scaling primes consumed
//! top-down by `drop_limb`.
//!
//! Two element domains: `Coefficient` (power basis) and `Evaluation` (NTT
//! point values). Pointwise multiplication requires `Evaluation`; the
//! divide-and-round limb drop requires `Coefficient`. Domain mixing is a
//! programming error and panics; malformed *serialized* input is rejected
//! with typed errors instead.

pub mod arith;
pub mod ntt;

use arith::{add_mod, sub_mod, Modulus};
use ntt::NttTable;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use std::io::{self, Read, Write};

// ═══════════════════════════════════════════════════════════════════════════
// Parameters
// ═══════════════════════════════════════════════════════════════════════════

pub const MIN_DEGREE: usize = 16;
pub const MAX_DEGREE: usize = 1 << 17;

/// Wire-format version for serialized polynomials.
pub const RING_WIRE_VERSION: u8 = 1;
const RING_MAGIC: &[u8; 4] = b"HRNS";

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum RingError {
    #[error("bad magic bytes in polynomial header")]
    BadMagic,
    #[error("unsupported polynomial wire version {0}")]
    UnsupportedVersion(u8),
    #[error("malformed polynomial: {0}")]
    Malformed(String),
    #[error("serialized prime chain does not match ring parameters")]
    PrimeMismatch,
    #[error("truncated polynomial encoding")]
    Truncated,
}

/// One ring instantiation: degree, prime chain, and all per-limb precomputation.
#[derive(Debug)]
pub struct RingParams {
    degree: usize,
    primes: Vec<u64>,
    moduli: Vec<Modulus>,
    tables: Vec<NttTable>,
    /// inverse of prime j modulo prime i (i < j), Shoup pair, for `drop_limb`
    drop_inv: Vec<Vec<(u64, u64)>>,
    /// prime j reduced modulo prime i (i < j), for centering in `drop_limb`
    qj_mod_qi: Vec<Vec<u64>>,
}

impl RingParams {
    /// Builds a ring from an explicit prime chain. Panics on structurally
    /// invalid parameters (these are build-time constants, not wire input).
    pub fn new(degree: usize, primes: Vec<u64>) -> Self {
        assert!(
            degree.is_power_of_two() && (MIN_DEGREE..=MAX_DEGREE).contains(&degree),
            "degree {} must be a power of two in [{}, {}]",
            degree,
            MIN_DEGREE,
            MAX_DEGREE
        );
        assert!(!primes.is_empty(), "prime chain must be non-empty");
        let mut seen = primes.clone();
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen.len(), primes.len(), "prime chain has duplicates");
        for &q in &primes {
            assert!(arith::is_prime(q), "{} is not prime", q);
            assert_eq!((q - 1) % (2 * degree as u64), 0, "{} is not 1 mod 2d", q);
            assert!(q < 1 << 60, "{} is not word-sized", q);
        }
        let moduli: Vec<Modulus> = primes.iter().map(|&q| Modulus::new(q)).collect();
        let tables: Vec<NttTable> = primes.iter().map(|&q| NttTable::new(q, degree)).collect();
        let mut drop_inv = Vec::with_capacity(primes.len());
        let mut qj_mod_qi = Vec::with_capacity(primes.len());
        for j in 0..primes.len() {
            let mut invs = Vec::with_capacity(j);
            let mut reds = Vec::with_capacity(j);
            for i in 0..j {
                let inv = arith::inv_mod(primes[j] % primes[i], primes[i]);
                invs.push((inv, arith::shoup_precompute(inv, primes[i])));
                reds.push(primes[j] % primes[i]);
            }
            drop_inv.push(invs);
            qj_mod_qi.push(reds);
        }
        RingParams { degree, primes, moduli, tables, drop_inv, qj_mod_qi }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Full prime chain, base prime first.
    pub fn primes(&self) -> &[u64] {
        &self.primes
    }

    pub fn limb_count(&self) -> usize {
        self.primes.len()
    }

    pub fn modulus(&self, limb: usize) -> &Modulus {
        &self.moduli[limb]
    }

    pub fn table(&self, limb: usize) -> &NttTable {
        &self.tables[limb]
    }

    // ── construction of elements ──────────────────────────────────────────

    pub fn zero(&self, limbs: usize, domain: Domain) -> RnsPolynomial {
        assert!(limbs >= 1 && limbs <= self.primes.len(), "limb count {} out of range", limbs);
        RnsPolynomial { degree: self.degree, limbs, domain, coeffs: vec![0; limbs * self.degree] }
    }

    /// Embeds signed coefficients (one per slot of the power basis) into RNS
    /// form. Magnitudes must stay below every prime; the callers only feed
    /// noise and small scalars through this path.
    pub fn from_signed_coeffs(&self, limbs: usize, coeffs: &[i64]) -> RnsPolynomial {
        assert_eq!(coeffs.len(), self.degree, "coefficient count != degree");
        let mut p = self.zero(limbs, Domain::Coefficient);
        for (i, &q) in self.primes[..limbs].iter().enumerate() {
            let limb = p.limb_mut(i);
            for (k, &c) in coeffs.iter().enumerate() {
                limb[k] = c.rem_euclid(q as i64) as u64;
            }
        }
        p
    }

    /// Embeds arbitrarily large centered coefficients given as (sign, |c|)
    /// 128-bit magnitudes. Used by the encoder, whose integers exceed i64
    /// once the scale passes 2⁶³.
    pub fn from_signed_wide(&self, limbs: usize, coeffs: &[(bool, u128)]) -> RnsPolynomial {
        assert_eq!(coeffs.len(), self.degree, "coefficient count != degree");
        let mut p = self.zero(limbs, Domain::Coefficient);
        for i in 0..limbs {
            let m = self.moduli[i];
            let q = m.q;
            let limb = p.limb_mut(i);
            for (k, &(neg, mag)) in coeffs.iter().enumerate() {
                let r = m.reduce128(mag);
                limb[k] = if neg && r != 0 { q - r } else { r };
            }
        }
        p
    }

    // ── sampling ──────────────────────────────────────────────────────────

    /// Uniform element of R_Q. Uniformity holds limb-wise, so the requested
    /// domain is just a label — sampling is identical in both.
    pub fn sample_uniform<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        limbs: usize,
        domain: Domain,
    ) -> RnsPolynomial {
        let mut p = self.zero(limbs, domain);
        for i in 0..limbs {
            let q = self.primes[i];
            for c in p.limb_mut(i) {
                *c = rng.random_range(0..q);
            }
        }
        p
    }

    /// Centered discrete Gaussian by rounding N(0, σ), tail-rejected beyond
    /// 6σ, returned as raw signed values for callers that need statistics or
    /// RNS embedding.
    pub fn sample_gaussian_signed<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        sigma: f64,
    ) -> Vec<i64> {
        let normal = Normal::new(0.0, sigma).expect("sigma must be positive");
        let cut = 6.0 * sigma;
        (0..self.degree)
            .map(|_| {
                loop {
                    let x = normal.sample(rng);
                    if x.abs() <= cut {
                        return x.round() as i64;
                    }
                }
            })
            .collect()
    }

    /// Gaussian ring element in coefficient domain.
    pub fn sample_gaussian<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        limbs: usize,
        sigma: f64,
    ) -> RnsPolynomial {
        let signed = self.sample_gaussian_signed(rng, sigma);
        self.from_signed_coeffs(limbs, &signed)
    }

    /// Uniform ternary element ({-1, 0, 1} i.i.d.) in coefficient domain.
    pub fn sample_ternary<R: Rng + ?Sized>(&self, rng: &mut R, limbs: usize) -> RnsPolynomial {
        let signed: Vec<i64> = (0..self.degree).map(|_| rng.random_range(-1..=1)).collect();
        self.from_signed_coeffs(limbs, &signed)
    }

    // ── transforms ────────────────────────────────────────────────────────

    pub fn ntt_forward(&self, p: &mut RnsPolynomial) {
        assert_eq!(p.domain, Domain::Coefficient, "forward NTT expects coefficient domain");
        for i in 0..p.limbs {
            self.tables[i].forward(p.limb_mut(i));
        }
        p.domain = Domain::Evaluation;
    }

    pub fn ntt_inverse(&self, p: &mut RnsPolynomial) {
        assert_eq!(p.domain, Domain::Evaluation, "inverse NTT expects evaluation domain");
        for i in 0..p.limbs {
            self.tables[i].inverse(p.limb_mut(i));
        }
        p.domain = Domain::Coefficient;
    }

    // ── arithmetic ────────────────────────────────────────────────────────

    pub fn add_assign(&self, a: &mut RnsPolynomial, b: &RnsPolynomial) {
        Self::check_compatible(a, b);
        for i in 0..a.limbs {
            let q = self.primes[i];
            let (al, bl) = (&mut a.coeffs[i * a.degree..(i + 1) * a.degree], b.limb(i));
            for (x, &y) in al.iter_mut().zip(bl) {
                *x = add_mod(*x, y, q);
            }
        }
    }

    pub fn sub_assign(&self, a: &mut RnsPolynomial, b: &RnsPolynomial) {
        Self::check_compatible(a, b);
        for i in 0..a.limbs {
            let q = self.primes[i];
            let (al, bl) = (&mut a.coeffs[i * a.degree..(i + 1) * a.degree], b.limb(i));
            for (x, &y) in al.iter_mut().zip(bl) {
                *x = sub_mod(*x, y, q);
            }
        }
    }

    pub fn neg_assign(&self, a: &mut RnsPolynomial) {
        for i in 0..a.limbs {
            let q = self.primes[i];
            for x in a.limb_mut(i) {
                *x = if *x == 0 { 0 } else { q - *x };
            }
        }
    }

    /// Pointwise product, evaluation domain only (where it realizes the
    /// negacyclic convolution).
    pub fn pointwise_mul(&self, a: &RnsPolynomial, b: &RnsPolynomial) -> RnsPolynomial {
        Self::check_compatible(a, b);
        assert_eq!(a.domain, Domain::Evaluation, "pointwise product expects evaluation domain");
        let mut out = self.zero(a.limbs, Domain::Evaluation);
        for i in 0..a.limbs {
            let m = self.moduli[i];
            let (ol, al, bl) =
                (&mut out.coeffs[i * a.degree..(i + 1) * a.degree], a.limb(i), b.limb(i));
            for ((o, &x), &y) in ol.iter_mut().zip(al).zip(bl) {
                *o = m.mul(x, y);
            }
        }
        out
    }

    /// `acc += a ⊙ b`, evaluation domain. The work-horse of key switching.
    pub fn pointwise_mul_acc(&self, acc: &mut RnsPolynomial, a: &RnsPolynomial, b: &RnsPolynomial) {
        Self::check_compatible(a, b);
        Self::check_compatible(acc, a);
        assert_eq!(a.domain, Domain::Evaluation, "pointwise product expects evaluation domain");
        for i in 0..a.limbs {
            let m = self.moduli[i];
            let (accl, al, bl) =
                (&mut acc.coeffs[i * a.degree..(i + 1) * a.degree], a.limb(i), b.limb(i));
            for ((o, &x), &y) in accl.iter_mut().zip(al).zip(bl) {
                *o = m.reduce128(*o as u128 + x as u128 * y as u128);
            }
        }
    }

    /// Pointwise product using only the first `a.limbs()` limbs of `b`, which
    /// may carry more. Keys are stored at the full chain and used at every
    /// level; this avoids truncation copies on the hot path.
    pub fn pointwise_mul_prefix(&self, a: &RnsPolynomial, b: &RnsPolynomial) -> RnsPolynomial {
        assert!(b.limbs >= a.limbs, "prefix operand too short: {} < {}", b.limbs, a.limbs);
        assert_eq!(a.degree, b.degree, "degree mismatch");
        assert_eq!(a.domain, Domain::Evaluation, "pointwise product expects evaluation domain");
        assert_eq!(b.domain, Domain::Evaluation, "pointwise product expects evaluation domain");
        let mut out = self.zero(a.limbs, Domain::Evaluation);
        for i in 0..a.limbs {
            let m = self.moduli[i];
            let (ol, al, bl) =
                (&mut out.coeffs[i * a.degree..(i + 1) * a.degree], a.limb(i), b.limb(i));
            for ((o, &x), &y) in ol.iter_mut().zip(al).zip(bl) {
                *o = m.mul(x, y);
            }
        }
        out
    }

    /// `acc += a ⊙ b` with `b` possibly longer than `a`, as in
    /// [`Self::pointwise_mul_prefix`].
    pub fn pointwise_mul_acc_prefix(
        &self,
        acc: &mut RnsPolynomial,
        a: &RnsPolynomial,
        b: &RnsPolynomial,
    ) {
        assert!(b.limbs >= a.limbs, "prefix operand too short: {} < {}", b.limbs, a.limbs);
        Self::check_compatible(acc, a);
        assert_eq!(a.domain, Domain::Evaluation, "pointwise product expects evaluation domain");
        assert_eq!(b.domain, Domain::Evaluation, "pointwise product expects evaluation domain");
        for i in 0..a.limbs {
            let m = self.moduli[i];
            let (accl, al, bl) =
                (&mut acc.coeffs[i * a.degree..(i + 1) * a.degree], a.limb(i), b.limb(i));
            for ((o, &x), &y) in accl.iter_mut().zip(al).zip(bl) {
                *o = m.reduce128(*o as u128 + x as u128 * y as u128);
            }
        }
    }

    /// Multiplies limb `i` of `a` by the per-limb scalar `scalars[i]`.
    pub fn scalar_mul_assign(&self, a: &mut RnsPolynomial, scalars: &[u64]) {
        assert_eq!(scalars.len(), a.limbs, "one scalar per active limb");
        for i in 0..a.limbs {
            let m = self.moduli[i];
            let s = scalars[i] % m.q;
            let s_shoup = arith::shoup_precompute(s, m.q);
            for x in a.limb_mut(i) {
                *x = arith::shoup_mul(*x, s, s_shoup, m.q);
            }
        }
    }

    // ── limb operations ───────────────────────────────────────────────────

    /// Divide-and-round by the top prime: the RNS realization of
    /// `p ↦ round(p / q_top)` on centered representatives. Consumes the top
    /// limb; coefficient domain only.
    pub fn drop_limb(&self, p: &RnsPolynomial) -> RnsPolynomial {
        assert_eq!(p.domain, Domain::Coefficient, "drop_limb expects coefficient domain");
        assert!(p.limbs >= 2, "cannot drop the base limb");
        let top = p.limbs - 1;
        let q_top = self.primes[top];
        let half = q_top >> 1;
        let mut out = self.zero(top, Domain::Coefficient);
        let top_limb = p.limb(top);
        for i in 0..top {
            let q = self.primes[i];
            let m = self.moduli[i];
            let (inv, inv_shoup) = self.drop_inv[top][i];
            let qt_red = self.qj_mod_qi[top][i];
            let ol = &mut out.coeffs[i * p.degree..(i + 1) * p.degree];
            let il = p.limb(i);
            for (k, (o, &x)) in ol.iter_mut().zip(il).enumerate() {
                let t = top_limb[k];
                // centered representative of the top residue, reduced mod q_i
                let t_c = if t > half {
                    // t - q_top (negative) ≡ t mod q_i + q_i - q_top mod q_i
                    let tr = m.reduce128(t as u128);
                    add_mod(tr, q - qt_red, q)
                } else {
                    m.reduce128(t as u128)
                };
                let diff = sub_mod(x, t_c, q);
                *o = arith::shoup_mul(diff, inv, inv_shoup, q);
            }
        }
        out
    }

    /// Value-preserving modulus reduction: keeps the first `new_limbs` limbs.
    /// The centered value is unchanged as long as it fits the smaller
    /// modulus, which the CKKS layer guarantees by construction.
    pub fn truncate_limbs(&self, p: &RnsPolynomial, new_limbs: usize) -> RnsPolynomial {
        assert!(new_limbs >= 1 && new_limbs <= p.limbs, "invalid truncation to {}", new_limbs);
        RnsPolynomial {
            degree: p.degree,
            limbs: new_limbs,
            domain: p.domain,
            coeffs: p.coeffs[..new_limbs * p.degree].to_vec(),
        }
    }

    fn check_compatible(a: &RnsPolynomial, b: &RnsPolynomial) {
        assert_eq!(a.degree, b.degree, "degree mismatch: {} vs {}", a.degree, b.degree);
        assert_eq!(a.limbs, b.limbs, "limb mismatch: {} vs {}", a.limbs, b.limbs);
        assert_eq!(a.domain, b.domain, "domain mismatch: {:?} vs {:?}", a.domain, b.domain);
    }
}

// ═══════════════════════════════════════════════════════════════════════════
// Elements
// ═══════════════════════════════════════════════════════════════════════════

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Domain {
    Coefficient,
    Evaluation,
}

/// One ring element: `limbs × degree` residues, limb-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RnsPolynomial {
    degree: usize,
    limbs: usize,
    domain: Domain,
    coeffs: Vec<u64>,
}

impl RnsPolynomial {
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn limbs(&self) -> usize {
        self.limbs
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn limb(&self, i: usize) -> &[u64] {
        &self.coeffs[i * self.degree..(i + 1) * self.degree]
    }

    pub fn limb_mut(&mut self, i: usize) -> &mut [u64] {
        &mut self.coeffs[i * self.degree..(i + 1) * self.degree]
    }

    // ── wire format ───────────────────────────────────────────────────────
    //
    // magic "HRNS" | version u8 | domain u8 | degree u32 | limb count u16 |
    // then per limb: prime u64 | degree × u64 coefficients. All integers
    // little-endian fixed width.

    pub fn serialize(&self, params: &RingParams) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + self.limbs * (8 + 8 * self.degree));
        out.extend_from_slice(RING_MAGIC);
        out.push(RING_WIRE_VERSION);
        out.push(match self.domain {
            Domain::Coefficient => 0,
            Domain::Evaluation => 1,
        });
        out.extend_from_slice(&(self.degree as u32).to_le_bytes());
        out.extend_from_slice(&(self.limbs as u16).to_le_bytes());
        for i in 0..self.limbs {
            out.extend_from_slice(&params.primes[i].to_le_bytes());
            for &c in self.limb(i) {
                out.extend_from_slice(&c.to_le_bytes());
            }
        }
        out
    }

    pub fn deserialize(params: &RingParams, bytes: &[u8]) -> Result<Self, RingError> {
        let mut r = io::Cursor::new(bytes);
        let p = Self::read_from(params, &mut r)?;
        if r.position() as usize != bytes.len() {
            return Err(RingError::Malformed("trailing bytes after polynomial".into()));
        }
        Ok(p)
    }

    pub fn write_to<W: Write>(&self, params: &RingParams, w: &mut W) -> io::Result<()> {
        w.write_all(&self.serialize(params))
    }

    pub fn read_from<R: Read>(params: &RingParams, r: &mut R) -> Result<Self, RingError> {
        let mut magic = [0u8; 4];
        read_exact(r, &mut magic)?;
        if &magic != RING_MAGIC {
            return Err(RingError::BadMagic);
        }
        let mut b1 = [0u8; 1];
        read_exact(r, &mut b1)?;
        if b1[0] != RING_WIRE_VERSION {
            return Err(RingError::UnsupportedVersion(b1[0]));
        }
        read_exact(r, &mut b1)?;
        let domain = match b1[0] {
            0 => Domain::Coefficient,
            1 => Domain::Evaluation,
            d => return Err(RingError::Malformed(format!("unknown domain tag {}", d))),
        };
        let mut b4 = [0u8; 4];
        read_exact(r, &mut b4)?;
        let degree = u32::from_le_bytes(b4) as usize;
        if degree != params.degree {
            return Err(RingError::Malformed(format!(
                "degree {} does not match ring degree {}",
                degree, params.degree
            )));
        }
        let mut b2 = [0u8; 2];
        read_exact(r, &mut b2)?;
        let limbs = u16::from_le_bytes(b2) as usize;
        if limbs == 0 || limbs > params.primes.len() {
            return Err(RingError::Malformed(format!("limb count {} out of range", limbs)));
        }
        let mut coeffs = vec![0u64; limbs * degree];
        let mut b8 = [0u8; 8];
        for i in 0..limbs {
            read_exact(r, &mut b8)?;
            let prime = u64::from_le_bytes(b8);
            if prime != params.primes[i] {
                return Err(RingError::PrimeMismatch);
            }
            for k in 0..degree {
                read_exact(r, &mut b8)?;
                let c = u64::from_le_bytes(b8);
                if c >= prime {
                    return Err(RingError::Malformed(format!(
                        "coefficient {} not reduced mod {}",
                        c, prime
                    )));
                }
                coeffs[i * degree + k] = c;
            }
        }
        Ok(RnsPolynomial { degree, limbs, domain, coeffs })
    }
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<(), RingError> {
    r.read_exact(buf).map_err(|_| RingError::Truncated)
}

// ═══════════════════════════════════════════════════════════════════════════
// Tests
// ═══════════════════════════════════════════════════════════════════════════
