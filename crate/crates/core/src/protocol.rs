//! Three-role matchmaking protocol over encrypted ratings.
//!
//! Roles:
//!
//! - **Users** hold nothing persistent but their registration secrets. A new
//!   player perturbs the public initial rating by a private offset, commits
//!   to it, encrypts it, and proves the commitment lies in the claimed band.
//! - The **service provider** (SP) stores one ciphertext, one commitment,
//!   and one band attestation per player. It matchmakes within bands, runs
//!   every rating update homomorphically, and never holds a decryption key.
//! - The **key custodian** (KC) holds the CKKS secret key and a signing key.
//!   It certifies at registration that ciphertext and commitment carry the
//!   same rating, refreshes ciphertexts after each match (decrypt, clamp,
//!   re-encrypt at top level), and issues fresh band certificates when a
//!   player's re-attestation cycle completes.
//!
//! Counter discipline: each player record carries a match counter. A match
//! is only scheduled while both counters are below the cycle length `N`
//! (check), and the counters move after the refreshed ciphertexts are
//! installed (increment). Once a counter reaches `N` the player must pass
//! `verify_new` — a fresh range proof and signature over the exact stored
//! ciphertext — which re-bases their band and resets the counter.
//!
//! All heavyweight objects cross role boundaries as serialized bytes, so
//! trace records of message sizes reflect real wire costs.

use std::collections::HashMap;
use std::sync::Arc;

use curve25519_dalek::ristretto::{CompressedRistretto, RistrettoPoint};
use curve25519_dalek::scalar::Scalar;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ckks::engine::{PublicKey, RelinKey, SecretKey};
use crate::ckks::{Ciphertext, CkksConfig, CkksContext, CkksError};
use crate::elo::{self, band_of, clamp_rating, expectation_coeffs, EXPECTATION_DOMAIN, K_FACTOR};
use crate::prims::{random_scalar, PedersenGens, PrimError, Signature, SigningKey, VerifyingKey};
use crate::zkrp::{band_bounds, context_digest, prove_range, range_bits, verify_range, RangeProof, ZkrpError};

#[derive(Debug, thiserror::Error)]
pub enum ProtocolError {
    #[error("invalid protocol parameters: {0}")]
    InvalidParams(&'static str),
    #[error("player {0} is already registered")]
    DuplicatePlayer(u64),
    #[error("player {0} is not registered")]
    UnknownPlayer(u64),
    #[error("a player cannot be matched against themselves")]
    SelfMatch(u64),
    #[error("registration offset exceeds the allowed bound")]
    PerturbationOutOfRange,
    #[error("players are in different bands ({0} vs {1})")]
    NotSameBand(usize, usize),
    #[error("player {0} completed their cycle and must re-attest first")]
    CycleComplete(u64),
    #[error("re-attestation requires a full cycle ({have} of {need} matches)")]
    CycleIncomplete { have: u32, need: u32 },
    #[error("ciphertext does not match the custodian's record for player {0}")]
    CiphertextMismatch(u64),
    #[error("ciphertext and commitment disagree for player {0}")]
    ConsistencyRejected(u64),
    #[error("claimed band {0} is not on the ladder")]
    BadBand(usize),
    #[error("ciphertext is not fresh (level {got}, expected {expected})")]
    StaleLevel { expected: usize, got: usize },
    #[error("range proof rejected: {0}")]
    Proof(#[from] ZkrpError),
    #[error("attestation rejected: {0}")]
    Attestation(#[from] PrimError),
    #[error("ciphertext error: {0}")]
    Ckks(#[from] CkksError),
}

// ═══════════════════════════════════════════════════════════════════════════
// Parameters and deployment
// ═══════════════════════════════════════════════════════════════════════════

#[derive(Clone, Debug)]
pub struct ProtocolParams {
    /// Matches a player may play before they must re-attest their band (N).
    pub matches_per_cycle: u32,
    /// Bound on the private registration offset (A): offsets are drawn from
    /// [−A, A].
    pub alpha_bound: f64,
    /// Elo K-factor applied by the encrypted update circuit.
    pub k_factor: f64,
}

impl Default for ProtocolParams {
    fn default() -> Self {
        ProtocolParams { matches_per_cycle: 3, alpha_bound: 50.0, k_factor: K_FACTOR }
    }
}

impl ProtocolParams {
    fn validate(&self) -> Result<(), ProtocolError> {
        if self.matches_per_cycle < 3 {
            return Err(ProtocolError::InvalidParams("cycle length must be at least 3"));
        }
        if !(self.alpha_bound >= 0.0 && self.alpha_bound < 250.0) {
            return Err(ProtocolError::InvalidParams("offset bound must lie in [0, 250)"));
        }
        if !(self.k_factor > 0.0 && self.k_factor <= 400.0) {
            return Err(ProtocolError::InvalidParams("K-factor must lie in (0, 400]"));
        }
        Ok(())
    }
}

/// A freshly deployed protocol instance: shared CKKS context, a service
/// provider holding only evaluation material, and a key custodian holding
/// the secrets.
pub struct Deployment {
    pub ctx: Arc<CkksContext>,
    pub sp: ServiceProvider,
    pub kc: KeyCustodian,
}

pub fn deploy<R: Rng + ?Sized>(
    config: CkksConfig,
    params: ProtocolParams,
    rng: &mut R,
) -> Result<Deployment, ProtocolError> {
    params.validate()?;
    let ctx = Arc::new(CkksContext::new(config));
    let (sk, pk, rlk) = ctx.keygen(rng);
    let signing = SigningKey::generate(rng);
    let gens = PedersenGens::default();
    let sp = ServiceProvider {
        ctx: ctx.clone(),
        pk: pk.clone(),
        rlk,
        gens: gens.clone(),
        custodian_key: signing.verifying_key(),
        params,
        players: HashMap::new(),
    };
    let kc = KeyCustodian { ctx: ctx.clone(), sk, pk, signing, gens, records: HashMap::new() };
    Ok(Deployment { ctx, sp, kc })
}

// ═══════════════════════════════════════════════════════════════════════════
// Wire objects
// ═══════════════════════════════════════════════════════════════════════════

/// Secure-channel payload from a user to the custodian: the commitment
/// opening travels alongside the ciphertext so the custodian can check both
/// carry the same rating. The custodian can decrypt anyway; the opening
/// reveals nothing it could not compute.
#[derive(Debug)]
pub struct EnrollmentRequest {
    pub id: u64,
    pub band: usize,
    pub ciphertext: Vec<u8>,
    pub commitment: CompressedRistretto,
    pub value: u64,
    pub blinding: Scalar,
}

/// What the user keeps after enrolling.
#[derive(Debug)]
pub struct UserSecret {
    pub value: u64,
    pub blinding: Scalar,
}

/// Everything produced by user-side enrollment.
#[derive(Debug)]
pub struct Enrollment {
    pub request: EnrollmentRequest,
    pub proof: Vec<u8>,
    pub secret: UserSecret,
}

/// Public registration message to the service provider.
#[derive(Debug)]
pub struct Registration {
    pub id: u64,
    pub band: usize,
    pub ciphertext: Vec<u8>,
    pub commitment: CompressedRistretto,
    pub proof: Vec<u8>,
    pub attestation: Signature,
}

impl Enrollment {
    pub fn registration(&self, attestation: Signature) -> Registration {
        Registration {
            id: self.request.id,
            band: self.request.band,
            ciphertext: self.request.ciphertext.clone(),
            commitment: self.request.commitment,
            proof: self.proof.clone(),
            attestation,
        }
    }
}

impl Registration {
    pub fn total_bytes(&self) -> usize {
        8 + 1 + self.ciphertext.len() + 32 + self.proof.len() + 64
    }
}

/// Post-update ciphertext pair on its way to the custodian for refresh.
#[derive(Debug)]
pub struct UpdatedPair {
    pub a: u64,
    pub b: u64,
    pub ct_a: Vec<u8>,
    pub ct_b: Vec<u8>,
}

/// Refreshed pair coming back from the custodian.
#[derive(Debug)]
pub struct RefreshedPair {
    pub a: u64,
    pub b: u64,
    pub ct_a: Vec<u8>,
    pub ct_b: Vec<u8>,
}

impl UpdatedPair {
    pub fn total_bytes(&self) -> usize {
        16 + self.ct_a.len() + self.ct_b.len()
    }
}

impl RefreshedPair {
    pub fn total_bytes(&self) -> usize {
        16 + self.ct_a.len() + self.ct_b.len()
    }
}

/// Fresh band certificate issued by the custodian at cycle end.
#[derive(Clone, Debug)]
pub struct BandCertificate {
    pub id: u64,
    pub band: usize,
    pub commitment: CompressedRistretto,
    pub proof: Vec<u8>,
    pub attestation: Signature,
}

impl BandCertificate {
    pub fn total_bytes(&self) -> usize {
        8 + 1 + 32 + self.proof.len() + 64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MatchOutcome {
    WinA,
    Draw,
    WinB,
}

impl MatchOutcome {
    pub fn score_a(self) -> f64 {
        match self {
            MatchOutcome::WinA => 1.0,
            MatchOutcome::Draw => 0.5,
            MatchOutcome::WinB => 0.0,
        }
    }
}

/// Canonical byte layout signed by the custodian:
/// `version ‖ id (LE u64) ‖ band (u8) ‖ ciphertext digest ‖ commitment`.
pub fn attestation_bytes(
    id: u64,
    band: usize,
    ct_digest: &[u8; 32],
    commitment: &CompressedRistretto,
) -> Vec<u8> {
    let mut out = Vec::with_capacity(1 + 8 + 1 + 32 + 32);
    out.push(1u8);
    out.extend_from_slice(&id.to_le_bytes());
    out.push(band as u8);
    out.extend_from_slice(ct_digest);
    out.extend_from_slice(commitment.as_bytes());
    out
}

/// Context bytes folded into every range proof: the proof is unusable with
/// any other player id or ciphertext.
pub fn proof_context(id: u64, ct_digest: &[u8; 32]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + 32);
    out.extend_from_slice(&id.to_le_bytes());
    out.extend_from_slice(ct_digest);
    out
}

// ═══════════════════════════════════════════════════════════════════════════
// User-side enrollment
// ═══════════════════════════════════════════════════════════════════════════

/// Build the enrollment material for a new player. The private offset
/// `alpha` perturbs the public initial rating; the claimed band is the band
/// of the perturbed rating. The initial rating is floored to an integer so
/// ciphertext, commitment, and oracle all start from exactly the same value.
pub fn enroll_user<R: Rng + ?Sized>(
    ctx: &CkksContext,
    pk: &PublicKey,
    gens: &PedersenGens,
    params: &ProtocolParams,
    id: u64,
    alpha: f64,
    rng: &mut R,
) -> Result<Enrollment, ProtocolError> {
    if !(alpha.is_finite() && alpha.abs() <= params.alpha_bound) {
        return Err(ProtocolError::PerturbationOutOfRange);
    }
    let rating = clamp_rating((elo::INITIAL_RATING + alpha).floor());
    let value = rating as u64;
    let band = band_of(rating);

    let top = ctx.max_level();
    let pt = ctx.encode(&[rating], top, ctx.scale_of(top));
    let ct = ctx.encrypt(pk, &pt, rng);
    let ct_bytes = ct.serialize(ctx);
    let digest = context_digest(&ct_bytes);

    let blinding = random_scalar(rng);
    let commitment = gens.commit_u64(value, blinding).compress();
    let (min, max) = band_bounds(band);
    let proof = prove_range(gens, value, blinding, min, max, &proof_context(id, &digest), rng)?;

    Ok(Enrollment {
        request: EnrollmentRequest {
            id,
            band,
            ciphertext: ct_bytes,
            commitment,
            value,
            blinding,
        },
        proof: proof.to_bytes(),
        secret: UserSecret { value, blinding },
    })
}

// ═══════════════════════════════════════════════════════════════════════════
// Key custodian
// ═══════════════════════════════════════════════════════════════════════════

/// How far a decrypted rating may sit from the committed integer before the
/// custodian refuses to attest. Fresh encryptions carry the integer exactly
/// (up to encoding noise ≈ 1e−7); 0.5 pins the integer uniquely.
const REGISTRATION_TOLERANCE: f64 = 0.5;

pub struct KeyCustodian {
    ctx: Arc<CkksContext>,
    sk: SecretKey,
    pk: PublicKey,
    signing: SigningKey,
    gens: PedersenGens,
    /// Digest of the last ciphertext this custodian produced or attested for
    /// each player; re-attestation insists the stored ciphertext is exactly
    /// this one.
    records: HashMap<u64, [u8; 32]>,
}

impl KeyCustodian {
    /// Registration attestation: check that commitment and ciphertext carry
    /// the same rating in the claimed band, then sign the binding of id,
    /// band, ciphertext digest, and commitment.
    pub fn attest(&mut self, req: &EnrollmentRequest) -> Result<Signature, ProtocolError> {
        if req.band >= elo::BAND_COUNT {
            return Err(ProtocolError::BadBand(req.band));
        }
        let opened = self.gens.commit_u64(req.value, req.blinding).compress();
        if opened != req.commitment {
            return Err(ProtocolError::ConsistencyRejected(req.id));
        }

        let ct = Ciphertext::deserialize(&self.ctx, &req.ciphertext)?;
        expect_fresh(&self.ctx, &ct)?;
        let rating = self.ctx.decrypt_values(&self.sk, &ct)[0];
        if (rating - req.value as f64).abs() > REGISTRATION_TOLERANCE {
            return Err(ProtocolError::ConsistencyRejected(req.id));
        }
        if band_of(req.value as f64) != req.band {
            return Err(ProtocolError::BadBand(req.band));
        }

        let digest = context_digest(&req.ciphertext);
        self.records.insert(req.id, digest);
        Ok(self.signing.sign(&attestation_bytes(req.id, req.band, &digest, &req.commitment)))
    }

    /// Per-match refresh: decrypt both updated ciphertexts, clamp the
    /// ratings to the ladder, and re-encrypt at top level. Records the new
    /// digests for later re-attestation checks.
    pub fn refresh_match<R: Rng + ?Sized>(
        &mut self,
        pair: &UpdatedPair,
        rng: &mut R,
    ) -> Result<RefreshedPair, ProtocolError> {
        let ct_a = self.refresh_one(pair.a, &pair.ct_a, rng)?;
        let ct_b = self.refresh_one(pair.b, &pair.ct_b, rng)?;
        Ok(RefreshedPair { a: pair.a, b: pair.b, ct_a, ct_b })
    }

    fn refresh_one<R: Rng + ?Sized>(
        &mut self,
        id: u64,
        ct_bytes: &[u8],
        rng: &mut R,
    ) -> Result<Vec<u8>, ProtocolError> {
        let ct = Ciphertext::deserialize(&self.ctx, ct_bytes)?;
        let rating = clamp_rating(self.ctx.decrypt_values(&self.sk, &ct)[0]);
        let top = self.ctx.max_level();
        let pt = self.ctx.encode(&[rating], top, self.ctx.scale_of(top));
        let fresh = self.ctx.encrypt(&self.pk, &pt, rng).serialize(&self.ctx);
        self.records.insert(id, context_digest(&fresh));
        Ok(fresh)
    }

    /// End-of-cycle certificate: confirm the presented ciphertext is the one
    /// this custodian last produced, then commit to its (floored) rating
    /// afresh and prove the new band.
    pub fn reattest<R: Rng + ?Sized>(
        &mut self,
        id: u64,
        ct_bytes: &[u8],
        rng: &mut R,
    ) -> Result<BandCertificate, ProtocolError> {
        let digest = context_digest(ct_bytes);
        match self.records.get(&id) {
            Some(rec) if *rec == digest => {}
            _ => return Err(ProtocolError::CiphertextMismatch(id)),
        }
        let ct = Ciphertext::deserialize(&self.ctx, ct_bytes)?;
        let rating = clamp_rating(self.ctx.decrypt_values(&self.sk, &ct)[0]);
        let value = rating.floor() as u64;
        let band = band_of(rating);

        let blinding = random_scalar(rng);
        let commitment = self.gens.commit_u64(value, blinding).compress();
        let (min, max) = band_bounds(band);
        let proof =
            prove_range(&self.gens, value, blinding, min, max, &proof_context(id, &digest), rng)?;
        let attestation = self.signing.sign(&attestation_bytes(id, band, &digest, &commitment));
        Ok(BandCertificate { id, band, commitment, proof: proof.to_bytes(), attestation })
    }

    pub fn verifying_key(&self) -> VerifyingKey {
        self.signing.verifying_key()
    }

    /// Encryption key users enroll under.
    pub fn public_key(&self) -> &PublicKey {
        &self.pk
    }

    /// Commitment bases shared by the whole deployment.
    pub fn gens(&self) -> &PedersenGens {
        &self.gens
    }

    /// Decrypted rating of a ciphertext — experiment instrumentation, not a
    /// protocol message.
    pub fn decrypt_rating(&self, ct: &Ciphertext) -> f64 {
        self.ctx.decrypt_values(&self.sk, ct)[0]
    }
}

fn expect_fresh(ctx: &CkksContext, ct: &Ciphertext) -> Result<(), ProtocolError> {
    if ct.level != ctx.max_level() {
        return Err(ProtocolError::StaleLevel { expected: ctx.max_level(), got: ct.level });
    }
    Ok(())
}

// ═══════════════════════════════════════════════════════════════════════════
// Service provider
// ═══════════════════════════════════════════════════════════════════════════

struct PlayerRecord {
    band: usize,
    ct: Ciphertext,
    commitment: CompressedRistretto,
    #[allow(dead_code)]
    attestation: Signature,
    cnt: u32,
}

pub struct ServiceProvider {
    ctx: Arc<CkksContext>,
    #[allow(dead_code)]
    pk: PublicKey,
    rlk: RelinKey,
    gens: PedersenGens,
    custodian_key: VerifyingKey,
    params: ProtocolParams,
    players: HashMap<u64, PlayerRecord>,
}

impl ServiceProvider {
    /// Admit a player: the range proof must verify against the claimed band
    /// and the ciphertext digest, and the custodian must have signed the
    /// same binding.
    pub fn register(&mut self, reg: &Registration) -> Result<(), ProtocolError> {
        if self.players.contains_key(&reg.id) {
            return Err(ProtocolError::DuplicatePlayer(reg.id));
        }
        if reg.band >= elo::BAND_COUNT {
            return Err(ProtocolError::BadBand(reg.band));
        }
        let ct = Ciphertext::deserialize(&self.ctx, &reg.ciphertext)?;
        expect_fresh(&self.ctx, &ct)?;

        let digest = context_digest(&reg.ciphertext);
        let commitment: RistrettoPoint =
            reg.commitment.decompress().ok_or(PrimError::InvalidPoint)?;
        let (min, max) = band_bounds(reg.band);
        let proof = RangeProof::from_bytes(&reg.proof, range_bits(min, max))?;
        verify_range(&self.gens, &commitment, min, max, &proof_context(reg.id, &digest), &proof)?;

        self.custodian_key.verify(
            &attestation_bytes(reg.id, reg.band, &digest, &reg.commitment),
            &reg.attestation,
        )?;

        self.players.insert(
            reg.id,
            PlayerRecord {
                band: reg.band,
                ct,
                commitment: reg.commitment,
                attestation: reg.attestation,
                cnt: 0,
            },
        );
        Ok(())
    }

    /// Pick a random same-band pair with cycle headroom, if any exists.
    pub fn matchmake<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<(u64, u64)> {
        let mut by_band: HashMap<usize, Vec<u64>> = HashMap::new();
        for (id, rec) in &self.players {
            if rec.cnt < self.params.matches_per_cycle {
                by_band.entry(rec.band).or_default().push(*id);
            }
        }
        let mut bands: Vec<(usize, Vec<u64>)> =
            by_band.into_iter().filter(|(_, v)| v.len() >= 2).collect();
        if bands.is_empty() {
            return None;
        }
        bands.sort_by_key(|(b, _)| *b);
        let (_, mut ids) = bands.swap_remove(rng.random_range(0..bands.len()));
        ids.sort_unstable();
        let i = rng.random_range(0..ids.len());
        let mut j = rng.random_range(0..ids.len() - 1);
        if j >= i {
            j += 1;
        }
        Some((ids[i], ids[j]))
    }

    /// Homomorphic rating update for one match. Both new ratings come from a
    /// single expectation-curve evaluation: with E the expected score of
    /// player a, the gains are K·(s − E) for a and the exact negation for b,
    /// so only one Chebyshev pass is needed.
    pub fn homomorphic_update(
        &self,
        a: u64,
        b: u64,
        outcome: MatchOutcome,
    ) -> Result<UpdatedPair, ProtocolError> {
        if a == b {
            return Err(ProtocolError::SelfMatch(a));
        }
        let ra = self.players.get(&a).ok_or(ProtocolError::UnknownPlayer(a))?;
        let rb = self.players.get(&b).ok_or(ProtocolError::UnknownPlayer(b))?;
        if ra.band != rb.band {
            return Err(ProtocolError::NotSameBand(ra.band, rb.band));
        }
        for (id, rec) in [(a, ra), (b, rb)] {
            if rec.cnt >= self.params.matches_per_cycle {
                return Err(ProtocolError::CycleComplete(id));
            }
        }

        let (new_a, new_b) = encrypted_update(
            &self.ctx,
            &self.rlk,
            &ra.ct,
            &rb.ct,
            outcome.score_a(),
            self.params.k_factor,
        );
        Ok(UpdatedPair {
            a,
            b,
            ct_a: new_a.serialize(&self.ctx),
            ct_b: new_b.serialize(&self.ctx),
        })
    }

    /// Install the custodian-refreshed pair and advance both counters.
    pub fn install_refreshed(&mut self, pair: &RefreshedPair) -> Result<(), ProtocolError> {
        let ct_a = Ciphertext::deserialize(&self.ctx, &pair.ct_a)?;
        let ct_b = Ciphertext::deserialize(&self.ctx, &pair.ct_b)?;
        expect_fresh(&self.ctx, &ct_a)?;
        expect_fresh(&self.ctx, &ct_b)?;
        for id in [pair.a, pair.b] {
            let rec = self.players.get(&id).ok_or(ProtocolError::UnknownPlayer(id))?;
            if rec.cnt >= self.params.matches_per_cycle {
                return Err(ProtocolError::CycleComplete(id));
            }
        }
        let rec_a = self.players.get_mut(&pair.a).unwrap();
        rec_a.ct = ct_a;
        rec_a.cnt += 1;
        let rec_b = self.players.get_mut(&pair.b).unwrap();
        rec_b.ct = ct_b;
        rec_b.cnt += 1;
        Ok(())
    }

    /// Accept an end-of-cycle band certificate. The proof context pins the
    /// certificate to the ciphertext bytes this provider currently stores,
    /// the signature covers the same binding, and the player must actually
    /// have finished their cycle.
    pub fn verify_new(&mut self, cert: &BandCertificate) -> Result<usize, ProtocolError> {
        if cert.band >= elo::BAND_COUNT {
            return Err(ProtocolError::BadBand(cert.band));
        }
        let rec = self.players.get(&cert.id).ok_or(ProtocolError::UnknownPlayer(cert.id))?;
        if rec.cnt != self.params.matches_per_cycle {
            return Err(ProtocolError::CycleIncomplete {
                have: rec.cnt,
                need: self.params.matches_per_cycle,
            });
        }
        let digest = context_digest(&rec.ct.serialize(&self.ctx));
        let commitment = cert.commitment.decompress().ok_or(PrimError::InvalidPoint)?;
        let (min, max) = band_bounds(cert.band);
        let proof = RangeProof::from_bytes(&cert.proof, range_bits(min, max))?;
        verify_range(
            &self.gens,
            &commitment,
            min,
            max,
            &proof_context(cert.id, &digest),
            &proof,
        )?;
        self.custodian_key.verify(
            &attestation_bytes(cert.id, cert.band, &digest, &cert.commitment),
            &cert.attestation,
        )?;

        let rec = self.players.get_mut(&cert.id).unwrap();
        rec.band = cert.band;
        rec.commitment = cert.commitment;
        rec.attestation = cert.attestation;
        rec.cnt = 0;
        Ok(cert.band)
    }

    // ── accessors ─────────────────────────────────────────────────────────

    pub fn player_count(&self) -> usize {
        self.players.len()
    }

    pub fn player_ids(&self) -> Vec<u64> {
        let mut ids: Vec<u64> = self.players.keys().copied().collect();
        ids.sort_unstable();
        ids
    }

    pub fn band(&self, id: u64) -> Result<usize, ProtocolError> {
        Ok(self.players.get(&id).ok_or(ProtocolError::UnknownPlayer(id))?.band)
    }

    pub fn counter(&self, id: u64) -> Result<u32, ProtocolError> {
        Ok(self.players.get(&id).ok_or(ProtocolError::UnknownPlayer(id))?.cnt)
    }

    pub fn ciphertext(&self, id: u64) -> Result<&Ciphertext, ProtocolError> {
        Ok(&self.players.get(&id).ok_or(ProtocolError::UnknownPlayer(id))?.ct)
    }

    pub fn serialized_ciphertext(&self, id: u64) -> Result<Vec<u8>, ProtocolError> {
        Ok(self.ciphertext(id)?.serialize(&self.ctx))
    }

    pub fn commitment(&self, id: u64) -> Result<CompressedRistretto, ProtocolError> {
        Ok(self.players.get(&id).ok_or(ProtocolError::UnknownPlayer(id))?.commitment)
    }

    pub fn params(&self) -> &ProtocolParams {
        &self.params
    }
}

// ═══════════════════════════════════════════════════════════════════════════
// The homomorphic update itself
// ═══════════════════════════════════════════════════════════════════════════

/// One match on ciphertexts. Both inputs must be fresh (top level); the
/// outputs land at level 0 and need a custodian refresh before the next
/// match. Level budget: 1 (difference scaling) + 7 (expectation curve) +
/// 1 (gain scaling) = 9.
pub fn encrypted_update(
    ctx: &CkksContext,
    rlk: &RelinKey,
    ct_a: &Ciphertext,
    ct_b: &Ciphertext,
    score_a: f64,
    k_factor: f64,
) -> (Ciphertext, Ciphertext) {
    // u = (r_b − r_a)/400, the expectation curve's argument
    let diff = ctx.sub(ct_b, ct_a);
    let u = ctx.mul_const(&diff, elo::DIFF_SCALE);

    // E = expected score of player a, one shared curve evaluation
    let expected = ctx.eval_chebyshev(&u, expectation_coeffs(), EXPECTATION_DOMAIN, rlk);

    // gain_a = K·(s − E); player b's gain is exactly −gain_a
    let swing = ctx.add_const(&ctx.negate(&expected), score_a);
    let gain = ctx.mul_const(&swing, k_factor);

    let base_a = ctx.adjust_level(ct_a, gain.level);
    let base_b = ctx.adjust_level(ct_b, gain.level);
    (ctx.add(&base_a, &gain), ctx.sub(&base_b, &gain))
}

/// Drive one full match: check and compute at the provider, refresh at the
/// custodian, install and count at the provider.
pub fn run_match<R: Rng + ?Sized>(
    sp: &mut ServiceProvider,
    kc: &mut KeyCustodian,
    a: u64,
    b: u64,
    outcome: MatchOutcome,
    rng: &mut R,
) -> Result<(), ProtocolError> {
    let updated = sp.homomorphic_update(a, b, outcome)?;
    let refreshed = kc.refresh_match(&updated, rng)?;
    sp.install_refreshed(&refreshed)
}

// ═══════════════════════════════════════════════════════════════════════════
// Message traces
// ═══════════════════════════════════════════════════════════════════════════

/// One protocol message, recorded by size only — contents never enter the
/// trace.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TraceEvent {
    pub step: String,
    pub from: String,
    pub to: String,
    pub bytes: usize,
}

#[derive(Default, Serialize, Deserialize)]
pub struct Trace {
    pub events: Vec<TraceEvent>,
}

impl Trace {
    pub fn log(&mut self, step: &str, from: &str, to: &str, bytes: usize) {
        self.events.push(TraceEvent {
            step: step.to_string(),
            from: from.to_string(),
            to: to.to_string(),
            bytes,
        });
    }

    pub fn total_bytes(&self) -> usize {
        self.events.iter().map(|e| e.bytes).sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serialization cannot fail")
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

    /// Reduced-ring deployment: functionally identical pipeline, small
    /// enough for unit tests.
    fn deployment(seed: u64) -> (Deployment, ChaCha20Rng) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let dep = deploy(CkksConfig::battery(), ProtocolParams::default(), &mut rng)
            .expect("deploy must succeed");
        (dep, rng)
    }

    fn register_player(
        dep: &mut Deployment,
        id: u64,
        alpha: f64,
        rng: &mut ChaCha20Rng,
    ) -> Enrollment {
        let params = dep.sp.params().clone();
        let enrollment =
            enroll_user(&dep.ctx, &dep.kc.pk, &dep.kc.gens, &params, id, alpha, rng)
                .expect("enrollment must build");
        let att = dep.kc.attest(&enrollment.request).expect("custodian must attest");
        dep.sp.register(&enrollment.registration(att)).expect("provider must admit");
        enrollment
    }

    #[test]
    fn registration_round_trip_admits_honest_players() {
        let (mut dep, mut rng) = deployment(81);
        register_player(&mut dep, 1, 17.0, &mut rng);
        register_player(&mut dep, 2, -31.0, &mut rng);
        assert_eq!(dep.sp.player_count(), 2);
        assert_eq!(dep.sp.band(1).unwrap(), band_of(1517.0));
        assert_eq!(dep.sp.band(2).unwrap(), band_of(1469.0));
        assert_eq!(dep.sp.counter(1).unwrap(), 0);
    }

    #[test]
    fn match_updates_track_the_plain_oracle() {
        let (mut dep, mut rng) = deployment(82);
        register_player(&mut dep, 1, 20.0, &mut rng);
        register_player(&mut dep, 2, 35.0, &mut rng);
        let (r1, r2) = (1520.0, 1535.0);

        run_match(&mut dep.sp, &mut dep.kc, 1, 2, MatchOutcome::WinA, &mut rng)
            .expect("match must run");

        let (want1, want2) = elo::update_pair(r1, r2, 1.0);
        let got1 = dep.kc.decrypt_rating(dep.sp.ciphertext(1).unwrap());
        let got2 = dep.kc.decrypt_rating(dep.sp.ciphertext(2).unwrap());
        assert!(
            (got1 - want1).abs() < 5e-3,
            "player 1: expected {}, got {} (err {:.2e})",
            want1,
            got1,
            (got1 - want1).abs()
        );
        assert!(
            (got2 - want2).abs() < 5e-3,
            "player 2: expected {}, got {} (err {:.2e})",
            want2,
            got2,
            (got2 - want2).abs()
        );
        assert_eq!(dep.sp.counter(1).unwrap(), 1);
        assert_eq!(dep.sp.counter(2).unwrap(), 1);
    }

    #[test]
    fn counters_gate_matches_and_reattestation_resets_them() {
        let (mut dep, mut rng) = deployment(83);
        register_player(&mut dep, 1, 0.0, &mut rng);
        register_player(&mut dep, 2, 5.0, &mut rng);
        let n = dep.sp.params().matches_per_cycle;

        for i in 0..n {
            // premature re-attestation must be refused mid-cycle
            let ct = dep.sp.serialized_ciphertext(1).unwrap();
            let cert = dep.kc.reattest(1, &ct, &mut rng).unwrap();
            assert!(
                matches!(dep.sp.verify_new(&cert), Err(ProtocolError::CycleIncomplete { .. })),
                "round {}: early certificate must be refused",
                i
            );
            run_match(&mut dep.sp, &mut dep.kc, 1, 2, MatchOutcome::Draw, &mut rng).unwrap();
        }
        assert_eq!(dep.sp.counter(1).unwrap(), n);

        // cycle complete: further matches blocked until both re-attest
        let err = dep.sp.homomorphic_update(1, 2, MatchOutcome::Draw).unwrap_err();
        assert!(matches!(err, ProtocolError::CycleComplete(_)), "expected cycle gate, got {err}");

        for id in [1u64, 2] {
            let ct = dep.sp.serialized_ciphertext(id).unwrap();
            let cert = dep.kc.reattest(id, &ct, &mut rng).unwrap();
            let band = dep.sp.verify_new(&cert).expect("certificate must verify");
            assert_eq!(band, dep.sp.band(id).unwrap());
            assert_eq!(dep.sp.counter(id).unwrap(), 0, "counter must reset");
        }
        run_match(&mut dep.sp, &mut dep.kc, 1, 2, MatchOutcome::WinB, &mut rng)
            .expect("matches must resume after re-attestation");
    }

    #[test]
    fn forged_registrations_are_rejected() {
        let (mut dep, mut rng) = deployment(84);
        let params = dep.sp.params().clone();

        // band claim inconsistent with the proof
        let enr =
            enroll_user(&dep.ctx, &dep.kc.pk, &dep.kc.gens, &params, 7, 10.0, &mut rng).unwrap();
        let att = dep.kc.attest(&enr.request).unwrap();
        let mut reg = enr.registration(att);
        reg.band = 4;
        assert!(dep.sp.register(&reg).is_err(), "band mismatch must be rejected");

        // attestation from a key the provider does not trust
        let rogue = SigningKey::generate(&mut rng);
        let mut reg = enr.registration(att);
        let digest = context_digest(&reg.ciphertext);
        reg.attestation =
            rogue.sign(&attestation_bytes(7, reg.band, &digest, &reg.commitment));
        assert!(
            matches!(dep.sp.register(&reg), Err(ProtocolError::Attestation(_))),
            "rogue signature must be rejected"
        );

        // honest registration still goes through afterwards
        dep.sp.register(&enr.registration(att)).expect("honest registration must pass");
    }

    #[test]
    fn custodian_refuses_inconsistent_enrollments() {
        let (mut dep, mut rng) = deployment(85);
        let params = dep.sp.params().clone();
        let enr =
            enroll_user(&dep.ctx, &dep.kc.pk, &dep.kc.gens, &params, 3, 0.0, &mut rng).unwrap();

        // commitment opening does not match
        let mut bad = EnrollmentRequest {
            id: 3,
            band: enr.request.band,
            ciphertext: enr.request.ciphertext.clone(),
            commitment: enr.request.commitment,
            value: enr.request.value + 1,
            blinding: enr.request.blinding,
        };
        assert!(matches!(
            dep.kc.attest(&bad),
            Err(ProtocolError::ConsistencyRejected(3))
        ));

        // opening consistent but ciphertext carries a different rating
        bad.value = enr.request.value + 1;
        bad.commitment = dep.kc.gens.commit_u64(bad.value, bad.blinding).compress();
        assert!(matches!(
            dep.kc.attest(&bad),
            Err(ProtocolError::ConsistencyRejected(3))
        ));
    }

    #[test]
    fn cross_band_and_self_matches_are_refused() {
        let (mut dep, mut rng) = deployment(86);
        register_player(&mut dep, 1, 40.0, &mut rng); // 1540, band 3
        register_player(&mut dep, 2, -20.0, &mut rng); // 1480, band 2
        assert!(matches!(
            dep.sp.homomorphic_update(1, 2, MatchOutcome::Draw),
            Err(ProtocolError::NotSameBand(_, _))
        ));
        assert!(matches!(
            dep.sp.homomorphic_update(1, 1, MatchOutcome::Draw),
            Err(ProtocolError::SelfMatch(1))
        ));
        assert!(matches!(
            dep.sp.homomorphic_update(1, 99, MatchOutcome::Draw),
            Err(ProtocolError::UnknownPlayer(99))
        ));
    }

    #[test]
    fn reattestation_is_pinned_to_the_stored_ciphertext() {
        let (mut dep, mut rng) = deployment(87);
        register_player(&mut dep, 1, 0.0, &mut rng);
        let mut ct = dep.sp.serialized_ciphertext(1).unwrap();
        let last = ct.len() - 1;
        ct[last] ^= 1;
        assert!(matches!(
            dep.kc.reattest(1, &ct, &mut rng),
            Err(ProtocolError::CiphertextMismatch(1))
        ));
    }

    #[test]
    fn matchmaking_only_pairs_same_band_players_with_headroom() {
        let (mut dep, mut rng) = deployment(88);
        register_player(&mut dep, 1, 10.0, &mut rng); // band 3
        register_player(&mut dep, 2, -10.0, &mut rng); // band 2
        assert!(dep.sp.matchmake(&mut rng).is_none(), "no same-band pair exists");

        register_player(&mut dep, 3, 20.0, &mut rng); // band 3
        let (a, b) = dep.sp.matchmake(&mut rng).expect("pair must exist");
        assert_ne!(a, b);
        assert_eq!(dep.sp.band(a).unwrap(), dep.sp.band(b).unwrap());
        assert!([a, b].iter().all(|id| [1u64, 3].contains(id)), "only band-3 players pair");
    }

    #[test]
    fn enrollment_rejects_oversized_offsets() {
        let (dep, mut rng) = deployment(89);
        let params = dep.sp.params().clone();
        let err = enroll_user(&dep.ctx, &dep.kc.pk, &dep.kc.gens, &params, 1, 99.0, &mut rng)
            .unwrap_err();
        assert!(matches!(err, ProtocolError::PerturbationOutOfRange));
    }

    #[test]
    fn traces_record_sizes_only() {
        let mut trace = Trace::default();
        trace.log("register", "user", "service-provider", 12345);
        trace.log("refresh", "service-provider", "key-custodian", 678);
        assert_eq!(trace.total_bytes(), 13023);
        let json = trace.to_json();
        assert!(json.contains("\"bytes\": 12345"), "json must carry sizes: {json}");
        assert!(!json.contains("ciphertext-bytes"), "no payloads in traces");
    }
}
