//! Experiment drivers and their report formats.
//!
//! Five runs, each writing CSV/JSON artifacts named by a configuration tag:
//!
//! - [`run_accuracy`]: a long encrypted update chain played in lockstep with
//!   an independent plain rating oracle; records the running divergence and
//!   the per-update evaluation precision.
//! - [`run_bench`]: microbenchmarks of every scheme and protocol operation
//!   plus the serialized sizes of everything that crosses a role boundary.
//! - [`run_protocol_game`]: a population-scale session — many users, many
//!   re-attestation cycles — checking that the provider's recorded band
//!   always matches the custodian's master record after every certificate,
//!   and that the scripted certificate attacks are rejected without any
//!   provider state change.
//! - [`run_fairness`]: registration-level adversarial scenarios that must
//!   all be rejected, and a leak scan that searches every provider-visible
//!   byte string for encodings of the true ratings.
//! - [`run_hidden`]: a rating-hiding battery — a distinguishing game in which
//!   one of two adversary-chosen candidate ratings is registered afresh each
//!   trial and threshold distinguishers over the visible artifacts must not
//!   beat coin flipping (a plaintext control arm validates that the battery
//!   itself can detect leaks). Malformed challenges — candidates from
//!   different bands, or against a corrupted player — must be refused.

use std::collections::HashSet;
use std::fs;
use std::path::Path;
use std::time::Instant;

use aho_corasick::AhoCorasick;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::ckks::eval::clenshaw;
use crate::ckks::{CkksConfig, CkksContext};
use crate::elo;
use crate::prims::{random_scalar, PedersenGens, SigningKey};
use crate::protocol::{
    self, attestation_bytes, deploy, enroll_user, proof_context, run_match, BandCertificate,
    Deployment, MatchOutcome, ProtocolError, ProtocolParams, Trace,
};
use crate::zkrp::{band_bounds, context_digest, prove_range, verify_range};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("protocol error: {0}")]
    Protocol(#[from] ProtocolError),
}

// ═══════════════════════════════════════════════════════════════════════════
// Artifact plumbing
// ═══════════════════════════════════════════════════════════════════════════

/// Short stable tag for artifact names: `kind-label-hash8`, where the hash
/// covers the full configuration debug rendering.
pub fn config_tag(kind: &str, label: &str, detail: &str) -> String {
    let digest: [u8; 32] = Sha256::digest(detail.as_bytes()).into();
    let hex: String = digest[..4].iter().map(|b| format!("{b:02x}")).collect();
    format!("{kind}-{label}-{hex}")
}

fn write_text(path: &Path, contents: &str) -> Result<(), HarnessError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, contents)?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), HarnessError> {
    let json = serde_json::to_string_pretty(value).expect("report serialization cannot fail");
    write_text(path, &json)
}

/// Deterministic match schedule used by the accuracy and fairness runs:
/// alternating wins with a draw every fifth match, which keeps both ratings
/// oscillating near their start so a pair never drifts across a band
/// boundary mid-chain.
pub fn scheduled_outcome(i: usize) -> MatchOutcome {
    if i % 5 == 4 {
        MatchOutcome::Draw
    } else if i % 2 == 0 {
        MatchOutcome::WinA
    } else {
        MatchOutcome::WinB
    }
}

// ═══════════════════════════════════════════════════════════════════════════
// Accuracy
// ═══════════════════════════════════════════════════════════════════════════

#[derive(Clone, Debug)]
pub struct AccuracyConfig {
    pub pairs: usize,
    pub updates_per_pair: usize,
    pub seed: u64,
    pub ckks: CkksConfig,
    pub protocol: ProtocolParams,
}

impl AccuracyConfig {
    /// The desk-scale run: one pair, 1000 consecutive updates, full-size
    /// ring, three-match re-attestation cycles.
    pub fn desk() -> Self {
        AccuracyConfig {
            pairs: 1,
            updates_per_pair: 1000,
            seed: 7,
            ckks: CkksConfig::toy(),
            protocol: ProtocolParams { matches_per_cycle: 3, alpha_bound: 90.0, ..Default::default() },
        }
    }

    /// Reduced run for fast functional checks.
    pub fn smoke() -> Self {
        AccuracyConfig {
            pairs: 1,
            updates_per_pair: 6,
            seed: 7,
            ckks: CkksConfig::battery(),
            protocol: ProtocolParams { matches_per_cycle: 3, alpha_bound: 90.0, ..Default::default() },
        }
    }
}

#[derive(Debug, Serialize)]
pub struct PairSummary {
    pub id_a: u64,
    pub id_b: u64,
    pub final_encrypted_a: f64,
    pub final_oracle_a: f64,
    pub final_encrypted_b: f64,
    pub final_oracle_b: f64,
}

#[derive(Debug, Serialize)]
pub struct AccuracyReport {
    pub tag: String,
    pub pairs: usize,
    pub updates_per_pair: usize,
    pub total_updates: usize,
    /// statistics of |decrypted − oracle| across all updates and players
    pub mean_abs_error: f64,
    pub max_abs_error: f64,
    pub std_dev_abs_error: f64,
    /// per-update evaluation precision: bits of agreement between the
    /// decrypted update result and the same update computed in plain
    /// arithmetic from the previous decrypted state, −log₂(|Δ|/|reference|)
    pub precision_min_bits: f64,
    pub precision_mean_bits: f64,
    /// share of updates with at least 20 bits of evaluation precision
    pub precision_share_ge_20: f64,
    pub elapsed_secs: f64,
    pub updates_per_sec: f64,
    pub per_pair: Vec<PairSummary>,
    pub csv_path: String,
    pub json_path: String,
}

/// Bits of agreement between a measured value and its reference:
/// −log₂ of the relative error, saturated at 64 bits for exact agreement.
fn agreement_bits(got: f64, reference: f64) -> f64 {
    let rel = (got - reference).abs() / reference.abs().max(1.0);
    if rel == 0.0 {
        64.0
    } else {
        (-rel.log2()).min(64.0)
    }
}

/// Run encrypted chains against the plain oracle and record the running
/// divergence plus per-update evaluation precision. Registration is outside
/// the timed window; the window covers the full per-match protocol (update,
/// refresh, install, and due re-attestations).
///
/// Two distinct references are tracked per update:
/// - the *oracle* chain: exact ratings updated independently with the true
///   logistic curve — |decrypted − oracle| is the accuracy-drift metric;
/// - the *circuit* reference: the interpolated update evaluated in plain
///   f64 arithmetic from the previous decrypted state — agreement with it
///   isolates the homomorphic evaluation precision from the curve fit.
pub fn run_accuracy(cfg: &AccuracyConfig, out_dir: &Path) -> Result<AccuracyReport, HarnessError> {
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let Deployment { ctx, mut sp, mut kc } =
        deploy(cfg.ckks.clone(), cfg.protocol.clone(), &mut rng)?;
    let n = cfg.protocol.matches_per_cycle;
    let coeffs = elo::expectation_coeffs();
    let (dom_a, dom_b) = elo::EXPECTATION_DOMAIN;

    // enroll all pairs mid-band so the bounded drift of the scheduled
    // outcomes cannot cross a band boundary
    let mut chains: Vec<(u64, u64, f64, f64)> = Vec::new();
    for p in 0..cfg.pairs {
        let (id_a, id_b) = (2 * p as u64 + 1, 2 * p as u64 + 2);
        let (alpha_a, alpha_b) = (70.0 + 3.0 * p as f64, 85.0 + 3.0 * p as f64);
        for (id, alpha) in [(id_a, alpha_a), (id_b, alpha_b)] {
            let enr =
                enroll_user(&ctx, kc.public_key(), kc.gens(), &cfg.protocol, id, alpha, &mut rng)?;
            let att = kc.attest(&enr.request)?;
            sp.register(&enr.registration(att))?;
        }
        let start_a = (elo::INITIAL_RATING + alpha_a).floor();
        let start_b = (elo::INITIAL_RATING + alpha_b).floor();
        chains.push((id_a, id_b, start_a, start_b));
    }

    let mut csv = String::from("pair,update,err_a,err_b,precision_a,precision_b\n");
    let mut errs: Vec<f64> = Vec::with_capacity(2 * cfg.pairs * cfg.updates_per_pair);
    let mut precisions: Vec<f64> = Vec::with_capacity(2 * cfg.pairs * cfg.updates_per_pair);
    let started = Instant::now();

    for (p, (id_a, id_b, r_a, r_b)) in chains.iter_mut().enumerate() {
        // the values the ciphertexts actually hold after the last refresh
        let (mut dec_a, mut dec_b) = (*r_a, *r_b);
        for i in 0..cfg.updates_per_pair {
            let outcome = scheduled_outcome(i);
            run_match(&mut sp, &mut kc, *id_a, *id_b, outcome, &mut rng)?;
            let (na, nb) = elo::update_pair(*r_a, *r_b, outcome.score_a());
            *r_a = elo::clamp_rating(na);
            *r_b = elo::clamp_rating(nb);

            let got_a = kc.decrypt_rating(sp.ciphertext(*id_a)?);
            let got_b = kc.decrypt_rating(sp.ciphertext(*id_b)?);
            let (err_a, err_b) = ((got_a - *r_a).abs(), (got_b - *r_b).abs());

            // plain-arithmetic run of the same circuit from the same inputs
            let u = (dec_b - dec_a) * elo::DIFF_SCALE;
            let gain = elo::K_FACTOR * (outcome.score_a() - clenshaw(coeffs, dom_a, dom_b, u));
            let prec_a = agreement_bits(got_a, dec_a + gain);
            let prec_b = agreement_bits(got_b, dec_b - gain);

            csv.push_str(&format!(
                "{p},{i},{err_a:.3e},{err_b:.3e},{prec_a:.2},{prec_b:.2}\n"
            ));
            errs.extend([err_a, err_b]);
            precisions.extend([prec_a, prec_b]);
            dec_a = elo::clamp_rating(got_a);
            dec_b = elo::clamp_rating(got_b);

            // end-of-cycle re-attestation for both players of the pair
            if sp.counter(*id_a)? == n {
                for id in [*id_a, *id_b] {
                    let ct = sp.serialized_ciphertext(id)?;
                    let cert = kc.reattest(id, &ct, &mut rng)?;
                    sp.verify_new(&cert)?;
                }
            }
        }
    }

    let elapsed = started.elapsed().as_secs_f64();
    let total = cfg.pairs * cfg.updates_per_pair;
    let samples = errs.len() as f64;
    let mean = errs.iter().sum::<f64>() / samples;
    let variance = errs.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / samples;
    let per_pair = chains
        .iter()
        .map(|(id_a, id_b, r_a, r_b)| {
            Ok(PairSummary {
                id_a: *id_a,
                id_b: *id_b,
                final_encrypted_a: kc.decrypt_rating(sp.ciphertext(*id_a)?),
                final_oracle_a: *r_a,
                final_encrypted_b: kc.decrypt_rating(sp.ciphertext(*id_b)?),
                final_oracle_b: *r_b,
            })
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;

    let tag = config_tag("accuracy", &cfg.ckks.label, &format!("{cfg:?}"));
    let csv_path = out_dir.join(format!("{tag}.csv"));
    let json_path = out_dir.join(format!("{tag}.json"));
    let report = AccuracyReport {
        tag,
        pairs: cfg.pairs,
        updates_per_pair: cfg.updates_per_pair,
        total_updates: total,
        mean_abs_error: mean,
        max_abs_error: errs.iter().fold(0.0f64, |a, &b| a.max(b)),
        std_dev_abs_error: variance.sqrt(),
        precision_min_bits: precisions.iter().fold(f64::INFINITY, |a, &b| a.min(b)),
        precision_mean_bits: precisions.iter().sum::<f64>() / samples,
        precision_share_ge_20: precisions.iter().filter(|&&p| p >= 20.0).count() as f64 / samples,
        elapsed_secs: elapsed,
        updates_per_sec: total as f64 / elapsed,
        per_pair,
        csv_path: csv_path.display().to_string(),
        json_path: json_path.display().to_string(),
    };
    write_text(&csv_path, &csv)?;
    write_json(&json_path, &report)?;
    Ok(report)
}

// ═══════════════════════════════════════════════════════════════════════════
// Benchmarks
// ═══════════════════════════════════════════════════════════════════════════

/// Every benchmark row, in emission order. Asserted by test so the report
/// format cannot silently drift.
pub const BENCH_ROWS: &[&str] = &[
    "keygen",
    "encrypt",
    "decrypt",
    "eval_add",
    "eval_add_const",
    "eval_mul_plain",
    "eval_mul_const",
    "eval_mult",
    "rescale",
    "adjust_level",
    "chebyshev_deg50",
    "refresh",
    "zkrp_prove",
    "zkrp_verify",
    "schnorr_sign",
    "schnorr_verify",
    "rating_update_wo_refresh",
    "rating_update",
];

#[derive(Clone, Debug)]
pub struct BenchConfig {
    pub ckks: CkksConfig,
    pub seed: u64,
    /// iterations for sub-millisecond operations
    pub light_iters: usize,
    /// iterations for the expensive circuit-level operations
    pub heavy_iters: usize,
}

impl BenchConfig {
    pub fn desk() -> Self {
        BenchConfig { ckks: CkksConfig::toy(), seed: 11, light_iters: 10, heavy_iters: 3 }
    }

    pub fn smoke() -> Self {
        BenchConfig { ckks: CkksConfig::battery(), seed: 11, light_iters: 2, heavy_iters: 1 }
    }
}

#[derive(Debug, Serialize)]
pub struct BenchRow {
    pub op: String,
    pub iters: usize,
    pub mean_ms: f64,
    pub median_ms: f64,
    pub min_ms: f64,
    pub max_ms: f64,
}

#[derive(Debug, Serialize)]
pub struct SizeRow {
    pub object: String,
    pub bytes: usize,
}

#[derive(Debug, Serialize)]
pub struct BenchReport {
    pub tag: String,
    pub label: String,
    pub rows: Vec<BenchRow>,
    pub sizes: Vec<SizeRow>,
    pub elapsed_secs: f64,
    pub csv_path: String,
    pub json_path: String,
}

fn time_row(op: &str, iters: usize, mut f: impl FnMut()) -> BenchRow {
    let mut ms: Vec<f64> = Vec::with_capacity(iters);
    for _ in 0..iters {
        let t = Instant::now();
        f();
        ms.push(t.elapsed().as_secs_f64() * 1e3);
    }
    ms.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mean = ms.iter().sum::<f64>() / iters as f64;
    BenchRow {
        op: op.to_string(),
        iters,
        mean_ms: mean,
        median_ms: ms[iters / 2],
        min_ms: ms[0],
        max_ms: ms[iters - 1],
    }
}

pub fn run_bench(cfg: &BenchConfig, out_dir: &Path) -> Result<BenchReport, HarnessError> {
    let started = Instant::now();
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let ctx = CkksContext::new(cfg.ckks.clone());
    let (sk, pk, rlk) = ctx.keygen(&mut rng);
    let gens = PedersenGens::default();
    let signer = SigningKey::generate(&mut rng);

    // fixtures
    let top = ctx.max_level();
    let scale = ctx.scale_of(top);
    let pt_a = ctx.encode(&[1517.0], top, scale);
    let pt_b = ctx.encode(&[1585.0], top, scale);
    let ct_a = ctx.encrypt(&pk, &pt_a, &mut rng);
    let ct_b = ctx.encrypt(&pk, &pt_b, &mut rng);
    let pt_u = ctx.encode(&[0.37], top, scale);
    let ct_u = ctx.encrypt(&pk, &pt_u, &mut rng);
    let product = ctx.mul_relin(&ct_a, &ct_b, &rlk);

    let value = 1733u64;
    let blinding = random_scalar(&mut rng);
    let (min, max) = band_bounds(3);
    let commitment = gens.commit_u64(value, blinding);
    let zk_context = b"bench-context".to_vec();
    let proof =
        prove_range(&gens, value, blinding, min, max, &zk_context, &mut rng).expect("bench proof");
    let ct_digest = context_digest(&ct_a.serialize(&ctx));
    let message = attestation_bytes(1, 3, &ct_digest, &commitment.compress());
    let signature = signer.sign(&message);
    let verifier = signer.verifying_key();

    let (light, heavy) = (cfg.light_iters, cfg.heavy_iters);
    let mut rows = Vec::with_capacity(BENCH_ROWS.len());
    rows.push(time_row("keygen", heavy, || {
        let _ = ctx.keygen(&mut rng);
    }));
    rows.push(time_row("encrypt", light, || {
        let _ = ctx.encrypt(&pk, &pt_a, &mut rng);
    }));
    rows.push(time_row("decrypt", light, || {
        let _ = ctx.decrypt_values(&sk, &ct_a);
    }));
    rows.push(time_row("eval_add", light, || {
        let _ = ctx.add(&ct_a, &ct_b);
    }));
    rows.push(time_row("eval_add_const", light, || {
        let _ = ctx.add_const(&ct_a, 0.5);
    }));
    rows.push(time_row("eval_mul_plain", light, || {
        let _ = ctx.mul_plain(&ct_a, &pt_b);
    }));
    rows.push(time_row("eval_mul_const", light, || {
        let _ = ctx.mul_const(&ct_a, elo::DIFF_SCALE);
    }));
    rows.push(time_row("eval_mult", light, || {
        let _ = ctx.mul_relin_rescale(&ct_a, &ct_b, &rlk);
    }));
    rows.push(time_row("rescale", light, || {
        let _ = ctx.rescale(&product);
    }));
    rows.push(time_row("adjust_level", light, || {
        let _ = ctx.adjust_level(&ct_a, 0);
    }));
    rows.push(time_row("chebyshev_deg50", heavy, || {
        let _ = ctx.eval_chebyshev(&ct_u, elo::expectation_coeffs(), elo::EXPECTATION_DOMAIN, &rlk);
    }));
    rows.push(time_row("refresh", light, || {
        let _ = ctx.refresh(&sk, &pk, &ct_a, &mut rng);
    }));
    rows.push(time_row("zkrp_prove", light, || {
        let _ = prove_range(&gens, value, blinding, min, max, &zk_context, &mut rng).unwrap();
    }));
    rows.push(time_row("zkrp_verify", light, || {
        verify_range(&gens, &commitment, min, max, &zk_context, &proof).unwrap();
    }));
    rows.push(time_row("schnorr_sign", light, || {
        let _ = signer.sign(&message);
    }));
    rows.push(time_row("schnorr_verify", light, || {
        verifier.verify(&message, &signature).unwrap();
    }));
    rows.push(time_row("rating_update_wo_refresh", heavy, || {
        let _ = protocol::encrypted_update(&ctx, &rlk, &ct_a, &ct_b, 1.0, elo::K_FACTOR);
    }));
    rows.push(time_row("rating_update", heavy, || {
        let (na, nb) = protocol::encrypted_update(&ctx, &rlk, &ct_a, &ct_b, 1.0, elo::K_FACTOR);
        let _ = ctx.refresh(&sk, &pk, &na, &mut rng);
        let _ = ctx.refresh(&sk, &pk, &nb, &mut rng);
    }));

    // serialized sizes of everything that crosses a role boundary
    let ct_fresh = ct_a.serialize(&ctx).len();
    let (out_a, _) = protocol::encrypted_update(&ctx, &rlk, &ct_a, &ct_b, 1.0, elo::K_FACTOR);
    let ct_output = out_a.serialize(&ctx).len();
    let proof_bytes = proof.to_bytes().len();
    let sizes = vec![
        SizeRow { object: "secret_key".into(), bytes: sk.serialize(&ctx).len() },
        SizeRow { object: "public_key".into(), bytes: pk.serialize(&ctx).len() },
        SizeRow { object: "relin_key".into(), bytes: rlk.serialize(&ctx).len() },
        SizeRow { object: "ciphertext_fresh".into(), bytes: ct_fresh },
        SizeRow { object: "ciphertext_post_update".into(), bytes: ct_output },
        SizeRow { object: "commitment".into(), bytes: 32 },
        SizeRow { object: "signature".into(), bytes: 64 },
        SizeRow { object: "range_proof".into(), bytes: proof_bytes },
        SizeRow { object: "registration_message".into(), bytes: 8 + 1 + ct_fresh + 32 + proof_bytes + 64 },
        SizeRow { object: "refresh_request_pair".into(), bytes: 16 + 2 * ct_output },
        SizeRow { object: "refresh_response_pair".into(), bytes: 16 + 2 * ct_fresh },
        SizeRow { object: "band_certificate".into(), bytes: 8 + 1 + 32 + proof_bytes + 64 },
    ];

    let mut csv = String::from("op,iters,mean_ms,median_ms,min_ms,max_ms\n");
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{:.4},{:.4},{:.4},{:.4}\n",
            r.op, r.iters, r.mean_ms, r.median_ms, r.min_ms, r.max_ms
        ));
    }
    let mut sizes_csv = String::from("object,bytes\n");
    for s in &sizes {
        sizes_csv.push_str(&format!("{},{}\n", s.object, s.bytes));
    }

    let tag = config_tag("bench", &cfg.ckks.label, &format!("{cfg:?}"));
    let csv_path = out_dir.join(format!("{tag}.csv"));
    let sizes_path = out_dir.join(format!("{tag}-sizes.csv"));
    let json_path = out_dir.join(format!("{tag}.json"));
    let report = BenchReport {
        tag,
        label: cfg.ckks.label.clone(),
        rows,
        sizes,
        elapsed_secs: started.elapsed().as_secs_f64(),
        csv_path: csv_path.display().to_string(),
        json_path: json_path.display().to_string(),
    };
    write_text(&csv_path, &csv)?;
    write_text(&sizes_path, &sizes_csv)?;
    write_json(&json_path, &report)?;
    Ok(report)
}

// ═══════════════════════════════════════════════════════════════════════════
// Population protocol game
// ═══════════════════════════════════════════════════════════════════════════

#[derive(Clone, Debug)]
pub struct ProtocolGameConfig {
    pub ckks: CkksConfig,
    pub protocol: ProtocolParams,
    pub seed: u64,
    /// players in the honest population (same band)
    pub users: usize,
    /// matches each player takes part in
    pub matches_per_user: usize,
}

impl ProtocolGameConfig {
    /// Population run: 100 users, 20 matches each (so ~6 re-attestation
    /// cycles per user), full-size ring.
    pub fn desk() -> Self {
        ProtocolGameConfig {
            ckks: CkksConfig::toy(),
            protocol: ProtocolParams { matches_per_cycle: 3, alpha_bound: 150.0, ..Default::default() },
            seed: 19,
            users: 100,
            matches_per_user: 20,
        }
    }

    pub fn smoke() -> Self {
        ProtocolGameConfig {
            ckks: CkksConfig::battery(),
            users: 6,
            matches_per_user: 4,
            ..Self::desk()
        }
    }
}

#[derive(Debug, Serialize)]
pub struct GameReport {
    pub tag: String,
    pub users: usize,
    pub matches_played: usize,
    /// accepted end-of-cycle certificates in the honest session
    pub certificates_accepted: usize,
    /// after every accepted certificate: does the provider's recorded band
    /// equal the band of the custodian's decrypted master rating?
    pub rank_checks: usize,
    pub rank_mismatches: usize,
    pub attacks: Vec<ScenarioResult>,
    pub all_rejected: bool,
    /// every rejected attack left the provider's record untouched
    pub state_preserved: bool,
    /// an honest certificate still passes after all attacks
    pub recovered_after_attacks: bool,
    pub pass: bool,
    pub elapsed_secs: f64,
    pub csv_path: String,
    pub json_path: String,
}

/// Provider-side record fingerprint used to prove rejected requests have no
/// side effects.
#[derive(PartialEq, Eq, Debug)]
struct RecordFingerprint {
    band: usize,
    cnt: u32,
    commitment: [u8; 32],
    ct_digest: [u8; 32],
}

fn fingerprint(
    sp: &protocol::ServiceProvider,
    id: u64,
) -> Result<RecordFingerprint, ProtocolError> {
    Ok(RecordFingerprint {
        band: sp.band(id)?,
        cnt: sp.counter(id)?,
        commitment: *sp.commitment(id)?.as_bytes(),
        ct_digest: context_digest(&sp.serialized_ciphertext(id)?),
    })
}

/// Population-scale honest session plus scripted certificate attacks.
///
/// The honest session enrolls `users` players into one band and plays
/// `matches_per_user` rounds of random same-band pairings. Whenever a
/// player's cycle counter fills, the custodian re-attests and the provider
/// verifies; after every accepted certificate the driver cross-checks the
/// provider's recorded band against the band of the custodian's decrypted
/// master rating. Outcomes are mean-reverting (the lower-rated player wins,
/// with a draw every fifth match) so the whole population stays inside its
/// starting band.
///
/// The attack script then stages five certificate-layer forgeries — a
/// signature from an untrusted key, a certificate replayed across users, a
/// proof transplanted from another band, a certificate for a superseded
/// ciphertext, and a certificate presented before the cycle is complete —
/// each of which must be rejected without any provider state change.
pub fn run_protocol_game(
    cfg: &ProtocolGameConfig,
    out_dir: &Path,
) -> Result<GameReport, HarnessError> {
    let started = Instant::now();
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let Deployment { ctx, mut sp, mut kc } =
        deploy(cfg.ckks.clone(), cfg.protocol.clone(), &mut rng)?;
    let n = cfg.protocol.matches_per_cycle;

    // ── honest population, all in one band ────────────────────────────────
    let mut ids: Vec<u64> = (1..=cfg.users as u64).collect();
    let mut oracle: std::collections::HashMap<u64, f64> = std::collections::HashMap::new();
    for (i, &id) in ids.iter().enumerate() {
        let alpha = 51.0 + ((i * 7) % 88) as f64; // ratings 1551..=1638
        let enr = enroll_user(&ctx, kc.public_key(), kc.gens(), &cfg.protocol, id, alpha, &mut rng)?;
        let att = kc.attest(&enr.request)?;
        sp.register(&enr.registration(att))?;
        oracle.insert(id, (elo::INITIAL_RATING + alpha).floor());
    }

    let mut matches_played = 0usize;
    let mut certificates_accepted = 0usize;
    let mut rank_checks = 0usize;
    let mut rank_mismatches = 0usize;

    let settle = |sp: &mut protocol::ServiceProvider,
                      kc: &mut protocol::KeyCustodian,
                      rng: &mut ChaCha20Rng,
                      id: u64|
     -> Result<(usize, usize, usize), HarnessError> {
        if sp.counter(id)? < n {
            return Ok((0, 0, 0));
        }
        let ct = sp.serialized_ciphertext(id)?;
        let cert = kc.reattest(id, &ct, rng)?;
        sp.verify_new(&cert)?;
        // master-record consistency: provider band vs custodian decryption
        let master = elo::clamp_rating(kc.decrypt_rating(sp.ciphertext(id)?));
        let mismatch = usize::from(sp.band(id)? != elo::band_of(master));
        Ok((1, 1, mismatch))
    };

    for _round in 0..cfg.matches_per_user {
        ids.shuffle(&mut rng);
        for pair in ids.chunks_exact(2) {
            let (a, b) = (pair[0], pair[1]);
            let m = matches_played;
            let outcome = if m % 5 == 4 {
                MatchOutcome::Draw
            } else if oracle[&a] <= oracle[&b] {
                MatchOutcome::WinA
            } else {
                MatchOutcome::WinB
            };
            run_match(&mut sp, &mut kc, a, b, outcome, &mut rng)?;
            matches_played += 1;
            let (na, nb) = elo::update_pair(oracle[&a], oracle[&b], outcome.score_a());
            oracle.insert(a, elo::clamp_rating(na));
            oracle.insert(b, elo::clamp_rating(nb));
            for id in [a, b] {
                let (certs, checks, mismatches) = settle(&mut sp, &mut kc, &mut rng, id)?;
                certificates_accepted += certs;
                rank_checks += checks;
                rank_mismatches += mismatches;
            }
        }
    }

    // ── attack staging ────────────────────────────────────────────────────
    // fresh players with hand-driven cycles so counters sit exactly where
    // each attack needs them
    for (id, alpha) in [
        (9000u64, 60.0),
        (9001, 75.0),
        (9002, 58.0),
        (9003, 73.0),
        (9004, 62.0),
        (9005, 77.0),
        (9100, -40.0), // rating 1460: the band below, proof donor
    ] {
        let enr = enroll_user(&ctx, kc.public_key(), kc.gens(), &cfg.protocol, id, alpha, &mut rng)?;
        let att = kc.attest(&enr.request)?;
        sp.register(&enr.registration(att))?;
    }
    for m in 0..n as usize {
        run_match(&mut sp, &mut kc, 9000, 9001, scheduled_outcome(m), &mut rng)?;
    }
    let base_cert = kc.reattest(9000, &sp.serialized_ciphertext(9000)?, &mut rng)?;
    let donor_cert = kc.reattest(9100, &sp.serialized_ciphertext(9100)?, &mut rng)?;

    let mut attacks: Vec<ScenarioResult> = Vec::new();
    let mut state_preserved = true;
    let mut attempt = |sp: &mut protocol::ServiceProvider,
                       name: &str,
                       victim: u64,
                       cert: &BandCertificate|
     -> Result<(), HarnessError> {
        let before = fingerprint(sp, victim)?;
        let outcome = sp.verify_new(cert);
        let (rejected, detail) = match outcome {
            Err(e) => (true, format!("rejected: {e}")),
            Ok(_) => (false, "accepted — protocol violation".to_string()),
        };
        state_preserved &= fingerprint(sp, victim)? == before;
        attacks.push(ScenarioResult { name: name.to_string(), rejected, detail });
        Ok(())
    };

    // 1. certificate signed by a key the provider does not trust
    let rogue = SigningKey::generate(&mut rng);
    let mut cert = base_cert.clone();
    let digest = context_digest(&sp.serialized_ciphertext(9000)?);
    cert.attestation =
        rogue.sign(&attestation_bytes(cert.id, cert.band, &digest, &cert.commitment));
    attempt(&mut sp, "forged-signature", 9000, &cert)?;

    // 2. another player's certificate presented under a different identity
    let mut cert = base_cert.clone();
    cert.id = 9001;
    attempt(&mut sp, "cross-user-replay", 9001, &cert)?;

    // 3. proof transplanted from a certificate for a different band
    let mut cert = base_cert.clone();
    cert.proof = donor_cert.proof.clone();
    attempt(&mut sp, "out-of-band-proof", 9000, &cert)?;

    // 4. certificate for a ciphertext that a later match superseded
    for m in 0..n as usize - 1 {
        run_match(&mut sp, &mut kc, 9002, 9003, scheduled_outcome(m), &mut rng)?;
    }
    let stale_cert = kc.reattest(9002, &sp.serialized_ciphertext(9002)?, &mut rng)?;
    run_match(&mut sp, &mut kc, 9002, 9003, MatchOutcome::Draw, &mut rng)?;
    attempt(&mut sp, "stale-certificate", 9002, &stale_cert)?;

    // 5. certificate presented before the cycle is complete
    run_match(&mut sp, &mut kc, 9004, 9005, MatchOutcome::WinA, &mut rng)?;
    let early_cert = kc.reattest(9004, &sp.serialized_ciphertext(9004)?, &mut rng)?;
    attempt(&mut sp, "early-certificate", 9004, &early_cert)?;

    // the honest path must still work after the attack barrage
    let fresh = kc.reattest(9000, &sp.serialized_ciphertext(9000)?, &mut rng)?;
    let recovered = sp.verify_new(&fresh).is_ok() && sp.counter(9000)? == 0;

    let all_rejected = attacks.iter().all(|s| s.rejected);
    let pass = rank_mismatches == 0
        && rank_checks > 0
        && all_rejected
        && state_preserved
        && recovered;

    let mut csv = String::from("id,band,counter,final_rating,oracle_rating\n");
    for id in sp.player_ids() {
        let dec = kc.decrypt_rating(sp.ciphertext(id)?);
        let oracle_r = oracle.get(&id).copied().unwrap_or(f64::NAN);
        csv.push_str(&format!(
            "{id},{},{},{dec:.3},{oracle_r:.3}\n",
            sp.band(id)?,
            sp.counter(id)?
        ));
    }

    let tag = config_tag("game", &cfg.ckks.label, &format!("{cfg:?}"));
    let csv_path = out_dir.join(format!("{tag}.csv"));
    let json_path = out_dir.join(format!("{tag}.json"));
    let report = GameReport {
        tag,
        users: cfg.users,
        matches_played,
        certificates_accepted,
        rank_checks,
        rank_mismatches,
        attacks,
        all_rejected,
        state_preserved,
        recovered_after_attacks: recovered,
        pass,
        elapsed_secs: started.elapsed().as_secs_f64(),
        csv_path: csv_path.display().to_string(),
        json_path: json_path.display().to_string(),
    };
    write_text(&csv_path, &csv)?;
    write_json(&json_path, &report)?;
    Ok(report)
}

// ═══════════════════════════════════════════════════════════════════════════
// Fairness game
// ═══════════════════════════════════════════════════════════════════════════

#[derive(Clone, Debug)]
pub struct FairnessConfig {
    pub ckks: CkksConfig,
    pub protocol: ProtocolParams,
    pub seed: u64,
    /// honest players in the traced session (same band, ≥ 2)
    pub players: usize,
    /// honest matches in the traced session
    pub matches: usize,
}

impl FairnessConfig {
    pub fn desk() -> Self {
        FairnessConfig {
            ckks: CkksConfig::toy(),
            protocol: ProtocolParams { matches_per_cycle: 3, alpha_bound: 90.0, ..Default::default() },
            seed: 13,
            players: 4,
            matches: 6,
        }
    }

    pub fn smoke() -> Self {
        FairnessConfig { ckks: CkksConfig::battery(), ..Self::desk() }
    }
}

#[derive(Debug, Serialize)]
pub struct ScenarioResult {
    pub name: String,
    pub rejected: bool,
    pub detail: String,
}

#[derive(Debug, Serialize)]
pub struct LeakScan {
    pub messages: usize,
    pub bytes_scanned: usize,
    pub needles: usize,
    pub hits: usize,
}

#[derive(Debug, Serialize)]
pub struct FairnessReport {
    pub tag: String,
    pub scenarios: Vec<ScenarioResult>,
    pub all_rejected: bool,
    pub scan: LeakScan,
    pub pass: bool,
    pub elapsed_secs: f64,
    pub trace_path: String,
    pub json_path: String,
}

pub fn run_fairness(cfg: &FairnessConfig, out_dir: &Path) -> Result<FairnessReport, HarnessError> {
    let started = Instant::now();
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let Deployment { ctx, mut sp, mut kc } =
        deploy(cfg.ckks.clone(), cfg.protocol.clone(), &mut rng)?;
    let n = cfg.protocol.matches_per_cycle;

    // ── honest traced session: collect every provider-visible byte string ──
    let mut trace = Trace::default();
    let mut corpus: Vec<Vec<u8>> = Vec::new();
    let mut oracle: Vec<f64> = Vec::new();
    let mut needles: HashSet<Vec<u8>> = HashSet::new();
    let ids: Vec<u64> = (1..=cfg.players as u64).collect();

    for (i, &id) in ids.iter().enumerate() {
        let alpha = 60.0 + 7.0 * i as f64; // everyone lands mid-band together
        let enr = enroll_user(&ctx, kc.public_key(), kc.gens(), &cfg.protocol, id, alpha, &mut rng)?;
        let att = kc.attest(&enr.request)?;
        let reg = enr.registration(att);
        trace.log("register", "user", "service-provider", reg.total_bytes());
        corpus.push(reg.ciphertext.clone());
        corpus.push(reg.commitment.as_bytes().to_vec());
        corpus.push(reg.proof.clone());
        corpus.push(reg.attestation.to_bytes().to_vec());
        sp.register(&reg)?;
        oracle.push((elo::INITIAL_RATING + alpha).floor());
    }

    let note_needles = |needles: &mut HashSet<Vec<u8>>, r: f64| {
        needles.insert(r.to_le_bytes().to_vec());
        needles.insert((r.floor() as u64).to_le_bytes().to_vec());
        needles.insert(format!("{}", r.floor() as i64).into_bytes());
    };
    for &r in &oracle {
        note_needles(&mut needles, r);
    }

    for m in 0..cfg.matches {
        let (ia, ib) = (m % cfg.players, (m + 1) % cfg.players);
        let (a, b) = (ids[ia], ids[ib]);
        for &id in &[a, b] {
            if sp.counter(id)? == n {
                let ct = sp.serialized_ciphertext(id)?;
                let cert = kc.reattest(id, &ct, &mut rng)?;
                trace.log("band-certificate", "key-custodian", "service-provider", cert.total_bytes());
                corpus.push(cert.commitment.as_bytes().to_vec());
                corpus.push(cert.proof.clone());
                corpus.push(cert.attestation.to_bytes().to_vec());
                sp.verify_new(&cert)?;
            }
        }
        let outcome = scheduled_outcome(m);
        let upd = sp.homomorphic_update(a, b, outcome)?;
        trace.log("update-refresh-request", "service-provider", "key-custodian", upd.total_bytes());
        corpus.push(upd.ct_a.clone());
        corpus.push(upd.ct_b.clone());
        let refreshed = kc.refresh_match(&upd, &mut rng)?;
        trace.log("refresh-response", "key-custodian", "service-provider", refreshed.total_bytes());
        corpus.push(refreshed.ct_a.clone());
        corpus.push(refreshed.ct_b.clone());
        sp.install_refreshed(&refreshed)?;

        let (na, nb) = elo::update_pair(oracle[ia], oracle[ib], outcome.score_a());
        oracle[ia] = na;
        oracle[ib] = nb;
        note_needles(&mut needles, na);
        note_needles(&mut needles, nb);
    }

    let bytes_scanned: usize = corpus.iter().map(|m| m.len()).sum();
    let searcher = AhoCorasick::new(&needles).expect("needle set is small and valid");
    let hits: usize = corpus.iter().map(|msg| searcher.find_iter(msg).count()).sum();
    let scan = LeakScan { messages: corpus.len(), bytes_scanned, needles: needles.len(), hits };

    // ── adversarial scenarios: every one must be rejected ─────────────────
    let mut scenarios = Vec::new();
    let mut record = |name: &str, result: Result<(), ProtocolError>| {
        let (rejected, detail) = match result {
            Err(e) => (true, format!("rejected: {e}")),
            Ok(()) => (false, "accepted — protocol violation".to_string()),
        };
        scenarios.push(ScenarioResult { name: name.to_string(), rejected, detail });
    };

    // 1. claiming a band the committed rating is not in
    let enr = enroll_user(&ctx, kc.public_key(), kc.gens(), &cfg.protocol, 101, 40.0, &mut rng)?;
    let att = kc.attest(&enr.request)?;
    let mut reg = enr.registration(att);
    reg.band = 4;
    record("band-overclaim", sp.register(&reg));

    // 2. bit-flipped range proof
    let mut reg = enr.registration(att);
    let mid = reg.proof.len() / 2;
    reg.proof[mid] ^= 0x20;
    record("tampered-proof", sp.register(&reg));

    // 3. attestation signed by a key the provider does not trust
    let rogue = SigningKey::generate(&mut rng);
    let mut reg = enr.registration(att);
    let digest = context_digest(&reg.ciphertext);
    reg.attestation = rogue.sign(&attestation_bytes(reg.id, reg.band, &digest, &reg.commitment));
    record("rogue-custodian", sp.register(&reg));

    // 4. replaying another player's registration under a new identity
    let mut reg = enr.registration(att);
    reg.id = 999;
    record("replayed-registration", sp.register(&reg));

    // 5. playing past the end of the re-attestation cycle
    for (id, alpha) in [(102u64, 55.0), (103u64, 65.0)] {
        let enr = enroll_user(&ctx, kc.public_key(), kc.gens(), &cfg.protocol, id, alpha, &mut rng)?;
        let att = kc.attest(&enr.request)?;
        sp.register(&enr.registration(att))?;
    }
    for m in 0..n as usize {
        run_match(&mut sp, &mut kc, 102, 103, scheduled_outcome(m), &mut rng)?;
    }
    record(
        "cycle-overrun",
        sp.homomorphic_update(102, 103, MatchOutcome::Draw).map(|_| ()),
    );

    let all_rejected = scenarios.iter().all(|s| s.rejected);
    let pass = all_rejected && scan.hits == 0;
    let tag = config_tag("fairness", &cfg.ckks.label, &format!("{cfg:?}"));
    let trace_path = out_dir.join(format!("{tag}-trace.json"));
    let json_path = out_dir.join(format!("{tag}.json"));
    let report = FairnessReport {
        tag,
        scenarios,
        all_rejected,
        scan,
        pass,
        elapsed_secs: started.elapsed().as_secs_f64(),
        trace_path: trace_path.display().to_string(),
        json_path: json_path.display().to_string(),
    };
    write_text(&trace_path, &trace.to_json())?;
    write_json(&json_path, &report)?;
    Ok(report)
}

// ═══════════════════════════════════════════════════════════════════════════
// Rating-hiding battery
// ═══════════════════════════════════════════════════════════════════════════

#[derive(Clone, Debug)]
pub struct HiddenConfig {
    pub ckks: CkksConfig,
    pub trials: usize,
    pub seed: u64,
    pub band: usize,
}

impl HiddenConfig {
    /// Full battery: 10⁴ trials on the reduced ring (the battery examines
    /// output statistics, not security margins, so the small ring is the
    /// right cost/shape trade).
    pub fn desk() -> Self {
        HiddenConfig { ckks: CkksConfig::battery(), trials: 10_000, seed: 17, band: 3 }
    }

    pub fn smoke() -> Self {
        HiddenConfig { trials: 400, ..Self::desk() }
    }
}

#[derive(Debug, Serialize)]
pub struct FeatureResult {
    pub name: String,
    pub accuracy: f64,
    pub advantage: f64,
}

#[derive(Debug, Serialize)]
pub struct HiddenReport {
    pub tag: String,
    pub trials: usize,
    pub band: usize,
    /// acceptance bound on the distinguishing advantage: 3σ of a fair coin
    /// over the held-out sample size
    pub bound: f64,
    pub sanity_accuracy: f64,
    pub max_advantage: f64,
    pub features: Vec<FeatureResult>,
    /// artifact shapes (lengths, levels) never depended on the hidden bit
    pub shapes_ok: bool,
    /// a challenge whose candidates lie in different bands was refused
    pub cross_band_refused: bool,
    /// a challenge against a corrupted player was refused
    pub corrupt_refused: bool,
    /// binary encodings of the candidate ratings never appear in any
    /// provider-visible artifact
    pub scan: LeakScan,
    pub pass: bool,
    pub elapsed_secs: f64,
    pub csv_path: String,
    pub json_path: String,
}

/// An honest challenger accepts a challenge only if both candidate ratings
/// sit in the same band and the challenged player is not corrupted — the
/// hiding claim covers the rating inside a band, not band membership itself,
/// and corrupted players have no secrets left to protect.
fn challenge_guard(r0: u64, r1: u64, target_corrupted: bool) -> Result<(), &'static str> {
    if target_corrupted {
        return Err("challenged player is corrupted");
    }
    if elo::band_of(r0 as f64) != elo::band_of(r1 as f64) {
        return Err("candidate ratings lie in different bands");
    }
    Ok(())
}

/// Threshold distinguisher: learn a midpoint threshold on the first half,
/// report accuracy on the second half. Degenerate (constant) features fall
/// back to always guessing 0.
fn threshold_accuracy(bits: &[bool], feature: &[f64]) -> f64 {
    let half = bits.len() / 2;
    let (train_b, eval_b) = bits.split_at(half);
    let (train_f, eval_f) = feature.split_at(half);

    let (mut sum0, mut n0, mut sum1, mut n1) = (0.0, 0usize, 0.0, 0usize);
    for (&b, &f) in train_b.iter().zip(train_f) {
        if b {
            sum1 += f;
            n1 += 1;
        } else {
            sum0 += f;
            n0 += 1;
        }
    }
    if n0 == 0 || n1 == 0 {
        return 0.5;
    }
    let (m0, m1) = (sum0 / n0 as f64, sum1 / n1 as f64);
    let thr = (m0 + m1) / 2.0;
    let ones_above = m1 > m0;

    let mut correct = 0usize;
    for (&b, &f) in eval_b.iter().zip(eval_f) {
        let guess = if ones_above { f > thr } else { f < thr };
        if guess == b {
            correct += 1;
        }
    }
    correct as f64 / eval_b.len() as f64
}

fn byte_mean(bytes: &[u8]) -> f64 {
    bytes.iter().map(|&b| b as f64).sum::<f64>() / bytes.len() as f64
}

fn bit_density(bytes: &[u8]) -> f64 {
    bytes.iter().map(|&b| b.count_ones() as f64).sum::<f64>() / (8.0 * bytes.len() as f64)
}

pub fn run_hidden(cfg: &HiddenConfig, out_dir: &Path) -> Result<HiddenReport, HarnessError> {
    let started = Instant::now();
    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let ctx = CkksContext::new(cfg.ckks.clone());
    let (_sk, pk, _rlk) = ctx.keygen(&mut rng);
    let gens = PedersenGens::default();
    let (min, max) = band_bounds(cfg.band);
    let top = ctx.max_level();
    let scale = ctx.scale_of(top);

    // adversary-chosen candidate pair: the band extremes, the most
    // distinguishable pair any leak could hope for
    let (r0, r1) = (min, max);
    challenge_guard(r0, r1, false).expect("band extremes form a valid challenge");

    // malformed challenges must be refused: candidates straddling a band
    // boundary, and a challenge against a corrupted player
    let outside = band_bounds((cfg.band + 1) % elo::BAND_COUNT).1;
    let cross_band_refused = challenge_guard(r0, outside, false).is_err();
    let corrupt_refused = challenge_guard(r0, r1, true).is_err();

    // leak scan: fixed-width binary encodings of both candidates, searched
    // in every provider-visible artifact as it is produced (textual
    // encodings are covered by the fairness-run scan, where artifacts are
    // structured rather than uniformly random)
    let needles: Vec<Vec<u8>> = [r0, r1]
        .iter()
        .flat_map(|&r| {
            [r.to_le_bytes().to_vec(), (r as f64).to_le_bytes().to_vec()]
        })
        .collect();
    let searcher = AhoCorasick::new(&needles).expect("needle set is small and valid");
    let mut scan = LeakScan { messages: 0, bytes_scanned: 0, needles: needles.len(), hits: 0 };
    let scan_artifact = |scan: &mut LeakScan, bytes: &[u8]| {
        scan.messages += 1;
        scan.bytes_scanned += bytes.len();
        scan.hits += searcher.find_iter(bytes).count();
    };

    const FEATURES: &[&str] = &[
        "plain_value_sanity",
        "ciphertext_byte_mean",
        "ciphertext_bit_density",
        "commitment_byte_mean",
        "commitment_first_byte",
        "proof_byte_mean",
    ];
    let mut bits: Vec<bool> = Vec::with_capacity(cfg.trials);
    let mut features: Vec<Vec<f64>> = vec![Vec::with_capacity(cfg.trials); FEATURES.len()];
    let mut shapes_ok = true;
    let (mut ct_len, mut proof_len) = (0usize, 0usize);

    for trial in 0..cfg.trials {
        let bit = rng.random::<bool>();
        let v = if bit { r1 } else { r0 };

        let pt = ctx.encode(&[v as f64], top, scale);
        let ct = ctx.encrypt(&pk, &pt, &mut rng);
        let ct_bytes = ct.serialize(&ctx);
        let blinding = random_scalar(&mut rng);
        let commitment = gens.commit_u64(v, blinding).compress();
        let digest = context_digest(&ct_bytes);
        let proof = prove_range(
            &gens,
            v,
            blinding,
            min,
            max,
            &proof_context(trial as u64, &digest),
            &mut rng,
        )
        .expect("in-band value must prove")
        .to_bytes();

        // nothing about the artifact shape may depend on the value
        if trial == 0 {
            ct_len = ct_bytes.len();
            proof_len = proof.len();
        }
        shapes_ok &= ct_bytes.len() == ct_len && proof.len() == proof_len && ct.level == top;

        scan_artifact(&mut scan, &ct_bytes);
        scan_artifact(&mut scan, commitment.as_bytes());
        scan_artifact(&mut scan, &proof);

        bits.push(bit);
        features[0].push(v as f64);
        features[1].push(byte_mean(&ct_bytes));
        features[2].push(bit_density(&ct_bytes));
        features[3].push(byte_mean(commitment.as_bytes()));
        features[4].push(commitment.as_bytes()[0] as f64);
        features[5].push(byte_mean(&proof));
    }

    let results: Vec<FeatureResult> = FEATURES
        .iter()
        .zip(&features)
        .map(|(name, f)| {
            let accuracy = threshold_accuracy(&bits, f);
            FeatureResult {
                name: name.to_string(),
                accuracy,
                advantage: (accuracy - 0.5).abs(),
            }
        })
        .collect();
    let sanity_accuracy = results[0].accuracy;
    let max_advantage = results[1..]
        .iter()
        .map(|r| r.advantage)
        .fold(0.0f64, f64::max);
    let n_eval = (cfg.trials - cfg.trials / 2) as f64;
    let bound = 3.0 * 0.5 / n_eval.sqrt();
    let pass = shapes_ok
        && cross_band_refused
        && corrupt_refused
        && scan.hits == 0
        && sanity_accuracy >= 0.95
        && max_advantage <= bound;

    let mut csv = String::from("feature,accuracy,advantage\n");
    for r in &results {
        csv.push_str(&format!("{},{:.5},{:.5}\n", r.name, r.accuracy, r.advantage));
    }
    let tag = config_tag("hidden", &cfg.ckks.label, &format!("{cfg:?}"));
    let csv_path = out_dir.join(format!("{tag}.csv"));
    let json_path = out_dir.join(format!("{tag}.json"));
    let report = HiddenReport {
        tag,
        trials: cfg.trials,
        band: cfg.band,
        bound,
        sanity_accuracy,
        max_advantage,
        features: results,
        shapes_ok,
        cross_band_refused,
        corrupt_refused,
        scan,
        pass,
        elapsed_secs: started.elapsed().as_secs_f64(),
        csv_path: csv_path.display().to_string(),
        json_path: json_path.display().to_string(),
    };
    write_text(&csv_path, &csv)?;
    write_json(&json_path, &report)?;
    Ok(report)
}

// ═══════════════════════════════════════════════════════════════════════════
// Tests
// ═══════════════════════════════════════════════════════════════════════════

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::TempDir;

    #[test]
    fn accuracy_smoke_tracks_the_oracle() {
        let dir = TempDir::new().expect("tempdir");
        let report = run_accuracy(&AccuracyConfig::smoke(), dir.path()).expect("run must succeed");
        assert_eq!(report.total_updates, 6);
        assert!(
            report.mean_abs_error < 5e-3,
            "mean error too large: {:.2e}",
            report.mean_abs_error
        );
        assert!(report.max_abs_error >= report.mean_abs_error);
        assert!(report.std_dev_abs_error >= 0.0);
        assert!(
            report.precision_min_bits > 15.0,
            "evaluation precision collapsed: {:.1} bits",
            report.precision_min_bits
        );
        assert!(Path::new(&report.csv_path).exists(), "csv artifact missing");
        assert!(Path::new(&report.json_path).exists(), "json artifact missing");
        let csv = fs::read_to_string(&report.csv_path).unwrap();
        assert_eq!(csv.lines().count(), 1 + 6, "one header plus one row per update");
        assert!(csv.starts_with("pair,update,err_a,err_b,precision_a,precision_b"));
    }

    #[test]
    fn protocol_game_smoke_checks_ranks_and_rejects_attacks() {
        let dir = TempDir::new().expect("tempdir");
        let report =
            run_protocol_game(&ProtocolGameConfig::smoke(), dir.path()).expect("run must succeed");
        assert_eq!(report.matches_played, 6 / 2 * 4, "three pairings per round, four rounds");
        assert!(report.rank_checks > 0, "cycles must complete during the session");
        assert_eq!(report.rank_mismatches, 0, "provider band must track the master record");
        assert_eq!(report.attacks.len(), 5, "five certificate attacks");
        for a in &report.attacks {
            assert!(a.rejected, "attack {} must be rejected: {}", a.name, a.detail);
        }
        assert!(report.state_preserved, "rejected attacks must not change provider state");
        assert!(report.recovered_after_attacks, "honest path must survive the attacks");
        assert!(report.pass);
        let csv = fs::read_to_string(&report.csv_path).unwrap();
        assert_eq!(csv.lines().count(), 1 + 6 + 7, "population plus staging players");
    }

    #[test]
    fn bench_smoke_emits_the_pinned_row_set() {
        let dir = TempDir::new().expect("tempdir");
        let report = run_bench(&BenchConfig::smoke(), dir.path()).expect("run must succeed");
        let ops: Vec<&str> = report.rows.iter().map(|r| r.op.as_str()).collect();
        assert_eq!(ops, BENCH_ROWS, "row set and order are pinned");
        for row in &report.rows {
            assert!(row.mean_ms > 0.0, "row {} must have positive timing", row.op);
            assert!(row.min_ms <= row.median_ms && row.median_ms <= row.max_ms);
        }
        assert!(report.sizes.iter().any(|s| s.object == "ciphertext_fresh" && s.bytes > 0));
        assert!(Path::new(&report.csv_path).exists());
    }

    #[test]
    fn fairness_smoke_rejects_all_attacks_and_finds_no_leaks() {
        let dir = TempDir::new().expect("tempdir");
        let report = run_fairness(&FairnessConfig::smoke(), dir.path()).expect("run must succeed");
        assert_eq!(report.scenarios.len(), 5, "five adversarial scenarios");
        for s in &report.scenarios {
            assert!(s.rejected, "scenario {} must be rejected: {}", s.name, s.detail);
        }
        assert_eq!(report.scan.hits, 0, "no rating encoding may appear in any message");
        assert!(report.scan.bytes_scanned > 100_000, "scan must cover the real corpus");
        assert!(report.pass);
        assert!(Path::new(&report.trace_path).exists(), "trace artifact missing");
        let trace = fs::read_to_string(&report.trace_path).unwrap();
        assert!(trace.contains("\"bytes\""), "trace must carry sizes");
    }

    #[test]
    fn hidden_smoke_battery_is_sane_and_blind() {
        let dir = TempDir::new().expect("tempdir");
        let report = run_hidden(&HiddenConfig::smoke(), dir.path()).expect("run must succeed");
        assert!(report.shapes_ok, "artifact shapes must not depend on the value");
        assert!(report.cross_band_refused, "cross-band challenge must be refused");
        assert!(report.corrupt_refused, "challenge against a corrupted player must be refused");
        assert_eq!(report.scan.hits, 0, "no candidate encoding may appear in artifacts");
        assert!(report.scan.bytes_scanned > 100_000, "scan must cover the real artifacts");
        assert!(
            report.sanity_accuracy >= 0.95,
            "battery must detect the plaintext control: {}",
            report.sanity_accuracy
        );
        assert!(
            report.max_advantage <= report.bound,
            "expected advantage ≤ {:.4}, got {:.4}",
            report.bound,
            report.max_advantage
        );
        assert!(report.pass);
    }

    #[test]
    fn config_tags_are_stable_and_distinct() {
        let a = config_tag("bench", "toy-d8192-L9", "detail-1");
        let b = config_tag("bench", "toy-d8192-L9", "detail-1");
        let c = config_tag("bench", "toy-d8192-L9", "detail-2");
        assert_eq!(a, b, "same config must give the same tag");
        assert_ne!(a, c, "different config must give a different tag");
        assert!(a.starts_with("bench-toy-d8192-L9-"));
    }
}
