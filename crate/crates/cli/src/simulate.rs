//! `helo simulate` — drive the full three-role protocol end to end.
//!
//! The run enrolls `--users` players (each with a private non-negative
//! rating offset below the deployment's offset bound, so everyone starts in
//! the same rank band), then plays `--updates` rounds. Every round shuffles
//! the players, pairs band-mates with counter headroom, scripts an outcome
//! from the seeded RNG, and runs the full match path: homomorphic update at
//! the provider, refresh at the custodian, counted install back at the
//! provider. Whenever a player completes an attestation cycle the custodian
//! re-attests their band and the provider verifies the certificate before
//! recording the new rank.
//!
//! Outputs, split by who may read them:
//!
//! - `standings.json` — the provider's view: id, rank, match counts. No
//!   ratings appear here or in the trace.
//! - `matches.csv` — public match results (`round,a,b,score_a`).
//! - `trace.json` — every message with sender, receiver, and byte size.
//! - `announce/user-<id>.json` — the custodian-to-user private channel:
//!   initial and final rating. These files model messages the provider
//!   never sees.

use crate::config::{ensure_dir, resolve, write_file};
use crate::{CliError, CommonArgs};
use clap::Args;
use helo_core::elo;
use helo_core::protocol::{deploy, enroll_user, Deployment, MatchOutcome, ProtocolError, Trace};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;
use std::collections::HashMap;

#[derive(Args)]
pub struct SimulateArgs {
    /// Players to enroll
    #[arg(long, default_value_t = 4)]
    pub users: usize,

    /// Match rounds to play (each round pairs every free band-mate)
    #[arg(long = "updates", default_value_t = 3)]
    pub rounds: usize,
}

#[derive(Serialize)]
struct StandingRow {
    id: u64,
    band: usize,
    rank: String,
    matches_played: usize,
    counter: u32,
}

#[derive(Serialize)]
struct Announcement {
    id: u64,
    initial_rating: f64,
    final_rating: f64,
}

pub fn run(common: &CommonArgs, args: &SimulateArgs) -> Result<(), CliError> {
    let resolved = resolve(common)?;
    crate::config::require_stock_boundaries(&resolved)?;
    if args.users < 2 {
        return Err(CliError::Usage("simulate needs at least 2 users".into()));
    }
    ensure_dir(&resolved.out)?;

    let mut rng = ChaCha20Rng::seed_from_u64(resolved.seed);
    let Deployment { ctx, mut sp, mut kc } =
        deploy(resolved.ckks.clone(), resolved.protocol.clone(), &mut rng)
            .map_err(|e| CliError::Failure(format!("deployment failed: {}", e)))?;
    let mut trace = Trace::default();

    // ── enrollment ─────────────────────────────────────────────────────────
    // Non-negative offsets stay below one band width, so every player lands
    // in the initial rating's band and matchmaking always has partners.
    let mut initial: HashMap<u64, f64> = HashMap::new();
    let mut played: HashMap<u64, usize> = HashMap::new();
    for id in 1..=args.users as u64 {
        let bound = resolved.protocol.alpha_bound;
        let alpha: f64 = if bound > 0.0 { rng.random_range(0.0..bound) } else { 0.0 };
        let enrollment =
            enroll_user(&ctx, kc.public_key(), kc.gens(), &resolved.protocol, id, alpha, &mut rng)
                .map_err(|e| CliError::Failure(format!("enrollment of {} failed: {}", id, e)))?;
        trace.log("enroll-request", "user", "kc", enrollment.request.ciphertext.len() + 73);
        let attestation = kc
            .attest(&enrollment.request)
            .map_err(|e| CliError::Failure(format!("attestation of {} failed: {}", id, e)))?;
        trace.log("attest", "kc", "user", 64);
        let registration = enrollment.registration(attestation);
        let bytes = registration.total_bytes();
        sp.register(&registration)
            .map_err(|e| CliError::Failure(format!("registration of {} failed: {}", id, e)))?;
        trace.log("register", "user", "sp", bytes);
        initial.insert(id, elo::clamp_rating((elo::INITIAL_RATING + alpha).floor()));
        played.insert(id, 0);
    }

    // ── match rounds ───────────────────────────────────────────────────────
    let n = resolved.protocol.matches_per_cycle;
    let mut matches_csv = String::from("round,a,b,score_a\n");
    let mut matches_played = 0usize;
    for round in 0..args.rounds {
        let mut ids = sp.player_ids();
        ids.shuffle(&mut rng);
        // pair adjacent band-mates with headroom; skip the rest this round
        let mut free: Vec<u64> = ids
            .into_iter()
            .filter(|&id| sp.counter(id).map(|c| c < n).unwrap_or(false))
            .collect();
        free.sort_by_key(|&id| sp.band(id).unwrap_or(usize::MAX));
        for pair in free.chunks_exact(2) {
            let (a, b) = (pair[0], pair[1]);
            if sp.band(a).map_err(protocol_failure)? != sp.band(b).map_err(protocol_failure)? {
                continue;
            }
            let outcome = match rng.random_range(0..3) {
                0 => MatchOutcome::WinA,
                1 => MatchOutcome::Draw,
                _ => MatchOutcome::WinB,
            };
            let updated = sp
                .homomorphic_update(a, b, outcome)
                .map_err(|e| CliError::Failure(format!("match {}–{} failed: {}", a, b, e)))?;
            trace.log("match-update", "sp", "kc", updated.total_bytes());
            let refreshed = kc
                .refresh_match(&updated, &mut rng)
                .map_err(|e| CliError::Failure(format!("refresh {}–{} failed: {}", a, b, e)))?;
            trace.log("match-refresh", "kc", "sp", refreshed.total_bytes());
            sp.install_refreshed(&refreshed)
                .map_err(|e| CliError::Failure(format!("install {}–{} failed: {}", a, b, e)))?;
            matches_csv.push_str(&format!("{},{},{},{}\n", round, a, b, outcome.score_a()));
            matches_played += 1;
            *played.entry(a).or_default() += 1;
            *played.entry(b).or_default() += 1;

            // completed cycles trigger re-attestation and rank verification
            for id in [a, b] {
                if sp.counter(id).map_err(protocol_failure)? == n {
                    let ct_bytes = sp.serialized_ciphertext(id).map_err(protocol_failure)?;
                    trace.log("reattest-request", "sp", "kc", ct_bytes.len());
                    let cert = kc
                        .reattest(id, &ct_bytes, &mut rng)
                        .map_err(|e| CliError::Failure(format!("re-attestation: {}", e)))?;
                    trace.log("certificate", "kc", "sp", cert.total_bytes());
                    sp.verify_new(&cert)
                        .map_err(|e| CliError::Failure(format!("rank verification: {}", e)))?;
                }
            }
        }
    }

    // ── outputs ────────────────────────────────────────────────────────────
    let mut standings: Vec<StandingRow> = sp
        .player_ids()
        .into_iter()
        .map(|id| {
            let band = sp.band(id).map_err(protocol_failure)?;
            Ok(StandingRow {
                id,
                band,
                rank: resolved.ladder.bands[band].label.clone(),
                matches_played: played.get(&id).copied().unwrap_or(0),
                counter: sp.counter(id).map_err(protocol_failure)?,
            })
        })
        .collect::<Result<_, CliError>>()?;
    standings.sort_by_key(|row| (usize::MAX - row.band, row.id));

    let announce_dir = resolved.out.join("announce");
    ensure_dir(&announce_dir)?;
    for id in sp.player_ids() {
        let ct = sp.ciphertext(id).map_err(protocol_failure)?;
        let announcement = Announcement {
            id,
            initial_rating: initial[&id],
            final_rating: kc.decrypt_rating(ct),
        };
        trace.log("announce", "kc", "user", 8);
        write_file(
            &announce_dir.join(format!("user-{}.json", id)),
            &serde_json::to_vec_pretty(&announcement).expect("announcement serialize"),
        )?;
    }

    write_file(
        &resolved.out.join("standings.json"),
        &serde_json::to_vec_pretty(&standings).expect("standings serialize"),
    )?;
    write_file(&resolved.out.join("matches.csv"), matches_csv.as_bytes())?;
    write_file(&resolved.out.join("trace.json"), trace.to_json().as_bytes())?;

    println!(
        "simulate: {} users, {} rounds, {} matches, {} messages ({} bytes) into {}",
        args.users,
        args.rounds,
        matches_played,
        trace.events.len(),
        trace.total_bytes(),
        resolved.out.display()
    );
    for row in &standings {
        println!(
            "  user {:<4} rank {:<12} matches {:<3} counter {}",
            row.id, row.rank, row.matches_played, row.counter
        );
    }
    Ok(())
}

fn protocol_failure(e: ProtocolError) -> CliError {
    CliError::Failure(e.to_string())
}
