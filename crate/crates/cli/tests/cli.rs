//! End-to-end tests of the `helo` binary: every command is exercised
//! through `std::process::Command` against the built executable, checking
//! files on disk, stdout, and the exit-code contract (0 success, 1
//! verification/threshold failure, 2 usage error).
//!
//! All protocol-driving runs use the `toy` tier; its ring is small enough
//! that a full enroll/match/attest cycle completes in about a second.

use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn helo(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_helo"))
        .current_dir(dir)
        .env_remove("HELO_SEED")
        .env_remove("HELO_OUT")
        .env_remove("HELO_LABEL")
        .env_remove("HELO_CONFIG")
        .args(args)
        .output()
        .expect("binary must run")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("process must exit normally")
}

fn read_json(path: &Path) -> serde_json::Value {
    let text = fs::read_to_string(path)
        .unwrap_or_else(|e| panic!("cannot read {}: {}", path.display(), e));
    serde_json::from_str(&text)
        .unwrap_or_else(|e| panic!("bad JSON at {}: {}", path.display(), e))
}

// ═══════════════════════════════════════════════════════════════════════════
// keygen
// ═══════════════════════════════════════════════════════════════════════════

#[test]
fn keygen_writes_role_separated_material_with_predicted_sizes() {
    let dir = tempfile::tempdir().unwrap();
    let out = helo(dir.path(), &["keygen", "--label", "toy", "--seed", "3", "--out", "keys"]);
    assert_eq!(code(&out), 0, "keygen failed: {}", String::from_utf8_lossy(&out.stderr));

    let keys = dir.path().join("keys");
    for file in ["kc/he_secret_key.bin", "kc/signing_key.bin", "sp/he_public_key.bin",
                 "sp/relin_key.bin", "sp/vk_kc.bin", "sp/proof_params.json", "manifest.json"] {
        assert!(keys.join(file).is_file(), "missing artifact {}", file);
    }
    // the decryption secret must not appear anywhere under the provider dir
    let sp_files: Vec<_> = fs::read_dir(keys.join("sp"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    assert!(
        sp_files.iter().all(|name| !name.contains("secret")),
        "provider directory leaks a secret: {:?}",
        sp_files
    );

    // sizes within 2x of the flat-array arithmetic: degree x limbs x 8 bytes
    // per polynomial (keys at toy carry all 10 limbs)
    let manifest = read_json(&keys.join("manifest.json"));
    let degree = manifest["degree"].as_u64().unwrap() as usize;
    let poly = degree * 10 * 8;
    let mut sizes: HashMap<String, usize> = HashMap::new();
    for entry in manifest["files"].as_array().unwrap() {
        sizes.insert(
            entry["path"].as_str().unwrap().to_string(),
            entry["bytes"].as_u64().unwrap() as usize,
        );
    }
    let expect_within = |name: &str, predicted: usize| {
        let got = sizes[name];
        assert!(
            got >= predicted && got <= 2 * predicted,
            "{}: expected within [{}, {}], got {}",
            name,
            predicted,
            2 * predicted,
            got
        );
    };
    expect_within("kc/he_secret_key.bin", poly);
    expect_within("sp/he_public_key.bin", 2 * poly);

    // stored keys must round-trip through the library loaders
    let ctx = helo_core::ckks::CkksContext::new(helo_core::ckks::CkksConfig::toy());
    let sk_bytes = fs::read(keys.join("kc/he_secret_key.bin")).unwrap();
    helo_core::ckks::engine::SecretKey::deserialize(&ctx, &sk_bytes).expect("secret key loads");
    let pk_bytes = fs::read(keys.join("sp/he_public_key.bin")).unwrap();
    helo_core::ckks::engine::PublicKey::deserialize(&ctx, &pk_bytes).expect("public key loads");
    let rlk_bytes = fs::read(keys.join("sp/relin_key.bin")).unwrap();
    helo_core::ckks::engine::RelinKey::deserialize(&ctx, &rlk_bytes).expect("relin key loads");
    let vk_bytes = fs::read(keys.join("sp/vk_kc.bin")).unwrap();
    helo_core::prims::VerifyingKey::from_bytes(&vk_bytes).expect("verification key loads");
    let sig_bytes = fs::read(keys.join("kc/signing_key.bin")).unwrap();
    helo_core::prims::SigningKey::from_bytes(&sig_bytes).expect("signing key loads");
}

// ═══════════════════════════════════════════════════════════════════════════
// simulate
// ═══════════════════════════════════════════════════════════════════════════

#[test]
fn simulate_standings_match_the_hand_computed_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let out = helo(
        dir.path(),
        &["simulate", "--users", "2", "--updates", "3", "--seed", "21", "--out", "sim"],
    );
    assert_eq!(code(&out), 0, "simulate failed: {}", String::from_utf8_lossy(&out.stderr));
    let sim = dir.path().join("sim");

    // replay the public match script over the announced initial ratings
    let mut ratings: HashMap<u64, f64> = HashMap::new();
    for id in [1u64, 2] {
        let a = read_json(&sim.join(format!("announce/user-{}.json", id)));
        ratings.insert(id, a["initial_rating"].as_f64().unwrap());
    }
    let csv = fs::read_to_string(sim.join("matches.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("round,a,b,score_a"), "csv header");
    let mut match_count = 0;
    for line in lines {
        let parts: Vec<&str> = line.split(',').collect();
        let (a, b) = (parts[1].parse::<u64>().unwrap(), parts[2].parse::<u64>().unwrap());
        let score: f64 = parts[3].parse().unwrap();
        let (na, nb) = helo_core::elo::update_pair(ratings[&a], ratings[&b], score);
        ratings.insert(a, na);
        ratings.insert(b, nb);
        match_count += 1;
    }
    assert_eq!(match_count, 3, "2 users for 3 rounds play 3 matches");

    // announced finals track the oracle; the encrypted chain may drift by
    // the per-update noise, far below a rating point
    for id in [1u64, 2] {
        let a = read_json(&sim.join(format!("announce/user-{}.json", id)));
        let announced = a["final_rating"].as_f64().unwrap();
        let oracle = ratings[&id];
        assert!(
            (announced - oracle).abs() < 0.05,
            "user {}: oracle {}, announced {}",
            id,
            oracle,
            announced
        );
    }

    // the provider's recorded rank equals the oracle rating's band
    let standings = read_json(&sim.join("standings.json"));
    for row in standings.as_array().unwrap() {
        let id = row["id"].as_u64().unwrap();
        let band = row["band"].as_u64().unwrap() as usize;
        assert_eq!(
            band,
            helo_core::elo::band_of(ratings[&id]),
            "user {} standing band disagrees with oracle",
            id
        );
        assert_eq!(row["counter"].as_u64().unwrap(), 0, "3 rounds complete the cycle");
    }
}

#[test]
fn simulate_zero_rounds_preserves_registration_state() {
    let dir = tempfile::tempdir().unwrap();
    let out = helo(
        dir.path(),
        &["simulate", "--users", "3", "--updates", "0", "--seed", "8", "--out", "sim"],
    );
    assert_eq!(code(&out), 0);
    let sim = dir.path().join("sim");

    let csv = fs::read_to_string(sim.join("matches.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1, "no matches beyond the header");
    for id in [1u64, 2, 3] {
        let a = read_json(&sim.join(format!("announce/user-{}.json", id)));
        let initial = a["initial_rating"].as_f64().unwrap();
        let final_r = a["final_rating"].as_f64().unwrap();
        assert!(
            (initial - final_r).abs() < 1e-4,
            "user {}: registration state must be preserved ({} vs {})",
            id,
            initial,
            final_r
        );
    }
    let standings = read_json(&sim.join("standings.json"));
    assert_eq!(standings.as_array().unwrap().len(), 3);
}

#[test]
fn simulate_is_deterministic_under_a_seed_and_hides_ratings_from_the_provider() {
    let dir = tempfile::tempdir().unwrap();
    for out_dir in ["one", "two"] {
        let out = helo(
            dir.path(),
            &["simulate", "--users", "2", "--updates", "3", "--seed", "33", "--out", out_dir],
        );
        assert_eq!(code(&out), 0);
    }
    let trace_one = fs::read(dir.path().join("one/trace.json")).unwrap();
    let trace_two = fs::read(dir.path().join("two/trace.json")).unwrap();
    assert_eq!(trace_one, trace_two, "identical seeds must give identical traces");

    // provider-visible outputs never carry a rating: the announced values
    // must not appear as substrings of standings or trace
    for id in [1u64, 2] {
        let a = read_json(&dir.path().join(format!("one/announce/user-{}.json", id)));
        for key in ["initial_rating", "final_rating"] {
            let rating = format!("{}", a[key].as_f64().unwrap());
            for sp_file in ["one/standings.json", "one/trace.json", "one/matches.csv"] {
                let text = fs::read_to_string(dir.path().join(sp_file)).unwrap();
                assert!(
                    !text.contains(&rating),
                    "{} leaked into {}",
                    key,
                    sp_file
                );
            }
        }
    }
}

#[test]
fn simulate_accepts_relabeled_ladders_and_rejects_moved_cuts() {
    let dir = tempfile::tempdir().unwrap();
    let relabel = dir.path().join("relabel.json");
    let bands: Vec<serde_json::Value> = (0..8)
        .map(|i| {
            serde_json::json!({
                "label": format!("tier-{}", i),
                "min": (i * 500) as f64,
                "max": ((i + 1) * 500) as f64,
            })
        })
        .collect();
    fs::write(&relabel, serde_json::json!({ "bands": bands }).to_string()).unwrap();

    let out = helo(
        dir.path(),
        &["simulate", "--users", "2", "--updates", "0", "--seed", "5", "--out", "sim",
          "--ladder", "relabel.json"],
    );
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("tier-3"), "custom labels must reach the standings");

    let coarse = dir.path().join("coarse.json");
    fs::write(
        &coarse,
        serde_json::json!({ "bands": [
            {"label": "low", "min": 0.0, "max": 2200.0},
            {"label": "high", "min": 2200.0, "max": 4000.0},
        ]})
        .to_string(),
    )
    .unwrap();
    let out = helo(
        dir.path(),
        &["simulate", "--users", "2", "--updates", "0", "--out", "sim2",
          "--ladder", "coarse.json"],
    );
    assert_eq!(code(&out), 2, "moved band cuts must be a usage error for the protocol");
}

// ═══════════════════════════════════════════════════════════════════════════
// accuracy and bench
// ═══════════════════════════════════════════════════════════════════════════

#[test]
fn accuracy_meets_thresholds_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = helo(
        dir.path(),
        &["accuracy", "--updates", "5", "--seed", "9", "--out", "acc"],
    );
    assert_eq!(code(&out), 0, "accuracy failed: {}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.contains("PASS"), "threshold verdict missing:\n{}", text);
    let reports: Vec<_> = fs::read_dir(dir.path().join("acc"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    assert!(reports.iter().any(|f| f.ends_with(".csv")), "csv report missing: {:?}", reports);
    assert!(reports.iter().any(|f| f.ends_with(".json")), "json report missing: {:?}", reports);
}

#[test]
fn bench_writes_the_timing_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = helo(
        dir.path(),
        &["bench", "--light-iters", "1", "--heavy-iters", "1", "--seed", "4", "--out", "bn"],
    );
    assert_eq!(code(&out), 0, "bench failed: {}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    for op in ["keygen", "encrypt", "decrypt", "eval_add", "chebyshev_deg50", "rating_update"] {
        assert!(text.contains(op), "bench table lacks {} row:\n{}", op, text);
    }
}

// ═══════════════════════════════════════════════════════════════════════════
// prove and verify
// ═══════════════════════════════════════════════════════════════════════════

#[test]
fn prove_verify_round_trip_with_size_prediction() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("st.json"), r#"{"min": 1700, "max": 1799}"#).unwrap();
    fs::write(dir.path().join("w.json"), r#"{"value": 1720}"#).unwrap();

    let out = helo(
        dir.path(),
        &["prove", "--statement", "st.json", "--witness", "w.json", "--seed", "5", "--out", "."],
    );
    assert_eq!(code(&out), 0, "prove failed: {}", String::from_utf8_lossy(&out.stderr));

    // span 99 needs 7 bits; two sides, six elements per bit
    let proof = read_json(&dir.path().join("proof.json"));
    assert_eq!(proof["elements"].as_u64().unwrap(), 2 * 7 * 6);
    assert_eq!(proof["bytes"].as_u64().unwrap(), 2 * 7 * 192);

    let out = helo(dir.path(), &["verify", "--proof", "proof.json"]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out).trim(), "1", "verdict line must be 1");
}

#[test]
fn prover_refuses_out_of_band_witnesses() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("w.json"), r#"{"value": 2000}"#).unwrap();
    // class-b is [1500, 2000): its own upper boundary belongs to the next band
    let out = helo(
        dir.path(),
        &["prove", "--band", "class-b", "--witness", "w.json", "--out", "."],
    );
    assert_eq!(code(&out), 1, "boundary value must be refused");
    assert!(
        String::from_utf8_lossy(&out.stderr).contains("refuses"),
        "refusal must carry a message"
    );
    assert!(!dir.path().join("proof.json").exists(), "no proof file on refusal");
}

#[test]
fn verify_rejects_a_tampered_proof_with_verdict_zero() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("st.json"), r#"{"min": 0, "max": 499}"#).unwrap();
    fs::write(dir.path().join("w.json"), r#"{"value": 123}"#).unwrap();
    let out = helo(
        dir.path(),
        &["prove", "--statement", "st.json", "--witness", "w.json", "--out", "."],
    );
    assert_eq!(code(&out), 0);

    let mut proof = read_json(&dir.path().join("proof.json"));
    let hex_text = proof["proof"].as_str().unwrap().to_string();
    let flipped = format!(
        "{}{}{}",
        &hex_text[..40],
        if &hex_text[40..41] == "0" { "1" } else { "0" },
        &hex_text[41..]
    );
    proof["proof"] = serde_json::Value::String(flipped);
    fs::write(dir.path().join("tampered.json"), proof.to_string()).unwrap();

    let out = helo(dir.path(), &["verify", "--proof", "tampered.json"]);
    assert_eq!(code(&out), 1, "tampered proof must fail verification");
    assert_eq!(stdout(&out).trim(), "0", "verdict line must be 0");
}

// ═══════════════════════════════════════════════════════════════════════════
// configuration and exit codes
// ═══════════════════════════════════════════════════════════════════════════

#[test]
fn flags_override_config_file_values() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("cfg.json"),
        r#"{"seed": 123, "label": "toy", "out": "from-config"}"#,
    )
    .unwrap();

    let out = helo(dir.path(), &["keygen", "--config", "cfg.json"]);
    assert_eq!(code(&out), 0);
    let manifest = read_json(&dir.path().join("from-config/manifest.json"));
    assert_eq!(manifest["seed"].as_u64().unwrap(), 123, "config file seed must apply");

    let out = helo(dir.path(), &["keygen", "--config", "cfg.json", "--seed", "77", "--out", "o2"]);
    assert_eq!(code(&out), 0);
    let manifest = read_json(&dir.path().join("o2/manifest.json"));
    assert_eq!(manifest["seed"].as_u64().unwrap(), 77, "flag must beat the config file");
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    // unknown tier
    let out = helo(dir.path(), &["keygen", "--label", "huge"]);
    assert_eq!(code(&out), 2);
    // malformed config file
    fs::write(dir.path().join("bad.json"), "{not json").unwrap();
    let out = helo(dir.path(), &["keygen", "--config", "bad.json"]);
    assert_eq!(code(&out), 2);
    // unknown flag (clap's own usage error)
    let out = helo(dir.path(), &["simulate", "--frobnicate"]);
    assert_eq!(code(&out), 2);
    // too few users
    let out = helo(dir.path(), &["simulate", "--users", "1"]);
    assert_eq!(code(&out), 2);
}
