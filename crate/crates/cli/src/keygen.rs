//! `helo keygen` — generate and store the deployment key material.
//!
//! One run produces the full role split on disk:
//!
//! ```text
//! out/
//!   kc/he_secret_key.bin    decryption key (custodian only)
//!   kc/signing_key.bin      attestation signing key (custodian only)
//!   sp/he_public_key.bin    shared encryption key
//!   sp/relin_key.bin        evaluation key for ciphertext multiplication
//!   sp/vk_kc.bin            attestation verification key
//!   sp/proof_params.json    commitment bases and per-band proof bounds
//!   manifest.json           parameter label, seed, and per-file byte sizes
//! ```
//!
//! Secrets live only under `kc/`; everything under `sp/` is safe to hand to
//! the provider. All users encrypt under the single deployment key — the
//! custodian decrypts on their behalf during refresh and attestation, so
//! per-user keypairs would add no separation that the roles do not already
//! provide.

use crate::config::{ensure_dir, resolve, write_file};
use crate::{CliError, CommonArgs};
use helo_core::ckks::CkksContext;
use helo_core::prims::{PedersenGens, SigningKey};
use helo_core::zkrp::{band_bounds, TRANSCRIPT_DOMAIN};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::Serialize;
use std::path::Path;

#[derive(Serialize)]
struct ProofParams {
    pedersen_g: String,
    pedersen_h: String,
    transcript_domain: String,
    bands: Vec<BandStatement>,
}

#[derive(Serialize)]
struct BandStatement {
    label: String,
    min: u64,
    max: u64,
}

#[derive(Serialize)]
struct Manifest {
    label: String,
    seed: u64,
    degree: usize,
    files: Vec<FileEntry>,
}

#[derive(Serialize)]
struct FileEntry {
    path: String,
    bytes: usize,
}

pub fn run(common: &CommonArgs) -> Result<(), CliError> {
    let resolved = resolve(common)?;
    crate::config::require_stock_boundaries(&resolved)?;

    let ctx = CkksContext::new(resolved.ckks.clone());
    let mut rng = ChaCha20Rng::seed_from_u64(resolved.seed);
    let (sk, pk, rlk) = ctx.keygen(&mut rng);
    let signing = SigningKey::generate(&mut rng);
    let gens = PedersenGens::default();

    let kc_dir = resolved.out.join("kc");
    let sp_dir = resolved.out.join("sp");
    ensure_dir(&kc_dir)?;
    ensure_dir(&sp_dir)?;

    let proof_params = ProofParams {
        pedersen_g: hex::encode(gens.g.compress().as_bytes()),
        pedersen_h: hex::encode(gens.h.compress().as_bytes()),
        transcript_domain: TRANSCRIPT_DOMAIN.to_string(),
        bands: resolved
            .ladder
            .bands
            .iter()
            .enumerate()
            .map(|(i, band)| {
                let (min, max) = band_bounds(i);
                BandStatement { label: band.label.clone(), min, max }
            })
            .collect(),
    };

    let outputs: Vec<(&Path, String, Vec<u8>)> = vec![
        (&kc_dir, "he_secret_key.bin".into(), sk.serialize(&ctx)),
        (&kc_dir, "signing_key.bin".into(), signing.to_bytes().to_vec()),
        (&sp_dir, "he_public_key.bin".into(), pk.serialize(&ctx)),
        (&sp_dir, "relin_key.bin".into(), rlk.serialize(&ctx)),
        (&sp_dir, "vk_kc.bin".into(), signing.verifying_key().to_bytes().to_vec()),
        (
            &sp_dir,
            "proof_params.json".into(),
            serde_json::to_vec_pretty(&proof_params).expect("proof params serialize"),
        ),
    ];

    let mut files = Vec::with_capacity(outputs.len() + 1);
    for (dir, name, bytes) in &outputs {
        let path = dir.join(name);
        write_file(&path, bytes)?;
        let rel = path.strip_prefix(&resolved.out).unwrap_or(&path);
        files.push(FileEntry { path: rel.display().to_string(), bytes: bytes.len() });
    }

    let manifest = Manifest {
        label: resolved.ckks.label.clone(),
        seed: resolved.seed,
        degree: resolved.ckks.degree,
        files,
    };
    let manifest_bytes = serde_json::to_vec_pretty(&manifest).expect("manifest serialize");
    write_file(&resolved.out.join("manifest.json"), &manifest_bytes)?;

    println!("keygen: parameter set {} into {}", manifest.label, resolved.out.display());
    for entry in &manifest.files {
        println!("  {:<24} {:>12} bytes", entry.path, entry.bytes);
    }
    Ok(())
}
