//! `helo prove` and `helo verify` — standalone range-proof tooling for
//! audits.
//!
//! `prove` reads a statement (inclusive bounds plus optional context bytes)
//! and a witness (the value, with an optional explicit blinding), produces
//! the commitment and its range proof, and writes a self-contained proof
//! file. A statement can also be named by rank: `--band <label>` takes the
//! bounds from the resolved ladder, exclusive at the top like the deployed
//! relation (proving the band's upper boundary value is refused, except at
//! the rating ceiling). Witnesses outside the bounds are refused with a
//! message — the prover never emits a proof for a false statement.
//!
//! `verify` checks a proof file, prints `1` or `0`, and exits 0 or 1, so
//! shell pipelines can branch on either. A tampered file yields `0`, not a
//! crash.

use crate::config::{ensure_dir, read_json, resolve, write_file};
use crate::{CliError, CommonArgs};
use clap::Args;
use helo_core::prims::{decode_point, decode_scalar, random_scalar, PedersenGens};
use helo_core::zkrp::{prove_range, range_bits, verify_range, RangeProof};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

#[derive(Args)]
pub struct ProveArgs {
    /// JSON statement file: {"min": .., "max": .., "context": "hex"?}
    #[arg(long, conflicts_with = "band")]
    pub statement: Option<PathBuf>,

    /// Take the statement from this rank band of the ladder
    #[arg(long)]
    pub band: Option<String>,

    /// JSON witness file: {"value": .., "blinding": "hex"?}
    #[arg(long)]
    pub witness: PathBuf,

    /// Where to write the proof (default: <out>/proof.json)
    #[arg(long)]
    pub proof: Option<PathBuf>,
}

#[derive(Args)]
pub struct VerifyArgs {
    /// Self-contained proof file produced by `prove`
    #[arg(long)]
    pub proof: PathBuf,
}

#[derive(Deserialize)]
struct StatementFile {
    min: u64,
    max: u64,
    #[serde(default)]
    context: String,
}

#[derive(Deserialize)]
struct WitnessFile {
    value: u64,
    blinding: Option<String>,
}

/// Everything a verifier needs, in one file.
#[derive(Serialize, Deserialize)]
struct ProofFile {
    min: u64,
    max: u64,
    context: String,
    commitment: String,
    proof: String,
    elements: usize,
    bytes: usize,
}

pub fn run_prove(common: &CommonArgs, args: &ProveArgs) -> Result<(), CliError> {
    let resolved = resolve(common)?;

    let statement = match (&args.statement, &args.band) {
        (Some(path), None) => read_json::<StatementFile>(path, "statement")?,
        (None, Some(label)) => band_statement(&resolved, label)?,
        _ => {
            return Err(CliError::Usage(
                "provide exactly one of --statement <file> or --band <label>".into(),
            ))
        }
    };
    if statement.max < statement.min {
        return Err(CliError::Usage("statement bounds are reversed".into()));
    }
    let context = decode_hex(&statement.context, "statement context")?;
    let witness = read_json::<WitnessFile>(&args.witness, "witness")?;

    let mut rng = ChaCha20Rng::seed_from_u64(resolved.seed);
    let blinding = match &witness.blinding {
        Some(text) => {
            let bytes = decode_hex(text, "witness blinding")?;
            decode_scalar(&bytes)
                .map_err(|e| CliError::Usage(format!("witness blinding: {}", e)))?
        }
        None => random_scalar(&mut rng),
    };

    let gens = PedersenGens::default();
    let proof = prove_range(
        &gens,
        witness.value,
        blinding,
        statement.min,
        statement.max,
        &context,
        &mut rng,
    )
    .map_err(|e| {
        CliError::Failure(format!(
            "prover refuses: value {} against [{}, {}]: {}",
            witness.value, statement.min, statement.max, e
        ))
    })?;

    let commitment = gens.commit_u64(witness.value, blinding).compress();
    let proof_bytes = proof.to_bytes();
    let bits = range_bits(statement.min, statement.max);
    let file = ProofFile {
        min: statement.min,
        max: statement.max,
        context: statement.context.clone(),
        commitment: hex::encode(commitment.as_bytes()),
        elements: 2 * bits * 6,
        bytes: proof_bytes.len(),
        proof: hex::encode(&proof_bytes),
    };

    let path = match &args.proof {
        Some(p) => p.clone(),
        None => {
            ensure_dir(&resolved.out)?;
            resolved.out.join("proof.json")
        }
    };
    write_file(&path, &serde_json::to_vec_pretty(&file).expect("proof file serialize"))?;
    println!(
        "prove: [{}, {}] with {} group elements ({} bytes) at {}",
        file.min, file.max, file.elements, file.bytes, path.display()
    );
    Ok(())
}

pub fn run_verify(common: &CommonArgs, args: &VerifyArgs) -> Result<(), CliError> {
    // resolve only to honor --config for future options; bad global config
    // is still a usage error for symmetry with every other command
    let _ = resolve(common)?;
    let file = read_json::<ProofFile>(&args.proof, "proof")?;
    let gens = PedersenGens::default();

    let verdict = check(&gens, &file).is_ok();
    println!("{}", if verdict { 1 } else { 0 });
    if verdict {
        Ok(())
    } else {
        Err(CliError::Failure("proof rejected".into()))
    }
}

/// All decoding happens inside the verdict: a corrupted field is a reject,
/// not a crash.
fn check(gens: &PedersenGens, file: &ProofFile) -> Result<(), String> {
    let context = hex::decode(&file.context).map_err(|e| e.to_string())?;
    let commitment_bytes = hex::decode(&file.commitment).map_err(|e| e.to_string())?;
    let commitment = decode_point(&commitment_bytes).map_err(|e| e.to_string())?;
    let proof_bytes = hex::decode(&file.proof).map_err(|e| e.to_string())?;
    let bits = range_bits(file.min, file.max);
    let proof = RangeProof::from_bytes(&proof_bytes, bits).map_err(|e| e.to_string())?;
    verify_range(gens, &commitment, file.min, file.max, &context, &proof)
        .map_err(|e| e.to_string())
}

/// Statement for a named band: inclusive bounds, exclusive at the shared
/// boundary with the next band (the ceiling itself stays provable).
fn band_statement(
    resolved: &crate::config::Resolved,
    label: &str,
) -> Result<StatementFile, CliError> {
    let band = resolved
        .ladder
        .bands
        .iter()
        .find(|b| b.label == label)
        .ok_or_else(|| CliError::Usage(format!("no band {:?} in the ladder", label)))?;
    if band.min.fract() != 0.0 || band.max.fract() != 0.0 {
        return Err(CliError::Usage(format!(
            "band {:?} has non-integer bounds; range statements need integers",
            label
        )));
    }
    let top = resolved.ladder.bands.last().map(|b| b.label == band.label).unwrap_or(false);
    let max = if top { band.max as u64 } else { band.max as u64 - 1 };
    Ok(StatementFile { min: band.min as u64, max, context: String::new() })
}

fn decode_hex(text: &str, what: &str) -> Result<Vec<u8>, CliError> {
    hex::decode(text).map_err(|e| CliError::Usage(format!("{} is not valid hex: {}", what, e)))
}
