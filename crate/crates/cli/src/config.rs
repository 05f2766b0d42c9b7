//! Option resolution: command line (with environment fallback, handled by
//! clap) over the `--config` file over built-in defaults.
//!
//! The resolved bundle fixes everything a command needs up front — seed,
//! output directory, parameter set, ladder, and protocol constants — so the
//! command bodies never touch raw flags. Validation happens here: unknown
//! tiers, unreadable files, non-partition ladders, and out-of-range
//! protocol constants are all usage errors before any key material is
//! generated.

use crate::{CliError, CommonArgs};
use helo_core::ckks::CkksConfig;
use helo_core::elo::Ladder;
use helo_core::protocol::ProtocolParams;
use serde::Deserialize;
use std::fs;
use std::path::{Path, PathBuf};

/// Defaults file schema; every field optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub label: Option<String>,
    pub params: Option<PathBuf>,
    pub ladder: Option<PathBuf>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub matches_per_cycle: Option<u32>,
    pub k_factor: Option<f64>,
    pub alpha_bound: Option<f64>,
}

/// Everything a command needs, fully validated.
pub struct Resolved {
    pub seed: u64,
    pub out: PathBuf,
    pub ckks: CkksConfig,
    pub ladder: Ladder,
    pub protocol: ProtocolParams,
}

pub fn resolve(common: &CommonArgs) -> Result<Resolved, CliError> {
    let file = match &common.config {
        Some(path) => read_json::<FileConfig>(path, "config")?,
        None => FileConfig::default(),
    };

    let ckks = match common.params.as_ref().or(file.params.as_ref()) {
        Some(path) => read_json::<CkksConfig>(path, "parameter set")?,
        None => {
            let label =
                common.label.as_deref().or(file.label.as_deref()).unwrap_or("toy");
            CkksConfig::from_tier(label).ok_or_else(|| {
                CliError::Usage(format!(
                    "unknown parameter tier {:?}; expected toy, mid, or std",
                    label
                ))
            })?
        }
    };

    let ladder = match common.ladder.as_ref().or(file.ladder.as_ref()) {
        Some(path) => {
            let ladder = read_json::<Ladder>(path, "ladder")?;
            ladder.validate().map_err(|why| {
                CliError::Usage(format!("invalid ladder {}: {}", path.display(), why))
            })?;
            ladder
        }
        None => Ladder::default(),
    };

    let defaults = ProtocolParams::default();
    let protocol = ProtocolParams {
        matches_per_cycle: common
            .matches_per_cycle
            .or(file.matches_per_cycle)
            .unwrap_or(defaults.matches_per_cycle),
        alpha_bound: file.alpha_bound.unwrap_or(defaults.alpha_bound),
        k_factor: common.k_factor.or(file.k_factor).unwrap_or(defaults.k_factor),
    };
    if protocol.matches_per_cycle < 3 {
        return Err(CliError::Usage("matches per cycle must be at least 3".into()));
    }
    if !(protocol.k_factor > 0.0 && protocol.k_factor <= 400.0) {
        return Err(CliError::Usage("K-factor must lie in (0, 400]".into()));
    }

    Ok(Resolved {
        seed: common.seed.or(file.seed).unwrap_or(7),
        out: common.out.clone().or(file.out).unwrap_or_else(|| PathBuf::from("helo-out")),
        ckks,
        ladder,
        protocol,
    })
}

/// The deployed proof relation and matchmaking tables are cut on the stock
/// ladder; commands that drive the protocol require a loaded ladder to keep
/// those boundaries (relabeling is fine, moving cuts is not).
pub fn require_stock_boundaries(resolved: &Resolved) -> Result<(), CliError> {
    if resolved.ladder.matches_stock_boundaries() {
        Ok(())
    } else {
        Err(CliError::Usage(
            "this command needs the stock band boundaries; a custom ladder may only \
             rename bands (use prove/verify for arbitrary ranges)"
                .into(),
        ))
    }
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path, what: &str) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| {
        CliError::Usage(format!("cannot read {} file {}: {}", what, path.display(), e))
    })?;
    serde_json::from_str(&text).map_err(|e| {
        CliError::Usage(format!("malformed {} file {}: {}", what, path.display(), e))
    })
}

pub fn ensure_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path)
        .map_err(|e| CliError::Usage(format!("cannot create {}: {}", path.display(), e)))
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes)
        .map_err(|e| CliError::Failure(format!("cannot write {}: {}", path.display(), e)))
}
