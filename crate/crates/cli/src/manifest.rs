//! Run-directory manifest: inputs with content hashes, the config hash,
//! and tool version, so a run directory is self-describing.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::config::RunConfig;
use crate::CliError;

/// FNV-1a, stable across platforms and releases.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf29ce484222325u64;
    for &byte in bytes {
        hash ^= byte as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

pub fn config_hash(config: &RunConfig) -> u64 {
    fnv1a(format!("{config:?}").as_bytes())
}

fn input_files(config: &RunConfig) -> Vec<(&'static str, Option<PathBuf>)> {
    vec![
        ("districts", Some(config.districts.clone())),
        ("commuters", config.commuters.clone()),
        ("travel", Some(config.travel.clone())),
        ("supply", config.supply.clone()),
        ("beta", config.beta.clone()),
        ("kappa", config.kappa.clone()),
        ("prevalence", config.prevalence.clone()),
        ("observed", config.observed.clone()),
        ("initial_state", config.initial_state.clone()),
        ("epi_beta_i", config.epi_beta_identified.clone()),
        ("epi_beta_u", config.epi_beta_unidentified.clone()),
    ]
}

/// Write (or rewrite) `manifest.txt` in the run directory.
pub fn record(out: &Path, config: &RunConfig, command: &str) -> Result<(), CliError> {
    let mut body = String::new();
    let _ = writeln!(body, "tool = vaxsite {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(body, "command = {command}");
    let _ = writeln!(body, "config_hash = {:016x}", config_hash(config));
    for (label, path) in input_files(config) {
        let Some(path) = path else { continue };
        match std::fs::read(&path) {
            Ok(bytes) => {
                let _ = writeln!(
                    body,
                    "input {label} = {} fnv1a:{:016x}",
                    path.display(),
                    fnv1a(&bytes)
                );
            }
            Err(_) => {
                let _ = writeln!(body, "input {label} = {} (unreadable)", path.display());
            }
        }
    }
    std::fs::write(out.join("manifest.txt"), body)
        .map_err(|e| CliError::input(format!("cannot write manifest: {e}")))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a(b"a"), 0xaf63dc4c8601ec8c);
    }
}
