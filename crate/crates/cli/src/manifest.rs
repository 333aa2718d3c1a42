//! Run manifests.
//!
//! Every result body embeds the deterministic part of its manifest (command,
//! parameters, seed, tool version), so identical inputs give byte-identical
//! result files. The sidecar written next to `--out` files adds the
//! timestamp and the digest of the produced output.

use sha2::{Digest, Sha256};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

pub fn version() -> &'static str {
    env!("CARGO_PKG_VERSION")
}

/// Deterministic manifest block embedded in every result.
pub fn embedded(
    command: &str,
    params: &serde_json::Value,
    seed: Option<u64>,
) -> serde_json::Value {
    let mut m = serde_json::json!({
        "command": command,
        "params": params,
        "version": version(),
    });
    if let Some(s) = seed {
        m["seed"] = serde_json::json!(s);
    }
    m
}

/// Sidecar manifest with timestamp and output digest, written as
/// `<out>.manifest.json`.
pub fn write_sidecar(
    out_path: &Path,
    command: &str,
    params: &serde_json::Value,
    seed: Option<u64>,
    output_text: &str,
) -> std::io::Result<()> {
    let mut hasher = Sha256::new();
    hasher.update(output_text.as_bytes());
    let digest = hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect::<String>();
    let created = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let manifest = serde_json::json!({
        "command": command,
        "params": params,
        "seed": seed,
        "version": version(),
        "created_unix": created,
        "outputs": [{
            "path": out_path.display().to_string(),
            "sha256": digest,
        }],
    });
    let mut sidecar = out_path.as_os_str().to_owned();
    sidecar.push(".manifest.json");
    std::fs::write(sidecar, serde_json::to_string_pretty(&manifest).expect("manifest json"))
}
