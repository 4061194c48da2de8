use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// The '#' line heading every CSV file.
pub fn provenance_line(command: &str, config_hash: &str, seed: u64) -> String {
    format!(
        "# nlpme {} command={command} config_sha256={config_hash} seed={seed}",
        env!("CARGO_PKG_VERSION")
    )
}

/// Write provenance, header and rows to `dir/name`.
pub fn write_csv(dir: &Path, name: &str, provenance: &str, header: &str, rows: &[String]) -> io::Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let mut text = String::with_capacity(64 * (rows.len() + 2));
    text.push_str(provenance);
    text.push('\n');
    text.push_str(header);
    text.push('\n');
    for r in rows {
        text.push_str(r);
        text.push('\n');
    }
    fs::write(&path, text)?;
    Ok(path)
}

/// Machine-readable record of a failed command.
#[derive(Debug, Clone, PartialEq)]
pub struct FailureRecord {
    pub command: String,
    /// `config`, `run`, `error` or `checks`.
    pub kind: String,
    pub message: String,
    pub step: Option<usize>,
    pub failed_checks: Vec<String>,
    pub config_sha256: Option<String>,
}

impl FailureRecord {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "command": self.command,
            "kind": self.kind,
            "message": self.message,
            "step": self.step,
            "failed_checks": self.failed_checks,
            "config_sha256": self.config_sha256,
            "version": env!("CARGO_PKG_VERSION"),
        })
    }

    pub fn write(&self, dir: &Path) -> io::Result<PathBuf> {
        fs::create_dir_all(dir)?;
        let path = dir.join("failure.json");
        let text = serde_json::to_string_pretty(&self.to_json()).map_err(io::Error::other)?;
        fs::write(&path, text + "\n")?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_of_empty_input() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }
}
