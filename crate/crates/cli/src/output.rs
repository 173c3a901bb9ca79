//! Artifact writing with config-hash guards.

use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use crate::CliError;

pub const HASH_KEY: &str = "config_hash=";

/// SHA-256 over the given config parts, each length-prefixed so that
/// boundaries cannot shift.
pub fn config_hash(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    hex::encode(h.finalize())
}

fn embedded_hash(text: &str) -> Option<&str> {
    text.lines().take(32).find_map(|l| l.find(HASH_KEY).map(|i| l[i + HASH_KEY.len()..].trim_end_matches(" -->").trim()))
}

pub fn timestamp_line() -> String {
    let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    format!("# generated_unix={secs}\n")
}

/// A batch of files that share one config hash. Nothing is written until
/// every target has been checked.
pub struct Artifacts {
    dir: PathBuf,
    hash: String,
    files: Vec<(PathBuf, String)>,
}

impl Artifacts {
    pub fn new(dir: &Path, hash: String) -> Self {
        Self { dir: dir.to_path_buf(), hash, files: vec![] }
    }

    /// CSV-like text: hash and timestamp lines, then `body` (which may carry
    /// its own `#` metadata).
    pub fn add_text(&mut self, name: &str, body: &str) {
        let text = format!("# {HASH_KEY}{}\n{}{body}", self.hash, timestamp_line());
        self.files.push((self.dir.join(name), text));
    }

    /// SVG: the hash goes into a comment after the XML prolog if present.
    pub fn add_svg(&mut self, name: &str, svg: &str) {
        let comment = format!("<!-- {HASH_KEY}{} -->\n", self.hash);
        let text = match svg.find("?>") {
            Some(i) if svg.starts_with("<?xml") => format!("{}\n{comment}{}", &svg[..i + 2], svg[i + 2..].trim_start()),
            _ => format!("{comment}{svg}"),
        };
        self.files.push((self.dir.join(name), text));
    }

    pub fn write(self, force: bool) -> Result<Vec<PathBuf>, CliError> {
        for (path, _) in &self.files {
            if !path.exists() || force {
                continue;
            }
            let old = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            match embedded_hash(&old) {
                Some(h) if h == self.hash => {}
                found => {
                    return Err(CliError::new(
                        "hash_mismatch",
                        format!(
                            "{} was produced by config {}; rerun with --force to overwrite",
                            path.display(),
                            found.unwrap_or("<none>")
                        ),
                    )
                    .with("path", path.display().to_string()))
                }
            }
        }
        std::fs::create_dir_all(&self.dir).map_err(|e| CliError::io(&self.dir, e))?;
        let mut written = Vec::new();
        for (path, text) in self.files {
            std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
            written.push(path);
        }
        Ok(written)
    }
}
