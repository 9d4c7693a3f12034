//! Output files. Every record carries the config hash and module versions.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::error::CliError;

const MODULES: [&str; 5] = [
    "potentials",
    "free_dynamics",
    "scattering",
    "xray",
    "oracle",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub config_hash: String,
    pub versions: Map<String, Value>,
}

impl Provenance {
    /// SHA-256 of the raw config text.
    pub fn new(config_text: &str) -> Self {
        let config_hash = hex::encode(Sha256::digest(config_text.as_bytes()));
        let mut versions = Map::new();
        for m in MODULES {
            versions.insert(m.to_string(), json!(lrscatter::VERSION));
        }
        versions.insert("cli".to_string(), json!(env!("CARGO_PKG_VERSION")));
        Provenance {
            config_hash,
            versions,
        }
    }

    /// `record` with the provenance fields added in front.
    pub fn stamp(&self, kind: &str, record: Value) -> Value {
        let mut out = Map::new();
        out.insert("config_hash".into(), json!(self.config_hash));
        out.insert("versions".into(), Value::Object(self.versions.clone()));
        out.insert("kind".into(), json!(kind));
        match record {
            Value::Object(fields) => out.extend(fields),
            other => {
                out.insert("value".into(), other);
            }
        }
        Value::Object(out)
    }
}

pub struct Outputs {
    dir: PathBuf,
    pub provenance: Provenance,
}

impl Outputs {
    pub fn create(dir: &Path, provenance: Provenance) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Outputs {
            dir: dir.to_path_buf(),
            provenance,
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Writes one JSON object per line.
    pub fn jsonl(
        &self,
        name: &str,
        kind: &str,
        records: impl IntoIterator<Item = Value>,
    ) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
        let mut w = BufWriter::new(file);
        for rec in records {
            let line = serde_json::to_string(&self.provenance.stamp(kind, rec))
                .expect("records serialize");
            writeln!(w, "{line}").map_err(|e| CliError::io(&path, e))?;
        }
        w.flush().map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }

    /// Writes a CSV table with a leading `config_hash` column.
    pub fn csv(
        &self,
        name: &str,
        header: &[String],
        rows: impl IntoIterator<Item = Vec<f64>>,
    ) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        let mut w = csv::Writer::from_path(&path).map_err(|e| CliError::io(&path, e.into()))?;
        let io = |e: csv::Error| CliError::io(&path, e.into());
        let mut head = vec!["config_hash".to_string()];
        head.extend(header.iter().cloned());
        w.write_record(&head).map_err(io)?;
        for row in rows {
            let mut rec = vec![self.provenance.config_hash.clone()];
            rec.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&rec).map_err(io)?;
        }
        w.flush().map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_is_stable_and_content_sensitive() {
        let a = Provenance::new("x = 1\n");
        assert_eq!(a, Provenance::new("x = 1\n"));
        assert_ne!(a.config_hash, Provenance::new("x = 2\n").config_hash);
        assert_eq!(a.config_hash.len(), 64);
    }

    #[test]
    fn stamped_record_keeps_fields() {
        let p = Provenance::new("");
        let r = p.stamp("scatter", json!({"a": 1}));
        assert_eq!(r["a"], 1);
        assert_eq!(r["kind"], "scatter");
        assert!(r["versions"]["scattering"].is_string());
    }
}
