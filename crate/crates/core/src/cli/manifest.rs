use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "coforge.json";
pub const MANIFEST_VERSION: u32 = 1;

/// A file produced by a command, with the hashes of the artifacts it was built from.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    /// Relative to the workspace directory.
    pub path: PathBuf,
    pub sha256: String,
    #[serde(default)]
    pub inputs: BTreeMap<String, String>,
}

/// Index of every artifact in a workspace directory.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkspaceManifest {
    pub version: u32,
    pub artifacts: BTreeMap<String, Artifact>,
}

impl Default for WorkspaceManifest {
    fn default() -> Self {
        WorkspaceManifest {
            version: MANIFEST_VERSION,
            artifacts: BTreeMap::new(),
        }
    }
}

pub fn file_sha256(path: &Path) -> Result<String> {
    Ok(hex::encode(Sha256::digest(std::fs::read(path)?)))
}

impl WorkspaceManifest {
    /// Reads the manifest of `dir`; an absent manifest is an empty workspace.
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        if !path.exists() {
            return Ok(WorkspaceManifest::default());
        }
        let m: WorkspaceManifest = serde_json::from_slice(&std::fs::read(&path)?)?;
        if m.version != MANIFEST_VERSION {
            return Err(Error::config(format!(
                "manifest version {} is not supported (expected {MANIFEST_VERSION})",
                m.version
            )));
        }
        Ok(m)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(self)?;
        bytes.push(b'\n');
        std::fs::write(dir.join(MANIFEST_FILE), bytes)?;
        Ok(())
    }

    /// Registers `rel` under `name`, remembering the current hashes of `inputs`.
    pub fn record(&mut self, dir: &Path, name: &str, rel: impl Into<PathBuf>, inputs: &[&str]) -> Result<()> {
        let rel = rel.into();
        let sha256 = file_sha256(&dir.join(&rel))?;
        let mut deps = BTreeMap::new();
        for &i in inputs {
            let a = self.artifacts.get(i).ok_or_else(|| Error::Stale {
                name: i.to_string(),
                path: PathBuf::new(),
                reason: format!("needed to record `{name}` but not in the manifest"),
            })?;
            deps.insert(i.to_string(), a.sha256.clone());
        }
        self.artifacts.insert(name.to_string(), Artifact { path: rel, sha256, inputs: deps });
        Ok(())
    }

    pub fn contains(&self, name: &str) -> bool {
        self.artifacts.contains_key(name)
    }

    /// Resolves `name` to an existing, unmodified file whose inputs are current.
    ///
    /// `expected` names the file for the error when the artifact was never built.
    pub fn require(&self, dir: &Path, name: &str, expected: &str, hint: &str) -> Result<PathBuf> {
        let a = self.artifacts.get(name).ok_or_else(|| Error::Stale {
            name: name.to_string(),
            path: dir.join(expected),
            reason: format!("not built; run `{hint}` first"),
        })?;
        let path = dir.join(&a.path);
        let stale = |reason: String| Error::Stale {
            name: name.to_string(),
            path: path.clone(),
            reason,
        };
        if !path.exists() {
            return Err(stale("file is missing".into()));
        }
        if file_sha256(&path)? != a.sha256 {
            return Err(stale("contents changed since it was recorded".into()));
        }
        for (dep, sha) in &a.inputs {
            match self.artifacts.get(dep) {
                Some(d) if &d.sha256 == sha => {}
                Some(_) => return Err(stale(format!("input `{dep}` was rebuilt; rerun `{hint}`"))),
                None => return Err(stale(format!("input `{dep}` is no longer in the manifest"))),
            }
        }
        Ok(path)
    }

    /// Names with the given prefix, in order.
    pub fn names_with_prefix<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.artifacts.keys().filter(move |k| k.starts_with(prefix)).map(String::as_str)
    }
}

/// Independent stream seed for `label` derived from the global seed.
pub fn sub_seed(seed: u64, label: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(label.as_bytes());
    u64::from_le_bytes(h.finalize()[..8].try_into().expect("8 bytes"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stale_detection() {
        let dir = tempfile::tempdir().unwrap();
        let d = dir.path();
        std::fs::write(d.join("a.txt"), "one").unwrap();
        let mut m = WorkspaceManifest::default();
        m.record(d, "a", "a.txt", &[]).unwrap();
        std::fs::write(d.join("b.txt"), "two").unwrap();
        m.record(d, "b", "b.txt", &["a"]).unwrap();
        m.save(d).unwrap();
        let m = WorkspaceManifest::load(d).unwrap();
        assert!(m.require(d, "b", "b.txt", "make b").is_ok());

        std::fs::write(d.join("b.txt"), "changed").unwrap();
        let err = m.require(d, "b", "b.txt", "make b").unwrap_err();
        assert!(matches!(err, Error::Stale { ref name, .. } if name == "b"));

        std::fs::write(d.join("b.txt"), "two").unwrap();
        let mut m2 = m.clone();
        std::fs::write(d.join("a.txt"), "one again").unwrap();
        m2.record(d, "a", "a.txt", &[]).unwrap();
        assert!(m2.require(d, "a", "a.txt", "make a").is_ok());
        let err = m2.require(d, "b", "b.txt", "make b").unwrap_err();
        assert!(err.to_string().contains("input `a` was rebuilt"), "{err}");

        let err = m2.require(d, "model", "models/latency.json", "train-pred").unwrap_err();
        assert!(err.to_string().contains("models/latency.json"));
    }

    #[test]
    fn sub_seeds_differ_by_label_and_seed() {
        assert_ne!(sub_seed(42, "data"), sub_seed(42, "search"));
        assert_ne!(sub_seed(42, "data"), sub_seed(43, "data"));
        assert_eq!(sub_seed(42, "data"), sub_seed(42, "data"));
    }
}
