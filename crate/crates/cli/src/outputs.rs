use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{hex, PipelineConfig};
use crate::fail::{CliError, CliResult, Context};

/// Inputs read and outputs produced by one subcommand. Outputs are held in
/// memory and only written by [`Run::commit`], so a failing run leaves no
/// files behind.
pub struct Run {
    root: PathBuf,
    inputs: BTreeMap<String, String>,
    files: BTreeMap<PathBuf, Vec<u8>>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    subcommand: &'a str,
    tasknet_version: &'a str,
    seed: u64,
    config_sha256: String,
    inputs: &'a BTreeMap<String, String>,
    outputs: BTreeMap<String, String>,
    config: &'a PipelineConfig,
}

fn digest(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

/// Fails with a usage error unless `path` exists.
pub fn require(path: Option<&Path>, what: &str) -> CliResult<PathBuf> {
    let p = path.ok_or_else(|| CliError::Usage(format!("no {what} path given")))?;
    if !p.exists() {
        return Err(CliError::Usage(format!(
            "{what} path {} does not exist",
            p.display()
        )));
    }
    Ok(p.to_path_buf())
}

impl Run {
    pub fn new(root: &Path) -> Self {
        Self {
            root: root.to_path_buf(),
            inputs: BTreeMap::new(),
            files: BTreeMap::new(),
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Reads an input file and records its digest.
    pub fn read(&mut self, path: &Path) -> CliResult<String> {
        if !path.exists() {
            return Err(CliError::Usage(format!(
                "input {} does not exist",
                path.display()
            )));
        }
        let bytes = fs::read(path).at(path)?;
        self.inputs.insert(path.display().to_string(), digest(&bytes));
        String::from_utf8(bytes).map_err(|_| CliError::Data(format!("{} is not UTF-8", path.display())))
    }

    pub fn read_bytes(&mut self, path: &Path) -> CliResult<Vec<u8>> {
        if !path.exists() {
            return Err(CliError::Usage(format!(
                "input {} does not exist",
                path.display()
            )));
        }
        let bytes = fs::read(path).at(path)?;
        self.inputs.insert(path.display().to_string(), digest(&bytes));
        Ok(bytes)
    }

    /// Buffer for an output at `rel` below the output directory.
    pub fn file(&mut self, rel: impl Into<PathBuf>) -> &mut Vec<u8> {
        self.files.entry(rel.into()).or_default()
    }

    pub fn put(&mut self, rel: impl Into<PathBuf>, bytes: Vec<u8>) {
        self.files.insert(rel.into(), bytes);
    }

    /// Writes every output plus `manifests/<subcommand>.toml`.
    pub fn commit(mut self, subcommand: &str, config: &PipelineConfig) -> CliResult<()> {
        let outputs = self
            .files
            .iter()
            .map(|(p, b)| (p.display().to_string(), digest(b)))
            .collect();
        let manifest = Manifest {
            subcommand,
            tasknet_version: env!("CARGO_PKG_VERSION"),
            seed: config.seed,
            config_sha256: config.sha256(),
            inputs: &self.inputs,
            outputs,
            config,
        };
        let text = toml::to_string(&manifest).expect("manifest serializes");
        self.files.insert(
            PathBuf::from("manifests").join(format!("{subcommand}.toml")),
            text.into_bytes(),
        );
        for (rel, bytes) in &self.files {
            let path = self.root.join(rel);
            if let Some(dir) = path.parent() {
                fs::create_dir_all(dir).at(dir)?;
            }
            fs::write(&path, bytes).at(&path)?;
            log::debug!("wrote {}", path.display());
        }
        log::info!(
            "{subcommand}: wrote {} files under {}",
            self.files.len(),
            self.root.display()
        );
        Ok(())
    }
}
