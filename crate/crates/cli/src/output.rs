//! Staged outputs committed by rename, with a run manifest alongside.
//!
//! Everything is written into a hidden staging directory next to the target.
//! Nothing becomes visible under the target name until [`Staging::commit`];
//! dropping an uncommitted staging area deletes it.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{io_at, CliError, CliResult};
use patdrift_core::YearWindow;

pub const RUN_MANIFEST: &str = "run_manifest.json";

enum Target {
    Dir(PathBuf),
    File(PathBuf),
}

pub struct Staging {
    target: Target,
    root: PathBuf,
    outputs: Vec<String>,
    committed: bool,
}

fn sibling(target: &Path, tag: &str) -> CliResult<PathBuf> {
    let name = target
        .file_name()
        .ok_or_else(|| CliError::Usage(format!("output path {} has no file name", target.display())))?;
    let parent = match target.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    Ok(parent.join(format!(".{}.{tag}-{}", name.to_string_lossy(), std::process::id())))
}

impl Staging {
    /// Stages files destined for the directory `target`.
    pub fn dir(target: &Path) -> CliResult<Staging> {
        Staging::new(Target::Dir(target.to_path_buf()))
    }

    /// Stages a single data file `target`; its manifest lands at
    /// `<target>.manifest.json`.
    pub fn file(target: &Path) -> CliResult<Staging> {
        Staging::new(Target::File(target.to_path_buf()))
    }

    fn new(target: Target) -> CliResult<Staging> {
        let path = match &target {
            Target::Dir(p) | Target::File(p) => p,
        };
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(io_at(parent))?;
        }
        let root = sibling(path, "staging")?;
        if root.exists() {
            fs::remove_dir_all(&root).map_err(io_at(&root))?;
        }
        fs::create_dir_all(&root).map_err(io_at(&root))?;
        Ok(Staging { target, root, outputs: Vec::new(), committed: false })
    }

    /// Staging path for output `name`, recorded in the manifest's output list.
    pub fn path(&mut self, name: &str) -> PathBuf {
        let recorded = match &self.target {
            Target::Dir(_) => name.to_string(),
            Target::File(p) => p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
        };
        if !self.outputs.contains(&recorded) {
            self.outputs.push(recorded);
        }
        self.root.join(name)
    }

    /// Staging directory itself, for writers that lay out several files;
    /// list them with [`Staging::record`].
    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn record(&mut self, name: &str) {
        self.path(name);
    }

    /// Staging path of the single data file in file mode.
    pub fn data_path(&mut self) -> PathBuf {
        self.path("data")
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        let path = self.path(name);
        write_json(&path, value)
    }

    pub fn csv(&mut self, name: &str) -> CliResult<csv::Writer<File>> {
        let path = self.path(name);
        Ok(csv::Writer::from_path(&path)?)
    }

    pub fn commit(mut self, manifest: &mut RunManifest) -> CliResult<()> {
        manifest.outputs = self.outputs.clone();
        manifest.finished_at = now();
        match &self.target {
            Target::Dir(target) => {
                write_json(&self.root.join(RUN_MANIFEST), manifest)?;
                let backup = sibling(target, "previous")?;
                let had_previous = target.exists();
                if had_previous {
                    fs::rename(target, &backup).map_err(io_at(target))?;
                }
                fs::rename(&self.root, target).map_err(io_at(target))?;
                if had_previous {
                    fs::remove_dir_all(&backup).map_err(io_at(&backup))?;
                }
            }
            Target::File(target) => {
                let manifest_path = manifest_path_for(target);
                let staged_manifest = self.root.join("manifest");
                write_json(&staged_manifest, manifest)?;
                fs::rename(self.root.join("data"), target).map_err(io_at(target))?;
                fs::rename(&staged_manifest, &manifest_path).map_err(io_at(&manifest_path))?;
                fs::remove_dir_all(&self.root).map_err(io_at(&self.root))?;
            }
        }
        self.committed = true;
        Ok(())
    }
}

impl Drop for Staging {
    fn drop(&mut self) {
        if !self.committed {
            let _ = fs::remove_dir_all(&self.root);
        }
    }
}

pub fn manifest_path_for(file: &Path) -> PathBuf {
    let mut name = file.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    file.with_file_name(name)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let file = File::create(path).map_err(io_at(path))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").map_err(io_at(path))?;
    w.flush().map_err(io_at(path))
}

/// Shortest round-trip decimal rendering; never exponent notation.
pub fn decimal(x: f64) -> String {
    format!("{x}")
}

pub fn optional_decimal(x: Option<f64>) -> String {
    x.map(decimal).unwrap_or_default()
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

#[derive(Clone, Debug, Serialize)]
pub struct InputDigest {
    pub role: String,
    pub path: String,
    pub sha256: String,
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let mut file = File::open(path).map_err(io_at(path))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 20];
    loop {
        let n = file.read(&mut buf).map_err(io_at(path))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

/// Digest of several files, order-sensitive.
pub fn sha256_files(paths: &[&Path]) -> CliResult<String> {
    let mut hasher = Sha256::new();
    for p in paths {
        hasher.update(sha256_file(p)?.as_bytes());
        hasher.update(b"\n");
    }
    Ok(hex::encode(hasher.finalize()))
}

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command_line: Vec<String>,
    pub subcommand: &'static str,
    /// SHA-256 over subcommand, version, parameters and input digests.
    pub config_hash: String,
    pub parameters: serde_json::Value,
    pub inputs: Vec<InputDigest>,
    pub labels: BTreeMap<String, String>,
    pub window: Option<YearWindow>,
    pub threads: usize,
    pub started_at: String,
    pub finished_at: String,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn start(subcommand: &'static str, parameters: serde_json::Value) -> RunManifest {
        RunManifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command_line: std::env::args().collect(),
            subcommand,
            config_hash: String::new(),
            parameters,
            inputs: Vec::new(),
            labels: BTreeMap::new(),
            window: None,
            threads: rayon::current_num_threads(),
            started_at: now(),
            finished_at: String::new(),
            outputs: Vec::new(),
        }
    }

    pub fn input(&mut self, role: &str, path: &Path, sha256: String) {
        self.inputs.push(InputDigest { role: role.to_string(), path: path.display().to_string(), sha256 });
    }

    pub fn label(&mut self, role: &str, label: &str) {
        self.labels.insert(role.to_string(), label.to_string());
    }

    /// Fixes `config_hash` from the fields that determine the outputs.
    pub fn seal(&mut self) -> CliResult<()> {
        #[derive(Serialize)]
        struct Hashed<'a> {
            subcommand: &'a str,
            version: &'a str,
            parameters: &'a serde_json::Value,
            window: Option<YearWindow>,
            inputs: Vec<(&'a str, &'a str)>,
        }
        let hashed = Hashed {
            subcommand: self.subcommand,
            version: self.version,
            parameters: &self.parameters,
            window: self.window,
            inputs: self.inputs.iter().map(|i| (i.role.as_str(), i.sha256.as_str())).collect(),
        };
        self.config_hash = hex::encode(Sha256::digest(serde_json::to_vec(&hashed)?));
        Ok(())
    }
}

/// Flushes a CSV writer, mapping the error to the file it belongs to.
pub fn finish_csv<W: Write>(mut w: csv::Writer<W>) -> CliResult<()> {
    w.flush().map_err(|source| CliError::Io { path: "csv output".into(), source })
}
