//! Snapshot inputs: a directory holding either `store.bin` (from `ingest`)
//! or the three raw TSV tables.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use patdrift_core::citation::build_cited_families;
use patdrift_core::family::Families;
use patdrift_core::snapshot::{ingest_snapshot, read_store, SnapshotPaths, SnapshotStore};
use patdrift_core::Error;

use crate::error::{io_at, CliResult};
use crate::output::{sha256_file, sha256_files, RunManifest};

pub const STORE_FILE: &str = "store.bin";

pub struct Snapshot {
    pub store: SnapshotStore,
    pub families: Families,
}

fn default_label(dir: &Path) -> String {
    dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "snapshot".into())
}

/// Loads the store in `dir`, registering its digest and label on `manifest`.
pub fn load_store(dir: &Path, role: &str, manifest: &mut RunManifest) -> CliResult<SnapshotStore> {
    let store_path: PathBuf = dir.join(STORE_FILE);
    let store = if store_path.is_file() {
        let file = File::open(&store_path).map_err(io_at(&store_path))?;
        let store = read_store(BufReader::new(file))?;
        manifest.input(role, &store_path, sha256_file(&store_path)?);
        store
    } else {
        let paths = SnapshotPaths::in_dir(dir);
        if !paths.applications.is_file() {
            return Err(Error::Config(format!(
                "{} holds neither {STORE_FILE} nor applications.tsv",
                dir.display()
            ))
            .into());
        }
        let (store, _) = ingest_snapshot(&paths, &default_label(dir))?;
        let digest = sha256_files(&[&paths.applications, &paths.classifications, &paths.citations])?;
        manifest.input(role, dir, digest);
        store
    };
    manifest.label(role, store.label());
    Ok(store)
}

/// Store plus family records with forward citations.
pub fn load_snapshot(dir: &Path, role: &str, manifest: &mut RunManifest) -> CliResult<Snapshot> {
    let store = load_store(dir, role, manifest)?;
    let families = build_cited_families(&store)?;
    Ok(Snapshot { store, families })
}
