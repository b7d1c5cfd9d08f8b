use std::fs::File;
use std::io::BufWriter;

use serde_json::json;

use patdrift_core::snapshot::{ingest_snapshot, write_store, SnapshotPaths};

use crate::error::{io_at, CliResult};
use crate::input::STORE_FILE;
use crate::output::{sha256_file, RunManifest, Staging};
use crate::IngestArgs;

pub const REPORT_FILE: &str = "ingest_report.json";

pub fn run(args: &IngestArgs) -> CliResult<()> {
    let paths = match &args.dir {
        Some(dir) => SnapshotPaths::in_dir(dir),
        None => SnapshotPaths {
            applications: args.applications.clone().expect("required by clap"),
            classifications: args.classifications.clone().expect("required by clap"),
            citations: args.citations.clone().expect("required by clap"),
        },
    };
    let mut manifest = RunManifest::start("ingest", json!({ "label": args.label }));
    for (role, p) in [
        ("applications", &paths.applications),
        ("classifications", &paths.classifications),
        ("citations", &paths.citations),
    ] {
        manifest.input(role, p, sha256_file(p)?);
    }
    manifest.label("snapshot", &args.label);
    manifest.seal()?;

    let (store, report) = ingest_snapshot(&paths, &args.label)?;

    let mut out = Staging::dir(&args.out)?;
    let store_path = out.path(STORE_FILE);
    let file = File::create(&store_path).map_err(io_at(&store_path))?;
    write_store(&store, BufWriter::new(file))?;
    out.write_json(REPORT_FILE, &report)?;
    out.commit(&mut manifest)
}
