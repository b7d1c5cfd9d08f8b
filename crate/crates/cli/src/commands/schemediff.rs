use std::collections::BTreeSet;
use std::fs::File;
use std::io::BufReader;

use serde_json::json;

use patdrift_core::cpc::{read_scheme, scheme_diff, CpcSymbol};

use crate::error::{io_at, CliResult};
use crate::output::{finish_csv, sha256_file, RunManifest, Staging};
use crate::SchemediffArgs;

pub const SCHEMEDIFF_HEADER: [&str; 9] = [
    "subclass",
    "deleted",
    "added",
    "retitled",
    "indent_changed",
    "deleted_codes",
    "added_codes",
    "retitled_codes",
    "indent_changed_codes",
];

fn codes(set: &BTreeSet<CpcSymbol>) -> String {
    set.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(";")
}

pub fn run(args: &SchemediffArgs) -> CliResult<()> {
    let mut manifest = RunManifest::start("schemediff", json!({}));
    manifest.input("old", &args.old, sha256_file(&args.old)?);
    manifest.input("new", &args.new, sha256_file(&args.new)?);
    manifest.seal()?;
    let read = |path: &std::path::Path| -> CliResult<_> {
        let file = File::open(path).map_err(io_at(path))?;
        Ok(read_scheme(BufReader::new(file), &path.display().to_string())?)
    };
    let deltas = scheme_diff(&read(&args.old)?, &read(&args.new)?)?;

    let mut out = Staging::file(&args.out)?;
    let mut w = csv::Writer::from_path(out.data_path())?;
    w.write_record(SCHEMEDIFF_HEADER)?;
    for d in &deltas {
        let mut rec = vec![d.subclass.clone()];
        rec.extend(d.marks().iter().map(|&m| if m { "X" } else { "" }.to_string()));
        rec.extend([&d.deleted, &d.added, &d.retitled, &d.indent_changed].map(codes));
        w.write_record(&rec)?;
    }
    finish_csv(w)?;
    out.commit(&mut manifest)
}
