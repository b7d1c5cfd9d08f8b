use serde_json::json;

use patdrift_core::effects::{combination_table, decompose, TABLE2_HEADER};
use patdrift_core::family::QualityFilter;

use crate::error::CliResult;
use crate::input::load_snapshot;
use crate::output::{finish_csv, RunManifest, Staging};
use crate::Table2Args;

pub fn run(args: &Table2Args) -> CliResult<()> {
    let window = args.window.window()?;
    let mut manifest = RunManifest::start("table2", json!({}));
    manifest.window = Some(window);
    let old = load_snapshot(&args.old, "old", &mut manifest)?;
    let new = load_snapshot(&args.new, "new", &mut manifest)?;
    manifest.seal()?;

    let partition = decompose(&old.families, &new.families, window)?;
    let rows = combination_table(&old.families, &new.families, &partition, &QualityFilter::ALL)?;

    let mut out = Staging::file(&args.out)?;
    let path = out.data_path();
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(TABLE2_HEADER)?;
    for r in rows {
        w.write_record([
            r.filter.name().to_string(),
            r.count_old.to_string(),
            r.count_new.to_string(),
            r.count_reclass.to_string(),
            r.count_expansion.to_string(),
        ])?;
    }
    finish_csv(w)?;
    out.commit(&mut manifest)
}
