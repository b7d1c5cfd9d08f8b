use serde_json::json;

use patdrift_core::effects::{decompose, Group};
use patdrift_core::family::{FamilyRecord, QualityFilter};
use patdrift_core::stats::family_trend;

use crate::error::CliResult;
use crate::input::load_snapshot;
use crate::output::{finish_csv, RunManifest, Staging};
use crate::{GroupArg, Population, TrendsArgs};

fn group(g: GroupArg) -> Group {
    match g {
        GroupArg::A => Group::A,
        GroupArg::B => Group::B,
        GroupArg::C => Group::C,
        GroupArg::D => Group::D,
    }
}

fn keep(filter: QualityFilter, selected: Vec<&FamilyRecord>) -> CliResult<Vec<&FamilyRecord>> {
    let mut out = Vec::with_capacity(selected.len());
    for f in selected {
        if filter.matches(f)? {
            out.push(f);
        }
    }
    Ok(out)
}

pub fn run(args: &TrendsArgs) -> CliResult<()> {
    let window = args.window.window()?;
    let filter = QualityFilter::from(args.filter);
    let (mut manifest, series) = match (&args.input, args.group) {
        (Some(input), _) => {
            let population = match args.population {
                Population::Green => "green",
                Population::All => "all",
            };
            let mut manifest = RunManifest::start(
                "trends",
                json!({ "population": population, "filter": filter.name() }),
            );
            manifest.window = Some(window);
            let snap = load_snapshot(input, "input", &mut manifest)?;
            manifest.seal()?;
            let selected: Vec<&FamilyRecord> = snap
                .families
                .iter()
                .filter(|f| args.population == Population::All || f.is_green)
                .collect();
            let label = format!("{population}/{}", filter.name());
            (manifest, family_trend(&label, keep(filter, selected)?, window))
        }
        (None, Some(g)) => {
            let g = group(g);
            let mut manifest =
                RunManifest::start("trends", json!({ "group": g.name(), "filter": filter.name() }));
            manifest.window = Some(window);
            let old = load_snapshot(args.old.as_deref().expect("required by clap"), "old", &mut manifest)?;
            let new = load_snapshot(args.new.as_deref().expect("required by clap"), "new", &mut manifest)?;
            manifest.seal()?;
            let partition = decompose(&old.families, &new.families, window)?;
            let selected: Vec<&FamilyRecord> = partition
                .group(g)
                .iter()
                .map(|id| new.families.get(*id).expect("group members come from the newer release"))
                .collect();
            let label = format!("group_{}/{}", g.name(), filter.name());
            (manifest, family_trend(&label, keep(filter, selected)?, window))
        }
        (None, None) => unreachable!("clap requires --input or --group"),
    };
    manifest.label("series", &series.label);

    let mut out = Staging::file(&args.out)?;
    let mut w = csv::Writer::from_path(out.data_path())?;
    w.write_record(["year", "count"])?;
    for (year, count) in &series.points {
        w.write_record([year.to_string(), count.to_string()])?;
    }
    finish_csv(w)?;
    out.commit(&mut manifest)
}
