use serde_json::json;

use patdrift_core::effects::{decompose, Group};
use patdrift_core::family::{FamilyRecord, QualityFilter};
use patdrift_core::stats::{rank_by_group, rank_by_office};
use patdrift_core::Error;

use crate::error::CliResult;
use crate::input::load_snapshot;
use crate::output::{finish_csv, optional_decimal, RunManifest, Staging};
use crate::{RankArgs, RankBy, RankOrder, RankReference, RankSet};

pub const RANK_HEADER: [&str; 5] = ["rank", "key", "count", "reference", "share"];

fn name<T: clap::ValueEnum>(v: &T) -> String {
    v.to_possible_value().expect("no skipped variants").get_name().to_string()
}

pub fn run(args: &RankArgs) -> CliResult<()> {
    let window = args.window.window()?;
    let filter = QualityFilter::from(args.filter);
    let mut manifest = RunManifest::start(
        "rank",
        json!({
            "by": name(&args.by),
            "set": name(&args.set),
            "reference": name(&args.reference),
            "filter": filter.name(),
            "top": args.top,
            "order": name(&args.order),
        }),
    );
    manifest.window = Some(window);
    let needs_old = matches!(args.set, RankSet::Reclass | RankSet::Expansion);
    let old = match (&args.old, needs_old) {
        (Some(dir), true) => Some(load_snapshot(dir, "old", &mut manifest)?),
        (None, true) => {
            return Err(Error::Config(format!("--set {} needs --old", name(&args.set))).into());
        }
        (_, false) => None,
    };
    let new = load_snapshot(&args.new, "new", &mut manifest)?;
    manifest.seal()?;

    let in_window = |f: &&FamilyRecord| window.contains(f.earliest_year);
    let passes = |f: &FamilyRecord| filter.matches(f);
    let mut set: Vec<&FamilyRecord> = Vec::new();
    match (args.set, &old) {
        (RankSet::Reclass | RankSet::Expansion, Some(old)) => {
            let partition = decompose(&old.families, &new.families, window)?;
            let g = if args.set == RankSet::Reclass { Group::C } else { Group::D };
            for id in partition.group(g) {
                set.push(new.families.get(*id).expect("group members come from the newer release"));
            }
        }
        (RankSet::Filtered | RankSet::Green, _) => set.extend(new.families.green().filter(in_window)),
        _ => unreachable!("old snapshot loaded for group sets"),
    }
    let mut kept = Vec::with_capacity(set.len());
    for f in set {
        if passes(f)? {
            kept.push(f);
        }
    }
    let mut reference = Vec::new();
    for f in new.families.iter().filter(in_window) {
        if (args.reference == RankReference::All || f.is_green) && passes(f)? {
            reference.push(f);
        }
    }
    let ranking = match args.by {
        RankBy::Group => rank_by_group(kept, reference, args.top),
        RankBy::Office => rank_by_office(kept, reference, args.top),
    };
    let entries = match args.order {
        RankOrder::Absolute => &ranking.by_absolute,
        RankOrder::Share => &ranking.by_share,
    };

    let mut out = Staging::file(&args.out)?;
    let mut w = csv::Writer::from_path(out.data_path())?;
    w.write_record(RANK_HEADER)?;
    for (i, e) in entries.iter().enumerate() {
        w.write_record([
            (i + 1).to_string(),
            e.key.clone(),
            e.absolute.to_string(),
            e.reference.to_string(),
            optional_decimal(e.share),
        ])?;
    }
    finish_csv(w)?;
    out.commit(&mut manifest)
}
