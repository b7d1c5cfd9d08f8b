use std::collections::BTreeMap;
use std::fs::File;

use serde::Serialize;
use serde_json::json;

use patdrift_core::effects::{
    decompose, filtering_reduction, format_percent, parse_combination_csv, reclassification_share,
    set_expansion_share, share_of_total, table2_fixture, CombinationRow, Group, PartitionDiagnostics,
};
use patdrift_core::family::QualityFilter;
use patdrift_core::{Error, YearWindow};

use crate::error::{io_at, CliResult};
use crate::input::load_snapshot;
use crate::output::{decimal, finish_csv, optional_decimal, sha256_file, RunManifest, Staging};
use crate::EffectsArgs;

pub const SHARES_FILE: &str = "shares.json";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.json";
pub const HISTOGRAM_FILE: &str = "group_histograms.csv";
pub const REPLAY_FILE: &str = "table2_replay.csv";

pub fn group_file(g: Group) -> String {
    format!("group_{}.csv", g.name())
}

#[derive(Serialize)]
struct PairShares {
    window: YearWindow,
    group_sizes: BTreeMap<&'static str, u64>,
    green_old_in_window: u64,
    green_new_in_window: u64,
    reclassification_share: Option<f64>,
    set_expansion_share: Option<f64>,
    reclassification_share_pct: Option<String>,
    set_expansion_share_pct: Option<String>,
}

pub fn run(args: &EffectsArgs) -> CliResult<()> {
    if args.replay_table2 {
        return replay(args);
    }
    let window = args.window.window()?;
    let mut manifest = RunManifest::start("effects", json!({}));
    manifest.window = Some(window);
    let old = load_snapshot(args.old.as_deref().expect("required by clap"), "old", &mut manifest)?;
    let new = load_snapshot(args.new.as_deref().expect("required by clap"), "new", &mut manifest)?;
    manifest.seal()?;

    let partition = decompose(&old.families, &new.families, window)?;
    let green_new = partition.diagnostics.new_green_in_window;
    let reclass = partition.reclassification_share(green_new).ok();
    let expansion = partition.set_expansion_share(green_new).ok();
    let shares = PairShares {
        window,
        group_sizes: Group::ALL.iter().map(|&g| (g.name(), partition.group(g).len() as u64)).collect(),
        green_old_in_window: partition.diagnostics.old_green_in_window,
        green_new_in_window: green_new,
        reclassification_share: reclass,
        set_expansion_share: expansion,
        reclassification_share_pct: reclass.map(format_percent),
        set_expansion_share_pct: expansion.map(format_percent),
    };

    let mut out = Staging::dir(&args.out)?;
    for g in Group::ALL {
        let mut w = out.csv(&group_file(g))?;
        w.write_record(["family_id", "earliest_year"])?;
        for id in partition.group(g) {
            let f = new.families.get(*id).expect("group members come from the newer release");
            w.write_record([id.to_string(), f.earliest_year.to_string()])?;
        }
        finish_csv(w)?;
    }
    let mut w = out.csv(HISTOGRAM_FILE)?;
    w.write_record(["year", "a", "b", "c", "d"])?;
    for y in window.years() {
        let mut rec = vec![y.to_string()];
        for g in Group::ALL {
            rec.push(partition.histograms[&g].get(&y).copied().unwrap_or(0).to_string());
        }
        w.write_record(&rec)?;
    }
    finish_csv(w)?;
    out.write_json(SHARES_FILE, &shares)?;
    out.write_json::<PartitionDiagnostics>(DIAGNOSTICS_FILE, &partition.diagnostics)?;
    out.commit(&mut manifest)
}

/// Shares derived from one combination-table row.
#[derive(Clone, Debug, Serialize)]
pub struct ReplayRow {
    pub filter: QualityFilter,
    pub count_old: u64,
    pub count_new: u64,
    pub reclassification: u64,
    pub set_expansion: u64,
    /// `reclassification / (count_new - set_expansion)`.
    pub reclassification_share: Option<f64>,
    /// `set_expansion / (count_new - reclassification)`.
    pub set_expansion_share: Option<f64>,
    pub reclassification_of_new: Option<f64>,
    pub set_expansion_of_new: Option<f64>,
    /// `1 - count_new / count_new(unfiltered)`.
    pub filtering_reduction: Option<f64>,
}

pub fn replay_rows(rows: &[CombinationRow]) -> Vec<ReplayRow> {
    let unfiltered = rows.iter().find(|r| r.filter == QualityFilter::None).map(|r| r.count_new);
    rows.iter()
        .map(|r| ReplayRow {
            filter: r.filter,
            count_old: r.count_old,
            count_new: r.count_new,
            reclassification: r.count_reclass,
            set_expansion: r.count_expansion,
            reclassification_share: reclassification_share(r.count_reclass, r.count_expansion, r.count_new).ok(),
            set_expansion_share: set_expansion_share(r.count_reclass, r.count_expansion, r.count_new).ok(),
            reclassification_of_new: share_of_total(r.count_reclass, r.count_new).ok(),
            set_expansion_of_new: share_of_total(r.count_expansion, r.count_new).ok(),
            filtering_reduction: unfiltered.and_then(|u| filtering_reduction(u, r.count_new).ok()),
        })
        .collect()
}

#[derive(Serialize)]
struct ReplayShares {
    source: String,
    reclassification_share: f64,
    set_expansion_share: f64,
    reclassification_share_pct: String,
    set_expansion_share_pct: String,
    rows: Vec<ReplayRow>,
}

fn replay(args: &EffectsArgs) -> CliResult<()> {
    let mut manifest = RunManifest::start("effects", json!({ "replay_table2": true }));
    let (rows, source) = match &args.fixture {
        Some(path) => {
            manifest.input("fixture", path, sha256_file(path)?);
            let file = File::open(path).map_err(io_at(path))?;
            (parse_combination_csv(file)?, path.display().to_string())
        }
        None => (table2_fixture(), "embedded".to_string()),
    };
    manifest.seal()?;

    let derived = replay_rows(&rows);
    let none = derived
        .iter()
        .find(|r| r.filter == QualityFilter::None)
        .ok_or_else(|| Error::Config("combination table has no unfiltered row".into()))?;
    let reclass = none
        .reclassification_share
        .ok_or(Error::DivisionByZero("unfiltered reclassification share"))?;
    let expansion = none
        .set_expansion_share
        .ok_or(Error::DivisionByZero("unfiltered set-expansion share"))?;

    let mut out = Staging::dir(&args.out)?;
    let mut w = out.csv(REPLAY_FILE)?;
    w.write_record([
        "filter",
        "count_old",
        "count_new",
        "reclassification",
        "set_expansion",
        "reclassification_share",
        "set_expansion_share",
        "reclassification_of_new",
        "set_expansion_of_new",
        "filtering_reduction",
    ])?;
    for r in &derived {
        w.write_record([
            r.filter.name().to_string(),
            r.count_old.to_string(),
            r.count_new.to_string(),
            r.reclassification.to_string(),
            r.set_expansion.to_string(),
            optional_decimal(r.reclassification_share),
            optional_decimal(r.set_expansion_share),
            optional_decimal(r.reclassification_of_new),
            optional_decimal(r.set_expansion_of_new),
            optional_decimal(r.filtering_reduction),
        ])?;
    }
    finish_csv(w)?;
    let shares = ReplayShares {
        source,
        reclassification_share: reclass,
        set_expansion_share: expansion,
        reclassification_share_pct: format_percent(reclass),
        set_expansion_share_pct: format_percent(expansion),
        rows: derived,
    };
    out.write_json(SHARES_FILE, &shares)?;
    println!(
        "reclassification {} ({})  set expansion {} ({})",
        format_percent(reclass),
        decimal(reclass),
        format_percent(expansion),
        decimal(expansion)
    );
    out.commit(&mut manifest)
}
