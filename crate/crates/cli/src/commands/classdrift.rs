use serde::Serialize;
use serde_json::json;

use patdrift_core::cpc::Level;
use patdrift_core::stats::{
    class_assignments, fit_class_drift, general_reclassification, top_turbulent_classes, FitResult,
    TurbulenceMode, TurbulentClass,
};
use patdrift_core::YearWindow;

use crate::error::CliResult;
use crate::input::load_snapshot;
use crate::output::{decimal, finish_csv, RunManifest, Staging};
use crate::{ClassdriftArgs, LevelArg};

pub const POINTS_FILE: &str = "class_points.csv";
pub const FITS_FILE: &str = "fits.json";
pub const SUMMARY_FILE: &str = "summary.json";
pub const TOP_ABSOLUTE_FILE: &str = "top_absolute.csv";
pub const TOP_RELATIVE_FILE: &str = "top_relative.csv";

#[derive(Serialize)]
#[serde(rename_all = "snake_case")]
enum FitOutcome {
    Fit(FitResult),
    Error(String),
}

impl From<patdrift_core::Result<FitResult>> for FitOutcome {
    fn from(r: patdrift_core::Result<FitResult>) -> Self {
        match r {
            Ok(f) => FitOutcome::Fit(f),
            Err(e) => FitOutcome::Error(e.to_string()),
        }
    }
}

#[derive(Serialize)]
struct Fits {
    min_size: u64,
    added: FitOutcome,
    removed: FitOutcome,
}

#[derive(Serialize)]
struct Summary {
    level: Level,
    window: YearWindow,
    classes: usize,
    /// Σ(added + removed) / Σ size_new.
    aggregate_rate: f64,
    /// Mean of the per-class rates.
    mean_class_rate: f64,
}

pub fn run(args: &ClassdriftArgs) -> CliResult<()> {
    let window = args.window.window()?;
    let level = match args.level {
        LevelArg::Class => Level::Class,
        LevelArg::Subclass => Level::Subclass,
    };
    let mut manifest = RunManifest::start(
        "classdrift",
        json!({ "level": level, "min_size": args.min_size, "top": args.top }),
    );
    manifest.window = Some(window);
    let old = load_snapshot(&args.old, "old", &mut manifest)?;
    let new = load_snapshot(&args.new, "new", &mut manifest)?;
    manifest.seal()?;

    let drift = general_reclassification(
        &class_assignments(&old.store, &old.families, level),
        &class_assignments(&new.store, &new.families, level),
        window,
    )?;
    let fits = fit_class_drift(&drift.points, args.min_size);

    let mut out = Staging::dir(&args.out)?;
    let mut w = out.csv(POINTS_FILE)?;
    w.write_record(["class_code", "size_new", "added", "removed"])?;
    for p in &drift.points {
        w.write_record([p.class_code.clone(), p.size_new.to_string(), p.added.to_string(), p.removed.to_string()])?;
    }
    finish_csv(w)?;
    for (name, mode) in [(TOP_ABSOLUTE_FILE, TurbulenceMode::Absolute), (TOP_RELATIVE_FILE, TurbulenceMode::Relative)] {
        let top: Vec<TurbulentClass> = top_turbulent_classes(&drift.points, args.top, mode, args.min_size);
        let mut w = out.csv(name)?;
        w.write_record(["rank", "class_code", "size_new", "added", "removed", "score"])?;
        for (i, t) in top.iter().enumerate() {
            w.write_record([
                (i + 1).to_string(),
                t.class_code.clone(),
                t.size_new.to_string(),
                t.added.to_string(),
                t.removed.to_string(),
                decimal(t.score),
            ])?;
        }
        finish_csv(w)?;
    }
    out.write_json(
        FITS_FILE,
        &Fits { min_size: args.min_size, added: fits.added.into(), removed: fits.removed.into() },
    )?;
    out.write_json(
        SUMMARY_FILE,
        &Summary {
            level,
            window,
            classes: drift.points.len(),
            aggregate_rate: drift.aggregate_rate,
            mean_class_rate: drift.mean_class_rate,
        },
    )?;
    out.commit(&mut manifest)
}
