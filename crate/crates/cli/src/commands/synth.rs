use std::fs::File;
use std::io::BufReader;

use serde::Serialize;

use patdrift_core::snapshot::RowCounts;
use patdrift_core::synth::{generate, GeneratorConfig, GroupSizes};

use crate::error::{io_at, CliError, CliResult};
use crate::output::{sha256_file, RunManifest, Staging};
use crate::SynthArgs;

pub const TRUTH_FILE: &str = "ground_truth.json";

#[derive(Serialize)]
struct TruthSummary<'a> {
    config: &'a GeneratorConfig,
    sizes: GroupSizes,
    reclassification_share: Option<f64>,
    set_expansion_share: Option<f64>,
    class_level_rate: Option<f64>,
    old_rows: RowCounts,
    new_rows: RowCounts,
}

pub fn run(args: &SynthArgs) -> CliResult<()> {
    let mut config = match &args.config {
        Some(path) => {
            let file = File::open(path).map_err(io_at(path))?;
            serde_json::from_reader(BufReader::new(file))?
        }
        None => GeneratorConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(n) = args.n_families {
        config.n_families = n;
    }
    let mut manifest = RunManifest::start("synth", serde_json::to_value(&config)?);
    if let Some(path) = &args.config {
        manifest.input("config", path, sha256_file(path)?);
    }
    manifest.label("old", "old");
    manifest.label("new", "new");
    manifest.window = Some(config.year_range);
    manifest.seal()?;

    let pair = generate(&config)?;
    let mut out = Staging::dir(&args.out)?;
    for name in ["old", "new", "manifest.csv"] {
        out.record(name);
    }
    pair.write_dir(out.root()).map_err(|source| CliError::Io { path: args.out.display().to_string(), source })?;
    let t = &pair.truth;
    out.write_json(
        TRUTH_FILE,
        &TruthSummary {
            config: &config,
            sizes: t.sizes,
            reclassification_share: t.reclassification_share(),
            set_expansion_share: t.expansion_share(),
            class_level_rate: t.class_level_rate(),
            old_rows: t.old_rows,
            new_rows: t.new_rows,
        },
    )?;
    out.commit(&mut manifest)
}
