//! `patdrift`: reproducible measurement runs over patent database snapshots.

mod commands;
mod error;
mod input;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use error::{error_json, CliError, CliResult, ErrorKind};
use patdrift_core::YearWindow;

#[derive(Parser, Debug)]
#[command(name = "patdrift", version, about = "Measure reclassification, set-expansion and filtering effects between patent database snapshots")]
pub struct Cli {
    /// Worker threads; defaults to all available cores. Outputs do not depend on it.
    #[arg(long, global = true, env = "PATDRIFT_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Parse the three TSV tables of one release into a binary store.
    Ingest(IngestArgs),
    /// Split the green families of two releases into groups A-D and compute the shares.
    Effects(EffectsArgs),
    /// Green counts per quality filter in both releases and within groups C and D.
    Table2(Table2Args),
    /// Family counts per earliest year.
    Trends(TrendsArgs),
    /// Rank Y02 groups or filing offices.
    Rank(RankArgs),
    /// Class-level reclassification, log-log fits and turbulence rankings.
    Classdrift(ClassdriftArgs),
    /// Compare two versions of a classification scheme.
    Schemediff(SchemediffArgs),
    /// Generate a synthetic release pair with a ground-truth manifest.
    Synth(SynthArgs),
}

#[derive(Args, Debug, Clone, Copy)]
pub struct WindowArgs {
    /// First earliest-priority year, inclusive.
    #[arg(long, default_value_t = YearWindow::DEFAULT.from)]
    pub from: i32,
    /// Last earliest-priority year, inclusive.
    #[arg(long, default_value_t = YearWindow::DEFAULT.to)]
    pub to: i32,
}

impl WindowArgs {
    pub fn window(&self) -> CliResult<YearWindow> {
        Ok(YearWindow::new(self.from, self.to)?)
    }
}

#[derive(Args, Debug)]
pub struct IngestArgs {
    #[arg(long, required_unless_present = "dir")]
    pub applications: Option<PathBuf>,
    #[arg(long, required_unless_present = "dir")]
    pub classifications: Option<PathBuf>,
    #[arg(long, required_unless_present = "dir")]
    pub citations: Option<PathBuf>,
    /// Directory holding applications.tsv, classifications.tsv and citations.tsv.
    #[arg(long, conflicts_with_all = ["applications", "classifications", "citations"])]
    pub dir: Option<PathBuf>,
    /// Release label stored with the snapshot, e.g. "2023".
    #[arg(long)]
    pub label: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct EffectsArgs {
    /// Older release (store directory or TSV directory).
    #[arg(long, required_unless_present = "replay_table2")]
    pub old: Option<PathBuf>,
    /// Newer release.
    #[arg(long, required_unless_present = "replay_table2")]
    pub new: Option<PathBuf>,
    /// Recompute the shares from a published combination table instead of snapshots.
    #[arg(long, conflicts_with_all = ["old", "new"])]
    pub replay_table2: bool,
    /// Combination table CSV for --replay-table2; the embedded 2019/2023 table by default.
    #[arg(long, requires = "replay_table2")]
    pub fixture: Option<PathBuf>,
    #[command(flatten)]
    pub window: WindowArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct Table2Args {
    #[arg(long)]
    pub old: PathBuf,
    #[arg(long)]
    pub new: PathBuf,
    #[command(flatten)]
    pub window: WindowArgs,
    /// Output CSV file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum FilterArg {
    None,
    Famsize,
    Cited,
    Epo,
    Uspto,
    Triadic,
}

impl From<FilterArg> for patdrift_core::family::QualityFilter {
    fn from(f: FilterArg) -> Self {
        use patdrift_core::family::QualityFilter as Q;
        match f {
            FilterArg::None => Q::None,
            FilterArg::Famsize => Q::Famsize,
            FilterArg::Cited => Q::Cited,
            FilterArg::Epo => Q::Epo,
            FilterArg::Uspto => Q::Uspto,
            FilterArg::Triadic => Q::Triadic,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum GroupArg {
    A,
    B,
    C,
    D,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Population {
    /// Families with a Y02 code.
    Green,
    /// Every family.
    All,
}

#[derive(Args, Debug)]
pub struct TrendsArgs {
    /// A single release; counts its families.
    #[arg(long, conflicts_with_all = ["old", "new", "group"], required_unless_present = "group")]
    pub input: Option<PathBuf>,
    /// Older release, with --new and --group.
    #[arg(long, requires_all = ["new", "group"])]
    pub old: Option<PathBuf>,
    #[arg(long, requires_all = ["old", "group"])]
    pub new: Option<PathBuf>,
    /// Count the families of one effect group instead of a whole release.
    #[arg(long, value_enum, requires_all = ["old", "new"])]
    pub group: Option<GroupArg>,
    /// Population counted with --input.
    #[arg(long, value_enum, default_value = "green")]
    pub population: Population,
    #[arg(long, value_enum, default_value = "none")]
    pub filter: FilterArg,
    #[command(flatten)]
    pub window: WindowArgs,
    /// Output CSV file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum RankBy {
    Group,
    Office,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum RankSet {
    /// Group C.
    Reclass,
    /// Group D.
    Expansion,
    /// Green families of the newer release passing --filter.
    Filtered,
    /// All green families of the newer release.
    Green,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum RankReference {
    /// Green families of the newer release.
    Green,
    /// All families of the newer release.
    All,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum RankOrder {
    Absolute,
    Share,
}

#[derive(Args, Debug)]
pub struct RankArgs {
    #[arg(long, value_enum)]
    pub by: RankBy,
    #[arg(long, value_enum)]
    pub set: RankSet,
    /// Denominator of the share column.
    #[arg(long, value_enum, default_value = "green")]
    pub reference: RankReference,
    /// Older release; required for --set reclass and --set expansion.
    #[arg(long)]
    pub old: Option<PathBuf>,
    /// Newer release.
    #[arg(long)]
    pub new: PathBuf,
    /// Quality filter applied to the set and the reference.
    #[arg(long, value_enum, default_value = "none")]
    pub filter: FilterArg,
    #[arg(long, default_value_t = 10)]
    pub top: usize,
    #[arg(long, value_enum, default_value = "absolute")]
    pub order: RankOrder,
    #[command(flatten)]
    pub window: WindowArgs,
    /// Output CSV file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum LevelArg {
    Class,
    Subclass,
}

#[derive(Args, Debug)]
pub struct ClassdriftArgs {
    #[arg(long)]
    pub old: PathBuf,
    #[arg(long)]
    pub new: PathBuf,
    #[arg(long, value_enum, default_value = "class")]
    pub level: LevelArg,
    /// Classes smaller than this in the newer release are left out of the fits and the relative ranking.
    #[arg(long, default_value_t = patdrift_core::stats::DEFAULT_MIN_CLASS_SIZE)]
    pub min_size: u64,
    #[arg(long, default_value_t = 10)]
    pub top: usize,
    #[command(flatten)]
    pub window: WindowArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct SchemediffArgs {
    /// Older scheme TSV (symbol, indent_level, title).
    #[arg(long)]
    pub old: PathBuf,
    #[arg(long)]
    pub new: PathBuf,
    /// Output CSV file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Generator configuration (JSON); omitted fields take their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the configured number of families.
    #[arg(long)]
    pub n_families: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

fn init_threads(threads: Option<usize>) -> CliResult<()> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        builder = builder.num_threads(n);
    }
    builder.build_global().map_err(|e| CliError::ThreadPool(e.to_string()))
}

fn run(cli: Cli) -> CliResult<()> {
    init_threads(cli.threads)?;
    match cli.command {
        Command::Ingest(a) => commands::ingest::run(&a),
        Command::Effects(a) => commands::effects::run(&a),
        Command::Table2(a) => commands::table2::run(&a),
        Command::Trends(a) => commands::trends::run(&a),
        Command::Rank(a) => commands::rank::run(&a),
        Command::Classdrift(a) => commands::classdrift::run(&a),
        Command::Schemediff(a) => commands::schemediff::run(&a),
        Command::Synth(a) => commands::synth::run(&a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind as K;
            if matches!(e.kind(), K::DisplayHelp | K::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let kind = ErrorKind::Config;
            eprintln!("{}", error_json(kind, e.to_string().trim_end()));
            return ExitCode::from(kind.exit_code() as u8);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let kind = e.kind();
            eprintln!("{}", error_json(kind, &e.to_string()));
            ExitCode::from(kind.exit_code() as u8)
        }
    }
}
