//! Paired synthetic snapshots with planted ground truth.
//!
//! Generation is manifest-first. Group sizes are fixed from the configured
//! rates, labels are shuffled over family ids, and only then are application,
//! classification and citation rows rendered from the labels. The manifest is
//! therefore exact: decomposing the emitted pair reproduces it.
//!
//! Shapes of the planted families:
//!
//! | label | old snapshot | new snapshot | year |
//! |---|---|---|---|
//! | A | green | not green | in window |
//! | B | green | green | in window |
//! | C | not green | green | in window |
//! | D | absent | green | in window |
//! | N | not green | not green | in window |
//! | O | any | any | outside window |
//! | X | present | absent (id churned) | any |

use std::collections::{BTreeMap, BTreeSet};
use std::io::{self, Write};
use std::path::Path;

use chrono::NaiveDate;
use rand::distr::weighted::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Poisson, Zipf};
use serde::{Deserialize, Serialize};

use crate::citation::CITATION_WINDOW_YEARS;
use crate::cpc::CpcSymbol;
use crate::error::{Error, Result};
use crate::family::QualityFilter;
use crate::snapshot::{ApplicationRecord, Office, RowCounts, StagedSnapshot};
use crate::YearWindow;

/// Members per family: `1 + Zipf` truncated at `max`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemberDistribution {
    pub max: u32,
    pub tail_exponent: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub seed: u64,
    pub n_families: usize,
    /// Green-in-new share of in-window families.
    pub green_share: f64,
    /// `C / (B + C)`.
    pub reclass_rate: f64,
    /// `D / (B + D)`.
    pub expansion_rate: f64,
    /// `A / (A + B)`.
    pub green_to_nongreen_rate: f64,
    pub year_range: YearWindow,
    pub office_weights: BTreeMap<String, f64>,
    pub members_per_family: MemberDistribution,
    /// Mean number of distinct citing families planted per family.
    pub citation_intensity: f64,
    /// Zipf exponent of technology class sizes.
    pub class_size_exponent: f64,
    pub n_classes: usize,
    /// Share of common families whose non-green class changes between releases.
    pub class_migration_rate: f64,
    /// Share of group D whose members all file at JP, CN or KR.
    pub expansion_asia_share: f64,
    /// Share of common families gaining one later member in the new release.
    pub late_member_rate: f64,
    /// Probability that a planted citing pair is also present in the old release.
    pub old_citation_keep_rate: f64,
    /// Share of families placed outside `year_range`.
    pub out_of_window_rate: f64,
    /// Share of common families whose family id changes between releases.
    pub family_id_churn_rate: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        let office_weights = [
            ("CN", 0.28),
            ("US", 0.2),
            ("JP", 0.16),
            ("EP", 0.1),
            ("KR", 0.08),
            ("WO", 0.08),
            ("DE", 0.05),
            ("GB", 0.02),
            ("FR", 0.02),
            ("CA", 0.01),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v))
        .collect();
        GeneratorConfig {
            seed: 42,
            n_families: 10_000,
            green_share: 0.15,
            reclass_rate: 0.092,
            expansion_rate: 0.106,
            green_to_nongreen_rate: 0.02,
            year_range: YearWindow::DEFAULT,
            office_weights,
            members_per_family: MemberDistribution { max: 12, tail_exponent: 2.2 },
            citation_intensity: 2.0,
            class_size_exponent: 1.1,
            n_classes: 120,
            class_migration_rate: 0.02,
            expansion_asia_share: 0.6,
            late_member_rate: 0.1,
            old_citation_keep_rate: 0.75,
            out_of_window_rate: 0.0,
            family_id_churn_rate: 0.0,
        }
    }
}

const MAX_CLASSES: usize = 8 * 99;
const ASIAN_OFFICES: [&str; 3] = ["CN", "JP", "KR"];

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        let ratios = [
            ("green_share", self.green_share),
            ("reclass_rate", self.reclass_rate),
            ("expansion_rate", self.expansion_rate),
            ("green_to_nongreen_rate", self.green_to_nongreen_rate),
            ("class_migration_rate", self.class_migration_rate),
            ("expansion_asia_share", self.expansion_asia_share),
            ("late_member_rate", self.late_member_rate),
            ("old_citation_keep_rate", self.old_citation_keep_rate),
            ("out_of_window_rate", self.out_of_window_rate),
            ("family_id_churn_rate", self.family_id_churn_rate),
        ];
        for (name, v) in ratios {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        // These rates are odds against group B; at 1 the allocation is undefined.
        for (name, v) in [
            ("reclass_rate", self.reclass_rate),
            ("expansion_rate", self.expansion_rate),
            ("green_to_nongreen_rate", self.green_to_nongreen_rate),
        ] {
            if v >= 1.0 {
                return Err(Error::Config(format!("{name} must be below 1, got {v}")));
            }
        }
        if self.office_weights.is_empty() {
            return Err(Error::Config("office_weights is empty".into()));
        }
        for (code, &w) in &self.office_weights {
            code.parse::<Office>().map_err(|e| Error::Config(e.to_string()))?;
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::Config(format!("weight of office {code} must be non-negative, got {w}")));
            }
        }
        if self.office_weights.values().all(|&w| w == 0.0) {
            return Err(Error::Config("office weights are all zero".into()));
        }
        let m = &self.members_per_family;
        if m.max < 1 || !(m.tail_exponent.is_finite() && m.tail_exponent >= 0.0) {
            return Err(Error::Config(format!(
                "members_per_family needs max >= 1 and a non-negative tail exponent, got {m:?}"
            )));
        }
        if !(self.citation_intensity.is_finite() && self.citation_intensity >= 0.0) {
            return Err(Error::Config(format!(
                "citation_intensity must be non-negative, got {}",
                self.citation_intensity
            )));
        }
        if !(self.class_size_exponent.is_finite() && self.class_size_exponent >= 0.0) {
            return Err(Error::Config(format!(
                "class_size_exponent must be non-negative, got {}",
                self.class_size_exponent
            )));
        }
        if !(2..=MAX_CLASSES).contains(&self.n_classes) {
            return Err(Error::Config(format!("n_classes must lie in 2..={MAX_CLASSES}, got {}", self.n_classes)));
        }
        let w = self.year_range;
        if w.from > w.to || w.from < 1900 || w.to > 2100 {
            return Err(Error::Config(format!("year_range {}..{} is not a valid range within 1900..2100", w.from, w.to)));
        }
        self.allocation().map(|_| ())
    }

    /// Exact group sizes implied by the rates.
    pub fn allocation(&self) -> Result<GroupSizes> {
        let n = self.n_families as u64;
        let out_of_window = (self.out_of_window_rate * n as f64).round() as u64;
        let in_window = n - out_of_window;
        let green = (self.green_share * in_window as f64).round() as u64;
        let odds = |r: f64| r / (1.0 - r);
        let b_real = green as f64 / (1.0 + odds(self.reclass_rate) + odds(self.expansion_rate));
        let c = ((b_real * odds(self.reclass_rate)).round() as u64).min(green);
        let d = ((b_real * odds(self.expansion_rate)).round() as u64).min(green - c);
        let b = green - c - d;
        let a = (b as f64 * odds(self.green_to_nongreen_rate)).round() as u64;
        let non_green = in_window.checked_sub(green + a).ok_or_else(|| {
            Error::Config(format!(
                "green_share {} with green_to_nongreen_rate {} needs {} families but only {in_window} are in the window",
                self.green_share,
                self.green_to_nongreen_rate,
                green + a
            ))
        })?;
        Ok(GroupSizes { a, b, c, d, non_green, out_of_window })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupSizes {
    pub a: u64,
    pub b: u64,
    pub c: u64,
    pub d: u64,
    pub non_green: u64,
    pub out_of_window: u64,
}

/// Planted label of one family id.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PlantedGroup {
    A,
    B,
    C,
    D,
    /// In window, green in neither release.
    N,
    /// Outside the year window.
    O,
    /// Absent from the new release.
    X,
}

impl PlantedGroup {
    pub fn code(&self) -> &'static str {
        match self {
            PlantedGroup::A => "A",
            PlantedGroup::B => "B",
            PlantedGroup::C => "C",
            PlantedGroup::D => "D",
            PlantedGroup::N => "N",
            PlantedGroup::O => "O",
            PlantedGroup::X => "X",
        }
    }
}

/// Which release of a pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Release {
    Old,
    New,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlantedFamily {
    pub family_id: u64,
    pub group: PlantedGroup,
    pub in_old: bool,
    pub in_new: bool,
    pub is_green_old: bool,
    pub is_green_new: bool,
    /// Distinct offices; empty when absent from that release.
    pub offices_old: Vec<Office>,
    pub offices_new: Vec<Office>,
    pub earliest_year: i32,
    pub fwd_cit_5y_old: u32,
    pub fwd_cit_5y_new: u32,
    /// Non-green class differs between releases.
    pub migrated: bool,
    /// Member of group D filed only at JP, CN or KR.
    pub asian_expansion: bool,
}

impl PlantedFamily {
    pub fn present(&self, release: Release) -> bool {
        match release {
            Release::Old => self.in_old,
            Release::New => self.in_new,
        }
    }

    pub fn is_green(&self, release: Release) -> bool {
        match release {
            Release::Old => self.is_green_old,
            Release::New => self.is_green_new,
        }
    }

    pub fn offices(&self, release: Release) -> &[Office] {
        match release {
            Release::Old => &self.offices_old,
            Release::New => &self.offices_new,
        }
    }

    pub fn fwd_cit_5y(&self, release: Release) -> u32 {
        match release {
            Release::Old => self.fwd_cit_5y_old,
            Release::New => self.fwd_cit_5y_new,
        }
    }

    /// Planted filter flag; false when absent from `release`.
    pub fn passes(&self, filter: QualityFilter, release: Release) -> bool {
        if !self.present(release) {
            return false;
        }
        let offices = self.offices(release);
        let has = |o: Office| offices.contains(&o);
        match filter {
            QualityFilter::None => true,
            QualityFilter::Famsize => offices.len() >= 2,
            QualityFilter::Cited => self.fwd_cit_5y(release) >= 1,
            QualityFilter::Epo => has(Office::EP),
            QualityFilter::Uspto => has(Office::US),
            QualityFilter::Triadic => has(Office::EP) && has(Office::US) && has(Office::JP),
        }
    }
}

pub const MANIFEST_HEADER: &str = "family_id,group,is_green_old,is_green_new,offices,earliest_year,fwd_cit_5y_planted";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub window: YearWindow,
    pub sizes: GroupSizes,
    /// Sorted by family id.
    pub families: Vec<PlantedFamily>,
    pub old_rows: RowCounts,
    pub new_rows: RowCounts,
}

impl GroundTruth {
    pub fn ids(&self, group: PlantedGroup) -> BTreeSet<u64> {
        self.families.iter().filter(|f| f.group == group).map(|f| f.family_id).collect()
    }

    pub fn count(&self, group: PlantedGroup) -> u64 {
        self.families.iter().filter(|f| f.group == group).count() as u64
    }

    pub fn get(&self, family_id: u64) -> Option<&PlantedFamily> {
        self.families
            .binary_search_by_key(&family_id, |f| f.family_id)
            .ok()
            .map(|i| &self.families[i])
    }

    /// In-window families green in the new release.
    pub fn green_new_in_window(&self) -> u64 {
        self.families
            .iter()
            .filter(|f| f.in_new && f.is_green_new && self.window.contains(f.earliest_year))
            .count() as u64
    }

    /// `C / (green_new - D)` over the planted labels.
    pub fn reclassification_share(&self) -> Option<f64> {
        let denom = self.green_new_in_window() - self.count(PlantedGroup::D);
        (denom > 0).then(|| self.count(PlantedGroup::C) as f64 / denom as f64)
    }

    /// `D / (green_new - C)` over the planted labels.
    pub fn expansion_share(&self) -> Option<f64> {
        let denom = self.green_new_in_window() - self.count(PlantedGroup::C);
        (denom > 0).then(|| self.count(PlantedGroup::D) as f64 / denom as f64)
    }

    /// Pooled class-level reclassification rate implied by the plan: every
    /// family carries one non-green class plus the Y02 class when green.
    pub fn class_level_rate(&self) -> Option<f64> {
        let mut changes = 0u64;
        let mut size_new = 0u64;
        for f in &self.families {
            if !f.in_new || !self.window.contains(f.earliest_year) {
                continue;
            }
            size_new += 1 + u64::from(f.is_green_new);
            if f.in_old {
                changes += 2 * u64::from(f.migrated) + u64::from(f.is_green_old != f.is_green_new);
            }
        }
        (size_new > 0).then(|| changes as f64 / size_new as f64)
    }

    pub fn write_manifest<W: Write>(&self, out: W) -> io::Result<()> {
        let mut w = io::BufWriter::new(out);
        writeln!(w, "{MANIFEST_HEADER}")?;
        for f in &self.families {
            let (offices, fwd) = if f.in_new {
                (&f.offices_new, f.fwd_cit_5y_new)
            } else {
                (&f.offices_old, f.fwd_cit_5y_old)
            };
            let offices: Vec<&str> = offices.iter().map(|o| o.as_str()).collect();
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                f.family_id,
                f.group.code(),
                f.is_green_old,
                f.is_green_new,
                offices.join(";"),
                f.earliest_year,
                fwd
            )?;
        }
        w.flush()
    }
}

pub struct SyntheticPair {
    pub old: StagedSnapshot,
    pub new: StagedSnapshot,
    pub truth: GroundTruth,
}

impl SyntheticPair {
    /// Writes `old/*.tsv`, `new/*.tsv` and `manifest.csv` under `dir`.
    pub fn write_dir(&self, dir: &Path) -> io::Result<()> {
        std::fs::create_dir_all(dir)?;
        std::thread::scope(|s| {
            let old = s.spawn(|| self.old.write_tsv_dir(&dir.join("old")));
            let new = s.spawn(|| self.new.write_tsv_dir(&dir.join("new")));
            let manifest = std::fs::File::create(dir.join("manifest.csv"))
                .and_then(|f| self.truth.write_manifest(f));
            old.join().expect("writer thread panicked")?;
            new.join().expect("writer thread panicked")?;
            manifest
        })
    }
}

struct Member {
    appln_id: u64,
    office: Office,
    date: NaiveDate,
}

struct Plan {
    id_old: u64,
    id_new: u64,
    group: PlantedGroup,
    in_old: bool,
    green_old: bool,
    green_new: bool,
    year: i32,
    symbol_old: CpcSymbol,
    symbol_new: CpcSymbol,
    green_old_symbols: Vec<CpcSymbol>,
    green_new_symbols: Vec<CpcSymbol>,
    /// Core member carrying the green codes.
    carrier: usize,
    core: Vec<Member>,
    late: Option<Member>,
    asian: bool,
    migrated: bool,
}

#[derive(Clone, Copy)]
enum Shape {
    A,
    B,
    C,
    D,
    N,
    OutCommon { green_old: bool, green_new: bool },
    OutNewOnly,
}

const Y02_GROUPS: &[(char, &[u16])] = &[
    ('A', &[10, 20, 30, 40, 50, 90]),
    ('B', &[10, 20, 30, 40, 50, 70, 80, 90]),
    ('C', &[10, 20]),
    ('D', &[10, 30]),
    ('E', &[10, 20, 30, 40, 50, 60, 70]),
    ('P', &[10, 20, 30, 40, 70, 80, 90]),
    ('T', &[10, 30, 50, 70, 90]),
    ('W', &[10, 30, 90]),
];
const SUBGROUPS: &[u32] = &[0, 10, 12, 14, 16, 20, 30, 40, 50];
const SUBCLASS_LETTERS: &[u8] = b"BCDFGHJKLMNPQ";

fn class_symbol(class: usize, rng: &mut ChaCha8Rng) -> CpcSymbol {
    let section = b"ABCDEFGH"[class % 8] as char;
    let class_num = (1 + class / 8) as u8;
    let subclass = SUBCLASS_LETTERS[class % SUBCLASS_LETTERS.len()] as char;
    CpcSymbol::new(
        section,
        class_num,
        subclass,
        rng.random_range(1..=99),
        *SUBGROUPS.choose(rng).expect("non-empty"),
    )
    .expect("generated symbol is well-formed")
}

fn green_symbols(rng: &mut ChaCha8Rng) -> Vec<CpcSymbol> {
    let n = if rng.random_bool(0.3) { 2 } else { 1 };
    let mut out: Vec<CpcSymbol> = Vec::new();
    while out.len() < n {
        let (sub, groups) = Y02_GROUPS.choose(rng).expect("non-empty");
        let main = *groups.choose(rng).expect("non-empty");
        let s = CpcSymbol::new('Y', 2, *sub, main, *SUBGROUPS.choose(rng).expect("non-empty"))
            .expect("generated symbol is well-formed");
        if !out.contains(&s) {
            out.push(s);
        }
    }
    out
}

/// Same Y02 groups with possibly different subgroups.
fn reshuffle_subgroups(symbols: &[CpcSymbol], rng: &mut ChaCha8Rng) -> Vec<CpcSymbol> {
    let mut out: Vec<CpcSymbol> = Vec::new();
    for s in symbols {
        let sub = if rng.random_bool(0.3) { *SUBGROUPS.choose(rng).expect("non-empty") } else { s.subgroup() };
        let moved = CpcSymbol::new('Y', 2, s.subclass(), s.main_group(), sub).expect("well-formed");
        if !out.contains(&moved) {
            out.push(moved);
        }
    }
    out
}

fn random_date(year: i32, rng: &mut ChaCha8Rng) -> NaiveDate {
    NaiveDate::from_ymd_opt(year, rng.random_range(1..=12), rng.random_range(1..=28)).expect("valid day")
}

/// Draws one synthetic pair. Deterministic in `config`.
pub fn generate(config: &GeneratorConfig) -> Result<SyntheticPair> {
    config.validate()?;
    let sizes = config.allocation()?;
    let window = config.year_range;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let offices: Vec<Office> = config.office_weights.keys().map(|k| k.parse()).collect::<Result<_>>()?;
    let office_dist = WeightedIndex::new(config.office_weights.values().copied())
        .map_err(|e| Error::Config(format!("office_weights: {e}")))?;
    let asian_offices: Vec<(Office, f64)> = ASIAN_OFFICES
        .iter()
        .map(|c| (c.parse().expect("valid code"), config.office_weights.get(*c).copied().unwrap_or(0.0)))
        .collect();
    let asian_dist = if asian_offices.iter().any(|(_, w)| *w > 0.0) {
        WeightedIndex::new(asian_offices.iter().map(|(_, w)| *w))
    } else {
        WeightedIndex::new([1.0; 3])
    }
    .map_err(|e| Error::Config(format!("asian office weights: {e}")))?;
    let members_dist = Zipf::new(config.members_per_family.max as f64, config.members_per_family.tail_exponent)
        .map_err(|e| Error::Config(format!("members_per_family: {e}")))?;
    let class_dist = Zipf::new(config.n_classes as f64, config.class_size_exponent)
        .map_err(|e| Error::Config(format!("class_size_exponent: {e}")))?;
    let citations_dist = if config.citation_intensity > 0.0 {
        Some(
            Poisson::new(config.citation_intensity)
                .map_err(|e| Error::Config(format!("citation_intensity: {e}")))?,
        )
    } else {
        None
    };
    // Filing activity grows over the window.
    let years: Vec<i32> = window.years().collect();
    let year_dist = WeightedIndex::new(years.iter().map(|y| (0.05 * (y - window.from) as f64).exp()))
        .map_err(|e| Error::Config(format!("year_range: {e}")))?;

    let mut shapes: Vec<Shape> = Vec::with_capacity(config.n_families);
    for (shape, n) in [
        (Shape::A, sizes.a),
        (Shape::B, sizes.b),
        (Shape::C, sizes.c),
        (Shape::D, sizes.d),
        (Shape::N, sizes.non_green),
    ] {
        shapes.extend(std::iter::repeat_n(shape, n as usize));
    }
    for _ in 0..sizes.out_of_window {
        let shape = if rng.random_bool(config.expansion_rate) {
            Shape::OutNewOnly
        } else {
            let green_new = rng.random_bool(config.green_share);
            let green_old = if green_new {
                !rng.random_bool(config.reclass_rate)
            } else {
                rng.random_bool(config.green_to_nongreen_rate)
            };
            Shape::OutCommon { green_old, green_new }
        };
        shapes.push(shape);
    }
    shapes.shuffle(&mut rng);
    let asian_quota = (config.expansion_asia_share * sizes.d as f64).round() as u64;

    let n = config.n_families as u64;
    let mut next_appln = 1u64;
    let mut next_churn_id = n + 1;
    let mut d_seen = 0u64;
    let mut plans: Vec<Plan> = Vec::with_capacity(config.n_families);
    for (i, shape) in shapes.into_iter().enumerate() {
        let family_id = i as u64 + 1;
        let (group, in_old, green_old, green_new) = match shape {
            Shape::A => (PlantedGroup::A, true, true, false),
            Shape::B => (PlantedGroup::B, true, true, true),
            Shape::C => (PlantedGroup::C, true, false, true),
            Shape::D => (PlantedGroup::D, false, false, true),
            Shape::N => (PlantedGroup::N, true, false, false),
            Shape::OutCommon { green_old, green_new } => (PlantedGroup::O, true, green_old, green_new),
            Shape::OutNewOnly => (PlantedGroup::O, false, false, true),
        };
        let year = if group == PlantedGroup::O {
            if rng.random_bool(0.5) {
                window.from - rng.random_range(1..=5)
            } else {
                window.to + rng.random_range(1..=3)
            }
        } else {
            years[year_dist.sample(&mut rng)]
        };
        let asian = group == PlantedGroup::D && {
            d_seen += 1;
            d_seen <= asian_quota
        };

        let class_old = class_dist.sample(&mut rng) as usize - 1;
        let symbol_old = class_symbol(class_old, &mut rng);
        let migrated = in_old && rng.random_bool(config.class_migration_rate);
        let symbol_new = if migrated {
            let class_new = (class_old + rng.random_range(1..config.n_classes)) % config.n_classes;
            class_symbol(class_new, &mut rng)
        } else {
            symbol_old
        };
        let green_old_symbols = if green_old { green_symbols(&mut rng) } else { Vec::new() };
        let green_new_symbols = match (green_old, green_new) {
            (true, true) => reshuffle_subgroups(&green_old_symbols, &mut rng),
            (false, true) => green_symbols(&mut rng),
            _ => Vec::new(),
        };

        let k = (members_dist.sample(&mut rng) as usize).max(1);
        let mut core = Vec::with_capacity(k);
        for j in 0..k {
            let office = if asian {
                asian_offices[asian_dist.sample(&mut rng)].0
            } else {
                offices[office_dist.sample(&mut rng)]
            };
            // The first member fixes the earliest year.
            let y = if j > 0 && rng.random_bool(0.3) { year + 1 } else { year };
            core.push(Member { appln_id: next_appln, office, date: random_date(y, &mut rng) });
            next_appln += 1;
        }
        let carrier = rng.random_range(0..k);
        let late = if in_old && rng.random_bool(config.late_member_rate) {
            let m = Member {
                appln_id: next_appln,
                office: offices[office_dist.sample(&mut rng)],
                date: random_date(year + rng.random_range(1..=3), &mut rng),
            };
            next_appln += 1;
            Some(m)
        } else {
            None
        };
        let id_new = if in_old && rng.random_bool(config.family_id_churn_rate) {
            next_churn_id += 1;
            next_churn_id - 1
        } else {
            family_id
        };
        plans.push(Plan {
            id_old: family_id,
            id_new,
            group,
            in_old,
            green_old,
            green_new,
            year,
            symbol_old,
            symbol_new,
            green_old_symbols,
            green_new_symbols,
            carrier,
            core,
            late,
            asian,
            migrated,
        });
    }

    // Citations: every family is present in the new release.
    let mut by_year: BTreeMap<i32, Vec<usize>> = BTreeMap::new();
    for (i, p) in plans.iter().enumerate() {
        by_year.entry(p.year).or_default().push(i);
    }
    let mut fwd_new = vec![0u32; plans.len()];
    let mut fwd_old = vec![0u32; plans.len()];
    let mut cites_new: Vec<(u64, u64)> = Vec::new();
    let mut cites_old: Vec<(u64, u64)> = Vec::new();
    for f in 0..plans.len() {
        let target = citations_dist.as_ref().map_or(0, |d| d.sample(&mut rng) as usize);
        let mut chosen: Vec<usize> = Vec::with_capacity(target);
        let mut attempts = 0;
        while chosen.len() < target && attempts < 4 * target {
            attempts += 1;
            let y = plans[f].year + rng.random_range(0..=CITATION_WINDOW_YEARS);
            let Some(pool) = by_year.get(&y) else { continue };
            let g = *pool.choose(&mut rng).expect("non-empty bucket");
            if g != f && !chosen.contains(&g) {
                chosen.push(g);
            }
        }
        let mut rows: Vec<(usize, u64, u64)> = Vec::new();
        for &g in &chosen {
            let copies = if rng.random_bool(0.2) { 2 } else { 1 };
            for _ in 0..copies {
                let citing = plans[g].core.choose(&mut rng).expect("non-empty").appln_id;
                let cited = plans[f].core.choose(&mut rng).expect("non-empty").appln_id;
                rows.push((g, citing, cited));
            }
        }
        // Noise the family-level count must ignore: out-of-window lags and
        // citations inside one family.
        if rng.random_bool(0.25) {
            let g = rng.random_range(0..plans.len());
            let lag = plans[g].year - plans[f].year;
            if g != f && !(0..=CITATION_WINDOW_YEARS).contains(&lag) {
                let citing = plans[g].core[0].appln_id;
                rows.push((g, citing, plans[f].core[0].appln_id));
            }
        }
        if plans[f].core.len() >= 2 && rng.random_bool(0.1) {
            rows.push((f, plans[f].core[1].appln_id, plans[f].core[0].appln_id));
        }

        fwd_new[f] = chosen.len() as u32;
        let mut kept: BTreeSet<usize> = BTreeSet::new();
        let mut dropped: BTreeSet<usize> = BTreeSet::new();
        for (g, citing, cited) in rows {
            cites_new.push((citing, cited));
            if !(plans[f].in_old && plans[g].in_old) || dropped.contains(&g) {
                continue;
            }
            if kept.contains(&g) || rng.random_bool(config.old_citation_keep_rate) {
                kept.insert(g);
                cites_old.push((citing, cited));
            } else {
                dropped.insert(g);
            }
        }
        fwd_old[f] = kept.iter().filter(|g| chosen.contains(g)).count() as u32;
    }

    let mut old = StagedSnapshot::default();
    let mut new = StagedSnapshot::default();
    for p in &plans {
        for (j, m) in p.core.iter().enumerate() {
            if p.in_old {
                old.applications.push(ApplicationRecord {
                    appln_id: m.appln_id,
                    family_id: p.id_old,
                    authority: m.office,
                    filing_date: m.date,
                });
                old.classifications.push((m.appln_id, p.symbol_old));
                if j == p.carrier {
                    old.classifications.extend(p.green_old_symbols.iter().map(|&s| (m.appln_id, s)));
                }
            }
            new.applications.push(ApplicationRecord {
                appln_id: m.appln_id,
                family_id: p.id_new,
                authority: m.office,
                filing_date: m.date,
            });
            new.classifications.push((m.appln_id, p.symbol_new));
            if j == p.carrier {
                new.classifications.extend(p.green_new_symbols.iter().map(|&s| (m.appln_id, s)));
            }
        }
        if let Some(m) = &p.late {
            new.applications.push(ApplicationRecord {
                appln_id: m.appln_id,
                family_id: p.id_new,
                authority: m.office,
                filing_date: m.date,
            });
            new.classifications.push((m.appln_id, p.symbol_new));
        }
    }
    old.citations = cites_old;
    new.citations = cites_new;

    let mut families: Vec<PlantedFamily> = Vec::with_capacity(plans.len());
    for (i, p) in plans.iter().enumerate() {
        let distinct = |ms: &mut dyn Iterator<Item = &Member>| -> Vec<Office> {
            let set: BTreeSet<Office> = ms.map(|m| m.office).collect();
            set.into_iter().collect()
        };
        let offices_old = if p.in_old { distinct(&mut p.core.iter()) } else { Vec::new() };
        let offices_new = distinct(&mut p.core.iter().chain(p.late.iter()));
        let base = PlantedFamily {
            family_id: p.id_new,
            group: p.group,
            in_old: p.in_old,
            in_new: true,
            is_green_old: p.green_old,
            is_green_new: p.green_new,
            offices_old,
            offices_new,
            earliest_year: p.year,
            fwd_cit_5y_old: fwd_old[i],
            fwd_cit_5y_new: fwd_new[i],
            migrated: p.migrated,
            asian_expansion: p.asian,
        };
        if p.id_new == p.id_old {
            families.push(base);
            continue;
        }
        // Churned id: the old id disappears, the new id looks new-only.
        let in_window = window.contains(p.year);
        families.push(PlantedFamily {
            family_id: p.id_old,
            group: PlantedGroup::X,
            in_new: false,
            is_green_new: false,
            offices_new: Vec::new(),
            fwd_cit_5y_new: 0,
            migrated: false,
            ..base.clone()
        });
        families.push(PlantedFamily {
            group: match (in_window, p.green_new) {
                (false, _) => PlantedGroup::O,
                (true, true) => PlantedGroup::D,
                (true, false) => PlantedGroup::N,
            },
            in_old: false,
            is_green_old: false,
            offices_old: Vec::new(),
            fwd_cit_5y_old: 0,
            migrated: false,
            ..base
        });
    }
    families.sort_by_key(|f| f.family_id);

    let counts = |s: &StagedSnapshot| RowCounts {
        applications: s.applications.len() as u64,
        classifications: s.classifications.len() as u64,
        citations: s.citations.len() as u64,
    };
    let truth = GroundTruth { window, sizes, families, old_rows: counts(&old), new_rows: counts(&new) };
    Ok(SyntheticPair { old, new, truth })
}
