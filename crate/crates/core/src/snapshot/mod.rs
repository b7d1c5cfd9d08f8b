//! In-memory store for one release of the patent database.
//!
//! A [`SnapshotStore`] holds applications sorted by `appln_id` plus two
//! compressed adjacency tables keyed by application position: the CPC
//! symbols of each application and the applications citing it. The store is
//! immutable once built.

mod codec;
mod ingest;

use std::fmt;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cpc::CpcSymbol;
use crate::error::{Error, Result};

pub use codec::{read_store, write_store, STORE_MAGIC, STORE_VERSION};
pub use ingest::{
    ingest_readers, ingest_snapshot, SnapshotPaths, APPLICATIONS_HEADER, CITATIONS_HEADER,
    CLASSIFICATIONS_HEADER,
};

/// Two-letter filing authority code (`US`, `EP`, `WO`, ...).
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Office([u8; 2]);

impl Office {
    pub const EP: Office = Office(*b"EP");
    pub const US: Office = Office(*b"US");
    pub const JP: Office = Office(*b"JP");

    pub fn from_bytes(b: &[u8]) -> Option<Office> {
        match b {
            [a, c] if a.is_ascii_uppercase() && c.is_ascii_uppercase() => Some(Office([*a, *c])),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &str {
        // Constructed only from ASCII uppercase bytes.
        std::str::from_utf8(&self.0).unwrap_or("??")
    }

    pub(crate) fn bytes(&self) -> [u8; 2] {
        self.0
    }
}

impl FromStr for Office {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Office::from_bytes(s.as_bytes())
            .ok_or_else(|| Error::InvalidArgument(format!("office code must be two uppercase letters, got {s:?}")))
    }
}

impl fmt::Display for Office {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Debug for Office {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Office({})", self.as_str())
    }
}

impl Serialize for Office {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Office {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ApplicationRecord {
    pub appln_id: u64,
    pub family_id: u64,
    pub authority: Office,
    pub filing_date: NaiveDate,
}

impl ApplicationRecord {
    pub fn filing_year(&self) -> i32 {
        self.filing_date.year()
    }
}

/// Row accounting for one input table.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableStats {
    /// Data rows read, header excluded.
    pub rows: u64,
    /// Rows that made it into the store.
    pub loaded: u64,
    pub duplicates: u64,
    pub malformed: u64,
    /// Rows referring to an `appln_id` with no application record.
    pub dangling: u64,
}

pub const MAX_REPORT_SAMPLES: usize = 1000;

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub label: String,
    pub applications: TableStats,
    pub classifications: TableStats,
    pub citations: TableStats,
    /// Citation rows with `citing == cited`, dropped on load.
    pub self_citations: u64,
    /// Smallest dangling application ids (capped at [`MAX_REPORT_SAMPLES`]).
    pub dangling_appln_ids: Vec<u64>,
    /// `source:line: reason` for the first malformed rows.
    pub malformed_samples: Vec<String>,
}

/// Raw rows of one snapshot before indexing.
///
/// Ingestion fills this from files; the synthetic generator and tests can fill
/// it directly and go through the same [`StagedSnapshot::build`] path.
#[derive(Clone, Debug, Default)]
pub struct StagedSnapshot {
    pub applications: Vec<ApplicationRecord>,
    pub classifications: Vec<(u64, CpcSymbol)>,
    /// `(citing, cited)` application id pairs.
    pub citations: Vec<(u64, u64)>,
}

/// Row counts written by [`StagedSnapshot::write_tables`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowCounts {
    pub applications: u64,
    pub classifications: u64,
    pub citations: u64,
}

impl StagedSnapshot {
    /// Renders the three tables in the ingestion TSV layout. Symbols of
    /// odd application ids use the padded official form.
    pub fn write_tables<A: Write, C: Write, T: Write>(
        &self,
        applications: A,
        classifications: C,
        citations: T,
    ) -> io::Result<RowCounts> {
        let mut a = BufWriter::new(applications);
        writeln!(a, "{}", APPLICATIONS_HEADER.join("\t"))?;
        for r in &self.applications {
            writeln!(
                a,
                "{}\t{}\t{}\t{}",
                r.appln_id,
                r.family_id,
                r.authority,
                r.filing_date.format("%Y-%m-%d")
            )?;
        }
        a.flush()?;

        let mut c = BufWriter::new(classifications);
        writeln!(c, "{}", CLASSIFICATIONS_HEADER.join("\t"))?;
        for (id, sym) in &self.classifications {
            if id % 2 == 1 && !sym.is_subclass_level() {
                writeln!(
                    c,
                    "{id}\t{}{:>4}/{:02}",
                    sym.truncate(crate::cpc::Level::Subclass),
                    sym.main_group(),
                    sym.subgroup()
                )?;
            } else {
                writeln!(c, "{id}\t{sym}")?;
            }
        }
        c.flush()?;

        let mut t = BufWriter::new(citations);
        writeln!(t, "{}", CITATIONS_HEADER.join("\t"))?;
        for (citing, cited) in &self.citations {
            writeln!(t, "{citing}\t{cited}")?;
        }
        t.flush()?;

        Ok(RowCounts {
            applications: self.applications.len() as u64,
            classifications: self.classifications.len() as u64,
            citations: self.citations.len() as u64,
        })
    }

    /// Writes `applications.tsv`, `classifications.tsv` and `citations.tsv`
    /// into `dir`, creating it if needed.
    pub fn write_tsv_dir(&self, dir: &Path) -> io::Result<RowCounts> {
        fs::create_dir_all(dir)?;
        let paths = SnapshotPaths::in_dir(dir);
        self.write_tables(
            File::create(&paths.applications)?,
            File::create(&paths.classifications)?,
            File::create(&paths.citations)?,
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SnapshotStore {
    label: String,
    applications: Vec<ApplicationRecord>,
    class_offsets: Vec<u64>,
    class_symbols: Vec<CpcSymbol>,
    cite_offsets: Vec<u64>,
    citing: Vec<u32>,
}

impl StagedSnapshot {
    /// Validates, de-duplicates and indexes the rows. `report` receives the
    /// duplicate/dangling accounting; parse-level counters already in it are
    /// kept.
    pub fn build(self, label: &str, report: &mut IngestReport) -> Result<SnapshotStore> {
        let StagedSnapshot {
            mut applications,
            mut classifications,
            mut citations,
        } = self;
        report.label = label.to_string();

        // Keeping the smallest record per id makes the result independent of
        // row order.
        applications.par_sort_unstable();
        let before = applications.len();
        applications.dedup_by_key(|a| a.appln_id);
        report.applications.duplicates += (before - applications.len()) as u64;
        report.applications.loaded = applications.len() as u64;
        if applications.len() > u32::MAX as usize {
            return Err(Error::InvalidArgument("more than 2^32 applications in one snapshot".into()));
        }

        let mut dangling: Vec<u64> = Vec::new();

        classifications.par_sort_unstable();
        let before = classifications.len();
        classifications.dedup();
        report.classifications.duplicates += (before - classifications.len()) as u64;

        let mut class_offsets = Vec::with_capacity(applications.len() + 1);
        let mut class_symbols = Vec::with_capacity(classifications.len());
        class_offsets.push(0u64);
        let mut rows = classifications.into_iter().peekable();
        for app in &applications {
            while let Some(&(id, _)) = rows.peek() {
                if id >= app.appln_id {
                    break;
                }
                dangling.push(id);
                report.classifications.dangling += 1;
                rows.next();
            }
            while let Some(&(id, sym)) = rows.peek() {
                if id != app.appln_id {
                    break;
                }
                class_symbols.push(sym);
                rows.next();
            }
            class_offsets.push(class_symbols.len() as u64);
        }
        for (id, _) in rows {
            dangling.push(id);
            report.classifications.dangling += 1;
        }
        report.classifications.loaded = class_symbols.len() as u64;
        class_symbols.shrink_to_fit();

        let before = citations.len();
        citations.retain(|&(citing, cited)| citing != cited);
        report.self_citations += (before - citations.len()) as u64;
        // (cited, citing) order groups rows by the cited application.
        let mut pairs: Vec<(u64, u64)> = citations.into_iter().map(|(a, b)| (b, a)).collect();
        pairs.par_sort_unstable();
        let before = pairs.len();
        pairs.dedup();
        report.citations.duplicates += (before - pairs.len()) as u64;

        let index_of = |id: u64| applications.binary_search_by_key(&id, |a| a.appln_id).ok();
        let mut resolved: Vec<(u32, u32)> = Vec::with_capacity(pairs.len());
        for (cited, citing) in pairs {
            match (index_of(cited), index_of(citing)) {
                (Some(c), Some(g)) => resolved.push((c as u32, g as u32)),
                (c, g) => {
                    report.citations.dangling += 1;
                    if c.is_none() {
                        dangling.push(cited);
                    }
                    if g.is_none() {
                        dangling.push(citing);
                    }
                }
            }
        }
        // Sorted by cited id already, hence by cited index.
        let mut cite_offsets = vec![0u64; applications.len() + 1];
        for &(c, _) in &resolved {
            cite_offsets[c as usize + 1] += 1;
        }
        for i in 1..cite_offsets.len() {
            cite_offsets[i] += cite_offsets[i - 1];
        }
        let citing: Vec<u32> = resolved.into_iter().map(|(_, g)| g).collect();
        report.citations.loaded = citing.len() as u64;

        dangling.sort_unstable();
        dangling.dedup();
        dangling.truncate(MAX_REPORT_SAMPLES);
        report.dangling_appln_ids = dangling;

        Ok(SnapshotStore {
            label: label.to_string(),
            applications,
            class_offsets,
            class_symbols,
            cite_offsets,
            citing,
        })
    }
}

impl SnapshotStore {
    /// Builds a store from staged rows, discarding the report.
    pub fn from_staged(label: &str, staged: StagedSnapshot) -> Result<SnapshotStore> {
        staged.build(label, &mut IngestReport::default())
    }

    pub fn empty(label: &str) -> SnapshotStore {
        SnapshotStore {
            label: label.to_string(),
            applications: Vec::new(),
            class_offsets: vec![0],
            class_symbols: Vec::new(),
            cite_offsets: vec![0],
            citing: Vec::new(),
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Applications in ascending `appln_id` order.
    pub fn applications(&self) -> &[ApplicationRecord] {
        &self.applications
    }

    pub fn len(&self) -> usize {
        self.applications.len()
    }

    pub fn is_empty(&self) -> bool {
        self.applications.is_empty()
    }

    /// Position of an application in [`SnapshotStore::applications`].
    pub fn index_of(&self, appln_id: u64) -> Option<usize> {
        self.applications
            .binary_search_by_key(&appln_id, |a| a.appln_id)
            .ok()
    }

    /// Sorted, distinct symbols of the application at `index`.
    pub fn symbols_at(&self, index: usize) -> &[CpcSymbol] {
        let lo = self.class_offsets[index] as usize;
        let hi = self.class_offsets[index + 1] as usize;
        &self.class_symbols[lo..hi]
    }

    pub fn symbols_of(&self, appln_id: u64) -> Option<&[CpcSymbol]> {
        self.index_of(appln_id).map(|i| self.symbols_at(i))
    }

    /// Positions of the applications citing the application at `index`.
    pub fn citing_at(&self, index: usize) -> &[u32] {
        let lo = self.cite_offsets[index] as usize;
        let hi = self.cite_offsets[index + 1] as usize;
        &self.citing[lo..hi]
    }

    pub fn classification_count(&self) -> usize {
        self.class_symbols.len()
    }

    pub fn citation_count(&self) -> usize {
        self.citing.len()
    }

    /// All `(citing_appln_id, cited_appln_id)` pairs held by the store.
    pub fn citation_pairs(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        (0..self.applications.len()).flat_map(move |cited| {
            self.citing_at(cited).iter().map(move |&g| {
                (
                    self.applications[g as usize].appln_id,
                    self.applications[cited].appln_id,
                )
            })
        })
    }
}

/// Number of applications filed in `[from_year, to_year]`.
pub fn validate_window(store: &SnapshotStore, from_year: i32, to_year: i32) -> usize {
    store
        .applications()
        .iter()
        .filter(|a| (from_year..=to_year).contains(&a.filing_year()))
        .count()
}
