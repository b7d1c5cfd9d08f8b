//! Streaming TSV ingestion.
//!
//! Each table is read once, row by row, into a [`StagedSnapshot`]. The three
//! tables are parsed on separate threads and merged at the end. Malformed rows
//! are skipped and counted; a bad header aborts.

use std::fs::File;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::thread;

use chrono::NaiveDate;
use csv::{ByteRecord, ReaderBuilder};

use super::{ApplicationRecord, IngestReport, Office, SnapshotStore, StagedSnapshot, TableStats};
use crate::cpc::{self, CpcSymbol};
use crate::error::{Error, Result};

pub const APPLICATIONS_HEADER: [&str; 4] = ["appln_id", "family_id", "authority", "filing_date"];
pub const CLASSIFICATIONS_HEADER: [&str; 2] = ["appln_id", "cpc_symbol"];
pub const CITATIONS_HEADER: [&str; 2] = ["citing_appln_id", "cited_appln_id"];

const MAX_MALFORMED_SAMPLES: usize = 20;

#[derive(Clone, Debug)]
pub struct SnapshotPaths {
    pub applications: PathBuf,
    pub classifications: PathBuf,
    pub citations: PathBuf,
}

impl SnapshotPaths {
    /// The conventional file names inside one snapshot directory.
    pub fn in_dir(dir: &Path) -> SnapshotPaths {
        SnapshotPaths {
            applications: dir.join("applications.tsv"),
            classifications: dir.join("classifications.tsv"),
            citations: dir.join("citations.tsv"),
        }
    }
}

pub fn ingest_snapshot(paths: &SnapshotPaths, label: &str) -> Result<(SnapshotStore, IngestReport)> {
    let open = |p: &Path| {
        File::open(p).map_err(|e| {
            Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", p.display())))
        })
    };
    let apps = open(&paths.applications)?;
    let classes = open(&paths.classifications)?;
    let cites = open(&paths.citations)?;
    ingest_readers(
        label,
        (apps, &paths.applications.display().to_string()),
        (classes, &paths.classifications.display().to_string()),
        (cites, &paths.citations.display().to_string()),
    )
}

/// Ingests from arbitrary readers, each paired with a name used in messages.
pub fn ingest_readers<A, C, T>(
    label: &str,
    applications: (A, &str),
    classifications: (C, &str),
    citations: (T, &str),
) -> Result<(SnapshotStore, IngestReport)>
where
    A: Read + Send,
    C: Read + Send,
    T: Read + Send,
{
    let (apps, classes, cites) = thread::scope(|s| {
        let a = s.spawn(|| read_applications(applications.0, applications.1));
        let c = s.spawn(|| read_classifications(classifications.0, classifications.1));
        let t = s.spawn(|| read_citations(citations.0, citations.1));
        (
            a.join().expect("application reader panicked"),
            c.join().expect("classification reader panicked"),
            t.join().expect("citation reader panicked"),
        )
    });
    let apps = apps?;
    let classes = classes?;
    let cites = cites?;

    let mut report = IngestReport {
        label: label.to_string(),
        applications: apps.stats,
        classifications: classes.stats,
        citations: cites.stats,
        ..IngestReport::default()
    };
    report.malformed_samples = apps
        .samples
        .into_iter()
        .chain(classes.samples)
        .chain(cites.samples)
        .collect();
    let staged = StagedSnapshot {
        applications: apps.rows,
        classifications: classes.rows,
        citations: cites.rows,
    };
    let store = staged.build(label, &mut report)?;
    Ok((store, report))
}

struct Table<T> {
    rows: Vec<T>,
    stats: TableStats,
    samples: Vec<String>,
}

fn read_table<R: Read, T>(
    reader: R,
    source: &str,
    header: &[&str],
    mut parse: impl FnMut(&ByteRecord) -> std::result::Result<T, &'static str>,
) -> Result<Table<T>> {
    let mut rdr = ReaderBuilder::new()
        .delimiter(b'\t')
        .quoting(false)
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut record = ByteRecord::new();
    if !rdr.read_byte_record(&mut record)? {
        return Err(Error::schema(source, "missing header row"));
    }
    let found: Vec<&[u8]> = record.iter().collect();
    let expected: Vec<&[u8]> = header.iter().map(|h| h.as_bytes()).collect();
    if found != expected {
        return Err(Error::schema(
            source,
            format!(
                "expected header {:?}, found {:?}",
                header.join("\t"),
                String::from_utf8_lossy(&found.join(&b'\t'))
            ),
        ));
    }

    let mut table = Table {
        rows: Vec::new(),
        stats: TableStats::default(),
        samples: Vec::new(),
    };
    while rdr.read_byte_record(&mut record)? {
        table.stats.rows += 1;
        let outcome = if record.len() != header.len() {
            Err("wrong column count")
        } else {
            parse(&record)
        };
        match outcome {
            Ok(row) => table.rows.push(row),
            Err(reason) => {
                table.stats.malformed += 1;
                if table.samples.len() < MAX_MALFORMED_SAMPLES {
                    let line = record.position().map_or(0, |p| p.line());
                    table.samples.push(format!("{source}:{line}: {reason}"));
                }
            }
        }
    }
    Ok(table)
}

fn positive_id(field: &[u8]) -> std::result::Result<u64, &'static str> {
    if field.is_empty() || field.len() > 19 || !field.iter().all(u8::is_ascii_digit) {
        return Err("id is not a positive integer");
    }
    let v = field.iter().fold(0u64, |acc, &b| acc * 10 + u64::from(b - b'0'));
    if v == 0 {
        return Err("id is not a positive integer");
    }
    Ok(v)
}

fn iso_date(field: &[u8]) -> std::result::Result<NaiveDate, &'static str> {
    const BAD: &str = "date is not YYYY-MM-DD";
    if field.len() != 10 || field[4] != b'-' || field[7] != b'-' {
        return Err(BAD);
    }
    let num = |r: &[u8]| {
        r.iter()
            .try_fold(0u32, |acc, &b| b.is_ascii_digit().then(|| acc * 10 + u32::from(b - b'0')))
    };
    let (Some(y), Some(m), Some(d)) = (num(&field[..4]), num(&field[5..7]), num(&field[8..])) else {
        return Err(BAD);
    };
    NaiveDate::from_ymd_opt(y as i32, m, d).ok_or(BAD)
}

fn read_applications<R: Read>(reader: R, source: &str) -> Result<Table<ApplicationRecord>> {
    read_table(reader, source, &APPLICATIONS_HEADER, |r| {
        Ok(ApplicationRecord {
            appln_id: positive_id(&r[0])?,
            family_id: positive_id(&r[1])?,
            authority: Office::from_bytes(&r[2]).ok_or("authority is not two uppercase letters")?,
            filing_date: iso_date(&r[3])?,
        })
    })
}

fn read_classifications<R: Read>(reader: R, source: &str) -> Result<Table<(u64, CpcSymbol)>> {
    read_table(reader, source, &CLASSIFICATIONS_HEADER, |r| {
        Ok((positive_id(&r[0])?, cpc::parse_bytes(&r[1])?))
    })
}

fn read_citations<R: Read>(reader: R, source: &str) -> Result<Table<(u64, u64)>> {
    read_table(reader, source, &CITATIONS_HEADER, |r| {
        Ok((positive_id(&r[0])?, positive_id(&r[1])?))
    })
}
