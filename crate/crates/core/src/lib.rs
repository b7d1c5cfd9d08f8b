//! Measurement effects in green patent statistics across two database
//! releases.
//!
//! The crate ingests two snapshots of a patent database, aggregates
//! applications into DOCDB families and splits the difference in green (Y02)
//! family counts into reclassification, set expansion and quality-filter
//! effects.
//!
//! Pipeline: [`snapshot::ingest_snapshot`] → [`family::build_families`] →
//! [`citation::populate_forward_citations`] → [`effects::decompose`] and
//! [`effects::combination_table`] → [`stats`].

pub mod citation;
pub mod cpc;
pub mod effects;
mod error;
pub mod family;
pub mod snapshot;
pub mod stats;
pub mod synth;

use serde::{Deserialize, Serialize};

pub use error::{Error, Result};

/// Inclusive range of earliest-priority years.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct YearWindow {
    pub from: i32,
    pub to: i32,
}

impl YearWindow {
    /// 1980–2016, the analysis window used throughout.
    pub const DEFAULT: YearWindow = YearWindow { from: 1980, to: 2016 };

    pub fn new(from: i32, to: i32) -> Result<YearWindow> {
        if from > to {
            return Err(Error::InvalidArgument(format!("window start {from} is after end {to}")));
        }
        Ok(YearWindow { from, to })
    }

    pub fn contains(&self, year: i32) -> bool {
        (self.from..=self.to).contains(&year)
    }

    pub fn years(&self) -> std::ops::RangeInclusive<i32> {
        self.from..=self.to
    }
}

impl Default for YearWindow {
    fn default() -> Self {
        YearWindow::DEFAULT
    }
}
