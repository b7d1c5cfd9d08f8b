//! DOCDB family aggregation and quality filters.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cpc::{CpcSymbol, Level};
use crate::error::{Error, Result};
use crate::snapshot::{Office, SnapshotStore};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FamilyRecord {
    pub family_id: u64,
    /// Sorted member application ids.
    pub member_appln_ids: Vec<u64>,
    /// Sorted distinct filing authorities of the members.
    pub offices: Vec<Office>,
    /// Minimum filing year over members.
    pub earliest_year: i32,
    pub is_green: bool,
    pub family_size: usize,
    /// Family-level forward citations within five years; `None` until the
    /// citation step has run.
    pub fwd_cit_5y: Option<u32>,
    pub has_epo: bool,
    pub has_uspto: bool,
    pub has_jpo: bool,
    /// Distinct Y02 main groups (group-level keys) over all member symbols.
    pub green_groups: Vec<CpcSymbol>,
}

impl FamilyRecord {
    pub fn has_office(&self, office: Office) -> bool {
        self.offices.binary_search(&office).is_ok()
    }
}

/// All families of one snapshot, sorted by `family_id`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Families {
    records: Vec<FamilyRecord>,
}

impl Families {
    pub fn records(&self) -> &[FamilyRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, FamilyRecord> {
        self.records.iter()
    }

    pub fn position(&self, family_id: u64) -> Option<usize> {
        self.records
            .binary_search_by_key(&family_id, |f| f.family_id)
            .ok()
    }

    pub fn get(&self, family_id: u64) -> Option<&FamilyRecord> {
        self.position(family_id).map(|i| &self.records[i])
    }

    pub fn green(&self) -> impl Iterator<Item = &FamilyRecord> {
        self.records.iter().filter(|f| f.is_green)
    }

    /// Sets `fwd_cit_5y` from counts aligned with [`Families::records`].
    pub fn set_forward_citations(&mut self, counts: &[u32]) -> Result<()> {
        if counts.len() != self.records.len() {
            return Err(Error::InvalidArgument(format!(
                "{} citation counts for {} families",
                counts.len(),
                self.records.len()
            )));
        }
        for (f, &c) in self.records.iter_mut().zip(counts) {
            f.fwd_cit_5y = Some(c);
        }
        Ok(())
    }

    /// Distinct member symbols of every family truncated to `level`, aligned
    /// with [`Families::records`]. Families must come from `store`.
    pub fn pooled_codes(&self, store: &SnapshotStore, level: Level) -> Vec<Vec<CpcSymbol>> {
        self.records
            .par_iter()
            .map(|f| {
                let mut keys: Vec<CpcSymbol> = f
                    .member_appln_ids
                    .iter()
                    .filter_map(|&id| store.symbols_of(id))
                    .flatten()
                    .map(|s| s.truncated(level))
                    .collect();
                keys.sort_unstable();
                keys.dedup();
                keys
            })
            .collect()
    }
}

impl FromIterator<FamilyRecord> for Families {
    fn from_iter<I: IntoIterator<Item = FamilyRecord>>(iter: I) -> Self {
        let mut records: Vec<FamilyRecord> = iter.into_iter().collect();
        records.sort_by_key(|f| f.family_id);
        Families { records }
    }
}

/// Groups the store's applications by `family_id`.
///
/// Every field except `fwd_cit_5y` is populated.
pub fn build_families(store: &SnapshotStore) -> Families {
    let apps = store.applications();
    let mut order: Vec<u32> = (0..apps.len() as u32).collect();
    order.par_sort_unstable_by_key(|&i| (apps[i as usize].family_id, apps[i as usize].appln_id));

    let records = order
        .chunk_by(|&a, &b| apps[a as usize].family_id == apps[b as usize].family_id)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|members| {
            let mut offices: Vec<Office> = members.iter().map(|&i| apps[i as usize].authority).collect();
            offices.sort_unstable();
            offices.dedup();
            let mut green_groups: Vec<CpcSymbol> = members
                .iter()
                .flat_map(|&i| store.symbols_at(i as usize))
                .filter(|s| s.is_green())
                .map(|s| s.truncated(Level::Group))
                .collect();
            green_groups.sort_unstable();
            green_groups.dedup();
            let has = |o: Office| offices.binary_search(&o).is_ok();
            FamilyRecord {
                family_id: apps[members[0] as usize].family_id,
                member_appln_ids: members.iter().map(|&i| apps[i as usize].appln_id).collect(),
                earliest_year: members
                    .iter()
                    .map(|&i| apps[i as usize].filing_year())
                    .min()
                    .expect("non-empty group"),
                is_green: !green_groups.is_empty(),
                family_size: offices.len(),
                fwd_cit_5y: None,
                has_epo: has(Office::EP),
                has_uspto: has(Office::US),
                has_jpo: has(Office::JP),
                green_groups,
                offices,
            }
        })
        .collect();
    Families { records }
}

/// Quality thresholds applied to family sets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QualityFilter {
    None,
    /// At least two distinct filing offices.
    Famsize,
    /// At least one family-level forward citation within five years.
    Cited,
    Epo,
    Uspto,
    /// Members at EP, US and JP.
    Triadic,
}

impl QualityFilter {
    /// Row order of the combination table.
    pub const ALL: [QualityFilter; 6] = [
        QualityFilter::None,
        QualityFilter::Cited,
        QualityFilter::Famsize,
        QualityFilter::Triadic,
        QualityFilter::Epo,
        QualityFilter::Uspto,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            QualityFilter::None => "none",
            QualityFilter::Famsize => "famsize",
            QualityFilter::Cited => "cited",
            QualityFilter::Epo => "epo",
            QualityFilter::Uspto => "uspto",
            QualityFilter::Triadic => "triadic",
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            QualityFilter::None => "No filtering",
            QualityFilter::Famsize => "Family size",
            QualityFilter::Cited => "Citations",
            QualityFilter::Epo => "EPO",
            QualityFilter::Uspto => "USPTO",
            QualityFilter::Triadic => "Triadic",
        }
    }

    pub fn matches(&self, f: &FamilyRecord) -> Result<bool> {
        Ok(match self {
            QualityFilter::None => true,
            QualityFilter::Famsize => f.family_size >= 2,
            QualityFilter::Cited => {
                f.fwd_cit_5y
                    .ok_or(Error::MissingIndicator { family_id: f.family_id })?
                    >= 1
            }
            QualityFilter::Epo => f.has_epo,
            QualityFilter::Uspto => f.has_uspto,
            QualityFilter::Triadic => f.has_epo && f.has_uspto && f.has_jpo,
        })
    }
}

impl fmt::Display for QualityFilter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for QualityFilter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "none" => QualityFilter::None,
            "famsize" | "family size" => QualityFilter::Famsize,
            "cited" | "citations" => QualityFilter::Cited,
            "epo" => QualityFilter::Epo,
            "uspto" => QualityFilter::Uspto,
            "triadic" => QualityFilter::Triadic,
            other => return Err(Error::InvalidArgument(format!("unknown quality filter {other:?}"))),
        })
    }
}

/// Keeps the families passing `filter`, preserving input order.
pub fn apply_filter<'a, I>(families: I, filter: QualityFilter) -> Result<Vec<&'a FamilyRecord>>
where
    I: IntoIterator<Item = &'a FamilyRecord>,
{
    let mut out = Vec::new();
    for f in families {
        if filter.matches(f)? {
            out.push(f);
        }
    }
    Ok(out)
}

/// Family count per office. A family counts once for every office it has a
/// member at.
pub fn offices_of<'a, I>(families: I) -> BTreeMap<Office, u64>
where
    I: IntoIterator<Item = &'a FamilyRecord>,
{
    let mut counts = BTreeMap::new();
    for f in families {
        for &o in &f.offices {
            *counts.entry(o).or_insert(0) += 1;
        }
    }
    counts
}
