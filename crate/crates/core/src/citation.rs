//! Family-level forward citations.
//!
//! Citations are stored per application. A family F receives one citation
//! from a family G (G != F) when any member of G cites any member of F and
//! `earliest_year(G) - earliest_year(F)` lies in `0..=5`. Repeated citations
//! between the same two families count once.

use rayon::prelude::*;

use crate::error::Result;
use crate::family::{build_families, Families};
use crate::snapshot::SnapshotStore;

/// Maximum lag in years between cited and citing family; inclusive.
pub const CITATION_WINDOW_YEARS: i32 = 5;

const NO_FAMILY: u32 = u32::MAX;

/// Citing families within the window for every family, aligned with
/// [`Families::records`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FamilyCitationIndex {
    citing: Vec<Vec<u64>>,
}

impl FamilyCitationIndex {
    pub fn build(store: &SnapshotStore, families: &Families) -> FamilyCitationIndex {
        let records = families.records();
        let mut app_family = vec![NO_FAMILY; store.len()];
        for (fi, f) in records.iter().enumerate() {
            for &id in &f.member_appln_ids {
                if let Some(i) = store.index_of(id) {
                    app_family[i] = fi as u32;
                }
            }
        }

        let citing = records
            .par_iter()
            .enumerate()
            .map(|(fi, f)| {
                let mut hits: Vec<u32> = Vec::new();
                for &id in &f.member_appln_ids {
                    let Some(idx) = store.index_of(id) else { continue };
                    for &g in store.citing_at(idx) {
                        let gf = app_family[g as usize];
                        if gf == NO_FAMILY || gf as usize == fi {
                            continue;
                        }
                        let lag = records[gf as usize].earliest_year - f.earliest_year;
                        if (0..=CITATION_WINDOW_YEARS).contains(&lag) {
                            hits.push(gf);
                        }
                    }
                }
                hits.sort_unstable();
                hits.dedup();
                hits.into_iter().map(|g| records[g as usize].family_id).collect()
            })
            .collect();
        FamilyCitationIndex { citing }
    }

    /// Citing family ids of the family at `position`, ascending.
    pub fn citing_at(&self, position: usize) -> &[u64] {
        &self.citing[position]
    }

    pub fn counts(&self) -> Vec<u32> {
        self.citing.iter().map(|c| c.len() as u32).collect()
    }
}

/// Forward-citation counts aligned with [`Families::records`].
pub fn forward_citations_5y(store: &SnapshotStore, families: &Families) -> Vec<u32> {
    FamilyCitationIndex::build(store, families).counts()
}

/// Computes the counts and stores them on the family records.
pub fn populate_forward_citations(store: &SnapshotStore, families: &mut Families) -> Result<()> {
    let counts = forward_citations_5y(store, families);
    families.set_forward_citations(&counts)
}

/// [`build_families`] followed by [`populate_forward_citations`].
pub fn build_cited_families(store: &SnapshotStore) -> Result<Families> {
    let mut families = build_families(store);
    populate_forward_citations(store, &mut families)?;
    Ok(families)
}

#[cfg(test)]
mod tests {
    use chrono::NaiveDate;

    use super::*;
    use crate::snapshot::{ApplicationRecord, StagedSnapshot};

    fn app(id: u64, fam: u64, year: i32) -> ApplicationRecord {
        ApplicationRecord {
            appln_id: id,
            family_id: fam,
            authority: "US".parse().unwrap(),
            filing_date: NaiveDate::from_ymd_opt(year, 1, 15).unwrap(),
        }
    }

    fn counts(apps: Vec<ApplicationRecord>, citations: Vec<(u64, u64)>) -> Vec<(u64, u32)> {
        let store = SnapshotStore::from_staged(
            "t",
            StagedSnapshot { applications: apps, classifications: vec![], citations },
        )
        .unwrap();
        let fams = build_families(&store);
        let c = forward_citations_5y(&store, &fams);
        fams.iter().map(|f| f.family_id).zip(c).collect()
    }

    #[test]
    fn two_citing_members_of_one_family_count_once() {
        let apps = vec![app(1, 1, 2000), app(2, 2, 2002), app(3, 2, 2003)];
        let got = counts(apps, vec![(2, 1), (3, 1)]);
        assert_eq!(got, vec![(1, 1), (2, 0)]);
    }

    #[test]
    fn window_boundaries() {
        let apps = vec![app(1, 1, 2000), app(2, 2, 2005), app(3, 3, 2006), app(4, 4, 1999), app(5, 5, 2000)];
        let got = counts(apps, vec![(2, 1), (3, 1), (4, 1), (5, 1)]);
        // lag 5 and lag 0 count; lag 6 and lag -1 do not.
        assert_eq!(got[0], (1, 2));
    }

    #[test]
    fn intra_family_citations_ignored() {
        let apps = vec![app(1, 1, 2000), app(2, 1, 2001)];
        assert_eq!(counts(apps, vec![(2, 1)]), vec![(1, 0)]);
    }
}
