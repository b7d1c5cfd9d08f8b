//! Reclassification, set-expansion and filtering effects between two
//! snapshots.
//!
//! Families are matched across snapshots by `family_id`. Within the year
//! window the green families of the newer snapshot split into
//!
//! * group B: green in both snapshots,
//! * group C: present in both, green only in the newer one (reclassified),
//! * group D: absent from the older snapshot (set expansion),
//!
//! and group A collects families that lost their green status. For families
//! present in both snapshots the newer snapshot's earliest year decides window
//! membership.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::family::{Families, FamilyRecord, QualityFilter};
use crate::YearWindow;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Group {
    A,
    B,
    C,
    D,
}

impl Group {
    pub const ALL: [Group; 4] = [Group::A, Group::B, Group::C, Group::D];

    pub fn name(&self) -> &'static str {
        match self {
            Group::A => "a",
            Group::B => "b",
            Group::C => "c",
            Group::D => "d",
        }
    }
}

impl std::str::FromStr for Group {
    type Err = Error;

    fn from_str(s: &str) -> Result<Group> {
        match s.to_ascii_lowercase().as_str() {
            "a" => Ok(Group::A),
            "b" => Ok(Group::B),
            "c" | "reclass" => Ok(Group::C),
            "d" | "expansion" => Ok(Group::D),
            other => Err(Error::InvalidArgument(format!("unknown group {other:?}"))),
        }
    }
}

/// Counts that do not enter any group but explain the remainder.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionDiagnostics {
    pub common_families: u64,
    /// Present only in the older snapshot (withdrawn, corrected or renumbered).
    pub old_only_families: u64,
    pub old_only_green: u64,
    pub new_only_families: u64,
    /// Green, new-only, but dated outside the window; excluded from group D.
    pub new_only_green_outside_window: u64,
    /// Common families whose earliest year differs between snapshots.
    pub year_disagreements: u64,
    /// Subset of the above whose window membership differs.
    pub window_disagreements: u64,
    pub old_green_in_window: u64,
    pub new_green_in_window: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EffectPartition {
    pub window: YearWindow,
    pub group_a: BTreeSet<u64>,
    pub group_b: BTreeSet<u64>,
    pub group_c: BTreeSet<u64>,
    pub group_d: BTreeSet<u64>,
    /// Earliest-year histogram per group.
    pub histograms: BTreeMap<Group, BTreeMap<i32, u64>>,
    pub diagnostics: PartitionDiagnostics,
}

impl EffectPartition {
    pub fn group(&self, g: Group) -> &BTreeSet<u64> {
        match g {
            Group::A => &self.group_a,
            Group::B => &self.group_b,
            Group::C => &self.group_c,
            Group::D => &self.group_d,
        }
    }

    pub fn group_of(&self, family_id: u64) -> Option<Group> {
        Group::ALL.into_iter().find(|&g| self.group(g).contains(&family_id))
    }

    pub fn reclassification_share(&self, new_green_total: u64) -> Result<f64> {
        reclassification_share(
            self.group_c.len() as u64,
            self.group_d.len() as u64,
            new_green_total,
        )
    }

    pub fn set_expansion_share(&self, new_green_total: u64) -> Result<f64> {
        set_expansion_share(
            self.group_c.len() as u64,
            self.group_d.len() as u64,
            new_green_total,
        )
    }

    /// Pairwise disjointness, and B ∪ C ∪ D equal to the in-window green
    /// families of `new`.
    pub fn check(&self, new: &Families) -> Result<()> {
        for (i, &g) in Group::ALL.iter().enumerate() {
            for &h in &Group::ALL[i + 1..] {
                if let Some(id) = self.group(g).intersection(self.group(h)).next() {
                    return Err(Error::Invariant(format!(
                        "family {id} is in both group {} and group {}",
                        g.name(),
                        h.name()
                    )));
                }
            }
        }
        let expected: BTreeSet<u64> = new
            .green()
            .filter(|f| self.window.contains(f.earliest_year))
            .map(|f| f.family_id)
            .collect();
        let covered = self.group_b.len() + self.group_c.len() + self.group_d.len();
        let all_in = [&self.group_b, &self.group_c, &self.group_d]
            .iter()
            .all(|g| g.iter().all(|id| expected.contains(id)));
        if covered != expected.len() || !all_in {
            return Err(Error::Invariant(format!(
                "groups B, C and D hold {covered} families but the newer snapshot has {} green families in the window",
                expected.len()
            )));
        }
        Ok(())
    }
}

/// Splits the families of two snapshots into groups A–D.
pub fn decompose(old: &Families, new: &Families, window: YearWindow) -> Result<EffectPartition> {
    let mut p = EffectPartition {
        window,
        group_a: BTreeSet::new(),
        group_b: BTreeSet::new(),
        group_c: BTreeSet::new(),
        group_d: BTreeSet::new(),
        histograms: Group::ALL.iter().map(|&g| (g, BTreeMap::new())).collect(),
        diagnostics: PartitionDiagnostics::default(),
    };
    fn place(p: &mut EffectPartition, g: Group, f: &FamilyRecord) {
        match g {
            Group::A => p.group_a.insert(f.family_id),
            Group::B => p.group_b.insert(f.family_id),
            Group::C => p.group_c.insert(f.family_id),
            Group::D => p.group_d.insert(f.family_id),
        };
        *p.histograms
            .get_mut(&g)
            .expect("all groups present")
            .entry(f.earliest_year)
            .or_insert(0) += 1;
    }

    let d = &mut p.diagnostics;
    d.old_green_in_window = old
        .green()
        .filter(|f| window.contains(f.earliest_year))
        .count() as u64;
    d.new_green_in_window = new
        .green()
        .filter(|f| window.contains(f.earliest_year))
        .count() as u64;

    let mut oi = old.records().iter().peekable();
    let mut ni = new.records().iter().peekable();
    loop {
        let (o, n) = match (oi.peek().copied(), ni.peek().copied()) {
            (None, None) => break,
            (Some(o), Some(n)) if o.family_id == n.family_id => (Some(o), Some(n)),
            (Some(o), Some(n)) if o.family_id < n.family_id => (Some(o), None),
            (Some(o), None) => (Some(o), None),
            (_, n) => (None, n),
        };
        if o.is_some() {
            oi.next();
        }
        if n.is_some() {
            ni.next();
        }
        match (o, n) {
            (Some(o), Some(n)) => {
                p.diagnostics.common_families += 1;
                let in_window = window.contains(n.earliest_year);
                if o.earliest_year != n.earliest_year {
                    p.diagnostics.year_disagreements += 1;
                    if window.contains(o.earliest_year) != in_window {
                        p.diagnostics.window_disagreements += 1;
                    }
                }
                if !in_window {
                    continue;
                }
                match (o.is_green, n.is_green) {
                    (true, false) => place(&mut p, Group::A, n),
                    (true, true) => place(&mut p, Group::B, n),
                    (false, true) => place(&mut p, Group::C, n),
                    (false, false) => {}
                }
            }
            (Some(o), None) => {
                p.diagnostics.old_only_families += 1;
                if o.is_green {
                    p.diagnostics.old_only_green += 1;
                }
            }
            (None, Some(n)) => {
                p.diagnostics.new_only_families += 1;
                if n.is_green {
                    if window.contains(n.earliest_year) {
                        place(&mut p, Group::D, n);
                    } else {
                        p.diagnostics.new_only_green_outside_window += 1;
                    }
                }
            }
            (None, None) => unreachable!(),
        }
    }
    p.check(new)?;
    Ok(p)
}

fn ratio(num: u64, den: u64, what: &'static str) -> Result<f64> {
    if den == 0 {
        return Err(Error::DivisionByZero(what));
    }
    Ok(num as f64 / den as f64)
}

/// `reclassified / (new_green_total - expansion)`.
pub fn reclassification_share(reclassified: u64, expansion: u64, new_green_total: u64) -> Result<f64> {
    let den = new_green_total.checked_sub(expansion).ok_or_else(|| {
        Error::InvalidArgument(format!(
            "set-expansion count {expansion} exceeds green total {new_green_total}"
        ))
    })?;
    ratio(reclassified, den, "green total minus set expansion is zero")
}

/// `expansion / (new_green_total - reclassified)`.
pub fn set_expansion_share(reclassified: u64, expansion: u64, new_green_total: u64) -> Result<f64> {
    let den = new_green_total.checked_sub(reclassified).ok_or_else(|| {
        Error::InvalidArgument(format!(
            "reclassified count {reclassified} exceeds green total {new_green_total}"
        ))
    })?;
    ratio(expansion, den, "green total minus reclassified is zero")
}

/// `count / total`, the share against the full newer-snapshot count.
pub fn share_of_total(count: u64, total: u64) -> Result<f64> {
    if count > total {
        return Err(Error::InvalidArgument(format!("{count} exceeds total {total}")));
    }
    ratio(count, total, "total is zero")
}

/// Fraction of families removed by a filter: `1 - filtered / unfiltered`.
pub fn filtering_reduction(unfiltered: u64, filtered: u64) -> Result<f64> {
    if filtered > unfiltered {
        return Err(Error::InvalidArgument(format!(
            "filtered count {filtered} exceeds unfiltered count {unfiltered}"
        )));
    }
    Ok(1.0 - ratio(filtered, unfiltered, "unfiltered count is zero")?)
}

/// Formats a ratio as a percentage with one decimal, e.g. `"9.2%"`.
pub fn format_percent(share: f64) -> String {
    format!("{:.1}%", share * 100.0)
}

/// One line of the filter × effect combination table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CombinationRow {
    pub filter: QualityFilter,
    pub count_old: u64,
    pub count_new: u64,
    pub count_reclass: u64,
    pub count_expansion: u64,
}

impl CombinationRow {
    /// Reclassified families over all green families of the newer snapshot.
    pub fn reclass_share_of_new(&self) -> Result<f64> {
        share_of_total(self.count_reclass, self.count_new)
    }

    pub fn reclass_share_excluding_expansion(&self) -> Result<f64> {
        reclassification_share(self.count_reclass, self.count_expansion, self.count_new)
    }

    pub fn expansion_share_of_new(&self) -> Result<f64> {
        share_of_total(self.count_expansion, self.count_new)
    }

    pub fn expansion_share_excluding_reclass(&self) -> Result<f64> {
        set_expansion_share(self.count_reclass, self.count_expansion, self.count_new)
    }
}

/// Per-filter green counts in both snapshots and within groups C and D.
///
/// Filters are evaluated on each snapshot's own family records; group
/// counts use the newer snapshot's records. `Cited` requires forward
/// citations on both family sets.
pub fn combination_table(
    old: &Families,
    new: &Families,
    partition: &EffectPartition,
    filters: &[QualityFilter],
) -> Result<Vec<CombinationRow>> {
    let window = partition.window;
    filters
        .iter()
        .map(|&filter| {
            let mut row = CombinationRow {
                filter,
                count_old: 0,
                count_new: 0,
                count_reclass: 0,
                count_expansion: 0,
            };
            for f in old.green().filter(|f| window.contains(f.earliest_year)) {
                if filter.matches(f)? {
                    row.count_old += 1;
                }
            }
            for f in new.green().filter(|f| window.contains(f.earliest_year)) {
                if filter.matches(f)? {
                    row.count_new += 1;
                    if partition.group_c.contains(&f.family_id) {
                        row.count_reclass += 1;
                    } else if partition.group_d.contains(&f.family_id) {
                        row.count_expansion += 1;
                    }
                }
            }
            Ok(row)
        })
        .collect()
}

pub const TABLE2_HEADER: [&str; 5] = [
    "filter",
    "count_2019",
    "count_2023",
    "reclassification",
    "set_expansion",
];

const TABLE2_FIXTURE: &str = include_str!("../data/table2.csv");

/// Published combination table for the 2019 and 2023 releases, embedded for
/// replaying the share formulas.
pub fn table2_fixture() -> Vec<CombinationRow> {
    parse_combination_csv(TABLE2_FIXTURE.as_bytes()).expect("embedded fixture is valid")
}

/// Reads rows in the fixture layout
/// (`filter,count_2019,count_2023,reclassification,set_expansion`).
pub fn parse_combination_csv<R: std::io::Read>(reader: R) -> Result<Vec<CombinationRow>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != TABLE2_HEADER {
        return Err(Error::schema("combination table", format!("unexpected header {header:?}")));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let num = |i: usize| -> Result<u64> {
            rec[i]
                .replace(',', "")
                .parse()
                .map_err(|_| Error::schema("combination table", format!("bad count {:?}", &rec[i])))
        };
        rows.push(CombinationRow {
            filter: rec[0].parse()?,
            count_old: num(1)?,
            count_new: num(2)?,
            count_reclass: num(3)?,
            count_expansion: num(4)?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use chrono::NaiveDate;

    use super::*;
    use crate::cpc::parse_symbol;
    use crate::family::build_families;
    use crate::snapshot::{ApplicationRecord, SnapshotStore, StagedSnapshot};

    /// `(family_id, year, green)` per single-member family.
    fn families(spec: &[(u64, i32, bool)]) -> Families {
        let mut staged = StagedSnapshot::default();
        for &(fam, year, green) in spec {
            let id = fam * 10;
            staged.applications.push(ApplicationRecord {
                appln_id: id,
                family_id: fam,
                authority: "US".parse().unwrap(),
                filing_date: NaiveDate::from_ymd_opt(year, 1, 1).unwrap(),
            });
            let sym = if green { "Y02E60/10" } else { "A01B1/00" };
            staged.classifications.push((id, parse_symbol(sym).unwrap()));
        }
        build_families(&SnapshotStore::from_staged("t", staged).unwrap())
    }

    #[test]
    fn groups_by_definition() {
        let old = families(&[(1, 2000, true), (2, 2000, false), (3, 2000, true), (4, 2000, false), (7, 2000, true)]);
        let new = families(&[
            (1, 2000, true),
            (2, 2000, true),
            (3, 2000, false),
            (4, 2000, false),
            (5, 2010, true),
            (6, 2018, true),
            (8, 2001, false),
        ]);
        let p = decompose(&old, &new, YearWindow::DEFAULT).unwrap();
        assert_eq!(p.group_a, BTreeSet::from([3]));
        assert_eq!(p.group_b, BTreeSet::from([1]));
        assert_eq!(p.group_c, BTreeSet::from([2]));
        assert_eq!(p.group_d, BTreeSet::from([5]));
        assert_eq!(p.diagnostics.new_only_green_outside_window, 1);
        assert_eq!(p.diagnostics.old_only_families, 1);
        assert_eq!(p.diagnostics.old_only_green, 1);
        assert_eq!(p.diagnostics.new_only_families, 3);
        assert_eq!(p.histograms[&Group::D], BTreeMap::from([(2010, 1)]));
        assert_eq!(p.group_of(2), Some(Group::C));
    }

    #[test]
    fn newer_year_governs_window() {
        let old = families(&[(1, 2017, false), (2, 2016, false)]);
        let new = families(&[(1, 2016, true), (2, 2017, true)]);
        let p = decompose(&old, &new, YearWindow::DEFAULT).unwrap();
        assert_eq!(p.group_c, BTreeSet::from([1]));
        assert_eq!(p.diagnostics.year_disagreements, 2);
        assert_eq!(p.diagnostics.window_disagreements, 2);
    }

    #[test]
    fn check_detects_broken_partition() {
        let new = families(&[(1, 2000, true)]);
        let mut p = decompose(&Families::default(), &new, YearWindow::DEFAULT).unwrap();
        p.group_c.insert(1);
        assert!(matches!(p.check(&new), Err(Error::Invariant(_))));
        p.group_c.clear();
        p.group_d.clear();
        assert!(matches!(p.check(&new), Err(Error::Invariant(_))));
    }

    #[test]
    fn share_formulas() {
        let r = reclassification_share(151_617, 175_732, 1_814_580).unwrap();
        assert!((r - 0.092514).abs() < 1e-6, "{r}");
        let e = set_expansion_share(151_617, 175_732, 1_814_580).unwrap();
        assert!((e - 0.105674).abs() < 1e-6, "{e}");
        assert_eq!(format_percent(e), "10.6%");
        assert!((share_of_total(175_732, 1_814_580).unwrap() - 0.096845).abs() < 1e-6);
        assert_eq!(reclassification_share(0, 5, 10).unwrap(), 0.0);
        assert_eq!(set_expansion_share(5, 0, 10).unwrap(), 0.0);
        assert!(matches!(reclassification_share(1, 10, 10), Err(Error::DivisionByZero(_))));
        assert!(matches!(set_expansion_share(0, 0, 0), Err(Error::DivisionByZero(_))));
        assert!(matches!(reclassification_share(1, 11, 10), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn reductions() {
        assert!((filtering_reduction(1_814_580, 1_046_702).unwrap() - 0.42317).abs() < 1e-4);
        assert!((filtering_reduction(1_814_580, 122_563).unwrap() - 0.93246).abs() < 1e-4);
        assert_eq!(filtering_reduction(10, 10).unwrap(), 0.0);
        assert!(matches!(filtering_reduction(0, 0), Err(Error::DivisionByZero(_))));
    }

    #[test]
    fn fixture_matches_published_rows() {
        let rows = table2_fixture();
        assert_eq!(rows.len(), 6);
        assert_eq!(rows.iter().map(|r| r.filter).collect::<Vec<_>>(), QualityFilter::ALL);
        let cited = rows[1];
        assert_eq!(
            (cited.count_old, cited.count_new, cited.count_reclass, cited.count_expansion),
            (794_349, 1_046_702, 101_713, 87_104)
        );
    }

    #[test]
    fn empty_snapshots_give_zero_rows() {
        let empty = Families::default();
        let p = decompose(&empty, &empty, YearWindow::DEFAULT).unwrap();
        let rows = combination_table(&empty, &empty, &p, &QualityFilter::ALL).unwrap();
        assert_eq!(rows.len(), 6);
        assert!(rows.iter().all(|r| r.count_old + r.count_new + r.count_reclass + r.count_expansion == 0));
    }
}
