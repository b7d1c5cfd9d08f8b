//! Brute-force reference computations over raw TSV text.
//!
//! Nothing here goes through the library's parsers or indexes: rows are split
//! by hand, CPC symbols are compared as whitespace-stripped strings, and every
//! aggregate is a direct loop over the rows.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use patdrift_core::snapshot::StagedSnapshot;

#[derive(Clone, Debug, Default)]
pub struct RawSnapshot {
    /// appln_id → (family_id, office, year); smallest record per id.
    pub apps: BTreeMap<u64, (u64, String, i32)>,
    /// (appln_id, symbol with whitespace removed)
    pub classes: Vec<(u64, String)>,
    pub cites: Vec<(u64, u64)>,
}

pub struct Tsv {
    pub applications: String,
    pub classifications: String,
    pub citations: String,
}

pub fn render(staged: &StagedSnapshot) -> Tsv {
    let (mut a, mut c, mut t) = (Vec::new(), Vec::new(), Vec::new());
    staged.write_tables(&mut a, &mut c, &mut t).unwrap();
    Tsv {
        applications: String::from_utf8(a).unwrap(),
        classifications: String::from_utf8(c).unwrap(),
        citations: String::from_utf8(t).unwrap(),
    }
}

fn data_rows(text: &str) -> impl Iterator<Item = Vec<&str>> {
    text.lines().skip(1).filter(|l| !l.is_empty()).map(|l| l.split('\t').collect())
}

impl RawSnapshot {
    pub fn from_tsv(tsv: &Tsv) -> RawSnapshot {
        let mut raw = RawSnapshot::default();
        for f in data_rows(&tsv.applications) {
            let id: u64 = f[0].parse().unwrap();
            let rec = (f[1].parse().unwrap(), f[2].to_string(), f[3][..4].parse().unwrap());
            match raw.apps.get(&id) {
                Some(old) if *old <= rec => {}
                _ => {
                    raw.apps.insert(id, rec);
                }
            }
        }
        for f in data_rows(&tsv.classifications) {
            let sym: String = f[1].chars().filter(|c| !c.is_whitespace()).collect();
            raw.classes.push((f[0].parse().unwrap(), sym));
        }
        for f in data_rows(&tsv.citations) {
            raw.cites.push((f[0].parse().unwrap(), f[1].parse().unwrap()));
        }
        raw
    }

    pub fn from_staged(staged: &StagedSnapshot) -> RawSnapshot {
        RawSnapshot::from_tsv(&render(staged))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct OracleFamily {
    pub year: i32,
    pub offices: BTreeSet<String>,
    pub green: bool,
    pub fwd: u32,
    /// Three-character class keys of all member symbols.
    pub classes: BTreeSet<String>,
    /// Y02 main-group keys such as `Y02E60`.
    pub green_groups: BTreeSet<String>,
}

pub fn families(raw: &RawSnapshot) -> BTreeMap<u64, OracleFamily> {
    let mut out: BTreeMap<u64, OracleFamily> = BTreeMap::new();
    for (_, (fam, office, year)) in &raw.apps {
        let e = out.entry(*fam).or_insert(OracleFamily { year: *year, ..Default::default() });
        e.year = e.year.min(*year);
        e.offices.insert(office.clone());
    }
    for (id, sym) in &raw.classes {
        let Some((fam, _, _)) = raw.apps.get(id) else { continue };
        let f = out.get_mut(fam).unwrap();
        if sym.starts_with("Y02") {
            f.green = true;
            let group = sym.split('/').next().unwrap();
            f.green_groups.insert(group.to_string());
        }
        f.classes.insert(sym[..3].to_string());
    }
    let mut citing: BTreeMap<u64, BTreeSet<u64>> = BTreeMap::new();
    for (a, b) in &raw.cites {
        let (Some((g, _, _)), Some((f, _, _))) = (raw.apps.get(a), raw.apps.get(b)) else { continue };
        if g == f {
            continue;
        }
        let lag = out[g].year - out[f].year;
        if (0..=5).contains(&lag) {
            citing.entry(*f).or_default().insert(*g);
        }
    }
    for (f, set) in citing {
        out.get_mut(&f).unwrap().fwd = set.len() as u32;
    }
    out
}

/// Groups A, B, C, D by direct definition.
pub fn groups(
    old: &BTreeMap<u64, OracleFamily>,
    new: &BTreeMap<u64, OracleFamily>,
    from: i32,
    to: i32,
) -> [BTreeSet<u64>; 4] {
    let mut g: [BTreeSet<u64>; 4] = Default::default();
    for (id, n) in new {
        if n.year < from || n.year > to {
            continue;
        }
        match old.get(id) {
            Some(o) if o.green && !n.green => g[0].insert(*id),
            Some(o) if o.green && n.green => g[1].insert(*id),
            Some(o) if !o.green && n.green => g[2].insert(*id),
            None if n.green => g[3].insert(*id),
            _ => false,
        };
    }
    g
}

pub fn passes(f: &OracleFamily, filter: &str) -> bool {
    let has = |o: &str| f.offices.contains(o);
    match filter {
        "none" => true,
        "famsize" => f.offices.len() >= 2,
        "cited" => f.fwd >= 1,
        "epo" => has("EP"),
        "uspto" => has("US"),
        "triadic" => has("EP") && has("US") && has("JP"),
        other => panic!("unknown filter {other}"),
    }
}

/// `(count_old, count_new, count_reclass, count_expansion)` for one filter.
pub fn table_row(
    old: &BTreeMap<u64, OracleFamily>,
    new: &BTreeMap<u64, OracleFamily>,
    from: i32,
    to: i32,
    filter: &str,
) -> (u64, u64, u64, u64) {
    let [_, _, c, d] = groups(old, new, from, to);
    let inw = |f: &OracleFamily| f.year >= from && f.year <= to;
    let count_old = old.values().filter(|f| f.green && inw(f) && passes(f, filter)).count() as u64;
    let mut row = (count_old, 0, 0, 0);
    for (id, f) in new {
        if f.green && inw(f) && passes(f, filter) {
            row.1 += 1;
            row.2 += u64::from(c.contains(id));
            row.3 += u64::from(d.contains(id));
        }
    }
    row
}

/// Class key → (size_new, added, removed) over in-window families of `new`.
pub fn class_drift(
    old: &BTreeMap<u64, OracleFamily>,
    new: &BTreeMap<u64, OracleFamily>,
    from: i32,
    to: i32,
) -> BTreeMap<String, (u64, u64, u64)> {
    let mut out: BTreeMap<String, (u64, u64, u64)> = BTreeMap::new();
    for (id, n) in new {
        if n.year < from || n.year > to {
            continue;
        }
        for c in &n.classes {
            out.entry(c.clone()).or_default().0 += 1;
        }
        if let Some(o) = old.get(id) {
            for c in n.classes.difference(&o.classes) {
                out.entry(c.clone()).or_default().1 += 1;
            }
            for c in o.classes.difference(&n.classes) {
                out.entry(c.clone()).or_default().2 += 1;
            }
        }
    }
    out
}

/// `(key, count, reference, share)` rows of a ranking: descending count or
/// share, ties by key, `top_k` rows. With `pool_top_k_only` the share
/// ranking only considers the `top_k` keys by count.
pub type RankRow = (String, u64, u64, Option<f64>);

pub fn ranking(
    set: &BTreeMap<String, u64>,
    reference: &BTreeMap<String, u64>,
    top_k: usize,
    pool_top_k_only: bool,
) -> (Vec<RankRow>, Vec<RankRow>) {
    let mut rows: Vec<RankRow> = set
        .iter()
        .map(|(k, &n)| {
            let r = reference.get(k).copied().unwrap_or(0);
            (k.clone(), n, r, if r > 0 { Some(n as f64 / r as f64) } else { None })
        })
        .collect();
    rows.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let pool: Vec<RankRow> = if pool_top_k_only { rows.iter().take(top_k).cloned().collect() } else { rows.clone() };
    let mut by_share: Vec<RankRow> = pool.into_iter().filter(|r| r.3.is_some()).collect();
    by_share.sort_by(|a, b| b.3.partial_cmp(&a.3).unwrap().then(a.0.cmp(&b.0)));
    by_share.truncate(top_k);
    rows.truncate(top_k);
    (rows, by_share)
}

/// Per-key family counts; a family counts once per key it carries.
pub fn key_counts<'a, I, F>(families: I, keys: F) -> BTreeMap<String, u64>
where
    I: IntoIterator<Item = &'a OracleFamily>,
    F: Fn(&'a OracleFamily) -> &'a BTreeSet<String>,
{
    let mut out = BTreeMap::new();
    for f in families {
        for k in keys(f) {
            *out.entry(k.clone()).or_insert(0) += 1;
        }
    }
    out
}

/// Ordinary least squares through the normal equations, no centering.
pub fn normal_equations(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    (slope, (sy - slope * sx) / n)
}
