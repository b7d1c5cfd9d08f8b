//! Trend series, group and office rankings, class-level reclassification and
//! the class-size power-law fit.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::cpc::{CpcSymbol, Level};
use crate::error::{Error, Result};
use crate::family::{offices_of, Families, FamilyRecord};
use crate::snapshot::SnapshotStore;
use crate::YearWindow;

/// Family counts per earliest year. Every year of the window is present.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrendSeries {
    pub label: String,
    pub window: YearWindow,
    pub points: BTreeMap<i32, u64>,
}

impl TrendSeries {
    pub fn total(&self) -> u64 {
        self.points.values().sum()
    }

    /// Year-wise `self / denominator`; `None` where the denominator is zero.
    pub fn ratio_to(&self, denominator: &TrendSeries) -> Vec<(i32, Option<f64>)> {
        self.points
            .iter()
            .map(|(&y, &n)| {
                let d = denominator.points.get(&y).copied().unwrap_or(0);
                (y, (d > 0).then(|| n as f64 / d as f64))
            })
            .collect()
    }
}

/// Histogram of `years` over `window`; years outside the window are dropped.
pub fn trend<I>(label: &str, years: I, window: YearWindow) -> TrendSeries
where
    I: IntoIterator<Item = i32>,
{
    let mut points: BTreeMap<i32, u64> = window.years().map(|y| (y, 0)).collect();
    for y in years {
        if let Some(n) = points.get_mut(&y) {
            *n += 1;
        }
    }
    TrendSeries {
        label: label.to_string(),
        window,
        points,
    }
}

/// Convenience wrapper over [`trend`] for family records.
pub fn family_trend<'a, I>(label: &str, families: I, window: YearWindow) -> TrendSeries
where
    I: IntoIterator<Item = &'a FamilyRecord>,
{
    trend(label, families.into_iter().map(|f| f.earliest_year), window)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub key: String,
    pub absolute: u64,
    /// Count of the same key in the reference set.
    pub reference: u64,
    /// `absolute / reference`; absent when the reference count is zero.
    pub share: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    /// Descending absolute count, ties by key order.
    pub by_absolute: Vec<RankEntry>,
    /// Descending share, ties by key order. Keys without a reference count
    /// are left out.
    pub by_share: Vec<RankEntry>,
}

fn build_ranking<K: Ord + Copy>(
    set: &BTreeMap<K, u64>,
    reference: &BTreeMap<K, u64>,
    top_k: usize,
    render: impl Fn(&K) -> String,
    share_pool_top_k_only: bool,
) -> Ranking {
    let mut entries: Vec<(K, RankEntry)> = set
        .iter()
        .map(|(k, &absolute)| {
            let reference = reference.get(k).copied().unwrap_or(0);
            let entry = RankEntry {
                key: render(k),
                absolute,
                reference,
                share: (reference > 0).then(|| absolute as f64 / reference as f64),
            };
            (*k, entry)
        })
        .collect();
    entries.sort_by(|a, b| b.1.absolute.cmp(&a.1.absolute).then(a.0.cmp(&b.0)));

    let pool = if share_pool_top_k_only {
        &entries[..entries.len().min(top_k)]
    } else {
        &entries[..]
    };
    let mut by_share: Vec<(K, RankEntry)> = pool.iter().filter(|e| e.1.share.is_some()).cloned().collect();
    by_share.sort_by(|a, b| {
        b.1.share
            .partial_cmp(&a.1.share)
            .expect("shares are finite")
            .then(a.0.cmp(&b.0))
    });
    by_share.truncate(top_k);
    entries.truncate(top_k);
    Ranking {
        by_absolute: entries.into_iter().map(|e| e.1).collect(),
        by_share: by_share.into_iter().map(|e| e.1).collect(),
    }
}

fn group_counts<'a, I: IntoIterator<Item = &'a FamilyRecord>>(families: I) -> BTreeMap<CpcSymbol, u64> {
    let mut counts = BTreeMap::new();
    for f in families {
        for &g in &f.green_groups {
            *counts.entry(g).or_insert(0) += 1;
        }
    }
    counts
}

/// Ranks Y02 main groups (e.g. `Y02E60`).
///
/// A family counts once for every distinct Y02 group among its members'
/// symbols. Shares divide by the group's count in `reference`.
pub fn rank_by_group<'a, S, R>(set: S, reference: R, top_k: usize) -> Ranking
where
    S: IntoIterator<Item = &'a FamilyRecord>,
    R: IntoIterator<Item = &'a FamilyRecord>,
{
    build_ranking(
        &group_counts(set),
        &group_counts(reference),
        top_k,
        |k| k.truncate(Level::Group),
        false,
    )
}

/// Ranks filing offices. A family counts once at every office it has a
/// member at. The share ranking only considers the `top_k` offices by
/// absolute count.
pub fn rank_by_office<'a, S, R>(set: S, reference: R, top_k: usize) -> Ranking
where
    S: IntoIterator<Item = &'a FamilyRecord>,
    R: IntoIterator<Item = &'a FamilyRecord>,
{
    build_ranking(
        &offices_of(set),
        &offices_of(reference),
        top_k,
        |o| o.to_string(),
        true,
    )
}

/// Pooled member classifications of every family at one truncation level.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClassAssignments {
    pub level: Level,
    /// family_id → (earliest year, sorted distinct class keys).
    pub families: BTreeMap<u64, (i32, Vec<CpcSymbol>)>,
}

pub fn class_assignments(store: &SnapshotStore, families: &Families, level: Level) -> ClassAssignments {
    let codes = families.pooled_codes(store, level);
    ClassAssignments {
        level,
        families: families
            .iter()
            .zip(codes)
            .map(|(f, c)| (f.family_id, (f.earliest_year, c)))
            .collect(),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassReclassPoint {
    pub class_code: String,
    /// Families in the class in the newer snapshot.
    pub size_new: u64,
    /// Common families in the class only under the newer classification.
    pub added: u64,
    /// Common families in the class only under the older classification.
    pub removed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassDrift {
    pub level: Level,
    /// One point per class held by an in-window family of the newer snapshot,
    /// or left by a common in-window family; in class order.
    pub points: Vec<ClassReclassPoint>,
    /// `Σ(added + removed) / Σ size_new`.
    pub aggregate_rate: f64,
    /// Mean of per-class `(added + removed) / size_new` over classes with
    /// `size_new > 0`.
    pub mean_class_rate: f64,
}

/// Family migrations between classes.
///
/// Only families present in both snapshots contribute to `added`/`removed`;
/// `size_new` counts every family of the newer snapshot. Families are kept
/// when their newer-snapshot earliest year falls in `window`.
pub fn general_reclassification(
    old: &ClassAssignments,
    new: &ClassAssignments,
    window: YearWindow,
) -> Result<ClassDrift> {
    if old.level != new.level {
        return Err(Error::InvalidArgument("class assignments use different levels".into()));
    }
    #[derive(Default)]
    struct Acc {
        size_new: u64,
        added: u64,
        removed: u64,
    }
    let mut acc: BTreeMap<CpcSymbol, Acc> = BTreeMap::new();
    for (id, (year, new_codes)) in &new.families {
        if !window.contains(*year) {
            continue;
        }
        for c in new_codes {
            acc.entry(*c).or_default().size_new += 1;
        }
        let Some((_, old_codes)) = old.families.get(id) else { continue };
        let old_set: BTreeSet<&CpcSymbol> = old_codes.iter().collect();
        let new_set: BTreeSet<&CpcSymbol> = new_codes.iter().collect();
        for c in new_set.difference(&old_set) {
            acc.entry(**c).or_default().added += 1;
        }
        for c in old_set.difference(&new_set) {
            acc.entry(**c).or_default().removed += 1;
        }
    }

    let points: Vec<ClassReclassPoint> = acc
        .into_iter()
        .map(|(k, a)| ClassReclassPoint {
            class_code: k.truncate(new.level),
            size_new: a.size_new,
            added: a.added,
            removed: a.removed,
        })
        .collect();
    let changes: u64 = points.iter().map(|p| p.added + p.removed).sum();
    let sizes: u64 = points.iter().map(|p| p.size_new).sum();
    let aggregate_rate = if sizes == 0 { 0.0 } else { changes as f64 / sizes as f64 };
    let rates: Vec<f64> = points
        .iter()
        .filter(|p| p.size_new > 0)
        .map(|p| (p.added + p.removed) as f64 / p.size_new as f64)
        .collect();
    let mean_class_rate = if rates.is_empty() {
        0.0
    } else {
        rates.iter().sum::<f64>() / rates.len() as f64
    };
    Ok(ClassDrift {
        level: new.level,
        points,
        aggregate_rate,
        mean_class_rate,
    })
}

/// Ordinary least squares on `(log10 size, log10 count)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n_points: usize,
    /// Points dropped for `size < min_size` or `count == 0`.
    pub excluded: usize,
}

pub const DEFAULT_MIN_CLASS_SIZE: u64 = 1000;

/// Fits `log10(count) = intercept + slope * log10(size)` over points with
/// `size >= min_size` and `count >= 1`.
pub fn loglog_fit(points: &[(u64, u64)], min_size: u64) -> Result<FitResult> {
    let usable: Vec<(f64, f64)> = points
        .iter()
        .filter(|&&(size, count)| size >= min_size && size > 0 && count >= 1)
        .map(|&(size, count)| ((size as f64).log10(), (count as f64).log10()))
        .collect();
    let excluded = points.len() - usable.len();
    if usable.len() < 2 {
        return Err(Error::InsufficientPoints {
            usable: usable.len(),
            required: 2,
        });
    }
    let n = usable.len() as f64;
    let mx = usable.iter().map(|p| p.0).sum::<f64>() / n;
    let my = usable.iter().map(|p| p.1).sum::<f64>() / n;
    let (sxx, sxy) = usable.iter().fold((0.0, 0.0), |(sxx, sxy), &(x, y)| {
        (sxx + (x - mx) * (x - mx), sxy + (x - mx) * (y - my))
    });
    if sxx <= f64::EPSILON * n {
        // All sizes equal: the slope is undefined.
        return Err(Error::InsufficientPoints { usable: 1, required: 2 });
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let (ss_res, ss_tot) = usable.iter().fold((0.0, 0.0), |(r, t), &(x, y)| {
        let e = y - (intercept + slope * x);
        (r + e * e, t + (y - my) * (y - my))
    });
    let r_squared = if ss_tot == 0.0 {
        1.0
    } else {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    };
    Ok(FitResult {
        slope,
        intercept,
        r_squared,
        n_points: usable.len(),
        excluded,
    })
}

/// Separate fits of added and removed counts against class size.
#[derive(Debug)]
pub struct DriftFits {
    pub added: Result<FitResult>,
    pub removed: Result<FitResult>,
}

pub fn fit_class_drift(points: &[ClassReclassPoint], min_size: u64) -> DriftFits {
    let added: Vec<(u64, u64)> = points.iter().map(|p| (p.size_new, p.added)).collect();
    let removed: Vec<(u64, u64)> = points.iter().map(|p| (p.size_new, p.removed)).collect();
    DriftFits {
        added: loglog_fit(&added, min_size),
        removed: loglog_fit(&removed, min_size),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TurbulenceMode {
    /// `added + removed`.
    Absolute,
    /// `(added + removed) / size_new`, classes below the size cutoff dropped.
    Relative,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TurbulentClass {
    pub class_code: String,
    pub size_new: u64,
    pub added: u64,
    pub removed: u64,
    pub score: f64,
}

/// Classes with the most reclassifications, descending, ties by class code.
pub fn top_turbulent_classes(
    points: &[ClassReclassPoint],
    top_k: usize,
    mode: TurbulenceMode,
    min_size: u64,
) -> Vec<TurbulentClass> {
    let mut ranked: Vec<TurbulentClass> = points
        .iter()
        .filter(|p| match mode {
            TurbulenceMode::Absolute => true,
            TurbulenceMode::Relative => p.size_new >= min_size && p.size_new > 0,
        })
        .map(|p| {
            let changes = (p.added + p.removed) as f64;
            TurbulentClass {
                class_code: p.class_code.clone(),
                size_new: p.size_new,
                added: p.added,
                removed: p.removed,
                score: match mode {
                    TurbulenceMode::Absolute => changes,
                    TurbulenceMode::Relative => changes / p.size_new as f64,
                },
            }
        })
        .collect();
    ranked.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .expect("scores are finite")
            .then_with(|| a.class_code.cmp(&b.class_code))
    });
    ranked.truncate(top_k);
    ranked
}
