mod oracle;

use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use proptest::prelude::*;

use patdrift_core::citation::forward_citations_5y;
use patdrift_core::cpc::{parse_symbol, scheme_diff, CpcSymbol, Level, SchemeEntry};
use patdrift_core::effects::{
    decompose, filtering_reduction, reclassification_share, set_expansion_share, Group,
};
use patdrift_core::family::{apply_filter, build_families, QualityFilter};
use patdrift_core::snapshot::{
    ingest_readers, write_store, ApplicationRecord, IngestReport, SnapshotStore, StagedSnapshot,
};
use patdrift_core::stats::{family_trend, loglog_fit};
use patdrift_core::YearWindow;

fn symbol() -> impl Strategy<Value = CpcSymbol> {
    (
        prop::sample::select(b"ABCDEFGHY".to_vec()),
        1u8..=99,
        prop::sample::select(b"ABCDEFGHJKLMNPQRSTUVWXYZ".to_vec()),
        1u16..=9999,
        0u32..=999_999,
    )
        .prop_map(|(s, c, sc, m, g)| CpcSymbol::new(s as char, c, sc as char, m, g).unwrap())
}

fn store(staged: StagedSnapshot) -> SnapshotStore {
    SnapshotStore::from_staged("p", staged).unwrap()
}

fn app(id: u64, fam: u64, office: &str, year: i32) -> ApplicationRecord {
    ApplicationRecord {
        appln_id: id,
        family_id: fam,
        authority: office.parse().unwrap(),
        filing_date: NaiveDate::from_ymd_opt(year, 6, 1).unwrap(),
    }
}

/// Random applications over a small id space so that duplicates and
/// shared families are common.
fn applications() -> impl Strategy<Value = Vec<ApplicationRecord>> {
    prop::collection::vec(
        (1u64..60, 1u64..20, prop::sample::select(vec!["EP", "US", "JP", "CN", "KR"]), 1995i32..2005),
        0..80,
    )
    .prop_map(|v| v.into_iter().map(|(a, f, o, y)| app(a, f, o, y)).collect())
}

fn staged() -> impl Strategy<Value = StagedSnapshot> {
    (
        applications(),
        prop::collection::vec((1u64..60, symbol()), 0..80),
        prop::collection::vec((1u64..60, 1u64..60), 0..120),
    )
        .prop_map(|(applications, classifications, citations)| StagedSnapshot {
            applications,
            classifications,
            citations,
        })
}

fn ingest_text(tsv: &oracle::Tsv) -> (SnapshotStore, IngestReport) {
    ingest_readers(
        "p",
        (tsv.applications.as_bytes(), "a"),
        (tsv.classifications.as_bytes(), "c"),
        (tsv.citations.as_bytes(), "t"),
    )
    .unwrap()
}

fn store_bytes(s: &SnapshotStore) -> Vec<u8> {
    let mut out = Vec::new();
    write_store(s, &mut out).unwrap();
    out
}

proptest! {
    #[test]
    fn symbols_render_and_parse_back(s in symbol()) {
        prop_assert_eq!(parse_symbol(&s.to_string()).unwrap(), s);
        let padded = format!("{}{:>4}/{:02}", s.truncate(Level::Subclass), s.main_group(), s.subgroup());
        prop_assert_eq!(parse_symbol(&padded).unwrap(), s);
        prop_assert_eq!(s.is_green(), s.to_string().starts_with("Y02"));
    }

    #[test]
    fn truncation_is_a_prefix_of_the_rendering(s in symbol()) {
        let full = s.to_string();
        for level in [Level::Section, Level::Class, Level::Subclass] {
            prop_assert!(full.starts_with(&s.truncate(level)));
        }
        prop_assert_eq!(s.truncate(Level::Group), format!("{}{}", s.truncate(Level::Subclass), s.main_group()));
    }

    #[test]
    fn scheme_diff_counts_match_naive_comparison(
        old in prop::collection::btree_map(symbol(), (0u32..4, 0u8..3), 0..40),
        new in prop::collection::btree_map(symbol(), (0u32..4, 0u8..3), 0..40),
    ) {
        let entries = |m: &BTreeMap<CpcSymbol, (u32, u8)>| -> Vec<SchemeEntry> {
            m.iter()
                .map(|(s, (indent, t))| SchemeEntry { symbol: *s, title: format!("t{t}"), indent_level: *indent })
                .collect()
        };
        let deltas = scheme_diff(&entries(&old), &entries(&new)).unwrap();
        let mut naive = 0usize;
        for (s, o) in &old {
            match new.get(s) {
                None => naive += 1,
                Some(n) => naive += usize::from(o.0 != n.0) + usize::from(o.1 != n.1),
            }
        }
        naive += new.keys().filter(|s| !old.contains_key(s)).count();
        prop_assert_eq!(deltas.iter().map(|d| d.change_count()).sum::<usize>(), naive);
        let subclasses: Vec<&String> = deltas.iter().map(|d| &d.subclass).collect();
        prop_assert!(subclasses.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn ingest_ignores_row_order(s in staged(), seed in any::<u64>()) {
        let tsv = oracle::render(&s);
        let shuffle = |text: &str| -> String {
            let mut lines: Vec<&str> = text.lines().collect();
            let header = lines.remove(0);
            // Deterministic Fisher-Yates driven by the seed.
            let mut state = seed | 1;
            for i in (1..lines.len()).rev() {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                lines.swap(i, (state % (i as u64 + 1)) as usize);
            }
            let mut out = String::from(header);
            for l in lines {
                out.push('\n');
                out.push_str(l);
            }
            out.push('\n');
            out
        };
        let shuffled = oracle::Tsv {
            applications: shuffle(&tsv.applications),
            classifications: shuffle(&tsv.classifications),
            citations: shuffle(&tsv.citations),
        };
        let (a, ra) = ingest_text(&tsv);
        let (b, rb) = ingest_text(&shuffled);
        prop_assert_eq!(store_bytes(&a), store_bytes(&b));
        prop_assert_eq!(ra.dangling_appln_ids, rb.dangling_appln_ids);
        prop_assert_eq!(ra.applications, rb.applications);
        prop_assert_eq!(ra.citations, rb.citations);
    }

    #[test]
    fn forward_citations_match_oracle_and_ignore_duplicates(s in staged()) {
        let raw = oracle::RawSnapshot::from_staged(&s);
        let expected = oracle::families(&raw);
        let mut doubled = s.clone();
        doubled.citations.extend(s.citations.clone());
        for st in [s, doubled] {
            let store = store(st);
            let fams = build_families(&store);
            let counts = forward_citations_5y(&store, &fams);
            for (f, c) in fams.iter().zip(counts) {
                prop_assert_eq!(c, expected[&f.family_id].fwd, "family {}", f.family_id);
            }
        }
    }

    #[test]
    fn adding_a_citation_never_lowers_counts(s in staged(), extra in (1u64..60, 1u64..60)) {
        let before = {
            let store = store(s.clone());
            let fams = build_families(&store);
            let c = forward_citations_5y(&store, &fams);
            fams.iter().map(|f| f.family_id).zip(c).collect::<BTreeMap<_, _>>()
        };
        let mut more = s;
        more.citations.push(extra);
        let store = store(more);
        let fams = build_families(&store);
        for (f, c) in fams.iter().zip(forward_citations_5y(&store, &fams)) {
            prop_assert!(c >= before[&f.family_id]);
        }
    }

    #[test]
    fn filters_are_nested(s in staged()) {
        let store = store(s);
        let mut fams = build_families(&store);
        let counts = forward_citations_5y(&store, &fams);
        fams.set_forward_citations(&counts).unwrap();
        let ids = |f: QualityFilter| -> BTreeSet<u64> {
            apply_filter(fams.iter(), f).unwrap().into_iter().map(|r| r.family_id).collect()
        };
        let all = ids(QualityFilter::None);
        for f in QualityFilter::ALL {
            prop_assert!(ids(f).is_subset(&all));
        }
        let both: BTreeSet<u64> = ids(QualityFilter::Epo).intersection(&ids(QualityFilter::Uspto)).copied().collect();
        prop_assert!(ids(QualityFilter::Triadic).is_subset(&both));
    }

    #[test]
    fn trend_sums_to_in_window_count(s in staged(), from in 1995i32..2000, len in 0i32..6) {
        let window = YearWindow::new(from, from + len).unwrap();
        let fams = build_families(&store(s));
        let t = family_trend("t", fams.iter(), window);
        let expected = fams.iter().filter(|f| window.contains(f.earliest_year)).count() as u64;
        prop_assert_eq!(t.total(), expected);
        prop_assert_eq!(t.points.len() as i32, len + 1);
    }

    #[test]
    fn proportional_counts_give_unit_slope(
        sizes in prop::collection::btree_set(1_000u64..10_000_000, 2..30),
        ratio_exp in -3i32..0,
    ) {
        let ratio = 10f64.powi(ratio_exp);
        let points: Vec<(u64, u64)> = sizes.iter().map(|&s| (s * 1000, (s as f64 * 1000.0 * ratio).round() as u64)).collect();
        let fit = loglog_fit(&points, 1000).unwrap();
        prop_assert!((fit.slope - 1.0).abs() < 1e-6, "slope {}", fit.slope);
        prop_assert!((fit.intercept - ratio_exp as f64).abs() < 1e-6);
    }

    #[test]
    fn shares_lie_in_unit_interval(c in 0u64..1000, d in 0u64..1000, rest in 0u64..1000) {
        let total = c + d + rest;
        if let Ok(r) = reclassification_share(c, d, total) {
            prop_assert!((0.0..=1.0).contains(&r));
        }
        if let Ok(e) = set_expansion_share(c, d, total) {
            prop_assert!((0.0..=1.0).contains(&e));
        }
        if total > 0 {
            let red = filtering_reduction(total, c).unwrap();
            prop_assert!((0.0..=1.0).contains(&red));
        }
    }

    #[test]
    fn swapping_snapshots_swaps_a_and_c(
        fams in prop::collection::btree_map(1u64..200, (1975i32..2020, any::<bool>(), any::<bool>(), 0u8..3), 0..60),
    ) {
        // presence: 0 both, 1 old only, 2 new only; years agree across releases.
        let green = CpcSymbol::new('Y', 2, 'E', 10, 0).unwrap();
        let plain = CpcSymbol::new('H', 1, 'M', 10, 0).unwrap();
        let mut old = StagedSnapshot::default();
        let mut new = StagedSnapshot::default();
        for (&id, &(year, g_old, g_new, presence)) in &fams {
            if presence != 2 {
                old.applications.push(app(id, id, "US", year));
                old.classifications.push((id, if g_old { green } else { plain }));
            }
            if presence != 1 {
                new.applications.push(app(id, id, "US", year));
                new.classifications.push((id, if g_new { green } else { plain }));
            }
        }
        let old = build_families(&store(old));
        let new = build_families(&store(new));
        let w = YearWindow::DEFAULT;
        let fwd = decompose(&old, &new, w).unwrap();
        let back = decompose(&new, &old, w).unwrap();
        prop_assert_eq!(fwd.group(Group::A), back.group(Group::C));
        prop_assert_eq!(fwd.group(Group::C), back.group(Group::A));
        prop_assert_eq!(fwd.group(Group::B), back.group(Group::B));
        let old_only_green: BTreeSet<u64> = fams
            .iter()
            .filter(|(_, &(y, g, _, p))| p == 1 && g && w.contains(y))
            .map(|(&id, _)| id)
            .collect();
        prop_assert_eq!(back.group(Group::D), &old_only_green);
    }
}
