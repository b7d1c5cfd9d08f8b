mod oracle;

use std::collections::BTreeSet;

use patdrift_core::citation::build_cited_families;
use patdrift_core::effects::{combination_table, decompose, Group};
use patdrift_core::family::{Families, QualityFilter};
use patdrift_core::snapshot::{ingest_readers, IngestReport, SnapshotStore, StagedSnapshot};
use patdrift_core::synth::{generate, GeneratorConfig, PlantedGroup, Release, SyntheticPair};
use patdrift_core::YearWindow;

use oracle::RawSnapshot;

fn ingest(staged: &StagedSnapshot, label: &str) -> (SnapshotStore, IngestReport) {
    let tsv = oracle::render(staged);
    ingest_readers(
        label,
        (tsv.applications.as_bytes(), "applications"),
        (tsv.classifications.as_bytes(), "classifications"),
        (tsv.citations.as_bytes(), "citations"),
    )
    .unwrap()
}

struct Run {
    old_families: Families,
    new_families: Families,
    old_report: IngestReport,
    new_report: IngestReport,
}

fn run(pair: &SyntheticPair) -> Run {
    let (old, old_report) = ingest(&pair.old, "old");
    let (new, new_report) = ingest(&pair.new, "new");
    Run {
        old_families: build_cited_families(&old).unwrap(),
        new_families: build_cited_families(&new).unwrap(),
        old_report,
        new_report,
    }
}

fn planted(g: PlantedGroup) -> Option<Group> {
    match g {
        PlantedGroup::A => Some(Group::A),
        PlantedGroup::B => Some(Group::B),
        PlantedGroup::C => Some(Group::C),
        PlantedGroup::D => Some(Group::D),
        _ => None,
    }
}

fn config(seed: u64, n: usize) -> GeneratorConfig {
    GeneratorConfig {
        seed,
        n_families: n,
        out_of_window_rate: 0.05,
        family_id_churn_rate: 0.01,
        ..GeneratorConfig::default()
    }
}

#[test]
fn manifest_groups_equal_measured_partition() {
    for seed in 0..4 {
        let pair = generate(&config(seed, 3_000)).unwrap();
        let r = run(&pair);
        let window = pair.truth.window;
        let partition = decompose(&r.old_families, &r.new_families, window).unwrap();
        for g in [PlantedGroup::A, PlantedGroup::B, PlantedGroup::C, PlantedGroup::D] {
            let group = planted(g).unwrap();
            assert_eq!(partition.group(group), &pair.truth.ids(g), "seed {seed} group {g:?}");
        }
    }
}

#[test]
fn ingest_reports_match_emitted_rows() {
    let pair = generate(&config(11, 2_000)).unwrap();
    let r = run(&pair);
    for (report, rows) in [(&r.old_report, pair.truth.old_rows), (&r.new_report, pair.truth.new_rows)] {
        assert_eq!(report.applications.rows, rows.applications);
        assert_eq!(report.classifications.rows, rows.classifications);
        assert_eq!(report.citations.rows, rows.citations);
        for t in [&report.applications, &report.classifications, &report.citations] {
            assert_eq!(t.malformed, 0);
            assert_eq!(t.dangling, 0);
        }
    }
}

#[test]
fn planted_family_attributes_are_measured() {
    let pair = generate(&config(5, 3_000)).unwrap();
    let r = run(&pair);
    for (families, release) in [(&r.old_families, Release::Old), (&r.new_families, Release::New)] {
        let present: Vec<_> = pair.truth.families.iter().filter(|f| f.present(release)).collect();
        assert_eq!(present.len(), families.len());
        for p in present {
            let f = families.get(p.family_id).expect("planted family present");
            assert_eq!(f.earliest_year, p.earliest_year, "family {}", p.family_id);
            assert_eq!(f.is_green, p.is_green(release));
            assert_eq!(f.offices, p.offices(release));
            assert_eq!(f.fwd_cit_5y, Some(p.fwd_cit_5y(release)), "family {} {release:?}", p.family_id);
            for filter in QualityFilter::ALL {
                assert_eq!(filter.matches(f).unwrap(), p.passes(filter, release));
            }
        }
    }
}

#[test]
fn pipeline_agrees_with_brute_force() {
    let pair = generate(&config(21, 2_500)).unwrap();
    let r = run(&pair);
    let old = oracle::families(&RawSnapshot::from_staged(&pair.old));
    let new = oracle::families(&RawSnapshot::from_staged(&pair.new));
    let w = pair.truth.window;
    let expected = oracle::groups(&old, &new, w.from, w.to);
    let partition = decompose(&r.old_families, &r.new_families, w).unwrap();
    for (i, g) in Group::ALL.into_iter().enumerate() {
        assert_eq!(partition.group(g), &expected[i]);
    }
    let table = combination_table(&r.old_families, &r.new_families, &partition, &QualityFilter::ALL).unwrap();
    for row in table {
        let want = oracle::table_row(&old, &new, w.from, w.to, row.filter.name());
        assert_eq!((row.count_old, row.count_new, row.count_reclass, row.count_expansion), want, "{}", row.filter);
    }
    for f in r.new_families.iter() {
        assert_eq!(f.fwd_cit_5y, Some(new[&f.family_id].fwd));
    }
}

#[test]
fn out_of_window_families_never_enter_groups() {
    let pair = generate(&GeneratorConfig { out_of_window_rate: 0.3, ..config(2, 2_000) }).unwrap();
    let r = run(&pair);
    let partition = decompose(&r.old_families, &r.new_families, YearWindow::DEFAULT).unwrap();
    let outside: BTreeSet<u64> = pair.truth.ids(PlantedGroup::O);
    assert!(!outside.is_empty());
    for g in Group::ALL {
        assert!(partition.group(g).is_disjoint(&outside));
    }
}
