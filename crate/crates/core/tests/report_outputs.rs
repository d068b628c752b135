use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use memcontend::analysis::{classify_region, InterferenceCurve, MetricKind, RegionClass};
use memcontend::report::{
    self, csv, curves_from_rows, run_experiment, svg, Backend, ExperimentSpec, JsonReport,
    ResultRow, WorkloadKey,
};
use memcontend::workload::TrafficPattern;
use proptest::prelude::*;

fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

fn small_spec() -> ExperimentSpec {
    ExperimentSpec::from_file(&golden_dir().join("small.toml")).unwrap()
}

fn run_into(spec: &ExperimentSpec, dir: &Path) -> Vec<PathBuf> {
    let results = run_experiment(spec).unwrap();
    report::write_outputs(spec, &results, dir).unwrap()
}

#[test]
fn csv_matches_golden_file() {
    let dir = tempfile::tempdir().unwrap();
    run_into(&small_spec(), dir.path());
    let got = std::fs::read_to_string(dir.path().join(report::CSV_FILE)).unwrap();
    let golden = golden_dir().join("small.csv");
    if std::env::var_os("BLESS_GOLDEN").is_some() {
        std::fs::write(&golden, &got).unwrap();
    }
    let want = std::fs::read_to_string(&golden).unwrap();
    assert_eq!(got, want, "CSV drifted from {}", golden.display());
}

#[test]
fn four_tasks_one_interference_six_points_gives_24_rows() {
    let dir = tempfile::tempdir().unwrap();
    run_into(&small_spec(), dir.path());
    let text = std::fs::read_to_string(dir.path().join(report::CSV_FILE)).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), csv::HEADER.join(","));
    assert_eq!(lines.count(), 24);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let spec = small_spec();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let files_a = run_into(&spec, a.path());
    run_into(&spec, b.path());
    for f in files_a {
        let name = f.file_name().unwrap();
        assert_eq!(
            std::fs::read(&f).unwrap(),
            std::fs::read(b.path().join(name)).unwrap(),
            "{name:?} differs"
        );
    }
}

#[test]
fn baseline_rows_follow_the_definitions() {
    let results = run_experiment(&small_spec()).unwrap();
    for r in results.rows.iter().filter(|r| r.thr_pct == 0) {
        assert_eq!(r.slowdown, 1.0);
        let refill_0 = r.llc_refills.unwrap() as f64;
        let want = refill_0 * refill_0 / (refill_0 * r.mem_accesses as f64);
        assert!((r.rf.unwrap() - want).abs() <= 1e-12 * want, "{r:?}");
    }
}

#[test]
fn csv_round_trip_rebuilds_the_curves() {
    let results = run_experiment(&small_spec()).unwrap();
    let mut buf = Vec::new();
    csv::write_rows(&mut buf, &results.rows).unwrap();
    let parsed = csv::read_rows(buf.as_slice()).unwrap();
    assert_eq!(parsed, results.rows);
    assert_eq!(curves_from_rows(&parsed, results.baseline).unwrap(), results.curves);
}

/// Groups CSV rows into slowdown curves without going through the library's
/// grouping code.
fn slowdown_curves_from_csv(path: &Path) -> BTreeMap<(String, u64, String, u64), Vec<(u32, f64)>> {
    let mut reader = ::csv::Reader::from_path(path).unwrap();
    let mut out: BTreeMap<_, Vec<(u32, f64)>> = BTreeMap::new();
    for rec in reader.records() {
        let rec = rec.unwrap();
        let key = (
            rec[1].to_owned(),
            rec[2].parse().unwrap(),
            rec[3].to_owned(),
            rec[4].parse().unwrap(),
        );
        out.entry(key)
            .or_default()
            .push((rec[5].parse().unwrap(), rec[9].parse().unwrap()));
    }
    out
}

#[test]
fn json_regions_match_recomputation_from_csv() {
    for name in ["small.toml"] {
        let spec = ExperimentSpec::from_file(&golden_dir().join(name)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        run_into(&spec, dir.path());
        let json = JsonReport::read(&dir.path().join(report::JSON_FILE)).unwrap();
        let curves = slowdown_curves_from_csv(&dir.path().join(report::CSV_FILE));
        let mut checked = 0;
        for group in &json.groups {
            let i = group.interference;
            let base_key = (json.baseline.pattern.to_string(), json.baseline.fp_bytes, i.pattern.to_string(), i.fp_bytes);
            let base = InterferenceCurve::from_pairs(MetricKind::Slowdown, &curves[&base_key]).unwrap();
            for c in &group.curves {
                let key = (c.task.pattern.to_string(), c.task.fp_bytes, i.pattern.to_string(), i.fp_bytes);
                let test = InterferenceCurve::from_pairs(MetricKind::Slowdown, &curves[&key]).unwrap();
                assert_eq!(classify_region(&test, &base).unwrap(), c.region, "{key:?}");
                checked += 1;
            }
        }
        assert_eq!(checked, curves.len());
    }
}

#[test]
fn every_chart_is_well_formed_xml() {
    let dir = tempfile::tempdir().unwrap();
    let files = run_into(&small_spec(), dir.path());
    let charts: Vec<_> = files.iter().filter(|f| f.extension().unwrap() == "svg").collect();
    assert_eq!(charts.len(), 2);
    for f in charts {
        let text = std::fs::read_to_string(f).unwrap();
        let doc = roxmltree::Document::parse(&text).unwrap_or_else(|e| panic!("{}: {e}", f.display()));
        assert_eq!(doc.root_element().tag_name().name(), "svg");
        let baselines = doc
            .descendants()
            .filter(|n| n.attribute("class") == Some("baseline"))
            .count();
        assert_eq!(baselines, 1);
    }
}

#[test]
fn plot_redraws_identical_charts_from_csv() {
    let spec = small_spec();
    let (run_dir, plot_dir) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let files = run_into(&spec, run_dir.path());
    let redrawn = report::plot_csv(&run_dir.path().join(report::CSV_FILE), plot_dir.path(), None).unwrap();
    let svgs: Vec<_> = files.iter().filter(|f| f.extension().unwrap() == "svg").collect();
    assert_eq!(redrawn.len(), svgs.len());
    for f in svgs {
        let name = f.file_name().unwrap();
        assert_eq!(
            std::fs::read(f).unwrap(),
            std::fs::read(plot_dir.path().join(name)).unwrap()
        );
    }
}

fn slow(pairs: &[(u32, f64)]) -> InterferenceCurve {
    InterferenceCurve::from_pairs(MetricKind::Slowdown, pairs).unwrap()
}

fn polyline_points(node: roxmltree::Node<'_, '_>) -> Vec<(f64, f64)> {
    node.attribute("points")
        .unwrap()
        .split_whitespace()
        .map(|p| {
            let (x, y) = p.split_once(',').unwrap();
            (x.parse().unwrap(), y.parse().unwrap())
        })
        .collect()
}

#[test]
fn flat_curve_renders_as_a_horizontal_polyline() {
    let c = slow(&[(0, 1.0), (20, 1.0), (50, 1.0), (100, 1.0)]);
    let text = svg::render(
        "flat",
        "slowdown",
        &[svg::ChartSeries {
            label: "READ_MISS 2MB".into(),
            curve: &c,
            region: None,
            is_baseline: false,
        }],
    )
    .unwrap();
    let doc = roxmltree::Document::parse(&text).unwrap();
    let lines: Vec<_> = doc.descendants().filter(|n| n.has_tag_name("polyline")).collect();
    assert_eq!(lines.len(), 1);
    let pts = polyline_points(lines[0]);
    assert_eq!(pts.len(), 4);
    assert!(pts.iter().all(|p| p.1 == pts[0].1));
    assert!(pts.windows(2).all(|w| w[0].0 < w[1].0));
}

#[test]
fn two_above_tasks_get_two_red_bands_above_the_baseline() {
    let base = slow(&[(0, 1.0), (50, 2.0), (100, 3.0)]);
    let a = slow(&[(0, 1.0), (50, 3.0), (100, 5.0)]);
    let b = slow(&[(0, 1.0), (50, 2.5), (100, 4.0)]);
    let series = vec![
        svg::ChartSeries { label: "READ_MISS".into(), curve: &base, region: None, is_baseline: true },
        svg::ChartSeries { label: "MEMSET".into(), curve: &a, region: Some(RegionClass::Above), is_baseline: false },
        svg::ChartSeries { label: "MEMCPY".into(), curve: &b, region: Some(RegionClass::Above), is_baseline: false },
    ];
    let text = svg::render("bands", "slowdown", &series).unwrap();
    let doc = roxmltree::Document::parse(&text).unwrap();
    let bands: Vec<_> = doc.descendants().filter(|n| n.has_tag_name("polygon")).collect();
    assert_eq!(bands.len(), 2);
    let base_line = doc
        .descendants()
        .find(|n| n.attribute("class") == Some("baseline"))
        .unwrap();
    let base_pts = polyline_points(base_line);
    for band in bands {
        assert_eq!(band.attribute("fill"), Some(svg::region_color(RegionClass::Above)));
        let pts = polyline_points(band);
        // upper edge first, baseline reversed after it; SVG y grows downward
        let (upper, lower) = pts.split_at(pts.len() / 2);
        for (u, l) in upper.iter().zip(lower.iter().rev()) {
            assert!(u.1 <= l.1);
        }
        assert_eq!(lower.iter().rev().copied().collect::<Vec<_>>(), base_pts);
    }
}

#[test]
fn region_colors_follow_the_legend() {
    assert_eq!(svg::region_color(RegionClass::Above), "#e41a1c");
    assert_eq!(svg::region_color(RegionClass::Crossing), "#ffd700");
    assert_eq!(svg::region_color(RegionClass::Below), "#4daf4a");
}

#[test]
fn unwritable_output_dir_is_an_error() {
    let spec = small_spec();
    let results = run_experiment(&spec).unwrap();
    let file = tempfile::NamedTempFile::new().unwrap();
    let err = report::write_outputs(&spec, &results, &file.path().join("sub")).unwrap_err();
    assert!(matches!(err, memcontend::Error::Io { .. }), "{err}");
}

fn key(pattern: TrafficPattern, kb: u64) -> WorkloadKey {
    WorkloadKey { pattern, fp_bytes: kb << 10 }
}

prop_compose! {
    fn rows()(
        slowdowns in prop::collection::vec(prop::collection::vec(0.01f64..1e6, 3), 1..4),
        rfs in prop::collection::vec(prop::option::of(0.0f64..1e3), 12),
        elapsed in 1e-9f64..1e12,
    ) -> Vec<ResultRow> {
        let mut out = Vec::new();
        let mut rf = rfs.into_iter().cycle();
        for (t, s) in slowdowns.iter().enumerate() {
            for (k, thr) in [0u32, 50, 100].into_iter().enumerate() {
                let rf = rf.next().unwrap();
                out.push(ResultRow {
                    backend: Backend::Hw,
                    task: key(TrafficPattern::ALL[t % 3], 64 * (t as u64 + 1)),
                    interference: key(TrafficPattern::Memset, 512),
                    thr_pct: thr,
                    elapsed: elapsed * s[k],
                    mem_accesses: 1000 + k as u64,
                    llc_refills: rf.map(|_| 10 * k as u64),
                    slowdown: if thr == 0 { 1.0 } else { s[k] },
                    rf,
                });
            }
        }
        out
    }
}

proptest! {
    #[test]
    fn arbitrary_rows_survive_csv(rows in rows()) {
        let mut buf = Vec::new();
        csv::write_rows(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        for line in text.lines().skip(1) {
            let fields: Vec<&str> = line.split(',').collect();
            prop_assert_eq!(fields.len(), 11);
            for i in [6, 9, 10] {
                prop_assert!(fields[i].is_empty() || fields[i].contains('.'), "{}", line);
            }
        }
        prop_assert_eq!(csv::read_rows(buf.as_slice()).unwrap(), rows);
    }
}

#[test]
fn golden_baseline_row_matches_hand_computation() {
    // 64KB streamed twice through a 32KB cache: 2048 misses at hit 10 + read 40.
    let results = run_experiment(&small_spec()).unwrap();
    let r = &results.rows[0];
    assert_eq!((r.task.pattern, r.task.fp_bytes, r.thr_pct), (TrafficPattern::ReadMiss, 65536, 0));
    assert_eq!(r.elapsed, 2048.0 * (10.0 + 40.0));
    assert_eq!((r.mem_accesses, r.llc_refills), (2048, Some(2048)));
}
