use eusa::eval::{emit_report, MetricsReport, REPORT_FILES};
use eusa::geometry::BBox;
use eusa::tracker::{FrameRecord, FrameStatus, ReinitPolicy, TrackResult};

fn run(id: usize, policy: ReinitPolicy, ious: &[f64]) -> TrackResult {
    let gt = BBox::new(40.0, 40.0, 16.0, 16.0);
    let mut frames = vec![FrameRecord {
        status: FrameStatus::Init,
        gt,
        prediction: Some(gt),
        iou: None,
        center_error: None,
        since_reinit: None,
    }];
    for (i, &o) in ious.iter().enumerate() {
        let failed = policy == ReinitPolicy::Vot && o == 0.0;
        frames.push(FrameRecord {
            status: if failed { FrameStatus::Failure } else { FrameStatus::Tracked },
            gt,
            prediction: Some(gt),
            iou: Some(o),
            center_error: Some(i as f64 * 3.0),
            since_reinit: None,
        });
    }
    TrackResult {
        video_id: id,
        policy,
        failures: frames.iter().filter(|f| f.status == FrameStatus::Failure).count(),
        frames,
    }
}

fn report(scale: f64) -> MetricsReport {
    let ious = |id: usize| (0..12).map(|i| ((i + id) % 5) as f64 * 0.2 * scale).collect::<Vec<_>>();
    let otb: Vec<_> = (0..3).map(|id| run(id, ReinitPolicy::Otb, &ious(id))).collect();
    let vot: Vec<_> = (0..3).map(|id| run(id, ReinitPolicy::Vot, &ious(id))).collect();
    MetricsReport::from_runs(&otb, &vot).unwrap()
}

fn read_all(dir: &std::path::Path) -> Vec<Vec<u8>> {
    REPORT_FILES.iter().map(|f| std::fs::read(dir.join(f)).unwrap()).collect()
}

#[test]
fn report_files_are_deterministic_and_pure() {
    let (clean, attacked) = (report(1.0), report(0.5));
    let (clean_copy, attacked_copy) = (clean.clone(), attacked.clone());
    let config = serde_json::json!({"epsilon": 16.0});
    let (d1, d2) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    emit_report(&clean, Some(&attacked), &config, 7, d1.path()).unwrap();
    emit_report(&clean, Some(&attacked), &config, 7, d2.path()).unwrap();
    assert_eq!(read_all(d1.path()), read_all(d2.path()));
    assert_eq!(clean, clean_copy);
    assert_eq!(attacked, attacked_copy);
}

#[test]
fn json_has_documented_keys() {
    let dir = tempfile::tempdir().unwrap();
    emit_report(&report(1.0), Some(&report(0.5)), &serde_json::json!({"k": 8}), 3, dir.path()).unwrap();
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(v["seed"], 3);
    assert_eq!(v["config"]["k"], 8);
    assert_eq!(v["per_video"].as_array().unwrap().len(), 3);
    for side in ["clean", "attacked"] {
        for key in ["precision", "success_auc", "accuracy", "robustness", "eao"] {
            let x = v["aggregate"][side][key].as_f64().unwrap_or_else(|| panic!("{side}.{key}"));
            assert!(x >= 0.0);
            if key != "robustness" && key != "eao" {
                assert!(x <= 100.0);
            }
        }
        assert!(v["per_video"][0][side]["precision"].is_number());
    }
    assert!(v["aggregate"]["comparison"]["success_auc_drop"].is_number());
}

#[test]
fn csv_has_one_row_per_video_plus_aggregate() {
    let dir = tempfile::tempdir().unwrap();
    emit_report(&report(1.0), None, &serde_json::Value::Null, 0, dir.path()).unwrap();
    let csv = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 1 + 3 + 1);
    assert!(lines[4].starts_with("aggregate,"));
    let cols = lines[0].split(',').count();
    assert!(lines.iter().all(|l| l.split(',').count() == cols));
}

#[test]
fn svg_plots_are_well_formed() {
    let dir = tempfile::tempdir().unwrap();
    emit_report(&report(1.0), Some(&report(0.3)), &serde_json::Value::Null, 0, dir.path()).unwrap();
    for name in ["precision.svg", "success.svg"] {
        let text = std::fs::read_to_string(dir.path().join(name)).unwrap();
        let doc = roxmltree::Document::parse(&text).unwrap();
        assert_eq!(doc.root_element().tag_name().name(), "svg");
        let lines = doc.descendants().filter(|n| n.has_tag_name("polyline")).count();
        assert_eq!(lines, 2, "{name}");
    }
}

#[test]
fn vot_only_report_skips_plots() {
    let ious: Vec<f64> = (0..10).map(|i| i as f64 / 10.0).collect();
    let vot = vec![run(4, ReinitPolicy::Vot, &ious)];
    let r = MetricsReport::from_runs(&[], &vot).unwrap();
    assert!(r.aggregate.otb.is_none());
    let dir = tempfile::tempdir().unwrap();
    emit_report(&r, None, &serde_json::Value::Null, 0, dir.path()).unwrap();
    assert!(dir.path().join("report.json").exists());
    assert!(!dir.path().join("precision.svg").exists());
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("report.json")).unwrap()).unwrap();
    assert!(v["aggregate"]["clean"]["eao"].is_number());
    assert!(v["aggregate"]["clean"].get("precision").is_none());
}

#[test]
fn unwritable_path_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("occupied");
    std::fs::write(&file, b"x").unwrap();
    assert!(emit_report(&report(1.0), None, &serde_json::Value::Null, 0, &file.join("sub")).is_err());
}

#[test]
fn mismatched_video_sets_are_rejected() {
    let clean = report(1.0);
    let mut attacked = report(0.5);
    attacked.per_video.pop();
    let dir = tempfile::tempdir().unwrap();
    assert!(emit_report(&clean, Some(&attacked), &serde_json::Value::Null, 0, dir.path()).is_err());
}
