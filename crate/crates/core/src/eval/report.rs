use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::VideoSequence;
use crate::error::{Error, Result};
use crate::perturbation::Perturbation;
use crate::scalar::Real;
use crate::tracker::{track_sequence, ReinitPolicy, TrackResult, TrackerModel};

use super::metrics::{precision_curve, success_curve, vot_metrics, Curve, PRECISION_AT};
use super::svg::line_plot;

/// Files written by [`emit_report`] when OTB runs are present.
pub const REPORT_FILES: [&str; 4] = ["report.json", "report.csv", "precision.svg", "success.svg"];

/// Precision at 20 px and success AUC, both in %.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OtbSummary {
    pub precision: f64,
    pub success_auc: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VotSummary {
    /// Mean IoU over valid frames, %.
    pub accuracy: f64,
    /// Failures per 25 frames.
    pub robustness: f64,
    pub eao: f64,
    pub failures: usize,
}

/// Headline numbers of one run set, for whichever policies were run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    #[serde(flatten)]
    pub otb: Option<OtbSummary>,
    #[serde(flatten)]
    pub vot: Option<VotSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VideoMetrics {
    pub video_id: usize,
    pub frames: usize,
    #[serde(flatten)]
    pub summary: Summary,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub per_video: Vec<VideoMetrics>,
    pub aggregate: Summary,
    /// Pooled over the OTB runs.
    pub precision_curve: Option<Curve>,
    pub success_curve: Option<Curve>,
}

fn otb_summary(runs: &[&TrackResult]) -> Result<(OtbSummary, Curve, Curve)> {
    let precision = precision_curve(runs)?;
    let success = success_curve(runs)?;
    let summary =
        OtbSummary { precision: 100.0 * precision.at(PRECISION_AT as f64), success_auc: 100.0 * success.mean() };
    Ok((summary, precision, success))
}

fn vot_summary(runs: &[&TrackResult]) -> Result<VotSummary> {
    let v = vot_metrics(runs)?;
    Ok(VotSummary { accuracy: 100.0 * v.accuracy, robustness: v.robustness, eao: v.eao, failures: v.failures })
}

impl MetricsReport {
    /// Per-video and pooled metrics. Either run list may be empty (policy not
    /// run); when both are given they must cover the same videos in order.
    pub fn from_runs(otb: &[TrackResult], vot: &[TrackResult]) -> Result<Self> {
        let n = otb.len().max(vot.len());
        if n == 0 || (!otb.is_empty() && !vot.is_empty() && otb.len() != vot.len()) {
            return Err(Error::InvalidArgument(format!(
                "need non-empty, equally long run lists, got {} otb and {} vot",
                otb.len(),
                vot.len()
            )));
        }
        let per_video = (0..n)
            .map(|i| {
                let (o, v) = (otb.get(i), vot.get(i));
                let first = o.or(v).expect("one list is non-empty");
                if let (Some(o), Some(v)) = (o, v) {
                    if o.video_id != v.video_id {
                        return Err(Error::InvalidArgument(format!(
                            "otb run for video {} paired with vot run for video {}",
                            o.video_id, v.video_id
                        )));
                    }
                }
                let summary = Summary {
                    otb: o.map(|o| otb_summary(&[o]).map(|s| s.0)).transpose()?,
                    vot: v.map(|v| vot_summary(&[v])).transpose()?,
                };
                Ok(VideoMetrics { video_id: first.video_id, frames: first.frames.len(), summary })
            })
            .collect::<Result<Vec<_>>>()?;
        let otb_refs: Vec<&TrackResult> = otb.iter().collect();
        let vot_refs: Vec<&TrackResult> = vot.iter().collect();
        let pooled = (!otb.is_empty()).then(|| otb_summary(&otb_refs)).transpose()?;
        let aggregate = Summary {
            otb: pooled.as_ref().map(|p| p.0),
            vot: (!vot.is_empty()).then(|| vot_summary(&vot_refs)).transpose()?,
        };
        let (precision_curve, success_curve) = pooled.map(|(_, p, s)| (Some(p), Some(s))).unwrap_or((None, None));
        Ok(MetricsReport { per_video, aggregate, precision_curve, success_curve })
    }
}

/// Tracks every video under each requested policy, optionally perturbed.
pub fn evaluate<T: Real>(
    model: &TrackerModel<T>,
    videos: &[&VideoSequence],
    perturbation: Option<&Perturbation<T>>,
    policies: &[ReinitPolicy],
) -> Result<MetricsReport> {
    let run_all = |policy: ReinitPolicy| -> Result<Vec<TrackResult>> {
        if !policies.contains(&policy) {
            return Ok(Vec::new());
        }
        videos.par_iter().map(|v| track_sequence(model, v, perturbation, policy)).collect()
    };
    MetricsReport::from_runs(&run_all(ReinitPolicy::Otb)?, &run_all(ReinitPolicy::Vot)?)
}

pub const BOTH_POLICIES: [ReinitPolicy; 2] = [ReinitPolicy::Otb, ReinitPolicy::Vot];

/// `(clean - attacked) / clean`, or `None` when the clean value is zero.
pub fn relative_drop(clean: f64, attacked: f64) -> Option<f64> {
    (clean != 0.0).then(|| (clean - attacked) / clean)
}

/// Relative change of each headline metric under attack.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub precision_drop: Option<f64>,
    pub success_auc_drop: Option<f64>,
    pub eao_drop: Option<f64>,
    /// Attacked over clean robustness.
    pub robustness_ratio: Option<f64>,
}

impl Comparison {
    pub fn new(clean: &Summary, attacked: &Summary) -> Self {
        let otb = clean.otb.zip(attacked.otb);
        let vot = clean.vot.zip(attacked.vot);
        Comparison {
            precision_drop: otb.and_then(|(c, a)| relative_drop(c.precision, a.precision)),
            success_auc_drop: otb.and_then(|(c, a)| relative_drop(c.success_auc, a.success_auc)),
            eao_drop: vot.and_then(|(c, a)| relative_drop(c.eao, a.eao)),
            robustness_ratio: vot.and_then(|(c, a)| (c.robustness != 0.0).then(|| a.robustness / c.robustness)),
        }
    }
}

#[derive(Serialize)]
struct VideoRow<'a> {
    video_id: usize,
    frames: usize,
    clean: &'a Summary,
    attacked: Option<&'a Summary>,
}

#[derive(Serialize)]
struct Aggregate<'a> {
    clean: &'a Summary,
    attacked: Option<&'a Summary>,
    comparison: Option<Comparison>,
}

#[derive(Serialize)]
struct Curves<'a> {
    clean: Option<&'a Curve>,
    attacked: Option<&'a Curve>,
}

#[derive(Serialize)]
struct ReportFile<'a> {
    seed: u64,
    config: &'a serde_json::Value,
    per_video: Vec<VideoRow<'a>>,
    aggregate: Aggregate<'a>,
    #[serde(skip_serializing_if = "Option::is_none")]
    precision_curve: Option<Curves<'a>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    success_curve: Option<Curves<'a>>,
}

fn check_pairing(clean: &MetricsReport, attacked: &MetricsReport) -> Result<()> {
    let ids = |r: &MetricsReport| r.per_video.iter().map(|v| v.video_id).collect::<Vec<_>>();
    if ids(clean) != ids(attacked) {
        return Err(Error::InvalidArgument("clean and attacked reports cover different videos".into()));
    }
    let policies = |r: &MetricsReport| (r.aggregate.otb.is_some(), r.aggregate.vot.is_some());
    if policies(clean) != policies(attacked) {
        return Err(Error::InvalidArgument("clean and attacked reports use different policies".into()));
    }
    Ok(())
}

fn csv_cells(s: Option<&Summary>) -> String {
    let otb = match s.and_then(|s| s.otb) {
        Some(o) => format!("{:.4},{:.4}", o.precision, o.success_auc),
        None => ",".into(),
    };
    let vot = match s.and_then(|s| s.vot) {
        Some(v) => format!("{:.4},{:.4},{:.6},{}", v.accuracy, v.robustness, v.eao, v.failures),
        None => ",,,".into(),
    };
    format!("{otb},{vot}")
}

fn render_csv(clean: &MetricsReport, attacked: Option<&MetricsReport>) -> String {
    let cols = ["precision", "success_auc", "accuracy", "robustness", "eao", "failures"];
    let mut out = String::from("video_id,frames");
    for prefix in ["clean", "attacked"] {
        for c in cols {
            write!(out, ",{prefix}_{c}").unwrap();
        }
    }
    out.push('\n');
    for (i, v) in clean.per_video.iter().enumerate() {
        let a = attacked.map(|r| &r.per_video[i].summary);
        writeln!(out, "{},{},{},{}", v.video_id, v.frames, csv_cells(Some(&v.summary)), csv_cells(a)).unwrap();
    }
    let frames: usize = clean.per_video.iter().map(|v| v.frames).sum();
    writeln!(
        out,
        "aggregate,{frames},{},{}",
        csv_cells(Some(&clean.aggregate)),
        csv_cells(attacked.map(|r| &r.aggregate))
    )
    .unwrap();
    out
}

fn curve_series<'a>(
    clean: &'a MetricsReport,
    attacked: Option<&'a MetricsReport>,
    pick: impl Fn(&'a MetricsReport) -> Option<(&'a Curve, f64)>,
) -> Option<Vec<(&'static str, &'a Curve, f64)>> {
    let (curve, headline) = pick(clean)?;
    let mut series = vec![("clean", curve, headline)];
    series.extend(attacked.and_then(&pick).map(|(c, h)| ("attacked", c, h)));
    Some(series)
}

/// Writes `report.json` and `report.csv` into `dir`, plus `precision.svg`
/// and `success.svg` when OTB runs were evaluated. Output is a pure function
/// of the inputs.
pub fn emit_report(
    clean: &MetricsReport,
    attacked: Option<&MetricsReport>,
    config: &serde_json::Value,
    seed: u64,
    dir: &Path,
) -> Result<()> {
    if let Some(a) = attacked {
        check_pairing(clean, a)?;
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let curves = |pick: fn(&MetricsReport) -> Option<&Curve>| {
        pick(clean).map(|c| Curves { clean: Some(c), attacked: attacked.and_then(pick) })
    };
    let file = ReportFile {
        seed,
        config,
        per_video: clean
            .per_video
            .iter()
            .enumerate()
            .map(|(i, v)| VideoRow {
                video_id: v.video_id,
                frames: v.frames,
                clean: &v.summary,
                attacked: attacked.map(|r| &r.per_video[i].summary),
            })
            .collect(),
        aggregate: Aggregate {
            clean: &clean.aggregate,
            attacked: attacked.map(|r| &r.aggregate),
            comparison: attacked.map(|r| Comparison::new(&clean.aggregate, &r.aggregate)),
        },
        precision_curve: curves(|r| r.precision_curve.as_ref()),
        success_curve: curves(|r| r.success_curve.as_ref()),
    };
    let mut json = serde_json::to_string_pretty(&file).map_err(|e| Error::format(dir, e.to_string()))?;
    json.push('\n');
    let mut outputs = vec![("report.json", json), ("report.csv", render_csv(clean, attacked))];
    let headline = |r: &MetricsReport, f: fn(&OtbSummary) -> f64| r.aggregate.otb.as_ref().map(f).unwrap_or(0.0);
    if let Some(series) =
        curve_series(clean, attacked, |r| r.precision_curve.as_ref().map(|c| (c, headline(r, |o| o.precision))))
    {
        outputs
            .push(("precision.svg", line_plot("Precision", "location error threshold (px)", "precision (%)", &series)));
    }
    if let Some(series) =
        curve_series(clean, attacked, |r| r.success_curve.as_ref().map(|c| (c, headline(r, |o| o.success_auc))))
    {
        outputs.push(("success.svg", line_plot("Success", "overlap threshold", "success rate (%)", &series)));
    }
    for (name, body) in outputs {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}
