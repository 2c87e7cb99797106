//! Evaluation protocols over annotations and predictions.

mod predictions;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data_model::{FrameAnnotation, VdmError};
use crate::metrics::{EvalRecord, MetricsAccumulator, MetricsError, MetricsReport};
use crate::numeric::NeumaierSum;

pub use predictions::{Prediction, PredictionSet, PREDICTION_CSV_HEADER};

/// Predicted per-person volumes below this are detection misses.
pub const DEFAULT_MIN_VOLUME_DM3: f64 = 10.0;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("dataset has no persons")]
    NoPersons,
    #[error("missing predictions for {} frames: {}", .0.len(), .0.join(", "))]
    MissingPredictions(Vec<String>),
    #[error("frame {frame_id}: map is {map_w}x{map_h}, frame is {frame_w}x{frame_h}")]
    SizeMismatch {
        frame_id: String,
        map_w: usize,
        map_h: usize,
        frame_w: u32,
        frame_h: u32,
    },
    #[error("frame {0}: decoupling needs a density map prediction")]
    NotAMap(String),
    #[error("negative count {count} for frame {frame_id}")]
    NegativeCount { frame_id: String, count: i64 },
    #[error("bin edges must be strictly increasing: {0:?}")]
    BadEdges(Vec<f64>),
    #[error("prediction CSV line {line}: cannot parse {content:?}")]
    PredictionCsv { line: usize, content: String },
    #[error("duplicate prediction for frame {0}")]
    DuplicatePrediction(String),
    #[error("{0}: {1}")]
    Io(String, #[source] std::io::Error),
    #[error(transparent)]
    Vdm(#[from] VdmError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    /// Mean per-person volume over the whole dataset, dm³.
    pub mean_person_volume_dm3: f64,
    pub persons: usize,
    pub frames: usize,
    /// Frames per person count.
    pub count_histogram: BTreeMap<usize, usize>,
    /// Frames per scene tag.
    pub tag_counts: BTreeMap<String, usize>,
}

pub fn dataset_stats(frames: &[FrameAnnotation]) -> Result<DatasetStats, EvalError> {
    let mut volume = NeumaierSum::new();
    let mut persons = 0usize;
    let mut count_histogram = BTreeMap::new();
    let mut tag_counts = BTreeMap::new();
    for f in frames {
        for p in &f.persons {
            volume.add(p.volume_dm3);
        }
        persons += f.persons.len();
        *count_histogram.entry(f.persons.len()).or_default() += 1;
        for t in &f.scene_tags {
            *tag_counts.entry(t.clone()).or_default() += 1;
        }
    }
    if persons == 0 {
        return Err(EvalError::NoPersons);
    }
    Ok(DatasetStats {
        mean_person_volume_dm3: volume.value() / persons as f64,
        persons,
        frames: frames.len(),
        count_histogram,
        tag_counts,
    })
}

impl DatasetStats {
    /// `metric,value` rows followed by the count histogram and tag counts.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,value\n");
        out.push_str(&format!("mean_person_volume_dm3,{}\n", self.mean_person_volume_dm3));
        out.push_str(&format!("persons,{}\n", self.persons));
        out.push_str(&format!("frames,{}\n", self.frames));
        for (n, c) in &self.count_histogram {
            out.push_str(&format!("frames_with_{n}_persons,{c}\n"));
        }
        for (t, c) in &self.tag_counts {
            out.push_str(&format!("frames_tagged_{t},{c}\n"));
        }
        out
    }
}

/// `V̂_k = count_k · V̄`.
pub fn mean_volume_estimator(counts: &[(String, i64)], mean_volume_dm3: f64) -> Result<PredictionSet, EvalError> {
    let mut set = PredictionSet::new("mean_volume");
    for (id, c) in counts {
        if *c < 0 {
            return Err(EvalError::NegativeCount {
                frame_id: id.clone(),
                count: *c,
            });
        }
        set.insert(id.clone(), Prediction::Scalar(*c as f64 * mean_volume_dm3));
    }
    Ok(set)
}

/// Mean-volume estimator fed with the ground-truth counts.
pub fn oracular_estimator(frames: &[FrameAnnotation], mean_volume_dm3: f64) -> PredictionSet {
    let counts: Vec<(String, i64)> = frames
        .iter()
        .map(|f| (f.frame_id.clone(), f.persons.len() as i64))
        .collect();
    let mut set = mean_volume_estimator(&counts, mean_volume_dm3).expect("counts are non-negative");
    set.source = "oracular_mean_volume".into();
    set
}

fn check_map_size(frame: &FrameAnnotation, p: &Prediction) -> Result<(), EvalError> {
    if let Prediction::Map(m) = p {
        if m.width() != frame.image_w as usize || m.height() != frame.image_h as usize {
            return Err(EvalError::SizeMismatch {
                frame_id: frame.frame_id.clone(),
                map_w: m.width(),
                map_h: m.height(),
                frame_w: frame.image_w,
                frame_h: frame.image_h,
            });
        }
    }
    Ok(())
}

/// One record per ground-truth frame, in frame order.
pub fn build_records(gt: &[FrameAnnotation], preds: &PredictionSet) -> Result<Vec<EvalRecord>, EvalError> {
    let missing: Vec<String> = gt
        .iter()
        .filter(|f| preds.get(&f.frame_id).is_none())
        .map(|f| f.frame_id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(EvalError::MissingPredictions(missing));
    }
    gt.iter()
        .map(|f| {
            let p = preds.get(&f.frame_id).expect("checked above");
            check_map_size(f, p)?;
            Ok(EvalRecord::new(f.frame_id.clone(), f.total_volume_dm3(), p.total(), f.persons.len()))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullReport {
    pub overall: MetricsReport,
    pub per_tag: BTreeMap<String, MetricsReport>,
}

impl FullReport {
    /// `metric,value,k`; per-tag rows are prefixed with `tag=<name>:`.
    pub fn to_csv(&self) -> String {
        let mut out = self.overall.to_csv();
        for (tag, r) in &self.per_tag {
            for line in r.to_csv().lines().skip(1) {
                out.push_str(&format!("tag={tag}:{line}\n"));
            }
        }
        out
    }
}

pub fn evaluate_full(gt: &[FrameAnnotation], preds: &PredictionSet) -> Result<FullReport, EvalError> {
    let records = build_records(gt, preds)?;
    let mut overall = MetricsAccumulator::new();
    let mut tags: BTreeMap<String, MetricsAccumulator> = BTreeMap::new();
    for (f, r) in gt.iter().zip(&records) {
        overall.add(r)?;
        for t in &f.scene_tags {
            tags.entry(t.clone()).or_default().add(r)?;
        }
    }
    Ok(FullReport {
        overall: overall.report()?,
        per_tag: tags
            .into_iter()
            .map(|(t, a)| Ok((t, a.report()?)))
            .collect::<Result<_, MetricsError>>()?,
    })
}

/// When two ground-truth boxes count as overlapping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum OverlapRule {
    /// Any intersection of positive area.
    AnyIntersection,
    /// IoU strictly above the threshold.
    IouAbove(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecouplingConfig {
    pub min_volume_dm3: f64,
    pub overlap: OverlapRule,
}

impl Default for DecouplingConfig {
    fn default() -> Self {
        Self {
            min_volume_dm3: DEFAULT_MIN_VOLUME_DM3,
            overlap: OverlapRule::AnyIntersection,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecouplingReport {
    /// Mean per-person absolute error over kept, detected persons.
    pub ppmae: Option<f64>,
    pub kept: usize,
    pub detected: usize,
    pub misses: usize,
    pub dropped_overlap: usize,
}

impl DecouplingReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,value,k\n");
        match self.ppmae {
            Some(v) => out.push_str(&format!("ppmae,{v},{}\n", self.detected)),
            None => out.push_str("ppmae,,0\n"),
        }
        out.push_str(&format!("misses,{},{}\n", self.misses, self.kept));
        out.push_str(&format!("kept,{},{}\n", self.kept, self.kept + self.dropped_overlap));
        out.push_str(&format!("dropped_overlap,{},{}\n", self.dropped_overlap, self.kept + self.dropped_overlap));
        out
    }
}

/// Per-person protocol: isolated persons only, volume read off the map
/// inside each box, small integrals counted as misses.
pub fn decoupling_eval(
    gt: &[FrameAnnotation],
    preds: &PredictionSet,
    cfg: &DecouplingConfig,
) -> Result<DecouplingReport, EvalError> {
    let mut err = NeumaierSum::new();
    let mut report = DecouplingReport {
        ppmae: None,
        kept: 0,
        detected: 0,
        misses: 0,
        dropped_overlap: 0,
    };
    let mut missing = Vec::new();
    for f in gt {
        let Some(pred) = preds.get(&f.frame_id) else {
            missing.push(f.frame_id.clone());
            continue;
        };
        check_map_size(f, pred)?;
        let Prediction::Map(map) = pred else {
            return Err(EvalError::NotAMap(f.frame_id.clone()));
        };
        for (i, p) in f.persons.iter().enumerate() {
            let overlaps = f.persons.iter().enumerate().any(|(j, q)| {
                j != i
                    && match cfg.overlap {
                        OverlapRule::AnyIntersection => p.bbox_px.intersection_area(&q.bbox_px) > 0.0,
                        OverlapRule::IouAbove(t) => p.bbox_px.iou(&q.bbox_px) > t,
                    }
            });
            if overlaps {
                report.dropped_overlap += 1;
                continue;
            }
            report.kept += 1;
            let Some(bbox) = p.bbox_px.clip(f.image_w as f64, f.image_h as f64) else {
                report.misses += 1;
                continue;
            };
            let v = map.integrate(&bbox)?;
            if v < cfg.min_volume_dm3 {
                report.misses += 1;
            } else {
                report.detected += 1;
                err.add((v - p.volume_dm3).abs());
            }
        }
    }
    if !missing.is_empty() {
        return Err(EvalError::MissingPredictions(missing));
    }
    report.ppmae = (report.detected > 0).then(|| err.value() / report.detected as f64);
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinReport {
    pub lo: f64,
    pub hi: f64,
    pub frames: usize,
    /// `None` for empty bins.
    pub report: Option<MetricsReport>,
}

pub const BINS_CSV_HEADER: &str = "lo,hi,frames,mae,ppmae,rmse";

/// Partition frames by person count into `[e_i, e_{i+1})`; the last edge
/// may be infinite.
pub fn crowd_size_bins(gt: &[FrameAnnotation], preds: &PredictionSet, edges: &[f64]) -> Result<Vec<BinReport>, EvalError> {
    if edges.len() < 2 || edges.windows(2).any(|w| !(w[0] < w[1])) || edges.iter().any(|e| e.is_nan()) {
        return Err(EvalError::BadEdges(edges.to_vec()));
    }
    let records = build_records(gt, preds)?;
    let mut accs = vec![MetricsAccumulator::new(); edges.len() - 1];
    for r in &records {
        let n = r.n_persons as f64;
        if let Some(b) = edges.windows(2).position(|w| w[0] <= n && n < w[1]) {
            accs[b].add(r)?;
        }
    }
    accs.iter()
        .enumerate()
        .map(|(i, a)| {
            Ok(BinReport {
                lo: edges[i],
                hi: edges[i + 1],
                frames: a.len(),
                report: if a.is_empty() { None } else { Some(a.report()?) },
            })
        })
        .collect()
}

pub fn bins_to_csv(bins: &[BinReport]) -> String {
    let mut out = format!("{BINS_CSV_HEADER}\n");
    for b in bins {
        match &b.report {
            Some(r) => {
                let pp = r.ppmae.map(|v| v.to_string()).unwrap_or_default();
                out.push_str(&format!("{},{},{},{},{},{}\n", b.lo, b.hi, b.frames, r.mae, pp, r.rmse));
            }
            None => out.push_str(&format!("{},{},0,,,\n", b.lo, b.hi)),
        }
    }
    out
}

/// Tag filter: keep frames with any `include` tag (if given) and no
/// `exclude` tag.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SubsetFilter {
    pub include: BTreeSet<String>,
    pub exclude: BTreeSet<String>,
}

impl SubsetFilter {
    pub fn all() -> Self {
        Self::default()
    }

    /// Clear scenes: no night, rain or heavy occlusion.
    pub fn s1() -> Self {
        Self {
            include: BTreeSet::new(),
            exclude: ["night", "rain", "heavy_occlusion"].iter().map(|s| s.to_string()).collect(),
        }
    }

    /// Bird's-eye views only.
    pub fn s2() -> Self {
        Self {
            include: ["birds_eye".to_string()].into(),
            exclude: BTreeSet::new(),
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "all" | "full" => Some(Self::all()),
            "s1" => Some(Self::s1()),
            "s2" => Some(Self::s2()),
            _ => None,
        }
    }

    pub fn keeps(&self, f: &FrameAnnotation) -> bool {
        (self.include.is_empty() || self.include.iter().any(|t| f.has_tag(t)))
            && !self.exclude.iter().any(|t| f.has_tag(t))
    }
}

/// Filter tags that no frame carries.
pub fn unknown_tags(frames: &[FrameAnnotation], filter: &SubsetFilter) -> Vec<String> {
    let present: BTreeSet<&String> = frames.iter().flat_map(|f| &f.scene_tags).collect();
    filter
        .include
        .iter()
        .chain(&filter.exclude)
        .filter(|t| !present.contains(t))
        .cloned()
        .collect()
}

pub fn filter_subset(frames: &[FrameAnnotation], filter: &SubsetFilter) -> Vec<FrameAnnotation> {
    for t in unknown_tags(frames, filter) {
        log::warn!("subset filter tag {t:?} does not occur in the data");
    }
    frames.iter().filter(|f| filter.keeps(f)).cloned().collect()
}

#[cfg(test)]
mod tests;
