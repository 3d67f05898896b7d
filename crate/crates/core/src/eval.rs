//! Temporal detection metrics: IoU, per-class average precision, and mAP at
//! multiple IoU thresholds, plus a segment-count diagnostic.
//!
//! Matching follows the usual detection protocol. Predictions are ranked by
//! score and greedily matched one-to-one against ground truth of the same
//! video and class at an IoU threshold; the precision/recall curve is then
//! integrated with all-point interpolation. Every ordering rule is total, so
//! results are bit-for-bit reproducible.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::{Event, EventSet};
use crate::label_space::{LabelSpace, CLASS_COUNT};

/// Inclusive frame interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end);
        Span { start, end }
    }

    pub fn frame_len(&self) -> usize {
        self.end - self.start + 1
    }
}

/// Intersection over union with inclusive frame counting: `[0, 4]` and
/// `[2, 6]` overlap in 3 of 7 covered frames.
pub fn span_iou(a: Span, b: Span) -> f64 {
    let lo = a.start.max(b.start);
    let hi = a.end.min(b.end);
    if hi < lo {
        return 0.0;
    }
    let inter = (hi - lo + 1) as f64;
    let union = (a.frame_len() + b.frame_len()) as f64 - inter;
    inter / union
}

/// IoU of two events' spans; labels and scores are not consulted.
pub fn temporal_iou(a: &Event, b: &Event) -> f64 {
    span_iou(Span::new(a.start_frame, a.end_frame), Span::new(b.start_frame, b.end_frame))
}

/// One scored prediction instance, already reduced to a single class pool.
/// `video` is an index into the evaluator's sorted video-id list.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredInstance {
    pub video: usize,
    pub span: Span,
    pub score: f64,
}

/// One ground-truth instance in a single class pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GtInstance {
    pub video: usize,
    pub span: Span,
}

/// Average precision of one class pool at one IoU threshold.
///
/// Predictions are ranked by score descending, ties broken by start frame,
/// then video index, then end frame. Each prediction greedily takes the
/// highest-IoU unmatched ground truth of its own video with IoU at or above
/// the threshold (IoU ties go to the earlier ground-truth start). The
/// all-point interpolated area under precision/recall is returned; an empty
/// ground-truth or prediction pool scores 0.
pub fn average_precision(preds: &[ScoredInstance], gts: &[GtInstance], iou_threshold: f64) -> f64 {
    if gts.is_empty() || preds.is_empty() {
        return 0.0;
    }
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&i, &j| {
        let a = &preds[i];
        let b = &preds[j];
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.span.start.cmp(&b.span.start))
            .then_with(|| a.video.cmp(&b.video))
            .then_with(|| a.span.end.cmp(&b.span.end))
    });

    let mut taken = vec![false; gts.len()];
    let mut tp_flags = vec![false; preds.len()];
    let mut precision = vec![0.0f64; preds.len()];
    let mut tp_count = 0usize;
    for (rank, &pi) in order.iter().enumerate() {
        let p = &preds[pi];
        let mut best: Option<(usize, f64)> = None;
        for (gi, g) in gts.iter().enumerate() {
            if taken[gi] || g.video != p.video {
                continue;
            }
            let iou = span_iou(p.span, g.span);
            if iou < iou_threshold {
                continue;
            }
            let better = match best {
                None => true,
                Some((bgi, biou)) => {
                    iou > biou || (iou == biou && g.span.start < gts[bgi].span.start)
                }
            };
            if better {
                best = Some((gi, iou));
            }
        }
        if let Some((gi, _)) = best {
            taken[gi] = true;
            tp_count += 1;
            tp_flags[rank] = true;
        }
        precision[rank] = tp_count as f64 / (rank + 1) as f64;
    }

    // All-point interpolation: each true positive contributes its recall
    // step (1 / n_gt) times the best precision achieved at or beyond it.
    let n_gt = gts.len() as f64;
    let mut ap = 0.0;
    let mut max_prec = 0.0f64;
    for rank in (0..preds.len()).rev() {
        if precision[rank] > max_prec {
            max_prec = precision[rank];
        }
        if tp_flags[rank] {
            ap += max_prec / n_gt;
        }
    }
    ap
}

/// Evaluation parameters: the IoU thresholds to report.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub iou_thresholds: Vec<f64>,
}

impl EvalConfig {
    pub fn new(iou_thresholds: Vec<f64>) -> Result<Self> {
        let config = EvalConfig { iou_thresholds };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.iou_thresholds.is_empty() {
            return Err(Error::InvalidConfig("at least one IoU threshold is required".into()));
        }
        for &t in &self.iou_thresholds {
            if !t.is_finite() || t <= 0.0 || t > 1.0 {
                return Err(Error::InvalidConfig(format!(
                    "IoU threshold {t} outside (0, 1]"
                )));
            }
        }
        let mut sorted = self.iou_thresholds.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidConfig("IoU thresholds must be distinct".into()));
        }
        Ok(())
    }
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { iou_thresholds: vec![0.5, 0.95] }
    }
}

/// AP values for one class, parallel to the report's threshold list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassAp {
    pub class: String,
    pub ap: Vec<f64>,
}

/// mAP values for one video, parallel to the report's threshold list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoMap {
    pub video_id: String,
    pub map: Vec<f64>,
}

/// Predicted vs ground-truth segment counts for one video/class pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentCountRow {
    pub video_id: String,
    pub class: String,
    pub predicted: usize,
    pub ground_truth: usize,
    pub flagged: bool,
}

/// Segment-count diagnostic: flags video/class pairs whose predicted and
/// ground-truth event counts differ by more than `mismatch_factor`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentCountReport {
    pub mismatch_factor: f64,
    pub total_predicted: usize,
    pub total_ground_truth: usize,
    pub rows: Vec<SegmentCountRow>,
}

/// Full evaluation output. All value vectors are parallel to
/// `iou_thresholds`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub iou_thresholds: Vec<f64>,
    pub overall_map: Vec<f64>,
    pub per_class: Vec<ClassAp>,
    pub per_video: Vec<VideoMap>,
    pub segment_counts: SegmentCountReport,
}

/// Default segment-count mismatch factor.
pub const DEFAULT_MISMATCH_FACTOR: f64 = 2.0;

fn flag_mismatch(predicted: usize, ground_truth: usize, factor: f64) -> bool {
    let lo = predicted.min(ground_truth);
    let hi = predicted.max(ground_truth);
    if hi == 0 {
        false
    } else if lo == 0 {
        true
    } else {
        hi as f64 > factor * lo as f64
    }
}

/// Counts events per video/class on both sides and flags large mismatches.
///
/// Rows come out sorted by video id, then class index; pairs with zero
/// events on both sides are omitted.
pub fn segment_count_report(
    pred_sets: &[EventSet],
    gt_sets: &[EventSet],
    space: &LabelSpace,
    mismatch_factor: f64,
) -> SegmentCountReport {
    let mut counts: BTreeMap<(String, usize), (usize, usize)> = BTreeMap::new();
    for set in pred_sets {
        for ev in &set.events {
            counts.entry((set.video_id.clone(), ev.label)).or_default().0 += 1;
        }
    }
    for set in gt_sets {
        for ev in &set.events {
            counts.entry((set.video_id.clone(), ev.label)).or_default().1 += 1;
        }
    }
    let mut rows = Vec::with_capacity(counts.len());
    let mut total_predicted = 0;
    let mut total_ground_truth = 0;
    for ((video_id, label), (predicted, ground_truth)) in counts {
        total_predicted += predicted;
        total_ground_truth += ground_truth;
        rows.push(SegmentCountRow {
            video_id,
            class: space.class_name(label).to_string(),
            predicted,
            ground_truth,
            flagged: flag_mismatch(predicted, ground_truth, mismatch_factor),
        });
    }
    SegmentCountReport { mismatch_factor, total_predicted, total_ground_truth, rows }
}

fn index_sets<'a>(
    what: &str,
    sets: &'a [EventSet],
) -> Result<BTreeMap<&'a str, &'a EventSet>> {
    let mut by_id = BTreeMap::new();
    for set in sets {
        if by_id.insert(set.video_id.as_str(), set).is_some() {
            return Err(Error::InvalidInput(format!(
                "duplicate video id '{}' in {what}",
                set.video_id
            )));
        }
    }
    Ok(by_id)
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for v in values {
        sum += v;
        count += 1;
    }
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

/// Evaluates scored predictions against ground truth over a whole corpus.
///
/// Both sides must cover the same video ids, with matching frame counts per
/// video, and every prediction event must carry a score. AP pools instances
/// per class across videos; overall mAP averages the classes that have at
/// least one ground-truth event anywhere, and each per-video mAP restricts
/// both sides to that video and averages the classes with ground truth
/// there. Classes without ground truth never enter a mean.
pub fn evaluate(
    pred_sets: &[EventSet],
    gt_sets: &[EventSet],
    config: &EvalConfig,
    space: &LabelSpace,
) -> Result<EvalReport> {
    config.validate()?;
    let preds_by_id = index_sets("predictions", pred_sets)?;
    let gts_by_id = index_sets("ground truth", gt_sets)?;
    let pred_ids: Vec<&str> = preds_by_id.keys().copied().collect();
    let gt_ids: Vec<&str> = gts_by_id.keys().copied().collect();
    if pred_ids != gt_ids {
        let only_pred: Vec<&str> =
            pred_ids.iter().filter(|id| !gts_by_id.contains_key(*id)).copied().collect();
        let only_gt: Vec<&str> =
            gt_ids.iter().filter(|id| !preds_by_id.contains_key(*id)).copied().collect();
        return Err(Error::InvalidInput(format!(
            "prediction and ground-truth video ids differ: only in predictions {only_pred:?}, \
             only in ground truth {only_gt:?}"
        )));
    }
    for (&id, pred) in &preds_by_id {
        let gt = gts_by_id[id];
        if pred.frame_count != gt.frame_count {
            return Err(Error::InvalidInput(format!(
                "video '{id}': prediction frame count {} != ground truth {}",
                pred.frame_count, gt.frame_count
            )));
        }
        for (i, ev) in pred.events.iter().enumerate() {
            if ev.score.is_none() {
                return Err(Error::InvalidInput(format!(
                    "prediction event {i} in video '{id}' has no score"
                )));
            }
        }
    }

    // Video index = rank of the id in sorted order; AP tie-breaking on
    // "lower video" therefore means lexicographically smaller id.
    let videos = pred_ids;
    let video_index: BTreeMap<&str, usize> =
        videos.iter().enumerate().map(|(i, &id)| (id, i)).collect();

    let mut preds_by_class: Vec<Vec<ScoredInstance>> = vec![Vec::new(); CLASS_COUNT];
    let mut gts_by_class: Vec<Vec<GtInstance>> = vec![Vec::new(); CLASS_COUNT];
    for (&id, set) in &preds_by_id {
        let video = video_index[id];
        for ev in &set.events {
            preds_by_class[ev.label].push(ScoredInstance {
                video,
                span: Span::new(ev.start_frame, ev.end_frame),
                score: ev.score.expect("checked above"),
            });
        }
    }
    for (&id, set) in &gts_by_id {
        let video = video_index[id];
        for ev in &set.events {
            gts_by_class[ev.label]
                .push(GtInstance { video, span: Span::new(ev.start_frame, ev.end_frame) });
        }
    }

    let gt_classes: Vec<usize> =
        (0..CLASS_COUNT).filter(|&c| !gts_by_class[c].is_empty()).collect();
    let thresholds = &config.iou_thresholds;

    let per_class: Vec<ClassAp> = gt_classes
        .iter()
        .map(|&c| ClassAp {
            class: space.class_name(c).to_string(),
            ap: thresholds
                .iter()
                .map(|&thr| average_precision(&preds_by_class[c], &gts_by_class[c], thr))
                .collect(),
        })
        .collect();

    let overall_map: Vec<f64> = (0..thresholds.len())
        .map(|k| mean(per_class.iter().map(|row| row.ap[k])))
        .collect();

    let per_video: Vec<VideoMap> = videos
        .iter()
        .enumerate()
        .map(|(v, &id)| {
            let classes_here: Vec<usize> = (0..CLASS_COUNT)
                .filter(|&c| gts_by_class[c].iter().any(|g| g.video == v))
                .collect();
            let map = (0..thresholds.len())
                .map(|k| {
                    mean(classes_here.iter().map(|&c| {
                        let p: Vec<ScoredInstance> =
                            preds_by_class[c].iter().filter(|i| i.video == v).copied().collect();
                        let g: Vec<GtInstance> =
                            gts_by_class[c].iter().filter(|i| i.video == v).copied().collect();
                        average_precision(&p, &g, thresholds[k])
                    }))
                })
                .collect();
            VideoMap { video_id: id.to_string(), map }
        })
        .collect();

    Ok(EvalReport {
        iou_thresholds: thresholds.clone(),
        overall_map,
        per_class,
        per_video,
        segment_counts: segment_count_report(pred_sets, gt_sets, space, DEFAULT_MISMATCH_FACTOR),
    })
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let header: Vec<String> =
            self.iou_thresholds.iter().map(|t| format!("@{t:.2}")).collect();
        writeln!(f, "overall mAP")?;
        write!(f, "  ")?;
        for (h, v) in header.iter().zip(self.overall_map.iter()) {
            write!(f, "{h} {v:.4}  ")?;
        }
        writeln!(f)?;
        let name_width = self
            .per_class
            .iter()
            .map(|r| r.class.len())
            .chain(self.per_video.iter().map(|r| r.video_id.len()))
            .max()
            .unwrap_or(8)
            .max(8);
        writeln!(f, "per-class AP ({} classes with ground truth)", self.per_class.len())?;
        for row in &self.per_class {
            write!(f, "  {:<name_width$}", row.class)?;
            for v in &row.ap {
                write!(f, "  {v:.4}")?;
            }
            writeln!(f)?;
        }
        writeln!(f, "per-video mAP")?;
        for row in &self.per_video {
            write!(f, "  {:<name_width$}", row.video_id)?;
            for v in &row.map {
                write!(f, "  {v:.4}")?;
            }
            writeln!(f)?;
        }
        let flagged: Vec<&SegmentCountRow> =
            self.segment_counts.rows.iter().filter(|r| r.flagged).collect();
        writeln!(
            f,
            "segment counts: {} predicted vs {} ground truth, {} pair(s) flagged (factor {})",
            self.segment_counts.total_predicted,
            self.segment_counts.total_ground_truth,
            flagged.len(),
            self.segment_counts.mismatch_factor
        )?;
        for row in flagged {
            writeln!(
                f,
                "  {}/{}: {} predicted vs {} ground truth",
                row.video_id, row.class, row.predicted, row.ground_truth
            )?;
        }
        Ok(())
    }
}
