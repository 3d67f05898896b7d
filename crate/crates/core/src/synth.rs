//! Deterministic synthetic stream generation for tests and demos.
//!
//! A synthetic video is built from an explicit anatomy segment plan plus
//! randomly placed pathology bursts that respect a gating prior. The
//! generator also plants "implausible" false positives: confident pathology
//! probabilities on frames whose anatomy forbids that pathology. Those are
//! exactly the mistakes gating exists to remove, which makes the generator a
//! controlled benchmark for it.
//!
//! Everything derives from a single seed through a counter-based RNG, so
//! identical inputs give byte-identical outputs on every platform.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::decode::ActivityMatrix;
use crate::error::{Error, Result};
use crate::events::{compose_gt_style, EventSet};
use crate::gating::GatingPrior;
use crate::label_space::{
    LabelMatrix, LabelSpace, ProbabilityStream, ANATOMY_COUNT, CLASS_COUNT,
};

/// Injected false positives are uniform in this probability range: high
/// enough to fool a 0.5 threshold, low enough to stay below real positives
/// at moderate noise.
pub const IMPLAUSIBLE_RANGE: (f64, f64) = (0.6, 0.95);

/// One segment of the anatomy plan: `length` consecutive frames of one
/// anatomy class.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AnatomySegment {
    pub anatomy: usize,
    pub length: usize,
}

/// Full description of one synthetic video.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub video_id: String,
    /// Total frames; must equal the sum of plan segment lengths.
    pub frames: usize,
    pub anatomy_plan: Vec<AnatomySegment>,
    /// Per-frame chance of starting a pathology burst on an allowed frame.
    pub burst_rate: f64,
    pub burst_len_min: usize,
    pub burst_len_max: usize,
    /// Probability jitter amplitude: positives draw from `[1 - noise, 1]`,
    /// negatives from `[0, noise]`. Below 0.5 a plain threshold recovers
    /// the labels exactly.
    pub noise: f64,
    /// Per-cell chance of planting an implausible false positive on a
    /// negative pathology cell whose anatomy forbids the pathology.
    pub implausible_rate: f64,
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let reject = |msg: String| Err(Error::InvalidConfig(format!("synthetic spec: {msg}")));
        let planned: usize = self.anatomy_plan.iter().map(|s| s.length).sum();
        if planned != self.frames {
            return reject(format!(
                "anatomy plan covers {planned} frames but the video has {}",
                self.frames
            ));
        }
        for (i, seg) in self.anatomy_plan.iter().enumerate() {
            if seg.anatomy >= ANATOMY_COUNT {
                return reject(format!("plan segment {i}: anatomy index {} out of range", seg.anatomy));
            }
            if seg.length == 0 {
                return reject(format!("plan segment {i}: zero length"));
            }
        }
        if !(0.0..=1.0).contains(&self.burst_rate) || !self.burst_rate.is_finite() {
            return reject(format!("burst_rate {} outside [0, 1]", self.burst_rate));
        }
        if self.burst_len_min == 0 || self.burst_len_min > self.burst_len_max {
            return reject(format!(
                "burst length range [{}, {}] is invalid",
                self.burst_len_min, self.burst_len_max
            ));
        }
        if !(0.0..=1.0).contains(&self.noise) || !self.noise.is_finite() {
            return reject(format!("noise {} outside [0, 1]", self.noise));
        }
        if !(0.0..=1.0).contains(&self.implausible_rate) || !self.implausible_rate.is_finite() {
            return reject(format!(
                "implausible_rate {} outside [0, 1]",
                self.implausible_rate
            ));
        }
        Ok(())
    }
}

/// Generated video: probabilities, true binary labels, and the ground-truth
/// event set composed from them.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub probs: ProbabilityStream,
    pub labels: LabelMatrix,
    pub ground_truth: EventSet,
}

/// Generates one synthetic video.
///
/// Pathology bursts start only on frames whose anatomy the prior allows and
/// are truncated at the end of the allowed run; bursts of one class are
/// separated by at least one OFF frame. Implausible false positives go only
/// where the label is 0 and the anatomy is disallowed, with probabilities in
/// [`IMPLAUSIBLE_RANGE`]. Ground truth is the fragment-style composition of
/// the true labels.
pub fn synthesize(spec: &SyntheticSpec, prior: &GatingPrior, seed: u64) -> Result<SyntheticData> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = spec.frames;

    let mut anatomy = Vec::with_capacity(n);
    for seg in &spec.anatomy_plan {
        anatomy.extend(std::iter::repeat_n(seg.anatomy as u8, seg.length));
    }

    let mut labels = vec![vec![0u8; CLASS_COUNT]; n];
    for (t, &a) in anatomy.iter().enumerate() {
        labels[t][a as usize] = 1;
    }

    for m in LabelSpace::pathology_indices() {
        let mut t = 0;
        while t < n {
            if !prior.allows(m, anatomy[t] as usize) {
                t += 1;
                continue;
            }
            if rng.random::<f64>() >= spec.burst_rate {
                t += 1;
                continue;
            }
            let len = rng.random_range(spec.burst_len_min..=spec.burst_len_max);
            let mut end = t;
            while end + 1 < n
                && end + 1 - t < len
                && prior.allows(m, anatomy[end + 1] as usize)
            {
                end += 1;
            }
            for row in labels.iter_mut().take(end + 1).skip(t) {
                row[m] = 1;
            }
            // Skip one extra frame so consecutive bursts never touch.
            t = end + 2;
        }
    }

    let (implausible_lo, implausible_hi) = IMPLAUSIBLE_RANGE;
    let mut probs = vec![vec![0.0f64; CLASS_COUNT]; n];
    for t in 0..n {
        for c in 0..CLASS_COUNT {
            let u: f64 = rng.random();
            let mut p = if labels[t][c] == 1 {
                1.0 - u * spec.noise
            } else {
                u * spec.noise
            };
            if LabelSpace::is_pathology(c)
                && labels[t][c] == 0
                && !prior.allows(c, anatomy[t] as usize)
                && rng.random::<f64>() < spec.implausible_rate
            {
                p = implausible_lo + rng.random::<f64>() * (implausible_hi - implausible_lo);
            }
            probs[t][c] = p;
        }
    }

    let labels = LabelMatrix::new(spec.video_id.clone(), labels);
    let activity = ActivityMatrix::from_label_matrix(&labels)?;
    let ground_truth = compose_gt_style(&activity);
    Ok(SyntheticData {
        probs: ProbabilityStream::new(spec.video_id.clone(), probs),
        labels,
        ground_truth,
    })
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecFile {
    video_id: String,
    frames: usize,
    anatomy_plan: Vec<SegmentFile>,
    #[serde(default = "default_burst_rate")]
    burst_rate: f64,
    #[serde(default = "default_burst_len_min")]
    burst_len_min: usize,
    #[serde(default = "default_burst_len_max")]
    burst_len_max: usize,
    #[serde(default)]
    noise: f64,
    #[serde(default)]
    implausible_rate: f64,
}

fn default_burst_rate() -> f64 {
    0.02
}

fn default_burst_len_min() -> usize {
    8
}

fn default_burst_len_max() -> usize {
    40
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SegmentFile {
    anatomy: String,
    length: usize,
}

/// Parses a TOML synthetic-video spec, resolving anatomy names against
/// `space`.
pub fn synthetic_spec_from_toml(text: &str, space: &LabelSpace) -> Result<SyntheticSpec> {
    let file: SpecFile =
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let mut plan = Vec::with_capacity(file.anatomy_plan.len());
    for seg in &file.anatomy_plan {
        let anatomy = space
            .class_index(&seg.anatomy)
            .filter(|&i| LabelSpace::is_anatomy(i))
            .ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "anatomy_plan: '{}' is not an anatomy class",
                    seg.anatomy
                ))
            })?;
        plan.push(AnatomySegment { anatomy, length: seg.length });
    }
    let spec = SyntheticSpec {
        video_id: file.video_id,
        frames: file.frames,
        anatomy_plan: plan,
        burst_rate: file.burst_rate,
        burst_len_min: file.burst_len_min,
        burst_len_max: file.burst_len_max,
        noise: file.noise,
        implausible_rate: file.implausible_rate,
    };
    spec.validate()?;
    Ok(spec)
}

/// Reads a TOML synthetic-video spec from disk.
pub fn load_synthetic_spec(path: &Path, space: &LabelSpace) -> Result<SyntheticSpec> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    synthetic_spec_from_toml(&text, space).map_err(|e| match e {
        Error::InvalidConfig(message) => {
            Error::FileFormat { path: path.display().to_string(), message }
        }
        other => other,
    })
}
