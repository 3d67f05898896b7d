//! Class-imbalance-aware loss kernels and their analytic gradients.
//!
//! All losses average over frames and sum over classes. Probabilities are
//! clamped to `[epsilon, 1 - epsilon]` before any logarithm so that hard 0/1
//! inputs stay finite; the gradient honours the same clamp by going to zero
//! in the saturated region.

use crate::error::{Error, Result};
use crate::label_space::{LabelMatrix, ProbabilityStream, ScoreStream, CLASS_COUNT};

/// Default probability clamp used before logarithms.
pub const DEFAULT_PROB_EPSILON: f64 = 1e-7;

/// Numerically stable logistic function.
///
/// Exact at the extremes: saturates to 0.0 / 1.0 for large `|z|` without
/// overflowing, and `sigmoid(0) == 0.5`.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Positive/negative frame counts per class, the input to weight estimation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassCounts {
    pub pos: [u64; CLASS_COUNT],
    pub neg: [u64; CLASS_COUNT],
}

impl ClassCounts {
    pub fn new(pos: [u64; CLASS_COUNT], neg: [u64; CLASS_COUNT]) -> Self {
        ClassCounts { pos, neg }
    }

    /// Tallies positives and negatives per class from a binary label matrix.
    pub fn from_labels(labels: &LabelMatrix) -> Result<Self> {
        labels.validate()?;
        let mut pos = [0u64; CLASS_COUNT];
        let mut neg = [0u64; CLASS_COUNT];
        for row in &labels.labels {
            for (c, &y) in row.iter().enumerate() {
                if y == 1 {
                    pos[c] += 1;
                } else {
                    neg[c] += 1;
                }
            }
        }
        Ok(ClassCounts { pos, neg })
    }
}

/// Per-class positive-term weights, guaranteed to lie in `[w_min, w_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassWeights {
    weights: [f64; CLASS_COUNT],
    w_min: f64,
    w_max: f64,
}

impl ClassWeights {
    /// Wraps explicit per-class weights, checking them against the bounds.
    pub fn from_values(weights: [f64; CLASS_COUNT], w_min: f64, w_max: f64) -> Result<Self> {
        check_weight_bounds(w_min, w_max)?;
        for (c, &w) in weights.iter().enumerate() {
            if !w.is_finite() || w < w_min || w > w_max {
                return Err(Error::InvalidConfig(format!(
                    "class {c}: weight {w} outside [{w_min}, {w_max}]"
                )));
            }
        }
        Ok(ClassWeights { weights, w_min, w_max })
    }

    /// All classes share one weight; the bounds degenerate to `[w, w]`.
    pub fn uniform(w: f64) -> Self {
        ClassWeights { weights: [w; CLASS_COUNT], w_min: w, w_max: w }
    }

    pub fn get(&self, class: usize) -> f64 {
        self.weights[class]
    }

    pub fn values(&self) -> &[f64; CLASS_COUNT] {
        &self.weights
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.w_min, self.w_max)
    }
}

pub(crate) fn check_weight_bounds(w_min: f64, w_max: f64) -> Result<()> {
    if !w_min.is_finite() || !w_max.is_finite() || w_min < 0.0 || w_min > w_max {
        return Err(Error::InvalidConfig(format!(
            "weight bounds must satisfy 0 <= w_min <= w_max, got [{w_min}, {w_max}]"
        )));
    }
    Ok(())
}

/// Estimates per-class weights as the negative/positive frame ratio, clipped
/// to `[w_min, w_max]`.
///
/// A class with zero positives gets `w_max`: the raw ratio diverges and the
/// clip is the defined limit. Zero positives and zero negatives also lands on
/// `w_max` for the same reason.
pub fn class_weights(counts: &ClassCounts, w_min: f64, w_max: f64) -> Result<ClassWeights> {
    check_weight_bounds(w_min, w_max)?;
    let mut weights = [0.0f64; CLASS_COUNT];
    for (c, slot) in weights.iter_mut().enumerate() {
        let raw = if counts.pos[c] == 0 {
            f64::INFINITY
        } else {
            counts.neg[c] as f64 / counts.pos[c] as f64
        };
        *slot = raw.clamp(w_min, w_max);
    }
    Ok(ClassWeights { weights, w_min, w_max })
}

/// Weighted binary cross-entropy, reported per class and in total.
#[derive(Debug, Clone, PartialEq)]
pub struct BceLoss {
    /// Frame-averaged loss for each class.
    pub per_class: [f64; CLASS_COUNT],
    /// Sum of the per-class losses.
    pub total: f64,
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !epsilon.is_finite() || !(0.0..0.5).contains(&epsilon) {
        return Err(Error::InvalidConfig(format!(
            "probability clamp epsilon must lie in [0, 0.5), got {epsilon}"
        )));
    }
    Ok(())
}

fn check_pair<TA, TB>(context: &str, a: &[Vec<TA>], b: &[Vec<TB>]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            context: context.into(),
            detail: format!("{} frames vs {} frames", a.len(), b.len()),
        });
    }
    if a.is_empty() {
        return Err(Error::EmptyInput(context.into()));
    }
    for (t, (ra, rb)) in a.iter().zip(b.iter()).enumerate() {
        if ra.len() != CLASS_COUNT || rb.len() != CLASS_COUNT {
            return Err(Error::DimensionMismatch {
                context: context.into(),
                detail: format!(
                    "row {t}: widths {} and {} (expected {CLASS_COUNT})",
                    ra.len(),
                    rb.len()
                ),
            });
        }
    }
    Ok(())
}

/// Weighted BCE over an `N x 17` probability matrix.
///
/// Per class: `-(1/N) * sum_t [ w_c * y * ln(p) + (1 - y) * ln(1 - p) ]`,
/// with `p` clamped to `[epsilon, 1 - epsilon]`. The weight applies to the
/// positive term only.
pub fn weighted_bce(
    probs: &ProbabilityStream,
    labels: &LabelMatrix,
    weights: &ClassWeights,
    epsilon: f64,
) -> Result<BceLoss> {
    check_epsilon(epsilon)?;
    check_pair("weighted_bce", &probs.probs, &labels.labels)?;
    let n = probs.frame_count() as f64;
    let mut per_class = [0.0f64; CLASS_COUNT];
    for (row, lrow) in probs.probs.iter().zip(labels.labels.iter()) {
        for c in 0..CLASS_COUNT {
            let p = row[c].clamp(epsilon, 1.0 - epsilon);
            per_class[c] += if lrow[c] == 1 {
                weights.get(c) * p.ln()
            } else {
                (1.0 - p).ln()
            };
        }
    }
    for v in per_class.iter_mut() {
        *v = -*v / n;
    }
    let total = per_class.iter().sum();
    Ok(BceLoss { per_class, total })
}

/// Analytic gradient of [`weighted_bce`] total loss with respect to raw
/// scores, where `p = sigmoid(z)`.
///
/// Entry `(t, c)` is `-(1/N) * (w_c * y * (1 - p) - (1 - y) * p)` when `p`
/// lies strictly inside the clamp interval, and exactly zero otherwise
/// (the clamped loss is constant there).
pub fn weighted_bce_grad(
    scores: &ScoreStream,
    labels: &LabelMatrix,
    weights: &ClassWeights,
    epsilon: f64,
) -> Result<Vec<[f64; CLASS_COUNT]>> {
    check_epsilon(epsilon)?;
    check_pair("weighted_bce_grad", &scores.scores, &labels.labels)?;
    let n = scores.frame_count() as f64;
    let mut grad = Vec::with_capacity(scores.frame_count());
    for (row, lrow) in scores.scores.iter().zip(labels.labels.iter()) {
        let mut grow = [0.0f64; CLASS_COUNT];
        for c in 0..CLASS_COUNT {
            let p = sigmoid(row[c]);
            grow[c] = if p > epsilon && p < 1.0 - epsilon {
                if lrow[c] == 1 {
                    -weights.get(c) * (1.0 - p) / n
                } else {
                    p / n
                }
            } else {
                0.0
            };
        }
        grad.push(grow);
    }
    Ok(grad)
}

/// Focusing parameter for [`focal_loss`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FocalConfig {
    pub gamma: f64,
}

impl FocalConfig {
    pub fn new(gamma: f64) -> Result<Self> {
        if !gamma.is_finite() || gamma < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "focal gamma must be finite and >= 0, got {gamma}"
            )));
        }
        Ok(FocalConfig { gamma })
    }
}

impl Default for FocalConfig {
    fn default() -> Self {
        FocalConfig { gamma: 2.0 }
    }
}

/// Focal variant of the weighted BCE: each frame/class term is multiplied by
/// the modulating factor `(1 - p)^gamma` before averaging.
///
/// The factor applies to the positive and the negative term alike, so at
/// `gamma = 0` this reduces exactly to [`weighted_bce`]'s total.
pub fn focal_loss(
    probs: &ProbabilityStream,
    labels: &LabelMatrix,
    weights: &ClassWeights,
    config: &FocalConfig,
    epsilon: f64,
) -> Result<f64> {
    check_epsilon(epsilon)?;
    check_pair("focal_loss", &probs.probs, &labels.labels)?;
    let n = probs.frame_count() as f64;
    let mut per_class = [0.0f64; CLASS_COUNT];
    for (row, lrow) in probs.probs.iter().zip(labels.labels.iter()) {
        for c in 0..CLASS_COUNT {
            let p = row[c].clamp(epsilon, 1.0 - epsilon);
            let term = if lrow[c] == 1 {
                weights.get(c) * p.ln()
            } else {
                (1.0 - p).ln()
            };
            per_class[c] += (1.0 - p).powf(config.gamma) * term;
        }
    }
    let mut total = 0.0;
    for v in per_class.iter_mut() {
        *v = -*v / n;
        total += *v;
    }
    Ok(total)
}
