//! Per-class temporal decoders: probability streams in, binary activity out.
//!
//! Two interchangeable decoders are provided. Hysteresis runs a two-threshold
//! state machine per class and then deletes runs shorter than a minimum
//! length. The HMM decoder finds the exact maximum-likelihood ON/OFF state
//! sequence of a two-state chain via Viterbi. Both treat classes
//! independently.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::label_space::{LabelMatrix, ProbabilityStream, ScoreStream, CLASS_COUNT};
use crate::loss::{sigmoid, DEFAULT_PROB_EPSILON};

/// Per-frame binary activity over all 17 classes; `active[t][c]` means class
/// `c` is ON at frame `t`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActivityMatrix {
    pub video_id: String,
    pub active: Vec<[bool; CLASS_COUNT]>,
}

impl ActivityMatrix {
    pub fn empty(video_id: impl Into<String>, frames: usize) -> Self {
        ActivityMatrix { video_id: video_id.into(), active: vec![[false; CLASS_COUNT]; frames] }
    }

    pub fn frame_count(&self) -> usize {
        self.active.len()
    }

    /// Converts a validated binary label matrix into activity form.
    pub fn from_label_matrix(labels: &LabelMatrix) -> Result<Self> {
        labels.validate()?;
        let active = labels
            .labels
            .iter()
            .map(|row| {
                let mut a = [false; CLASS_COUNT];
                for (c, &y) in row.iter().enumerate() {
                    a[c] = y == 1;
                }
                a
            })
            .collect();
        Ok(ActivityMatrix { video_id: labels.video_id.clone(), active })
    }

    pub fn to_label_matrix(&self) -> LabelMatrix {
        let labels = self
            .active
            .iter()
            .map(|row| row.iter().map(|&b| u8::from(b)).collect())
            .collect();
        LabelMatrix { video_id: self.video_id.clone(), labels }
    }

    /// Class indices active at frame `t`, ascending.
    pub fn active_set(&self, t: usize) -> Vec<usize> {
        (0..CLASS_COUNT).filter(|&c| self.active[t][c]).collect()
    }
}

/// Two-threshold decoder parameters.
///
/// A class switches ON at `p >= t_on` and OFF at `p < t_off`; keeping
/// `t_off <= t_on` gives the machine its flicker-absorbing dead zone.
/// Runs shorter than `min_len` frames are deleted afterwards.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HysteresisConfig {
    pub t_on: f64,
    pub t_off: f64,
    pub min_len: usize,
}

impl HysteresisConfig {
    pub fn new(t_on: f64, t_off: f64, min_len: usize) -> Result<Self> {
        if !t_on.is_finite() || !t_off.is_finite() || !(0.0..=1.0).contains(&t_on) || t_off < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "hysteresis thresholds must lie in [0, 1], got t_on {t_on}, t_off {t_off}"
            )));
        }
        if t_off > t_on {
            return Err(Error::InvalidConfig(format!(
                "hysteresis requires t_off <= t_on, got t_on {t_on}, t_off {t_off}"
            )));
        }
        if min_len == 0 {
            return Err(Error::InvalidConfig("hysteresis min_len must be >= 1".into()));
        }
        Ok(HysteresisConfig { t_on, t_off, min_len })
    }
}

impl Default for HysteresisConfig {
    fn default() -> Self {
        HysteresisConfig { t_on: 0.5, t_off: 0.3, min_len: 1 }
    }
}

/// Two-state HMM decoder parameters.
///
/// The transition matrix is symmetric with `stay_prob` on the diagonal;
/// `temperature` divides raw scores before the logistic map when decoding
/// score streams (it has no effect on probability inputs).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HmmConfig {
    pub stay_prob: f64,
    pub temperature: f64,
}

impl HmmConfig {
    pub fn new(stay_prob: f64, temperature: f64) -> Result<Self> {
        if !stay_prob.is_finite() || stay_prob <= 0.0 || stay_prob >= 1.0 {
            return Err(Error::InvalidConfig(format!(
                "stay_prob must lie strictly inside (0, 1), got {stay_prob}"
            )));
        }
        if !temperature.is_finite() || temperature <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "temperature must be finite and > 0, got {temperature}"
            )));
        }
        Ok(HmmConfig { stay_prob, temperature })
    }
}

impl Default for HmmConfig {
    fn default() -> Self {
        HmmConfig { stay_prob: 0.9, temperature: 1.0 }
    }
}

/// Runs the hysteresis state machine independently for each class in
/// `classes`; classes not listed stay OFF everywhere.
///
/// Each machine starts OFF before frame 0. After thresholding, ON-runs
/// shorter than `min_len` are removed.
pub fn hysteresis_decode(
    stream: &ProbabilityStream,
    config: &HysteresisConfig,
    classes: &BTreeSet<usize>,
) -> ActivityMatrix {
    let n = stream.frame_count();
    let mut out = ActivityMatrix::empty(stream.video_id.clone(), n);
    for &c in classes {
        debug_assert!(c < CLASS_COUNT);
        let mut col = vec![false; n];
        let mut on = false;
        for (cell, row) in col.iter_mut().zip(stream.probs.iter()) {
            let p = row[c];
            if on {
                if p < config.t_off {
                    on = false;
                }
            } else if p >= config.t_on {
                on = true;
            }
            *cell = on;
        }
        erase_short_runs(&mut col, config.min_len);
        for (row, &v) in out.active.iter_mut().zip(col.iter()) {
            row[c] = v;
        }
    }
    out
}

fn erase_short_runs(col: &mut [bool], min_len: usize) {
    if min_len <= 1 {
        return;
    }
    let n = col.len();
    let mut t = 0;
    while t < n {
        if col[t] {
            let start = t;
            while t < n && col[t] {
                t += 1;
            }
            if t - start < min_len {
                col[start..t].fill(false);
            }
        } else {
            t += 1;
        }
    }
}

/// Maps raw scores to probabilities via `sigmoid(z / temperature)`.
pub fn temperature_scale(scores: &ScoreStream, temperature: f64) -> Result<ProbabilityStream> {
    if !temperature.is_finite() || temperature <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "temperature must be finite and > 0, got {temperature}"
        )));
    }
    let probs = scores
        .scores
        .iter()
        .map(|row| row.iter().map(|&z| sigmoid(z / temperature)).collect())
        .collect();
    Ok(ProbabilityStream { video_id: scores.video_id.clone(), probs })
}

/// Exact maximum-likelihood ON/OFF decoding of each class under a two-state
/// symmetric chain.
///
/// State 0 is OFF, state 1 is ON. The initial distribution is uniform,
/// emissions are `p` for ON and `1 - p` for OFF (clamped away from zero so
/// hard 0/1 probabilities stay finite), and the chain stays in its current
/// state with probability `stay_prob`. All score ties resolve toward OFF.
pub fn viterbi_decode(
    stream: &ProbabilityStream,
    config: &HmmConfig,
    classes: &BTreeSet<usize>,
) -> ActivityMatrix {
    let n = stream.frame_count();
    let mut out = ActivityMatrix::empty(stream.video_id.clone(), n);
    if n == 0 {
        return out;
    }
    let ln_stay = config.stay_prob.ln();
    let ln_switch = (1.0 - config.stay_prob).ln();
    let ln_init = 0.5f64.ln();
    let eps = DEFAULT_PROB_EPSILON;
    for &c in classes {
        debug_assert!(c < CLASS_COUNT);
        // delta[s] is the best log score of any path ending in state s;
        // prev[t][s] records the predecessor state that achieved it.
        let mut prev = vec![[0u8; 2]; n];
        let p0 = stream.probs[0][c].clamp(eps, 1.0 - eps);
        let mut delta = [ln_init + (1.0 - p0).ln(), ln_init + p0.ln()];
        for (back, row) in prev[1..].iter_mut().zip(stream.probs[1..].iter()) {
            let p = row[c].clamp(eps, 1.0 - eps);
            let emit = [(1.0 - p).ln(), p.ln()];
            let mut next = [0.0f64; 2];
            for s in 0..2 {
                // Transition into s: from OFF uses row 0, from ON row 1.
                let from_off = delta[0] + if s == 0 { ln_stay } else { ln_switch };
                let from_on = delta[1] + if s == 1 { ln_stay } else { ln_switch };
                if from_off >= from_on {
                    next[s] = from_off + emit[s];
                    back[s] = 0;
                } else {
                    next[s] = from_on + emit[s];
                    back[s] = 1;
                }
            }
            delta = next;
        }
        let mut state: usize = if delta[0] >= delta[1] { 0 } else { 1 };
        for t in (0..n).rev() {
            out.active[t][c] = state == 1;
            if t > 0 {
                state = prev[t][state] as usize;
            }
        }
    }
    out
}
