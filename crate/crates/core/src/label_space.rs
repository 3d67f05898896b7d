//! The 17-class label universe and the per-frame matrices every other
//! module consumes.
//!
//! Class indices are global and fixed: anatomy occupies `[0, 4]` in listing
//! order, pathology occupies `[5, 16]`. A frame matrix is row-major with one
//! row per frame and one column per class; frame indices are dense and
//! 0-based.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Violation, ViolationKind};

/// Number of anatomy classes (columns `[0, 4]`).
pub const ANATOMY_COUNT: usize = 5;
/// Number of pathology classes (columns `[5, 16]`).
pub const PATHOLOGY_COUNT: usize = 12;
/// Total class count; every frame row has exactly this many columns.
pub const CLASS_COUNT: usize = ANATOMY_COUNT + PATHOLOGY_COUNT;

/// Anatomy names used when no label-space configuration is supplied, in
/// transit order through the GI tract.
pub const DEFAULT_ANATOMY_NAMES: [&str; ANATOMY_COUNT] =
    ["mouth", "esophagus", "stomach", "small_intestine", "colon"];

/// Ordered names for the 5 anatomy and 12 pathology classes.
///
/// The ordering defines the global class indices, so two label spaces with
/// the same names in a different order are different spaces.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSpace {
    anatomy: Vec<String>,
    pathology: Vec<String>,
}

impl LabelSpace {
    /// Builds a label space from explicit name lists.
    ///
    /// Rejects wrong list lengths, empty names, and duplicates across the
    /// combined 17-name universe.
    pub fn new(anatomy: Vec<String>, pathology: Vec<String>) -> Result<Self> {
        if anatomy.len() != ANATOMY_COUNT {
            return Err(Error::InvalidLabelSpace(format!(
                "expected {ANATOMY_COUNT} anatomy names, got {}",
                anatomy.len()
            )));
        }
        if pathology.len() != PATHOLOGY_COUNT {
            return Err(Error::InvalidLabelSpace(format!(
                "expected {PATHOLOGY_COUNT} pathology names, got {}",
                pathology.len()
            )));
        }
        let mut seen = std::collections::HashSet::new();
        for name in anatomy.iter().chain(pathology.iter()) {
            if name.is_empty() {
                return Err(Error::InvalidLabelSpace("empty class name".into()));
            }
            if !seen.insert(name.as_str()) {
                return Err(Error::InvalidLabelSpace(format!("duplicate class name '{name}'")));
            }
        }
        Ok(LabelSpace { anatomy, pathology })
    }

    pub fn anatomy_names(&self) -> &[String] {
        &self.anatomy
    }

    pub fn pathology_names(&self) -> &[String] {
        &self.pathology
    }

    /// Total number of classes. Always [`CLASS_COUNT`]; provided so callers
    /// can stay agnostic of the constant.
    pub fn class_count(&self) -> usize {
        CLASS_COUNT
    }

    /// Name for a global class index.
    ///
    /// Panics if `index >= CLASS_COUNT`; indices out of range are programmer
    /// errors, not data errors.
    pub fn class_name(&self, index: usize) -> &str {
        if index < ANATOMY_COUNT {
            &self.anatomy[index]
        } else {
            &self.pathology[index - ANATOMY_COUNT]
        }
    }

    /// Global class index for a name, if the name is in the space.
    pub fn class_index(&self, name: &str) -> Option<usize> {
        self.anatomy
            .iter()
            .chain(self.pathology.iter())
            .position(|n| n == name)
    }

    pub fn is_anatomy(index: usize) -> bool {
        index < ANATOMY_COUNT
    }

    pub fn is_pathology(index: usize) -> bool {
        (ANATOMY_COUNT..CLASS_COUNT).contains(&index)
    }

    /// Global indices of the anatomy columns.
    pub fn anatomy_indices() -> std::ops::Range<usize> {
        0..ANATOMY_COUNT
    }

    /// Global indices of the pathology columns.
    pub fn pathology_indices() -> std::ops::Range<usize> {
        ANATOMY_COUNT..CLASS_COUNT
    }
}

impl Default for LabelSpace {
    /// Default space: canonical anatomy names plus `path_01` .. `path_12`.
    fn default() -> Self {
        let anatomy = DEFAULT_ANATOMY_NAMES.iter().map(|s| s.to_string()).collect();
        let pathology = (1..=PATHOLOGY_COUNT).map(|i| format!("path_{i:02}")).collect();
        LabelSpace { anatomy, pathology }
    }
}

/// Per-frame multi-label probability matrix for one video.
///
/// `probs[t][c]` is the probability of class `c` at frame `t`. Rows are kept
/// as parsed so that [`ProbabilityStream::validate`] can report defects at
/// their exact position; operations downstream of validation may index rows
/// directly.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityStream {
    pub video_id: String,
    pub probs: Vec<Vec<f64>>,
}

impl ProbabilityStream {
    pub fn new(video_id: impl Into<String>, probs: Vec<Vec<f64>>) -> Self {
        ProbabilityStream { video_id: video_id.into(), probs }
    }

    pub fn frame_count(&self) -> usize {
        self.probs.len()
    }

    /// Checks that every row has one column per class of `space` and every
    /// value is a finite probability in `[0, 1]`.
    ///
    /// On failure the error lists all violations with row and column
    /// positions. A stream with zero frames is valid.
    pub fn validate(&self, space: &LabelSpace) -> Result<()> {
        let violations = collect_real_violations(&self.probs, space.class_count(), true);
        wrap_violations(&self.video_id, violations)
    }
}

/// Per-frame raw score (logit) matrix for one video. Any finite real is a
/// legal score.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreStream {
    pub video_id: String,
    pub scores: Vec<Vec<f64>>,
}

impl ScoreStream {
    pub fn new(video_id: impl Into<String>, scores: Vec<Vec<f64>>) -> Self {
        ScoreStream { video_id: video_id.into(), scores }
    }

    pub fn frame_count(&self) -> usize {
        self.scores.len()
    }

    /// Checks row widths and that every score is finite.
    pub fn validate(&self) -> Result<()> {
        let violations = collect_real_violations(&self.scores, CLASS_COUNT, false);
        wrap_violations(&self.video_id, violations)
    }
}

/// Per-frame binary ground-truth matrix for one video; entries are 0 or 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMatrix {
    pub video_id: String,
    pub labels: Vec<Vec<u8>>,
}

impl LabelMatrix {
    pub fn new(video_id: impl Into<String>, labels: Vec<Vec<u8>>) -> Self {
        LabelMatrix { video_id: video_id.into(), labels }
    }

    pub fn frame_count(&self) -> usize {
        self.labels.len()
    }

    /// Checks row widths and that every entry is 0 or 1.
    pub fn validate(&self) -> Result<()> {
        let mut violations = Vec::new();
        for (row, r) in self.labels.iter().enumerate() {
            if r.len() != CLASS_COUNT {
                violations.push(Violation {
                    row,
                    col: None,
                    kind: ViolationKind::RowWidth { found: r.len(), expected: CLASS_COUNT },
                });
                continue;
            }
            for (col, &v) in r.iter().enumerate() {
                if v > 1 {
                    violations.push(Violation {
                        row,
                        col: Some(col),
                        kind: ViolationKind::NotBinary { value: v },
                    });
                }
            }
        }
        wrap_violations(&self.video_id, violations)
    }
}

fn collect_real_violations(
    rows: &[Vec<f64>],
    expected_width: usize,
    unit_range: bool,
) -> Vec<Violation> {
    let mut violations = Vec::new();
    for (row, r) in rows.iter().enumerate() {
        if r.len() != expected_width {
            violations.push(Violation {
                row,
                col: None,
                kind: ViolationKind::RowWidth { found: r.len(), expected: expected_width },
            });
            continue;
        }
        for (col, &v) in r.iter().enumerate() {
            if !v.is_finite() {
                violations.push(Violation { row, col: Some(col), kind: ViolationKind::NonFinite });
            } else if unit_range && !(0.0..=1.0).contains(&v) {
                violations.push(Violation {
                    row,
                    col: Some(col),
                    kind: ViolationKind::OutOfRange { value: v },
                });
            }
        }
    }
    violations
}

fn wrap_violations(video_id: &str, violations: Vec<Violation>) -> Result<()> {
    if violations.is_empty() {
        Ok(())
    } else {
        Err(Error::InvalidStream { video_id: video_id.into(), violations })
    }
}
