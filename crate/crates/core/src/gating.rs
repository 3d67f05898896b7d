//! Anatomy-conditioned gating of pathology probabilities.
//!
//! A gating prior says, for each pathology class, in which anatomical
//! regions that finding is plausible. Gating zeroes pathology probabilities
//! on frames whose (smoothed) anatomy label falls outside the allowed set;
//! allowed frames and all anatomy columns pass through untouched.

use crate::error::{Error, Result};
use crate::label_space::{ProbabilityStream, ANATOMY_COUNT, CLASS_COUNT, PATHOLOGY_COUNT};
use crate::smoothing::AnatomyTrack;

const ALL_ANATOMIES: u8 = (1 << ANATOMY_COUNT) - 1;

/// Allowed-anatomy sets per pathology class, stored as 5-bit masks.
///
/// Pathology classes are addressed by their global index in `[5, 16]`.
/// An empty allowed set is legal and suppresses the class everywhere.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GatingPrior {
    allowed: [u8; PATHOLOGY_COUNT],
}

impl GatingPrior {
    /// Every pathology allowed in every anatomy; gating with this prior is
    /// the identity.
    pub fn permissive() -> Self {
        GatingPrior { allowed: [ALL_ANATOMIES; PATHOLOGY_COUNT] }
    }

    /// Replaces the allowed-anatomy set for one pathology class.
    pub fn set_allowed(&mut self, pathology: usize, anatomies: &[usize]) -> Result<()> {
        let slot = Self::slot(pathology)?;
        let mut mask = 0u8;
        for &a in anatomies {
            if a >= ANATOMY_COUNT {
                return Err(Error::InvalidConfig(format!(
                    "anatomy index {a} out of range [0, {}]",
                    ANATOMY_COUNT - 1
                )));
            }
            mask |= 1 << a;
        }
        self.allowed[slot] = mask;
        Ok(())
    }

    /// Whether `pathology` (global class index) may occur in `anatomy`.
    pub fn allows(&self, pathology: usize, anatomy: usize) -> bool {
        debug_assert!(anatomy < ANATOMY_COUNT);
        let slot = pathology - ANATOMY_COUNT;
        self.allowed[slot] & (1 << anatomy) != 0
    }

    /// Sorted anatomy indices allowed for one pathology class.
    pub fn allowed_anatomies(&self, pathology: usize) -> Vec<usize> {
        let slot = pathology - ANATOMY_COUNT;
        (0..ANATOMY_COUNT).filter(|a| self.allowed[slot] & (1 << a) != 0).collect()
    }

    pub fn is_permissive(&self) -> bool {
        self.allowed.iter().all(|&m| m == ALL_ANATOMIES)
    }

    fn slot(pathology: usize) -> Result<usize> {
        if !(ANATOMY_COUNT..CLASS_COUNT).contains(&pathology) {
            return Err(Error::InvalidConfig(format!(
                "pathology class index {pathology} out of range [{ANATOMY_COUNT}, {}]",
                CLASS_COUNT - 1
            )));
        }
        Ok(pathology - ANATOMY_COUNT)
    }
}

impl Default for GatingPrior {
    fn default() -> Self {
        GatingPrior::permissive()
    }
}

/// Zeroes pathology probabilities on frames whose anatomy label is outside
/// the prior's allowed set for that pathology.
///
/// The gate is hard: a probability either passes unchanged or becomes 0.
/// Anatomy columns are never modified. The track must be frame-aligned with
/// the stream.
pub fn apply_gate(
    stream: &ProbabilityStream,
    track: &AnatomyTrack,
    prior: &GatingPrior,
) -> Result<ProbabilityStream> {
    if stream.frame_count() != track.frame_count() {
        return Err(Error::DimensionMismatch {
            context: "apply_gate".into(),
            detail: format!(
                "stream has {} frames, anatomy track has {}",
                stream.frame_count(),
                track.frame_count()
            ),
        });
    }
    let mut probs = stream.probs.clone();
    for (row, &anatomy) in probs.iter_mut().zip(track.labels.iter()) {
        for (j, cell) in row[ANATOMY_COUNT..].iter_mut().enumerate() {
            if !prior.allows(ANATOMY_COUNT + j, anatomy as usize) {
                *cell = 0.0;
            }
        }
    }
    Ok(ProbabilityStream { video_id: stream.video_id.clone(), probs })
}
