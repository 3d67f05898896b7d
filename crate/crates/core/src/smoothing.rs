//! Anatomy track extraction and majority-vote smoothing.
//!
//! The anatomy columns behave as a single-label track: exactly one organ is
//! visible per frame. The track is the argmax over the anatomy columns,
//! cleaned up by a windowed majority vote that removes isolated flickers
//! without shifting segment boundaries by more than the window radius.

use crate::label_space::{ProbabilityStream, ANATOMY_COUNT};

/// Per-frame anatomy label track; entries index the anatomy classes `[0, 4]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnatomyTrack {
    pub video_id: String,
    pub labels: Vec<u8>,
}

impl AnatomyTrack {
    pub fn new(video_id: impl Into<String>, labels: Vec<u8>) -> Self {
        AnatomyTrack { video_id: video_id.into(), labels }
    }

    pub fn frame_count(&self) -> usize {
        self.labels.len()
    }
}

/// Majority-vote window; the window at frame `t` covers `[t - radius,
/// t + radius]`, truncated at the ends of the video.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VoteWindow {
    pub radius: usize,
}

impl Default for VoteWindow {
    fn default() -> Self {
        VoteWindow { radius: 1 }
    }
}

/// Picks the highest-probability anatomy class per frame.
///
/// Ties go to the lowest class index. Expects a validated stream; rows must
/// have at least the anatomy columns.
pub fn anatomy_argmax(stream: &ProbabilityStream) -> AnatomyTrack {
    let labels = stream
        .probs
        .iter()
        .map(|row| {
            let mut best = 0usize;
            for k in 1..ANATOMY_COUNT {
                if row[k] > row[best] {
                    best = k;
                }
            }
            best as u8
        })
        .collect();
    AnatomyTrack { video_id: stream.video_id.clone(), labels }
}

/// Windowed majority vote over an anatomy track.
///
/// Each output frame takes the most frequent label in its truncated window.
/// On a tie the centre frame's label wins if it is among the tied maxima;
/// otherwise the lowest tied label index wins. Radius 0 is the identity.
pub fn vote_smooth(track: &AnatomyTrack, window: &VoteWindow) -> AnatomyTrack {
    let n = track.labels.len();
    if n == 0 {
        return track.clone();
    }
    let r = window.radius;
    let mut out = Vec::with_capacity(n);
    for t in 0..n {
        let lo = t.saturating_sub(r);
        let hi = (t + r).min(n - 1);
        let mut counts = [0u32; ANATOMY_COUNT];
        for &label in &track.labels[lo..=hi] {
            counts[label as usize] += 1;
        }
        let best = *counts.iter().max().expect("non-empty window");
        let centre = track.labels[t] as usize;
        let winner = if counts[centre] == best {
            centre
        } else {
            counts.iter().position(|&c| c == best).expect("max exists")
        };
        out.push(winner as u8);
    }
    AnatomyTrack { video_id: track.video_id.clone(), labels: out }
}
