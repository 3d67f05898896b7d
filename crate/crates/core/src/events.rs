//! Temporal events and the two ways of composing them from frame activity.
//!
//! An event is one label over an inclusive frame interval. Fragment-style
//! composition starts a new event for every active label whenever the set of
//! active labels changes, which is how the ground-truth annotations are cut;
//! adjacent same-label events across such a boundary are deliberately kept
//! separate. Per-label composition is the plain run-length alternative where
//! each maximal ON-run becomes one event.

use crate::decode::ActivityMatrix;
use crate::error::{Error, Result};
use crate::label_space::{ProbabilityStream, CLASS_COUNT};

/// One labelled temporal segment with inclusive 0-based frame bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    /// Global class index.
    pub label: usize,
    pub start_frame: usize,
    pub end_frame: usize,
    /// Mean framewise probability over the span; absent on ground truth.
    pub score: Option<f64>,
}

impl Event {
    pub fn new(label: usize, start_frame: usize, end_frame: usize) -> Self {
        Event { label, start_frame, end_frame, score: None }
    }

    /// Number of frames covered, inclusive of both ends.
    pub fn frame_len(&self) -> usize {
        self.end_frame - self.start_frame + 1
    }
}

/// All events of one video plus the video's frame count.
#[derive(Debug, Clone, PartialEq)]
pub struct EventSet {
    pub video_id: String,
    pub frame_count: usize,
    pub events: Vec<Event>,
}

impl EventSet {
    /// Validates bounds and per-label ordering.
    ///
    /// Events of one label must be sorted by start and pairwise disjoint;
    /// events of different labels may overlap freely. Errors name the
    /// offending event index.
    pub fn new(video_id: impl Into<String>, frame_count: usize, events: Vec<Event>) -> Result<Self> {
        let video_id = video_id.into();
        let set = EventSet { video_id, frame_count, events };
        set.check()?;
        Ok(set)
    }

    fn check(&self) -> Result<()> {
        let reject = |reason: String| {
            Err(Error::InvalidEventSet { video_id: self.video_id.clone(), reason })
        };
        for (i, ev) in self.events.iter().enumerate() {
            if ev.label >= CLASS_COUNT {
                return reject(format!("event {i}: label index {} out of range", ev.label));
            }
            if ev.start_frame > ev.end_frame {
                return reject(format!(
                    "event {i}: start_frame {} > end_frame {}",
                    ev.start_frame, ev.end_frame
                ));
            }
            if ev.end_frame >= self.frame_count {
                return reject(format!(
                    "event {i}: end_frame {} outside video of {} frames",
                    ev.end_frame, self.frame_count
                ));
            }
            if let Some(s) = ev.score {
                if !s.is_finite() || !(0.0..=1.0).contains(&s) {
                    return reject(format!("event {i}: score {s} outside [0, 1]"));
                }
            }
        }
        let mut last_per_label: [Option<(usize, usize)>; CLASS_COUNT] = [None; CLASS_COUNT];
        for (i, ev) in self.events.iter().enumerate() {
            if let Some((j, prev_end)) = last_per_label[ev.label] {
                if ev.start_frame <= prev_end {
                    return reject(format!(
                        "events {j} and {i} for label {} overlap or are out of order",
                        ev.label
                    ));
                }
            }
            last_per_label[ev.label] = Some((i, ev.end_frame));
        }
        Ok(())
    }

    pub fn events_for(&self, label: usize) -> impl Iterator<Item = &Event> {
        self.events.iter().filter(move |e| e.label == label)
    }

    /// Copy with all scores dropped, e.g. for comparing predictions against
    /// ground truth structurally.
    pub fn without_scores(&self) -> EventSet {
        EventSet {
            video_id: self.video_id.clone(),
            frame_count: self.frame_count,
            events: self
                .events
                .iter()
                .map(|e| Event::new(e.label, e.start_frame, e.end_frame))
                .collect(),
        }
    }

    /// Paints every event back onto a frame/class activity matrix.
    pub fn rasterize(&self) -> ActivityMatrix {
        let mut m = ActivityMatrix::empty(self.video_id.clone(), self.frame_count);
        for ev in &self.events {
            for t in ev.start_frame..=ev.end_frame {
                m.active[t][ev.label] = true;
            }
        }
        m
    }
}

/// Fragment-style composition: a new run starts whenever the set of active
/// labels changes, and every label active in a run gets its own event over
/// exactly that run.
///
/// Events come out ordered by run start, then by label. Frames with no
/// active label produce nothing.
pub fn compose_gt_style(activity: &ActivityMatrix) -> EventSet {
    let n = activity.frame_count();
    let mut events = Vec::new();
    let mut run_start = 0usize;
    for t in 1..=n {
        let boundary = t == n || activity.active[t] != activity.active[t - 1];
        if !boundary {
            continue;
        }
        for c in 0..CLASS_COUNT {
            if activity.active[run_start][c] {
                events.push(Event::new(c, run_start, t - 1));
            }
        }
        run_start = t;
    }
    EventSet { video_id: activity.video_id.clone(), frame_count: n, events }
}

/// Run-length composition: each maximal ON-run of each label becomes one
/// event. Events come out grouped by label, runs in time order.
pub fn compose_per_label(activity: &ActivityMatrix) -> EventSet {
    let n = activity.frame_count();
    let mut events = Vec::new();
    for c in 0..CLASS_COUNT {
        let mut t = 0;
        while t < n {
            if activity.active[t][c] {
                let start = t;
                while t < n && activity.active[t][c] {
                    t += 1;
                }
                events.push(Event::new(c, start, t - 1));
            } else {
                t += 1;
            }
        }
    }
    EventSet { video_id: activity.video_id.clone(), frame_count: n, events }
}

/// Attaches to every event the mean probability of its label over its span,
/// read from `probs`.
///
/// Every event must fit inside the stream; the error names the first event
/// that does not.
pub fn event_scores(events: &EventSet, probs: &ProbabilityStream) -> Result<EventSet> {
    let n = probs.frame_count();
    let mut scored = events.clone();
    for (i, ev) in scored.events.iter_mut().enumerate() {
        if ev.end_frame >= n {
            return Err(Error::InvalidInput(format!(
                "event {i} ([{}, {}]) extends past the {} frame stream",
                ev.start_frame, ev.end_frame, n
            )));
        }
        let sum: f64 = (ev.start_frame..=ev.end_frame).map(|t| probs.probs[t][ev.label]).sum();
        ev.score = Some(sum / ev.frame_len() as f64);
    }
    Ok(scored)
}
