//! gievents: temporal event decoding and evaluation for gastrointestinal
//! video probability streams.
//!
//! The input is a per-frame matrix of 17 class probabilities (5 anatomy
//! classes forming a single-label track, 12 independent pathology classes).
//! This crate turns such streams into temporally localized, scored events
//! and measures them against ground truth:
//!
//! * [`smoothing`] extracts and majority-vote-smooths the anatomy track;
//! * [`gating`] zeroes pathology probabilities in anatomically implausible
//!   regions;
//! * [`decode`] binarizes each pathology class with hysteresis or a
//!   two-state Viterbi decoder;
//! * [`events`] composes frame activity into events, either fragment-style
//!   (matching how ground truth is annotated) or per label run;
//! * [`eval`] scores predictions with temporal-IoU average precision and
//!   mAP at multiple thresholds;
//! * [`loss`] provides the class-imbalance-aware training losses with
//!   analytic, finite-difference-checked gradients;
//! * [`synth`] generates seeded synthetic videos for benchmarks and tests;
//! * [`io`] and [`config`] define the CSV/JSON/TOML file formats;
//! * [`pipeline`] chains the decode stages end to end.
//!
//! All algorithms are deterministic: equal inputs produce bit-identical
//! outputs, including serialized files.

pub mod config;
pub mod decode;
pub mod error;
pub mod eval;
pub mod events;
pub mod gating;
pub mod io;
pub mod label_space;
pub mod loss;
pub mod pipeline;
pub mod smoothing;
pub mod synth;

pub use config::RunConfig;
pub use decode::{
    hysteresis_decode, temperature_scale, viterbi_decode, ActivityMatrix, HmmConfig,
    HysteresisConfig,
};
pub use error::{Error, Result, Violation, ViolationKind};
pub use eval::{
    average_precision, evaluate, segment_count_report, span_iou, temporal_iou, EvalConfig,
    EvalReport, GtInstance, ScoredInstance, Span,
};
pub use events::{
    compose_gt_style, compose_per_label, event_scores, Event, EventSet,
};
pub use gating::{apply_gate, GatingPrior};
pub use label_space::{
    LabelMatrix, LabelSpace, ProbabilityStream, ScoreStream, ANATOMY_COUNT, CLASS_COUNT,
    PATHOLOGY_COUNT,
};
pub use loss::{
    class_weights, focal_loss, sigmoid, weighted_bce, weighted_bce_grad, BceLoss, ClassCounts,
    ClassWeights, FocalConfig, DEFAULT_PROB_EPSILON,
};
pub use pipeline::{decode_scores, decode_stream, CompositionMode, DecoderKind, PipelineOptions};
pub use smoothing::{anatomy_argmax, vote_smooth, AnatomyTrack, VoteWindow};
pub use synth::{synthesize, SyntheticData, SyntheticSpec};
