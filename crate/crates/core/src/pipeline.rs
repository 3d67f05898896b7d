//! End-to-end decoding: probability stream in, scored event set out.
//!
//! The stages run in a fixed order: validation, anatomy argmax, majority
//! vote, optional gating, per-class pathology decoding, recombination with
//! the anatomy track, composition into events, and scoring. Anatomy enters
//! the activity matrix as the smoothed single-label track, not through the
//! decoder, so exactly one anatomy class is active per frame.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::decode::{
    hysteresis_decode, temperature_scale, viterbi_decode, HmmConfig, HysteresisConfig,
};
use crate::error::{Error, Result};
use crate::events::{compose_gt_style, compose_per_label, event_scores, EventSet};
use crate::gating::{apply_gate, GatingPrior};
use crate::label_space::{LabelSpace, ProbabilityStream, ScoreStream};
use crate::smoothing::{anatomy_argmax, vote_smooth, VoteWindow};

/// Which per-class decoder turns probabilities into activity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecoderKind {
    Hysteresis,
    Viterbi,
}

impl FromStr for DecoderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hysteresis" => Ok(DecoderKind::Hysteresis),
            "viterbi" => Ok(DecoderKind::Viterbi),
            other => Err(Error::InvalidConfig(format!(
                "unknown decoder '{other}' (expected 'hysteresis' or 'viterbi')"
            ))),
        }
    }
}

impl fmt::Display for DecoderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DecoderKind::Hysteresis => "hysteresis",
            DecoderKind::Viterbi => "viterbi",
        })
    }
}

/// How frame activity is cut into events.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompositionMode {
    /// Fragment at every change of the active label set, the way the
    /// ground-truth annotations are cut.
    GtStyle,
    /// One event per maximal single-label run.
    PerLabel,
}

impl FromStr for CompositionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gt_style" => Ok(CompositionMode::GtStyle),
            "per_label" => Ok(CompositionMode::PerLabel),
            other => Err(Error::InvalidConfig(format!(
                "unknown composition mode '{other}' (expected 'gt_style' or 'per_label')"
            ))),
        }
    }
}

impl fmt::Display for CompositionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CompositionMode::GtStyle => "gt_style",
            CompositionMode::PerLabel => "per_label",
        })
    }
}

/// Everything the decode pipeline needs besides the data.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOptions {
    pub vote_radius: usize,
    /// `None` disables gating entirely.
    pub gating: Option<GatingPrior>,
    pub decoder: DecoderKind,
    pub hysteresis: HysteresisConfig,
    pub hmm: HmmConfig,
    pub composition: CompositionMode,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            vote_radius: 1,
            gating: Some(GatingPrior::permissive()),
            decoder: DecoderKind::Hysteresis,
            hysteresis: HysteresisConfig::default(),
            hmm: HmmConfig::default(),
            composition: CompositionMode::GtStyle,
        }
    }
}

impl PipelineOptions {
    pub fn from_config(config: &RunConfig) -> Self {
        PipelineOptions {
            vote_radius: config.vote_radius,
            gating: config.gating_enabled.then(|| config.prior.clone()),
            decoder: config.decoder,
            hysteresis: config.hysteresis,
            hmm: config.hmm,
            composition: config.composition,
        }
    }
}

/// Decodes one probability stream into a scored event set.
///
/// Event scores are mean framewise probabilities taken from the gated
/// stream, so a gated-away detection cannot smuggle its confidence back in
/// through scoring.
pub fn decode_stream(
    stream: &ProbabilityStream,
    space: &LabelSpace,
    options: &PipelineOptions,
) -> Result<EventSet> {
    stream.validate(space)?;
    let track = vote_smooth(&anatomy_argmax(stream), &VoteWindow { radius: options.vote_radius });
    let gated = match &options.gating {
        Some(prior) => apply_gate(stream, &track, prior)?,
        None => stream.clone(),
    };
    let pathology_classes: BTreeSet<usize> = LabelSpace::pathology_indices().collect();
    let mut activity = match options.decoder {
        DecoderKind::Hysteresis => {
            hysteresis_decode(&gated, &options.hysteresis, &pathology_classes)
        }
        DecoderKind::Viterbi => viterbi_decode(&gated, &options.hmm, &pathology_classes),
    };
    for (t, &anatomy) in track.labels.iter().enumerate() {
        activity.active[t][anatomy as usize] = true;
    }
    let composed = match options.composition {
        CompositionMode::GtStyle => compose_gt_style(&activity),
        CompositionMode::PerLabel => compose_per_label(&activity),
    };
    event_scores(&composed, &gated)
}

/// Decodes a raw score stream: scores become probabilities via
/// `sigmoid(z / temperature)` (the temperature from the HMM options, 1.0 by
/// default), then the probability pipeline runs unchanged.
pub fn decode_scores(
    scores: &ScoreStream,
    space: &LabelSpace,
    options: &PipelineOptions,
) -> Result<EventSet> {
    scores.validate()?;
    let probs = temperature_scale(scores, options.hmm.temperature)?;
    decode_stream(&probs, space, options)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::label_space::{ANATOMY_COUNT, CLASS_COUNT};
    use crate::loss::sigmoid;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_probs(seed: u64, n: usize) -> ProbabilityStream {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = (0..n).map(|_| (0..CLASS_COUNT).map(|_| rng.random()).collect()).collect();
        ProbabilityStream::new("v", rows)
    }

    #[test]
    fn decoder_and_composition_parse_and_print() {
        assert_eq!("hysteresis".parse::<DecoderKind>().unwrap(), DecoderKind::Hysteresis);
        assert_eq!("viterbi".parse::<DecoderKind>().unwrap(), DecoderKind::Viterbi);
        assert!("vit".parse::<DecoderKind>().is_err());
        assert_eq!(DecoderKind::Viterbi.to_string(), "viterbi");
        assert_eq!("gt_style".parse::<CompositionMode>().unwrap(), CompositionMode::GtStyle);
        assert_eq!("per_label".parse::<CompositionMode>().unwrap(), CompositionMode::PerLabel);
        assert!("runs".parse::<CompositionMode>().is_err());
        assert_eq!(CompositionMode::PerLabel.to_string(), "per_label");
    }

    #[test]
    fn every_frame_gets_exactly_one_anatomy_event_cover() {
        let stream = random_probs(23, 200);
        let set = decode_stream(&stream, &LabelSpace::default(), &PipelineOptions::default())
            .unwrap();
        let raster = set.rasterize();
        for t in 0..stream.frame_count() {
            let anatomy_on =
                (0..ANATOMY_COUNT).filter(|&a| raster.active[t][a]).count();
            assert_eq!(anatomy_on, 1, "frame {t}");
        }
    }

    #[test]
    fn all_events_carry_scores_within_unit_range() {
        let stream = random_probs(24, 150);
        let set = decode_stream(&stream, &LabelSpace::default(), &PipelineOptions::default())
            .unwrap();
        assert!(!set.events.is_empty());
        for ev in &set.events {
            let s = ev.score.expect("pipeline scores every event");
            assert!((0.0..=1.0).contains(&s));
        }
    }

    #[test]
    fn invalid_stream_is_rejected_up_front() {
        let mut stream = random_probs(25, 5);
        stream.probs[3][8] = 1.5;
        let err = decode_stream(&stream, &LabelSpace::default(), &PipelineOptions::default())
            .unwrap_err();
        assert!(matches!(err, Error::InvalidStream { .. }));
    }

    #[test]
    fn empty_stream_decodes_to_empty_set() {
        let stream = ProbabilityStream::new("v", Vec::new());
        let set = decode_stream(&stream, &LabelSpace::default(), &PipelineOptions::default())
            .unwrap();
        assert_eq!(set.frame_count, 0);
        assert!(set.events.is_empty());
    }

    #[test]
    fn score_route_at_unit_temperature_matches_probability_route() {
        let mut rng = ChaCha8Rng::seed_from_u64(26);
        let z: Vec<Vec<f64>> = (0..60)
            .map(|_| (0..CLASS_COUNT).map(|_| rng.random_range(-4.0..4.0)).collect())
            .collect();
        let p: Vec<Vec<f64>> =
            z.iter().map(|row| row.iter().map(|&v| sigmoid(v)).collect()).collect();
        let space = LabelSpace::default();
        let options = PipelineOptions::default();
        let via_scores =
            decode_scores(&ScoreStream::new("v", z), &space, &options).unwrap();
        let via_probs =
            decode_stream(&ProbabilityStream::new("v", p), &space, &options).unwrap();
        assert_eq!(via_scores, via_probs);
    }

    #[test]
    fn viterbi_route_smooths_more_than_framewise_thresholding() {
        // A flickery pathology column: Viterbi at high stay_prob should
        // produce no more events than hysteresis produces runs.
        let mut stream = random_probs(27, 300);
        for t in 0..300 {
            // Strong signal on [100, 200) with occasional dips.
            stream.probs[t][7] = if (100..200).contains(&t) {
                if t % 17 == 0 {
                    0.35
                } else {
                    0.9
                }
            } else {
                0.05
            };
        }
        let space = LabelSpace::default();
        let mut options = PipelineOptions { composition: CompositionMode::PerLabel, ..Default::default() };
        options.decoder = DecoderKind::Viterbi;
        let viterbi_events =
            decode_stream(&stream, &space, &options).unwrap().events_for(7).count();
        assert_eq!(viterbi_events, 1);
    }

    #[test]
    fn options_follow_the_run_config() {
        let config = RunConfig::default();
        let options = PipelineOptions::from_config(&config);
        assert_eq!(options, PipelineOptions::default());

        let text = "[gating]\nenabled = false\n[decoder]\nkind = \"viterbi\"";
        let config = RunConfig::from_toml_str(text).unwrap();
        let options = PipelineOptions::from_config(&config);
        assert_eq!(options.gating, None);
        assert_eq!(options.decoder, DecoderKind::Viterbi);
    }
}
