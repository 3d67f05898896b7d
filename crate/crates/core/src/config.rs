//! TOML run configuration.
//!
//! Every section and every key is optional; whatever is absent falls back to
//! the built-in defaults, so an empty string parses to the default
//! configuration. Gating and label names are resolved against the label
//! space declared in the same file (or the default space).

use std::path::Path;

use serde::Deserialize;

use crate::decode::{HmmConfig, HysteresisConfig};
use crate::error::{Error, Result};
use crate::eval::EvalConfig;
use crate::gating::GatingPrior;
use crate::label_space::LabelSpace;
use crate::loss::check_weight_bounds;
use crate::pipeline::{CompositionMode, DecoderKind};

/// Fully resolved run configuration with defaults applied.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub space: LabelSpace,
    pub gating_enabled: bool,
    pub prior: GatingPrior,
    pub vote_radius: usize,
    pub decoder: DecoderKind,
    pub hysteresis: HysteresisConfig,
    pub hmm: HmmConfig,
    pub composition: CompositionMode,
    pub eval: EvalConfig,
    pub w_min: f64,
    pub w_max: f64,
    pub synth_seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            space: LabelSpace::default(),
            gating_enabled: true,
            prior: GatingPrior::permissive(),
            vote_radius: 1,
            decoder: DecoderKind::Hysteresis,
            hysteresis: HysteresisConfig::default(),
            hmm: HmmConfig::default(),
            composition: CompositionMode::GtStyle,
            eval: EvalConfig::default(),
            w_min: 1.0,
            w_max: 50.0,
            synth_seed: 0,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    #[serde(default)]
    labels: LabelsSection,
    #[serde(default)]
    gating: GatingSection,
    #[serde(default)]
    smoothing: SmoothingSection,
    #[serde(default)]
    decoder: DecoderSection,
    #[serde(default)]
    composition: CompositionSection,
    #[serde(default)]
    eval: EvalSection,
    #[serde(default)]
    weights: WeightsSection,
    #[serde(default)]
    synth: SynthSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct LabelsSection {
    anatomy: Option<Vec<String>>,
    pathology: Option<Vec<String>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct GatingSection {
    enabled: Option<bool>,
    /// Pathology name -> allowed anatomy names. Unlisted pathologies stay
    /// permissive.
    #[serde(default)]
    allowed: std::collections::BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SmoothingSection {
    vote_radius: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct DecoderSection {
    kind: Option<DecoderKind>,
    t_on: Option<f64>,
    t_off: Option<f64>,
    min_len: Option<usize>,
    stay_prob: Option<f64>,
    temperature: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CompositionSection {
    mode: Option<CompositionMode>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct EvalSection {
    iou_thresholds: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct WeightsSection {
    w_min: Option<f64>,
    w_max: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SynthSection {
    seed: Option<u64>,
}

impl RunConfig {
    /// Parses a TOML document, applying defaults for everything absent and
    /// validating everything present.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: ConfigFile =
            toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        let defaults = RunConfig::default();

        let space = match (file.labels.anatomy, file.labels.pathology) {
            (None, None) => defaults.space,
            (anatomy, pathology) => LabelSpace::new(
                anatomy.unwrap_or_else(|| {
                    defaults.space.anatomy_names().to_vec()
                }),
                pathology.unwrap_or_else(|| {
                    defaults.space.pathology_names().to_vec()
                }),
            )?,
        };

        let mut prior = GatingPrior::permissive();
        for (pathology_name, anatomy_names) in &file.gating.allowed {
            let pathology = space
                .class_index(pathology_name)
                .filter(|&i| LabelSpace::is_pathology(i))
                .ok_or_else(|| {
                    Error::InvalidConfig(format!(
                        "gating.allowed: '{pathology_name}' is not a pathology class"
                    ))
                })?;
            let mut anatomies = Vec::with_capacity(anatomy_names.len());
            for name in anatomy_names {
                let idx = space
                    .class_index(name)
                    .filter(|&i| LabelSpace::is_anatomy(i))
                    .ok_or_else(|| {
                        Error::InvalidConfig(format!(
                            "gating.allowed.{pathology_name}: '{name}' is not an anatomy class"
                        ))
                    })?;
                anatomies.push(idx);
            }
            prior.set_allowed(pathology, &anatomies)?;
        }

        let d = &file.decoder;
        let hysteresis = HysteresisConfig::new(
            d.t_on.unwrap_or(defaults.hysteresis.t_on),
            d.t_off.unwrap_or(defaults.hysteresis.t_off),
            d.min_len.unwrap_or(defaults.hysteresis.min_len),
        )?;
        let hmm = HmmConfig::new(
            d.stay_prob.unwrap_or(defaults.hmm.stay_prob),
            d.temperature.unwrap_or(defaults.hmm.temperature),
        )?;

        let eval = EvalConfig::new(
            file.eval.iou_thresholds.unwrap_or(defaults.eval.iou_thresholds),
        )?;

        let w_min = file.weights.w_min.unwrap_or(defaults.w_min);
        let w_max = file.weights.w_max.unwrap_or(defaults.w_max);
        check_weight_bounds(w_min, w_max)?;

        Ok(RunConfig {
            space,
            gating_enabled: file.gating.enabled.unwrap_or(defaults.gating_enabled),
            prior,
            vote_radius: file.smoothing.vote_radius.unwrap_or(defaults.vote_radius),
            decoder: d.kind.unwrap_or(defaults.decoder),
            hysteresis,
            hmm,
            composition: file.composition.mode.unwrap_or(defaults.composition),
            eval,
            w_min,
            w_max,
            synth_seed: file.synth.seed.unwrap_or(defaults.synth_seed),
        })
    }

    /// Reads and parses a TOML configuration file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::InvalidConfig(message) => {
                Error::FileFormat { path: path.display().to_string(), message }
            }
            other => other,
        })
    }
}
