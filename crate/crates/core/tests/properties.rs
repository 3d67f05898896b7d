//! Randomized invariant checks for the core algorithms.

use std::collections::BTreeSet;

use gievents::{
    apply_gate, average_precision, class_weights, compose_gt_style, compose_per_label, evaluate,
    event_scores, focal_loss, hysteresis_decode, sigmoid, temperature_scale, vote_smooth,
    weighted_bce, ActivityMatrix, AnatomyTrack, ClassCounts, ClassWeights, EvalConfig, Event,
    EventSet, FocalConfig, GatingPrior, GtInstance, HysteresisConfig, LabelMatrix, LabelSpace,
    ProbabilityStream, ScoreStream, ScoredInstance, Span, VoteWindow, ANATOMY_COUNT, CLASS_COUNT,
    DEFAULT_PROB_EPSILON,
};
use proptest::prelude::*;

fn activity_matrix(max_frames: usize) -> impl Strategy<Value = ActivityMatrix> {
    prop::collection::vec(prop::collection::vec(any::<bool>(), CLASS_COUNT), 0..max_frames)
        .prop_map(|rows| ActivityMatrix {
            video_id: "v".into(),
            active: rows
                .into_iter()
                .map(|row| {
                    let mut a = [false; CLASS_COUNT];
                    a.copy_from_slice(&row);
                    a
                })
                .collect(),
        })
}

fn prob_rows(frames: std::ops::Range<usize>) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(0.0f64..=1.0, CLASS_COUNT), frames)
}

fn spans_in(frames: usize, max_events: usize) -> impl Strategy<Value = Vec<Span>> {
    prop::collection::vec((0..frames, 0..frames), 0..max_events).prop_map(|pairs| {
        pairs
            .into_iter()
            .map(|(a, b)| Span::new(a.min(b), a.max(b)))
            .collect()
    })
}

proptest! {
    #[test]
    fn composition_round_trips_and_refines(activity in activity_matrix(40)) {
        let gt_style = compose_gt_style(&activity);
        let per_label = compose_per_label(&activity);
        prop_assert_eq!(gt_style.rasterize(), activity.clone());
        prop_assert_eq!(per_label.rasterize(), activity);
        prop_assert!(per_label.events.len() <= gt_style.events.len());
        // Every per-label run is tiled by consecutive fragment events.
        for c in 0..CLASS_COUNT {
            let parts: Vec<&Event> = gt_style.events_for(c).collect();
            let mut used = 0usize;
            for run in per_label.events_for(c) {
                let tiles: Vec<&&Event> = parts
                    .iter()
                    .filter(|e| e.start_frame >= run.start_frame && e.end_frame <= run.end_frame)
                    .collect();
                prop_assert!(!tiles.is_empty());
                prop_assert_eq!(tiles[0].start_frame, run.start_frame);
                prop_assert_eq!(tiles.last().unwrap().end_frame, run.end_frame);
                for w in tiles.windows(2) {
                    prop_assert_eq!(w[1].start_frame, w[0].end_frame + 1);
                }
                used += tiles.len();
            }
            prop_assert_eq!(used, parts.len());
        }
    }

    #[test]
    fn hysteresis_with_equal_thresholds_is_plain_thresholding(
        probs in prop::collection::vec(0.0f64..=1.0, 0..80),
        threshold in 0.05f64..=0.95,
    ) {
        let rows: Vec<Vec<f64>> = probs
            .iter()
            .map(|&p| {
                let mut row = vec![0.0; CLASS_COUNT];
                row[5] = p;
                row
            })
            .collect();
        let stream = ProbabilityStream::new("v", rows);
        let config = HysteresisConfig::new(threshold, threshold, 1).unwrap();
        let decoded = hysteresis_decode(&stream, &config, &BTreeSet::from([5usize]));
        for (t, &p) in probs.iter().enumerate() {
            prop_assert_eq!(decoded.active[t][5], p >= threshold);
        }
    }

    #[test]
    fn hysteresis_is_monotone_under_pointwise_raises(
        base in prop::collection::vec(0.0f64..=1.0, 1..60),
        raises in prop::collection::vec(0.0f64..=0.5, 1..60),
        min_len in 1usize..4,
    ) {
        let n = base.len().min(raises.len());
        let to_stream = |vals: &[f64]| {
            let rows = vals
                .iter()
                .map(|&p| {
                    let mut row = vec![0.0; CLASS_COUNT];
                    row[9] = p;
                    row
                })
                .collect();
            ProbabilityStream::new("v", rows)
        };
        let raised: Vec<f64> =
            (0..n).map(|i| (base[i] + raises[i]).min(1.0)).collect();
        let config = HysteresisConfig::new(0.5, 0.3, min_len).unwrap();
        let classes = BTreeSet::from([9usize]);
        let low = hysteresis_decode(&to_stream(&base[..n]), &config, &classes);
        let high = hysteresis_decode(&to_stream(&raised), &config, &classes);
        for t in 0..n {
            prop_assert!(!low.active[t][9] || high.active[t][9], "frame {} lost", t);
        }
    }

    #[test]
    fn gating_only_lowers_and_is_idempotent(
        rows in prob_rows(0..30),
        track in prop::collection::vec(0u8..ANATOMY_COUNT as u8, 0..30),
        masks in prop::collection::vec(
            prop::collection::vec(0usize..ANATOMY_COUNT, 0..ANATOMY_COUNT),
            gievents::PATHOLOGY_COUNT..=gievents::PATHOLOGY_COUNT,
        ),
    ) {
        let n = rows.len().min(track.len());
        let stream = ProbabilityStream::new("v", rows[..n].to_vec());
        let track = AnatomyTrack::new("v", track[..n].to_vec());
        let mut prior = GatingPrior::permissive();
        for (j, allowed) in masks.iter().enumerate() {
            prior.set_allowed(ANATOMY_COUNT + j, allowed).unwrap();
        }
        let gated = apply_gate(&stream, &track, &prior).unwrap();
        for t in 0..n {
            for a in 0..ANATOMY_COUNT {
                prop_assert_eq!(gated.probs[t][a], stream.probs[t][a]);
            }
            for c in ANATOMY_COUNT..CLASS_COUNT {
                prop_assert!(gated.probs[t][c] <= stream.probs[t][c]);
                prop_assert!(gated.probs[t][c] == stream.probs[t][c] || gated.probs[t][c] == 0.0);
            }
        }
        let again = apply_gate(&gated, &track, &prior).unwrap();
        prop_assert_eq!(again, gated.clone());
        let permissive = apply_gate(&stream, &track, &GatingPrior::permissive()).unwrap();
        prop_assert_eq!(permissive, stream);
    }

    #[test]
    fn class_weights_stay_bounded_and_monotone(
        pos in 0u64..500,
        neg_low in 0u64..500,
        neg_extra in 0u64..500,
        pos_extra in 1u64..500,
    ) {
        let counts = |p: u64, g: u64| {
            ClassCounts::new([p; CLASS_COUNT], [g; CLASS_COUNT])
        };
        let w = |p: u64, g: u64| class_weights(&counts(p, g), 1.0, 50.0).unwrap().get(0);
        let base = w(pos, neg_low);
        prop_assert!((1.0..=50.0).contains(&base));
        // More negatives never lowers the weight.
        prop_assert!(w(pos, neg_low + neg_extra) >= base);
        // More positives never raises it.
        prop_assert!(w(pos + pos_extra, neg_low) <= base);
        // Zero positives pins the ceiling.
        prop_assert_eq!(w(0, neg_low), 50.0);
    }

    #[test]
    fn focal_gamma_zero_collapses_to_weighted_bce(
        rows in prob_rows(1..12),
        label_bits in prop::collection::vec(
            prop::collection::vec(any::<bool>(), CLASS_COUNT), 1..12),
        weight in 1.0f64..8.0,
    ) {
        let n = rows.len().min(label_bits.len());
        let probs = ProbabilityStream::new("v", rows[..n].to_vec());
        let labels = LabelMatrix::new(
            "v",
            label_bits[..n]
                .iter()
                .map(|row| row.iter().map(|&b| u8::from(b)).collect())
                .collect(),
        );
        let weights = ClassWeights::uniform(weight);
        let bce = weighted_bce(&probs, &labels, &weights, DEFAULT_PROB_EPSILON).unwrap();
        let focal = focal_loss(
            &probs,
            &labels,
            &weights,
            &FocalConfig::new(0.0).unwrap(),
            DEFAULT_PROB_EPSILON,
        )
        .unwrap();
        prop_assert!((focal - bce.total).abs() <= 1e-12);
        prop_assert!(bce.total >= 0.0 && bce.total.is_finite());
    }

    #[test]
    fn average_precision_is_invariant_under_monotone_rescaling(
        pred_spans in spans_in(60, 8),
        gt_spans in spans_in(60, 6),
        scores in prop::collection::vec(0.0f64..=1.0, 8),
    ) {
        let preds: Vec<ScoredInstance> = pred_spans
            .iter()
            .enumerate()
            .map(|(i, &span)| ScoredInstance { video: i % 2, span, score: scores[i % scores.len()] })
            .collect();
        let gts: Vec<GtInstance> = gt_spans
            .iter()
            .enumerate()
            .map(|(i, &span)| GtInstance { video: i % 2, span })
            .collect();
        for threshold in [0.3, 0.5, 0.95] {
            let ap = average_precision(&preds, &gts, threshold);
            prop_assert!((0.0..=1.0).contains(&ap));
            // Halving and quadrupling are exact f64 maps that preserve
            // order and ties, so the ranking cannot change.
            for factor in [0.5, 4.0] {
                let rescaled: Vec<ScoredInstance> = preds
                    .iter()
                    .map(|p| ScoredInstance { score: p.score * factor, ..*p })
                    .collect();
                prop_assert_eq!(average_precision(&rescaled, &gts, threshold), ap);
            }
        }
    }

    #[test]
    fn stricter_iou_never_raises_map(
        pred_activity in activity_matrix(50),
        gt_activity in activity_matrix(50),
        score_rows in prob_rows(50..51),
    ) {
        let frames = 50usize;
        let mut pred_activity = pred_activity;
        let mut gt_activity = gt_activity;
        pred_activity.active.resize(frames, [false; CLASS_COUNT]);
        gt_activity.active.resize(frames, [false; CLASS_COUNT]);
        let stream = ProbabilityStream::new("v", score_rows);
        let preds = event_scores(&compose_gt_style(&pred_activity), &stream).unwrap();
        let gts = compose_gt_style(&gt_activity);
        let report = evaluate(
            &[preds],
            &[gts],
            &EvalConfig::new(vec![0.5, 0.95]).unwrap(),
            &LabelSpace::default(),
        )
        .unwrap();
        prop_assert!(report.overall_map[1] <= report.overall_map[0] + 1e-12);
        for video in &report.per_video {
            prop_assert!(video.map[1] <= video.map[0] + 1e-12);
        }
        for class in &report.per_class {
            prop_assert!(class.ap[1] <= class.ap[0] + 1e-12);
        }
    }

    #[test]
    fn vote_smoothing_preserves_label_range(
        labels in prop::collection::vec(0u8..ANATOMY_COUNT as u8, 0..50),
        radius in 0usize..6,
    ) {
        let track = AnatomyTrack::new("v", labels.clone());
        let smoothed = vote_smooth(&track, &VoteWindow { radius });
        prop_assert_eq!(smoothed.frame_count(), track.frame_count());
        prop_assert!(smoothed.labels.iter().all(|&l| (l as usize) < ANATOMY_COUNT));
        if radius == 0 {
            prop_assert_eq!(smoothed, track);
        }
    }

    #[test]
    fn temperature_scaling_lands_in_the_open_unit_interval(
        scores in prop::collection::vec(-50.0f64..=50.0, 1..20),
        temperature in 0.1f64..=10.0,
    ) {
        let rows: Vec<Vec<f64>> = scores.iter().map(|&z| vec![z; CLASS_COUNT]).collect();
        let stream = ScoreStream::new("v", rows);
        let probs = temperature_scale(&stream, temperature).unwrap();
        probs.validate(&LabelSpace::default()).unwrap();
        for (t, &z) in scores.iter().enumerate() {
            prop_assert_eq!(probs.probs[t][0], sigmoid(z / temperature));
        }
    }

    #[test]
    fn event_scores_are_means_inside_unit_range(
        activity in activity_matrix(30),
        rows in prob_rows(30..31),
    ) {
        let mut activity = activity;
        activity.active.resize(30, [false; CLASS_COUNT]);
        let stream = ProbabilityStream::new("v", rows);
        let scored = event_scores(&compose_per_label(&activity), &stream).unwrap();
        for ev in &scored.events {
            let s = ev.score.unwrap();
            prop_assert!((0.0..=1.0).contains(&s));
        }
        // Scoring never alters event geometry.
        prop_assert_eq!(scored.without_scores(), compose_per_label(&activity));
    }

    #[test]
    fn self_evaluation_is_perfect(activity in activity_matrix(40), rows in prob_rows(40..41)) {
        let mut activity = activity;
        activity.active.resize(40, [false; CLASS_COUNT]);
        let stream = ProbabilityStream::new("v", rows);
        let gt = compose_gt_style(&activity);
        prop_assume!(!gt.events.is_empty());
        let preds = event_scores(&gt, &stream).unwrap();
        let report = evaluate(
            &[preds],
            &[gt],
            &EvalConfig::default(),
            &LabelSpace::default(),
        )
        .unwrap();
        for v in &report.overall_map {
            prop_assert!((v - 1.0).abs() <= 1e-12);
        }
    }
}

#[test]
fn event_set_validation_agrees_with_composition() {
    // Anything a composer produces must pass the standalone validator.
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    for _ in 0..200 {
        let n = rng.random_range(0..40usize);
        let mut activity = ActivityMatrix::empty("v", n);
        for t in 0..n {
            for c in 0..CLASS_COUNT {
                activity.active[t][c] = rng.random::<f64>() < 0.25;
            }
        }
        for set in [compose_gt_style(&activity), compose_per_label(&activity)] {
            EventSet::new(set.video_id.clone(), set.frame_count, set.events.clone()).unwrap();
        }
    }
}
