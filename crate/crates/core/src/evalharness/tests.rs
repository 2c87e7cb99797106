use std::collections::BTreeMap;

use nalgebra::{Matrix3, Vector3};

use super::*;
use crate::data_model::{BBox, CameraParams, DensityMap, PersonAnnotation};
use crate::densitymap::{render_vdm, SmoothingConfig};

fn person(id: &str, head: [f64; 2], bbox: BBox, volume: f64) -> PersonAnnotation {
    PersonAnnotation {
        person_id: id.into(),
        character_id: "c".into(),
        head_px: head,
        keypoints: vec![],
        bbox_px: bbox,
        volume_dm3: volume,
        part_volumes_dm3: BTreeMap::new(),
    }
}

fn frame(id: &str, persons: Vec<PersonAnnotation>, tags: &[&str]) -> FrameAnnotation {
    FrameAnnotation {
        frame_id: id.into(),
        image_w: 64,
        image_h: 48,
        persons,
        scene_tags: tags.iter().map(|s| s.to_string()).collect(),
        camera: CameraParams {
            fx: 100.0,
            fy: 100.0,
            cx: 32.0,
            cy: 24.0,
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        },
    }
}

fn isolated(id: &str, volumes: &[f64]) -> FrameAnnotation {
    let persons = volumes
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let x = 4.0 + 12.0 * i as f64;
            person(&format!("{id}_p{i}"), [x + 2.0, 10.0], BBox::new(x, 5.0, x + 6.0, 30.0), v)
        })
        .collect();
    frame(id, persons, &[])
}

fn gt_maps(frames: &[FrameAnnotation]) -> PredictionSet {
    let mut set = PredictionSet::new("gt");
    for f in frames {
        set.insert(f.frame_id.clone(), Prediction::Map(render_vdm(f, &SmoothingConfig::impulses()).unwrap()));
    }
    set
}

#[test]
fn stats_hand_mean() {
    let frames = vec![isolated("a", &[60.0]), isolated("b", &[80.0])];
    let s = dataset_stats(&frames).unwrap();
    assert_eq!(s.mean_person_volume_dm3, 70.0);
    assert_eq!(s.count_histogram[&1], 2);
    let single = dataset_stats(&[isolated("a", &[61.5])]).unwrap();
    assert_eq!(single.mean_person_volume_dm3, 61.5);
    assert!(matches!(dataset_stats(&[isolated("e", &[])]), Err(EvalError::NoPersons)));
}

#[test]
fn mean_volume_products() {
    let set = mean_volume_estimator(&[("a".into(), 30), ("b".into(), 0)], 65.2).unwrap();
    assert!((set.get("a").unwrap().total() - 1956.0).abs() < 1e-9);
    assert_eq!(set.get("b").unwrap().total(), 0.0);
    assert!(matches!(
        mean_volume_estimator(&[("c".into(), -1)], 65.2),
        Err(EvalError::NegativeCount { .. })
    ));
}

#[test]
fn gt_totals_score_zero() {
    let frames = vec![isolated("a", &[60.0, 70.0]), isolated("b", &[80.0])];
    let mut preds = PredictionSet::new("gt");
    for f in &frames {
        preds.insert(f.frame_id.clone(), Prediction::Scalar(f.total_volume_dm3()));
    }
    let r = evaluate_full(&frames, &preds).unwrap();
    assert_eq!((r.overall.mae, r.overall.rmse, r.overall.ppmae), (0.0, 0.0, Some(0.0)));
}

#[test]
fn missing_predictions_are_listed() {
    let frames = vec![isolated("a", &[60.0]), isolated("b", &[80.0])];
    let mut preds = PredictionSet::new("x");
    preds.insert("a", Prediction::Scalar(1.0));
    match evaluate_full(&frames, &preds) {
        Err(EvalError::MissingPredictions(ids)) => assert_eq!(ids, vec!["b".to_string()]),
        other => panic!("{other:?}"),
    }
}

#[test]
fn map_size_must_match() {
    let frames = vec![isolated("a", &[60.0])];
    let mut preds = PredictionSet::new("x");
    preds.insert("a", Prediction::Map(DensityMap::zeros(10, 10)));
    assert!(matches!(evaluate_full(&frames, &preds), Err(EvalError::SizeMismatch { .. })));
}

#[test]
fn per_tag_reports() {
    let mut a = isolated("a", &[60.0]);
    a.scene_tags.insert("night".into());
    let b = isolated("b", &[80.0]);
    let mut preds = PredictionSet::new("x");
    preds.insert("a", Prediction::Scalar(50.0));
    preds.insert("b", Prediction::Scalar(80.0));
    let r = evaluate_full(&[a, b], &preds).unwrap();
    assert_eq!(r.per_tag["night"].mae, 10.0);
    assert_eq!(r.per_tag["night"].k, 1);
    assert_eq!(r.overall.mae, 5.0);
}

#[test]
fn decoupling_oracle_and_misses() {
    let frames = vec![isolated("a", &[60.0, 70.0, 8.0]), isolated("b", &[80.0])];
    let r = decoupling_eval(&frames, &gt_maps(&frames), &DecouplingConfig::default()).unwrap();
    assert_eq!(r.ppmae, Some(0.0));
    assert_eq!(r.misses, 1);
    assert_eq!(r.kept, 4);
    assert_eq!(r.detected, 3);
}

#[test]
fn overlapping_boxes_are_dropped() {
    let f = frame(
        "o",
        vec![
            person("p0", [5.0, 10.0], BBox::new(2.0, 5.0, 10.0, 30.0), 60.0),
            person("p1", [12.0, 10.0], BBox::new(9.0, 5.0, 16.0, 30.0), 70.0),
            person("p2", [40.0, 10.0], BBox::new(36.0, 5.0, 44.0, 30.0), 75.0),
        ],
        &[],
    );
    let frames = vec![f];
    let r = decoupling_eval(&frames, &gt_maps(&frames), &DecouplingConfig::default()).unwrap();
    assert_eq!(r.dropped_overlap, 2);
    assert_eq!(r.kept, 1);
    assert_eq!(r.ppmae, Some(0.0));
    // A permissive IoU threshold keeps the pair.
    let cfg = DecouplingConfig {
        overlap: OverlapRule::IouAbove(0.5),
        ..Default::default()
    };
    assert_eq!(decoupling_eval(&frames, &gt_maps(&frames), &cfg).unwrap().dropped_overlap, 0);
}

#[test]
fn scalar_predictions_cannot_be_decoupled() {
    let frames = vec![isolated("a", &[60.0])];
    let mut preds = PredictionSet::new("x");
    preds.insert("a", Prediction::Scalar(60.0));
    assert!(matches!(
        decoupling_eval(&frames, &preds, &DecouplingConfig::default()),
        Err(EvalError::NotAMap(_))
    ));
}

#[test]
fn bins_partition_and_recombine() {
    let frames = vec![
        isolated("a", &[60.0; 1]),
        isolated("b", &[60.0; 4]),
        isolated("c", &[60.0; 2]),
        isolated("z", &[]),
    ];
    let mut preds = PredictionSet::new("x");
    for (f, v) in frames.iter().zip([50.0, 300.0, 100.0, 5.0]) {
        preds.insert(f.frame_id.clone(), Prediction::Scalar(v));
    }
    let bins = crowd_size_bins(&frames, &preds, &[1.0, 2.0, 4.0, f64::INFINITY]).unwrap();
    assert_eq!(bins.iter().map(|b| b.frames).collect::<Vec<_>>(), vec![1, 1, 1]);
    let weighted: f64 = bins.iter().map(|b| b.report.unwrap().mae * b.frames as f64).sum::<f64>() / 3.0;
    let nonempty: Vec<FrameAnnotation> = frames[..3].to_vec();
    let global = evaluate_full(&nonempty, &preds).unwrap().overall.mae;
    assert!((weighted - global).abs() < 1e-9);
    assert!(crowd_size_bins(&frames, &preds, &[1.0, 1.0]).is_err());
    let empty = crowd_size_bins(&frames, &preds, &[10.0, 20.0]).unwrap();
    assert!(empty[0].report.is_none());
    assert!(bins_to_csv(&empty).ends_with("10,20,0,,,\n"));
}

#[test]
fn subset_presets() {
    let frames = vec![
        frame("a", vec![], &["night"]),
        frame("b", vec![], &["birds_eye"]),
        frame("c", vec![], &[]),
        frame("d", vec![], &["birds_eye", "rain"]),
    ];
    let ids = |v: Vec<FrameAnnotation>| v.into_iter().map(|f| f.frame_id).collect::<Vec<_>>();
    assert_eq!(ids(filter_subset(&frames, &SubsetFilter::all())), vec!["a", "b", "c", "d"]);
    assert_eq!(ids(filter_subset(&frames, &SubsetFilter::s1())), vec!["b", "c"]);
    assert_eq!(ids(filter_subset(&frames, &SubsetFilter::s2())), vec!["b", "d"]);
    assert_eq!(unknown_tags(&frames, &SubsetFilter::s1()), vec!["heavy_occlusion".to_string()]);
}
