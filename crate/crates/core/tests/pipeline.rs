use std::path::Path;

use fuzzyrel::dataset::{
    load_all, load_dataset, synthesize, write_dataset, Manifest, SyntheticLayoutConfig,
};
use fuzzyrel::explain::{explain_solution, Hedge, HedgeScale};
use fuzzyrel::labels::organ_labels;
use fuzzyrel::mining::LabeledEvaluation;
use fuzzyrel::model::TrainedModel;
use fuzzyrel::spatial::{evaluate_vocabulary, SegmentSet, Vocabulary};
use fuzzyrel::Scalar;

fn labelled<T: Scalar>(sets: &[SegmentSet<T>], vocab: &Vocabulary) -> Vec<LabeledEvaluation<T>> {
    sets.iter()
        .map(|s| {
            LabeledEvaluation::new(
                evaluate_vocabulary(s, vocab).unwrap(),
                s.label_map().unwrap(),
            )
        })
        .collect()
}

fn round_trip_pipeline<T: Scalar + serde::Serialize + for<'de> serde::Deserialize<'de>>(
    dir: &Path,
) {
    let sets = synthesize::<T>(&SyntheticLayoutConfig::with_seed(31), 4).unwrap();
    let manifest = write_dataset(&sets, dir, "synthetic").unwrap();
    let loaded = load_dataset::<T>(&manifest, &organ_labels()).unwrap();
    assert_eq!(loaded.len(), 4);

    let vocab = Vocabulary::directional_only();
    let evals = labelled(&loaded[..3], &vocab);
    let thresholds = vec![T::lit(0.9); 9];
    let model = TrainedModel::train(&evals, &organ_labels(), &vocab, &thresholds).unwrap();
    let path = dir.join("model.jsonl");
    model.save(&path).unwrap();
    let model = TrainedModel::<T>::load(&path).unwrap();

    let test = &loaded[3];
    let table = evaluate_vocabulary(&test.unlabeled(), &vocab).unwrap();
    let sol = model.annotate(&table).unwrap();
    let truth = test.label_map().unwrap();
    for (s, l) in &sol.assignment {
        assert_eq!(truth.get(s), Some(l), "segment {s}");
    }
    let explanations = explain_solution(&sol, &vocab, &HedgeScale::default()).unwrap();
    assert_eq!(explanations.len(), 9);
    for e in &explanations {
        assert!(e.text.starts_with(&format!("Organ {} is ", e.segment)));
        assert!(e.text.contains(" because "));
        assert!(!e.causes.is_empty() || e.hedge == Hedge::Uncertain);
    }
}

#[test]
fn pipeline_through_disk_f64() {
    let tmp = tempfile::tempdir().unwrap();
    round_trip_pipeline::<f64>(tmp.path());
}

#[test]
fn pipeline_through_disk_f32() {
    let tmp = tempfile::tempdir().unwrap();
    round_trip_pipeline::<f32>(tmp.path());
}

#[test]
fn unlabelled_manifest_loads_for_annotation() {
    let tmp = tempfile::tempdir().unwrap();
    let sets = synthesize::<f64>(&SyntheticLayoutConfig::with_seed(5), 2).unwrap();
    let unlabelled: Vec<_> = sets.iter().map(SegmentSet::unlabeled).collect();
    let manifest = write_dataset(&unlabelled, tmp.path(), "synthetic").unwrap();
    let text = std::fs::read_to_string(&manifest).unwrap();
    assert!(!text.contains("\"label\""));
    assert!(text.contains("segment1.png"));

    // no image is complete for training, every image loads for annotation
    assert!(load_dataset::<f64>(&manifest, &organ_labels())
        .unwrap()
        .is_empty());
    let all = load_all::<f64>(&Manifest::load(&manifest).unwrap()).unwrap();
    assert_eq!(all.len(), 2);
    assert!(all.iter().all(|s| s.len() == 9 && s.label_map().is_none()));
    assert_eq!(all[0].segments()[0].mask, sets[0].segments()[0].mask);
}

#[test]
fn shipped_vocabularies_match_builtins() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../vocab");
    assert_eq!(
        Vocabulary::load(&root.join("default.toml")).unwrap(),
        Vocabulary::default_vocabulary()
    );
    assert_eq!(
        Vocabulary::load(&root.join("directional-only.toml")).unwrap(),
        Vocabulary::directional_only()
    );
}

#[test]
fn shipped_sample_dataset_loads() {
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/sample/manifest.jsonl");
    let sets = load_dataset::<f64>(&manifest, &organ_labels()).unwrap();
    assert_eq!(sets.len(), 6);
    assert!(sets
        .iter()
        .all(|s| s.len() == 9 && s.dims() == Some((128, 128))));
}
