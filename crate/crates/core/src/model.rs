//! A trained annotator: vocabulary, per-class thresholds and mined relation
//! sets, the flexible constraints they translate to, and its file format.
//!
//! The model file is JSON Lines: a header, the vocabulary, then one line per class.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fcsp::{solve, translate_constraints, FcspInstance, FlexibleConstraint, Solution};
use crate::labels::Label;
use crate::mining::{build_class_models, ClassModel, LabeledEvaluation};
use crate::scalar::Scalar;
use crate::spatial::{EvaluationTable, SegmentId, Vocabulary};

pub const MODEL_SCHEMA: &str = "fuzzyrel.model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainedModel<T> {
    pub labels: Vec<Label>,
    pub vocabulary: Vocabulary,
    pub classes: Vec<ClassModel<T>>,
    pub constraints: Vec<FlexibleConstraint>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    schema: String,
    version: u32,
    labels: Vec<Label>,
}

#[derive(Serialize, Deserialize)]
struct VocabularyLine {
    vocabulary: Vocabulary,
}

impl<T: Scalar + Serialize + for<'de> Deserialize<'de>> TrainedModel<T> {
    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        out.push_str(&json_line(&Header {
            schema: MODEL_SCHEMA.into(),
            version: MODEL_VERSION,
            labels: self.labels.clone(),
        })?);
        out.push('\n');
        out.push_str(&json_line(&VocabularyLine {
            vocabulary: self.vocabulary.clone(),
        })?);
        out.push('\n');
        for c in &self.classes {
            out.push_str(&json_line(c)?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let bad = |what: &str, e: serde_json::Error| Error::Model(format!("{what}: {e}"));
        let header: Header = serde_json::from_str(
            lines
                .next()
                .ok_or_else(|| Error::Model("empty file".into()))?,
        )
        .map_err(|e| bad("header", e))?;
        if header.schema != MODEL_SCHEMA || header.version != MODEL_VERSION {
            return Err(Error::Model(format!(
                "unsupported schema {} version {}",
                header.schema, header.version
            )));
        }
        let vocab: VocabularyLine = serde_json::from_str(
            lines
                .next()
                .ok_or_else(|| Error::Model("missing vocabulary".into()))?,
        )
        .map_err(|e| bad("vocabulary", e))?;
        let vocabulary = Vocabulary::new(vocab.vocabulary.relations().to_vec())?;
        let classes = lines
            .map(|l| serde_json::from_str::<ClassModel<T>>(l).map_err(|e| bad("class", e)))
            .collect::<Result<Vec<_>>>()?;
        Self::assemble(header.labels, vocabulary, classes)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_jsonl()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_jsonl(&text)
    }
}

fn json_line<S: Serialize>(value: &S) -> Result<String> {
    serde_json::to_string(value).map_err(|e| Error::Model(e.to_string()))
}

impl<T: Scalar> TrainedModel<T> {
    fn assemble(
        labels: Vec<Label>,
        vocabulary: Vocabulary,
        classes: Vec<ClassModel<T>>,
    ) -> Result<Self> {
        let constraints = translate_constraints(&classes)?;
        Ok(Self {
            labels,
            vocabulary,
            classes,
            constraints,
        })
    }

    /// Mines each class at its threshold and translates the result to constraints.
    pub fn train(
        evaluations: &[LabeledEvaluation<T>],
        labels: &[Label],
        vocabulary: &Vocabulary,
        thresholds: &[T],
    ) -> Result<Self> {
        let classes = build_class_models(evaluations, labels, thresholds)?;
        Self::assemble(labels.to_vec(), vocabulary.clone(), classes)
    }

    pub fn thresholds(&self) -> Vec<T> {
        self.classes.iter().map(|c| c.threshold.value()).collect()
    }

    /// Solves the constraint problem on an evaluated, unlabelled image.
    pub fn annotate(&self, table: &EvaluationTable<T>) -> Result<Solution<T>> {
        let instance =
            FcspInstance::new(self.labels.clone(), self.constraints.clone(), table.clone())?;
        solve(&instance)
    }
}

/// Segment → label predictions of a solution, for scoring.
pub fn predictions<T: Scalar>(solution: &Solution<T>) -> HashMap<SegmentId, Label> {
    solution.assignment.iter().cloned().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{synthesize, SyntheticLayoutConfig};
    use crate::labels::organ_labels;
    use crate::spatial::evaluate_vocabulary;

    #[test]
    fn round_trip_and_annotation() {
        let vocab = Vocabulary::directional_only();
        let sets = synthesize::<f64>(&SyntheticLayoutConfig::with_seed(2), 3).unwrap();
        let evals: Vec<LabeledEvaluation<f64>> = sets
            .iter()
            .map(|s| {
                LabeledEvaluation::new(
                    evaluate_vocabulary(s, &vocab).unwrap(),
                    s.label_map().unwrap(),
                )
            })
            .collect();
        let labels = organ_labels();
        let model = TrainedModel::train(&evals[..2], &labels, &vocab, &[0.9; 9]).unwrap();
        let text = model.to_jsonl().unwrap();
        assert!(text.starts_with(r#"{"schema":"fuzzyrel.model","version":1"#));
        let back = TrainedModel::<f64>::from_jsonl(&text).unwrap();
        assert_eq!(back, model);

        let sol = model.annotate(&evals[2].table).unwrap();
        let truth = &evals[2].labels;
        let correct = sol
            .assignment
            .iter()
            .filter(|(s, l)| truth.get(s) == Some(l))
            .count();
        assert_eq!(correct, 9);

        assert!(TrainedModel::<f64>::from_jsonl("").is_err());
        assert!(
            TrainedModel::<f64>::from_jsonl(r#"{"schema":"other","version":1,"labels":[]}"#)
                .is_err()
        );
    }
}
