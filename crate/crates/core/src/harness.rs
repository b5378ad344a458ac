//! Training and evaluation orchestration: accuracy, per-class threshold
//! tuning by Bayesian optimisation (or random search), and nested
//! cross-validation with a leakage-checkable phase log.
//!
//! The harness works in `f64` throughout.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::dataset::{nested_folds, InnerFold};
use crate::error::{Error, Result};
use crate::labels::Label;
use crate::mining::LabeledEvaluation;
use crate::model::TrainedModel;
use crate::spatial::{evaluate_vocabulary, SegmentId, SegmentSet, Vocabulary};

/// Fraction of segments whose predicted label equals the truth; a missing
/// prediction counts as wrong.
pub fn accuracy(predicted: &[Option<Label>], truth: &[Label]) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(Error::AccuracyMismatch(predicted.len(), truth.len()));
    }
    if predicted.is_empty() {
        return Err(Error::EmptyPredictions);
    }
    let correct = predicted
        .iter()
        .zip(truth)
        .filter(|(p, t)| p.as_ref() == Some(*t))
        .count();
    Ok(correct as f64 / truth.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    GaussianProcessEi,
    RandomSearch,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuningConfig {
    pub iterations: usize,
    pub strategy: Strategy,
    /// Search interval applied to every class without an override.
    pub range: (f64, f64),
    #[serde(default)]
    pub class_ranges: BTreeMap<Label, (f64, f64)>,
    pub seed: u64,
    pub length_scale: f64,
    pub noise: f64,
    pub candidates: usize,
}

impl Default for TuningConfig {
    fn default() -> Self {
        Self {
            iterations: 20,
            strategy: Strategy::GaussianProcessEi,
            range: (0.5, 1.0),
            class_ranges: BTreeMap::new(),
            seed: 0,
            length_scale: 0.1,
            noise: 1e-4,
            candidates: 512,
        }
    }
}

impl TuningConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::Tuning("iterations must be at least 1".into()));
        }
        if !(self.length_scale > 0.0 && self.noise >= 0.0 && self.candidates >= 1) {
            return Err(Error::Tuning(
                "GP length scale must be positive and at least one candidate drawn".into(),
            ));
        }
        for (lo, hi) in std::iter::once(&self.range).chain(self.class_ranges.values()) {
            if !(*lo > 0.0 && lo <= hi && *hi <= 1.0) {
                return Err(Error::Tuning(format!(
                    "threshold range [{lo}, {hi}] must satisfy 0 < lo <= hi <= 1"
                )));
            }
        }
        Ok(())
    }

    fn ranges(&self, labels: &[Label]) -> Vec<(f64, f64)> {
        labels
            .iter()
            .map(|l| *self.class_ranges.get(l).unwrap_or(&self.range))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub iteration: usize,
    pub thresholds: Vec<f64>,
    /// Mean validation accuracy over the inner folds.
    pub objective: f64,
    /// No class produced a constraint on some inner fold.
    pub zero_constraints: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuningResult {
    pub thresholds: Vec<f64>,
    pub objective: f64,
    pub trials: Vec<Trial>,
}

/// Labels predicted by `model` for one evaluated image, aligned with its segment ids.
fn predict(
    model: &TrainedModel<f64>,
    image: &LabeledEvaluation<f64>,
) -> Result<Vec<(SegmentId, Option<Label>)>> {
    let sol = model.annotate(&image.table)?;
    Ok(image
        .table
        .segment_ids()
        .iter()
        .map(|s| (*s, sol.label_of(*s).cloned()))
        .collect())
}

fn truth_of(image: &LabeledEvaluation<f64>) -> Vec<Label> {
    image
        .table
        .segment_ids()
        .iter()
        .map(|s| image.labels.get(s).cloned().expect("labelled evaluation"))
        .collect()
}

/// Pooled accuracy of `model` over `images`; an unsolvable image scores 0.
fn score(model: &TrainedModel<f64>, images: &[&LabeledEvaluation<f64>]) -> Result<f64> {
    let mut predicted = Vec::new();
    let mut truth = Vec::new();
    for image in images {
        let t = truth_of(image);
        match predict(model, image) {
            Ok(p) => predicted.extend(p.into_iter().map(|(_, l)| l)),
            Err(e) => {
                log::warn!("image {}: annotation failed ({e})", image.table.image_id());
                predicted.extend(std::iter::repeat_n(None, t.len()));
            }
        }
        truth.extend(t);
    }
    accuracy(&predicted, &truth)
}

/// Mean inner-fold validation accuracy; `None` when a fold yields no constraints.
fn inner_objective(
    train: &[LabeledEvaluation<f64>],
    inner: &[InnerFold],
    labels: &[Label],
    vocab: &Vocabulary,
    thresholds: &[f64],
) -> Result<Option<f64>> {
    let per_fold: Vec<Result<Option<f64>>> = inner
        .par_iter()
        .map(|fold| {
            let fit: Vec<LabeledEvaluation<f64>> =
                fold.train.iter().map(|&i| train[i].clone()).collect();
            let model = match TrainedModel::train(&fit, labels, vocab, thresholds) {
                Ok(m) => m,
                Err(Error::NoConstraints) => return Ok(None),
                Err(e) => return Err(e),
            };
            let val: Vec<&LabeledEvaluation<f64>> =
                fold.validation.iter().map(|&i| &train[i]).collect();
            score(&model, &val).map(Some)
        })
        .collect();
    let mut total = 0.0;
    for r in per_fold {
        match r? {
            Some(a) => total += a,
            None => return Ok(None),
        }
    }
    Ok(Some(total / inner.len() as f64))
}

/// Squared-exponential GP over the unit box with expected-improvement acquisition.
struct Surrogate {
    length_scale: f64,
    noise: f64,
}

impl Surrogate {
    fn kernel(&self, a: &[f64], b: &[f64]) -> f64 {
        let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
        (-d2 / (2.0 * self.length_scale * self.length_scale)).exp()
    }

    /// Index of the candidate with the largest expected improvement (first on ties).
    fn propose(&self, xs: &[Vec<f64>], ys: &[f64], candidates: &[Vec<f64>]) -> usize {
        let n = xs.len();
        let mean = ys.iter().sum::<f64>() / n as f64;
        let var = ys.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / n as f64;
        let scale = if var > 1e-24 { var.sqrt() } else { 1.0 };
        let y = DVector::from_iterator(n, ys.iter().map(|v| (v - mean) / scale));
        let k = DMatrix::from_fn(n, n, |i, j| {
            self.kernel(&xs[i], &xs[j]) + if i == j { self.noise } else { 0.0 }
        });
        let Some(chol) = k.cholesky() else {
            return 0;
        };
        let alpha = chol.solve(&y);
        let best = y.max();
        let normal = Normal::new(0.0, 1.0).expect("standard normal");
        let mut arg = 0;
        let mut top = f64::NEG_INFINITY;
        for (ci, c) in candidates.iter().enumerate() {
            let kv = DVector::from_iterator(n, xs.iter().map(|x| self.kernel(x, c)));
            let mu = kv.dot(&alpha);
            let v = chol
                .l()
                .solve_lower_triangular(&kv)
                .expect("triangular factor");
            let sigma = (1.0 - v.dot(&v)).max(1e-18).sqrt();
            let z = (mu - best) / sigma;
            let ei = (mu - best) * normal.cdf(z) + sigma * normal.pdf(z);
            if ei > top {
                top = ei;
                arg = ci;
            }
        }
        arg
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Best trial: highest objective, then highest mean threshold, then earliest.
fn best_trial(trials: &[Trial]) -> Option<&Trial> {
    trials
        .iter()
        .filter(|t| !t.zero_constraints)
        .fold(None, |best: Option<&Trial>, t| match best {
            None => Some(t),
            Some(b) => {
                if t.objective > b.objective
                    || (t.objective == b.objective && mean(&t.thresholds) > mean(&b.thresholds))
                {
                    Some(t)
                } else {
                    Some(b)
                }
            }
        })
}

/// Searches per-class thresholds maximising mean validation accuracy over `inner`
/// (index sets into `train`).
pub fn tune_thresholds(
    train: &[LabeledEvaluation<f64>],
    inner: &[InnerFold],
    labels: &[Label],
    vocab: &Vocabulary,
    config: &TuningConfig,
) -> Result<TuningResult> {
    config.validate()?;
    if inner.is_empty() {
        return Err(Error::TooSmall("no inner folds to tune on".into()));
    }
    let ranges = config.ranges(labels);
    let to_thresholds = |u: &[f64]| -> Vec<f64> {
        u.iter()
            .zip(&ranges)
            .map(|(x, (lo, hi))| if hi > lo { lo + x * (hi - lo) } else { *lo })
            .collect()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let draw =
        |rng: &mut ChaCha8Rng| -> Vec<f64> { ranges.iter().map(|_| rng.gen::<f64>()).collect() };
    let surrogate = Surrogate {
        length_scale: config.length_scale,
        noise: config.noise,
    };

    let mut xs: Vec<Vec<f64>> = Vec::new();
    let mut ys: Vec<f64> = Vec::new();
    let mut trials = Vec::with_capacity(config.iterations);
    for iteration in 0..config.iterations {
        let u = match config.strategy {
            Strategy::GaussianProcessEi if !xs.is_empty() => {
                let cands: Vec<Vec<f64>> = (0..config.candidates).map(|_| draw(&mut rng)).collect();
                let i = surrogate.propose(&xs, &ys, &cands);
                cands.into_iter().nth(i).expect("index in range")
            }
            _ => draw(&mut rng),
        };
        let thresholds = to_thresholds(&u);
        let objective = inner_objective(train, inner, labels, vocab, &thresholds)?;
        log::debug!("tuning iteration {iteration}: {thresholds:?} -> {objective:?}");
        xs.push(u);
        ys.push(objective.unwrap_or(0.0));
        trials.push(Trial {
            iteration,
            thresholds,
            objective: objective.unwrap_or(0.0),
            zero_constraints: objective.is_none(),
        });
    }
    let best = best_trial(&trials).ok_or(Error::SearchRangeTooHigh)?;
    Ok(TuningResult {
        thresholds: best.thresholds.clone(),
        objective: best.objective,
        trials,
    })
}

/// Evaluates the vocabulary once per labelled image.
pub fn evaluate_dataset(
    sets: &[SegmentSet<f64>],
    vocab: &Vocabulary,
) -> Result<Vec<LabeledEvaluation<f64>>> {
    sets.par_iter()
        .map(|s| {
            let labels = s.label_map().ok_or_else(|| {
                Error::SegmentSet(format!("image {}: unlabelled segment", s.image_id()))
            })?;
            Ok(LabeledEvaluation::new(
                evaluate_vocabulary(s, vocab)?,
                labels,
            ))
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Tuning,
    Mining,
    Testing,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseRecord {
    pub fold: usize,
    pub phase: Phase,
    pub image: String,
}

/// Images that a fold tested on but also tuned or mined with.
pub fn leaked_images(log: &[PhaseRecord]) -> Vec<PhaseRecord> {
    log.iter()
        .filter(|r| r.phase != Phase::Testing)
        .filter(|r| {
            log.iter()
                .any(|t| t.phase == Phase::Testing && t.fold == r.fold && t.image == r.image)
        })
        .cloned()
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentRecord {
    pub segment: SegmentId,
    pub truth: Label,
    pub predicted: Option<Label>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub fold: usize,
    pub image: String,
    pub consistency: Option<f64>,
    pub segments: Vec<SegmentRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub accuracy: f64,
    pub thresholds: Vec<(Label, f64)>,
    pub constraints: usize,
    pub trials: Vec<Trial>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossValidationConfig {
    pub outer: usize,
    pub inner: usize,
    pub seed: u64,
    pub tuning: TuningConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub config: CrossValidationConfig,
    pub relations: Vec<String>,
    pub labels: Vec<Label>,
    pub folds: Vec<FoldReport>,
    pub images: Vec<ImageRecord>,
    pub mean_accuracy: f64,
    pub phase_log: Vec<PhaseRecord>,
}

pub const REPORT_SCHEMA: &str = "fuzzyrel.report";
pub const REPORT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum ReportLine {
    Header {
        schema: String,
        version: u32,
        config: CrossValidationConfig,
        relations: Vec<String>,
        labels: Vec<Label>,
    },
    Fold(FoldReport),
    Image(ImageRecord),
    Phase(PhaseRecord),
    Summary {
        mean_accuracy: f64,
    },
}

impl EvaluationReport {
    /// Pooled accuracy of one fold, recomputed from its image records.
    pub fn recomputed_accuracy(&self, fold: usize) -> Result<f64> {
        let segs: Vec<&SegmentRecord> = self
            .images
            .iter()
            .filter(|i| i.fold == fold)
            .flat_map(|i| &i.segments)
            .collect();
        let predicted: Vec<Option<Label>> = segs.iter().map(|s| s.predicted.clone()).collect();
        let truth: Vec<Label> = segs.iter().map(|s| s.truth.clone()).collect();
        accuracy(&predicted, &truth)
    }

    pub fn to_jsonl(&self) -> String {
        let mut lines = vec![ReportLine::Header {
            schema: REPORT_SCHEMA.into(),
            version: REPORT_VERSION,
            config: self.config.clone(),
            relations: self.relations.clone(),
            labels: self.labels.clone(),
        }];
        lines.extend(self.folds.iter().cloned().map(ReportLine::Fold));
        lines.extend(self.images.iter().cloned().map(ReportLine::Image));
        lines.extend(self.phase_log.iter().cloned().map(ReportLine::Phase));
        lines.push(ReportLine::Summary {
            mean_accuracy: self.mean_accuracy,
        });
        let mut out = String::new();
        for l in &lines {
            out.push_str(&serde_json::to_string(l).expect("report lines serialize"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut report: Option<Self> = None;
        for (i, line) in text.lines().filter(|l| !l.trim().is_empty()).enumerate() {
            let parsed: ReportLine = serde_json::from_str(line)
                .map_err(|e| Error::Model(format!("report line {}: {e}", i + 1)))?;
            match (parsed, report.as_mut()) {
                (
                    ReportLine::Header {
                        schema,
                        version,
                        config,
                        relations,
                        labels,
                    },
                    None,
                ) => {
                    if schema != REPORT_SCHEMA || version != REPORT_VERSION {
                        return Err(Error::Model(format!(
                            "unsupported report {schema} v{version}"
                        )));
                    }
                    report = Some(Self {
                        config,
                        relations,
                        labels,
                        folds: Vec::new(),
                        images: Vec::new(),
                        mean_accuracy: 0.0,
                        phase_log: Vec::new(),
                    });
                }
                (ReportLine::Fold(f), Some(r)) => r.folds.push(f),
                (ReportLine::Image(im), Some(r)) => r.images.push(im),
                (ReportLine::Phase(p), Some(r)) => r.phase_log.push(p),
                (ReportLine::Summary { mean_accuracy }, Some(r)) => r.mean_accuracy = mean_accuracy,
                _ => return Err(Error::Model(format!("report line {}: out of order", i + 1))),
            }
        }
        report.ok_or_else(|| Error::Model("empty report".into()))
    }

    /// Tab-separated rows for plotting: one `trial` row per tuning iteration and
    /// one `fold` row per outer fold, each with the per-class thresholds.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("record\tfold\titeration\taccuracy\tmean_threshold");
        for l in &self.labels {
            let _ = write!(out, "\t{}", l.key());
        }
        out.push('\n');
        let row = |out: &mut String, kind: &str, fold: usize, it: &str, acc: f64, th: &[f64]| {
            let _ = write!(out, "{kind}\t{fold}\t{it}\t{acc:.6}\t{:.6}", mean(th));
            for t in th {
                let _ = write!(out, "\t{t:.6}");
            }
            out.push('\n');
        };
        for f in &self.folds {
            for t in &f.trials {
                row(
                    &mut out,
                    "trial",
                    f.fold,
                    &t.iteration.to_string(),
                    t.objective,
                    &t.thresholds,
                );
            }
        }
        for f in &self.folds {
            let th: Vec<f64> = f.thresholds.iter().map(|(_, t)| *t).collect();
            row(&mut out, "fold", f.fold, "-", f.accuracy, &th);
        }
        out
    }
}

fn tag(log: &mut Vec<PhaseRecord>, fold: usize, phase: Phase, images: &[&LabeledEvaluation<f64>]) {
    log.extend(images.iter().map(|im| PhaseRecord {
        fold,
        phase,
        image: im.table.image_id().to_string(),
    }));
}

/// Trains on `train` with `thresholds` and annotates every image of `test`.
pub fn evaluate_split(
    train: &[LabeledEvaluation<f64>],
    test: &[&LabeledEvaluation<f64>],
    labels: &[Label],
    vocab: &Vocabulary,
    thresholds: &[f64],
    fold: usize,
) -> Result<(TrainedModel<f64>, Vec<ImageRecord>)> {
    let model = TrainedModel::train(train, labels, vocab, thresholds)?;
    let records = test
        .par_iter()
        .map(|image| {
            let truth = truth_of(image);
            let ids = image.table.segment_ids();
            match model.annotate(&image.table) {
                Ok(sol) => ImageRecord {
                    fold,
                    image: image.table.image_id().to_string(),
                    consistency: Some(sol.consistency.value()),
                    segments: ids
                        .iter()
                        .zip(truth)
                        .map(|(s, t)| SegmentRecord {
                            segment: *s,
                            truth: t,
                            predicted: sol.label_of(*s).cloned(),
                        })
                        .collect(),
                    error: None,
                },
                Err(e) => ImageRecord {
                    fold,
                    image: image.table.image_id().to_string(),
                    consistency: None,
                    segments: ids
                        .iter()
                        .zip(truth)
                        .map(|(s, t)| SegmentRecord {
                            segment: *s,
                            truth: t,
                            predicted: None,
                        })
                        .collect(),
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    Ok((model, records))
}

type FoldOutcome = (FoldReport, Vec<ImageRecord>, Vec<PhaseRecord>);

/// Nested cross-validation over already evaluated images.
pub fn nested_cv_evaluated(
    evals: &[LabeledEvaluation<f64>],
    labels: &[Label],
    vocab: &Vocabulary,
    config: &CrossValidationConfig,
) -> Result<EvaluationReport> {
    config.tuning.validate()?;
    let folds = nested_folds(evals.len(), config.outer, config.inner, config.seed)?;
    let per_fold: Vec<Result<FoldOutcome>> = folds
        .par_iter()
        .enumerate()
        .map(|(fi, fold)| {
            let mut log = Vec::new();
            let train: Vec<LabeledEvaluation<f64>> =
                fold.train.iter().map(|&i| evals[i].clone()).collect();
            let test: Vec<&LabeledEvaluation<f64>> = fold.test.iter().map(|&i| &evals[i]).collect();

            // inner folds index into `train`, whose order is `fold.train`
            let inner: Vec<InnerFold> = fold
                .inner
                .iter()
                .map(|f| {
                    let pos = |i: &usize| {
                        fold.train
                            .iter()
                            .position(|x| x == i)
                            .expect("inner within outer train")
                    };
                    InnerFold {
                        train: f.train.iter().map(pos).collect(),
                        validation: f.validation.iter().map(pos).collect(),
                    }
                })
                .collect();
            let mut tuning = config.tuning.clone();
            tuning.seed = config.tuning.seed ^ (fi as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
            tag(
                &mut log,
                fi,
                Phase::Tuning,
                &train.iter().collect::<Vec<_>>(),
            );
            let tuned = tune_thresholds(&train, &inner, labels, vocab, &tuning)?;

            tag(
                &mut log,
                fi,
                Phase::Mining,
                &train.iter().collect::<Vec<_>>(),
            );
            tag(&mut log, fi, Phase::Testing, &test);
            let (model, records) =
                evaluate_split(&train, &test, labels, vocab, &tuned.thresholds, fi)?;
            let predicted: Vec<Option<Label>> = records
                .iter()
                .flat_map(|r| r.segments.iter().map(|s| s.predicted.clone()))
                .collect();
            let truth: Vec<Label> = records
                .iter()
                .flat_map(|r| r.segments.iter().map(|s| s.truth.clone()))
                .collect();
            let report = FoldReport {
                fold: fi,
                accuracy: accuracy(&predicted, &truth)?,
                thresholds: labels
                    .iter()
                    .cloned()
                    .zip(tuned.thresholds.iter().copied())
                    .collect(),
                constraints: model.constraints.len(),
                trials: tuned.trials,
            };
            Ok((report, records, log))
        })
        .collect();

    let mut fold_reports = Vec::new();
    let mut images = Vec::new();
    let mut phase_log = Vec::new();
    for r in per_fold {
        let (f, im, log) = r?;
        fold_reports.push(f);
        images.extend(im);
        phase_log.extend(log);
    }
    let mean_accuracy = mean(&fold_reports.iter().map(|f| f.accuracy).collect::<Vec<_>>());
    Ok(EvaluationReport {
        config: config.clone(),
        relations: vocab.relations().iter().map(|r| r.id.clone()).collect(),
        labels: labels.to_vec(),
        folds: fold_reports,
        images,
        mean_accuracy,
        phase_log,
    })
}

/// Evaluates every image once, then runs [`nested_cv_evaluated`].
pub fn nested_cv(
    sets: &[SegmentSet<f64>],
    labels: &[Label],
    vocab: &Vocabulary,
    config: &CrossValidationConfig,
) -> Result<EvaluationReport> {
    let evals = evaluate_dataset(sets, vocab)?;
    nested_cv_evaluated(&evals, labels, vocab, config)
}
