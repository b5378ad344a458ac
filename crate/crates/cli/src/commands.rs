use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use serde::Serialize;
use serde_json::json;

use fuzzyrel::dataset::{
    kfold, load_all, load_dataset, synthesize, write_dataset, Manifest, SyntheticLayoutConfig,
};
use fuzzyrel::explain::{explain_solution, Explanation, HedgeScale};
use fuzzyrel::fcsp::{GroundedConstraint, Solution};
use fuzzyrel::harness::{
    accuracy, evaluate_dataset, nested_cv_evaluated, tune_thresholds, CrossValidationConfig,
    Strategy, TuningConfig,
};
use fuzzyrel::labels::organ_labels;
use fuzzyrel::model::TrainedModel;
use fuzzyrel::spatial::{evaluate_vocabulary, SegmentId, Vocabulary};
use fuzzyrel::{Error, Label, Segments};

use crate::{AnnotateArgs, CrossvalArgs, Format, StrategyArg, Switch, SynthArgs, TrainArgs};

pub const ANNOTATION_SCHEMA: &str = "fuzzyrel.annotation";
pub const ANNOTATION_VERSION: u32 = 1;

fn require_file(path: &Path, what: &str) -> Result<()> {
    ensure!(
        path.is_file(),
        "{what} {} does not exist or is not a file",
        path.display()
    );
    Ok(())
}

fn prepare_output(path: &Path) -> Result<()> {
    ensure!(!path.is_dir(), "output {} is a directory", path.display());
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)
            .with_context(|| format!("cannot create {}", parent.display()))?;
    }
    Ok(())
}

/// A vocabulary file, or one of the built-in names `default` and `directional-only`.
fn resolve_vocabulary(arg: Option<&Path>) -> Result<Vocabulary> {
    let Some(path) = arg else {
        return Ok(Vocabulary::default_vocabulary());
    };
    if !path.exists() {
        match path.to_str() {
            Some("default") => return Ok(Vocabulary::default_vocabulary()),
            Some("directional-only") => return Ok(Vocabulary::directional_only()),
            _ => {}
        }
    }
    require_file(path, "vocabulary")?;
    Ok(Vocabulary::load(path)?)
}

fn strategy(arg: StrategyArg) -> Strategy {
    match arg {
        StrategyArg::GpEi => Strategy::GaussianProcessEi,
        StrategyArg::Random => Strategy::RandomSearch,
    }
}

fn check_threshold(label: &str, v: f64) -> Result<f64> {
    ensure!(
        v > 0.0 && v <= 1.0,
        "threshold {v} for {label} is outside (0, 1]"
    );
    Ok(v)
}

/// `0.9`, `0.96,0.86,...` (one per label, in label order) or `liver=0.96,spleen=0.86,...`.
pub fn parse_thresholds(text: &str, labels: &[Label]) -> Result<Vec<f64>> {
    let parts: Vec<&str> = text
        .split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .collect();
    ensure!(!parts.is_empty(), "empty threshold list");
    let number = |s: &str| {
        s.parse::<f64>()
            .with_context(|| format!("invalid threshold {s:?}"))
    };
    if parts.iter().any(|p| p.contains('=')) {
        let mut out: Vec<Option<f64>> = vec![None; labels.len()];
        for p in &parts {
            let (k, v) = p
                .split_once('=')
                .with_context(|| format!("expected label=value, got {p:?}"))?;
            let i = labels
                .iter()
                .position(|l| l.key() == k.trim())
                .with_context(|| format!("unknown label {:?}", k.trim()))?;
            ensure!(out[i].is_none(), "threshold for {k} given twice");
            out[i] = Some(check_threshold(k, number(v.trim())?)?);
        }
        let missing: Vec<&str> = labels
            .iter()
            .zip(&out)
            .filter(|(_, v)| v.is_none())
            .map(|(l, _)| l.key())
            .collect();
        ensure!(
            missing.is_empty(),
            "no threshold for {}",
            missing.join(", ")
        );
        return Ok(out.into_iter().flatten().collect());
    }
    match parts.len() {
        1 => {
            let v = check_threshold("every class", number(parts[0])?)?;
            Ok(vec![v; labels.len()])
        }
        n if n == labels.len() => labels
            .iter()
            .zip(&parts)
            .map(|(l, p)| check_threshold(l.key(), number(p)?))
            .collect(),
        n => bail!("{n} thresholds given for {} labels", labels.len()),
    }
}

fn print_structured<S: Serialize>(value: &S) -> Result<()> {
    println!("{}", serde_json::to_string(value)?);
    Ok(())
}

pub fn synth(args: &SynthArgs) -> Result<()> {
    ensure!(
        !args.out.is_file(),
        "output {} is a file, expected a directory",
        args.out.display()
    );
    let mut config = SyntheticLayoutConfig::with_seed(args.seed);
    config.width = args.size as usize;
    config.height = args.size as usize;
    if args.no_jitter {
        config = config.without_jitter();
    }
    let sets = synthesize::<f64>(&config, args.n as usize)?;
    fs::create_dir_all(&args.out)
        .with_context(|| format!("cannot create {}", args.out.display()))?;
    let manifest = write_dataset(&sets, &args.out, "synthetic")?;
    match args.format {
        Format::Text => println!("wrote {} images to {}", sets.len(), manifest.display()),
        Format::Structured => print_structured(&json!({
            "images": sets.len(),
            "seed": args.seed,
            "manifest": manifest,
        }))?,
    }
    Ok(())
}

pub fn train(args: &TrainArgs) -> Result<()> {
    require_file(&args.manifest, "manifest")?;
    let vocab = resolve_vocabulary(args.vocab.as_deref())?;
    let labels = organ_labels();
    let fixed = match (&args.thresholds, args.tune) {
        (Some(text), false) => Some(parse_thresholds(text, &labels)?),
        (None, true) => None,
        _ => bail!("pass either --thresholds or --tune"),
    };
    let tuning = TuningConfig {
        iterations: args.iterations,
        strategy: strategy(args.strategy),
        seed: args.seed,
        ..TuningConfig::default()
    };
    if args.tune {
        tuning.validate()?;
    }
    prepare_output(&args.out)?;

    let mut sets = load_dataset::<f64>(&args.manifest, &labels)?;
    if let Some(n) = args.take {
        sets.truncate(n);
    }
    ensure!(
        !sets.is_empty(),
        "no fully labelled image in {}",
        args.manifest.display()
    );
    log::info!(
        "evaluating {} relations on {} images",
        vocab.len(),
        sets.len()
    );
    let evals = evaluate_dataset(&sets, &vocab)?;

    let (thresholds, tuned) = match fixed {
        Some(t) => (t, None),
        None => {
            let inner = kfold(evals.len(), args.inner, args.seed)?;
            let result = tune_thresholds(&evals, &inner, &labels, &vocab, &tuning)?;
            (result.thresholds.clone(), Some(result))
        }
    };
    let model = TrainedModel::train(&evals, &labels, &vocab, &thresholds)?;
    model.save(&args.out)?;

    match args.format {
        Format::Text => {
            println!(
                "trained on {} images, {} relations",
                evals.len(),
                vocab.len()
            );
            if let Some(t) = &tuned {
                println!(
                    "tuning: {} trials, best inner accuracy {:.4}",
                    t.trials.len(),
                    t.objective
                );
            }
            for c in &model.classes {
                let size = c.f_max.first().map_or(0, |s| s.len());
                print!(
                    "  {:<10} threshold {:.4}  {} maximal sets of {} relations",
                    c.label.key(),
                    c.threshold.value(),
                    c.f_max.len(),
                    size
                );
                match &c.warning {
                    Some(w) => println!("  [{w}]"),
                    None => println!(),
                }
            }
            println!(
                "{} constraints, model written to {}",
                model.constraints.len(),
                args.out.display()
            );
        }
        Format::Structured => print_structured(&json!({
            "images": evals.len(),
            "relations": vocab.len(),
            "thresholds": labels.iter().map(|l| l.key()).zip(&thresholds).collect::<Vec<_>>(),
            "tuning_objective": tuned.as_ref().map(|t| t.objective),
            "constraints": model.constraints.len(),
            "underfit": model.classes.iter().filter(|c| c.is_underfit()).map(|c| c.label.key()).collect::<Vec<_>>(),
            "model": args.out,
        }))?,
    }
    Ok(())
}

#[derive(Serialize)]
struct SegmentLine {
    segment: SegmentId,
    label: Label,
    #[serde(skip_serializing_if = "Option::is_none")]
    truth: Option<Label>,
}

#[derive(Serialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum AnnotationLine<'a> {
    Header {
        schema: &'static str,
        version: u32,
        labels: &'a [Label],
        relations: Vec<&'a str>,
    },
    Image {
        image: &'a str,
        consistency: f64,
        segments: Vec<SegmentLine>,
        constraints: &'a [GroundedConstraint<f64>],
        #[serde(skip_serializing_if = "Option::is_none")]
        explanations: Option<&'a [Explanation<f64>]>,
    },
    Summary {
        images: usize,
        #[serde(skip_serializing_if = "Option::is_none")]
        accuracy: Option<f64>,
    },
}

struct Annotated {
    solution: Solution<f64>,
    truth: Option<Vec<(SegmentId, Label)>>,
    explanations: Option<Vec<Explanation<f64>>>,
}

fn annotate_one(
    model: &TrainedModel<f64>,
    set: &Segments,
    scale: &HedgeScale<f64>,
    explain: bool,
) -> Result<Annotated> {
    let k = model.labels.len();
    if set.len() != k {
        let err = Error::CountMismatch {
            variables: set.len(),
            labels: k,
        };
        bail!(
            "image {}: {err}; every image must contain exactly one segment per label ({k}), \
             so merge over-segmented organs or add the missing masks before annotating",
            set.image_id()
        );
    }
    let table = evaluate_vocabulary(&set.unlabeled(), &model.vocabulary)
        .with_context(|| format!("image {}", set.image_id()))?;
    let solution = model
        .annotate(&table)
        .with_context(|| format!("image {}", set.image_id()))?;
    let truth = set.label_map().map(|m| {
        let mut v: Vec<(SegmentId, Label)> = m.into_iter().collect();
        v.sort();
        v
    });
    let explanations = if explain {
        Some(explain_solution(&solution, &model.vocabulary, scale)?)
    } else {
        None
    };
    Ok(Annotated {
        solution,
        truth,
        explanations,
    })
}

fn render_text(results: &[Annotated], acc: Option<f64>) -> String {
    let mut out = String::new();
    for r in results {
        let sol = &r.solution;
        out.push_str(&format!(
            "image {} (consistency {:.4})\n",
            sol.image_id,
            sol.consistency.value()
        ));
        for (s, l) in &sol.assignment {
            let truth = r
                .truth
                .as_ref()
                .and_then(|t| t.iter().find(|(id, _)| id == s))
                .map(|(_, l)| l);
            match truth {
                Some(t) if t != l => out.push_str(&format!(
                    "  organ {s}: {}  (truth: {})\n",
                    l.display_name(),
                    t.display_name()
                )),
                _ => out.push_str(&format!("  organ {s}: {}\n", l.display_name())),
            }
        }
        if let Some(ex) = &r.explanations {
            for e in ex {
                out.push_str(&format!("  {}\n", e.text));
            }
        }
    }
    if let Some(a) = acc {
        out.push_str(&format!("accuracy {a:.4} over {} images\n", results.len()));
    }
    out
}

fn render_structured(
    model: &TrainedModel<f64>,
    results: &[Annotated],
    acc: Option<f64>,
) -> Result<String> {
    let mut lines = vec![serde_json::to_string(&AnnotationLine::Header {
        schema: ANNOTATION_SCHEMA,
        version: ANNOTATION_VERSION,
        labels: &model.labels,
        relations: model
            .vocabulary
            .relations()
            .iter()
            .map(|r| r.id.as_str())
            .collect(),
    })?];
    for r in results {
        let sol = &r.solution;
        let segments = sol
            .assignment
            .iter()
            .map(|(s, l)| SegmentLine {
                segment: *s,
                label: l.clone(),
                truth: r
                    .truth
                    .as_ref()
                    .and_then(|t| t.iter().find(|(id, _)| id == s))
                    .map(|(_, t)| t.clone()),
            })
            .collect();
        lines.push(serde_json::to_string(&AnnotationLine::Image {
            image: &sol.image_id,
            consistency: sol.consistency.value(),
            segments,
            constraints: &sol.grounded,
            explanations: r.explanations.as_deref(),
        })?);
    }
    lines.push(serde_json::to_string(&AnnotationLine::Summary {
        images: results.len(),
        accuracy: acc,
    })?);
    let mut text = lines.join("\n");
    text.push('\n');
    Ok(text)
}

pub fn annotate(args: &AnnotateArgs) -> Result<()> {
    require_file(&args.model, "model")?;
    require_file(&args.manifest, "manifest")?;
    if let Some(out) = &args.out {
        prepare_output(out)?;
    }
    let model = TrainedModel::<f64>::load(&args.model)?;
    let manifest = Manifest::load(&args.manifest)?;
    let sets: Vec<Segments> = load_all(&manifest)?.into_iter().skip(args.skip).collect();
    ensure!(
        !sets.is_empty(),
        "no image to annotate in {}",
        args.manifest.display()
    );
    let scale = HedgeScale::default();

    let results = sets
        .iter()
        .map(|s| annotate_one(&model, s, &scale, args.explain == Switch::On))
        .collect::<Result<Vec<_>>>()?;

    let acc = if results.iter().all(|r| r.truth.is_some()) {
        let (mut pred, mut truth) = (Vec::new(), Vec::new());
        for r in &results {
            for (s, t) in r.truth.as_deref().unwrap_or_default() {
                pred.push(r.solution.label_of(*s).cloned());
                truth.push(t.clone());
            }
        }
        Some(accuracy(&pred, &truth)?)
    } else {
        None
    };

    let text = match args.format {
        Format::Text => render_text(&results, acc),
        Format::Structured => render_structured(&model, &results, acc)?,
    };
    match &args.out {
        Some(path) => {
            fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))?
        }
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn tsv_path(report: &Path) -> PathBuf {
    report.with_extension("tsv")
}

pub fn crossval(args: &CrossvalArgs) -> Result<()> {
    require_file(&args.manifest, "manifest")?;
    let vocab = resolve_vocabulary(args.vocab.as_deref())?;
    ensure!(
        tsv_path(&args.out) != args.out,
        "report path {} must not end in .tsv",
        args.out.display()
    );
    let config = CrossValidationConfig {
        outer: args.outer,
        inner: args.inner,
        seed: args.seed,
        tuning: TuningConfig {
            iterations: args.iterations,
            strategy: strategy(args.strategy),
            seed: args.seed,
            ..TuningConfig::default()
        },
    };
    config.tuning.validate()?;
    prepare_output(&args.out)?;

    let labels = organ_labels();
    let sets = load_dataset::<f64>(&args.manifest, &labels)?;
    log::info!(
        "evaluating {} relations on {} images",
        vocab.len(),
        sets.len()
    );
    let evals = evaluate_dataset(&sets, &vocab)?;
    let report = nested_cv_evaluated(&evals, &labels, &vocab, &config)?;

    fs::write(&args.out, report.to_jsonl())
        .with_context(|| format!("cannot write {}", args.out.display()))?;
    let tsv = tsv_path(&args.out);
    fs::write(&tsv, report.to_tsv()).with_context(|| format!("cannot write {}", tsv.display()))?;

    match args.format {
        Format::Text => {
            println!(
                "{}-fold outer / {}-fold inner cross-validation on {} images, {} relations",
                args.outer,
                args.inner,
                evals.len(),
                vocab.len()
            );
            for f in &report.folds {
                let ts: Vec<String> = f
                    .thresholds
                    .iter()
                    .map(|(l, t)| format!("{}={t:.3}", l.key()))
                    .collect();
                println!(
                    "  fold {}: accuracy {:.4}, {} constraints, thresholds {}",
                    f.fold,
                    f.accuracy,
                    f.constraints,
                    ts.join(" ")
                );
            }
            println!("mean accuracy {:.4}", report.mean_accuracy);
            println!(
                "report written to {} and {}",
                args.out.display(),
                tsv.display()
            );
        }
        Format::Structured => print_structured(&json!({
            "images": evals.len(),
            "folds": report.folds.iter().map(|f| f.accuracy).collect::<Vec<_>>(),
            "mean_accuracy": report.mean_accuracy,
            "report": args.out,
            "table": tsv,
        }))?,
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_forms() {
        let labels = organ_labels();
        assert_eq!(parse_thresholds("0.9", &labels).unwrap(), vec![0.9; 9]);
        let list = "0.96,0.86,0.80,0.92,0.89,0.98,0.97,0.92,0.88";
        assert_eq!(parse_thresholds(list, &labels).unwrap()[5], 0.98);
        let pairs = "liver=0.96,spleen=0.86,bladder=0.8,r_kidney=0.92,l_kidney=0.89,\
                     r_lung=0.98,l_lung=0.97,r_psoas=0.92,l_psoas=0.88";
        assert_eq!(
            parse_thresholds(pairs, &labels).unwrap(),
            parse_thresholds(list, &labels).unwrap()
        );
    }

    #[test]
    fn threshold_errors() {
        let labels = organ_labels();
        assert!(parse_thresholds("1.01", &labels).is_err());
        assert!(parse_thresholds("0", &labels).is_err());
        assert!(parse_thresholds("0.9,0.8", &labels).is_err());
        assert!(parse_thresholds("liver=0.9", &labels).is_err());
        assert!(parse_thresholds("heart=0.9", &labels).is_err());
        assert!(parse_thresholds("abc", &labels).is_err());
        assert!(parse_thresholds("", &labels).is_err());
    }
}
