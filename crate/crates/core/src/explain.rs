//! "Output because cause, …" explanations for each annotated segment.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fcsp::{GroundedConstraint, Solution};
use crate::fuzzy::FuzzyDegree;
use crate::labels::Label;
use crate::scalar::Scalar;
use crate::spatial::{SegmentId, Vocabulary};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hedge {
    VeryLikely,
    Likely,
    Possibly,
    Uncertain,
}

impl Hedge {
    pub fn phrase(self) -> &'static str {
        match self {
            Hedge::VeryLikely => "very likely",
            Hedge::Likely => "likely",
            Hedge::Possibly => "possibly",
            Hedge::Uncertain => "uncertain",
        }
    }
}

impl fmt::Display for Hedge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.phrase())
    }
}

/// Lower bounds mapped to hedges, checked from the top.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HedgeScale<T> {
    bounds: Vec<(T, Hedge)>,
}

impl<T: Scalar> HedgeScale<T> {
    /// Bounds must strictly decrease and end at 0 so that every degree is covered.
    pub fn new(bounds: Vec<(T, Hedge)>) -> Result<Self> {
        if bounds.is_empty() {
            return Err(Error::HedgeScale("no bounds".into()));
        }
        for w in bounds.windows(2) {
            if w[1].0 >= w[0].0 {
                return Err(Error::HedgeScale(format!(
                    "bounds must strictly decrease, got {} then {}",
                    w[0].0, w[1].0
                )));
            }
        }
        if bounds.iter().any(|(b, _)| *b < T::zero() || *b > T::one()) {
            return Err(Error::HedgeScale("bounds must lie in [0, 1]".into()));
        }
        if bounds.last().map(|(b, _)| *b) != Some(T::zero()) {
            return Err(Error::HedgeScale("lowest bound must be 0".into()));
        }
        Ok(Self { bounds })
    }

    pub fn bounds(&self) -> &[(T, Hedge)] {
        &self.bounds
    }

    pub fn hedge(&self, degree: FuzzyDegree<T>) -> Hedge {
        let v = degree.value();
        self.bounds
            .iter()
            .find(|(b, _)| v >= *b)
            .map(|(_, h)| *h)
            .unwrap_or(self.bounds[self.bounds.len() - 1].1)
    }
}

impl<T: Scalar> Default for HedgeScale<T> {
    fn default() -> Self {
        Self::new(vec![
            (T::lit(0.9), Hedge::VeryLikely),
            (T::lit(0.7), Hedge::Likely),
            (T::lit(0.5), Hedge::Possibly),
            (T::zero(), Hedge::Uncertain),
        ])
        .expect("default scale is valid")
    }
}

/// Constraints whose label tuple contains `label`, most satisfied first.
pub fn constraints_for_label<'a, T: Scalar>(
    solution: &'a Solution<T>,
    label: &Label,
) -> Result<Vec<&'a GroundedConstraint<T>>> {
    if solution.segment_of(label).is_none() {
        return Err(Error::Unassigned(label.to_string()));
    }
    let mut out: Vec<&GroundedConstraint<T>> = solution
        .grounded
        .iter()
        .filter(|g| g.constraint.involves(label))
        .collect();
    out.sort_by(|a, b| {
        b.degree
            .partial_cmp(&a.degree)
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    Ok(out)
}

/// Hedge of the least satisfied degree.
pub fn certainty<T: Scalar>(degrees: &[FuzzyDegree<T>], scale: &HedgeScale<T>) -> Result<Hedge> {
    let min = crate::fuzzy::aggregate_min(degrees.iter().copied())?;
    Ok(scale.hedge(min))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cause<T> {
    pub relation: String,
    pub labels: Vec<Label>,
    pub segments: Vec<SegmentId>,
    pub degree: FuzzyDegree<T>,
    pub clause: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Explanation<T> {
    pub segment: SegmentId,
    pub label: Label,
    pub hedge: Hedge,
    /// Empty only when no learned constraint mentions the label.
    pub causes: Vec<Cause<T>>,
    pub text: String,
}

fn partner_phrase(label: &Label, segment: SegmentId) -> String {
    format!("the {} (organ {})", label.display_name(), segment)
}

/// Relation template with "it" for the explained segment and "the <label> (organ N)" elsewhere.
pub fn render_clause<T: Scalar>(
    vocab: &Vocabulary,
    grounded: &GroundedConstraint<T>,
    explained: SegmentId,
) -> Result<String> {
    let desc = vocab.get(&grounded.constraint.relation).ok_or_else(|| {
        Error::Template(format!(
            "relation {} is not in the vocabulary",
            grounded.constraint.relation
        ))
    })?;
    let args: Vec<String> = grounded
        .constraint
        .labels
        .iter()
        .zip(&grounded.segments)
        .map(|(l, &s)| {
            if s == explained {
                "it".to_string()
            } else {
                partner_phrase(l, s)
            }
        })
        .collect();
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    desc.render(&refs)
}

/// "Organ <id> is <hedge> to be annotated as the <label> because <c1>, <c2> and <c3>."
pub fn realize(segment: SegmentId, label: &Label, hedge: Hedge, clauses: &[String]) -> String {
    let head = format!(
        "Organ {segment} is {} to be annotated as the {}",
        hedge.phrase(),
        label.display_name()
    );
    match clauses {
        [] => format!("{head} because no learned relations support this label."),
        [only] => format!("{head} because {only}."),
        [init @ .., last] => format!("{head} because {} and {last}.", init.join(", ")),
    }
}

pub fn explain_segment<T: Scalar>(
    solution: &Solution<T>,
    vocab: &Vocabulary,
    segment: SegmentId,
    scale: &HedgeScale<T>,
) -> Result<Explanation<T>> {
    let label = solution
        .label_of(segment)
        .ok_or_else(|| Error::Unassigned(format!("segment {segment}")))?
        .clone();
    let grounded = constraints_for_label(solution, &label)?;
    let causes = grounded
        .iter()
        .map(|g| {
            Ok(Cause {
                relation: g.constraint.relation.clone(),
                labels: g.constraint.labels.clone(),
                segments: g.segments.clone(),
                degree: g.degree,
                clause: render_clause(vocab, g, segment)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let hedge = if causes.is_empty() {
        Hedge::Uncertain
    } else {
        certainty(&causes.iter().map(|c| c.degree).collect::<Vec<_>>(), scale)?
    };
    let clauses: Vec<String> = causes.iter().map(|c| c.clause.clone()).collect();
    let text = realize(segment, &label, hedge, &clauses);
    Ok(Explanation {
        segment,
        label,
        hedge,
        causes,
        text,
    })
}

/// One explanation per assigned segment, in segment order.
pub fn explain_solution<T: Scalar>(
    solution: &Solution<T>,
    vocab: &Vocabulary,
    scale: &HedgeScale<T>,
) -> Result<Vec<Explanation<T>>> {
    solution
        .assignment
        .iter()
        .map(|(s, _)| explain_segment(solution, vocab, *s, scale))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fcsp::FlexibleConstraint;

    fn d(v: f64) -> FuzzyDegree<f64> {
        FuzzyDegree::new(v).unwrap()
    }

    fn g(rel: &str, labels: &[&str], segs: &[u32], deg: f64) -> GroundedConstraint<f64> {
        GroundedConstraint {
            constraint: FlexibleConstraint {
                relation: rel.into(),
                labels: labels.iter().map(|l| Label::new(*l)).collect(),
                sources: vec![],
            },
            segments: segs.to_vec(),
            degree: d(deg),
        }
    }

    fn lung_solution() -> Solution<f64> {
        Solution {
            image_id: "img".into(),
            assignment: vec![
                (1, "l_lung".into()),
                (2, "r_lung".into()),
                (3, "spleen".into()),
                (4, "bladder".into()),
            ],
            consistency: d(0.7),
            grounded: vec![
                g("symmetrical_to", &["l_lung", "r_lung"], &[1, 2], 0.93),
                g("left_of", &["l_lung", "r_lung"], &[1, 2], 0.98),
                g("above", &["l_lung", "spleen"], &[1, 3], 0.91),
                g("stretched", &["bladder"], &[4], 0.7),
            ],
        }
    }

    #[test]
    fn hedges() {
        let s = HedgeScale::<f64>::default();
        assert_eq!(
            certainty(&[d(0.95), d(0.92)], &s).unwrap(),
            Hedge::VeryLikely
        );
        assert_eq!(certainty(&[d(0.95), d(0.6)], &s).unwrap(), Hedge::Possibly);
        assert_eq!(certainty(&[d(1.0)], &s).unwrap(), Hedge::VeryLikely);
        assert_eq!(certainty(&[d(0.7)], &s).unwrap(), Hedge::Likely);
        assert_eq!(certainty(&[d(0.0)], &s).unwrap(), Hedge::Uncertain);
        assert!(certainty::<f64>(&[], &s).is_err());
    }

    #[test]
    fn hedge_monotone() {
        let s = HedgeScale::<f64>::default();
        let mut prev = Hedge::Uncertain;
        for i in 0..=100 {
            let h = s.hedge(d(i as f64 / 100.0));
            assert!(h <= prev);
            prev = h;
        }
    }

    #[test]
    fn scale_validation() {
        assert!(HedgeScale::new(vec![
            (0.5, Hedge::Likely),
            (0.7, Hedge::Possibly),
            (0.0, Hedge::Uncertain)
        ])
        .is_err());
        assert!(HedgeScale::new(vec![(0.5, Hedge::Likely), (0.1, Hedge::Uncertain)]).is_err());
        assert!(HedgeScale::<f64>::new(vec![]).is_err());
        assert!(HedgeScale::new(vec![(0.0, Hedge::Possibly)]).is_ok());
    }

    #[test]
    fn constraints_sorted_and_filtered() {
        let sol = lung_solution();
        let cs = constraints_for_label(&sol, &"l_lung".into()).unwrap();
        let degs: Vec<f64> = cs.iter().map(|c| c.degree.value()).collect();
        assert_eq!(degs, vec![0.98, 0.93, 0.91]);
        assert_eq!(
            constraints_for_label(&sol, &"spleen".into()).unwrap().len(),
            1
        );
        assert!(constraints_for_label(&sol, &"liver".into()).is_err());
    }

    #[test]
    fn lung_sentence() {
        let sol = lung_solution();
        let vocab = Vocabulary::default_vocabulary();
        let e = explain_segment(&sol, &vocab, 1, &HedgeScale::default()).unwrap();
        assert_eq!(
            e.text,
            "Organ 1 is very likely to be annotated as the left lung because it is to the left of the right lung (organ 2), \
             it is symmetrical to the right lung (organ 2) and it is above the spleen (organ 3)."
        );
        assert_eq!(e.causes.len(), 3);
        assert!(e.text.contains("because"));
    }

    #[test]
    fn object_role_and_unary_clauses() {
        let sol = lung_solution();
        let vocab = Vocabulary::default_vocabulary();
        let e = explain_segment(&sol, &vocab, 3, &HedgeScale::default()).unwrap();
        assert_eq!(
            e.text,
            "Organ 3 is very likely to be annotated as the spleen because the left lung (organ 1) is above it."
        );
        let e = explain_segment(&sol, &vocab, 4, &HedgeScale::default()).unwrap();
        assert_eq!(
            e.text,
            "Organ 4 is likely to be annotated as the bladder because it is stretched."
        );
    }

    #[test]
    fn fallback_without_constraints() {
        let mut sol = lung_solution();
        sol.assignment.push((5, "liver".into()));
        let e = explain_segment(
            &sol,
            &Vocabulary::default_vocabulary(),
            5,
            &HedgeScale::default(),
        )
        .unwrap();
        assert!(e.causes.is_empty());
        assert_eq!(e.hedge, Hedge::Uncertain);
        assert_eq!(
            e.text,
            "Organ 5 is uncertain to be annotated as the liver because no learned relations support this label."
        );
    }

    #[test]
    fn every_cause_is_a_grounded_constraint() {
        let sol = lung_solution();
        let all = explain_solution(
            &sol,
            &Vocabulary::default_vocabulary(),
            &HedgeScale::default(),
        )
        .unwrap();
        for e in &all {
            for c in &e.causes {
                assert!(sol
                    .grounded
                    .iter()
                    .any(|g| g.constraint.relation == c.relation
                        && g.segments == c.segments
                        && g.degree == c.degree));
            }
        }
        let again = explain_solution(
            &sol,
            &Vocabulary::default_vocabulary(),
            &HedgeScale::default(),
        )
        .unwrap();
        assert_eq!(all, again);
    }
}
