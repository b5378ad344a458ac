//! Fuzzy spatial relations between segments and their evaluation over a vocabulary.

mod landscape;
pub mod simplex;
mod stretched;
mod symmetry;
mod vocabulary;

use std::collections::HashMap;

use rayon::prelude::*;

pub use landscape::{
    degree_of_intersection, directional_landscape, directional_landscapes, distance_landscape,
    MAX_REFERENCE_SAMPLES,
};
pub use stretched::stretched_degree;
pub use symmetry::{
    centroid_bisector, reflect_field, symmetry_degree, symmetry_degree_with, symmetry_measure,
    Line, SymmetrySearch,
};
pub use vocabulary::{RelationDescriptor, RelationKind, Vocabulary};

use crate::error::{Error, Result};
use crate::fuzzy::{field_sum, FuzzyDegree, ScalarField};
use crate::labels::Label;
use crate::scalar::Scalar;

pub type SegmentId = u32;

#[derive(Clone, Debug, PartialEq)]
pub struct Segment<T> {
    pub id: SegmentId,
    pub mask: ScalarField<T>,
    pub label: Option<Label>,
}

/// The segments of one image, all on the same grid.
#[derive(Clone, Debug, PartialEq)]
pub struct SegmentSet<T> {
    image_id: String,
    segments: Vec<Segment<T>>,
}

impl<T: Scalar> SegmentSet<T> {
    pub fn new(image_id: impl Into<String>, segments: Vec<Segment<T>>) -> Result<Self> {
        let image_id = image_id.into();
        if let Some(first) = segments.first() {
            for s in &segments {
                first.mask.same_dims(&s.mask).map_err(|e| {
                    Error::SegmentSet(format!("image {image_id}, segment {}: {e}", s.id))
                })?;
            }
        }
        let mut ids = std::collections::HashSet::new();
        for s in &segments {
            if field_sum(&s.mask) <= T::zero() {
                return Err(Error::SegmentSet(format!(
                    "image {image_id}, segment {}: empty mask",
                    s.id
                )));
            }
            if !ids.insert(s.id) {
                return Err(Error::SegmentSet(format!(
                    "image {image_id}: duplicate segment id {}",
                    s.id
                )));
            }
        }
        Ok(Self { image_id, segments })
    }

    pub fn image_id(&self) -> &str {
        &self.image_id
    }

    pub fn segments(&self) -> &[Segment<T>] {
        &self.segments
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn dims(&self) -> Option<(usize, usize)> {
        self.segments
            .first()
            .map(|s| (s.mask.width(), s.mask.height()))
    }

    /// Ground-truth mapping segment id → label, when every segment is labelled.
    pub fn label_map(&self) -> Option<HashMap<SegmentId, Label>> {
        self.segments
            .iter()
            .map(|s| s.label.clone().map(|l| (s.id, l)))
            .collect()
    }

    /// Copy without ground truth, as seen by the annotator.
    pub fn unlabeled(&self) -> Self {
        Self {
            image_id: self.image_id.clone(),
            segments: self
                .segments
                .iter()
                .map(|s| Segment {
                    id: s.id,
                    mask: s.mask.clone(),
                    label: None,
                })
                .collect(),
        }
    }

    pub fn cast<U: Scalar>(&self) -> SegmentSet<U> {
        SegmentSet {
            image_id: self.image_id.clone(),
            segments: self
                .segments
                .iter()
                .map(|s| Segment {
                    id: s.id,
                    mask: s.mask.cast(),
                    label: s.label.clone(),
                })
                .collect(),
        }
    }
}

/// Degrees of one relation on every ordered tuple of distinct segments.
#[derive(Clone, Debug, PartialEq)]
struct RelationValues<T> {
    arity: usize,
    /// Unary: index `i`. Binary: index `i * k + j` (diagonal unused).
    values: Vec<T>,
}

/// Every relation of a vocabulary evaluated on one image.
#[derive(Clone, Debug, PartialEq)]
pub struct EvaluationTable<T> {
    image_id: String,
    segment_ids: Vec<SegmentId>,
    relation_ids: Vec<String>,
    relations: Vec<RelationValues<T>>,
}

impl<T: Scalar> EvaluationTable<T> {
    pub fn image_id(&self) -> &str {
        &self.image_id
    }

    pub fn segment_ids(&self) -> &[SegmentId] {
        &self.segment_ids
    }

    pub fn relation_ids(&self) -> &[String] {
        &self.relation_ids
    }

    pub fn segment_index(&self, id: SegmentId) -> Option<usize> {
        self.segment_ids.iter().position(|s| *s == id)
    }

    pub fn relation_index(&self, id: &str) -> Option<usize> {
        self.relation_ids.iter().position(|r| r == id)
    }

    pub fn arity(&self, relation: usize) -> usize {
        self.relations[relation].arity
    }

    /// Number of `(relation, tuple)` entries.
    pub fn len(&self) -> usize {
        let k = self.segment_ids.len();
        self.relations
            .iter()
            .map(|r| vocabulary::falling_factorial(k, r.arity))
            .sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Degree by relation position and segment positions; `None` for
    /// out-of-range indices, wrong arity or repeated segments.
    #[inline]
    pub fn degree_at(&self, relation: usize, tuple: &[usize]) -> Option<FuzzyDegree<T>> {
        let r = self.relations.get(relation)?;
        let k = self.segment_ids.len();
        if tuple.len() != r.arity || tuple.iter().any(|&i| i >= k) {
            return None;
        }
        match *tuple {
            [i] => Some(FuzzyDegree::clamped(r.values[i])),
            [i, j] if i != j => Some(FuzzyDegree::clamped(r.values[i * k + j])),
            _ => None,
        }
    }

    /// Degree by relation id and segment ids.
    pub fn get(&self, relation: &str, segments: &[SegmentId]) -> Option<FuzzyDegree<T>> {
        let r = self.relation_index(relation)?;
        let idx: Option<Vec<usize>> = segments.iter().map(|s| self.segment_index(*s)).collect();
        self.degree_at(r, &idx?)
    }

    /// All entries as `(relation id, segment ids, degree)` in canonical order.
    pub fn entries(&self) -> Vec<(&str, Vec<SegmentId>, FuzzyDegree<T>)> {
        let k = self.segment_ids.len();
        let mut out = Vec::with_capacity(self.len());
        for (ri, r) in self.relations.iter().enumerate() {
            let id = self.relation_ids[ri].as_str();
            for tuple in ordered_tuples(k, r.arity) {
                let segs = tuple.iter().map(|&i| self.segment_ids[i]).collect();
                out.push((id, segs, self.degree_at(ri, &tuple).expect("valid tuple")));
            }
        }
        out
    }
}

/// Ordered tuples of distinct indices in `0..k` of the given length (1 or 2).
pub(crate) fn ordered_tuples(k: usize, arity: usize) -> Vec<Vec<usize>> {
    match arity {
        1 => (0..k).map(|i| vec![i]).collect(),
        2 => (0..k)
            .flat_map(|i| (0..k).filter(move |&j| j != i).map(move |j| vec![i, j]))
            .collect(),
        _ => Vec::new(),
    }
}

/// Work unit of the evaluation: one landscape (or symmetry/unary source) and its targets.
enum Job<'a> {
    /// Every directional relation around one reference.
    Directional {
        relations: &'a [usize],
        reference: usize,
    },
    Landscape {
        relation: usize,
        reference: usize,
        kind: &'a RelationKind,
    },
    Symmetry {
        relation: usize,
        a: usize,
        b: usize,
    },
    Unary {
        relation: usize,
        segment: usize,
    },
}

/// Degree of intersection of `landscape` with every segment other than `reference`.
fn intersect_targets<T: Scalar>(
    segs: &[Segment<T>],
    reference: usize,
    landscape: std::result::Result<&ScalarField<T>, &Error>,
    mut on_error: impl FnMut(usize, &Error),
) -> Vec<(usize, T)> {
    (0..segs.len())
        .filter(|&s| s != reference)
        .map(|s| {
            let v = match landscape {
                Ok(l) => degree_of_intersection(l, &segs[s].mask).map(FuzzyDegree::value),
                Err(e) => Err(Error::SegmentSet(e.to_string())),
            };
            let v = v.unwrap_or_else(|e| {
                on_error(s, &e);
                T::zero()
            });
            (s, v)
        })
        .collect()
}

fn warn_failed(image: &str, relation: &str, segs: &[SegmentId], err: &Error) {
    log::warn!("image {image}: relation {relation} on {segs:?} failed ({err}); recording degree 0");
}

/// Evaluates every relation of `vocab` on every ordered tuple of distinct segments.
///
/// A binary entry `(R, (s, t))` reads "s R t": the landscape is built around
/// `t` and intersected with `s`.
pub fn evaluate_vocabulary<T: Scalar>(
    segments: &SegmentSet<T>,
    vocab: &Vocabulary,
) -> Result<EvaluationTable<T>> {
    let k = segments.len();
    if k == 0 {
        return Err(Error::SegmentSet(format!(
            "image {}: no segments",
            segments.image_id()
        )));
    }
    let (w, h) = segments.dims().expect("non-empty");
    let diag = T::from_usize_lossy(w * w + h * h).sqrt();
    let segs = segments.segments();
    let seg_ids: Vec<SegmentId> = segs.iter().map(|s| s.id).collect();

    let directional: Vec<usize> = vocab
        .relations()
        .iter()
        .enumerate()
        .filter(|(_, r)| matches!(r.kind, RelationKind::Directional { .. }))
        .map(|(i, _)| i)
        .collect();
    let mut jobs: Vec<Job> = Vec::new();
    if k >= 2 && !directional.is_empty() {
        jobs.extend((0..k).map(|reference| Job::Directional {
            relations: &directional,
            reference,
        }));
    }
    for (ri, rel) in vocab.relations().iter().enumerate() {
        match &rel.kind {
            RelationKind::Directional { .. } => {}
            RelationKind::Distance { .. } => {
                if k >= 2 {
                    jobs.extend((0..k).map(|reference| Job::Landscape {
                        relation: ri,
                        reference,
                        kind: &rel.kind,
                    }));
                }
            }
            RelationKind::Symmetry => {
                for t in ordered_tuples(k, 2) {
                    jobs.push(Job::Symmetry {
                        relation: ri,
                        a: t[0],
                        b: t[1],
                    });
                }
            }
            RelationKind::Stretched => {
                jobs.extend((0..k).map(|segment| Job::Unary {
                    relation: ri,
                    segment,
                }));
            }
        }
    }

    let image = segments.image_id();
    // (relation, flat index, value)
    let results: Vec<Vec<(usize, usize, T)>> = jobs
        .par_iter()
        .map(|job| match job {
            Job::Directional {
                relations,
                reference,
            } => {
                let angles: Vec<T> = relations
                    .iter()
                    .map(|&ri| match vocab.relations()[ri].kind {
                        RelationKind::Directional { direction_deg } => {
                            T::lit(direction_deg.to_radians())
                        }
                        _ => unreachable!("filtered to directional relations"),
                    })
                    .collect();
                let landscapes = directional_landscapes(&segs[*reference].mask, &angles);
                let mut out = Vec::with_capacity(relations.len() * (k - 1));
                for (li, &ri) in relations.iter().enumerate() {
                    let landscape = landscapes.as_ref().map(|ls| &ls[li]);
                    out.extend(
                        intersect_targets(segs, *reference, landscape, |s, e| {
                            warn_failed(
                                image,
                                &vocab.relations()[ri].id,
                                &[seg_ids[s], seg_ids[*reference]],
                                e,
                            )
                        })
                        .into_iter()
                        .map(|(s, v)| (ri, s * k + reference, v)),
                    );
                }
                out
            }
            Job::Landscape {
                relation,
                reference,
                kind,
            } => {
                let rel_id = &vocab.relations()[*relation].id;
                let landscape = match kind {
                    RelationKind::Distance { near, far } => distance_landscape(
                        &segs[*reference].mask,
                        T::lit(*near) * diag,
                        T::lit(*far) * diag,
                    ),
                    _ => unreachable!("landscape jobs are distance relations"),
                };
                intersect_targets(segs, *reference, landscape.as_ref(), |s, e| {
                    warn_failed(image, rel_id, &[seg_ids[s], seg_ids[*reference]], e)
                })
                .into_iter()
                .map(|(s, v)| (*relation, s * k + reference, v))
                .collect()
            }
            Job::Symmetry { relation, a, b } => {
                let v = symmetry_degree(&segs[*a].mask, &segs[*b].mask)
                    .map(|(d, _)| d.value())
                    .unwrap_or_else(|e| {
                        warn_failed(
                            image,
                            &vocab.relations()[*relation].id,
                            &[seg_ids[*a], seg_ids[*b]],
                            &e,
                        );
                        T::zero()
                    });
                vec![(*relation, a * k + b, v)]
            }
            Job::Unary { relation, segment } => {
                let v = stretched_degree(&segs[*segment].mask)
                    .map(FuzzyDegree::value)
                    .unwrap_or_else(|e| {
                        warn_failed(
                            image,
                            &vocab.relations()[*relation].id,
                            &[seg_ids[*segment]],
                            &e,
                        );
                        T::zero()
                    });
                vec![(*relation, *segment, v)]
            }
        })
        .collect();

    let mut relations: Vec<RelationValues<T>> = vocab
        .relations()
        .iter()
        .map(|r| RelationValues {
            arity: r.arity,
            values: vec![T::zero(); if r.arity == 1 { k } else { k * k }],
        })
        .collect();
    for (ri, idx, v) in results.into_iter().flatten() {
        relations[ri].values[idx] = v;
    }
    Ok(EvaluationTable {
        image_id: image.to_string(),
        segment_ids: seg_ids,
        relation_ids: vocab.relations().iter().map(|r| r.id.clone()).collect(),
        relations,
    })
}

/// Builds a table directly from degrees, for tests and tooling.
///
/// `degrees(relation index, tuple of segment positions)` supplies each entry.
pub fn table_from_fn<T: Scalar>(
    image_id: &str,
    segment_ids: Vec<SegmentId>,
    vocab: &Vocabulary,
    mut degrees: impl FnMut(usize, &[usize]) -> T,
) -> Result<EvaluationTable<T>> {
    let k = segment_ids.len();
    let mut relations = Vec::with_capacity(vocab.len());
    for (ri, r) in vocab.relations().iter().enumerate() {
        let mut values = vec![T::zero(); if r.arity == 1 { k } else { k * k }];
        for t in ordered_tuples(k, r.arity) {
            let v = FuzzyDegree::new(degrees(ri, &t))?.value();
            let idx = if r.arity == 1 { t[0] } else { t[0] * k + t[1] };
            values[idx] = v;
        }
        relations.push(RelationValues {
            arity: r.arity,
            values,
        });
    }
    Ok(EvaluationTable {
        image_id: image_id.to_string(),
        segment_ids,
        relation_ids: vocab.relations().iter().map(|r| r.id.clone()).collect(),
        relations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blob(w: usize, h: usize, cx: usize, cy: usize, r: usize) -> ScalarField<f64> {
        ScalarField::from_fn(w, h, |x, y| {
            let (dx, dy) = (x as f64 - cx as f64, y as f64 - cy as f64);
            if dx * dx + dy * dy <= (r * r) as f64 {
                1.0
            } else {
                0.0
            }
        })
        .unwrap()
    }

    fn three_blobs() -> SegmentSet<f64> {
        SegmentSet::new(
            "t",
            vec![
                Segment {
                    id: 1,
                    mask: blob(48, 48, 10, 24, 4),
                    label: None,
                },
                Segment {
                    id: 2,
                    mask: blob(48, 48, 38, 24, 4),
                    label: None,
                },
                Segment {
                    id: 3,
                    mask: blob(48, 48, 24, 40, 5),
                    label: None,
                },
            ],
        )
        .unwrap()
    }

    #[test]
    fn counts_follow_falling_factorials() {
        let set = three_blobs();
        let one_binary = Vocabulary::new(vec![Vocabulary::default_vocabulary()
            .get("left_of")
            .unwrap()
            .clone()])
        .unwrap();
        assert_eq!(evaluate_vocabulary(&set, &one_binary).unwrap().len(), 6);
        assert_eq!(
            evaluate_vocabulary(&set, &one_binary)
                .unwrap()
                .entries()
                .len(),
            6
        );

        let single = SegmentSet::new("s", vec![set.segments()[0].clone()]).unwrap();
        let t = evaluate_vocabulary(&single, &Vocabulary::directional_only()).unwrap();
        assert_eq!(t.len(), 0);
        assert!(t.entries().is_empty());
    }

    #[test]
    fn directional_semantics_subject_then_reference() {
        let t = evaluate_vocabulary(&three_blobs(), &Vocabulary::default_vocabulary()).unwrap();
        assert!(t.get("left_of", &[1, 2]).unwrap().value() > 0.95);
        assert!(t.get("left_of", &[2, 1]).unwrap().value() < 0.05);
        assert!(t.get("right_of", &[2, 1]).unwrap().value() > 0.95);
        assert!(t.get("below", &[3, 1]).unwrap().value() > 0.3);
        assert!(t.get("above", &[1, 3]).unwrap().value() > 0.3);
        assert!(t.get("symmetrical_to", &[1, 2]).unwrap().value() > 0.95);
        assert!(t.get("stretched", &[1]).unwrap().value() < 0.2);
        assert!(t.get("left_of", &[1, 1]).is_none());
        assert!(t.get("nope", &[1, 2]).is_none());
        assert_eq!(t.len(), 6 * 6 + 3);
    }

    #[test]
    fn degenerate_segment_records_zero() {
        // a single-pixel segment cannot be stretched: warning, degree 0, table intact
        let mut px = ScalarField::zeros(48, 48).unwrap();
        px.set(5, 5, FuzzyDegree::one());
        let set = SegmentSet::new(
            "d",
            vec![
                Segment {
                    id: 1,
                    mask: px,
                    label: None,
                },
                Segment {
                    id: 2,
                    mask: blob(48, 48, 30, 30, 5),
                    label: None,
                },
            ],
        )
        .unwrap();
        let t = evaluate_vocabulary(&set, &Vocabulary::default_vocabulary()).unwrap();
        assert_eq!(t.get("stretched", &[1]).unwrap().value(), 0.0);
        assert_eq!(t.len(), 6 * 2 + 2);
    }

    #[test]
    fn segment_set_validation() {
        let a = Segment {
            id: 1,
            mask: blob(10, 10, 5, 5, 2),
            label: None,
        };
        let b = Segment {
            id: 2,
            mask: blob(12, 10, 5, 5, 2),
            label: None,
        };
        assert!(SegmentSet::new("x", vec![a.clone(), b]).is_err());
        let empty = Segment {
            id: 3,
            mask: ScalarField::zeros(10, 10).unwrap(),
            label: None,
        };
        assert!(SegmentSet::new("x", vec![a.clone(), empty]).is_err());
        assert!(SegmentSet::new("x", vec![a.clone(), a]).is_err());
    }

    #[test]
    fn f32_pipeline_agrees_with_f64() {
        let set = three_blobs();
        let vocab = Vocabulary::directional_only();
        let t64 = evaluate_vocabulary(&set, &vocab).unwrap();
        let t32 = evaluate_vocabulary(&set.cast::<f32>(), &vocab).unwrap();
        for ((_, _, a), (_, _, b)) in t64.entries().iter().zip(t32.entries()) {
            assert!((a.value() - b.value() as f64).abs() < 1e-4);
        }
    }
}
