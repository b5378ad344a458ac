//! Fuzzy constraint satisfaction: learned relations become flexible
//! constraints over labels, and segments are assigned labels (all different)
//! so that the least satisfied constraint is as satisfied as possible.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fuzzy::FuzzyDegree;
use crate::labels::Label;
use crate::mining::{ClassModel, RelationItem};
use crate::scalar::Scalar;
use crate::spatial::{EvaluationTable, SegmentId};

/// A constraint `c_R(y_1, …)` over label roles, with the classes whose
/// maximal frequent sets produced it.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FlexibleConstraint {
    pub relation: String,
    pub labels: Vec<Label>,
    pub sources: Vec<Label>,
}

impl FlexibleConstraint {
    pub fn item(&self) -> RelationItem {
        RelationItem::new(self.relation.clone(), self.labels.clone())
    }

    pub fn involves(&self, label: &Label) -> bool {
        self.labels.contains(label)
    }
}

/// Union of the items of every maximal frequent set, one constraint per
/// distinct `(relation, label tuple)`.
pub fn translate_constraints<T: Scalar>(
    models: &[ClassModel<T>],
) -> Result<Vec<FlexibleConstraint>> {
    let mut merged: BTreeMap<RelationItem, BTreeSet<Label>> = BTreeMap::new();
    for model in models {
        for set in &model.f_max {
            for item in &set.items {
                merged
                    .entry(item.clone())
                    .or_default()
                    .insert(model.label.clone());
            }
        }
    }
    if merged.is_empty() {
        return Err(Error::NoConstraints);
    }
    Ok(merged
        .into_iter()
        .map(|(item, sources)| FlexibleConstraint {
            relation: item.relation,
            labels: item.labels,
            sources: sources.into_iter().collect(),
        })
        .collect())
}

#[derive(Clone, Debug)]
struct Compiled<T> {
    /// Label positions, length 1 or 2.
    labels: Vec<usize>,
    /// Unary: `values[s]`. Binary: `values[s1 * k + s2]`.
    values: Vec<T>,
}

impl<T: Scalar> Compiled<T> {
    #[inline]
    fn degree(&self, k: usize, segs: &[usize]) -> T {
        match *segs {
            [s] => self.values[s],
            [s1, s2] => self.values[s1 * k + s2],
            _ => unreachable!("arity 1 or 2"),
        }
    }
}

/// Segment → label domains, `domains[s][l]` true when label `l` is still allowed.
pub type Domains = Vec<Vec<bool>>;

#[derive(Clone, Debug, PartialEq)]
pub enum PruneOutcome {
    Reduced(Domains),
    /// Some domain became empty: no assignment reaches the requested level.
    Inconsistent,
}

/// Variables (segments of a test image), label domains and flexible constraints.
#[derive(Clone, Debug)]
pub struct FcspInstance<T> {
    labels: Vec<Label>,
    constraints: Vec<FlexibleConstraint>,
    table: EvaluationTable<T>,
    compiled: Vec<Compiled<T>>,
    /// Constraint positions touching each label.
    by_label: Vec<Vec<usize>>,
}

impl<T: Scalar> FcspInstance<T> {
    pub fn new(
        labels: Vec<Label>,
        constraints: Vec<FlexibleConstraint>,
        table: EvaluationTable<T>,
    ) -> Result<Self> {
        let k = table.segment_ids().len();
        let mut compiled = Vec::with_capacity(constraints.len());
        let mut by_label = vec![Vec::new(); labels.len()];
        for (ci, c) in constraints.iter().enumerate() {
            let ri = table
                .relation_index(&c.relation)
                .ok_or_else(|| Error::MissingEvaluation(c.relation.clone()))?;
            let arity = table.arity(ri);
            if c.labels.len() != arity {
                return Err(Error::Vocabulary(format!(
                    "constraint {} has {} labels for a relation of arity {arity}",
                    c.item(),
                    c.labels.len()
                )));
            }
            let lab = c
                .labels
                .iter()
                .map(|l| {
                    labels
                        .iter()
                        .position(|x| x == l)
                        .ok_or_else(|| Error::UnknownLabel(l.to_string()))
                })
                .collect::<Result<Vec<_>>>()?;
            if arity == 2 && lab[0] == lab[1] {
                return Err(Error::Vocabulary(format!(
                    "constraint {} repeats a label",
                    c.item()
                )));
            }
            let values = if arity == 1 {
                (0..k)
                    .map(|s| table.degree_at(ri, &[s]).expect("in range").value())
                    .collect()
            } else {
                let mut v = vec![T::zero(); k * k];
                for s1 in 0..k {
                    for s2 in 0..k {
                        if s1 != s2 {
                            v[s1 * k + s2] =
                                table.degree_at(ri, &[s1, s2]).expect("in range").value();
                        }
                    }
                }
                v
            };
            let mut seen = lab.clone();
            seen.dedup();
            for &l in &seen {
                by_label[l].push(ci);
            }
            compiled.push(Compiled {
                labels: lab,
                values,
            });
        }
        Ok(Self {
            labels,
            constraints,
            table,
            compiled,
            by_label,
        })
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn constraints(&self) -> &[FlexibleConstraint] {
        &self.constraints
    }

    pub fn table(&self) -> &EvaluationTable<T> {
        &self.table
    }

    pub fn n_segments(&self) -> usize {
        self.table.segment_ids().len()
    }

    pub fn initial_domains(&self) -> Domains {
        vec![vec![true; self.labels.len()]; self.n_segments()]
    }

    /// Degree of constraint `ci` under a partial assignment (segment position →
    /// label position), or `None` while some of its labels are unassigned.
    pub fn constraint_degree(
        &self,
        ci: usize,
        assignment: &[Option<usize>],
    ) -> Option<FuzzyDegree<T>> {
        let c = &self.compiled[ci];
        let mut segs = [0usize; 2];
        for (slot, &l) in c.labels.iter().enumerate() {
            segs[slot] = assignment.iter().position(|a| *a == Some(l))?;
        }
        Some(FuzzyDegree::clamped(
            c.degree(self.n_segments(), &segs[..c.labels.len()]),
        ))
    }

    /// Arc-consistency fixpoint at level `alpha`: a label survives in a
    /// segment's domain only if every constraint on it keeps a support with
    /// degree `> alpha` among the other domains.
    pub fn fac3_prune(&self, alpha: FuzzyDegree<T>) -> PruneOutcome {
        let mut d = self.initial_domains();
        if self.propagate(&mut d, alpha.value(), false) {
            PruneOutcome::Reduced(d)
        } else {
            PruneOutcome::Inconsistent
        }
    }

    #[inline]
    fn supports(value: T, alpha: T, inclusive: bool) -> bool {
        if inclusive {
            value >= alpha
        } else {
            value > alpha
        }
    }

    /// Returns false when some domain empties or some label loses every segment.
    fn propagate(&self, d: &mut Domains, alpha: T, inclusive: bool) -> bool {
        let k = self.n_segments();
        let n = self.labels.len();
        loop {
            let mut changed = false;
            for c in &self.compiled {
                match *c.labels.as_slice() {
                    [l] => {
                        for (s, dom) in d.iter_mut().enumerate() {
                            if dom[l] && !Self::supports(c.values[s], alpha, inclusive) {
                                dom[l] = false;
                                changed = true;
                            }
                        }
                    }
                    [l1, l2] => {
                        for s in 0..k {
                            if d[s][l1]
                                && !(0..k).any(|t| {
                                    t != s
                                        && d[t][l2]
                                        && Self::supports(c.values[s * k + t], alpha, inclusive)
                                })
                            {
                                d[s][l1] = false;
                                changed = true;
                            }
                        }
                        for t in 0..k {
                            if d[t][l2]
                                && !(0..k).any(|s| {
                                    s != t
                                        && d[s][l1]
                                        && Self::supports(c.values[s * k + t], alpha, inclusive)
                                })
                            {
                                d[t][l2] = false;
                                changed = true;
                            }
                        }
                    }
                    _ => unreachable!("arity 1 or 2"),
                }
            }
            // a singleton domain claims its label
            for s in 0..k {
                let mut it = (0..n).filter(|&l| d[s][l]);
                match (it.next(), it.next()) {
                    (None, _) => return false,
                    (Some(l), None) => {
                        for (t, dom) in d.iter_mut().enumerate() {
                            if t != s && dom[l] {
                                dom[l] = false;
                                changed = true;
                            }
                        }
                    }
                    _ => {}
                }
            }
            if k == n && (0..n).any(|l| !(0..k).any(|s| d[s][l])) {
                return false;
            }
            if !changed {
                return true;
            }
        }
    }

    /// Consistency and degree sum of a complete assignment, summed in constraint order.
    fn score(&self, assignment: &[usize]) -> (T, T) {
        let k = self.n_segments();
        let mut seg_of = vec![usize::MAX; self.labels.len()];
        for (s, &l) in assignment.iter().enumerate() {
            seg_of[l] = s;
        }
        let mut cons = T::one();
        let mut sum = T::zero();
        for c in &self.compiled {
            let v = match *c.labels.as_slice() {
                [l] => c.values[seg_of[l]],
                [l1, l2] => c.values[seg_of[l1] * k + seg_of[l2]],
                _ => unreachable!(),
            };
            cons = cons.min(v);
            sum = sum + v;
        }
        (cons, sum)
    }

    /// Lexicographic key: labels listed by increasing segment id.
    fn lex_key(&self, assignment: &[usize]) -> Vec<(SegmentId, usize)> {
        let mut key: Vec<(SegmentId, usize)> = self
            .table
            .segment_ids()
            .iter()
            .zip(assignment)
            .map(|(id, l)| (*id, *l))
            .collect();
        key.sort_unstable();
        key
    }
}

/// Constraint grounded on the segments that received its labels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundedConstraint<T> {
    pub constraint: FlexibleConstraint,
    pub segments: Vec<SegmentId>,
    pub degree: FuzzyDegree<T>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Solution<T> {
    pub image_id: String,
    /// `(segment, label)` in increasing segment id.
    pub assignment: Vec<(SegmentId, Label)>,
    pub consistency: FuzzyDegree<T>,
    pub grounded: Vec<GroundedConstraint<T>>,
}

impl<T: Scalar> Solution<T> {
    pub fn label_of(&self, segment: SegmentId) -> Option<&Label> {
        self.assignment
            .iter()
            .find(|(s, _)| *s == segment)
            .map(|(_, l)| l)
    }

    pub fn segment_of(&self, label: &Label) -> Option<SegmentId> {
        self.assignment
            .iter()
            .find(|(_, l)| l == label)
            .map(|(s, _)| *s)
    }

    /// Minimum over grounded degrees (1 when there are none).
    pub fn recomputed_consistency(&self) -> FuzzyDegree<T> {
        self.grounded
            .iter()
            .map(|g| g.degree)
            .fold(FuzzyDegree::one(), FuzzyDegree::min)
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Phase {
    /// Find the best consistency; only strictly better leaves are of interest.
    Consistency,
    /// Consistency fixed; maximise the degree sum, then the lexicographic key.
    Sum,
}

struct Search<'a, T> {
    inst: &'a FcspInstance<T>,
    k: usize,
    phase: Phase,
    assignment: Vec<Option<usize>>,
    seg_of_label: Vec<Option<usize>>,
    best: Option<(T, T, Vec<usize>)>,
    /// Consistency every leaf must reach in the sum phase.
    level: T,
    nodes: usize,
}

const SUM_SLACK: f64 = 1e-9;

impl<'a, T: Scalar> Search<'a, T> {
    fn better(&self, cons: T, sum: T, full: &[usize]) -> bool {
        match &self.best {
            None => true,
            Some((bc, bs, ba)) => match cons.partial_cmp(bc).unwrap_or(Ordering::Equal) {
                Ordering::Greater => true,
                Ordering::Less => false,
                Ordering::Equal => match sum.partial_cmp(bs).unwrap_or(Ordering::Equal) {
                    Ordering::Greater => true,
                    Ordering::Less => false,
                    Ordering::Equal => self.inst.lex_key(full) < self.inst.lex_key(ba),
                },
            },
        }
    }

    /// Degrees of the constraints that become determined when `s` takes `l`.
    fn newly_determined(&self, s: usize, l: usize) -> (T, T) {
        let mut min = T::one();
        let mut sum = T::zero();
        for &ci in &self.inst.by_label[l] {
            let c = &self.inst.compiled[ci];
            let v = match *c.labels.as_slice() {
                [_] => c.values[s],
                [l1, l2] => {
                    let (s1, s2) = if l1 == l {
                        match self.seg_of_label[l2] {
                            Some(t) => (s, t),
                            None => continue,
                        }
                    } else {
                        match self.seg_of_label[l1] {
                            Some(t) => (t, s),
                            None => continue,
                        }
                    };
                    c.values[s1 * self.k + s2]
                }
                _ => unreachable!(),
            };
            min = min.min(v);
            sum = sum + v;
        }
        (min, sum)
    }

    /// Optimistic total of the constraints not yet determined: each takes its
    /// best support within the current domains.
    fn open_sum_bound(&self, d: &Domains) -> T {
        let k = self.k;
        let mut total = T::zero();
        for c in &self.inst.compiled {
            if c.labels.iter().all(|&l| self.seg_of_label[l].is_some()) {
                continue;
            }
            let best = match *c.labels.as_slice() {
                [l] => (0..k)
                    .filter(|&s| d[s][l])
                    .map(|s| c.values[s])
                    .fold(T::zero(), T::max),
                [l1, l2] => {
                    let mut m = T::zero();
                    for s in (0..k).filter(|&s| d[s][l1]) {
                        for t in (0..k).filter(|&t| t != s && d[t][l2]) {
                            m = m.max(c.values[s * k + t]);
                        }
                    }
                    m
                }
                _ => unreachable!(),
            };
            total = total + best;
        }
        total
    }

    fn run(&mut self, domains: Domains, cons: T, sum: T) {
        self.nodes += 1;
        let Some(s) = (0..self.k)
            .filter(|&s| self.assignment[s].is_none())
            .min_by_key(|&s| (domains[s].iter().filter(|b| **b).count(), s))
        else {
            let full: Vec<usize> = self
                .assignment
                .iter()
                .map(|a| a.expect("complete"))
                .collect();
            let (c, sm) = self.inst.score(&full);
            if self.better(c, sm, &full) {
                self.best = Some((c, sm, full));
            }
            return;
        };

        let mut options: Vec<(usize, T, T)> = (0..self.inst.labels.len())
            .filter(|&l| domains[s][l] && self.seg_of_label[l].is_none())
            .map(|l| {
                let (m, sm) = self.newly_determined(s, l);
                (l, cons.min(m), sum + sm)
            })
            .collect();
        options.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .unwrap_or(Ordering::Equal)
                .then(b.2.partial_cmp(&a.2).unwrap_or(Ordering::Equal))
                .then(a.0.cmp(&b.0))
        });

        for (l, c2, s2) in options {
            let (alpha, inclusive) = match (self.phase, &self.best) {
                (Phase::Consistency, Some((bc, _, _))) => {
                    if c2 <= *bc {
                        continue;
                    }
                    (*bc, false)
                }
                (Phase::Consistency, None) => (T::zero(), true),
                (Phase::Sum, _) => {
                    if c2 < self.level {
                        continue;
                    }
                    (self.level, true)
                }
            };
            let mut d = domains.clone();
            for (l2, v) in d[s].iter_mut().enumerate() {
                *v = l2 == l;
            }
            if !self.inst.propagate(&mut d, alpha, inclusive) {
                continue;
            }
            self.assignment[s] = Some(l);
            self.seg_of_label[l] = Some(s);
            let keep = match (self.phase, &self.best) {
                (Phase::Sum, Some((_, bs, _))) => {
                    s2 + self.open_sum_bound(&d) >= *bs - T::lit(SUM_SLACK)
                }
                _ => true,
            };
            if keep {
                self.run(d, c2, s2);
            }
            self.assignment[s] = None;
            self.seg_of_label[l] = None;
        }
    }
}

/// Best all-different assignment: maximal consistency, then maximal degree
/// sum, then lexicographically smallest `(segment id, label)` listing.
pub fn solve<T: Scalar>(instance: &FcspInstance<T>) -> Result<Solution<T>> {
    let k = instance.n_segments();
    let n = instance.labels.len();
    if k != n {
        return Err(Error::CountMismatch {
            variables: k,
            labels: n,
        });
    }
    if k == 0 {
        return Ok(build_solution(instance, &[]));
    }
    let mut search = Search {
        inst: instance,
        k,
        phase: Phase::Consistency,
        assignment: vec![None; k],
        seg_of_label: vec![None; n],
        best: None,
        level: T::zero(),
        nodes: 0,
    };
    let mut root = instance.initial_domains();
    if !instance.propagate(&mut root, T::zero(), true) {
        return Err(Error::CountMismatch {
            variables: k,
            labels: n,
        });
    }
    search.run(root.clone(), T::one(), T::zero());
    let level = search
        .best
        .as_ref()
        .map(|b| b.0)
        .expect("a bijection always exists");

    search.phase = Phase::Sum;
    search.level = level;
    if instance.propagate(&mut root, level, true) {
        search.run(root, T::one(), T::zero());
    }
    let (_, _, best) = search.best.expect("phase one found a leaf");
    log::debug!(
        "image {}: solved in {} nodes",
        instance.table.image_id(),
        search.nodes
    );
    Ok(build_solution(instance, &best))
}

fn build_solution<T: Scalar>(instance: &FcspInstance<T>, best: &[usize]) -> Solution<T> {
    let seg_ids = instance.table.segment_ids();
    let k = instance.n_segments();
    let mut seg_of = vec![0usize; instance.labels.len()];
    for (s, &l) in best.iter().enumerate() {
        seg_of[l] = s;
    }
    let grounded: Vec<GroundedConstraint<T>> = instance
        .constraints
        .iter()
        .zip(&instance.compiled)
        .map(|(c, comp)| {
            let segs: Vec<usize> = comp.labels.iter().map(|&l| seg_of[l]).collect();
            GroundedConstraint {
                constraint: c.clone(),
                segments: segs.iter().map(|&s| seg_ids[s]).collect(),
                degree: FuzzyDegree::clamped(comp.degree(k, &segs)),
            }
        })
        .collect();
    let mut assignment: Vec<(SegmentId, Label)> = best
        .iter()
        .enumerate()
        .map(|(s, &l)| (seg_ids[s], instance.labels[l].clone()))
        .collect();
    assignment.sort_by_key(|(s, _)| *s);
    let consistency = grounded
        .iter()
        .map(|g| g.degree)
        .fold(FuzzyDegree::one(), FuzzyDegree::min);
    Solution {
        image_id: instance.table.image_id().to_string(),
        assignment,
        consistency,
        grounded,
    }
}

#[cfg(test)]
pub(crate) mod oracle {
    use super::*;

    /// Every permutation, scored with the same total order as `solve`.
    pub fn exhaustive<T: Scalar>(inst: &FcspInstance<T>) -> (T, Vec<usize>) {
        let k = inst.n_segments();
        let mut perm: Vec<usize> = (0..k).collect();
        let mut best: Option<(T, T, Vec<usize>)> = None;
        permute(&mut perm, 0, &mut |p| {
            let (c, s) = inst.score(p);
            let take = match &best {
                None => true,
                Some((bc, bs, ba)) => {
                    c > *bc
                        || (c == *bc
                            && (s > *bs || (s == *bs && inst.lex_key(p) < inst.lex_key(ba))))
                }
            };
            if take {
                best = Some((c, s, p.to_vec()));
            }
        });
        let (c, _, a) = best.expect("at least one permutation");
        (c, a)
    }

    fn permute(p: &mut Vec<usize>, i: usize, f: &mut dyn FnMut(&[usize])) {
        if i == p.len() {
            f(p);
            return;
        }
        for j in i..p.len() {
            p.swap(i, j);
            permute(p, i + 1, f);
            p.swap(i, j);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mining::FrequentSet;
    use crate::spatial::{table_from_fn, RelationDescriptor, RelationKind, Vocabulary};
    use proptest::prelude::*;

    fn vocab() -> Vocabulary {
        Vocabulary::new(vec![
            RelationDescriptor::new("r", "r", RelationKind::Symmetry, "{0} r {1}"),
            RelationDescriptor::new("u", "u", RelationKind::Stretched, "{0} is u"),
        ])
        .unwrap()
    }

    fn labels(n: usize) -> Vec<Label> {
        (0..n).map(|i| Label::new(format!("y{i}"))).collect()
    }

    fn c(rel: &str, ls: &[usize]) -> FlexibleConstraint {
        FlexibleConstraint {
            relation: rel.into(),
            labels: ls.iter().map(|i| Label::new(format!("y{i}"))).collect(),
            sources: vec![],
        }
    }

    fn model(label: &str, sets: Vec<Vec<RelationItem>>) -> ClassModel<f64> {
        ClassModel {
            label: Label::new(label),
            threshold: FuzzyDegree::new(0.9).unwrap(),
            f_max: sets
                .into_iter()
                .map(|items| FrequentSet {
                    items,
                    support: FuzzyDegree::new(0.95).unwrap(),
                })
                .collect(),
            warning: None,
        }
    }

    #[test]
    fn translation_merges_duplicates() {
        let left = RelationItem::new("left_of", vec!["l_lung".into(), "r_lung".into()]);
        let single = translate_constraints(&[model("l_lung", vec![vec![left.clone()]])]).unwrap();
        assert_eq!(single.len(), 1);

        let shared = translate_constraints(&[
            model("l_lung", vec![vec![left.clone()]]),
            model("r_lung", vec![vec![left.clone()]]),
        ])
        .unwrap();
        assert_eq!(shared.len(), 1);
        assert_eq!(
            shared[0].sources,
            vec![Label::new("l_lung"), Label::new("r_lung")]
        );

        let kidney = |rel: &str, a: &str, b: &str| RelationItem::new(rel, vec![a.into(), b.into()]);
        let c_r_kidney = vec![
            kidney("symmetrical_to", "r_kidney", "l_kidney"),
            kidney("above", "r_lung", "r_kidney"),
            kidney("left_of", "r_kidney", "liver"),
            kidney("below", "bladder", "r_kidney"),
            kidney("right_of", "r_kidney", "l_kidney"),
            kidney("left_of", "l_kidney", "r_kidney"),
        ];
        let cs = translate_constraints(&[model("r_kidney", vec![c_r_kidney])]).unwrap();
        assert_eq!(cs.len(), 6);
        assert!(cs
            .iter()
            .any(|c| c.relation == "right_of" && c.labels[0].key() == "r_kidney"));
        assert!(cs
            .iter()
            .any(|c| c.relation == "left_of" && c.labels[0].key() == "l_kidney"));

        assert!(matches!(
            translate_constraints(&[model("x", vec![vec![]])]),
            Err(Error::NoConstraints)
        ));
    }

    #[test]
    fn single_variable_unary() {
        let t = table_from_fn("i", vec![7], &vocab(), |_, _| 0.6f64).unwrap();
        let inst = FcspInstance::new(labels(1), vec![c("u", &[0])], t).unwrap();
        let sol = solve(&inst).unwrap();
        assert_eq!(sol.assignment, vec![(7, Label::new("y0"))]);
        assert!((sol.consistency.value() - 0.6).abs() < 1e-12);
    }

    /// Identity permutation has min-degree 0.9, every other permutation at most 0.5.
    fn identity_instance() -> FcspInstance<f64> {
        let t = table_from_fn("i", vec![1, 2, 3], &vocab(), |r, tuple| match (r, tuple) {
            (0, [a, b]) if *b == (*a + 1) % 3 => 0.9,
            (0, _) => 0.5,
            _ => 1.0,
        })
        .unwrap();
        let cons = vec![c("r", &[0, 1]), c("r", &[1, 2]), c("r", &[2, 0])];
        FcspInstance::new(labels(3), cons, t).unwrap()
    }

    #[test]
    fn identity_assignment_wins() {
        let inst = identity_instance();
        let sol = solve(&inst).unwrap();
        let expected: Vec<(u32, Label)> = (0..3)
            .map(|i| (i as u32 + 1, Label::new(format!("y{i}"))))
            .collect();
        assert_eq!(sol.assignment, expected);
        assert!((sol.consistency.value() - 0.9).abs() < 1e-12);
        assert_eq!(sol.recomputed_consistency(), sol.consistency);
        let (opt, _) = oracle::exhaustive(&inst);
        assert_eq!(opt, sol.consistency.value());
    }

    #[test]
    fn constraint_degree_grounding() {
        let inst = identity_instance();
        assert_eq!(inst.constraint_degree(0, &[None, None, None]), None);
        assert_eq!(inst.constraint_degree(0, &[Some(0), None, None]), None);
        assert_eq!(
            inst.constraint_degree(0, &[Some(0), Some(1), None])
                .unwrap()
                .value(),
            0.9
        );
        assert_eq!(
            inst.constraint_degree(0, &[Some(1), Some(0), None])
                .unwrap()
                .value(),
            0.5
        );
    }

    #[test]
    fn pruning_examples() {
        let inst = identity_instance();
        assert_eq!(
            inst.fac3_prune(FuzzyDegree::zero()),
            PruneOutcome::Reduced(inst.initial_domains())
        );
        // best degree of every constraint is 0.9, so nothing survives above 0.9
        assert_eq!(
            inst.fac3_prune(FuzzyDegree::new(0.9).unwrap()),
            PruneOutcome::Inconsistent
        );

        // two segments, one binary constraint y0 -> y1 holding only from segment 0 to 1
        let t = table_from_fn("i", vec![1, 2], &vocab(), |r, tuple| match (r, tuple) {
            (0, [0, 1]) => 0.9,
            (0, _) => 0.2,
            _ => 1.0,
        })
        .unwrap();
        let inst = FcspInstance::new(labels(2), vec![c("r", &[0, 1])], t).unwrap();
        match inst.fac3_prune(FuzzyDegree::new(0.5).unwrap()) {
            PruneOutcome::Reduced(d) => assert_eq!(d, vec![vec![true, false], vec![false, true]]),
            other => panic!("{other:?}"),
        }
        assert_eq!(
            inst.fac3_prune(FuzzyDegree::one()),
            PruneOutcome::Inconsistent
        );
    }

    #[test]
    fn count_mismatch_is_reported() {
        let t = table_from_fn("i", vec![1, 2], &vocab(), |_, _| 1.0).unwrap();
        let inst = FcspInstance::new(labels(3), vec![c("r", &[0, 1])], t).unwrap();
        assert!(matches!(
            solve(&inst),
            Err(Error::CountMismatch {
                variables: 2,
                labels: 3
            })
        ));
    }

    #[test]
    fn instance_rejects_unknown_relations_and_labels() {
        let t = table_from_fn("i", vec![1, 2], &vocab(), |_, _| 1.0).unwrap();
        assert!(FcspInstance::new(labels(2), vec![c("nope", &[0, 1])], t.clone()).is_err());
        assert!(FcspInstance::new(labels(2), vec![c("r", &[0, 5])], t.clone()).is_err());
        assert!(FcspInstance::new(labels(2), vec![c("u", &[0, 1])], t).is_err());
    }

    fn random_instance(
        k: usize,
        seed: &[u8],
        n_cons: usize,
        cons_seed: &[u16],
    ) -> FcspInstance<f64> {
        let mut i = 0usize;
        let t = table_from_fn(
            "rand",
            (0..k as u32).map(|s| 10 + s * 3).collect(),
            &vocab(),
            |_, _| {
                let v = seed[i % seed.len()] as f64 / 10.0;
                i += 1;
                v
            },
        )
        .unwrap();
        let mut cons = BTreeSet::new();
        for j in 0..n_cons {
            let x = cons_seed[j % cons_seed.len()] as usize + j;
            if k >= 2 && !x.is_multiple_of(3) {
                let a = x % k;
                let b = (a + 1 + (x / k) % (k - 1)) % k;
                cons.insert(c("r", &[a, b]));
            } else {
                cons.insert(c("u", &[x % k]));
            }
        }
        FcspInstance::new(labels(k), cons.into_iter().collect(), t).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn solve_matches_exhaustive(k in 1usize..=5, seed in prop::collection::vec(0u8..=10, 1..40),
                                    n in 1usize..12, cs in prop::collection::vec(any::<u16>(), 1..12)) {
            let inst = random_instance(k, &seed, n, &cs);
            let sol = solve(&inst).unwrap();
            let (opt, best) = oracle::exhaustive(&inst);
            prop_assert_eq!(sol.consistency.value(), opt);
            let labels_of: Vec<Label> = best.iter().map(|&l| inst.labels()[l].clone()).collect();
            let mut expected: Vec<(u32, Label)> = inst.table().segment_ids().iter().copied().zip(labels_of).collect();
            expected.sort_by_key(|(s, _)| *s);
            prop_assert_eq!(&sol.assignment, &expected);
            prop_assert_eq!(sol.recomputed_consistency(), sol.consistency);
        }

        #[test]
        fn adding_a_constraint_never_raises_consistency(k in 2usize..=5, seed in prop::collection::vec(0u8..=10, 1..40),
                                                        n in 1usize..10, cs in prop::collection::vec(any::<u16>(), 2..12)) {
            let small = random_instance(k, &seed, n, &cs);
            let large = random_instance(k, &seed, n + 1, &cs);
            prop_assert!(solve(&large).unwrap().consistency <= solve(&small).unwrap().consistency);
        }
    }
}
