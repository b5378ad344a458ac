//! One-vs-all mining of frequent closed sets of relations with a fuzzy
//! Close-style algorithm, and extraction of the maximal-size frequent sets.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fuzzy::FuzzyDegree;
use crate::labels::Label;
use crate::scalar::Scalar;
use crate::spatial::{EvaluationTable, SegmentId};

/// A relation applied to labels rather than segments, e.g. `left_of(l_lung, r_lung)`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RelationItem {
    pub relation: String,
    pub labels: Vec<Label>,
}

impl RelationItem {
    pub fn new(relation: impl Into<String>, labels: Vec<Label>) -> Self {
        Self {
            relation: relation.into(),
            labels,
        }
    }

    pub fn involves(&self, label: &Label) -> bool {
        self.labels.contains(label)
    }
}

impl fmt::Display for RelationItem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let args: Vec<&str> = self.labels.iter().map(Label::key).collect();
        write!(f, "{}({})", self.relation, args.join(", "))
    }
}

/// An evaluated training image together with its ground truth.
#[derive(Clone, Debug)]
pub struct LabeledEvaluation<T> {
    pub table: EvaluationTable<T>,
    pub labels: HashMap<SegmentId, Label>,
}

impl<T: Scalar> LabeledEvaluation<T> {
    pub fn new(table: EvaluationTable<T>, labels: HashMap<SegmentId, Label>) -> Self {
        Self { table, labels }
    }

    fn segment_position(&self, label: &Label) -> Option<usize> {
        self.labels
            .iter()
            .filter(|(_, l)| *l == label)
            .filter_map(|(s, _)| self.table.segment_index(*s))
            .min()
    }
}

/// Degrees of every relation item on every training image, one row per image.
#[derive(Clone, Debug, PartialEq)]
pub struct TransactionTable<T> {
    items: Vec<RelationItem>,
    rows: Vec<Vec<T>>,
}

impl<T: Scalar> TransactionTable<T> {
    pub fn new(items: Vec<RelationItem>, rows: Vec<Vec<T>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::TooSmall(
                "a transaction table needs at least one row".into(),
            ));
        }
        for row in &rows {
            if row.len() != items.len() {
                return Err(Error::InvalidField(format!(
                    "transaction row has {} degrees for {} items",
                    row.len(),
                    items.len()
                )));
            }
            for v in row {
                FuzzyDegree::new(*v)?;
            }
        }
        Ok(Self { items, rows })
    }

    pub fn items(&self) -> &[RelationItem] {
        &self.items
    }

    pub fn rows(&self) -> &[Vec<T>] {
        &self.rows
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn item_index(&self, item: &RelationItem) -> Option<usize> {
        self.items.iter().position(|i| i == item)
    }

    fn indices(&self, itemset: &[RelationItem]) -> Result<Vec<usize>> {
        let mut idx = itemset
            .iter()
            .map(|i| {
                self.item_index(i)
                    .ok_or_else(|| Error::UnknownItem(i.to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        idx.sort_unstable();
        idx.dedup();
        Ok(idx)
    }

    /// Row-wise minimum over the itemset (1 for the empty set).
    fn min_vector(&self, itemset: &[usize]) -> Vec<T> {
        self.rows
            .iter()
            .map(|row| itemset.iter().fold(T::one(), |m, &i| m.min(row[i])))
            .collect()
    }

    fn mean(&self, v: &[T]) -> T {
        v.iter().copied().sum::<T>() / T::from_usize_lossy(self.rows.len())
    }

    /// Support of the itemset given by item positions.
    pub fn support_of(&self, itemset: &[usize]) -> T {
        self.mean(&self.min_vector(itemset))
    }

    /// Support of `itemset ∪ {item}` given the itemset's min vector.
    fn extended_support(&self, mins: &[T], item: usize) -> T {
        let s: T = self
            .rows
            .iter()
            .zip(mins)
            .map(|(row, m)| m.min(row[item]))
            .sum();
        s / T::from_usize_lossy(self.rows.len())
    }

    fn closure_from(&self, itemset: &[usize], mins: &[T], support: T) -> Vec<usize> {
        let tol = T::support_tolerance();
        let mut out: Vec<usize> = (0..self.items.len())
            .filter(|i| {
                itemset.binary_search(i).is_ok()
                    || (self.extended_support(mins, *i) - support).abs() <= tol
            })
            .collect();
        out.sort_unstable();
        out
    }

    /// Closure of the itemset given by sorted item positions.
    pub fn closure_of(&self, itemset: &[usize]) -> Vec<usize> {
        let mins = self.min_vector(itemset);
        let support = self.mean(&mins);
        self.closure_from(itemset, &mins, support)
    }
}

/// Builds the one-vs-all transactions of `target`: every item whose label
/// tuple contains `target`, with one row per training image.
pub fn build_transactions<T: Scalar>(
    evaluations: &[LabeledEvaluation<T>],
    labels: &[Label],
    target: &Label,
) -> Result<TransactionTable<T>> {
    if !labels.contains(target) {
        return Err(Error::UnknownLabel(target.to_string()));
    }
    let first = evaluations
        .first()
        .ok_or_else(|| Error::TooSmall("no training images".into()))?;
    let relation_ids = first.table.relation_ids().to_vec();

    // (item, relation position, label positions)
    let mut items: Vec<(RelationItem, usize, Vec<usize>)> = Vec::new();
    let t = labels
        .iter()
        .position(|l| l == target)
        .expect("checked above");
    for (ri, rel) in relation_ids.iter().enumerate() {
        match first.table.arity(ri) {
            1 => items.push((
                RelationItem::new(rel.clone(), vec![target.clone()]),
                ri,
                vec![t],
            )),
            _ => {
                for a in 0..labels.len() {
                    for b in 0..labels.len() {
                        if a != b && (a == t || b == t) {
                            items.push((
                                RelationItem::new(
                                    rel.clone(),
                                    vec![labels[a].clone(), labels[b].clone()],
                                ),
                                ri,
                                vec![a, b],
                            ));
                        }
                    }
                }
            }
        }
    }

    let mut rows = Vec::with_capacity(evaluations.len());
    for ev in evaluations {
        if ev.table.relation_ids() != relation_ids.as_slice() {
            return Err(Error::Vocabulary(format!(
                "image {} was evaluated with a different vocabulary",
                ev.table.image_id()
            )));
        }
        let positions = labels
            .iter()
            .map(|l| {
                ev.segment_position(l).ok_or_else(|| Error::MissingLabel {
                    image: ev.table.image_id().to_string(),
                    label: l.to_string(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let row = items
            .iter()
            .map(|(item, ri, lab)| {
                let tuple: Vec<usize> = lab.iter().map(|&l| positions[l]).collect();
                ev.table
                    .degree_at(*ri, &tuple)
                    .map(FuzzyDegree::value)
                    .ok_or_else(|| Error::MissingEvaluation(item.to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    TransactionTable::new(items.into_iter().map(|(i, _, _)| i).collect(), rows)
}

/// Mean over rows of the minimum degree of the itemset's items; 1 for the empty set.
pub fn fuzzy_support<T: Scalar>(
    itemset: &[RelationItem],
    table: &TransactionTable<T>,
) -> Result<FuzzyDegree<T>> {
    let idx = table.indices(itemset)?;
    Ok(FuzzyDegree::clamped(table.support_of(&idx)))
}

/// `h(J) = J ∪ {r : support(J ∪ {r}) = support(J)}`.
pub fn closure<T: Scalar>(
    itemset: &[RelationItem],
    table: &TransactionTable<T>,
) -> Result<Vec<RelationItem>> {
    let idx = table.indices(itemset)?;
    Ok(table
        .closure_of(&idx)
        .into_iter()
        .map(|i| table.items[i].clone())
        .collect())
}

/// A frequent itemset; `items` are sorted in table order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequentSet<T> {
    pub items: Vec<RelationItem>,
    pub support: FuzzyDegree<T>,
}

impl<T> FrequentSet<T> {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// Support comparison used throughout mining: `support ≥ threshold` up to the scalar tolerance.
#[inline]
pub fn is_frequent<T: Scalar>(support: T, threshold: T) -> bool {
    support + T::support_tolerance() >= threshold
}

fn check_threshold<T: Scalar>(threshold: T) -> Result<()> {
    if !(threshold > T::zero() && threshold <= T::one()) {
        return Err(Error::InvalidThreshold(threshold.as_f64()));
    }
    Ok(())
}

struct Generator<T> {
    items: Vec<usize>,
    mins: Vec<T>,
    closure: Vec<usize>,
}

/// Frequent closed itemsets as sorted item positions with their supports.
///
/// Level-wise enumeration of frequent generators (minimal itemsets of their
/// closure class): a candidate of size k+1 is joined from two generators
/// sharing a k-1 prefix, kept only if every k-subset is a frequent generator
/// that does not already contain the candidate in its closure, and only if
/// it is itself frequent. Every frequent closed set is the closure of one of
/// the generators found.
pub fn mine_closed_indices<T: Scalar>(
    table: &TransactionTable<T>,
    threshold: T,
) -> Result<BTreeMap<Vec<usize>, T>> {
    check_threshold(threshold)?;
    let mut closed: BTreeMap<Vec<usize>, T> = BTreeMap::new();

    let empty_mins = table.min_vector(&[]);
    let empty_support = table.mean(&empty_mins);
    let empty_closure = table.closure_from(&[], &empty_mins, empty_support);
    if is_frequent(empty_support, threshold) {
        closed.insert(empty_closure.clone(), empty_support);
    }

    let mut level: Vec<Generator<T>> = Vec::new();
    for i in 0..table.items.len() {
        if empty_closure.binary_search(&i).is_ok() {
            continue;
        }
        let mins: Vec<T> = table.rows.iter().map(|r| r[i]).collect();
        let support = table.mean(&mins);
        if !is_frequent(support, threshold) {
            continue;
        }
        let closure = table.closure_from(&[i], &mins, support);
        closed.entry(closure.clone()).or_insert(support);
        level.push(Generator {
            items: vec![i],
            mins,
            closure,
        });
    }

    while level.len() > 1 {
        let index: HashMap<&[usize], usize> = level
            .iter()
            .enumerate()
            .map(|(i, g)| (g.items.as_slice(), i))
            .collect();
        let mut next = Vec::new();
        let mut subset = Vec::with_capacity(level[0].items.len());
        for a in 0..level.len() {
            let ga = &level[a];
            let prefix = &ga.items[..ga.items.len() - 1];
            for gb in level[a + 1..].iter() {
                if &gb.items[..gb.items.len() - 1] != prefix {
                    // generators are sorted, so the shared-prefix block has ended
                    break;
                }
                let last = *gb.items.last().expect("non-empty");
                if ga.closure.binary_search(&last).is_ok() {
                    continue;
                }
                let mut candidate = ga.items.clone();
                candidate.push(last);

                let mut is_key = true;
                for drop in 0..candidate.len() {
                    subset.clear();
                    subset.extend(
                        candidate
                            .iter()
                            .enumerate()
                            .filter(|(i, _)| *i != drop)
                            .map(|(_, v)| *v),
                    );
                    match index.get(subset.as_slice()) {
                        Some(&s) if level[s].closure.binary_search(&candidate[drop]).is_err() => {}
                        _ => {
                            is_key = false;
                            break;
                        }
                    }
                }
                if !is_key {
                    continue;
                }
                let mins: Vec<T> = ga
                    .mins
                    .iter()
                    .zip(&table.rows)
                    .map(|(m, row)| m.min(row[last]))
                    .collect();
                let support = table.mean(&mins);
                if !is_frequent(support, threshold) {
                    continue;
                }
                let closure = table.closure_from(&candidate, &mins, support);
                closed.entry(closure.clone()).or_insert(support);
                next.push(Generator {
                    items: candidate,
                    mins,
                    closure,
                });
            }
        }
        level = next;
    }
    Ok(closed)
}

/// All frequent closed sets of relations at `threshold`, in canonical order.
pub fn mine_frequent_closed<T: Scalar>(
    table: &TransactionTable<T>,
    threshold: T,
) -> Result<Vec<FrequentSet<T>>> {
    Ok(mine_closed_indices(table, threshold)?
        .into_iter()
        .map(|(items, support)| FrequentSet {
            items: items.into_iter().map(|i| table.items[i].clone()).collect(),
            support: FuzzyDegree::clamped(support),
        })
        .collect())
}

/// Frequent sets of maximal cardinality. The closure of a frequent set is a
/// frequent closed superset with the same support, so filtering the closed
/// sets by cardinality is enough.
pub fn maximal_frequent<T: Scalar>(
    closed_sets: &[FrequentSet<T>],
    threshold: T,
) -> Vec<FrequentSet<T>> {
    let frequent: Vec<&FrequentSet<T>> = closed_sets
        .iter()
        .filter(|s| is_frequent(s.support.value(), threshold))
        .collect();
    let Some(max) = frequent.iter().map(|s| s.len()).max() else {
        return Vec::new();
    };
    frequent
        .into_iter()
        .filter(|s| s.len() == max)
        .cloned()
        .collect()
}

/// Learned relations of one class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassModel<T> {
    pub label: Label,
    pub threshold: FuzzyDegree<T>,
    pub f_max: Vec<FrequentSet<T>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

impl<T: Scalar> ClassModel<T> {
    pub fn is_underfit(&self) -> bool {
        self.f_max.iter().all(FrequentSet::is_empty)
    }
}

/// Mines one model per label at its own threshold.
pub fn build_class_models<T: Scalar>(
    evaluations: &[LabeledEvaluation<T>],
    labels: &[Label],
    thresholds: &[T],
) -> Result<Vec<ClassModel<T>>> {
    if thresholds.len() != labels.len() {
        return Err(Error::Tuning(format!(
            "{} thresholds for {} labels",
            thresholds.len(),
            labels.len()
        )));
    }
    for &t in thresholds {
        check_threshold(t)?;
    }
    labels
        .iter()
        .zip(thresholds)
        .map(|(label, &threshold)| {
            let table = build_transactions(evaluations, labels, label)?;
            let closed = mine_frequent_closed(&table, threshold)?;
            let f_max = maximal_frequent(&closed, threshold);
            let mut model = ClassModel {
                label: label.clone(),
                threshold: FuzzyDegree::new(threshold)?,
                f_max,
                warning: None,
            };
            if model.is_underfit() {
                let msg = format!("class {label} underfit at threshold {}", threshold.as_f64());
                log::debug!("{msg}");
                model.warning = Some(msg);
            }
            Ok(model)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spatial::{table_from_fn, Vocabulary};
    use proptest::prelude::*;

    fn item(n: usize) -> RelationItem {
        RelationItem::new(format!("r{n}"), vec![Label::new("y")])
    }

    fn table(rows: Vec<Vec<f64>>) -> TransactionTable<f64> {
        let n = rows[0].len();
        TransactionTable::new((0..n).map(item).collect(), rows).unwrap()
    }

    /// Brute force over all subsets: closed = no single-item extension keeps the support.
    fn brute_closed(t: &TransactionTable<f64>, threshold: f64) -> BTreeMap<Vec<usize>, f64> {
        let n = t.items().len();
        let mut out = BTreeMap::new();
        for mask in 0u32..(1 << n) {
            let set: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
            let supp = |s: &[usize]| -> f64 {
                t.rows()
                    .iter()
                    .map(|r| s.iter().fold(1.0f64, |m, &i| m.min(r[i])))
                    .sum::<f64>()
                    / t.n_rows() as f64
            };
            let s = supp(&set);
            if s + 1e-12 < threshold {
                continue;
            }
            let is_closed = (0..n).filter(|i| mask & (1 << i) == 0).all(|i| {
                let mut ext = set.clone();
                ext.push(i);
                (supp(&ext) - s).abs() > 1e-12
            });
            if is_closed {
                out.insert(set, s);
            }
        }
        out
    }

    #[test]
    fn support_examples() {
        let t = table(vec![vec![1.0, 0.8, 1.0], vec![0.5, 0.4, 0.9]]);
        assert_eq!(fuzzy_support(&[], &t).unwrap().value(), 1.0);
        assert!((fuzzy_support(&[item(0)], &t).unwrap().value() - 0.75).abs() < 1e-12);
        // row-wise mins {0.8, 0.4}
        assert!((fuzzy_support(&[item(0), item(1)], &t).unwrap().value() - 0.6).abs() < 1e-12);
        assert!(matches!(
            fuzzy_support(&[item(7)], &t),
            Err(Error::UnknownItem(_))
        ));
    }

    #[test]
    fn closure_examples() {
        // r1 dominates r0 row-wise
        let t = table(vec![vec![0.5, 0.7, 0.2], vec![0.6, 0.9, 1.0]]);
        let h = closure(&[item(0)], &t).unwrap();
        assert!(h.contains(&item(0)) && h.contains(&item(1)));
        assert_eq!(closure(&h, &t).unwrap(), h);
        let all: Vec<_> = (0..3).map(item).collect();
        assert_eq!(closure(&all, &t).unwrap(), all);
    }

    #[test]
    fn mining_examples() {
        let ones = table(vec![vec![1.0; 4]; 3]);
        let closed = mine_frequent_closed(&ones, 1.0).unwrap();
        assert_eq!(closed.len(), 1);
        assert_eq!(closed[0].items.len(), 4);
        assert_eq!(closed[0].support.value(), 1.0);

        let t = table(vec![vec![0.5, 0.7], vec![0.6, 0.5]]);
        // best single-item support is 0.6; only the empty closure is left (and it is empty)
        let closed = mine_frequent_closed(&t, 0.65).unwrap();
        assert!(closed.iter().all(|s| s.is_empty()));
        assert!(maximal_frequent(&closed, 0.65).iter().all(|s| s.is_empty()));
        assert!(mine_frequent_closed(&t, 0.0).is_err());
        assert!(mine_frequent_closed(&t, 1.5).is_err());
    }

    #[test]
    fn five_item_table_matches_brute_force() {
        let t = table(vec![
            vec![1.0, 0.75, 0.5, 0.25, 1.0],
            vec![0.75, 0.75, 1.0, 0.5, 0.25],
            vec![1.0, 0.5, 0.75, 1.0, 0.75],
            vec![0.5, 1.0, 1.0, 0.75, 1.0],
        ]);
        for th in [0.3, 0.5, 0.6, 0.75, 0.9] {
            assert_eq!(
                mine_closed_indices(&t, th)
                    .unwrap()
                    .into_keys()
                    .collect::<Vec<_>>(),
                brute_closed(&t, th).into_keys().collect::<Vec<_>>(),
                "threshold {th}"
            );
        }
    }

    #[test]
    fn maximal_filter() {
        let mk = |n: usize| FrequentSet {
            items: (0..n).map(item).collect(),
            support: FuzzyDegree::new(0.9).unwrap(),
        };
        let sets = vec![
            mk(3),
            mk(2),
            FrequentSet {
                items: vec![item(5), item(6), item(7)],
                ..mk(0)
            },
        ];
        let max = maximal_frequent(&sets, 0.8);
        assert_eq!(max.len(), 2);
        assert!(max.iter().all(|s| s.len() == 3));
        assert_eq!(maximal_frequent(&sets[1..2], 0.8), vec![mk(2)]);
        assert!(maximal_frequent::<f64>(&[], 0.8).is_empty());
    }

    fn labeled(n_images: usize) -> (Vec<LabeledEvaluation<f64>>, Vec<Label>) {
        let labels: Vec<Label> = crate::labels::organ_labels();
        let vocab = Vocabulary::default_vocabulary();
        let evs = (0..n_images)
            .map(|img| {
                let ids: Vec<u32> = (1..=9).collect();
                let table = table_from_fn(&format!("img{img}"), ids.clone(), &vocab, |r, t| {
                    ((r * 31 + t.iter().sum::<usize>() * 7 + img * 3) % 10) as f64 / 9.0
                })
                .unwrap();
                let map = ids
                    .iter()
                    .map(|&s| (s, labels[s as usize - 1].clone()))
                    .collect();
                LabeledEvaluation::new(table, map)
            })
            .collect();
        (evs, labels)
    }

    #[test]
    fn transactions_cover_items_involving_the_target() {
        let (evs, labels) = labeled(1);
        let t = build_transactions(&evs, &labels, &labels[0]).unwrap();
        assert_eq!(t.items().len(), 6 * 16 + 1);
        assert_eq!(t.n_rows(), 1);
        assert!(t.items().iter().all(|i| i.involves(&labels[0])));
        assert!(matches!(
            build_transactions(&evs, &labels, &Label::new("heart")),
            Err(Error::UnknownLabel(_))
        ));
        let mut missing = evs.clone();
        missing[0].labels.retain(|_, l| l.key() != "spleen");
        assert!(matches!(
            build_transactions(&missing, &labels, &labels[0]),
            Err(Error::MissingLabel { .. })
        ));
    }

    #[test]
    fn single_image_at_threshold_one_keeps_degree_one_items() {
        let (evs, labels) = labeled(1);
        let thresholds = vec![1.0; 9];
        let models = build_class_models(&evs, &labels, &thresholds).unwrap();
        assert_eq!(models.len(), 9);
        for m in &models {
            let t = build_transactions(&evs, &labels, &m.label).unwrap();
            let expected: Vec<RelationItem> = t
                .items()
                .iter()
                .enumerate()
                .filter(|(i, _)| t.rows()[0][*i] >= 1.0)
                .map(|(_, it)| it.clone())
                .collect();
            assert_eq!(m.f_max.len(), 1);
            assert_eq!(m.f_max[0].items, expected);
        }
        assert!(build_class_models(&evs, &labels, &[1.01; 9]).is_err());
        assert!(build_class_models(&evs, &labels, &[0.9; 3]).is_err());
    }

    fn quantized_table(
        max_items: usize,
        max_rows: usize,
    ) -> impl Strategy<Value = TransactionTable<f64>> {
        (1..=max_items, 1..=max_rows).prop_flat_map(|(n, m)| {
            prop::collection::vec(prop::collection::vec(0u8..=4, n), m).prop_map(|rows| {
                table(
                    rows.into_iter()
                        .map(|r| r.into_iter().map(|q| q as f64 / 4.0).collect())
                        .collect(),
                )
            })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn close_equals_brute_force(t in quantized_table(8, 6), q in 1u8..=8) {
            let th = q as f64 / 8.0;
            let mined = mine_closed_indices(&t, th).unwrap();
            let brute = brute_closed(&t, th);
            prop_assert_eq!(mined.keys().collect::<Vec<_>>(), brute.keys().collect::<Vec<_>>());
        }

        #[test]
        fn closure_laws(t in quantized_table(8, 5), a in any::<u8>(), b in any::<u8>()) {
            let n = t.items().len();
            let j: Vec<usize> = (0..n).filter(|i| a & (1 << i) != 0).collect();
            let k: Vec<usize> = (0..n).filter(|i| (a | b) & (1 << i) != 0).collect();
            let hj = t.closure_of(&j);
            prop_assert!(j.iter().all(|i| hj.contains(i)));
            prop_assert_eq!(t.closure_of(&hj), hj.clone());
            let hk = t.closure_of(&k);
            prop_assert!(hj.iter().all(|i| hk.contains(i)));
            prop_assert!((t.support_of(&hj) - t.support_of(&j)).abs() < 1e-12);
            prop_assert!(t.support_of(&j) >= t.support_of(&k) - 1e-15);
        }

        #[test]
        fn raising_threshold_shrinks_frequent_sets(t in quantized_table(7, 5), lo in 1u8..=8, d in 0u8..=4) {
            let (a, b) = (lo as f64 / 8.0, ((lo + d).min(8)) as f64 / 8.0);
            let low = mine_closed_indices(&t, a).unwrap();
            let high = mine_closed_indices(&t, b).unwrap();
            prop_assert!(high.keys().all(|k| low.contains_key(k)));
        }
    }
}
