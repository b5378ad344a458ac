//! Relation descriptors and the vocabulary file format.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RelationKind {
    /// Direction of the landscape in degrees (+x right, +y down).
    Directional {
        direction_deg: f64,
    },
    /// Radii as fractions of the image diagonal.
    Distance {
        near: f64,
        far: f64,
    },
    Symmetry,
    Stretched,
}

impl RelationKind {
    pub fn arity(&self) -> usize {
        match self {
            RelationKind::Stretched => 1,
            _ => 2,
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            RelationKind::Directional { .. } => "directional",
            RelationKind::Distance { .. } => "distance",
            RelationKind::Symmetry => "symmetry",
            RelationKind::Stretched => "stretched",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelationDescriptor {
    pub id: String,
    pub name: String,
    pub arity: usize,
    #[serde(flatten)]
    pub kind: RelationKind,
    /// Sentence pattern with `{0}` (subject) and, for binary relations, `{1}` (reference).
    pub template: String,
}

impl RelationDescriptor {
    pub fn new(id: &str, name: &str, kind: RelationKind, template: &str) -> Self {
        Self {
            id: id.into(),
            name: name.into(),
            arity: kind.arity(),
            kind,
            template: template.into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.id.is_empty() {
            return Err(Error::Vocabulary("relation with empty id".into()));
        }
        if self.arity != self.kind.arity() {
            return Err(Error::Vocabulary(format!(
                "relation {}: arity {} does not match kind {} (arity {})",
                self.id,
                self.arity,
                self.kind.tag(),
                self.kind.arity()
            )));
        }
        if let RelationKind::Distance { near, far } = self.kind {
            if !(near >= 0.0 && near < far) {
                return Err(Error::Vocabulary(format!(
                    "relation {}: need 0 <= near < far, got near {near}, far {far}",
                    self.id
                )));
            }
        }
        let slots = template_slots(&self.template)?;
        let expected: Vec<usize> = (0..self.arity).collect();
        if slots != expected {
            return Err(Error::Template(format!(
                "relation {}: template {:?} must use each of the slots {:?} exactly once",
                self.id, self.template, expected
            )));
        }
        Ok(())
    }

    /// Substitutes `args[i]` for `{i}`.
    pub fn render(&self, args: &[&str]) -> Result<String> {
        if args.len() != self.arity {
            return Err(Error::Template(format!(
                "relation {} takes {} arguments, got {}",
                self.id,
                self.arity,
                args.len()
            )));
        }
        let mut out = String::with_capacity(self.template.len() + 32);
        let mut rest = self.template.as_str();
        while let Some(open) = rest.find('{') {
            out.push_str(&rest[..open]);
            let close = rest[open..]
                .find('}')
                .ok_or_else(|| Error::Template(format!("unclosed slot in {:?}", self.template)))?;
            let idx: usize = rest[open + 1..open + close]
                .parse()
                .map_err(|_| Error::Template(format!("bad slot in {:?}", self.template)))?;
            out.push_str(
                args.get(idx)
                    .ok_or_else(|| Error::Template(format!("slot {idx} out of range")))?,
            );
            rest = &rest[open + close + 1..];
        }
        out.push_str(rest);
        Ok(out)
    }
}

/// Sorted slot indices of a template; errors on malformed or repeated slots.
fn template_slots(template: &str) -> Result<Vec<usize>> {
    let mut slots = Vec::new();
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        let close = rest[open..]
            .find('}')
            .ok_or_else(|| Error::Template(format!("unclosed slot in {template:?}")))?;
        let idx: usize = rest[open + 1..open + close]
            .trim()
            .parse()
            .map_err(|_| Error::Template(format!("slot must be a number in {template:?}")))?;
        if slots.contains(&idx) {
            return Err(Error::Template(format!(
                "slot {{{idx}}} repeated in {template:?}"
            )));
        }
        slots.push(idx);
        rest = &rest[open + close + 1..];
    }
    if rest.contains('}') {
        return Err(Error::Template(format!("stray '}}' in {template:?}")));
    }
    slots.sort_unstable();
    Ok(slots)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vocabulary {
    #[serde(rename = "relation")]
    relations: Vec<RelationDescriptor>,
}

impl Vocabulary {
    pub fn new(relations: Vec<RelationDescriptor>) -> Result<Self> {
        let mut seen = HashSet::new();
        for r in &relations {
            r.validate()?;
            if !seen.insert(r.id.as_str()) {
                return Err(Error::Vocabulary(format!("duplicate relation id {}", r.id)));
            }
        }
        Ok(Self { relations })
    }

    /// The seven relations: four directions, "close to", symmetry and stretched.
    pub fn default_vocabulary() -> Self {
        let mut rels = Self::directional_relations();
        rels.push(RelationDescriptor::new(
            "close_to",
            "close to",
            RelationKind::Distance {
                near: 0.05,
                far: 0.25,
            },
            "{0} is close to {1}",
        ));
        rels.push(RelationDescriptor::new(
            "symmetrical_to",
            "symmetrical to",
            RelationKind::Symmetry,
            "{0} is symmetrical to {1}",
        ));
        rels.push(RelationDescriptor::new(
            "stretched",
            "stretched",
            RelationKind::Stretched,
            "{0} is stretched",
        ));
        Self::new(rels).expect("built-in vocabulary is valid")
    }

    pub fn directional_only() -> Self {
        Self::new(Self::directional_relations()).expect("built-in vocabulary is valid")
    }

    fn directional_relations() -> Vec<RelationDescriptor> {
        vec![
            RelationDescriptor::new(
                "left_of",
                "to the left of",
                RelationKind::Directional {
                    direction_deg: 180.0,
                },
                "{0} is to the left of {1}",
            ),
            RelationDescriptor::new(
                "right_of",
                "to the right of",
                RelationKind::Directional { direction_deg: 0.0 },
                "{0} is to the right of {1}",
            ),
            RelationDescriptor::new(
                "below",
                "below",
                RelationKind::Directional {
                    direction_deg: 90.0,
                },
                "{0} is below {1}",
            ),
            RelationDescriptor::new(
                "above",
                "above",
                RelationKind::Directional {
                    direction_deg: -90.0,
                },
                "{0} is above {1}",
            ),
        ]
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: Vocabulary = toml::from_str(text).map_err(|e| Error::Vocabulary(e.to_string()))?;
        Self::new(raw.relations)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("vocabulary serialises")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| Error::File {
            path: path.into(),
            message: e.to_string(),
        })
    }

    pub fn relations(&self) -> &[RelationDescriptor] {
        &self.relations
    }

    pub fn get(&self, id: &str) -> Option<&RelationDescriptor> {
        self.relations.iter().find(|r| r.id == id)
    }

    pub fn len(&self) -> usize {
        self.relations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.relations.is_empty()
    }

    /// Number of evaluations on one image with `k` segments: `Σ_j k! / (k - arity_j)!`.
    pub fn evaluation_count(&self, k: usize) -> usize {
        self.relations
            .iter()
            .map(|r| falling_factorial(k, r.arity))
            .sum()
    }
}

pub(crate) fn falling_factorial(k: usize, r: usize) -> usize {
    if r > k {
        return 0;
    }
    (k - r + 1..=k).product()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_vocabulary_has_six_binary_one_unary() {
        let v = Vocabulary::default_vocabulary();
        assert_eq!(v.len(), 7);
        assert_eq!(v.relations().iter().filter(|r| r.arity == 2).count(), 6);
        assert_eq!(v.relations().iter().filter(|r| r.arity == 1).count(), 1);
        assert_eq!(v.evaluation_count(9), 441);
        assert_eq!(v.evaluation_count(1), 1);
    }

    #[test]
    fn toml_round_trip() {
        let v = Vocabulary::default_vocabulary();
        let back = Vocabulary::from_toml_str(&v.to_toml_string()).unwrap();
        assert_eq!(back, v);
    }

    #[test]
    fn rejects_arity_and_template_mismatches() {
        let bad_arity = r#"
[[relation]]
id = "x"
name = "x"
arity = 2
kind = "stretched"
template = "{0} is x"
"#;
        assert!(matches!(
            Vocabulary::from_toml_str(bad_arity),
            Err(Error::Vocabulary(_))
        ));
        let bad_template = r#"
[[relation]]
id = "left_of"
name = "to the left of"
arity = 2
kind = "directional"
direction_deg = 180.0
template = "{0} is to the left"
"#;
        assert!(matches!(
            Vocabulary::from_toml_str(bad_template),
            Err(Error::Template(_))
        ));
        let dup = Vocabulary::new(vec![
            RelationDescriptor::new("a", "a", RelationKind::Symmetry, "{0} a {1}"),
            RelationDescriptor::new("a", "a", RelationKind::Symmetry, "{0} a {1}"),
        ]);
        assert!(dup.is_err());
        let radii = Vocabulary::new(vec![RelationDescriptor::new(
            "c",
            "close to",
            RelationKind::Distance {
                near: 0.3,
                far: 0.1,
            },
            "{0} is close to {1}",
        )]);
        assert!(radii.is_err());
    }

    #[test]
    fn renders_slots() {
        let v = Vocabulary::default_vocabulary();
        let left = v.get("left_of").unwrap();
        assert_eq!(
            left.render(&["it", "the spleen"]).unwrap(),
            "it is to the left of the spleen"
        );
        assert_eq!(
            left.render(&["the liver (organ 4)", "it"]).unwrap(),
            "the liver (organ 4) is to the left of it"
        );
        assert!(left.render(&["it"]).is_err());
        assert_eq!(
            v.get("stretched").unwrap().render(&["it"]).unwrap(),
            "it is stretched"
        );
    }

    #[test]
    fn falling_factorial_counts_ordered_tuples() {
        assert_eq!(falling_factorial(9, 2), 72);
        assert_eq!(falling_factorial(3, 2), 6);
        assert_eq!(falling_factorial(1, 2), 0);
        assert_eq!(falling_factorial(4, 0), 1);
    }
}
