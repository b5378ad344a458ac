//! Organ labels.

use std::fmt;

use serde::{Deserialize, Serialize};

/// A class label from the label set Y, identified by a short snake_case key.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Label(String);

impl Label {
    pub fn new(key: impl Into<String>) -> Self {
        Self(key.into())
    }

    pub fn key(&self) -> &str {
        &self.0
    }

    /// Human-readable organ name used in explanations.
    pub fn display_name(&self) -> String {
        match self.0.as_str() {
            "liver" => "liver".into(),
            "spleen" => "spleen".into(),
            "bladder" => "bladder".into(),
            "r_kidney" => "right kidney".into(),
            "l_kidney" => "left kidney".into(),
            "r_lung" => "right lung".into(),
            "l_lung" => "left lung".into(),
            "r_psoas" => "right psoas muscle".into(),
            "l_psoas" => "left psoas muscle".into(),
            other => other.replace('_', " "),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Label {
    fn from(s: &str) -> Self {
        Self::new(s)
    }
}

/// Keys of the nine studied organs, in canonical order.
pub const ORGANS: [&str; 9] = [
    "liver", "spleen", "bladder", "r_kidney", "l_kidney", "r_lung", "l_lung", "r_psoas", "l_psoas",
];

pub fn organ_labels() -> Vec<Label> {
    ORGANS.iter().map(|k| Label::new(*k)).collect()
}
