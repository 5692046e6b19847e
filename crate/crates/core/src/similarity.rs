//! Value similarity realized as canonicalization: two values are similar
//! iff their canonical forms are equal, which keeps the relation an
//! equivalence and lets grouping stay hash-based.

use std::borrow::Cow;
use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::model::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Canonicalizer {
    #[default]
    Identity,
    Trim,
    CaseFold,
    TrimCaseFold,
    CollapseWhitespace,
    /// Text dates in `DD-MM-YYYY`, `DD/MM/YYYY`, `YYYY/MM/DD` or ISO form
    /// normalized to ISO.
    DateNormalize,
}

impl Canonicalizer {
    pub fn id(self) -> &'static str {
        match self {
            Canonicalizer::Identity => "identity",
            Canonicalizer::Trim => "trim",
            Canonicalizer::CaseFold => "case_fold",
            Canonicalizer::TrimCaseFold => "trim_case_fold",
            Canonicalizer::CollapseWhitespace => "collapse_whitespace",
            Canonicalizer::DateNormalize => "date_normalize",
        }
    }

    pub fn canonical<'a>(self, value: &'a Value) -> Cow<'a, Value> {
        let Value::Text(s) = value else {
            return Cow::Borrowed(value);
        };
        let out = match self {
            Canonicalizer::Identity => return Cow::Borrowed(value),
            Canonicalizer::Trim => s.trim().to_string(),
            Canonicalizer::CaseFold => s.to_lowercase(),
            Canonicalizer::TrimCaseFold => s.trim().to_lowercase(),
            Canonicalizer::CollapseWhitespace => s.split_whitespace().collect::<Vec<_>>().join(" "),
            Canonicalizer::DateNormalize => {
                let t = s.trim();
                match ["%d-%m-%Y", "%d/%m/%Y", "%Y-%m-%d", "%Y/%m/%d", "%d.%m.%Y"]
                    .iter()
                    .find_map(|f| NaiveDate::parse_from_str(t, f).ok())
                {
                    Some(d) => d.format("%Y-%m-%d").to_string(),
                    None => return Cow::Borrowed(value),
                }
            }
        };
        if out == *s {
            Cow::Borrowed(value)
        } else {
            Cow::Owned(Value::Text(out))
        }
    }
}

/// Per-attribute canonicalizers of one relation; attributes without an
/// entry use plain equality. Null is always similar to Null only.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimilarityPolicy {
    pub attributes: BTreeMap<String, Canonicalizer>,
}

impl SimilarityPolicy {
    pub fn exact() -> Self {
        Self::default()
    }

    pub fn set(&mut self, attribute: &str, c: Canonicalizer) {
        if c == Canonicalizer::Identity {
            self.attributes.remove(attribute);
        } else {
            self.attributes.insert(attribute.to_string(), c);
        }
    }

    pub fn get(&self, attribute: &str) -> Canonicalizer {
        self.attributes.get(attribute).copied().unwrap_or_default()
    }

    pub fn canonical<'a>(&self, attribute: &str, value: &'a Value) -> Cow<'a, Value> {
        self.get(attribute).canonical(value)
    }

    pub fn is_exact(&self) -> bool {
        self.attributes.is_empty()
    }
}
