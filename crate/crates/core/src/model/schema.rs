use serde::{Deserialize, Serialize};

use super::value::AttributeType;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attribute {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: AttributeType,
    #[serde(default = "default_nullable")]
    pub nullable: bool,
}

fn default_nullable() -> bool {
    true
}

impl Attribute {
    pub fn new(name: impl Into<String>, ty: AttributeType, nullable: bool) -> Self {
        Self {
            name: name.into(),
            ty,
            nullable,
        }
    }
}

/// `columns` of the owning relation reference `ref_columns` of `ref_relation`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ForeignKey {
    pub columns: Vec<String>,
    pub ref_relation: String,
    pub ref_columns: Vec<String>,
}

impl ForeignKey {
    pub fn new(column: &str, ref_relation: &str, ref_column: &str) -> Self {
        Self {
            columns: vec![column.to_string()],
            ref_relation: ref_relation.to_string(),
            ref_columns: vec![ref_column.to_string()],
        }
    }

    /// The single local column of a unary foreign key.
    pub fn unary(&self) -> Option<(&str, &str)> {
        match (self.columns.as_slice(), self.ref_columns.as_slice()) {
            ([c], [rc]) => Some((c, rc)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationSchema {
    pub name: String,
    pub attributes: Vec<Attribute>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub primary_key: Option<Vec<String>>,
    #[serde(default)]
    pub unique: Vec<Vec<String>>,
    #[serde(default)]
    pub foreign_keys: Vec<ForeignKey>,
}

impl RelationSchema {
    pub fn new(name: impl Into<String>, attributes: Vec<Attribute>) -> Self {
        Self {
            name: name.into(),
            attributes,
            primary_key: None,
            unique: Vec::new(),
            foreign_keys: Vec::new(),
        }
    }

    pub fn with_primary_key(mut self, key: &[&str]) -> Self {
        self.primary_key = Some(key.iter().map(|s| s.to_string()).collect());
        self
    }

    pub fn with_unique(mut self, key: &[&str]) -> Self {
        self.unique.push(key.iter().map(|s| s.to_string()).collect());
        self
    }

    pub fn with_foreign_key(mut self, fk: ForeignKey) -> Self {
        self.foreign_keys.push(fk);
        self
    }

    pub fn arity(&self) -> usize {
        self.attributes.len()
    }

    pub fn position(&self, attribute: &str) -> Option<usize> {
        self.attributes.iter().position(|a| a.name == attribute)
    }

    pub fn attribute(&self, attribute: &str) -> Option<&Attribute> {
        self.attributes.iter().find(|a| a.name == attribute)
    }

    pub fn attribute_names(&self) -> impl Iterator<Item = &str> {
        self.attributes.iter().map(|a| a.name.as_str())
    }

    /// Primary key followed by every unique constraint.
    pub fn declared_keys(&self) -> impl Iterator<Item = &Vec<String>> {
        self.primary_key.iter().chain(self.unique.iter())
    }

    pub fn is_declared_key(&self, attrs: &[String]) -> bool {
        self.declared_keys().any(|k| same_set(k, attrs))
    }

    /// Foreign keys whose local column set is exactly `{attribute}`.
    pub fn foreign_keys_on<'a>(&'a self, attribute: &'a str) -> impl Iterator<Item = &'a ForeignKey> {
        self.foreign_keys
            .iter()
            .filter(move |fk| fk.columns.len() == 1 && fk.columns[0] == attribute)
    }

    pub fn is_foreign_key_column(&self, attribute: &str) -> bool {
        self.foreign_keys
            .iter()
            .any(|fk| fk.columns.iter().any(|c| c == attribute))
    }
}

pub(crate) fn same_set(a: &[String], b: &[String]) -> bool {
    a.len() == b.len() && a.iter().all(|x| b.contains(x))
}
