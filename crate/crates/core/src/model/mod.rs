//! Snapshot data model: typed values, relation schemas and instances, the
//! on-disk snapshot format and declared-constraint validation.

pub mod csv_io;
pub(crate) mod grouping;
mod relation;
mod schema;
mod snapshot;
mod tag;
mod validate;
mod value;

use std::path::PathBuf;

pub use relation::{Relation, Row};
pub use schema::{Attribute, ForeignKey, RelationSchema};
pub use snapshot::{
    load_snapshot, manifest_json, relation_csv, store_snapshot, DatabaseSnapshot, Manifest,
};
pub use tag::AttributeTag;
pub use validate::{validate_constraints, Finding, ValidationReport};
pub use value::{AttributeType, Value};

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("no manifest.json in {0}")]
    MissingManifest(PathBuf),
    #[error("malformed manifest: {0}")]
    MalformedManifest(String),
    #[error("missing data file for relation {relation}: {path}")]
    MissingRelationFile { relation: String, path: PathBuf },
    #[error("{relation} row {row}, attribute {attribute}: {message}")]
    TypeParse {
        relation: String,
        row: usize,
        attribute: String,
        message: String,
    },
    #[error("{relation} row {row}: expected {expected} fields, found {found}")]
    Arity {
        relation: String,
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("foreign key of {relation} targets unknown relation {target}")]
    UnknownFkTarget { relation: String, target: String },
    #[error("unknown relation {0}")]
    UnknownRelation(String),
    #[error("unknown attribute {attribute} in {relation}")]
    UnknownAttribute { relation: String, attribute: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl serde::Serialize for Value {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self.to_text() {
            None => s.serialize_none(),
            Some(t) => s.serialize_str(&t),
        }
    }
}
