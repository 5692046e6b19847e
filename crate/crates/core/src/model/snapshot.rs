use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::csv_io;
use super::relation::Relation;
use super::schema::RelationSchema;
use super::validate::{validate_constraints, ValidationReport};
use super::value::{AttributeType, Value};
use super::ModelError;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub relations: Vec<RelationSchema>,
}

/// A set of relations keyed by name, plus the validation report computed
/// when it was loaded. Snapshots are immutable values: pipeline stages
/// return new snapshots, sharing the relations they leave untouched.
#[derive(Debug, Clone, Default)]
pub struct DatabaseSnapshot {
    relations: BTreeMap<String, Arc<Relation>>,
    pub validation: ValidationReport,
}

impl PartialEq for DatabaseSnapshot {
    fn eq(&self, other: &Self) -> bool {
        self.relations == other.relations
    }
}

impl DatabaseSnapshot {
    /// Builds a snapshot, checking the manifest-level invariants (attribute
    /// names, key columns, FK targets) but not the data-level ones.
    pub fn new(relations: Vec<Relation>) -> Result<Self, ModelError> {
        let mut map = BTreeMap::new();
        for r in relations {
            let name = r.name().to_string();
            if map.insert(name.clone(), Arc::new(r)).is_some() {
                return Err(ModelError::MalformedManifest(format!(
                    "relation {name} declared twice"
                )));
            }
        }
        let db = Self {
            relations: map,
            validation: ValidationReport::default(),
        };
        db.check_schemas()?;
        Ok(db)
    }

    /// Builds a snapshot without schema checks; used for intermediate
    /// pipeline states whose constraints are temporarily disabled.
    pub(crate) fn from_map(relations: BTreeMap<String, Arc<Relation>>) -> Self {
        Self {
            relations,
            validation: ValidationReport::default(),
        }
    }

    pub fn relation(&self, name: &str) -> Result<&Relation, ModelError> {
        self.relations
            .get(name)
            .map(Arc::as_ref)
            .ok_or_else(|| ModelError::UnknownRelation(name.to_string()))
    }

    pub fn get(&self, name: &str) -> Option<&Relation> {
        self.relations.get(name).map(Arc::as_ref)
    }

    pub fn relations(&self) -> impl Iterator<Item = &Relation> {
        self.relations.values().map(Arc::as_ref)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.relations.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.relations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.relations.is_empty()
    }

    pub fn total_rows(&self) -> usize {
        self.relations.values().map(|r| r.len()).sum()
    }

    pub fn manifest(&self) -> Manifest {
        Manifest {
            relations: self.relations.values().map(|r| r.schema().clone()).collect(),
        }
    }

    pub(crate) fn into_map(self) -> BTreeMap<String, Arc<Relation>> {
        self.relations
    }

    pub fn check_schemas(&self) -> Result<(), ModelError> {
        for rel in self.relations.values() {
            check_schema(rel.schema(), |name| self.relations.get(name).map(|r| r.schema()))?;
        }
        Ok(())
    }
}

fn check_schema<'a>(
    schema: &RelationSchema,
    lookup: impl Fn(&str) -> Option<&'a RelationSchema>,
) -> Result<(), ModelError> {
    let bad = |msg: String| Err(ModelError::MalformedManifest(format!("{}: {}", schema.name, msg)));
    let mut seen = HashSet::new();
    for a in &schema.attributes {
        if !seen.insert(a.name.as_str()) {
            return bad(format!("attribute {} declared twice", a.name));
        }
    }
    for key in schema.declared_keys() {
        if key.is_empty() {
            return bad("empty key".into());
        }
        if let Some(c) = key.iter().find(|c| !seen.contains(c.as_str())) {
            return bad(format!("key references unknown attribute {c}"));
        }
    }
    for fk in &schema.foreign_keys {
        if fk.columns.is_empty() || fk.columns.len() != fk.ref_columns.len() {
            return bad("foreign key column lists differ in length".into());
        }
        if let Some(c) = fk.columns.iter().find(|c| !seen.contains(c.as_str())) {
            return bad(format!("foreign key references unknown attribute {c}"));
        }
        let target = lookup(&fk.ref_relation).ok_or_else(|| ModelError::UnknownFkTarget {
            relation: schema.name.clone(),
            target: fk.ref_relation.clone(),
        })?;
        if !target.is_declared_key(&fk.ref_columns) {
            return bad(format!(
                "foreign key target {}({}) is not a declared key",
                fk.ref_relation,
                fk.ref_columns.join(",")
            ));
        }
    }
    Ok(())
}

/// Reads a snapshot directory: `manifest.json` plus one `<relation>.csv`
/// per declared relation. Declared-key and FK violations do not fail the
/// load; they end up in `validation`.
pub fn load_snapshot(path: impl AsRef<Path>) -> Result<DatabaseSnapshot, ModelError> {
    let dir = path.as_ref();
    let manifest_path = dir.join(MANIFEST_FILE);
    if !manifest_path.is_file() {
        return Err(ModelError::MissingManifest(dir.to_path_buf()));
    }
    let text = fs::read_to_string(&manifest_path)?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| ModelError::MalformedManifest(e.to_string()))?;

    let schemas: BTreeMap<&str, &RelationSchema> =
        manifest.relations.iter().map(|s| (s.name.as_str(), s)).collect();
    if schemas.len() != manifest.relations.len() {
        return Err(ModelError::MalformedManifest("duplicate relation name".into()));
    }
    for s in &manifest.relations {
        check_schema(s, |n| schemas.get(n).copied())?;
    }

    let mut relations = Vec::with_capacity(manifest.relations.len());
    for schema in &manifest.relations {
        let file = dir.join(format!("{}.csv", schema.name));
        if !file.is_file() {
            return Err(ModelError::MissingRelationFile {
                relation: schema.name.clone(),
                path: file,
            });
        }
        relations.push(read_relation(schema.clone(), &fs::read_to_string(&file)?)?);
    }
    let mut db = DatabaseSnapshot::new(relations)?;
    db.validation = validate_constraints(&db);
    Ok(db)
}

fn read_relation(schema: RelationSchema, text: &str) -> Result<Relation, ModelError> {
    let records = csv_io::parse(text).map_err(|e| ModelError::TypeParse {
        relation: schema.name.clone(),
        row: e.line,
        attribute: String::new(),
        message: e.message,
    })?;
    let mut it = records.into_iter();
    let header = it.next().ok_or_else(|| {
        ModelError::MalformedManifest(format!("{}.csv has no header row", schema.name))
    })?;
    let names: Vec<&str> = header.iter().map(|f| f.text.as_str()).collect();
    if !names.iter().copied().eq(schema.attribute_names()) {
        return Err(ModelError::MalformedManifest(format!(
            "{}.csv header {:?} does not match manifest attributes",
            schema.name, names
        )));
    }
    let mut rel = Relation::empty(schema.clone());
    for (i, record) in it.enumerate() {
        // blank line in a multi-column file
        if record.len() == 1 && schema.arity() > 1 && record[0].text.is_empty() && !record[0].quoted
        {
            continue;
        }
        if record.len() != schema.arity() {
            return Err(ModelError::Arity {
                relation: schema.name.clone(),
                row: i,
                expected: schema.arity(),
                found: record.len(),
            });
        }
        let mut row = Vec::with_capacity(record.len());
        for (field, attr) in record.iter().zip(&schema.attributes) {
            let value = if field.text.is_empty() && (!field.quoted || attr.ty != AttributeType::Text) {
                Value::Null
            } else {
                attr.ty.parse(&field.text).map_err(|message| ModelError::TypeParse {
                    relation: schema.name.clone(),
                    row: i,
                    attribute: attr.name.clone(),
                    message,
                })?
            };
            row.push(value);
        }
        rel.push(row).map_err(|e| match e {
            ModelError::TypeParse {
                relation,
                attribute,
                message,
                ..
            } => ModelError::TypeParse {
                relation,
                row: i,
                attribute,
                message,
            },
            other => other,
        })?;
    }
    Ok(rel)
}

/// Serializes a relation to CSV text with rows sorted on all attributes.
pub fn relation_csv(rel: &Relation) -> String {
    let mut out = String::new();
    let names: Vec<&str> = rel.schema().attribute_names().collect();
    csv_io::encode_header(&names, &mut out);
    for row in rel.sorted_rows() {
        csv_io::encode_row(&row, &mut out);
    }
    out
}

pub fn manifest_json(db: &DatabaseSnapshot) -> String {
    let mut s = serde_json::to_string_pretty(&db.manifest()).expect("manifest serializes");
    s.push('\n');
    s
}

/// Writes `db` under `path` (created if needed). Output is a pure function
/// of the snapshot's content, so equal snapshots produce identical bytes.
pub fn store_snapshot(db: &DatabaseSnapshot, path: impl AsRef<Path>) -> Result<(), ModelError> {
    let dir = path.as_ref();
    fs::create_dir_all(dir)?;
    fs::write(dir.join(MANIFEST_FILE), manifest_json(db))?;
    for rel in db.relations() {
        fs::write(dir.join(format!("{}.csv", rel.name())), relation_csv(rel))?;
    }
    Ok(())
}
