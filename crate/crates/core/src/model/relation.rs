use std::collections::{BTreeMap, HashSet};

use super::schema::{Attribute, RelationSchema};
use super::value::Value;
use super::ModelError;

pub type Row = Vec<Value>;

/// A relation instance: a multiset of rows over a schema.
///
/// Besides the visible rows, each row carries a hidden ordinal (assigned at
/// load time) and, once surrogate values have been rewritten, the original
/// values of the rewritten columns. Neither is ever serialized.
#[derive(Debug, Clone)]
pub struct Relation {
    schema: RelationSchema,
    rows: Vec<Row>,
    ordinals: Vec<u64>,
    provenance: BTreeMap<String, Vec<Value>>,
}

impl Relation {
    pub fn empty(schema: RelationSchema) -> Self {
        Self {
            schema,
            rows: Vec::new(),
            ordinals: Vec::new(),
            provenance: BTreeMap::new(),
        }
    }

    /// Builds a relation, checking arity, value types and nullability.
    pub fn from_rows(schema: RelationSchema, rows: Vec<Row>) -> Result<Self, ModelError> {
        let mut rel = Self::empty(schema);
        for row in rows {
            rel.push(row)?;
        }
        Ok(rel)
    }

    pub fn push(&mut self, row: Row) -> Result<(), ModelError> {
        let index = self.rows.len();
        self.check_row(index, &row)?;
        let ordinal = self.ordinals.last().map_or(0, |o| o + 1);
        self.rows.push(row);
        self.ordinals.push(ordinal);
        for col in self.provenance.values_mut() {
            col.push(Value::Null);
        }
        Ok(())
    }

    fn check_row(&self, index: usize, row: &Row) -> Result<(), ModelError> {
        if row.len() != self.schema.arity() {
            return Err(ModelError::Arity {
                relation: self.schema.name.clone(),
                row: index,
                expected: self.schema.arity(),
                found: row.len(),
            });
        }
        for (attr, value) in self.schema.attributes.iter().zip(row) {
            let ok = match value.type_of() {
                None => attr.nullable,
                Some(t) => t == attr.ty,
            };
            if !ok {
                return Err(ModelError::TypeParse {
                    relation: self.schema.name.clone(),
                    row: index,
                    attribute: attr.name.clone(),
                    message: format!("value {} does not fit {}", value, attr.ty),
                });
            }
        }
        Ok(())
    }

    pub fn schema(&self) -> &RelationSchema {
        &self.schema
    }

    pub fn name(&self) -> &str {
        &self.schema.name
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn ordinals(&self) -> &[u64] {
        &self.ordinals
    }

    pub fn position(&self, attribute: &str) -> Result<usize, ModelError> {
        self.schema
            .position(attribute)
            .ok_or_else(|| ModelError::UnknownAttribute {
                relation: self.schema.name.clone(),
                attribute: attribute.to_string(),
            })
    }

    pub fn positions<S: AsRef<str>>(&self, attributes: &[S]) -> Result<Vec<usize>, ModelError> {
        attributes.iter().map(|a| self.position(a.as_ref())).collect()
    }

    pub fn column(&self, attribute: &str) -> Result<Vec<&Value>, ModelError> {
        let p = self.position(attribute)?;
        Ok(self.rows.iter().map(|r| &r[p]).collect())
    }

    /// Original (pre-rewrite) values of `attribute`, if it was rewritten.
    pub fn provenance(&self, attribute: &str) -> Option<&[Value]> {
        self.provenance.get(attribute).map(Vec::as_slice)
    }

    pub fn has_provenance(&self) -> bool {
        !self.provenance.is_empty()
    }

    /// Original value of `attribute` for row `index`: the provenance value
    /// when the column was rewritten, else the current value.
    pub fn original_value(&self, index: usize, attribute: &str) -> Result<&Value, ModelError> {
        match self.provenance.get(attribute) {
            Some(col) => Ok(&col[index]),
            None => Ok(&self.rows[index][self.position(attribute)?]),
        }
    }

    /// Replaces every value of `attribute` through `f`, remembering the
    /// first-seen original values as provenance.
    pub fn rewrite_column<F>(&mut self, attribute: &str, mut f: F) -> Result<(), ModelError>
    where
        F: FnMut(usize, &Value) -> Value,
    {
        let p = self.position(attribute)?;
        if !self.provenance.contains_key(attribute) {
            let original = self.rows.iter().map(|r| r[p].clone()).collect();
            self.provenance.insert(attribute.to_string(), original);
        }
        for (i, row) in self.rows.iter_mut().enumerate() {
            row[p] = f(i, &row[p]);
        }
        Ok(())
    }

    /// Overwrites single cells without touching provenance.
    pub(crate) fn set_value(&mut self, row: usize, position: usize, value: Value) {
        self.rows[row][position] = value;
    }

    /// Multiset projection onto `attributes` (in the given order). Row
    /// ordinals and provenance columns travel along.
    pub fn project<S: AsRef<str>>(&self, name: &str, attributes: &[S]) -> Result<Self, ModelError> {
        let pos = self.positions(attributes)?;
        let attrs: Vec<Attribute> = pos
            .iter()
            .map(|&p| self.schema.attributes[p].clone())
            .collect();
        let mut schema = RelationSchema::new(name, attrs);
        let kept: Vec<String> = attributes.iter().map(|a| a.as_ref().to_string()).collect();
        let keep = |cols: &[String]| cols.iter().all(|c| kept.contains(c));
        schema.primary_key = self.schema.primary_key.clone().filter(|k| keep(k));
        schema.unique = self.schema.unique.iter().filter(|k| keep(k)).cloned().collect();
        schema.foreign_keys = self
            .schema
            .foreign_keys
            .iter()
            .filter(|fk| keep(&fk.columns))
            .cloned()
            .collect();
        Ok(Self {
            schema,
            rows: self
                .rows
                .iter()
                .map(|r| pos.iter().map(|&p| r[p].clone()).collect())
                .collect(),
            ordinals: self.ordinals.clone(),
            provenance: self.provenance.clone(),
        })
    }

    /// Keeps the rows at `indices` (in that order).
    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            schema: self.schema.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            ordinals: indices.iter().map(|&i| self.ordinals[i]).collect(),
            provenance: self
                .provenance
                .iter()
                .map(|(k, col)| (k.clone(), indices.iter().map(|&i| col[i].clone()).collect()))
                .collect(),
        }
    }

    /// Set semantics: keeps the first occurrence of every distinct row and
    /// drops provenance.
    pub fn distinct(&self) -> Self {
        let mut seen = HashSet::with_capacity(self.rows.len());
        let keep: Vec<usize> = (0..self.rows.len())
            .filter(|&i| seen.insert(&self.rows[i]))
            .collect();
        let mut out = self.select(&keep);
        out.provenance.clear();
        out
    }

    pub fn without_provenance(mut self) -> Self {
        self.provenance.clear();
        self
    }

    pub fn with_schema(mut self, schema: RelationSchema) -> Self {
        debug_assert_eq!(schema.arity(), self.schema.arity());
        self.schema = schema;
        self
    }

    pub(crate) fn schema_mut(&mut self) -> &mut RelationSchema {
        &mut self.schema
    }

    /// Inserts a column at `index` of the schema.
    pub(crate) fn insert_column<F>(&mut self, index: usize, attribute: Attribute, mut f: F)
    where
        F: FnMut(usize, &Row) -> Value,
    {
        for (i, row) in self.rows.iter_mut().enumerate() {
            let v = f(i, row);
            row.insert(index, v);
        }
        self.schema.attributes.insert(index, attribute);
    }

    /// Appends copies of the rows at `sources`, each with a fresh ordinal.
    pub(crate) fn duplicate_rows(&mut self, sources: &[usize]) {
        let first = self.ordinals.iter().max().map_or(0, |o| o + 1);
        for (ordinal, &source) in (first..).zip(sources) {
            let row = self.rows[source].clone();
            self.rows.push(row);
            self.ordinals.push(ordinal);
            for col in self.provenance.values_mut() {
                let v = col[source].clone();
                col.push(v);
            }
        }
    }

    /// Rows sorted on all attributes; the canonical multiset form.
    pub fn sorted_rows(&self) -> Vec<Row> {
        let mut rows = self.rows.clone();
        rows.sort();
        rows
    }
}

/// Relations compare as (schema, row multiset); ordinals and provenance are
/// ignored.
impl PartialEq for Relation {
    fn eq(&self, other: &Self) -> bool {
        self.schema == other.schema
            && self.rows.len() == other.rows.len()
            && self.sorted_rows() == other.sorted_rows()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::AttributeType;

    fn schema() -> RelationSchema {
        RelationSchema::new(
            "t",
            vec![
                Attribute::new("id", AttributeType::Integer, false),
                Attribute::new("v", AttributeType::Text, true),
            ],
        )
    }

    #[test]
    fn rejects_null_in_non_nullable() {
        let err = Relation::from_rows(schema(), vec![vec![Value::Null, Value::Null]]);
        assert!(matches!(err, Err(ModelError::TypeParse { .. })));
    }

    #[test]
    fn rejects_wrong_arity() {
        let err = Relation::from_rows(schema(), vec![vec![Value::Integer(1)]]);
        assert!(matches!(err, Err(ModelError::Arity { .. })));
    }

    #[test]
    fn multiset_equality_ignores_order() {
        let a = Relation::from_rows(
            schema(),
            vec![vec![1.into(), "x".into()], vec![2.into(), Value::Null]],
        )
        .unwrap();
        let b = Relation::from_rows(
            schema(),
            vec![vec![2.into(), Value::Null], vec![1.into(), "x".into()]],
        )
        .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rewrite_keeps_first_original() {
        let mut r = Relation::from_rows(schema(), vec![vec![5.into(), "x".into()]]).unwrap();
        r.rewrite_column("id", |_, _| 3.into()).unwrap();
        r.rewrite_column("id", |_, _| 1.into()).unwrap();
        assert_eq!(r.provenance("id").unwrap(), &[Value::Integer(5)]);
        assert_eq!(r.original_value(0, "id").unwrap(), &Value::Integer(5));
        assert_eq!(r.rows()[0][0], Value::Integer(1));
    }

    #[test]
    fn distinct_drops_exact_duplicates() {
        let r = Relation::from_rows(
            schema(),
            vec![
                vec![1.into(), "x".into()],
                vec![1.into(), "x".into()],
                vec![1.into(), Value::Null],
            ],
        )
        .unwrap();
        assert_eq!(r.distinct().len(), 2);
    }
}
