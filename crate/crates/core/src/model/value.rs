use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use chrono::{NaiveDate, NaiveDateTime, NaiveTime, Timelike};
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};

/// Column type of an attribute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttributeType {
    Integer,
    Decimal,
    Text,
    Date,
    Time,
    Datetime,
    Boolean,
}

impl AttributeType {
    pub fn name(self) -> &'static str {
        match self {
            AttributeType::Integer => "integer",
            AttributeType::Decimal => "decimal",
            AttributeType::Text => "text",
            AttributeType::Date => "date",
            AttributeType::Time => "time",
            AttributeType::Datetime => "datetime",
            AttributeType::Boolean => "boolean",
        }
    }

    /// Parses the textual form of a scalar of this type. Null handling is
    /// the caller's concern; this never returns `Value::Null`.
    pub fn parse(self, text: &str) -> Result<Value, String> {
        let bad = |e: &dyn fmt::Display| format!("invalid {} {:?}: {}", self.name(), text, e);
        Ok(match self {
            AttributeType::Integer => Value::Integer(text.trim().parse().map_err(|e| bad(&e))?),
            AttributeType::Decimal => {
                Value::Decimal(Decimal::from_str(text.trim()).map_err(|e| bad(&e))?)
            }
            AttributeType::Text => Value::Text(text.to_string()),
            AttributeType::Date => {
                Value::Date(NaiveDate::parse_from_str(text.trim(), DATE_FMT).map_err(|e| bad(&e))?)
            }
            AttributeType::Time => Value::Time(parse_time(text.trim()).map_err(|e| bad(&e))?),
            AttributeType::Datetime => {
                Value::DateTime(parse_datetime(text.trim()).map_err(|e| bad(&e))?)
            }
            AttributeType::Boolean => match text.trim().to_ascii_lowercase().as_str() {
                "true" | "t" | "1" => Value::Boolean(true),
                "false" | "f" | "0" => Value::Boolean(false),
                _ => return Err(format!("invalid boolean {:?}", text)),
            },
        })
    }
}

impl fmt::Display for AttributeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

const DATE_FMT: &str = "%Y-%m-%d";

fn parse_time(s: &str) -> chrono::ParseResult<NaiveTime> {
    NaiveTime::parse_from_str(s, "%H:%M").or_else(|_| NaiveTime::parse_from_str(s, "%H:%M:%S"))
}

fn parse_datetime(s: &str) -> chrono::ParseResult<NaiveDateTime> {
    ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"]
        .iter()
        .map(|f| NaiveDateTime::parse_from_str(s, f))
        .find(Result::is_ok)
        .unwrap_or_else(|| NaiveDateTime::parse_from_str(s, "%Y-%m-%dT%H:%M:%S"))
}

/// A single cell. `Null` is distinct from every scalar, including the empty
/// text; equality between scalars is type-aware.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    Null,
    Integer(i64),
    Decimal(Decimal),
    Text(String),
    Date(NaiveDate),
    Time(NaiveTime),
    DateTime(NaiveDateTime),
    Boolean(bool),
}

impl Value {
    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null)
    }

    pub fn text(s: impl Into<String>) -> Self {
        Value::Text(s.into())
    }

    pub fn type_of(&self) -> Option<AttributeType> {
        Some(match self {
            Value::Null => return None,
            Value::Integer(_) => AttributeType::Integer,
            Value::Decimal(_) => AttributeType::Decimal,
            Value::Text(_) => AttributeType::Text,
            Value::Date(_) => AttributeType::Date,
            Value::Time(_) => AttributeType::Time,
            Value::DateTime(_) => AttributeType::Datetime,
            Value::Boolean(_) => AttributeType::Boolean,
        })
    }

    /// Canonical text form, as written to CSV. `None` for Null.
    pub fn to_text(&self) -> Option<String> {
        Some(match self {
            Value::Null => return None,
            Value::Integer(i) => i.to_string(),
            Value::Decimal(d) => d.to_string(),
            Value::Text(s) => s.clone(),
            Value::Date(d) => d.format(DATE_FMT).to_string(),
            Value::Time(t) if t.second() == 0 => t.format("%H:%M").to_string(),
            Value::Time(t) => t.format("%H:%M:%S").to_string(),
            Value::DateTime(dt) => dt.format("%Y-%m-%dT%H:%M:%S").to_string(),
            Value::Boolean(b) => b.to_string(),
        })
    }

    /// Order used to elect the representative ("minimum") of an equivalence
    /// class: numeric for integers, byte order of the canonical text form
    /// otherwise. Null sorts first.
    pub fn representative_cmp(&self, other: &Value) -> Ordering {
        match (self, other) {
            (Value::Integer(a), Value::Integer(b)) => a.cmp(b),
            (Value::Null, Value::Null) => Ordering::Equal,
            (Value::Null, _) => Ordering::Less,
            (_, Value::Null) => Ordering::Greater,
            _ => self.to_text().cmp(&other.to_text()),
        }
    }

    /// JSON rendering used in decision payloads and reports: Null maps to
    /// `null`, every scalar to its canonical text.
    pub fn to_json(&self) -> serde_json::Value {
        match self.to_text() {
            None => serde_json::Value::Null,
            Some(s) => serde_json::Value::String(s),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.to_text() {
            None => f.write_str("NULL"),
            Some(s) => f.write_str(&s),
        }
    }
}

impl From<i64> for Value {
    fn from(v: i64) -> Self {
        Value::Integer(v)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Text(v.to_string())
    }
}

impl From<String> for Value {
    fn from(v: String) -> Self {
        Value::Text(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn null_differs_from_empty_text() {
        assert_ne!(Value::Null, Value::text(""));
    }

    #[test]
    fn equality_is_type_aware() {
        assert_ne!(Value::Integer(7), Value::text("7"));
    }

    #[test]
    fn parse_and_render_roundtrip() {
        for (ty, s) in [
            (AttributeType::Integer, "744"),
            (AttributeType::Decimal, "25.8"),
            (AttributeType::Decimal, "27"),
            (AttributeType::Date, "2014-07-15"),
            (AttributeType::Time, "10:00"),
            (AttributeType::Time, "10:00:05"),
            (AttributeType::Datetime, "2022-02-08T10:00:00"),
            (AttributeType::Boolean, "true"),
            (AttributeType::Text, " spaced "),
        ] {
            assert_eq!(ty.parse(s).unwrap().to_text().unwrap(), s);
        }
    }

    #[test]
    fn representative_order() {
        assert_eq!(
            Value::Integer(9).representative_cmp(&Value::Integer(10)),
            Ordering::Less
        );
        assert_eq!(
            Value::text("4745dd610e").representative_cmp(&Value::text("c59a2c0744")),
            Ordering::Less
        );
    }

    #[test]
    fn bad_scalars_rejected() {
        assert!(AttributeType::Integer.parse("x").is_err());
        assert!(AttributeType::Date.parse("15-07-2014").is_err());
        assert!(AttributeType::Boolean.parse("maybe").is_err());
    }
}
