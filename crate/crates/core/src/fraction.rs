use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use rust_decimal::Decimal;
use serde::ser::SerializeStruct;
use serde::Serialize;

/// Exact non-negative rational, used for g3, stability and AU values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Fraction(Ratio<u64>);

impl Fraction {
    /// Panics when `denom` is zero.
    pub fn new(numer: u64, denom: u64) -> Self {
        Fraction(Ratio::new(numer, denom))
    }

    pub fn zero() -> Self {
        Fraction(Ratio::from_integer(0))
    }

    pub fn one() -> Self {
        Fraction(Ratio::from_integer(1))
    }

    pub fn numer(&self) -> u64 {
        *self.0.numer()
    }

    pub fn denom(&self) -> u64 {
        *self.0.denom()
    }

    pub fn is_zero(&self) -> bool {
        self.numer() == 0
    }

    pub fn to_f64(&self) -> f64 {
        self.numer() as f64 / self.denom() as f64
    }

    /// Parses `p/q`, an integer, a non-negative decimal (`0.25`) or a
    /// percentage (`25%`, `12.5%`).
    pub fn parse(s: &str) -> Option<Self> {
        let s = s.trim();
        if let Some(pct) = s.strip_suffix('%') {
            let f = Self::parse(pct)?;
            return Some(Fraction(f.0 / 100));
        }
        if let Some((p, q)) = s.split_once('/') {
            let q: u64 = q.trim().parse().ok()?;
            if q == 0 {
                return None;
            }
            return Some(Self::new(p.trim().parse().ok()?, q));
        }
        let d = Decimal::from_str(s).ok()?;
        if d.is_sign_negative() {
            return None;
        }
        let numer = u64::try_from(d.mantissa()).ok()?;
        let denom = 10u64.checked_pow(d.scale())?;
        Some(Self::new(numer, denom))
    }
}

impl fmt::Display for Fraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.numer(), self.denom())
    }
}

/// Serialized as `{"exact": "p/q", "decimal": x}`.
impl Serialize for Fraction {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("Fraction", 2)?;
        st.serialize_field("exact", &self.to_string())?;
        st.serialize_field("decimal", &self.to_f64())?;
        st.end()
    }
}
