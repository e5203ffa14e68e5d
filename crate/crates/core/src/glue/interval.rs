use std::fmt;

use serde::de::{self, Deserializer};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};

/// One end of an interval of inverse temperatures.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Endpoint {
    NegInf,
    PosInf,
    Finite { value: f64, closed: bool },
}

impl Endpoint {
    pub fn closed(value: f64) -> Self {
        Endpoint::Finite {
            value,
            closed: true,
        }
    }

    pub fn open(value: f64) -> Self {
        Endpoint::Finite {
            value,
            closed: false,
        }
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            Endpoint::Finite { value, .. } => Some(*value),
            _ => None,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum EndpointRepr {
    Inf(String),
    Finite {
        value: f64,
        #[serde(default)]
        closed: bool,
    },
}

impl Serialize for Endpoint {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match *self {
            Endpoint::NegInf => EndpointRepr::Inf("-inf".into()),
            Endpoint::PosInf => EndpointRepr::Inf("+inf".into()),
            Endpoint::Finite { value, closed } => EndpointRepr::Finite { value, closed },
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Endpoint {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match EndpointRepr::deserialize(d)? {
            EndpointRepr::Inf(s) => match s.as_str() {
                "-inf" => Ok(Endpoint::NegInf),
                "+inf" | "inf" => Ok(Endpoint::PosInf),
                other => Err(de::Error::custom(format!("unknown endpoint {other:?}"))),
            },
            EndpointRepr::Finite { value, closed } if value.is_finite() => {
                Ok(Endpoint::Finite { value, closed })
            }
            EndpointRepr::Finite { .. } => Err(de::Error::custom("endpoint value must be finite")),
        }
    }
}

/// An interval of inverse temperatures, possibly empty or unbounded.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntervalSpec {
    pub lo: Endpoint,
    pub hi: Endpoint,
    #[serde(default)]
    pub empty: bool,
}

impl IntervalSpec {
    pub fn real_line() -> Self {
        Self {
            lo: Endpoint::NegInf,
            hi: Endpoint::PosInf,
            empty: false,
        }
    }

    pub fn empty() -> Self {
        Self {
            lo: Endpoint::NegInf,
            hi: Endpoint::PosInf,
            empty: true,
        }
    }

    pub fn closed(a: f64, b: f64) -> Self {
        Self {
            lo: Endpoint::closed(a),
            hi: Endpoint::closed(b),
            empty: false,
        }
    }

    pub fn new(lo: Endpoint, hi: Endpoint) -> Self {
        Self {
            lo,
            hi,
            empty: false,
        }
    }

    /// Checks endpoint kinds and ordering.
    pub fn validate(&self) -> crate::Result<()> {
        if self.empty {
            return Ok(());
        }
        let bad = matches!(self.lo, Endpoint::PosInf) || matches!(self.hi, Endpoint::NegInf);
        let order = match (self.lo, self.hi) {
            (
                Endpoint::Finite {
                    value: a,
                    closed: ca,
                },
                Endpoint::Finite {
                    value: b,
                    closed: cb,
                },
            ) => a < b || (a == b && ca && cb),
            _ => true,
        };
        if bad || !order {
            return Err(crate::Error::Spec(format!("malformed interval {self}")));
        }
        Ok(())
    }

    pub fn is_real_line(&self) -> bool {
        !self.empty && self.lo == Endpoint::NegInf && self.hi == Endpoint::PosInf
    }

    /// Membership of a finite β.
    pub fn contains(&self, beta: f64) -> bool {
        if self.empty {
            return false;
        }
        let above = match self.lo {
            Endpoint::NegInf => true,
            Endpoint::PosInf => false,
            Endpoint::Finite { value, closed } => beta > value || (closed && beta == value),
        };
        let below = match self.hi {
            Endpoint::PosInf => true,
            Endpoint::NegInf => false,
            Endpoint::Finite { value, closed } => beta < value || (closed && beta == value),
        };
        above && below
    }

    /// Finite endpoint values.
    pub fn endpoints(&self) -> Vec<f64> {
        if self.empty {
            return Vec::new();
        }
        [self.lo.value(), self.hi.value()]
            .into_iter()
            .flatten()
            .collect()
    }
}

impl fmt::Display for IntervalSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.empty {
            return write!(f, "∅");
        }
        match self.lo {
            Endpoint::NegInf => write!(f, "(-inf")?,
            Endpoint::PosInf => write!(f, "(+inf")?,
            Endpoint::Finite { value, closed } => {
                write!(f, "{}{value}", if closed { '[' } else { '(' })?
            }
        }
        write!(f, ", ")?;
        match self.hi {
            Endpoint::PosInf => write!(f, "+inf)"),
            Endpoint::NegInf => write!(f, "-inf)"),
            Endpoint::Finite { value, closed } => {
                write!(f, "{value}{}", if closed { ']' } else { ')' })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn membership() {
        let i = IntervalSpec::closed(1.0, 2.0);
        assert!(i.contains(1.0) && i.contains(2.0) && i.contains(1.5));
        assert!(!i.contains(0.999) && !i.contains(2.001));
        let h = IntervalSpec::new(Endpoint::open(3.0), Endpoint::PosInf);
        assert!(!h.contains(3.0) && h.contains(3.0001) && h.contains(1e9));
        assert!(IntervalSpec::real_line().contains(-5.0));
        assert!(!IntervalSpec::empty().contains(0.0));
        let p = IntervalSpec::closed(0.5, 0.5);
        assert!(p.validate().is_ok() && p.contains(0.5));
        assert!(
            IntervalSpec::new(Endpoint::open(1.0), Endpoint::closed(1.0))
                .validate()
                .is_err()
        );
    }

    #[test]
    fn json_form() {
        let i: IntervalSpec =
            serde_json::from_str(r#"{"lo": {"value": 3, "closed": true}, "hi": "+inf"}"#).unwrap();
        assert_eq!(
            i,
            IntervalSpec::new(Endpoint::closed(3.0), Endpoint::PosInf)
        );
        let back: IntervalSpec = serde_json::from_str(&serde_json::to_string(&i).unwrap()).unwrap();
        assert_eq!(back, i);
        assert_eq!(i.to_string(), "[3, +inf)");
    }
}
