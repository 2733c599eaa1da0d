use core::cmp::Ordering;
use core::fmt;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A probability carried as its natural logarithm.
///
/// `ln p <= 0`; an exactly-zero probability is `-inf` and serializes as the
/// string `"-inf"` so JSON stays finite.
#[derive(Clone, Copy, PartialEq)]
pub struct LogTailValue(f64);

impl LogTailValue {
    pub const ZERO: LogTailValue = LogTailValue(f64::NEG_INFINITY);
    pub const ONE: LogTailValue = LogTailValue(0.0);

    /// Wraps a log-probability. Values slightly above 0 from rounding are
    /// clamped to 0; NaN maps to zero probability.
    #[inline]
    pub fn from_ln(log_p: f64) -> Self {
        if log_p.is_nan() {
            Self::ZERO
        } else {
            LogTailValue(log_p.min(0.0))
        }
    }

    #[inline]
    pub fn from_prob(p: f64) -> Self {
        if p <= 0.0 || p.is_nan() {
            Self::ZERO
        } else {
            LogTailValue(p.min(1.0).ln())
        }
    }

    #[inline]
    pub fn ln(self) -> f64 {
        self.0
    }

    /// Lossy below `e^-745`.
    #[inline]
    pub fn prob(self) -> f64 {
        self.0.exp()
    }

    #[inline]
    pub fn is_zero(self) -> bool {
        self.0 == f64::NEG_INFINITY
    }
}

impl PartialOrd for LogTailValue {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.0.partial_cmp(&other.0)
    }
}

impl fmt::Debug for LogTailValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LogTailValue({})", self.0)
    }
}

impl fmt::Display for LogTailValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            f.write_str("-inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

impl Serialize for LogTailValue {
    fn serialize<S: Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
        crate::logtail::ext_f64::serialize(&self.0, s)
    }
}

impl<'de> Deserialize<'de> for LogTailValue {
    fn deserialize<D: Deserializer<'de>>(d: D) -> core::result::Result<Self, D::Error> {
        let v = ext_f64::deserialize(d)?;
        if v > 0.0 {
            return Err(serde::de::Error::custom("log-probability must be <= 0"));
        }
        Ok(LogTailValue::from_ln(v))
    }
}

/// Serde helpers for extended reals: finite values as numbers, infinities
/// as the strings `"inf"` / `"-inf"`, NaN as `"nan"`.
pub mod ext_f64 {
    use core::fmt;
    use serde::de::{self, Visitor};
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = f64;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a number or one of \"inf\", \"-inf\", \"nan\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
                Ok(v)
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
                Ok(v as f64)
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
                Ok(v as f64)
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
                match v {
                    "inf" => Ok(f64::INFINITY),
                    "-inf" => Ok(f64::NEG_INFINITY),
                    "nan" => Ok(f64::NAN),
                    _ => Err(E::custom("unrecognized extended real")),
                }
            }
        }
        d.deserialize_any(V)
    }

    /// Same encoding for `Vec<f64>`.
    pub mod vec {
        use alloc::vec::Vec;
        use serde::{Deserialize, Deserializer, Serialize, Serializer};

        #[derive(Serialize, Deserialize)]
        struct W(#[serde(with = "super")] f64);

        pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
            use serde::ser::SerializeSeq;
            let mut seq = s.serialize_seq(Some(v.len()))?;
            for x in v {
                seq.serialize_element(&W(*x))?;
            }
            seq.end()
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
            let w: Vec<W> = Vec::deserialize(d)?;
            Ok(w.into_iter().map(|w| w.0).collect())
        }
    }
}
