//! Complex scalar alias and serde helpers.
//!
//! Complex values are written as `[re, im]`; on input a bare real number is
//! also accepted.

use serde::de::{self, Deserializer, SeqAccess, Visitor};
use serde::ser::{SerializeSeq, Serializer};
use serde::{Deserialize, Serialize};
use std::fmt;

pub type C64 = num_complex::Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

pub fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Serde wrapper giving a complex number the `[re, im]` / bare-real encoding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pair(pub C64);

impl Serialize for Pair {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(2))?;
        seq.serialize_element(&self.0.re)?;
        seq.serialize_element(&self.0.im)?;
        seq.end()
    }
}

impl<'de> Deserialize<'de> for Pair {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = Pair;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number or a [re, im] pair")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Pair, E> {
                Ok(Pair(re(v)))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Pair, E> {
                Ok(Pair(re(v as f64)))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Pair, E> {
                Ok(Pair(re(v as f64)))
            }
            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<Pair, A::Error> {
                let r: f64 = seq
                    .next_element()?
                    .ok_or_else(|| de::Error::invalid_length(0, &self))?;
                let i: f64 = seq
                    .next_element()?
                    .ok_or_else(|| de::Error::invalid_length(1, &self))?;
                if seq.next_element::<f64>()?.is_some() {
                    return Err(de::Error::invalid_length(3, &self));
                }
                Ok(Pair(C64::new(r, i)))
            }
        }
        d.deserialize_any(V)
    }
}

/// `#[serde(with = "cplx::one")]` for a single complex field.
pub mod one {
    use super::*;
    pub fn serialize<S: Serializer>(v: &C64, s: S) -> Result<S::Ok, S::Error> {
        Pair(*v).serialize(s)
    }
    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<C64, D::Error> {
        Ok(Pair::deserialize(d)?.0)
    }
}

/// `#[serde(with = "cplx::vec")]` for a complex vector field.
pub mod vec {
    use super::*;
    pub fn serialize<S: Serializer>(v: &[C64], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(v.len()))?;
        for z in v {
            seq.serialize_element(&Pair(*z))?;
        }
        seq.end()
    }
    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<C64>, D::Error> {
        let v: Vec<Pair> = Vec::deserialize(d)?;
        Ok(v.into_iter().map(|p| p.0).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_accepts_bare_reals_and_pairs() {
        let v: Vec<Pair> = serde_json::from_str("[1, 2.5, [0.5, -1]]").unwrap();
        assert_eq!(v[0].0, re(1.0));
        assert_eq!(v[1].0, re(2.5));
        assert_eq!(v[2].0, C64::new(0.5, -1.0));
    }

    #[test]
    fn pair_writes_two_element_arrays() {
        let s = serde_json::to_string(&Pair(C64::new(1.0, -2.0))).unwrap();
        assert_eq!(s, "[1.0,-2.0]");
    }

    #[test]
    fn pair_rejects_triples() {
        assert!(serde_json::from_str::<Pair>("[1,2,3]").is_err());
    }
}
