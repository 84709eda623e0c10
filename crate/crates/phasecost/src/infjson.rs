//! Serde helpers for `f64` fields that may be infinite.
//!
//! JSON has no infinity literal; infinite levels are written as the string
//! token `"inf"` and read back from it (numbers still parse as usual).

use serde::de::{self, Deserializer, Unexpected};
use serde::ser::Serializer;
use serde::Deserialize;

#[derive(Deserialize)]
#[serde(untagged)]
enum NumOrToken {
    Num(f64),
    Token(String),
}

fn from_raw<'de, D: Deserializer<'de>>(raw: NumOrToken) -> Result<f64, D::Error> {
    match raw {
        NumOrToken::Num(v) => Ok(v),
        NumOrToken::Token(s) if s == "inf" => Ok(f64::INFINITY),
        NumOrToken::Token(s) => Err(de::Error::invalid_value(
            Unexpected::Str(&s),
            &"a number or the token \"inf\"",
        )),
    }
}

pub mod scalar {
    use super::*;

    pub fn serialize<S: Serializer>(v: &f64, ser: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            ser.serialize_str("inf")
        } else {
            ser.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<f64, D::Error> {
        from_raw::<D>(NumOrToken::deserialize(de)?)
    }
}

pub mod vec {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[f64], ser: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeSeq;
        let mut seq = ser.serialize_seq(Some(v.len()))?;
        for x in v {
            if x.is_infinite() {
                seq.serialize_element("inf")?;
            } else {
                seq.serialize_element(x)?;
            }
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(de: D) -> Result<Vec<f64>, D::Error> {
        let raw: Vec<NumOrToken> = Vec::deserialize(de)?;
        raw.into_iter().map(from_raw::<D>).collect()
    }
}
