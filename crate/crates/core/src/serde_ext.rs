//! Serde helpers for floats that may be infinite (JSON has no encoding for them).

use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ExtF64 {
    Num(f64),
    Text(String),
}

impl ExtF64 {
    fn encode(v: f64) -> Self {
        if v.is_finite() {
            ExtF64::Num(v)
        } else if v.is_nan() {
            ExtF64::Text("nan".into())
        } else if v > 0.0 {
            ExtF64::Text("inf".into())
        } else {
            ExtF64::Text("-inf".into())
        }
    }

    fn decode<E: serde::de::Error>(self) -> Result<f64, E> {
        match self {
            ExtF64::Num(v) => Ok(v),
            ExtF64::Text(s) => match s.as_str() {
                "inf" | "+inf" | "infinity" => Ok(f64::INFINITY),
                "-inf" | "-infinity" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(E::custom(format!("not a number: {other:?}"))),
            },
        }
    }
}

pub mod f64_ext {
    use super::*;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        ExtF64::encode(*v).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        ExtF64::deserialize(d)?.decode()
    }
}

pub mod f64_vec {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let enc: Vec<ExtF64> = v.iter().map(|x| ExtF64::encode(*x)).collect();
        enc.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        Vec::<ExtF64>::deserialize(d)?
            .into_iter()
            .map(ExtF64::decode)
            .collect()
    }
}

pub mod opt_f64 {
    use super::*;

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        v.map(ExtF64::encode).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        Option::<ExtF64>::deserialize(d)?.map(ExtF64::decode).transpose()
    }
}

#[cfg(test)]
mod tests {
    use serde::{Deserialize, Serialize};

    #[derive(Serialize, Deserialize, PartialEq, Debug)]
    struct Edges {
        #[serde(with = "super::f64_vec")]
        e: Vec<f64>,
    }

    #[test]
    fn infinities_survive_json() {
        let v = Edges {
            e: vec![f64::NEG_INFINITY, 0.5, f64::INFINITY],
        };
        let s = serde_json::to_string(&v).unwrap();
        assert_eq!(s, r#"{"e":["-inf",0.5,"inf"]}"#);
        assert_eq!(serde_json::from_str::<Edges>(&s).unwrap(), v);
    }
}
