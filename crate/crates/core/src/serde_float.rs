//! JSON encoding for scalars that may be infinite: finite values are plain
//! numbers, infinities are the strings `"inf"` / `"-inf"`.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serializer};

use crate::scalar::Real;

#[derive(Deserialize)]
#[serde(untagged)]
enum Repr {
    Num(f64),
    Text(String),
}

pub fn serialize<T: Real, S: Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
    let x = v.to_f64_lossless();
    if x.is_finite() {
        s.serialize_f64(x)
    } else if x > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_str("-inf")
    }
}

pub fn deserialize<'de, T: Real, D: Deserializer<'de>>(d: D) -> Result<T, D::Error> {
    match Repr::deserialize(d)? {
        Repr::Num(x) => Ok(T::of(x)),
        Repr::Text(t) if t == "inf" => Ok(T::infinity()),
        Repr::Text(t) if t == "-inf" => Ok(T::neg_infinity()),
        Repr::Text(t) => Err(D::Error::custom(format!("expected a number or \"inf\", got {t:?}"))),
    }
}
