//! Walks any `Serialize` value and reports the first non-finite float.
//!
//! `serde_json` silently turns NaN and infinities into `null`; run records
//! must never contain them, so records pass through this check first.

use std::fmt;

use serde::ser::{self, Serialize};

#[derive(Debug)]
pub struct NonFinite(pub String);

impl fmt::Display for NonFinite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for NonFinite {}

impl ser::Error for NonFinite {
    fn custom<T: fmt::Display>(msg: T) -> Self {
        NonFinite(msg.to_string())
    }
}

/// Errors with the field path of the first NaN or infinity in `value`.
pub fn check<T: Serialize + ?Sized>(value: &T) -> Result<(), NonFinite> {
    value.serialize(&mut Checker { path: Vec::new() })
}

struct Checker {
    path: Vec<String>,
}

impl Checker {
    fn float(&self, x: f64) -> Result<(), NonFinite> {
        if x.is_finite() {
            Ok(())
        } else {
            let at = if self.path.is_empty() { "<root>".to_string() } else { self.path.join(".") };
            Err(NonFinite(format!("non-finite value {x} at {at}")))
        }
    }

    fn nested<T: Serialize + ?Sized>(&mut self, label: String, value: &T) -> Result<(), NonFinite> {
        self.path.push(label);
        value.serialize(&mut *self)?;
        self.path.pop();
        Ok(())
    }
}

/// Compound state: element index for sequences, pending key for maps.
struct Compound<'a> {
    checker: &'a mut Checker,
    index: usize,
    key: String,
}

impl<'a> Compound<'a> {
    fn new(checker: &'a mut Checker) -> Self {
        Self { checker, index: 0, key: String::new() }
    }

    fn element<T: Serialize + ?Sized>(&mut self, value: &T) -> Result<(), NonFinite> {
        let label = format!("[{}]", self.index);
        self.index += 1;
        self.checker.nested(label, value)
    }
}

impl<'a> ser::Serializer for &'a mut Checker {
    type Ok = ();
    type Error = NonFinite;
    type SerializeSeq = Compound<'a>;
    type SerializeTuple = Compound<'a>;
    type SerializeTupleStruct = Compound<'a>;
    type SerializeTupleVariant = Compound<'a>;
    type SerializeMap = Compound<'a>;
    type SerializeStruct = Compound<'a>;
    type SerializeStructVariant = Compound<'a>;

    fn serialize_bool(self, _: bool) -> Result<(), NonFinite> {
        Ok(())
    }
    fn serialize_i8(self, _: i8) -> Result<(), NonFinite> {
        Ok(())
    }
    fn serialize_i16(self, _: i16) -> Result<(), NonFinite> {
        Ok(())
    }
    fn serialize_i32(self, _: i32) -> Result<(), NonFinite> {
        Ok(())
    }
    fn serialize_i64(self, _: i64) -> Result<(), NonFinite> {
        Ok(())
    }
    fn serialize_u8(self, _: u8) -> Result<(), NonFinite> {
        Ok(())
    }
    fn serialize_u16(self, _: u16) -> Result<(), NonFinite> {
        Ok(())
    }
    fn serialize_u32(self, _: u32) -> Result<(), NonFinite> {
        Ok(())
    }
    fn serialize_u64(self, _: u64) -> Result<(), NonFinite> {
        Ok(())
    }
    fn serialize_f32(self, x: f32) -> Result<(), NonFinite> {
        self.float(x as f64)
    }
    fn serialize_f64(self, x: f64) -> Result<(), NonFinite> {
        self.float(x)
    }
    fn serialize_char(self, _: char) -> Result<(), NonFinite> {
        Ok(())
    }
    fn serialize_str(self, _: &str) -> Result<(), NonFinite> {
        Ok(())
    }
    fn serialize_bytes(self, _: &[u8]) -> Result<(), NonFinite> {
        Ok(())
    }
    fn serialize_none(self) -> Result<(), NonFinite> {
        Ok(())
    }
    fn serialize_some<T: Serialize + ?Sized>(self, value: &T) -> Result<(), NonFinite> {
        value.serialize(self)
    }
    fn serialize_unit(self) -> Result<(), NonFinite> {
        Ok(())
    }
    fn serialize_unit_struct(self, _: &'static str) -> Result<(), NonFinite> {
        Ok(())
    }
    fn serialize_unit_variant(self, _: &'static str, _: u32, _: &'static str) -> Result<(), NonFinite> {
        Ok(())
    }
    fn serialize_newtype_struct<T: Serialize + ?Sized>(self, _: &'static str, value: &T) -> Result<(), NonFinite> {
        value.serialize(self)
    }
    fn serialize_newtype_variant<T: Serialize + ?Sized>(
        self,
        _: &'static str,
        _: u32,
        variant: &'static str,
        value: &T,
    ) -> Result<(), NonFinite> {
        self.nested(variant.to_string(), value)
    }
    fn serialize_seq(self, _: Option<usize>) -> Result<Compound<'a>, NonFinite> {
        Ok(Compound::new(self))
    }
    fn serialize_tuple(self, _: usize) -> Result<Compound<'a>, NonFinite> {
        Ok(Compound::new(self))
    }
    fn serialize_tuple_struct(self, _: &'static str, _: usize) -> Result<Compound<'a>, NonFinite> {
        Ok(Compound::new(self))
    }
    fn serialize_tuple_variant(
        self,
        _: &'static str,
        _: u32,
        _: &'static str,
        _: usize,
    ) -> Result<Compound<'a>, NonFinite> {
        Ok(Compound::new(self))
    }
    fn serialize_map(self, _: Option<usize>) -> Result<Compound<'a>, NonFinite> {
        Ok(Compound::new(self))
    }
    fn serialize_struct(self, _: &'static str, _: usize) -> Result<Compound<'a>, NonFinite> {
        Ok(Compound::new(self))
    }
    fn serialize_struct_variant(
        self,
        _: &'static str,
        _: u32,
        _: &'static str,
        _: usize,
    ) -> Result<Compound<'a>, NonFinite> {
        Ok(Compound::new(self))
    }
}

impl ser::SerializeSeq for Compound<'_> {
    type Ok = ();
    type Error = NonFinite;
    fn serialize_element<T: Serialize + ?Sized>(&mut self, value: &T) -> Result<(), NonFinite> {
        self.element(value)
    }
    fn end(self) -> Result<(), NonFinite> {
        Ok(())
    }
}

impl ser::SerializeTuple for Compound<'_> {
    type Ok = ();
    type Error = NonFinite;
    fn serialize_element<T: Serialize + ?Sized>(&mut self, value: &T) -> Result<(), NonFinite> {
        self.element(value)
    }
    fn end(self) -> Result<(), NonFinite> {
        Ok(())
    }
}

impl ser::SerializeTupleStruct for Compound<'_> {
    type Ok = ();
    type Error = NonFinite;
    fn serialize_field<T: Serialize + ?Sized>(&mut self, value: &T) -> Result<(), NonFinite> {
        self.element(value)
    }
    fn end(self) -> Result<(), NonFinite> {
        Ok(())
    }
}

impl ser::SerializeTupleVariant for Compound<'_> {
    type Ok = ();
    type Error = NonFinite;
    fn serialize_field<T: Serialize + ?Sized>(&mut self, value: &T) -> Result<(), NonFinite> {
        self.element(value)
    }
    fn end(self) -> Result<(), NonFinite> {
        Ok(())
    }
}

/// Map keys are captured as text when they are strings or integers; other
/// key types only get checked.
struct KeyText(String);

impl ser::Serializer for &mut KeyText {
    type Ok = ();
    type Error = NonFinite;
    type SerializeSeq = ser::Impossible<(), NonFinite>;
    type SerializeTuple = ser::Impossible<(), NonFinite>;
    type SerializeTupleStruct = ser::Impossible<(), NonFinite>;
    type SerializeTupleVariant = ser::Impossible<(), NonFinite>;
    type SerializeMap = ser::Impossible<(), NonFinite>;
    type SerializeStruct = ser::Impossible<(), NonFinite>;
    type SerializeStructVariant = ser::Impossible<(), NonFinite>;

    fn serialize_bool(self, v: bool) -> Result<(), NonFinite> {
        self.0 = v.to_string();
        Ok(())
    }
    fn serialize_i8(self, v: i8) -> Result<(), NonFinite> {
        self.serialize_i64(v as i64)
    }
    fn serialize_i16(self, v: i16) -> Result<(), NonFinite> {
        self.serialize_i64(v as i64)
    }
    fn serialize_i32(self, v: i32) -> Result<(), NonFinite> {
        self.serialize_i64(v as i64)
    }
    fn serialize_i64(self, v: i64) -> Result<(), NonFinite> {
        self.0 = v.to_string();
        Ok(())
    }
    fn serialize_u8(self, v: u8) -> Result<(), NonFinite> {
        self.serialize_u64(v as u64)
    }
    fn serialize_u16(self, v: u16) -> Result<(), NonFinite> {
        self.serialize_u64(v as u64)
    }
    fn serialize_u32(self, v: u32) -> Result<(), NonFinite> {
        self.serialize_u64(v as u64)
    }
    fn serialize_u64(self, v: u64) -> Result<(), NonFinite> {
        self.0 = v.to_string();
        Ok(())
    }
    fn serialize_f32(self, v: f32) -> Result<(), NonFinite> {
        self.serialize_f64(v as f64)
    }
    fn serialize_f64(self, v: f64) -> Result<(), NonFinite> {
        if !v.is_finite() {
            return Err(NonFinite(format!("non-finite map key {v}")));
        }
        self.0 = v.to_string();
        Ok(())
    }
    fn serialize_char(self, v: char) -> Result<(), NonFinite> {
        self.0 = v.to_string();
        Ok(())
    }
    fn serialize_str(self, v: &str) -> Result<(), NonFinite> {
        self.0 = v.to_string();
        Ok(())
    }
    fn serialize_bytes(self, _: &[u8]) -> Result<(), NonFinite> {
        Ok(())
    }
    fn serialize_none(self) -> Result<(), NonFinite> {
        Ok(())
    }
    fn serialize_some<T: Serialize + ?Sized>(self, value: &T) -> Result<(), NonFinite> {
        value.serialize(self)
    }
    fn serialize_unit(self) -> Result<(), NonFinite> {
        Ok(())
    }
    fn serialize_unit_struct(self, _: &'static str) -> Result<(), NonFinite> {
        Ok(())
    }
    fn serialize_unit_variant(self, _: &'static str, _: u32, variant: &'static str) -> Result<(), NonFinite> {
        self.0 = variant.to_string();
        Ok(())
    }
    fn serialize_newtype_struct<T: Serialize + ?Sized>(self, _: &'static str, value: &T) -> Result<(), NonFinite> {
        value.serialize(self)
    }
    fn serialize_newtype_variant<T: Serialize + ?Sized>(
        self,
        _: &'static str,
        _: u32,
        _: &'static str,
        _: &T,
    ) -> Result<(), NonFinite> {
        Err(NonFinite("unsupported map key".into()))
    }
    fn serialize_seq(self, _: Option<usize>) -> Result<Self::SerializeSeq, NonFinite> {
        Err(NonFinite("unsupported map key".into()))
    }
    fn serialize_tuple(self, _: usize) -> Result<Self::SerializeTuple, NonFinite> {
        Err(NonFinite("unsupported map key".into()))
    }
    fn serialize_tuple_struct(self, _: &'static str, _: usize) -> Result<Self::SerializeTupleStruct, NonFinite> {
        Err(NonFinite("unsupported map key".into()))
    }
    fn serialize_tuple_variant(
        self,
        _: &'static str,
        _: u32,
        _: &'static str,
        _: usize,
    ) -> Result<Self::SerializeTupleVariant, NonFinite> {
        Err(NonFinite("unsupported map key".into()))
    }
    fn serialize_map(self, _: Option<usize>) -> Result<Self::SerializeMap, NonFinite> {
        Err(NonFinite("unsupported map key".into()))
    }
    fn serialize_struct(self, _: &'static str, _: usize) -> Result<Self::SerializeStruct, NonFinite> {
        Err(NonFinite("unsupported map key".into()))
    }
    fn serialize_struct_variant(
        self,
        _: &'static str,
        _: u32,
        _: &'static str,
        _: usize,
    ) -> Result<Self::SerializeStructVariant, NonFinite> {
        Err(NonFinite("unsupported map key".into()))
    }
}

impl ser::SerializeMap for Compound<'_> {
    type Ok = ();
    type Error = NonFinite;
    fn serialize_key<T: Serialize + ?Sized>(&mut self, key: &T) -> Result<(), NonFinite> {
        let mut text = KeyText(String::new());
        key.serialize(&mut text)?;
        self.key = text.0;
        Ok(())
    }
    fn serialize_value<T: Serialize + ?Sized>(&mut self, value: &T) -> Result<(), NonFinite> {
        let label = std::mem::take(&mut self.key);
        self.checker.nested(label, value)
    }
    fn end(self) -> Result<(), NonFinite> {
        Ok(())
    }
}

impl ser::SerializeStruct for Compound<'_> {
    type Ok = ();
    type Error = NonFinite;
    fn serialize_field<T: Serialize + ?Sized>(&mut self, key: &'static str, value: &T) -> Result<(), NonFinite> {
        self.checker.nested(key.to_string(), value)
    }
    fn end(self) -> Result<(), NonFinite> {
        Ok(())
    }
}

impl ser::SerializeStructVariant for Compound<'_> {
    type Ok = ();
    type Error = NonFinite;
    fn serialize_field<T: Serialize + ?Sized>(&mut self, key: &'static str, value: &T) -> Result<(), NonFinite> {
        self.checker.nested(key.to_string(), value)
    }
    fn end(self) -> Result<(), NonFinite> {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    #[derive(serde::Serialize)]
    struct Inner {
        x: f64,
        ys: Vec<f64>,
        maybe: Option<f64>,
    }

    #[derive(serde::Serialize)]
    #[serde(tag = "verdict")]
    enum Tagged {
        Fail { r: f64 },
    }

    #[test]
    fn accepts_finite_values() {
        let v = Inner { x: 1.0, ys: vec![0.0, -2.5], maybe: None };
        assert!(check(&v).is_ok());
        assert!(check(&serde_json::json!({"a": [1.0, {"b": 2}]})).is_ok());
    }

    #[test]
    fn reports_the_path_of_the_offender() {
        let v = Inner { x: 1.0, ys: vec![0.0, f64::NAN], maybe: None };
        assert_eq!(check(&v).unwrap_err().0, "non-finite value NaN at ys.[1]");
        let v = Inner { x: 1.0, ys: vec![], maybe: Some(f64::INFINITY) };
        assert!(check(&v).unwrap_err().0.ends_with("at maybe"));
        let mut m = BTreeMap::new();
        m.insert("k", Tagged::Fail { r: f64::NEG_INFINITY });
        assert!(check(&m).unwrap_err().0.ends_with("at k.r"));
        assert!(check(&(1.0, f64::NAN)).is_err());
    }
}
