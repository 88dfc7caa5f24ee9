use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::{AttributeDecl, AttributeType};

/// A primitive attribute value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AttributeValue {
    Boolean(bool),
    Integer(i64),
    String(String),
}

impl AttributeValue {
    pub fn has_type(&self, ty: AttributeType) -> bool {
        matches!(
            (self, ty),
            (AttributeValue::Boolean(_), AttributeType::Boolean)
                | (AttributeValue::Integer(_), AttributeType::Integer)
                | (AttributeValue::String(_), AttributeType::String)
        )
    }

    /// Parses user input for an attribute of type `ty`.
    pub fn parse(text: &str, ty: AttributeType) -> Option<Self> {
        match ty {
            AttributeType::String => Some(AttributeValue::String(text.to_string())),
            AttributeType::Integer => text.trim().parse().ok().map(AttributeValue::Integer),
            AttributeType::Boolean => match text.trim() {
                "true" | "yes" | "y" => Some(AttributeValue::Boolean(true)),
                "false" | "no" | "n" => Some(AttributeValue::Boolean(false)),
                _ => None,
            },
        }
    }
}

impl fmt::Display for AttributeValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttributeValue::Boolean(b) => write!(f, "{b}"),
            AttributeValue::Integer(n) => write!(f, "{n}"),
            AttributeValue::String(s) => write!(f, "{s:?}"),
        }
    }
}

pub type Attributes = BTreeMap<String, AttributeValue>;

/// Checks `values` against `schema`. With `complete`, every declared
/// attribute must be present.
pub fn check_attributes(
    schema: &[AttributeDecl],
    values: &Attributes,
    complete: bool,
) -> Result<(), String> {
    for (name, v) in values {
        let decl = schema
            .iter()
            .find(|d| &d.name == name)
            .ok_or_else(|| format!("unknown attribute {name}"))?;
        if !v.has_type(decl.ty) {
            return Err(format!("attribute {name} expects {:?}, got {v}", decl.ty));
        }
    }
    if complete {
        if let Some(missing) = schema.iter().find(|d| !values.contains_key(&d.name)) {
            return Err(format!("missing attribute {}", missing.name));
        }
    }
    Ok(())
}
