use thiserror::Error;

use super::CaseModel;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("missing section `{0}`")]
    MissingSection(&'static str),
    #[error("invalid model document at line {line}, column {column}: {message}")]
    Invalid {
        line: usize,
        column: usize,
        message: String,
    },
}

const REQUIRED_SECTIONS: [&str; 3] = ["classes", "fragments", "terminationConditions"];

/// Parses a JSON model document. Performs no semantic validation.
pub fn parse_case_model(text: &str) -> Result<CaseModel, ParseError> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| ParseError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    if let Some(obj) = value.as_object() {
        for section in REQUIRED_SECTIONS {
            if !obj.contains_key(section) {
                return Err(ParseError::MissingSection(section));
            }
        }
    }
    serde_json::from_str(text).map_err(|e| ParseError::Invalid {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}
