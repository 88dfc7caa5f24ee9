//! Fragment-based case models with data-object cardinality constraints.
//!
//! A [`model::CaseModel`] is validated, augmented with goal guards
//! ([`preprocess`]), compiled into a colored Petri net ([`compiler`]) and then
//! either enacted case by case ([`engine`]) or explored exhaustively
//! ([`explorer`]).

pub mod compiler;
pub mod cpn;
pub mod engine;
pub mod explorer;
pub mod model;
pub mod preprocess;
