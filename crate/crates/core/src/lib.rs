//! Local explanations of black-box binary classifiers as short programs.

pub mod anneal;
pub mod compile;
pub mod error;
pub mod explain;
pub mod expr;
pub mod loss;
pub mod model;
pub mod perturb;
pub mod schema;

pub use error::{Error, ModelError, Result};
pub use expr::{parse, pretty_print, Comparator, Expr, Predicate, Type, Value};
pub use schema::{AtomRef, Feature, FeatureId, FeatureKind, FeatureSchema, Instance};
