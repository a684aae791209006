//! Predicting instructor intervention in MOOC discussion threads from
//! discourse-relation and lexical features.

pub mod corpus;
pub mod discourse;
pub mod eval;
pub mod features;
pub mod model;
pub mod syngen;
pub mod textprep;
