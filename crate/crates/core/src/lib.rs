//! Ranking user-uploaded photos as personalized explanations of a
//! recommendation.
//!
//! Given a (user, item) pair, every photo uploaded for the item is scored
//! by how likely the user would have authored it; the top photo serves as
//! the explanation. This crate provides the corpus handling, negative
//! sampling, models (a BPR-trained dot-product model, two
//! classification-trained baselines, and centroid/random baselines),
//! training, and the offline evaluation protocol.

pub mod corpus;
pub mod error;
pub mod evaluation;
pub mod exec;
pub mod models;
pub mod sampling;
pub mod seed;
pub mod training;

pub use error::{Error, Result};
pub use exec::Exec;
