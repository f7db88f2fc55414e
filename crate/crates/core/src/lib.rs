//! Pivot-based neural structural correspondence learning for unsupervised
//! domain adaptation of binary text classifiers.
//!
//! The pipeline selects pivot n-grams (frequent in both domains, informative
//! for the label on the source), trains a network that predicts pivot
//! occurrence from the remaining n-grams, and feeds the learned encoding,
//! concatenated with the original features, to a logistic regression trained
//! on the source domain.

pub mod classifier;
pub mod corpus;
pub mod dense;
pub mod embeddings;
pub mod error;
pub mod evalharness;
pub mod features;
pub mod netrepr;
pub mod sclmi;
pub mod seed;
pub mod synthgen;

pub use error::{Error, Result};
