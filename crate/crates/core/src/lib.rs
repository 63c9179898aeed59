//! Constraint-based recommendation of security patterns.
//!
//! A [`KnowledgeBase`](model::KnowledgeBase) describes the patterns that
//! realize a security control, the context in which they are applied, and the
//! rules relating the two. Given an elicited context, [`solver`] computes the
//! feasible patterns, [`maut`] ranks them by context-weighted utility, and
//! [`session`] drives the whole question-and-answer process across the
//! security-pattern and security-design-pattern stages.

pub mod assistant;
pub mod catalog;
pub mod dsl;
mod error;
pub mod maut;
pub mod model;
pub mod session;
pub mod solver;

pub use catalog::KbCatalog;
pub use error::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;
