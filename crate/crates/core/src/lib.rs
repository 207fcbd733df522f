// NaN-rejecting comparisons are written as negations on purpose
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod association;
pub mod embeddings;
pub mod error;
pub mod functionals;
pub mod identities;
pub mod mollifier;
pub mod poly;
pub mod quadrature;
pub mod special;

pub use error::{Error, Result};
