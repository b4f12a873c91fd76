//! Polynumber algebras and numerical verification of generalized conformal
//! transformations.

// Index loops mirror the tensor notation; NaN must fail positivity checks.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod algebra;
pub mod analytic;
pub mod cli;
pub mod conformal;
pub mod expr;
pub mod geometry;
pub mod jets;
pub mod report;
