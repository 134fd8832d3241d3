// `!(a <= b)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod advtrain;
pub mod attacks;
pub mod bounds;
pub mod cli;
pub mod dataset;
pub mod metrics;
pub mod milp;
pub mod network;
pub mod report;
