// `!(x > 0.0)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod entropy;
pub mod error;
pub mod nets;
pub mod recovery;
pub mod sampling;
pub mod schatten;
pub mod stats;
pub mod volumes;
