#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod assemble2d;
pub mod band1d;
pub mod eigensolve;
pub mod error;
pub mod par;
pub mod quad;
pub mod studies;
pub mod wkb;
