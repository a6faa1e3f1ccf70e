#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod accum;
pub mod analytic;
pub mod density;
pub mod design;
pub mod error;
pub mod estimate;
pub mod forward;
pub mod hypergeom;
pub mod methods;
pub mod record;
pub mod reverse;
pub mod stats;
