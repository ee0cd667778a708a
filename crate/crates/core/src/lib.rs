//! Numerical lab for Gagliardo-Nirenberg, Sobolev and symmetrization
//! inequalities on finite weighted graphs.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod corpus;
pub mod error;
pub mod funcnorms;
pub mod heat;
pub mod ineq;
pub mod kprime;
pub mod mm_space;
mod quad;
pub mod rearrange;

pub use error::{Error, Result};
pub use heat::Semigroup;
pub use mm_space::Space;
