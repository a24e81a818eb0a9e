#![allow(
    clippy::neg_cmp_op_on_partial_ord,
    clippy::needless_range_loop,
    clippy::too_many_arguments,
    clippy::type_complexity,
    clippy::excessive_precision
)]

pub mod basis;
pub mod config;
pub mod error;
pub mod experiments;
pub mod field;
pub mod fit;
pub mod green;
pub mod linalg;
pub mod macroscopic;
pub mod model;
pub mod modes;
pub mod operators;
pub mod quadrature;
pub mod report;
pub mod scaling;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/modes.md")]
    mod modes {}
    #[doc = include_str!("../../../book/src/field.md")]
    mod field {}
    #[doc = include_str!("../../../book/src/macro.md")]
    mod macroscopic {}
    #[doc = include_str!("../../../book/src/green.md")]
    mod green {}
    #[doc = include_str!("../../../book/src/scaling.md")]
    mod scaling {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
