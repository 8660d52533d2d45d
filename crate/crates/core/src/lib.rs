//! First-order large-deviation expansions for rescaled cumulant generating
//! functions: Laplace asymptotics, Legendre duality, an explicit equivalent
//! density family, first-order bounds, affine homogenization and the
//! Heston model.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod affine;
pub mod bounds;
pub mod cli;
pub mod config;
pub mod error;
pub mod family;
pub mod fit;
pub mod heston;
pub mod laplace;
pub mod legendre;
pub mod ode;
pub mod oracle;
pub mod quadrature;
pub mod smooth;

pub use error::{Error, Result};
