//! Bivariate gamma-geometric (BGG) and BMixGNB laws: densities, moments,
//! simulation, likelihood inference and goodness-of-fit, plus the
//! exchange-rate run analysis built on them.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod app;
pub mod bgg;
pub mod bmixgnb;
pub mod error;
pub mod gof;
pub mod infer;
pub mod io;
pub mod sample;
pub mod special;

pub use error::{Error, Result};
