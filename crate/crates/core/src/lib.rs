//! Ground-state energy upper bounds for dilute Bose gases.

// `!(x > 0.0)` also rejects NaN, which the validators rely on
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bogoliubov;
pub mod born;
pub mod cli;
pub mod error;
pub mod fock;
pub mod jastrow;
pub mod lattice;
pub mod ode;
pub mod potential;
pub mod quadrature;
pub mod radial;
pub mod scattering;

pub use error::{Error, Result};
