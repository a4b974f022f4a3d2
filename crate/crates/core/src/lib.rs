//! Lie-bracket analysis, nilpotent blow-up and corner shortening for
//! sub-Riemannian structures given by polynomial frames on `R^n`.
//!
//! The symbolic layer ([`polynomial`], [`bracket`], [`nilpotent`]) works over
//! exact rationals. The numeric layer ([`flow`], [`shortener`], [`solver`],
//! [`extremal`]) integrates horizontal curves in binary64 and produces
//! certificates that corner curves can be shortened.

pub mod bracket;
pub mod cli;
pub mod error;
pub mod extremal;
pub mod flow;
pub mod linalg;
pub mod models;
pub mod nilpotent;
pub mod polynomial;
pub mod shortener;
pub mod solver;

pub use error::{Error, Result};
