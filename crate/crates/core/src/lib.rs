pub mod catalog;
pub mod config;
pub mod error;
pub mod extension;
pub mod mollifier;
pub mod mspline;
pub mod open_set;
pub mod quadrature;
pub mod run;
pub mod search;
pub mod taming;
pub mod verify;

pub use error::{Error, Result};
