pub mod analysis;
pub mod config;
pub mod error;
pub mod exact;
pub mod flux;
pub mod measure;
pub mod ode;
pub mod pchip;
pub mod quad;
pub mod recipes;
pub mod solver;

pub use error::{Error, Result};
