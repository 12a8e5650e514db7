pub mod backbone;
pub mod config;
pub mod degrade;
pub mod error;
pub mod evaluation;
pub mod gradcheck;
pub mod graph;
pub mod guidance;
pub mod icrm;
pub mod image;
pub mod kernels;
pub mod manifest;
pub mod modulation;
pub mod params;
pub mod tensor;
pub mod training;

pub use error::{Error, Result};
