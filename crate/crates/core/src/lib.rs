pub mod cd;
pub mod circuit;
pub mod cp;
pub mod error;
pub mod f2;
pub mod games;
pub mod linalg;
pub mod measure;
pub mod money;
pub mod oracles;
pub mod qsim;
pub mod report;
pub mod seed;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};
