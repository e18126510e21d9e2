pub mod codes;
pub mod datasets;
pub mod error;
pub mod experiment;
pub mod numerics;
pub mod probe;
pub mod rng;
pub mod varcode;

pub use datasets::Dataset;
pub use error::{MdlError, Result};
