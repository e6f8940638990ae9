pub mod engine;
pub mod error;
pub mod fit;
pub mod oracles;
pub mod output;
pub mod sf;
pub mod stats;
pub mod sweep;
pub mod wtmm;

pub use error::{Error, Result};
