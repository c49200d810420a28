pub mod bench;
pub mod error;
pub mod pgm;

pub use error::{GgdError, Result};
pub use ggd_core;
