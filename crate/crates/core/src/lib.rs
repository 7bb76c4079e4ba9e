//! Complexity indicators for human trajectory datasets.

pub mod context;
pub mod error;
pub mod ingest;
pub mod math;
pub mod overall;
pub mod predictability;
pub mod preprocess;
pub mod regularity;
pub mod report;
pub mod types;

pub use error::{Error, ErrorKind, Result};
