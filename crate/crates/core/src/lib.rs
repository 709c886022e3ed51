pub mod align;
pub mod bio;
pub mod bitext;
pub mod config;
pub mod corpus;
pub mod encoder;
pub mod error;
pub mod grammar;
pub mod hardalign;
pub mod harness;
pub mod heads;
pub mod metrics;
pub mod model;

pub use error::{Error, Result};
