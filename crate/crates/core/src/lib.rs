pub mod cli;
pub mod config;
pub mod error;
pub mod eval;
pub mod inference;
pub mod ingest;
pub mod observation;
pub mod series;
pub mod symptoms;
pub mod synthetic;
pub mod transmission;

pub use error::{Error, Result};
pub use series::{CountSeries, DateSeries};
