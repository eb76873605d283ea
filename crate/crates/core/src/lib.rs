pub mod classes;
pub mod empirical;
pub mod error;
pub mod mixing;
pub mod ot;
pub mod rates;
pub mod report;
pub mod sum;

pub use error::{Error, Result};
