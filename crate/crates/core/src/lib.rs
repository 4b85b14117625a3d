pub mod diag;
pub mod em;
pub mod error;
pub mod graph;
pub mod ising;
pub mod logreg;
pub mod networks;
pub mod rwl;
pub mod sim;

pub use error::{Error, Result};
