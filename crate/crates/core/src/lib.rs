//! Numerical toolkit for deciding when one party of a multipartite pure
//! state can reproduce another party's local operation.

pub mod cli;
pub mod error;
pub mod generate;
pub mod io;
pub mod linalg;
pub mod protocol_sim;
pub mod report;
pub mod schmidt;
pub mod tensor;
pub mod tripartite;
pub mod unitary_sim;

pub use error::{Error, Result};
