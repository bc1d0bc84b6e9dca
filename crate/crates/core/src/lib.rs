pub mod classical;
pub mod density;
pub mod entanglement;
pub mod error;
pub mod fock;
pub mod liouvillian;
pub mod network;
pub mod observables;
pub mod steady;

pub use error::{Error, Result};
