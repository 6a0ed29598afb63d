//! Register-level sparse quantum circuit simulator.
//!
//! A state is the list of its nonzero branches. Each branch holds an
//! amplitude and one 64-bit word per register, so gates act on register
//! values directly and the cost of an operation scales with the number of
//! branches rather than with `2^n`.

pub mod bench;
pub mod error;
pub mod exec;
pub mod gates;
pub mod qasm;
pub mod qlss;
pub mod qram;
pub mod state;

pub use error::{Error, Result};
pub use exec::{ExecConfig, Executor};
pub use gates::{ControlSpec, GateKind, Unitary2};
pub use qram::QramMemory;
pub use state::{RegisterId, RegisterType, SparseState};
