//! Simulation and analysis of entangled binomial-code logical qubits in a
//! two-node superconducting cavity device.
//!
//! Units throughout: time in µs, angular frequency in rad/µs, tabulated
//! frequencies in MHz (`χ/2π`).

pub mod aqec;
pub mod channels;
pub mod code;
pub mod device;
pub mod error;
pub mod fit;
pub mod grape;
pub mod hilbert;
pub mod linalg;
pub mod scenario;
pub mod tomo;

pub use error::{Error, Result};
pub use linalg::{CMatrix, CVector};
pub use num_complex::Complex64;
