//! Quantum list decoding for stabilizer codes.
//!
//! The crate covers Pauli algebra, stabilizer codes with Clifford encoders,
//! syndrome list tables, Knill-Laflamme checks, a dense state-vector engine,
//! random and keyed unitaries, exact order-2 and order-4 Haar moments, the
//! keyed unambiguous list-decoding protocol and an experiment harness.

pub mod error;
pub mod experiment;
pub mod gf2;
pub mod klcheck;
pub mod listdec;
pub mod moments;
pub mod pauli;
pub mod protocol;
pub mod randunitary;
pub mod simengine;
pub mod stabilizer;
pub mod stats;
pub mod tableau;

pub use error::{Error, Result};
pub use pauli::{enumerate_paulis, Letter, PauliOperator};
pub use simengine::{Ensemble, StateVector};
pub use stabilizer::{library, StabilizerCode, Syndrome};
pub use tableau::{conjugate_by_tableau, CliffordTableau};
