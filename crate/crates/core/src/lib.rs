pub mod error;
pub mod expr;
pub mod jet;

pub use error::{Error, Result};
pub mod catalog;
pub mod chart;
pub mod field;
pub mod nhg;
pub mod quadrature;
pub mod report;
pub mod specfile;
pub mod tensor;
pub mod quasi_einstein;
pub mod matter;
pub mod yamabe;
pub mod suite;

pub use chart::{Chart, Coordinate, Grid, Signature};
pub use field::{Backend, TensorField};
pub use quasi_einstein::{GradientData, QEProblem};
pub use report::{Sampling, Status, SuiteReport, VerificationReport};
pub use suite::{run_suite, Suite, SuiteConfig};
