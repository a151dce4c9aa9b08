//! Exact desk-scale simulation of quantum query algorithms under a coherent-depth
//! budget.
//!
//! Every circuit a solver runs may make at most `D` oracle queries before
//! measurement; a [`QueryLedger`] enforces the budget and accumulates the hybrid
//! query cost. Two decomposition strategies are implemented for each problem:
//!
//! * **interpolation** — run the full-problem circuit with a lower-degree
//!   polynomial transform and compensate with statistical sampling;
//! * **parallelization** — split the input into independent sub-problems that
//!   each fit the budget.
//!
//! Solvers are provided for the k-threshold function, arbitrary non-constant
//! total symmetric Boolean functions, and balanced binary NAND trees. All
//! quantum behaviour is simulated exactly at the spectral level: block-encoded
//! operators are transformed by certified bounded polynomials and measurement
//! outcomes are drawn from the exact distributions.

pub mod block;
pub mod config;
pub mod error;
pub mod experiment;
pub mod ledger;
pub mod nand;
pub mod poly;
pub mod special;
pub mod stats;
pub mod symmetric;
pub mod threshold;

pub use block::{BlockEncoding, OracleInput, Projector};
pub use config::Tuning;
pub use error::{Error, Result};
pub use experiment::{fisher_information, fit_scaling_exponent, run_sweep, ExperimentRecord, SweepConfig};
pub use ledger::{LedgerSummary, QueryLedger};
pub use nand::{NandTree, SpectralCertificate};
pub use poly::{BoundedPolynomial, Certificate, StepSpec};
pub use symmetric::{SymmetricFunction, WeightWindow};
pub use threshold::{PartitionPlan, SolveOutcome, ThresholdInstance};
