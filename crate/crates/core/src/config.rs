use serde::{Deserialize, Serialize};

/// Calibrated implementation constants.
///
/// The asymptotic statements this crate reproduces leave their constant
/// factors free; the values below were fixed once against the test corpus and
/// are recorded here so every run is reproducible. They are not meant to be
/// tuned per experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Tuning {
    /// Oracle queries charged per application of a block-encoding unitary
    /// inside a polynomial transform (the degree-cost constant). Scaling fits
    /// are invariant to it; exposed so that can be demonstrated.
    pub cost_multiplier: u64,
    /// Exponent constant in the depth-driven leakage schedule
    /// `eta = 2^(-delta * D * c_eta)`.
    pub c_eta: f64,
    /// Sample-count constant in the window-halving rounds,
    /// `samples = ceil(c_samples * ln(1/E) / sigma^2)`.
    pub c_samples: f64,
    /// A solver falls back to classical exhaustive reading when its planned
    /// hybrid cost exceeds `fallback_factor * N`.
    pub fallback_factor: u64,
    /// Subtree-size constant for the parallel NAND solver: candidate levels
    /// have at most `c_subtree * D^2` leaves.
    pub c_subtree: f64,
    /// Balls-into-bins design constant: the parallel threshold solver sizes
    /// per-bin precision for at most `c_bins * max(w/p, ln p)` ones per bin.
    pub c_bins: f64,
    /// Failure probability each solver designs its statistics for. Must be
    /// at most 1/3 to meet the bounded-error contract.
    pub solver_failure: f64,
}

impl Default for Tuning {
    fn default() -> Self {
        Self {
            cost_multiplier: 1,
            c_eta: 0.5,
            c_samples: 0.2,
            fallback_factor: 1024,
            c_subtree: 1.0,
            c_bins: 2.0,
            solver_failure: 1.0 / 12.0,
        }
    }
}

impl Tuning {
    /// Largest polynomial degree that fits a coherent budget of `depth`
    /// oracle queries at the configured per-call cost.
    pub fn degree_budget(&self, depth: u64) -> u64 {
        depth / self.cost_multiplier.max(1)
    }
}
