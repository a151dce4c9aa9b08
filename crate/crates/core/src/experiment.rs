//! Batch experiment driver: seeded sweeps over problem/size/depth/strategy
//! grids, CSV/JSON record emission, scaling-exponent fits, and the Fisher
//! information diagnostic.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::block::OracleInput;
use crate::config::Tuning;
use crate::error::{Error, Result};
use crate::ledger::QueryLedger;
use crate::nand::{solve_nand_interpolated, solve_nand_parallel, NandTree};
use crate::stats::{derive_seed, fit_loglog, median};
use crate::symmetric::{solve_symmetric, SymmetricFunction};
use crate::threshold::{
    solve_threshold_interpolated, solve_threshold_parallel, SolveOutcome, ThresholdInstance,
};

/// Problem family of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Problem {
    Threshold,
    Symmetric,
    Nand,
}

impl std::fmt::Display for Problem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Problem::Threshold => write!(f, "threshold"),
            Problem::Symmetric => write!(f, "symmetric"),
            Problem::Nand => write!(f, "nand"),
        }
    }
}

/// Decomposition strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Interpolate,
    Parallel,
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Strategy::Interpolate => write!(f, "interpolate"),
            Strategy::Parallel => write!(f, "parallel"),
        }
    }
}

impl std::str::FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "interpolate" => Ok(Strategy::Interpolate),
            "parallel" => Ok(Strategy::Parallel),
            other => Err(Error::InvalidConfig(format!("unknown strategy {other:?}"))),
        }
    }
}

/// How per-trial inputs are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputDistribution {
    /// Uniformly random bits.
    Uniform,
    /// Hamming weight pinned to k or k+1 (the decision boundary); threshold
    /// sweeps default to this.
    Boundary,
}

/// Sweep configuration; the JSON schema consumed by `--config`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepConfig {
    pub problem: Problem,
    /// Input sizes N (powers of two; tree leaf counts for NAND).
    pub sizes: Vec<u64>,
    /// Thresholds k (threshold problem only).
    #[serde(default)]
    pub ks: Vec<u64>,
    pub depths: Vec<u64>,
    pub strategies: Vec<Strategy>,
    pub trials: u64,
    pub base_seed: u64,
    /// Symmetric function: "parity", "majority", or an inline 0/1 table.
    #[serde(default)]
    pub function: Option<String>,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub input_dist: Option<InputDistribution>,
    /// Oracle queries charged per block-encoding call (the degree-cost
    /// constant); scaling fits are invariant to it.
    #[serde(default)]
    pub cost_multiplier: Option<u64>,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sizes.is_empty() || self.depths.is_empty() || self.strategies.is_empty() {
            return Err(Error::InvalidConfig(
                "sizes, depths and strategies must be nonempty".into(),
            ));
        }
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be at least 1".into()));
        }
        if self.problem == Problem::Threshold && self.ks.is_empty() {
            return Err(Error::InvalidConfig("threshold sweeps need ks".into()));
        }
        for &n in &self.sizes {
            if n == 0 || !n.is_power_of_two() {
                return Err(Error::InvalidConfig(format!("size {n} is not a power of two")));
            }
        }
        if let Some(a) = self.alpha {
            if !(0.0..=1.0).contains(&a) {
                return Err(Error::InvalidConfig(format!("alpha {a} outside [0, 1]")));
            }
        }
        Ok(())
    }

    fn tuning(&self) -> Tuning {
        Tuning {
            cost_multiplier: self.cost_multiplier.unwrap_or(1).max(1),
            ..Tuning::default()
        }
    }

    fn symmetric_function(&self, n: usize) -> Result<SymmetricFunction> {
        match self.function.as_deref() {
            None | Some("parity") => SymmetricFunction::parity(n),
            Some("majority") => SymmetricFunction::majority(n),
            Some(table) => SymmetricFunction::from_json_table(table),
        }
    }
}

/// One trial's outcome row. Serializes to the fixed CSV column set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub problem: String,
    pub n: u64,
    pub k: u64,
    pub depth_limit: u64,
    pub strategy: String,
    pub trial: u64,
    #[serde(serialize_with = "ser_bit", deserialize_with = "de_bit")]
    pub answer: bool,
    #[serde(serialize_with = "ser_bit", deserialize_with = "de_bit")]
    pub truth: bool,
    #[serde(serialize_with = "ser_bit", deserialize_with = "de_bit")]
    pub correct: bool,
    pub total_queries: u64,
    pub max_coherent: u64,
    pub circuits: u64,
    pub seed: u64,
    #[serde(serialize_with = "ser_bit", deserialize_with = "de_bit")]
    pub fallback: bool,
}

fn ser_bit<S: serde::Serializer>(v: &bool, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_u8(u8::from(*v))
}

fn de_bit<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<bool, D::Error> {
    let v = u8::deserialize(d)?;
    Ok(v != 0)
}

/// Fixed CSV header.
pub const CSV_HEADER: &str = "problem,n,k,depth_limit,strategy,trial,answer,truth,correct,total_queries,max_coherent,circuits,seed,fallback";

fn random_input(n: u64, dist: InputDistribution, k: u64, rng: &mut crate::stats::SimRng) -> OracleInput {
    use rand::seq::SliceRandom;
    use rand::Rng;
    let n = n as usize;
    let bits: Vec<bool> = match dist {
        InputDistribution::Uniform => (0..n).map(|_| rng.random::<bool>()).collect(),
        InputDistribution::Boundary => {
            let w = (k + u64::from(rng.random::<bool>())).min(n as u64) as usize;
            let mut bits = vec![false; n];
            for b in bits.iter_mut().take(w) {
                *b = true;
            }
            bits.shuffle(rng);
            bits
        }
    };
    OracleInput::new(bits).expect("power-of-two size")
}

struct Cell {
    n: u64,
    k: u64,
    depth: u64,
    strategy: Strategy,
}

fn cells(config: &SweepConfig) -> Vec<Cell> {
    let ks: Vec<u64> = if config.problem == Problem::Threshold {
        config.ks.clone()
    } else {
        vec![0]
    };
    let mut out = Vec::new();
    for &n in &config.sizes {
        for &k in &ks {
            for &depth in &config.depths {
                for &strategy in &config.strategies {
                    out.push(Cell { n, k, depth, strategy });
                }
            }
        }
    }
    out
}

fn run_trial(
    config: &SweepConfig,
    cell: &Cell,
    trial: u64,
    cell_index: u64,
    tuning: &Tuning,
) -> Result<ExperimentRecord> {
    let seed = derive_seed(config.base_seed, &[cell_index, trial]);
    let mut input_rng = crate::stats::rng_from_seed(derive_seed(seed, &[0xD1CE]));
    let mut ledger = QueryLedger::new(cell.depth)?;
    let (outcome, truth): (SolveOutcome, bool) = match config.problem {
        Problem::Threshold => {
            let dist = config.input_dist.unwrap_or(InputDistribution::Boundary);
            let input = random_input(cell.n, dist, cell.k, &mut input_rng);
            let inst = ThresholdInstance::new(input, cell.k)?;
            let truth = inst.truth();
            let out = match cell.strategy {
                Strategy::Interpolate => {
                    solve_threshold_interpolated(&inst, cell.depth, &mut ledger, seed, tuning)?
                }
                Strategy::Parallel => {
                    solve_threshold_parallel(&inst, cell.depth, &mut ledger, seed, tuning)?
                }
            };
            (out, truth)
        }
        Problem::Nand => {
            if !cell.n.is_power_of_two() || cell.n < 2 {
                return Err(Error::InvalidConfig(format!("bad NAND size {}", cell.n)));
            }
            let depth_d = cell.n.trailing_zeros();
            let tree = NandTree::balanced(depth_d)?;
            let dist = config.input_dist.unwrap_or(InputDistribution::Uniform);
            let input = random_input(cell.n, dist, cell.k, &mut input_rng);
            let truth = tree.evaluate_classical(&input)?;
            let out = match cell.strategy {
                Strategy::Interpolate => {
                    solve_nand_interpolated(&tree, &input, cell.depth, &mut ledger, seed, tuning)?
                }
                Strategy::Parallel => {
                    solve_nand_parallel(&tree, &input, cell.depth, &mut ledger, seed, tuning)?
                }
            };
            (out, truth)
        }
        Problem::Symmetric => {
            let f = config.symmetric_function(cell.n as usize)?;
            let dist = config.input_dist.unwrap_or(InputDistribution::Uniform);
            let input = random_input(cell.n, dist, cell.k, &mut input_rng);
            let truth = f.apply(&input);
            let alpha = config.alpha.unwrap_or(0.5);
            let out =
                solve_symmetric(&f, &input, cell.depth, alpha, &mut ledger, seed, tuning)?;
            (out, truth)
        }
    };
    let summary = ledger.summary();
    if summary.max_coherent > cell.depth {
        return Err(Error::Internal(format!(
            "ledger max coherent {} exceeds depth {}",
            summary.max_coherent, cell.depth
        )));
    }
    Ok(ExperimentRecord {
        problem: config.problem.to_string(),
        n: cell.n,
        k: cell.k,
        depth_limit: cell.depth,
        strategy: cell.strategy.to_string(),
        trial,
        answer: outcome.answer,
        truth,
        correct: outcome.answer == truth,
        total_queries: summary.total,
        max_coherent: summary.max_coherent,
        circuits: summary.circuits,
        seed,
        fallback: outcome.fallback,
    })
}

/// Run every (cell, trial) of the sweep; deterministic given the base seed.
/// Any depth violation escaping a solver aborts the sweep.
pub fn run_sweep(config: &SweepConfig) -> Result<Vec<ExperimentRecord>> {
    config.validate()?;
    let tuning = config.tuning();
    let cells = cells(config);
    let mut records = Vec::with_capacity(cells.len() * config.trials as usize);
    for (cell_index, cell) in cells.iter().enumerate() {
        for trial in 0..config.trials {
            records.push(run_trial(config, cell, trial, cell_index as u64, &tuning)?);
        }
    }
    Ok(records)
}

/// Serialize records as CSV with the fixed header.
pub fn write_csv<W: Write>(records: &[ExperimentRecord], out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    for record in records {
        writer.serialize(record).map_err(|e| Error::Csv(e.to_string()))?;
    }
    writer.flush()?;
    Ok(())
}

/// Parse records from CSV produced by [`write_csv`].
pub fn read_csv<R: std::io::Read>(input: R) -> Result<Vec<ExperimentRecord>> {
    let mut reader = csv::Reader::from_reader(input);
    reader
        .deserialize()
        .map(|r| r.map_err(|e| Error::Csv(e.to_string())))
        .collect()
}

/// Numeric fields a scaling fit can use.
fn record_field(record: &ExperimentRecord, field: &str) -> Result<f64> {
    Ok(match field {
        "n" => record.n as f64,
        "k" => record.k as f64,
        "depth_limit" => record.depth_limit as f64,
        "total_queries" => record.total_queries as f64,
        "max_coherent" => record.max_coherent as f64,
        "circuits" => record.circuits as f64,
        other => {
            return Err(Error::InvalidConfig(format!("unknown fit field {other:?}")));
        }
    })
}

/// Ordinary least squares of `log(median y)` against `log x` over the
/// records, excluding fallback rows. Returns (slope, intercept, r^2).
pub fn fit_scaling_exponent(
    records: &[ExperimentRecord],
    x_field: &str,
    y_field: &str,
) -> Result<(f64, f64, f64)> {
    let mut groups: std::collections::BTreeMap<u64, Vec<f64>> = Default::default();
    for record in records.iter().filter(|r| !r.fallback) {
        let x = record_field(record, x_field)?;
        let y = record_field(record, y_field)?;
        groups.entry(x.to_bits()).or_default().push(y);
    }
    let pts: Vec<(f64, f64)> = groups
        .into_iter()
        .map(|(xb, ys)| (f64::from_bits(xb), median(&ys)))
        .collect();
    fit_loglog(&pts)
}

/// Fisher information of `l` two-outcome measurements of the Grover-iterated
/// state: `l (1 + 2k)^2 / (pi (1 - pi))`.
pub fn fisher_information(pi: f64, grover_steps: u64, samples: u64) -> Result<f64> {
    if !(pi > 0.0 && pi < 1.0) {
        return Err(Error::Singular(pi));
    }
    let amp = (1 + 2 * grover_steps) as f64;
    Ok(samples as f64 * amp * amp / (pi * (1.0 - pi)))
}
