//! Hybrid-query accounting: every simulated circuit run declares its coherent
//! query count, the ledger rejects runs over the depth budget and accumulates
//! the total hybrid cost.

use crate::error::{Error, Result};

/// Per-trial record of coherent query costs under a fixed depth budget.
///
/// A circuit of exactly `depth_limit` queries is legal (the budget is
/// inclusive). Classical single-bit reads are circuits of cost 1. The ledger
/// is a plain value owned by its trial; nothing is shared or global, so
/// concurrent trials cannot interfere.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryLedger {
    depth_limit: u64,
    /// Run-length encoded circuit log: (coherent cost, repetitions).
    runs: Vec<(u64, u64)>,
    total: u64,
    max_coherent: u64,
    circuits: u64,
}

/// Totals reported by [`QueryLedger::summary`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LedgerSummary {
    pub total: u64,
    pub max_coherent: u64,
    pub circuits: u64,
}

impl QueryLedger {
    /// Create an empty ledger with the given depth budget.
    pub fn new(depth_limit: u64) -> Result<Self> {
        if depth_limit == 0 {
            return Err(Error::InvalidBudget);
        }
        Ok(Self {
            depth_limit,
            runs: Vec::new(),
            total: 0,
            max_coherent: 0,
            circuits: 0,
        })
    }

    pub fn depth_limit(&self) -> u64 {
        self.depth_limit
    }

    /// Record one circuit of `coherent_queries` oracle calls.
    ///
    /// On [`Error::DepthExceeded`] the ledger is unchanged; tests treat that
    /// error escaping a solver as a hard failure.
    pub fn record_circuit(&mut self, coherent_queries: u64) -> Result<()> {
        self.record_circuits(coherent_queries, 1)
    }

    /// Record `count` identical circuits of `coherent_queries` each.
    pub fn record_circuits(&mut self, coherent_queries: u64, count: u64) -> Result<()> {
        if coherent_queries == 0 {
            return Err(Error::Internal(
                "cannot record a circuit with zero queries".into(),
            ));
        }
        if coherent_queries > self.depth_limit {
            return Err(Error::DepthExceeded {
                requested: coherent_queries,
                limit: self.depth_limit,
            });
        }
        if count == 0 {
            return Ok(());
        }
        match self.runs.last_mut() {
            Some((cost, reps)) if *cost == coherent_queries => *reps += count,
            _ => self.runs.push((coherent_queries, count)),
        }
        self.total += coherent_queries * count;
        self.max_coherent = self.max_coherent.max(coherent_queries);
        self.circuits += count;
        Ok(())
    }

    /// Totals consistent with the log; all zero for an empty ledger.
    pub fn summary(&self) -> LedgerSummary {
        LedgerSummary {
            total: self.total,
            max_coherent: self.max_coherent,
            circuits: self.circuits,
        }
    }

    /// Iterate the logged circuit costs in order, one entry per circuit.
    pub fn circuit_costs(&self) -> impl Iterator<Item = u64> + '_ {
        self.runs
            .iter()
            .flat_map(|&(cost, reps)| std::iter::repeat(cost).take(reps as usize))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn new_ledger_is_empty() {
        let ledger = QueryLedger::new(5).unwrap();
        assert_eq!(
            ledger.summary(),
            LedgerSummary { total: 0, max_coherent: 0, circuits: 0 }
        );
    }

    #[test]
    fn minimal_budget_is_legal() {
        assert!(QueryLedger::new(1).is_ok());
    }

    #[test]
    fn zero_budget_rejected() {
        assert!(matches!(QueryLedger::new(0), Err(Error::InvalidBudget)));
    }

    #[test]
    fn record_accumulates() {
        let mut ledger = QueryLedger::new(5).unwrap();
        ledger.record_circuit(3).unwrap();
        ledger.record_circuit(4).unwrap();
        let s = ledger.summary();
        assert_eq!(s.total, 7);
        assert_eq!(s.max_coherent, 4);
        assert_eq!(s.circuits, 2);
    }

    #[test]
    fn over_budget_rejected_and_ledger_unchanged() {
        let mut ledger = QueryLedger::new(5).unwrap();
        ledger.record_circuit(2).unwrap();
        let before = ledger.clone();
        let err = ledger.record_circuit(6).unwrap_err();
        assert!(matches!(err, Error::DepthExceeded { requested: 6, limit: 5 }));
        assert_eq!(ledger, before);
    }

    #[test]
    fn exactly_at_budget_accepted() {
        let mut ledger = QueryLedger::new(7).unwrap();
        ledger.record_circuit(7).unwrap();
        assert_eq!(ledger.summary().max_coherent, 7);
    }

    #[test]
    fn summary_matches_examples() {
        let mut ledger = QueryLedger::new(4).unwrap();
        for _ in 0..3 {
            ledger.record_circuit(2).unwrap();
        }
        assert_eq!(
            ledger.summary(),
            LedgerSummary { total: 6, max_coherent: 2, circuits: 3 }
        );

        let d = 9;
        let mut ledger = QueryLedger::new(d).unwrap();
        ledger.record_circuit(1).unwrap();
        ledger.record_circuit(d).unwrap();
        let s = ledger.summary();
        assert_eq!(s.total, d + 1);
        assert_eq!(s.max_coherent, d);
        assert_eq!(s.circuits, 2);
    }

    #[test]
    fn total_matches_log_and_is_monotone() {
        let mut ledger = QueryLedger::new(10).unwrap();
        let mut prev = 0;
        for q in [1, 10, 3, 3, 3, 7] {
            ledger.record_circuit(q).unwrap();
            let s = ledger.summary();
            assert!(s.total >= prev);
            prev = s.total;
        }
        let logged: u64 = ledger.circuit_costs().sum();
        assert_eq!(logged, ledger.summary().total);
        assert_eq!(ledger.circuit_costs().count() as u64, ledger.summary().circuits);
        assert!(ledger.circuit_costs().all(|c| c >= 1 && c <= 10));
    }

    #[test]
    fn zero_cost_circuit_is_an_error() {
        let mut ledger = QueryLedger::new(3).unwrap();
        assert!(ledger.record_circuit(0).is_err());
    }
}
