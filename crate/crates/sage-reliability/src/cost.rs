//! Aggregate verification of the per-trace cost bound.

use sage_core::gate::CostLedger;
use serde::{Deserialize, Serialize};

use crate::error::{ReliabilityError, ReliabilityResult};

/// Result of checking N*(c_base + mu*c_mch) against every ledger in a batch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostBoundReport {
    pub n_ledgers: usize,
    /// Ledgers whose total exceeded their bound beyond roundoff.
    pub violations: usize,
    /// Largest c_total - bound seen (negative when every ledger is under).
    pub max_breach: f64,
    /// Largest bound - c_total seen.
    pub max_slack: f64,
    /// Largest c_total / (n_steps * c_base) over ledgers with c_base > 0;
    /// 0 when no ledger prices its base steps.
    pub max_ratio: f64,
}

/// Confirms the bound on every ledger. The two sides are accumulated in
/// different orders, so equality-by-construction still leaves roundoff; a
/// breach only counts beyond 1e-9 relative to the bound's scale.
pub fn cost_bound_check(ledgers: &[CostLedger]) -> ReliabilityResult<CostBoundReport> {
    if ledgers.is_empty() {
        return Err(ReliabilityError::InvalidArgument(
            "cost_bound_check: empty batch".into(),
        ));
    }
    let mut violations = 0;
    let mut max_breach = f64::NEG_INFINITY;
    let mut max_slack = f64::NEG_INFINITY;
    let mut max_ratio = 0.0f64;
    for ledger in ledgers {
        if ledger.n_steps == 0 {
            return Err(ReliabilityError::InvalidArgument(
                "cost_bound_check: ledger with zero steps".into(),
            ));
        }
        let bound = ledger.bound();
        let breach = ledger.c_total - bound;
        if breach > 1e-9 * bound.abs().max(1.0) {
            violations += 1;
        }
        max_breach = max_breach.max(breach);
        max_slack = max_slack.max(-breach);
        if ledger.c_base > 0.0 {
            max_ratio = max_ratio.max(ledger.c_total / (ledger.n_steps as f64 * ledger.c_base));
        }
    }
    Ok(CostBoundReport {
        n_ledgers: ledgers.len(),
        violations,
        max_breach,
        max_slack,
        max_ratio,
    })
}
