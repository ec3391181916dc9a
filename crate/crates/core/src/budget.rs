//! Shared evaluation budget.
//!
//! Budget parity across estimators means every method gets the same number
//! of utility calls per valuation round. The meter is the single piece of
//! shared mutable state during a round, so reservation is atomic: a charge
//! either fits entirely or is refused with no state change.

use std::sync::atomic::{AtomicU64, Ordering};

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BudgetError {
    #[error("budget exhausted: requested {requested} with {remaining} of {limit} remaining")]
    Exhausted {
        requested: u64,
        remaining: u64,
        limit: u64,
    },
}

/// Counter enforcing an upper bound on utility evaluations.
#[derive(Debug)]
pub struct BudgetMeter {
    limit: u64,
    used: AtomicU64,
}

impl BudgetMeter {
    pub fn new(limit: u64) -> Self {
        Self { limit, used: AtomicU64::new(0) }
    }

    /// Reserves `k` evaluations, returning the remaining budget, or refuses
    /// without changing state when the reservation would exceed the limit.
    pub fn charge(&self, k: u64) -> Result<u64, BudgetError> {
        let mut current = self.used.load(Ordering::Acquire);
        loop {
            let next = current + k;
            if next > self.limit {
                return Err(BudgetError::Exhausted {
                    requested: k,
                    remaining: self.limit - current,
                    limit: self.limit,
                });
            }
            match self.used.compare_exchange_weak(
                current,
                next,
                Ordering::AcqRel,
                Ordering::Acquire,
            ) {
                Ok(_) => return Ok(self.limit - next),
                Err(actual) => current = actual,
            }
        }
    }

    pub fn limit(&self) -> u64 {
        self.limit
    }

    pub fn used(&self) -> u64 {
        self.used.load(Ordering::Acquire)
    }

    pub fn remaining(&self) -> u64 {
        self.limit - self.used()
    }

    pub fn is_exhausted(&self) -> bool {
        self.remaining() == 0
    }
}
