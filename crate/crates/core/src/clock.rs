//! Time source for timestamps, ledger durations and the run deadline.
//!
//! The logical clock advances by a fixed step on every [`Clock::now_ms`] call
//! and never on [`Clock::peek_ms`], which makes a scripted run (and its git
//! commit hashes) reproducible byte for byte.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

#[derive(Debug, Clone, Default)]
pub enum Clock {
    #[default]
    System,
    Logical { ticks: Arc<AtomicU64>, step_ms: u64 },
}

impl Clock {
    pub fn logical(step_ms: u64) -> Self {
        Clock::Logical {
            ticks: Arc::new(AtomicU64::new(0)),
            step_ms,
        }
    }

    /// Milliseconds since the Unix epoch (or since zero for a logical clock).
    pub fn now_ms(&self) -> u64 {
        match self {
            Clock::System => system_ms(),
            Clock::Logical { ticks, step_ms } => {
                ticks.fetch_add(*step_ms, Ordering::SeqCst) + step_ms
            }
        }
    }

    /// Reads the clock without advancing a logical clock.
    pub fn peek_ms(&self) -> u64 {
        match self {
            Clock::System => system_ms(),
            Clock::Logical { ticks, .. } => ticks.load(Ordering::SeqCst),
        }
    }

    /// Restores a logical clock to a previously recorded reading. No-op for
    /// the system clock.
    pub fn restore(&self, ms: u64) {
        if let Clock::Logical { ticks, .. } = self {
            ticks.store(ms, Ordering::SeqCst);
        }
    }
}

fn system_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}
