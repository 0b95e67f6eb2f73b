use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::GatewayError;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt: u64,
    pub completion: u64,
}

/// USD per 1,000 tokens.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Price {
    pub usd_per_1k_prompt: f64,
    pub usd_per_1k_completion: f64,
}

impl Price {
    pub fn cost(&self, prompt_tokens: u64, completion_tokens: u64) -> f64 {
        prompt_tokens as f64 / 1000.0 * self.usd_per_1k_prompt
            + completion_tokens as f64 / 1000.0 * self.usd_per_1k_completion
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UsageEntry {
    pub agent_role: String,
    pub model_id: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub wall_clock_seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct UsageLedger {
    pub entries: Vec<UsageEntry>,
    pub price_table: BTreeMap<String, Price>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RoleTotals {
    pub calls: u64,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub usd: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LedgerReport {
    pub total_usd: f64,
    pub total_seconds: f64,
    pub per_role: BTreeMap<String, RoleTotals>,
}

impl UsageLedger {
    pub fn with_prices(price_table: BTreeMap<String, Price>) -> Self {
        Self {
            entries: Vec::new(),
            price_table,
        }
    }

    pub fn record(&mut self, entry: UsageEntry) {
        self.entries.push(entry);
    }

    /// Totals and per-role breakdown. Every entry's model must be priced.
    pub fn report(&self) -> Result<LedgerReport, GatewayError> {
        let mut report = LedgerReport::default();
        for e in &self.entries {
            let price = self
                .price_table
                .get(&e.model_id)
                .ok_or_else(|| GatewayError::UnknownModel(e.model_id.clone()))?;
            let usd = price.cost(e.prompt_tokens, e.completion_tokens);
            report.total_usd += usd;
            report.total_seconds += e.wall_clock_seconds;
            let role = report.per_role.entry(e.agent_role.clone()).or_default();
            role.calls += 1;
            role.prompt_tokens += e.prompt_tokens;
            role.completion_tokens += e.completion_tokens;
            role.usd += usd;
            role.seconds += e.wall_clock_seconds;
        }
        Ok(report)
    }
}
