//! Difficulty classification and the productivity metric.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Difficulty {
    Elementary,
    Intermediate,
    Advanced,
}

/// 0–9 requirements are elementary, 10–19 intermediate, 20 and more advanced.
pub fn classify_difficulty(n_requirements: usize) -> Difficulty {
    match n_requirements {
        0..=9 => Difficulty::Elementary,
        10..=19 => Difficulty::Intermediate,
        _ => Difficulty::Advanced,
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("cost must be positive, got {0}")]
    NonPositiveCost(f64),
    #[error("function completeness must lie in [1, 4], got {0}")]
    CompletenessOutOfRange(f64),
    #[error("score {score} at position {index} is outside 1..=4")]
    ScoreOutOfRange { index: usize, score: i64 },
    #[error("scores file has no scores")]
    NoScores,
    #[error("malformed scores file: {0}")]
    Malformed(String),
}

/// Completeness gained above the minimum score, per unit of cost.
pub fn compute_productivity(function_completeness: f64, cost: f64) -> Result<f64, MetricsError> {
    if !cost.is_finite() || cost <= 0.0 {
        return Err(MetricsError::NonPositiveCost(cost));
    }
    if !(1.0..=4.0).contains(&function_completeness) {
        return Err(MetricsError::CompletenessOutOfRange(function_completeness));
    }
    Ok((function_completeness - 1.0) / cost)
}

/// Human scores for one application: one 1–4 score per requirement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoresFile {
    pub app: String,
    pub scores: Vec<i64>,
    /// Likert dimensions carried through to the report untouched.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub non_functional: Option<BTreeMap<String, f64>>,
}

impl ScoresFile {
    pub fn load(path: &Path) -> Result<Self, MetricsError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| MetricsError::Malformed(e.to_string()))?;
        let file: ScoresFile =
            serde_json::from_str(&text).map_err(|e| MetricsError::Malformed(e.to_string()))?;
        file.function_completeness()?;
        Ok(file)
    }

    pub fn function_completeness(&self) -> Result<f64, MetricsError> {
        if self.scores.is_empty() {
            return Err(MetricsError::NoScores);
        }
        if let Some((index, &score)) = self
            .scores
            .iter()
            .enumerate()
            .find(|(_, s)| !(1..=4).contains(*s))
        {
            return Err(MetricsError::ScoreOutOfRange { index, score });
        }
        Ok(self.scores.iter().sum::<i64>() as f64 / self.scores.len() as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub app: String,
    pub function_completeness: f64,
    pub cost_usd: f64,
    pub time_minutes: f64,
    /// Absent when the run recorded no cost.
    pub productivity_usd: Option<f64>,
    /// Absent when the run recorded no time.
    pub productivity_time: Option<f64>,
    pub build_success: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub non_functional: Option<BTreeMap<String, f64>>,
}

pub fn compute_metrics(
    scores: &ScoresFile,
    cost_usd: f64,
    time_minutes: f64,
    build_success: bool,
) -> Result<MetricsReport, MetricsError> {
    let completeness = scores.function_completeness()?;
    let productivity = |cost: f64| match compute_productivity(completeness, cost) {
        Ok(p) => Ok(Some(p)),
        Err(MetricsError::NonPositiveCost(_)) => Ok(None),
        Err(e) => Err(e),
    };
    Ok(MetricsReport {
        app: scores.app.clone(),
        function_completeness: completeness,
        cost_usd,
        time_minutes,
        productivity_usd: productivity(cost_usd)?,
        productivity_time: productivity(time_minutes)?,
        build_success,
        non_functional: scores.non_functional.clone(),
    })
}

/// Fraction of applications whose final build succeeded.
pub fn build_success_rate(reports: &[MetricsReport]) -> f64 {
    if reports.is_empty() {
        return 0.0;
    }
    reports.iter().filter(|r| r.build_success).count() as f64 / reports.len() as f64
}
