//! Experiment metrics.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::baselines::MechanismKind;

/// A binomial proportion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rate {
    pub value: f64,
    pub std_error: f64,
    pub successes: u64,
    pub count: u64,
}

impl Rate {
    pub fn from_counts(successes: u64, count: u64) -> Option<Self> {
        if count == 0 {
            return None;
        }
        let p = successes as f64 / count as f64;
        Some(Self {
            value: p,
            std_error: libm::sqrt(p * (1.0 - p) / count as f64),
            successes,
            count,
        })
    }
}

/// A sample mean, or a quantity derived from one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
    pub count: u64,
}

impl Estimate {
    pub fn mean_of(values: &[f64]) -> Option<Self> {
        let n = values.len();
        if n == 0 {
            return None;
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std_error = if n > 1 {
            let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
            libm::sqrt(ss / (n - 1) as f64 / n as f64)
        } else {
            0.0
        };
        Some(Self {
            value: mean,
            std_error,
            count: n as u64,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: Option<String>,
    pub mechanism: MechanismKind,
    pub seed: u64,
    pub replications: u64,
    pub series_length: u64,
    pub matches: u64,
    /// Exact score ties; left out of every win-rate numerator and
    /// denominator.
    pub draws: u64,
    /// Win rate of the toss winner, over matches that had a toss.
    pub toss_winner_win_rate: Option<Rate>,
    /// `|P(win | won toss) - P(win | lost toss)|`.
    pub winprob_gap: Option<Estimate>,
    /// Share of matches where either party envies the other's bundle.
    pub envy_rate: Rate,
    pub mean_bonus: Estimate,
    /// Win rate of the side batting second.
    pub chase_win_rate: Option<Rate>,
    /// Largest `|proposer_gap|` over all matches (toss, propose and choose only).
    pub max_abs_proposer_gap: Option<f64>,
    /// Bid minus the true worth of the winning turn (auction only).
    pub mean_winner_regret: Option<Estimate>,
    pub tie_breaks: u64,
    pub first_batter_counts: BTreeMap<String, u64>,
}

/// One flattened `(mechanism, metric)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub mechanism: String,
    pub metric: String,
    pub value: f64,
    pub std_error: Option<f64>,
    pub count: u64,
}

impl ExperimentReport {
    pub fn metric_rows(&self) -> Vec<MetricRow> {
        let mechanism = self.mechanism.name().to_string();
        let mut rows = Vec::new();
        let mut push = |metric: &str, value: f64, std_error: Option<f64>, count: u64| {
            rows.push(MetricRow {
                mechanism: mechanism.clone(),
                metric: metric.to_string(),
                value,
                std_error,
                count,
            })
        };
        if let Some(r) = self.toss_winner_win_rate {
            push("toss_winner_win_rate", r.value, Some(r.std_error), r.count);
        }
        if let Some(e) = self.winprob_gap {
            push("winprob_gap", e.value, Some(e.std_error), e.count);
        }
        push("envy_rate", self.envy_rate.value, Some(self.envy_rate.std_error), self.envy_rate.count);
        push("mean_bonus", self.mean_bonus.value, Some(self.mean_bonus.std_error), self.mean_bonus.count);
        if let Some(r) = self.chase_win_rate {
            push("chase_win_rate", r.value, Some(r.std_error), r.count);
        }
        if let Some(g) = self.max_abs_proposer_gap {
            push("max_abs_proposer_gap", g, None, self.matches);
        }
        if let Some(e) = self.mean_winner_regret {
            push("mean_winner_regret", e.value, Some(e.std_error), e.count);
        }
        push("tie_breaks", self.tie_breaks as f64, None, self.matches);
        push("draws", self.draws as f64, None, self.matches);
        for (team, n) in &self.first_batter_counts {
            push(&alloc::format!("first_batter_count.{team}"), *n as f64, None, self.matches);
        }
        rows
    }
}

/// Reports for several mechanisms run on shared conditions and shared
/// random numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub base_seed: u64,
    pub reports: Vec<ExperimentReport>,
}

impl ComparisonTable {
    pub fn report(&self, mechanism: MechanismKind) -> Option<&ExperimentReport> {
        self.reports.iter().find(|r| r.mechanism == mechanism)
    }

    pub fn metric_rows(&self) -> Vec<MetricRow> {
        self.reports.iter().flat_map(ExperimentReport::metric_rows).collect()
    }
}
