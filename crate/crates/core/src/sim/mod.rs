//! Monte Carlo harness.
//!
//! Scores follow a normal model: each side scores `N(score_mean,
//! score_sd²)`, the first batter adds the true advantage and the bonus
//! recipient adds its bonus. The side with the higher adjusted score wins,
//! so a side holding an effective edge `d` wins with probability
//! `Φ(d / (score_sd·√2))`.
//!
//! Replication `i`, match `m` draws from its own substreams of the scenario
//! seed (one each for the toss, the captains' views, the scores and the
//! auction tie-break). Results therefore do not depend on the order in
//! which replications run, and different mechanisms on the same seed see
//! the same coins, views and scores.

pub mod config;
pub mod report;

use alloc::collections::BTreeMap;
use alloc::string::ToString;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::baselines::{Mechanism, MechanismKind, SeriesState};
use crate::error::{Error, Result};
use crate::mechanism::{check_envy_free, Allocation, TeamId};
use crate::rng::{ProtocolRng, Purpose};
use crate::valuation::{MatchConditions, ValuationModel, ValuationView};

pub use config::ScenarioConfig;
pub use report::{ComparisonTable, Estimate, ExperimentReport, MetricRow, Rate};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    /// `None` on an exact tie.
    pub winner: Option<TeamId>,
    pub margin: f64,
    pub first_batter: TeamId,
    pub bonus_applied: Option<(TeamId, f64)>,
    /// Filled in by the harness; a bare [`simulate_match`] leaves it empty.
    pub toss_winner: Option<TeamId>,
}

impl MatchResult {
    pub fn chase_won(&self) -> Option<bool> {
        self.winner.as_ref().map(|w| *w != self.first_batter)
    }
}

/// Play one match under `allocation`. Two standard normals are drawn, first
/// batter's then second batter's.
pub fn simulate_match<R: Rng + ?Sized>(allocation: &Allocation, conditions: &MatchConditions, rng: &mut R) -> MatchResult {
    let first = allocation.first_batter();
    let second = allocation.second_batter();
    let z_first: f64 = rng.sample(StandardNormal);
    let z_second: f64 = rng.sample(StandardNormal);
    let bonus = |team: &TeamId| match &allocation.bonus_recipient {
        Some(r) if r == team => allocation.bonus_runs,
        _ => 0.0,
    };
    let first_score =
        conditions.score_mean + conditions.score_sd * z_first + conditions.true_advantage + bonus(first);
    let second_score = conditions.score_mean + conditions.score_sd * z_second + bonus(second);
    let winner = if first_score > second_score {
        Some(first.clone())
    } else if second_score > first_score {
        Some(second.clone())
    } else {
        None
    };
    MatchResult {
        winner,
        margin: (first_score - second_score).abs(),
        first_batter: first.clone(),
        bonus_applied: allocation
            .bonus_recipient
            .clone()
            .map(|team| (team, allocation.bonus_runs)),
        toss_winner: None,
    }
}

/// Everything recorded about one simulated match.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchRecord {
    pub result: MatchResult,
    pub bonus_runs: f64,
    /// Either party's gap fell below `-envy_tolerance`.
    pub envious: bool,
    /// For toss, propose and choose: the proposer's own-view gap.
    pub proposer_gap: Option<f64>,
    pub winner_regret: Option<f64>,
    pub tie_broken: bool,
}

/// A validated scenario, ready to replicate.
#[derive(Debug, Clone)]
pub struct Experiment {
    config: ScenarioConfig,
    mechanism: Mechanism,
    conditions: MatchConditions,
    model: ValuationModel,
}

impl Experiment {
    pub fn new(config: ScenarioConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            mechanism: config.mechanism_spec()?,
            conditions: config.match_conditions(),
            model: config.model(),
            config,
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    /// Run replication `index`: a series of `series_length` matches.
    pub fn replicate(&self, index: u64) -> Result<Vec<MatchRecord>> {
        let seed = self.config.seed;
        let teams = &self.config.teams;
        let mut series = SeriesState::new();
        let mut records = Vec::with_capacity(self.config.series_length as usize);
        for m in 0..self.config.series_length {
            let mut view_rng = ProtocolRng::substream(seed, index, m, Purpose::Views)?;
            let views = [
                self.conditions.draw_view(teams[0].clone(), self.model, &mut view_rng),
                self.conditions.draw_view(teams[1].clone(), self.model, &mut view_rng),
            ];
            let mut toss_rng = ProtocolRng::substream(seed, index, m, Purpose::Toss)?;
            let mut tie_rng = ProtocolRng::substream(seed, index, m, Purpose::TieBreak)?;
            let mut score_rng = ProtocolRng::substream(seed, index, m, Purpose::Scores)?;

            let outcome = self
                .mechanism
                .run(teams, &views, &mut series, &mut toss_rng, &mut tie_rng)?;
            let allocation = &outcome.allocation;
            let mut result = simulate_match(allocation, &self.conditions, &mut score_rng);
            result.toss_winner = outcome.toss.as_ref().map(|t| t.lucky.clone());

            let view_of = |team: &TeamId| -> &ValuationView {
                if views[0].team == *team {
                    &views[0]
                } else {
                    &views[1]
                }
            };
            // The non-choosing side plays the proposer's part in the report.
            let envy = check_envy_free(
                allocation,
                view_of(&allocation.other),
                view_of(&allocation.chooser),
                self.config.envy_tolerance,
            )?;
            records.push(MatchRecord {
                result,
                bonus_runs: allocation.bonus_runs,
                envious: envy.any(),
                proposer_gap: outcome.transcript.as_ref().map(|_| envy.proposer_gap),
                winner_regret: outcome
                    .auction
                    .as_ref()
                    .map(|a| a.winner_regret(self.conditions.true_advantage)),
                tie_broken: outcome.auction.as_ref().is_some_and(|a| a.tie_broken),
            });
        }
        Ok(records)
    }

    /// Fold per-replication records into a report. Iteration order fixes
    /// the floating-point summation order, so pass replications in index
    /// order for bit-identical output.
    pub fn report<'a, I>(&self, replications: I) -> ExperimentReport
    where
        I: IntoIterator<Item = &'a Vec<MatchRecord>>,
    {
        aggregate(&self.config, replications.into_iter().flatten())
    }

    pub fn run(&self) -> Result<ExperimentReport> {
        let records = (0..self.config.replications)
            .map(|i| self.replicate(i))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.report(&records))
    }
}

fn aggregate<'a>(config: &ScenarioConfig, records: impl Iterator<Item = &'a MatchRecord>) -> ExperimentReport {
    let mut matches = 0u64;
    let mut draws = 0u64;
    let (mut toss_n, mut toss_wins) = (0u64, 0u64);
    let (mut decided, mut chase_wins) = (0u64, 0u64);
    let mut envious = 0u64;
    let mut bonuses = Vec::new();
    let mut regrets = Vec::new();
    let mut max_gap: Option<f64> = None;
    let mut tie_breaks = 0u64;
    let mut first_batter_counts: BTreeMap<_, u64> =
        config.teams.iter().map(|t| (t.as_str().to_string(), 0)).collect();

    for record in records {
        let r = &record.result;
        matches += 1;
        bonuses.push(record.bonus_runs);
        *first_batter_counts.entry(r.first_batter.as_str().to_string()).or_default() += 1;
        envious += u64::from(record.envious);
        tie_breaks += u64::from(record.tie_broken);
        if let Some(gap) = record.proposer_gap {
            max_gap = Some(max_gap.map_or(gap.abs(), |m: f64| m.max(gap.abs())));
        }
        if let Some(regret) = record.winner_regret {
            regrets.push(regret);
        }
        let Some(winner) = &r.winner else {
            draws += 1;
            continue;
        };
        decided += 1;
        chase_wins += u64::from(*winner != r.first_batter);
        if let Some(toss_winner) = &r.toss_winner {
            toss_n += 1;
            toss_wins += u64::from(winner == toss_winner);
        }
    }

    let toss_winner_win_rate = Rate::from_counts(toss_wins, toss_n);
    ExperimentReport {
        name: config.name.clone(),
        mechanism: config.mechanism,
        seed: config.seed,
        replications: config.replications,
        series_length: config.series_length,
        matches,
        draws,
        toss_winner_win_rate,
        winprob_gap: toss_winner_win_rate.map(|r| Estimate {
            value: (2.0 * r.value - 1.0).abs(),
            std_error: 2.0 * r.std_error,
            count: r.count,
        }),
        envy_rate: Rate::from_counts(envious, matches).unwrap_or(Rate {
            value: 0.0,
            std_error: 0.0,
            successes: 0,
            count: 0,
        }),
        mean_bonus: Estimate::mean_of(&bonuses).unwrap_or(Estimate {
            value: 0.0,
            std_error: 0.0,
            count: 0,
        }),
        chase_win_rate: Rate::from_counts(chase_wins, decided),
        max_abs_proposer_gap: max_gap,
        mean_winner_regret: Estimate::mean_of(&regrets),
        tie_breaks,
        first_batter_counts,
    }
}

/// Run `config.replications` replications serially.
pub fn run_experiment(config: &ScenarioConfig) -> Result<ExperimentReport> {
    Experiment::new(config.clone())?.run()
}

/// Run scenarios that share their match conditions on the first scenario's
/// seed (common random numbers), one report per scenario.
pub fn compare_mechanisms(configs: &[ScenarioConfig]) -> Result<ComparisonTable> {
    let plan = comparison_plan(configs)?;
    let reports = plan.iter().map(run_experiment).collect::<Result<Vec<_>>>()?;
    Ok(ComparisonTable {
        base_seed: configs[0].seed,
        reports,
    })
}

/// Check a comparison is meaningful and pin every scenario to the shared
/// base seed.
pub fn comparison_plan(configs: &[ScenarioConfig]) -> Result<Vec<ScenarioConfig>> {
    let [first, rest @ ..] = configs else {
        return Err(Error::ComparisonInvalid("need at least two scenarios".into()));
    };
    if rest.is_empty() {
        return Err(Error::ComparisonInvalid("need at least two scenarios".into()));
    }
    for (i, c) in rest.iter().enumerate() {
        if c.conditions != first.conditions || c.valuation != first.valuation || c.teams != first.teams {
            return Err(Error::ComparisonInvalid(alloc::format!(
                "scenario {} does not share the conditions, valuation and teams of scenario 0",
                i + 1
            )));
        }
    }
    Ok(configs
        .iter()
        .map(|c| ScenarioConfig {
            seed: first.seed,
            ..c.clone()
        })
        .collect())
}

/// Mechanisms in a comparison, for display.
pub fn mechanisms_of(table: &ComparisonTable) -> Vec<MechanismKind> {
    table.reports.iter().map(|r| r.mechanism).collect()
}
