//! Scenario configuration.
//!
//! A scenario is a JSON-compatible document with the sections `conditions`,
//! `valuation`, `proposer`, `chooser`, `mechanism`, `replications` and
//! `seed`; everything else has a default. Example:
//!
//! ```json
//! {
//!   "teams": ["AUS", "NZL"],
//!   "conditions": { "true_advantage": -50, "score_mean": 160, "score_sd": 40 },
//!   "valuation": { "kind": "logistic_win_prob", "sigma": 30, "noise_sd": 0 },
//!   "proposer": { "kind": "strategic", "belief": { "turn": "bowl_first", "s": 20, "confidence": 1 } },
//!   "chooser": { "kind": "habitual", "turn": "bowl_first", "s": 20 },
//!   "mechanism": "tpc",
//!   "replications": 10000,
//!   "seed": 7
//! }
//! ```

use alloc::string::{String, ToString};

use serde::{Deserialize, Serialize};

use crate::baselines::{Mechanism, MechanismKind};
use crate::error::{Error, Result};
use crate::mechanism::{BonusRounding, TeamId};
use crate::rng::{MAX_REPLICATIONS, MAX_SERIES_LENGTH};
use crate::strategies::{ChooserStrategy, ProposerStrategy};
use crate::valuation::{MatchConditions, ValuationModel, T20_SIGMA};

pub const DEFAULT_SCORE_MEAN: f64 = 160.0;
pub const DEFAULT_ENVY_TOLERANCE: f64 = 1e-6;

fn default_teams() -> [TeamId; 2] {
    [TeamId::new("AUS"), TeamId::new("NZL")]
}
fn default_score_mean() -> f64 {
    DEFAULT_SCORE_MEAN
}
fn default_series_length() -> u64 {
    1
}
fn default_envy_tolerance() -> f64 {
    DEFAULT_ENVY_TOLERANCE
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionsConfig {
    pub true_advantage: f64,
    #[serde(default = "default_score_mean")]
    pub score_mean: f64,
    pub score_sd: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    LinearRuns,
    #[default]
    LogisticWinProb,
    ScoreSimulation,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValuationConfig {
    #[serde(default)]
    pub kind: ModelKind,
    /// Logistic scale, or the score sd for `score_simulation` (defaults to
    /// the match's score sd). Ignored by `linear_runs`.
    #[serde(default)]
    pub sigma: Option<f64>,
    #[serde(default)]
    pub noise_sd: f64,
}

impl ValuationConfig {
    pub fn model(&self, score_sd: f64) -> ValuationModel {
        match self.kind {
            ModelKind::LinearRuns => ValuationModel::LinearRuns,
            ModelKind::LogisticWinProb => ValuationModel::LogisticWinProb {
                sigma: self.sigma.unwrap_or(T20_SIGMA),
            },
            ModelKind::ScoreSimulation => ValuationModel::ScoreSimulation {
                score_sd: self.sigma.unwrap_or(score_sd),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeakerDecidesConfig {
    /// Ranking positions aligned with `teams`; 1 is the strongest.
    pub rankings: [u32; 2],
    #[serde(default)]
    pub home: Option<TeamId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default = "default_teams")]
    pub teams: [TeamId; 2],
    pub conditions: ConditionsConfig,
    #[serde(default)]
    pub valuation: ValuationConfig,
    #[serde(default)]
    pub proposer: ProposerStrategy,
    #[serde(default)]
    pub chooser: ChooserStrategy,
    pub mechanism: MechanismKind,
    pub replications: u64,
    pub seed: u64,
    /// Matches per replication; alternation swaps the first batter within
    /// a series.
    #[serde(default = "default_series_length")]
    pub series_length: u64,
    #[serde(default)]
    pub bonus_rounding: BonusRounding,
    /// Utility shortfall below which a party is not counted as envious.
    #[serde(default = "default_envy_tolerance")]
    pub envy_tolerance: f64,
    #[serde(default)]
    pub weaker_decides: Option<WeakerDecidesConfig>,
}

impl ScenarioConfig {
    /// A one-match scenario with defaults everywhere else.
    pub fn new(mechanism: MechanismKind, true_advantage: f64, score_sd: f64, replications: u64, seed: u64) -> Self {
        Self {
            name: None,
            teams: default_teams(),
            conditions: ConditionsConfig {
                true_advantage,
                score_mean: DEFAULT_SCORE_MEAN,
                score_sd,
            },
            valuation: ValuationConfig::default(),
            proposer: ProposerStrategy::Truthful,
            chooser: ChooserStrategy::Rational,
            mechanism,
            replications,
            seed,
            series_length: 1,
            bonus_rounding: BonusRounding::WholeRuns,
            envy_tolerance: DEFAULT_ENVY_TOLERANCE,
            weaker_decides: None,
        }
    }

    pub fn match_conditions(&self) -> MatchConditions {
        MatchConditions {
            true_advantage: self.conditions.true_advantage,
            advantage_noise_sd: self.valuation.noise_sd,
            score_mean: self.conditions.score_mean,
            score_sd: self.conditions.score_sd,
        }
    }

    pub fn model(&self) -> ValuationModel {
        self.valuation.model(self.conditions.score_sd)
    }

    pub fn validate(&self) -> Result<()> {
        if self.teams[0] == self.teams[1] {
            return Err(Error::config("teams", "the two teams must differ"));
        }
        self.match_conditions().validate()?;
        if let Some(sigma) = self.valuation.sigma {
            if !(sigma.is_finite() && sigma > 0.0) {
                return Err(Error::config("valuation.sigma", "must be positive"));
            }
        }
        self.model()
            .validate()
            .map_err(|e| Error::config("valuation", e.to_string()))?;
        self.proposer
            .validate()
            .map_err(|e| Error::config("proposer", e.to_string()))?;
        self.chooser
            .validate()
            .map_err(|e| Error::config("chooser", e.to_string()))?;
        if self.replications == 0 {
            return Err(Error::config("replications", "must be at least 1"));
        }
        if self.replications > MAX_REPLICATIONS {
            return Err(Error::config("replications", alloc::format!("must be below {MAX_REPLICATIONS}")));
        }
        if !(1..=MAX_SERIES_LENGTH).contains(&self.series_length) {
            return Err(Error::config(
                "series_length",
                alloc::format!("must be between 1 and {MAX_SERIES_LENGTH}"),
            ));
        }
        if !(self.envy_tolerance.is_finite() && self.envy_tolerance >= 0.0) {
            return Err(Error::config("envy_tolerance", "must be non-negative"));
        }
        if self.mechanism == MechanismKind::WeakerDecides {
            let Some(wd) = &self.weaker_decides else {
                return Err(Error::config("weaker_decides", "required when mechanism is weaker_decides"));
            };
            if let Some(home) = &wd.home {
                if !self.teams.contains(home) {
                    return Err(Error::config("weaker_decides.home", "must be one of the two teams"));
                }
            }
            if wd.rankings[0] == wd.rankings[1] && wd.home.is_none() {
                return Err(Error::config(
                    "weaker_decides.rankings",
                    "equal rankings on a neutral ground leave no one to decide",
                ));
            }
        }
        Ok(())
    }

    /// The mechanism this scenario runs.
    pub fn mechanism_spec(&self) -> Result<Mechanism> {
        Ok(match self.mechanism {
            MechanismKind::PlainToss => Mechanism::PlainToss,
            MechanismKind::Tpc => Mechanism::Tpc {
                proposer: self.proposer,
                chooser: self.chooser,
                rounding: self.bonus_rounding,
            },
            MechanismKind::Alternation => Mechanism::Alternation,
            MechanismKind::WeakerDecides => {
                let wd = self
                    .weaker_decides
                    .as_ref()
                    .ok_or_else(|| Error::config("weaker_decides", "required when mechanism is weaker_decides"))?;
                Mechanism::WeakerDecides {
                    rankings: wd.rankings,
                    home: wd.home.clone(),
                }
            }
            MechanismKind::Auction => Mechanism::Auction,
        })
    }

    /// Same scenario, different mechanism.
    pub fn with_mechanism(&self, mechanism: MechanismKind) -> Self {
        Self {
            mechanism,
            ..self.clone()
        }
    }
}
