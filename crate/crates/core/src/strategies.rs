//! Captains' policies.
//!
//! Proposers: truthful (balance the bundles at their own indifference
//! point), strategic (best response to a belief about the chooser) and fixed
//! (a stated bonus, e.g. the traditional zero). Choosers: rational (argmax
//! of own utility) and habitual (stick with a favourite turn unless it costs
//! more than a stubbornness allowance).

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mechanism::{build_proposal, OptionIndex, Proposal, Turn};
use crate::valuation::{indifference_bonus, ValuationView, DEFAULT_SOLVER_TOLERANCE};

/// Default spacing of the strategic bonus grid, in runs.
pub const DEFAULT_GRID_STEP: f64 = 1.0;
/// Extra runs searched beyond `|â| + s`.
pub const STRATEGIC_MARGIN: f64 = 20.0;

fn default_grid_step() -> f64 {
    DEFAULT_GRID_STEP
}

/// What a proposer believes about the chooser.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChooserBelief {
    #[serde(rename = "turn")]
    pub bias_turn: Turn,
    /// Runs beyond indifference the chooser will concede to keep its turn.
    #[serde(rename = "s")]
    pub stubbornness: f64,
    /// Probability the chooser really is biased; otherwise it is rational.
    pub confidence: f64,
}

impl ChooserBelief {
    pub fn validate(&self) -> Result<()> {
        if !(self.stubbornness.is_finite() && self.stubbornness >= 0.0) {
            return Err(Error::InvalidParameters(alloc::format!(
                "believed stubbornness must be non-negative, got {}",
                self.stubbornness
            )));
        }
        if !(0.0..=1.0).contains(&self.confidence) {
            return Err(Error::InvalidParameters(alloc::format!(
                "belief confidence must be in [0, 1], got {}",
                self.confidence
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProposerStrategy {
    #[default]
    Truthful,
    Strategic {
        belief: ChooserBelief,
        #[serde(default = "default_grid_step")]
        grid_step: f64,
    },
    /// Propose a stated bonus with the truthfully judged advantageous turn.
    Fixed { bonus: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChooserStrategy {
    #[default]
    Rational,
    Habitual {
        turn: Turn,
        #[serde(rename = "s")]
        stubbornness: f64,
    },
}

/// A proposer's real-valued output, before rounding to scoreboard runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProposalDecision {
    pub bonus: f64,
    pub advantageous_turn: Turn,
}

impl ProposerStrategy {
    pub fn validate(&self) -> Result<()> {
        match self {
            ProposerStrategy::Truthful => Ok(()),
            ProposerStrategy::Strategic { belief, grid_step } => {
                belief.validate()?;
                if !(grid_step.is_finite() && *grid_step > 0.0) {
                    return Err(Error::InvalidParameters(alloc::format!(
                        "grid step must be positive, got {grid_step}"
                    )));
                }
                Ok(())
            }
            ProposerStrategy::Fixed { bonus } if bonus.is_finite() && *bonus >= 0.0 => Ok(()),
            ProposerStrategy::Fixed { bonus } => Err(Error::InvalidParameters(alloc::format!(
                "fixed bonus must be non-negative, got {bonus}"
            ))),
        }
    }

    pub fn propose(&self, view: &ValuationView) -> Result<ProposalDecision> {
        match self {
            ProposerStrategy::Truthful => truthful_propose(view),
            ProposerStrategy::Strategic { belief, grid_step } => strategic_propose(view, belief, *grid_step),
            ProposerStrategy::Fixed { bonus } => Ok(ProposalDecision {
                bonus: *bonus,
                advantageous_turn: view.advantageous_turn(),
            }),
        }
    }
}

impl ChooserStrategy {
    pub fn validate(&self) -> Result<()> {
        match self {
            ChooserStrategy::Rational => Ok(()),
            ChooserStrategy::Habitual { stubbornness, .. } if stubbornness.is_finite() && *stubbornness >= 0.0 => {
                Ok(())
            }
            ChooserStrategy::Habitual { stubbornness, .. } => Err(Error::InvalidParameters(alloc::format!(
                "stubbornness must be non-negative, got {stubbornness}"
            ))),
        }
    }

    pub fn choose(&self, proposal: &Proposal, view: &ValuationView) -> Result<OptionIndex> {
        match *self {
            ChooserStrategy::Rational => rational_choose(proposal, view),
            ChooserStrategy::Habitual { turn, stubbornness } => habitual_choose(proposal, view, turn, stubbornness),
        }
    }
}

pub fn truthful_propose(view: &ValuationView) -> Result<ProposalDecision> {
    let solved = indifference_bonus(view, DEFAULT_SOLVER_TOLERANCE)?;
    Ok(ProposalDecision {
        bonus: solved.bonus,
        advantageous_turn: solved.advantageous_turn,
    })
}

/// Best response to `belief`, assuming the chooser shares the proposer's
/// perceived advantage.
///
/// The proposer's expected utility is a confidence-weighted mix of what it
/// keeps against a habitual chooser and against a rational one. It is
/// searched on a grid of `grid_step` runs over `[0, |â| + s + margin]`,
/// together with the points where either chooser type switches options
/// (`b*`, `b* ± s`), since the optimum sits on one of those kinks. Ties go
/// to the smaller bonus.
pub fn strategic_propose(view: &ValuationView, belief: &ChooserBelief, grid_step: f64) -> Result<ProposalDecision> {
    belief.validate()?;
    if !(grid_step.is_finite() && grid_step > 0.0) {
        return Err(Error::InvalidParameters(alloc::format!(
            "grid step must be positive, got {grid_step}"
        )));
    }
    let truthful = indifference_bonus(view, DEFAULT_SOLVER_TOLERANCE)?;
    let turn = truthful.advantageous_turn;
    let upper = truthful.bonus + belief.stubbornness + STRATEGIC_MARGIN;
    let steps = libm::floor(upper / grid_step) as u64;

    let mut candidates: Vec<f64> = (0..=steps).map(|k| k as f64 * grid_step).collect();
    for kink in [
        truthful.bonus,
        truthful.bonus + belief.stubbornness,
        truthful.bonus - belief.stubbornness,
    ] {
        // The kinks come from a bisection, so also try a hair below each one
        // in case the solve landed just past the switching point.
        for b in [kink, kink - 2.0 * DEFAULT_SOLVER_TOLERANCE] {
            if (0.0..=upper).contains(&b) {
                candidates.push(b);
            }
        }
    }
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();

    let mut best: Option<(f64, f64)> = None;
    for b in candidates {
        let proposal = build_proposal(b, turn)?;
        let kept = |choice: OptionIndex| -> Result<f64> {
            let other = match choice {
                OptionIndex::First => OptionIndex::Second,
                OptionIndex::Second => OptionIndex::First,
            };
            view.utility(proposal.option(other))
        };
        let mut expected = 0.0;
        if belief.confidence > 0.0 {
            let choice = habitual_choose(&proposal, view, belief.bias_turn, belief.stubbornness)?;
            expected += belief.confidence * kept(choice)?;
        }
        if belief.confidence < 1.0 {
            expected += (1.0 - belief.confidence) * kept(rational_choose(&proposal, view)?)?;
        }
        if best.is_none_or(|(_, top)| expected > top) {
            best = Some((b, expected));
        }
    }
    let (bonus, _) = best.ok_or_else(|| Error::InvalidParameters("empty bonus grid".into()))?;
    Ok(ProposalDecision {
        bonus,
        advantageous_turn: turn,
    })
}

/// The better bundle under `view`; option 1 on an exact tie.
pub fn rational_choose(proposal: &Proposal, view: &ValuationView) -> Result<OptionIndex> {
    let first = view.utility(&proposal.option1)?;
    let second = view.utility(&proposal.option2)?;
    Ok(if second > first {
        OptionIndex::Second
    } else {
        OptionIndex::First
    })
}

/// Keep the bundle with `habit_turn` unless the other bundle is better by
/// more than `stubbornness` runs beyond indifference, i.e. unless
/// `u(habit + s) < u(other - s)`. At the boundary the habit wins. With zero
/// stubbornness this is [`rational_choose`], tie rule included.
pub fn habitual_choose(
    proposal: &Proposal,
    view: &ValuationView,
    habit_turn: Turn,
    stubbornness: f64,
) -> Result<OptionIndex> {
    if !(stubbornness.is_finite() && stubbornness >= 0.0) {
        return Err(Error::InvalidParameters(alloc::format!(
            "stubbornness must be non-negative, got {stubbornness}"
        )));
    }
    if stubbornness == 0.0 {
        return rational_choose(proposal, view);
    }
    let (habit, other) = if proposal.option1.turn == habit_turn {
        (OptionIndex::First, OptionIndex::Second)
    } else {
        (OptionIndex::Second, OptionIndex::First)
    };
    let habit_value = view
        .model
        .utility(view.effective_advantage(proposal.option(habit)) + stubbornness)?;
    let other_value = view
        .model
        .utility(view.effective_advantage(proposal.option(other)) - stubbornness)?;
    Ok(if habit_value >= other_value { habit } else { other })
}
