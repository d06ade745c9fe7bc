//! The toss, propose and choose protocol.
//!
//! [`TpcRun`] is the state machine shared by one-shot runs, the Monte Carlo
//! harness and the live session service. It only moves forward:
//! `Created → Tossed → Proposed → Complete`, appending one [`Event`] per
//! step.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{ProtocolRng, SeedTrace};
use crate::strategies::{ChooserStrategy, ProposerStrategy};
use crate::valuation::{self, ValuationView};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TeamId(String);

impl TeamId {
    pub fn new(label: impl Into<String>) -> Self {
        TeamId(label.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for TeamId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for TeamId {
    fn from(label: &str) -> Self {
        TeamId(label.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Turn {
    BatFirst,
    BowlFirst,
}

impl Turn {
    pub fn opposite(self) -> Turn {
        match self {
            Turn::BatFirst => Turn::BowlFirst,
            Turn::BowlFirst => Turn::BatFirst,
        }
    }

    /// The better turn under an advantage `a` (batting-first convention);
    /// batting first on a level pitch.
    pub fn advantageous_for(advantage: f64) -> Turn {
        if advantage >= 0.0 {
            Turn::BatFirst
        } else {
            Turn::BowlFirst
        }
    }
}

impl fmt::Display for Turn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Turn::BatFirst => "bat first",
            Turn::BowlFirst => "bowl first",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    /// Won the toss; chooses.
    Lucky,
    /// Lost the toss; proposes.
    Unlucky,
}

/// A turn together with the bonus runs that come with it. A negative
/// `bonus_delta` is conceded to the opponent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptionBundle {
    pub turn: Turn,
    pub bonus_delta: f64,
}

impl OptionBundle {
    pub fn new(turn: Turn, bonus_delta: f64) -> Self {
        Self { turn, bonus_delta }
    }
}

/// Option 1 or option 2 of a proposal. Serialized as the integer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum OptionIndex {
    First,
    Second,
}

impl TryFrom<u8> for OptionIndex {
    type Error = Error;

    fn try_from(value: u8) -> Result<Self> {
        match value {
            1 => Ok(OptionIndex::First),
            2 => Ok(OptionIndex::Second),
            other => Err(Error::ProtocolViolation(alloc::format!(
                "option must be 1 or 2, got {other}"
            ))),
        }
    }
}

impl From<OptionIndex> for u8 {
    fn from(index: OptionIndex) -> u8 {
        match index {
            OptionIndex::First => 1,
            OptionIndex::Second => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Proposal {
    pub bonus: f64,
    pub advantageous_turn: Turn,
    /// Take the advantageous turn, concede `bonus`.
    pub option1: OptionBundle,
    /// Take the other turn, receive `bonus`.
    pub option2: OptionBundle,
}

impl Proposal {
    pub fn option(&self, index: OptionIndex) -> &OptionBundle {
        match index {
            OptionIndex::First => &self.option1,
            OptionIndex::Second => &self.option2,
        }
    }
}

pub fn build_proposal(bonus: f64, advantageous_turn: Turn) -> Result<Proposal> {
    if !bonus.is_finite() {
        return Err(Error::InvalidProposal(alloc::format!("bonus must be finite, got {bonus}")));
    }
    if bonus < 0.0 {
        return Err(Error::InvalidProposal(alloc::format!(
            "bonus must be non-negative, got {bonus}; name the other turn as advantageous instead"
        )));
    }
    // `0.0 - b` rather than `-b` keeps a zero bonus at +0.0.
    Ok(Proposal {
        bonus,
        advantageous_turn,
        option1: OptionBundle::new(advantageous_turn, 0.0 - bonus),
        option2: OptionBundle::new(advantageous_turn.opposite(), bonus),
    })
}

/// How a real-valued bonus becomes scoreboard runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BonusRounding {
    /// Nearest whole run, ties to even.
    #[default]
    WholeRuns,
    Exact,
}

impl BonusRounding {
    pub fn apply(self, bonus: f64) -> f64 {
        match self {
            BonusRounding::WholeRuns => libm::rint(bonus) + 0.0,
            BonusRounding::Exact => bonus,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TossOutcome {
    pub lucky: TeamId,
    pub unlucky: TeamId,
    /// 0: the first-listed team won the toss.
    pub coin_draw: u8,
    pub seed_trace: SeedTrace,
}

impl TossOutcome {
    /// The team order the toss was called with.
    pub fn teams(&self) -> [TeamId; 2] {
        if self.coin_draw == 0 {
            [self.lucky.clone(), self.unlucky.clone()]
        } else {
            [self.unlucky.clone(), self.lucky.clone()]
        }
    }

    pub fn role_of(&self, team: &TeamId) -> Option<Role> {
        if *team == self.lucky {
            Some(Role::Lucky)
        } else if *team == self.unlucky {
            Some(Role::Unlucky)
        } else {
            None
        }
    }
}

/// Flip the coin. Bit 0 hands the toss to `team_a`.
pub fn run_toss(team_a: &TeamId, team_b: &TeamId, rng: &mut ProtocolRng) -> Result<TossOutcome> {
    if team_a == team_b {
        return Err(Error::InvalidMatch(team_a.to_string()));
    }
    let seed_trace = rng.trace();
    let coin_draw = rng.coin_bit();
    let (lucky, unlucky) = if coin_draw == 0 {
        (team_a.clone(), team_b.clone())
    } else {
        (team_b.clone(), team_a.clone())
    };
    Ok(TossOutcome {
        lucky,
        unlucky,
        coin_draw,
        seed_trace,
    })
}

/// Who ends up with which turn and bonus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    /// The team whose bundle the deciding step selected.
    pub chooser: TeamId,
    pub other: TeamId,
    pub chosen: OptionBundle,
    pub complement: OptionBundle,
    /// `None` when no bonus changes hands.
    pub bonus_recipient: Option<TeamId>,
    pub bonus_runs: f64,
}

impl Allocation {
    pub fn new(chooser: TeamId, other: TeamId, chosen: OptionBundle, complement: OptionBundle) -> Result<Self> {
        if chooser == other {
            return Err(Error::InvalidMatch(chooser.to_string()));
        }
        if chosen.turn == complement.turn {
            return Err(Error::ProtocolViolation("both bundles hold the same turn".into()));
        }
        if chosen.bonus_delta + complement.bonus_delta != 0.0 {
            return Err(Error::ProtocolViolation(alloc::format!(
                "bonus deltas {} and {} do not cancel",
                chosen.bonus_delta,
                complement.bonus_delta
            )));
        }
        let bonus_recipient = if chosen.bonus_delta > 0.0 {
            Some(chooser.clone())
        } else if complement.bonus_delta > 0.0 {
            Some(other.clone())
        } else {
            None
        };
        Ok(Self {
            bonus_runs: chosen.bonus_delta.abs(),
            chooser,
            other,
            chosen,
            complement,
            bonus_recipient,
        })
    }

    /// Both sides play their turn with no bonus.
    pub fn unbonused(chooser: TeamId, other: TeamId, chooser_turn: Turn) -> Result<Self> {
        Self::new(
            chooser,
            other,
            OptionBundle::new(chooser_turn, 0.0),
            OptionBundle::new(chooser_turn.opposite(), 0.0),
        )
    }

    pub fn first_batter(&self) -> &TeamId {
        if self.chosen.turn == Turn::BatFirst {
            &self.chooser
        } else {
            &self.other
        }
    }

    pub fn second_batter(&self) -> &TeamId {
        if self.chosen.turn == Turn::BatFirst {
            &self.other
        } else {
            &self.chooser
        }
    }

    pub fn bundle_of(&self, team: &TeamId) -> Option<&OptionBundle> {
        if *team == self.chooser {
            Some(&self.chosen)
        } else if *team == self.other {
            Some(&self.complement)
        } else {
            None
        }
    }

    pub fn turn_of(&self, team: &TeamId) -> Option<Turn> {
        self.bundle_of(team).map(|b| b.turn)
    }

    /// Signed bonus credited to `team` (zero for a team outside the match).
    pub fn bonus_for(&self, team: &TeamId) -> f64 {
        self.bundle_of(team).map_or(0.0, |b| b.bonus_delta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvyReport {
    pub proposer_envies: bool,
    pub chooser_envies: bool,
    /// Proposer's utility of its own bundle minus the chooser's bundle.
    pub proposer_gap: f64,
    pub chooser_gap: f64,
}

impl EnvyReport {
    pub fn any(&self) -> bool {
        self.proposer_envies || self.chooser_envies
    }
}

/// Each party compares its own bundle with the other's under its own view.
/// The proposer is the party that did not choose.
pub fn check_envy_free(
    allocation: &Allocation,
    proposer_view: &ValuationView,
    chooser_view: &ValuationView,
    tolerance: f64,
) -> Result<EnvyReport> {
    let proposer_gap =
        valuation::utility(&allocation.complement, proposer_view)? - valuation::utility(&allocation.chosen, proposer_view)?;
    let chooser_gap =
        valuation::utility(&allocation.chosen, chooser_view)? - valuation::utility(&allocation.complement, chooser_view)?;
    Ok(EnvyReport {
        proposer_envies: proposer_gap < -tolerance,
        chooser_envies: chooser_gap < -tolerance,
        proposer_gap,
        chooser_gap,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Created,
    Tossed,
    Proposed,
    /// Transient: a choice has been recorded and the allocation is being
    /// finalized.
    Chosen,
    Complete,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    Tossed {
        teams: [TeamId; 2],
        coin_draw: u8,
        lucky: TeamId,
        seed_trace: SeedTrace,
    },
    Proposed {
        by: TeamId,
        bonus: f64,
        /// The real-valued bonus before rounding, when a solver produced it.
        solved_bonus: Option<f64>,
        advantageous_turn: Turn,
    },
    Chosen {
        by: TeamId,
        option: OptionIndex,
    },
}

/// A finished protocol run. Serializes as
/// `{toss, proposal, allocation, events[]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub toss: TossOutcome,
    pub proposal: Proposal,
    pub allocation: Allocation,
    pub events: Vec<Event>,
}

impl Transcript {
    pub fn chosen_option(&self) -> Option<OptionIndex> {
        self.events.iter().find_map(|e| match e {
            Event::Chosen { option, .. } => Some(*option),
            _ => None,
        })
    }

    /// Re-execute the run from its recorded seed and decisions, and check
    /// it reproduces this transcript exactly.
    pub fn replay(&self) -> Result<Transcript> {
        let mismatch = |what: &str| Error::ReplayMismatch(what.to_string());
        let [tossed, proposed, chosen] = match self.events.as_slice() {
            [a, b, c] => [a, b, c],
            _ => return Err(mismatch("a transcript holds exactly three events")),
        };
        let Event::Tossed { teams, seed_trace, .. } = tossed else {
            return Err(mismatch("first event must be the toss"));
        };
        let Event::Proposed {
            by: proposer,
            bonus,
            solved_bonus,
            advantageous_turn,
        } = proposed
        else {
            return Err(mismatch("second event must be the proposal"));
        };
        let Event::Chosen { by: chooser, option } = chosen else {
            return Err(mismatch("third event must be the choice"));
        };

        let mut run = TpcRun::new(teams[0].clone(), teams[1].clone())?;
        run.toss(&mut ProtocolRng::from_trace(*seed_trace))?;
        run.propose(proposer, *bonus, *advantageous_turn, *solved_bonus)?;
        run.choose(chooser, *option)?;
        let replayed = run
            .transcript()
            .ok_or_else(|| mismatch("replayed run did not complete"))?;
        if replayed != *self {
            return Err(mismatch("replayed transcript differs from the recorded one"));
        }
        Ok(replayed)
    }
}

/// The protocol state machine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TpcRun {
    teams: [TeamId; 2],
    phase: Phase,
    toss: Option<TossOutcome>,
    proposal: Option<Proposal>,
    allocation: Option<Allocation>,
    events: Vec<Event>,
}

impl TpcRun {
    pub fn new(team_a: TeamId, team_b: TeamId) -> Result<Self> {
        if team_a == team_b {
            return Err(Error::InvalidMatch(team_a.to_string()));
        }
        Ok(Self {
            teams: [team_a, team_b],
            phase: Phase::Created,
            toss: None,
            proposal: None,
            allocation: None,
            events: Vec::new(),
        })
    }

    pub fn teams(&self) -> &[TeamId; 2] {
        &self.teams
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn toss_outcome(&self) -> Option<&TossOutcome> {
        self.toss.as_ref()
    }

    pub fn proposal(&self) -> Option<&Proposal> {
        self.proposal.as_ref()
    }

    pub fn allocation(&self) -> Option<&Allocation> {
        self.allocation.as_ref()
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    /// The team's role, once the toss has assigned one.
    pub fn role_of(&self, team: &TeamId) -> Option<Role> {
        self.toss.as_ref().and_then(|t| t.role_of(team))
    }

    pub fn toss(&mut self, rng: &mut ProtocolRng) -> Result<&TossOutcome> {
        if self.phase != Phase::Created {
            return Err(Error::OutOfOrder {
                action: "toss",
                phase: self.phase,
            });
        }
        let outcome = run_toss(&self.teams[0], &self.teams[1], rng)?;
        self.events.push(Event::Tossed {
            teams: self.teams.clone(),
            coin_draw: outcome.coin_draw,
            lucky: outcome.lucky.clone(),
            seed_trace: outcome.seed_trace,
        });
        self.phase = Phase::Tossed;
        Ok(self.toss.insert(outcome))
    }

    fn require_role(&self, team: &TeamId, action: &'static str, expected: Role) -> Result<()> {
        if !self.teams.contains(team) {
            return Err(Error::UnknownTeam(team.to_string()));
        }
        match self.role_of(team) {
            None => Err(Error::OutOfOrder {
                action,
                phase: self.phase,
            }),
            Some(role) if role != expected => Err(Error::WrongRole { action, expected }),
            Some(_) => Ok(()),
        }
    }

    /// Record the unlucky captain's proposal. `bonus` is taken as-is;
    /// rounding to scoreboard runs is the caller's call.
    pub fn propose(
        &mut self,
        by: &TeamId,
        bonus: f64,
        advantageous_turn: Turn,
        solved_bonus: Option<f64>,
    ) -> Result<&Proposal> {
        self.require_role(by, "propose", Role::Unlucky)?;
        if self.phase != Phase::Tossed {
            return Err(Error::OutOfOrder {
                action: "propose",
                phase: self.phase,
            });
        }
        let proposal = build_proposal(bonus, advantageous_turn)?;
        self.events.push(Event::Proposed {
            by: by.clone(),
            bonus,
            solved_bonus,
            advantageous_turn,
        });
        self.phase = Phase::Proposed;
        Ok(self.proposal.insert(proposal))
    }

    pub fn choose(&mut self, by: &TeamId, option: OptionIndex) -> Result<&Allocation> {
        self.require_role(by, "choose", Role::Lucky)?;
        if self.phase != Phase::Proposed {
            return Err(Error::OutOfOrder {
                action: "choose",
                phase: self.phase,
            });
        }
        let (Some(toss), Some(proposal)) = (&self.toss, &self.proposal) else {
            return Err(Error::ProtocolViolation("proposed phase without a proposal".into()));
        };
        let chosen = *proposal.option(option);
        let complement = *proposal.option(match option {
            OptionIndex::First => OptionIndex::Second,
            OptionIndex::Second => OptionIndex::First,
        });
        let allocation = Allocation::new(toss.lucky.clone(), toss.unlucky.clone(), chosen, complement)?;
        self.events.push(Event::Chosen { by: by.clone(), option });
        self.phase = Phase::Chosen;
        self.allocation = Some(allocation);
        self.phase = Phase::Complete;
        Ok(self.allocation.as_ref().expect("allocation just recorded"))
    }

    pub fn transcript(&self) -> Option<Transcript> {
        if self.phase != Phase::Complete {
            return None;
        }
        Some(Transcript {
            toss: self.toss.clone()?,
            proposal: self.proposal.clone()?,
            allocation: self.allocation.clone()?,
            events: self.events.clone(),
        })
    }
}

/// Run the whole protocol with automated captains.
///
/// `views[i]` is the private view of `teams[i]`; the toss decides which of
/// them proposes and which chooses.
pub fn execute_tpc(
    teams: [TeamId; 2],
    views: &[ValuationView; 2],
    proposer_policy: &ProposerStrategy,
    chooser_policy: &ChooserStrategy,
    rounding: BonusRounding,
    rng: &mut ProtocolRng,
) -> Result<Transcript> {
    if views[0].team != teams[0] || views[1].team != teams[1] {
        return Err(Error::InvalidParameters("views must be listed in team order".into()));
    }
    let [team_a, team_b] = teams;
    let mut run = TpcRun::new(team_a, team_b)?;
    let toss = run.toss(rng)?.clone();
    let view_of = |team: &TeamId| if views[0].team == *team { &views[0] } else { &views[1] };

    let decision = proposer_policy.propose(view_of(&toss.unlucky))?;
    if !(decision.bonus.is_finite() && decision.bonus >= 0.0) {
        return Err(Error::ProtocolViolation(alloc::format!(
            "proposer returned bonus {}",
            decision.bonus
        )));
    }
    let bonus = rounding.apply(decision.bonus);
    run.propose(&toss.unlucky, bonus, decision.advantageous_turn, Some(decision.bonus))?;

    let proposal = run.proposal().expect("proposal recorded").clone();
    let option = chooser_policy.choose(&proposal, view_of(&toss.lucky))?;
    run.choose(&toss.lucky, option)?;
    run.transcript()
        .ok_or_else(|| Error::ProtocolViolation("run did not complete".into()))
}
