//! Alternatives to the toss, propose and choose method, plus a uniform way
//! to run any of the five mechanisms.

use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mechanism::{execute_tpc, run_toss, Allocation, BonusRounding, OptionBundle, TeamId, TossOutcome, Transcript, Turn};
use crate::rng::ProtocolRng;
use crate::strategies::{ChooserStrategy, ProposerStrategy};
use crate::valuation::{indifference_bonus, ValuationView, DEFAULT_SOLVER_TOLERANCE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MechanismKind {
    PlainToss,
    Tpc,
    Alternation,
    WeakerDecides,
    Auction,
}

impl MechanismKind {
    pub const ALL: [MechanismKind; 5] = [
        MechanismKind::PlainToss,
        MechanismKind::Tpc,
        MechanismKind::Alternation,
        MechanismKind::WeakerDecides,
        MechanismKind::Auction,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MechanismKind::PlainToss => "plain_toss",
            MechanismKind::Tpc => "tpc",
            MechanismKind::Alternation => "alternation",
            MechanismKind::WeakerDecides => "weaker_decides",
            MechanismKind::Auction => "auction",
        }
    }
}

impl fmt::Display for MechanismKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MechanismKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MechanismKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidParameters(alloc::format!("unknown mechanism {s:?}")))
    }
}

/// Progress through a series, for alternation.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeriesState {
    pub match_index: u64,
    pub last_first_batter: Option<TeamId>,
}

impl SeriesState {
    pub fn new() -> Self {
        Self::default()
    }
}

/// A sealed bid: runs conceded for the right to take `preferred_turn`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bid {
    pub team: TeamId,
    pub bid_runs: f64,
    pub preferred_turn: Turn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuctionOutcome {
    pub allocation: Allocation,
    pub bids: [Bid; 2],
    pub tie_broken: bool,
}

impl AuctionOutcome {
    pub fn winning_bid(&self) -> f64 {
        self.allocation.bonus_runs
    }

    /// Runs the winner paid beyond what its turn was really worth:
    /// the bid minus the true advantage of the turn it took.
    pub fn winner_regret(&self, true_advantage: f64) -> f64 {
        let realized = match self.allocation.chosen.turn {
            Turn::BatFirst => true_advantage,
            Turn::BowlFirst => -true_advantage,
        };
        self.winning_bid() - realized
    }
}

fn view_of<'a>(views: &'a [ValuationView; 2], team: &TeamId) -> &'a ValuationView {
    if views[0].team == *team {
        &views[0]
    } else {
        &views[1]
    }
}

fn check_views(teams: &[TeamId; 2], views: &[ValuationView; 2]) -> Result<()> {
    if teams[0] == teams[1] {
        return Err(Error::InvalidMatch(teams[0].as_str().into()));
    }
    if views[0].team != teams[0] || views[1].team != teams[1] {
        return Err(Error::InvalidParameters("views must be listed in team order".into()));
    }
    Ok(())
}

/// The turn a rational captain picks when no bonus is on offer; batting
/// first when indifferent.
fn preferred_unbonused_turn(view: &ValuationView) -> Result<Turn> {
    let bat = view.utility(&OptionBundle::new(Turn::BatFirst, 0.0))?;
    let bowl = view.utility(&OptionBundle::new(Turn::BowlFirst, 0.0))?;
    Ok(if bowl > bat { Turn::BowlFirst } else { Turn::BatFirst })
}

fn other_team<'a>(teams: &'a [TeamId; 2], team: &TeamId) -> &'a TeamId {
    if teams[0] == *team {
        &teams[1]
    } else {
        &teams[0]
    }
}

/// The traditional toss: the winner picks a turn, no bonus.
pub fn plain_toss(
    teams: &[TeamId; 2],
    views: &[ValuationView; 2],
    rng: &mut ProtocolRng,
) -> Result<(TossOutcome, Allocation)> {
    check_views(teams, views)?;
    let toss = run_toss(&teams[0], &teams[1], rng)?;
    let turn = preferred_unbonused_turn(view_of(views, &toss.lucky))?;
    let allocation = Allocation::unbonused(toss.lucky.clone(), toss.unlucky.clone(), turn)?;
    Ok((toss, allocation))
}

/// Toss for the first match of a series, then swap who bats first.
pub fn alternation(
    teams: &[TeamId; 2],
    series: &mut SeriesState,
    views: &[ValuationView; 2],
    rng: &mut ProtocolRng,
) -> Result<(Option<TossOutcome>, Allocation)> {
    check_views(teams, views)?;
    let (toss, allocation) = match &series.last_first_batter {
        None => {
            let (toss, allocation) = plain_toss(teams, views, rng)?;
            (Some(toss), allocation)
        }
        Some(last) => {
            if !teams.contains(last) {
                return Err(Error::UnknownTeam(last.as_str().into()));
            }
            let batter = other_team(teams, last).clone();
            (None, Allocation::unbonused(batter, last.clone(), Turn::BatFirst)?)
        }
    };
    series.last_first_batter = Some(allocation.first_batter().clone());
    series.match_index += 1;
    Ok((toss, allocation))
}

/// The lower-ranked team decides; on equal ranks the touring team does.
///
/// `rankings[i]` is the ranking position of `teams[i]`, 1 being the
/// strongest.
pub fn weaker_decides(
    teams: &[TeamId; 2],
    rankings: [u32; 2],
    home: Option<&TeamId>,
    views: &[ValuationView; 2],
) -> Result<Allocation> {
    check_views(teams, views)?;
    if let Some(home) = home {
        if !teams.contains(home) {
            return Err(Error::UnknownTeam(home.as_str().into()));
        }
    }
    let decider = match (rankings[0].cmp(&rankings[1]), home) {
        (core::cmp::Ordering::Greater, _) => &teams[0],
        (core::cmp::Ordering::Less, _) => &teams[1],
        (core::cmp::Ordering::Equal, Some(home)) => other_team(teams, home),
        (core::cmp::Ordering::Equal, None) => return Err(Error::Undecidable),
    };
    let turn = preferred_unbonused_turn(view_of(views, decider))?;
    Allocation::unbonused(decider.clone(), other_team(teams, decider).clone(), turn)
}

/// First-price sealed-bid auction in runs.
///
/// Each team bids its perceived indifference bonus for its preferred turn,
/// rounded to whole runs. The higher bid takes its turn and concedes the
/// bid to the other side; equal bids go to a coin toss on `tie_rng`
/// (bit 0: `teams[0]`).
pub fn auction(teams: &[TeamId; 2], views: &[ValuationView; 2], tie_rng: &mut ProtocolRng) -> Result<AuctionOutcome> {
    check_views(teams, views)?;
    let bid = |view: &ValuationView| -> Result<Bid> {
        let solved = indifference_bonus(view, DEFAULT_SOLVER_TOLERANCE)?;
        Ok(Bid {
            team: view.team.clone(),
            bid_runs: BonusRounding::WholeRuns.apply(solved.bonus),
            preferred_turn: solved.advantageous_turn,
        })
    };
    let bids = [bid(&views[0])?, bid(&views[1])?];
    resolve_auction(bids, tie_rng)
}

/// Settle two sealed bids.
pub fn resolve_auction(bids: [Bid; 2], tie_rng: &mut ProtocolRng) -> Result<AuctionOutcome> {
    for b in &bids {
        if !(b.bid_runs.is_finite() && b.bid_runs >= 0.0) {
            return Err(Error::InvalidParameters(alloc::format!("bid {} is not a non-negative run count", b.bid_runs)));
        }
    }
    if bids[0].team == bids[1].team {
        return Err(Error::InvalidMatch(bids[0].team.as_str().into()));
    }
    let (winner, tie_broken) = if bids[0].bid_runs > bids[1].bid_runs {
        (0, false)
    } else if bids[1].bid_runs > bids[0].bid_runs {
        (1, false)
    } else {
        (usize::from(tie_rng.coin_bit()), true)
    };
    let (w, l) = (&bids[winner], &bids[1 - winner]);
    let allocation = Allocation::new(
        w.team.clone(),
        l.team.clone(),
        OptionBundle::new(w.preferred_turn, 0.0 - w.bid_runs),
        OptionBundle::new(w.preferred_turn.opposite(), w.bid_runs),
    )?;
    Ok(AuctionOutcome {
        allocation,
        bids,
        tie_broken,
    })
}

/// A fully parameterized mechanism.
#[derive(Debug, Clone, PartialEq)]
pub enum Mechanism {
    PlainToss,
    Tpc {
        proposer: ProposerStrategy,
        chooser: ChooserStrategy,
        rounding: BonusRounding,
    },
    Alternation,
    WeakerDecides {
        rankings: [u32; 2],
        home: Option<TeamId>,
    },
    Auction,
}

/// What running a mechanism once produced.
#[derive(Debug, Clone, PartialEq)]
pub struct MechanismOutcome {
    pub allocation: Allocation,
    pub toss: Option<TossOutcome>,
    pub transcript: Option<Transcript>,
    pub auction: Option<AuctionOutcome>,
}

impl MechanismOutcome {
    fn plain(allocation: Allocation, toss: Option<TossOutcome>) -> Self {
        Self {
            allocation,
            toss,
            transcript: None,
            auction: None,
        }
    }
}

impl Mechanism {
    pub fn kind(&self) -> MechanismKind {
        match self {
            Mechanism::PlainToss => MechanismKind::PlainToss,
            Mechanism::Tpc { .. } => MechanismKind::Tpc,
            Mechanism::Alternation => MechanismKind::Alternation,
            Mechanism::WeakerDecides { .. } => MechanismKind::WeakerDecides,
            Mechanism::Auction => MechanismKind::Auction,
        }
    }

    /// Run one match. `toss_rng` feeds any coin toss, `tie_rng` the auction
    /// tie-break; `series` only matters for alternation.
    pub fn run(
        &self,
        teams: &[TeamId; 2],
        views: &[ValuationView; 2],
        series: &mut SeriesState,
        toss_rng: &mut ProtocolRng,
        tie_rng: &mut ProtocolRng,
    ) -> Result<MechanismOutcome> {
        match self {
            Mechanism::PlainToss => {
                let (toss, allocation) = plain_toss(teams, views, toss_rng)?;
                Ok(MechanismOutcome::plain(allocation, Some(toss)))
            }
            Mechanism::Tpc {
                proposer,
                chooser,
                rounding,
            } => {
                let transcript = execute_tpc(teams.clone(), views, proposer, chooser, *rounding, toss_rng)?;
                Ok(MechanismOutcome {
                    allocation: transcript.allocation.clone(),
                    toss: Some(transcript.toss.clone()),
                    transcript: Some(transcript),
                    auction: None,
                })
            }
            Mechanism::Alternation => {
                let (toss, allocation) = alternation(teams, series, views, toss_rng)?;
                Ok(MechanismOutcome::plain(allocation, toss))
            }
            Mechanism::WeakerDecides { rankings, home } => {
                let allocation = weaker_decides(teams, *rankings, home.as_ref(), views)?;
                Ok(MechanismOutcome::plain(allocation, None))
            }
            Mechanism::Auction => {
                let outcome = auction(teams, views, tie_rng)?;
                Ok(MechanismOutcome {
                    allocation: outcome.allocation.clone(),
                    toss: None,
                    transcript: None,
                    auction: Some(outcome),
                })
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Purpose;
    use crate::valuation::ValuationModel;

    fn teams() -> [TeamId; 2] {
        [TeamId::new("AUS"), TeamId::new("NZL")]
    }

    fn shared(a: f64) -> [ValuationView; 2] {
        let m = ValuationModel::LogisticWinProb { sigma: 30.0 };
        let [x, y] = teams();
        [ValuationView::new(x, a, m), ValuationView::new(y, a, m)]
    }

    fn seed_with_bit(bit: u8) -> u64 {
        (0..).find(|&s| ProtocolRng::new(s).coin_bit() == bit).unwrap()
    }

    #[test]
    fn plain_toss_examples() {
        // AUS wins the toss on a 50-run bowl-first pitch.
        let (toss, alloc) = plain_toss(&teams(), &shared(-50.0), &mut ProtocolRng::new(seed_with_bit(0))).unwrap();
        assert_eq!(toss.lucky.as_str(), "AUS");
        assert_eq!(alloc.chooser.as_str(), "AUS");
        assert_eq!(alloc.chosen, OptionBundle::new(Turn::BowlFirst, 0.0));
        assert_eq!(alloc.bonus_runs, 0.0);
        assert_eq!(alloc.bonus_recipient, None);

        let (_, alloc) = plain_toss(&teams(), &shared(0.0), &mut ProtocolRng::new(5)).unwrap();
        assert_eq!(alloc.chosen.turn, Turn::BatFirst);
    }

    #[test]
    fn alternation_examples() {
        let mut series = SeriesState {
            match_index: 1,
            last_first_batter: Some(TeamId::new("AUS")),
        };
        let (toss, alloc) = alternation(&teams(), &mut series, &shared(30.0), &mut ProtocolRng::new(1)).unwrap();
        assert!(toss.is_none());
        assert_eq!(alloc.first_batter().as_str(), "NZL");
        assert_eq!(series.match_index, 2);

        // Five matches: each side bats first at least twice.
        let mut series = SeriesState::new();
        let mut aus_first = 0;
        for _ in 0..5 {
            let (_, alloc) = alternation(&teams(), &mut series, &shared(30.0), &mut ProtocolRng::new(11)).unwrap();
            aus_first += usize::from(alloc.first_batter().as_str() == "AUS");
        }
        assert!((2..=3).contains(&aus_first));
    }

    #[test]
    fn single_match_alternation_is_a_plain_toss() {
        for seed in 0..200 {
            let mut series = SeriesState::new();
            let (toss, alloc) = alternation(&teams(), &mut series, &shared(-40.0), &mut ProtocolRng::new(seed)).unwrap();
            let (plain_toss_outcome, plain) = plain_toss(&teams(), &shared(-40.0), &mut ProtocolRng::new(seed)).unwrap();
            assert_eq!(toss, Some(plain_toss_outcome));
            assert_eq!(alloc, plain);
        }
    }

    #[test]
    fn alternation_balances_even_series() {
        for k in 1..=6u32 {
            let mut series = SeriesState::new();
            let mut aus_first = 0;
            for _ in 0..2 * k {
                let (_, alloc) = alternation(&teams(), &mut series, &shared(10.0), &mut ProtocolRng::new(u64::from(k))).unwrap();
                aus_first += u32::from(alloc.first_batter().as_str() == "AUS");
            }
            assert_eq!(aus_first, k);
        }
    }

    #[test]
    fn weaker_decides_examples() {
        let views = shared(-50.0);
        // NZL ranked below AUS.
        let alloc = weaker_decides(&teams(), [1, 3], None, &views).unwrap();
        assert_eq!(alloc.chooser.as_str(), "NZL");
        assert_eq!(alloc.chosen.turn, Turn::BowlFirst);

        assert!(matches!(weaker_decides(&teams(), [2, 2], None, &views), Err(Error::Undecidable)));

        let home = TeamId::new("AUS");
        let alloc = weaker_decides(&teams(), [2, 2], Some(&home), &views).unwrap();
        assert_eq!(alloc.chooser.as_str(), "NZL");

        let stranger = TeamId::new("ENG");
        assert!(weaker_decides(&teams(), [2, 2], Some(&stranger), &views).is_err());
    }

    fn bid(team: &str, runs: f64, turn: Turn) -> Bid {
        Bid {
            team: TeamId::new(team),
            bid_runs: runs,
            preferred_turn: turn,
        }
    }

    #[test]
    fn auction_higher_bid_wins() {
        let out = resolve_auction(
            [bid("AUS", 30.0, Turn::BowlFirst), bid("NZL", 50.0, Turn::BowlFirst)],
            &mut ProtocolRng::new(0),
        )
        .unwrap();
        assert!(!out.tie_broken);
        assert_eq!(out.allocation.chooser.as_str(), "NZL");
        assert_eq!(out.allocation.chosen, OptionBundle::new(Turn::BowlFirst, -50.0));
        assert_eq!(out.allocation.bonus_recipient, Some(TeamId::new("AUS")));
        assert_eq!(out.winner_regret(-50.0), 0.0);
        assert_eq!(out.winner_regret(-40.0), 10.0);
    }

    #[test]
    fn auction_ties_go_to_the_coin() {
        let bids = [bid("AUS", 40.0, Turn::BatFirst), bid("NZL", 40.0, Turn::BatFirst)];
        let out = resolve_auction(bids.clone(), &mut ProtocolRng::new(seed_with_bit(0))).unwrap();
        assert!(out.tie_broken);
        assert_eq!(out.allocation.chooser.as_str(), "AUS");
        let out = resolve_auction(bids, &mut ProtocolRng::new(seed_with_bit(1))).unwrap();
        assert_eq!(out.allocation.chooser.as_str(), "NZL");
    }

    #[test]
    fn auction_rounds_bids_so_identical_views_tie() {
        let out = auction(&teams(), &shared(40.3), &mut ProtocolRng::new(4)).unwrap();
        assert!(out.tie_broken);
        assert_eq!(out.bids[0].bid_runs, 40.0);
        assert_eq!(out.bids[0].preferred_turn, Turn::BatFirst);
    }

    #[test]
    fn every_mechanism_returns_a_consistent_allocation() {
        let mechanisms = [
            Mechanism::PlainToss,
            Mechanism::Tpc {
                proposer: ProposerStrategy::Truthful,
                chooser: ChooserStrategy::Rational,
                rounding: BonusRounding::WholeRuns,
            },
            Mechanism::Alternation,
            Mechanism::WeakerDecides {
                rankings: [1, 2],
                home: None,
            },
            Mechanism::Auction,
        ];
        for m in &mechanisms {
            for a in [-80.0, -20.0, 0.0, 35.0] {
                let mut series = SeriesState::new();
                for game in 0..3 {
                    let mut toss = ProtocolRng::substream(1, 0, game, Purpose::Toss).unwrap();
                    let mut tie = ProtocolRng::substream(1, 0, game, Purpose::TieBreak).unwrap();
                    let out = m.run(&teams(), &shared(a), &mut series, &mut toss, &mut tie).unwrap();
                    let alloc = &out.allocation;
                    assert_ne!(alloc.chosen.turn, alloc.complement.turn);
                    assert_eq!(alloc.chosen.bonus_delta + alloc.complement.bonus_delta, 0.0);
                    assert_ne!(alloc.chooser, alloc.other);
                    assert_eq!(out.auction.is_some(), m.kind() == MechanismKind::Auction);
                }
            }
        }
    }

    #[test]
    fn mechanism_names_round_trip() {
        for k in MechanismKind::ALL {
            assert_eq!(k.name().parse::<MechanismKind>().unwrap(), k);
        }
        assert!("coin".parse::<MechanismKind>().is_err());
    }
}
