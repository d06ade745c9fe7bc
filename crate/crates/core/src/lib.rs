//! Toss, propose and choose.
//!
//! A two-step handicap layered over the ordinary coin toss: the toss loser
//! names a bonus `b` in runs and offers two bundles, "take the advantageous
//! turn and concede `b`" or "take the other turn and receive `b`"; the toss
//! winner picks one. Because the proposer can balance the bundles to their
//! own indifference point, neither captain envies the other's bundle.
//!
//! This crate is I/O-free and builds without `std` (it needs `alloc`):
//!
//! - [`mechanism`]: toss, proposal, allocation, the protocol state machine
//!   and its transcript.
//! - [`valuation`]: run advantages to win probabilities and the
//!   indifference-bonus solver.
//! - [`strategies`]: truthful, strategic, rational and habitual captains.
//! - [`baselines`]: plain toss, series alternation, weaker-team-decides and
//!   a sealed-bid auction.
//! - [`sim`]: match outcome model, scenario configs, Monte Carlo experiments
//!   and reports.
//! - [`rng`]: seeded ChaCha substreams with provenance.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod baselines;
pub mod error;
pub mod mechanism;
pub mod rng;
pub mod sim;
pub mod strategies;
pub mod valuation;

pub use error::{Error, Result};
pub use mechanism::{
    build_proposal, check_envy_free, execute_tpc, run_toss, Allocation, BonusRounding,
    EnvyReport, Event, OptionBundle, OptionIndex, Phase, Proposal, TeamId, TossOutcome,
    TpcRun, Transcript, Turn,
};
pub use rng::{ProtocolRng, SeedTrace};
pub use strategies::{ChooserBelief, ChooserStrategy, ProposerStrategy};
pub use valuation::{MatchConditions, ValuationModel, ValuationView};
