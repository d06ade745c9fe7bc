//! Run advantages, win probabilities and the indifference bonus.
//!
//! Sign convention used throughout the crate: an advantage is measured in
//! runs from the point of view of the side batting first. A positive value
//! means batting first is advantageous, a negative one means chasing is.

use core::fmt;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mechanism::{OptionBundle, TeamId, Turn};

/// Logistic scale for T20-style scenarios.
pub const T20_SIGMA: f64 = 30.0;
/// Logistic scale for multi-day scenarios.
pub const TEST_SIGMA: f64 = 60.0;

/// Default bisection tolerance, in runs.
pub const DEFAULT_SOLVER_TOLERANCE: f64 = 1e-6;
/// The solver brackets `b*` in `[0, |â| + BRACKET_MARGIN]`.
pub const BRACKET_MARGIN: f64 = 100.0;
pub const MAX_SOLVER_ITERATIONS: u32 = 200;

/// Perceived advantages are drawn within this many standard deviations.
pub const NOISE_TRUNCATION: f64 = 3.0;

/// Half-width, in runs, of the affine map `LinearRuns` uses for display
/// probabilities.
pub const LINEAR_SPAN_RUNS: f64 = 200.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchConditions {
    /// Runs gained by batting first (negative: chasing is favoured).
    pub true_advantage: f64,
    /// Per-team standard deviation of the captains' estimate of the advantage.
    pub advantage_noise_sd: f64,
    pub score_mean: f64,
    pub score_sd: f64,
}

impl MatchConditions {
    pub fn new(
        true_advantage: f64,
        advantage_noise_sd: f64,
        score_mean: f64,
        score_sd: f64,
    ) -> Result<Self> {
        let conditions = Self {
            true_advantage,
            advantage_noise_sd,
            score_mean,
            score_sd,
        };
        conditions.validate()?;
        Ok(conditions)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.true_advantage.is_finite() {
            return Err(Error::config("conditions.true_advantage", "must be finite"));
        }
        if !self.score_mean.is_finite() {
            return Err(Error::config("conditions.score_mean", "must be finite"));
        }
        if !(self.score_sd.is_finite() && self.score_sd > 0.0) {
            return Err(Error::config("conditions.score_sd", "must be positive"));
        }
        if !(self.advantage_noise_sd.is_finite() && self.advantage_noise_sd >= 0.0) {
            return Err(Error::config("valuation.noise_sd", "must be non-negative"));
        }
        Ok(())
    }

    /// A team's private estimate of the advantage: the truth plus Gaussian
    /// noise truncated at ±3 sd, or the truth itself when noise is off.
    pub fn draw_perceived_advantage<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.advantage_noise_sd == 0.0 {
            return self.true_advantage;
        }
        loop {
            let z: f64 = rng.sample(StandardNormal);
            if z.abs() <= NOISE_TRUNCATION {
                return self.true_advantage + self.advantage_noise_sd * z;
            }
        }
    }

    pub fn draw_view<R: Rng + ?Sized>(
        &self,
        team: TeamId,
        model: ValuationModel,
        rng: &mut R,
    ) -> ValuationView {
        ValuationView::new(team, self.draw_perceived_advantage(rng), model)
    }
}

/// Maps an effective run advantage to a captain's utility.
///
/// Every variant is strictly increasing in the advantage, which is all the
/// mechanism needs: the indifference point is `|â|` for any of them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ValuationModel {
    /// Utility is the run advantage itself.
    LinearRuns,
    /// `1 / (1 + exp(-delta / sigma))`.
    LogisticWinProb { sigma: f64 },
    /// Win probability of the normal score-difference model,
    /// `Φ(delta / (score_sd·√2))`.
    ScoreSimulation { score_sd: f64 },
}

impl Default for ValuationModel {
    fn default() -> Self {
        ValuationModel::LogisticWinProb { sigma: T20_SIGMA }
    }
}

impl ValuationModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ValuationModel::LinearRuns => Ok(()),
            ValuationModel::LogisticWinProb { sigma } if sigma.is_finite() && sigma > 0.0 => Ok(()),
            ValuationModel::LogisticWinProb { sigma } => Err(Error::InvalidModel(alloc::format!(
                "logistic sigma must be positive, got {sigma}"
            ))),
            ValuationModel::ScoreSimulation { score_sd } if score_sd.is_finite() && score_sd > 0.0 => {
                Ok(())
            }
            ValuationModel::ScoreSimulation { score_sd } => Err(Error::InvalidModel(
                alloc::format!("score sd must be positive, got {score_sd}"),
            )),
        }
    }

    /// Probability that the side holding an effective advantage of `delta`
    /// runs wins. For `LinearRuns` this is a clamped affine map, good for
    /// display only.
    pub fn win_probability(&self, delta: f64) -> Result<f64> {
        self.validate()?;
        Ok(match *self {
            ValuationModel::LinearRuns => (0.5 + delta / (2.0 * LINEAR_SPAN_RUNS)).clamp(0.0, 1.0),
            ValuationModel::LogisticWinProb { sigma } => logistic(delta / sigma),
            ValuationModel::ScoreSimulation { score_sd } => {
                normal_cdf(delta / (score_sd * core::f64::consts::SQRT_2))
            }
        })
    }

    /// Strictly increasing utility of an effective advantage. Equal to
    /// [`win_probability`](Self::win_probability) for the bounded models;
    /// for `LinearRuns` it is `delta` itself, unclamped.
    pub fn utility(&self, delta: f64) -> Result<f64> {
        match *self {
            ValuationModel::LinearRuns => Ok(delta),
            _ => self.win_probability(delta),
        }
    }
}

impl fmt::Display for ValuationModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValuationModel::LinearRuns => f.write_str("linear_runs"),
            ValuationModel::LogisticWinProb { sigma } => write!(f, "logistic_win_prob(sigma={sigma})"),
            ValuationModel::ScoreSimulation { score_sd } => {
                write!(f, "score_simulation(score_sd={score_sd})")
            }
        }
    }
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / core::f64::consts::SQRT_2)
}

/// Anything the indifference solver can balance.
pub trait UtilityModel {
    fn utility(&self, delta: f64) -> Result<f64>;
}

impl UtilityModel for ValuationModel {
    fn utility(&self, delta: f64) -> Result<f64> {
        ValuationModel::utility(self, delta)
    }
}

/// Adapts a plain function into a [`UtilityModel`].
pub struct FnUtility<F>(pub F);

impl<F: Fn(f64) -> f64> UtilityModel for FnUtility<F> {
    fn utility(&self, delta: f64) -> Result<f64> {
        Ok((self.0)(delta))
    }
}

/// One captain's private view of the match.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValuationView {
    pub team: TeamId,
    /// `â`, in the batting-first sign convention.
    pub perceived_advantage: f64,
    pub model: ValuationModel,
}

impl ValuationView {
    pub fn new(team: TeamId, perceived_advantage: f64, model: ValuationModel) -> Self {
        Self {
            team,
            perceived_advantage,
            model,
        }
    }

    /// The turn this view judges advantageous; batting first when
    /// indifferent.
    pub fn advantageous_turn(&self) -> Turn {
        Turn::advantageous_for(self.perceived_advantage)
    }

    pub fn effective_advantage(&self, bundle: &OptionBundle) -> f64 {
        effective_advantage(bundle, self)
    }

    pub fn utility(&self, bundle: &OptionBundle) -> Result<f64> {
        utility(bundle, self)
    }
}

/// Net runs the holder of `bundle` expects: the perceived turn advantage
/// plus the bundle's bonus.
pub fn effective_advantage(bundle: &OptionBundle, view: &ValuationView) -> f64 {
    let turn_advantage = match bundle.turn {
        Turn::BatFirst => view.perceived_advantage,
        Turn::BowlFirst => -view.perceived_advantage,
    };
    turn_advantage + bundle.bonus_delta
}

pub fn win_probability(delta: f64, model: &ValuationModel) -> Result<f64> {
    model.win_probability(delta)
}

pub fn utility(bundle: &OptionBundle, view: &ValuationView) -> Result<f64> {
    view.model.utility(effective_advantage(bundle, view))
}

/// Result of an indifference solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Indifference {
    /// `b* ≥ 0`, real-valued.
    pub bonus: f64,
    pub advantageous_turn: Turn,
    pub iterations: u32,
    /// `u(option 1) - u(option 2)` at `bonus`.
    pub residual: f64,
}

/// The bonus that makes `view` indifferent between its two option bundles.
pub fn indifference_bonus(view: &ValuationView, tolerance: f64) -> Result<Indifference> {
    solve_indifference(&view.model, view.perceived_advantage, tolerance)
}

/// Bisection on `b ↦ u(adv turn, -b) - u(other turn, +b)` over
/// `[0, |â| + BRACKET_MARGIN]`. The gap is decreasing for any increasing
/// utility, so a sign change inside the bracket is guaranteed; a model that
/// does not produce one is reported as a solver failure.
pub fn solve_indifference<M: UtilityModel + ?Sized>(
    model: &M,
    perceived_advantage: f64,
    tolerance: f64,
) -> Result<Indifference> {
    if !perceived_advantage.is_finite() {
        return Err(Error::InvalidParameters(alloc::format!(
            "perceived advantage must be finite, got {perceived_advantage}"
        )));
    }
    if !(tolerance.is_finite() && tolerance > 0.0) {
        return Err(Error::InvalidParameters(alloc::format!(
            "solver tolerance must be positive, got {tolerance}"
        )));
    }

    let advantageous_turn = Turn::advantageous_for(perceived_advantage);
    let magnitude = perceived_advantage.abs();
    // Both bundles are evaluated as effective advantages of the holder:
    // option 1 nets |â| - b, option 2 nets -|â| + b.
    let gap = |b: f64| -> Result<f64> {
        Ok(model.utility(magnitude - b)? - model.utility(b - magnitude)?)
    };

    let mut lo = 0.0;
    let mut hi = magnitude + BRACKET_MARGIN;
    let gap_lo = gap(lo)?;
    if gap_lo == 0.0 {
        return Ok(Indifference {
            bonus: 0.0,
            advantageous_turn,
            iterations: 0,
            residual: 0.0,
        });
    }
    if gap_lo.is_nan() || gap_lo < 0.0 {
        return Err(Error::SolverFailure(alloc::format!(
            "utility gap at b = 0 is {gap_lo}; the model is not increasing in runs"
        )));
    }
    let gap_hi = gap(hi)?;
    if gap_hi.is_nan() || gap_hi >= 0.0 {
        return Err(Error::SolverFailure(alloc::format!(
            "utility gap at b = {hi} is {gap_hi}; no sign change in the bracket"
        )));
    }

    for iteration in 1..=MAX_SOLVER_ITERATIONS {
        let mid = 0.5 * (lo + hi);
        let gap_mid = gap(mid)?;
        if gap_mid == 0.0 {
            return Ok(Indifference {
                bonus: mid,
                advantageous_turn,
                iterations: iteration,
                residual: 0.0,
            });
        }
        if gap_mid > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= tolerance {
            let bonus = 0.5 * (lo + hi);
            return Ok(Indifference {
                bonus,
                advantageous_turn,
                iterations: iteration,
                residual: gap(bonus)?,
            });
        }
    }
    Err(Error::SolverFailure(alloc::format!(
        "no convergence to {tolerance} runs within {MAX_SOLVER_ITERATIONS} iterations"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanism::build_proposal;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn view(a_hat: f64, model: ValuationModel) -> ValuationView {
        ValuationView::new(TeamId::new("NZL"), a_hat, model)
    }

    fn logistic30() -> ValuationModel {
        ValuationModel::LogisticWinProb { sigma: 30.0 }
    }

    #[test]
    fn example_bundles_net_to_zero() {
        // New Zealand expect a 50-run edge from bowling first.
        let v = view(-50.0, logistic30());
        let p = build_proposal(50.0, Turn::BowlFirst).unwrap();
        assert_eq!(effective_advantage(&p.option1, &v), 0.0);
        assert_eq!(effective_advantage(&p.option2, &v), 0.0);
        assert_eq!(utility(&p.option1, &v).unwrap(), 0.5);
        assert_eq!(utility(&p.option2, &v).unwrap(), 0.5);

        let level = view(0.0, logistic30());
        assert_eq!(effective_advantage(&OptionBundle::new(Turn::BatFirst, 0.0), &level), 0.0);
    }

    #[test]
    fn logistic_values() {
        let m = logistic30();
        assert_eq!(m.win_probability(0.0).unwrap(), 0.5);
        assert_abs_diff_eq!(m.win_probability(30.0).unwrap(), 1.0 / (1.0 + (-1.0f64).exp()), epsilon = 1e-15);
        assert_abs_diff_eq!(m.win_probability(30.0).unwrap(), 0.7311, epsilon = 1e-4);
        assert_abs_diff_eq!(m.win_probability(-30.0).unwrap(), 0.2689, epsilon = 1e-4);
        for sigma in [1.0, 30.0, 60.0] {
            assert_eq!(ValuationModel::LogisticWinProb { sigma }.win_probability(0.0).unwrap(), 0.5);
        }
    }

    #[test]
    fn logistic_saturates() {
        let v = view(-50.0, logistic30());
        let p = build_proposal(1e6, Turn::BowlFirst).unwrap();
        assert_abs_diff_eq!(utility(&p.option2, &v).unwrap(), 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(utility(&p.option1, &v).unwrap(), 0.0, epsilon = 1e-9);
    }

    #[test]
    fn invalid_sigma_rejected() {
        for sigma in [0.0, -1.0, f64::NAN, f64::INFINITY] {
            let m = ValuationModel::LogisticWinProb { sigma };
            assert!(matches!(m.win_probability(0.0), Err(Error::InvalidModel(_))));
            let m = ValuationModel::ScoreSimulation { score_sd: sigma };
            assert!(matches!(m.win_probability(0.0), Err(Error::InvalidModel(_))));
        }
    }

    #[test]
    fn linear_runs_orders_like_effective_advantage() {
        // Exhaustive over a grid of (â, b) and both proposal turns.
        let m = ValuationModel::LinearRuns;
        for a in (-200..=200).step_by(10) {
            let v = view(a as f64, m);
            for b in (0..=300).step_by(5) {
                for turn in [Turn::BatFirst, Turn::BowlFirst] {
                    let p = build_proposal(b as f64, turn).unwrap();
                    let (e1, e2) = (effective_advantage(&p.option1, &v), effective_advantage(&p.option2, &v));
                    let (u1, u2) = (utility(&p.option1, &v).unwrap(), utility(&p.option2, &v).unwrap());
                    assert_eq!(e1.partial_cmp(&e2), u1.partial_cmp(&u2), "a={a} b={b} {turn:?}");
                }
            }
        }
    }

    #[test]
    fn indifference_examples() {
        let tol = DEFAULT_SOLVER_TOLERANCE;
        let r = indifference_bonus(&view(-50.0, logistic30()), tol).unwrap();
        assert_abs_diff_eq!(r.bonus, 50.0, epsilon = tol);
        assert_eq!(r.advantageous_turn, Turn::BowlFirst);

        let r = indifference_bonus(&view(0.0, logistic30()), tol).unwrap();
        assert_eq!(r.bonus, 0.0);
        assert_eq!(r.advantageous_turn, Turn::BatFirst);

        // Batting first is worth -35 runs: bowling first is the advantageous turn.
        let v = view(-35.0, logistic30());
        let r = indifference_bonus(&v, tol).unwrap();
        assert_abs_diff_eq!(r.bonus, 35.0, epsilon = tol);
        assert_eq!(r.advantageous_turn, Turn::BowlFirst);
        // Sign audit by direct evaluation: bowling first without a bonus is
        // preferred; at b* the two bundles balance.
        let bowl = utility(&OptionBundle::new(Turn::BowlFirst, 0.0), &v).unwrap();
        let bat = utility(&OptionBundle::new(Turn::BatFirst, 0.0), &v).unwrap();
        assert!(bowl > bat);
        let p = build_proposal(r.bonus, r.advantageous_turn).unwrap();
        assert_abs_diff_eq!(utility(&p.option1, &v).unwrap(), utility(&p.option2, &v).unwrap(), epsilon = 1e-8);
    }

    #[test]
    fn residual_is_small() {
        let r = indifference_bonus(&view(123.4, logistic30()), 1e-9).unwrap();
        assert!(r.residual.abs() < 1e-9);
        assert!(r.iterations > 0 && r.iterations <= MAX_SOLVER_ITERATIONS);
    }

    #[test]
    fn decreasing_model_is_a_solver_failure() {
        let backwards = FnUtility(|d: f64| -d);
        assert!(matches!(solve_indifference(&backwards, 40.0, 1e-6), Err(Error::SolverFailure(_))));
        // Increasing near zero but periodic: no sign change across the bracket.
        let wave = FnUtility(|d: f64| libm::sin(d / 20.0));
        assert!(matches!(solve_indifference(&wave, 40.0, 1e-6), Err(Error::SolverFailure(_))));
    }

    #[test]
    fn bad_solver_inputs() {
        assert!(solve_indifference(&logistic30(), f64::NAN, 1e-6).is_err());
        assert!(solve_indifference(&logistic30(), 10.0, 0.0).is_err());
    }

    #[test]
    fn noise_free_view_is_the_truth() {
        let c = MatchConditions::new(42.0, 0.0, 160.0, 30.0).unwrap();
        let mut rng = crate::rng::ProtocolRng::new(1);
        assert_eq!(c.draw_perceived_advantage(&mut rng), 42.0);
    }

    #[test]
    fn noise_is_truncated() {
        let c = MatchConditions::new(50.0, 15.0, 160.0, 30.0).unwrap();
        let mut rng = crate::rng::ProtocolRng::new(9);
        let draws: alloc::vec::Vec<f64> = (0..20_000).map(|_| c.draw_perceived_advantage(&mut rng)).collect();
        assert!(draws.iter().all(|d| (d - 50.0).abs() <= 45.0));
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        assert!((mean - 50.0).abs() < 0.5);
    }

    #[test]
    fn conditions_validation() {
        assert!(MatchConditions::new(0.0, 0.0, 150.0, 0.0).is_err());
        assert!(MatchConditions::new(0.0, -1.0, 150.0, 20.0).is_err());
        assert!(MatchConditions::new(f64::NAN, 0.0, 150.0, 20.0).is_err());
    }

    fn models() -> [ValuationModel; 4] {
        [
            ValuationModel::LinearRuns,
            ValuationModel::LogisticWinProb { sigma: 30.0 },
            ValuationModel::LogisticWinProb { sigma: 60.0 },
            ValuationModel::ScoreSimulation { score_sd: 40.0 },
        ]
    }

    proptest! {
        #[test]
        fn solver_agrees_with_analytic(a in -200.0f64..200.0) {
            let tol = DEFAULT_SOLVER_TOLERANCE;
            for m in models() {
                let r = indifference_bonus(&view(a, m), tol).unwrap();
                prop_assert!((r.bonus - a.abs()).abs() <= 2.0 * tol, "{m}: {} vs {}", r.bonus, a.abs());
            }
        }

        #[test]
        fn bundles_monotone_in_bonus(a in -150.0f64..150.0, b in 0.0f64..250.0, step in 0.01f64..10.0) {
            for m in models() {
                let v = view(a, m);
                let p = build_proposal(b, v.advantageous_turn()).unwrap();
                let q = build_proposal(b + step, v.advantageous_turn()).unwrap();
                prop_assert!(utility(&q.option2, &v).unwrap() > utility(&p.option2, &v).unwrap());
                prop_assert!(utility(&q.option1, &v).unwrap() < utility(&p.option1, &v).unwrap());
            }
        }

        #[test]
        fn probability_bounds_and_antisymmetry(x in -300.0f64..300.0) {
            for sigma in [10.0, 30.0, 60.0] {
                let m = ValuationModel::LogisticWinProb { sigma };
                let p = m.win_probability(x).unwrap();
                let q = m.win_probability(-x).unwrap();
                prop_assert!(p > 0.0 && p < 1.0);
                prop_assert!((p + q - 1.0).abs() <= 1e-12);
            }
        }
    }
}
