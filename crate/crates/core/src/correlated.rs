//! Social-welfare and social-fair correlated equilibria via linear programming.
//!
//! A correlated equilibrium is found directly as a joint strategy: one LP
//! variable per joint action, incentive rows stating that no player gains
//! by switching away from a recommended action, and the simplex constraint.
//! The fair variant adds one value variable per player plus the largest and
//! smallest of them. Only the bounding rows `max ≥ value_i` and
//! `min ≤ value_i` are needed since minimising `max - min` makes them tight.

use alloc::vec;
use alloc::vec::Vec;

use crate::lp::{solve_lp_lexicographic, LinearProgram, LpStatus, Relation, Sense};
use crate::nfg::{expected_utility_joint, negate_utilities, spread, welfare, JointStrategy, NormalFormGame};
use crate::{Criterion, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CeResult {
    pub joint: JointStrategy,
    pub values: Vec<f64>,
    pub welfare: f64,
    pub spread: f64,
}

impl CeResult {
    fn from_joint(game: &NormalFormGame, joint: JointStrategy) -> Result<Self> {
        let values = expected_utility_joint(game, &joint)?;
        Ok(Self {
            welfare: welfare(&values),
            spread: spread(&values),
            joint,
            values,
        })
    }
}

/// Incentive rows, `p ≤ 1` rows and the simplex row over `|A|` variables.
/// The objective is left at zero.
pub fn build_ce_constraints(game: &NormalFormGame) -> LinearProgram {
    let size = game.num_joint();
    let mut lp = LinearProgram::new(size, Sense::Maximize);
    for (_, coeffs) in incentive_rows(game) {
        lp.add_constraint(coeffs, Relation::Ge, 0.0);
    }
    for joint in 0..size {
        let mut coeffs = vec![0.0; size];
        coeffs[joint] = 1.0;
        lp.add_constraint(coeffs, Relation::Le, 1.0);
    }
    lp.add_constraint(vec![1.0; size], Relation::Eq, 1.0);
    lp
}

/// One row per player and ordered pair of distinct actions `(a, a')`:
/// coefficient `u_i(α_{-i}[a]) - u_i(α_{-i}[a'])` on `p_{α_{-i}[a]}`.
fn incentive_rows(game: &NormalFormGame) -> impl Iterator<Item = (IncentiveRow, Vec<f64>)> + '_ {
    let n = game.num_players();
    (0..n).flat_map(move |i| {
        let k = game.num_actions(i);
        (0..k).flat_map(move |a| {
            (0..k).filter(move |&b| b != a).map(move |b| {
                let mut coeffs = vec![0.0; game.num_joint()];
                for joint in (0..game.num_joint()).filter(|&j| game.action_of(j, i) == a) {
                    let dev = game.with_action(joint, i, b);
                    coeffs[joint] = game.utility(joint, i) - game.utility(dev, i);
                }
                (
                    IncentiveRow {
                        player: i,
                        recommended: a,
                        deviation: b,
                    },
                    coeffs,
                )
            })
        })
    })
}

fn clean_joint(x: &[f64]) -> Result<JointStrategy> {
    JointStrategy::normalized(x.iter().map(|p| p.max(0.0)).collect())
}

fn player_objectives(game: &NormalFormGame, width: usize) -> Vec<Vec<f64>> {
    (0..game.num_players())
        .map(|i| {
            let mut c = vec![0.0; width];
            for (joint, cj) in c.iter_mut().enumerate().take(game.num_joint()) {
                *cj = game.utility(joint, i);
            }
            c
        })
        .collect()
}

/// Maximises the sum of expected utilities over all correlated equilibria.
/// Ties go to the larger value for player 1, then player 2, and so on.
pub fn solve_swce(game: &NormalFormGame) -> Result<CeResult> {
    let mut lp = build_ce_constraints(game);
    lp.objective = (0..game.num_joint()).map(|j| game.utility_row(j).iter().sum()).collect();
    let secondary = player_objectives(game, game.num_joint());
    let solution = solve_lp_lexicographic(&lp, &secondary)?;
    if solution.status != LpStatus::Optimal {
        return Err(Error::Internal("correlated equilibrium LP has no optimum".into()));
    }
    CeResult::from_joint(game, clean_joint(&solution.x)?)
}

/// Minimises `max_i value_i - min_i value_i` over all correlated equilibria;
/// ties go to the larger welfare, then to the players in order.
pub fn solve_sfce(game: &NormalFormGame) -> Result<CeResult> {
    let n = game.num_players();
    let size = game.num_joint();
    let width = size + n + 2;
    let (pmax, pmin) = (size + n, size + n + 1);

    let base = build_ce_constraints(game);
    let mut lp = LinearProgram::new(width, Sense::Minimize);
    for b in lp.bounds.iter_mut().skip(size) {
        *b = (f64::NEG_INFINITY, f64::INFINITY);
    }
    for c in base.constraints {
        let mut coeffs = c.coeffs;
        coeffs.resize(width, 0.0);
        lp.add_constraint(coeffs, c.relation, c.rhs);
    }
    for i in 0..n {
        let mut coeffs = vec![0.0; width];
        for (joint, cj) in coeffs.iter_mut().enumerate().take(size) {
            *cj = -game.utility(joint, i);
        }
        coeffs[size + i] = 1.0;
        lp.add_constraint(coeffs, Relation::Eq, 0.0);
    }
    for i in 0..n {
        let mut coeffs = vec![0.0; width];
        coeffs[pmax] = 1.0;
        coeffs[size + i] = -1.0;
        lp.add_constraint(coeffs, Relation::Ge, 0.0);
        let mut coeffs = vec![0.0; width];
        coeffs[pmin] = 1.0;
        coeffs[size + i] = -1.0;
        lp.add_constraint(coeffs, Relation::Le, 0.0);
    }
    lp.objective[pmax] = 1.0;
    lp.objective[pmin] = -1.0;

    // minimisation sense: negate the soft objectives to maximise them
    let mut secondary = Vec::with_capacity(n + 1);
    let mut neg_welfare = vec![0.0; width];
    neg_welfare[size..size + n].iter_mut().for_each(|c| *c = -1.0);
    secondary.push(neg_welfare);
    for i in 0..n {
        let mut c = vec![0.0; width];
        c[size + i] = -1.0;
        secondary.push(c);
    }

    let solution = solve_lp_lexicographic(&lp, &secondary)?;
    if solution.status != LpStatus::Optimal {
        return Err(Error::Internal("fair correlated equilibrium LP has no optimum".into()));
    }
    CeResult::from_joint(game, clean_joint(&solution.x[..size])?)
}

pub fn solve_ce(game: &NormalFormGame, criterion: Criterion) -> Result<CeResult> {
    match criterion {
        Criterion::SocialWelfare => solve_swce(game),
        Criterion::SocialFairness => solve_sfce(game),
    }
}

/// Optimal correlated equilibrium when players minimise their utilities
/// (cost equilibria): solve the negated game and negate the values back.
pub fn solve_cost_ce(game: &NormalFormGame, criterion: Criterion) -> Result<CeResult> {
    let result = solve_ce(&negate_utilities(game), criterion)?;
    let values: Vec<f64> = result.values.iter().map(|v| -v).collect();
    Ok(CeResult {
        joint: result.joint,
        welfare: welfare(&values),
        spread: spread(&values),
        values,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IncentiveRow {
    pub player: usize,
    pub recommended: usize,
    pub deviation: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CeReport {
    /// Value of every incentive row, in construction order.
    pub slacks: Vec<(IncentiveRow, f64)>,
    /// The most violated (smallest) row, if the game has any rows.
    pub worst: Option<(IncentiveRow, f64)>,
    pub is_equilibrium: bool,
}

impl CeReport {
    pub fn min_slack(&self) -> f64 {
        self.worst.map_or(0.0, |w| w.1)
    }
}

/// Evaluates every incentive row at `joint`.
pub fn verify_ce(game: &NormalFormGame, joint: &JointStrategy, tolerance: f64) -> Result<CeReport> {
    if joint.len() != game.num_joint() {
        return Err(Error::Shape("joint strategy does not match the game".into()));
    }
    let p = joint.probs();
    let slacks: Vec<(IncentiveRow, f64)> = incentive_rows(game)
        .map(|(row, coeffs)| (row, coeffs.iter().zip(p).map(|(c, q)| c * q).sum()))
        .collect();
    let worst = slacks
        .iter()
        .copied()
        .fold(None, |acc: Option<(IncentiveRow, f64)>, s| match acc {
            Some(a) if a.1 <= s.1 => Some(a),
            _ => Some(s),
        });
    Ok(CeReport {
        is_equilibrium: worst.map_or(true, |w| w.1 >= -tolerance),
        slacks,
        worst,
    })
}
