//! Nash equilibria of normal form games.
//!
//! Two-player games are solved exactly by support enumeration: for each pair
//! of supports the opponent mixture that makes a player indifferent over her
//! support is a linear system. With three or more players the indifference
//! conditions are polynomial, so [`search_ne_np`] runs a damped Newton
//! iteration from several starting points inside every support tuple. It can
//! miss equilibria; an empty result proves nothing.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::lp::{solve_linear_system, solve_lp, LinearProgram, LpStatus, Relation, Sense, SystemSolution};
use crate::nfg::{
    action_values, expected_utility_profile, remove_dominated, spread, welfare, JointActions, NormalFormGame,
    StrategyProfile,
};
use crate::num::{abs, max_abs_diff};
use crate::{Criterion, Error, Result};

/// Slack allowed on the off-support no-profit check.
const DEVIATION_TOL: f64 = 1e-7;
/// Negative probabilities above this are rounding noise.
const NEG_TOL: f64 = 1e-9;
const DEDUP_2P: f64 = 1e-6;
const DEDUP_NP: f64 = 1e-5;
const NP_RESIDUAL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct NeResult {
    pub profile: StrategyProfile,
    pub values: Vec<f64>,
    pub support: Vec<Vec<usize>>,
    /// The support pair admits a continuum of equilibria and this is one
    /// representative.
    pub degenerate: bool,
}

impl NeResult {
    pub fn new(game: &NormalFormGame, profile: StrategyProfile, degenerate: bool) -> Result<Self> {
        let values = expected_utility_profile(game, &profile)?;
        let support = (0..profile.num_players()).map(|i| profile.support(i)).collect();
        Ok(Self {
            profile,
            values,
            support,
            degenerate,
        })
    }

    pub fn welfare(&self) -> f64 {
        welfare(&self.values)
    }

    pub fn spread(&self) -> f64 {
        spread(&self.values)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeReport {
    /// Best pure deviation gain per player.
    pub gains: Vec<f64>,
    pub max_gain: f64,
    pub is_equilibrium: bool,
}

pub fn verify_ne(game: &NormalFormGame, profile: &StrategyProfile, tolerance: f64) -> Result<NeReport> {
    let values = expected_utility_profile(game, profile)?;
    let mut gains = Vec::with_capacity(game.num_players());
    for (i, v) in values.iter().enumerate() {
        let best = action_values(game, profile, i)?
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max);
        gains.push(best - v);
    }
    let max_gain = gains.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(NeReport {
        is_equilibrium: max_gain <= tolerance,
        gains,
        max_gain,
    })
}

fn mask_members(mask: u64, k: usize) -> Vec<usize> {
    (0..k).filter(|a| mask >> a & 1 == 1).collect()
}

/// Non-empty subsets of `0..k`, smallest first.
fn subsets(k: usize, max_size: usize) -> Vec<Vec<usize>> {
    let mut masks: Vec<u64> = (1..1u64 << k)
        .filter(|m| m.count_ones() as usize <= max_size)
        .collect();
    masks.sort_by_key(|m| (m.count_ones(), *m));
    masks.into_iter().map(|m| mask_members(m, k)).collect()
}

/// Payoff matrix of `player` with rows indexed by her own action.
fn payoff_matrix(game: &NormalFormGame, player: usize) -> Vec<Vec<f64>> {
    let (k0, k1) = (game.num_actions(0), game.num_actions(1));
    let mut m = vec![vec![0.0; if player == 0 { k1 } else { k0 }]; if player == 0 { k0 } else { k1 }];
    for a in 0..k0 {
        for b in 0..k1 {
            let u = game.utility(game.encode(&[a, b]), player);
            if player == 0 {
                m[a][b] = u;
            } else {
                m[b][a] = u;
            }
        }
    }
    m
}

enum Side {
    Unique(Vec<f64>),
    Degenerate,
    Invalid,
}

/// Opponent mixture over `theirs` making the owner of `m` indifferent over
/// `own`, or a marker that the system is rank deficient.
fn indifference(m: &[Vec<f64>], own: &[usize], theirs: &[usize]) -> Side {
    let width = m[0].len();
    let k = theirs.len();
    let mut rows: Vec<Vec<f64>> = own
        .iter()
        .map(|&a| {
            let mut r: Vec<f64> = theirs.iter().map(|&b| m[a][b]).collect();
            r.push(-1.0);
            r
        })
        .collect();
    let mut rhs = vec![0.0; own.len()];
    let mut sum = vec![1.0; k];
    sum.push(0.0);
    rows.push(sum);
    rhs.push(1.0);
    match solve_linear_system(&rows, &rhs) {
        SystemSolution::Unique(x) => {
            let v = x[k];
            if x[..k].iter().any(|&p| p < -NEG_TOL) {
                return Side::Invalid;
            }
            let mut sigma = vec![0.0; width];
            for (&b, &p) in theirs.iter().zip(&x) {
                sigma[b] = p.max(0.0);
            }
            let off_ok = (0..m.len()).filter(|a| !own.contains(a)).all(|a| {
                let u: f64 = m[a].iter().zip(&sigma).map(|(x, y)| x * y).sum();
                u <= v + DEVIATION_TOL
            });
            if off_ok {
                Side::Unique(sigma)
            } else {
                Side::Invalid
            }
        }
        SystemSolution::Underdetermined { .. } => Side::Degenerate,
        SystemSolution::Inconsistent { .. } => Side::Invalid,
    }
}

/// Feasibility LP for a rank-deficient side: `σ ≥ 0` on `theirs`, the owner
/// indifferent over `own` at a free value `v` and no better off elsewhere.
/// `objective` (over the full opponent action set) picks a representative.
fn degenerate_side(m: &[Vec<f64>], own: &[usize], theirs: &[usize], objective: &[f64]) -> Option<Vec<f64>> {
    let k = theirs.len();
    let mut lp = LinearProgram::new(k + 1, Sense::Maximize);
    lp.bounds[k] = (f64::NEG_INFINITY, f64::INFINITY);
    for (j, &b) in theirs.iter().enumerate() {
        lp.objective[j] = objective[b];
    }
    for a in 0..m.len() {
        let mut r: Vec<f64> = theirs.iter().map(|&b| m[a][b]).collect();
        r.push(-1.0);
        let rel = if own.contains(&a) { Relation::Eq } else { Relation::Le };
        lp.add_constraint(r, rel, 0.0);
    }
    let mut sum = vec![1.0; k];
    sum.push(0.0);
    lp.add_constraint(sum, Relation::Eq, 1.0);
    let sol = solve_lp(&lp).ok()?;
    if sol.status != LpStatus::Optimal {
        return None;
    }
    let mut sigma = vec![0.0; m[0].len()];
    for (&b, &p) in theirs.iter().zip(&sol.x) {
        sigma[b] = p.max(0.0);
    }
    Some(sigma)
}

/// Welfare coefficient of each of player `who`'s actions given the other
/// player's strategy.
fn welfare_weights(game: &NormalFormGame, who: usize, other: &[f64]) -> Vec<f64> {
    (0..game.num_actions(who))
        .map(|a| {
            other
                .iter()
                .enumerate()
                .filter(|(_, p)| **p != 0.0)
                .map(|(b, p)| {
                    let joint = if who == 0 { game.encode(&[a, b]) } else { game.encode(&[b, a]) };
                    p * game.utility_row(joint).iter().sum::<f64>()
                })
                .sum()
        })
        .collect()
}

fn clean(mut s: Vec<f64>) -> Vec<f64> {
    s.iter_mut().for_each(|p| {
        if *p < 1e-12 {
            *p = 0.0
        }
    });
    let total: f64 = s.iter().sum();
    s.iter_mut().for_each(|p| *p /= total);
    s
}

fn support_pair(
    game: &NormalFormGame,
    m1: &[Vec<f64>],
    m2: &[Vec<f64>],
    s1: &[usize],
    s2: &[usize],
) -> Option<(StrategyProfile, bool)> {
    // σ2 keeps player 1 indifferent over s1 and vice versa
    let side2 = indifference(m1, s1, s2);
    let side1 = indifference(m2, s2, s1);
    let (sigma1, sigma2, degenerate) = match (side1, side2) {
        (Side::Invalid, _) | (_, Side::Invalid) => return None,
        (Side::Unique(x), Side::Unique(y)) => (x, y, false),
        (Side::Unique(x), Side::Degenerate) => {
            let w = welfare_weights(game, 1, &x);
            let y = degenerate_side(m1, s1, s2, &w)?;
            (x, y, true)
        }
        (Side::Degenerate, Side::Unique(y)) => {
            let w = welfare_weights(game, 0, &y);
            let x = degenerate_side(m2, s2, s1, &w)?;
            (x, y, true)
        }
        (Side::Degenerate, Side::Degenerate) => {
            let y = degenerate_side(m1, s1, s2, &vec![0.0; game.num_actions(1)])?;
            let w = welfare_weights(game, 0, &y);
            let x = degenerate_side(m2, s2, s1, &w)?;
            (x, y, true)
        }
    };
    let profile = StrategyProfile::new(vec![clean(sigma1), clean(sigma2)]).ok()?;
    Some((profile, degenerate))
}

fn push_unique(results: &mut Vec<NeResult>, candidate: NeResult, tol: f64) {
    let duplicate = results.iter().any(|r| {
        r.profile
            .strategies()
            .iter()
            .zip(candidate.profile.strategies())
            .all(|(a, b)| max_abs_diff(a, b) <= tol)
    });
    if !duplicate {
        results.push(candidate);
    }
}

/// All Nash equilibria of a two-player game, one representative per
/// degenerate support pair.
pub fn enumerate_ne_2p(game: &NormalFormGame) -> Result<Vec<NeResult>> {
    if game.num_players() != 2 {
        return Err(Error::Contract(alloc::format!(
            "support enumeration needs 2 players, game has {}",
            game.num_players()
        )));
    }
    let reduction = remove_dominated(game);
    let g = &reduction.game;
    let m1 = payoff_matrix(g, 0);
    let m2 = payoff_matrix(g, 1);
    let sup1 = subsets(g.num_actions(0), usize::MAX);
    let sup2 = subsets(g.num_actions(1), usize::MAX);

    let per_row = |s1: &Vec<usize>| -> Vec<(StrategyProfile, bool)> {
        sup2.iter().filter_map(|s2| support_pair(g, &m1, &m2, s1, s2)).collect()
    };
    #[cfg(feature = "parallel")]
    let found: Vec<Vec<(StrategyProfile, bool)>> = {
        use rayon::prelude::*;
        sup1.par_iter().map(per_row).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let found: Vec<Vec<(StrategyProfile, bool)>> = sup1.iter().map(per_row).collect();

    let mut results = Vec::new();
    for (profile, degenerate) in found.into_iter().flatten() {
        let lifted = reduction.lift_profile(&profile);
        if !verify_ne(game, &lifted, 1e-6)?.is_equilibrium {
            continue;
        }
        push_unique(&mut results, NeResult::new(game, lifted, degenerate)?, DEDUP_2P);
    }
    if results.is_empty() {
        return Err(Error::Internal("support enumeration found no equilibrium".into()));
    }
    Ok(results)
}

fn lex_values(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        if abs(x - y) > 1e-9 {
            return x.partial_cmp(y).unwrap_or(Ordering::Equal);
        }
    }
    Ordering::Equal
}

/// Picks the social-welfare (largest sum) or social-fair (smallest spread)
/// equilibrium. Ties go to the lexicographically largest value vector.
pub fn select_optimal_ne(results: &[NeResult], criterion: Criterion) -> Result<NeResult> {
    let key = |r: &NeResult| match criterion {
        Criterion::SocialWelfare => r.welfare(),
        Criterion::SocialFairness => -r.spread(),
    };
    let mut best: Option<&NeResult> = None;
    for r in results {
        best = match best {
            None => Some(r),
            Some(b) => {
                let (kr, kb) = (key(r), key(b));
                let better = if abs(kr - kb) > 1e-9 {
                    kr > kb
                } else {
                    lex_values(&r.values, &b.values) == Ordering::Greater
                };
                Some(if better { r } else { b })
            }
        };
    }
    best.cloned()
        .ok_or_else(|| Error::Contract("no equilibria to select from".into()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchConfig {
    pub max_support_size: usize,
    pub inner_iterations: usize,
    pub starts: usize,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            max_support_size: usize::MAX,
            inner_iterations: 100,
            starts: 8,
            seed: 0xC0FFEE,
        }
    }
}

/// Best-effort equilibrium search for games with any number of players.
pub fn search_ne_np(game: &NormalFormGame, max_support_size: usize, inner_iterations: usize) -> Result<Vec<NeResult>> {
    search_ne_np_with(
        game,
        &SearchConfig {
            max_support_size,
            inner_iterations,
            ..SearchConfig::default()
        },
    )
}

pub fn search_ne_np_with(game: &NormalFormGame, config: &SearchConfig) -> Result<Vec<NeResult>> {
    let n = game.num_players();
    let per_player: Vec<Vec<Vec<usize>>> = game
        .action_counts()
        .iter()
        .map(|&k| subsets(k, config.max_support_size.max(1)))
        .collect();
    let choice_counts: Vec<usize> = per_player.iter().map(Vec::len).collect();
    let tuples: Vec<Vec<usize>> = JointActions::new(&choice_counts).collect();

    let run = |(index, choice): (usize, &Vec<usize>)| -> Vec<StrategyProfile> {
        let supports: Vec<&[usize]> = (0..n).map(|i| per_player[i][choice[i]].as_slice()).collect();
        NewtonSupport::new(game, &supports).solve(config, index as u64)
    };
    #[cfg(feature = "parallel")]
    let found: Vec<Vec<StrategyProfile>> = {
        use rayon::prelude::*;
        tuples.par_iter().enumerate().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let found: Vec<Vec<StrategyProfile>> = tuples.iter().enumerate().map(run).collect();

    let mut results = Vec::new();
    for profile in found.into_iter().flatten() {
        if verify_ne(game, &profile, NP_RESIDUAL)?.is_equilibrium {
            push_unique(&mut results, NeResult::new(game, profile, false)?, DEDUP_NP);
        }
    }
    Ok(results)
}

/// The polynomial indifference system on a fixed support tuple. Unknowns
/// are the support probabilities of every player followed by her value.
struct NewtonSupport<'a> {
    game: &'a NormalFormGame,
    supports: Vec<&'a [usize]>,
    /// Offset of each player's block in the unknown vector.
    offsets: Vec<usize>,
    size: usize,
}

impl<'a> NewtonSupport<'a> {
    fn new(game: &'a NormalFormGame, supports: &[&'a [usize]]) -> Self {
        let mut offsets = Vec::with_capacity(supports.len());
        let mut size = 0;
        for s in supports {
            offsets.push(size);
            size += s.len() + 1;
        }
        Self {
            game,
            supports: supports.to_vec(),
            offsets,
            size,
        }
    }

    fn prob(&self, x: &[f64], player: usize, local: usize) -> f64 {
        x[self.offsets[player] + local]
    }

    /// Residual `F(x)` and Jacobian. Equation rows share the layout of the
    /// unknowns: row `offsets[i] + a` is player i's indifference for her
    /// a-th support action, row `offsets[i] + k_i` her simplex constraint.
    fn system(&self, x: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
        let n = self.supports.len();
        let mut f = vec![0.0; self.size];
        let mut jac = vec![vec![0.0; self.size]; self.size];
        let counts: Vec<usize> = self.supports.iter().map(|s| s.len()).collect();
        let mut actions = vec![0; n];
        for local in JointActions::new(&counts) {
            for i in 0..n {
                actions[i] = self.supports[i][local[i]];
            }
            let joint = self.game.encode(&actions);
            for i in 0..n {
                let u = self.game.utility(joint, i);
                let row = self.offsets[i] + local[i];
                let weight: f64 = (0..n)
                    .filter(|&j| j != i)
                    .map(|j| self.prob(x, j, local[j]))
                    .product();
                f[row] += weight * u;
                for j in (0..n).filter(|&j| j != i) {
                    let partial: f64 = (0..n)
                        .filter(|&l| l != i && l != j)
                        .map(|l| self.prob(x, l, local[l]))
                        .product();
                    jac[row][self.offsets[j] + local[j]] += partial * u;
                }
            }
        }
        for i in 0..n {
            let k = counts[i];
            let v = self.offsets[i] + k;
            for a in 0..k {
                f[self.offsets[i] + a] -= x[v];
                jac[self.offsets[i] + a][v] = -1.0;
                jac[v][self.offsets[i] + a] = 1.0;
            }
            f[v] = (0..k).map(|a| self.prob(x, i, a)).sum::<f64>() - 1.0;
        }
        (f, jac)
    }

    fn start(&self, rng: Option<&mut ChaCha8Rng>) -> Vec<f64> {
        let mut x = vec![0.0; self.size];
        let mut rng = rng;
        for (i, s) in self.supports.iter().enumerate() {
            let block = &mut x[self.offsets[i]..self.offsets[i] + s.len()];
            match rng.as_deref_mut() {
                // flat Dirichlet via normalised exponentials
                Some(r) => block.iter_mut().for_each(|p| *p = -libm::log(1.0 - r.random::<f64>())),
                None => block.iter_mut().for_each(|p| *p = 1.0),
            }
            let total: f64 = block.iter().sum();
            block.iter_mut().for_each(|p| *p /= total);
        }
        // values consistent with the first support action
        let (f, _) = self.system(&x);
        for (i, s) in self.supports.iter().enumerate() {
            x[self.offsets[i] + s.len()] = f[self.offsets[i]];
        }
        x
    }

    fn solve(&self, config: &SearchConfig, stream: u64) -> Vec<StrategyProfile> {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(stream);
        let pure = self.supports.iter().all(|s| s.len() == 1);
        let starts = if pure { 1 } else { config.starts.max(1) };
        let mut out = Vec::new();
        for start in 0..starts {
            let x0 = if start == 0 { self.start(None) } else { self.start(Some(&mut rng)) };
            if let Some(profile) = self.newton(x0, config.inner_iterations).and_then(|x| self.to_profile(&x)) {
                out.push(profile);
            }
        }
        out
    }

    fn newton(&self, mut x: Vec<f64>, iterations: usize) -> Option<Vec<f64>> {
        let norm2 = |f: &[f64]| f.iter().map(|v| v * v).sum::<f64>();
        let (mut f, mut jac) = self.system(&x);
        let mut merit = norm2(&f);
        for _ in 0..iterations {
            if merit < 1e-26 {
                break;
            }
            let neg: Vec<f64> = f.iter().map(|v| -v).collect();
            let step = solve_linear_system(&jac, &neg);
            let dx = step.solution()?.to_vec();
            let mut t = 1.0;
            loop {
                let trial: Vec<f64> = x.iter().zip(&dx).map(|(a, d)| a + t * d).collect();
                let (ft, jt) = self.system(&trial);
                let mt = norm2(&ft);
                if mt <= (1.0 - 1e-4 * t) * merit || t < 1e-6 {
                    x = trial;
                    f = ft;
                    jac = jt;
                    merit = mt;
                    break;
                }
                t *= 0.5;
            }
        }
        Some(x)
    }

    fn to_profile(&self, x: &[f64]) -> Option<StrategyProfile> {
        let mut strategies = Vec::with_capacity(self.supports.len());
        for (i, s) in self.supports.iter().enumerate() {
            let mut sigma = vec![0.0; self.game.num_actions(i)];
            for (a, &action) in s.iter().enumerate() {
                let p = self.prob(x, i, a);
                if !p.is_finite() || p < -NEG_TOL {
                    return None;
                }
                sigma[action] = p.max(0.0);
            }
            if sigma.iter().sum::<f64>() <= 0.0 {
                return None;
            }
            strategies.push(clean(sigma));
        }
        StrategyProfile::new(strategies).ok()
    }
}

/// One optimal Nash equilibrium under `criterion`, or `None` when the
/// multi-player search comes back empty.
pub fn solve_ne(game: &NormalFormGame, criterion: Criterion) -> Result<Option<NeResult>> {
    solve_ne_with(game, criterion, &SearchConfig::default())
}

/// [`solve_ne`] with explicit settings for the multi-player search.
pub fn solve_ne_with(game: &NormalFormGame, criterion: Criterion, search: &SearchConfig) -> Result<Option<NeResult>> {
    let results = match game.num_players() {
        1 => {
            let best = (0..game.num_actions(0))
                .max_by(|&a, &b| {
                    // first maximiser wins
                    game.utility(a, 0)
                        .partial_cmp(&game.utility(b, 0))
                        .unwrap_or(Ordering::Equal)
                        .then(b.cmp(&a))
                })
                .ok_or_else(|| Error::InvalidGame("player without actions".into()))?;
            vec![NeResult::new(game, StrategyProfile::pure(game.action_counts(), &[best]), false)?]
        }
        2 => enumerate_ne_2p(game)?,
        _ => search_ne_np_with(game, search)?,
    };
    if results.is_empty() {
        return Ok(None);
    }
    select_optimal_ne(&results, criterion).map(Some)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correlated::{solve_swce, verify_ce};
    use crate::nfg::fixtures::{bimatrix, intersection};
    use crate::nfg::profile_to_joint;
    use proptest::prelude::*;

    const PRO: usize = 0;
    const YLD: usize = 1;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        max_abs_diff(a, b) <= tol
    }

    fn pure_scan(game: &NormalFormGame) -> Vec<Vec<usize>> {
        game.joint_actions()
            .filter(|t| {
                let p = StrategyProfile::pure(game.action_counts(), t);
                verify_ne(game, &p, 0.0).unwrap().is_equilibrium
            })
            .collect()
    }

    fn pure_of(r: &NeResult) -> Option<Vec<usize>> {
        r.support.iter().map(|s| (s.len() == 1).then(|| s[0])).collect()
    }

    #[test]
    fn matching_pennies() {
        let a: &[&[f64]] = &[&[1.0, -1.0], &[-1.0, 1.0]];
        let b: &[&[f64]] = &[&[-1.0, 1.0], &[1.0, -1.0]];
        let g = bimatrix(a, b);
        let r = enumerate_ne_2p(&g).unwrap();
        assert_eq!(r.len(), 1);
        assert!(close(r[0].profile.strategy(0), &[0.5, 0.5], 1e-12));
        assert!(close(r[0].profile.strategy(1), &[0.5, 0.5], 1e-12));
        assert!(close(&r[0].values, &[0.0, 0.0], 1e-12));
        let uniform = StrategyProfile::uniform(&[2, 2]);
        assert!(verify_ne(&g, &uniform, 0.0).unwrap().gains.iter().all(|g| g.abs() < 1e-12));
    }

    fn coordination() -> NormalFormGame {
        let a: &[&[f64]] = &[&[2.0, 0.0], &[0.0, 1.0]];
        bimatrix(a, a)
    }

    #[test]
    fn coordination_three_equilibria() {
        let g = coordination();
        let r = enumerate_ne_2p(&g).unwrap();
        assert_eq!(r.len(), 3);
        let mixed = r.iter().find(|x| pure_of(x).is_none()).unwrap();
        // each player mixes to make the other indifferent: 2p = 1 - p
        for i in 0..2 {
            assert!(close(mixed.profile.strategy(i), &[1.0 / 3.0, 2.0 / 3.0], 1e-12));
        }
        assert!(close(&mixed.values, &[2.0 / 3.0, 2.0 / 3.0], 1e-12));
        let sw = select_optimal_ne(&r, Criterion::SocialWelfare).unwrap();
        assert_eq!(pure_of(&sw), Some(vec![0, 0]));
        assert!(r.iter().all(|x| !x.degenerate));
    }

    #[test]
    fn dominant_strategy_game() {
        // prisoner's dilemma: defect dominates
        let a: &[&[f64]] = &[&[-1.0, -3.0], &[0.0, -2.0]];
        let b: &[&[f64]] = &[&[-1.0, 0.0], &[-3.0, -2.0]];
        let g = bimatrix(a, b);
        let r = enumerate_ne_2p(&g).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(pure_of(&r[0]), Some(vec![1, 1]));
        let red = remove_dominated(&g);
        assert_eq!(red.index_map, vec![vec![1], vec![1]]);
    }

    #[test]
    fn degenerate_game_flags_and_verifies() {
        // player 2 is indifferent everywhere, so player 1's best response
        // set is an interval of player-2 mixtures
        let a: &[&[f64]] = &[&[1.0, 0.0], &[0.0, 1.0]];
        let b: &[&[f64]] = &[&[0.0, 0.0], &[0.0, 0.0]];
        let g = bimatrix(a, b);
        let r = enumerate_ne_2p(&g).unwrap();
        assert!(r.iter().any(|x| x.degenerate));
        for x in &r {
            assert!(verify_ne(&g, &x.profile, 1e-9).unwrap().is_equilibrium);
        }
    }

    #[test]
    fn select_rejects_empty() {
        assert!(matches!(select_optimal_ne(&[], Criterion::SocialWelfare), Err(Error::Contract(_))));
    }

    #[test]
    fn select_single_unchanged() {
        let a: &[&[f64]] = &[&[1.0, -1.0], &[-1.0, 1.0]];
        let b: &[&[f64]] = &[&[-1.0, 1.0], &[1.0, -1.0]];
        let r = enumerate_ne_2p(&bimatrix(a, b)).unwrap();
        for c in [Criterion::SocialWelfare, Criterion::SocialFairness] {
            assert_eq!(select_optimal_ne(&r, c).unwrap(), r[0]);
        }
    }

    #[test]
    fn select_fair_prefers_zero_spread() {
        // battle of the sexes plus a symmetric fallback
        let a: &[&[f64]] = &[&[3.0, 0.0, 0.0], &[0.0, 2.0, 0.0], &[0.0, 0.0, 1.0]];
        let b: &[&[f64]] = &[&[2.0, 0.0, 0.0], &[0.0, 3.0, 0.0], &[0.0, 0.0, 1.0]];
        let r = enumerate_ne_2p(&bimatrix(a, b)).unwrap();
        let sf = select_optimal_ne(&r, Criterion::SocialFairness).unwrap();
        assert!(sf.spread() < 1e-9);
    }

    #[test]
    fn intersection_verification() {
        let g = intersection();
        let swne = StrategyProfile::pure(&[2, 2, 2], &[PRO, YLD, PRO]);
        assert!(verify_ne(&g, &swne, 0.0).unwrap().is_equilibrium);
        // yield probabilities 1, 95/110, 995/1010
        let sfne = StrategyProfile::new(vec![
            vec![0.0, 1.0],
            vec![0.136364, 0.863636],
            vec![0.014852, 0.985148],
        ])
        .unwrap();
        assert!(verify_ne(&g, &sfne, 1e-4).unwrap().is_equilibrium);
    }

    #[test]
    fn intersection_newton_recovers_sfne() {
        let g = intersection();
        let sup: [&[usize]; 3] = [&[YLD], &[PRO, YLD], &[PRO, YLD]];
        let found = NewtonSupport::new(&g, &sup).solve(&SearchConfig::default(), 0);
        let hit = found.iter().any(|p| {
            close(
                &[p.strategy(0)[YLD], p.strategy(1)[YLD], p.strategy(2)[YLD]],
                &[1.0, 0.863636, 0.985148],
                1e-4,
            )
        });
        assert!(hit, "{found:?}");
        let all = search_ne_np(&g, 2, 100).unwrap();
        assert!(all.iter().any(|r| close(
            &[r.profile.strategy(0)[YLD], r.profile.strategy(1)[YLD], r.profile.strategy(2)[YLD]],
            &[1.0, 95.0 / 110.0, 995.0 / 1010.0],
            1e-4
        )));
        for r in &all {
            assert!(verify_ne(&g, &r.profile, 1e-5).unwrap().is_equilibrium);
        }
    }

    #[test]
    fn three_player_with_dominant_action_matches_two_player() {
        // player 3 strictly prefers action 0; players 1 and 2 play the
        // coordination game when it does
        let g = NormalFormGame::from_fn(vec![2, 2, 2], |t| {
            let base = if t[0] == t[1] { [2.0, 1.0][t[0]] } else { 0.0 };
            let shift = if t[2] == 0 { 0.0 } else { 0.5 };
            vec![base + shift * (t[0] as f64), base - shift, 1.0 - t[2] as f64]
        })
        .unwrap();
        let sub = restrict(&g, &[vec![0, 1], vec![0, 1], vec![0]]);
        let two = NormalFormGame::from_fn(vec![2, 2], |t| {
            let row = sub.utility_row(sub.encode(&[t[0], t[1], 0]));
            vec![row[0], row[1]]
        })
        .unwrap();
        let exact = enumerate_ne_2p(&two).unwrap();
        let found = search_ne_np(&g, 2, 100).unwrap();
        assert_eq!(found.len(), exact.len());
        for e in &exact {
            assert!(found.iter().any(|f| f.profile.strategy(2)[0] == 1.0
                && close(f.profile.strategy(0), e.profile.strategy(0), 1e-6)
                && close(f.profile.strategy(1), e.profile.strategy(1), 1e-6)));
        }
    }

    use crate::nfg::restrict;

    #[test]
    fn zero_game_results_have_no_gain() {
        let g = NormalFormGame::from_table(vec![2, 2, 2], vec![0.0; 24]).unwrap();
        let found = search_ne_np(&g, 2, 50).unwrap();
        assert!(!found.is_empty());
        for r in found {
            assert_eq!(verify_ne(&g, &r.profile, 0.0).unwrap().max_gain, 0.0);
        }
    }

    #[test]
    fn solve_ne_one_player_is_argmax() {
        let g = NormalFormGame::from_table(vec![3], vec![1.0, 4.0, 4.0]).unwrap();
        let r = solve_ne(&g, Criterion::SocialWelfare).unwrap().unwrap();
        assert_eq!(r.support, vec![vec![1]]);
    }

    #[test]
    fn search_is_deterministic() {
        let g = intersection();
        assert_eq!(search_ne_np(&g, 2, 50).unwrap(), search_ne_np(&g, 2, 50).unwrap());
    }

    fn arb_bimatrix(max: usize) -> impl Strategy<Value = NormalFormGame> {
        (2..=max, 2..=max).prop_flat_map(|(r, c)| {
            prop::collection::vec(-10.0f64..10.0, r * c * 2)
                .prop_map(move |u| NormalFormGame::from_table(vec![r, c], u).unwrap())
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn enumerated_are_nash_and_correlated(g in arb_bimatrix(4)) {
            let r = enumerate_ne_2p(&g).unwrap();
            prop_assert!(!r.is_empty());
            for x in &r {
                prop_assert!(verify_ne(&g, &x.profile, 1e-6).unwrap().is_equilibrium);
                prop_assert!(verify_ce(&g, &profile_to_joint(&x.profile), 1e-6).unwrap().is_equilibrium);
                let recomputed = expected_utility_profile(&g, &x.profile).unwrap();
                prop_assert!(close(&recomputed, &x.values, 1e-6));
            }
            let sw = select_optimal_ne(&r, Criterion::SocialWelfare).unwrap();
            prop_assert!(sw.welfare() <= solve_swce(&g).unwrap().welfare + 1e-6);
        }

        #[test]
        fn pure_equilibria_match_scan(g in arb_bimatrix(3)) {
            let mut found: Vec<Vec<usize>> = enumerate_ne_2p(&g).unwrap().iter().filter_map(pure_of).collect();
            found.sort();
            prop_assert_eq!(found, pure_scan(&g));
        }

        #[test]
        fn np_search_results_verify(u in prop::collection::vec(-10.0f64..10.0, 24)) {
            let g = NormalFormGame::from_table(vec![2, 2, 2], u).unwrap();
            for r in search_ne_np(&g, 2, 50).unwrap() {
                prop_assert!(verify_ne(&g, &r.profile, 1e-5).unwrap().is_equilibrium);
            }
        }
    }
}
