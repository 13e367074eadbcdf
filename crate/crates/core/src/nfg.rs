//! Normal form games, strategy representations and expected utilities.
//!
//! Utilities live in a dense table indexed by a mixed-radix joint-action
//! index. The first player is the most significant digit, so for three
//! players with two actions each the joint order is `(0,0,0), (0,0,1),
//! (0,1,0), ...`.

use alloc::borrow::Cow;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::num::abs;
use crate::{Error, Result, PROB_TOL};

#[derive(Debug, Clone, PartialEq)]
pub struct NormalFormGame {
    counts: Vec<usize>,
    strides: Vec<usize>,
    names: Option<Vec<Vec<String>>>,
    /// `utilities[joint * n + player]`
    utilities: Vec<f64>,
}

pub(crate) fn strides_for(counts: &[usize]) -> Vec<usize> {
    let mut strides = vec![1; counts.len()];
    for i in (0..counts.len().saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * counts[i + 1];
    }
    strides
}

impl NormalFormGame {
    /// Builds a game with named actions. `utilities` is the flat table
    /// `utilities[joint * n + player]` in mixed-radix joint order.
    pub fn new(actions: Vec<Vec<String>>, utilities: Vec<f64>) -> Result<Self> {
        for (i, names) in actions.iter().enumerate() {
            for (a, name) in names.iter().enumerate() {
                if names[..a].contains(name) {
                    return Err(Error::InvalidGame(format!(
                        "duplicate action '{name}' for player {}",
                        i + 1
                    )));
                }
            }
        }
        let counts = actions.iter().map(Vec::len).collect();
        let mut game = Self::from_table(counts, utilities)?;
        game.names = Some(actions);
        Ok(game)
    }

    /// Builds a game with anonymous actions (named `a0`, `a1`, ...).
    pub fn from_table(counts: Vec<usize>, utilities: Vec<f64>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::InvalidGame("a game needs at least one player".into()));
        }
        if let Some(i) = counts.iter().position(|&c| c == 0) {
            return Err(Error::InvalidGame(format!("player {} has no actions", i + 1)));
        }
        let joint: usize = counts.iter().product();
        if utilities.len() != joint * counts.len() {
            return Err(Error::InvalidGame(format!(
                "expected {} utility entries, got {}",
                joint * counts.len(),
                utilities.len()
            )));
        }
        if utilities.iter().any(|u| !u.is_finite()) {
            return Err(Error::InvalidGame("utilities must be finite".into()));
        }
        Ok(Self {
            strides: strides_for(&counts),
            counts,
            names: None,
            utilities,
        })
    }

    /// Builds a game by evaluating `f(joint_actions)` for every joint tuple.
    pub fn from_fn(counts: Vec<usize>, mut f: impl FnMut(&[usize]) -> Vec<f64>) -> Result<Self> {
        let n = counts.len();
        let joint: usize = counts.iter().product();
        let mut utilities = Vec::with_capacity(joint * n);
        for tuple in JointActions::new(&counts) {
            let row = f(&tuple);
            if row.len() != n {
                return Err(Error::Shape(format!("utility row of length {} for {n} players", row.len())));
            }
            utilities.extend_from_slice(&row);
        }
        Self::from_table(counts, utilities)
    }

    pub fn num_players(&self) -> usize {
        self.counts.len()
    }

    pub fn num_actions(&self, player: usize) -> usize {
        self.counts[player]
    }

    pub fn action_counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn num_joint(&self) -> usize {
        self.utilities.len() / self.counts.len()
    }

    pub fn action_name(&self, player: usize, action: usize) -> Cow<'_, str> {
        match &self.names {
            Some(names) => Cow::Borrowed(names[player][action].as_str()),
            None => Cow::Owned(format!("a{action}")),
        }
    }

    pub fn action_index(&self, player: usize, name: &str) -> Option<usize> {
        (0..self.counts[player]).find(|&a| self.action_name(player, a) == name)
    }

    pub fn encode(&self, actions: &[usize]) -> usize {
        actions.iter().zip(&self.strides).map(|(a, s)| a * s).sum()
    }

    pub fn decode(&self, joint: usize) -> Vec<usize> {
        self.strides
            .iter()
            .zip(&self.counts)
            .map(|(s, c)| (joint / s) % c)
            .collect()
    }

    /// Action of `player` inside the joint index.
    #[inline]
    pub fn action_of(&self, joint: usize, player: usize) -> usize {
        (joint / self.strides[player]) % self.counts[player]
    }

    /// Joint index obtained by replacing `player`'s action in `joint`.
    #[inline]
    pub fn with_action(&self, joint: usize, player: usize, action: usize) -> usize {
        let s = self.strides[player];
        joint - self.action_of(joint, player) * s + action * s
    }

    #[inline]
    pub fn utility(&self, joint: usize, player: usize) -> f64 {
        self.utilities[joint * self.counts.len() + player]
    }

    pub fn utility_row(&self, joint: usize) -> &[f64] {
        let n = self.counts.len();
        &self.utilities[joint * n..(joint + 1) * n]
    }

    pub fn set_utility(&mut self, joint: usize, player: usize, value: f64) {
        let n = self.counts.len();
        self.utilities[joint * n + player] = value;
    }

    pub fn joint_actions(&self) -> JointActions {
        JointActions::new(&self.counts)
    }
}

/// Iterator over every joint action tuple in mixed-radix order.
#[derive(Debug, Clone)]
pub struct JointActions {
    counts: Vec<usize>,
    next: Option<Vec<usize>>,
}

impl JointActions {
    pub fn new(counts: &[usize]) -> Self {
        let next = if counts.iter().all(|&c| c > 0) {
            Some(vec![0; counts.len()])
        } else {
            None
        };
        Self {
            counts: counts.to_vec(),
            next,
        }
    }
}

impl Iterator for JointActions {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        let mut i = succ.len();
        loop {
            if i == 0 {
                break;
            }
            i -= 1;
            succ[i] += 1;
            if succ[i] < self.counts[i] {
                self.next = Some(succ);
                break;
            }
            succ[i] = 0;
        }
        Some(current)
    }
}

fn check_distribution(probs: &[f64], what: &str) -> Result<()> {
    if probs.is_empty() {
        return Err(Error::Distribution(format!("{what} is empty")));
    }
    if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
        return Err(Error::Distribution(format!("{what} has invalid entry {p}")));
    }
    let total: f64 = probs.iter().sum();
    if abs(total - 1.0) > PROB_TOL {
        return Err(Error::Distribution(format!("{what} sums to {total}")));
    }
    Ok(())
}

fn renormalize(probs: &mut [f64], what: &str) -> Result<()> {
    for p in probs.iter_mut() {
        if !p.is_finite() || *p < -PROB_TOL {
            return Err(Error::Distribution(format!("{what} has invalid entry {p}")));
        }
        *p = p.max(0.0);
    }
    let total: f64 = probs.iter().sum();
    if total <= 0.0 {
        return Err(Error::Distribution(format!("{what} has no mass")));
    }
    probs.iter_mut().for_each(|p| *p /= total);
    Ok(())
}

/// One mixed strategy per player.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyProfile {
    strategies: Vec<Vec<f64>>,
}

impl StrategyProfile {
    pub fn new(strategies: Vec<Vec<f64>>) -> Result<Self> {
        for (i, s) in strategies.iter().enumerate() {
            check_distribution(s, &format!("strategy of player {}", i + 1))?;
        }
        Ok(Self { strategies })
    }

    /// Like [`StrategyProfile::new`] but rescales each strategy to sum to one.
    pub fn normalized(mut strategies: Vec<Vec<f64>>) -> Result<Self> {
        for (i, s) in strategies.iter_mut().enumerate() {
            renormalize(s, &format!("strategy of player {}", i + 1))?;
        }
        Ok(Self { strategies })
    }

    pub fn pure(counts: &[usize], actions: &[usize]) -> Self {
        let strategies = counts
            .iter()
            .zip(actions)
            .map(|(&c, &a)| {
                let mut s = vec![0.0; c];
                s[a] = 1.0;
                s
            })
            .collect();
        Self { strategies }
    }

    pub fn uniform(counts: &[usize]) -> Self {
        let strategies = counts.iter().map(|&c| vec![1.0 / c as f64; c]).collect();
        Self { strategies }
    }

    pub fn num_players(&self) -> usize {
        self.strategies.len()
    }

    pub fn strategy(&self, player: usize) -> &[f64] {
        &self.strategies[player]
    }

    pub fn strategies(&self) -> &[Vec<f64>] {
        &self.strategies
    }

    pub fn support(&self, player: usize) -> Vec<usize> {
        self.strategies[player]
            .iter()
            .enumerate()
            .filter(|(_, p)| **p > 0.0)
            .map(|(a, _)| a)
            .collect()
    }

    fn check_shape(&self, game: &NormalFormGame) -> Result<()> {
        if self.strategies.len() != game.num_players()
            || self
                .strategies
                .iter()
                .zip(game.action_counts())
                .any(|(s, &c)| s.len() != c)
        {
            return Err(Error::Shape("profile does not match the game".into()));
        }
        Ok(())
    }
}

/// A distribution over joint action tuples.
#[derive(Debug, Clone, PartialEq)]
pub struct JointStrategy {
    probs: Vec<f64>,
}

impl JointStrategy {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        check_distribution(&probs, "joint strategy")?;
        Ok(Self { probs })
    }

    pub fn normalized(mut probs: Vec<f64>) -> Result<Self> {
        renormalize(&mut probs, "joint strategy")?;
        Ok(Self { probs })
    }

    pub fn point_mass(num_joint: usize, joint: usize) -> Self {
        let mut probs = vec![0.0; num_joint];
        probs[joint] = 1.0;
        Self { probs }
    }

    pub fn uniform(num_joint: usize) -> Self {
        Self {
            probs: vec![1.0 / num_joint as f64; num_joint],
        }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

/// A public signal over per-player signal sets plus per-player decoders
/// mapping signals to actions.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelatedProfile {
    action_counts: Vec<usize>,
    signal_counts: Vec<usize>,
    signal_dist: Vec<f64>,
    decoders: Vec<Vec<usize>>,
}

impl CorrelatedProfile {
    pub fn new(
        action_counts: Vec<usize>,
        signal_counts: Vec<usize>,
        signal_dist: Vec<f64>,
        decoders: Vec<Vec<usize>>,
    ) -> Result<Self> {
        let n = action_counts.len();
        if signal_counts.len() != n || decoders.len() != n {
            return Err(Error::Shape("signal sets and decoders must cover every player".into()));
        }
        let joint: usize = signal_counts.iter().product();
        if signal_dist.len() != joint {
            return Err(Error::Shape(format!(
                "signal distribution has {} entries, expected {joint}",
                signal_dist.len()
            )));
        }
        check_distribution(&signal_dist, "signal distribution")?;
        for i in 0..n {
            if decoders[i].len() != signal_counts[i] {
                return Err(Error::Shape(format!("decoder of player {} is not total", i + 1)));
            }
            if decoders[i].iter().any(|&a| a >= action_counts[i]) {
                return Err(Error::Shape(format!("decoder of player {} maps outside A_i", i + 1)));
            }
        }
        Ok(Self {
            action_counts,
            signal_counts,
            signal_dist,
            decoders,
        })
    }

    /// The identity-decoder form of a joint strategy.
    pub fn from_joint(action_counts: &[usize], joint: &JointStrategy) -> Result<Self> {
        let decoders = action_counts.iter().map(|&c| (0..c).collect()).collect();
        Self::new(
            action_counts.to_vec(),
            action_counts.to_vec(),
            joint.probs.clone(),
            decoders,
        )
    }
}

pub fn welfare(values: &[f64]) -> f64 {
    values.iter().sum()
}

pub fn spread(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    max - min
}

/// Expected utility of every player under an independent strategy profile.
pub fn expected_utility_profile(game: &NormalFormGame, profile: &StrategyProfile) -> Result<Vec<f64>> {
    profile.check_shape(game)?;
    let n = game.num_players();
    let mut values = vec![0.0; n];
    for joint in 0..game.num_joint() {
        let mut weight = 1.0;
        for i in 0..n {
            weight *= profile.strategies[i][game.action_of(joint, i)];
            if weight == 0.0 {
                break;
            }
        }
        if weight != 0.0 {
            for (v, u) in values.iter_mut().zip(game.utility_row(joint)) {
                *v += weight * u;
            }
        }
    }
    Ok(values)
}

pub fn expected_utility_joint(game: &NormalFormGame, joint: &JointStrategy) -> Result<Vec<f64>> {
    if joint.len() != game.num_joint() {
        return Err(Error::Shape(format!(
            "joint strategy has {} entries, game has {} joint actions",
            joint.len(),
            game.num_joint()
        )));
    }
    let mut values = vec![0.0; game.num_players()];
    for (idx, &p) in joint.probs.iter().enumerate() {
        if p != 0.0 {
            for (v, u) in values.iter_mut().zip(game.utility_row(idx)) {
                *v += p * u;
            }
        }
    }
    Ok(values)
}

/// `u_i(σ_{-i}[a])` for every action `a` of `player`.
pub fn action_values(game: &NormalFormGame, profile: &StrategyProfile, player: usize) -> Result<Vec<f64>> {
    profile.check_shape(game)?;
    let n = game.num_players();
    let mut values = vec![0.0; game.num_actions(player)];
    for joint in 0..game.num_joint() {
        let mut weight = 1.0;
        for j in (0..n).filter(|&j| j != player) {
            weight *= profile.strategies[j][game.action_of(joint, j)];
            if weight == 0.0 {
                break;
            }
        }
        if weight != 0.0 {
            values[game.action_of(joint, player)] += weight * game.utility(joint, player);
        }
    }
    Ok(values)
}

/// The product distribution of a profile.
pub fn profile_to_joint(profile: &StrategyProfile) -> JointStrategy {
    let counts: Vec<usize> = profile.strategies.iter().map(Vec::len).collect();
    let probs = JointActions::new(&counts)
        .map(|tuple| {
            tuple
                .iter()
                .enumerate()
                .map(|(i, &a)| profile.strategies[i][a])
                .product()
        })
        .collect();
    JointStrategy { probs }
}

/// Marginalises a correlated profile into a distribution over joint actions.
pub fn correlated_to_joint(cp: &CorrelatedProfile) -> JointStrategy {
    let action_strides = strides_for(&cp.action_counts);
    let total: usize = cp.action_counts.iter().product();
    let mut probs = vec![0.0; total];
    for (signals, &p) in JointActions::new(&cp.signal_counts).zip(&cp.signal_dist) {
        let idx: usize = signals
            .iter()
            .enumerate()
            .map(|(i, &d)| cp.decoders[i][d] * action_strides[i])
            .sum();
        probs[idx] += p;
    }
    JointStrategy { probs }
}

pub fn negate_utilities(game: &NormalFormGame) -> NormalFormGame {
    let mut negated = game.clone();
    negated.utilities.iter_mut().for_each(|u| *u = -*u);
    negated
}

/// Keeps only the listed actions of every player.
pub fn restrict(game: &NormalFormGame, keep: &[Vec<usize>]) -> NormalFormGame {
    let counts: Vec<usize> = keep.iter().map(Vec::len).collect();
    let n = game.num_players();
    let mut utilities = Vec::with_capacity(counts.iter().product::<usize>() * n);
    for tuple in JointActions::new(&counts) {
        let original: Vec<usize> = tuple.iter().enumerate().map(|(i, &a)| keep[i][a]).collect();
        utilities.extend_from_slice(game.utility_row(game.encode(&original)));
    }
    let names = game.names.as_ref().map(|names| {
        keep.iter()
            .enumerate()
            .map(|(i, acts)| acts.iter().map(|&a| names[i][a].clone()).collect())
            .collect()
    });
    NormalFormGame {
        strides: strides_for(&counts),
        counts,
        names,
        utilities,
    }
}

/// A game with strictly dominated actions removed, plus the map from
/// reduced action indices back to the original ones.
#[derive(Debug, Clone)]
pub struct DominanceReduction {
    pub game: NormalFormGame,
    pub index_map: Vec<Vec<usize>>,
    original_counts: Vec<usize>,
}

impl DominanceReduction {
    pub fn lift_profile(&self, profile: &StrategyProfile) -> StrategyProfile {
        let strategies = self
            .index_map
            .iter()
            .zip(&self.original_counts)
            .enumerate()
            .map(|(i, (map, &c))| {
                let mut s = vec![0.0; c];
                for (reduced, &orig) in map.iter().enumerate() {
                    s[orig] = profile.strategies[i][reduced];
                }
                s
            })
            .collect();
        StrategyProfile { strategies }
    }

    pub fn lift_joint(&self, joint: &JointStrategy) -> JointStrategy {
        let strides = strides_for(&self.original_counts);
        let mut probs = vec![0.0; self.original_counts.iter().product()];
        for (tuple, &p) in self.game.joint_actions().zip(&joint.probs) {
            let idx: usize = tuple
                .iter()
                .enumerate()
                .map(|(i, &a)| self.index_map[i][a] * strides[i])
                .sum();
            probs[idx] = p;
        }
        JointStrategy { probs }
    }
}

fn strictly_dominates(game: &NormalFormGame, player: usize, better: usize, worse: usize) -> bool {
    (0..game.num_joint())
        .filter(|&joint| game.action_of(joint, player) == worse)
        .all(|joint| {
            let alt = game.with_action(joint, player, better);
            game.utility(alt, player) > game.utility(joint, player)
        })
}

/// Iterated removal of actions strictly dominated by another pure action.
pub fn remove_dominated(game: &NormalFormGame) -> DominanceReduction {
    let n = game.num_players();
    let mut keep: Vec<Vec<usize>> = game.action_counts().iter().map(|&c| (0..c).collect()).collect();
    let mut current = game.clone();
    loop {
        let mut changed = false;
        for i in 0..n {
            let count = current.num_actions(i);
            let dominated: Vec<usize> = (0..count)
                .filter(|&a| (0..count).any(|b| b != a && strictly_dominates(&current, i, b, a)))
                .collect();
            if !dominated.is_empty() {
                let local_keep: Vec<Vec<usize>> = (0..n)
                    .map(|j| {
                        (0..current.num_actions(j))
                            .filter(|a| j != i || !dominated.contains(a))
                            .collect()
                    })
                    .collect();
                keep[i] = local_keep[i].iter().map(|&a| keep[i][a]).collect();
                current = restrict(&current, &local_keep);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    DominanceReduction {
        game: current,
        index_map: keep,
        original_counts: game.action_counts().to_vec(),
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;
    use alloc::string::ToString;

    /// The three-car intersection game.
    pub fn intersection() -> NormalFormGame {
        let names = |_| vec!["pro".to_string(), "yld".to_string()];
        NormalFormGame::new(
            (0..3).map(names).collect(),
            vec![
                -1000.0, -1000.0, -100.0, // pro pro pro
                -1000.0, -100.0, -5.0, // pro pro yld
                5.0, -5.0, 5.0, // pro yld pro
                5.0, -5.0, -5.0, // pro yld yld
                -5.0, -1000.0, -100.0, // yld pro pro
                -5.0, 5.0, -5.0, // yld pro yld
                -5.0, -5.0, 5.0, // yld yld pro
                -10.0, -10.0, -10.0, // yld yld yld
            ],
        )
        .unwrap()
    }

    pub fn bimatrix(a: &[&[f64]], b: &[&[f64]]) -> NormalFormGame {
        let rows = a.len();
        let cols = a[0].len();
        NormalFormGame::from_fn(vec![rows, cols], |t| vec![a[t[0]][t[1]], b[t[0]][t[1]]]).unwrap()
    }
}
