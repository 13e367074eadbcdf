//! Concurrent stochastic games.
//!
//! Each player action is addressed by a *digit*: 0 is the idle action ⊥ and
//! `a + 1` is the player's action `a`. In a state `s` player `i` chooses from
//! `enabled_actions(s, i)`, which is either a set of non-idle digits or
//! exactly `[0]`. The joint actions available in `s` are the product of
//! those sets, numbered by a mixed-radix *local* index with player 1 as the
//! most significant digit, the same convention as [`NormalFormGame`].
//! Transitions and action rewards are stored densely per local index.
//!
//! [`NormalFormGame`]: crate::nfg::NormalFormGame

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::nfg::strides_for;
use crate::num::abs;
use crate::{Error, Result, PROB_TOL};

/// Sparse distribution over successor states, sorted by state.
pub type Distribution = Vec<(usize, f64)>;

#[derive(Debug, Clone, PartialEq)]
pub struct RewardStructure {
    pub name: String,
    /// `r_S(s)`
    pub state: Vec<f64>,
    /// `r_A(s, α)` indexed by state then local joint index.
    pub action: Vec<Vec<f64>>,
}

impl RewardStructure {
    pub fn zero(name: &str, game: &Csg) -> Self {
        Self {
            name: name.to_string(),
            state: vec![0.0; game.num_states()],
            action: (0..game.num_states()).map(|s| vec![0.0; game.num_local_joints(s)]).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct StateData {
    enabled: Vec<Vec<usize>>,
    strides: Vec<usize>,
    transitions: Vec<Distribution>,
}

impl StateData {
    fn local_count(&self) -> usize {
        self.enabled.iter().map(Vec::len).product()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Csg {
    action_names: Vec<Vec<String>>,
    states: Vec<StateData>,
    initial: Vec<usize>,
    labels: BTreeMap<String, Vec<bool>>,
    rewards: Vec<RewardStructure>,
}

impl Csg {
    pub fn num_players(&self) -> usize {
        self.action_names.len()
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn initial_states(&self) -> &[usize] {
        &self.initial
    }

    /// `|A_i|`, not counting ⊥.
    pub fn num_actions(&self, player: usize) -> usize {
        self.action_names[player].len()
    }

    pub fn action_names(&self, player: usize) -> &[String] {
        &self.action_names[player]
    }

    /// Name of an action digit; ⊥ is written `-`.
    pub fn action_name(&self, player: usize, digit: usize) -> &str {
        if digit == 0 {
            "-"
        } else {
            &self.action_names[player][digit - 1]
        }
    }

    /// Digit of a named action, accepting `-` for ⊥.
    pub fn action_digit(&self, player: usize, name: &str) -> Option<usize> {
        if name == "-" {
            return Some(0);
        }
        self.action_names[player].iter().position(|n| n == name).map(|a| a + 1)
    }

    /// `A_i(s)`: the enabled digits of `player` in `state`, `[0]` when the
    /// player has nothing to do there.
    pub fn enabled_actions(&self, state: usize, player: usize) -> &[usize] {
        &self.states[state].enabled[player]
    }

    /// Per-player number of choices in `state`.
    pub fn local_counts(&self, state: usize) -> Vec<usize> {
        self.states[state].enabled.iter().map(Vec::len).collect()
    }

    pub fn num_local_joints(&self, state: usize) -> usize {
        self.states[state].local_count()
    }

    /// Digits of the joint action with the given local index.
    pub fn local_joint(&self, state: usize, index: usize) -> Vec<usize> {
        let data = &self.states[state];
        data.enabled
            .iter()
            .zip(&data.strides)
            .map(|(en, &stride)| en[(index / stride) % en.len()])
            .collect()
    }

    /// Local index of a joint action given by digits, if it is consistent
    /// with the enabled sets of `state`.
    pub fn local_index(&self, state: usize, digits: &[usize]) -> Option<usize> {
        let data = &self.states[state];
        if digits.len() != data.enabled.len() {
            return None;
        }
        let mut index = 0;
        for ((en, &stride), d) in data.enabled.iter().zip(&data.strides).zip(digits) {
            index += en.iter().position(|e| e == d)? * stride;
        }
        Some(index)
    }

    pub fn transition(&self, state: usize, local: usize) -> &[(usize, f64)] {
        &self.states[state].transitions[local]
    }

    pub fn labels(&self) -> &BTreeMap<String, Vec<bool>> {
        &self.labels
    }

    /// States satisfying an atom. `true` holds everywhere.
    pub fn sat(&self, atom: &str) -> Option<Vec<bool>> {
        if atom == "true" {
            return Some(vec![true; self.num_states()]);
        }
        self.labels.get(atom).cloned()
    }

    pub fn rewards(&self) -> &[RewardStructure] {
        &self.rewards
    }

    pub fn reward(&self, name: &str) -> Option<&RewardStructure> {
        self.rewards.iter().find(|r| r.name == name)
    }

    pub(crate) fn from_parts(
        action_names: Vec<Vec<String>>,
        enabled: Vec<Vec<Vec<usize>>>,
        transitions: Vec<Vec<Distribution>>,
        initial: Vec<usize>,
        labels: BTreeMap<String, Vec<bool>>,
        rewards: Vec<RewardStructure>,
    ) -> Result<Self> {
        let states = enabled
            .into_iter()
            .zip(transitions)
            .map(|(enabled, transitions)| {
                let counts: Vec<usize> = enabled.iter().map(Vec::len).collect();
                StateData {
                    strides: strides_for(&counts),
                    enabled,
                    transitions,
                }
            })
            .collect();
        let game = Self {
            action_names,
            states,
            initial,
            labels,
            rewards,
        };
        game.validate()?;
        Ok(game)
    }

    fn validate(&self) -> Result<()> {
        let n = self.num_states();
        if n == 0 {
            return Err(Error::InvalidModel("the game has no states".into()));
        }
        if self.initial.is_empty() {
            return Err(Error::InvalidModel("no initial state".into()));
        }
        if let Some(&s) = self.initial.iter().find(|&&s| s >= n) {
            return Err(Error::InvalidModel(format!("initial state {s} out of range")));
        }
        for (s, data) in self.states.iter().enumerate() {
            for (i, en) in data.enabled.iter().enumerate() {
                let bad = en.is_empty()
                    || (en.contains(&0) && en.len() > 1)
                    || en.iter().any(|&d| d > self.action_names[i].len())
                    || en.windows(2).any(|w| w[0] >= w[1]);
                if bad {
                    return Err(Error::InvalidModel(format!(
                        "state {s}: malformed enabled set for player {}",
                        i + 1
                    )));
                }
            }
            if data.transitions.len() != data.local_count() {
                return Err(Error::InvalidModel(format!("state {s}: wrong number of transitions")));
            }
            for (local, dist) in data.transitions.iter().enumerate() {
                let total: f64 = dist.iter().map(|(_, p)| p).sum();
                let bad_target = dist.iter().any(|&(t, p)| t >= n || !(p > 0.0) || !p.is_finite());
                if bad_target || abs(total - 1.0) > PROB_TOL || dist.is_empty() {
                    return Err(Error::InvalidModel(format!(
                        "state {s}: transition {} is not a distribution over states",
                        self.joint_label(s, local)
                    )));
                }
            }
        }
        for (name, sat) in &self.labels {
            if sat.len() != n {
                return Err(Error::InvalidModel(format!("label '{name}' has the wrong length")));
            }
        }
        for r in &self.rewards {
            let shape_ok = r.state.len() == n
                && r.action.len() == n
                && r.action.iter().enumerate().all(|(s, a)| a.len() == self.num_local_joints(s));
            if !shape_ok {
                return Err(Error::InvalidModel(format!("reward '{}' has the wrong shape", r.name)));
            }
            if r.state.iter().chain(r.action.iter().flatten()).any(|v| !v.is_finite()) {
                return Err(Error::InvalidModel(format!("reward '{}' is not finite", r.name)));
            }
        }
        Ok(())
    }

    /// `(a,b,-)` style rendering of a joint action.
    pub fn joint_label(&self, state: usize, local: usize) -> String {
        let digits = self.local_joint(state, local);
        let names: Vec<&str> = digits.iter().enumerate().map(|(i, &d)| self.action_name(i, d)).collect();
        format!("({})", names.join(","))
    }

    /// Expected value of `f` over the successors of a joint action.
    pub fn expect(&self, state: usize, local: usize, mut f: impl FnMut(usize) -> f64) -> f64 {
        self.transition(state, local).iter().map(|&(t, p)| p * f(t)).sum()
    }
}

/// Incremental construction of a [`Csg`].
///
/// Players without an `enabled` entry in a state get `[⊥]` there.
#[derive(Debug, Clone)]
pub struct CsgBuilder {
    action_names: Vec<Vec<String>>,
    num_states: usize,
    initial: Vec<usize>,
    labels: BTreeMap<String, Vec<bool>>,
    enabled: BTreeMap<(usize, usize), Vec<usize>>,
    transitions: BTreeMap<(usize, Vec<usize>), Distribution>,
    state_rewards: BTreeMap<String, BTreeMap<usize, f64>>,
    action_rewards: BTreeMap<String, BTreeMap<(usize, Vec<usize>), f64>>,
}

impl CsgBuilder {
    pub fn new(action_names: Vec<Vec<String>>, num_states: usize) -> Self {
        Self {
            action_names,
            num_states,
            initial: Vec::new(),
            labels: BTreeMap::new(),
            enabled: BTreeMap::new(),
            transitions: BTreeMap::new(),
            state_rewards: BTreeMap::new(),
            action_rewards: BTreeMap::new(),
        }
    }

    /// Anonymous actions `a0, a1, ...` with the given counts.
    pub fn with_counts(counts: &[usize], num_states: usize) -> Self {
        let names = counts
            .iter()
            .map(|&c| (0..c).map(|a| format!("a{a}")).collect())
            .collect();
        Self::new(names, num_states)
    }

    pub fn num_players(&self) -> usize {
        self.action_names.len()
    }

    pub fn action_digit(&self, player: usize, name: &str) -> Option<usize> {
        if name == "-" {
            return Some(0);
        }
        self.action_names.get(player)?.iter().position(|n| n == name).map(|a| a + 1)
    }

    pub fn initial(&mut self, state: usize) -> &mut Self {
        if !self.initial.contains(&state) {
            self.initial.push(state);
        }
        self
    }

    pub fn label(&mut self, name: &str, state: usize) -> Result<&mut Self> {
        self.check_state(state)?;
        let n = self.num_states;
        self.labels.entry(name.to_string()).or_insert_with(|| vec![false; n])[state] = true;
        Ok(self)
    }

    /// Declares a label even if it holds nowhere.
    pub fn declare_label(&mut self, name: &str) -> &mut Self {
        let n = self.num_states;
        self.labels.entry(name.to_string()).or_insert_with(|| vec![false; n]);
        self
    }

    /// Sets `A_i(s)` to the given non-idle digits (0 is rejected; an empty
    /// list means ⊥ only).
    pub fn enabled(&mut self, state: usize, player: usize, digits: &[usize]) -> Result<&mut Self> {
        self.check_state(state)?;
        self.check_player(player)?;
        let mut d = digits.to_vec();
        d.sort_unstable();
        d.dedup();
        if d.iter().any(|&x| x == 0 || x > self.action_names[player].len()) {
            return Err(Error::InvalidModel(format!(
                "state {state}: unknown action for player {}",
                player + 1
            )));
        }
        if d.is_empty() {
            d.push(0);
        }
        self.enabled.insert((state, player), d);
        Ok(self)
    }

    /// Enables every action of every player in `state`.
    pub fn enable_all(&mut self, state: usize) -> Result<&mut Self> {
        for i in 0..self.num_players() {
            let all: Vec<usize> = (1..=self.action_names[i].len()).collect();
            self.enabled(state, i, &all)?;
        }
        Ok(self)
    }

    pub fn transition(&mut self, state: usize, digits: &[usize], dist: Distribution) -> Result<&mut Self> {
        self.check_state(state)?;
        if self.transitions.insert((state, digits.to_vec()), dist).is_some() {
            return Err(Error::InvalidModel(format!("state {state}: duplicate transition")));
        }
        Ok(self)
    }

    pub fn state_reward(&mut self, name: &str, state: usize, value: f64) -> Result<&mut Self> {
        self.check_state(state)?;
        *self
            .state_rewards
            .entry(name.to_string())
            .or_default()
            .entry(state)
            .or_insert(0.0) += value;
        self.action_rewards.entry(name.to_string()).or_default();
        Ok(self)
    }

    pub fn action_reward(&mut self, name: &str, state: usize, digits: &[usize], value: f64) -> Result<&mut Self> {
        self.check_state(state)?;
        *self
            .action_rewards
            .entry(name.to_string())
            .or_default()
            .entry((state, digits.to_vec()))
            .or_insert(0.0) += value;
        self.state_rewards.entry(name.to_string()).or_default();
        Ok(self)
    }

    fn check_state(&self, state: usize) -> Result<()> {
        if state >= self.num_states {
            return Err(Error::InvalidModel(format!("state {state} out of range")));
        }
        Ok(())
    }

    fn check_player(&self, player: usize) -> Result<()> {
        if player >= self.num_players() {
            return Err(Error::InvalidModel(format!("player {} out of range", player + 1)));
        }
        Ok(())
    }

    pub fn build(&self) -> Result<Csg> {
        let n = self.num_players();
        let enabled: Vec<Vec<Vec<usize>>> = (0..self.num_states)
            .map(|s| (0..n).map(|i| self.enabled.get(&(s, i)).cloned().unwrap_or_else(|| vec![0])).collect())
            .collect();
        let mut transitions = Vec::with_capacity(self.num_states);
        for (s, en) in enabled.iter().enumerate() {
            let counts: Vec<usize> = en.iter().map(Vec::len).collect();
            let strides = strides_for(&counts);
            let total: usize = counts.iter().product();
            let mut row = Vec::with_capacity(total);
            for local in 0..total {
                let digits: Vec<usize> = en
                    .iter()
                    .zip(&strides)
                    .map(|(e, &st)| e[(local / st) % e.len()])
                    .collect();
                let dist = self.transitions.get(&(s, digits.clone())).ok_or_else(|| {
                    Error::InvalidModel(format!("state {s}: no transition for {}", self.render(&digits)))
                })?;
                let mut merged: BTreeMap<usize, f64> = BTreeMap::new();
                for &(t, p) in dist {
                    *merged.entry(t).or_insert(0.0) += p;
                }
                row.push(merged.into_iter().filter(|(_, p)| *p != 0.0).collect());
            }
            transitions.push(row);
        }
        for (s, digits) in self.transitions.keys() {
            let consistent = digits.len() == n && digits.iter().zip(&enabled[*s]).all(|(d, e)| e.contains(d));
            if !consistent {
                return Err(Error::InvalidModel(format!(
                    "state {s}: transition for {} which is not enabled",
                    self.render(digits)
                )));
            }
        }
        let mut names: Vec<&String> = self.state_rewards.keys().collect();
        names.dedup();
        let mut rewards = Vec::new();
        for name in names {
            let mut state = vec![0.0; self.num_states];
            for (&s, &v) in &self.state_rewards[name] {
                state[s] = v;
            }
            let mut action: Vec<Vec<f64>> = enabled
                .iter()
                .map(|en| vec![0.0; en.iter().map(Vec::len).product()])
                .collect();
            for ((s, digits), &v) in self.action_rewards.get(name).into_iter().flatten() {
                let en = &enabled[*s];
                let counts: Vec<usize> = en.iter().map(Vec::len).collect();
                let strides = strides_for(&counts);
                let mut local = 0;
                for ((e, st), d) in en.iter().zip(&strides).zip(digits) {
                    let pos = e.iter().position(|x| x == d).ok_or_else(|| {
                        Error::InvalidModel(format!(
                            "reward '{name}' at state {s}: {} is not enabled",
                            self.render(digits)
                        ))
                    })?;
                    local += pos * st;
                }
                if digits.len() != n {
                    return Err(Error::InvalidModel(format!("reward '{name}': wrong joint action arity")));
                }
                action[*s][local] = v;
            }
            rewards.push(RewardStructure {
                name: name.clone(),
                state,
                action,
            });
        }
        Csg::from_parts(
            self.action_names.clone(),
            enabled,
            transitions,
            self.initial.clone(),
            self.labels.clone(),
            rewards,
        )
    }

    fn render(&self, digits: &[usize]) -> String {
        let names: Vec<&str> = digits
            .iter()
            .enumerate()
            .map(|(i, &d)| match d {
                0 => "-",
                d => self.action_names.get(i).and_then(|a| a.get(d - 1)).map_or("?", String::as_str),
            })
            .collect();
        format!("({})", names.join(","))
    }
}

/// Outcome of the qualitative reachability check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssumptionReport {
    pub holds: bool,
    /// Smallest state that can avoid the target forever, if any.
    pub counterexample: Option<usize>,
}

/// Decides whether `target` is reached with probability one from every
/// state whatever the players do.
///
/// First the largest set of non-target states in which some joint action
/// keeps the play inside the set forever is computed; then every non-target
/// state that can reach that set with positive probability is marked.
pub fn check_reach_target(game: &Csg, target: &[bool]) -> AssumptionReport {
    let n = game.num_states();
    let mut trap: Vec<bool> = target.iter().map(|t| !t).collect();
    loop {
        let mut changed = false;
        for s in 0..n {
            if trap[s] {
                let can_stay = (0..game.num_local_joints(s))
                    .any(|a| game.transition(s, a).iter().all(|&(t, _)| trap[t]));
                if !can_stay {
                    trap[s] = false;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let mut bad = trap;
    loop {
        let mut changed = false;
        for s in 0..n {
            if !bad[s] && !target[s] {
                let reaches = (0..game.num_local_joints(s))
                    .any(|a| game.transition(s, a).iter().any(|&(t, _)| bad[t]));
                if reaches {
                    bad[s] = true;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let counterexample = bad.iter().position(|&b| b);
    AssumptionReport {
        holds: counterexample.is_none(),
        counterexample,
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    /// One state per action tuple of the intersection game plus the start:
    /// state 0 moves to `done` (state 1) with action rewards `u1..u3`.
    pub fn intersection_one_shot() -> Csg {
        let g = crate::nfg::fixtures::intersection();
        let names = vec![vec!["pro".to_string(), "yld".to_string()]; 3];
        let mut b = CsgBuilder::new(names, 2);
        b.initial(0);
        b.enable_all(0).unwrap();
        b.label("done", 1).unwrap();
        b.transition(1, &[0, 0, 0], vec![(1, 1.0)]).unwrap();
        for joint in g.joint_actions() {
            let digits: Vec<usize> = joint.iter().map(|a| a + 1).collect();
            b.transition(0, &digits, vec![(1, 1.0)]).unwrap();
            for i in 0..3 {
                b.action_reward(&format!("u{}", i + 1), 0, &digits, g.utility(g.encode(&joint), i))
                    .unwrap();
            }
        }
        b.build().unwrap()
    }

    /// A random game with every action enabled everywhere and each
    /// transition spread over one to three successors.
    pub fn random_csg(rng: &mut impl rand::Rng, players: usize, actions: usize, states: usize) -> Csg {
        let mut b = CsgBuilder::with_counts(&vec![actions; players], states);
        b.initial(0);
        for s in 0..states {
            b.enable_all(s).unwrap();
            let counts = vec![actions; players];
            for joint in crate::nfg::JointActions::new(&counts) {
                let digits: Vec<usize> = joint.iter().map(|a| a + 1).collect();
                let k = rng.random_range(1..=3usize.min(states));
                let mut succ: Vec<usize> = Vec::new();
                while succ.len() < k {
                    let t = rng.random_range(0..states);
                    if !succ.contains(&t) {
                        succ.push(t);
                    }
                }
                let weights: Vec<f64> = succ.iter().map(|_| rng.random_range(0.1..1.0)).collect();
                let total: f64 = weights.iter().sum();
                b.transition(s, &digits, succ.into_iter().zip(weights.iter().map(|w| w / total)).collect())
                    .unwrap();
            }
        }
        b.build().unwrap()
    }
}
