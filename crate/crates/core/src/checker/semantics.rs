//! Objectives resolved against a game, and the bookkeeping shared by every
//! algorithm: which coalitions have already met their objective (`done`),
//! which can no longer meet it (`failed`), and the step counter.
//!
//! Every objective is phrased through two step-dependent predicates, so
//! bounded, unbounded and counter-augmented games share one update rule:
//!
//! | objective      | continue while        | met when               |
//! |----------------|-----------------------|------------------------|
//! | `X a`          | `n = 0`               | `a ∧ n = 1`            |
//! | `a U≤k b`      | `a ∧ n ≤ k`           | `b ∧ n ≤ k`            |
//! | `a U b`        | `a`                   | `b`                    |
//! | `I=k`          | always                | `n ≥ k + 1`            |
//! | `C≤k`          | always                | `n ≥ k`                |
//! | `F a` (reward) | always                | `a`                    |
//!
//! A coalition joins `done` when its "met" predicate holds and `failed`
//! when neither predicate holds. Rewards accrue while a reward objective is
//! unresolved; `I=k` pays the expected state reward of the successor at
//! step `k`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::csg::Csg;
use crate::property::{Objective, PathFormula, RewardFormula};
use crate::{Error, Result};

/// Step counter plus the `done`/`failed` coalition sets as bitmasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Memory {
    pub step: u32,
    pub done: u64,
    pub failed: u64,
}

impl Memory {
    pub fn is_done(&self, l: usize) -> bool {
        self.done >> l & 1 == 1
    }

    pub fn is_failed(&self, l: usize) -> bool {
        self.failed >> l & 1 == 1
    }

    pub fn resolved(&self, l: usize) -> bool {
        (self.done | self.failed) >> l & 1 == 1
    }
}

impl core::fmt::Display for Memory {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        let set = |mask: u64| -> String {
            let members: Vec<String> = (0..64).filter(|l| mask >> l & 1 == 1).map(|l| format!("{}", l + 1)).collect();
            members.join(",")
        };
        write!(f, "step {} done {{{}}} failed {{{}}}", self.step, set(self.done), set(self.failed))
    }
}

/// How the step counter moves along a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepRule {
    /// Stays at zero (unbounded objectives only).
    Frozen,
    /// Counts up without limit (finite horizon).
    Counting,
    /// Counts up to `cap` and stays there.
    Saturating(u32),
}

impl StepRule {
    pub fn next(self, step: u32) -> u32 {
        match self {
            StepRule::Frozen => 0,
            StepRule::Counting => step + 1,
            StepRule::Saturating(cap) => (step + 1).min(cap),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Kind {
    Next { target: Vec<bool> },
    BoundedUntil { a1: Vec<bool>, a2: Vec<bool>, k: u32 },
    /// `sure`: met almost surely whatever is played; `never`: cannot be
    /// met at all. Both only shortcut what value iteration would converge
    /// to, and keep its round-off from creating spurious incentives.
    Until { a1: Vec<bool>, a2: Vec<bool>, sure: Vec<bool>, never: Vec<bool> },
    Instant { k: u32, reward: usize },
    Cumulative { k: u32, reward: usize },
    Reach { target: Vec<bool>, reward: usize },
}

impl Kind {
    fn is_reward(&self) -> bool {
        matches!(self, Kind::Instant { .. } | Kind::Cumulative { .. } | Kind::Reach { .. })
    }
}

/// Objectives of all coalitions, with atoms and reward names looked up.
#[derive(Debug, Clone, PartialEq)]
pub struct Objectives {
    pub(crate) kinds: Vec<Kind>,
    full: u64,
}

fn sat(game: &Csg, atom: &str) -> Result<Vec<bool>> {
    game.sat(atom)
        .ok_or_else(|| Error::InvalidModel(format!("unknown label '{atom}'")))
}

fn reward_index(game: &Csg, name: &str) -> Result<usize> {
    game.rewards()
        .iter()
        .position(|r| r.name == name)
        .ok_or_else(|| Error::InvalidModel(format!("unknown reward structure '{name}'")))
}

/// States from which `a1 U a2` holds with probability one under every
/// joint strategy. The complement is what can, with positive probability,
/// reach a state violating both or get stuck in `a1 ∧ ¬a2` forever.
fn almost_sure(game: &Csg, a1: &[bool], a2: &[bool]) -> Vec<bool> {
    let n = game.num_states();
    let pending: Vec<bool> = (0..n).map(|s| a1[s] && !a2[s]).collect();
    let mut trap = pending.clone();
    loop {
        let mut changed = false;
        for s in 0..n {
            if !trap[s] {
                continue;
            }
            let can_stay = (0..game.num_local_joints(s)).any(|a| game.transition(s, a).iter().all(|&(t, _)| trap[t]));
            if !can_stay {
                trap[s] = false;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let mut bad: Vec<bool> = (0..n).map(|s| trap[s] || (!a1[s] && !a2[s])).collect();
    loop {
        let mut changed = false;
        for s in 0..n {
            if pending[s] && !bad[s] && (0..game.num_local_joints(s)).any(|a| game.transition(s, a).iter().any(|&(t, _)| bad[t])) {
                bad[s] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    bad.iter().map(|b| !b).collect()
}

/// States from which no joint strategy meets `a1 U a2` with positive
/// probability.
fn unreachable(game: &Csg, a1: &[bool], a2: &[bool]) -> Vec<bool> {
    let n = game.num_states();
    let mut good = a2.to_vec();
    loop {
        let mut changed = false;
        for s in 0..n {
            if a1[s] && !good[s] && (0..game.num_local_joints(s)).any(|a| game.transition(s, a).iter().any(|&(t, _)| good[t])) {
                good[s] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    good.iter().map(|g| !g).collect()
}

impl Objectives {
    pub fn resolve(game: &Csg, objectives: &[Objective]) -> Result<Self> {
        if objectives.len() > 64 {
            return Err(Error::Contract("at most 64 coalitions are supported".into()));
        }
        let kinds = objectives
            .iter()
            .map(|o| {
                Ok(match o {
                    Objective::Prob(PathFormula::Next(a)) => Kind::Next { target: sat(game, a)? },
                    Objective::Prob(PathFormula::BoundedUntil(a, k, b)) => Kind::BoundedUntil {
                        a1: sat(game, a)?,
                        a2: sat(game, b)?,
                        k: *k,
                    },
                    Objective::Prob(PathFormula::Until(a, b)) => {
                        let (a1, a2) = (sat(game, a)?, sat(game, b)?);
                        Kind::Until {
                            sure: almost_sure(game, &a1, &a2),
                            never: unreachable(game, &a1, &a2),
                            a1,
                            a2,
                        }
                    }
                    Objective::Reward { structure, formula } => {
                        let reward = reward_index(game, structure)?;
                        match formula {
                            RewardFormula::Instant(k) => Kind::Instant { k: *k, reward },
                            RewardFormula::Cumulative(k) => Kind::Cumulative { k: *k, reward },
                            RewardFormula::Reach(a) => Kind::Reach {
                                target: sat(game, a)?,
                                reward,
                            },
                        }
                    }
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let full = if kinds.len() == 64 { u64::MAX } else { (1u64 << kinds.len()) - 1 };
        Ok(Self { kinds, full })
    }

    pub fn len(&self) -> usize {
        self.kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }

    pub fn is_reward(&self, l: usize) -> bool {
        self.kinds[l].is_reward()
    }

    /// Every coalition's outcome is settled.
    pub fn terminal(&self, mem: Memory) -> bool {
        (mem.done | mem.failed) == self.full
    }

    /// Adds the coalitions settled by entering `state` with counter
    /// `mem.step`.
    pub fn close(&self, state: usize, mut mem: Memory) -> Memory {
        let n = mem.step;
        for (l, kind) in self.kinds.iter().enumerate() {
            if mem.resolved(l) {
                continue;
            }
            let (go, met) = match kind {
                Kind::Next { target } => (n == 0, n == 1 && target[state]),
                Kind::BoundedUntil { a1, a2, k } => (a1[state] && n <= *k, a2[state] && n <= *k),
                Kind::Until { a1, a2, sure, never } => (a1[state] && !never[state], a2[state] || sure[state]),
                Kind::Instant { k, .. } => (true, n > *k),
                Kind::Cumulative { k, .. } => (true, n >= *k),
                Kind::Reach { target, .. } => (true, target[state]),
            };
            if met {
                mem.done |= 1 << l;
            } else if !go {
                mem.failed |= 1 << l;
            }
        }
        mem
    }

    /// Value of a settled coalition.
    pub fn settled_value(&self, l: usize, mem: Memory) -> f64 {
        if mem.is_done(l) && !self.is_reward(l) {
            1.0
        } else {
            0.0
        }
    }

    pub fn terminal_values(&self, mem: Memory) -> Vec<f64> {
        (0..self.len()).map(|l| self.settled_value(l, mem)).collect()
    }

    /// Reward collected by unsettled coalition `l` for taking joint action
    /// `local` in `state` at counter `step`.
    pub fn immediate(&self, game: &Csg, l: usize, state: usize, step: u32, local: usize) -> f64 {
        match &self.kinds[l] {
            Kind::Instant { k, reward } if step == *k => {
                let r = &game.rewards()[*reward];
                game.expect(state, local, |t| r.state[t])
            }
            Kind::Cumulative { reward, .. } | Kind::Reach { reward, .. } => {
                let r = &game.rewards()[*reward];
                r.state[state] + r.action[state][local]
            }
            _ => 0.0,
        }
    }

    /// Reward actually observed on a sampled step: like
    /// [`Objectives::immediate`] but `I=k` pays the reward of the sampled
    /// successor rather than its expectation.
    pub fn sampled(&self, game: &Csg, l: usize, state: usize, step: u32, local: usize, successor: usize) -> f64 {
        match &self.kinds[l] {
            Kind::Instant { k, reward } if step == *k => game.rewards()[*reward].state[successor],
            _ => self.immediate(game, l, state, step, local),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::csg::CsgBuilder;
    use alloc::vec;

    fn line() -> Csg {
        // 0 -> 1 -> 2, labels a on {0,1}, b on {2}
        let mut b = CsgBuilder::with_counts(&[1], 3);
        b.initial(0);
        for s in 0..3 {
            b.enable_all(s).unwrap();
            b.transition(s, &[1], vec![((s + 1).min(2), 1.0)]).unwrap();
        }
        b.label("a", 0).unwrap().label("a", 1).unwrap().label("b", 2).unwrap();
        b.state_reward("r", 1, 2.0).unwrap();
        b.build().unwrap()
    }

    fn obj(text: &str) -> Objective {
        crate::property::parse_property(&format!("<<1>>(CE,SW)max=? {text}"), None)
            .unwrap()
            .objectives
            .remove(0)
    }

    #[test]
    fn bounded_until_fails_after_bound() {
        let g = line();
        let o = Objectives::resolve(&g, &[obj("P[a U<=1 b]")]).unwrap();
        let m = o.close(1, Memory { step: 1, ..Memory::default() });
        assert!(!o.terminal(m));
        let m = o.close(2, Memory { step: 2, ..m });
        assert!(m.is_failed(0));
        let m = o.close(2, Memory { step: 1, ..Memory::default() });
        assert!(m.is_done(0));
    }

    #[test]
    fn next_settles_at_step_one() {
        let g = line();
        let o = Objectives::resolve(&g, &[obj("P[X b]")]).unwrap();
        assert!(!o.terminal(o.close(2, Memory::default())));
        assert!(o.close(2, Memory { step: 1, ..Memory::default() }).is_done(0));
        assert!(o.close(1, Memory { step: 1, ..Memory::default() }).is_failed(0));
    }

    #[test]
    fn instant_pays_successor_reward() {
        let g = line();
        let o = Objectives::resolve(&g, &[obj("R{r}[I=0]")]).unwrap();
        assert_eq!(o.immediate(&g, 0, 0, 0, 0), 2.0);
        assert_eq!(o.immediate(&g, 0, 0, 1, 0), 0.0);
        assert!(o.close(0, Memory { step: 1, ..Memory::default() }).is_done(0));
    }

    #[test]
    fn unknown_names_rejected() {
        let g = line();
        assert!(Objectives::resolve(&g, &[obj("P[X nope]")]).is_err());
        assert!(Objectives::resolve(&g, &[obj("R{nope}[C<=1]")]).is_err());
    }
}
