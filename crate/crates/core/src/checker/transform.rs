//! Folding a step counter into the state space so that finite-horizon
//! objectives become unbounded until and reachability objectives.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::semantics::{Kind, Objectives};
use crate::csg::{Csg, RewardStructure};
use crate::property::{Objective, PathFormula, RewardFormula};
use crate::{Error, Result};

/// The product of a game with the counter `0..=horizon + 1`, the top value
/// being absorbing.
#[derive(Debug, Clone, PartialEq)]
pub struct Transformed {
    pub game: Csg,
    pub objectives: Vec<Objective>,
    pub horizon: u32,
}

impl Transformed {
    fn layers(&self) -> usize {
        self.horizon as usize + 2
    }

    /// State of the product for original state `s` with counter `n`.
    pub fn state(&self, s: usize, n: u32) -> usize {
        s * self.layers() + n as usize
    }

    pub fn split(&self, state: usize) -> (usize, u32) {
        (state / self.layers(), (state % self.layers()) as u32)
    }
}

/// Builds the counter product. Step-bounded objectives get fresh labels
/// and reward structures (named `#<index>...`, which cannot clash with
/// parsed names); unbounded ones are lifted unchanged. Rejects input where
/// no objective has a finite horizon.
pub fn transform_mixed_horizon(game: &Csg, objectives: &[Objective]) -> Result<Transformed> {
    if !objectives.iter().any(Objective::is_finite_horizon) {
        return Err(Error::Contract("transform needs at least one finite-horizon objective".into()));
    }
    let resolved = Objectives::resolve(game, objectives)?;
    let horizon = objectives.iter().filter_map(Objective::bound).max().unwrap_or(1);
    let layers = horizon as usize + 2;
    let top = horizon + 1;
    let n_states = game.num_states() * layers;
    let at = |s: usize, n: u32| s * layers + n as usize;

    let mut enabled = Vec::with_capacity(n_states);
    let mut transitions = Vec::with_capacity(n_states);
    for s in 0..game.num_states() {
        let en: Vec<Vec<usize>> = (0..game.num_players())
            .map(|i| game.enabled_actions(s, i).to_vec())
            .collect();
        for n in 0..=top {
            let next = (n + 1).min(top);
            enabled.push(en.clone());
            transitions.push(
                (0..game.num_local_joints(s))
                    .map(|a| game.transition(s, a).iter().map(|&(t, p)| (at(t, next), p)).collect())
                    .collect::<Vec<_>>(),
            );
        }
    }
    let initial = game.initial_states().iter().map(|&s| at(s, 0)).collect();

    let lift = |f: &dyn Fn(usize, u32) -> bool| -> Vec<bool> {
        (0..n_states).map(|x| f(x / layers, (x % layers) as u32)).collect()
    };
    let mut labels: BTreeMap<String, Vec<bool>> = BTreeMap::new();
    let mut rewards = Vec::new();
    let mut out = Vec::with_capacity(objectives.len());
    for (l, kind) in resolved.kinds.iter().enumerate() {
        let (a1, a2, t, r) = (format!("#{l}a1"), format!("#{l}a2"), format!("#{l}t"), format!("#{l}r"));
        let mut until = |go: Vec<bool>, met: Vec<bool>| {
            labels.insert(a1.clone(), go);
            labels.insert(a2.clone(), met);
            Objective::Prob(PathFormula::Until(a1.clone(), a2.clone()))
        };
        let objective = match kind {
            Kind::Next { target } => until(lift(&|_, n| n == 0), lift(&|s, n| n == 1 && target[s])),
            Kind::BoundedUntil { a1, a2, k } => {
                until(lift(&|s, n| a1[s] && n <= *k), lift(&|s, n| a2[s] && n <= *k))
            }
            Kind::Until { a1, a2, .. } => until(lift(&|s, _| a1[s]), lift(&|s, _| a2[s])),
            Kind::Instant { reward, .. } | Kind::Cumulative { reward, .. } | Kind::Reach { reward, .. } => {
                let k = match kind {
                    Kind::Instant { k, .. } | Kind::Cumulative { k, .. } => *k,
                    _ => 0,
                };
                let base = &game.rewards()[*reward];
                let mut rs = RewardStructure {
                    name: r.clone(),
                    state: vec![0.0; n_states],
                    action: Vec::with_capacity(n_states),
                };
                let target = match kind {
                    Kind::Instant { .. } => lift(&|_, n| n > k),
                    Kind::Cumulative { .. } => lift(&|_, n| n >= k),
                    Kind::Reach { target, .. } => lift(&|s, _| target[s]),
                    _ => unreachable!(),
                };
                for s in 0..game.num_states() {
                    for n in 0..=top {
                        let joints = game.num_local_joints(s);
                        let row: Vec<f64> = match kind {
                            Kind::Instant { .. } if n == k => {
                                (0..joints).map(|a| game.expect(s, a, |x| base.state[x])).collect()
                            }
                            Kind::Cumulative { .. } if n < k => base.action[s].clone(),
                            Kind::Reach { .. } => base.action[s].clone(),
                            _ => vec![0.0; joints],
                        };
                        let pays_state = match kind {
                            Kind::Cumulative { .. } => n < k,
                            Kind::Reach { .. } => true,
                            _ => false,
                        };
                        if pays_state {
                            rs.state[at(s, n)] = base.state[s];
                        }
                        rs.action.push(row);
                    }
                }
                rewards.push(rs);
                labels.insert(t.clone(), target);
                Objective::Reward {
                    structure: r,
                    formula: RewardFormula::Reach(t),
                }
            }
        };
        out.push(objective);
    }
    let action_names = (0..game.num_players()).map(|i| game.action_names(i).to_vec()).collect();
    let product = Csg::from_parts(action_names, enabled, transitions, initial, labels, rewards)?;
    Ok(Transformed {
        game: product,
        objectives: out,
        horizon,
    })
}
