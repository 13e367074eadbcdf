//! Strategies assembled from the stage equilibria of a model-checking run.
//!
//! A strategy's memory is the step counter together with the coalitions
//! that have already met or missed their objective (see [`Memory`]). Only
//! the (state, memory) pairs reachable from the initial states under the
//! strategy itself get an entry; once every coalition is settled play is
//! over and no entry is needed.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::vec::Vec;

use crate::checker::{Memory, Objectives, Solution, StageWitness, StepRule};
use crate::coalition::CoalitionGame;
use crate::csg::Csg;
use crate::nfg::JointActions;
use crate::property::PropertyAst;
use crate::{Error, Result};

/// Probabilities below this are dropped from exported decisions.
const DROP_TOL: f64 = 1e-12;

/// A decision over actions of the coalition game, given as composite
/// action digits (0 is the coalition's idle action).
#[derive(Debug, Clone, PartialEq)]
pub enum Decision {
    /// One independent distribution per coalition.
    Profile(Vec<Vec<(usize, f64)>>),
    /// A distribution over joint actions, one digit per coalition.
    Joint(Vec<(Vec<usize>, f64)>),
}

impl Decision {
    /// Joint actions played with positive probability, with that
    /// probability.
    pub fn joint_support(&self) -> Vec<(Vec<usize>, f64)> {
        match self {
            Decision::Joint(entries) => entries.clone(),
            Decision::Profile(dists) => {
                let counts: Vec<usize> = dists.iter().map(Vec::len).collect();
                JointActions::new(&counts)
                    .map(|pick| {
                        let digits = pick.iter().zip(dists).map(|(&k, d)| d[k].0).collect();
                        let p = pick.iter().zip(dists).map(|(&k, d)| d[k].1).product();
                        (digits, p)
                    })
                    .collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesizedStrategy {
    /// The property the strategy was synthesized for; its partition and
    /// objectives drive the memory update.
    pub property: PropertyAst,
    pub rule: StepRule,
    pub entries: BTreeMap<(usize, Memory), Decision>,
}

impl SynthesizedStrategy {
    pub fn decision(&self, state: usize, mem: Memory) -> Result<&Decision> {
        self.entries.get(&(state, mem)).ok_or_else(|| Error::MissingStrategyEntry {
            state,
            memory: format!("{mem}"),
        })
    }
}

fn decision_for(game: &Csg, state: usize, witness: &StageWitness) -> Decision {
    match witness {
        StageWitness::Profile(dists) => Decision::Profile(
            dists
                .iter()
                .enumerate()
                .map(|(c, d)| {
                    let enabled = game.enabled_actions(state, c);
                    d.iter()
                        .enumerate()
                        .filter(|(_, &p)| p > DROP_TOL)
                        .map(|(k, &p)| (enabled[k], p))
                        .collect()
                })
                .collect(),
        ),
        StageWitness::Joint(probs) => Decision::Joint(
            probs
                .iter()
                .enumerate()
                .filter(|(_, &p)| p > DROP_TOL)
                .map(|(a, &p)| (game.local_joint(state, a), p))
                .collect(),
        ),
    }
}

/// Keeps the stage equilibria reachable from the initial states when
/// every coalition follows them.
pub fn assemble_strategy(coalition: &CoalitionGame, property: &PropertyAst, solution: &Solution) -> Result<SynthesizedStrategy> {
    let game = &coalition.game;
    let objectives = Objectives::resolve(game, &property.objectives)?;
    let mut entries = BTreeMap::new();
    let mut seen = BTreeSet::new();
    let mut stack: Vec<(usize, Memory)> = game
        .initial_states()
        .iter()
        .map(|&s| (s, objectives.close(s, Memory::default())))
        .collect();
    while let Some((s, mem)) = stack.pop() {
        if objectives.terminal(mem) || !seen.insert((s, mem)) {
            continue;
        }
        let witness = solution
            .witnesses
            .get(&(s, mem))
            .ok_or_else(|| Error::Internal(format!("no stage equilibrium at state {s}, {mem}")))?;
        let decision = decision_for(game, s, witness);
        let step = solution.rule.next(mem.step);
        for (digits, p) in decision.joint_support() {
            if p <= DROP_TOL {
                continue;
            }
            let local = game
                .local_index(s, &digits)
                .ok_or_else(|| Error::Internal(format!("disabled action in decision at state {s}")))?;
            for &(t, _) in game.transition(s, local) {
                stack.push((t, objectives.close(t, Memory { step, ..mem })));
            }
        }
        entries.insert((s, mem), decision);
    }
    Ok(SynthesizedStrategy {
        property: property.clone(),
        rule: solution.rule,
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::checker::{check_property, CheckerConfig};
    use crate::csg::fixtures::intersection_one_shot;
    use crate::csg::goal_fixtures::random_goal_csg;
    use crate::property::parse_property;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn synth(game: &Csg, text: &str) -> SynthesizedStrategy {
        let p = parse_property(text, None).unwrap();
        check_property(game, &p, &CheckerConfig::default()).unwrap().strategy.unwrap()
    }

    fn pro_yld(game: &Csg, digits: &[usize]) -> Vec<String> {
        digits.iter().enumerate().map(|(i, &d)| game.action_name(i, d).to_string()).collect()
    }

    #[test]
    fn fair_one_shot_mixes_two_outcomes() {
        let g = intersection_one_shot();
        let s = synth(&g, "<<1:2:3>>(CE,SF)max=? (R{u1}[F done] + R{u2}[F done] + R{u3}[F done])");
        assert_eq!(s.entries.len(), 1);
        let Decision::Joint(entries) = &s.entries[&(0, Memory::default())] else {
            panic!("expected a joint decision")
        };
        let mut named: Vec<(Vec<String>, f64)> = entries.iter().map(|(d, p)| (pro_yld(&g, d), *p)).collect();
        named.sort_by(|a, b| a.0.cmp(&b.0));
        assert_eq!(named.len(), 2);
        assert_eq!(named[0].0, ["pro", "yld", "pro"]);
        assert_eq!(named[1].0, ["yld", "pro", "yld"]);
        assert!(named.iter().all(|(_, p)| (p - 0.5).abs() < 1e-6));
    }

    #[test]
    fn pure_witness_gives_point_masses() {
        let g = intersection_one_shot();
        let s = synth(&g, "<<1:2:3>>(NE,SW)max=? (R{u1}[F done] + R{u2}[F done] + R{u3}[F done])");
        let Decision::Profile(dists) = &s.entries[&(0, Memory::default())] else {
            panic!("expected a profile")
        };
        for d in dists {
            assert_eq!(d.len(), 1);
            assert!((d[0].1 - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn bounded_until_entries_are_reachable_steps() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let g = random_goal_csg(&mut rng, 2, 2, 6);
        let s = synth(&g, "<<1:2>>(CE,SW)max=? (P[a U<=2 b] + P[true U<=2 goal])");
        assert!(!s.entries.is_empty());
        assert!(s.entries.keys().all(|(_, m)| m.step <= 2));
        assert!(s.entries.keys().any(|(_, m)| m.step == 0));
        // every entry's successors under its own decision have entries or are settled
        let objectives = Objectives::resolve(&g, &s.property.objectives).unwrap();
        for (&(st, mem), decision) in &s.entries {
            for (digits, p) in decision.joint_support() {
                assert!(p > 0.0);
                let local = g.local_index(st, &digits).expect("enabled action");
                for &(t, _) in g.transition(st, local) {
                    let next = objectives.close(t, Memory { step: mem.step + 1, ..mem });
                    assert!(objectives.terminal(next) || s.entries.contains_key(&(t, next)));
                }
            }
        }
    }

    #[test]
    fn distributions_sum_to_one_and_use_enabled_actions() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut checked = 0;
        for text in [
            "<<1:2>>(NE,SF)max=? (R{r1}[F goal] + R{r2}[F goal])",
            "<<1:2>>(CE,SW)min=? (R{r1}[C<=2] + R{r2}[I=1])",
            "<<1:2>>(CE,SF)max=? (P[a U b] + P[true U goal])",
        ] {
            let g = random_goal_csg(&mut rng, 2, 3, 5);
            let p = parse_property(text, None).unwrap();
            // value iteration may cycle between stage equilibria
            let s = match check_property(&g, &p, &CheckerConfig::default()) {
                Ok(out) => out.strategy.unwrap(),
                Err(Error::NotConverged { .. }) => continue,
                Err(e) => panic!("{e}"),
            };
            checked += 1;
            for (&(st, _), decision) in &s.entries {
                let total: f64 = decision.joint_support().iter().map(|e| e.1).sum();
                assert!((total - 1.0).abs() < 1e-9);
                for (digits, _) in decision.joint_support() {
                    for (i, d) in digits.iter().enumerate() {
                        assert!(g.enabled_actions(st, i).contains(d));
                    }
                }
            }
        }
        assert!(checked >= 2);
    }
}
