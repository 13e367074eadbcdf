//! One-shot games played at a single state and memory.

use alloc::vec::Vec;

use super::semantics::{Memory, Objectives, StepRule};
use crate::correlated::solve_ce;
use crate::csg::Csg;
use crate::nash::{solve_ne_with, SearchConfig};
use crate::nfg::{negate_utilities, NormalFormGame};
use crate::{Criterion, EquilibriumKind, Error, Result};

/// Values of coalitions at (state, memory) pairs, from the previous
/// iteration or the next step.
pub trait ValueTable {
    fn lookup(&self, state: usize, mem: Memory) -> Option<&[f64]>;
}

/// Equilibrium chosen in a stage game, over the local action indices of the
/// enabled actions.
#[derive(Debug, Clone, PartialEq)]
pub enum StageWitness {
    /// Independent distributions, one per coalition.
    Profile(Vec<Vec<f64>>),
    /// One distribution over local joint actions.
    Joint(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageSolution {
    pub values: Vec<f64>,
    pub witness: StageWitness,
}

/// Builds the stage game at `state` with memory `mem`. Player `l`'s utility
/// for a joint action is its settled value if already settled, otherwise
/// the immediate reward plus the expected value of the successor memory.
pub fn stage_game(
    game: &Csg,
    objectives: &Objectives,
    state: usize,
    mem: Memory,
    rule: StepRule,
    next: &dyn ValueTable,
) -> Result<NormalFormGame> {
    let m = objectives.len();
    let counts = game.local_counts(state);
    let step = rule.next(mem.step);
    let joints = game.num_local_joints(state);
    let mut utilities = Vec::with_capacity(joints * m);
    for local in 0..joints {
        let base = utilities.len();
        for l in 0..m {
            let v = if mem.resolved(l) {
                objectives.settled_value(l, mem)
            } else {
                objectives.immediate(game, l, state, mem.step, local)
            };
            utilities.push(v);
        }
        for &(t, p) in game.transition(state, local) {
            let succ = objectives.close(t, Memory { step, ..mem });
            let values = next.lookup(t, succ).ok_or_else(|| {
                Error::Internal(alloc::format!("no value for state {t} at {succ:?}"))
            })?;
            for l in (0..m).filter(|&l| !mem.resolved(l)) {
                utilities[base + l] += p * values[l];
            }
        }
    }
    NormalFormGame::from_table(counts, utilities)
}

/// Solves a stage game for an optimal equilibrium. With `negate` the
/// players minimise; the returned values are always in the game's own
/// units. `None` means the Nash search found nothing.
pub fn solve_stage(
    stage: &NormalFormGame,
    eq: EquilibriumKind,
    criterion: Criterion,
    negate: bool,
    search: &SearchConfig,
) -> Result<Option<StageSolution>> {
    let negated;
    let target = if negate {
        negated = negate_utilities(stage);
        &negated
    } else {
        stage
    };
    let sign = if negate { -1.0 } else { 1.0 };
    let (values, witness) = match eq {
        EquilibriumKind::Correlated => {
            let ce = solve_ce(target, criterion)?;
            (ce.values, StageWitness::Joint(ce.joint.probs().to_vec()))
        }
        EquilibriumKind::Nash => match solve_ne_with(target, criterion, search)? {
            Some(ne) => (ne.values, StageWitness::Profile(ne.profile.strategies().to_vec())),
            None => return Ok(None),
        },
    };
    Ok(Some(StageSolution {
        // `+ 0.0` maps a negated zero back to 0
        values: values.iter().map(|v| sign * v + 0.0).collect(),
        witness,
    }))
}
