//! Equilibrium model checking of concurrent stochastic games.
//!
//! Finite-horizon properties are solved by backward induction over the step
//! counter, unbounded ones by value iteration, and mixtures by first folding
//! the counter into the state space. Every stage is a normal form game solved
//! for an optimal Nash or correlated equilibrium.

mod semantics;
mod stage;
mod transform;

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::vec::Vec;

pub use semantics::{Memory, Objectives, StepRule};
pub use stage::{solve_stage, stage_game, StageSolution, StageWitness, ValueTable};
pub use transform::{transform_mixed_horizon, Transformed};

use crate::coalition::build_coalition_game;
use crate::csg::{check_reach_target, AssumptionReport, Csg};
use crate::nash::SearchConfig;
use crate::num::abs;
use crate::property::{normalize_min_to_max, Bound, Objective, PathFormula, PropertyAst, RewardFormula};
use crate::synth::{assemble_strategy, SynthesizedStrategy};
use crate::{par_map, Criterion, EquilibriumKind, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckerConfig {
    /// Sup-norm change below which value iteration stops.
    pub epsilon: f64,
    pub max_iterations: usize,
    /// Settings for the Nash search in stage games with three or more
    /// coalitions.
    pub search: SearchConfig,
    /// Keep the stage equilibria and assemble a strategy.
    pub synthesize: bool,
}

impl Default for CheckerConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-6,
            max_iterations: 10_000,
            search: SearchConfig::default(),
            synthesize: true,
        }
    }
}

/// Which equilibrium each stage selects.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Selection {
    pub eq: EquilibriumKind,
    pub criterion: Criterion,
    /// Coalitions minimise.
    pub negate: bool,
}

pub type WitnessTable = BTreeMap<(usize, Memory), StageWitness>;

/// Values of a game for a list of objectives.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    /// Per state, one value per objective, starting with an empty memory.
    pub values: Vec<Vec<f64>>,
    /// Value iteration rounds (0 for backward induction).
    pub iterations: usize,
    /// Last sup-norm change (0 for backward induction).
    pub residual: f64,
    pub rule: StepRule,
    /// Values of every materialized (state, memory) context.
    pub contexts: BTreeMap<(usize, Memory), Vec<f64>>,
    /// Stage equilibria of every reached non-terminal context.
    pub witnesses: WitnessTable,
}

impl ValueTable for BTreeMap<(usize, Memory), Vec<f64>> {
    fn lookup(&self, state: usize, mem: Memory) -> Option<&[f64]> {
        self.get(&(state, mem)).map(Vec::as_slice)
    }
}

/// Dense values indexed by a context map.
struct Table {
    index: BTreeMap<(usize, Memory), usize>,
    values: Vec<f64>,
    width: usize,
}

impl Table {
    fn entries(&self) -> impl Iterator<Item = ((usize, Memory), Vec<f64>)> + '_ {
        self.index
            .iter()
            .map(|(&ctx, &i)| (ctx, self.values[i * self.width..(i + 1) * self.width].to_vec()))
    }
}

impl ValueTable for Table {
    fn lookup(&self, state: usize, mem: Memory) -> Option<&[f64]> {
        let i = *self.index.get(&(state, mem))?;
        Some(&self.values[i * self.width..(i + 1) * self.width])
    }
}

fn start(objectives: &Objectives, s: usize) -> Memory {
    objectives.close(s, Memory::default())
}

fn successors(game: &Csg, objectives: &Objectives, rule: StepRule, s: usize, mem: Memory, out: &mut BTreeSet<(usize, Memory)>) {
    let step = rule.next(mem.step);
    for a in 0..game.num_local_joints(s) {
        for &(t, _) in game.transition(s, a) {
            out.insert((t, objectives.close(t, Memory { step, ..mem })));
        }
    }
}

type StageOutcome = Result<(Vec<f64>, Option<StageWitness>)>;

fn solve_context(
    game: &Csg,
    objectives: &Objectives,
    rule: StepRule,
    selection: &Selection,
    config: &CheckerConfig,
    (s, mem): (usize, Memory),
    next: &dyn ValueTable,
) -> StageOutcome {
    if objectives.terminal(mem) {
        return Ok((objectives.terminal_values(mem), None));
    }
    let nfg = stage_game(game, objectives, s, mem, rule, next)?;
    let solved = solve_stage(&nfg, selection.eq, selection.criterion, selection.negate, &config.search)?
        .ok_or(Error::StageNeNotFound { state: s })?;
    Ok((solved.values, config.synthesize.then_some(solved.witness)))
}

/// Number of steps after which an objective is settled on every path.
fn settle_step(objective: &Objective) -> Option<u32> {
    match objective {
        Objective::Prob(PathFormula::Next(_)) => Some(1),
        Objective::Prob(PathFormula::BoundedUntil(_, k, _)) => Some(k + 1),
        Objective::Reward { formula: RewardFormula::Instant(k), .. } => Some(k + 1),
        Objective::Reward { formula: RewardFormula::Cumulative(k), .. } => Some(*k),
        _ => None,
    }
}

/// Backward induction for objectives that all have a finite horizon.
pub fn check_bounded(game: &Csg, objectives: &[Objective], selection: &Selection, config: &CheckerConfig) -> Result<Solution> {
    let mut top = 0;
    for o in objectives {
        top = top.max(settle_step(o).ok_or_else(|| {
            Error::Contract(format!("backward induction needs finite-horizon objectives, got {o}"))
        })?);
    }
    let resolved = Objectives::resolve(game, objectives)?;
    let rule = StepRule::Counting;

    let mut levels: Vec<Vec<(usize, Memory)>> = Vec::new();
    let mut current: BTreeSet<(usize, Memory)> = (0..game.num_states()).map(|s| (s, start(&resolved, s))).collect();
    loop {
        let mut next = BTreeSet::new();
        for &(s, mem) in &current {
            if !resolved.terminal(mem) {
                successors(game, &resolved, rule, s, mem, &mut next);
            }
        }
        levels.push(current.into_iter().collect());
        if next.is_empty() {
            break;
        }
        if levels.len() as u64 > u64::from(top) + 1 {
            return Err(Error::Internal("objectives unsettled past their horizon".into()));
        }
        current = next;
    }

    let width = resolved.len();
    let mut later = Table {
        index: BTreeMap::new(),
        values: Vec::new(),
        width,
    };
    let mut witnesses = WitnessTable::new();
    let mut contexts = BTreeMap::new();
    for level in levels.iter().rev() {
        let solved = par_map(level, |&ctx| solve_context(game, &resolved, rule, selection, config, ctx, &later));
        let mut table = Table {
            index: BTreeMap::new(),
            values: Vec::with_capacity(level.len() * width),
            width,
        };
        for (i, (&ctx, outcome)) in level.iter().zip(solved).enumerate() {
            let (values, witness) = outcome?;
            table.index.insert(ctx, i);
            table.values.extend(values);
            if let Some(w) = witness {
                witnesses.insert(ctx, w);
            }
        }
        contexts.extend(table.entries());
        later = table;
    }
    let values = (0..game.num_states())
        .map(|s| later.lookup(s, start(&resolved, s)).map(<[f64]>::to_vec))
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| Error::Internal("missing initial context".into()))?;
    Ok(Solution {
        values,
        iterations: 0,
        residual: 0.0,
        rule,
        contexts,
        witnesses,
    })
}

/// Single-step objectives; the same as [`check_bounded`].
pub fn check_next(game: &Csg, objectives: &[Objective], selection: &Selection, config: &CheckerConfig) -> Result<Solution> {
    check_bounded(game, objectives, selection, config)
}

/// Decides whether an unbounded objective reaches its target (`¬a ∨ b` for
/// `a U b`, the goal for `F`) with probability one from every state under
/// every strategy.
pub fn check_assumption(game: &Csg, objective: &Objective) -> Result<AssumptionReport> {
    let target: Vec<bool> = match objective {
        Objective::Prob(PathFormula::Until(a, b)) => {
            let (a, b) = (sat(game, a)?, sat(game, b)?);
            a.iter().zip(&b).map(|(&x, &y)| !x || y).collect()
        }
        Objective::Reward { formula: RewardFormula::Reach(a), .. } => sat(game, a)?,
        other => {
            return Err(Error::Contract(format!("no reachability assumption for {other}")));
        }
    };
    Ok(check_reach_target(game, &target))
}

fn sat(game: &Csg, atom: &str) -> Result<Vec<bool>> {
    game.sat(atom).ok_or_else(|| Error::InvalidModel(format!("unknown label '{atom}'")))
}

/// Value iteration for unbounded until and reachability reward objectives.
/// Fails with [`Error::AssumptionViolated`] when some state can avoid an
/// objective's target forever.
pub fn check_unbounded(game: &Csg, objectives: &[Objective], selection: &Selection, config: &CheckerConfig) -> Result<Solution> {
    for (l, o) in objectives.iter().enumerate() {
        if o.is_finite_horizon() {
            return Err(Error::Contract(format!("value iteration needs unbounded objectives, got {o}")));
        }
        if let Some(state) = check_assumption(game, o)?.counterexample {
            return Err(Error::AssumptionViolated { objective: l + 1, state });
        }
    }
    let resolved = Objectives::resolve(game, objectives)?;
    let rule = StepRule::Frozen;

    let mut seen: BTreeSet<(usize, Memory)> = BTreeSet::new();
    let mut frontier: Vec<(usize, Memory)> = (0..game.num_states()).map(|s| (s, start(&resolved, s))).collect();
    while let Some((s, mem)) = frontier.pop() {
        if !seen.insert((s, mem)) || resolved.terminal(mem) {
            continue;
        }
        let mut next = BTreeSet::new();
        successors(game, &resolved, rule, s, mem, &mut next);
        frontier.extend(next.into_iter().filter(|c| !seen.contains(c)));
    }
    let contexts: Vec<(usize, Memory)> = seen.into_iter().collect();
    let width = resolved.len();
    let mut table = Table {
        index: contexts.iter().enumerate().map(|(i, &c)| (c, i)).collect(),
        values: contexts.iter().flat_map(|&(_, m)| resolved.terminal_values(m)).collect(),
        width,
    };

    let mut residual = f64::INFINITY;
    for iteration in 1..=config.max_iterations {
        let solved = par_map(&contexts, |&ctx| solve_context(game, &resolved, rule, selection, config, ctx, &table));
        let mut values = Vec::with_capacity(table.values.len());
        let mut witnesses = WitnessTable::new();
        for (&ctx, outcome) in contexts.iter().zip(solved) {
            let (v, w) = outcome?;
            values.extend(v);
            if let Some(w) = w {
                witnesses.insert(ctx, w);
            }
        }
        residual = values.iter().zip(&table.values).fold(0.0, |acc: f64, (a, b)| acc.max(abs(a - b)));
        table.values = values;
        if residual < config.epsilon {
            let values = (0..game.num_states())
                .map(|s| table.lookup(s, start(&resolved, s)).map(<[f64]>::to_vec))
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| Error::Internal("missing initial context".into()))?;
            return Ok(Solution {
                values,
                iterations: iteration,
                residual,
                rule,
                contexts: table.entries().collect(),
                witnesses,
            });
        }
    }
    Err(Error::NotConverged {
        iterations: config.max_iterations,
        residual,
    })
}

/// How a property was solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    BackwardInduction,
    ValueIteration,
    /// Value iteration on the counter product.
    Transformed,
}

/// Sum of the coalition values and, for threshold properties, the verdict.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub sum: f64,
    pub verdict: Option<bool>,
}

pub fn evaluate_bound(values: &[f64], bound: Bound) -> Evaluation {
    let sum = values.iter().sum();
    let verdict = match bound {
        Bound::Query => None,
        Bound::Threshold(cmp, x) => Some(cmp.holds(sum, x)),
    };
    Evaluation { sum, verdict }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialResult {
    pub state: usize,
    pub values: Vec<f64>,
    pub evaluation: Evaluation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutput {
    pub method: Method,
    /// Per state of the game, one value per coalition.
    pub values: Vec<Vec<f64>>,
    pub initial: Vec<InitialResult>,
    pub iterations: usize,
    pub residual: f64,
    pub strategy: Option<SynthesizedStrategy>,
}

/// Checks an equilibrium property on a game and, if configured, synthesizes
/// a strategy attaining the optimal equilibrium values.
pub fn check_property(csg: &Csg, property: &PropertyAst, config: &CheckerConfig) -> Result<CheckOutput> {
    if property.partition.num_players() != csg.num_players() {
        return Err(Error::InvalidPartition(format!(
            "property covers {} players, game has {}",
            property.partition.num_players(),
            csg.num_players()
        )));
    }
    let normalized = normalize_min_to_max(property);
    let selection = Selection {
        eq: property.eq,
        criterion: property.criterion,
        negate: normalized.negate,
    };
    let coalition = build_coalition_game(csg, &property.partition)?;
    let game = &coalition.game;
    let objectives = &property.objectives;
    Objectives::resolve(game, objectives)?;

    let finite = objectives.iter().filter(|o| o.is_finite_horizon()).count();
    let (method, solution) = if finite == objectives.len() {
        (Method::BackwardInduction, check_bounded(game, objectives, &selection, config)?)
    } else if finite == 0 {
        (Method::ValueIteration, check_unbounded(game, objectives, &selection, config)?)
    } else {
        let product = transform_mixed_horizon(game, objectives)?;
        let solved = check_unbounded(&product.game, &product.objectives, &selection, config).map_err(|e| match e {
            Error::StageNeNotFound { state } => Error::StageNeNotFound {
                state: product.split(state).0,
            },
            Error::AssumptionViolated { objective, state } => Error::AssumptionViolated {
                objective,
                state: product.split(state).0,
            },
            other => other,
        })?;
        let values = (0..game.num_states())
            .map(|s| solved.values[product.state(s, 0)].clone())
            .collect();
        let unfold = |(x, mem): (usize, Memory)| {
            let (s, n) = product.split(x);
            (s, Memory { step: n, ..mem })
        };
        let witnesses = solved.witnesses.into_iter().map(|(c, w)| (unfold(c), w)).collect();
        let contexts = solved.contexts.into_iter().map(|(c, v)| (unfold(c), v)).collect();
        let solution = Solution {
            values,
            iterations: solved.iterations,
            residual: solved.residual,
            rule: StepRule::Saturating(product.horizon + 1),
            contexts,
            witnesses,
        };
        (Method::Transformed, solution)
    };

    let initial = csg
        .initial_states()
        .iter()
        .map(|&s| InitialResult {
            state: s,
            values: solution.values[s].clone(),
            evaluation: evaluate_bound(&solution.values[s], property.bound),
        })
        .collect();
    let strategy = if config.synthesize {
        Some(assemble_strategy(&coalition, property, &solution)?)
    } else {
        None
    };
    Ok(CheckOutput {
        method,
        values: solution.values,
        initial,
        iterations: solution.iterations,
        residual: solution.residual,
        strategy,
    })
}

#[cfg(test)]
mod tests;
