//! Monte Carlo evaluation of a synthesized strategy on its game.
//!
//! Runs are split into fixed-size batches, each with its own ChaCha8 stream
//! derived from the seed and the batch index, and batch sums are merged in
//! index order. Results therefore depend on the seed only, not on how many
//! threads run the batches.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::checker::{Memory, Objectives};
use crate::coalition::build_coalition_game;
use crate::csg::Csg;
use crate::num::sqrt;
use crate::synth::{Decision, SynthesizedStrategy};
use crate::{par_map, Error, Result};

const BATCH: usize = 256;
/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub samples: usize,
    pub seed: u64,
    /// Step limit per run; `None` means `100 · |S|`.
    pub horizon: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationReport {
    pub state: usize,
    pub samples: usize,
    pub seed: u64,
    /// Per coalition, the sample mean of the objective's path utility.
    pub means: Vec<f64>,
    /// Half-widths of 95% normal confidence intervals around `means`.
    pub half_widths: Vec<f64>,
    /// Runs stopped by the step limit before every objective settled.
    pub truncated: usize,
}

struct Sums {
    total: Vec<f64>,
    squares: Vec<f64>,
    truncated: usize,
}

fn pick<T: Copy>(rng: &mut ChaCha8Rng, entries: impl Iterator<Item = (T, f64)> + Clone) -> Option<T> {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = None;
    for (x, p) in entries {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = Some(x);
        if u < acc {
            return last;
        }
    }
    last
}

/// Samples runs from `initial` with every coalition following `strategy`
/// and averages each coalition's path utility: the indicator of its path
/// formula or the reward it accumulates.
pub fn simulate(csg: &Csg, strategy: &SynthesizedStrategy, initial: usize, config: &SimulationConfig) -> Result<SimulationReport> {
    if initial >= csg.num_states() {
        return Err(Error::Contract(format!("state {initial} out of range")));
    }
    if config.samples == 0 {
        return Err(Error::Contract("at least one sample is needed".into()));
    }
    let coalition = build_coalition_game(csg, &strategy.property.partition)?;
    let game = &coalition.game;
    let objectives = Objectives::resolve(game, &strategy.property.objectives)?;
    let m = objectives.len();
    let horizon = config.horizon.unwrap_or(100 * csg.num_states());

    let run = |rng: &mut ChaCha8Rng, utility: &mut [f64]| -> Result<bool> {
        utility.iter_mut().for_each(|u| *u = 0.0);
        let mut s = initial;
        let mut mem = objectives.close(s, Memory::default());
        let mut steps = 0;
        let mut truncated = false;
        while !objectives.terminal(mem) {
            if steps == horizon {
                truncated = true;
                break;
            }
            let local = match strategy.decision(s, mem)? {
                Decision::Profile(dists) => {
                    let digits = dists
                        .iter()
                        .map(|d| pick(rng, d.iter().copied()))
                        .collect::<Option<Vec<_>>>()
                        .ok_or_else(|| Error::Contract(format!("empty decision at state {s}")))?;
                    game.local_index(s, &digits)
                }
                Decision::Joint(entries) => {
                    let k = pick(rng, entries.iter().enumerate().map(|(k, e)| (k, e.1)))
                        .ok_or_else(|| Error::Contract(format!("empty decision at state {s}")))?;
                    game.local_index(s, &entries[k].0)
                }
            }
            .ok_or_else(|| Error::Contract(format!("strategy picks a disabled action at state {s}")))?;
            let t = pick(rng, game.transition(s, local).iter().copied())
                .ok_or_else(|| Error::Internal(format!("no successor at state {s}")))?;
            for (l, u) in utility.iter_mut().enumerate() {
                if !mem.resolved(l) {
                    *u += objectives.sampled(game, l, s, mem.step, local, t);
                }
            }
            mem = objectives.close(t, Memory { step: strategy.rule.next(mem.step), ..mem });
            s = t;
            steps += 1;
        }
        // unsettled objectives of a truncated run count as missed
        for (l, u) in utility.iter_mut().enumerate() {
            if !objectives.is_reward(l) {
                *u = objectives.settled_value(l, mem);
            }
        }
        Ok(truncated)
    };

    let batches: Vec<usize> = (0..config.samples.div_ceil(BATCH)).collect();
    let sums = par_map(&batches, |&b| -> Result<Sums> {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(b as u64);
        let count = BATCH.min(config.samples - b * BATCH);
        let mut out = Sums {
            total: vec![0.0; m],
            squares: vec![0.0; m],
            truncated: 0,
        };
        let mut utility = vec![0.0; m];
        for _ in 0..count {
            if run(&mut rng, &mut utility)? {
                out.truncated += 1;
            }
            for l in 0..m {
                out.total[l] += utility[l];
                out.squares[l] += utility[l] * utility[l];
            }
        }
        Ok(out)
    });

    let mut total = vec![0.0; m];
    let mut squares = vec![0.0; m];
    let mut truncated = 0;
    for batch in sums {
        let batch = batch?;
        for l in 0..m {
            total[l] += batch.total[l];
            squares[l] += batch.squares[l];
        }
        truncated += batch.truncated;
    }
    let n = config.samples as f64;
    let means: Vec<f64> = total.iter().map(|t| t / n).collect();
    let half_widths = means
        .iter()
        .zip(&squares)
        .map(|(mean, sq)| {
            if config.samples < 2 {
                return f64::INFINITY;
            }
            let var = ((sq - n * mean * mean) / (n - 1.0)).max(0.0);
            Z95 * sqrt(var / n)
        })
        .collect();
    Ok(SimulationReport {
        state: initial,
        samples: config.samples,
        seed: config.seed,
        means,
        half_widths,
        truncated,
    })
}
