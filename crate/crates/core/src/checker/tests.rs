use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::coalition::{build_coalition_game, CoalitionPartition};
use crate::csg::fixtures::intersection_one_shot;
use crate::csg::goal_fixtures::random_goal_csg;
use crate::csg::CsgBuilder;
use crate::nfg::fixtures::intersection;
use crate::nfg::{welfare, JointActions, NormalFormGame};
use crate::property::{parse_property, Comparison};

fn prop(text: &str) -> PropertyAst {
    parse_property(text, None).unwrap()
}

fn objs(text: &str) -> Vec<Objective> {
    prop(&alloc::format!("<<1:2>>(CE,SW)max=? ({text})")).objectives
}

fn ce_sw() -> Selection {
    Selection {
        eq: EquilibriumKind::Correlated,
        criterion: Criterion::SocialWelfare,
        negate: false,
    }
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| abs(x - y) <= tol)
}

/// Two players with two actions each; state 0 flips a coin into `g1`
/// (state 1) or `g2` (state 2) whatever is played, states 1 and 2 loop.
fn coin() -> Csg {
    let mut b = CsgBuilder::with_counts(&[2, 2], 3);
    b.initial(0);
    b.enable_all(0).unwrap();
    for joint in JointActions::new(&[2, 2]) {
        b.transition(0, &[joint[0] + 1, joint[1] + 1], vec![(1, 0.5), (2, 0.5)]).unwrap();
    }
    for s in 1..3 {
        b.transition(s, &[0, 0], vec![(s, 1.0)]).unwrap();
    }
    b.label("g1", 1).unwrap().label("g2", 2).unwrap();
    b.build().unwrap()
}

struct Fixed(Vec<f64>);

impl ValueTable for Fixed {
    fn lookup(&self, state: usize, _: Memory) -> Option<&[f64]> {
        Some(&self.0[state * 2..state * 2 + 2])
    }
}

#[test]
fn stage_of_settled_coalitions_is_constant() {
    let g = coin();
    let o = Objectives::resolve(&g, &objs("P[true U g1] + P[true U g2]")).unwrap();
    let mem = Memory {
        step: 0,
        done: 0b11,
        failed: 0,
    };
    let nfg = stage_game(&g, &o, 0, mem, StepRule::Frozen, &Fixed(vec![0.0; 6])).unwrap();
    for j in 0..nfg.num_joint() {
        assert_eq!(nfg.utility_row(j), &[1.0, 1.0]);
    }
}

#[test]
fn stage_mixes_successor_values() {
    let g = coin();
    let o = Objectives::resolve(&g, &objs("P[true U g1] + P[true U g2]")).unwrap();
    let next = Fixed(vec![0.0, 0.0, 0.2, 0.4, 0.6, 1.0]);
    let nfg = stage_game(&g, &o, 0, Memory::default(), StepRule::Frozen, &next).unwrap();
    for j in 0..nfg.num_joint() {
        assert!(close(nfg.utility_row(j), &[0.4, 0.7], 1e-15));
    }
}

#[test]
fn intersection_stage_swce() {
    let s = solve_stage(&intersection(), EquilibriumKind::Correlated, Criterion::SocialWelfare, false, &SearchConfig::default())
        .unwrap()
        .unwrap();
    assert!(close(&s.values, &[5.0, -5.0, 5.0], 1e-6));
    let c = NormalFormGame::from_table(vec![2, 3], vec![1.5; 12]).unwrap();
    for eq in [EquilibriumKind::Nash, EquilibriumKind::Correlated] {
        let s = solve_stage(&c, eq, Criterion::SocialFairness, false, &SearchConfig::default()).unwrap().unwrap();
        assert!(close(&s.values, &[1.5, 1.5], 1e-12));
    }
}

#[test]
fn zero_sum_stage_matches_minimax_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut checked = 0;
    while checked < 20 {
        let m: Vec<f64> = (0..4).map(|_| rng.random_range(-5.0..5.0)).collect();
        let (a, b, c, d) = (m[0], m[1], m[2], m[3]);
        // skip games with a saddle point; the closed form needs full mixing
        let row_min = [a.min(b), c.min(d)];
        let col_max = [a.max(c), b.max(d)];
        if row_min[0].max(row_min[1]) >= col_max[0].min(col_max[1]) {
            continue;
        }
        let value = (a * d - b * c) / (a + d - b - c);
        let g = NormalFormGame::from_table(vec![2, 2], vec![a, -a, b, -b, c, -c, d, -d]).unwrap();
        let s = solve_stage(&g, EquilibriumKind::Nash, Criterion::SocialWelfare, false, &SearchConfig::default())
            .unwrap()
            .unwrap();
        assert!(close(&s.values, &[value, -value], 1e-6), "{:?} vs {value}", s.values);
        checked += 1;
    }
}

#[test]
fn negated_stage_reports_true_values() {
    let g = NormalFormGame::from_table(vec![2], vec![3.0, 1.0]).unwrap();
    let s = solve_stage(&g, EquilibriumKind::Nash, Criterion::SocialWelfare, true, &SearchConfig::default())
        .unwrap()
        .unwrap();
    assert_eq!(s.values, vec![1.0]);
}

#[test]
fn next_extremes_and_coin() {
    let g = coin();
    let sel = ce_sw();
    let cfg = CheckerConfig::default();
    let sol = check_next(&g, &objs("P[X true] + P[X g1]"), &sel, &cfg).unwrap();
    assert!(close(&sol.values[0], &[1.0, 0.5], 1e-12));
    let nowhere = objs("P[X g1] + P[X g2]");
    let sol = check_next(&g, &nowhere, &sel, &cfg).unwrap();
    assert!(close(&sol.values[1], &[1.0, 0.0], 1e-12));
    assert!(close(&sol.values[2], &[0.0, 1.0], 1e-12));
    assert!(close(&sol.values[0], &[0.5, 0.5], 1e-12));
}

/// One step from state 0: actions choose which of two goals is hit, with
/// probabilities depending on both players.
#[test]
fn next_matches_pure_outcome_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10 {
        let mut b = CsgBuilder::with_counts(&[2, 2], 4);
        b.initial(0);
        b.enable_all(0).unwrap();
        let mut probs = Vec::new();
        for joint in JointActions::new(&[2, 2]) {
            let p1: f64 = rng.random_range(0.0..0.5);
            let p2: f64 = rng.random_range(0.0..0.5);
            probs.push((p1, p2));
            b.transition(0, &[joint[0] + 1, joint[1] + 1], vec![(1, p1), (2, p2), (3, 1.0 - p1 - p2)])
                .unwrap();
        }
        for s in 1..4 {
            b.transition(s, &[0, 0], vec![(s, 1.0)]).unwrap();
        }
        b.label("g1", 1).unwrap().label("g2", 2).unwrap();
        let g = b.build().unwrap();
        let sol = check_next(&g, &objs("P[X g1] + P[X g2]"), &ce_sw(), &CheckerConfig::default()).unwrap();
        // SWCE welfare is at least the best pure equilibrium's and at most the
        // best outcome overall
        let best = probs.iter().map(|(a, b)| a + b).fold(f64::MIN, f64::max);
        let pure_ne = (0..4)
            .filter(|&j| {
                let (r, c) = (j / 2, j % 2);
                let other_r = (1 - r) * 2 + c;
                let other_c = r * 2 + (1 - c);
                probs[j].0 >= probs[other_r].0 && probs[j].1 >= probs[other_c].1
            })
            .map(|j| probs[j].0 + probs[j].1)
            .fold(f64::MIN, f64::max);
        let w = welfare(&sol.values[0]);
        assert!(w <= best + 1e-9 && w >= pure_ne - 1e-9, "{w} {pure_ne} {best}");
    }
}

#[test]
fn bounded_until_zero_is_indicator() {
    let g = coin();
    let sol = check_bounded(&g, &objs("P[true U<=0 g1] + P[true U<=0 g2]"), &ce_sw(), &CheckerConfig::default()).unwrap();
    assert_eq!(sol.values, vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]);
    let sol = check_bounded(&g, &objs("P[true U<=1 g1] + P[true U<=1 g2]"), &ce_sw(), &CheckerConfig::default()).unwrap();
    assert!(close(&sol.values[0], &[0.5, 0.5], 1e-12));
}

#[test]
fn instant_zero_is_expected_successor_reward() {
    let mut b = CsgBuilder::with_counts(&[2], 3);
    b.initial(0);
    b.enable_all(0).unwrap();
    b.transition(0, &[1], vec![(1, 0.25), (2, 0.75)]).unwrap();
    b.transition(0, &[2], vec![(1, 1.0)]).unwrap();
    for s in 1..3 {
        b.transition(s, &[0], vec![(s, 1.0)]).unwrap();
    }
    b.state_reward("r", 1, 4.0).unwrap().state_reward("r", 2, 8.0).unwrap().state_reward("r", 0, 100.0).unwrap();
    let g = b.build().unwrap();
    let o = prop("<<1>>(NE,SW)max=? R{r}[I=0]").objectives;
    let sol = check_bounded(&g, &o, &ce_sw(), &CheckerConfig::default()).unwrap();
    assert!(close(&sol.values[0], &[7.0], 1e-12));
    let o = prop("<<1>>(NE,SW)max=? R{r}[I=1]").objectives;
    let sol = check_bounded(&g, &o, &ce_sw(), &CheckerConfig::default()).unwrap();
    assert!(close(&sol.values[0], &[7.0], 1e-12));
}

/// Exhaustive search over pure history-dependent strategies of a
/// one-player game for `C<=k`.
fn brute_cumulative(g: &Csg, reward: &str, s: usize, k: u32) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let r = g.reward(reward).unwrap();
    (0..g.num_local_joints(s))
        .map(|a| {
            r.state[s]
                + r.action[s][a]
                + g.transition(s, a).iter().map(|&(t, p)| p * brute_cumulative(g, reward, t, k - 1)).sum::<f64>()
        })
        .fold(f64::MIN, f64::max)
}

#[test]
fn cumulative_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..5 {
        let g = random_goal_csg(&mut rng, 1, 3, 5);
        for k in 0..4 {
            let o = prop(&alloc::format!("<<1>>(CE,SW)max=? R{{r1}}[C<={k}]")).objectives;
            let sol = check_bounded(&g, &o, &ce_sw(), &CheckerConfig::default()).unwrap();
            for s in 0..g.num_states() {
                assert!(abs(sol.values[s][0] - brute_cumulative(&g, "r1", s, k)) < 1e-9);
            }
        }
    }
}

#[test]
fn bounded_is_independent_of_epsilon() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let g = random_goal_csg(&mut rng, 2, 2, 6);
    let o = objs("R{r1}[C<=3] + R{r2}[I=2]");
    let a = check_bounded(&g, &o, &ce_sw(), &CheckerConfig::default()).unwrap();
    let cfg = CheckerConfig {
        epsilon: 0.5,
        ..CheckerConfig::default()
    };
    let b = check_bounded(&g, &o, &ce_sw(), &cfg).unwrap();
    let bits = |s: &Solution| -> Vec<u64> { s.values.iter().flatten().map(|v| v.to_bits()).collect() };
    assert_eq!(bits(&a), bits(&b));
}

#[test]
fn one_shot_intersection_reachability_rewards() {
    let g = intersection_one_shot();
    let p = prop("<<1:2:3>>(CE,SF)max=? (R{u1}[F done] + R{u2}[F done] + R{u3}[F done])");
    let out = check_property(&g, &p, &CheckerConfig::default()).unwrap();
    assert_eq!(out.method, Method::ValueIteration);
    assert!(close(&out.initial[0].values, &[0.0, 0.0, 0.0], 1e-6));
    let strategy = out.strategy.unwrap();
    assert_eq!(strategy.entries.len(), 1);

    let p = prop("<<1:2:3>>(CE,SW)max>=4 (R{u1}[F done] + R{u2}[F done] + R{u3}[F done])");
    let out = check_property(&g, &p, &CheckerConfig::default()).unwrap();
    assert!(close(&out.initial[0].values, &[5.0, -5.0, 5.0], 1e-6));
    assert_eq!(out.initial[0].evaluation.verdict, Some(true));
}

#[test]
fn target_everywhere_is_immediate() {
    let g = coin();
    let sol = check_unbounded(&g, &objs("P[true U true] + P[true U true]"), &ce_sw(), &CheckerConfig::default()).unwrap();
    assert!(sol.values.iter().all(|v| v == &[1.0, 1.0]));
    assert_eq!(sol.iterations, 1);
}

#[test]
fn assumption_violation_is_reported() {
    let g = coin();
    let err = check_unbounded(&g, &objs("P[true U g1] + P[true U g2]"), &ce_sw(), &CheckerConfig::default()).unwrap_err();
    assert_eq!(err, Error::AssumptionViolated { objective: 1, state: 0 });
    // F g1 where g2 is a trap also violates, and so does a reward target
    let err = check_unbounded(&g, &objs("R{x}[F g1] + R{x}[F g2]"), &ce_sw(), &CheckerConfig::default());
    assert!(err.is_err());
    // `g1 U g2` is not: g1 loops forever without g2
    let o = objs("P[g1 U g2] + P[g1 U g1]");
    assert_eq!(check_assumption(&g, &o[0]).unwrap().counterexample, Some(1));
    assert!(check_assumption(&g, &o[1]).unwrap().holds);
    assert!(matches!(check_assumption(&g, &objs("P[X g1] + P[X g1]")[0]), Err(Error::Contract(_))));
}

#[test]
fn non_convergence_is_reported() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let g = random_goal_csg(&mut rng, 2, 2, 6);
    let cfg = CheckerConfig {
        max_iterations: 2,
        ..CheckerConfig::default()
    };
    match check_unbounded(&g, &objs("R{r1}[F goal] + R{r2}[F goal]"), &ce_sw(), &cfg) {
        Err(Error::NotConverged { iterations: 2, residual }) => assert!(residual > 1e-6),
        other => panic!("{other:?}"),
    }
}

#[test]
fn transform_shape_and_rejection() {
    let g = coin();
    let o = objs("P[X g1] + P[true U g2]");
    let t = transform_mixed_horizon(&g, &o).unwrap();
    assert_eq!(t.horizon, 1);
    assert_eq!(t.game.num_states(), 9);
    assert_eq!(t.split(t.state(2, 1)), (2, 1));
    assert!(matches!(
        transform_mixed_horizon(&g, &objs("P[true U g1] + P[true U g2]")),
        Err(Error::Contract(_))
    ));
}

fn transformed_values(g: &Csg, o: &[Objective], sel: &Selection) -> Vec<Vec<f64>> {
    let t = transform_mixed_horizon(g, o).unwrap();
    let sol = check_unbounded(&t.game, &t.objectives, sel, &CheckerConfig::default()).unwrap();
    (0..g.num_states()).map(|s| sol.values[t.state(s, 0)].clone()).collect()
}

#[test]
fn transform_agrees_with_backward_induction() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for (text, k) in [
        ("R{r1}[I=1] + R{r2}[C<=2]", 2u32),
        ("R{r1}[C<=3] + R{r2}[I=0]", 3),
        ("P[X b] + P[a U<=2 b]", 2),
    ] {
        let g = random_goal_csg(&mut rng, 2, 2, 5);
        let o = objs(text);
        for sel in [ce_sw(), Selection { criterion: Criterion::SocialFairness, ..ce_sw() }] {
            let direct = check_bounded(&g, &o, &sel, &CheckerConfig::default()).unwrap();
            let via = transformed_values(&g, &o, &sel);
            for s in 0..g.num_states() {
                assert!(close(&direct.values[s], &via[s], 1e-6), "{text}: {:?} vs {:?}", direct.values[s], via[s]);
            }
        }
        assert_eq!(transform_mixed_horizon(&g, &o).unwrap().game.num_states(), 5 * (k as usize + 2));
    }
}

#[test]
fn mixed_property_runs_on_product() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let g = random_goal_csg(&mut rng, 2, 2, 5);
    let p = prop("<<1:2>>(CE,SW)max=? (P[true U<=2 b] + P[a U goal])");
    let out = check_property(&g, &p, &CheckerConfig::default()).unwrap();
    assert_eq!(out.method, Method::Transformed);
    let strategy = out.strategy.unwrap();
    assert_eq!(strategy.rule, StepRule::Saturating(3));
    assert!(out.initial[0].values.iter().all(|v| (-1e-9..=1.0 + 1e-9).contains(v)));
}

#[test]
fn evaluate_bound_examples() {
    let e = evaluate_bound(&[5.0, -5.0, 5.0], Bound::Threshold(Comparison::Ge, 4.0));
    assert_eq!(e, Evaluation { sum: 5.0, verdict: Some(true) });
    assert_eq!(evaluate_bound(&[5.0, -5.0, 5.0], Bound::Query).sum, 5.0);
    assert_eq!(
        evaluate_bound(&[0.0, 0.0], Bound::Threshold(Comparison::Gt, 0.0)).verdict,
        Some(false)
    );
}

#[test]
fn minimizing_flips_optimisation() {
    let mut b = CsgBuilder::with_counts(&[2], 2);
    b.initial(0);
    b.enable_all(0).unwrap();
    b.transition(0, &[1], vec![(1, 1.0)]).unwrap();
    b.transition(0, &[2], vec![(1, 1.0)]).unwrap();
    b.transition(1, &[0], vec![(1, 1.0)]).unwrap();
    b.action_reward("c", 0, &[1], 3.0).unwrap().action_reward("c", 0, &[2], 1.0).unwrap();
    b.label("end", 1).unwrap();
    let g = b.build().unwrap();
    let out = check_property(&g, &prop("<<1>>(NE,SW)min=? R{c}[F end]"), &CheckerConfig::default()).unwrap();
    assert!(close(&out.initial[0].values, &[1.0], 1e-12));
    let out = check_property(&g, &prop("<<1>>(NE,SW)max=? R{c}[F end]"), &CheckerConfig::default()).unwrap();
    assert!(close(&out.initial[0].values, &[3.0], 1e-12));
}

#[test]
fn partition_size_must_match_game() {
    let g = coin();
    let err = check_property(&g, &prop("<<1:2:3>>(CE,SW)max=? (P[X g1] + P[X g1] + P[X g1])"), &CheckerConfig::default())
        .unwrap_err();
    assert!(matches!(err, Error::InvalidPartition(_)));
}

/// Independent Bellman iteration with the whole team choosing the joint
/// action.
fn mdp_oracle(g: &Csg, objective: &str) -> Vec<f64> {
    let n = g.num_states();
    let goal = g.sat("goal").unwrap();
    let a = g.sat("a").unwrap();
    let b = g.sat("b").unwrap();
    let r = g.reward("r1").unwrap();
    let mut v = vec![0.0; n];
    for _ in 0..100_000 {
        let next: Vec<f64> = (0..n)
            .map(|s| {
                let best = |imm: &dyn Fn(usize) -> f64| {
                    (0..g.num_local_joints(s))
                        .map(|j| imm(j) + g.transition(s, j).iter().map(|&(t, p)| p * v[t]).sum::<f64>())
                        .fold(f64::MIN, f64::max)
                };
                match objective {
                    "until" if b[s] => 1.0,
                    "until" if !a[s] => 0.0,
                    "until" => best(&|_| 0.0),
                    _ if goal[s] => 0.0,
                    _ => best(&|j| r.state[s] + r.action[s][j]),
                }
            })
            .collect();
        let diff = crate::num::max_abs_diff(&next, &v);
        v = next;
        if diff < 1e-14 {
            break;
        }
    }
    v
}

#[test]
fn grand_coalition_matches_mdp_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let cfg = CheckerConfig {
        epsilon: 1e-10,
        ..CheckerConfig::default()
    };
    for _ in 0..4 {
        let g = random_goal_csg(&mut rng, 2, 2, 8);
        for (text, which) in [("R{r1}[F goal]", "reward"), ("P[a U b]", "until")] {
            let p = prop(&alloc::format!("<<1,2>>(CE,SW)max=? {text}"));
            let out = check_property(&g, &p, &cfg).unwrap();
            let oracle = mdp_oracle(&g, which);
            for s in 0..g.num_states() {
                assert!(abs(out.values[s][0] - oracle[s]) < 1e-6, "{which} state {s}");
            }
        }
    }
}

/// Values that `solve_stage` assigns to each stored context, rebuilt from
/// the converged table.
#[test]
fn converged_table_is_self_consistent() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..3 {
        let g = random_goal_csg(&mut rng, 2, 2, 6);
        let o = objs("R{r1}[F goal] + R{r2}[F b]");
        let sel = ce_sw();
        let cfg = CheckerConfig::default();
        let sol = check_unbounded(&g, &o, &sel, &cfg).unwrap();
        let resolved = Objectives::resolve(&g, &o).unwrap();
        for (&(s, mem), values) in &sol.contexts {
            if resolved.terminal(mem) {
                continue;
            }
            let nfg = stage_game(&g, &resolved, s, mem, StepRule::Frozen, &sol.contexts).unwrap();
            let replay = solve_stage(&nfg, sel.eq, sel.criterion, false, &cfg.search).unwrap().unwrap();
            assert!(close(&replay.values, values, 1e-5), "{:?} vs {values:?}", replay.values);
        }
    }
}

#[test]
fn enlarging_targets_never_lowers_values() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let sel = ce_sw();
    for _ in 0..10 {
        let g = random_goal_csg(&mut rng, 2, 2, 6);
        let small = check_unbounded(&g, &objs("P[true U goal] + P[a U goal]"), &sel, &CheckerConfig::default()).unwrap();
        let large = check_unbounded(&g, &objs("P[true U b] + P[a U b]"), &sel, &CheckerConfig::default()).unwrap();
        for s in 0..g.num_states() {
            for l in 0..2 {
                assert!(large.values[s][l] >= small.values[s][l] - 1e-6, "{s} {l} {:?} {:?}", large.values[s], small.values[s]);
            }
        }
    }
}

#[test]
fn correlated_welfare_dominates_nash() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for _ in 0..10 {
        let g = random_goal_csg(&mut rng, 2, 2, 5);
        for text in ["R{r1}[C<=2] + R{r2}[C<=3]", "P[a U<=2 b] + P[true U<=1 goal]"] {
            let o = objs(text);
            let ce = check_bounded(&g, &o, &ce_sw(), &CheckerConfig::default()).unwrap();
            let ne = check_bounded(&g, &o, &Selection { eq: EquilibriumKind::Nash, ..ce_sw() }, &CheckerConfig::default())
                .unwrap();
            for s in 0..g.num_states() {
                assert!(welfare(&ce.values[s]) >= welfare(&ne.values[s]) - 1e-5, "{text} state {s}");
            }
        }
    }
}

#[test]
fn identity_partition_changes_nothing() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let g = random_goal_csg(&mut rng, 2, 2, 5);
    let part = CoalitionPartition::singletons(2);
    let cg = build_coalition_game(&g, &part).unwrap();
    let o = objs("R{r1}[C<=2] + R{r2}[C<=2]");
    let a = check_bounded(&g, &o, &ce_sw(), &CheckerConfig::default()).unwrap();
    let b = check_bounded(&cg.game, &o, &ce_sw(), &CheckerConfig::default()).unwrap();
    assert_eq!(a.values, b.values);
    assert_eq!(part.len().to_string(), "2");
}
