//! Merging players into coalitions.
//!
//! A coalition `C = (j_1, ..., j_k)` acts through composite actions: tuples
//! giving each member a digit in `A_j ∪ {⊥}`, excluding the all-idle tuple.
//! A tuple is numbered in mixed radix (first member most significant,
//! radix `|A_j| + 1`) and that number is directly the composite's digit in
//! the coalition game, so digit 0 is the coalition's own ⊥.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::csg::{Csg, RewardStructure};
use crate::nfg::{strides_for, JointActions};
use crate::{Error, Result};

/// Ordered, disjoint coalitions covering every player (0-based).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CoalitionPartition {
    coalitions: Vec<Vec<usize>>,
    /// `(coalition, position)` of every player.
    position: Vec<(usize, usize)>,
}

impl CoalitionPartition {
    pub fn new(coalitions: Vec<Vec<usize>>, num_players: usize) -> Result<Self> {
        let mut position = vec![None; num_players];
        for (c, members) in coalitions.iter().enumerate() {
            if members.is_empty() {
                return Err(Error::InvalidPartition(format!("coalition {} is empty", c + 1)));
            }
            for (k, &j) in members.iter().enumerate() {
                let slot = position
                    .get_mut(j)
                    .ok_or_else(|| Error::InvalidPartition(format!("player {} does not exist", j + 1)))?;
                if slot.is_some() {
                    return Err(Error::InvalidPartition(format!(
                        "player {} appears in more than one coalition",
                        j + 1
                    )));
                }
                *slot = Some((c, k));
            }
        }
        let position = position
            .into_iter()
            .enumerate()
            .map(|(j, p)| p.ok_or_else(|| Error::InvalidPartition(format!("player {} is in no coalition", j + 1))))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { coalitions, position })
    }

    /// Every player on their own, in order.
    pub fn singletons(num_players: usize) -> Self {
        Self {
            coalitions: (0..num_players).map(|j| vec![j]).collect(),
            position: (0..num_players).map(|j| (j, 0)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.coalitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coalitions.is_empty()
    }

    pub fn num_players(&self) -> usize {
        self.position.len()
    }

    pub fn coalitions(&self) -> &[Vec<usize>] {
        &self.coalitions
    }

    pub fn members(&self, coalition: usize) -> &[usize] {
        &self.coalitions[coalition]
    }

    /// `(coalition index, j_C)` for a player.
    pub fn position(&self, player: usize) -> (usize, usize) {
        self.position[player]
    }
}

/// The coalition game together with the decomposition of its actions.
#[derive(Debug, Clone, PartialEq)]
pub struct CoalitionGame {
    pub game: Csg,
    pub partition: CoalitionPartition,
    /// Per coalition, the radix of each member (`|A_j| + 1`).
    radices: Vec<Vec<usize>>,
}

impl CoalitionGame {
    /// Member digits of a composite digit. ⊥ of the coalition maps to ⊥ for
    /// every member.
    pub fn decompose(&self, coalition: usize, digit: usize) -> Vec<usize> {
        let radices = &self.radices[coalition];
        let strides = strides_for(radices);
        radices.iter().zip(&strides).map(|(&r, &st)| (digit / st) % r).collect()
    }

    pub fn compose(&self, coalition: usize, member_digits: &[usize]) -> usize {
        let strides = strides_for(&self.radices[coalition]);
        member_digits.iter().zip(&strides).map(|(d, s)| d * s).sum()
    }

    /// Original joint action (digits for players `0..n`) of a coalition
    /// joint action.
    pub fn original_joint(&self, composite: &[usize]) -> Vec<usize> {
        let mut digits = vec![0; self.partition.num_players()];
        for (c, &d) in composite.iter().enumerate() {
            for (&j, m) in self.partition.members(c).iter().zip(self.decompose(c, d)) {
                digits[j] = m;
            }
        }
        digits
    }

    /// `∏ (|A_j| + 1) - 1`
    pub fn alphabet_size(&self, coalition: usize) -> usize {
        self.radices[coalition].iter().product::<usize>() - 1
    }
}

fn composite_name(csg: &Csg, members: &[usize], digits: &[usize]) -> String {
    if members.len() == 1 {
        return csg.action_name(members[0], digits[0]).into();
    }
    let parts: Vec<&str> = members.iter().zip(digits).map(|(&j, &d)| csg.action_name(j, d)).collect();
    parts.join("&")
}

/// Builds `G^C`. Composite action names join member names with `&`, using
/// `-` for an idle member; a singleton coalition keeps its member's names.
pub fn build_coalition_game(csg: &Csg, partition: &CoalitionPartition) -> Result<CoalitionGame> {
    if partition.num_players() != csg.num_players() {
        return Err(Error::InvalidPartition(format!(
            "partition covers {} players, the game has {}",
            partition.num_players(),
            csg.num_players()
        )));
    }
    let m = partition.len();
    let radices: Vec<Vec<usize>> = partition
        .coalitions()
        .iter()
        .map(|c| c.iter().map(|&j| csg.num_actions(j) + 1).collect())
        .collect();
    let action_names: Vec<Vec<String>> = (0..m)
        .map(|c| {
            let counts = &radices[c];
            JointActions::new(counts)
                .skip(1)
                .map(|digits| composite_name(csg, partition.members(c), &digits))
                .collect()
        })
        .collect();
    let out = CoalitionGame {
        game: csg.clone(),
        partition: partition.clone(),
        radices,
    };

    let mut enabled = Vec::with_capacity(csg.num_states());
    let mut transitions = Vec::with_capacity(csg.num_states());
    let mut local_maps = Vec::with_capacity(csg.num_states());
    for s in 0..csg.num_states() {
        // the composite choices are products of member choices; all-idle
        // members give the coalition ⊥
        let en: Vec<Vec<usize>> = (0..m)
            .map(|c| {
                let members = partition.members(c);
                let sets: Vec<&[usize]> = members.iter().map(|&j| csg.enabled_actions(s, j)).collect();
                let counts: Vec<usize> = sets.iter().map(|x| x.len()).collect();
                let mut digits: Vec<usize> = JointActions::new(&counts)
                    .map(|pick| {
                        let member: Vec<usize> = pick.iter().zip(&sets).map(|(&k, set)| set[k]).collect();
                        out.compose(c, &member)
                    })
                    .collect();
                digits.sort_unstable();
                digits
            })
            .collect();
        let counts: Vec<usize> = en.iter().map(Vec::len).collect();
        let mut row = Vec::new();
        let mut map = Vec::new();
        for pick in JointActions::new(&counts) {
            let composite: Vec<usize> = pick.iter().zip(&en).map(|(&k, set)| set[k]).collect();
            let original = out.original_joint(&composite);
            let local = csg.local_index(s, &original).ok_or_else(|| {
                Error::Internal(format!("state {s}: composite action maps outside the original game"))
            })?;
            row.push(csg.transition(s, local).to_vec());
            map.push(local);
        }
        enabled.push(en);
        transitions.push(row);
        local_maps.push(map);
    }
    let rewards = csg
        .rewards()
        .iter()
        .map(|r| RewardStructure {
            name: r.name.clone(),
            state: r.state.clone(),
            action: local_maps
                .iter()
                .enumerate()
                .map(|(s, map)| map.iter().map(|&l| r.action[s][l]).collect())
                .collect(),
        })
        .collect();
    let labels: BTreeMap<String, Vec<bool>> = csg.labels().clone();
    let game = Csg::from_parts(
        action_names,
        enabled,
        transitions,
        csg.initial_states().to_vec(),
        labels,
        rewards,
    )?;
    Ok(CoalitionGame { game, ..out })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::csg::fixtures::{intersection_one_shot, random_csg};
    use crate::csg::CsgBuilder;
    use alloc::string::ToString;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn partition_validation() {
        assert!(CoalitionPartition::new(vec![vec![0, 1], vec![1]], 2).is_err());
        assert!(CoalitionPartition::new(vec![vec![0]], 2).is_err());
        assert!(CoalitionPartition::new(vec![vec![0], vec![]], 1).is_err());
        assert!(CoalitionPartition::new(vec![vec![0], vec![3]], 2).is_err());
        let p = CoalitionPartition::new(vec![vec![2], vec![0, 1]], 3).unwrap();
        assert_eq!(p.position(1), (1, 1));
    }

    #[test]
    fn identity_partition_is_isomorphic() {
        let g = intersection_one_shot();
        let cg = build_coalition_game(&g, &CoalitionPartition::singletons(3)).unwrap();
        assert_eq!(cg.game, g);
    }

    #[test]
    fn composite_alphabet_size() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = random_csg(&mut rng, 3, 2, 2);
        let p = CoalitionPartition::new(vec![vec![0], vec![1, 2]], 3).unwrap();
        let cg = build_coalition_game(&g, &p).unwrap();
        assert_eq!(cg.alphabet_size(1), 8);
        assert_eq!(cg.game.num_actions(1), 8);
        assert_eq!(cg.game.action_names(1)[0], "-&a0");
    }

    #[test]
    fn grand_coalition_on_one_shot() {
        let g = intersection_one_shot();
        let p = CoalitionPartition::new(vec![vec![0, 1, 2]], 3).unwrap();
        let cg = build_coalition_game(&g, &p).unwrap();
        assert_eq!(cg.game.num_players(), 1);
        assert_eq!(cg.game.enabled_actions(0, 0).len(), 8);
        assert!(cg.game.enabled_actions(0, 0).iter().all(|&d| cg.decompose(0, d).iter().all(|&x| x != 0)));
        // the terminal state has everybody idle
        assert_eq!(cg.game.enabled_actions(1, 0), &[0]);
        let names: Vec<&str> = cg.game.enabled_actions(0, 0).iter().map(|&d| cg.game.action_name(0, d)).collect();
        assert!(names.contains(&"pro&yld&pro"));
    }

    #[test]
    fn mixed_idle_rule() {
        // player 2 has nothing to do in state 0, so its slot must be ⊥ in
        // every composite of the coalition
        let names = vec![vec!["x".to_string(), "y".to_string()], vec!["z".to_string()]];
        let mut b = CsgBuilder::new(names, 1);
        b.initial(0);
        b.enabled(0, 0, &[1, 2]).unwrap();
        b.transition(0, &[1, 0], vec![(0, 1.0)]).unwrap();
        b.transition(0, &[2, 0], vec![(0, 1.0)]).unwrap();
        let g = b.build().unwrap();
        let p = CoalitionPartition::new(vec![vec![0, 1]], 2).unwrap();
        let cg = build_coalition_game(&g, &p).unwrap();
        let en = cg.game.enabled_actions(0, 0);
        assert_eq!(en.len(), 2);
        for &d in en {
            let parts = cg.decompose(0, d);
            assert_ne!(parts[0], 0);
            assert_eq!(parts[1], 0);
        }
    }

    #[test]
    fn transitions_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let g = random_csg(&mut rng, 3, 2, 4);
            for coalitions in [vec![vec![0], vec![1, 2]], vec![vec![2, 0], vec![1]], vec![vec![0, 1, 2]]] {
                let p = CoalitionPartition::new(coalitions, 3).unwrap();
                let cg = build_coalition_game(&g, &p).unwrap();
                for s in 0..g.num_states() {
                    for local in 0..cg.game.num_local_joints(s) {
                        let dist = cg.game.transition(s, local);
                        let total: f64 = dist.iter().map(|x| x.1).sum();
                        assert!((total - 1.0).abs() < 1e-9);
                        let original = cg.original_joint(&cg.game.local_joint(s, local));
                        let l = g.local_index(s, &original).unwrap();
                        assert_eq!(dist, g.transition(s, l));
                    }
                }
            }
        }
    }
}
