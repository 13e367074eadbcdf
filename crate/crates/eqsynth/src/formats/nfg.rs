//! ```text
//! nfg
//! players 2
//! actions 1 heads tails
//! actions 2 heads tails
//! u (heads,heads) 1 -1
//! ...
//! ```
//! Every joint action needs exactly one `u` line.

use std::collections::BTreeMap;
use std::fmt::Write;

use eqsynth_core::nfg::NormalFormGame;
use eqsynth_core::Error;

use super::{check_name, header, lines, num, tuple, Line};

pub fn read_nfg(text: &str) -> Result<NormalFormGame, Error> {
    let lines = lines(text);
    header(&lines, "nfg")?;
    let mut players: Option<usize> = None;
    let mut actions: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    let mut utilities: Vec<(&Line<'_>, usize)> = Vec::new();
    for (k, line) in lines.iter().enumerate().skip(1) {
        match line.head() {
            "players" => {
                let t = line.get(1, "player count")?;
                if players.is_some() {
                    return Err(line.tokens[0].error("duplicate 'players' line"));
                }
                let n = t.parse_usize("player count")?;
                if n == 0 {
                    return Err(t.error("a game needs at least one player"));
                }
                players = Some(n);
                line.expect_len(2)?;
            }
            "actions" => {
                let n = players.ok_or_else(|| line.tokens[0].error("'actions' before 'players'"))?;
                let t = line.get(1, "player number")?;
                let i = t.parse_usize("player number")?;
                if i == 0 || i > n {
                    return Err(t.error(format!("player {i} out of range 1..{n}")));
                }
                if actions.contains_key(&i) {
                    return Err(t.error(format!("duplicate actions for player {i}")));
                }
                line.get(2, "action name")?;
                let mut names: Vec<String> = Vec::new();
                for a in &line.tokens[2..] {
                    check_name(a)?;
                    if names.iter().any(|x| x == a.text) {
                        return Err(a.error(format!("duplicate action '{}'", a.text)));
                    }
                    names.push(a.text.to_string());
                }
                actions.insert(i, names);
            }
            "u" => utilities.push((line, k)),
            other => return Err(line.tokens[0].error(format!("unknown directive '{other}'"))),
        }
    }
    let n = players.ok_or(Error::Parse {
        line: lines.len().max(1),
        column: 1,
        message: "missing 'players' line".into(),
    })?;
    let eof = lines.last().map_or(1, |l| l.number + 1);
    for i in 1..=n {
        if !actions.contains_key(&i) {
            return Err(Error::Parse {
                line: eof,
                column: 1,
                message: format!("missing actions for player {i}"),
            });
        }
    }
    let names: Vec<Vec<String>> = actions.into_values().collect();
    let counts: Vec<usize> = names.iter().map(Vec::len).collect();
    let total: usize = counts.iter().product();
    let mut table: Vec<Option<Vec<f64>>> = vec![None; total];
    for (line, _) in utilities {
        let t = line.get(1, "joint action")?;
        let tup = tuple(&t)?;
        if tup.len() != n {
            return Err(t.error(format!("expected {n} actions, found {}", tup.len())));
        }
        let mut joint = 0;
        for (i, name) in tup.iter().enumerate() {
            let a = names[i]
                .iter()
                .position(|x| x == name)
                .ok_or_else(|| t.error(format!("unknown action '{name}' for player {}", i + 1)))?;
            joint = joint * counts[i] + a;
        }
        let values = (0..n)
            .map(|i| line.get(2 + i, "utility")?.parse_f64("utility"))
            .collect::<Result<Vec<f64>, Error>>()?;
        line.expect_len(2 + n)?;
        if table[joint].replace(values).is_some() {
            return Err(t.error(format!("duplicate utilities for {}", t.text)));
        }
    }
    let mut flat = Vec::with_capacity(total * n);
    for (joint, row) in table.into_iter().enumerate() {
        let row = row.ok_or_else(|| {
            let mut rest = joint;
            let mut parts = vec![""; n];
            for i in (0..n).rev() {
                parts[i] = &names[i][rest % counts[i]];
                rest /= counts[i];
            }
            Error::Parse {
                line: eof,
                column: 1,
                message: format!("missing utilities for ({})", parts.join(",")),
            }
        })?;
        flat.extend(row);
    }
    NormalFormGame::new(names, flat)
}

pub fn write_nfg(game: &NormalFormGame) -> String {
    let n = game.num_players();
    let mut out = String::from("nfg\n");
    let _ = writeln!(out, "players {n}");
    for i in 0..n {
        let names: Vec<String> = (0..game.num_actions(i)).map(|a| game.action_name(i, a).into_owned()).collect();
        let _ = writeln!(out, "actions {} {}", i + 1, names.join(" "));
    }
    for joint in 0..game.num_joint() {
        let tuple: Vec<String> = game
            .decode(joint)
            .iter()
            .enumerate()
            .map(|(i, &a)| game.action_name(i, a).into_owned())
            .collect();
        let values: Vec<String> = game.utility_row(joint).iter().map(|&v| num(v)).collect();
        let _ = writeln!(out, "u ({}) {}", tuple.join(","), values.join(" "));
    }
    out
}
