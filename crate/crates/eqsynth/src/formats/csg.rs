//! ```text
//! csg
//! players 2
//! actions 1 send wait
//! actions 2 send wait
//! states 4
//! initial 0
//! label goal1 2
//! enabled 0 1 send wait
//! enabled 0 2 send wait
//! trans 0 (send,send) 0.5:1 + 0.5:0
//! reward time state 0 1
//! reward time action 0 (send,send) 2
//! ```
//! `players`, `actions` and `states` come first. A player without an
//! `enabled` line in a state only has the idle action `-` there. Every
//! enabled joint action needs exactly one `trans` line whose probabilities
//! sum to one within `1e-9`. Repeated reward lines for the same state or
//! action add up.

use std::collections::BTreeMap;
use std::fmt::Write;

use eqsynth_core::csg::{Csg, CsgBuilder, Distribution};
use eqsynth_core::{Error, PROB_TOL};

use super::{check_name, header, lines, num, tuple, Line, Token};

struct Reader {
    names: Vec<Vec<String>>,
    builder: CsgBuilder,
    states: usize,
    enabled: BTreeMap<(usize, usize), Vec<usize>>,
    /// Line of every `trans`, for locating semantic errors.
    trans: BTreeMap<(usize, Vec<usize>), Token<'static>>,
    action_rewards: Vec<(usize, Vec<usize>, Token<'static>)>,
}

fn owned(t: &Token<'_>) -> Token<'static> {
    Token {
        text: "",
        line: t.line,
        column: t.column,
    }
}

impl Reader {
    fn state(&self, t: &Token<'_>) -> Result<usize, Error> {
        let s = t.parse_usize("state")?;
        if s >= self.states {
            return Err(t.error(format!("state {s} out of range 0..{}", self.states)));
        }
        Ok(s)
    }

    fn joint(&self, t: &Token<'_>) -> Result<Vec<usize>, Error> {
        let names = tuple(t)?;
        if names.len() != self.names.len() {
            return Err(t.error(format!("expected {} actions, found {}", self.names.len(), names.len())));
        }
        names
            .iter()
            .enumerate()
            .map(|(i, n)| {
                self.builder
                    .action_digit(i, n)
                    .ok_or_else(|| t.error(format!("unknown action '{n}' for player {}", i + 1)))
            })
            .collect()
    }

    fn enabled_at(&self, s: usize, i: usize) -> Vec<usize> {
        self.enabled.get(&(s, i)).cloned().unwrap_or_else(|| vec![0])
    }

    fn check_enabled(&self, s: usize, digits: &[usize], t: &Token<'_>) -> Result<(), Error> {
        for (i, d) in digits.iter().enumerate() {
            if !self.enabled_at(s, i).contains(d) {
                return Err(t.error(format!(
                    "action '{}' of player {} is not enabled in state {s}",
                    if *d == 0 { "-" } else { &self.names[i][d - 1] },
                    i + 1
                )));
            }
        }
        Ok(())
    }

    fn distribution(&self, line: &Line<'_>, from: usize) -> Result<Distribution, Error> {
        line.get(from, "distribution")?;
        let mut dist = Vec::new();
        let mut expect_term = true;
        for tok in &line.tokens[from..] {
            let mut offset = 0;
            for (k, part) in tok.text.split('+').enumerate() {
                if k > 0 {
                    if expect_term {
                        return Err(tok.error("unexpected '+'"));
                    }
                    expect_term = true;
                }
                if !part.is_empty() {
                    let piece = Token {
                        text: part,
                        line: tok.line,
                        column: tok.column + offset,
                    };
                    if !expect_term {
                        return Err(piece.error("expected '+' between outcomes"));
                    }
                    let (p, t) = part
                        .split_once(':')
                        .ok_or_else(|| piece.error(format!("expected probability:state, found '{part}'")))?;
                    let p = Token { text: p, ..piece }.parse_f64("probability")?;
                    if !(0.0..=1.0 + PROB_TOL).contains(&p) {
                        return Err(piece.error(format!("probability {p} outside [0, 1]")));
                    }
                    let target = self.state(&Token {
                        text: t,
                        column: piece.column + part.len() - t.len(),
                        ..piece
                    })?;
                    dist.push((target, p));
                    expect_term = false;
                }
                offset += part.chars().count() + 1;
            }
        }
        if expect_term {
            return Err(Error::Parse {
                line: line.number,
                column: line.end,
                message: "distribution ends with '+'".into(),
            });
        }
        let total: f64 = dist.iter().map(|e| e.1).sum();
        if (total - 1.0).abs() > PROB_TOL {
            return Err(line.tokens[from].error(format!("probabilities sum to {total}, not 1")));
        }
        Ok(dist)
    }
}

/// Structure lines read before anything else.
struct Shape {
    players: Option<usize>,
    actions: BTreeMap<usize, Vec<String>>,
    states: Option<usize>,
}

pub fn read_csg(text: &str) -> Result<Csg, Error> {
    let lines = lines(text);
    header(&lines, "csg")?;
    let mut shape = Shape {
        players: None,
        actions: BTreeMap::new(),
        states: None,
    };
    let mut reader: Option<Reader> = None;
    let mut has_initial = false;
    for line in &lines[1..] {
        let head = &line.tokens[0];
        if matches!(head.text, "players" | "actions" | "states") {
            if reader.is_some() {
                return Err(head.error(format!("'{}' must come before states are described", head.text)));
            }
            read_shape(line, &mut shape)?;
            continue;
        }
        let r = match reader.as_mut() {
            Some(r) => r,
            None => {
                let r = start(&shape, head)?;
                reader.insert(r)
            }
        };
        match head.text {
            "initial" => {
                line.get(1, "initial state")?;
                for t in &line.tokens[1..] {
                    let s = r.state(t)?;
                    r.builder.initial(s);
                }
                has_initial = true;
            }
            "label" => {
                let name = line.get(1, "label name")?;
                check_name(&name)?;
                if matches!(name.text, "true" | "false") {
                    return Err(name.error(format!("'{}' is reserved", name.text)));
                }
                r.builder.declare_label(name.text);
                for t in &line.tokens[2..] {
                    let s = r.state(t)?;
                    r.builder.label(name.text, s).map_err(|e| t.error(e.to_string()))?;
                }
            }
            "enabled" => {
                let s = r.state(&line.get(1, "state")?)?;
                let pt = line.get(2, "player number")?;
                let i = pt.parse_usize("player number")?;
                if i == 0 || i > r.names.len() {
                    return Err(pt.error(format!("player {i} out of range 1..{}", r.names.len())));
                }
                if r.enabled.contains_key(&(s, i - 1)) {
                    return Err(pt.error(format!("duplicate enabled line for player {i} in state {s}")));
                }
                let mut digits = Vec::new();
                for t in &line.tokens[3..] {
                    let d = r
                        .builder
                        .action_digit(i - 1, t.text)
                        .filter(|&d| d > 0)
                        .ok_or_else(|| t.error(format!("unknown action '{}' for player {i}", t.text)))?;
                    digits.push(d);
                }
                r.builder.enabled(s, i - 1, &digits).map_err(|e| pt.error(e.to_string()))?;
                if digits.is_empty() {
                    digits.push(0);
                }
                digits.sort_unstable();
                digits.dedup();
                r.enabled.insert((s, i - 1), digits);
            }
            "trans" => {
                let s = r.state(&line.get(1, "state")?)?;
                let jt = line.get(2, "joint action")?;
                let digits = r.joint(&jt)?;
                let dist = r.distribution(line, 3)?;
                if r.trans.insert((s, digits.clone()), owned(&jt)).is_some() {
                    return Err(jt.error(format!("duplicate transition for {} in state {s}", jt.text)));
                }
                r.builder.transition(s, &digits, dist).map_err(|e| jt.error(e.to_string()))?;
            }
            "reward" => {
                let name = line.get(1, "reward name")?;
                check_name(&name)?;
                let kind = line.get(2, "'state' or 'action'")?;
                let s = r.state(&line.get(3, "state")?)?;
                match kind.text {
                    "state" => {
                        let v = line.get(4, "reward value")?.parse_f64("reward value")?;
                        line.expect_len(5)?;
                        r.builder.state_reward(name.text, s, v).map_err(|e| name.error(e.to_string()))?;
                    }
                    "action" => {
                        let jt = line.get(4, "joint action")?;
                        let digits = r.joint(&jt)?;
                        let v = line.get(5, "reward value")?.parse_f64("reward value")?;
                        line.expect_len(6)?;
                        r.action_rewards.push((s, digits.clone(), owned(&jt)));
                        r.builder
                            .action_reward(name.text, s, &digits, v)
                            .map_err(|e| jt.error(e.to_string()))?;
                    }
                    other => return Err(kind.error(format!("expected 'state' or 'action', found '{other}'"))),
                }
            }
            other => return Err(head.error(format!("unknown directive '{other}'"))),
        }
    }
    let eof = lines.last().map_or(1, |l| l.number + 1);
    let at_eof = |message: String| Error::Parse {
        line: eof,
        column: 1,
        message,
    };
    let reader = match reader {
        Some(r) => r,
        None => start(&shape, &Token { text: "", line: eof, column: 1 })?,
    };
    if !has_initial {
        return Err(at_eof("missing 'initial' line".into()));
    }
    // enabled lines may follow the transitions that use them
    for ((s, digits), t) in &reader.trans {
        reader.check_enabled(*s, digits, t)?;
    }
    for (s, digits, t) in &reader.action_rewards {
        reader.check_enabled(*s, digits, t)?;
    }
    reader.builder.build().map_err(|e| at_eof(e.to_string()))
}

fn read_shape(line: &Line<'_>, shape: &mut Shape) -> Result<(), Error> {
    let head = &line.tokens[0];
    match head.text {
        "players" => {
            let t = line.get(1, "player count")?;
            if shape.players.is_some() {
                return Err(head.error("duplicate 'players' line"));
            }
            let n = t.parse_usize("player count")?;
            if n == 0 {
                return Err(t.error("a game needs at least one player"));
            }
            shape.players = Some(n);
            line.expect_len(2)
        }
        "states" => {
            let t = line.get(1, "state count")?;
            if shape.states.is_some() {
                return Err(head.error("duplicate 'states' line"));
            }
            let n = t.parse_usize("state count")?;
            if n == 0 {
                return Err(t.error("a model needs at least one state"));
            }
            shape.states = Some(n);
            line.expect_len(2)
        }
        _ => {
            let n = shape.players.ok_or_else(|| head.error("'actions' before 'players'"))?;
            let t = line.get(1, "player number")?;
            let i = t.parse_usize("player number")?;
            if i == 0 || i > n {
                return Err(t.error(format!("player {i} out of range 1..{n}")));
            }
            if shape.actions.contains_key(&i) {
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
            shape.actions.insert(i, names);
            Ok(())
        }
    }
}

fn start(shape: &Shape, at: &Token<'_>) -> Result<Reader, Error> {
    let n = shape.players.ok_or_else(|| at.error("missing 'players' line"))?;
    let states = shape.states.ok_or_else(|| at.error("missing 'states' line"))?;
    let names = (1..=n)
        .map(|i| {
            shape
                .actions
                .get(&i)
                .cloned()
                .ok_or_else(|| at.error(format!("missing actions for player {i}")))
        })
        .collect::<Result<Vec<_>, Error>>()?;
    Ok(Reader {
        builder: CsgBuilder::new(names.clone(), states),
        names,
        states,
        enabled: BTreeMap::new(),
        trans: BTreeMap::new(),
        action_rewards: Vec::new(),
    })
}

pub fn write_csg(game: &Csg) -> String {
    let n = game.num_players();
    let mut out = String::from("csg\n");
    let _ = writeln!(out, "players {n}");
    for i in 0..n {
        let _ = writeln!(out, "actions {} {}", i + 1, game.action_names(i).join(" "));
    }
    let _ = writeln!(out, "states {}", game.num_states());
    let init: Vec<String> = game.initial_states().iter().map(ToString::to_string).collect();
    let _ = writeln!(out, "initial {}", init.join(" "));
    for (name, sat) in game.labels() {
        let states: Vec<String> = sat.iter().enumerate().filter(|e| *e.1).map(|e| e.0.to_string()).collect();
        if states.is_empty() {
            let _ = writeln!(out, "label {name}");
        } else {
            let _ = writeln!(out, "label {name} {}", states.join(" "));
        }
    }
    for s in 0..game.num_states() {
        for i in 0..n {
            let en = game.enabled_actions(s, i);
            if en != [0] {
                let names: Vec<&str> = en.iter().map(|&d| game.action_name(i, d)).collect();
                let _ = writeln!(out, "enabled {s} {} {}", i + 1, names.join(" "));
            }
        }
        for a in 0..game.num_local_joints(s) {
            let dist: Vec<String> = game.transition(s, a).iter().map(|&(t, p)| format!("{}:{t}", num(p))).collect();
            let _ = writeln!(out, "trans {s} {} {}", game.joint_label(s, a), dist.join(" + "));
        }
    }
    for r in game.rewards() {
        let mut any = false;
        for (s, &v) in r.state.iter().enumerate() {
            if v != 0.0 {
                any = true;
                let _ = writeln!(out, "reward {} state {s} {}", r.name, num(v));
            }
        }
        for (s, row) in r.action.iter().enumerate() {
            for (a, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    any = true;
                    let _ = writeln!(out, "reward {} action {s} {} {}", r.name, game.joint_label(s, a), num(v));
                }
            }
        }
        if !any {
            let _ = writeln!(out, "reward {} state 0 0", r.name);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const MODEL: &str = "csg\n\
        players 2\n\
        actions 1 send wait\n\
        actions 2 send wait\n\
        states 3\n\
        initial 0\n\
        label goal 2\n\
        enabled 0 1 send wait\n\
        enabled 0 2 send\n\
        trans 0 (send,send) 0.5:1 + 0.5:0\n\
        trans 0 (wait,send) 1:2\n\
        trans 1 (-,-) 1.0:2\n\
        trans 2 (-,-) 1:2\n\
        reward time state 0 1\n\
        reward time action 0 (send,send) 2\n";

    fn err(text: &str) -> (usize, usize, String) {
        match read_csg(text).unwrap_err() {
            Error::Parse { line, column, message } => (line, column, message),
            other => panic!("expected a parse error, got {other:?}"),
        }
    }

    #[test]
    fn reads_the_example() {
        let g = read_csg(MODEL).unwrap();
        assert_eq!(g.num_states(), 3);
        assert_eq!(g.enabled_actions(0, 1), &[1]);
        assert_eq!(g.num_local_joints(0), 2);
        let local = g.local_index(0, &[1, 1]).unwrap();
        assert_eq!(g.transition(0, local), &[(0, 0.5), (1, 0.5)]);
        let r = g.reward("time").unwrap();
        assert_eq!(r.state, vec![1.0, 0.0, 0.0]);
        assert_eq!(r.action[0][local], 2.0);
        assert_eq!(g.sat("goal").unwrap(), vec![false, false, true]);
    }

    #[test]
    fn write_then_read_is_identity() {
        let g = read_csg(MODEL).unwrap();
        let text = write_csg(&g);
        assert_eq!(read_csg(&text).unwrap(), g);
        assert_eq!(write_csg(&read_csg(&text).unwrap()), text);
    }

    #[test]
    fn spaced_distributions_and_glued_pluses() {
        let g = read_csg(&MODEL.replace("0.5:1 + 0.5:0", "0.5:1+0.5:0")).unwrap();
        assert_eq!(g, read_csg(MODEL).unwrap());
    }

    #[test]
    fn rejects_bad_distributions() {
        let (line, column, msg) = err(&MODEL.replace("0.5:1 + 0.5:0", "0.5:1 + 0.4:0"));
        assert_eq!((line, column), (10, 21));
        assert!(msg.contains("sum to"));
        assert_eq!(err(&MODEL.replace("0.5:1 + 0.5:0", "0.5:1 + 0.5:7")).1, 33);
        assert!(err(&MODEL.replace("0.5:1 + 0.5:0", "0.5:1 0.5:0")).2.contains("'+'"));
        assert!(err(&MODEL.replace("0.5:1 + 0.5:0", "0.5:1 +")).2.contains("ends with"));
    }

    #[test]
    fn every_enabled_joint_needs_one_transition() {
        let (line, _, msg) = err(&MODEL.replace("trans 0 (wait,send) 1:2\n", ""));
        assert_eq!(line, 15);
        assert!(msg.contains("(wait,send)"), "{msg}");
        let dup = MODEL.replace("trans 1 (-,-) 1.0:2\n", "trans 1 (-,-) 1.0:2\ntrans 1 (-,-) 1:1\n");
        assert_eq!(err(&dup).0, 13);
        let (line, column, _) = err(&MODEL.replace("trans 1 (-,-)", "trans 1 (send,-)"));
        assert_eq!((line, column), (12, 9));
    }

    #[test]
    fn rejects_unknown_names_and_misplaced_lines() {
        assert_eq!(err(&MODEL.replace("(wait,send) 1:2", "(stop,send) 1:2")).1, 9);
        assert_eq!(err(&MODEL.replace("enabled 0 2 send", "enabled 0 3 send")).1, 11);
        assert_eq!(err(&format!("{MODEL}players 2\n")).0, 16);
        assert_eq!(err(&MODEL.replace("initial 0\n", "")).2, "missing 'initial' line");
        assert_eq!(err(&MODEL.replace("label goal", "label true")).1, 7);
        assert_eq!(err(&MODEL.replace("csg\n", "csg 2\n")), (1, 5, "unsupported csg format version '2'".into()));
    }
}
