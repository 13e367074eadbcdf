//! Synthesized strategies.
//!
//! ```text
//! strategy 1
//! property <<1:2:3>>(CE,SF)max=? (R{u1}[F done] + R{u2}[F done] + R{u3}[F done])
//! rule frozen
//! at 0 step 0 done - failed -
//! joint 0.5:(pro,yld,pro) + 0.5:(yld,pro,yld)
//! ```
//! Each `at` line opens the entry for a state and memory (step counter and
//! the coalitions, numbered from 1, that have met or missed their
//! objective). It is followed either by one `joint` line, a distribution
//! over tuples of every player's action, or by one `profile <c>` line per
//! coalition, a distribution over tuples of that coalition's members in
//! the order the property lists them. `rule` is `frozen`, `counting` or
//! `saturating <cap>` and says how the step counter moves.

use std::collections::BTreeMap;
use std::fmt::Write;

use eqsynth_core::checker::{Memory, StepRule};
use eqsynth_core::coalition::{build_coalition_game, CoalitionGame};
use eqsynth_core::csg::Csg;
use eqsynth_core::property::parse_property;
use eqsynth_core::synth::{Decision, SynthesizedStrategy};
use eqsynth_core::{Error, PROB_TOL};

use super::{header, lines, num, tuple, Line, Token};

fn set(mask: u64) -> String {
    if mask == 0 {
        return "-".into();
    }
    let members: Vec<String> = (0..64).filter(|l| mask >> l & 1 == 1).map(|l| (l + 1).to_string()).collect();
    members.join(",")
}

fn read_set(t: &Token<'_>, coalitions: usize) -> Result<u64, Error> {
    if t.text == "-" {
        return Ok(0);
    }
    let mut mask = 0u64;
    for part in t.text.split(',') {
        let c: usize = part
            .parse()
            .map_err(|_| t.error(format!("expected coalition numbers or '-', found '{}'", t.text)))?;
        if c == 0 || c > coalitions {
            return Err(t.error(format!("coalition {c} out of range 1..{coalitions}")));
        }
        mask |= 1 << (c - 1);
    }
    Ok(mask)
}

fn tuple_text(csg: &Csg, players: &[usize], digits: &[usize]) -> String {
    let names: Vec<&str> = players.iter().zip(digits).map(|(&j, &d)| csg.action_name(j, d)).collect();
    format!("({})", names.join(","))
}

fn dist_text(terms: impl Iterator<Item = (String, f64)>) -> String {
    let parts: Vec<String> = terms.map(|(t, p)| format!("{}:{t}", num(p))).collect();
    parts.join(" + ")
}

/// Writes a strategy for the game it was synthesized on.
pub fn write_strategy(csg: &Csg, strategy: &SynthesizedStrategy) -> Result<String, Error> {
    let coalition = build_coalition_game(csg, &strategy.property.partition)?;
    let partition = &coalition.partition;
    let everyone: Vec<usize> = (0..csg.num_players()).collect();
    let mut out = String::from("strategy 1\n");
    let _ = writeln!(out, "property {}", strategy.property);
    let _ = match strategy.rule {
        StepRule::Frozen => writeln!(out, "rule frozen"),
        StepRule::Counting => writeln!(out, "rule counting"),
        StepRule::Saturating(cap) => writeln!(out, "rule saturating {cap}"),
    };
    for (&(s, mem), decision) in &strategy.entries {
        let _ = writeln!(out, "at {s} step {} done {} failed {}", mem.step, set(mem.done), set(mem.failed));
        match decision {
            Decision::Joint(entries) => {
                let terms = entries
                    .iter()
                    .map(|(digits, p)| (tuple_text(csg, &everyone, &coalition.original_joint(digits)), *p));
                let _ = writeln!(out, "joint {}", dist_text(terms));
            }
            Decision::Profile(dists) => {
                for (c, d) in dists.iter().enumerate() {
                    let members = partition.members(c);
                    let terms = d
                        .iter()
                        .map(|&(digit, p)| (tuple_text(csg, members, &coalition.decompose(c, digit)), p));
                    let _ = writeln!(out, "profile {} {}", c + 1, dist_text(terms));
                }
            }
        }
    }
    Ok(out)
}

struct Reader<'g> {
    csg: &'g Csg,
    coalition: CoalitionGame,
}

impl Reader<'_> {
    /// Parses `p:(a,b) + ...`, mapping each tuple over `players` through
    /// `digit`.
    fn distribution<T>(
        &self,
        line: &Line<'_>,
        from: usize,
        players: &[usize],
        mut digit: impl FnMut(&[usize]) -> T,
    ) -> Result<Vec<(T, f64)>, Error> {
        line.get(from, "distribution")?;
        let mut out = Vec::new();
        let mut total = 0.0;
        for (k, tok) in line.tokens[from..].iter().enumerate() {
            if k % 2 == 1 {
                if tok.text != "+" {
                    return Err(tok.error(format!("expected '+', found '{}'", tok.text)));
                }
                continue;
            }
            let (p, t) = tok
                .text
                .split_once(':')
                .ok_or_else(|| tok.error(format!("expected probability:(actions), found '{}'", tok.text)))?;
            let p = Token { text: p, ..*tok }.parse_f64("probability")?;
            if !(0.0..=1.0 + PROB_TOL).contains(&p) {
                return Err(tok.error(format!("probability {p} outside [0, 1]")));
            }
            let tt = Token {
                text: t,
                column: tok.column + tok.text.len() - t.len(),
                ..*tok
            };
            let names = tuple(&tt)?;
            if names.len() != players.len() {
                return Err(tt.error(format!("expected {} actions, found {}", players.len(), names.len())));
            }
            let digits = players
                .iter()
                .zip(&names)
                .map(|(&j, n)| {
                    self.csg
                        .action_digit(j, n)
                        .ok_or_else(|| tt.error(format!("unknown action '{n}' for player {}", j + 1)))
                })
                .collect::<Result<Vec<usize>, Error>>()?;
            total += p;
            out.push((digit(&digits), p));
        }
        if line.tokens.len() % 2 != (from + 1) % 2 {
            return Err(Error::Parse {
                line: line.number,
                column: line.end,
                message: "distribution ends with '+'".into(),
            });
        }
        if (total - 1.0).abs() > PROB_TOL {
            return Err(line.tokens[from].error(format!("probabilities sum to {total}, not 1")));
        }
        Ok(out)
    }
}

/// Reads a strategy for `csg`, checking that every action exists and is
/// enabled where it is played.
pub fn read_strategy(text: &str, csg: &Csg) -> Result<SynthesizedStrategy, Error> {
    let raw: Vec<&str> = text.lines().collect();
    let lines = lines(text);
    header(&lines, "strategy")?;
    let prop_line = lines.get(1).filter(|l| l.head() == "property").ok_or_else(|| {
        let (line, column) = lines.get(1).map_or((lines[0].number + 1, 1), |l| (l.number, l.tokens[0].column));
        Error::Parse {
            line,
            column,
            message: "expected 'property' line".into(),
        }
    })?;
    let source = raw[prop_line.number - 1].split('#').next().unwrap_or("");
    let offset = source.find("property").unwrap_or(0) + "property".len();
    let property = parse_property(&source[offset..], Some(csg.num_players())).map_err(|e| match e {
        Error::Parse { column, message, .. } => Error::Parse {
            line: prop_line.number,
            column: source[..offset].chars().count() + column,
            message,
        },
        other => prop_line.tokens[0].error(other.to_string()),
    })?;
    let coalition = build_coalition_game(csg, &property.partition).map_err(|e| prop_line.tokens[0].error(e.to_string()))?;
    let m = coalition.partition.len();

    let rule_line = lines.get(2).filter(|l| l.head() == "rule").ok_or_else(|| Error::Parse {
        line: prop_line.number + 1,
        column: 1,
        message: "expected 'rule' line".into(),
    })?;
    let kind = rule_line.get(1, "step rule")?;
    let rule = match kind.text {
        "frozen" => StepRule::Frozen,
        "counting" => StepRule::Counting,
        "saturating" => {
            let cap = rule_line.get(2, "counter cap")?;
            let cap = u32::try_from(cap.parse_usize("counter cap")?).map_err(|_| cap.error("counter cap too large"))?;
            rule_line.expect_len(3)?;
            StepRule::Saturating(cap)
        }
        other => return Err(kind.error(format!("unknown step rule '{other}'"))),
    };
    if !matches!(rule, StepRule::Saturating(_)) {
        rule_line.expect_len(2)?;
    }

    let reader = Reader { csg, coalition };
    let coalition = &reader.coalition;
    let game = &coalition.game;
    let everyone: Vec<usize> = (0..csg.num_players()).collect();
    let mut entries = BTreeMap::new();
    let mut k = 3;
    while k < lines.len() {
        let at = &lines[k];
        if at.head() != "at" {
            return Err(at.tokens[0].error(format!("expected 'at', found '{}'", at.head())));
        }
        let st = at.get(1, "state")?;
        let s = st.parse_usize("state")?;
        if s >= csg.num_states() {
            return Err(st.error(format!("state {s} out of range 0..{}", csg.num_states())));
        }
        for (i, word) in [(2, "step"), (4, "done"), (6, "failed")] {
            let t = at.get(i, word)?;
            if t.text != word {
                return Err(t.error(format!("expected '{word}', found '{}'", t.text)));
            }
        }
        let step_tok = at.get(3, "step")?;
        let step = u32::try_from(step_tok.parse_usize("step")?).map_err(|_| step_tok.error("step too large"))?;
        let mem = Memory {
            step,
            done: read_set(&at.get(5, "coalition set")?, m)?,
            failed: read_set(&at.get(7, "coalition set")?, m)?,
        };
        at.expect_len(8)?;
        k += 1;
        let missing = || Error::Parse {
            line: at.number + 1,
            column: 1,
            message: format!("missing decision for state {s}"),
        };
        let first = lines.get(k).ok_or_else(missing)?;
        let decision = match first.head() {
            "joint" => {
                let dist = reader.distribution(first, 1, &everyone, |digits| {
                    (0..m)
                        .map(|c| {
                            let member: Vec<usize> = coalition.partition.members(c).iter().map(|&j| digits[j]).collect();
                            coalition.compose(c, &member)
                        })
                        .collect::<Vec<usize>>()
                })?;
                for (digits, _) in &dist {
                    if game.local_index(s, digits).is_none() {
                        return Err(first.tokens[0].error(format!("joint action not enabled in state {s}")));
                    }
                }
                k += 1;
                Decision::Joint(dist)
            }
            "profile" => {
                let mut dists = Vec::with_capacity(m);
                for c in 0..m {
                    let line = lines.get(k).ok_or_else(missing)?;
                    if line.head() != "profile" {
                        return Err(line.tokens[0].error(format!("expected 'profile {}'", c + 1)));
                    }
                    let ct = line.get(1, "coalition number")?;
                    if ct.parse_usize("coalition number")? != c + 1 {
                        return Err(ct.error(format!("expected coalition {}", c + 1)));
                    }
                    let members = coalition.partition.members(c);
                    let dist = reader.distribution(line, 2, members, |digits| coalition.compose(c, digits))?;
                    for (d, _) in &dist {
                        if !game.enabled_actions(s, c).contains(d) {
                            return Err(ct.error(format!("action of coalition {} not enabled in state {s}", c + 1)));
                        }
                    }
                    dists.push(dist);
                    k += 1;
                }
                Decision::Profile(dists)
            }
            other => return Err(first.tokens[0].error(format!("expected 'joint' or 'profile', found '{other}'"))),
        };
        if entries.insert((s, mem), decision).is_some() {
            return Err(at.tokens[0].error(format!("duplicate entry for state {s}, {mem}")));
        }
    }
    Ok(SynthesizedStrategy { property, rule, entries })
}
