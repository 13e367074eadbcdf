//! Nonzero-sum equilibrium properties.
//!
//! ```text
//! property  := '<<' coalition (':' coalition)* '>>' '(' eq ',' crit ')' opt bound '(' objective ('+' objective)* ')'
//! coalition := INT (',' INT)*
//! eq        := 'NE' | 'CE'
//! crit      := 'SW' | 'SF'
//! opt       := 'min' | 'max'
//! bound     := '=?' | ('<' | '<=' | '>=' | '>') NUMBER
//! objective := 'P' '[' path ']' | 'R' '{' IDENT '}' '[' reward ']'
//! path      := 'X' atom | atom 'U' ['<=' INT] atom | 'F' atom
//! reward    := 'I' '=' INT | 'C' '<=' INT | 'F' atom
//! ```
//!
//! Whitespace is insignificant. Players are numbered from 1. `F a` inside
//! `P[...]` is shorthand for `true U a`. `X`, `U` and `F` cannot be used as
//! atom names; `true` is an atom that holds in every state. The parentheses
//! around a single objective may be omitted.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::coalition::CoalitionPartition;
use crate::{Criterion, EquilibriumKind, Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PathFormula {
    Next(String),
    BoundedUntil(String, u32, String),
    Until(String, String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RewardFormula {
    Instant(u32),
    Cumulative(u32),
    Reach(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Objective {
    Prob(PathFormula),
    Reward { structure: String, formula: RewardFormula },
}

impl Objective {
    /// Bounded and next objectives only look at a fixed number of steps.
    pub fn is_finite_horizon(&self) -> bool {
        matches!(
            self,
            Objective::Prob(PathFormula::Next(_) | PathFormula::BoundedUntil(..))
                | Objective::Reward {
                    formula: RewardFormula::Instant(_) | RewardFormula::Cumulative(_),
                    ..
                }
        )
    }

    pub fn is_reward(&self) -> bool {
        matches!(self, Objective::Reward { .. })
    }

    /// The explicit step bound, if any.
    pub fn bound(&self) -> Option<u32> {
        match self {
            Objective::Prob(PathFormula::BoundedUntil(_, k, _)) => Some(*k),
            Objective::Reward {
                formula: RewardFormula::Instant(k) | RewardFormula::Cumulative(k),
                ..
            } => Some(*k),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Opt {
    Min,
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Comparison {
    Lt,
    Le,
    Ge,
    Gt,
}

impl Comparison {
    pub fn holds(self, lhs: f64, rhs: f64) -> bool {
        match self {
            Comparison::Lt => lhs < rhs,
            Comparison::Le => lhs <= rhs,
            Comparison::Ge => lhs >= rhs,
            Comparison::Gt => lhs > rhs,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            Comparison::Lt => "<",
            Comparison::Le => "<=",
            Comparison::Ge => ">=",
            Comparison::Gt => ">",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bound {
    Query,
    Threshold(Comparison, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyAst {
    pub partition: CoalitionPartition,
    pub eq: EquilibriumKind,
    pub criterion: Criterion,
    pub opt: Opt,
    pub bound: Bound,
    pub objectives: Vec<Objective>,
}

impl fmt::Display for PathFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PathFormula::Next(a) => write!(f, "X {a}"),
            PathFormula::BoundedUntil(a, k, b) => write!(f, "{a} U<={k} {b}"),
            PathFormula::Until(a, b) => write!(f, "{a} U {b}"),
        }
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Objective::Prob(path) => write!(f, "P[{path}]"),
            Objective::Reward { structure, formula } => {
                write!(f, "R{{{structure}}}[")?;
                match formula {
                    RewardFormula::Instant(k) => write!(f, "I={k}")?,
                    RewardFormula::Cumulative(k) => write!(f, "C<={k}")?,
                    RewardFormula::Reach(a) => write!(f, "F {a}")?,
                }
                write!(f, "]")
            }
        }
    }
}

/// Canonical form; parsing it gives back an equal AST.
impl fmt::Display for PropertyAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let coalitions: Vec<String> = self
            .partition
            .coalitions()
            .iter()
            .map(|c| c.iter().map(|j| (j + 1).to_string()).collect::<Vec<_>>().join(","))
            .collect();
        let eq = match self.eq {
            EquilibriumKind::Nash => "NE",
            EquilibriumKind::Correlated => "CE",
        };
        let crit = match self.criterion {
            Criterion::SocialWelfare => "SW",
            Criterion::SocialFairness => "SF",
        };
        let opt = match self.opt {
            Opt::Min => "min",
            Opt::Max => "max",
        };
        write!(f, "<<{}>>({eq},{crit}){opt}", coalitions.join(":"))?;
        match self.bound {
            Bound::Query => write!(f, "=?")?,
            Bound::Threshold(c, x) => write!(f, "{}{x:?}", c.symbol())?,
        }
        let objs: Vec<String> = self.objectives.iter().map(ToString::to_string).collect();
        write!(f, " ({})", objs.join(" + "))
    }
}

/// A `min` property rewritten as `max` over negated utilities.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalized {
    pub ast: PropertyAst,
    pub negate: bool,
}

pub fn normalize_min_to_max(ast: &PropertyAst) -> Normalized {
    let mut out = ast.clone();
    let negate = ast.opt == Opt::Min;
    out.opt = Opt::Max;
    Normalized { ast: out, negate }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Int(u64),
    Num(f64),
    Sym(&'static str),
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

const SYMBOLS: [&str; 17] = [
    "<<", ">>", "=?", "<=", ">=", "<", ">", "=", "(", ")", "[", "]", "{", "}", ":", ",", "+",
];

fn lex(text: &str) -> Result<Vec<Token>> {
    let mut out = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let (mut i, mut line, mut col) = (0, 1, 1);
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        let starts_number = c.is_ascii_digit()
            || (c == '.' && chars.get(i + 1).is_some_and(char::is_ascii_digit))
            || (c == '-' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit() || *d == '.'));
        if starts_number {
            let start = i;
            i += 1;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let s: String = chars[start..i].iter().collect();
            let tok = if s.bytes().all(|b| b.is_ascii_digit()) {
                s.parse().map(Tok::Int).ok()
            } else {
                None
            };
            let tok = match tok {
                Some(t) => t,
                None => Tok::Num(s.parse().map_err(|_| parse_err(tl, tc, format!("malformed number '{s}'")))?),
            };
            col += i - start;
            out.push(Token {
                tok,
                line: tl,
                column: tc,
            });
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            col += i - start;
            out.push(Token {
                tok: Tok::Ident(chars[start..i].iter().collect()),
                line: tl,
                column: tc,
            });
            continue;
        }
        let sym = SYMBOLS.iter().find(|s| {
            let sc: Vec<char> = s.chars().collect();
            chars[i..].starts_with(&sc)
        });
        match sym {
            Some(s) => {
                i += s.len();
                col += s.len();
                out.push(Token {
                    tok: Tok::Sym(s),
                    line: tl,
                    column: tc,
                });
            }
            None => return Err(parse_err(tl, tc, format!("unexpected character '{c}'"))),
        }
    }
    Ok(out)
}

fn parse_err(line: usize, column: usize, message: String) -> Error {
    Error::Parse { line, column, message }
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    end: (usize, usize),
}

const RESERVED: [&str; 3] = ["X", "U", "F"];

impl Parser {
    fn here(&self) -> (usize, usize) {
        self.toks.get(self.pos).map_or(self.end, |t| (t.line, t.column))
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        let (l, c) = self.here();
        Err(parse_err(l, c, message.into()))
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn describe(&self) -> String {
        match self.peek() {
            None => "end of input".into(),
            Some(Tok::Ident(s)) => format!("'{s}'"),
            Some(Tok::Int(n)) => format!("'{n}'"),
            Some(Tok::Num(x)) => format!("'{x}'"),
            Some(Tok::Sym(s)) => format!("'{s}'"),
        }
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Sym(x)) if *x == s) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &str) -> Result<()> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            self.err(format!("expected '{s}', found {}", self.describe()))
        }
    }

    fn ident(&mut self, what: &str) -> Result<String> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => self.err(format!("expected {what}, found {}", self.describe())),
        }
    }

    fn keyword(&mut self, options: &[&str]) -> Result<String> {
        match self.peek() {
            Some(Tok::Ident(s)) if options.contains(&s.as_str()) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => self.err(format!("expected one of {}, found {}", options.join("/"), self.describe())),
        }
    }

    fn int(&mut self, what: &str) -> Result<u64> {
        match self.peek() {
            Some(Tok::Int(n)) => {
                let n = *n;
                self.pos += 1;
                Ok(n)
            }
            _ => self.err(format!("expected {what}, found {}", self.describe())),
        }
    }

    fn bound_k(&mut self) -> Result<u32> {
        let (l, c) = self.here();
        let k = self.int("a step bound")?;
        u32::try_from(k).map_err(|_| parse_err(l, c, "step bound too large".into()))
    }

    fn atom(&mut self) -> Result<String> {
        if let Some(Tok::Ident(s)) = self.peek() {
            if RESERVED.contains(&s.as_str()) {
                return self.err(format!("'{s}' is reserved and cannot be an atom"));
            }
        }
        self.ident("an atomic proposition")
    }

    fn coalitions(&mut self) -> Result<Vec<(Vec<usize>, (usize, usize))>> {
        let mut out = Vec::new();
        loop {
            let at = self.here();
            let mut members = Vec::new();
            loop {
                let (l, c) = self.here();
                let j = self.int("a player number")?;
                if j == 0 {
                    return Err(parse_err(l, c, "players are numbered from 1".into()));
                }
                members.push(j as usize - 1);
                if !self.eat_sym(",") {
                    break;
                }
            }
            out.push((members, at));
            if !self.eat_sym(":") {
                break;
            }
        }
        Ok(out)
    }

    fn path(&mut self) -> Result<PathFormula> {
        match self.peek() {
            Some(Tok::Ident(k)) if k == "X" => {
                self.pos += 1;
                Ok(PathFormula::Next(self.atom()?))
            }
            Some(Tok::Ident(k)) if k == "F" => {
                self.pos += 1;
                Ok(PathFormula::Until("true".into(), self.atom()?))
            }
            _ => {
                let a = self.atom()?;
                if !matches!(self.peek(), Some(Tok::Ident(u)) if u == "U") {
                    return self.err(format!("expected 'U', found {}", self.describe()));
                }
                self.pos += 1;
                if self.eat_sym("<=") {
                    let k = self.bound_k()?;
                    Ok(PathFormula::BoundedUntil(a, k, self.atom()?))
                } else {
                    Ok(PathFormula::Until(a, self.atom()?))
                }
            }
        }
    }

    fn reward(&mut self) -> Result<RewardFormula> {
        let kw = self.keyword(&["I", "C", "F"])?;
        match kw.as_str() {
            "I" => {
                self.expect_sym("=")?;
                Ok(RewardFormula::Instant(self.bound_k()?))
            }
            "C" => {
                self.expect_sym("<=")?;
                Ok(RewardFormula::Cumulative(self.bound_k()?))
            }
            _ => Ok(RewardFormula::Reach(self.atom()?)),
        }
    }

    fn objective(&mut self) -> Result<Objective> {
        let kw = self.keyword(&["P", "R"])?;
        if kw == "P" {
            self.expect_sym("[")?;
            let path = self.path()?;
            self.expect_sym("]")?;
            Ok(Objective::Prob(path))
        } else {
            self.expect_sym("{")?;
            let structure = self.ident("a reward structure name")?;
            self.expect_sym("}")?;
            self.expect_sym("[")?;
            let formula = self.reward()?;
            self.expect_sym("]")?;
            Ok(Objective::Reward { structure, formula })
        }
    }

    fn number(&mut self) -> Result<f64> {
        match self.peek() {
            Some(Tok::Int(n)) => {
                let x = *n as f64;
                self.pos += 1;
                Ok(x)
            }
            Some(Tok::Num(x)) => {
                let x = *x;
                self.pos += 1;
                Ok(x)
            }
            _ => self.err(format!("expected a number, found {}", self.describe())),
        }
    }
}

/// Parses a property. With `num_players` the coalitions must cover exactly
/// players `1..=num_players`; without it, players `1..=max` where `max` is
/// the largest index mentioned.
pub fn parse_property(text: &str, num_players: Option<usize>) -> Result<PropertyAst> {
    let toks = lex(text)?;
    let end = {
        let line = text.matches('\n').count() + 1;
        let column = text.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
        (line, column)
    };
    let mut p = Parser { toks, pos: 0, end };

    p.expect_sym("<<")?;
    let start = p.here();
    let coalitions = p.coalitions()?;
    p.expect_sym(">>")?;

    let mut seen: Vec<usize> = Vec::new();
    for (members, (l, c)) in &coalitions {
        for j in members {
            if seen.contains(j) {
                return Err(parse_err(
                    *l,
                    *c,
                    format!("coalitions must be disjoint: player {} appears twice", j + 1),
                ));
            }
            seen.push(*j);
        }
    }
    let n = num_players.unwrap_or_else(|| seen.iter().max().map_or(0, |m| m + 1));
    if let Some(&j) = seen.iter().find(|&&j| j >= n) {
        return Err(parse_err(start.0, start.1, format!("player {} does not exist", j + 1)));
    }
    if let Some(missing) = (0..n).find(|j| !seen.contains(j)) {
        return Err(parse_err(
            start.0,
            start.1,
            format!("coalitions must cover every player: player {} is missing", missing + 1),
        ));
    }
    let partition = CoalitionPartition::new(coalitions.into_iter().map(|c| c.0).collect(), n)
        .map_err(|e| parse_err(start.0, start.1, e.to_string()))?;

    p.expect_sym("(")?;
    let eq = match p.keyword(&["NE", "CE"])?.as_str() {
        "NE" => EquilibriumKind::Nash,
        _ => EquilibriumKind::Correlated,
    };
    p.expect_sym(",")?;
    let criterion = match p.keyword(&["SW", "SF"])?.as_str() {
        "SW" => Criterion::SocialWelfare,
        _ => Criterion::SocialFairness,
    };
    p.expect_sym(")")?;
    let opt = match p.keyword(&["min", "max"])?.as_str() {
        "min" => Opt::Min,
        _ => Opt::Max,
    };
    let bound = if p.eat_sym("=?") {
        Bound::Query
    } else {
        let cmp = match p.peek() {
            Some(Tok::Sym("<")) => Comparison::Lt,
            Some(Tok::Sym("<=")) => Comparison::Le,
            Some(Tok::Sym(">=")) => Comparison::Ge,
            Some(Tok::Sym(">")) => Comparison::Gt,
            _ => return p.err(format!("expected '=?' or a comparison, found {}", p.describe())),
        };
        p.pos += 1;
        Bound::Threshold(cmp, p.number()?)
    };

    let objectives_at = p.here();
    let parenthesised = p.eat_sym("(");
    let mut objectives = Vec::new();
    let mut kinds = Vec::new();
    loop {
        let at = p.here();
        let obj = p.objective()?;
        if kinds.first().is_some_and(|&first: &bool| first != obj.is_reward()) {
            return Err(parse_err(
                at.0,
                at.1,
                "probabilistic and reward objectives cannot be mixed".into(),
            ));
        }
        kinds.push(obj.is_reward());
        objectives.push(obj);
        if !p.eat_sym("+") {
            break;
        }
    }
    if parenthesised {
        p.expect_sym(")")?;
    } else if objectives.len() > 1 {
        return Err(parse_err(objectives_at.0, objectives_at.1, "a sum of objectives must be parenthesised".into()));
    }
    if p.pos < p.toks.len() {
        if matches!(p.peek(), Some(Tok::Sym("<<"))) {
            return p.err("nested equilibrium formulas are not supported");
        }
        return p.err(format!("unexpected {} after the property", p.describe()));
    }
    if objectives.len() != partition.len() {
        return Err(parse_err(
            objectives_at.0,
            objectives_at.1,
            format!(
                "{} coalitions need {} objectives, found {}",
                partition.len(),
                partition.len(),
                objectives.len()
            ),
        ));
    }
    Ok(PropertyAst {
        partition,
        eq,
        criterion,
        opt,
        bound,
        objectives,
    })
}
