//! Line-oriented text formats for games, models and strategies.
//!
//! All three share the same lexical rules: UTF-8, one directive per line,
//! `#` starts a comment, tokens are separated by whitespace, and joint
//! actions are written as tuples like `(pro,yld,-)` where `-` is the idle
//! action. Errors carry the 1-based line and column of the offending token.

mod csg;
mod nfg;
mod strategy;

pub use csg::{read_csg, write_csg};
pub use nfg::{read_nfg, write_nfg};
pub use strategy::{read_strategy, write_strategy};

use eqsynth_core::Error;

/// A token together with its position.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Token<'a> {
    pub text: &'a str,
    pub line: usize,
    pub column: usize,
}

impl Token<'_> {
    pub fn error(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            line: self.line,
            column: self.column,
            message: message.into(),
        }
    }

    pub fn parse_usize(&self, what: &str) -> Result<usize, Error> {
        self.text
            .parse()
            .map_err(|_| self.error(format!("expected {what}, found '{}'", self.text)))
    }

    pub fn parse_f64(&self, what: &str) -> Result<f64, Error> {
        match self.text.parse::<f64>() {
            Ok(x) if x.is_finite() => Ok(x),
            _ => Err(self.error(format!("expected {what}, found '{}'", self.text))),
        }
    }
}

/// One non-empty line split into tokens. Tuples are kept as single tokens
/// as long as they contain no whitespace; `(a, b)` is glued back together.
#[derive(Debug, Clone)]
pub(crate) struct Line<'a> {
    pub number: usize,
    pub tokens: Vec<Token<'a>>,
    /// Column just past the last token, for "missing ..." errors.
    pub end: usize,
}

impl<'a> Line<'a> {
    pub fn head(&self) -> &'a str {
        self.tokens[0].text
    }

    pub fn get(&self, i: usize, what: &str) -> Result<Token<'a>, Error> {
        self.tokens.get(i).copied().ok_or_else(|| Error::Parse {
            line: self.number,
            column: self.end,
            message: format!("missing {what}"),
        })
    }

    pub fn expect_len(&self, n: usize) -> Result<(), Error> {
        match self.tokens.get(n) {
            Some(extra) => Err(extra.error(format!("unexpected '{}'", extra.text))),
            None => Ok(()),
        }
    }
}

pub(crate) fn lines(text: &str) -> Vec<Line<'_>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let body = raw.split('#').next().unwrap_or("");
        let mut tokens: Vec<Token<'_>> = Vec::new();
        let mut depth = 0usize;
        let mut start: Option<usize> = None;
        for (pos, ch) in body.char_indices() {
            match ch {
                '(' => depth += 1,
                ')' => depth = depth.saturating_sub(1),
                _ => {}
            }
            if ch.is_whitespace() && depth == 0 {
                if let Some(s) = start.take() {
                    tokens.push(token(body, s, pos, i));
                }
            } else if start.is_none() {
                start = Some(pos);
            }
        }
        if let Some(s) = start {
            tokens.push(token(body, s, body.len(), i));
        }
        if !tokens.is_empty() {
            out.push(Line {
                number: i + 1,
                tokens,
                end: body.trim_end().chars().count() + 1,
            });
        }
    }
    out
}

fn token(body: &str, start: usize, end: usize, line: usize) -> Token<'_> {
    Token {
        text: body[start..end].trim_end(),
        line: line + 1,
        column: body[..start].chars().count() + 1,
    }
}

/// Splits `(a,b,c)` into trimmed names.
pub(crate) fn tuple<'a>(tok: &Token<'a>) -> Result<Vec<&'a str>, Error> {
    let inner = tok
        .text
        .strip_prefix('(')
        .and_then(|t| t.strip_suffix(')'))
        .ok_or_else(|| tok.error(format!("expected a tuple like (a,b), found '{}'", tok.text)))?;
    let names: Vec<&str> = inner.split(',').map(str::trim).collect();
    if names.iter().any(|n| n.is_empty()) {
        return Err(tok.error("empty action name in tuple"));
    }
    Ok(names)
}

/// Checks the first line is `<kind>` or `<kind> 1`.
pub(crate) fn header(lines: &[Line<'_>], kind: &str) -> Result<(), Error> {
    let first = lines.first().ok_or(Error::Parse {
        line: 1,
        column: 1,
        message: format!("empty document, expected '{kind}' header"),
    })?;
    if first.head() != kind {
        return Err(first.tokens[0].error(format!("expected '{kind}' header, found '{}'", first.head())));
    }
    if let Some(v) = first.tokens.get(1) {
        if v.text != "1" {
            return Err(v.error(format!("unsupported {kind} format version '{}'", v.text)));
        }
    }
    first.expect_len(2)
}

/// A name usable as an action, label or reward identifier.
pub(crate) fn check_name(tok: &Token<'_>) -> Result<(), Error> {
    let ok = tok.text != "-"
        && tok
            .text
            .chars()
            .all(|c| c.is_alphanumeric() || matches!(c, '_' | '.' | '\'' | '&'));
    if ok {
        Ok(())
    } else {
        Err(tok.error(format!("invalid name '{}'", tok.text)))
    }
}

/// Shortest decimal that reads back to the same `f64`.
pub(crate) fn num(x: f64) -> String {
    format!("{x}")
}
