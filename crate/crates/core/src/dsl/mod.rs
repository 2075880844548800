//! Text format for models, its JSON mirror, and the canonical serializer.
//!
//! ```text
//! agent a;
//! chance C { domain: [h, t]; cpt { () -> h:0.5, t:0.5; } }
//! decision D of a { domain: [h, t]; observes: [C]; }
//! utility U of a { parents: [C, D]; table { (h, h) -> 1; (t, t) -> 1; (_, _) -> 0; } }
//! ```
//!
//! Besides the core grammar, chance nodes accept a `world;` field and a
//! top-level `twin { pair X' = X; noise U_X; }` block records twin-network
//! metadata.

mod json;
mod lexer;
mod parser;
mod writer;

use std::fmt;

use serde::Serialize;

pub use json::{from_json, from_json_str, to_json, to_json_string};
pub use parser::parse;
pub use writer::{format_number, serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct SourceSpan {
    pub line: usize,
    pub column: usize,
    pub length: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ParseError {
    pub span: SourceSpan,
    pub message: String,
    pub expected: Vec<String>,
}

impl ParseError {
    pub(crate) fn new(span: SourceSpan, message: impl Into<String>, expected: Vec<String>) -> Self {
        ParseError { span, message: message.into(), expected }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.span.line, self.span.column, self.message)?;
        if !self.expected.is_empty() {
            write!(f, " (expected {})", self.expected.join(" or "))?;
        }
        Ok(())
    }
}

impl std::error::Error for ParseError {}

/// Row pattern: one entry per parent, `None` is a wildcard.
pub(crate) type Pattern = Vec<Option<String>>;

#[derive(Debug)]
pub(crate) enum ExpandError {
    /// Row `row` has the wrong number of entries.
    Arity { row: usize, expected: usize },
    /// Row `row`, position `pos` names an outcome the parent lacks.
    Label { row: usize, pos: usize },
    /// No row matches this configuration.
    Uncovered(Vec<String>),
}

/// Resolve wildcard rows into one payload per parent configuration, in
/// canonical order. The first matching row wins.
pub(crate) fn expand_rows<T: Clone>(
    parent_domains: &[&[String]],
    rows: &[(Pattern, T)],
) -> Result<Vec<T>, ExpandError> {
    let mut compiled: Vec<Vec<Option<usize>>> = Vec::with_capacity(rows.len());
    for (r, (pattern, _)) in rows.iter().enumerate() {
        if pattern.len() != parent_domains.len() {
            return Err(ExpandError::Arity { row: r, expected: parent_domains.len() });
        }
        let mut c = Vec::with_capacity(pattern.len());
        for (pos, (p, dom)) in pattern.iter().zip(parent_domains).enumerate() {
            match p {
                None => c.push(None),
                Some(l) => match dom.iter().position(|d| d == l) {
                    Some(k) => c.push(Some(k)),
                    None => return Err(ExpandError::Label { row: r, pos }),
                },
            }
        }
        compiled.push(c);
    }
    let cards: Vec<usize> = parent_domains.iter().map(|d| d.len()).collect();
    let mut out = Vec::new();
    for cfg in crate::model::Configurations::new(cards) {
        let hit = compiled.iter().position(|c| c.iter().zip(&cfg).all(|(p, v)| p.is_none_or(|k| k == *v)));
        match hit {
            Some(r) => out.push(rows[r].1.clone()),
            None => {
                return Err(ExpandError::Uncovered(
                    cfg.iter().zip(parent_domains).map(|(&v, d)| d[v].clone()).collect(),
                ))
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn first_match_wins() {
        let a = s(&["x", "y"]);
        let b = s(&["p", "q"]);
        let rows =
            vec![(vec![Some("y".to_string()), None], 1), (vec![None, Some("q".to_string())], 2), (vec![None, None], 3)];
        let got = expand_rows(&[&a, &b], &rows).unwrap();
        assert_eq!(got, vec![3, 2, 1, 1]);
    }

    #[test]
    fn coverage_is_required() {
        let a = s(&["x", "y"]);
        let rows = vec![(vec![Some("x".to_string())], 0)];
        match expand_rows(&[&a], &rows) {
            Err(ExpandError::Uncovered(cfg)) => assert_eq!(cfg, vec!["y"]),
            other => panic!("{other:?}"),
        }
    }
}
