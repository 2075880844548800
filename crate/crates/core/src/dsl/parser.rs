use std::collections::HashMap;

use super::lexer::{lex, Tok, Token};
use super::{expand_rows, ExpandError, ParseError, Pattern, SourceSpan};
use crate::error::CidError;
use crate::model::{CidModel, Cpt, Mechanism, ModelBuilder, PendingKind, PendingNode, UtilityTable, Violation};

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Kind {
    Chance,
    Decision,
    Utility,
}

struct CptRow {
    pattern: Pattern,
    entries: Vec<(String, f64, SourceSpan)>,
    span: SourceSpan,
}

struct UtilRow {
    pattern: Pattern,
    value: f64,
    span: SourceSpan,
}

struct NodeDecl {
    kind: Kind,
    name: String,
    span: SourceSpan,
    agent: Option<String>,
    domain: Option<(Vec<String>, SourceSpan)>,
    parents: Option<(Vec<String>, SourceSpan)>,
    cpt: Option<(Vec<CptRow>, SourceSpan)>,
    table: Option<(Vec<UtilRow>, SourceSpan)>,
    world: bool,
}

#[derive(Default)]
struct Document {
    agents: Vec<(String, SourceSpan)>,
    nodes: Vec<NodeDecl>,
    pairs: Vec<(String, String, SourceSpan)>,
    noise: Vec<(String, SourceSpan)>,
}

struct Parser<'a> {
    text: &'a str,
    toks: Vec<Token>,
    pos: usize,
}

type PResult<T> = Result<T, ParseError>;

fn err(span: SourceSpan, msg: impl Into<String>) -> ParseError {
    ParseError::new(span, msg, Vec::new())
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if !matches!(t.tok, Tok::Eof) {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self, expected: &[&str]) -> ParseError {
        let t = self.peek();
        ParseError::new(
            t.span,
            format!("unexpected {}", t.describe()),
            expected.iter().map(|e| e.to_string()).collect(),
        )
    }

    fn at_punct(&self, p: &str) -> bool {
        matches!(self.peek().tok, Tok::Punct(q) if q == p)
    }

    fn at_kw(&self, kw: &str) -> bool {
        matches!(&self.peek().tok, Tok::Ident(s) if s == kw)
    }

    fn expect_punct(&mut self, p: &'static str) -> PResult<Token> {
        if self.at_punct(p) {
            Ok(self.bump())
        } else {
            Err(self.unexpected(&[&format!("`{p}`")]))
        }
    }

    fn ident(&mut self) -> PResult<(String, SourceSpan)> {
        match &self.peek().tok {
            Tok::Ident(s) => {
                let s = s.clone();
                let t = self.bump();
                Ok((s, t.span))
            }
            _ => Err(self.unexpected(&["identifier"])),
        }
    }

    fn number(&mut self) -> PResult<f64> {
        match self.peek().tok {
            Tok::Number(v) => {
                self.bump();
                Ok(v)
            }
            _ => Err(self.unexpected(&["number"])),
        }
    }

    /// Span from token `start` through the last consumed token.
    fn span_from(&self, start: &Token) -> SourceSpan {
        let last = &self.toks[self.pos.saturating_sub(1)];
        let end = last.end().max(start.end());
        let line_end = self.text[start.offset..].find('\n').map_or(self.text.len(), |k| start.offset + k);
        SourceSpan { length: end.min(line_end).max(start.end()) - start.offset, ..start.span }
    }

    fn document(&mut self) -> PResult<Document> {
        let mut doc = Document::default();
        loop {
            let t = self.peek().clone();
            match &t.tok {
                Tok::Eof => return Ok(doc),
                Tok::Ident(k) if k == "agent" => {
                    self.bump();
                    let (name, span) = self.ident()?;
                    self.expect_punct(";")?;
                    doc.agents.push((name, span));
                }
                Tok::Ident(k) if k == "chance" || k == "decision" || k == "utility" => {
                    let node = self.node_decl()?;
                    doc.nodes.push(node);
                }
                Tok::Ident(k) if k == "twin" => self.twin_block(&mut doc)?,
                _ => return Err(self.unexpected(&["`agent`", "`chance`", "`decision`", "`utility`", "`twin`"])),
            }
        }
    }

    fn twin_block(&mut self, doc: &mut Document) -> PResult<()> {
        self.bump();
        self.expect_punct("{")?;
        loop {
            if self.at_punct("}") {
                self.bump();
                return Ok(());
            }
            if self.at_kw("pair") {
                self.bump();
                let (cf, span) = self.ident()?;
                self.expect_punct("=")?;
                let (f, _) = self.ident()?;
                self.expect_punct(";")?;
                doc.pairs.push((cf, f, span));
            } else if self.at_kw("noise") {
                self.bump();
                let (u, span) = self.ident()?;
                self.expect_punct(";")?;
                doc.noise.push((u, span));
            } else {
                return Err(self.unexpected(&["`pair`", "`noise`", "`}`"]));
            }
        }
    }

    fn ident_list(&mut self, allow_empty: bool) -> PResult<Vec<String>> {
        self.expect_punct("[")?;
        let mut out = Vec::new();
        if allow_empty && self.at_punct("]") {
            self.bump();
            return Ok(out);
        }
        loop {
            out.push(self.ident()?.0);
            if self.at_punct(",") {
                self.bump();
            } else if self.at_punct("]") {
                self.bump();
                return Ok(out);
            } else {
                return Err(self.unexpected(&["`,`", "`]`"]));
            }
        }
    }

    fn pattern(&mut self) -> PResult<Pattern> {
        self.expect_punct("(")?;
        let mut out = Vec::new();
        if self.at_punct(")") {
            self.bump();
            return Ok(out);
        }
        loop {
            if self.at_punct("_") {
                self.bump();
                out.push(None);
            } else {
                match &self.peek().tok {
                    Tok::Ident(s) => {
                        out.push(Some(s.clone()));
                        self.bump();
                    }
                    _ => return Err(self.unexpected(&["identifier", "`_`"])),
                }
            }
            if self.at_punct(",") {
                self.bump();
            } else if self.at_punct(")") {
                self.bump();
                return Ok(out);
            } else {
                return Err(self.unexpected(&["`,`", "`)`"]));
            }
        }
    }

    fn row_end(&mut self, start: &Token, more: &[&str]) -> PResult<()> {
        if self.at_punct(";") {
            self.bump();
            return Ok(());
        }
        let mut expected = vec!["`;`".to_string()];
        expected.extend(more.iter().map(|s| s.to_string()));
        Err(ParseError::new(
            self.span_from(start),
            format!("missing `;` after row, found {}", self.peek().describe()),
            expected,
        ))
    }

    fn cpt_rows(&mut self) -> PResult<Vec<CptRow>> {
        self.expect_punct("{")?;
        let mut rows = Vec::new();
        while !self.at_punct("}") {
            if !self.at_punct("(") {
                return Err(self.unexpected(&["`(`", "`}`"]));
            }
            let start = self.peek().clone();
            let pattern = self.pattern()?;
            self.expect_punct("->")?;
            let mut entries = Vec::new();
            loop {
                let (label, span) = self.ident()?;
                self.expect_punct(":")?;
                let p = self.number()?;
                entries.push((label, p, span));
                if self.at_punct(",") {
                    self.bump();
                } else {
                    break;
                }
            }
            self.row_end(&start, &["`,`"])?;
            rows.push(CptRow { pattern, entries, span: self.span_from(&start) });
        }
        self.bump();
        Ok(rows)
    }

    fn util_rows(&mut self) -> PResult<Vec<UtilRow>> {
        self.expect_punct("{")?;
        let mut rows = Vec::new();
        while !self.at_punct("}") {
            if !self.at_punct("(") {
                return Err(self.unexpected(&["`(`", "`}`"]));
            }
            let start = self.peek().clone();
            let pattern = self.pattern()?;
            self.expect_punct("->")?;
            let value = self.number()?;
            self.row_end(&start, &[])?;
            rows.push(UtilRow { pattern, value, span: self.span_from(&start) });
        }
        self.bump();
        Ok(rows)
    }

    fn node_decl(&mut self) -> PResult<NodeDecl> {
        let kw = self.bump();
        let kind = match &kw.tok {
            Tok::Ident(k) if k == "chance" => Kind::Chance,
            Tok::Ident(k) if k == "decision" => Kind::Decision,
            _ => Kind::Utility,
        };
        let (name, span) = self.ident()?;
        let mut agent = None;
        if self.at_kw("of") {
            let of = self.bump();
            if kind == Kind::Chance {
                return Err(err(of.span, "chance nodes have no owner; remove `of`"));
            }
            agent = Some(self.ident()?.0);
        } else if kind != Kind::Chance {
            return Err(ParseError::new(
                self.peek().span,
                format!("{} `{name}` needs an owner", if kind == Kind::Decision { "decision" } else { "utility" }),
                vec!["`of`".into()],
            ));
        }
        self.expect_punct("{")?;
        let mut node =
            NodeDecl { kind, name, span, agent, domain: None, parents: None, cpt: None, table: None, world: false };
        loop {
            let t = self.peek().clone();
            let field = match &t.tok {
                Tok::Punct("}") => {
                    self.bump();
                    break;
                }
                Tok::Ident(f) => f.clone(),
                _ => return Err(self.unexpected(&["field name", "`}`"])),
            };
            let dup = |present: bool| {
                if present {
                    Err(err(t.span, format!("field `{field}` given twice")))
                } else {
                    Ok(())
                }
            };
            match field.as_str() {
                "domain" => {
                    dup(node.domain.is_some())?;
                    if kind == Kind::Utility {
                        return Err(err(t.span, "utility nodes take no domain; their outcomes are the table values"));
                    }
                    self.bump();
                    self.expect_punct(":")?;
                    let d = self.ident_list(false)?;
                    self.expect_punct(";")?;
                    node.domain = Some((d, t.span));
                }
                "parents" | "observes" => {
                    dup(node.parents.is_some())?;
                    if field == "observes" && kind != Kind::Decision {
                        return Err(err(t.span, "`observes` is only allowed on decisions; use `parents`"));
                    }
                    if field == "parents" && kind == Kind::Decision {
                        return Err(err(t.span, "decisions list their information with `observes`"));
                    }
                    self.bump();
                    self.expect_punct(":")?;
                    let p = self.ident_list(true)?;
                    self.expect_punct(";")?;
                    node.parents = Some((p, t.span));
                }
                "cpt" => {
                    dup(node.cpt.is_some())?;
                    if kind != Kind::Chance {
                        return Err(err(t.span, "`cpt` is only allowed on chance nodes"));
                    }
                    self.bump();
                    node.cpt = Some((self.cpt_rows()?, t.span));
                }
                "table" => {
                    dup(node.table.is_some())?;
                    if kind != Kind::Utility {
                        return Err(err(t.span, "`table` is only allowed on utility nodes"));
                    }
                    self.bump();
                    node.table = Some((self.util_rows()?, t.span));
                }
                "world" => {
                    dup(node.world)?;
                    if kind != Kind::Chance {
                        return Err(err(t.span, "only chance nodes can be tagged `world`"));
                    }
                    self.bump();
                    self.expect_punct(";")?;
                    node.world = true;
                }
                _ => {
                    return Err(self.unexpected(&[
                        "`domain`",
                        "`parents`",
                        "`observes`",
                        "`cpt`",
                        "`table`",
                        "`world`",
                        "`}`",
                    ]))
                }
            }
        }
        match kind {
            Kind::Chance | Kind::Decision if node.domain.is_none() => {
                return Err(err(node.span, format!("`{}` needs a domain", node.name)))
            }
            Kind::Chance if node.cpt.is_none() => return Err(err(node.span, format!("`{}` needs a cpt", node.name))),
            Kind::Utility if node.table.is_none() => {
                return Err(err(node.span, format!("`{}` needs a table", node.name)))
            }
            _ => {}
        }
        Ok(node)
    }
}

fn expand_error(e: ExpandError, table_span: SourceSpan, rows: &[SourceSpan], parents: &[String]) -> ParseError {
    match e {
        ExpandError::Arity { row, expected } => {
            err(rows[row], format!("row lists the wrong number of parent outcomes, expected {expected}"))
        }
        ExpandError::Label { row, pos } => {
            err(rows[row], format!("row names an outcome that parent `{}` does not have", parents[pos]))
        }
        ExpandError::Uncovered(cfg) => err(table_span, format!("no row covers ({})", cfg.join(", "))),
    }
}

fn lower(doc: Document) -> PResult<CidModel> {
    let mut domains: HashMap<&str, Option<&[String]>> = HashMap::new();
    for n in &doc.nodes {
        domains.entry(n.name.as_str()).or_insert(n.domain.as_ref().map(|(d, _)| d.as_slice()));
    }
    let mut b = ModelBuilder::new();
    for (a, _) in &doc.agents {
        b.agent(a);
    }
    for n in &doc.nodes {
        if let Some((d, span)) = &n.domain {
            if d.iter().any(|l| l.ends_with('\'')) {
                return Err(err(*span, "outcome labels cannot end in `'`"));
            }
        }
        let parents: Vec<String> = n.parents.as_ref().map(|(p, _)| p.clone()).unwrap_or_default();
        let parents_span = n.parents.as_ref().map_or(n.span, |(_, s)| *s);
        let mut parent_domains: Vec<&[String]> = Vec::new();
        if n.kind != Kind::Decision {
            for p in &parents {
                match domains.get(p.as_str()) {
                    None => return Err(err(parents_span, format!("unknown parent `{p}`"))),
                    Some(None) => {
                        return Err(err(parents_span, format!("utility `{p}` can only be observed by decisions")))
                    }
                    Some(Some(d)) => parent_domains.push(d),
                }
            }
        }
        let mechanism = match n.kind {
            Kind::Decision => None,
            Kind::Chance => {
                let (rows, table_span) = n.cpt.as_ref().unwrap();
                let domain = &n.domain.as_ref().unwrap().0;
                let mut resolved = Vec::with_capacity(rows.len());
                for row in rows {
                    let mut dist = vec![0.0; domain.len()];
                    let mut seen = vec![false; domain.len()];
                    for (label, p, span) in &row.entries {
                        let k = domain
                            .iter()
                            .position(|d| d == label)
                            .ok_or_else(|| err(*span, format!("`{label}` is not an outcome of `{}`", n.name)))?;
                        if seen[k] {
                            return Err(err(*span, format!("outcome `{label}` listed twice in one row")));
                        }
                        seen[k] = true;
                        dist[k] = *p;
                    }
                    resolved.push((row.pattern.clone(), dist));
                }
                let spans: Vec<SourceSpan> = rows.iter().map(|r| r.span).collect();
                let table = expand_rows(&parent_domains, &resolved)
                    .map_err(|e| expand_error(e, *table_span, &spans, &parents))?;
                Some(Mechanism::Chance(Cpt::new(table)))
            }
            Kind::Utility => {
                let (rows, table_span) = n.table.as_ref().unwrap();
                let resolved: Vec<(Pattern, f64)> = rows.iter().map(|r| (r.pattern.clone(), r.value)).collect();
                let spans: Vec<SourceSpan> = rows.iter().map(|r| r.span).collect();
                let values = expand_rows(&parent_domains, &resolved)
                    .map_err(|e| expand_error(e, *table_span, &spans, &parents))?;
                Some(Mechanism::Utility(UtilityTable::new(values)))
            }
        };
        let agent = n.agent.clone().unwrap_or_default();
        b.push(PendingNode {
            name: n.name.clone(),
            kind: match n.kind {
                Kind::Chance => PendingKind::Chance,
                Kind::Decision => PendingKind::Decision(agent),
                Kind::Utility => PendingKind::Utility(agent),
            },
            domain: n.domain.as_ref().map(|(d, _)| d.clone()).unwrap_or_default(),
            parents,
            mechanism,
            world: n.world,
        });
    }
    for (cf, f, _) in &doc.pairs {
        b.twin_pair(cf, f);
    }
    for (u, _) in &doc.noise {
        b.noise(u);
    }
    let located = |vs: Vec<Violation>| -> ParseError {
        let locate = |v: &Violation| -> (SourceSpan, usize) {
            let subject = v.subject.split(" -> ").last().unwrap_or(&v.subject);
            if let Some((k, n)) = doc.nodes.iter().enumerate().find(|(_, n)| n.name == subject) {
                return (n.span, 1000 + k);
            }
            if let Some((k, (_, s))) = doc.agents.iter().enumerate().find(|(_, (a, _))| a == subject) {
                return (*s, k);
            }
            if let Some((_, _, s)) = doc.pairs.iter().find(|(c, _, _)| c == subject) {
                return (*s, usize::MAX - 1);
            }
            if let Some((_, s)) = doc.noise.iter().find(|(u, _)| u == subject) {
                return (*s, usize::MAX - 1);
            }
            (SourceSpan { line: 1, column: 1, length: 0 }, usize::MAX)
        };
        let first = vs
            .iter()
            .min_by_key(|v| {
                let (s, k) = locate(v);
                (s.line, s.column, k)
            })
            .unwrap();
        err(locate(first).0, first.to_string())
    };
    match b.build() {
        Ok(m) => Ok(m),
        Err(CidError::Invalid(report)) => Err(located(report.violations)),
        Err(other) => Err(err(SourceSpan { line: 1, column: 1, length: 0 }, other.to_string())),
    }
}

/// Parse model text. Syntax errors and validation failures are both reported
/// with the span of the offending construct; the first in document order wins.
pub fn parse(text: &str) -> Result<CidModel, ParseError> {
    let toks = lex(text)?;
    let mut p = Parser { text, toks, pos: 0 };
    let doc = p.document()?;
    lower(doc)
}
