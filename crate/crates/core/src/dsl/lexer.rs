use super::{ParseError, SourceSpan};

#[derive(Clone, Debug, PartialEq)]
pub(crate) enum Tok {
    Ident(String),
    Number(f64),
    Punct(&'static str),
    Eof,
}

#[derive(Clone, Debug)]
pub(crate) struct Token {
    pub tok: Tok,
    pub span: SourceSpan,
    pub offset: usize,
}

impl Token {
    pub fn describe(&self) -> String {
        match &self.tok {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Number(_) => "number".into(),
            Tok::Punct(p) => format!("`{p}`"),
            Tok::Eof => "end of input".into(),
        }
    }

    pub fn end(&self) -> usize {
        self.offset + self.span.length
    }
}

const PUNCT: [&str; 12] = ["->", ";", ":", ",", "[", "]", "{", "}", "(", ")", "=", "_"];

pub(crate) fn lex(text: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let (mut i, mut line, mut line_start) = (0usize, 1usize, 0usize);
    let span_at = |start: usize, len: usize, line: usize, line_start: usize| SourceSpan {
        line,
        column: text[line_start..start].chars().count() + 1,
        length: len,
    };
    while i < bytes.len() {
        let c = bytes[i];
        match c {
            b'\n' => {
                i += 1;
                line += 1;
                line_start = i;
            }
            b' ' | b'\t' | b'\r' => i += 1,
            b'#' => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            }
            b'A'..=b'Z' | b'a'..=b'z' | b'_' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                if i < bytes.len() && bytes[i] == b'\'' {
                    i += 1;
                }
                let word = &text[start..i];
                let tok = if word == "_" { Tok::Punct("_") } else { Tok::Ident(word.to_string()) };
                out.push(Token { tok, span: span_at(start, i - start, line, line_start), offset: start });
            }
            b'-' if bytes.get(i + 1) == Some(&b'>') => {
                out.push(Token { tok: Tok::Punct("->"), span: span_at(i, 2, line, line_start), offset: i });
                i += 2;
            }
            b'0'..=b'9' | b'-' | b'+' | b'.' => {
                let start = i;
                if c == b'-' || c == b'+' {
                    i += 1;
                }
                while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && bytes[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let lit = &text[start..i];
                let span = span_at(start, i - start, line, line_start);
                let well_formed = lit.trim_start_matches(['-', '+']).starts_with(|c: char| c.is_ascii_digit());
                match lit.parse::<f64>() {
                    Ok(v) if well_formed && v.is_finite() => {
                        out.push(Token { tok: Tok::Number(v), span, offset: start })
                    }
                    _ => {
                        return Err(ParseError::new(span, format!("malformed number `{lit}`"), vec!["number".into()]));
                    }
                }
            }
            _ => {
                let p = PUNCT.iter().find(|p| text[i..].starts_with(**p));
                match p {
                    Some(p) => {
                        out.push(Token { tok: Tok::Punct(p), span: span_at(i, p.len(), line, line_start), offset: i });
                        i += p.len();
                    }
                    None => {
                        let ch = text[i..].chars().next().unwrap();
                        return Err(ParseError::new(
                            span_at(i, ch.len_utf8(), line, line_start),
                            format!("unexpected character `{ch}`"),
                            Vec::new(),
                        ));
                    }
                }
            }
        }
    }
    out.push(Token { tok: Tok::Eof, span: span_at(i, 0, line, line_start), offset: i });
    Ok(out)
}
