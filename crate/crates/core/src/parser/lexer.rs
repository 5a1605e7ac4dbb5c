use std::fmt;

use super::{ParseError, SourceSpan};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Int(i64),
    Kw(&'static str),
    Sym(&'static str),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "identifier `{s}`"),
            Tok::Int(n) => write!(f, "integer `{n}`"),
            Tok::Kw(k) => write!(f, "`{k}`"),
            Tok::Sym(s) => write!(f, "`{s}`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

pub const KEYWORDS: &[&str] = &[
    "unit", "Pi", "fn", "where", "do", "some", "in", "idxfn", "datasort", "indexcon", "prim", "val", "int",
];

// Longest first so that `,,` wins over `,` and `->` over `-`.
const SYMBOLS: &[&str] = &[
    "|-", "<:", "::", ",,", "->", "=>", "/\\", "(", ")", "[", "]", ",", ";", ":", ".", "=", "+", "-", "*",
];

#[derive(Clone, Debug)]
pub struct Token {
    pub tok: Tok,
    pub span: SourceSpan,
}

pub fn lex(file: &str, text: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);

    let advance = |i: &mut usize, line: &mut usize, col: &mut usize, n: usize| {
        for _ in 0..n {
            if chars[*i] == '\n' {
                *line += 1;
                *col = 1;
            } else {
                *col += 1;
            }
            *i += 1;
        }
    };

    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            advance(&mut i, &mut line, &mut col, 1);
            continue;
        }
        if c == '-' && chars.get(i + 1) == Some(&'-') {
            while i < chars.len() && chars[i] != '\n' {
                advance(&mut i, &mut line, &mut col, 1);
            }
            continue;
        }
        let (sl, sc) = (line, col);
        let span_to = |el: usize, ec: usize| SourceSpan::new(file, sl, sc, el, ec);

        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_' || chars[i] == '\'') {
                advance(&mut i, &mut line, &mut col, 1);
            }
            let word: String = chars[start..i].iter().collect();
            let tok = match KEYWORDS.iter().find(|k| **k == word) {
                Some(k) => Tok::Kw(k),
                None => Tok::Ident(word),
            };
            out.push(Token { tok, span: span_to(line, col) });
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                advance(&mut i, &mut line, &mut col, 1);
            }
            let digits: String = chars[start..i].iter().collect();
            let n = digits.parse::<i64>().map_err(|_| ParseError {
                span: span_to(line, col),
                expected: vec![],
                found: digits.clone(),
                message: format!("integer literal `{digits}` is out of range"),
            })?;
            out.push(Token { tok: Tok::Int(n), span: span_to(line, col) });
            continue;
        }
        match SYMBOLS.iter().find(|s| s.chars().enumerate().all(|(k, sc)| chars.get(i + k) == Some(&sc))) {
            Some(s) => {
                advance(&mut i, &mut line, &mut col, s.chars().count());
                out.push(Token { tok: Tok::Sym(s), span: span_to(line, col) });
            }
            None => {
                return Err(ParseError {
                    span: span_to(line, col + 1),
                    expected: vec![],
                    found: c.to_string(),
                    message: format!("unexpected character `{c}`"),
                })
            }
        }
    }
    out.push(Token { tok: Tok::Eof, span: SourceSpan::new(file, line, col, line, col) });
    Ok(out)
}
