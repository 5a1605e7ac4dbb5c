//! Concrete syntax: a recursive-descent parser for `.gl` programs, terms and
//! types, and a pretty-printer whose output parses back to an α-equivalent
//! tree.

mod lexer;
mod pretty;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ast::{
    ContextualTyping, Decl, HeaderDecl, IndexExpr, IndexSort, Program, Signature, Term, Type,
};
use lexer::{lex, Tok, Token};

pub use pretty::{pretty_decl, pretty_index, pretty_program, pretty_prop, pretty_term, pretty_type, pretty_typing};

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SourceSpan {
    pub file: String,
    pub start_line: usize,
    pub start_col: usize,
    pub end_line: usize,
    pub end_col: usize,
}

impl SourceSpan {
    pub fn new(file: &str, start_line: usize, start_col: usize, end_line: usize, end_col: usize) -> Self {
        SourceSpan { file: file.to_string(), start_line, start_col, end_line, end_col }
    }

    fn join(&self, other: &SourceSpan) -> SourceSpan {
        SourceSpan { end_line: other.end_line, end_col: other.end_col, ..self.clone() }
    }
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}-{}:{}", self.file, self.start_line, self.start_col, self.end_line, self.end_col)
    }
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
#[error("{span}: {message}")]
pub struct ParseError {
    pub span: SourceSpan,
    pub expected: Vec<String>,
    pub found: String,
    pub message: String,
}

/// Source locations recorded while parsing a program.
#[derive(Clone, Debug, Default)]
pub struct ProgramSpans {
    pub main: SourceSpan,
    pub goal: Option<SourceSpan>,
    /// Every guard in `main`, in source order.
    pub guards: Vec<(Decl, SourceSpan)>,
    pub header: Vec<SourceSpan>,
}

impl ProgramSpans {
    /// Span of the first guard declaring `d`, if any.
    pub fn guard_span(&self, d: &Decl) -> Option<&SourceSpan> {
        self.guards.iter().find(|(g, _)| g == d).map(|(_, s)| s)
    }
}

struct Names {
    atoms: BTreeSet<String>,
    constructors: BTreeSet<String>,
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    prims: BTreeSet<String>,
    bound: Vec<String>,
    names: Option<Names>,
    guards: Vec<(Decl, SourceSpan)>,
}

type PResult<T> = Result<T, ParseError>;

impl Parser {
    fn new(file: &str, text: &str, prims: BTreeSet<String>) -> PResult<Self> {
        Ok(Parser { toks: lex(file, text)?, pos: 0, prims, bound: Vec::new(), names: None, guards: Vec::new() })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].tok
    }

    fn span(&self) -> SourceSpan {
        self.toks[self.pos].span.clone()
    }

    fn prev_span(&self) -> SourceSpan {
        self.toks[self.pos.saturating_sub(1)].span.clone()
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, expected: &[&str]) -> ParseError {
        let found = self.peek().to_string();
        let message = if expected.is_empty() {
            format!("unexpected {found}")
        } else {
            format!("expected {}, found {found}", expected.join(" or "))
        };
        ParseError { span: self.span(), expected: expected.iter().map(|s| s.to_string()).collect(), found, message }
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(t) if *t == s)
    }

    fn is_kw(&self, k: &str) -> bool {
        matches!(self.peek(), Tok::Kw(t) if *t == k)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &str) -> PResult<()> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            Err(self.error(&[&format!("`{s}`")]))
        }
    }

    fn expect_kw(&mut self, k: &str) -> PResult<()> {
        if self.is_kw(k) {
            self.bump();
            Ok(())
        } else {
            Err(self.error(&[&format!("`{k}`")]))
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            _ => Err(self.error(&["identifier"])),
        }
    }

    fn expect_eof(&self) -> PResult<()> {
        match self.peek() {
            Tok::Eof => Ok(()),
            _ => Err(self.error(&["end of input"])),
        }
    }

    fn sort(&mut self) -> PResult<IndexSort> {
        self.expect_kw("int")?;
        Ok(IndexSort::Int)
    }

    // ---- index expressions ----

    fn index(&mut self) -> PResult<IndexExpr> {
        let mut lhs = self.index_term()?;
        loop {
            if self.eat_sym("+") {
                lhs = IndexExpr::add(lhs, self.index_term()?);
            } else if self.eat_sym("-") {
                lhs = IndexExpr::sub(lhs, self.index_term()?);
            } else {
                return Ok(lhs);
            }
        }
    }

    fn index_term(&mut self) -> PResult<IndexExpr> {
        let mut lhs = self.index_factor()?;
        while self.is_sym("*") {
            let star = self.span();
            self.bump();
            let rhs = self.index_factor()?;
            lhs = match (lhs, rhs) {
                (l, IndexExpr::Lit(k)) => IndexExpr::mul(k, l),
                (IndexExpr::Lit(k), r) => IndexExpr::mul(k, r),
                _ => {
                    return Err(ParseError {
                        span: star,
                        expected: vec!["integer literal".into()],
                        found: "`*`".into(),
                        message: "non-linear index expression: one factor of `*` must be a literal".into(),
                    })
                }
            };
        }
        Ok(lhs)
    }

    fn index_factor(&mut self) -> PResult<IndexExpr> {
        match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                Ok(IndexExpr::Lit(n))
            }
            Tok::Sym("-") if matches!(self.peek_at(1), Tok::Int(_)) => {
                self.bump();
                match self.bump() {
                    Tok::Int(n) => Ok(IndexExpr::Lit(-n)),
                    _ => unreachable!(),
                }
            }
            Tok::Ident(a) => {
                self.bump();
                Ok(IndexExpr::Var(a))
            }
            Tok::Sym("(") => {
                self.bump();
                let e = self.index()?;
                self.expect_sym(")")?;
                Ok(e)
            }
            _ => Err(self.error(&["index expression"])),
        }
    }

    // ---- types ----

    fn ty(&mut self) -> PResult<Type> {
        let lhs = self.sect_ty()?;
        if self.eat_sym("->") {
            Ok(Type::arrow(lhs, self.ty()?))
        } else {
            Ok(lhs)
        }
    }

    fn sect_ty(&mut self) -> PResult<Type> {
        let mut lhs = self.atom_ty()?;
        while self.eat_sym("/\\") {
            lhs = Type::sect(lhs, self.atom_ty()?);
        }
        Ok(lhs)
    }

    fn atom_ty(&mut self) -> PResult<Type> {
        let start = self.span();
        match self.peek().clone() {
            Tok::Kw("unit") => {
                self.bump();
                Ok(Type::Unit)
            }
            Tok::Kw("Pi") => {
                self.bump();
                let a = self.ident()?;
                self.expect_sym(":")?;
                let s = self.sort()?;
                self.expect_sym(".")?;
                Ok(Type::pi(a, s, self.ty()?))
            }
            Tok::Ident(name) => {
                self.bump();
                if self.eat_sym("(") {
                    let i = self.index()?;
                    self.expect_sym(")")?;
                    if let Some(n) = &self.names {
                        if !n.constructors.contains(&name) {
                            return Err(undeclared(start.join(&self.prev_span()), "indexed constructor", &name));
                        }
                    }
                    Ok(Type::con(name, i))
                } else {
                    if let Some(n) = &self.names {
                        if !n.atoms.contains(&name) {
                            return Err(undeclared(start, "datasort", &name));
                        }
                    }
                    Ok(Type::Atom(name))
                }
            }
            Tok::Sym("(") => {
                self.bump();
                let t = self.ty()?;
                self.expect_sym(")")?;
                Ok(t)
            }
            _ => Err(self.error(&["type"])),
        }
    }

    // ---- declarations ----

    fn decl(&mut self) -> PResult<Decl> {
        let x = self.ident()?;
        self.expect_sym(":")?;
        if self.is_kw("int") {
            Ok(Decl::IndexSorting(x, self.sort()?))
        } else {
            Ok(Decl::VarTyping(x, self.ty()?))
        }
    }

    fn typing(&mut self) -> PResult<ContextualTyping> {
        let mut decls = Vec::new();
        if !self.is_sym("|-") {
            decls.push(self.decl()?);
            while self.eat_sym(",") {
                decls.push(self.decl()?);
            }
        }
        self.expect_sym("|-")?;
        Ok(ContextualTyping { decls, goal: self.ty()? })
    }

    // ---- terms ----

    fn term(&mut self) -> PResult<Term> {
        let lhs = self.binder_or_app()?;
        if self.eat_sym(",,") {
            Ok(Term::merge(lhs, self.term()?))
        } else {
            Ok(lhs)
        }
    }

    fn binder_or_app(&mut self) -> PResult<Term> {
        match self.peek() {
            Tok::Kw("fn") => {
                self.bump();
                let x = self.ident()?;
                self.expect_sym("=>")?;
                self.bound.push(x.clone());
                let body = self.term();
                self.bound.pop();
                Ok(Term::lam(x, body?))
            }
            Tok::Kw("where") => {
                let start = self.span();
                self.bump();
                let d = self.decl()?;
                let span = start.join(&self.prev_span());
                self.expect_kw("do")?;
                self.guards.push((d.clone(), span));
                Ok(Term::guard(d, self.term()?))
            }
            Tok::Kw("some") => {
                self.bump();
                let b = self.ident()?;
                self.expect_sym(":")?;
                let s = self.sort()?;
                self.expect_kw("in")?;
                Ok(Term::some(b, s, self.term()?))
            }
            Tok::Kw("idxfn") => {
                self.bump();
                let b = self.ident()?;
                self.expect_sym(":")?;
                let s = self.sort()?;
                self.expect_sym("=>")?;
                Ok(Term::big_lam(b, s, self.term()?))
            }
            _ => self.app(),
        }
    }

    fn starts_atom(&self) -> bool {
        matches!(self.peek(), Tok::Ident(_) | Tok::Sym("("))
    }

    fn app(&mut self) -> PResult<Term> {
        let mut f = self.atom_term()?;
        while self.starts_atom() {
            f = Term::app(f, self.atom_term()?);
        }
        Ok(f)
    }

    fn atom_term(&mut self) -> PResult<Term> {
        match self.peek().clone() {
            Tok::Ident(x) => {
                self.bump();
                if !self.bound.contains(&x) && self.prims.contains(&x) {
                    Ok(Term::PrimConst(x))
                } else {
                    Ok(Term::Var(x))
                }
            }
            Tok::Sym("(") => {
                self.bump();
                if self.eat_sym(")") {
                    return Ok(Term::UnitVal);
                }
                let e = self.term()?;
                if self.eat_sym(":") {
                    let t = self.ty()?;
                    self.expect_sym(")")?;
                    Ok(Term::anno(e, t))
                } else if self.eat_sym("::") {
                    self.expect_sym("[")?;
                    let mut typings = vec![self.typing()?];
                    while self.eat_sym(";") {
                        typings.push(self.typing()?);
                    }
                    self.expect_sym("]")?;
                    self.expect_sym(")")?;
                    Ok(Term::ctx_anno(e, typings))
                } else {
                    self.expect_sym(")").map_err(|_| self.error(&["`)`", "`:`", "`::`", "`,,`"]))?;
                    Ok(e)
                }
            }
            _ => Err(self.error(&["term"])),
        }
    }

    // ---- programs ----

    fn program(&mut self) -> PResult<Program> {
        let mut header = Vec::new();
        let mut header_spans = Vec::new();
        let mut signature = Signature::default();
        loop {
            let start = self.span();
            match self.peek() {
                Tok::Kw("datasort") => {
                    self.bump();
                    let name = self.ident()?;
                    signature.lattice.declare(&name);
                    let parent = if self.eat_sym("<:") {
                        let p = self.ident()?;
                        signature
                            .lattice
                            .add_edge(&name, &p)
                            .map_err(|m| ParseError { span: start.join(&self.prev_span()), expected: vec![], found: p.clone(), message: m })?;
                        Some(p)
                    } else {
                        None
                    };
                    header.push(HeaderDecl::Datasort { name, parent });
                }
                Tok::Kw("indexcon") => {
                    self.bump();
                    let name = self.ident()?;
                    self.expect_sym("::")?;
                    let sort = self.sort()?;
                    signature.constructors.insert(name.clone(), sort);
                    header.push(HeaderDecl::IndexCon { name, sort });
                }
                Tok::Kw("prim") => {
                    self.bump();
                    let name = self.ident()?;
                    self.expect_sym(":")?;
                    self.names = Some(names_of(&signature));
                    let ty = self.ty()?;
                    let fivs = ty.free_index_vars();
                    if let Some(a) = fivs.iter().next() {
                        return Err(ParseError {
                            span: start.join(&self.prev_span()),
                            expected: vec![],
                            found: a.clone(),
                            message: format!("primitive `{name}` must have a closed type; `{a}` is unbound"),
                        });
                    }
                    signature.prims.insert(name.clone(), ty.clone());
                    header.push(HeaderDecl::Prim { name, ty });
                }
                _ => break,
            }
            header_spans.push(start.join(&self.prev_span()));
        }
        self.expect_kw("val")?;
        let main_name = self.ident()?;
        if main_name != "main" {
            return Err(ParseError {
                span: self.prev_span(),
                expected: vec!["`main`".into()],
                found: main_name,
                message: "the program must define `val main`".into(),
            });
        }
        self.names = Some(names_of(&signature));
        let goal_start = self.span();
        let (goal, goal_span) = if self.eat_sym(":") {
            let g = self.ty()?;
            (Some(g), Some(goal_start.join(&self.prev_span())))
        } else {
            (None, None)
        };
        self.expect_sym("=")?;
        self.prims = signature.prims.keys().cloned().collect();
        let main_start = self.span();
        let main = self.term()?;
        let main_span = main_start.join(&self.prev_span());
        self.expect_eof()?;
        Ok(Program {
            header,
            signature,
            main,
            goal,
            spans: ProgramSpans { main: main_span, goal: goal_span, guards: std::mem::take(&mut self.guards), header: header_spans },
        })
    }
}

fn names_of(sig: &Signature) -> Names {
    Names {
        atoms: sig.lattice.atoms().map(|s| s.to_string()).collect(),
        constructors: sig.constructors.keys().cloned().collect(),
    }
}

fn undeclared(span: SourceSpan, what: &str, name: &str) -> ParseError {
    ParseError { span, expected: vec![], found: name.to_string(), message: format!("undeclared {what} `{name}`") }
}

/// Parse a whole program; spans name the file as `<input>`.
pub fn parse_program(text: &str) -> Result<Program, ParseError> {
    parse_program_named("<input>", text)
}

pub fn parse_program_named(file: &str, text: &str) -> Result<Program, ParseError> {
    Parser::new(file, text, BTreeSet::new())?.program()
}

/// Parse a standalone type. Names are not checked against any header.
pub fn parse_type(text: &str) -> Result<Type, ParseError> {
    let mut p = Parser::new("<type>", text, BTreeSet::new())?;
    let t = p.ty()?;
    p.expect_eof()?;
    Ok(t)
}

/// Parse a standalone term; identifiers in `prims` (and not λ-bound) become
/// primitive constants.
pub fn parse_term(text: &str, prims: &BTreeSet<String>) -> Result<Term, ParseError> {
    let mut p = Parser::new("<term>", text, prims.clone())?;
    let e = p.term()?;
    p.expect_eof()?;
    Ok(e)
}

pub fn parse_index(text: &str) -> Result<IndexExpr, ParseError> {
    let mut p = Parser::new("<index>", text, BTreeSet::new())?;
    let i = p.index()?;
    p.expect_eof()?;
    Ok(i)
}
