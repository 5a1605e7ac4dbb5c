//! Abstract syntax for index expressions, types, terms, declarations and
//! contexts, together with capture-avoiding substitution and α-equivalence.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::parser::ProgramSpans;

/// Sort of an index expression. Only `int` ships.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum IndexSort {
    Int,
}

impl IndexSort {
    pub fn name(self) -> &'static str {
        match self {
            IndexSort::Int => "int",
        }
    }
}

/// Identifier of an index metavariable, unique within one checking run.
pub type MetaId = u32;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum IndexExpr {
    Var(String),
    Lit(i64),
    Add(Box<IndexExpr>, Box<IndexExpr>),
    Sub(Box<IndexExpr>, Box<IndexExpr>),
    /// Literal coefficient times an expression; keeps expressions linear.
    Mul(i64, Box<IndexExpr>),
    Meta(MetaId),
}

impl IndexExpr {
    pub fn var(name: impl Into<String>) -> Self {
        IndexExpr::Var(name.into())
    }

    pub fn add(l: IndexExpr, r: IndexExpr) -> Self {
        IndexExpr::Add(Box::new(l), Box::new(r))
    }

    pub fn sub(l: IndexExpr, r: IndexExpr) -> Self {
        IndexExpr::Sub(Box::new(l), Box::new(r))
    }

    pub fn mul(k: i64, e: IndexExpr) -> Self {
        IndexExpr::Mul(k, Box::new(e))
    }

    pub fn free_vars(&self, out: &mut BTreeSet<String>) {
        match self {
            IndexExpr::Var(a) => {
                out.insert(a.clone());
            }
            IndexExpr::Lit(_) | IndexExpr::Meta(_) => {}
            IndexExpr::Add(l, r) | IndexExpr::Sub(l, r) => {
                l.free_vars(out);
                r.free_vars(out);
            }
            IndexExpr::Mul(_, e) => e.free_vars(out),
        }
    }

    pub fn metas(&self, out: &mut BTreeSet<MetaId>) {
        match self {
            IndexExpr::Meta(m) => {
                out.insert(*m);
            }
            IndexExpr::Var(_) | IndexExpr::Lit(_) => {}
            IndexExpr::Add(l, r) | IndexExpr::Sub(l, r) => {
                l.metas(out);
                r.metas(out);
            }
            IndexExpr::Mul(_, e) => e.metas(out),
        }
    }

    pub fn has_meta(&self) -> bool {
        match self {
            IndexExpr::Meta(_) => true,
            IndexExpr::Var(_) | IndexExpr::Lit(_) => false,
            IndexExpr::Add(l, r) | IndexExpr::Sub(l, r) => l.has_meta() || r.has_meta(),
            IndexExpr::Mul(_, e) => e.has_meta(),
        }
    }

    /// Evaluate under an integer assignment; `None` if a variable is missing.
    pub fn eval(&self, env: &dyn Fn(&IndexAtom) -> Option<i64>) -> Option<i64> {
        Some(match self {
            IndexExpr::Var(a) => env(&IndexAtom::Var(a.clone()))?,
            IndexExpr::Meta(m) => env(&IndexAtom::Meta(*m))?,
            IndexExpr::Lit(n) => *n,
            IndexExpr::Add(l, r) => l.eval(env)?.checked_add(r.eval(env)?)?,
            IndexExpr::Sub(l, r) => l.eval(env)?.checked_sub(r.eval(env)?)?,
            IndexExpr::Mul(k, e) => k.checked_mul(e.eval(env)?)?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum IndexProp {
    Eq(IndexExpr, IndexExpr),
    Le(IndexExpr, IndexExpr),
    Lt(IndexExpr, IndexExpr),
}

impl IndexProp {
    pub fn sides(&self) -> (&IndexExpr, &IndexExpr) {
        match self {
            IndexProp::Eq(l, r) | IndexProp::Le(l, r) | IndexProp::Lt(l, r) => (l, r),
        }
    }

    pub fn map(&self, f: &mut dyn FnMut(&IndexExpr) -> IndexExpr) -> IndexProp {
        match self {
            IndexProp::Eq(l, r) => IndexProp::Eq(f(l), f(r)),
            IndexProp::Le(l, r) => IndexProp::Le(f(l), f(r)),
            IndexProp::Lt(l, r) => IndexProp::Lt(f(l), f(r)),
        }
    }

    pub fn free_vars(&self, out: &mut BTreeSet<String>) {
        let (l, r) = self.sides();
        l.free_vars(out);
        r.free_vars(out);
    }

    pub fn metas(&self, out: &mut BTreeSet<MetaId>) {
        let (l, r) = self.sides();
        l.metas(out);
        r.metas(out);
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Type {
    Unit,
    Atom(String),
    Arrow(Box<Type>, Box<Type>),
    Sect(Box<Type>, Box<Type>),
    IndexedCon(String, IndexExpr),
    Pi(String, IndexSort, Box<Type>),
}

impl Type {
    pub fn atom(name: impl Into<String>) -> Self {
        Type::Atom(name.into())
    }

    pub fn arrow(a: Type, b: Type) -> Self {
        Type::Arrow(Box::new(a), Box::new(b))
    }

    pub fn sect(a: Type, b: Type) -> Self {
        Type::Sect(Box::new(a), Box::new(b))
    }

    pub fn con(name: impl Into<String>, i: IndexExpr) -> Self {
        Type::IndexedCon(name.into(), i)
    }

    pub fn pi(a: impl Into<String>, sort: IndexSort, body: Type) -> Self {
        Type::Pi(a.into(), sort, Box::new(body))
    }

    pub fn free_index_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_fivs(&mut out);
        out
    }

    fn collect_fivs(&self, out: &mut BTreeSet<String>) {
        match self {
            Type::Unit | Type::Atom(_) => {}
            Type::Arrow(a, b) | Type::Sect(a, b) => {
                a.collect_fivs(out);
                b.collect_fivs(out);
            }
            Type::IndexedCon(_, i) => i.free_vars(out),
            Type::Pi(a, _, body) => {
                let mut inner = BTreeSet::new();
                body.collect_fivs(&mut inner);
                inner.remove(a);
                out.extend(inner);
            }
        }
    }

    pub fn metas(&self, out: &mut BTreeSet<MetaId>) {
        match self {
            Type::Unit | Type::Atom(_) => {}
            Type::Arrow(a, b) | Type::Sect(a, b) => {
                a.metas(out);
                b.metas(out);
            }
            Type::IndexedCon(_, i) => i.metas(out),
            Type::Pi(_, _, body) => body.metas(out),
        }
    }

    pub fn has_meta(&self) -> bool {
        match self {
            Type::Unit | Type::Atom(_) => false,
            Type::Arrow(a, b) | Type::Sect(a, b) => a.has_meta() || b.has_meta(),
            Type::IndexedCon(_, i) => i.has_meta(),
            Type::Pi(_, _, body) => body.has_meta(),
        }
    }

    pub fn has_pi(&self) -> bool {
        match self {
            Type::Unit | Type::Atom(_) | Type::IndexedCon(..) => false,
            Type::Arrow(a, b) | Type::Sect(a, b) => a.has_pi() || b.has_pi(),
            Type::Pi(..) => true,
        }
    }

    /// Number of constructors, used to bound generated types.
    pub fn size(&self) -> usize {
        match self {
            Type::Unit | Type::Atom(_) | Type::IndexedCon(..) => 1,
            Type::Arrow(a, b) | Type::Sect(a, b) => 1 + a.size() + b.size(),
            Type::Pi(_, _, body) => 1 + body.size(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Decl {
    /// Program-variable typing `x : A`.
    VarTyping(String, Type),
    /// Index-variable sorting `a : γ`.
    IndexSorting(String, IndexSort),
}

impl Decl {
    pub fn name(&self) -> &str {
        match self {
            Decl::VarTyping(x, _) | Decl::IndexSorting(x, _) => x,
        }
    }
}

/// One typing `Γ0 ⊢ A0` inside a contextual annotation. Index sortings bind
/// their variable in the later declarations and in the goal.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ContextualTyping {
    pub decls: Vec<Decl>,
    pub goal: Type,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Term {
    Var(String),
    UnitVal,
    Lam(String, Box<Term>),
    App(Box<Term>, Box<Term>),
    RightAnno(Box<Term>, Type),
    Guard(Decl, Box<Term>),
    Merge(Box<Term>, Box<Term>),
    SomeBind(String, IndexSort, Box<Term>),
    BigLam(String, IndexSort, Box<Term>),
    CtxAnno(Box<Term>, Vec<ContextualTyping>),
    PrimConst(String),
}

impl Term {
    pub fn var(x: impl Into<String>) -> Self {
        Term::Var(x.into())
    }

    pub fn prim(p: impl Into<String>) -> Self {
        Term::PrimConst(p.into())
    }

    pub fn lam(x: impl Into<String>, body: Term) -> Self {
        Term::Lam(x.into(), Box::new(body))
    }

    pub fn app(f: Term, a: Term) -> Self {
        Term::App(Box::new(f), Box::new(a))
    }

    pub fn anno(e: Term, ty: Type) -> Self {
        Term::RightAnno(Box::new(e), ty)
    }

    pub fn guard(d: Decl, e: Term) -> Self {
        Term::Guard(d, Box::new(e))
    }

    pub fn merge(l: Term, r: Term) -> Self {
        Term::Merge(Box::new(l), Box::new(r))
    }

    pub fn some(b: impl Into<String>, sort: IndexSort, e: Term) -> Self {
        Term::SomeBind(b.into(), sort, Box::new(e))
    }

    pub fn big_lam(b: impl Into<String>, sort: IndexSort, e: Term) -> Self {
        Term::BigLam(b.into(), sort, Box::new(e))
    }

    pub fn ctx_anno(e: Term, typings: Vec<ContextualTyping>) -> Self {
        Term::CtxAnno(Box::new(e), typings)
    }

    /// Immediate subterms, in a fixed order used for paths.
    pub fn children(&self) -> Vec<&Term> {
        match self {
            Term::Var(_) | Term::UnitVal | Term::PrimConst(_) => vec![],
            Term::Lam(_, b)
            | Term::RightAnno(b, _)
            | Term::Guard(_, b)
            | Term::SomeBind(_, _, b)
            | Term::BigLam(_, _, b)
            | Term::CtxAnno(b, _) => vec![b],
            Term::App(l, r) | Term::Merge(l, r) => vec![l, r],
        }
    }

    pub fn child_mut(&mut self, i: usize) -> Option<&mut Term> {
        match (self, i) {
            (Term::Lam(_, b), 0)
            | (Term::RightAnno(b, _), 0)
            | (Term::Guard(_, b), 0)
            | (Term::SomeBind(_, _, b), 0)
            | (Term::BigLam(_, _, b), 0)
            | (Term::CtxAnno(b, _), 0) => Some(b),
            (Term::App(l, _), 0) | (Term::Merge(l, _), 0) => Some(l),
            (Term::App(_, r), 1) | (Term::Merge(_, r), 1) => Some(r),
            _ => None,
        }
    }

    pub fn at_path(&self, path: &[usize]) -> Option<&Term> {
        match path.split_first() {
            None => Some(self),
            Some((&i, rest)) => self.children().get(i)?.at_path(rest),
        }
    }

    pub fn replace_at(&mut self, path: &[usize], with: Term) -> bool {
        match path.split_first() {
            None => {
                *self = with;
                true
            }
            Some((&i, rest)) => match self.child_mut(i) {
                Some(c) => c.replace_at(rest, with),
                None => false,
            },
        }
    }

    pub fn free_index_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_fivs(&mut out);
        out
    }

    fn collect_fivs(&self, out: &mut BTreeSet<String>) {
        match self {
            Term::Var(_) | Term::UnitVal | Term::PrimConst(_) => {}
            Term::Lam(_, b) => b.collect_fivs(out),
            Term::App(l, r) | Term::Merge(l, r) => {
                l.collect_fivs(out);
                r.collect_fivs(out);
            }
            Term::RightAnno(e, ty) => {
                e.collect_fivs(out);
                out.extend(ty.free_index_vars());
            }
            Term::Guard(d, e) => {
                match d {
                    Decl::VarTyping(_, ty) => out.extend(ty.free_index_vars()),
                    Decl::IndexSorting(a, _) => {
                        out.insert(a.clone());
                    }
                }
                e.collect_fivs(out);
            }
            Term::SomeBind(b, _, e) | Term::BigLam(b, _, e) => {
                let mut inner = BTreeSet::new();
                e.collect_fivs(&mut inner);
                inner.remove(b);
                out.extend(inner);
            }
            Term::CtxAnno(e, typings) => {
                e.collect_fivs(out);
                for t in typings {
                    out.extend(t.free_index_vars());
                }
            }
        }
    }

    /// Free program variables, including guard subjects and the variables
    /// named by contextual typings.
    pub fn free_term_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_ftvs(&mut out);
        out
    }

    fn collect_ftvs(&self, out: &mut BTreeSet<String>) {
        match self {
            Term::Var(x) => {
                out.insert(x.clone());
            }
            Term::UnitVal | Term::PrimConst(_) => {}
            Term::Lam(x, b) => {
                let mut inner = BTreeSet::new();
                b.collect_ftvs(&mut inner);
                inner.remove(x);
                out.extend(inner);
            }
            Term::App(l, r) | Term::Merge(l, r) => {
                l.collect_ftvs(out);
                r.collect_ftvs(out);
            }
            Term::RightAnno(e, _) | Term::SomeBind(_, _, e) | Term::BigLam(_, _, e) => {
                e.collect_ftvs(out)
            }
            Term::Guard(d, e) => {
                if let Decl::VarTyping(x, _) = d {
                    out.insert(x.clone());
                }
                e.collect_ftvs(out);
            }
            Term::CtxAnno(e, typings) => {
                e.collect_ftvs(out);
                for t in typings {
                    for d in &t.decls {
                        if let Decl::VarTyping(x, _) = d {
                            out.insert(x.clone());
                        }
                    }
                }
            }
        }
    }

    pub fn metas(&self, out: &mut BTreeSet<MetaId>) {
        match self {
            Term::Var(_) | Term::UnitVal | Term::PrimConst(_) => {}
            Term::Lam(_, b) | Term::SomeBind(_, _, b) | Term::BigLam(_, _, b) => b.metas(out),
            Term::App(l, r) | Term::Merge(l, r) => {
                l.metas(out);
                r.metas(out);
            }
            Term::RightAnno(e, ty) => {
                e.metas(out);
                ty.metas(out);
            }
            Term::Guard(d, e) => {
                if let Decl::VarTyping(_, ty) = d {
                    ty.metas(out);
                }
                e.metas(out);
            }
            Term::CtxAnno(e, typings) => {
                e.metas(out);
                for t in typings {
                    for d in &t.decls {
                        if let Decl::VarTyping(_, ty) = d {
                            ty.metas(out);
                        }
                    }
                    t.goal.metas(out);
                }
            }
        }
    }

    pub fn has_meta(&self) -> bool {
        let mut s = BTreeSet::new();
        self.metas(&mut s);
        !s.is_empty()
    }

    pub fn contains_ctx_anno(&self) -> bool {
        matches!(self, Term::CtxAnno(..)) || self.children().iter().any(|c| c.contains_ctx_anno())
    }

    pub fn size(&self) -> usize {
        1 + self.children().iter().map(|c| c.size()).sum::<usize>()
    }
}

impl ContextualTyping {
    pub fn free_index_vars(&self) -> BTreeSet<String> {
        let mut bound = BTreeSet::new();
        let mut out = BTreeSet::new();
        for d in &self.decls {
            match d {
                Decl::VarTyping(_, ty) => {
                    out.extend(ty.free_index_vars().difference(&bound).cloned());
                }
                Decl::IndexSorting(a, _) => {
                    bound.insert(a.clone());
                }
            }
        }
        out.extend(self.goal.free_index_vars().difference(&bound).cloned());
        out
    }
}

// ---------------------------------------------------------------------------
// Fresh names
// ---------------------------------------------------------------------------

/// Pick `stem1`, `stem2`, ... (trailing digits of `base` stripped) until one
/// is not rejected by `taken`. Deterministic in its inputs.
pub fn fresh_name(base: &str, taken: &dyn Fn(&str) -> bool) -> String {
    let stem = base.trim_end_matches(|c: char| c.is_ascii_digit());
    let stem = if stem.is_empty() { "v" } else { stem };
    (1u64..)
        .map(|n| format!("{stem}{n}"))
        .find(|c| !taken(c))
        .expect("unbounded name supply")
}

// ---------------------------------------------------------------------------
// Index substitution
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum IndexAtom {
    Var(String),
    Meta(MetaId),
}

/// Simultaneous, capture-avoiding substitution of index expressions for
/// index variables and metavariables.
#[derive(Clone, Debug, Default)]
pub struct IndexSubst {
    map: BTreeMap<IndexAtom, IndexExpr>,
}

impl IndexSubst {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn single(a: &str, i: IndexExpr) -> Self {
        let mut s = Self::new();
        s.map.insert(IndexAtom::Var(a.to_string()), i);
        s
    }

    pub fn insert(&mut self, atom: IndexAtom, i: IndexExpr) {
        self.map.insert(atom, i);
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    fn without_var(&self, a: &str) -> IndexSubst {
        let mut s = self.clone();
        s.map.remove(&IndexAtom::Var(a.to_string()));
        s
    }

    fn range_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for e in self.map.values() {
            e.free_vars(&mut out);
        }
        out
    }

    pub fn apply_expr(&self, e: &IndexExpr) -> IndexExpr {
        match e {
            IndexExpr::Var(a) => self
                .map
                .get(&IndexAtom::Var(a.clone()))
                .cloned()
                .unwrap_or_else(|| e.clone()),
            IndexExpr::Meta(m) => self
                .map
                .get(&IndexAtom::Meta(*m))
                .cloned()
                .unwrap_or_else(|| e.clone()),
            IndexExpr::Lit(_) => e.clone(),
            IndexExpr::Add(l, r) => IndexExpr::add(self.apply_expr(l), self.apply_expr(r)),
            IndexExpr::Sub(l, r) => IndexExpr::sub(self.apply_expr(l), self.apply_expr(r)),
            IndexExpr::Mul(k, x) => IndexExpr::mul(*k, self.apply_expr(x)),
        }
    }

    pub fn apply_prop(&self, p: &IndexProp) -> IndexProp {
        p.map(&mut |e| self.apply_expr(e))
    }

    /// Enter a binder for `a`; returns the (possibly renamed) binder and the
    /// substitution to use underneath.
    /// Renames only when the body mentions an atom being substituted, so
    /// untouched binders keep their names.
    fn enter_binder(&self, a: &str, body_atoms: &dyn Fn() -> (BTreeSet<String>, BTreeSet<MetaId>)) -> (String, IndexSubst) {
        let inner = self.without_var(a);
        let range = inner.range_vars();
        if !range.contains(a) {
            return (a.to_string(), inner);
        }
        let (body, metas) = body_atoms();
        let touched = inner.map.keys().any(|k| match k {
            IndexAtom::Var(v) => body.contains(v),
            IndexAtom::Meta(m) => metas.contains(m),
        });
        if !touched {
            return (a.to_string(), inner);
        }
        let fresh = fresh_name(a, &|c| range.contains(c) || body.contains(c));
        let mut inner = inner;
        inner.map.insert(IndexAtom::Var(a.to_string()), IndexExpr::Var(fresh.clone()));
        (fresh, inner)
    }

    pub fn apply_type(&self, ty: &Type) -> Type {
        if self.map.is_empty() {
            return ty.clone();
        }
        match ty {
            Type::Unit | Type::Atom(_) => ty.clone(),
            Type::Arrow(a, b) => Type::arrow(self.apply_type(a), self.apply_type(b)),
            Type::Sect(a, b) => Type::sect(self.apply_type(a), self.apply_type(b)),
            Type::IndexedCon(c, i) => Type::IndexedCon(c.clone(), self.apply_expr(i)),
            Type::Pi(a, sort, body) => {
                let (a2, inner) = self.enter_binder(a, &|| (body.free_index_vars(), type_metas(body)));
                Type::pi(a2, *sort, inner.apply_type(body))
            }
        }
    }

    pub fn apply_decl(&self, d: &Decl) -> Option<Decl> {
        match d {
            Decl::VarTyping(x, ty) => Some(Decl::VarTyping(x.clone(), self.apply_type(ty))),
            Decl::IndexSorting(a, sort) => match self.map.get(&IndexAtom::Var(a.clone())) {
                None => Some(d.clone()),
                Some(IndexExpr::Var(b)) => Some(Decl::IndexSorting(b.clone(), *sort)),
                // A sorting guard on a non-variable index is discharged:
                // substituted expressions are well-sorted by construction.
                Some(_) => None,
            },
        }
    }

    pub fn apply_typing(&self, t: &ContextualTyping) -> ContextualTyping {
        let mut subst = self.clone();
        let mut decls = Vec::with_capacity(t.decls.len());
        for (n, d) in t.decls.iter().enumerate() {
            match d {
                Decl::VarTyping(x, ty) => decls.push(Decl::VarTyping(x.clone(), subst.apply_type(ty))),
                Decl::IndexSorting(a, sort) => {
                    let rest = ContextualTyping { decls: t.decls[n + 1..].to_vec(), goal: t.goal.clone() };
                    let (a2, inner) = subst.enter_binder(a, &|| (rest.free_index_vars(), typing_metas(&rest)));
                    decls.push(Decl::IndexSorting(a2, *sort));
                    subst = inner;
                }
            }
        }
        ContextualTyping { decls, goal: subst.apply_type(&t.goal) }
    }

    pub fn apply_term(&self, e: &Term) -> Term {
        if self.map.is_empty() {
            return e.clone();
        }
        match e {
            Term::Var(_) | Term::UnitVal | Term::PrimConst(_) => e.clone(),
            Term::Lam(x, b) => Term::lam(x.clone(), self.apply_term(b)),
            Term::App(l, r) => Term::app(self.apply_term(l), self.apply_term(r)),
            Term::Merge(l, r) => Term::merge(self.apply_term(l), self.apply_term(r)),
            Term::RightAnno(b, ty) => Term::anno(self.apply_term(b), self.apply_type(ty)),
            Term::Guard(d, b) => match self.apply_decl(d) {
                Some(d2) => Term::guard(d2, self.apply_term(b)),
                None => self.apply_term(b),
            },
            Term::SomeBind(b, sort, body) => {
                let (b2, inner) = self.enter_binder(b, &|| (body.free_index_vars(), term_metas(body)));
                Term::some(b2, *sort, inner.apply_term(body))
            }
            Term::BigLam(b, sort, body) => {
                let (b2, inner) = self.enter_binder(b, &|| (body.free_index_vars(), term_metas(body)));
                Term::big_lam(b2, *sort, inner.apply_term(body))
            }
            Term::CtxAnno(b, typings) => Term::ctx_anno(
                self.apply_term(b),
                typings.iter().map(|t| self.apply_typing(t)).collect(),
            ),
        }
    }
}

fn type_metas(t: &Type) -> BTreeSet<MetaId> {
    let mut out = BTreeSet::new();
    t.metas(&mut out);
    out
}

fn term_metas(e: &Term) -> BTreeSet<MetaId> {
    let mut out = BTreeSet::new();
    e.metas(&mut out);
    out
}

fn typing_metas(t: &ContextualTyping) -> BTreeSet<MetaId> {
    let mut out = type_metas(&t.goal);
    for d in &t.decls {
        if let Decl::VarTyping(_, ty) = d {
            ty.metas(&mut out);
        }
    }
    out
}

/// `[i/a]A`
pub fn subst_index_in_type(i: &IndexExpr, a: &str, ty: &Type) -> Type {
    IndexSubst::single(a, i.clone()).apply_type(ty)
}

/// `[i/b]e`, descending into every annotation.
pub fn subst_index_in_term(i: &IndexExpr, b: &str, e: &Term) -> Term {
    IndexSubst::single(b, i.clone()).apply_term(e)
}

pub fn subst_index_in_expr(i: &IndexExpr, a: &str, e: &IndexExpr) -> IndexExpr {
    IndexSubst::single(a, i.clone()).apply_expr(e)
}

// ---------------------------------------------------------------------------
// Term-variable substitution
// ---------------------------------------------------------------------------

/// `[v/x]e`, capture-avoiding. Guards and contextual-typing entries on `x`
/// are renamed when `v` is a variable and discharged otherwise.
pub fn subst_term_var(v: &Term, x: &str, e: &Term) -> Term {
    let fv = v.free_term_vars();
    subst_tv(v, &fv, x, e)
}

fn subst_tv(v: &Term, fv: &BTreeSet<String>, x: &str, e: &Term) -> Term {
    let go = |t: &Term| subst_tv(v, fv, x, t);
    match e {
        Term::Var(y) if y == x => v.clone(),
        Term::Var(_) | Term::UnitVal | Term::PrimConst(_) => e.clone(),
        Term::Lam(y, b) => {
            if y == x {
                e.clone()
            } else if fv.contains(y) {
                let bfv = b.free_term_vars();
                let y2 = fresh_name(y, &|c| fv.contains(c) || bfv.contains(c) || c == x);
                let b2 = subst_term_var(&Term::Var(y2.clone()), y, b);
                Term::lam(y2, go(&b2))
            } else {
                Term::lam(y.clone(), go(b))
            }
        }
        Term::App(l, r) => Term::app(go(l), go(r)),
        Term::Merge(l, r) => Term::merge(go(l), go(r)),
        Term::RightAnno(b, ty) => Term::anno(go(b), ty.clone()),
        Term::Guard(Decl::VarTyping(y, ty), b) if y == x => match v {
            Term::Var(z) => Term::guard(Decl::VarTyping(z.clone(), ty.clone()), go(b)),
            _ => go(b),
        },
        Term::Guard(d, b) => Term::guard(d.clone(), go(b)),
        Term::SomeBind(a, s, b) => Term::some(a.clone(), *s, go(b)),
        Term::BigLam(a, s, b) => Term::big_lam(a.clone(), *s, go(b)),
        Term::CtxAnno(b, typings) => {
            let typings = typings
                .iter()
                .map(|t| ContextualTyping {
                    decls: t
                        .decls
                        .iter()
                        .filter_map(|d| match d {
                            Decl::VarTyping(y, ty) if y == x => match v {
                                Term::Var(z) => Some(Decl::VarTyping(z.clone(), ty.clone())),
                                _ => None,
                            },
                            other => Some(other.clone()),
                        })
                        .collect(),
                    goal: t.goal.clone(),
                })
                .collect();
            Term::ctx_anno(go(b), typings)
        }
    }
}

// ---------------------------------------------------------------------------
// α-equivalence
// ---------------------------------------------------------------------------

#[derive(Default)]
struct AlphaEnv {
    index: Vec<(String, String)>,
    term: Vec<(String, String)>,
}

fn same_binding(stack: &[(String, String)], x: &str, y: &str) -> bool {
    let px = stack.iter().rposition(|(l, _)| l == x);
    let py = stack.iter().rposition(|(_, r)| r == y);
    match (px, py) {
        (None, None) => x == y,
        (Some(p), Some(q)) => p == q,
        _ => false,
    }
}

impl AlphaEnv {
    fn expr(&self, a: &IndexExpr, b: &IndexExpr) -> bool {
        match (a, b) {
            (IndexExpr::Var(x), IndexExpr::Var(y)) => same_binding(&self.index, x, y),
            (IndexExpr::Lit(m), IndexExpr::Lit(n)) => m == n,
            (IndexExpr::Meta(m), IndexExpr::Meta(n)) => m == n,
            (IndexExpr::Add(a1, a2), IndexExpr::Add(b1, b2))
            | (IndexExpr::Sub(a1, a2), IndexExpr::Sub(b1, b2)) => self.expr(a1, b1) && self.expr(a2, b2),
            (IndexExpr::Mul(k, x), IndexExpr::Mul(l, y)) => k == l && self.expr(x, y),
            _ => false,
        }
    }

    fn ty(&mut self, a: &Type, b: &Type) -> bool {
        match (a, b) {
            (Type::Unit, Type::Unit) => true,
            (Type::Atom(s), Type::Atom(t)) => s == t,
            (Type::Arrow(a1, a2), Type::Arrow(b1, b2)) | (Type::Sect(a1, a2), Type::Sect(b1, b2)) => {
                self.ty(a1, b1) && self.ty(a2, b2)
            }
            (Type::IndexedCon(c, i), Type::IndexedCon(d, j)) => c == d && self.expr(i, j),
            (Type::Pi(x, s, a), Type::Pi(y, t, b)) => {
                s == t && {
                    self.index.push((x.clone(), y.clone()));
                    let r = self.ty(a, b);
                    self.index.pop();
                    r
                }
            }
            _ => false,
        }
    }

    fn decl(&mut self, a: &Decl, b: &Decl) -> bool {
        match (a, b) {
            (Decl::VarTyping(x, s), Decl::VarTyping(y, t)) => same_binding(&self.term, x, y) && self.ty(s, t),
            (Decl::IndexSorting(x, s), Decl::IndexSorting(y, t)) => same_binding(&self.index, x, y) && s == t,
            _ => false,
        }
    }

    fn typing(&mut self, a: &ContextualTyping, b: &ContextualTyping) -> bool {
        if a.decls.len() != b.decls.len() {
            return false;
        }
        let mark = self.index.len();
        let mut ok = true;
        for (d1, d2) in a.decls.iter().zip(&b.decls) {
            match (d1, d2) {
                (Decl::IndexSorting(x, s), Decl::IndexSorting(y, t)) => {
                    if s != t {
                        ok = false;
                        break;
                    }
                    self.index.push((x.clone(), y.clone()));
                }
                (Decl::VarTyping(x, s), Decl::VarTyping(y, t)) => {
                    if !(same_binding(&self.term, x, y) && self.ty(s, t)) {
                        ok = false;
                        break;
                    }
                }
                _ => {
                    ok = false;
                    break;
                }
            }
        }
        let ok = ok && self.ty(&a.goal, &b.goal);
        self.index.truncate(mark);
        ok
    }

    fn term(&mut self, a: &Term, b: &Term) -> bool {
        match (a, b) {
            (Term::Var(x), Term::Var(y)) => same_binding(&self.term, x, y),
            (Term::UnitVal, Term::UnitVal) => true,
            (Term::PrimConst(p), Term::PrimConst(q)) => p == q,
            (Term::Lam(x, e1), Term::Lam(y, e2)) => {
                self.term.push((x.clone(), y.clone()));
                let r = self.term(e1, e2);
                self.term.pop();
                r
            }
            (Term::App(a1, a2), Term::App(b1, b2)) | (Term::Merge(a1, a2), Term::Merge(b1, b2)) => {
                self.term(a1, b1) && self.term(a2, b2)
            }
            (Term::RightAnno(e1, t1), Term::RightAnno(e2, t2)) => self.term(e1, e2) && self.ty(t1, t2),
            (Term::Guard(d1, e1), Term::Guard(d2, e2)) => self.decl(d1, d2) && self.term(e1, e2),
            (Term::SomeBind(x, s, e1), Term::SomeBind(y, t, e2))
            | (Term::BigLam(x, s, e1), Term::BigLam(y, t, e2)) => {
                s == t && {
                    self.index.push((x.clone(), y.clone()));
                    let r = self.term(e1, e2);
                    self.index.pop();
                    r
                }
            }
            (Term::CtxAnno(e1, ts1), Term::CtxAnno(e2, ts2)) => {
                self.term(e1, e2) && ts1.len() == ts2.len() && ts1.iter().zip(ts2).all(|(t1, t2)| self.typing(t1, t2))
            }
            _ => false,
        }
    }
}

pub fn alpha_eq_type(a: &Type, b: &Type) -> bool {
    AlphaEnv::default().ty(a, b)
}

pub fn alpha_eq_term(a: &Term, b: &Term) -> bool {
    AlphaEnv::default().term(a, b)
}

// ---------------------------------------------------------------------------
// Contexts
// ---------------------------------------------------------------------------

/// Ordered typing context `Γ`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Context {
    decls: Vec<Decl>,
}

impl Context {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn from_decls(decls: Vec<Decl>) -> Self {
        Context { decls }
    }

    pub fn decls(&self) -> &[Decl] {
        &self.decls
    }

    pub fn len(&self) -> usize {
        self.decls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.decls.is_empty()
    }

    pub fn extended(&self, d: Decl) -> Context {
        let mut decls = self.decls.clone();
        decls.push(d);
        Context { decls }
    }

    pub fn lookup_var(&self, x: &str) -> Option<&Type> {
        self.decls.iter().rev().find_map(|d| match d {
            Decl::VarTyping(y, ty) if y == x => Some(ty),
            _ => None,
        })
    }

    pub fn index_sort(&self, a: &str) -> Option<IndexSort> {
        self.decls.iter().rev().find_map(|d| match d {
            Decl::IndexSorting(b, s) if b == a => Some(*s),
            _ => None,
        })
    }

    pub fn index_vars(&self) -> impl Iterator<Item = &str> {
        self.decls.iter().filter_map(|d| match d {
            Decl::IndexSorting(a, _) => Some(a.as_str()),
            _ => None,
        })
    }

    pub fn has_index_var(&self, a: &str) -> bool {
        self.index_sort(a).is_some()
    }

    pub fn has_term_var(&self, x: &str) -> bool {
        self.lookup_var(x).is_some()
    }

    pub fn has_meta(&self) -> bool {
        self.decls.iter().any(|d| matches!(d, Decl::VarTyping(_, ty) if ty.has_meta()))
    }

    pub fn map_types(&self, f: &mut dyn FnMut(&Type) -> Type) -> Context {
        Context {
            decls: self
                .decls
                .iter()
                .map(|d| match d {
                    Decl::VarTyping(x, ty) => Decl::VarTyping(x.clone(), f(ty)),
                    other => other.clone(),
                })
                .collect(),
        }
    }
}

// ---------------------------------------------------------------------------
// Program header
// ---------------------------------------------------------------------------

/// Declared datasort refinement order, kept as a reflexive-transitive closure
/// over user edges.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SortLattice {
    parents: BTreeMap<String, BTreeSet<String>>,
}

impl SortLattice {
    pub fn declare(&mut self, atom: &str) {
        self.parents.entry(atom.to_string()).or_default();
    }

    pub fn is_declared(&self, atom: &str) -> bool {
        self.parents.contains_key(atom)
    }

    pub fn atoms(&self) -> impl Iterator<Item = &str> {
        self.parents.keys().map(|s| s.as_str())
    }

    /// Add `sub ⊑ sup`; rejects edges that would make the order cyclic.
    pub fn add_edge(&mut self, sub: &str, sup: &str) -> Result<(), String> {
        self.declare(sub);
        self.declare(sup);
        if sub != sup && self.leq(sup, sub) {
            return Err(format!("datasort cycle between `{sub}` and `{sup}`"));
        }
        self.parents.get_mut(sub).unwrap().insert(sup.to_string());
        Ok(())
    }

    pub fn leq(&self, sub: &str, sup: &str) -> bool {
        if sub == sup {
            return true;
        }
        let mut seen = BTreeSet::new();
        let mut stack = vec![sub];
        while let Some(s) = stack.pop() {
            if s == sup {
                return true;
            }
            if !seen.insert(s) {
                continue;
            }
            if let Some(ps) = self.parents.get(s) {
                stack.extend(ps.iter().map(|p| p.as_str()));
            }
        }
        false
    }
}

/// Everything the checker needs from the program header.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Signature {
    pub lattice: SortLattice,
    pub constructors: BTreeMap<String, IndexSort>,
    pub prims: BTreeMap<String, Type>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum HeaderDecl {
    Datasort { name: String, parent: Option<String> },
    IndexCon { name: String, sort: IndexSort },
    Prim { name: String, ty: Type },
}

#[derive(Clone, Debug)]
pub struct Program {
    pub header: Vec<HeaderDecl>,
    pub signature: Signature,
    pub main: Term,
    pub goal: Option<Type>,
    pub spans: ProgramSpans,
}

impl Program {
    pub fn with_main(&self, main: Term) -> Program {
        Program { main, ..self.clone() }
    }
}

impl fmt::Display for IndexExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&crate::parser::pretty_index(self))
    }
}

impl fmt::Display for IndexProp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&crate::parser::pretty_prop(self))
    }
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&crate::parser::pretty_type(self))
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&crate::parser::pretty_term(self))
    }
}

impl fmt::Display for ContextualTyping {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&crate::parser::pretty_typing(self))
    }
}

impl fmt::Display for Decl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&crate::parser::pretty_decl(self))
    }
}

impl fmt::Display for Context {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.decls.is_empty() {
            return f.write_str("·");
        }
        let parts: Vec<String> = self.decls.iter().map(|d| d.to_string()).collect();
        f.write_str(&parts.join(", "))
    }
}
