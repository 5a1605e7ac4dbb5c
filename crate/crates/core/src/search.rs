//! Shared state for one checking run: options, the metavariable store,
//! statistics, memo tables and collected failures.
//!
//! All judgments are searched in continuation-passing style. A rule calls
//! its continuation once per way it can succeed; a continuation returns
//! `true` to stop the search. `attempt` restores the metavariable store when
//! an alternative fails so later alternatives start from the same state.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ast::{Context, Decl, IndexAtom, IndexExpr, IndexSort, IndexSubst, MetaId, Signature, Term, Type};
use crate::subtype::SubDerivation;
use crate::typecheck::TypingDerivation;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Options {
    /// Bound on the nesting depth of any derivation.
    pub max_depth: usize,
    /// Bound on the total number of rule applications in one run.
    pub max_steps: u64,
    /// Whether the contextual-annotation rule is available.
    pub ctx_anno: bool,
    /// Cache results of metavariable-free goals.
    pub memoize: bool,
}

impl Default for Options {
    fn default() -> Self {
        Options { max_depth: 512, max_steps: 1_000_000, ctx_anno: true, memoize: true }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stats {
    pub rule_applications: u64,
    pub backtracks: u64,
    pub subtype_queries: u64,
    pub entailment_queries: u64,
    pub memo_hits: u64,
    pub unsolved_metas: u64,
    pub wall_ms: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MetaOrigin {
    PiLeft,
    PiElim,
    Some(String),
    CtxIvar(String),
}

#[derive(Clone, Debug)]
pub struct MetaInfo {
    pub sort: IndexSort,
    /// Index variables in scope where the metavariable was introduced.
    pub scope: BTreeSet<String>,
    pub solution: Option<IndexExpr>,
    pub origin: MetaOrigin,
}

#[derive(Clone, Debug, Default)]
pub struct MetaStore {
    metas: Vec<MetaInfo>,
}

impl MetaStore {
    pub fn fresh(&mut self, sort: IndexSort, ctx: &Context, origin: MetaOrigin) -> MetaId {
        let scope = ctx.index_vars().map(|s| s.to_string()).collect();
        self.metas.push(MetaInfo { sort, scope, solution: None, origin });
        (self.metas.len() - 1) as MetaId
    }

    pub fn len(&self) -> usize {
        self.metas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.metas.is_empty()
    }

    pub fn info(&self, m: MetaId) -> &MetaInfo {
        &self.metas[m as usize]
    }

    pub fn solve(&mut self, m: MetaId, e: IndexExpr) {
        self.metas[m as usize].solution = Some(e);
    }

    pub fn is_solved(&self, m: MetaId) -> bool {
        self.metas[m as usize].solution.is_some()
    }

    /// Pick `0` for a metavariable nothing constrained.
    pub fn default_if_unsolved(&mut self, m: MetaId) {
        if !self.is_solved(m) {
            self.solve(m, IndexExpr::Lit(0));
        }
    }

    pub fn truncate(&mut self, len: usize) {
        self.metas.truncate(len);
    }

    pub fn unsolved_count(&self) -> usize {
        self.metas.iter().filter(|m| m.solution.is_none()).count()
    }

    /// Substitution of every solved metavariable by its solution.
    pub fn solutions(&self) -> IndexSubst {
        let mut s = IndexSubst::new();
        for (i, m) in self.metas.iter().enumerate() {
            if let Some(e) = &m.solution {
                s.insert(IndexAtom::Meta(i as MetaId), e.clone());
            }
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FailureKind {
    Mismatch,
    GuardUnsatisfied,
    UnresolvedSome,
    NoSolution,
    DepthExceeded,
    StepLimit,
    NoSynthesisRule,
    UnboundVariable,
    IllFormed,
    CtxAnnoDisabled,
    EncodingGap,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FailureReason {
    pub kind: FailureKind,
    pub depth: usize,
    pub message: String,
    /// The guard declaration, for `GuardUnsatisfied`.
    pub decl: Option<Decl>,
}

impl fmt::Display for FailureReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}: {}", self.kind, self.message)
    }
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
#[error("{}", summary(.reasons))]
pub struct Failure {
    pub reasons: Vec<FailureReason>,
}

fn summary(reasons: &[FailureReason]) -> String {
    match reasons.first() {
        Some(r) => r.to_string(),
        None => "no rule applies".to_string(),
    }
}

impl Failure {
    pub fn has_kind(&self, kind: &FailureKind) -> bool {
        self.reasons.iter().any(|r| &r.kind == kind)
    }
}

const FAILURE_CAP: usize = 4096;
const REPORTED_FAILURES: usize = 32;

type SubKey = (Vec<String>, Type, Type);
type CheckKey = (Context, Term, Type);

pub struct Search<'s> {
    pub sig: &'s Signature,
    pub opts: Options,
    pub metas: MetaStore,
    pub stats: Stats,
    steps: u64,
    /// Incremented whenever a resource bound cuts the search.
    pub limit_hits: u64,
    failures: Vec<FailureReason>,
    pub(crate) sub_memo: HashMap<SubKey, Option<SubDerivation>>,
    pub(crate) check_memo: HashMap<CheckKey, Option<TypingDerivation>>,
}

impl<'s> Search<'s> {
    pub fn new(sig: &'s Signature, opts: Options) -> Self {
        Search {
            sig,
            opts,
            metas: MetaStore::default(),
            stats: Stats::default(),
            steps: 0,
            limit_hits: 0,
            failures: Vec::new(),
            sub_memo: HashMap::new(),
            check_memo: HashMap::new(),
        }
    }

    /// Count one rule application; `false` if a bound is exceeded.
    pub fn tick(&mut self, depth: usize) -> bool {
        self.stats.rule_applications += 1;
        self.steps += 1;
        if self.steps > self.opts.max_steps {
            if self.limit_hits == 0 || !self.failures.iter().any(|f| f.kind == FailureKind::StepLimit) {
                self.fail(depth, FailureKind::StepLimit, format!("search budget of {} steps exhausted", self.opts.max_steps));
            }
            self.limit_hits += 1;
            return false;
        }
        if depth > self.opts.max_depth {
            self.limit_hits += 1;
            self.fail(depth, FailureKind::DepthExceeded, format!("derivation depth exceeds {}", self.opts.max_depth));
            return false;
        }
        true
    }

    pub fn budget_exhausted(&self) -> bool {
        self.steps > self.opts.max_steps
    }

    pub fn fail(&mut self, depth: usize, kind: FailureKind, message: String) {
        self.fail_with(depth, kind, message, None);
    }

    pub fn fail_with(&mut self, depth: usize, kind: FailureKind, message: String, decl: Option<Decl>) {
        if self.failures.len() < FAILURE_CAP {
            self.failures.push(FailureReason { kind, depth, message, decl });
        }
    }

    /// Guard failures first, then the deepest remaining reasons.
    pub fn failure(&self) -> Failure {
        let mut guards: Vec<FailureReason> = Vec::new();
        let mut rest: Vec<FailureReason> = Vec::new();
        for f in &self.failures {
            let bucket = if f.kind == FailureKind::GuardUnsatisfied { &mut guards } else { &mut rest };
            if !bucket.iter().any(|g| g.message == f.message) {
                bucket.push(f.clone());
            }
        }
        rest.sort_by(|a, b| b.depth.cmp(&a.depth));
        guards.extend(rest);
        guards.truncate(REPORTED_FAILURES);
        Failure { reasons: guards }
    }

    /// Run `f`; on failure restore the metavariable store.
    pub fn attempt(&mut self, f: impl FnOnce(&mut Self) -> bool) -> bool {
        let snap = self.metas.clone();
        if f(self) {
            true
        } else {
            self.metas = snap;
            self.stats.backtracks += 1;
            false
        }
    }

    pub fn zonk_expr(&self, e: &IndexExpr) -> IndexExpr {
        if e.has_meta() {
            self.metas.solutions().apply_expr(e)
        } else {
            e.clone()
        }
    }

    pub fn zonk_type(&self, t: &Type) -> Type {
        if t.has_meta() {
            self.metas.solutions().apply_type(t)
        } else {
            t.clone()
        }
    }

    pub fn zonk_term(&self, e: &Term) -> Term {
        if e.has_meta() {
            self.metas.solutions().apply_term(e)
        } else {
            e.clone()
        }
    }

    pub fn zonk_ctx(&self, ctx: &Context) -> Context {
        if ctx.has_meta() {
            let s = self.metas.solutions();
            ctx.map_types(&mut |t| s.apply_type(t))
        } else {
            ctx.clone()
        }
    }

    /// Solutions for every metavariable, with `0` for unsolved ones.
    pub fn defaulting_subst(&self) -> IndexSubst {
        let mut s = IndexSubst::new();
        for m in 0..self.metas.len() as MetaId {
            let e = self.metas.info(m).solution.clone().unwrap_or(IndexExpr::Lit(0));
            s.insert(IndexAtom::Meta(m), e);
        }
        // Solutions never mention metavariables, so one pass suffices.
        s
    }

    /// Check that a type only mentions declared names and bound index
    /// variables.
    pub fn well_formed(&self, ctx: &Context, t: &Type) -> Result<(), String> {
        wf_type(self.sig, ctx, t)
    }
}

pub fn wf_type(sig: &Signature, ctx: &Context, t: &Type) -> Result<(), String> {
    match t {
        Type::Unit => Ok(()),
        Type::Atom(s) => {
            if sig.lattice.is_declared(s) {
                Ok(())
            } else {
                Err(format!("undeclared datasort `{s}`"))
            }
        }
        Type::Arrow(a, b) | Type::Sect(a, b) => {
            wf_type(sig, ctx, a)?;
            wf_type(sig, ctx, b)
        }
        Type::IndexedCon(c, i) => {
            if !sig.constructors.contains_key(c) {
                return Err(format!("undeclared indexed constructor `{c}`"));
            }
            crate::index_domain::sort_of(ctx, i).map(|_| ()).map_err(|e| e.to_string())
        }
        Type::Pi(a, s, body) => wf_type(sig, &ctx.extended(Decl::IndexSorting(a.clone(), *s)), body),
    }
}

/// Run `f` with extra stack if recursion runs deep.
pub fn grow<R>(f: impl FnOnce() -> R) -> R {
    stacker::maybe_grow(256 * 1024, 8 * 1024 * 1024, f)
}
