//! Contextual typing annotations `(e :: [Γ₁ ⊢ A₁; …])`: the context
//! subsumption judgment, the synthesis rule, and the encoding into guards,
//! `some` binders and right annotations.

use std::collections::BTreeSet;
use std::fmt;

use crate::ast::{fresh_name, Context, ContextualTyping, Decl, IndexExpr, IndexSubst, MetaId, Program, Signature, Term, Type};
use crate::parser::{parse_program_named, pretty_program};
use crate::search::{Failure, FailureKind, FailureReason, MetaOrigin, Options, Search};
use crate::subtype::SubDerivation;
use crate::typecheck::{typecheck_program, CheckK, CheckOutcome, Mode, Premise, TypingDerivation, TypingRule};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CtxSubRule {
    Empty,
    Ivar,
    Pvar,
}

impl CtxSubRule {
    pub fn name(self) -> &'static str {
        match self {
            CtxSubRule::Empty => "≲-empty",
            CtxSubRule::Ivar => "≲-ivar",
            CtxSubRule::Pvar => "≲-pvar",
        }
    }
}

/// Derivation of `(Γ' ⊢ A') ≲ (Γ ⊢ A)`: the annotated typing `inner` is
/// usable under the ambient context `outer_ctx`, yielding `outer_goal`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CtxSubDerivation {
    pub rule: CtxSubRule,
    pub inner: ContextualTyping,
    pub outer_ctx: Context,
    pub outer_goal: Type,
    /// Index chosen for the leading index variable (≲-ivar).
    pub witness: Option<IndexExpr>,
    /// `Γ(x) ≤ B` for the leading program variable (≲-pvar).
    pub sub: Option<SubDerivation>,
    pub rest: Option<Box<CtxSubDerivation>>,
}

impl CtxSubDerivation {
    pub fn apply(&self, s: &IndexSubst) -> CtxSubDerivation {
        CtxSubDerivation {
            rule: self.rule,
            inner: s.apply_typing(&self.inner),
            outer_ctx: self.outer_ctx.map_types(&mut |t| s.apply_type(t)),
            outer_goal: s.apply_type(&self.outer_goal),
            witness: self.witness.as_ref().map(|w| s.apply_expr(w)),
            sub: self.sub.as_ref().map(|d| d.apply(s)),
            rest: self.rest.as_ref().map(|d| Box::new(d.apply(s))),
        }
    }

    pub fn write_indented(&self, f: &mut dyn fmt::Write, indent: usize) -> fmt::Result {
        write!(f, "{:indent$}[{}] ({}) ≲ ({} ⊢ {})", "", self.rule.name(), self.inner, self.outer_ctx, self.outer_goal, indent = indent)?;
        if let Some(w) = &self.witness {
            write!(f, "  with {w}")?;
        }
        writeln!(f)?;
        if let Some(d) = &self.sub {
            d.write_indented(f, indent + 2)?;
        }
        if let Some(d) = &self.rest {
            d.write_indented(f, indent + 2)?;
        }
        Ok(())
    }
}

impl fmt::Display for CtxSubDerivation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_indented(f, 0)
    }
}

pub type CtxK<'k, 's> = dyn FnMut(&mut Search<'s>, Type, CtxSubDerivation) -> bool + 'k;

impl<'s> Search<'s> {
    /// Search for `inner ≲ (ctx ⊢ A)`; `k` receives the goal `A` so obtained.
    pub fn ctx_le(&mut self, ctx: &Context, inner: &ContextualTyping, depth: usize, k: &mut CtxK<'_, 's>) -> bool {
        if !self.tick(depth) {
            return false;
        }
        let d1 = depth + 1;
        let node = |rule, goal: &Type| CtxSubDerivation {
            rule,
            inner: inner.clone(),
            outer_ctx: ctx.clone(),
            outer_goal: goal.clone(),
            witness: None,
            sub: None,
            rest: None,
        };
        let Some((first, rest)) = inner.decls.split_first() else {
            let goal = inner.goal.clone();
            let n = node(CtxSubRule::Empty, &goal);
            return k(self, goal, n);
        };
        let rest = ContextualTyping { decls: rest.to_vec(), goal: inner.goal.clone() };
        match first {
            Decl::IndexSorting(a, sort) => {
                let m = self.metas.fresh(*sort, ctx, MetaOrigin::CtxIvar(a.clone()));
                let inst = IndexSubst::single(a, IndexExpr::Meta(m)).apply_typing(&rest);
                self.ctx_le(ctx, &inst, d1, &mut |s, goal, cd| {
                    let mut n = node(CtxSubRule::Ivar, &goal);
                    n.witness = Some(IndexExpr::Meta(m));
                    n.rest = Some(Box::new(cd));
                    k(s, goal, n)
                })
            }
            Decl::VarTyping(x, b) => {
                let Some(t) = ctx.lookup_var(x).cloned() else {
                    self.fail(depth, FailureKind::Mismatch, format!("contextual typing mentions `{x}`, which is not in the context"));
                    return false;
                };
                self.sub(ctx, &t, b, d1, &mut |s, sd| {
                    s.ctx_le(ctx, &rest, d1, &mut |s, goal, cd| {
                        let mut n = node(CtxSubRule::Pvar, &goal);
                        n.sub = Some(sd.clone());
                        n.rest = Some(Box::new(cd));
                        k(s, goal, n)
                    })
                })
            }
        }
    }

    /// The synthesis rule for `(e0 :: typings)`: the first typing, in order,
    /// that the ambient context subsumes and under which `e0` checks.
    pub(crate) fn synth_ctx_anno(
        &mut self,
        ctx: &Context,
        e: &Term,
        e0: &Term,
        typings: &[ContextualTyping],
        depth: usize,
        k: &mut CheckK<'_, 's>,
    ) -> bool {
        if !self.opts.ctx_anno {
            self.fail(depth, FailureKind::CtxAnnoDisabled, "contextual annotations are disabled".into());
            return false;
        }
        let d1 = depth + 1;
        for (idx, typing) in typings.iter().enumerate() {
            let mark = self.metas.len();
            let ok = self.attempt(|s| {
                s.ctx_le(ctx, typing, d1, &mut |s, goal, cd| {
                    let ivars: Vec<MetaId> = (mark..s.metas.len())
                        .map(|m| m as MetaId)
                        .filter(|m| matches!(s.metas.info(*m).origin, MetaOrigin::CtxIvar(_)))
                        .collect();
                    s.check(ctx, e0, &goal, d1, &mut |s, d| {
                        let a = s.zonk_type(&goal);
                        let mut ms = BTreeSet::new();
                        a.metas(&mut ms);
                        if ivars.iter().any(|m| ms.contains(m)) {
                            s.fail(d1, FailureKind::UnresolvedSome, format!("contextual typing `{typing}` leaves an index variable in {a}"));
                            return false;
                        }
                        for m in &ivars {
                            s.metas.default_if_unsolved(*m);
                        }
                        let a = s.zonk_type(&a);
                        let node = TypingDerivation::new(
                            TypingRule::CtxAnno(idx),
                            Mode::Synth,
                            ctx,
                            e,
                            &a,
                            vec![Premise::CtxSub(cd.clone()), Premise::Typing(d)],
                        );
                        s.emit_closure(node, d1, k)
                    })
                })
            });
            if ok {
                return true;
            }
        }
        false
    }
}

/// Decide `inner ≲ (outer_ctx ⊢ outer_goal)`.
pub fn ctx_subsumes(
    sig: &Signature,
    inner: &ContextualTyping,
    outer_ctx: &Context,
    outer_goal: &Type,
    opts: &Options,
) -> Result<CtxSubDerivation, Failure> {
    let mut s = Search::new(sig, opts.clone());
    let mut out = None;
    s.ctx_le(outer_ctx, inner, 0, &mut |s, goal, cd| {
        if !s.types_match(outer_ctx, &goal, outer_goal, 1) {
            s.fail(1, FailureKind::Mismatch, format!("contextual goal {goal} does not match {outer_goal}"));
            return false;
        }
        out = Some(cd.apply(&s.defaulting_subst()));
        true
    });
    out.ok_or_else(|| s.failure())
}

/// Synthesize a type for a contextual annotation in `ctx`.
pub fn synth_ctx_anno(sig: &Signature, ctx: &Context, e: &Term, opts: &Options) -> Result<TypingDerivation, Failure> {
    crate::typecheck::synth(sig, ctx, e, opts).map(|(_, d)| d)
}

/// Replace every contextual annotation by guards, `some` binders and right
/// annotations. Several typings become a right-nested merge.
pub fn encode(e: &Term) -> Term {
    match e {
        Term::Var(_) | Term::UnitVal | Term::PrimConst(_) => e.clone(),
        Term::Lam(x, b) => Term::lam(x.clone(), encode(b)),
        Term::App(l, r) => Term::app(encode(l), encode(r)),
        Term::Merge(l, r) => Term::merge(encode(l), encode(r)),
        Term::RightAnno(b, t) => Term::anno(encode(b), t.clone()),
        Term::Guard(d, b) => Term::guard(d.clone(), encode(b)),
        Term::SomeBind(b, s, body) => Term::some(b.clone(), *s, encode(body)),
        Term::BigLam(b, s, body) => Term::big_lam(b.clone(), *s, encode(body)),
        Term::CtxAnno(b, typings) => {
            let inner = encode(b);
            let mut branches: Vec<Term> = typings.iter().map(|t| encode_typing(t, &inner)).collect();
            let mut acc = branches.pop().unwrap_or_else(|| inner.clone());
            while let Some(t) = branches.pop() {
                acc = Term::merge(t, acc);
            }
            acc
        }
    }
}

fn encode_typing(t: &ContextualTyping, e0: &Term) -> Term {
    let Some((first, rest)) = t.decls.split_first() else {
        return Term::anno(e0.clone(), t.goal.clone());
    };
    let rest = ContextualTyping { decls: rest.to_vec(), goal: t.goal.clone() };
    match first {
        Decl::VarTyping(..) => Term::guard(first.clone(), encode_typing(&rest, e0)),
        Decl::IndexSorting(a, sort) => {
            let efv = e0.free_index_vars();
            if efv.contains(a) {
                // The binder would capture a free index variable of e0.
                let tfv = rest.free_index_vars();
                let a2 = fresh_name(a, &|c| efv.contains(c) || tfv.contains(c) || c == a);
                let rest = IndexSubst::single(a, IndexExpr::Var(a2.clone())).apply_typing(&rest);
                Term::some(a2, *sort, encode_typing(&rest, e0))
            } else {
                Term::some(a.clone(), *sort, encode_typing(&rest, e0))
            }
        }
    }
}

/// The program with its contextual annotations encoded.
pub fn encode_program(p: &Program) -> Program {
    p.with_main(encode(&p.main))
}

#[derive(Clone, Debug)]
pub struct EncodingReport {
    pub original: CheckOutcome,
    /// Source text of the encoded program.
    pub encoded_text: String,
    pub encoded: Option<CheckOutcome>,
}

impl EncodingReport {
    /// The original is accepted but the encoding is not.
    pub fn gap(&self) -> Option<Failure> {
        if !self.original.accepted() {
            return None;
        }
        match &self.encoded {
            Some(o) if o.accepted() => None,
            Some(o) => {
                let mut f = o.failure.clone().unwrap_or(Failure { reasons: vec![] });
                f.reasons.insert(
                    0,
                    FailureReason {
                        kind: FailureKind::EncodingGap,
                        depth: 0,
                        message: "the encoded program is rejected although the original is accepted".into(),
                        decl: None,
                    },
                );
                Some(f)
            }
            None => Some(Failure {
                reasons: vec![FailureReason {
                    kind: FailureKind::EncodingGap,
                    depth: 0,
                    message: "the encoded program does not parse".into(),
                    decl: None,
                }],
            }),
        }
    }
}

/// Check `p`, encode it, print and re-parse the encoding, and check that
/// without the contextual-annotation rule.
pub fn verify_encoding(p: &Program, opts: &Options) -> EncodingReport {
    let original = typecheck_program(p, &Options { ctx_anno: true, ..opts.clone() });
    let encoded_text = pretty_program(&encode_program(p));
    let encoded = parse_program_named("<encoded>", &encoded_text)
        .ok()
        .map(|q| typecheck_program(&q, &Options { ctx_anno: false, ..opts.clone() }));
    EncodingReport { original, encoded_text, encoded }
}
