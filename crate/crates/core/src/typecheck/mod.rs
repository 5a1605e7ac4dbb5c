//! Bidirectional typing: Γ ⊢ e ⇐ A and Γ ⊢ e ⇒ A, searched with
//! backtracking.
//!
//! Checking tries ∧I, then ΠI-explicit (for `idxfn`) or ΠI, then the rule
//! selected by the term: →I, unitI, left-anno⇐, `some`, merge⇐ (branch 1
//! then 2). Remaining terms switch to synthesis and conclude by ΠE or sub.
//! Synthesis offers the ∧E closure of every type it produces.

mod derivation;

use std::collections::BTreeSet;
use std::time::Instant;

use crate::ast::{
    fresh_name, subst_term_var, Context, Decl, IndexExpr, IndexSubst, MetaId, Program, Signature, Term, Type,
};
use crate::search::{grow, Failure, FailureKind, MetaOrigin, Options, Search, Stats};

pub use derivation::{Mode, Premise, TypingDerivation, TypingRule};

pub type CheckK<'k, 's> = dyn FnMut(&mut Search<'s>, TypingDerivation) -> bool + 'k;
pub type PremiseK<'k, 's> = dyn FnMut(&mut Search<'s>, Premise) -> bool + 'k;

/// Terms that may reach an `idxfn` through merges, guards or `some`.
fn may_expose_big_lam(e: &Term) -> bool {
    match e {
        Term::BigLam(..) => true,
        Term::Merge(l, r) => may_expose_big_lam(l) || may_expose_big_lam(r),
        Term::Guard(_, b) | Term::SomeBind(_, _, b) => may_expose_big_lam(b),
        _ => false,
    }
}

fn contains_meta(t: &Type, m: MetaId) -> bool {
    let mut ms = BTreeSet::new();
    t.metas(&mut ms);
    ms.contains(&m)
}

impl<'s> Search<'s> {
    /// Search for derivations of `ctx ⊢ e ⇐ a`.
    pub fn check(&mut self, ctx: &Context, e: &Term, a: &Type, depth: usize, k: &mut CheckK<'_, 's>) -> bool {
        grow(|| self.check_memo_wrap(ctx, e, a, depth, k))
    }

    fn check_memo_wrap(&mut self, ctx: &Context, e: &Term, a: &Type, depth: usize, k: &mut CheckK<'_, 's>) -> bool {
        let ctx = self.zonk_ctx(ctx);
        let e = self.zonk_term(e);
        let a = self.zonk_type(a);
        if !self.opts.memoize || a.has_meta() || e.has_meta() || ctx.has_meta() {
            return self.check_rules(&ctx, &e, &a, depth, k);
        }
        let key = (ctx.clone(), e.clone(), a.clone());
        if let Some(hit) = self.check_memo.get(&key).cloned() {
            self.stats.memo_hits += 1;
            return match hit {
                Some(d) => k(self, d),
                None => false,
            };
        }
        let mark = self.metas.len();
        let limits = self.limit_hits;
        let mut found = None;
        self.check_rules(&ctx, &e, &a, depth, &mut |s, d| {
            found = Some(d.apply(&s.defaulting_subst()));
            true
        });
        self.metas.truncate(mark);
        if found.is_some() || self.limit_hits == limits {
            self.check_memo.insert(key, found.clone());
        }
        match found {
            Some(d) => k(self, d),
            None => false,
        }
    }

    fn check_rules(&mut self, ctx: &Context, e: &Term, a: &Type, depth: usize, k: &mut CheckK<'_, 's>) -> bool {
        if !self.tick(depth) {
            return false;
        }
        let d1 = depth + 1;

        if let Type::Sect(a1, a2) = a {
            return self.check(ctx, e, a1, d1, &mut |s, p1| {
                s.check(ctx, e, a2, d1, &mut |s, p2| {
                    let node = TypingDerivation::new(
                        TypingRule::SectI,
                        Mode::Check,
                        ctx,
                        e,
                        a,
                        vec![Premise::Typing(p1.clone()), Premise::Typing(p2)],
                    );
                    k(s, node)
                })
            });
        }

        if let Type::Pi(x, sort, body) = a {
            if let Term::BigLam(b, sort_b, e0) = e {
                if sort != sort_b {
                    self.fail(depth, FailureKind::Mismatch, format!("idxfn over {} checked against Π over {}", sort_b.name(), sort.name()));
                    return false;
                }
                let afv = a.free_index_vars();
                let (b2, e0) = if ctx.has_index_var(b) || afv.contains(b) {
                    let efv = e0.free_index_vars();
                    let b2 = fresh_name(b, &|c| ctx.has_index_var(c) || afv.contains(c) || efv.contains(c));
                    let e0 = IndexSubst::single(b, IndexExpr::Var(b2.clone())).apply_term(e0);
                    (b2, e0)
                } else {
                    (b.clone(), (**e0).clone())
                };
                let body = IndexSubst::single(x, IndexExpr::Var(b2.clone())).apply_type(body);
                let ctx2 = ctx.extended(Decl::IndexSorting(b2, *sort));
                return self.check(&ctx2, &e0, &body, d1, &mut |s, p| {
                    k(s, TypingDerivation::new(TypingRule::PiIExplicit, Mode::Check, ctx, e, a, vec![Premise::Typing(p)]))
                });
            }
            // The binder is implicit, so the term cannot refer to it.
            let efv = e.free_index_vars();
            let (x2, body2) = if ctx.has_index_var(x) || efv.contains(x) {
                let bfv = body.free_index_vars();
                let x2 = fresh_name(x, &|c| ctx.has_index_var(c) || efv.contains(c) || bfv.contains(c));
                let body2 = IndexSubst::single(x, IndexExpr::Var(x2.clone())).apply_type(body);
                (x2, body2)
            } else {
                (x.clone(), (**body).clone())
            };
            let ctx2 = ctx.extended(Decl::IndexSorting(x2, *sort));
            let ok = self.attempt(|s| {
                s.check(&ctx2, e, &body2, d1, &mut |s, p| {
                    k(s, TypingDerivation::new(TypingRule::PiI, Mode::Check, ctx, e, a, vec![Premise::Typing(p)]))
                })
            });
            if ok || !may_expose_big_lam(e) {
                return ok;
            }
        }

        match e {
            Term::Lam(x, body) => match a {
                Type::Arrow(a1, a2) => {
                    let (x2, body2) = if ctx.has_term_var(x) {
                        let bfv = body.free_term_vars();
                        let x2 = fresh_name(x, &|c| ctx.has_term_var(c) || bfv.contains(c));
                        let body2 = subst_term_var(&Term::Var(x2.clone()), x, body);
                        (x2, body2)
                    } else {
                        (x.clone(), (**body).clone())
                    };
                    let ctx2 = ctx.extended(Decl::VarTyping(x2, (**a1).clone()));
                    self.check(&ctx2, &body2, a2, d1, &mut |s, p| {
                        k(s, TypingDerivation::new(TypingRule::ArrI, Mode::Check, ctx, e, a, vec![Premise::Typing(p)]))
                    })
                }
                _ => {
                    self.fail(depth, FailureKind::Mismatch, format!("function `{e}` checked against non-arrow type {a}"));
                    false
                }
            },
            Term::UnitVal => {
                if *a == Type::Unit {
                    k(self, TypingDerivation::new(TypingRule::UnitI, Mode::Check, ctx, e, a, vec![]))
                } else {
                    self.fail(depth, FailureKind::Mismatch, format!("() checked against {a}"));
                    false
                }
            }
            Term::Guard(d, body) => self.check_guard(ctx, d, d1, &mut |s, gp| {
                s.check(ctx, body, a, d1, &mut |s, bp| {
                    let node = TypingDerivation::new(
                        TypingRule::LeftAnnoCheck,
                        Mode::Check,
                        ctx,
                        e,
                        a,
                        vec![gp.clone(), Premise::Typing(bp)],
                    );
                    k(s, node)
                })
            }),
            Term::SomeBind(b, sort, body) => {
                let m = self.metas.fresh(*sort, ctx, MetaOrigin::Some(b.clone()));
                let inst = IndexSubst::single(b, IndexExpr::Meta(m)).apply_term(body);
                self.check(ctx, &inst, a, d1, &mut |s, p| {
                    s.metas.default_if_unsolved(m);
                    let w = s.zonk_expr(&IndexExpr::Meta(m));
                    k(s, TypingDerivation::new(TypingRule::SomeCheck, Mode::Check, ctx, e, a, vec![Premise::Typing(p)]).with_witness(w))
                })
            }
            Term::Merge(l, r) => {
                for (i, branch) in [(1u8, l), (2u8, r)] {
                    let ok = self.attempt(|s| {
                        s.check(ctx, branch, a, d1, &mut |s, p| {
                            k(s, TypingDerivation::new(TypingRule::MergeCheck(i), Mode::Check, ctx, e, a, vec![Premise::Typing(p)]))
                        })
                    });
                    if ok {
                        return true;
                    }
                }
                false
            }
            Term::BigLam(..) => {
                self.fail(depth, FailureKind::Mismatch, format!("idxfn checked against {a}, which is not a Π-type"));
                false
            }
            Term::Var(_) | Term::App(..) | Term::RightAnno(..) | Term::PrimConst(_) | Term::CtxAnno(..) => {
                self.check_by_synthesis(ctx, e, a, depth, k)
            }
        }
    }

    /// ΠE or sub, after synthesizing a type for `e`.
    fn check_by_synthesis(&mut self, ctx: &Context, e: &Term, a: &Type, depth: usize, k: &mut CheckK<'_, 's>) -> bool {
        let d1 = depth + 1;
        self.synth(ctx, e, d1, &mut |s, sd| {
            let b = s.zonk_type(&sd.ty);
            if let Type::Pi(x, sort, body) = &b {
                let ok = s.attempt(|s| {
                    let m = s.metas.fresh(*sort, ctx, MetaOrigin::PiElim);
                    let inst = IndexSubst::single(x, IndexExpr::Meta(m)).apply_type(body);
                    if !s.types_match(ctx, &inst, a, d1) {
                        return false;
                    }
                    s.metas.default_if_unsolved(m);
                    let w = s.zonk_expr(&IndexExpr::Meta(m));
                    k(s, TypingDerivation::new(TypingRule::PiE, Mode::Check, ctx, e, a, vec![Premise::Typing(sd.clone())]).with_witness(w))
                });
                if ok {
                    return true;
                }
            }
            s.attempt(|s| {
                s.sub(ctx, &b, a, d1, &mut |s, subd| {
                    let node = TypingDerivation::new(
                        TypingRule::Sub,
                        Mode::Check,
                        ctx,
                        e,
                        a,
                        vec![Premise::Typing(sd.clone()), Premise::Sub(subd)],
                    );
                    k(s, node)
                })
            })
        })
    }

    /// Establish a guard declaration: `x ⇐ A` for a program variable, or
    /// presence of `a : γ` in the context for an index variable.
    pub fn check_guard(&mut self, ctx: &Context, d: &Decl, depth: usize, k: &mut PremiseK<'_, 's>) -> bool {
        match d {
            Decl::VarTyping(x, t) => {
                if let Err(msg) = self.well_formed(ctx, t) {
                    self.fail(depth, FailureKind::IllFormed, format!("guard `{d}`: {msg}"));
                    return false;
                }
                if !ctx.has_term_var(x) {
                    self.fail_with(
                        depth,
                        FailureKind::GuardUnsatisfied,
                        format!("guard `{d}`: `{x}` is not in the context"),
                        Some(d.clone()),
                    );
                    return false;
                }
                let mut reached = false;
                let ok = self.check(ctx, &Term::Var(x.clone()), t, depth, &mut |s, p| {
                    reached = true;
                    k(s, Premise::Typing(p))
                });
                if !ok && !reached {
                    let shown = self.zonk_type(t);
                    self.fail_with(
                        depth,
                        FailureKind::GuardUnsatisfied,
                        format!("guard `{x} : {shown}` does not follow from the context {ctx}"),
                        Some(d.clone()),
                    );
                }
                ok
            }
            Decl::IndexSorting(a, sort) => {
                if ctx.index_sort(a) == Some(*sort) {
                    k(self, Premise::Sorting { var: a.clone(), sort: *sort })
                } else {
                    self.fail_with(
                        depth,
                        FailureKind::GuardUnsatisfied,
                        format!("guard `{d}`: no such index variable in the context"),
                        Some(d.clone()),
                    );
                    false
                }
            }
        }
    }

    /// Search for derivations of `ctx ⊢ e ⇒ A`; `k` receives each derivation
    /// (its type is `d.ty`).
    pub fn synth(&mut self, ctx: &Context, e: &Term, depth: usize, k: &mut CheckK<'_, 's>) -> bool {
        grow(|| self.synth_rules(ctx, e, depth, k))
    }

    fn synth_rules(&mut self, ctx: &Context, e: &Term, depth: usize, k: &mut CheckK<'_, 's>) -> bool {
        if !self.tick(depth) {
            return false;
        }
        let d1 = depth + 1;
        let e = &self.zonk_term(e);
        match e {
            Term::Var(x) => match ctx.lookup_var(x) {
                Some(t) => {
                    let t = self.zonk_type(t);
                    self.emit_closure(TypingDerivation::new(TypingRule::Var, Mode::Synth, ctx, e, &t, vec![]), depth, k)
                }
                None => {
                    self.fail(depth, FailureKind::UnboundVariable, format!("unbound variable `{x}`"));
                    false
                }
            },
            Term::PrimConst(p) => match self.sig.prims.get(p).cloned() {
                Some(t) => self.emit_closure(TypingDerivation::new(TypingRule::Prim, Mode::Synth, ctx, e, &t, vec![]), depth, k),
                None => {
                    self.fail(depth, FailureKind::UnboundVariable, format!("undeclared primitive `{p}`"));
                    false
                }
            },
            Term::App(f, arg) => self.synth(ctx, f, d1, &mut |s, fd| {
                let (fd, fty) = s.instantiate_pis(ctx, fd);
                match fty {
                    Type::Arrow(a1, a2) => s.attempt(|s| {
                        s.check(ctx, arg, &a1, d1, &mut |s, ad| {
                            let b = s.zonk_type(&a2);
                            let node = TypingDerivation::new(
                                TypingRule::ArrE,
                                Mode::Synth,
                                ctx,
                                e,
                                &b,
                                vec![Premise::Typing(fd.clone()), Premise::Typing(ad)],
                            );
                            s.emit_closure(node, d1, k)
                        })
                    }),
                    // The ∧E closure offers the conjuncts separately.
                    Type::Sect(..) => false,
                    other => {
                        s.fail(d1, FailureKind::Mismatch, format!("`{f}` has type {other}, which is not a function type"));
                        false
                    }
                }
            }),
            Term::RightAnno(e0, t) => {
                if let Err(msg) = self.well_formed(ctx, t) {
                    self.fail(depth, FailureKind::IllFormed, format!("annotation {t}: {msg}"));
                    return false;
                }
                self.check(ctx, e0, t, d1, &mut |s, p| {
                    let node = TypingDerivation::new(TypingRule::RightAnno, Mode::Synth, ctx, e, t, vec![Premise::Typing(p)]);
                    s.emit_closure(node, d1, k)
                })
            }
            Term::Guard(d, body) => self.check_guard(ctx, d, d1, &mut |s, gp| {
                s.synth(ctx, body, d1, &mut |s, bd| {
                    let t = bd.ty.clone();
                    let node = TypingDerivation::new(
                        TypingRule::LeftAnnoSynth,
                        Mode::Synth,
                        ctx,
                        e,
                        &t,
                        vec![gp.clone(), Premise::Typing(bd)],
                    );
                    k(s, node)
                })
            }),
            Term::Merge(l, r) => {
                for (i, branch) in [(1u8, l), (2u8, r)] {
                    let ok = self.attempt(|s| {
                        s.synth(ctx, branch, d1, &mut |s, p| {
                            let t = p.ty.clone();
                            k(s, TypingDerivation::new(TypingRule::MergeSynth(i), Mode::Synth, ctx, e, &t, vec![Premise::Typing(p)]))
                        })
                    });
                    if ok {
                        return true;
                    }
                }
                false
            }
            Term::SomeBind(b, sort, body) => {
                let m = self.metas.fresh(*sort, ctx, MetaOrigin::Some(b.clone()));
                let inst = IndexSubst::single(b, IndexExpr::Meta(m)).apply_term(body);
                self.synth(ctx, &inst, d1, &mut |s, p| {
                    let t = s.zonk_type(&p.ty);
                    if contains_meta(&t, m) {
                        s.fail(d1, FailureKind::UnresolvedSome, format!("`some {b}` is not determined by the synthesized type {t}"));
                        return false;
                    }
                    s.metas.default_if_unsolved(m);
                    let w = s.zonk_expr(&IndexExpr::Meta(m));
                    k(s, TypingDerivation::new(TypingRule::SomeSynth, Mode::Synth, ctx, e, &t, vec![Premise::Typing(p)]).with_witness(w))
                })
            }
            Term::CtxAnno(e0, typings) => self.synth_ctx_anno(ctx, e, e0, typings, depth, k),
            Term::Lam(..) | Term::UnitVal | Term::BigLam(..) => {
                self.fail(depth, FailureKind::NoSynthesisRule, format!("no synthesis rule for `{e}`; it can only be checked"));
                false
            }
        }
    }

    /// Instantiate leading Π-quantifiers of a synthesized function type.
    fn instantiate_pis(&mut self, ctx: &Context, d: TypingDerivation) -> (TypingDerivation, Type) {
        let mut d = d;
        let mut t = self.zonk_type(&d.ty);
        while let Type::Pi(x, sort, body) = t {
            let m = self.metas.fresh(sort, ctx, MetaOrigin::PiElim);
            let inst = IndexSubst::single(&x, IndexExpr::Meta(m)).apply_type(&body);
            let term = d.term.clone();
            d = TypingDerivation::new(TypingRule::PiESynth, Mode::Synth, ctx, &term, &inst, vec![Premise::Typing(d)])
                .with_witness(IndexExpr::Meta(m));
            t = inst;
        }
        (d, t)
    }

    /// Offer `d` and then its ∧E projections, depth-first.
    pub(crate) fn emit_closure(&mut self, d: TypingDerivation, depth: usize, k: &mut CheckK<'_, 's>) -> bool {
        if self.attempt(|s| k(s, d.clone())) {
            return true;
        }
        if let Type::Sect(a1, a2) = self.zonk_type(&d.ty) {
            for (i, ak) in [(1u8, a1), (2u8, a2)] {
                if !self.tick(depth) {
                    return false;
                }
                let node = TypingDerivation::new(TypingRule::SectE(i), Mode::Synth, &d.ctx, &d.term, &ak, vec![Premise::Typing(d.clone())]);
                if self.emit_closure(node, depth, k) {
                    return true;
                }
            }
        }
        false
    }
}

/// Result of checking a whole program.
#[derive(Clone, Debug)]
pub struct CheckOutcome {
    pub derivation: Option<TypingDerivation>,
    pub failure: Option<Failure>,
    pub stats: Stats,
}

impl CheckOutcome {
    pub fn accepted(&self) -> bool {
        self.derivation.is_some()
    }
}

fn finish<'s>(s: &Search<'s>, d: &TypingDerivation) -> TypingDerivation {
    d.apply(&s.defaulting_subst())
}

/// `ctx ⊢ e ⇐ a` in a fresh run.
pub fn check(sig: &Signature, ctx: &Context, e: &Term, a: &Type, opts: &Options) -> Result<TypingDerivation, Failure> {
    check_with_stats(sig, ctx, e, a, opts).0
}

pub fn check_with_stats(
    sig: &Signature,
    ctx: &Context,
    e: &Term,
    a: &Type,
    opts: &Options,
) -> (Result<TypingDerivation, Failure>, Stats) {
    let start = Instant::now();
    let mut s = Search::new(sig, opts.clone());
    let mut out = None;
    if let Err(msg) = s.well_formed(ctx, a) {
        s.fail(0, FailureKind::IllFormed, format!("goal {a}: {msg}"));
    } else {
        s.check(ctx, e, a, 0, &mut |s, d| {
            s.stats.unsolved_metas = s.metas.unsolved_count() as u64;
            out = Some(finish(s, &d));
            true
        });
    }
    s.stats.wall_ms = start.elapsed().as_millis() as u64;
    let stats = s.stats.clone();
    (out.ok_or_else(|| s.failure()), stats)
}

/// Every synthesized type (up to `limit` alternatives), in search order.
pub fn synth_all(
    sig: &Signature,
    ctx: &Context,
    e: &Term,
    opts: &Options,
    limit: usize,
) -> Result<Vec<(Type, TypingDerivation)>, Failure> {
    let mut s = Search::new(sig, opts.clone());
    let mut out: Vec<(Type, TypingDerivation)> = Vec::new();
    s.synth(ctx, e, 0, &mut |s, d| {
        let d = finish(s, &d);
        out.push((d.ty.clone(), d));
        out.len() >= limit
    });
    if out.is_empty() {
        Err(s.failure())
    } else {
        Ok(out)
    }
}

/// The first synthesized type.
pub fn synth(sig: &Signature, ctx: &Context, e: &Term, opts: &Options) -> Result<(Type, TypingDerivation), Failure> {
    synth_all(sig, ctx, e, opts, 1).map(|mut v| v.remove(0))
}

pub fn check_guard(sig: &Signature, ctx: &Context, d: &Decl, opts: &Options) -> Result<Premise, Failure> {
    let mut s = Search::new(sig, opts.clone());
    let mut out = None;
    s.check_guard(ctx, d, 0, &mut |s, p| {
        out = Some(p.apply(&s.defaulting_subst()));
        true
    });
    out.ok_or_else(|| s.failure())
}

/// Check `main` against the goal if one is given, otherwise synthesize.
pub fn typecheck_program(p: &Program, opts: &Options) -> CheckOutcome {
    let start = Instant::now();
    let mut s = Search::new(&p.signature, opts.clone());
    let ctx = Context::empty();
    let mut out = None;
    match &p.goal {
        Some(goal) => {
            if let Err(msg) = s.well_formed(&ctx, goal) {
                s.fail(0, FailureKind::IllFormed, format!("goal {goal}: {msg}"));
            } else {
                s.check(&ctx, &p.main, goal, 0, &mut |s, d| {
                    s.stats.unsolved_metas = s.metas.unsolved_count() as u64;
                    out = Some(finish(s, &d));
                    true
                });
            }
        }
        None => {
            s.synth(&ctx, &p.main, 0, &mut |s, d| {
                s.stats.unsolved_metas = s.metas.unsolved_count() as u64;
                out = Some(finish(s, &d));
                true
            });
        }
    }
    s.stats.wall_ms = start.elapsed().as_millis() as u64;
    let failure = if out.is_none() { Some(s.failure()) } else { None };
    CheckOutcome { derivation: out, failure, stats: s.stats.clone() }
}
