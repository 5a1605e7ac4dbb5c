//! Subtyping Γ ⊢ A ≤ B with backtracking derivation search.
//!
//! Rule order: reflexivity (α-equal types), ∧R, ΠR, datasort atoms, arrows,
//! indexed constructors, ∧L₁, ∧L₂, ΠL. ΠL introduces a metavariable that a
//! later index equation solves; one nothing constrains is set to `0`.

use std::fmt;

use crate::ast::{alpha_eq_type, fresh_name, Context, Decl, IndexExpr, IndexProp, IndexSubst, Signature, Type};
use crate::index_domain::{entails, solve_meta};
use crate::search::{grow, Failure, FailureKind, MetaOrigin, Options, Search};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SubRule {
    Refl,
    Atom,
    Arr,
    SectL1,
    SectL2,
    SectR,
    IndexLR,
    PiL,
    PiR,
}

impl SubRule {
    pub fn name(self) -> &'static str {
        match self {
            SubRule::Refl => "sub-refl",
            SubRule::Atom => "sub-atom",
            SubRule::Arr => "sub-arr",
            SubRule::SectL1 => "sub-∧L1",
            SubRule::SectL2 => "sub-∧L2",
            SubRule::SectR => "sub-∧R",
            SubRule::IndexLR => "sub-iLR",
            SubRule::PiL => "sub-ΠL",
            SubRule::PiR => "sub-ΠR",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubDerivation {
    pub rule: SubRule,
    pub ctx: Context,
    pub lhs: Type,
    pub rhs: Type,
    pub premises: Vec<SubDerivation>,
    /// Instantiation chosen by ΠL.
    pub witness: Option<IndexExpr>,
    /// The index equation discharged by sub-iLR.
    pub prop: Option<IndexProp>,
}

impl SubDerivation {
    fn leaf(rule: SubRule, ctx: &Context, lhs: &Type, rhs: &Type) -> Self {
        SubDerivation { rule, ctx: ctx.clone(), lhs: lhs.clone(), rhs: rhs.clone(), premises: vec![], witness: None, prop: None }
    }

    fn node(rule: SubRule, ctx: &Context, lhs: &Type, rhs: &Type, premises: Vec<SubDerivation>) -> Self {
        SubDerivation { premises, ..Self::leaf(rule, ctx, lhs, rhs) }
    }

    pub fn apply(&self, s: &IndexSubst) -> SubDerivation {
        SubDerivation {
            rule: self.rule,
            ctx: self.ctx.map_types(&mut |t| s.apply_type(t)),
            lhs: s.apply_type(&self.lhs),
            rhs: s.apply_type(&self.rhs),
            premises: self.premises.iter().map(|p| p.apply(s)).collect(),
            witness: self.witness.as_ref().map(|w| s.apply_expr(w)),
            prop: self.prop.as_ref().map(|p| s.apply_prop(p)),
        }
    }

    pub fn size(&self) -> usize {
        1 + self.premises.iter().map(|p| p.size()).sum::<usize>()
    }

    pub fn rules(&self) -> Vec<SubRule> {
        let mut out = vec![self.rule];
        for p in &self.premises {
            out.extend(p.rules());
        }
        out
    }

    pub fn write_indented(&self, f: &mut dyn fmt::Write, indent: usize) -> fmt::Result {
        write!(f, "{:indent$}[{}] {} ⊢ {} ≤ {}", "", self.rule.name(), self.ctx, self.lhs, self.rhs, indent = indent)?;
        if let Some(w) = &self.witness {
            write!(f, "  with {w}")?;
        }
        if let Some(p) = &self.prop {
            write!(f, "  by {p}")?;
        }
        writeln!(f)?;
        for p in &self.premises {
            p.write_indented(f, indent + 2)?;
        }
        Ok(())
    }
}

impl fmt::Display for SubDerivation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_indented(f, 0)
    }
}

pub type SubK<'k, 's> = dyn FnMut(&mut Search<'s>, SubDerivation) -> bool + 'k;

impl<'s> Search<'s> {
    /// Search for derivations of `ctx ⊢ a ≤ b`, calling `k` on each.
    pub fn sub(&mut self, ctx: &Context, a: &Type, b: &Type, depth: usize, k: &mut SubK<'_, 's>) -> bool {
        grow(|| self.sub_memo_wrap(ctx, a, b, depth, k))
    }

    fn sub_memo_wrap(&mut self, ctx: &Context, a: &Type, b: &Type, depth: usize, k: &mut SubK<'_, 's>) -> bool {
        self.stats.subtype_queries += 1;
        let a = self.zonk_type(a);
        let b = self.zonk_type(b);
        if !self.opts.memoize || a.has_meta() || b.has_meta() {
            return self.sub_rules(ctx, &a, &b, depth, k);
        }
        // Without metavariables the outcome cannot influence the caller
        // beyond success, so the first derivation is as good as any other.
        let key = (ctx.index_vars().map(|s| s.to_string()).collect::<Vec<_>>(), a.clone(), b.clone());
        if let Some(hit) = self.sub_memo.get(&key).cloned() {
            self.stats.memo_hits += 1;
            return match hit {
                Some(d) => k(self, d),
                None => false,
            };
        }
        let mark = self.metas.len();
        let limits = self.limit_hits;
        let mut found = None;
        self.sub_rules(ctx, &a, &b, depth, &mut |s, d| {
            found = Some(d.apply(&s.defaulting_subst()));
            true
        });
        self.metas.truncate(mark);
        if found.is_some() || self.limit_hits == limits {
            self.sub_memo.insert(key, found.clone());
        }
        match found {
            Some(d) => k(self, d),
            None => false,
        }
    }

    fn sub_rules(&mut self, ctx: &Context, a: &Type, b: &Type, depth: usize, k: &mut SubK<'_, 's>) -> bool {
        if !self.tick(depth) {
            return false;
        }
        let d1 = depth + 1;

        if alpha_eq_type(a, b) {
            return k(self, SubDerivation::leaf(SubRule::Refl, ctx, a, b));
        }

        if let Type::Sect(b1, b2) = b {
            return self.sub(ctx, a, b1, d1, &mut |s, p1| {
                s.sub(ctx, a, b2, d1, &mut |s, p2| {
                    k(s, SubDerivation::node(SubRule::SectR, ctx, a, b, vec![p1.clone(), p2]))
                })
            });
        }

        if let Type::Pi(x, sort, body) = b {
            let clash = ctx.has_index_var(x) || a.free_index_vars().contains(x);
            let (x2, body2) = if clash {
                let afv = a.free_index_vars();
                let bfv = body.free_index_vars();
                let x2 = fresh_name(x, &|c| ctx.has_index_var(c) || afv.contains(c) || bfv.contains(c));
                let body2 = IndexSubst::single(x, IndexExpr::Var(x2.clone())).apply_type(body);
                (x2, body2)
            } else {
                (x.clone(), (**body).clone())
            };
            let ctx2 = ctx.extended(Decl::IndexSorting(x2, *sort));
            let ok = self.attempt(|s| {
                s.sub(&ctx2, a, &body2, d1, &mut |s, p| k(s, SubDerivation::node(SubRule::PiR, ctx, a, b, vec![p])))
            });
            if ok {
                return true;
            }
        }

        match (a, b) {
            (Type::Atom(s1), Type::Atom(s2)) if self.sig.lattice.leq(s1, s2) => {
                if k(self, SubDerivation::leaf(SubRule::Atom, ctx, a, b)) {
                    return true;
                }
            }
            (Type::Arrow(a1, a2), Type::Arrow(b1, b2)) => {
                let ok = self.attempt(|s| {
                    s.sub(ctx, b1, a1, d1, &mut |s, p1| {
                        s.sub(ctx, a2, b2, d1, &mut |s, p2| {
                            k(s, SubDerivation::node(SubRule::Arr, ctx, a, b, vec![p1.clone(), p2]))
                        })
                    })
                });
                if ok {
                    return true;
                }
            }
            (Type::IndexedCon(c1, i1), Type::IndexedCon(c2, i2)) if c1 == c2 => {
                let ok = self.attempt(|s| match s.index_eq(ctx, i1, i2, depth) {
                    Some(prop) => {
                        let mut d = SubDerivation::leaf(SubRule::IndexLR, ctx, a, b);
                        d.prop = Some(prop);
                        k(s, d)
                    }
                    None => false,
                });
                if ok {
                    return true;
                }
            }
            _ => {}
        }

        if let Type::Sect(a1, a2) = a {
            for (rule, ak) in [(SubRule::SectL1, a1), (SubRule::SectL2, a2)] {
                let ok = self.attempt(|s| {
                    s.sub(ctx, ak, b, d1, &mut |s, p| k(s, SubDerivation::node(rule, ctx, a, b, vec![p])))
                });
                if ok {
                    return true;
                }
            }
        }

        if let Type::Pi(x, sort, body) = a {
            let ok = self.attempt(|s| {
                let m = s.metas.fresh(*sort, ctx, MetaOrigin::PiLeft);
                let inst = IndexSubst::single(x, IndexExpr::Meta(m)).apply_type(body);
                s.sub(ctx, &inst, b, d1, &mut |s, p| {
                    s.metas.default_if_unsolved(m);
                    let mut d = SubDerivation::node(SubRule::PiL, ctx, a, b, vec![p]);
                    d.witness = Some(s.zonk_expr(&IndexExpr::Meta(m)));
                    k(s, d)
                })
            });
            if ok {
                return true;
            }
        }

        if !matches!((a, b), (Type::Sect(..), _) | (Type::Pi(..), _) | (_, Type::Pi(..))) {
            self.fail(depth, FailureKind::Mismatch, format!("{a} is not a subtype of {b}"));
        }
        false
    }

    /// Establish `i ≐ j`, solving at most one metavariable. Returns the
    /// proposition as discharged.
    pub fn index_eq(&mut self, ctx: &Context, i: &IndexExpr, j: &IndexExpr, depth: usize) -> Option<IndexProp> {
        self.stats.entailment_queries += 1;
        let prop = IndexProp::Eq(self.zonk_expr(i), self.zonk_expr(j));
        let mut metas = std::collections::BTreeSet::new();
        prop.metas(&mut metas);
        if metas.is_empty() {
            if entails(ctx, &[], &prop) {
                return Some(prop);
            }
            self.fail(depth, FailureKind::Mismatch, format!("cannot show {prop}"));
            return None;
        }
        let m = *metas.iter().next().unwrap();
        let scope = self.metas.info(m).scope.clone();
        match solve_meta(&prop, &scope) {
            Ok((m, sol)) => {
                self.metas.solve(m, sol);
                let solved = IndexProp::Eq(self.zonk_expr(i), self.zonk_expr(j));
                if entails(ctx, &[], &solved) {
                    Some(solved)
                } else {
                    self.fail(depth, FailureKind::NoSolution, format!("solution does not satisfy {prop}"));
                    None
                }
            }
            Err(e) => {
                self.fail(depth, FailureKind::NoSolution, format!("{prop}: {e}"));
                None
            }
        }
    }

    /// Structural equality up to index equations, solving metavariables.
    pub fn types_match(&mut self, ctx: &Context, a: &Type, b: &Type, depth: usize) -> bool {
        let a = self.zonk_type(a);
        let b = self.zonk_type(b);
        match (&a, &b) {
            (Type::Unit, Type::Unit) => true,
            (Type::Atom(s), Type::Atom(t)) => s == t,
            (Type::Arrow(a1, a2), Type::Arrow(b1, b2)) | (Type::Sect(a1, a2), Type::Sect(b1, b2)) => {
                self.types_match(ctx, a1, b1, depth) && self.types_match(ctx, a2, b2, depth)
            }
            (Type::IndexedCon(c, i), Type::IndexedCon(d, j)) => c == d && self.index_eq(ctx, i, j, depth).is_some(),
            (Type::Pi(x, s, ab), Type::Pi(y, t, bb)) if s == t => {
                let afv = a.free_index_vars();
                let bfv = b.free_index_vars();
                let z = if x == y && !ctx.has_index_var(x) {
                    x.clone()
                } else {
                    fresh_name(x, &|c| ctx.has_index_var(c) || afv.contains(c) || bfv.contains(c))
                };
                let ab = IndexSubst::single(x, IndexExpr::Var(z.clone())).apply_type(ab);
                let bb = IndexSubst::single(y, IndexExpr::Var(z.clone())).apply_type(bb);
                self.types_match(&ctx.extended(Decl::IndexSorting(z, *s)), &ab, &bb, depth)
            }
            _ => false,
        }
    }
}

/// Decide `ctx ⊢ a ≤ b` in a fresh run.
pub fn subtype(sig: &Signature, ctx: &Context, a: &Type, b: &Type, opts: &Options) -> Result<SubDerivation, Failure> {
    let mut s = Search::new(sig, opts.clone());
    let mut out = None;
    s.sub(ctx, a, b, 0, &mut |s, d| {
        out = Some(d.apply(&s.defaulting_subst()));
        true
    });
    out.ok_or_else(|| s.failure())
}
