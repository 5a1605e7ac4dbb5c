//! Re-annotation of accepted programs: walk a derivation alongside the
//! source term and wrap subterms with annotations the derivation justifies.

use std::collections::{BTreeMap, BTreeSet};

use guardlang::ast::{fresh_name, Context, ContextualTyping, Decl, IndexExpr, IndexSubst, Term, Type};
use guardlang::typecheck::{Premise, TypingDerivation, TypingRule};

/// The outermost derivation node for one source position.
#[derive(Clone, Debug)]
pub struct Site {
    pub path: Vec<usize>,
    pub ctx: Context,
    pub ty: Type,
    /// How many separate derivation subtrees reach this position.
    pub instances: usize,
    /// Source names of the context's index variables that the term can
    /// mention (those bound by `idxfn`). Implicit Π binders have none.
    pub index_names: BTreeMap<String, String>,
    /// Source names of the context's term variables.
    pub var_names: BTreeMap<String, String>,
}

/// Child positions of each typing premise, or `None` when the premise is
/// not about a subterm (guard premises).
fn premise_paths(d: &TypingDerivation) -> Vec<Option<Vec<usize>>> {
    let n = d.premises.iter().filter(|p| matches!(p, Premise::Typing(_))).count();
    let same = || vec![Some(vec![]); n];
    match d.rule {
        TypingRule::ArrI | TypingRule::PiIExplicit | TypingRule::RightAnno | TypingRule::SomeCheck | TypingRule::SomeSynth => {
            vec![Some(vec![0])]
        }
        TypingRule::ArrE => vec![Some(vec![0]), Some(vec![1])],
        TypingRule::MergeCheck(k) | TypingRule::MergeSynth(k) => vec![Some(vec![k as usize - 1])],
        TypingRule::LeftAnnoCheck | TypingRule::LeftAnnoSynth => {
            if n == 2 {
                vec![None, Some(vec![0])]
            } else {
                vec![Some(vec![0])]
            }
        }
        TypingRule::CtxAnno(_) => vec![Some(vec![0])],
        _ => same(),
    }
}

#[derive(Clone, Default)]
struct Names {
    index: BTreeMap<String, String>,
    vars: BTreeMap<String, String>,
}

fn walk(d: &TypingDerivation, path: Vec<usize>, fresh_instance: bool, names: &Names, out: &mut BTreeMap<Vec<usize>, Site>) {
    if fresh_instance {
        match out.get_mut(&path) {
            Some(s) => s.instances += 1,
            None => {
                let site = Site {
                    path: path.clone(),
                    ctx: d.ctx.clone(),
                    ty: d.ty.clone(),
                    instances: 1,
                    index_names: names.index.clone(),
                    var_names: names.vars.clone(),
                };
                out.insert(path.clone(), site);
            }
        }
    }
    let paths = premise_paths(d);
    for (q, p) in d.typing_premises().zip(paths) {
        let Some(step) = p else { continue };
        let mut inner = names.clone();
        if q.ctx.len() == d.ctx.len() + 1 {
            match (&d.term, q.ctx.decls().last()) {
                (Term::BigLam(b, _, _), Some(Decl::IndexSorting(b2, _))) => {
                    inner.index.insert(b2.clone(), b.clone());
                }
                (Term::Lam(x, _), Some(Decl::VarTyping(x2, _))) => {
                    inner.vars.insert(x2.clone(), x.clone());
                }
                _ => {}
            }
        }
        let mut child = path.clone();
        child.extend(step.iter().copied());
        // A premise at the same position continues the same instance.
        walk(q, child, !step.is_empty(), &inner, out);
    }
}

/// Positions of the source term reached by the derivation.
pub fn sites(d: &TypingDerivation) -> Vec<Site> {
    let mut out = BTreeMap::new();
    walk(d, vec![], true, &Names::default(), &mut out);
    out.into_values().collect()
}

fn rename_index(names: &BTreeMap<String, String>, t: &Type) -> Type {
    let mut s = IndexSubst::new();
    for (from, to) in names {
        s.insert(guardlang::ast::IndexAtom::Var(from.clone()), IndexExpr::var(to.clone()));
    }
    s.apply_type(t)
}

impl Site {
    fn hidden(&self, t: &Type) -> BTreeSet<String> {
        t.free_index_vars().into_iter().filter(|v| !self.index_names.contains_key(v)).collect()
    }

    /// `t` in source names, when every index variable in it has one.
    fn source_type(&self, t: &Type) -> Option<Type> {
        self.hidden(t).is_empty().then(|| rename_index(&self.index_names, t))
    }

    fn source_decl(&self, d: &Decl) -> Option<Decl> {
        match d {
            Decl::VarTyping(x, t) => Some(Decl::VarTyping(self.var_names.get(x)?.clone(), self.source_type(t)?)),
            Decl::IndexSorting(a, s) => Some(Decl::IndexSorting(self.index_names.get(a)?.clone(), *s)),
        }
    }

    /// A contextual typing `Δ ⊢ goal` in source names. Index variables
    /// without a source name become declarations of Δ; each must be pinned
    /// by a term variable of Δ whose type mentions it, so that context
    /// subsumption determines it. `wanted` names term variables to include.
    fn generalized(&self, goal: &Type, wanted: &[String]) -> Option<ContextualTyping> {
        let var_typings: Vec<(String, Type)> = self
            .ctx
            .decls()
            .iter()
            .filter_map(|d| match d {
                Decl::VarTyping(x, t) => Some((x.clone(), t.clone())),
                _ => None,
            })
            .collect();
        let mut hidden = self.hidden(goal);
        let mut chosen: BTreeSet<String> = wanted.iter().cloned().collect();
        loop {
            let before = (hidden.len(), chosen.len());
            for (x, t) in &var_typings {
                let h = self.hidden(t);
                if chosen.contains(x) || !h.is_disjoint(&hidden) {
                    chosen.insert(x.clone());
                    hidden.extend(h);
                }
            }
            if (hidden.len(), chosen.len()) == before {
                break;
            }
        }
        let pinned: BTreeSet<String> =
            var_typings.iter().filter(|(x, _)| chosen.contains(x)).flat_map(|(_, t)| self.hidden(t)).collect();
        if !hidden.is_subset(&pinned) {
            return None;
        }
        let taken: BTreeSet<String> = self.ctx.decls().iter().map(|d| d.name().to_string()).chain(self.index_names.values().cloned()).collect();
        let mut names = self.index_names.clone();
        let mut decls = Vec::new();
        let mut used = taken;
        for d in self.ctx.decls() {
            if let Decl::IndexSorting(a, s) = d {
                if hidden.contains(a) {
                    let k = fresh_name("k", &|c| used.contains(c));
                    used.insert(k.clone());
                    names.insert(a.clone(), k.clone());
                    decls.push(Decl::IndexSorting(k, *s));
                }
            }
        }
        for (x, t) in var_typings.iter().filter(|(x, _)| chosen.contains(x)) {
            decls.push(Decl::VarTyping(self.var_names.get(x)?.clone(), rename_index(&names, t)));
        }
        Some(ContextualTyping { decls, goal: rename_index(&names, goal) })
    }

    /// The subterm with its derived type attached: a plain annotation when
    /// the type can be written at this position, else a contextual one.
    fn annotated(&self, sub: &Term) -> Option<(String, Term)> {
        match self.source_type(&self.ty) {
            Some(b) => Some((format!("annotation : {b}"), Term::anno(sub.clone(), b))),
            None => {
                let t = self.generalized(&self.ty, &[])?;
                Some((format!("contextual annotation {t}"), Term::ctx_anno(sub.clone(), vec![t])))
            }
        }
    }

    /// The subterm guarded by the context's last term variable declaration,
    /// or an equivalent contextual annotation when its type has index
    /// variables without source names.
    fn guarded(&self, sub: &Term) -> Option<(String, Term)> {
        let d = self.ctx.decls().iter().rev().find(|d| matches!(d, Decl::VarTyping(..)))?;
        match self.source_decl(d) {
            Some(d) => Some((format!("guard {d}"), Term::guard(d, sub.clone()))),
            None => {
                let t = self.generalized(&self.ty, &[d.name().to_string()])?;
                Some((format!("contextual annotation {t}"), Term::ctx_anno(sub.clone(), vec![t])))
            }
        }
    }
}

/// Re-annotated variants of `main` at `site` with a description of each,
/// and the number of variants that cannot be written at this position.
pub fn variants(main: &Term, site: &Site) -> (Vec<(String, Term)>, usize) {
    let Some(sub) = main.at_path(&site.path) else { return (vec![], 0) };
    let mut out = Vec::new();
    let mut skipped = 0;
    let mut put = |v: Option<(String, Term)>| match v {
        Some((what, t)) => {
            let mut m = main.clone();
            if m.replace_at(&site.path, t) {
                out.push((what, m));
            }
        }
        None => skipped += 1,
    };
    put(Some(("merge duplicate".into(), Term::merge(sub.clone(), sub.clone()))));
    if site.instances == 1 {
        let ann = site.annotated(sub);
        put(ann.clone().map(|(what, t)| (format!("merge with {what}"), Term::merge(t, sub.clone()))));
        put(ann);
        if site.ctx.decls().iter().any(|d| matches!(d, Decl::VarTyping(..))) {
            put(site.guarded(sub));
        }
    }
    (out, skipped)
}
