//! Random generators: type-directed program terms over the corpus header,
//! contextual annotations, subtyping triples and linear index queries.

use guardlang::ast::{subst_index_in_type, Context, ContextualTyping, Decl, IndexExpr, IndexProp, IndexSort, Signature, Term, Type};
use guardlang::eval::erase;
use guardlang::search::Options;
use guardlang::subtype::subtype;
use guardlang::typecheck::check;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::oracle::index_equiv;

pub struct TermGen<'s> {
    pub sig: &'s Signature,
    pub rng: ChaCha8Rng,
    /// Probability of wrapping a generated subterm in a contextual annotation.
    pub ctx_anno_rate: f64,
    counter: usize,
}

fn base_types() -> Vec<Type> {
    vec![Type::atom("odd"), Type::atom("even"), Type::atom("bits"), Type::Unit]
}

fn small_opts() -> Options {
    Options { max_steps: 20_000, ..Options::default() }
}

impl<'s> TermGen<'s> {
    pub fn new(sig: &'s Signature, rng: ChaCha8Rng) -> Self {
        TermGen { sig, rng, ctx_anno_rate: 0.0, counter: 0 }
    }

    fn fresh(&mut self, stem: &str) -> String {
        self.counter += 1;
        format!("{stem}{}", self.counter)
    }

    fn index(&mut self, ctx: &Context) -> IndexExpr {
        let vars: Vec<String> = ctx.index_vars().map(|s| s.to_string()).collect();
        match (self.rng.gen_range(0..3), vars.choose(&mut self.rng)) {
            (0, _) | (_, None) => IndexExpr::Lit(self.rng.gen_range(0..3)),
            (1, Some(v)) => IndexExpr::var(v.clone()),
            (_, Some(v)) => IndexExpr::add(IndexExpr::var(v.clone()), IndexExpr::Lit(self.rng.gen_range(1..3))),
        }
    }

    /// A goal type for a closed program.
    pub fn goal(&mut self) -> Type {
        let bases = base_types();
        let b = |g: &mut Self| bases.choose(&mut g.rng).unwrap().clone();
        match self.rng.gen_range(0..8) {
            0 | 1 => b(self),
            2 => Type::con("list", IndexExpr::Lit(self.rng.gen_range(0..3))),
            3 => Type::arrow(b(self), b(self)),
            4 => {
                let (x, y) = (b(self), b(self));
                Type::sect(Type::arrow(Type::atom("odd"), x), Type::arrow(Type::atom("even"), y))
            }
            5 => {
                let k = self.rng.gen_range(0..2);
                let n = IndexExpr::var("n");
                let out = if k == 0 { n.clone() } else { IndexExpr::add(n.clone(), IndexExpr::Lit(1)) };
                Type::pi("n", IndexSort::Int, Type::arrow(Type::con("list", n), Type::con("list", out)))
            }
            6 => Type::arrow(Type::arrow(Type::atom("odd"), b(self)), b(self)),
            _ => Type::pi("n", IndexSort::Int, Type::arrow(Type::con("list", IndexExpr::var("n")), b(self))),
        }
    }

    fn checks(&self, ctx: &Context, e: &Term, a: &Type) -> bool {
        check(self.sig, ctx, e, a, &small_opts()).is_ok()
    }

    fn below(&self, ctx: &Context, a: &Type, b: &Type) -> bool {
        subtype(self.sig, ctx, a, b, &small_opts()).is_ok()
    }

    /// A term intended to check against `a` in `ctx`.
    pub fn term(&mut self, ctx: &Context, a: &Type, size: usize) -> Option<Term> {
        for _ in 0..4 {
            if let Some(t) = self.term_once(ctx, a, size) {
                return Some(self.maybe_ctx_anno(ctx, a, t, size));
            }
        }
        None
    }

    fn term_once(&mut self, ctx: &Context, a: &Type, size: usize) -> Option<Term> {
        let mut choices: Vec<u8> = vec![0, 1];
        if size > 0 {
            choices.extend([2, 3, 4, 5, 6, 7]);
            choices.extend([2, 2]);
        }
        choices.shuffle(&mut self.rng);
        for c in choices {
            let r = match c {
                0 => self.by_type(ctx, a, size),
                1 => self.from_context(ctx, a, size),
                2 => self.by_type(ctx, a, size.saturating_sub(1)),
                3 => self.redex(ctx, a, size - 1),
                4 => self.term(ctx, a, size - 1).map(|t| Term::anno(t, a.clone())),
                5 => self.guarded(ctx, a, size - 1),
                6 => self.term(ctx, a, size - 1).map(|t| Term::some(self.fresh("b"), IndexSort::Int, t)),
                _ => self.duplicated(ctx, a, size - 1),
            };
            if r.is_some() {
                return r;
            }
        }
        None
    }

    fn by_type(&mut self, ctx: &Context, a: &Type, size: usize) -> Option<Term> {
        let sub = size.saturating_sub(1);
        match a {
            Type::Unit => Some(Term::UnitVal),
            Type::Atom(s) => match (s.as_str(), self.rng.gen_bool(0.5) && size > 0) {
                ("odd", false) => Some(Term::prim("one")),
                ("even", false) => Some(Term::prim("zero")),
                ("odd", true) => self.term(ctx, &Type::atom("even"), sub).map(|t| Term::app(Term::prim("snoc1"), t)),
                ("even", true) => self.term(ctx, &Type::atom("odd"), sub).map(|t| Term::app(Term::prim("snoc1"), t)),
                ("bits", _) => {
                    let pick = if self.rng.gen_bool(0.5) { "odd" } else { "even" };
                    self.term(ctx, &Type::atom(pick), size)
                }
                _ => None,
            },
            Type::IndexedCon(c, i) if c == "list" => {
                let opts = if size == 0 { 1 } else { 3 };
                match self.rng.gen_range(0..opts) {
                    0 if index_equiv(i, &IndexExpr::Lit(0)) => Some(Term::prim("nil")),
                    0 => self.from_context(ctx, a, 0),
                    1 => self.term(ctx, a, sub).map(|t| Term::app(Term::prim("idcast"), t)),
                    _ => {
                        let prev = IndexExpr::sub(i.clone(), IndexExpr::Lit(1));
                        let lit = prev.eval(&|_| None);
                        if lit.is_some_and(|k| k < 0) {
                            return None;
                        }
                        self.term(ctx, &Type::con("list", prev), sub).map(|t| Term::app(Term::prim("cons"), t))
                    }
                }
            }
            Type::Arrow(a1, a2) => {
                let x = self.fresh("x");
                let inner = ctx.extended(Decl::VarTyping(x.clone(), (**a1).clone()));
                self.term(&inner, a2, sub).map(|b| Term::lam(x, b))
            }
            Type::Sect(a1, a2) => {
                let t = self.term(ctx, a1, size)?;
                if self.checks(ctx, &t, a) {
                    return Some(t);
                }
                let u = self.term(ctx, a2, size)?;
                match (erase(&t), erase(&u)) {
                    (Ok(x), Ok(y)) if guardlang::ast::alpha_eq_term(&x, &y) => Some(Term::merge(t, u)),
                    _ => None,
                }
            }
            Type::Pi(n, sort, body) => {
                if !ctx.has_index_var(n) && self.rng.gen_bool(0.5) {
                    // An implicit binder is invisible to the term, so a body
                    // that names it needs an explicit one.
                    let inner = ctx.extended(Decl::IndexSorting(n.clone(), *sort));
                    let t = self.term(&inner, body, size)?;
                    Some(if t.free_index_vars().contains(n) { Term::big_lam(n.clone(), *sort, t) } else { t })
                } else {
                    let m = self.fresh("m");
                    let inner = ctx.extended(Decl::IndexSorting(m.clone(), *sort));
                    let body = subst_index_in_type(&IndexExpr::var(m.clone()), n, body);
                    self.term(&inner, &body, size).map(|t| Term::big_lam(m, *sort, t))
                }
            }
            _ => None,
        }
    }

    /// A variable, or an application of a function variable, whose type fits.
    fn from_context(&mut self, ctx: &Context, a: &Type, size: usize) -> Option<Term> {
        let mut vars: Vec<(String, Type)> = ctx
            .decls()
            .iter()
            .filter_map(|d| match d {
                Decl::VarTyping(x, t) => Some((x.clone(), t.clone())),
                _ => None,
            })
            .collect();
        vars.shuffle(&mut self.rng);
        for (x, t) in vars {
            if self.below(ctx, &t, a) {
                return Some(Term::var(x));
            }
            if size > 0 {
                for (dom, cod) in arrows(&t) {
                    if self.below(ctx, &cod, a) {
                        if let Some(arg) = self.term(ctx, &dom, size - 1) {
                            return Some(Term::app(Term::var(x), arg));
                        }
                    }
                }
            }
        }
        None
    }

    fn redex(&mut self, ctx: &Context, a: &Type, size: usize) -> Option<Term> {
        let dom = base_types().choose(&mut self.rng).unwrap().clone();
        let x = self.fresh("x");
        let inner = ctx.extended(Decl::VarTyping(x.clone(), dom.clone()));
        let body = self.term(&inner, a, size)?;
        let arg = self.term(ctx, &dom, size)?;
        Some(Term::app(Term::anno(Term::lam(x, body), Type::arrow(dom, a.clone())), arg))
    }

    fn guarded(&mut self, ctx: &Context, a: &Type, size: usize) -> Option<Term> {
        let d = ctx.decls().choose(&mut self.rng)?.clone();
        let d = match d {
            Decl::VarTyping(x, Type::Atom(s)) if s != "bits" && self.rng.gen_bool(0.3) => Decl::VarTyping(x, Type::atom("bits")),
            d => d,
        };
        self.term(ctx, a, size).map(|t| Term::guard(d, t))
    }

    fn duplicated(&mut self, ctx: &Context, a: &Type, size: usize) -> Option<Term> {
        let t = self.term(ctx, a, size)?;
        let u = match self.rng.gen_range(0..3) {
            0 => t.clone(),
            1 => Term::anno(t.clone(), a.clone()),
            _ => Term::some(self.fresh("b"), IndexSort::Int, t.clone()),
        };
        Some(if self.rng.gen_bool(0.5) { Term::merge(t, u) } else { Term::merge(u, t) })
    }

    fn maybe_ctx_anno(&mut self, ctx: &Context, a: &Type, t: Term, size: usize) -> Term {
        if size == 0 || !self.rng.gen_bool(self.ctx_anno_rate) {
            return t;
        }
        self.ctx_anno(ctx, a, t)
    }

    /// Wrap `t` (which should check against `a` in `ctx`) in a contextual
    /// annotation with 1-3 typings, one of them built to fit.
    pub fn ctx_anno(&mut self, ctx: &Context, a: &Type, t: Term) -> Term {
        let n = *[1, 1, 2, 2, 3].choose(&mut self.rng).unwrap();
        let good = self.rng.gen_range(0..n);
        let typings = (0..n).map(|k| if k == good { self.fitting_typing(ctx, a) } else { self.random_typing(ctx, a) }).collect();
        Term::ctx_anno(t, typings)
    }

    fn fitting_typing(&mut self, ctx: &Context, a: &Type) -> ContextualTyping {
        let mut decls = Vec::new();
        let mut goal = a.clone();
        let mut later: Vec<Decl> = ctx.decls().to_vec();
        later.shuffle(&mut self.rng);
        let mut chosen: Vec<Decl> = later.into_iter().take(3).collect();
        // Keep context order so index sortings precede their uses.
        chosen.sort_by_key(|d| ctx.decls().iter().position(|e| e == d));
        let mut renames: Vec<(String, String)> = Vec::new();
        for d in chosen {
            let rename = |t: &Type, rs: &[(String, String)]| {
                rs.iter().fold(t.clone(), |acc, (from, to)| subst_index_in_type(&IndexExpr::var(to.clone()), from, &acc))
            };
            match d {
                Decl::IndexSorting(v, s) => {
                    if self.rng.gen_bool(0.7) {
                        let w = self.fresh("k");
                        renames.push((v, w.clone()));
                        decls.push(Decl::IndexSorting(w, s));
                    }
                }
                Decl::VarTyping(x, t) => {
                    let t = match t {
                        Type::Atom(s) if s != "bits" && self.rng.gen_bool(0.3) => Type::atom("bits"),
                        t => t,
                    };
                    decls.push(Decl::VarTyping(x, rename(&t, &renames)));
                }
            }
        }
        for (from, to) in &renames {
            goal = subst_index_in_type(&IndexExpr::var(to.clone()), from, &goal);
        }
        ContextualTyping { decls, goal }
    }

    fn random_typing(&mut self, ctx: &Context, a: &Type) -> ContextualTyping {
        let mut t = self.fitting_typing(ctx, a);
        match self.rng.gen_range(0..3) {
            0 => t.goal = base_types().choose(&mut self.rng).unwrap().clone(),
            1 => {
                for d in t.decls.iter_mut() {
                    if let Decl::VarTyping(_, ty @ Type::Atom(_)) = d {
                        *ty = if *ty == Type::atom("odd") { Type::atom("even") } else { Type::atom("odd") };
                    }
                }
            }
            _ => {}
        }
        t
    }
}

/// Every arrow reachable by ∧-projections.
fn arrows(t: &Type) -> Vec<(Type, Type)> {
    match t {
        Type::Arrow(a, b) => vec![((**a).clone(), (**b).clone())],
        Type::Sect(a, b) => {
            let mut v = arrows(a);
            v.extend(arrows(b));
            v
        }
        _ => vec![],
    }
}

/// Types of depth at most `depth` over the corpus datasorts, `unit` and
/// `list`, with index variables from `ivars`.
pub fn random_type(rng: &mut ChaCha8Rng, depth: usize, ivars: &[String], allow_pi: bool) -> Type {
    let leaf = |rng: &mut ChaCha8Rng| match rng.gen_range(0..5) {
        0 => Type::atom("odd"),
        1 => Type::atom("even"),
        2 => Type::atom("bits"),
        3 => Type::Unit,
        _ => {
            let i = match ivars.choose(rng) {
                Some(v) if rng.gen_bool(0.6) => IndexExpr::var(v.clone()),
                _ => IndexExpr::Lit(rng.gen_range(0..2)),
            };
            Type::con("list", i)
        }
    };
    if depth <= 1 {
        return leaf(rng);
    }
    match rng.gen_range(0..if allow_pi { 5 } else { 4 }) {
        0 => leaf(rng),
        1 => Type::arrow(random_type(rng, depth - 1, ivars, allow_pi), random_type(rng, depth - 1, ivars, allow_pi)),
        2 | 3 => Type::sect(random_type(rng, depth - 1, ivars, allow_pi), random_type(rng, depth - 1, ivars, allow_pi)),
        _ => {
            let v = format!("p{}", ivars.len());
            let mut inner = ivars.to_vec();
            inner.push(v.clone());
            Type::pi(v, IndexSort::Int, random_type(rng, depth - 1, &inner, allow_pi))
        }
    }
}

fn random_linear(rng: &mut ChaCha8Rng, vars: &[&str]) -> IndexExpr {
    let mut e = IndexExpr::Lit(rng.gen_range(-5..=5));
    for v in vars {
        let k = rng.gen_range(-3..=3);
        if k != 0 {
            e = IndexExpr::add(e, IndexExpr::mul(k, IndexExpr::var(*v)));
        }
    }
    e
}

/// A linear query over at most three variables.
pub fn random_query(rng: &mut ChaCha8Rng, eq_only: bool) -> (Vec<IndexProp>, IndexProp) {
    let all = ["a", "b", "c"];
    let nv = rng.gen_range(1..=3);
    let vars = &all[..nv];
    let prop = |rng: &mut ChaCha8Rng| {
        let l = random_linear(rng, vars);
        let r = random_linear(rng, vars);
        match if eq_only { 0 } else { rng.gen_range(0..3) } {
            0 => IndexProp::Eq(l, r),
            1 => IndexProp::Le(l, r),
            _ => IndexProp::Lt(l, r),
        }
    };
    let nh = rng.gen_range(0..=3);
    let hyps: Vec<IndexProp> = (0..nh).map(|_| prop(rng)).collect();
    // Bias some goals towards consequences of a hypothesis.
    let goal = match hyps.choose(rng) {
        Some(h) if rng.gen_bool(0.4) => {
            let shift = random_linear(rng, vars);
            let k = IndexExpr::Lit(rng.gen_range(0..3));
            match h {
                IndexProp::Eq(l, r) => IndexProp::Eq(IndexExpr::add(r.clone(), shift.clone()), IndexExpr::add(l.clone(), shift)),
                IndexProp::Le(l, r) => IndexProp::Le(IndexExpr::add(l.clone(), shift.clone()), IndexExpr::add(IndexExpr::add(r.clone(), shift), k)),
                IndexProp::Lt(l, r) => IndexProp::Le(IndexExpr::add(l.clone(), k), IndexExpr::add(r.clone(), IndexExpr::Lit(2))),
            }
        }
        _ => prop(rng),
    };
    (hyps, goal)
}
