//! The index constraint domain: sorting of index expressions, linear normal
//! forms, entailment by Fourier–Motzkin elimination, and single-metavariable
//! equation solving.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::ast::{Context, IndexAtom, IndexExpr, IndexProp, IndexSort, MetaId};

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum IndexError {
    #[error("unbound index variable `{0}`")]
    UnboundIndexVariable(String),
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum SolveError {
    #[error("no solution: {0}")]
    NoSolution(String),
}

/// `Σ coeff·atom + constant`, with no zero coefficients stored.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LinearForm {
    pub coeffs: BTreeMap<IndexAtom, BigInt>,
    pub constant: BigInt,
}

impl LinearForm {
    pub fn constant(c: impl Into<BigInt>) -> Self {
        LinearForm { coeffs: BTreeMap::new(), constant: c.into() }
    }

    pub fn atom(a: IndexAtom) -> Self {
        let mut coeffs = BTreeMap::new();
        coeffs.insert(a, BigInt::one());
        LinearForm { coeffs, constant: BigInt::zero() }
    }

    pub fn is_ground(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn add(&self, other: &LinearForm) -> LinearForm {
        let mut out = self.clone();
        for (a, c) in &other.coeffs {
            let e = out.coeffs.entry(a.clone()).or_insert_with(BigInt::zero);
            *e += c;
            if e.is_zero() {
                out.coeffs.remove(a);
            }
        }
        out.constant += &other.constant;
        out
    }

    pub fn scale(&self, k: &BigInt) -> LinearForm {
        if k.is_zero() {
            return LinearForm::default();
        }
        LinearForm {
            coeffs: self.coeffs.iter().map(|(a, c)| (a.clone(), c * k)).collect(),
            constant: &self.constant * k,
        }
    }

    pub fn sub(&self, other: &LinearForm) -> LinearForm {
        self.add(&other.scale(&-BigInt::one()))
    }

    pub fn coeff(&self, a: &IndexAtom) -> BigInt {
        self.coeffs.get(a).cloned().unwrap_or_else(BigInt::zero)
    }

    pub fn eval(&self, env: &dyn Fn(&IndexAtom) -> i64) -> BigInt {
        self.coeffs.iter().fold(self.constant.clone(), |acc, (a, c)| acc + c * BigInt::from(env(a)))
    }

    /// Back to surface syntax; `None` if a coefficient does not fit in i64.
    pub fn to_expr(&self) -> Option<IndexExpr> {
        let term = |a: &IndexAtom, k: i64| {
            let base = match a {
                IndexAtom::Var(v) => IndexExpr::Var(v.clone()),
                IndexAtom::Meta(m) => IndexExpr::Meta(*m),
            };
            if k == 1 {
                base
            } else {
                IndexExpr::mul(k, base)
            }
        };
        let mut acc: Option<IndexExpr> = None;
        for (a, c) in &self.coeffs {
            let k = c.to_i64()?;
            acc = Some(match acc {
                None => term(a, k),
                Some(e) if k < 0 => IndexExpr::sub(e, term(a, k.checked_neg()?)),
                Some(e) => IndexExpr::add(e, term(a, k)),
            });
        }
        let c = self.constant.to_i64()?;
        Some(match acc {
            None => IndexExpr::Lit(c),
            Some(e) if c > 0 => IndexExpr::add(e, IndexExpr::Lit(c)),
            Some(e) if c < 0 => IndexExpr::sub(e, IndexExpr::Lit(c.checked_neg()?)),
            Some(e) => e,
        })
    }
}

/// Γ ⊢ i : γ. Metavariables are taken to be registered at sort `int`.
pub fn sort_of(ctx: &Context, i: &IndexExpr) -> Result<IndexSort, IndexError> {
    let mut vars = BTreeSet::new();
    i.free_vars(&mut vars);
    for a in vars {
        if ctx.index_sort(&a) != Some(IndexSort::Int) {
            return Err(IndexError::UnboundIndexVariable(a));
        }
    }
    Ok(IndexSort::Int)
}

pub fn normalize(i: &IndexExpr) -> LinearForm {
    match i {
        IndexExpr::Var(a) => LinearForm::atom(IndexAtom::Var(a.clone())),
        IndexExpr::Meta(m) => LinearForm::atom(IndexAtom::Meta(*m)),
        IndexExpr::Lit(n) => LinearForm::constant(*n),
        IndexExpr::Add(l, r) => normalize(l).add(&normalize(r)),
        IndexExpr::Sub(l, r) => normalize(l).sub(&normalize(r)),
        IndexExpr::Mul(k, e) => normalize(e).scale(&BigInt::from(*k)),
    }
}

/// A constraint `form ≤ 0`.
type Le0 = LinearForm;

fn hyp_constraints(p: &IndexProp) -> Vec<Le0> {
    match p {
        IndexProp::Eq(l, r) => {
            let d = normalize(l).sub(&normalize(r));
            vec![d.clone(), d.scale(&-BigInt::one())]
        }
        IndexProp::Le(l, r) => vec![normalize(l).sub(&normalize(r))],
        IndexProp::Lt(l, r) => vec![normalize(l).sub(&normalize(r)).add(&LinearForm::constant(1))],
    }
}

/// Each inner vector is one disjunct of ¬goal.
fn negated_goal(p: &IndexProp) -> Vec<Vec<Le0>> {
    match p {
        IndexProp::Eq(l, r) => {
            let d = normalize(l).sub(&normalize(r));
            let one = LinearForm::constant(1);
            // l < r  or  l > r
            vec![vec![d.add(&one)], vec![d.scale(&-BigInt::one()).add(&one)]]
        }
        // l > r  ⇔  r - l + 1 ≤ 0
        IndexProp::Le(l, r) => vec![vec![normalize(r).sub(&normalize(l)).add(&LinearForm::constant(1))]],
        // l ≥ r  ⇔  r - l ≤ 0
        IndexProp::Lt(l, r) => vec![vec![normalize(r).sub(&normalize(l))]],
    }
}

/// Divide by the gcd of the coefficients, rounding the constant up; sound
/// over the integers.
fn tighten(c: &Le0) -> Le0 {
    let g = c.coeffs.values().fold(BigInt::zero(), |g, k| g.gcd(k));
    if g.is_zero() || g.is_one() {
        return c.clone();
    }
    LinearForm {
        coeffs: c.coeffs.iter().map(|(a, k)| (a.clone(), k / &g)).collect(),
        constant: c.constant.div_ceil(&g),
    }
}

/// True iff the conjunction of `form ≤ 0` constraints has no solution.
pub fn fm_unsat(constraints: Vec<Le0>) -> bool {
    let mut cs: BTreeSet<Le0> = constraints.iter().map(tighten).collect();
    loop {
        let mut open = BTreeSet::new();
        for c in cs {
            if c.is_ground() {
                if c.constant.is_positive() {
                    return true;
                }
            } else {
                open.insert(c);
            }
        }
        let Some(x) = open.iter().next().and_then(|c| c.coeffs.keys().next().cloned()) else {
            return false;
        };
        let (mut pos, mut neg, mut rest) = (Vec::new(), Vec::new(), BTreeSet::new());
        for c in open {
            let k = c.coeff(&x);
            if k.is_positive() {
                pos.push(c);
            } else if k.is_negative() {
                neg.push(c);
            } else {
                rest.insert(c);
            }
        }
        for p in &pos {
            let kp = p.coeff(&x);
            for n in &neg {
                let kn = -n.coeff(&x);
                rest.insert(tighten(&p.scale(&kn).add(&n.scale(&kp))));
            }
        }
        cs = rest;
    }
}

/// Γ; hyps ⊢ goal. Metavariables, if any, are treated as variables.
pub fn entails(_ctx: &Context, hyps: &[IndexProp], goal: &IndexProp) -> bool {
    let base: Vec<Le0> = hyps.iter().flat_map(hyp_constraints).collect();
    negated_goal(goal).into_iter().all(|disjunct| {
        let mut sys = base.clone();
        sys.extend(disjunct);
        fm_unsat(sys)
    })
}

/// Solve an equation with exactly one metavariable. `scope` lists the index
/// variables visible where the metavariable was introduced.
pub fn solve_meta(constraint: &IndexProp, scope: &BTreeSet<String>) -> Result<(MetaId, IndexExpr), SolveError> {
    let (l, r) = match constraint {
        IndexProp::Eq(l, r) => (l, r),
        _ => return Err(SolveError::NoSolution("only equations determine a metavariable".into())),
    };
    let form = normalize(l).sub(&normalize(r));
    let metas: Vec<MetaId> = form
        .coeffs
        .keys()
        .filter_map(|a| match a {
            IndexAtom::Meta(m) => Some(*m),
            _ => None,
        })
        .collect();
    let m = match metas.as_slice() {
        [m] => *m,
        [] => return Err(SolveError::NoSolution("no metavariable occurs".into())),
        _ => return Err(SolveError::NoSolution("more than one metavariable occurs".into())),
    };
    let c = form.coeff(&IndexAtom::Meta(m));
    let mut rest = form.clone();
    rest.coeffs.remove(&IndexAtom::Meta(m));
    // c·m + rest = 0  ⇒  m = -rest / c
    let divides = rest.coeffs.values().all(|k| k.is_multiple_of(&c)) && rest.constant.is_multiple_of(&c);
    if !divides {
        return Err(SolveError::NoSolution(format!("coefficient {c} does not divide the remaining terms")));
    }
    let sol = LinearForm {
        coeffs: rest.coeffs.iter().map(|(a, k)| (a.clone(), -(k / &c))).collect(),
        constant: -(&rest.constant / &c),
    };
    for a in sol.coeffs.keys() {
        if let IndexAtom::Var(v) = a {
            if !scope.contains(v) {
                return Err(SolveError::NoSolution(format!("solution mentions `{v}`, which is out of scope")));
            }
        }
    }
    let expr = sol.to_expr().ok_or_else(|| SolveError::NoSolution("coefficient overflow".into()))?;
    Ok((m, expr))
}
