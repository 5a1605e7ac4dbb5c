//! Call-by-value evaluation, either on erased terms or by small steps on
//! annotated terms, plus exhaustive exploration of both merge reductions.
//!
//! Evaluation contexts are `E ::= [] | E e | V E | (E : A) | (d)E`. An
//! annotation around a value is dropped when it reaches redex position, so
//! `step` reports `Value` only for plain values: variables, λ, `()` and
//! applications of inert primitives to values. A function head wrapped in
//! annotations or guards is applied directly (fused β).

use std::collections::{HashSet, VecDeque};

use thiserror::Error;

use crate::ast::{alpha_eq_term, subst_term_var, Term};

pub const DEFAULT_FUEL: u64 = 100_000;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("merge branches erase differently: `{left}` vs `{right}`")]
    MergeMismatch { left: Term, right: Term },
    #[error("stuck at `{term}`: {reason}")]
    Stuck { term: Term, reason: String, steps: u64 },
    #[error("out of fuel after {steps} steps")]
    OutOfFuel { steps: u64 },
    #[error("exploration bound of {bound} states exceeded")]
    BoundExceeded { bound: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StepKind {
    Beta,
    Prim,
    AnnoDrop,
    GuardDrop,
    IndexBinderDrop,
    CtxAnnoDrop,
    /// Merge reduction taking branch k.
    Merge(u8),
}

impl StepKind {
    /// Steps that only remove annotation or merge structure.
    pub fn is_annotation_step(self) -> bool {
        matches!(self, StepKind::AnnoDrop | StepKind::GuardDrop | StepKind::CtxAnnoDrop | StepKind::Merge(_))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StepResult {
    Stepped(Term, StepKind),
    Value,
    Stuck(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Mode {
    #[default]
    Erase,
    Annotated,
}

/// Runtime meaning of a primitive applied to a value, if it has one.
/// Primitives without an entry are inert constructors.
fn denotation(p: &str, arg: &Term) -> Option<Term> {
    match p {
        "idcast" => Some(arg.clone()),
        "diverge" => Some(Term::app(Term::lam("x", Term::app(Term::prim("diverge"), Term::var("x"))), arg.clone())),
        _ => None,
    }
}

fn has_denotation(p: &str) -> bool {
    matches!(p, "idcast" | "diverge")
}

/// An inert primitive applied to zero or more plain values.
fn is_inert_spine(e: &Term) -> bool {
    match e {
        Term::PrimConst(p) => !has_denotation(p),
        Term::App(f, a) => is_inert_spine(f) && is_plain_value(a),
        _ => false,
    }
}

/// Values without annotations at the head.
pub fn is_plain_value(e: &Term) -> bool {
    match e {
        Term::Var(_) | Term::Lam(..) | Term::UnitVal => true,
        Term::PrimConst(_) => true,
        Term::App(..) => is_inert_spine(e),
        _ => false,
    }
}

/// The extended value grammar: plain values, `(v : A)` and `(d)v`.
pub fn is_value(e: &Term) -> bool {
    match e {
        Term::RightAnno(v, _) | Term::Guard(_, v) => is_value(v),
        _ => is_plain_value(e),
    }
}

/// Strip annotations and guards from a value.
fn core_value(e: &Term) -> &Term {
    match e {
        Term::RightAnno(v, _) | Term::Guard(_, v) => core_value(v),
        _ => e,
    }
}

/// Remove every annotation, guard, index binder, contextual annotation and
/// merge. Merge branches must erase to α-equal terms.
pub fn erase(e: &Term) -> Result<Term, EvalError> {
    Ok(match e {
        Term::Var(_) | Term::UnitVal | Term::PrimConst(_) => e.clone(),
        Term::Lam(x, b) => Term::lam(x.clone(), erase(b)?),
        Term::App(f, a) => Term::app(erase(f)?, erase(a)?),
        Term::RightAnno(b, _) | Term::Guard(_, b) | Term::SomeBind(_, _, b) | Term::BigLam(_, _, b) | Term::CtxAnno(b, _) => {
            erase(b)?
        }
        Term::Merge(l, r) => {
            let (l, r) = (erase(l)?, erase(r)?);
            if !alpha_eq_term(&l, &r) {
                return Err(EvalError::MergeMismatch { left: l, right: r });
            }
            l
        }
    })
}

/// All one-step successors. With `both_merges` a merge in redex position
/// yields both branches, otherwise only the first.
pub fn successors(e: &Term, both_merges: bool) -> Result<Vec<(Term, StepKind)>, String> {
    if is_plain_value(e) {
        return Ok(vec![]);
    }
    let wrap = |v: Vec<(Term, StepKind)>, f: &dyn Fn(Term) -> Term| v.into_iter().map(|(t, k)| (f(t), k)).collect();
    match e {
        Term::RightAnno(b, ty) => {
            if is_plain_value(b) {
                Ok(vec![((**b).clone(), StepKind::AnnoDrop)])
            } else {
                Ok(wrap(successors(b, both_merges)?, &|t| Term::anno(t, ty.clone())))
            }
        }
        Term::Guard(d, b) => {
            if is_plain_value(b) {
                Ok(vec![((**b).clone(), StepKind::GuardDrop)])
            } else {
                Ok(wrap(successors(b, both_merges)?, &|t| Term::guard(d.clone(), t)))
            }
        }
        Term::SomeBind(_, _, b) | Term::BigLam(_, _, b) => Ok(vec![((**b).clone(), StepKind::IndexBinderDrop)]),
        Term::CtxAnno(b, _) => Ok(vec![((**b).clone(), StepKind::CtxAnnoDrop)]),
        Term::Merge(l, r) => {
            let mut out = vec![((**l).clone(), StepKind::Merge(1))];
            if both_merges {
                out.push(((**r).clone(), StepKind::Merge(2)));
            }
            Ok(out)
        }
        Term::App(f, a) => {
            let head = core_value(f);
            let head_ready = is_value(f) && matches!(head, Term::Lam(..) | Term::PrimConst(_) | Term::App(..));
            if !head_ready {
                if is_value(f) {
                    return Err(match head {
                        Term::UnitVal => "applying ()".to_string(),
                        Term::Var(x) => format!("applying the free variable `{x}`"),
                        _ => "head is not a function".to_string(),
                    });
                }
                return Ok(wrap(successors(f, both_merges)?, &|t| Term::app(t, (**a).clone())));
            }
            if !is_plain_value(a) {
                return Ok(wrap(successors(a, both_merges)?, &|t| Term::app((**f).clone(), t)));
            }
            match head {
                Term::Lam(x, body) => Ok(vec![(subst_term_var(a, x, body), StepKind::Beta)]),
                Term::PrimConst(p) if has_denotation(p) => {
                    Ok(vec![(denotation(p, a).expect("denoted primitive"), StepKind::Prim)])
                }
                // An inert spine under annotations: drop them.
                _ => Ok(vec![(Term::app(head.clone(), (**a).clone()), StepKind::AnnoDrop)]),
            }
        }
        Term::Var(_) | Term::Lam(..) | Term::UnitVal | Term::PrimConst(_) => Ok(vec![]),
    }
}

/// One deterministic step; merges take their first branch.
pub fn step(e: &Term) -> StepResult {
    match successors(e, false) {
        Ok(v) => match v.into_iter().next() {
            Some((t, k)) => StepResult::Stepped(t, k),
            None if is_plain_value(e) => StepResult::Value,
            None => StepResult::Stuck(format!("no rule applies to `{e}`")),
        },
        Err(reason) => StepResult::Stuck(reason),
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EvalOutcome {
    pub value: Term,
    pub steps: u64,
    /// Each intermediate term with the kind of step that produced it.
    pub trace: Vec<(StepKind, Term)>,
}

fn run(e: Term, fuel: u64, keep_trace: bool) -> Result<EvalOutcome, EvalError> {
    let mut cur = e;
    let mut steps = 0;
    let mut trace = Vec::new();
    loop {
        match step(&cur) {
            StepResult::Value => return Ok(EvalOutcome { value: cur, steps, trace }),
            StepResult::Stuck(reason) => return Err(EvalError::Stuck { term: cur, reason, steps }),
            StepResult::Stepped(next, kind) => {
                if steps >= fuel {
                    return Err(EvalError::OutOfFuel { steps });
                }
                steps += 1;
                if keep_trace {
                    trace.push((kind, next.clone()));
                }
                cur = next;
            }
        }
    }
}

/// Iterate `step` on `e` (annotated small-step semantics).
pub fn eval(e: &Term, fuel: u64) -> Result<EvalOutcome, EvalError> {
    run(e.clone(), fuel, false)
}

/// Like `eval`, recording every intermediate term.
pub fn eval_traced(e: &Term, fuel: u64) -> Result<EvalOutcome, EvalError> {
    run(e.clone(), fuel, true)
}

pub fn eval_mode(e: &Term, mode: Mode, fuel: u64) -> Result<EvalOutcome, EvalError> {
    match mode {
        Mode::Erase => eval(&erase(e)?, fuel),
        Mode::Annotated => eval(e, fuel),
    }
}

/// Every value reachable when a merge in redex position may take either
/// branch, each erased where possible, deduplicated up to α-equivalence.
pub fn step_all(e: &Term, bound: usize) -> Result<Vec<Term>, EvalError> {
    let mut seen: HashSet<Term> = HashSet::new();
    let mut queue = VecDeque::from([e.clone()]);
    let mut values: Vec<Term> = Vec::new();
    while let Some(t) = queue.pop_front() {
        if !seen.insert(t.clone()) {
            continue;
        }
        if seen.len() > bound {
            return Err(EvalError::BoundExceeded { bound });
        }
        let next = successors(&t, true).map_err(|reason| EvalError::Stuck { term: t.clone(), reason, steps: 0 })?;
        if next.is_empty() {
            let v = erase(&t).unwrap_or(t);
            if !values.iter().any(|w| alpha_eq_term(w, &v)) {
                values.push(v);
            }
        }
        queue.extend(next.into_iter().map(|(t, _)| t));
    }
    Ok(values)
}
