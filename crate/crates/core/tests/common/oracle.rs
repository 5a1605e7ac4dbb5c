//! Reference implementations used as test oracles. None of them calls into
//! the solver or the subtyping search.

use std::collections::{BTreeMap, BTreeSet};

use guardlang::ast::{HeaderDecl, IndexAtom, IndexExpr, IndexProp, Program, Type};

fn eval_index(e: &IndexExpr, env: &BTreeMap<String, i64>) -> Option<i64> {
    e.eval(&|a| match a {
        IndexAtom::Var(v) => Some(env.get(v).copied().unwrap_or(0)),
        IndexAtom::Meta(_) => None,
    })
}

fn vars_of(es: &[&IndexExpr]) -> Vec<String> {
    let mut vs = BTreeSet::new();
    for e in es {
        e.free_vars(&mut vs);
    }
    vs.into_iter().collect()
}

/// `i = j` for every assignment. Both sides are affine, so agreement at the
/// origin and at every unit vector decides it.
pub fn index_equiv(i: &IndexExpr, j: &IndexExpr) -> bool {
    let vars = vars_of(&[i, j]);
    let mut points = vec![BTreeMap::new()];
    for v in &vars {
        points.push(BTreeMap::from([(v.clone(), 1)]));
    }
    points.iter().all(|env| match (eval_index(i, env), eval_index(j, env)) {
        (Some(a), Some(b)) => a == b,
        _ => false,
    })
}

pub fn holds(p: &IndexProp, env: &BTreeMap<String, i64>) -> bool {
    let (l, r) = p.sides();
    let (Some(l), Some(r)) = (eval_index(l, env), eval_index(r, env)) else {
        return false;
    };
    match p {
        IndexProp::Eq(..) => l == r,
        IndexProp::Le(..) => l <= r,
        IndexProp::Lt(..) => l < r,
    }
}

/// An assignment over `[-range, range]^vars` satisfying every hypothesis and
/// violating the goal.
pub fn box_counterexample(hyps: &[IndexProp], goal: &IndexProp, range: i64) -> Option<BTreeMap<String, i64>> {
    let mut vs = BTreeSet::new();
    for p in hyps.iter().chain(std::iter::once(goal)) {
        p.free_vars(&mut vs);
    }
    let vars: Vec<String> = vs.into_iter().collect();
    let width = (2 * range + 1) as u64;
    let total = width.pow(vars.len() as u32);
    for n in 0..total {
        let mut env = BTreeMap::new();
        let mut k = n;
        for v in &vars {
            env.insert(v.clone(), (k % width) as i64 - range);
            k /= width;
        }
        if hyps.iter().all(|h| holds(h, &env)) && !holds(goal, &env) {
            return Some(env);
        }
    }
    None
}

/// Reflexive-transitive closure of the declared datasort edges.
#[derive(Clone, Debug, Default)]
pub struct SortOrder {
    parents: BTreeMap<String, Vec<String>>,
}

impl SortOrder {
    pub fn from_program(p: &Program) -> Self {
        let mut parents: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for d in &p.header {
            if let HeaderDecl::Datasort { name, parent } = d {
                let e = parents.entry(name.clone()).or_default();
                if let Some(q) = parent {
                    e.push(q.clone());
                    parents.entry(q.clone()).or_default();
                }
            }
        }
        SortOrder { parents }
    }

    pub fn leq(&self, a: &str, b: &str) -> bool {
        let mut stack = vec![a.to_string()];
        let mut seen = BTreeSet::new();
        while let Some(x) = stack.pop() {
            if x == b {
                return true;
            }
            if seen.insert(x.clone()) {
                stack.extend(self.parents.get(&x).cloned().unwrap_or_default());
            }
        }
        false
    }
}

/// Structural equality with index expressions compared by `index_equiv` and
/// Π-binders compared up to renaming.
pub fn types_equiv(a: &Type, b: &Type) -> bool {
    match (a, b) {
        (Type::Unit, Type::Unit) => true,
        (Type::Atom(x), Type::Atom(y)) => x == y,
        (Type::Arrow(a1, a2), Type::Arrow(b1, b2)) | (Type::Sect(a1, a2), Type::Sect(b1, b2)) => {
            types_equiv(a1, b1) && types_equiv(a2, b2)
        }
        (Type::IndexedCon(c, i), Type::IndexedCon(d, j)) => c == d && index_equiv(i, j),
        (Type::Pi(x, s, ab), Type::Pi(y, t, bb)) => {
            if s != t {
                return false;
            }
            let mut taken = a.free_index_vars();
            taken.extend(b.free_index_vars());
            let z = (0..).map(|n| format!("z{n}")).find(|c| !taken.contains(c)).unwrap();
            let ab = guardlang::ast::subst_index_in_type(&IndexExpr::var(z.clone()), x, ab);
            let bb = guardlang::ast::subst_index_in_type(&IndexExpr::var(z), y, bb);
            types_equiv(&ab, &bb)
        }
        _ => false,
    }
}
