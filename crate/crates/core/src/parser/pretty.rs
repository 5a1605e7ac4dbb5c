use crate::ast::{ContextualTyping, Decl, HeaderDecl, IndexExpr, IndexProp, Program, Term, Type};

pub fn pretty_index(e: &IndexExpr) -> String {
    match e {
        IndexExpr::Var(a) => a.clone(),
        IndexExpr::Lit(n) => n.to_string(),
        IndexExpr::Meta(m) => format!("?{m}"),
        IndexExpr::Add(l, r) => format!("{} + {}", pretty_index(l), index_operand(r)),
        IndexExpr::Sub(l, r) => format!("{} - {}", pretty_index(l), index_operand(r)),
        IndexExpr::Mul(k, x) => format!("{}*{}", index_operand(x), k),
    }
}

fn index_operand(e: &IndexExpr) -> String {
    match e {
        IndexExpr::Add(..) | IndexExpr::Sub(..) => format!("({})", pretty_index(e)),
        _ => pretty_index(e),
    }
}

pub fn pretty_prop(p: &IndexProp) -> String {
    let (op, (l, r)) = match p {
        IndexProp::Eq(..) => ("=", p.sides()),
        IndexProp::Le(..) => ("<=", p.sides()),
        IndexProp::Lt(..) => ("<", p.sides()),
    };
    format!("{} {op} {}", pretty_index(l), pretty_index(r))
}

pub fn pretty_type(t: &Type) -> String {
    ty_at(t, 0)
}

// 0: arrow position, 1: left of arrow / left of /\, 2: right of /\.
fn ty_at(t: &Type, level: u8) -> String {
    match t {
        Type::Unit => "unit".into(),
        Type::Atom(s) => s.clone(),
        Type::IndexedCon(c, i) => format!("{c}({})", pretty_index(i)),
        Type::Arrow(a, b) => {
            let s = format!("{} -> {}", ty_at(a, 1), ty_at(b, 0));
            if level > 0 {
                format!("({s})")
            } else {
                s
            }
        }
        Type::Sect(a, b) => {
            let s = format!("{} /\\ {}", ty_at(a, 1), ty_at(b, 2));
            if level > 1 {
                format!("({s})")
            } else {
                s
            }
        }
        Type::Pi(a, sort, body) => {
            let s = format!("Pi {a} : {} . {}", sort.name(), ty_at(body, 0));
            if level > 0 {
                format!("({s})")
            } else {
                s
            }
        }
    }
}

pub fn pretty_decl(d: &Decl) -> String {
    match d {
        Decl::VarTyping(x, t) => format!("{x} : {}", pretty_type(t)),
        Decl::IndexSorting(a, s) => format!("{a} : {}", s.name()),
    }
}

pub fn pretty_typing(t: &ContextualTyping) -> String {
    let decls: Vec<String> = t.decls.iter().map(pretty_decl).collect();
    if decls.is_empty() {
        format!("|- {}", pretty_type(&t.goal))
    } else {
        format!("{} |- {}", decls.join(", "), pretty_type(&t.goal))
    }
}

pub fn pretty_term(e: &Term) -> String {
    term_full(e)
}

fn is_binder(e: &Term) -> bool {
    matches!(e, Term::Lam(..) | Term::Guard(..) | Term::SomeBind(..) | Term::BigLam(..))
}

fn term_full(e: &Term) -> String {
    match e {
        Term::Lam(x, b) => format!("fn {x} => {}", term_full(b)),
        Term::Guard(d, b) => format!("where {} do {}", pretty_decl(d), term_full(b)),
        Term::SomeBind(a, s, b) => format!("some {a} : {} in {}", s.name(), term_full(b)),
        Term::BigLam(a, s, b) => format!("idxfn {a} : {} => {}", s.name(), term_full(b)),
        Term::App(f, a) => format!("{} {}", term_fun(f), term_atom(a)),
        _ => term_atom(e),
    }
}

fn term_fun(e: &Term) -> String {
    match e {
        Term::App(..) => term_full(e),
        _ => term_atom(e),
    }
}

fn term_atom(e: &Term) -> String {
    match e {
        Term::Var(x) | Term::PrimConst(x) => x.clone(),
        Term::UnitVal => "()".into(),
        Term::RightAnno(b, t) => format!("({} : {})", term_full(b), pretty_type(t)),
        Term::CtxAnno(b, ts) => {
            let ts: Vec<String> = ts.iter().map(pretty_typing).collect();
            format!("({} :: [{}])", term_full(b), ts.join(" ; "))
        }
        Term::Merge(l, r) => {
            let left = if is_binder(l) { format!("({})", term_full(l)) } else { term_full(l) };
            format!("({left} ,, {})", term_full(r))
        }
        _ => format!("({})", term_full(e)),
    }
}

pub fn pretty_program(p: &Program) -> String {
    let mut out = String::new();
    for d in &p.header {
        match d {
            HeaderDecl::Datasort { name, parent: Some(q) } => out.push_str(&format!("datasort {name} <: {q}\n")),
            HeaderDecl::Datasort { name, parent: None } => out.push_str(&format!("datasort {name}\n")),
            HeaderDecl::IndexCon { name, sort } => out.push_str(&format!("indexcon {name} :: {}\n", sort.name())),
            HeaderDecl::Prim { name, ty } => out.push_str(&format!("prim {name} : {}\n", pretty_type(ty))),
        }
    }
    if !p.header.is_empty() {
        out.push('\n');
    }
    match &p.goal {
        Some(g) => out.push_str(&format!("val main : {} =\n  {}\n", pretty_type(g), pretty_term(&p.main))),
        None => out.push_str(&format!("val main =\n  {}\n", pretty_term(&p.main))),
    }
    out
}
