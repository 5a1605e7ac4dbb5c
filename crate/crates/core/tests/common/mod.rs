#![allow(dead_code)]

pub mod gen;
pub mod oracle;
pub mod reannotate;

use std::collections::BTreeSet;
use std::path::PathBuf;

use guardlang::ast::{Program, Signature, Term, Type};
use guardlang::parser::{parse_program, parse_term, parse_type};

/// Header shared by generated programs.
pub const CORPUS_HEADER: &str = "datasort odd <: bits
datasort even <: bits
indexcon list :: int
prim snoc1 : (odd -> even) /\\ (even -> odd)
prim one : odd
prim zero : even
prim idcast : Pi c : int . list(c) -> list(c)
prim nil : list(0)
prim cons : Pi n : int . list(n) -> list(n+1)
";

pub fn corpus_program(main: &str, goal: &Type) -> Program {
    let text = format!("{CORPUS_HEADER}\nval main : {goal} = {main}\n");
    parse_program(&text).unwrap_or_else(|e| panic!("generated program does not parse: {e}\n{text}"))
}

pub fn corpus_sig() -> Signature {
    parse_program(&format!("{CORPUS_HEADER}val main = ()")).unwrap().signature
}

pub fn term(sig: &Signature, s: &str) -> Term {
    let prims: BTreeSet<String> = sig.prims.keys().cloned().collect();
    parse_term(s, &prims).unwrap_or_else(|e| panic!("{s}: {e}"))
}

pub fn ty(s: &str) -> Type {
    parse_type(s).unwrap_or_else(|e| panic!("{s}: {e}"))
}

pub fn examples_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples")
}

pub fn example(name: &str) -> Program {
    let path = examples_dir().join(name);
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    guardlang::parser::parse_program_named(&path.display().to_string(), &text).unwrap()
}

/// Every example program shipped with the crate, by file name.
pub fn all_examples() -> Vec<(String, Program)> {
    let mut names: Vec<String> = std::fs::read_dir(examples_dir())
        .unwrap()
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().to_string())
        .filter(|n| n.ends_with(".gl"))
        .collect();
    names.sort();
    names.into_iter().map(|n| (n.clone(), example(&n))).collect()
}

/// A generated program together with its acceptance outcome.
pub struct Generated {
    pub program: Program,
    pub outcome: guardlang::CheckOutcome,
}

/// Up to `count` programs over the corpus header generated from `seed`,
/// each already typechecked with default options.
pub fn generate(seed: u64, count: usize, ctx_anno_rate: f64, size: usize) -> Vec<Generated> {
    use rand::SeedableRng;
    let sig = corpus_sig();
    let mut g = gen::TermGen::new(&sig, rand_chacha::ChaCha8Rng::seed_from_u64(seed));
    g.ctx_anno_rate = ctx_anno_rate;
    let mut out = Vec::new();
    let mut tries = 0;
    while out.len() < count && tries < count * 50 {
        tries += 1;
        let goal = g.goal();
        let Some(main) = g.term(&guardlang::ast::Context::empty(), &goal, size) else { continue };
        let program = corpus_program(&guardlang::parser::pretty_term(&main), &goal);
        let outcome = guardlang::typecheck_program(&program, &guardlang::Options::default());
        out.push(Generated { program, outcome });
    }
    out
}
