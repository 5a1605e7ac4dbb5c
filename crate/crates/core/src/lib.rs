//! Typechecker and interpreter for a small functional language with
//! intersection types, bidirectional typing, guard (left-hand) annotations,
//! merges, indexed types with Π-quantifiers, the `some` binder, explicit
//! index abstraction, and contextual typing annotations.

pub mod ast;
pub mod cli;
pub mod ctxanno;
pub mod eval;
pub mod index_domain;
pub mod parser;
pub mod search;
pub mod subtype;
pub mod typecheck;

pub use ast::{
    alpha_eq_term, alpha_eq_type, Context, ContextualTyping, Decl, IndexExpr, IndexProp, IndexSort, Program,
    Signature, Term, Type,
};
pub use parser::{parse_program, parse_term, parse_type, ParseError, SourceSpan};
pub use search::{Failure, FailureKind, Options, Stats};
pub use typecheck::{check, synth, typecheck_program, CheckOutcome, TypingDerivation};
