use std::fmt;

use crate::ast::{Context, IndexExpr, IndexSort, IndexSubst, Term, Type};
use crate::ctxanno::CtxSubDerivation;
use crate::subtype::SubDerivation;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    Check,
    Synth,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TypingRule {
    Var,
    Prim,
    UnitI,
    ArrI,
    ArrE,
    SectI,
    /// ∧E_k, k ∈ {1, 2}.
    SectE(u8),
    Sub,
    PiI,
    PiIExplicit,
    /// ΠE in checking mode: `e ⇒ Πa.A` gives `e ⇐ [i/a]A`.
    PiE,
    /// ΠE applied to the head of an application before →E.
    PiESynth,
    MergeCheck(u8),
    MergeSynth(u8),
    RightAnno,
    LeftAnnoCheck,
    LeftAnnoSynth,
    SomeCheck,
    SomeSynth,
    /// Contextual annotation, using typing number k (from 0).
    CtxAnno(usize),
}

impl TypingRule {
    pub fn name(self) -> String {
        match self {
            TypingRule::Var => "var".into(),
            TypingRule::Prim => "prim".into(),
            TypingRule::UnitI => "unitI".into(),
            TypingRule::ArrI => "→I".into(),
            TypingRule::ArrE => "→E".into(),
            TypingRule::SectI => "∧I".into(),
            TypingRule::SectE(k) => format!("∧E{k}"),
            TypingRule::Sub => "sub".into(),
            TypingRule::PiI => "ΠI".into(),
            TypingRule::PiIExplicit => "ΠI-explicit".into(),
            TypingRule::PiE => "ΠE".into(),
            TypingRule::PiESynth => "ΠE⇒".into(),
            TypingRule::MergeCheck(k) => format!("merge{k}⇐"),
            TypingRule::MergeSynth(k) => format!("merge{k}⇒"),
            TypingRule::RightAnno => "right-anno".into(),
            TypingRule::LeftAnnoCheck => "left-anno⇐".into(),
            TypingRule::LeftAnnoSynth => "left-anno⇒".into(),
            TypingRule::SomeCheck => "some⇐".into(),
            TypingRule::SomeSynth => "some⇒".into(),
            TypingRule::CtxAnno(k) => format!("ctx-anno[{k}]"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Premise {
    Typing(TypingDerivation),
    Sub(SubDerivation),
    CtxSub(CtxSubDerivation),
    /// `a : γ` found in the context (guard on an index variable).
    Sorting { var: String, sort: IndexSort },
}

impl Premise {
    pub fn apply(&self, s: &IndexSubst) -> Premise {
        match self {
            Premise::Typing(d) => Premise::Typing(d.apply(s)),
            Premise::Sub(d) => Premise::Sub(d.apply(s)),
            Premise::CtxSub(d) => Premise::CtxSub(d.apply(s)),
            Premise::Sorting { .. } => self.clone(),
        }
    }
}

/// One node of a typing derivation: the rule and its conclusion
/// `ctx ⊢ term ⇐/⇒ ty`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TypingDerivation {
    pub rule: TypingRule,
    pub mode: Mode,
    pub ctx: Context,
    pub term: Term,
    pub ty: Type,
    pub premises: Vec<Premise>,
    /// Index chosen by ΠE, ΠE⇒ or `some`.
    pub witness: Option<IndexExpr>,
}

impl TypingDerivation {
    pub fn new(rule: TypingRule, mode: Mode, ctx: &Context, term: &Term, ty: &Type, premises: Vec<Premise>) -> Self {
        TypingDerivation { rule, mode, ctx: ctx.clone(), term: term.clone(), ty: ty.clone(), premises, witness: None }
    }

    pub fn with_witness(mut self, w: IndexExpr) -> Self {
        self.witness = Some(w);
        self
    }

    pub fn apply(&self, s: &IndexSubst) -> TypingDerivation {
        TypingDerivation {
            rule: self.rule,
            mode: self.mode,
            ctx: self.ctx.map_types(&mut |t| s.apply_type(t)),
            term: s.apply_term(&self.term),
            ty: s.apply_type(&self.ty),
            premises: self.premises.iter().map(|p| p.apply(s)).collect(),
            witness: self.witness.as_ref().map(|w| s.apply_expr(w)),
        }
    }

    pub fn typing_premises(&self) -> impl Iterator<Item = &TypingDerivation> {
        self.premises.iter().filter_map(|p| match p {
            Premise::Typing(d) => Some(d),
            _ => None,
        })
    }

    /// Number of typing nodes.
    pub fn size(&self) -> usize {
        1 + self.typing_premises().map(|d| d.size()).sum::<usize>()
    }

    /// Every typing rule used, in pre-order.
    pub fn rules(&self) -> Vec<TypingRule> {
        let mut out = vec![self.rule];
        for d in self.typing_premises() {
            out.extend(d.rules());
        }
        out
    }

    pub fn uses_rule(&self, pred: &dyn Fn(TypingRule) -> bool) -> bool {
        pred(self.rule) || self.typing_premises().any(|d| d.uses_rule(pred))
    }

    pub fn has_meta(&self) -> bool {
        self.ty.has_meta()
            || self.term.has_meta()
            || self.ctx.has_meta()
            || self.witness.as_ref().is_some_and(|w| w.has_meta())
            || self.typing_premises().any(|d| d.has_meta())
    }

    pub fn write_indented(&self, f: &mut dyn fmt::Write, indent: usize, with_sub: bool) -> fmt::Result {
        let arrow = match self.mode {
            Mode::Check => "⇐",
            Mode::Synth => "⇒",
        };
        write!(f, "{:indent$}[{}] {} ⊢ {} {arrow} {}", "", self.rule.name(), self.ctx, self.term, self.ty, indent = indent)?;
        if let Some(w) = &self.witness {
            write!(f, "  with {w}")?;
        }
        writeln!(f)?;
        for p in &self.premises {
            match p {
                Premise::Typing(d) => d.write_indented(f, indent + 2, with_sub)?,
                Premise::Sub(d) if with_sub => d.write_indented(f, indent + 2)?,
                Premise::Sub(d) => writeln!(f, "{:w$}[{}] {} ≤ {}", "", d.rule.name(), d.lhs, d.rhs, w = indent + 2)?,
                Premise::CtxSub(d) => d.write_indented(f, indent + 2)?,
                Premise::Sorting { var, sort } => writeln!(f, "{:w$}[sorting] {var} : {}", "", sort.name(), w = indent + 2)?,
            }
        }
        Ok(())
    }

    pub fn to_text(&self, with_sub: bool) -> String {
        let mut s = String::new();
        self.write_indented(&mut s, 0, with_sub).expect("writing to a String cannot fail");
        s
    }
}

impl fmt::Display for TypingDerivation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_indented(f, 0, false)
    }
}
