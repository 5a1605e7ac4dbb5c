//! Command-line driver: `check`, `eval` and `desugar`.
//!
//! Exit codes: 0 accept, 1 type error (or a failed evaluation or encoding
//! check), 2 usage or parse error.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::ast::{Decl, Program};
use crate::ctxanno::verify_encoding;
use crate::eval::{self, EvalError, DEFAULT_FUEL};
use crate::parser::{parse_program_named, pretty_program, pretty_term, SourceSpan};
use crate::search::{Failure, FailureKind, Options, Stats};
use crate::typecheck::{typecheck_program, CheckOutcome};

#[derive(Debug, Parser)]
#[command(name = "guardlang", version, about = "Typechecker and interpreter for guardlang programs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Typecheck a program.
    Check(CheckArgs),
    /// Typecheck, then evaluate a program.
    Eval(EvalArgs),
    /// Print the program with contextual annotations encoded away.
    Desugar(DesugarArgs),
}

#[derive(Debug, Args, Clone)]
pub struct SearchArgs {
    /// Bound on derivation depth.
    #[arg(long, default_value_t = 512)]
    pub max_depth: usize,
    /// Disable the contextual-annotation rule.
    #[arg(long)]
    pub no_ctx_anno: bool,
}

impl SearchArgs {
    pub fn options(&self) -> Options {
        Options { max_depth: self.max_depth, ctx_anno: !self.no_ctx_anno, ..Options::default() }
    }
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    pub path: PathBuf,
    /// Emit the report as one JSON document.
    #[arg(long)]
    pub json: bool,
    /// Print the derivation.
    #[arg(long)]
    pub trace: bool,
    /// Print the derivation including subtyping derivations.
    #[arg(long)]
    pub trace_sub: bool,
    #[command(flatten)]
    pub search: SearchArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum, Default)]
pub enum EvalMode {
    #[default]
    Erase,
    Annotated,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    pub path: PathBuf,
    #[arg(long, value_enum, default_value_t = EvalMode::Erase)]
    pub mode: EvalMode,
    #[arg(long, default_value_t = DEFAULT_FUEL)]
    pub fuel: u64,
    /// Evaluate without typechecking first.
    #[arg(long)]
    pub unsafe_eval: bool,
    #[command(flatten)]
    pub search: SearchArgs,
}

#[derive(Debug, Args)]
pub struct DesugarArgs {
    pub path: PathBuf,
    /// Also check that the encoded program is accepted without the
    /// contextual-annotation rule whenever the original is accepted.
    #[arg(long)]
    pub verify: bool,
    #[arg(long, default_value_t = 512)]
    pub max_depth: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Accept,
    Reject,
    Error,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub span: Option<SourceSpan>,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    pub verdict: Verdict,
    pub diagnostics: Vec<Diagnostic>,
    pub statistics: Stats,
    pub derivation: Option<String>,
}

/// What a command printed and its exit code.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CmdOutput {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl CmdOutput {
    fn usage(msg: String) -> Self {
        CmdOutput { code: 2, stdout: String::new(), stderr: msg }
    }
}

fn load(path: &Path) -> Result<Program, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    parse_program_named(&path.display().to_string(), &text).map_err(|e| format!("parse error: {e}"))
}

fn guard_span<'p>(p: &'p Program, d: &Decl) -> Option<&'p SourceSpan> {
    p.spans.guard_span(d).or_else(|| p.spans.guards.iter().find(|(g, _)| g.name() == d.name()).map(|(_, s)| s))
}

/// Diagnostics for a rejected program. Guard failures point at the guard.
pub fn diagnostics(p: &Program, f: &Failure) -> Vec<Diagnostic> {
    let mut out: Vec<Diagnostic> = f
        .reasons
        .iter()
        .map(|r| {
            let span = match (&r.kind, &r.decl) {
                (FailureKind::GuardUnsatisfied, Some(d)) => guard_span(p, d).cloned(),
                _ => None,
            };
            Diagnostic { span: span.or_else(|| Some(p.spans.main.clone())), message: r.to_string() }
        })
        .collect();
    if out.is_empty() {
        out.push(Diagnostic { span: Some(p.spans.main.clone()), message: "no typing rule applies".into() });
    }
    out
}

pub fn report(p: &Program, outcome: &CheckOutcome, trace: bool, trace_sub: bool) -> Report {
    match &outcome.derivation {
        Some(d) => Report {
            verdict: Verdict::Accept,
            diagnostics: vec![],
            statistics: outcome.stats.clone(),
            derivation: (trace || trace_sub).then(|| d.to_text(trace_sub)),
        },
        None => Report {
            verdict: Verdict::Reject,
            diagnostics: diagnostics(p, outcome.failure.as_ref().expect("rejection carries a failure")),
            statistics: outcome.stats.clone(),
            derivation: None,
        },
    }
}

fn error_report(msg: String) -> Report {
    Report {
        verdict: Verdict::Error,
        diagnostics: vec![Diagnostic { span: None, message: msg }],
        statistics: Stats::default(),
        derivation: None,
    }
}

fn render(r: &Report) -> String {
    let mut s = String::new();
    match r.verdict {
        Verdict::Accept => s.push_str("accepted\n"),
        Verdict::Reject => s.push_str("rejected\n"),
        Verdict::Error => s.push_str("error\n"),
    }
    for d in &r.diagnostics {
        match &d.span {
            Some(sp) => writeln!(s, "{sp}: {}", d.message),
            None => writeln!(s, "{}", d.message),
        }
        .expect("writing to a String cannot fail");
    }
    if let Some(t) = &r.derivation {
        s.push_str(t);
    }
    s
}

pub fn cmd_check(args: &CheckArgs) -> CmdOutput {
    let (code, report) = match load(&args.path) {
        Err(msg) => (2, error_report(msg)),
        Ok(p) => {
            let outcome = typecheck_program(&p, &args.search.options());
            let r = report(&p, &outcome, args.trace, args.trace_sub);
            (if outcome.accepted() { 0 } else { 1 }, r)
        }
    };
    let stdout = if args.json {
        serde_json::to_string(&report).expect("reports serialize") + "\n"
    } else {
        render(&report)
    };
    CmdOutput { code, stdout, stderr: String::new() }
}

pub fn cmd_eval(args: &EvalArgs) -> CmdOutput {
    let p = match load(&args.path) {
        Ok(p) => p,
        Err(msg) => return CmdOutput::usage(msg),
    };
    if !args.unsafe_eval {
        let outcome = typecheck_program(&p, &args.search.options());
        if !outcome.accepted() {
            return CmdOutput { code: 1, stdout: String::new(), stderr: render(&report(&p, &outcome, false, false)) };
        }
    }
    let mode = match args.mode {
        EvalMode::Erase => eval::Mode::Erase,
        EvalMode::Annotated => eval::Mode::Annotated,
    };
    match eval::eval_mode(&p.main, mode, args.fuel) {
        Ok(r) => CmdOutput {
            code: 0,
            stdout: format!("{}\n", pretty_term(&r.value)),
            stderr: format!("{} steps\n", r.steps),
        },
        Err(e @ EvalError::OutOfFuel { .. }) => CmdOutput { code: 1, stdout: String::new(), stderr: format!("OutOfFuel: {e}\n") },
        Err(e) => CmdOutput { code: 1, stdout: String::new(), stderr: format!("{e}\n") },
    }
}

pub fn cmd_desugar(args: &DesugarArgs) -> CmdOutput {
    let p = match load(&args.path) {
        Ok(p) => p,
        Err(msg) => return CmdOutput::usage(msg),
    };
    if !args.verify {
        return CmdOutput { code: 0, stdout: pretty_program(&crate::ctxanno::encode_program(&p)), stderr: String::new() };
    }
    let opts = Options { max_depth: args.max_depth, ..Options::default() };
    let r = verify_encoding(&p, &opts);
    match r.gap() {
        None => CmdOutput { code: 0, stdout: r.encoded_text, stderr: String::new() },
        Some(f) => {
            let mut stderr = String::new();
            for d in diagnostics(&p, &f) {
                writeln!(stderr, "{}", d.message).expect("writing to a String cannot fail");
            }
            CmdOutput { code: 1, stdout: r.encoded_text, stderr }
        }
    }
}

pub fn run(cli: &Cli) -> CmdOutput {
    match &cli.command {
        Command::Check(a) => cmd_check(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Desugar(a) => cmd_desugar(a),
    }
}

/// Parse `args` (including the program name) and run the command.
pub fn run_args<I, T>(args: I) -> CmdOutput
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(&cli),
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            if code == 0 {
                CmdOutput { code, stdout: text, stderr: String::new() }
            } else {
                CmdOutput::usage(text)
            }
        }
    }
}
