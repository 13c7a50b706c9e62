//! Core library: a finite while-language with attacker holes,
//! declassification, and endorsement; exact attacker-knowledge analyses over
//! finite domains; semantic robustness checks; and a security type system.

pub mod ast;
pub mod attacks;
pub mod control;
pub mod knowledge;
pub mod lattice;
pub mod parser;
pub mod progen;
pub mod robustness;
pub mod semantics;
pub mod transform;
pub mod typecheck;

pub use ast::{BinOp, Cmd, CmdKind, Expr, ExprKind, LabelId, Program, Span};
pub use attacks::{AttackConfig, AttackSet, AttackVector};
pub use knowledge::MemorySet;
pub use lattice::{Conf, Integ, Level, SecurityEnv, VarId};
pub use parser::{parse_program, ParseError};
pub use robustness::{CheckError, Property, Status, UniverseInfo, Verdict, Witness};
pub use semantics::{
    eval_expr, low_projection, run, run_program, step, trusted_projection, Event, LowEvent, LowRun,
    Memory, Mode, RunOutcome, Terminal, TrustedEvent, TrustedRun, Val,
};
pub use typecheck::{ExprTyping, TypeError};
