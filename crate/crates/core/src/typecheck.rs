//! Security type system: expression typing with declassification tracking,
//! and command typing with a pc label.
//!
//! Judgments are syntax-directed; each node is checked against the premises
//! of its single applicable rule. Diagnostics stop at the first failing
//! premise per node but are collected across siblings.

use crate::ast::{Cmd, CmdKind, Expr, ExprKind, Program, Span};
use crate::lattice::{Conf, Integ, Level, SecurityEnv, VarId};
use serde::Serialize;
use std::collections::BTreeSet;
use std::fmt;

/// Result of typing an expression: its level and the set of variables whose
/// declassification it performs (nonempty only under `declassify`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExprTyping {
    pub level: Level,
    pub declass_vars: BTreeSet<VarId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TypeError {
    pub rule: &'static str,
    pub premise: String,
    pub span: Span,
    pub message: String,
}

impl fmt::Display for TypeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: {} violates {} premise `{}`",
            self.span, self.message, self.rule, self.premise
        )
    }
}

const SECRET_TRUSTED: Level = Level::new(Conf::Secret, Integ::Trusted);
const PUBLIC_TRUSTED: Level = Level::new(Conf::Public, Integ::Trusted);
const PUBLIC_UNTRUSTED: Level = Level::new(Conf::Public, Integ::Untrusted);

/// Type an expression. Total: every expression has a level.
pub fn type_expr(env: &SecurityEnv, e: &Expr) -> ExprTyping {
    match &e.kind {
        ExprKind::Const(_) => ExprTyping {
            level: Level::bottom(),
            declass_vars: BTreeSet::new(),
        },
        ExprKind::Var(v) => ExprTyping {
            level: env.level(*v),
            declass_vars: BTreeSet::new(),
        },
        ExprKind::Bin(_, a, b) => {
            let ta = type_expr(env, a);
            let tb = type_expr(env, b);
            ExprTyping {
                level: ta.level.join(tb.level),
                declass_vars: ta.declass_vars.union(&tb.declass_vars).copied().collect(),
            }
        }
        ExprKind::Declassify(inner) => {
            let t = type_expr(env, inner);
            ExprTyping {
                level: t.level.meet(PUBLIC_UNTRUSTED),
                declass_vars: inner.vars().into_iter().collect(),
            }
        }
    }
}

fn err(rule: &'static str, premise: &str, span: Span, message: String) -> TypeError {
    TypeError {
        rule,
        premise: premise.to_string(),
        span,
        message,
    }
}

fn check(env: &SecurityEnv, pc: Level, c: &Cmd, errors: &mut Vec<TypeError>) {
    match &c.kind {
        CmdKind::Skip | CmdKind::Halt => {}
        CmdKind::Seq(a, b) => {
            check(env, pc, a, errors);
            check(env, pc, b, errors);
        }
        CmdKind::Assign(x, e) => {
            let t = type_expr(env, e);
            let target = env.level(*x);
            if !t.level.join(pc).leq(target) {
                errors.push(err(
                    "T-ASGMT",
                    "level ⊔ pc ⊑ Γ(x)",
                    c.span,
                    format!(
                        "cannot assign a ({}) expression to `{}` ({}) under pc ({})",
                        t.level,
                        env.name(*x),
                        target,
                        pc
                    ),
                ));
                return;
            }
            for y in &t.declass_vars {
                if !env.level(*y).leq(SECRET_TRUSTED) {
                    errors.push(err(
                        "T-ASGMT",
                        "∀y ∈ D. Γ(y) ⊑ (Secret, Trusted)",
                        c.span,
                        format!(
                            "declassified variable `{}` has untrusted integrity",
                            env.name(*y)
                        ),
                    ));
                    return;
                }
            }
            if !t.declass_vars.is_empty() && !pc.leq(PUBLIC_TRUSTED) {
                errors.push(err(
                    "T-ASGMT",
                    "D ≠ ∅ ⟹ pc ⊑ (Public, Trusted)",
                    c.span,
                    format!("declassification in a {pc} context"),
                ));
            }
        }
        CmdKind::If(e, c1, c2) => {
            let t = type_expr(env, e);
            if !t.declass_vars.is_empty() {
                errors.push(err(
                    "T-IF",
                    "Γ ⊢ e : ℓ, ∅",
                    c.span,
                    "declassification in a branch guard".to_string(),
                ));
                return;
            }
            let pc2 = pc.join(t.level);
            check(env, pc2, c1, errors);
            check(env, pc2, c2, errors);
        }
        CmdKind::While(e, body) => {
            let t = type_expr(env, e);
            if !t.declass_vars.is_empty() {
                errors.push(err(
                    "T-WHILE",
                    "Γ ⊢ e : ℓ, ∅",
                    c.span,
                    "declassification in a loop guard".to_string(),
                ));
                return;
            }
            check(env, pc.join(t.level), body, errors);
        }
        CmdKind::Hole(_) => {
            if !pc.leq(PUBLIC_UNTRUSTED) {
                errors.push(err(
                    "T-HOLE",
                    "pc ⊑ (Public, Untrusted)",
                    c.span,
                    format!("attacker hole in a {pc} context"),
                ));
            }
        }
        CmdKind::Endorse { target, expr, .. } => {
            let x = env.level(*target);
            if !pc.join(x).leq(SECRET_TRUSTED) {
                errors.push(err(
                    "T-ENDORSE",
                    "pc ⊔ Γ(x) ⊑ (Secret, Trusted)",
                    c.span,
                    format!(
                        "endorsement into `{}` ({}) under pc ({})",
                        env.name(*target),
                        x,
                        pc
                    ),
                ));
                return;
            }
            if !pc.leq(x) {
                errors.push(err(
                    "T-ENDORSE",
                    "pc ⊑ Γ(x)",
                    c.span,
                    format!("pc ({pc}) does not flow to `{}`", env.name(*target)),
                ));
                return;
            }
            // declassified variables inside an endorsed expression need no
            // separate trust check: the endorsement itself sanctions them,
            // and the trusted pc premises bound the context. This keeps the
            // checked-endorsement lowering typable.
            let t = type_expr(env, expr);
            if !t.level.meet(SECRET_TRUSTED).leq(x) {
                errors.push(err(
                    "T-ENDORSE",
                    "ℓ ⊓ (Secret, Trusted) ⊑ Γ(x)",
                    c.span,
                    format!(
                        "endorsed value of level ({}) does not fit `{}` ({})",
                        t.level,
                        env.name(*target),
                        x
                    ),
                ));
            }
        }
        CmdKind::CheckedEndorse {
            var,
            cond,
            then_branch,
            else_branch,
            ..
        } => {
            // the condition is typed with the endorsed variable boosted to
            // trusted integrity
            let mut boosted = env.clone();
            boosted.set_level(*var, env.level(*var).meet(SECRET_TRUSTED));
            let t = type_expr(&boosted, cond);
            let pc2 = pc.join(t.level);
            if !pc2.leq(SECRET_TRUSTED) {
                errors.push(err(
                    "T-CHECKED",
                    "pc ⊔ ℓ' ⊑ (Secret, Trusted)",
                    c.span,
                    format!(
                        "check of `{}` in an untrusted context: auxiliary pc is ({pc2})",
                        env.name(*var)
                    ),
                ));
                return;
            }
            check(&boosted, pc2, then_branch, errors);
            check(env, pc2, else_branch, errors);
        }
        CmdKind::Bracket(_) => unreachable!("brackets never occur in source programs"),
    }
}

/// Type a command under an explicit pc label. Empty result means well-typed.
pub fn type_command(env: &SecurityEnv, pc: Level, c: &Cmd) -> Vec<TypeError> {
    let mut errors = Vec::new();
    check(env, pc, c, &mut errors);
    errors
}

/// Type a whole program at the bottom pc label.
pub fn typecheck(p: &Program) -> Vec<TypeError> {
    type_command(&p.env, Level::bottom(), &p.body)
}
