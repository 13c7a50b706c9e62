//! Abstract syntax for the object language: expressions, commands, programs.
//!
//! Commands carry source spans for diagnostics. Two runtime-only variants
//! exist that the parser never produces: `Bracket` wraps attacker-injected
//! code after hole substitution, and `Halt` is the terminal configuration.

use crate::lattice::{SecurityEnv, VarId};
use serde::{Deserialize, Serialize};
use std::fmt;

/// Interned endorsement label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LabelId(pub u32);

impl LabelId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Line/column position of a node in the source text. 1-based.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

impl Span {
    pub fn new(line: u32, col: u32) -> Span {
        Span { line, col }
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ExprKind {
    Const(u32),
    Var(VarId),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    /// Transparent at run time; downgrades confidentiality in the type system.
    Declassify(Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

impl Expr {
    pub fn new(kind: ExprKind, span: Span) -> Expr {
        Expr { kind, span }
    }

    pub fn constant(n: u32) -> Expr {
        Expr::new(ExprKind::Const(n), Span::default())
    }

    pub fn var(v: VarId) -> Expr {
        Expr::new(ExprKind::Var(v), Span::default())
    }

    pub fn bin(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::new(
            ExprKind::Bin(op, Box::new(lhs), Box::new(rhs)),
            Span::default(),
        )
    }

    /// All variables occurring in the expression, in first-occurrence order.
    pub fn vars(&self) -> Vec<VarId> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut Vec<VarId>) {
        match &self.kind {
            ExprKind::Const(_) => {}
            ExprKind::Var(v) => {
                if !out.contains(v) {
                    out.push(*v);
                }
            }
            ExprKind::Bin(_, a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            ExprKind::Declassify(e) => e.collect_vars(out),
        }
    }

    pub fn contains_declassify(&self) -> bool {
        match &self.kind {
            ExprKind::Const(_) | ExprKind::Var(_) => false,
            ExprKind::Bin(_, a, b) => a.contains_declassify() || b.contains_declassify(),
            ExprKind::Declassify(_) => true,
        }
    }

    /// Rename every occurrence of `from` to `to`.
    pub fn substitute_var(&self, from: VarId, to: VarId) -> Expr {
        let kind = match &self.kind {
            ExprKind::Const(n) => ExprKind::Const(*n),
            ExprKind::Var(v) => ExprKind::Var(if *v == from { to } else { *v }),
            ExprKind::Bin(op, a, b) => ExprKind::Bin(
                *op,
                Box::new(a.substitute_var(from, to)),
                Box::new(b.substitute_var(from, to)),
            ),
            ExprKind::Declassify(e) => ExprKind::Declassify(Box::new(e.substitute_var(from, to))),
        };
        Expr::new(kind, self.span)
    }

    pub fn strip_spans(&self) -> Expr {
        let kind = match &self.kind {
            ExprKind::Const(n) => ExprKind::Const(*n),
            ExprKind::Var(v) => ExprKind::Var(*v),
            ExprKind::Bin(op, a, b) => {
                ExprKind::Bin(*op, Box::new(a.strip_spans()), Box::new(b.strip_spans()))
            }
            ExprKind::Declassify(e) => ExprKind::Declassify(Box::new(e.strip_spans())),
        };
        Expr::new(kind, Span::default())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CmdKind {
    Skip,
    Assign(VarId, Expr),
    Seq(Box<Cmd>, Box<Cmd>),
    If(Expr, Box<Cmd>, Box<Cmd>),
    While(Expr, Box<Cmd>),
    /// Injection point for attacker code, numbered 0..hole_count.
    Hole(usize),
    /// `x := endorse@l(e)` — upgrade the value of `e` to trusted integrity.
    Endorse {
        label: LabelId,
        target: VarId,
        expr: Expr,
    },
    /// `endorse@l(x) if (e) { c1 } else { c2 }` — endorse `x` only when the
    /// trusted check `e` succeeds.
    CheckedEndorse {
        label: LabelId,
        var: VarId,
        cond: Expr,
        then_branch: Box<Cmd>,
        else_branch: Box<Cmd>,
    },
    /// Attacker-injected code; its events are tagged as attack events.
    /// Runtime-only.
    Bracket(Box<Cmd>),
    /// Terminal configuration. Runtime-only.
    Halt,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Cmd {
    pub kind: CmdKind,
    pub span: Span,
}

impl Cmd {
    pub fn new(kind: CmdKind, span: Span) -> Cmd {
        Cmd { kind, span }
    }

    pub fn skip() -> Cmd {
        Cmd::new(CmdKind::Skip, Span::default())
    }

    pub fn assign(v: VarId, e: Expr) -> Cmd {
        Cmd::new(CmdKind::Assign(v, e), Span::default())
    }

    pub fn seq(a: Cmd, b: Cmd) -> Cmd {
        Cmd::new(CmdKind::Seq(Box::new(a), Box::new(b)), Span::default())
    }

    pub fn halt() -> Cmd {
        Cmd::new(CmdKind::Halt, Span::default())
    }

    pub fn is_halt(&self) -> bool {
        matches!(self.kind, CmdKind::Halt)
    }

    /// Number of `Hole` nodes in the command.
    pub fn count_holes(&self) -> usize {
        match &self.kind {
            CmdKind::Hole(_) => 1,
            CmdKind::Seq(a, b) => a.count_holes() + b.count_holes(),
            CmdKind::If(_, a, b) => a.count_holes() + b.count_holes(),
            CmdKind::While(_, c) => c.count_holes(),
            CmdKind::CheckedEndorse {
                then_branch,
                else_branch,
                ..
            } => then_branch.count_holes() + else_branch.count_holes(),
            CmdKind::Bracket(c) => c.count_holes(),
            _ => 0,
        }
    }

    pub fn has_direct_endorse(&self) -> bool {
        match &self.kind {
            CmdKind::Endorse { .. } => true,
            CmdKind::Seq(a, b) | CmdKind::If(_, a, b) => {
                a.has_direct_endorse() || b.has_direct_endorse()
            }
            CmdKind::While(_, c) | CmdKind::Bracket(c) => c.has_direct_endorse(),
            CmdKind::CheckedEndorse {
                then_branch,
                else_branch,
                ..
            } => then_branch.has_direct_endorse() || else_branch.has_direct_endorse(),
            _ => false,
        }
    }

    pub fn has_checked_endorse(&self) -> bool {
        match &self.kind {
            CmdKind::CheckedEndorse { .. } => true,
            CmdKind::Seq(a, b) | CmdKind::If(_, a, b) => {
                a.has_checked_endorse() || b.has_checked_endorse()
            }
            CmdKind::While(_, c) | CmdKind::Bracket(c) => c.has_checked_endorse(),
            _ => false,
        }
    }

    /// Rename every occurrence of `from` (reads and write targets) to `to`.
    pub fn substitute_var(&self, from: VarId, to: VarId) -> Cmd {
        let sub = |v: VarId| if v == from { to } else { v };
        let kind = match &self.kind {
            CmdKind::Skip => CmdKind::Skip,
            CmdKind::Assign(v, e) => CmdKind::Assign(sub(*v), e.substitute_var(from, to)),
            CmdKind::Seq(a, b) => CmdKind::Seq(
                Box::new(a.substitute_var(from, to)),
                Box::new(b.substitute_var(from, to)),
            ),
            CmdKind::If(e, a, b) => CmdKind::If(
                e.substitute_var(from, to),
                Box::new(a.substitute_var(from, to)),
                Box::new(b.substitute_var(from, to)),
            ),
            CmdKind::While(e, c) => CmdKind::While(
                e.substitute_var(from, to),
                Box::new(c.substitute_var(from, to)),
            ),
            CmdKind::Hole(i) => CmdKind::Hole(*i),
            CmdKind::Endorse {
                label,
                target,
                expr,
            } => CmdKind::Endorse {
                label: *label,
                target: sub(*target),
                expr: expr.substitute_var(from, to),
            },
            CmdKind::CheckedEndorse {
                label,
                var,
                cond,
                then_branch,
                else_branch,
            } => CmdKind::CheckedEndorse {
                label: *label,
                var: sub(*var),
                cond: cond.substitute_var(from, to),
                then_branch: Box::new(then_branch.substitute_var(from, to)),
                else_branch: Box::new(else_branch.substitute_var(from, to)),
            },
            CmdKind::Bracket(c) => CmdKind::Bracket(Box::new(c.substitute_var(from, to))),
            CmdKind::Halt => CmdKind::Halt,
        };
        Cmd::new(kind, self.span)
    }

    pub fn strip_spans(&self) -> Cmd {
        let kind = match &self.kind {
            CmdKind::Skip => CmdKind::Skip,
            CmdKind::Assign(v, e) => CmdKind::Assign(*v, e.strip_spans()),
            CmdKind::Seq(a, b) => {
                CmdKind::Seq(Box::new(a.strip_spans()), Box::new(b.strip_spans()))
            }
            CmdKind::If(e, a, b) => CmdKind::If(
                e.strip_spans(),
                Box::new(a.strip_spans()),
                Box::new(b.strip_spans()),
            ),
            CmdKind::While(e, c) => CmdKind::While(e.strip_spans(), Box::new(c.strip_spans())),
            CmdKind::Hole(i) => CmdKind::Hole(*i),
            CmdKind::Endorse {
                label,
                target,
                expr,
            } => CmdKind::Endorse {
                label: *label,
                target: *target,
                expr: expr.strip_spans(),
            },
            CmdKind::CheckedEndorse {
                label,
                var,
                cond,
                then_branch,
                else_branch,
            } => CmdKind::CheckedEndorse {
                label: *label,
                var: *var,
                cond: cond.strip_spans(),
                then_branch: Box::new(then_branch.strip_spans()),
                else_branch: Box::new(else_branch.strip_spans()),
            },
            CmdKind::Bracket(c) => CmdKind::Bracket(Box::new(c.strip_spans())),
            CmdKind::Halt => CmdKind::Halt,
        };
        Cmd::new(kind, Span::default())
    }
}

/// A parsed program: security environment, endorsement label table, body with
/// holes, and the size of the value domain (values live in `0..domain`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Program {
    pub env: SecurityEnv,
    pub labels: Vec<String>,
    pub body: Cmd,
    pub hole_count: usize,
    pub domain: u32,
}

pub const DEFAULT_DOMAIN: u32 = 4;

impl Program {
    pub fn label_name(&self, l: LabelId) -> &str {
        &self.labels[l.index()]
    }

    pub fn lookup_label(&self, name: &str) -> Option<LabelId> {
        self.labels
            .iter()
            .position(|n| n == name)
            .map(|i| LabelId(i as u32))
    }

    /// Returns a copy with a different value domain. Panics if `n < 2`.
    pub fn with_domain(&self, n: u32) -> Program {
        assert!(n >= 2, "domain size must be at least 2");
        Program {
            domain: n,
            ..self.clone()
        }
    }

    pub fn has_direct_endorse(&self) -> bool {
        self.body.has_direct_endorse()
    }

    pub fn has_checked_endorse(&self) -> bool {
        self.body.has_checked_endorse()
    }
}

// --- pretty-printer ---------------------------------------------------------

fn prec(op: BinOp) -> u8 {
    match op {
        BinOp::Or => 1,
        BinOp::And => 2,
        BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 3,
        BinOp::Add | BinOp::Sub => 4,
        BinOp::Mul => 5,
    }
}

fn fmt_expr(e: &Expr, env: &SecurityEnv, parent: u8, out: &mut String) {
    match &e.kind {
        ExprKind::Const(n) => out.push_str(&n.to_string()),
        ExprKind::Var(v) => out.push_str(env.name(*v)),
        ExprKind::Bin(op, a, b) => {
            let p = prec(*op);
            if p < parent {
                out.push('(');
            }
            fmt_expr(a, env, p, out);
            out.push(' ');
            out.push_str(op.symbol());
            out.push(' ');
            // left-associative parse: right operand needs strictly higher binding
            fmt_expr(b, env, p + 1, out);
            if p < parent {
                out.push(')');
            }
        }
        ExprKind::Declassify(inner) => {
            out.push_str("declassify(");
            fmt_expr(inner, env, 0, out);
            out.push(')');
        }
    }
}

/// Render an expression in surface syntax.
pub fn expr_to_string(e: &Expr, env: &SecurityEnv) -> String {
    let mut s = String::new();
    fmt_expr(e, env, 0, &mut s);
    s
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("  ");
    }
}

fn fmt_block(c: &Cmd, p: &Program, depth: usize, out: &mut String) {
    out.push_str("{\n");
    fmt_cmd(c, p, depth + 1, out);
    out.push('\n');
    indent(out, depth);
    out.push('}');
}

fn fmt_cmd(c: &Cmd, p: &Program, depth: usize, out: &mut String) {
    match &c.kind {
        CmdKind::Seq(a, b) => {
            fmt_cmd(a, p, depth, out);
            out.push_str(";\n");
            fmt_cmd(b, p, depth, out);
        }
        CmdKind::Skip => {
            indent(out, depth);
            out.push_str("skip");
        }
        CmdKind::Assign(v, e) => {
            indent(out, depth);
            out.push_str(p.env.name(*v));
            out.push_str(" := ");
            fmt_expr(e, &p.env, 0, out);
        }
        CmdKind::If(e, a, b) => {
            indent(out, depth);
            out.push_str("if (");
            fmt_expr(e, &p.env, 0, out);
            out.push_str(") ");
            fmt_block(a, p, depth, out);
            if !matches!(b.kind, CmdKind::Skip) {
                out.push_str(" else ");
                fmt_block(b, p, depth, out);
            }
        }
        CmdKind::While(e, body) => {
            indent(out, depth);
            out.push_str("while (");
            fmt_expr(e, &p.env, 0, out);
            out.push_str(") ");
            fmt_block(body, p, depth, out);
        }
        CmdKind::Hole(_) => {
            indent(out, depth);
            out.push_str("[#]");
        }
        CmdKind::Endorse {
            label,
            target,
            expr,
        } => {
            indent(out, depth);
            out.push_str(p.env.name(*target));
            out.push_str(" := endorse@");
            out.push_str(p.label_name(*label));
            out.push('(');
            fmt_expr(expr, &p.env, 0, out);
            out.push(')');
        }
        CmdKind::CheckedEndorse {
            label,
            var,
            cond,
            then_branch,
            else_branch,
        } => {
            indent(out, depth);
            out.push_str("endorse@");
            out.push_str(p.label_name(*label));
            out.push('(');
            out.push_str(p.env.name(*var));
            out.push_str(") if (");
            fmt_expr(cond, &p.env, 0, out);
            out.push_str(") ");
            fmt_block(then_branch, p, depth, out);
            out.push_str(" else ");
            fmt_block(else_branch, p, depth, out);
        }
        CmdKind::Bracket(inner) => {
            indent(out, depth);
            out.push_str("[attack: ");
            let mut s = String::new();
            fmt_cmd(inner, p, 0, &mut s);
            out.push_str(&s.replace('\n', " "));
            out.push(']');
        }
        CmdKind::Halt => {
            indent(out, depth);
            out.push_str("halt");
        }
    }
}

/// Render a whole program, declarations first, in parseable surface syntax.
pub fn program_to_string(p: &Program) -> String {
    let mut out = String::new();
    for v in p.env.vars() {
        out.push_str(&format!("var {}: {};\n", p.env.name(v), p.env.level(v)));
    }
    out.push('\n');
    fmt_cmd(&p.body, p, 0, &mut out);
    out.push('\n');
    out
}
