//! Source-to-source transformations: the explicit-reachability translation
//! (each hole is prefixed with a bump of a fresh public trusted counter) and
//! the lowering of checked endorsements to direct ones.

use crate::ast::{Cmd, CmdKind, Expr, ExprKind, LabelId, Program};
use crate::lattice::{Integ, Level, VarId};
use crate::parser::TEMP_PREFIX;
use crate::typecheck::type_expr;
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum TransformError {
    #[error("variable `reach` is already declared in the program")]
    ReservedVar,
}

pub const REACH_VAR: &str = "reach";

fn treach_cmd(c: &Cmd, reach: VarId) -> Cmd {
    let kind = match &c.kind {
        CmdKind::Hole(i) => {
            let bump = Cmd::new(
                CmdKind::Assign(
                    reach,
                    Expr::bin(crate::ast::BinOp::Add, Expr::var(reach), Expr::constant(1)),
                ),
                c.span,
            );
            CmdKind::Seq(
                Box::new(bump),
                Box::new(Cmd::new(CmdKind::Hole(*i), c.span)),
            )
        }
        CmdKind::Seq(a, b) => CmdKind::Seq(
            Box::new(treach_cmd(a, reach)),
            Box::new(treach_cmd(b, reach)),
        ),
        CmdKind::If(e, a, b) => CmdKind::If(
            e.clone(),
            Box::new(treach_cmd(a, reach)),
            Box::new(treach_cmd(b, reach)),
        ),
        CmdKind::While(e, body) => CmdKind::While(e.clone(), Box::new(treach_cmd(body, reach))),
        CmdKind::CheckedEndorse {
            label,
            var,
            cond,
            then_branch,
            else_branch,
        } => CmdKind::CheckedEndorse {
            label: *label,
            var: *var,
            cond: cond.clone(),
            then_branch: Box::new(treach_cmd(then_branch, reach)),
            else_branch: Box::new(treach_cmd(else_branch, reach)),
        },
        other => other.clone(),
    };
    Cmd::new(kind, c.span)
}

/// Make reachability of attacks explicit: every hole becomes
/// `reach := reach + 1; [#]`, descending homomorphically through compound
/// commands. The environment gains a public trusted variable `reach`
/// (intended initial value 0), which must not already exist.
pub fn treach(p: &Program) -> Result<Program, TransformError> {
    if p.env.lookup(REACH_VAR).is_some() {
        return Err(TransformError::ReservedVar);
    }
    let mut env = p.env.clone();
    let reach = env.declare(REACH_VAR, Level::bottom()).unwrap();
    Ok(Program {
        env,
        labels: p.labels.clone(),
        body: treach_cmd(&p.body, reach),
        hole_count: p.hole_count,
        domain: p.domain,
    })
}

struct Lowering {
    out: Program,
    checked_seen: usize,
}

impl Lowering {
    fn fresh_temp(&mut self, label: &str, k: usize, conf: crate::lattice::Conf) -> VarId {
        let mut name = format!("{TEMP_PREFIX}{label}_{k}");
        while self.out.env.lookup(&name).is_some() {
            name.push('_');
        }
        self.out
            .env
            .declare(&name, Level::new(conf, Integ::Trusted))
            .unwrap()
    }

    fn fresh_label(&mut self, name: String) -> LabelId {
        let mut name = name;
        while self.out.labels.contains(&name) {
            name.push('\'');
        }
        self.out.labels.push(name);
        LabelId(self.out.labels.len() as u32 - 1)
    }

    fn lower(&mut self, c: &Cmd) -> Cmd {
        let kind = match &c.kind {
            CmdKind::Seq(a, b) => {
                let a2 = self.lower(a);
                let b2 = self.lower(b);
                CmdKind::Seq(Box::new(a2), Box::new(b2))
            }
            CmdKind::If(e, a, b) => {
                let a2 = self.lower(a);
                let b2 = self.lower(b);
                CmdKind::If(e.clone(), Box::new(a2), Box::new(b2))
            }
            CmdKind::While(e, body) => {
                let body2 = self.lower(body);
                CmdKind::While(e.clone(), Box::new(body2))
            }
            CmdKind::CheckedEndorse {
                label,
                var,
                cond,
                then_branch,
                else_branch,
            } => {
                self.checked_seen += 1;
                let k = self.checked_seen;
                let src_label = self.out.labels[label.index()].clone();
                // the check result is endorsed first, then the variable in
                // the positive branch; uses of the variable are redirected to
                // the endorsed copy
                let cond_conf = type_expr(&self.out.env, cond).level.conf;
                let var_conf = self.out.env.level(*var).conf;
                let t0 = self.fresh_temp(&src_label, 0, cond_conf);
                let t1 = self.fresh_temp(&src_label, 1, var_conf);
                let l0 = self.fresh_label(format!("{src_label}.{}", 2 * k - 1));
                let l1 = self.fresh_label(format!("{src_label}.{}", 2 * k));
                let then2 = self.lower(then_branch).substitute_var(*var, t1);
                let else2 = self.lower(else_branch);
                let endorse_cond = Cmd::new(
                    CmdKind::Endorse {
                        label: l0,
                        target: t0,
                        expr: cond.clone(),
                    },
                    c.span,
                );
                let endorse_var = Cmd::new(
                    CmdKind::Endorse {
                        label: l1,
                        target: t1,
                        expr: Expr::var(*var),
                    },
                    c.span,
                );
                let positive =
                    Cmd::new(CmdKind::Seq(Box::new(endorse_var), Box::new(then2)), c.span);
                let branch = Cmd::new(
                    CmdKind::If(
                        Expr::new(ExprKind::Var(t0), cond.span),
                        Box::new(positive),
                        Box::new(else2),
                    ),
                    c.span,
                );
                CmdKind::Seq(Box::new(endorse_cond), Box::new(branch))
            }
            other => other.clone(),
        };
        Cmd::new(kind, c.span)
    }
}

/// Lower every checked endorsement to direct endorsements: the check result
/// is endorsed unconditionally, and in the positive branch the checked
/// variable is endorsed into a fresh trusted temporary that replaces it.
/// Commands without checked endorsements are left unchanged.
pub fn lower_checked(p: &Program) -> Program {
    let mut l = Lowering {
        out: Program {
            env: p.env.clone(),
            labels: p.labels.clone(),
            body: Cmd::skip(),
            hole_count: p.hole_count,
            domain: p.domain,
        },
        checked_seen: 0,
    };
    let body = l.lower(&p.body);
    l.out.body = body;
    l.out
}
