//! Deterministic random generator of small straight-line and single-loop
//! programs over a fixed five-variable environment. Used by the property
//! suites; seeded, so every draw is reproducible.

use crate::ast::{BinOp, Cmd, CmdKind, Expr, ExprKind, Program, Span};
use crate::lattice::{Conf, Integ, Level, SecurityEnv, VarId};
use crate::semantics::{Memory, Val};

pub struct ProgramGen {
    state: u64,
}

const OPS: [BinOp; 11] = [
    BinOp::Add,
    BinOp::Sub,
    BinOp::Mul,
    BinOp::Eq,
    BinOp::Ne,
    BinOp::Lt,
    BinOp::Le,
    BinOp::Gt,
    BinOp::Ge,
    BinOp::And,
    BinOp::Or,
];

impl ProgramGen {
    pub fn new(seed: u64) -> ProgramGen {
        ProgramGen {
            state: seed.wrapping_add(0x9e3779b97f4a7c15),
        }
    }

    fn next(&mut self) -> u64 {
        // splitmix64
        self.state = self.state.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    fn below(&mut self, n: u64) -> u64 {
        self.next() % n
    }

    fn expr(&mut self, vars: &[VarId], domain: Val, depth: usize) -> Expr {
        if depth == 0 || self.below(3) == 0 {
            if self.below(2) == 0 {
                Expr::new(
                    ExprKind::Const(self.below(domain as u64) as Val),
                    Span::default(),
                )
            } else {
                Expr::var(vars[self.below(vars.len() as u64) as usize])
            }
        } else {
            let op = OPS[self.below(OPS.len() as u64) as usize];
            let a = self.expr(vars, domain, depth - 1);
            let b = self.expr(vars, domain, depth - 1);
            Expr::bin(op, a, b)
        }
    }

    fn assign(&mut self, vars: &[VarId], domain: Val) -> Cmd {
        let target = vars[self.below(vars.len() as u64) as usize];
        let e = self.expr(vars, domain, 2);
        Cmd::assign(target, e)
    }

    /// A straight-line program with at most one loop, over variables
    /// l1 l2 (public trusted), h1 h2 (secret trusted), u1 (public untrusted).
    pub fn program(&mut self, domain: Val) -> Program {
        let mut env = SecurityEnv::new();
        let l1 = env
            .declare("l1", Level::new(Conf::Public, Integ::Trusted))
            .unwrap();
        let l2 = env
            .declare("l2", Level::new(Conf::Public, Integ::Trusted))
            .unwrap();
        let h1 = env
            .declare("h1", Level::new(Conf::Secret, Integ::Trusted))
            .unwrap();
        let h2 = env
            .declare("h2", Level::new(Conf::Secret, Integ::Trusted))
            .unwrap();
        let u1 = env
            .declare("u1", Level::new(Conf::Public, Integ::Untrusted))
            .unwrap();
        let vars = [l1, l2, h1, h2, u1];

        let n_stmts = 1 + self.below(4) as usize;
        let loop_at = if self.below(2) == 0 {
            Some(self.below(n_stmts as u64) as usize)
        } else {
            None
        };
        let mut stmts: Vec<Cmd> = Vec::new();
        for i in 0..n_stmts {
            if loop_at == Some(i) {
                let guard = self.expr(&vars, domain, 1);
                let body_len = 1 + self.below(2) as usize;
                let mut body: Vec<Cmd> =
                    (0..body_len).map(|_| self.assign(&vars, domain)).collect();
                let mut b = body.pop().unwrap();
                while let Some(prev) = body.pop() {
                    b = Cmd::seq(prev, b);
                }
                stmts.push(Cmd::new(
                    CmdKind::While(guard, Box::new(b)),
                    Span::default(),
                ));
            } else {
                stmts.push(self.assign(&vars, domain));
            }
        }
        let mut body = stmts.pop().unwrap();
        while let Some(prev) = stmts.pop() {
            body = Cmd::seq(prev, body);
        }
        Program {
            env,
            labels: Vec::new(),
            body,
            hole_count: 0,
            domain,
        }
    }

    pub fn memory(&mut self, p: &Program) -> Memory {
        let vals = (0..p.env.len())
            .map(|_| self.below(p.domain as u64) as Val)
            .collect();
        Memory(vals)
    }
}
