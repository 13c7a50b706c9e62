//! Expression evaluation, small-step command semantics with events, and
//! exact whole-run execution over the finite value domain.
//!
//! Values live in `0..n` and arithmetic is modulo `n`, so every program has a
//! finite configuration space. `run` iterates the step function and detects
//! divergence exactly by finding a repeated (command, memory) configuration;
//! a diverging run is reported as a prefix plus the event trace of one cycle
//! period (a lasso).

use crate::ast::{BinOp, Cmd, CmdKind, Expr, ExprKind, LabelId, Program};
use crate::lattice::{SecurityEnv, VarId};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fmt;

pub type Val = u32;

/// Total map from variables to values, indexed by declaration order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Memory(pub Vec<Val>);

impl Memory {
    pub fn zeros(n_vars: usize) -> Memory {
        Memory(vec![0; n_vars])
    }

    pub fn get(&self, v: VarId) -> Val {
        self.0[v.index()]
    }

    pub fn set(&mut self, v: VarId, val: Val) {
        self.0[v.index()] = val;
    }

    pub fn with(&self, v: VarId, val: Val) -> Memory {
        let mut m = self.clone();
        m.set(v, val);
        m
    }

    /// Do the two memories agree on every public variable?
    pub fn agrees_public(&self, other: &Memory, env: &SecurityEnv) -> bool {
        env.vars()
            .filter(|&v| env.level(v).is_public())
            .all(|v| self.get(v) == other.get(v))
    }

    /// Do the two memories agree on every trusted variable?
    pub fn agrees_trusted(&self, other: &Memory, env: &SecurityEnv) -> bool {
        env.vars()
            .filter(|&v| env.level(v).is_trusted())
            .all(|v| self.get(v) == other.get(v))
    }

    pub fn render(&self, env: &SecurityEnv) -> String {
        let parts: Vec<String> = env
            .vars()
            .map(|v| format!("{}={}", env.name(v), self.get(v)))
            .collect();
        parts.join(", ")
    }
}

/// Enumerate all memories over the environment's variables, values in
/// `0..domain`, in lexicographic order (first-declared variable most
/// significant).
pub fn all_memories(env: &SecurityEnv, domain: Val) -> Vec<Memory> {
    let n = env.len();
    let total = (domain as u64).pow(n as u32);
    let mut out = Vec::with_capacity(total as usize);
    let mut cur = vec![0u32; n];
    loop {
        out.push(Memory(cur.clone()));
        let mut i = n;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            cur[i] += 1;
            if cur[i] < domain {
                break;
            }
            cur[i] = 0;
        }
    }
}

/// Memories agreeing with `anchor` on all public variables, secret parts
/// enumerated exhaustively.
pub fn memories_agreeing_public(env: &SecurityEnv, domain: Val, anchor: &Memory) -> Vec<Memory> {
    let secrets = env.secret_vars();
    let total = (domain as u64).pow(secrets.len() as u32);
    let mut out = Vec::with_capacity(total as usize);
    let mut cur = vec![0u32; secrets.len()];
    loop {
        let mut m = anchor.clone();
        for (i, &v) in secrets.iter().enumerate() {
            m.set(v, cur[i]);
        }
        out.push(m);
        let mut i = secrets.len();
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            cur[i] += 1;
            if cur[i] < domain {
                break;
            }
            cur[i] = 0;
        }
    }
}

/// Progress-sensitive vs progress-insensitive attacker.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    Ps,
    Pi,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Ps => "ps",
            Mode::Pi => "pi",
        })
    }
}

/// A single transition event.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Event {
    Assign {
        var: VarId,
        value: Val,
        in_attack: bool,
    },
    Endorse {
        label: LabelId,
        target: VarId,
        value: Val,
        in_attack: bool,
    },
    Checked {
        label: LabelId,
        value: Val,
        ok: bool,
    },
}

impl Event {
    pub fn in_attack(&self) -> bool {
        match self {
            Event::Assign { in_attack, .. } | Event::Endorse { in_attack, .. } => *in_attack,
            Event::Checked { .. } => false,
        }
    }

    fn tag_attack(self) -> Event {
        match self {
            Event::Assign { var, value, .. } => Event::Assign {
                var,
                value,
                in_attack: true,
            },
            Event::Endorse {
                label,
                target,
                value,
                ..
            } => Event::Endorse {
                label,
                target,
                value,
                in_attack: true,
            },
            e @ Event::Checked { .. } => e,
        }
    }
}

/// End-of-run observation: termination or divergence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Terminal {
    Term,
    Div,
}

/// An event observable by the public attacker. `Term`/`Div` stand for the
/// final ⇓/⇑ observations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LowEvent {
    Assign(VarId, Val),
    Term,
    Div,
}

/// An event on trusted state: assignments and endorsements to trusted
/// variables, plus termination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TrustedEvent {
    Assign(VarId, Val),
    Endorse(LabelId, Val),
    Term,
}

/// Big-step expression evaluation, total over the modular domain.
pub fn eval_expr(e: &Expr, m: &Memory, n: Val) -> Val {
    match &e.kind {
        ExprKind::Const(c) => c % n,
        ExprKind::Var(v) => m.get(*v),
        ExprKind::Declassify(inner) => eval_expr(inner, m, n),
        ExprKind::Bin(op, a, b) => {
            let x = eval_expr(a, m, n);
            let y = eval_expr(b, m, n);
            match op {
                BinOp::Add => (x + y) % n,
                BinOp::Sub => (x + n - y) % n,
                BinOp::Mul => ((x as u64 * y as u64) % n as u64) as Val,
                BinOp::Eq => (x == y) as Val,
                BinOp::Ne => (x != y) as Val,
                BinOp::Lt => (x < y) as Val,
                BinOp::Le => (x <= y) as Val,
                BinOp::Gt => (x > y) as Val,
                BinOp::Ge => (x >= y) as Val,
                BinOp::And => (x != 0 && y != 0) as Val,
                BinOp::Or => (x != 0 || y != 0) as Val,
            }
        }
    }
}

/// One small step. The command must be hole-free and not `Halt`.
pub fn step(c: &Cmd, m: &Memory, n: Val) -> (Cmd, Memory, Option<Event>) {
    match &c.kind {
        CmdKind::Skip => (Cmd::halt(), m.clone(), None),
        CmdKind::Assign(x, e) => {
            let v = eval_expr(e, m, n);
            (
                Cmd::halt(),
                m.with(*x, v),
                Some(Event::Assign {
                    var: *x,
                    value: v,
                    in_attack: false,
                }),
            )
        }
        CmdKind::Seq(c1, c2) => {
            let (c1n, mn, ev) = step(c1, m, n);
            if c1n.is_halt() {
                ((**c2).clone(), mn, ev)
            } else {
                (Cmd::seq(c1n, (**c2).clone()), mn, ev)
            }
        }
        CmdKind::If(e, c1, c2) => {
            if eval_expr(e, m, n) != 0 {
                ((**c1).clone(), m.clone(), None)
            } else {
                ((**c2).clone(), m.clone(), None)
            }
        }
        CmdKind::While(e, body) => {
            if eval_expr(e, m, n) != 0 {
                (Cmd::seq((**body).clone(), c.clone()), m.clone(), None)
            } else {
                (Cmd::halt(), m.clone(), None)
            }
        }
        CmdKind::Endorse {
            label,
            target,
            expr,
        } => {
            let v = eval_expr(expr, m, n);
            (
                Cmd::halt(),
                m.with(*target, v),
                Some(Event::Endorse {
                    label: *label,
                    target: *target,
                    value: v,
                    in_attack: false,
                }),
            )
        }
        CmdKind::CheckedEndorse {
            label,
            var,
            cond,
            then_branch,
            else_branch,
        } => {
            let ok = eval_expr(cond, m, n) != 0;
            let branch = if ok { then_branch } else { else_branch };
            (
                (**branch).clone(),
                m.clone(),
                Some(Event::Checked {
                    label: *label,
                    value: m.get(*var),
                    ok,
                }),
            )
        }
        CmdKind::Bracket(inner) => {
            if inner.is_halt() {
                (Cmd::halt(), m.clone(), None)
            } else {
                let (cn, mn, ev) = step(inner, m, n);
                (
                    Cmd::new(CmdKind::Bracket(Box::new(cn)), c.span),
                    mn,
                    ev.map(Event::tag_attack),
                )
            }
        }
        CmdKind::Hole(_) => panic!("cannot step a command containing holes"),
        CmdKind::Halt => panic!("cannot step halt"),
    }
}

/// Result of running a hole-free command to completion or to a detected cycle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunOutcome {
    /// Events before the cycle entry (all events, for terminating runs).
    pub events: Vec<Event>,
    /// Events of one cycle period; empty for terminating runs.
    pub lasso: Vec<Event>,
    pub terminated: bool,
    /// The repeated configuration, for replaying the cycle.
    pub cycle_entry: Option<(Cmd, Memory)>,
    /// Final memory for terminating runs, cycle-entry memory otherwise.
    pub final_memory: Memory,
}

impl RunOutcome {
    pub fn diverged(&self) -> bool {
        !self.terminated
    }
}

const STEP_SAFETY_CAP: u64 = 200_000_000;

/// Budget for the allocation-free fast path; runs that outlive it are
/// re-executed with full cycle detection. Measured in frame pops, roughly
/// twice the step count.
const FAST_PATH_STEPS: usize = 512;

enum Frame<'a> {
    Run(&'a Cmd),
    ExitBracket,
}

/// Continuation-stack interpreter for runs that terminate within the
/// budget. Produces exactly the event sequence of the small-step semantics.
fn run_terminating(c: &Cmd, m: &Memory, n: Val, budget: usize) -> Option<(Vec<Event>, Memory)> {
    let mut stack: Vec<Frame> = vec![Frame::Run(c)];
    let mut mem = m.clone();
    let mut events = Vec::new();
    let mut attack_depth = 0usize;
    let mut fuel = budget;
    while let Some(frame) = stack.pop() {
        fuel = fuel.checked_sub(1)?;
        let cur = match frame {
            Frame::ExitBracket => {
                attack_depth -= 1;
                continue;
            }
            Frame::Run(c) => c,
        };
        match &cur.kind {
            CmdKind::Skip | CmdKind::Halt => {}
            CmdKind::Assign(x, e) => {
                let v = eval_expr(e, &mem, n);
                mem.set(*x, v);
                events.push(Event::Assign {
                    var: *x,
                    value: v,
                    in_attack: attack_depth > 0,
                });
            }
            CmdKind::Seq(a, b) => {
                stack.push(Frame::Run(b));
                stack.push(Frame::Run(a));
            }
            CmdKind::If(e, a, b) => {
                if eval_expr(e, &mem, n) != 0 {
                    stack.push(Frame::Run(a));
                } else {
                    stack.push(Frame::Run(b));
                }
            }
            CmdKind::While(e, body) => {
                if eval_expr(e, &mem, n) != 0 {
                    stack.push(Frame::Run(cur));
                    stack.push(Frame::Run(body));
                }
            }
            CmdKind::Endorse {
                label,
                target,
                expr,
            } => {
                let v = eval_expr(expr, &mem, n);
                mem.set(*target, v);
                events.push(Event::Endorse {
                    label: *label,
                    target: *target,
                    value: v,
                    in_attack: attack_depth > 0,
                });
            }
            CmdKind::CheckedEndorse {
                label,
                var,
                cond,
                then_branch,
                else_branch,
            } => {
                let ok = eval_expr(cond, &mem, n) != 0;
                events.push(Event::Checked {
                    label: *label,
                    value: mem.get(*var),
                    ok,
                });
                stack.push(Frame::Run(if ok { then_branch } else { else_branch }));
            }
            CmdKind::Bracket(inner) => {
                attack_depth += 1;
                stack.push(Frame::ExitBracket);
                stack.push(Frame::Run(inner));
            }
            CmdKind::Hole(_) => panic!("cannot run a command containing holes"),
        }
    }
    Some((events, mem))
}

/// Run to halt or to a repeated configuration. Always returns: the
/// configuration space of a hole-free command over a finite domain is finite.
pub fn run(c: &Cmd, m: &Memory, n: Val) -> RunOutcome {
    if let Some((events, final_memory)) = run_terminating(c, m, n, FAST_PATH_STEPS) {
        return RunOutcome {
            events,
            lasso: Vec::new(),
            terminated: true,
            cycle_entry: None,
            final_memory,
        };
    }
    let mut seen: HashMap<(Cmd, Memory), usize> = HashMap::new();
    let mut events: Vec<Event> = Vec::new();
    let mut cur_c = c.clone();
    let mut cur_m = m.clone();
    let mut steps: u64 = 0;
    loop {
        if cur_c.is_halt() {
            return RunOutcome {
                events,
                lasso: Vec::new(),
                terminated: true,
                cycle_entry: None,
                final_memory: cur_m,
            };
        }
        if let Some(&ev_len) = seen.get(&(cur_c.clone(), cur_m.clone())) {
            let lasso = events.split_off(ev_len);
            return RunOutcome {
                events,
                lasso,
                terminated: false,
                cycle_entry: Some((cur_c, cur_m.clone())),
                final_memory: cur_m,
            };
        }
        seen.insert((cur_c.clone(), cur_m.clone()), events.len());
        let (cn, mn, ev) = step(&cur_c, &cur_m, n);
        if let Some(ev) = ev {
            events.push(ev);
        }
        cur_c = cn;
        cur_m = mn;
        steps += 1;
        assert!(steps < STEP_SAFETY_CAP, "step safety cap exceeded (bug)");
    }
}

/// Convenience: substitute-free program body run on `m`.
pub fn run_program(p: &Program, m: &Memory) -> RunOutcome {
    run(&p.body, m, p.domain)
}

/// Temporaries introduced by the checked-endorsement lowering are
/// translation bookkeeping, not program observables; runs of a lowered
/// program project to the same observations as the source.
fn observable(var: VarId, env: &SecurityEnv) -> bool {
    !env.name(var).starts_with(crate::parser::TEMP_PREFIX)
}

fn low_of_event(ev: &Event, env: &SecurityEnv) -> Option<LowEvent> {
    match ev {
        Event::Assign { var, value, .. }
            if env.level(*var).is_public() && observable(*var, env) =>
        {
            Some(LowEvent::Assign(*var, *value))
        }
        // an endorsement into a public variable doubles as a low assignment
        Event::Endorse { target, value, .. }
            if env.level(*target).is_public() && observable(*target, env) =>
        {
            Some(LowEvent::Assign(*target, *value))
        }
        _ => None,
    }
}

fn trusted_of_event(ev: &Event, env: &SecurityEnv) -> Option<TrustedEvent> {
    match ev {
        Event::Assign { var, value, .. }
            if env.level(*var).is_trusted() && observable(*var, env) =>
        {
            Some(TrustedEvent::Assign(*var, *value))
        }
        Event::Endorse {
            label,
            target,
            value,
            ..
        } if env.level(*target).is_trusted() && observable(*target, env) => {
            Some(TrustedEvent::Endorse(*label, *value))
        }
        _ => None,
    }
}

/// Project a finite event trace to its low events. A trailing `Term` is kept
/// in both modes; a trailing `Div` only for the progress-sensitive attacker.
pub fn low_projection(
    events: &[Event],
    terminal: Option<Terminal>,
    env: &SecurityEnv,
    mode: Mode,
) -> Vec<LowEvent> {
    let mut out: Vec<LowEvent> = events.iter().filter_map(|e| low_of_event(e, env)).collect();
    match terminal {
        Some(Terminal::Term) => out.push(LowEvent::Term),
        Some(Terminal::Div) if mode == Mode::Ps => out.push(LowEvent::Div),
        _ => {}
    }
    out
}

/// Project a finite event trace to its trusted events plus termination.
pub fn trusted_projection(
    events: &[Event],
    terminal: Option<Terminal>,
    env: &SecurityEnv,
) -> Vec<TrustedEvent> {
    let mut out: Vec<TrustedEvent> = events
        .iter()
        .filter_map(|e| trusted_of_event(e, env))
        .collect();
    if terminal == Some(Terminal::Term) {
        out.push(TrustedEvent::Term);
    }
    out
}

/// The (possibly infinite) low-event sequence of a run, as observed in a
/// given mode. Infinite sequences arise from diverging runs whose cycle emits
/// low events; they are represented as head + repeating cycle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LowRun {
    pub head: Vec<LowEvent>,
    pub cycle: Vec<LowEvent>,
    pub diverges: bool,
}

impl LowRun {
    pub fn of_run(run: &RunOutcome, env: &SecurityEnv, mode: Mode) -> LowRun {
        let mut head: Vec<LowEvent> = run
            .events
            .iter()
            .filter_map(|e| low_of_event(e, env))
            .collect();
        let cycle: Vec<LowEvent> = run
            .lasso
            .iter()
            .filter_map(|e| low_of_event(e, env))
            .collect();
        if run.terminated {
            head.push(LowEvent::Term);
        } else if cycle.is_empty() && mode == Mode::Ps {
            head.push(LowEvent::Div);
        }
        LowRun {
            head,
            cycle,
            diverges: !run.terminated,
        }
    }

    pub fn is_infinite(&self) -> bool {
        !self.cycle.is_empty()
    }

    /// Number of observable events, None when infinite.
    pub fn finite_len(&self) -> Option<usize> {
        if self.is_infinite() {
            None
        } else {
            Some(self.head.len())
        }
    }

    pub fn event_at(&self, i: usize) -> Option<LowEvent> {
        if i < self.head.len() {
            Some(self.head[i])
        } else if self.cycle.is_empty() {
            None
        } else {
            Some(self.cycle[(i - self.head.len()) % self.cycle.len()])
        }
    }

    /// Does the observed sequence start with `prefix`?
    pub fn matches_prefix(&self, prefix: &[LowEvent]) -> bool {
        prefix
            .iter()
            .enumerate()
            .all(|(i, e)| self.event_at(i) == Some(*e))
    }

    /// Does the observed sequence extend `prefix` by at least one more
    /// proper low event? The final ⇓/⇑ observations are not produced by
    /// transitions and do not count as progress.
    pub fn extends_strictly(&self, prefix: &[LowEvent]) -> bool {
        self.matches_prefix(prefix)
            && matches!(self.event_at(prefix.len()), Some(LowEvent::Assign(..)))
    }

    /// First position where two sequences disagree (an absent event counts
    /// as a disagreement); None when equal forever. Eventually-periodic
    /// sequences agreeing up to max head + lcm of periods agree everywhere.
    pub fn first_diff(&self, other: &LowRun) -> Option<usize> {
        let bound = self.head.len().max(other.head.len())
            + lcm(self.cycle.len().max(1), other.cycle.len().max(1))
            + 1;
        (0..bound).find(|&i| self.event_at(i) != other.event_at(i))
    }

    /// Materialize the first `len` events (fewer if the sequence ends).
    pub fn materialize(&self, len: usize) -> Vec<LowEvent> {
        (0..len).map_while(|i| self.event_at(i)).collect()
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn lcm(a: usize, b: usize) -> usize {
    a / gcd(a, b) * b
}

/// The (possibly infinite) trusted-event sequence of a run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrustedRun {
    pub head: Vec<TrustedEvent>,
    pub cycle: Vec<TrustedEvent>,
}

impl TrustedRun {
    pub fn of_run(run: &RunOutcome, env: &SecurityEnv) -> TrustedRun {
        let mut head: Vec<TrustedEvent> = run
            .events
            .iter()
            .filter_map(|e| trusted_of_event(e, env))
            .collect();
        let cycle: Vec<TrustedEvent> = run
            .lasso
            .iter()
            .filter_map(|e| trusted_of_event(e, env))
            .collect();
        if run.terminated {
            head.push(TrustedEvent::Term);
        }
        TrustedRun { head, cycle }
    }

    pub fn is_infinite(&self) -> bool {
        !self.cycle.is_empty()
    }

    pub fn event_at(&self, i: usize) -> Option<TrustedEvent> {
        if i < self.head.len() {
            Some(self.head[i])
        } else if self.cycle.is_empty() {
            None
        } else {
            Some(self.cycle[(i - self.head.len()) % self.cycle.len()])
        }
    }

    pub fn matches_prefix(&self, prefix: &[TrustedEvent]) -> bool {
        prefix
            .iter()
            .enumerate()
            .all(|(i, e)| self.event_at(i) == Some(*e))
    }

    pub fn extends_strictly(&self, prefix: &[TrustedEvent]) -> bool {
        self.matches_prefix(prefix) && self.event_at(prefix.len()).is_some()
    }
}

// --- trace rendering ---------------------------------------------------------

/// One event per line; events produced by attacker-injected code are
/// prefixed with `[a]`.
pub fn event_to_string(ev: &Event, p: &Program) -> String {
    let tag = if ev.in_attack() { "[a] " } else { "" };
    match ev {
        Event::Assign { var, value, .. } => format!("{tag}({}, {value})", p.env.name(*var)),
        Event::Endorse { label, value, .. } => {
            format!("{tag}endorse({}, {value})", p.label_name(*label))
        }
        Event::Checked { label, value, ok } => {
            format!("checked({}, {value}, {})", p.label_name(*label), *ok as u32)
        }
    }
}

pub fn trace_to_lines(run: &RunOutcome, p: &Program) -> Vec<String> {
    let mut lines: Vec<String> = run.events.iter().map(|e| event_to_string(e, p)).collect();
    if run.terminated {
        lines.push("⇓".to_string());
    } else {
        for e in &run.lasso {
            lines.push(format!("{} (loops)", event_to_string(e, p)));
        }
        lines.push("⇑".to_string());
    }
    lines
}

pub fn low_event_to_string(ev: &LowEvent, env: &SecurityEnv) -> String {
    match ev {
        LowEvent::Assign(v, val) => format!("({}, {val})", env.name(*v)),
        LowEvent::Term => "⇓".to_string(),
        LowEvent::Div => "⇑".to_string(),
    }
}
