//! Attack vectors, enumeration of a finite attack universe, hole
//! substitution, semantic fairness checking, and irrelevant-attack
//! computation for direct and checked endorsement.
//!
//! The enumerated universe is straight-line constant assignments to
//! untrusted variables (optionally plus a pure divergence attack). A Reject
//! verdict found inside it is definitive; an Accept verdict is relative to
//! it. Fairness itself accepts arbitrary hole-free commands and is decided
//! semantically, over all initial memories of the reachability-translated
//! program.

use crate::ast::{Cmd, CmdKind, Expr, Program};
use crate::semantics::{all_memories, run, LowEvent, LowRun, Memory, Mode, RunOutcome, Val};
use crate::transform::treach;
use std::collections::BTreeSet;
use std::fmt;
use thiserror::Error;

/// One attack command per hole.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AttackVector {
    pub components: Vec<Cmd>,
}

impl AttackVector {
    pub fn new(components: Vec<Cmd>) -> AttackVector {
        AttackVector { components }
    }

    pub fn arity(&self) -> usize {
        self.components.len()
    }

    /// Human-readable form, components separated by `|` for multiple holes.
    pub fn render(&self, p: &Program) -> String {
        if self.components.is_empty() {
            return "<no holes>".to_string();
        }
        let parts: Vec<String> = self
            .components
            .iter()
            .map(|c| render_attack_cmd(c, p))
            .collect();
        parts.join(" | ")
    }
}

fn render_attack_cmd(c: &Cmd, p: &Program) -> String {
    match &c.kind {
        CmdKind::Skip => "skip".to_string(),
        CmdKind::Assign(v, e) => format!(
            "{} := {}",
            p.env.name(*v),
            crate::ast::expr_to_string(e, &p.env)
        ),
        CmdKind::Seq(a, b) => format!("{}; {}", render_attack_cmd(a, p), render_attack_cmd(b, p)),
        CmdKind::While(e, _) => {
            format!("while ({}) {{ .. }}", crate::ast::expr_to_string(e, &p.env))
        }
        other => format!("{other:?}"),
    }
}

/// A set of attack vectors, ordered for deterministic iteration.
pub type AttackSet = BTreeSet<AttackVector>;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum AttackError {
    #[error("attack vector has {got} components but the program has {want} holes")]
    Arity { got: usize, want: usize },
    #[error("attack command is not admissible: {0}")]
    BadCommand(String),
}

/// Enumeration bounds for the attack universe.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AttackConfig {
    /// Maximum number of assignments in one straight-line component.
    pub max_len: usize,
    /// Also include the non-terminating attack `while (1) { skip }`.
    pub include_diverge: bool,
}

impl AttackConfig {
    pub fn new(max_len: usize, include_diverge: bool) -> AttackConfig {
        AttackConfig {
            max_len,
            include_diverge,
        }
    }

    /// Per-check defaults: one assignment per untrusted variable, divergence
    /// attack only for the progress-sensitive attacker.
    pub fn default_for(p: &Program, mode: Mode) -> AttackConfig {
        AttackConfig {
            max_len: p.env.untrusted_vars().len().max(1),
            include_diverge: mode == Mode::Ps,
        }
    }
}

fn seq_of(mut cmds: Vec<Cmd>) -> Cmd {
    let mut out = cmds.pop().expect("nonempty");
    while let Some(prev) = cmds.pop() {
        out = Cmd::seq(prev, out);
    }
    out
}

/// All straight-line components up to the configured length, in a fixed
/// order: skip, then single assignments (variable-major, value-minor), then
/// longer sequences, then the divergence attack.
fn enumerate_components(p: &Program, cfg: &AttackConfig) -> Vec<Cmd> {
    let untrusted = p.env.untrusted_vars();
    let mut singles: Vec<Cmd> = Vec::new();
    for &v in &untrusted {
        for val in 0..p.domain {
            singles.push(Cmd::assign(v, Expr::constant(val)));
        }
    }
    let mut out = vec![Cmd::skip()];
    let mut layer: Vec<Vec<Cmd>> = vec![vec![]];
    for _ in 1..=cfg.max_len {
        let mut next = Vec::new();
        for prefix in &layer {
            for s in &singles {
                let mut seq = prefix.clone();
                seq.push(s.clone());
                out.push(seq_of(seq.clone()));
                next.push(seq);
            }
        }
        layer = next;
    }
    if cfg.include_diverge {
        out.push(Cmd::new(
            CmdKind::While(Expr::constant(1), Box::new(Cmd::skip())),
            Default::default(),
        ));
    }
    out
}

/// The full (syntactic) attack universe: the cartesian product of the
/// component enumeration over all holes. Fairness is not yet applied.
pub fn enumerate_attacks(p: &Program, cfg: &AttackConfig) -> Vec<AttackVector> {
    let comps = enumerate_components(p, cfg);
    let mut out: Vec<AttackVector> = vec![AttackVector::new(Vec::new())];
    for _ in 0..p.hole_count {
        let mut next = Vec::with_capacity(out.len() * comps.len());
        for v in &out {
            for c in &comps {
                let mut comps2 = v.components.clone();
                comps2.push(c.clone());
                next.push(AttackVector::new(comps2));
            }
        }
        out = next;
    }
    out
}

fn validate_attack_cmd(p: &Program, c: &Cmd) -> Result<(), AttackError> {
    match &c.kind {
        CmdKind::Skip => Ok(()),
        CmdKind::Assign(v, e) => {
            if p.env.level(*v).is_trusted() {
                return Err(AttackError::BadCommand(format!(
                    "attack assigns to trusted variable `{}`",
                    p.env.name(*v)
                )));
            }
            if e.contains_declassify() {
                return Err(AttackError::BadCommand(
                    "attack contains declassification".to_string(),
                ));
            }
            Ok(())
        }
        CmdKind::Seq(a, b) => {
            validate_attack_cmd(p, a)?;
            validate_attack_cmd(p, b)
        }
        CmdKind::If(e, a, b) => {
            if e.contains_declassify() {
                return Err(AttackError::BadCommand(
                    "attack contains declassification".to_string(),
                ));
            }
            validate_attack_cmd(p, a)?;
            validate_attack_cmd(p, b)
        }
        CmdKind::While(e, body) => {
            if e.contains_declassify() {
                return Err(AttackError::BadCommand(
                    "attack contains declassification".to_string(),
                ));
            }
            validate_attack_cmd(p, body)
        }
        CmdKind::Hole(_) => Err(AttackError::BadCommand(
            "attack contains a hole".to_string(),
        )),
        CmdKind::Endorse { .. } | CmdKind::CheckedEndorse { .. } => Err(AttackError::BadCommand(
            "attack contains an endorsement".to_string(),
        )),
        CmdKind::Bracket(_) | CmdKind::Halt => Err(AttackError::BadCommand(
            "attack contains a runtime-only command".to_string(),
        )),
    }
}

/// Replace the i-th hole with the i-th attack component, wrapped in the
/// attack bracket so its events are tagged.
pub fn substitute(p: &Program, attack: &AttackVector) -> Result<Cmd, AttackError> {
    if attack.arity() != p.hole_count {
        return Err(AttackError::Arity {
            got: attack.arity(),
            want: p.hole_count,
        });
    }
    for c in &attack.components {
        validate_attack_cmd(p, c)?;
    }
    Ok(substitute_cmd(&p.body, attack))
}

fn substitute_cmd(c: &Cmd, attack: &AttackVector) -> Cmd {
    let kind = match &c.kind {
        CmdKind::Hole(i) => CmdKind::Bracket(Box::new(attack.components[*i].clone())),
        CmdKind::Seq(a, b) => CmdKind::Seq(
            Box::new(substitute_cmd(a, attack)),
            Box::new(substitute_cmd(b, attack)),
        ),
        CmdKind::If(e, a, b) => CmdKind::If(
            e.clone(),
            Box::new(substitute_cmd(a, attack)),
            Box::new(substitute_cmd(b, attack)),
        ),
        CmdKind::While(e, body) => {
            CmdKind::While(e.clone(), Box::new(substitute_cmd(body, attack)))
        }
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
            then_branch: Box::new(substitute_cmd(then_branch, attack)),
            else_branch: Box::new(substitute_cmd(else_branch, attack)),
        },
        other => other.clone(),
    };
    Cmd::new(kind, c.span)
}

/// Attack-tagged maximal event segments of a run, with the number of events
/// preceding each segment. Segments inside the lasso are examined over two
/// unrollings, which covers every distinct boundary of the periodic tail.
fn attack_segments(run: &RunOutcome) -> Vec<(usize, usize)> {
    let mut events = run.events.clone();
    events.extend(run.lasso.iter().cloned());
    events.extend(run.lasso.iter().cloned());
    let mut segs = Vec::new();
    let mut i = 0;
    while i < events.len() {
        if events[i].in_attack() {
            let start = i;
            while i < events.len() && events[i].in_attack() {
                i += 1;
            }
            segs.push((start, i));
        } else {
            i += 1;
        }
    }
    segs
}

/// Is the vector a fair attack on the program? Checked semantically over
/// every initial memory of the reachability translation: within each
/// attack-produced segment, the attacker's own events must not refine
/// attacker knowledge, and no trusted events may be produced.
pub fn is_fair(p: &Program, attack: &AttackVector) -> Result<bool, AttackError> {
    let tre = treach(p).map_err(|e| AttackError::BadCommand(e.to_string()))?;
    let c = substitute(&tre, attack)?;
    // quantify over original variables; `reach` starts at 0
    let reach = tre.env.lookup(crate::transform::REACH_VAR).unwrap();
    let memories: Vec<Memory> = all_memories(&tre.env, tre.domain)
        .into_iter()
        .filter(|m| m.get(reach) == 0)
        .collect();
    let runs: Vec<RunOutcome> = memories.iter().map(|m| run(&c, m, tre.domain)).collect();
    let low_runs: Vec<LowRun> = runs
        .iter()
        .map(|r| LowRun::of_run(r, &tre.env, Mode::Ps))
        .collect();
    // group sibling memories (equal public parts) once
    let public_vars = tre.env.public_vars();
    let mut groups: std::collections::BTreeMap<Vec<Val>, Vec<usize>> =
        std::collections::BTreeMap::new();
    for (i, m) in memories.iter().enumerate() {
        let key: Vec<Val> = public_vars.iter().map(|&v| m.get(v)).collect();
        groups.entry(key).or_default().push(i);
    }

    for (mi, r) in runs.iter().enumerate() {
        let mut full_events = r.events.clone();
        full_events.extend(r.lasso.iter().cloned());
        full_events.extend(r.lasso.iter().cloned());
        let key: Vec<Val> = public_vars.iter().map(|&v| memories[mi].get(v)).collect();
        let siblings = &groups[&key];
        for (start, end) in attack_segments(r) {
            // no trusted events inside the attack segment
            if full_events[start..end]
                .iter()
                .any(|ev| trusted_of(ev, &tre))
            {
                return Ok(false);
            }
            // knowledge before the segment equals knowledge including it
            let low_before =
                crate::semantics::low_projection(&full_events[..start], None, &tre.env, Mode::Ps);
            let low_incl =
                crate::semantics::low_projection(&full_events[..end], None, &tre.env, Mode::Ps);
            if low_before.len() == low_incl.len() {
                continue;
            }
            let k_before = count_matching(&low_runs, siblings, &low_before);
            let k_incl = count_matching(&low_runs, siblings, &low_incl);
            if k_before != k_incl {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

fn trusted_of(ev: &crate::semantics::Event, p: &Program) -> bool {
    !crate::semantics::trusted_projection(std::slice::from_ref(ev), None, &p.env).is_empty()
}

fn count_matching(low_runs: &[LowRun], siblings: &[usize], prefix: &[LowEvent]) -> usize {
    siblings
        .iter()
        .filter(|&&i| low_runs[i].matches_prefix(prefix))
        .count()
}

/// The fair subset of the enumerated universe, in enumeration order.
pub fn fair_universe(p: &Program, cfg: &AttackConfig) -> Vec<AttackVector> {
    enumerate_attacks(p, cfg)
        .into_iter()
        .filter(|a| is_fair(p, a).unwrap_or(false))
        .collect()
}

/// Endorsement events of a run: direct endorsements as (label, value),
/// checked endorsements as (label, value, check-bit). `infinite_tail` marks
/// runs whose lasso keeps producing endorsement events.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EndorseStream {
    pub direct: Vec<(crate::ast::LabelId, Val)>,
    pub checked: Vec<(crate::ast::LabelId, Val, bool)>,
    pub infinite_direct: bool,
    pub infinite_checked: bool,
}

/// Extract the endorsement-event stream of a run, unrolling a lasso that
/// produces endorsement events up to `unroll_to` times.
pub fn endorse_stream_of(run: &RunOutcome, unroll_to: usize) -> EndorseStream {
    let mut direct = Vec::new();
    let mut checked = Vec::new();
    let collect = |evs: &[crate::semantics::Event],
                   direct: &mut Vec<(crate::ast::LabelId, Val)>,
                   checked: &mut Vec<(crate::ast::LabelId, Val, bool)>| {
        for ev in evs {
            match ev {
                crate::semantics::Event::Endorse { label, value, .. } => {
                    direct.push((*label, *value))
                }
                crate::semantics::Event::Checked { label, value, ok } => {
                    checked.push((*label, *value, *ok))
                }
                _ => {}
            }
        }
    };
    collect(&run.events, &mut direct, &mut checked);
    let lasso_direct = run
        .lasso
        .iter()
        .any(|e| matches!(e, crate::semantics::Event::Endorse { .. }));
    let lasso_checked = run
        .lasso
        .iter()
        .any(|e| matches!(e, crate::semantics::Event::Checked { .. }));
    if lasso_direct || lasso_checked {
        // each unrolling adds at least one endorsement event
        for _ in 0..unroll_to {
            collect(&run.lasso, &mut direct, &mut checked);
        }
    }
    EndorseStream {
        direct,
        checked,
        infinite_direct: lasso_direct,
        infinite_checked: lasso_checked,
    }
}

/// Attacks from `universe` that lead to an irrelevant trace for the
/// reference trace: they agree with it on some prefix of direct endorsement
/// events and then disagree on the value of the next one (same label).
pub fn irrelevant_attacks(
    p: &Program,
    m: &Memory,
    reference: &EndorseStream,
    universe: &[AttackVector],
) -> AttackSet {
    let mut out = AttackSet::new();
    for a in universe {
        let Ok(c) = substitute(p, a) else { continue };
        let r = run(&c, m, p.domain);
        let s = endorse_stream_of(&r, reference.direct.len() + 1);
        if direct_irrelevance(&reference.direct, &s.direct) {
            out.insert(a.clone());
        }
    }
    out
}

pub(crate) fn direct_irrelevance(
    reference: &[(crate::ast::LabelId, Val)],
    candidate: &[(crate::ast::LabelId, Val)],
) -> bool {
    for i in 0..reference.len().min(candidate.len()) {
        let (rl, rv) = reference[i];
        let (cl, cv) = candidate[i];
        if rl != cl {
            return false; // different endorsement reached; no match possible
        }
        if rv != cv {
            return true; // agrees on the first i, disagrees on endorsement i+1
        }
    }
    false
}

/// Checked-endorsement variant: agreement on a prefix of checked events,
/// then a checked event with the same label, at least one positive check
/// bit, a different value, and no checked events afterwards.
pub fn irrelevant_attacks_checked(
    p: &Program,
    m: &Memory,
    reference: &EndorseStream,
    universe: &[AttackVector],
) -> AttackSet {
    let mut out = AttackSet::new();
    for a in universe {
        let Ok(c) = substitute(p, a) else { continue };
        let r = run(&c, m, p.domain);
        let s = endorse_stream_of(&r, reference.checked.len() + 1);
        if checked_irrelevance(&reference.checked, &s) {
            out.insert(a.clone());
        }
    }
    out
}

pub(crate) fn checked_irrelevance(
    reference: &[(crate::ast::LabelId, Val, bool)],
    candidate: &EndorseStream,
) -> bool {
    // the candidate trace is cut right after the disagreeing event, so
    // later checked events of the run impose nothing
    for (&(rl, rv, rb), &(cl, cv, cb)) in reference.iter().zip(&candidate.checked) {
        if rl != cl {
            return false; // different endorsement reached
        }
        if rv != cv {
            // disagreement counts only if at least one check succeeded
            return rb || cb;
        }
        if rb != cb {
            return false; // same value, different outcome: not an agreement
        }
    }
    false
}

impl fmt::Display for AttackConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "straight-line ≤ {}{}",
            self.max_len,
            if self.include_diverge {
                " + diverge"
            } else {
                ""
            }
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_program;

    fn attack(p: &Program, src: &str) -> AttackVector {
        // parse the attack body with the same declarations; spans are
        // stripped so parsed vectors compare equal to enumerated ones
        let decls: String = p
            .env
            .vars()
            .map(|v| format!("var {}: {};\n", p.env.name(v), p.env.level(v)))
            .collect();
        let q = parse_program(&format!("{decls}{src}")).unwrap();
        AttackVector::new(vec![q.body.strip_spans()])
    }

    #[test]
    fn enumeration_counts() {
        let p = parse_program("var u: public untrusted; var l: public trusted; [#]; l := 1")
            .unwrap()
            .with_domain(2);
        let atks = enumerate_attacks(&p, &AttackConfig::new(1, false));
        // skip, u:=0, u:=1
        assert_eq!(atks.len(), 3);

        let q = parse_program(
            "var u: public untrusted; var u2: public untrusted; var l: public trusted;
             [#]; l := 1",
        )
        .unwrap()
        .with_domain(2);
        let atks = enumerate_attacks(&q, &AttackConfig::new(2, false));
        // 1 + 4 + 16 straight-line candidates
        assert_eq!(atks.len(), 21);

        let none = parse_program("var l: public trusted; l := 1").unwrap();
        let atks = enumerate_attacks(&none, &AttackConfig::new(2, true));
        assert_eq!(atks.len(), 1);
        assert_eq!(atks[0].arity(), 0);
    }

    #[test]
    fn substitution_wraps_in_bracket_and_checks_arity() {
        let p = parse_program(
            "var u: public untrusted; var h: secret trusted; var low: public trusted;
             [#]; low := u < h",
        )
        .unwrap();
        let a = attack(&p, "u := 3");
        let c = substitute(&p, &a).unwrap();
        let CmdKind::Seq(first, _) = &c.kind else {
            panic!()
        };
        assert!(matches!(first.kind, CmdKind::Bracket(_)));

        let bad = AttackVector::new(vec![Cmd::skip(), Cmd::skip()]);
        assert!(matches!(
            substitute(&p, &bad),
            Err(AttackError::Arity { got: 2, want: 1 })
        ));

        let none = parse_program("var l: public trusted; l := 1").unwrap();
        let empty = AttackVector::new(vec![]);
        assert_eq!(
            substitute(&none, &empty).unwrap().strip_spans(),
            none.body.strip_spans()
        );
    }

    #[test]
    fn attacks_may_not_touch_trusted_state_syntactically() {
        let p =
            parse_program("var u: public untrusted; var t: public trusted; [#]; t := 1").unwrap();
        let a = AttackVector::new(vec![Cmd::assign(
            p.env.lookup("t").unwrap(),
            Expr::constant(1),
        )]);
        assert!(matches!(
            substitute(&p, &a),
            Err(AttackError::BadCommand(_))
        ));
    }

    #[test]
    fn fairness_reproduces_the_guarded_hole_example() {
        let p = parse_program(
            "var h: secret trusted; var low: public untrusted;
             if (h > 0) { [#] } else { skip }",
        )
        .unwrap()
        .with_domain(8);
        let fair1 = attack(&p, "low := 1");
        assert!(is_fair(&p, &fair1).unwrap());
        let fair2 = attack(&p, "low := h > 0");
        assert!(is_fair(&p, &fair2).unwrap());
        let unfair = attack(&p, "low := h");
        assert!(!is_fair(&p, &unfair).unwrap());
    }

    #[test]
    fn skip_vector_is_fair_and_diverge_is_fair() {
        let p = parse_program(
            "var u: public untrusted; var h: secret trusted; var low: public trusted;
             [#]; low := u < h",
        )
        .unwrap();
        let skip = AttackVector::new(vec![Cmd::skip()]);
        assert!(is_fair(&p, &skip).unwrap());
        let div = attack(&p, "while (1) { skip }");
        assert!(is_fair(&p, &div).unwrap());
    }

    #[test]
    fn attack_writing_trusted_is_unfair_even_semantically() {
        // bypass enumeration: hand-build an attack that writes a trusted var
        let p = parse_program("var u: public untrusted; var t: secret trusted; [#]; skip").unwrap();
        let t = p.env.lookup("t").unwrap();
        let a = AttackVector::new(vec![Cmd::assign(t, Expr::constant(1))]);
        // substitution refuses it outright
        assert!(substitute(&p, &a).is_err());
        assert!(is_fair(&p, &a).is_err());
    }

    #[test]
    fn fair_universe_filters() {
        let p = parse_program(
            "var u: public untrusted; var h: secret trusted; var low: public trusted;
             [#]; low := u < h",
        )
        .unwrap()
        .with_domain(4);
        let cfg = AttackConfig::new(1, true);
        let u = fair_universe(&p, &cfg);
        // constant assignments and skip and diverge are all fair here
        assert_eq!(u.len(), 6);
    }

    #[test]
    fn irrelevant_attacks_empty_without_endorsements() {
        let p = parse_program(
            "var u: public untrusted; var h: secret trusted; var low: public trusted;
             [#]; low := u < h",
        )
        .unwrap();
        let cfg = AttackConfig::new(1, false);
        let universe = fair_universe(&p, &cfg);
        let m = Memory::zeros(p.env.len());
        let a = &universe[1];
        let c = substitute(&p, a).unwrap();
        let r = run(&c, &m, p.domain);
        let s = endorse_stream_of(&r, 4);
        assert!(s.direct.is_empty() && s.checked.is_empty());
        assert!(irrelevant_attacks(&p, &m, &s, &universe).is_empty());
        assert!(irrelevant_attacks_checked(&p, &m, &s, &universe).is_empty());
    }

    #[test]
    fn irrelevant_attacks_for_endorsed_comparison() {
        // low := endorse(u < h): with h = 7, irrelevant attacks set u >= 7
        let p = parse_program(
            "var u: public untrusted; var h: secret trusted; var low: public trusted;
             [#]; low := endorse@e1(u < h)",
        )
        .unwrap()
        .with_domain(8);
        let cfg = AttackConfig::new(1, false);
        let universe = fair_universe(&p, &cfg);
        let mut m = Memory::zeros(p.env.len());
        m.set(p.env.lookup("h").unwrap(), 7);
        m.set(p.env.lookup("u").unwrap(), 1);
        let a = attack(&p, "u := 1");
        let c = substitute(&p, &a).unwrap();
        let r = run(&c, &m, p.domain);
        let s = endorse_stream_of(&r, 4);
        let omega = irrelevant_attacks(&p, &m, &s, &universe);
        let rendered: BTreeSet<String> = omega.iter().map(|b| b.render(&p)).collect();
        assert_eq!(rendered, BTreeSet::from(["u := 7".to_string()]));
    }

    #[test]
    fn irrelevant_attacks_direct_value_mismatch() {
        // t := endorse(u) at N=2: with reference from u:=1, the irrelevant
        // attacks are those whose endorsed value is 0
        let p = parse_program(
            "var u: public untrusted; var t: public trusted; [#]; t := endorse@e1(u)",
        )
        .unwrap()
        .with_domain(2);
        let cfg = AttackConfig::new(1, false);
        let universe = fair_universe(&p, &cfg);
        let mut m = Memory::zeros(p.env.len());
        m.set(p.env.lookup("u").unwrap(), 1);
        let a = attack(&p, "u := 1");
        let c = substitute(&p, &a).unwrap();
        let s = endorse_stream_of(&run(&c, &m, p.domain), 4);
        let omega = irrelevant_attacks(&p, &m, &s, &universe);
        let rendered: BTreeSet<String> = omega.iter().map(|b| b.render(&p)).collect();
        assert_eq!(rendered, BTreeSet::from(["u := 0".to_string()]));
    }

    #[test]
    fn irrelevant_attacks_grow_with_the_trace() {
        // extending the reference trace never removes irrelevant attacks
        let p = parse_program(
            "var u: public untrusted; var t: public trusted; var t2: public trusted;
             [#]; t := endorse@e1(u); t2 := endorse@e2(u + 1)",
        )
        .unwrap()
        .with_domain(4);
        let cfg = AttackConfig::new(1, false);
        let universe = fair_universe(&p, &cfg);
        let m = Memory::zeros(p.env.len());
        let a = attack(&p, "u := 1");
        let c = substitute(&p, &a).unwrap();
        let full = endorse_stream_of(&run(&c, &m, p.domain), 4);
        let mut prev = AttackSet::new();
        for i in 0..=full.direct.len() {
            let partial = EndorseStream {
                direct: full.direct[..i].to_vec(),
                checked: Vec::new(),
                infinite_direct: false,
                infinite_checked: false,
            };
            let omega = irrelevant_attacks(&p, &m, &partial, &universe);
            assert!(prev.is_subset(&omega), "Ω shrank when the trace grew");
            prev = omega;
        }
        assert!(!prev.is_empty());
    }

    #[test]
    fn irrelevant_checked_needs_value_difference_and_a_positive_check() {
        let p = parse_program(
            "var u: public untrusted; var u2: public untrusted;
             var h: secret trusted; var low: public trusted;
             [#]; endorse@e1(u) if (u == u2) { low := declassify(u < h) } else { skip }",
        )
        .unwrap()
        .with_domain(4);
        let cfg = AttackConfig::new(2, false);
        let universe = fair_universe(&p, &cfg);
        let mut m = Memory::zeros(p.env.len());
        m.set(p.env.lookup("h").unwrap(), 3);

        // reference: u := 2; u2 := 2 — checked(e1, 2, 1)
        let a2 = attack(&p, "u := 2; u2 := 2");
        let c2 = substitute(&p, &a2).unwrap();
        let s2 = endorse_stream_of(&run(&c2, &m, p.domain), 4);
        assert_eq!(s2.checked.len(), 1);
        assert!(s2.checked[0].2);
        let omega = irrelevant_attacks_checked(&p, &m, &s2, &universe);

        // u := 2; u2 := 0 fails its check with the same value 2: kept
        let a1 = attack(&p, "u := 2; u2 := 0");
        assert!(
            !omega.contains(&a1),
            "same endorsed value is not irrelevant"
        );
        // u := 1; u2 := 1 passes its check with value 1 ≠ 2: discounted
        let b = attack(&p, "u := 1; u2 := 1");
        assert!(omega.contains(&b));
        // a failing check with a different value is also discounted when the
        // reference check succeeded (b-bit sum ≥ 1)
        let c = attack(&p, "u := 1; u2 := 0");
        assert!(omega.contains(&c));

        // reference from a failed check: disagreements where both checks
        // fail are not discounted
        let a0 = attack(&p, "u := 2; u2 := 0");
        let c0 = substitute(&p, &a0).unwrap();
        let s0 = endorse_stream_of(&run(&c0, &m, p.domain), 4);
        assert!(!s0.checked[0].2);
        let omega0 = irrelevant_attacks_checked(&p, &m, &s0, &universe);
        assert!(!omega0.contains(&attack(&p, "u := 1; u2 := 0")));
        // but a succeeding disagreeing check is
        assert!(omega0.contains(&attack(&p, "u := 1; u2 := 1")));
    }
}
