//! Top-level semantic verdicts: robustness with and without (checked)
//! endorsement, attacker impact, and integrity robustness.
//!
//! Every check quantifies over all initial memories and all fair attacks of
//! the enumerated universe, splitting each run at every release event and
//! testing the inclusion of release control (minus irrelevant attacks, for
//! the endorsement variants) in attacker control. A Reject carries a witness
//! that replays; an Accept is relative to the enumerated universe, which is
//! echoed in the verdict.

use crate::ast::{Cmd, Program};
use crate::attacks::{
    endorse_stream_of, fair_universe, substitute, AttackConfig, AttackError, AttackSet,
    AttackVector, EndorseStream,
};
use crate::control::{build_profile, prefix_aligns, prefix_aligns_with_clause, TraceProfile};
use crate::semantics::{
    all_memories, run, trace_to_lines, Event, LowRun, Memory, Mode, RunOutcome, TrustedEvent,
    TrustedRun, Val,
};
use serde::Serialize;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum CheckError {
    #[error("unsupported construct for this property: {0}")]
    UnsupportedConstruct(String),
    #[error(transparent)]
    Attack(#[from] AttackError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Accept,
    Reject,
}

/// Attack-enumeration bounds echoed in every verdict: an Accept means "no
/// violation within this universe".
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct UniverseInfo {
    pub domain: Val,
    pub attack_len: usize,
    pub diverge_attack: bool,
    pub enumerated: usize,
    pub fair: usize,
}

/// A complete, replayable description of one violation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Witness {
    pub memory: BTreeMap<String, Val>,
    pub attack: String,
    pub offending: String,
    /// 0-based position of the release event in the low projection (or of
    /// the trusted event, for the integrity property).
    pub event_index: usize,
    pub event: String,
    /// Which release-control clause admits the offending attack.
    pub clause: String,
    pub attack_trace: Vec<String>,
    pub offending_trace: Vec<String>,
    #[serde(skip)]
    pub raw_memory: Memory,
    #[serde(skip)]
    pub raw_attack: AttackVector,
    #[serde(skip)]
    pub raw_offending: AttackVector,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Verdict {
    pub status: Status,
    pub witness: Option<Witness>,
    pub universe: UniverseInfo,
}

impl Verdict {
    pub fn accepted(&self) -> bool {
        self.status == Status::Accept
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Property {
    Robustness,
    RobustnessEndorse,
    RobustnessChecked,
    Integrity,
}

/// Profiles of one attack against one public class: a row per sibling
/// memory, aligned with the class member order.
struct ClassProfiles {
    rows: Vec<TraceProfile>,
}

/// Shared state for one check: the fair universe, all memories grouped into
/// public classes, and lazily built per-(attack, class) trace profiles.
struct Engine<'p> {
    p: &'p Program,
    mode: Mode,
    universe: Vec<AttackVector>,
    subbed: Vec<Cmd>,
    memories: Vec<Memory>,
    class_of: Vec<usize>,
    row_of: Vec<usize>,
    classes: Vec<Vec<usize>>,
    profiles: Vec<Vec<Option<ClassProfiles>>>,
    info: UniverseInfo,
}

const PROFILE_PAD: usize = 16;

impl<'p> Engine<'p> {
    fn new(p: &'p Program, mode: Mode, cfg: &AttackConfig) -> Result<Engine<'p>, CheckError> {
        let enumerated = crate::attacks::enumerate_attacks(p, cfg);
        let enumerated_count = enumerated.len();
        let universe: Vec<AttackVector> = enumerated
            .into_iter()
            .filter(|a| crate::attacks::is_fair(p, a).unwrap_or(false))
            .collect();
        let subbed: Vec<Cmd> = universe
            .iter()
            .map(|a| substitute(p, a))
            .collect::<Result<_, _>>()?;
        let memories = all_memories(&p.env, p.domain);
        let public_vars = p.env.public_vars();
        let mut key_to_class: BTreeMap<Vec<Val>, usize> = BTreeMap::new();
        let mut classes: Vec<Vec<usize>> = Vec::new();
        let mut class_of = Vec::with_capacity(memories.len());
        let mut row_of = Vec::with_capacity(memories.len());
        for (i, m) in memories.iter().enumerate() {
            let key: Vec<Val> = public_vars.iter().map(|&v| m.get(v)).collect();
            let cid = *key_to_class.entry(key).or_insert_with(|| {
                classes.push(Vec::new());
                classes.len() - 1
            });
            class_of.push(cid);
            row_of.push(classes[cid].len());
            classes[cid].push(i);
        }
        let profiles = (0..universe.len())
            .map(|_| (0..classes.len()).map(|_| None).collect())
            .collect();
        let info = UniverseInfo {
            domain: p.domain,
            attack_len: cfg.max_len,
            diverge_attack: cfg.include_diverge,
            enumerated: enumerated_count,
            fair: universe.len(),
        };
        Ok(Engine {
            p,
            mode,
            universe,
            subbed,
            memories,
            class_of,
            row_of,
            classes,
            profiles,
            info,
        })
    }

    fn profile(&mut self, ai: usize, cid: usize) -> &ClassProfiles {
        if self.profiles[ai][cid].is_none() {
            let sib_runs: Vec<LowRun> = self.classes[cid]
                .iter()
                .map(|&mi| {
                    LowRun::of_run(
                        &run(&self.subbed[ai], &self.memories[mi], self.p.domain),
                        &self.p.env,
                        self.mode,
                    )
                })
                .collect();
            // identical sibling runs share one profile
            let mut distinct: Vec<(&LowRun, usize)> = Vec::new();
            let mut index_of = Vec::with_capacity(sib_runs.len());
            for s in &sib_runs {
                match distinct.iter().position(|(d, _)| *d == s) {
                    Some(i) => {
                        distinct[i].1 += 1;
                        index_of.push(i);
                    }
                    None => {
                        distinct.push((s, 1));
                        index_of.push(distinct.len() - 1);
                    }
                }
            }
            let built: Vec<TraceProfile> = distinct
                .iter()
                .map(|(own, _)| build_profile(own, &distinct, self.mode, PROFILE_PAD))
                .collect();
            let rows = index_of.into_iter().map(|i| built[i].clone()).collect();
            self.profiles[ai][cid] = Some(ClassProfiles { rows });
        }
        self.profiles[ai][cid].as_ref().unwrap()
    }

    fn run_of(&self, ai: usize, mi: usize) -> RunOutcome {
        run(&self.subbed[ai], &self.memories[mi], self.p.domain)
    }

    /// Events of the run up to and including its (idx+1)-th proper low
    /// event, materializing the lasso as needed.
    fn events_upto_low(&self, r: &RunOutcome, idx: usize) -> Vec<Event> {
        let mut out = Vec::new();
        let mut lows = 0usize;
        let mut emit = |ev: &Event, out: &mut Vec<Event>| -> bool {
            out.push(ev.clone());
            if crate::semantics::low_projection(
                std::slice::from_ref(ev),
                None,
                &self.p.env,
                self.mode,
            )
            .is_empty()
            {
                return false;
            }
            lows += 1;
            lows == idx + 1
        };
        for ev in &r.events {
            if emit(ev, &mut out) {
                return out;
            }
        }
        if !r.lasso.is_empty() {
            loop {
                for ev in &r.lasso {
                    if emit(ev, &mut out) {
                        return out;
                    }
                }
            }
        }
        out
    }

    fn reference_stream(&self, events: &[Event]) -> EndorseStream {
        let pseudo = RunOutcome {
            events: events.to_vec(),
            lasso: Vec::new(),
            terminated: true,
            cycle_entry: None,
            final_memory: Memory::zeros(0),
        };
        endorse_stream_of(&pseudo, 0)
    }

    fn omega_member(
        &self,
        property: Property,
        reference: &EndorseStream,
        bi: usize,
        mi: usize,
    ) -> bool {
        match property {
            Property::Robustness => false,
            Property::RobustnessEndorse | Property::Integrity => {
                let r = self.run_of(bi, mi);
                let s = endorse_stream_of(&r, reference.direct.len() + 1);
                crate::attacks::direct_irrelevance(&reference.direct, &s.direct)
            }
            Property::RobustnessChecked => {
                let r = self.run_of(bi, mi);
                let s = endorse_stream_of(&r, reference.checked.len() + 1);
                crate::attacks::checked_irrelevance(&reference.checked, &s)
            }
        }
    }

    fn witness(
        &mut self,
        ai: usize,
        bi: usize,
        mi: usize,
        event_index: usize,
        event: String,
        clause: String,
    ) -> Witness {
        let attack = self.universe[ai].clone();
        let offending = self.universe[bi].clone();
        let m = self.memories[mi].clone();
        let mem_map: BTreeMap<String, Val> = self
            .p
            .env
            .vars()
            .map(|v| (self.p.env.name(v).to_string(), m.get(v)))
            .collect();
        let ra = self.run_of(ai, mi);
        let rb = self.run_of(bi, mi);
        Witness {
            memory: mem_map,
            attack: attack.render(self.p),
            offending: offending.render(self.p),
            event_index,
            event,
            clause,
            attack_trace: trace_to_lines(&ra, self.p),
            offending_trace: trace_to_lines(&rb, self.p),
            raw_memory: m,
            raw_attack: attack,
            raw_offending: offending,
        }
    }

    fn clause_name(&mut self, bi: usize, cid: usize, row: usize) -> String {
        let prof = &self.profile(bi, cid).rows[row];
        let name = if prof.terminated {
            "termination"
        } else if (0..=prof.lows.len())
            .any(|q| (q + 1..prof.k.len()).any(|j| prof.k[j] < prof.k[q]))
        {
            "further release"
        } else {
            "divergence knowledge"
        };
        name.to_string()
    }

    /// The core confidentiality check: at every release event of every run,
    /// release control minus irrelevant attacks must stay inside attacker
    /// control.
    fn check_release_inclusion(&mut self, property: Property) -> Verdict {
        for mi in 0..self.memories.len() {
            let cid = self.class_of[mi];
            let row = self.row_of[mi];
            for ai in 0..self.universe.len() {
                let a_prof = self.profile(ai, cid).rows[row].clone();
                for j in 0..a_prof.lows.len() {
                    if !a_prof.release[j] {
                        continue;
                    }
                    let before_lows = &a_prof.lows[..j];
                    let before_req = &a_prof.required[..j];
                    let after_lows = &a_prof.lows[..=j];
                    let after_req = &a_prof.required[..=j];
                    let reference = if property == Property::Robustness {
                        EndorseStream {
                            direct: Vec::new(),
                            checked: Vec::new(),
                            infinite_direct: false,
                            infinite_checked: false,
                        }
                    } else {
                        let ra = self.run_of(ai, mi);
                        let events = self.events_upto_low(&ra, j);
                        self.reference_stream(&events)
                    };
                    let mode = self.mode;
                    for bi in 0..self.universe.len() {
                        let (in_release_control, in_control) = {
                            let b_prof = &self.profile(bi, cid).rows[row];
                            (
                                prefix_aligns_with_clause(before_lows, before_req, b_prof, mode),
                                prefix_aligns(after_lows, after_req, b_prof),
                            )
                        };
                        if !in_release_control || in_control {
                            continue;
                        }
                        if self.omega_member(property, &reference, bi, mi) {
                            continue;
                        }
                        let event =
                            crate::semantics::low_event_to_string(&a_prof.lows[j], &self.p.env);
                        let clause = self.clause_name(bi, cid, row);
                        let w = self.witness(ai, bi, mi, j, event, clause);
                        return Verdict {
                            status: Status::Reject,
                            witness: Some(w),
                            universe: self.info.clone(),
                        };
                    }
                }
            }
        }
        Verdict {
            status: Status::Accept,
            witness: None,
            universe: self.info.clone(),
        }
    }
}

fn gate_constructs(p: &Program, property: Property) -> Result<(), CheckError> {
    let direct = p.has_direct_endorse();
    let checked = p.has_checked_endorse();
    match property {
        Property::Robustness => {
            if direct || checked {
                return Err(CheckError::UnsupportedConstruct(
                    "program uses endorsement; use the robustness-endorse or \
                     robustness-checked property"
                        .to_string(),
                ));
            }
        }
        Property::RobustnessEndorse | Property::Integrity => {
            if checked {
                return Err(CheckError::UnsupportedConstruct(
                    "program uses checked endorsement; lower it first or use the \
                     robustness-checked property"
                        .to_string(),
                ));
            }
        }
        Property::RobustnessChecked => {
            if direct {
                return Err(CheckError::UnsupportedConstruct(
                    "program mixes direct and checked endorsement".to_string(),
                ));
            }
        }
    }
    Ok(())
}

/// Robustness for endorsement-free programs: at every release event,
/// release control must stay inside attacker control.
pub fn check_robustness(
    p: &Program,
    mode: Mode,
    cfg: &AttackConfig,
) -> Result<Verdict, CheckError> {
    gate_constructs(p, Property::Robustness)?;
    Ok(Engine::new(p, mode, cfg)?.check_release_inclusion(Property::Robustness))
}

/// Robustness with direct endorsements: irrelevant attacks are discounted
/// from release control before the inclusion test.
pub fn check_robustness_endorse(
    p: &Program,
    mode: Mode,
    cfg: &AttackConfig,
) -> Result<Verdict, CheckError> {
    gate_constructs(p, Property::RobustnessEndorse)?;
    Ok(Engine::new(p, mode, cfg)?.check_release_inclusion(Property::RobustnessEndorse))
}

/// Robustness with checked endorsements.
pub fn check_robustness_checked(
    p: &Program,
    mode: Mode,
    cfg: &AttackConfig,
) -> Result<Verdict, CheckError> {
    gate_constructs(p, Property::RobustnessChecked)?;
    Ok(Engine::new(p, mode, cfg)?.check_release_inclusion(Property::RobustnessChecked))
}

/// Attacker impact: attacks whose runs on `m` produce exactly the given
/// trusted events as a prefix of their trusted projection.
pub fn attacker_impact(
    p: &Program,
    m: &Memory,
    tseq: &[TrustedEvent],
    universe: &[AttackVector],
) -> Result<AttackSet, CheckError> {
    let mut out = AttackSet::new();
    for a in universe {
        let c = substitute(p, a)?;
        let tr = TrustedRun::of_run(&run(&c, m, p.domain), &p.env);
        if tr.matches_prefix(tseq) {
            out.insert(a.clone());
        }
    }
    Ok(out)
}

/// Progress impact: attacks matching the trusted events and producing at
/// least one more trusted event (termination included).
pub fn progress_impact(
    p: &Program,
    m: &Memory,
    tseq: &[TrustedEvent],
    universe: &[AttackVector],
) -> Result<AttackSet, CheckError> {
    let mut out = AttackSet::new();
    for a in universe {
        let c = substitute(p, a)?;
        let tr = TrustedRun::of_run(&run(&c, m, p.domain), &p.env);
        if tr.extends_strictly(tseq) {
            out.insert(a.clone());
        }
    }
    Ok(out)
}

fn trusted_event_string(ev: &TrustedEvent, p: &Program) -> String {
    match ev {
        TrustedEvent::Assign(v, val) => format!("({}, {val})", p.env.name(*v)),
        TrustedEvent::Endorse(l, val) => format!("endorse({}, {val})", p.label_name(*l)),
        TrustedEvent::Term => "⇓".to_string(),
    }
}

/// Progress-insensitive integrity robustness with endorsements: at every
/// trusted event of every run, progress impact minus irrelevant attacks
/// must stay inside attacker impact.
pub fn check_integrity_robustness(p: &Program, cfg: &AttackConfig) -> Result<Verdict, CheckError> {
    gate_constructs(p, Property::Integrity)?;
    let mut eng = Engine::new(p, Mode::Pi, cfg)?;
    for mi in 0..eng.memories.len() {
        for ai in 0..eng.universe.len() {
            let ra = eng.run_of(ai, mi);
            let own = TrustedRun::of_run(&ra, &p.env);
            // bound positions on eventually-periodic trusted streams
            let limit = own.head.len() + own.cycle.len() * 2;
            for i in 0..limit {
                let Some(t_star) = own.event_at(i) else { break };
                let t_prefix: Vec<TrustedEvent> =
                    (0..i).map(|x| own.event_at(x).unwrap()).collect();
                let mut t_upto = t_prefix.clone();
                t_upto.push(t_star);
                // reference endorsement stream up to and including t_star
                let events = match t_star {
                    TrustedEvent::Term => {
                        let mut evs = ra.events.clone();
                        evs.extend(ra.lasso.iter().cloned());
                        evs
                    }
                    _ => eng.events_upto_trusted(&ra, i),
                };
                let reference = eng.reference_stream(&events);
                for bi in 0..eng.universe.len() {
                    let rb = eng.run_of(bi, mi);
                    let btr = TrustedRun::of_run(&rb, &p.env);
                    if !btr.extends_strictly(&t_prefix) {
                        continue;
                    }
                    if btr.matches_prefix(&t_upto) {
                        continue;
                    }
                    if eng.omega_member(Property::Integrity, &reference, bi, mi) {
                        continue;
                    }
                    let event = trusted_event_string(&t_star, p);
                    let w = eng.witness(ai, bi, mi, i, event, "progress impact".to_string());
                    return Ok(Verdict {
                        status: Status::Reject,
                        witness: Some(w),
                        universe: eng.info.clone(),
                    });
                }
            }
        }
    }
    Ok(Verdict {
        status: Status::Accept,
        witness: None,
        universe: eng.info.clone(),
    })
}

impl<'p> Engine<'p> {
    /// Events of the run up to and including its (idx+1)-th trusted event.
    fn events_upto_trusted(&self, r: &RunOutcome, idx: usize) -> Vec<Event> {
        let mut out = Vec::new();
        let mut seen = 0usize;
        let mut emit = |ev: &Event, out: &mut Vec<Event>| -> bool {
            out.push(ev.clone());
            if crate::semantics::trusted_projection(std::slice::from_ref(ev), None, &self.p.env)
                .is_empty()
            {
                return false;
            }
            seen += 1;
            seen == idx + 1
        };
        for ev in &r.events {
            if emit(ev, &mut out) {
                return out;
            }
        }
        if !r.lasso.is_empty() {
            loop {
                for ev in &r.lasso {
                    if emit(ev, &mut out) {
                        return out;
                    }
                }
            }
        }
        out
    }
}

/// Re-establish a rejection witness through the pure control/attack
/// operations: the offending attack must be admitted by release control,
/// survive the irrelevant-attack discount, and fall outside attacker
/// control (dually for integrity).
pub fn replay_witness(
    p: &Program,
    mode: Mode,
    cfg: &AttackConfig,
    property: Property,
    w: &Witness,
) -> Result<bool, CheckError> {
    let universe = fair_universe(p, cfg);
    let m = &w.raw_memory;
    let a = &w.raw_attack;
    let b = &w.raw_offending;
    if property == Property::Integrity {
        let ca = substitute(p, a)?;
        let ra = run(&ca, m, p.domain);
        let own = TrustedRun::of_run(&ra, &p.env);
        let i = w.event_index;
        let t_prefix: Vec<TrustedEvent> = (0..i).map(|x| own.event_at(x).unwrap()).collect();
        let mut t_upto = t_prefix.clone();
        t_upto.push(own.event_at(i).expect("witness index in range"));
        let p_prog = progress_impact(p, m, &t_prefix, &universe)?;
        let p_after = attacker_impact(p, m, &t_upto, &universe)?;
        let omega = omega_at(p, m, &ra, OmegaKind::Direct, w.event_index, &universe, true)?;
        return Ok(p_prog.contains(b) && !omega.contains(b) && !p_after.contains(b));
    }
    let ca = substitute(p, a)?;
    let lows = LowRun::of_run(&run(&ca, m, p.domain), &p.env, mode);
    let j = w.event_index;
    let tr: Vec<crate::semantics::LowEvent> = lows.materialize(j + 1);
    let before = &tr[..j];
    let rel =
        crate::control::release_control(p, m, a, before, mode, &universe).map_err(attack_err)?;
    let ctl =
        crate::control::attacker_control(p, m, a, &tr, mode, &universe).map_err(attack_err)?;
    let ra = run(&ca, m, p.domain);
    let omega = match property {
        Property::Robustness => AttackSet::new(),
        Property::RobustnessEndorse => omega_at(p, m, &ra, OmegaKind::Direct, j, &universe, false)?,
        Property::RobustnessChecked => {
            omega_at(p, m, &ra, OmegaKind::Checked, j, &universe, false)?
        }
        Property::Integrity => unreachable!(),
    };
    Ok(rel.contains(b) && !omega.contains(b) && !ctl.contains(b))
}

fn attack_err(e: crate::control::ControlError) -> CheckError {
    match e {
        crate::control::ControlError::Attack(a) => CheckError::Attack(a),
        crate::control::ControlError::Scale { .. } => {
            CheckError::UnsupportedConstruct("oracle scale".to_string())
        }
    }
}

enum OmegaKind {
    Direct,
    Checked,
}

fn omega_at(
    p: &Program,
    m: &Memory,
    ra: &RunOutcome,
    kind: OmegaKind,
    idx: usize,
    universe: &[AttackVector],
    trusted_index: bool,
) -> Result<AttackSet, CheckError> {
    // rebuild the reference endorsement stream from the run prefix
    let mut events = Vec::new();
    let mut count = 0usize;
    let mut all = ra.events.clone();
    all.extend(ra.lasso.iter().cloned());
    all.extend(ra.lasso.iter().cloned());
    for ev in &all {
        events.push(ev.clone());
        let hit = if trusted_index {
            !crate::semantics::trusted_projection(std::slice::from_ref(ev), None, &p.env).is_empty()
        } else {
            !crate::semantics::low_projection(std::slice::from_ref(ev), None, &p.env, Mode::Pi)
                .is_empty()
        };
        if hit {
            count += 1;
            if count == idx + 1 {
                break;
            }
        }
    }
    if trusted_index && count < idx + 1 {
        // the trusted position was the final ⇓: take the whole trace
        events = ra.events.clone();
        events.extend(ra.lasso.iter().cloned());
    }
    let pseudo = RunOutcome {
        events,
        lasso: Vec::new(),
        terminated: true,
        cycle_entry: None,
        final_memory: Memory::zeros(0),
    };
    let reference = endorse_stream_of(&pseudo, 0);
    Ok(match kind {
        OmegaKind::Direct => crate::attacks::irrelevant_attacks(p, m, &reference, universe),
        OmegaKind::Checked => {
            crate::attacks::irrelevant_attacks_checked(p, m, &reference, universe)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_program;

    fn cfg(max_len: usize, diverge: bool) -> AttackConfig {
        AttackConfig::new(max_len, diverge)
    }

    fn check(src: &str, domain: Val, mode: Mode) -> Verdict {
        let p = parse_program(src).unwrap().with_domain(domain);
        let c = AttackConfig::default_for(&p, mode);
        check_robustness(&p, mode, &c).unwrap()
    }

    fn check_endorse(src: &str, domain: Val, mode: Mode) -> Verdict {
        let p = parse_program(src).unwrap().with_domain(domain);
        let c = AttackConfig::default_for(&p, mode);
        check_robustness_endorse(&p, mode, &c).unwrap()
    }

    fn replay(src: &str, domain: Val, mode: Mode, property: Property, v: &Verdict) {
        let p = parse_program(src).unwrap().with_domain(domain);
        let c = AttackConfig::default_for(&p, mode);
        let w = v.witness.as_ref().expect("reject carries a witness");
        assert!(
            replay_witness(&p, mode, &c, property, w).unwrap(),
            "witness does not replay: {w:?}"
        );
    }

    const RELEASE_GUARD: &str = "var u: public untrusted; var h: secret trusted;
        var low: public trusted;
        [#]; low := u < h";

    #[test]
    fn simple_release_is_rejected_in_both_modes() {
        for mode in [Mode::Ps, Mode::Pi] {
            let v = check(RELEASE_GUARD, 8, mode);
            assert_eq!(v.status, Status::Reject, "{mode}");
            replay(RELEASE_GUARD, 8, mode, Property::Robustness, &v);
        }
    }

    #[test]
    fn attack_independent_release_is_accepted() {
        let src = "var u: public untrusted; var h: secret trusted;
            var low: public trusted; var low2: public trusted;
            [#]; low := h; low2 := u < h";
        for mode in [Mode::Ps, Mode::Pi] {
            assert_eq!(check(src, 8, mode).status, Status::Accept, "{mode}");
        }
    }

    #[test]
    fn guarded_release_is_rejected() {
        let src = "var u: public untrusted; var h: secret trusted; var low: public trusted;
            [#]; if (u > 0) { low := h } else { skip }";
        for mode in [Mode::Ps, Mode::Pi] {
            let v = check(src, 8, mode);
            assert_eq!(v.status, Status::Reject, "{mode}");
            replay(src, 8, mode, Property::Robustness, &v);
        }
    }

    #[test]
    fn pure_availability_attack_is_accepted() {
        let src = "var u: public untrusted; var h: secret trusted; var low: public trusted;
            [#]; while (u > 0) { skip }; low := h";
        for mode in [Mode::Ps, Mode::Pi] {
            assert_eq!(check(src, 8, mode).status, Status::Accept, "{mode}");
        }
    }

    #[test]
    fn progress_leak_splits_the_modes() {
        let src = "var u: public untrusted; var h: secret trusted; var low: public trusted;
            [#]; while (u > h) { skip }; low := 1";
        let v = check(src, 8, Mode::Ps);
        assert_eq!(v.status, Status::Reject);
        replay(src, 8, Mode::Ps, Property::Robustness, &v);
        assert_eq!(check(src, 8, Mode::Pi).status, Status::Accept);
    }

    #[test]
    fn robustness_refuses_endorsing_programs() {
        let src = "var u: public untrusted; var t: public trusted; [#]; t := endorse(u)";
        let p = parse_program(src).unwrap();
        let c = AttackConfig::default_for(&p, Mode::Pi);
        assert!(matches!(
            check_robustness(&p, Mode::Pi, &c),
            Err(CheckError::UnsupportedConstruct(_))
        ));
        // and the endorse variant refuses checked endorsement
        let src2 = "var u: public untrusted; var t: public trusted;
            [#]; endorse(u) if (1) { t := u } else { skip }";
        let p2 = parse_program(src2).unwrap();
        assert!(matches!(
            check_robustness_endorse(&p2, Mode::Pi, &c),
            Err(CheckError::UnsupportedConstruct(_))
        ));
        assert!(matches!(
            check_integrity_robustness(&p2, &c),
            Err(CheckError::UnsupportedConstruct(_))
        ));
    }

    #[test]
    fn endorsed_release_is_accepted() {
        let src = "var u: public untrusted; var h: secret trusted; var low: public trusted;
            [#]; low := endorse@e1(u < h)";
        for mode in [Mode::Ps, Mode::Pi] {
            assert_eq!(check_endorse(src, 8, mode).status, Status::Accept, "{mode}");
        }
    }

    #[test]
    fn endorsed_value_then_derived_release_is_accepted() {
        let src = "var u: public untrusted; var h2: secret trusted;
            var low: public trusted; var low2: public trusted;
            [#]; low := endorse@e1(u); low2 := u < h2";
        for mode in [Mode::Ps, Mode::Pi] {
            assert_eq!(check_endorse(src, 4, mode).status, Status::Accept, "{mode}");
        }
    }

    #[test]
    fn endorsed_comparison_then_second_secret_is_rejected() {
        let src = "var u: public untrusted; var h: secret trusted; var h2: secret trusted;
            var low: public trusted; var low2: public trusted;
            [#]; low := endorse@e1(u < h); low2 := u < h2";
        for mode in [Mode::Ps, Mode::Pi] {
            let v = check_endorse(src, 4, mode);
            assert_eq!(v.status, Status::Reject, "{mode}");
            replay(src, 4, mode, Property::RobustnessEndorse, &v);
        }
    }

    #[test]
    fn conditional_endorsement_is_rejected() {
        let src = "var u: public untrusted; var h: secret trusted; var h2: secret trusted;
            var low: public trusted;
            [#]; if (u > 0) { h2 := endorse@e1(u) } else { skip }; low := h2 < h";
        for mode in [Mode::Ps, Mode::Pi] {
            let v = check_endorse(src, 4, mode);
            assert_eq!(v.status, Status::Reject, "{mode}");
            replay(src, 4, mode, Property::RobustnessEndorse, &v);
        }
    }

    #[test]
    fn checked_endorsement_with_unendorsed_guard_is_rejected() {
        let src = "var u: public untrusted; var u2: public untrusted;
            var h: secret trusted; var low: public trusted;
            [#]; endorse@e1(u) if (u == u2) { low := declassify(u < h) } else { skip }";
        let p = parse_program(src).unwrap().with_domain(4);
        for mode in [Mode::Ps, Mode::Pi] {
            let c = AttackConfig::default_for(&p, mode);
            let v = check_robustness_checked(&p, mode, &c).unwrap();
            assert_eq!(v.status, Status::Reject, "{mode}");
            let w = v.witness.as_ref().unwrap();
            assert!(
                replay_witness(&p, mode, &c, Property::RobustnessChecked, w).unwrap(),
                "{w:?}"
            );
        }
    }

    #[test]
    fn dead_checked_endorsement_is_accepted() {
        let src = "var u: public untrusted; var h: secret trusted;
            var g: public trusted; var low: public trusted;
            [#]; if (g != g) { endorse@e1(u) if (1) { low := declassify(u < h) } else { skip } } else { skip }";
        let p = parse_program(src).unwrap().with_domain(2);
        let c = AttackConfig::default_for(&p, Mode::Pi);
        let v = check_robustness_checked(&p, Mode::Pi, &c).unwrap();
        assert_eq!(v.status, Status::Accept);
    }

    #[test]
    fn endorsement_free_reduction() {
        // without endorsements the two properties coincide (Ω is empty)
        let sources = [
            (RELEASE_GUARD, Status::Reject),
            (
                "var u: public untrusted; var h: secret trusted;
                 var low: public trusted; var low2: public trusted;
                 [#]; low := h; low2 := u < h",
                Status::Accept,
            ),
        ];
        for (src, expected) in sources {
            for mode in [Mode::Ps, Mode::Pi] {
                let plain = check(src, 4, mode);
                let endorse = check_endorse(src, 4, mode);
                assert_eq!(plain.status, expected);
                assert_eq!(plain.status, endorse.status);
            }
        }
    }

    #[test]
    fn impact_examples() {
        // t := u at N=2: impact of (t,1)·⇓ is the attacks leaving u = 1
        let src = "var u: public untrusted; var t: public trusted; [#]; t := u";
        let p = parse_program(src).unwrap().with_domain(2);
        let c = cfg(1, false);
        let universe = fair_universe(&p, &c);
        let m = Memory::zeros(p.env.len());
        let t = p.env.lookup("t").unwrap();
        let impact = attacker_impact(
            &p,
            &m,
            &[TrustedEvent::Assign(t, 1), TrustedEvent::Term],
            &universe,
        )
        .unwrap();
        let names: Vec<String> = impact.iter().map(|a| a.render(&p)).collect();
        assert_eq!(names, vec!["u := 1"]);

        // a program with no trusted assignments: ⇓ matches every
        // terminating attack
        let pt = parse_program("var u: public untrusted; [#]; u := 1")
            .unwrap()
            .with_domain(2);
        let ut = fair_universe(&pt, &c);
        let mt = Memory::zeros(pt.env.len());
        let all_term = attacker_impact(&pt, &mt, &[TrustedEvent::Term], &ut).unwrap();
        assert_eq!(all_term.len(), ut.len());
        let everything = attacker_impact(&p, &m, &[], &universe).unwrap();
        assert_eq!(everything.len(), universe.len());

        // endorsements into trusted targets count through their label
        let pe = parse_program(
            "var u: public untrusted; var t: public trusted; [#]; t := endorse@e1(u)",
        )
        .unwrap()
        .with_domain(2);
        let ue = fair_universe(&pe, &c);
        let lab = pe.lookup_label("e1").unwrap();
        let impact0 = attacker_impact(
            &pe,
            &Memory::zeros(pe.env.len()),
            &[TrustedEvent::Endorse(lab, 0), TrustedEvent::Term],
            &ue,
        )
        .unwrap();
        let names: Vec<String> = impact0.iter().map(|a| a.render(&pe)).collect();
        assert_eq!(names, vec!["skip", "u := 0"]);

        // progress impact of ε counts termination as the next trusted event
        let src2 = "var u: public untrusted; var t: public trusted; [#]; skip";
        let p2 = parse_program(src2).unwrap().with_domain(2);
        let u2 = fair_universe(&p2, &c);
        let pi = progress_impact(&p2, &Memory::zeros(p2.env.len()), &[], &u2).unwrap();
        assert_eq!(pi.len(), u2.len());

        // while (u == 0) skip; t := 1: progress from ε needs u = 1
        let src3 = "var u: public untrusted; var t: public trusted;
            [#]; while (u == 0) { skip }; t := 1";
        let p3 = parse_program(src3).unwrap().with_domain(2);
        let u3 = fair_universe(&p3, &c);
        let m3 = Memory::zeros(p3.env.len());
        let pi3 = progress_impact(&p3, &m3, &[], &u3).unwrap();
        let names: Vec<String> = pi3.iter().map(|a| a.render(&p3)).collect();
        assert_eq!(names, vec!["u := 1"]);
    }

    #[test]
    fn integrity_examples() {
        let c = cfg(2, false);
        let direct_flow = "var u: public untrusted; var t: public trusted; [#]; t := u";
        let p = parse_program(direct_flow).unwrap().with_domain(2);
        let v = check_integrity_robustness(&p, &c).unwrap();
        assert_eq!(v.status, Status::Reject);
        let w = v.witness.as_ref().unwrap();
        assert!(replay_witness(&p, Mode::Pi, &c, Property::Integrity, w).unwrap());

        let guarded = "var u1: public untrusted; var u2: public untrusted; var t: public trusted;
            [#]; if (u1) { t := endorse@e1(u2) } else { skip }";
        let p = parse_program(guarded).unwrap().with_domain(2);
        let v = check_integrity_robustness(&p, &c).unwrap();
        assert_eq!(v.status, Status::Reject);
        let w = v.witness.as_ref().unwrap();
        assert!(replay_witness(&p, Mode::Pi, &c, Property::Integrity, w).unwrap());

        let endorsed = "var u: public untrusted; var t: public trusted; [#]; t := endorse@e1(u)";
        let p = parse_program(endorsed).unwrap().with_domain(2);
        let v = check_integrity_robustness(&p, &c).unwrap();
        assert_eq!(v.status, Status::Accept);
    }

    /// Brute-force robustness decision assembled purely from the public
    /// control operations, kept independent of the engine's caching.
    fn oracle_robustness(p: &Program, mode: Mode, cfg: &AttackConfig) -> Status {
        use crate::control::{attacker_control, release_control};
        use crate::knowledge::classify_release;
        let universe = fair_universe(p, cfg);
        for m in all_memories(&p.env, p.domain) {
            for a in &universe {
                let c = substitute(p, a).unwrap();
                let lr = LowRun::of_run(&run(&c, &m, p.domain), &p.env, mode);
                let n = lr.finite_len().unwrap_or(8).min(8);
                let lows: Vec<crate::semantics::LowEvent> = lr
                    .materialize(n)
                    .into_iter()
                    .filter(|e| matches!(e, crate::semantics::LowEvent::Assign(..)))
                    .collect();
                for j in 0..lows.len() {
                    if !classify_release(p, &c, &m, &lows[..j], lows[j], mode) {
                        continue;
                    }
                    let rel = release_control(p, &m, a, &lows[..j], mode, &universe).unwrap();
                    let ctl = attacker_control(p, &m, a, &lows[..=j], mode, &universe).unwrap();
                    if !rel.is_subset(&ctl) {
                        return Status::Reject;
                    }
                }
            }
        }
        Status::Accept
    }

    #[test]
    fn engine_agrees_with_pure_oracle() {
        let sources = [
            RELEASE_GUARD,
            "var u: public untrusted; var h: secret trusted;
             var low: public trusted; var low2: public trusted;
             [#]; low := h; low2 := u < h",
            "var u: public untrusted; var h: secret trusted; var low: public trusted;
             [#]; if (u > 0) { low := h } else { skip }",
            "var u: public untrusted; var h: secret trusted; var low: public trusted;
             [#]; while (u > h) { skip }; low := 1",
            "var u: public untrusted; var h: secret trusted; var low: public trusted;
             [#]; while (u > 0) { skip }; low := h",
        ];
        for src in sources {
            for domain in [2, 3] {
                let p = parse_program(src).unwrap().with_domain(domain);
                for mode in [Mode::Ps, Mode::Pi] {
                    let cfg = AttackConfig::default_for(&p, mode);
                    let engine = check_robustness(&p, mode, &cfg).unwrap().status;
                    let oracle = oracle_robustness(&p, mode, &cfg);
                    assert_eq!(engine, oracle, "N={domain} {mode}: {src}");
                }
            }
        }
    }

    #[test]
    fn verdicts_are_deterministic() {
        let src = RELEASE_GUARD;
        let v1 = check(src, 4, Mode::Ps);
        let v2 = check(src, 4, Mode::Ps);
        assert_eq!(v1, v2);
        assert_eq!(
            serde_json::to_string(&v1).unwrap(),
            serde_json::to_string(&v2).unwrap()
        );
    }

    #[test]
    fn no_hole_program_has_singleton_universe() {
        let src = "var low: public trusted; low := 1";
        let p = parse_program(src).unwrap();
        let c = cfg(1, false);
        let v = check_robustness(&p, Mode::Ps, &c).unwrap();
        assert_eq!(v.status, Status::Accept);
        assert_eq!(v.universe.fair, 1);
    }
}
