//! Knowledge segmentation, attack similarity, attacker control, and release
//! control.
//!
//! Two attacks are similar when their traces admit equal-size knowledge
//! segmentations with matching segmentation events. Knowledge can only
//! shrink along a trace, so a segmentation is valid exactly when every
//! position where the within-block knowledge equality fails starts a new
//! block; those cuts are forced, all others are optional padding. `similar`
//! decides the existential over segmentations with a polynomial alignment of
//! forced cuts; `similar_oracle` decides it by enumerating every pair of
//! segmentations and is kept as an independent cross-check.

use crate::ast::{Cmd, Program};
use crate::attacks::{substitute, AttackError, AttackSet, AttackVector};
use crate::semantics::{memories_agreeing_public, run, LowEvent, LowRun, Memory, Mode};
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ControlError {
    #[error(transparent)]
    Attack(#[from] AttackError),
    #[error("trace too long for the exhaustive oracle: {len} low events (limit {limit})")]
    Scale { len: usize, limit: usize },
}

/// Hard cap on low events for `similar_oracle`.
pub const ORACLE_LIMIT: usize = 8;

/// A knowledge segmentation of a low-event sequence: block-start cuts over
/// the sequence. A cut at position `c` starts a new block at the c-th event
/// (0-based); a cut at 0 makes the first block empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segmentation {
    pub total: usize,
    pub cuts: Vec<usize>,
    /// The event at each cut — the segmentation events.
    pub events: Vec<LowEvent>,
}

impl Segmentation {
    pub fn size(&self) -> usize {
        self.cuts.len() + 1
    }
}

/// Everything similarity needs to know about one run prefix: its proper low
/// events, which cut positions are forced, and the knowledge profile along
/// it. Knowledge values are sizes of the sibling sets; inclusion makes sizes
/// a faithful proxy for set comparisons along one run.
#[derive(Debug, Clone)]
pub(crate) struct TraceProfile {
    pub lows: Vec<LowEvent>,
    /// required[c]: the cut at position c is forced — the within-block
    /// knowledge equality fails going into event c.
    pub required: Vec<bool>,
    /// release[i]: the event at 0-based position i is a release event.
    pub release: Vec<bool>,
    /// k[i] = |knowledge after the first i events|, i in 0..=len.
    pub k: Vec<usize>,
    pub kp: Vec<usize>,
    pub kdiv: Vec<usize>,
    pub terminated: bool,
    /// true when the run emits low events forever and was truncated.
    #[allow(dead_code)]
    pub truncated: bool,
}

/// How far to materialize an infinite low sequence: to knowledge
/// stabilization plus enough cycles to expose every padding opportunity.
fn horizon(own: &LowRun, siblings: &[LowRun], pad_for: usize) -> usize {
    let stab = siblings
        .iter()
        .filter_map(|s| own.first_diff(s))
        .max()
        .unwrap_or(0);
    stab + own.cycle.len().max(1) * (pad_for + 2) + own.head.len()
}

pub(crate) fn trace_profile_of(
    p: &Program,
    c: &Cmd,
    m: &Memory,
    mode: Mode,
    pad_for: usize,
) -> TraceProfile {
    let siblings: Vec<LowRun> = memories_agreeing_public(&p.env, p.domain, m)
        .iter()
        .map(|sm| LowRun::of_run(&run(c, sm, p.domain), &p.env, mode))
        .collect();
    let weighted: Vec<(&LowRun, usize)> = siblings.iter().map(|s| (s, 1)).collect();
    let own = LowRun::of_run(&run(c, m, p.domain), &p.env, mode);
    build_profile(&own, &weighted, mode, pad_for)
}

pub(crate) fn build_profile(
    own: &LowRun,
    siblings: &[(&LowRun, usize)],
    mode: Mode,
    pad_for: usize,
) -> TraceProfile {
    let (lows, truncated) = if own.is_infinite() {
        let sib_runs: Vec<LowRun> = siblings.iter().map(|(s, _)| (*s).clone()).collect();
        let h = horizon(own, &sib_runs, pad_for);
        (own.materialize(h), true)
    } else {
        // proper events only: a trailing ⇓/⇑ is an observation, not part of
        // the transition trace being segmented
        let evs: Vec<LowEvent> = own
            .head
            .iter()
            .copied()
            .filter(|e| matches!(e, LowEvent::Assign(..)))
            .collect();
        (evs, false)
    };
    let n = lows.len();
    let mut k = Vec::with_capacity(n + 1);
    let mut kp = Vec::with_capacity(n + 1);
    let mut kdiv = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let prefix = &lows[..i];
        let mut ck = 0;
        let mut ckp = 0;
        let mut ckd = 0;
        for (s, w) in siblings {
            if s.matches_prefix(prefix) {
                ck += w;
                if s.diverges {
                    ckd += w;
                }
                if s.extends_strictly(prefix) {
                    ckp += w;
                }
            }
        }
        k.push(ck);
        kp.push(ckp);
        kdiv.push(ckd);
    }
    let mut release = vec![false; n];
    let mut required = vec![false; n];
    for i in 0..n {
        release[i] = match mode {
            Mode::Ps => k[i + 1] < k[i],
            Mode::Pi => k[i + 1] < kp[i],
        };
        // every release starts a new block, including one at the very
        // first event (empty first block); matching traces must produce a
        // corresponding event for each
        required[i] = release[i];
    }
    TraceProfile {
        lows,
        required,
        release,
        k,
        kp,
        kdiv,
        terminated: !own.diverges,
        truncated,
    }
}

/// Alignment decision: can the two sequences be given equal-size valid
/// segmentations with pairwise-equal segmentation events? Forced cuts must
/// pair with a cut carrying the same event on the other side; optional cuts
/// pad freely.
pub(crate) fn aligns(ea: &[LowEvent], req_a: &[bool], eb: &[LowEvent], req_b: &[bool]) -> bool {
    let (na, nb) = (ea.len(), eb.len());
    // remaining forced cuts at or after each position
    let suffix_req = |req: &[bool]| {
        let mut out = vec![0usize; req.len() + 1];
        for i in (0..req.len()).rev() {
            out[i] = out[i + 1] + usize::from(req[i]);
        }
        out
    };
    let ra = suffix_req(req_a);
    let rb = suffix_req(req_b);
    // reachable[(i, j)]: forced cuts before i and j are all covered by some
    // monotone pairing
    let mut reachable = vec![false; (na + 1) * (nb + 1)];
    reachable[0] = true;
    for i in 0..=na {
        for j in 0..=nb {
            if !reachable[i * (nb + 1) + j] {
                continue;
            }
            if ra[i] == 0 && rb[j] == 0 {
                return true;
            }
            if i < na && j < nb && ea[i] == eb[j] {
                reachable[(i + 1) * (nb + 1) + j + 1] = true;
            }
            if i < na && !req_a[i] {
                reachable[(i + 1) * (nb + 1) + j] = true;
            }
            if j < nb && !req_b[j] {
                reachable[i * (nb + 1) + j + 1] = true;
            }
        }
    }
    false
}

/// The canonical segmentation: a new block starts at every release event
/// (an empty first block when the first event already releases).
pub fn canonical_segmentation(
    p: &Program,
    c: &Cmd,
    m: &Memory,
    tr: &[LowEvent],
    mode: Mode,
) -> Segmentation {
    let profile = trace_profile_of(p, c, m, mode, tr.len());
    debug_assert!(
        tr.iter()
            .enumerate()
            .all(|(i, e)| profile.lows.get(i) == Some(e)),
        "trace is not a prefix of the run"
    );
    let cuts: Vec<usize> = (0..tr.len()).filter(|&i| profile.release[i]).collect();
    let events = cuts.iter().map(|&c| tr[c]).collect();
    Segmentation {
        total: tr.len(),
        cuts,
        events,
    }
}

fn prefix_profile(full: &TraceProfile, len: usize) -> (Vec<LowEvent>, Vec<bool>) {
    (full.lows[..len].to_vec(), full.required[..len].to_vec())
}

/// Are the two attacks similar along the given traces? Decides the
/// existential over equal-size segmentations via cut alignment.
pub fn similar(
    p: &Program,
    m: &Memory,
    a: &AttackVector,
    tr_a: &[LowEvent],
    b: &AttackVector,
    tr_b: &[LowEvent],
    mode: Mode,
) -> Result<bool, ControlError> {
    let ca = substitute(p, a)?;
    let cb = substitute(p, b)?;
    let pa = trace_profile_of(p, &ca, m, mode, tr_a.len().max(tr_b.len()));
    let pb = trace_profile_of(p, &cb, m, mode, tr_a.len().max(tr_b.len()));
    let (ea, ra) = prefix_profile(&pa, tr_a.len());
    let (eb, rb) = prefix_profile(&pb, tr_b.len());
    debug_assert_eq!(ea, tr_a, "tr_a is not a prefix of the run of p[a]");
    debug_assert_eq!(eb, tr_b, "tr_b is not a prefix of the run of p[b]");
    Ok(aligns(&ea, &ra, &eb, &rb))
}

/// Brute-force version of [`similar`]: enumerate every pair of equal-size
/// valid segmentations and match their segmentation events.
pub fn similar_oracle(
    p: &Program,
    m: &Memory,
    a: &AttackVector,
    tr_a: &[LowEvent],
    b: &AttackVector,
    tr_b: &[LowEvent],
    mode: Mode,
) -> Result<bool, ControlError> {
    for tr in [tr_a, tr_b] {
        if tr.len() > ORACLE_LIMIT {
            return Err(ControlError::Scale {
                len: tr.len(),
                limit: ORACLE_LIMIT,
            });
        }
    }
    let ca = substitute(p, a)?;
    let cb = substitute(p, b)?;
    let pa = trace_profile_of(p, &ca, m, mode, tr_a.len().max(tr_b.len()));
    let pb = trace_profile_of(p, &cb, m, mode, tr_a.len().max(tr_b.len()));
    let valid_cut_sets = |prof: &TraceProfile, len: usize| -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let positions: Vec<usize> = (0..len).collect();
        for mask in 0..(1usize << len) {
            let cuts: Vec<usize> = positions
                .iter()
                .filter(|&&c| mask & (1 << c) != 0)
                .copied()
                .collect();
            let ok = (0..len).all(|c| !prof.required[c] || cuts.contains(&c));
            if ok {
                out.push(cuts);
            }
        }
        out
    };
    let sets_a = valid_cut_sets(&pa, tr_a.len());
    let sets_b = valid_cut_sets(&pb, tr_b.len());
    for sa in &sets_a {
        for sb in &sets_b {
            if sa.len() != sb.len() {
                continue;
            }
            if sa.iter().zip(sb).all(|(&ca, &cb)| tr_a[ca] == tr_b[cb]) {
                return Ok(true);
            }
        }
    }
    Ok(false)
}

/// One alignment search over every prefix of `b`'s run at once: a state
/// (i, j) may finish when the anchor has no forced cuts left and `accept`
/// holds of the prefix length j. Cuts of `b` beyond j fall outside the
/// chosen prefix and impose nothing.
const DP_STACK: usize = 1024;

fn aligns_some_prefix(
    anchor_lows: &[LowEvent],
    anchor_req: &[bool],
    b: &TraceProfile,
    accept: impl Fn(usize) -> bool,
) -> bool {
    let na = anchor_lows.len();
    let nb = b.lows.len();
    // remaining forced anchor cuts at or after i; cheap to recompute per call
    let mut ra_buf = [0usize; 64];
    let mut ra_heap;
    let ra: &mut [usize] = if na < 64 {
        &mut ra_buf[..na + 1]
    } else {
        ra_heap = vec![0usize; na + 1];
        &mut ra_heap
    };
    for i in (0..na).rev() {
        ra[i] = ra[i + 1] + usize::from(anchor_req[i]);
    }
    // reachable[(i, j)]: an alignment covers anchor cuts < i using b cuts < j
    let cells = (na + 1) * (nb + 1);
    let mut buf = [false; DP_STACK];
    let mut heap;
    let reachable: &mut [bool] = if cells <= DP_STACK {
        &mut buf[..cells]
    } else {
        heap = vec![false; cells];
        &mut heap
    };
    reachable[0] = true;
    for i in 0..=na {
        for j in 0..=nb {
            if !reachable[i * (nb + 1) + j] {
                continue;
            }
            if ra[i] == 0 && accept(j) {
                return true;
            }
            if i < na && j < nb && anchor_lows[i] == b.lows[j] {
                reachable[(i + 1) * (nb + 1) + j + 1] = true;
            }
            if i < na && !anchor_req[i] {
                reachable[(i + 1) * (nb + 1) + j] = true;
            }
            if j < nb && !b.required[j] {
                reachable[i * (nb + 1) + j + 1] = true;
            }
        }
    }
    false
}

/// Membership test used by attacker control: does some prefix of `b`'s run
/// align with the anchor trace?
pub(crate) fn prefix_aligns(
    anchor_lows: &[LowEvent],
    anchor_req: &[bool],
    b: &TraceProfile,
) -> bool {
    aligns_some_prefix(anchor_lows, anchor_req, b, |_| true)
}

/// Release-control clauses at a prefix of `b`'s run: a further release from
/// there, new knowledge from observing divergence (progress-sensitive only),
/// or termination of the run.
pub(crate) fn release_clause(b: &TraceProfile, qlen: usize, mode: Mode) -> bool {
    match mode {
        Mode::Ps => {
            let anchor = b.k[qlen];
            (qlen + 1..b.k.len()).any(|j| b.k[j] < anchor) || b.kdiv[qlen] < anchor || b.terminated
        }
        Mode::Pi => {
            let anchor = b.kp[qlen];
            (qlen + 1..b.k.len()).any(|j| b.k[j] < anchor) || b.terminated
        }
    }
}

pub(crate) fn prefix_aligns_with_clause(
    anchor_lows: &[LowEvent],
    anchor_req: &[bool],
    b: &TraceProfile,
    mode: Mode,
) -> bool {
    let clause_ok: Vec<bool> = (0..=b.lows.len())
        .map(|qlen| release_clause(b, qlen, mode))
        .collect();
    aligns_some_prefix(anchor_lows, anchor_req, b, |j| clause_ok[j])
}

fn anchor_of(
    p: &Program,
    m: &Memory,
    a: &AttackVector,
    tr: &[LowEvent],
    mode: Mode,
) -> Result<(Vec<LowEvent>, Vec<bool>), ControlError> {
    let ca = substitute(p, a)?;
    let pa = trace_profile_of(p, &ca, m, mode, tr.len());
    debug_assert!(
        tr.iter()
            .enumerate()
            .all(|(i, e)| pa.lows.get(i) == Some(e)),
        "anchor trace is not a prefix of the run of p[a]"
    );
    Ok(prefix_profile(&pa, tr.len()))
}

/// Attacker control: attacks whose runs are similar to `(a, tr)` on `m`.
pub fn attacker_control(
    p: &Program,
    m: &Memory,
    a: &AttackVector,
    tr: &[LowEvent],
    mode: Mode,
    universe: &[AttackVector],
) -> Result<AttackSet, ControlError> {
    let (alows, areq) = anchor_of(p, m, a, tr, mode)?;
    let mut out = AttackSet::new();
    for b in universe {
        let cb = substitute(p, b)?;
        let pb = trace_profile_of(p, &cb, m, mode, tr.len());
        if prefix_aligns(&alows, &areq, &pb) {
            out.insert(b.clone());
        }
    }
    Ok(out)
}

/// Release control: attacks similar to `(a, tr)` that can still produce a
/// release event, learn from divergence (progress-sensitive), or terminate.
pub fn release_control(
    p: &Program,
    m: &Memory,
    a: &AttackVector,
    tr: &[LowEvent],
    mode: Mode,
    universe: &[AttackVector],
) -> Result<AttackSet, ControlError> {
    let (alows, areq) = anchor_of(p, m, a, tr, mode)?;
    let mut out = AttackSet::new();
    for b in universe {
        let cb = substitute(p, b)?;
        let pb = trace_profile_of(p, &cb, m, mode, tr.len());
        if prefix_aligns_with_clause(&alows, &areq, &pb, mode) {
            out.insert(b.clone());
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attacks::{fair_universe, AttackConfig};
    use crate::parser::parse_program;
    use crate::semantics::Val;
    use std::collections::BTreeSet;

    fn attack(p: &Program, src: &str) -> AttackVector {
        let decls: String = p
            .env
            .vars()
            .map(|v| format!("var {}: {};\n", p.env.name(v), p.env.level(v)))
            .collect();
        let q = parse_program(&format!("{decls}{src}")).unwrap();
        AttackVector::new(vec![q.body.strip_spans()])
    }

    fn mem(p: &Program, pairs: &[(&str, Val)]) -> Memory {
        let mut m = Memory::zeros(p.env.len());
        for (name, v) in pairs {
            m.set(p.env.lookup(name).unwrap(), *v);
        }
        m
    }

    fn full_lows(p: &Program, a: &AttackVector, m: &Memory, mode: Mode) -> Vec<LowEvent> {
        let c = substitute(p, a).unwrap();
        let lr = LowRun::of_run(&run(&c, m, p.domain), &p.env, mode);
        lr.head
            .iter()
            .copied()
            .filter(|e| matches!(e, LowEvent::Assign(..)))
            .collect()
    }

    fn rendered(set: &AttackSet, p: &Program) -> BTreeSet<String> {
        set.iter().map(|a| a.render(p)).collect()
    }

    #[test]
    fn canonical_segmentation_no_release_events() {
        let p = parse_program(
            "var low: public trusted; var low2: public trusted; var h: secret trusted;
             low := 1; low2 := 2",
        )
        .unwrap();
        let m = Memory::zeros(3);
        let lows = full_lows(&p, &AttackVector::new(vec![]), &m, Mode::Ps);
        let seg = canonical_segmentation(&p, &p.body, &m, &lows, Mode::Ps);
        assert_eq!(seg.size(), 1);
        assert!(seg.events.is_empty());
    }

    #[test]
    fn canonical_segmentation_direct_copy() {
        let p = parse_program("var low: public trusted; var h: secret trusted; low := h")
            .unwrap()
            .with_domain(2);
        let m = mem(&p, &[("h", 1)]);
        let lows = full_lows(&p, &AttackVector::new(vec![]), &m, Mode::Ps);
        let seg = canonical_segmentation(&p, &p.body, &m, &lows, Mode::Ps);
        let low = p.env.lookup("low").unwrap();
        assert_eq!(seg.events, vec![LowEvent::Assign(low, 1)]);
        assert_eq!(seg.cuts, vec![0]);
    }

    #[test]
    fn canonical_pi_boundaries_differ_between_attacks() {
        // if (u) { while (h <= 2) skip }; low1 := 0; low2 := h > 2:
        // under u := 0 the second low assignment is the PI release; under
        // u := 1 progress knowledge anticipates it and nothing releases.
        let p = parse_program(
            "var u: public untrusted; var h: secret trusted;
             var low1: public trusted; var low2: public trusted;
             [#]; if (u) { while (h <= 2) { skip } } else { skip };
             low1 := 0; low2 := h > 2",
        )
        .unwrap()
        .with_domain(4);
        let m = mem(&p, &[("h", 3)]);
        let a1 = attack(&p, "u := 1");
        let a0 = attack(&p, "u := 0");
        let c1 = substitute(&p, &a1).unwrap();
        let c0 = substitute(&p, &a0).unwrap();
        let lows1 = full_lows(&p, &a1, &m, Mode::Pi);
        let lows0 = full_lows(&p, &a0, &m, Mode::Pi);
        let seg1 = canonical_segmentation(&p, &c1, &m, &lows1, Mode::Pi);
        let seg0 = canonical_segmentation(&p, &c0, &m, &lows0, Mode::Pi);
        assert_eq!(seg1.size(), 1, "u:=1 has no PI release: {seg1:?}");
        assert_eq!(seg0.size(), 2, "u:=0 releases at low2: {seg0:?}");
        let low2 = p.env.lookup("low2").unwrap();
        assert_eq!(seg0.events, vec![LowEvent::Assign(low2, 1)]);
    }

    #[test]
    fn similar_same_release_event() {
        let p = parse_program(
            "var u: public untrusted; var h: secret trusted; var low: public trusted;
             [#]; low := u < h",
        )
        .unwrap()
        .with_domain(16);
        let m = mem(&p, &[("h", 7)]);
        let a = attack(&p, "u := 5");
        let b = attack(&p, "u := 6");
        let ta = full_lows(&p, &a, &m, Mode::Ps);
        let tb = full_lows(&p, &b, &m, Mode::Ps);
        assert!(similar(&p, &m, &a, &ta, &b, &tb, Mode::Ps).unwrap());
        assert!(
            similar(&p, &m, &a, &ta, &a, &ta, Mode::Ps).unwrap(),
            "reflexive"
        );

        let c = attack(&p, "u := 9");
        let tc = full_lows(&p, &c, &m, Mode::Ps);
        assert!(!similar(&p, &m, &a, &ta, &c, &tc, Mode::Ps).unwrap());
        assert!(
            !similar(&p, &m, &c, &tc, &a, &ta, Mode::Ps).unwrap(),
            "symmetric"
        );
        assert!(!similar_oracle(&p, &m, &a, &ta, &c, &tc, Mode::Ps).unwrap());
    }

    #[test]
    fn oracle_agrees_with_alignment_on_attack_pairs() {
        let sources = [
            "var u: public untrusted; var h: secret trusted; var low: public trusted;
             [#]; low := u < h",
            "var u: public untrusted; var h: secret trusted; var low: public trusted;
             var low2: public trusted;
             [#]; low := u < h; low2 := h",
            "var u: public untrusted; var h: secret trusted; var low: public trusted;
             [#]; while (u > h) { skip }; low := 1",
            "var u: public untrusted; var h: secret trusted; var low: public trusted;
             [#]; if (u > 0) { low := h } else { skip }",
        ];
        for src in sources {
            let p = parse_program(src).unwrap().with_domain(2);
            let universe = fair_universe(&p, &AttackConfig::new(1, true));
            for m in crate::semantics::all_memories(&p.env, p.domain) {
                for mode in [Mode::Ps, Mode::Pi] {
                    for a in &universe {
                        for b in &universe {
                            let ta = full_lows(&p, a, &m, mode);
                            let tb = full_lows(&p, b, &m, mode);
                            if ta.len() > ORACLE_LIMIT || tb.len() > ORACLE_LIMIT {
                                continue;
                            }
                            let fast = similar(&p, &m, a, &ta, b, &tb, mode).unwrap();
                            let slow = similar_oracle(&p, &m, a, &ta, b, &tb, mode).unwrap();
                            assert_eq!(
                                fast,
                                slow,
                                "disagreement: {src} m={} a={} b={} {mode}",
                                m.render(&p.env),
                                a.render(&p),
                                b.render(&p)
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn control_shrinks_at_the_release_event() {
        // low := u < h; low2 := h with m(h) = 7: control after the full
        // trace is the attacks that leave u below 7
        let p = parse_program(
            "var u: public untrusted; var h: secret trusted;
             var low: public trusted; var low2: public trusted;
             [#]; low := u < h; low2 := h",
        )
        .unwrap()
        .with_domain(8);
        let m = mem(&p, &[("h", 7), ("u", 5)]);
        let universe = fair_universe(&p, &AttackConfig::new(1, false));
        let a = attack(&p, "u := 5");
        let tr = full_lows(&p, &a, &m, Mode::Ps);
        let r = attacker_control(&p, &m, &a, &tr, Mode::Ps, &universe).unwrap();
        let expect: BTreeSet<String> = [
            "skip", "u := 0", "u := 1", "u := 2", "u := 3", "u := 4", "u := 5", "u := 6",
        ]
        .into_iter()
        .map(String::from)
        .collect();
        assert_eq!(rendered(&r, &p), expect);
    }

    #[test]
    fn control_is_everything_when_release_is_first() {
        // low2 := h; low := u < h: the only release does not depend on the
        // attack, so control keeps all attacks that reach it
        let p = parse_program(
            "var u: public untrusted; var h: secret trusted;
             var low: public trusted; var low2: public trusted;
             [#]; low2 := h; low := u < h",
        )
        .unwrap()
        .with_domain(8);
        let m = mem(&p, &[("h", 7), ("u", 5)]);
        let universe = fair_universe(&p, &AttackConfig::new(1, false));
        let a = attack(&p, "u := 5");
        let tr = full_lows(&p, &a, &m, Mode::Ps);
        let r = attacker_control(&p, &m, &a, &tr, Mode::Ps, &universe).unwrap();
        assert_eq!(r.len(), universe.len());
    }

    #[test]
    fn pi_control_of_progress_leak_is_everything() {
        let p = parse_program(
            "var u: public untrusted; var h: secret trusted; var low: public trusted;
             [#]; while (u < h) { skip }; low := 1",
        )
        .unwrap()
        .with_domain(4);
        let m = mem(&p, &[("h", 2)]);
        let universe = fair_universe(&p, &AttackConfig::new(1, false));
        for a in &universe {
            let tr = full_lows(&p, a, &m, Mode::Pi);
            let r = attacker_control(&p, &m, a, &tr, Mode::Pi, &universe).unwrap();
            assert_eq!(r.len(), universe.len(), "anchor {}", a.render(&p));
        }
    }

    #[test]
    fn release_control_keeps_terminating_attacks_out_of_reach() {
        // if (u > 0) { low := h }: before the release, release control
        // includes attacks that terminate without it
        let p = parse_program(
            "var u: public untrusted; var h: secret trusted; var low: public trusted;
             [#]; if (u > 0) { low := h } else { skip }",
        )
        .unwrap()
        .with_domain(4);
        let m = mem(&p, &[("h", 3), ("u", 1)]);
        let universe = fair_universe(&p, &AttackConfig::new(1, false));
        let a = attack(&p, "u := 1");
        let u_var = p.env.lookup("u").unwrap();
        let t_before = vec![LowEvent::Assign(u_var, 1)];
        let rel = release_control(&p, &m, &a, &t_before, Mode::Ps, &universe).unwrap();
        assert!(
            rel.contains(&attack(&p, "u := 0")),
            "{:?}",
            rendered(&rel, &p)
        );
        // after the release, control excludes them
        let tr = full_lows(&p, &a, &m, Mode::Ps);
        let r = attacker_control(&p, &m, &a, &tr, Mode::Ps, &universe).unwrap();
        assert!(!r.contains(&attack(&p, "u := 0")));
        assert!(!rel.is_subset(&r), "this is the robustness violation");
    }

    #[test]
    fn eq1_chain_on_simple_release() {
        let p = parse_program(
            "var u: public untrusted; var h: secret trusted; var low: public trusted;
             [#]; low := u < h",
        )
        .unwrap()
        .with_domain(4);
        let universe = fair_universe(&p, &AttackConfig::new(1, false));
        for m in crate::semantics::all_memories(&p.env, p.domain) {
            for a in &universe {
                let ca = substitute(&p, a).unwrap();
                let profile = trace_profile_of(&p, &ca, &m, Mode::Ps, 0);
                let tr = profile.lows.clone();
                for cut in 0..tr.len() {
                    // the chain is claimed where the extension releases
                    if !profile.release[cut] {
                        continue;
                    }
                    let before = &tr[..cut];
                    let upto = &tr[..cut + 1];
                    let r_before =
                        attacker_control(&p, &m, a, before, Mode::Ps, &universe).unwrap();
                    let rel = release_control(&p, &m, a, before, Mode::Ps, &universe).unwrap();
                    let r_after = attacker_control(&p, &m, a, upto, Mode::Ps, &universe).unwrap();
                    assert!(rel.is_subset(&r_before), "R ⊇ R▷");
                    assert!(r_after.is_subset(&rel), "R▷ ⊇ R-after");
                    assert!(r_after.contains(a), "a ∈ R always");
                }
            }
        }
    }

    #[test]
    fn divergence_attack_is_not_release_control_for_pure_availability() {
        // while (u > 0) skip; low := h — divergence reveals nothing new
        let p = parse_program(
            "var u: public untrusted; var h: secret trusted; var low: public trusted;
             [#]; while (u > 0) { skip }; low := h",
        )
        .unwrap()
        .with_domain(4);
        let m = mem(&p, &[("h", 3), ("u", 0)]);
        let universe = fair_universe(&p, &AttackConfig::new(1, true));
        let a = attack(&p, "u := 0");
        let u_var = p.env.lookup("u").unwrap();
        let t_before = vec![LowEvent::Assign(u_var, 0)];
        let rel = release_control(&p, &m, &a, &t_before, Mode::Ps, &universe).unwrap();
        let div = attack(&p, "while (1) { skip }");
        assert!(!rel.contains(&div), "pure availability attack excluded");
        assert!(rel.contains(&attack(&p, "u := 0")));
    }
}
