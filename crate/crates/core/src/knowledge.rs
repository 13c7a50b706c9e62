//! Attacker knowledge, progress knowledge, divergence knowledge, release
//! event classification, and progress-insensitive noninterference along a
//! trace segment — all computed by exhaustive enumeration of initial
//! memories over the finite domain.
//!
//! A knowledge set holds every initial memory that agrees with the anchor on
//! public variables and whose run could have produced the observed low
//! events. Shrinkage is learning: the smaller the set, the more the attacker
//! knows about secrets.

use crate::ast::{Cmd, Program};
use crate::semantics::{memories_agreeing_public, run, LowEvent, LowRun, Memory, Mode, Val};
use std::collections::BTreeSet;

/// An explicit set of initial memories.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MemorySet(pub BTreeSet<Memory>);

impl MemorySet {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, m: &Memory) -> bool {
        self.0.contains(m)
    }

    pub fn is_subset(&self, other: &MemorySet) -> bool {
        self.0.is_subset(&other.0)
    }

    pub fn is_strict_superset(&self, other: &MemorySet) -> bool {
        other.0.is_subset(&self.0) && other.0.len() < self.0.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Memory> {
        self.0.iter()
    }
}

impl FromIterator<Memory> for MemorySet {
    fn from_iter<T: IntoIterator<Item = Memory>>(iter: T) -> Self {
        MemorySet(iter.into_iter().collect())
    }
}

/// Runs of every memory agreeing with the anchor's public part. The basis
/// for each knowledge query.
pub(crate) fn sibling_low_runs(
    p: &Program,
    c: &Cmd,
    anchor: &Memory,
    mode: Mode,
) -> Vec<(Memory, LowRun)> {
    memories_agreeing_public(&p.env, p.domain, anchor)
        .into_iter()
        .map(|m| {
            let r = run(c, &m, p.domain);
            let lr = LowRun::of_run(&r, &p.env, mode);
            (m, lr)
        })
        .collect()
}

/// Attacker knowledge: memories that agree with the anchor on public
/// variables and whose run produces `lseq` as a prefix of its low events.
pub fn knowledge(
    p: &Program,
    c: &Cmd,
    anchor: &Memory,
    lseq: &[LowEvent],
    mode: Mode,
) -> MemorySet {
    sibling_low_runs(p, c, anchor, mode)
        .into_iter()
        .filter(|(_, lr)| lr.matches_prefix(lseq))
        .map(|(m, _)| m)
        .collect()
}

/// Progress knowledge: memories whose run extends `lseq` by at least one
/// more low event (the final ⇓ — and ⇑ for the progress-sensitive attacker —
/// counts as an event).
pub fn progress_knowledge(
    p: &Program,
    c: &Cmd,
    anchor: &Memory,
    lseq: &[LowEvent],
    mode: Mode,
) -> MemorySet {
    sibling_low_runs(p, c, anchor, mode)
        .into_iter()
        .filter(|(_, lr)| lr.extends_strictly(lseq))
        .map(|(m, _)| m)
        .collect()
}

/// Divergence knowledge: memories whose run produces `lseq` as a low prefix
/// and diverges. Divergence need not be immediate; more low events may
/// follow `lseq` before the run stops making progress.
pub fn divergence_knowledge(p: &Program, c: &Cmd, anchor: &Memory, lseq: &[LowEvent]) -> MemorySet {
    debug_assert!(
        lseq.iter().all(|e| matches!(e, LowEvent::Assign(..))),
        "divergence knowledge takes a proper event prefix"
    );
    sibling_low_runs(p, c, anchor, Mode::Ps)
        .into_iter()
        .filter(|(_, lr)| lr.diverges && lr.matches_prefix(lseq))
        .map(|(m, _)| m)
        .collect()
}

/// Is the low event `r`, produced right after `prefix`, a release event?
/// Progress-sensitive: knowledge strictly shrinks across `r`.
/// Progress-insensitive: it shrinks below the progress knowledge at `prefix`.
pub fn classify_release(
    p: &Program,
    c: &Cmd,
    m: &Memory,
    prefix: &[LowEvent],
    r: LowEvent,
    mode: Mode,
) -> bool {
    let mut extended = prefix.to_vec();
    extended.push(r);
    let after = knowledge(p, c, m, &extended, mode);
    let before = match mode {
        Mode::Ps => knowledge(p, c, m, prefix, mode),
        Mode::Pi => progress_knowledge(p, c, m, prefix, mode),
    };
    before.is_strict_superset(&after)
}

/// Progress-insensitive noninterference along the part of a run's low events
/// from position `from_len` to `to_len`: at every step in that window,
/// progress knowledge is not refined by the next event.
pub fn pini_segment(p: &Program, c: &Cmd, m: &Memory, from_len: usize, to_len: usize) -> bool {
    debug_assert!(from_len <= to_len);
    let full = LowRun::of_run(&run(c, m, p.domain), &p.env, Mode::Pi);
    for i in from_len..to_len {
        let prefix = full.materialize(i);
        if prefix.len() < i {
            break; // run ended before the window did
        }
        let Some(next) = full.event_at(i) else {
            break;
        };
        let mut extended = prefix.clone();
        extended.push(next);
        let before = progress_knowledge(p, c, m, &prefix, Mode::Pi);
        let after = knowledge(p, c, m, &extended, Mode::Pi);
        if !before.is_subset(&after) {
            return false;
        }
    }
    true
}

/// Every memory in the set, restricted to the named variable. Test helper
/// for asserting knowledge sets like "all memories where h = 7".
pub fn values_of(set: &MemorySet, p: &Program, var: &str) -> BTreeSet<Val> {
    let v = p.env.lookup(var).expect("unknown variable");
    set.iter().map(|m| m.get(v)).collect()
}
