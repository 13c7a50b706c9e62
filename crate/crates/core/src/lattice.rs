//! The four-point confidentiality/integrity lattice and security environments.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;

/// Confidentiality component. `Public` flows to `Secret`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Conf {
    Public,
    Secret,
}

/// Integrity component. `Trusted` flows to `Untrusted`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Integ {
    Trusted,
    Untrusted,
}

/// A point on the security lattice: one confidentiality and one integrity
/// component, ordered componentwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Level {
    pub conf: Conf,
    pub integ: Integ,
}

impl Level {
    pub const fn new(conf: Conf, integ: Integ) -> Level {
        Level { conf, integ }
    }

    /// Lattice bottom: (Public, Trusted).
    pub const fn bottom() -> Level {
        Level::new(Conf::Public, Integ::Trusted)
    }

    /// Lattice top: (Secret, Untrusted).
    pub const fn top() -> Level {
        Level::new(Conf::Secret, Integ::Untrusted)
    }

    /// Componentwise ordering: Public ⊑ Secret, Trusted ⊑ Untrusted.
    pub fn leq(self, other: Level) -> bool {
        let conf_ok = !(self.conf == Conf::Secret && other.conf == Conf::Public);
        let integ_ok = !(self.integ == Integ::Untrusted && other.integ == Integ::Trusted);
        conf_ok && integ_ok
    }

    /// Least upper bound.
    pub fn join(self, other: Level) -> Level {
        Level {
            conf: if self.conf == Conf::Secret || other.conf == Conf::Secret {
                Conf::Secret
            } else {
                Conf::Public
            },
            integ: if self.integ == Integ::Untrusted || other.integ == Integ::Untrusted {
                Integ::Untrusted
            } else {
                Integ::Trusted
            },
        }
    }

    /// Greatest lower bound.
    pub fn meet(self, other: Level) -> Level {
        Level {
            conf: if self.conf == Conf::Public || other.conf == Conf::Public {
                Conf::Public
            } else {
                Conf::Secret
            },
            integ: if self.integ == Integ::Trusted || other.integ == Integ::Trusted {
                Integ::Trusted
            } else {
                Integ::Untrusted
            },
        }
    }

    pub fn is_public(self) -> bool {
        self.conf == Conf::Public
    }

    pub fn is_trusted(self) -> bool {
        self.integ == Integ::Trusted
    }

    /// All four lattice points, bottom to top.
    pub fn all() -> [Level; 4] {
        [
            Level::new(Conf::Public, Integ::Trusted),
            Level::new(Conf::Public, Integ::Untrusted),
            Level::new(Conf::Secret, Integ::Trusted),
            Level::new(Conf::Secret, Integ::Untrusted),
        ]
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self.conf {
            Conf::Public => "public",
            Conf::Secret => "secret",
        };
        let i = match self.integ {
            Integ::Trusted => "trusted",
            Integ::Untrusted => "untrusted",
        };
        write!(f, "{c} {i}")
    }
}

/// Interned variable identifier. Indexes into [`SecurityEnv`] tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VarId(pub u32);

impl VarId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Maps every program variable to its security level.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SecurityEnv {
    names: Vec<String>,
    levels: Vec<Level>,
    #[serde(skip)]
    by_name: BTreeMap<String, VarId>,
}

impl SecurityEnv {
    pub fn new() -> SecurityEnv {
        SecurityEnv {
            names: Vec::new(),
            levels: Vec::new(),
            by_name: BTreeMap::new(),
        }
    }

    /// Declare a variable. Returns None if the name is already taken.
    pub fn declare(&mut self, name: &str, level: Level) -> Option<VarId> {
        if self.by_name.contains_key(name) {
            return None;
        }
        let id = VarId(self.names.len() as u32);
        self.names.push(name.to_string());
        self.levels.push(level);
        self.by_name.insert(name.to_string(), id);
        Some(id)
    }

    pub fn lookup(&self, name: &str) -> Option<VarId> {
        self.by_name.get(name).copied()
    }

    pub fn level(&self, v: VarId) -> Level {
        self.levels[v.index()]
    }

    pub fn set_level(&mut self, v: VarId, level: Level) {
        self.levels[v.index()] = level;
    }

    pub fn name(&self, v: VarId) -> &str {
        &self.names[v.index()]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Variables in declaration order.
    pub fn vars(&self) -> impl Iterator<Item = VarId> + '_ {
        (0..self.names.len() as u32).map(VarId)
    }

    pub fn public_vars(&self) -> Vec<VarId> {
        self.vars().filter(|&v| self.level(v).is_public()).collect()
    }

    pub fn secret_vars(&self) -> Vec<VarId> {
        self.vars()
            .filter(|&v| !self.level(v).is_public())
            .collect()
    }

    pub fn trusted_vars(&self) -> Vec<VarId> {
        self.vars()
            .filter(|&v| self.level(v).is_trusted())
            .collect()
    }

    pub fn untrusted_vars(&self) -> Vec<VarId> {
        self.vars()
            .filter(|&v| !self.level(v).is_trusted())
            .collect()
    }
}

impl Default for SecurityEnv {
    fn default() -> Self {
        SecurityEnv::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt() -> Level {
        Level::new(Conf::Public, Integ::Trusted)
    }
    fn pu() -> Level {
        Level::new(Conf::Public, Integ::Untrusted)
    }
    fn st() -> Level {
        Level::new(Conf::Secret, Integ::Trusted)
    }
    fn su() -> Level {
        Level::new(Conf::Secret, Integ::Untrusted)
    }

    #[test]
    fn join_meet_leq_examples() {
        assert_eq!(pt().join(st()), st());
        assert_eq!(su().meet(pu()), pu());
        assert!(pt().leq(su()));
        assert!(!st().leq(pu()));
    }

    #[test]
    fn partial_order_on_four_points() {
        for a in Level::all() {
            assert!(a.leq(a));
            for b in Level::all() {
                if a.leq(b) && b.leq(a) {
                    assert_eq!(a, b);
                }
                for c in Level::all() {
                    if a.leq(b) && b.leq(c) {
                        assert!(a.leq(c));
                    }
                }
            }
        }
    }

    #[test]
    fn lattice_laws_exhaustive() {
        for a in Level::all() {
            for b in Level::all() {
                let j = a.join(b);
                let m = a.meet(b);
                assert!(a.leq(j) && b.leq(j));
                assert!(m.leq(a) && m.leq(b));
                // lub/glb minimality against every candidate
                for c in Level::all() {
                    if a.leq(c) && b.leq(c) {
                        assert!(j.leq(c));
                    }
                    if c.leq(a) && c.leq(b) {
                        assert!(c.leq(m));
                    }
                }
                // absorption
                assert_eq!(a.join(a.meet(b)), a);
                assert_eq!(a.meet(a.join(b)), a);
                // commutativity
                assert_eq!(a.join(b), b.join(a));
                assert_eq!(a.meet(b), b.meet(a));
            }
        }
    }

    #[test]
    fn env_declares_and_projects() {
        let mut env = SecurityEnv::new();
        let u = env.declare("u", pu()).unwrap();
        let h = env.declare("h", st()).unwrap();
        assert!(env.declare("u", pt()).is_none());
        assert_eq!(env.lookup("h"), Some(h));
        assert_eq!(env.public_vars(), vec![u]);
        assert_eq!(env.secret_vars(), vec![h]);
        assert_eq!(env.untrusted_vars(), vec![u]);
    }
}
