//! Jam policies: predicates over the header prefix of a frame still on air.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{decode_prefix, DevAddr, MType, Prefix};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PolicyError {
    #[error("policy needs the first {need} bytes but the jammer reads only {read}")]
    ReadDepth { need: usize, read: usize },
    #[error("empty {0} list in policy")]
    EmptyList(&'static str),
    #[error("fcnt range {min}..={max} is empty")]
    EmptyRange { min: u16, max: u16 },
}

/// Written in scenario files as an externally tagged tree, e.g.
/// `{ and = [{ dev_addr = ["12345663"] }, { not = { fcnt = { min = 0, max = 9 } } }] }`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JamPolicy {
    Any,
    Never,
    DevAddr(Vec<DevAddr>),
    Mtype(Vec<MType>),
    Fcnt { min: u16, max: u16 },
    And(Vec<JamPolicy>),
    Or(Vec<JamPolicy>),
    Not(Box<JamPolicy>),
}

impl JamPolicy {
    /// Prefix length the predicate needs before it can be decided.
    pub fn depth(&self) -> usize {
        match self {
            JamPolicy::Any | JamPolicy::Never => 0,
            JamPolicy::Mtype(_) => 1,
            JamPolicy::DevAddr(_) => Prefix::DEV_ADDR_DEPTH,
            JamPolicy::Fcnt { .. } => Prefix::FCNT_DEPTH,
            JamPolicy::And(ps) | JamPolicy::Or(ps) => ps.iter().map(JamPolicy::depth).max().unwrap_or(0),
            JamPolicy::Not(p) => p.depth(),
        }
    }

    /// Checks the tree is well formed and decidable from `read_bytes` bytes.
    pub fn compile(self, read_bytes: usize) -> Result<CompiledPolicy, PolicyError> {
        self.check()?;
        let need = self.depth();
        if need > read_bytes {
            return Err(PolicyError::ReadDepth { need, read: read_bytes });
        }
        Ok(CompiledPolicy { policy: self, read_bytes })
    }

    fn check(&self) -> Result<(), PolicyError> {
        match self {
            JamPolicy::DevAddr(v) if v.is_empty() => Err(PolicyError::EmptyList("dev_addr")),
            JamPolicy::Mtype(v) if v.is_empty() => Err(PolicyError::EmptyList("mtype")),
            JamPolicy::And(v) if v.is_empty() => Err(PolicyError::EmptyList("and")),
            JamPolicy::Or(v) if v.is_empty() => Err(PolicyError::EmptyList("or")),
            &JamPolicy::Fcnt { min, max } if min > max => Err(PolicyError::EmptyRange { min, max }),
            JamPolicy::And(v) | JamPolicy::Or(v) => v.iter().try_for_each(JamPolicy::check),
            JamPolicy::Not(p) => p.check(),
            _ => Ok(()),
        }
    }

    fn eval(&self, p: &Prefix) -> bool {
        match self {
            JamPolicy::Any => true,
            JamPolicy::Never => false,
            JamPolicy::DevAddr(set) => p.dev_addr.is_some_and(|a| set.contains(&a)),
            JamPolicy::Mtype(set) => p.mhdr.is_some_and(|m| set.contains(&m.mtype())),
            JamPolicy::Fcnt { min, max } => p.fcnt.is_some_and(|f| (*min..=*max).contains(&f)),
            JamPolicy::And(ps) => ps.iter().all(|q| q.eval(p)),
            JamPolicy::Or(ps) => ps.iter().any(|q| q.eval(p)),
            JamPolicy::Not(q) => !q.eval(p),
        }
    }
}

/// A policy that has passed [`JamPolicy::compile`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompiledPolicy {
    policy: JamPolicy,
    read_bytes: usize,
}

impl CompiledPolicy {
    pub fn read_bytes(&self) -> usize {
        self.read_bytes
    }

    pub fn policy(&self) -> &JamPolicy {
        &self.policy
    }

    /// Decides on whatever the reader holds; bytes past the read depth are
    /// never looked at.
    pub fn matches(&self, wire: &[u8]) -> bool {
        let n = self.read_bytes.min(wire.len());
        self.policy.eval(&decode_prefix(&wire[..n]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::{encode, encode_join_request, FrameHeader, SessionKeys};

    fn frame(addr: u32, fcnt: u16) -> Vec<u8> {
        let keys = SessionKeys { nwk_skey: [1; 16], app_skey: [2; 16] };
        encode(&FrameHeader::uplink(DevAddr(addr), fcnt, Some(1)), &keys, &[0; 4], 59).unwrap().bytes
    }

    #[test]
    fn dev_addr_needs_five_bytes() {
        let p = JamPolicy::DevAddr(vec![DevAddr(0x12345663)]);
        assert_eq!(p.clone().compile(4), Err(PolicyError::ReadDepth { need: 5, read: 4 }));
        let c = p.compile(5).unwrap();
        assert!(c.matches(&frame(0x12345663, 0)));
        assert!(!c.matches(&frame(0x12345664, 0)));
    }

    #[test]
    fn fcnt_window_and_combinators() {
        let p = JamPolicy::And(vec![
            JamPolicy::DevAddr(vec![DevAddr(7)]),
            JamPolicy::Not(Box::new(JamPolicy::Fcnt { min: 0, max: 9 })),
        ]);
        assert!(p.clone().compile(5).is_err());
        let c = p.compile(8).unwrap();
        assert!(!c.matches(&frame(7, 3)));
        assert!(c.matches(&frame(7, 10)));
        assert!(!c.matches(&frame(8, 10)));
        let either = JamPolicy::Or(vec![JamPolicy::Never, JamPolicy::Fcnt { min: 5, max: 5 }]).compile(8).unwrap();
        assert!(either.matches(&frame(1, 5)) && !either.matches(&frame(1, 6)));
    }

    #[test]
    fn join_type_policy() {
        let c = JamPolicy::Mtype(vec![MType::JoinRequest]).compile(5).unwrap();
        assert!(c.matches(&encode_join_request(1, 2, 3, &[0; 16]).bytes));
        assert!(!c.matches(&frame(1, 0)));
    }

    #[test]
    fn malformed_trees_rejected() {
        assert!(JamPolicy::Or(vec![]).compile(8).is_err());
        assert!(JamPolicy::Not(Box::new(JamPolicy::DevAddr(vec![]))).compile(8).is_err());
        assert_eq!(JamPolicy::Fcnt { min: 3, max: 2 }.compile(8), Err(PolicyError::EmptyRange { min: 3, max: 2 }));
    }

    #[test]
    fn toml_form() {
        #[derive(Serialize, Deserialize)]
        struct W {
            policy: JamPolicy,
        }
        let w: W = toml::from_str(r#"policy = { or = [{ dev_addr = ["12345663"] }, { mtype = ["join_request"] }, "any"] }"#).unwrap();
        assert_eq!(w.policy.depth(), 5);
        let back: W = toml::from_str(&toml::to_string(&w).unwrap()).unwrap();
        assert_eq!(back.policy, w.policy);
    }
}
