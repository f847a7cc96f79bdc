//! Post-hoc safety conditions over a finished theory.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::certifier::Theory;
use crate::stack::StackInstr;
use crate::types::{check_read, record_write, AnnotatedType, Tower, TypeError, Width};

/// Which byte-wide accesses are allowed. Bytes written through one pointer
/// and read as part of a word through another are only safe when the
/// hardware aliases bytes and words together, so byte access is limited.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum BytePolicy {
    Forbid,
    /// Byte access only through strings with step below 4 and arrays of
    /// size below 4.
    #[default]
    SmallStructs,
    Permissive,
}

impl BytePolicy {
    pub fn name(self) -> &'static str {
        match self {
            BytePolicy::Forbid => "forbid",
            BytePolicy::SmallStructs => "small-structs",
            BytePolicy::Permissive => "permissive",
        }
    }

    pub fn parse(s: &str) -> Option<BytePolicy> {
        [BytePolicy::Forbid, BytePolicy::SmallStructs, BytePolicy::Permissive]
            .into_iter()
            .find(|p| p.name() == s)
    }

    fn allows(self, base: &AnnotatedType) -> bool {
        match self {
            BytePolicy::Forbid => false,
            BytePolicy::Permissive => true,
            BytePolicy::SmallStructs => match base {
                AnnotatedType::Calc { tower: Tower::Rep(n), .. } => *n < 4,
                AnnotatedType::Uncalc { size, .. } => *size < 4,
                _ => false,
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ViolationKind {
    Access(TypeError),
    BytePolicyForbidden,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub routine: String,
    pub addr: u32,
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at {:#010x}: ", self.routine, self.addr)?;
        match &self.kind {
            ViolationKind::Access(e) => write!(f, "{e}"),
            ViolationKind::BytePolicyForbidden => write!(f, "byte access not allowed by policy"),
        }
    }
}

/// Re-check every memory access of `t` against its pre-annotation and the
/// byte policy. An empty result means the theory is alias-safe.
pub fn check_safety(t: &Theory, policy: BytePolicy) -> Vec<Violation> {
    let mut out = Vec::new();
    for r in &t.routines {
        for row in r.rows.values() {
            let (base, k, width, write) = match row.chosen {
                StackInstr::Get { k, width, .. } => (row.pre.star_type().map(|s| s.1), k, width, false),
                StackInstr::Put { k, width, .. } => (row.pre.star_type().map(|s| s.1), k, width, true),
                StackInstr::GetX { k, base, width, .. } | StackInstr::Lwfh { k, base, width, .. } => {
                    (row.pre.get(base), k, width, false)
                }
                StackInstr::PutX { k, base, width, .. } | StackInstr::Swth { k, base, width, .. } => {
                    (row.pre.get(base), k, width, true)
                }
                _ => continue,
            };
            let mut push = |kind| out.push(Violation { routine: r.label.clone(), addr: row.addr, kind });
            let Some(base) = base else {
                push(ViolationKind::Access(TypeError::ImmutableValue));
                continue;
            };
            let res = if write {
                record_write(base, k as i64, width).map(|_| ())
            } else {
                check_read(base, k as i64, width)
            };
            if let Err(e) = res {
                push(ViolationKind::Access(e));
            }
            if width == Width::Byte && !policy.allows(base) {
                push(ViolationKind::BytePolicyForbidden);
            }
        }
    }
    out
}
