//! Annotations: types for registers and current-frame stack slots.

use alloc::collections::{BTreeMap, BTreeSet};
use core::fmt;

use crate::reg::Reg;
use crate::types::AnnotatedType;
use crate::unify::Subst;

/// A register or a current-frame stack slot.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Loc {
    Reg(Reg),
    Slot(u32),
}

/// Register and slot typing at one program point. At most one register is
/// starred as the holder of the stack pointer.
///
/// `sp_copies` lists the locations holding an exact copy of the stack
/// pointer made by `cspt` in the current routine. Only those may be moved
/// back into the starred register; a `c^[0]` computed by arithmetic has the
/// same type but not the same alias. The set is not part of the text form.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Annotation {
    pub star: Option<Reg>,
    pub regs: BTreeMap<Reg, AnnotatedType>,
    pub slots: BTreeMap<u32, AnnotatedType>,
    pub sp_copies: BTreeSet<Loc>,
}

impl Annotation {
    pub fn new() -> Annotation {
        Annotation::default()
    }

    pub fn get(&self, r: Reg) -> Option<&AnnotatedType> {
        self.regs.get(&r)
    }

    /// Bind `r` to a value that is not a stack-pointer copy. Writes to
    /// `zero` are discarded.
    pub fn set(&mut self, r: Reg, t: AnnotatedType) {
        if r != Reg::ZERO {
            self.regs.insert(r, t);
            self.sp_copies.remove(&Loc::Reg(r));
        }
    }

    /// Bind `r` and mark whether it holds a stack-pointer copy.
    pub fn set_copy(&mut self, r: Reg, t: AnnotatedType, copy: bool) {
        if r == Reg::ZERO {
            return;
        }
        self.set(r, t);
        if copy {
            self.sp_copies.insert(Loc::Reg(r));
        }
    }

    pub fn is_copy(&self, l: Loc) -> bool {
        self.sp_copies.contains(&l)
    }

    pub fn clear_slots(&mut self) {
        self.slots.clear();
        self.sp_copies.retain(|l| matches!(l, Loc::Reg(_)));
    }

    pub fn remove_slot(&mut self, k: u32) {
        self.slots.remove(&k);
        self.sp_copies.remove(&Loc::Slot(k));
    }

    pub fn with(mut self, r: Reg, t: AnnotatedType) -> Annotation {
        self.regs.insert(r, t);
        self
    }

    pub fn with_star(mut self, r: Reg, t: AnnotatedType) -> Annotation {
        self.star = Some(r);
        self.regs.insert(r, t);
        self
    }

    pub fn with_slot(mut self, k: u32, t: AnnotatedType) -> Annotation {
        self.slots.insert(k, t);
        self
    }

    /// The starred register and its type.
    pub fn star_type(&self) -> Option<(Reg, &AnnotatedType)> {
        let r = self.star?;
        self.regs.get(&r).map(|t| (r, t))
    }

    pub fn is_starred(&self, r: Reg) -> bool {
        self.star == Some(r)
    }

    pub fn apply(&self, s: &Subst) -> Annotation {
        Annotation {
            star: self.star,
            regs: self.regs.iter().map(|(r, t)| (*r, s.apply(t))).collect(),
            slots: self.slots.iter().map(|(k, t)| (*k, s.apply(t))).collect(),
            sp_copies: self.sp_copies.clone(),
        }
    }

    pub fn is_ground(&self) -> bool {
        self.regs.values().chain(self.slots.values()).all(AnnotatedType::is_ground)
    }
}

impl fmt::Display for Annotation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        let mut sep = |f: &mut fmt::Formatter<'_>| {
            if !first {
                f.write_str(", ")?;
            }
            first = false;
            Ok::<(), fmt::Error>(())
        };
        for (r, t) in &self.regs {
            sep(f)?;
            let star = if self.star == Some(*r) { "*" } else { "" };
            write!(f, "{r}{star}={t}")?;
        }
        for (k, t) in &self.slots {
            sep(f)?;
            write!(f, "({k})={t}")?;
        }
        Ok(())
    }
}
