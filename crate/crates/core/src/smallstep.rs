//! Small-step rules: the annotation transformer of each stack instruction.

use core::fmt;

use crate::annotation::{Annotation, Loc};
use crate::disasm::pattern_matches;
use crate::stack::{Kind, StackInstr};
use crate::types::{check_read, pop_frame, push_frame, record_write, AnnotatedType, TypeError, Width};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RuleError {
    /// The annotation does not have the shape the rule needs.
    PatternMismatch { rule: Kind },
    /// The shape fits but an access or frame operation is illegal.
    Type { rule: Kind, error: TypeError },
    ReturnRegisterNotU0,
}

impl fmt::Display for RuleError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RuleError::PatternMismatch { rule } => write!(f, "{} does not apply here", rule.name()),
            RuleError::Type { rule, error } => write!(f, "{}: {}", rule.name(), error),
            RuleError::ReturnRegisterNotU0 => write!(f, "return register is not u^0"),
        }
    }
}

/// Drop slot bindings that a `w`-byte store at `k` partly overwrites. Slot
/// widths are not tracked, so every slot is taken to span a word.
fn invalidate_overlaps(b: &mut Annotation, k: u32, w: Width) {
    let hit: alloc::vec::Vec<u32> = b
        .slots
        .keys()
        .copied()
        .filter(|&j| j != k && j < k + w.bytes() && k < j + 4)
        .collect();
    for j in hit {
        b.remove_slot(j);
    }
}

/// The post-annotation of `s` executed from `a`.
///
/// Control instructions leave the annotation unchanged; their big-step
/// effect is the certifier's business. `return` checks its register holds
/// a return address.
pub fn apply_smallstep(s: &StackInstr, a: &Annotation) -> Result<Annotation, RuleError> {
    let rule = s.kind();
    if !pattern_matches(s, a) {
        return Err(RuleError::PatternMismatch { rule });
    }
    let ty = |error| RuleError::Type { rule, error };
    let star = || a.star_type().expect("pattern checked").1;
    let reg = |r| a.get(r).expect("pattern checked");
    let mut b = a.clone();
    match *s {
        StackInstr::Cspt { dst, .. } => b.set_copy(dst, star().clone(), true),
        StackInstr::Cspf { sp, src } => {
            b.regs.insert(sp, reg(src).clone());
        }
        StackInstr::Rspf { sp, src } => {
            let t = reg(src).clone();
            if let Some(crate::types::OffsetSet::Concrete(ks)) = t.offsets() {
                for k in ks {
                    b.remove_slot(*k);
                }
            }
            b.regs.insert(sp, t);
        }
        StackInstr::Push { sp, n } => {
            let t = push_frame(star(), n as i64).map_err(ty)?;
            b.regs.insert(sp, t);
            b.clear_slots();
        }
        StackInstr::Get { dst, k, width, .. } => {
            check_read(star(), k as i64, width).map_err(ty)?;
            let k = k as u32;
            let slot = a.slots.get(&k).ok_or(ty(TypeError::ReadBeforeWrite { k }))?;
            match width {
                Width::Word => b.set_copy(dst, slot.clone(), a.is_copy(Loc::Slot(k))),
                Width::Byte => b.set(dst, AnnotatedType::c0()),
            }
        }
        StackInstr::Put { src, k, sp, width } => {
            let t = record_write(star(), k as i64, width).map_err(ty)?;
            b.regs.insert(sp, t);
            let k = k as u32;
            invalidate_overlaps(&mut b, k, width);
            b.remove_slot(k);
            match width {
                Width::Word => {
                    b.slots.insert(k, reg(src).clone());
                    if a.is_copy(Loc::Reg(src)) {
                        b.sp_copies.insert(Loc::Slot(k));
                    }
                }
                Width::Byte => {
                    b.slots.insert(k, AnnotatedType::c0());
                }
            }
        }
        StackInstr::NewX { dst, step, .. } => b.set(dst, AnnotatedType::string(step, &[])),
        StackInstr::NewH { dst, size, .. } => b.set(dst, AnnotatedType::array(size, &[])),
        StackInstr::StepX { r, n } => {
            let t = pop_frame(reg(r), n as i64).map_err(ty)?;
            b.set(r, t);
        }
        StackInstr::GetX { dst, k, base, width } | StackInstr::Lwfh { dst, k, base, width } => {
            check_read(reg(base), k as i64, width).map_err(ty)?;
            b.set(dst, AnnotatedType::c0());
        }
        StackInstr::PutX { k, base, width, .. } | StackInstr::Swth { k, base, width, .. } => {
            let t = record_write(reg(base), k as i64, width).map_err(ty)?;
            b.set(base, t);
        }
        StackInstr::Return { rs } => {
            if *reg(rs) != AnnotatedType::u0() {
                return Err(RuleError::ReturnRegisterNotU0);
            }
        }
        StackInstr::Mov { dst, src } => b.set_copy(dst, reg(src).clone(), a.is_copy(Loc::Reg(src))),
        StackInstr::Addaiu { dst, .. } | StackInstr::AddOp { dst, .. } | StackInstr::NandOp { dst, .. } => {
            b.set(dst, AnnotatedType::c0())
        }
        StackInstr::Gosub { .. }
        | StackInstr::Goto { .. }
        | StackInstr::Ifnz { .. }
        | StackInstr::IfEq { .. }
        | StackInstr::Nop => {}
    }
    Ok(b)
}
