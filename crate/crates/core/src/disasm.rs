//! Disassembly of machine instructions to stack-machine candidates.

use alloc::vec::Vec;

use crate::annotation::{Annotation, Loc};
use crate::device::DeviceMap;
use crate::isa::{Instruction, MemOp, Opcode, Program};
use crate::reg::Reg;
use crate::stack::{Kind, StackInstr};
use crate::types::{AnnotatedType, Tower};

/// What the disassembler knows beyond the instruction itself: the data
/// segment and the device window, both needed to classify `li`.
#[derive(Clone, Copy, Debug)]
pub struct Context<'a> {
    pub program: &'a Program,
    pub devices: DeviceMap,
}

/// Stack instructions a machine opcode may disassemble to, given whether
/// its first and second register operands hold the stack pointer.
///
/// Operands are counted in machine order (`sw r1 m(r2)`, `move r1 r2`,
/// `addiu r1 r2 m`). For three-register forms `r2` stands for either source.
/// `same` says whether `r1` and `r2` are one register. The starred register
/// may not appear in any other operand position.
pub fn sp_admissible(op: Opcode, r1_star: bool, r2_star: bool, same: bool) -> &'static [Kind] {
    let (a, b) = (r1_star, r2_star);
    match op {
        Opcode::Move => match (a, b) {
            (false, true) => &[Kind::Cspt],
            (true, false) => &[Kind::Cspf, Kind::Rspf],
            (false, false) => &[Kind::Mov],
            (true, true) => &[],
        },
        Opcode::Addiu => match (a, b, same) {
            (true, true, true) => &[Kind::Push],
            (false, false, true) => &[Kind::StepX, Kind::Addaiu],
            (false, false, false) => &[Kind::Addaiu],
            _ => &[],
        },
        Opcode::Lw => mem_row(a, b, &[Kind::Get, Kind::Lwfh, Kind::GetX]),
        Opcode::Sw => mem_row(a, b, &[Kind::Put, Kind::Swth, Kind::PutX]),
        Opcode::Lb => mem_row(a, b, &[Kind::Getb, Kind::Lbfh, Kind::GetbX]),
        Opcode::Sb => mem_row(a, b, &[Kind::Putb, Kind::Sbth, Kind::PutbX]),
        Opcode::Li if !a => &[Kind::NewX, Kind::NewH],
        Opcode::Addu if !a && !b => &[Kind::AddOp],
        Opcode::Nand if !a && !b => &[Kind::NandOp],
        Opcode::Beq if !a && !b => &[Kind::IfEq],
        Opcode::Bnez if !a => &[Kind::Ifnz],
        Opcode::Jr if !a => &[Kind::Return],
        Opcode::J => &[Kind::Goto],
        Opcode::Jal => &[Kind::Gosub],
        Opcode::Nop => &[Kind::Nop],
        _ => &[],
    }
}

fn mem_row(r1_star: bool, r2_star: bool, row: &'static [Kind; 3]) -> &'static [Kind] {
    // Stack form needs the base starred, heap forms need it unstarred; the
    // transferred register is never the stack pointer.
    match (r1_star, r2_star) {
        (false, true) => &row[..1],
        (false, false) => &row[1..],
        _ => &[],
    }
}

/// Register operands of `i` in machine order: (r1, r2, further sources).
fn operands(i: &Instruction) -> (Option<Reg>, Option<Reg>, Option<Reg>) {
    match *i {
        Instruction::Mem { reg, base, .. } => (Some(reg), Some(base), None),
        Instruction::Move { rd, rs } => (Some(rd), Some(rs), None),
        Instruction::Li { rd, .. } => (Some(rd), None, None),
        Instruction::Addiu { rt, rs, .. } => (Some(rt), Some(rs), None),
        Instruction::Addu { rd, rs, rt } | Instruction::Nand { rd, rs, rt } => {
            (Some(rd), Some(rs), Some(rt))
        }
        Instruction::Beq { rs, rt, .. } => (Some(rs), Some(rt), None),
        Instruction::Bnez { rs, .. } | Instruction::Jr { rs } => (Some(rs), None, None),
        Instruction::J { .. } | Instruction::Jal { .. } | Instruction::Nop => (None, None, None),
    }
}

/// Candidates allowed by the instruction shape and the stack-pointer
/// location alone, in listing order.
pub fn structural(i: &Instruction, star: Option<Reg>, ctx: &Context<'_>) -> Vec<StackInstr> {
    let is_star = |r: Option<Reg>| r.is_some() && r == star;
    let (r1, r2, r3) = operands(i);
    let kinds = sp_admissible(i.opcode(), is_star(r1), is_star(r2) || is_star(r3), r1 == r2);
    let sp = star.unwrap_or(Reg::SP);
    let mut out = Vec::new();
    for &kind in kinds {
        let s = match (*i, kind) {
            (Instruction::Move { rd, .. }, Kind::Cspt) => StackInstr::Cspt { dst: rd, sp },
            (Instruction::Move { rs, .. }, Kind::Cspf) => StackInstr::Cspf { sp, src: rs },
            (Instruction::Move { rs, .. }, Kind::Rspf) => StackInstr::Rspf { sp, src: rs },
            (Instruction::Move { rd, rs }, Kind::Mov) => StackInstr::Mov { dst: rd, src: rs },
            (Instruction::Addiu { imm, .. }, Kind::Push) => {
                if imm >= 0 {
                    continue;
                }
                StackInstr::Push { sp, n: (imm as i32).unsigned_abs() }
            }
            (Instruction::Addiu { rt, imm, .. }, Kind::StepX) => {
                if imm <= 0 {
                    continue;
                }
                StackInstr::StepX { r: rt, n: imm }
            }
            (Instruction::Addiu { rt, rs, imm }, Kind::Addaiu) => {
                StackInstr::Addaiu { dst: rt, src: rs, n: imm }
            }
            (Instruction::Mem { op, reg, offset, base }, k) => {
                let width = op.width();
                match (op, k) {
                    (MemOp::Lw | MemOp::Lb, Kind::Get | Kind::Getb) => {
                        StackInstr::Get { dst: reg, k: offset, sp: base, width }
                    }
                    (MemOp::Sw | MemOp::Sb, Kind::Put | Kind::Putb) => {
                        StackInstr::Put { src: reg, k: offset, sp: base, width }
                    }
                    (_, Kind::Lwfh | Kind::Lbfh) => StackInstr::Lwfh { dst: reg, k: offset, base, width },
                    (_, Kind::GetX | Kind::GetbX) => StackInstr::GetX { dst: reg, k: offset, base, width },
                    (_, Kind::Swth | Kind::Sbth) => StackInstr::Swth { src: reg, k: offset, base, width },
                    (_, Kind::PutX | Kind::PutbX) => StackInstr::PutX { src: reg, k: offset, base, width },
                    _ => unreachable!("memory row"),
                }
            }
            (Instruction::Li { rd, value }, Kind::NewX) => match ctx.program.blob_at(value) {
                Some(b) if b.step >= 1 => StackInstr::NewX { dst: rd, addr: value, step: b.step },
                _ => continue,
            },
            (Instruction::Li { rd, value }, Kind::NewH) => match ctx.program.blob_at(value) {
                Some(b) if b.size >= 1 => StackInstr::NewH { dst: rd, addr: value, size: b.size },
                Some(_) => continue,
                None if ctx.devices.contains(value) => StackInstr::NewH { dst: rd, addr: value, size: 1 },
                None => continue,
            },
            (Instruction::Addu { rd, rs, rt }, Kind::AddOp) => StackInstr::AddOp { dst: rd, a: rs, b: rt },
            (Instruction::Nand { rd, rs, rt }, Kind::NandOp) => StackInstr::NandOp { dst: rd, a: rs, b: rt },
            (Instruction::Beq { rs, rt, target }, Kind::IfEq) => StackInstr::IfEq { rs, rt, target },
            (Instruction::Bnez { rs, target }, Kind::Ifnz) => StackInstr::Ifnz { rs, target },
            (Instruction::Jr { rs }, Kind::Return) => StackInstr::Return { rs },
            (Instruction::J { target }, Kind::Goto) => StackInstr::Goto { target },
            (Instruction::Jal { target }, Kind::Gosub) => StackInstr::Gosub { target },
            (Instruction::Nop, Kind::Nop) => StackInstr::Nop,
            _ => unreachable!("admissible kind without a form"),
        };
        out.push(s);
    }
    out
}

fn calc(a: &Annotation, r: Reg) -> bool {
    a.get(r).is_some_and(AnnotatedType::is_calc)
}

fn bound(a: &Annotation, r: Reg) -> bool {
    a.get(r).is_some()
}

fn star_frames(a: &Annotation) -> Option<&[u32]> {
    match a.star_type()?.1 {
        AnnotatedType::Calc { tower: Tower::Finite(fs), .. } => Some(fs),
        _ => None,
    }
}

fn finite_tower(a: &Annotation, r: Reg) -> Option<&[u32]> {
    match a.get(r)? {
        AnnotatedType::Calc { tower: Tower::Finite(fs), .. } => Some(fs),
        _ => None,
    }
}

/// Whether the shape of `a` fits the pre-pattern of `s`. Bounds and
/// written-offset checks are left to the rule itself.
pub fn pattern_matches(s: &StackInstr, a: &Annotation) -> bool {
    match *s {
        StackInstr::Cspt { .. } | StackInstr::Push { .. } | StackInstr::Get { .. } => {
            star_frames(a).is_some()
        }
        StackInstr::Cspf { src, .. } => {
            a.is_copy(Loc::Reg(src))
                && matches!((star_frames(a), finite_tower(a, src)), (Some(f), Some(g)) if f == g)
        }
        StackInstr::Rspf { src, .. } => {
            a.is_copy(Loc::Reg(src))
                && matches!((star_frames(a), finite_tower(a, src)),
                    (Some(f), Some(g)) if f.len() >= 2 && &f[1..] == g)
        }
        StackInstr::Put { src, .. } => star_frames(a).is_some() && bound(a, src),
        StackInstr::NewX { .. } | StackInstr::NewH { .. } => true,
        StackInstr::StepX { r, n } => {
            matches!(a.get(r), Some(AnnotatedType::Calc { tower: Tower::Rep(m), .. }) if *m as i64 == n as i64)
        }
        StackInstr::GetX { base, .. } => is_string(a, base),
        StackInstr::PutX { src, base, .. } => is_string(a, base) && bound(a, src),
        StackInstr::Lwfh { base, .. } => is_array(a, base),
        StackInstr::Swth { src, base, .. } => is_array(a, base) && bound(a, src),
        StackInstr::Return { rs } => bound(a, rs),
        StackInstr::Ifnz { rs, .. } => calc(a, rs),
        StackInstr::IfEq { rs, rt, .. } => calc(a, rs) && calc(a, rt),
        StackInstr::Mov { src, .. } => bound(a, src),
        StackInstr::Addaiu { src, .. } => calc(a, src),
        StackInstr::AddOp { a: x, b: y, .. } | StackInstr::NandOp { a: x, b: y, .. } => {
            calc(a, x) && calc(a, y)
        }
        StackInstr::Gosub { .. } | StackInstr::Goto { .. } | StackInstr::Nop => true,
    }
}

fn is_string(a: &Annotation, r: Reg) -> bool {
    matches!(a.get(r), Some(AnnotatedType::Calc { tower: Tower::Rep(_), .. }))
}

fn is_array(a: &Annotation, r: Reg) -> bool {
    matches!(a.get(r), Some(AnnotatedType::Uncalc { size, .. }) if *size > 0)
}

/// The disassembly candidates of `i` under pre-annotation `a`, in listing
/// order. An empty result means the instruction cannot be disassembled here.
pub fn candidates(i: &Instruction, a: &Annotation, ctx: &Context<'_>) -> Vec<StackInstr> {
    let mut out = structural(i, a.star, ctx);
    out.retain(|s| pattern_matches(s, a));
    out
}
