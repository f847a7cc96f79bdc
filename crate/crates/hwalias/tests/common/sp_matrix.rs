//! The stack-pointer admissibility matrix, transcribed by hand.
//!
//! Rows are (opcode, r1 holds SP, r2 holds SP, r1 and r2 are one register).
//! `mspt`, `stepto` and `pushto` never arise from this instruction set and
//! are left out.

use hwalias_core::Opcode;

pub struct Cell {
    pub op: Opcode,
    pub r1_star: bool,
    pub r2_star: bool,
    pub same: bool,
    /// A machine instruction with exactly this operand shape; `sp` is the
    /// starred register.
    pub example: &'static str,
    pub kinds: &'static [&'static str],
}

const fn cell(
    op: Opcode,
    r1_star: bool,
    r2_star: bool,
    same: bool,
    example: &'static str,
    kinds: &'static [&'static str],
) -> Cell {
    Cell { op, r1_star, r2_star, same, example, kinds }
}

pub const MATRIX: &[Cell] = &[
    cell(Opcode::Move, true, false, false, "move sp gp", &["cspf", "rspf"]),
    cell(Opcode::Move, false, true, false, "move gp sp", &["cspt"]),
    cell(Opcode::Move, false, false, false, "move gp t0", &["mov"]),
    cell(Opcode::Move, true, true, true, "move sp sp", &[]),
    cell(Opcode::Addiu, true, true, true, "addiu sp sp -8", &["push"]),
    cell(Opcode::Addiu, false, false, true, "addiu v0 v0 1", &["stepx", "addaiu"]),
    cell(Opcode::Addiu, false, false, false, "addiu t0 v0 1", &["addaiu"]),
    cell(Opcode::Addiu, true, false, false, "addiu sp t0 8", &[]),
    cell(Opcode::Addiu, false, true, false, "addiu t0 sp 8", &[]),
    cell(Opcode::Lw, false, true, false, "lw v0 4(sp)", &["get"]),
    cell(Opcode::Lw, false, false, false, "lw v0 0(v1)", &["lwfh", "getx"]),
    cell(Opcode::Lw, true, false, false, "lw sp 0(v1)", &[]),
    cell(Opcode::Lw, true, true, true, "lw sp 0(sp)", &[]),
    cell(Opcode::Sw, false, true, false, "sw v0 4(sp)", &["put"]),
    cell(Opcode::Sw, false, false, false, "sw v0 0(v1)", &["swth", "putx"]),
    cell(Opcode::Sw, true, false, false, "sw sp 0(v1)", &[]),
    cell(Opcode::Sw, true, true, true, "sw sp 0(sp)", &[]),
];

/// Annotations under which the examples are disassembled. Their union
/// exposes every candidate a shape admits: `gp` holds a copy of the entry
/// pointer in the first and of the current frame in the second, `v0` is a
/// step-one string or plain arithmetic, `v1` an array or a string.
pub const ANNOTATIONS: [&str; 2] = [
    "sp*=c^[32,0]!{4,8}, gp=c^[0], t0=c^[0], v0=c^rep(1)!{0}, v1=u^8!{0}",
    "sp*=c^[32,0]!{4,8}, gp=c^[32,0]!{4,8}, t0=c^[0], v0=c^[0], v1=c^rep(4)!{0}",
];

