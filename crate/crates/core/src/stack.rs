//! Stack-machine instructions and their machine-code renderings.

use alloc::format;
use alloc::string::String;
use core::fmt;

use crate::isa::{Instruction, MemOp};
use crate::reg::Reg;
use crate::types::Width;

/// One abstract stack-machine instruction. Each variant keeps the machine
/// registers it was disassembled from so it can be rendered back exactly.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StackInstr {
    /// `move dst sp`: copy the stack pointer out.
    Cspt { dst: Reg, sp: Reg },
    /// `move sp src`: refresh the stack pointer from a same-frame copy.
    Cspf { sp: Reg, src: Reg },
    /// `move sp src`: restore the stack pointer, popping the current frame.
    Rspf { sp: Reg, src: Reg },
    /// `addiu sp sp -n`.
    Push { sp: Reg, n: u32 },
    Get { dst: Reg, k: i16, sp: Reg, width: Width },
    Put { src: Reg, k: i16, sp: Reg, width: Width },
    NewX { dst: Reg, addr: u32, step: u32 },
    /// `addiu r r n`.
    StepX { r: Reg, n: i16 },
    GetX { dst: Reg, k: i16, base: Reg, width: Width },
    PutX { src: Reg, k: i16, base: Reg, width: Width },
    NewH { dst: Reg, addr: u32, size: u32 },
    Lwfh { dst: Reg, k: i16, base: Reg, width: Width },
    Swth { src: Reg, k: i16, base: Reg, width: Width },
    Gosub { target: u32 },
    Return { rs: Reg },
    Goto { target: u32 },
    Ifnz { rs: Reg, target: u32 },
    IfEq { rs: Reg, rt: Reg, target: u32 },
    Mov { dst: Reg, src: Reg },
    Addaiu { dst: Reg, src: Reg, n: i16 },
    AddOp { dst: Reg, a: Reg, b: Reg },
    NandOp { dst: Reg, a: Reg, b: Reg },
    Nop,
}

/// Stack instruction mnemonics, byte forms distinct.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Kind {
    Cspt,
    Cspf,
    Rspf,
    Push,
    Get,
    Getb,
    Put,
    Putb,
    NewX,
    StepX,
    GetX,
    GetbX,
    PutX,
    PutbX,
    NewH,
    Lwfh,
    Lbfh,
    Swth,
    Sbth,
    Gosub,
    Return,
    Goto,
    Ifnz,
    IfEq,
    Mov,
    Addaiu,
    AddOp,
    NandOp,
    Nop,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Cspt => "cspt",
            Kind::Cspf => "cspf",
            Kind::Rspf => "rspf",
            Kind::Push => "push",
            Kind::Get => "get",
            Kind::Getb => "getb",
            Kind::Put => "put",
            Kind::Putb => "putb",
            Kind::NewX => "newx",
            Kind::StepX => "stepx",
            Kind::GetX => "getx",
            Kind::GetbX => "getbx",
            Kind::PutX => "putx",
            Kind::PutbX => "putbx",
            Kind::NewH => "newh",
            Kind::Lwfh => "lwfh",
            Kind::Lbfh => "lbfh",
            Kind::Swth => "swth",
            Kind::Sbth => "sbth",
            Kind::Gosub => "gosub",
            Kind::Return => "return",
            Kind::Goto => "goto",
            Kind::Ifnz => "ifnz",
            Kind::IfEq => "ifeq",
            Kind::Mov => "mov",
            Kind::Addaiu => "addaiu",
            Kind::AddOp => "addop",
            Kind::NandOp => "nandop",
            Kind::Nop => "nop",
        }
    }
}

fn by_width(w: Width, word: Kind, byte: Kind) -> Kind {
    match w {
        Width::Word => word,
        Width::Byte => byte,
    }
}

fn mem_op(load: bool, w: Width) -> MemOp {
    match (load, w) {
        (true, Width::Word) => MemOp::Lw,
        (true, Width::Byte) => MemOp::Lb,
        (false, Width::Word) => MemOp::Sw,
        (false, Width::Byte) => MemOp::Sb,
    }
}

impl StackInstr {
    pub fn kind(&self) -> Kind {
        match *self {
            StackInstr::Cspt { .. } => Kind::Cspt,
            StackInstr::Cspf { .. } => Kind::Cspf,
            StackInstr::Rspf { .. } => Kind::Rspf,
            StackInstr::Push { .. } => Kind::Push,
            StackInstr::Get { width, .. } => by_width(width, Kind::Get, Kind::Getb),
            StackInstr::Put { width, .. } => by_width(width, Kind::Put, Kind::Putb),
            StackInstr::NewX { .. } => Kind::NewX,
            StackInstr::StepX { .. } => Kind::StepX,
            StackInstr::GetX { width, .. } => by_width(width, Kind::GetX, Kind::GetbX),
            StackInstr::PutX { width, .. } => by_width(width, Kind::PutX, Kind::PutbX),
            StackInstr::NewH { .. } => Kind::NewH,
            StackInstr::Lwfh { width, .. } => by_width(width, Kind::Lwfh, Kind::Lbfh),
            StackInstr::Swth { width, .. } => by_width(width, Kind::Swth, Kind::Sbth),
            StackInstr::Gosub { .. } => Kind::Gosub,
            StackInstr::Return { .. } => Kind::Return,
            StackInstr::Goto { .. } => Kind::Goto,
            StackInstr::Ifnz { .. } => Kind::Ifnz,
            StackInstr::IfEq { .. } => Kind::IfEq,
            StackInstr::Mov { .. } => Kind::Mov,
            StackInstr::Addaiu { .. } => Kind::Addaiu,
            StackInstr::AddOp { .. } => Kind::AddOp,
            StackInstr::NandOp { .. } => Kind::NandOp,
            StackInstr::Nop => Kind::Nop,
        }
    }

    /// The machine instruction this disassembles.
    pub fn render(&self) -> Instruction {
        use Instruction as I;
        match *self {
            StackInstr::Cspt { dst, sp } => I::Move { rd: dst, rs: sp },
            StackInstr::Cspf { sp, src } | StackInstr::Rspf { sp, src } => I::Move { rd: sp, rs: src },
            StackInstr::Push { sp, n } => I::Addiu { rt: sp, rs: sp, imm: (n as i32).wrapping_neg() as i16 },
            StackInstr::Get { dst, k, sp, width } => {
                I::Mem { op: mem_op(true, width), reg: dst, offset: k, base: sp }
            }
            StackInstr::Put { src, k, sp, width } => {
                I::Mem { op: mem_op(false, width), reg: src, offset: k, base: sp }
            }
            StackInstr::NewX { dst, addr, .. } | StackInstr::NewH { dst, addr, .. } => {
                I::Li { rd: dst, value: addr }
            }
            StackInstr::StepX { r, n } => I::Addiu { rt: r, rs: r, imm: n },
            StackInstr::GetX { dst, k, base, width } | StackInstr::Lwfh { dst, k, base, width } => {
                I::Mem { op: mem_op(true, width), reg: dst, offset: k, base }
            }
            StackInstr::PutX { src, k, base, width } | StackInstr::Swth { src, k, base, width } => {
                I::Mem { op: mem_op(false, width), reg: src, offset: k, base }
            }
            StackInstr::Gosub { target } => I::Jal { target },
            StackInstr::Return { rs } => I::Jr { rs },
            StackInstr::Goto { target } => I::J { target },
            StackInstr::Ifnz { rs, target } => I::Bnez { rs, target },
            StackInstr::IfEq { rs, rt, target } => I::Beq { rs, rt, target },
            StackInstr::Mov { dst, src } => I::Move { rd: dst, rs: src },
            StackInstr::Addaiu { dst, src, n } => I::Addiu { rt: dst, rs: src, imm: n },
            StackInstr::AddOp { dst, a, b } => I::Addu { rd: dst, rs: a, rt: b },
            StackInstr::NandOp { dst, a, b } => I::Nand { rd: dst, rs: a, rt: b },
            StackInstr::Nop => I::Nop,
        }
    }

    /// Render with a custom formatter for code/data addresses.
    pub fn text(&self, addr: &dyn Fn(u32) -> String) -> String {
        let k = self.kind().name();
        match *self {
            StackInstr::Cspt { dst: r, .. }
            | StackInstr::Cspf { src: r, .. }
            | StackInstr::Rspf { src: r, .. } => format!("{k} {r}"),
            StackInstr::Push { n, .. } => format!("{k} {n}"),
            StackInstr::Get { dst: r, k: n, .. } | StackInstr::Put { src: r, k: n, .. } => {
                format!("{k} {r} {n}")
            }
            StackInstr::NewX { dst, addr: a, step: n } | StackInstr::NewH { dst, addr: a, size: n } => {
                format!("{} {} {} {}", k, dst, addr(a), n)
            }
            StackInstr::StepX { r, n } => format!("{k} {r} {n}"),
            StackInstr::GetX { dst: r, k: n, base, .. }
            | StackInstr::PutX { src: r, k: n, base, .. }
            | StackInstr::Lwfh { dst: r, k: n, base, .. }
            | StackInstr::Swth { src: r, k: n, base, .. } => format!("{k} {r} {n}({base})"),
            StackInstr::Gosub { target } | StackInstr::Goto { target } => {
                format!("{} {}", k, addr(target))
            }
            StackInstr::Return { .. } | StackInstr::Nop => String::from(k),
            StackInstr::Ifnz { rs, target } => format!("{} {} {}", k, rs, addr(target)),
            StackInstr::IfEq { rs, rt, target } => format!("{} {} {} {}", k, rs, rt, addr(target)),
            StackInstr::Mov { dst, src } => format!("{k} {dst} {src}"),
            StackInstr::Addaiu { dst, src, n } => format!("{k} {dst} {src} {n}"),
            StackInstr::AddOp { dst, a, b } | StackInstr::NandOp { dst, a, b } => {
                format!("{k} {dst} {a} {b}")
            }
        }
    }
}

impl fmt::Display for StackInstr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text(&|a| format!("{a:#010x}")))
    }
}
