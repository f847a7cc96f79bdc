//! Machine instructions and addressed programs.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::annotation::Annotation;
use crate::reg::Reg;
use crate::types::Width;

/// Address of the first instruction.
pub const CODE_BASE: u32 = 0x0040_0000;
/// Address of the first data blob.
pub const DATA_BASE: u32 = 0x1001_0000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Opcode {
    Sw,
    Lw,
    Sb,
    Lb,
    Move,
    Li,
    Addiu,
    Addu,
    Nand,
    Beq,
    Bnez,
    J,
    Jal,
    Jr,
    Nop,
}

impl Opcode {
    pub const ALL: [Opcode; 15] = [
        Opcode::Sw,
        Opcode::Lw,
        Opcode::Sb,
        Opcode::Lb,
        Opcode::Move,
        Opcode::Li,
        Opcode::Addiu,
        Opcode::Addu,
        Opcode::Nand,
        Opcode::Beq,
        Opcode::Bnez,
        Opcode::J,
        Opcode::Jal,
        Opcode::Jr,
        Opcode::Nop,
    ];

    pub fn mnemonic(self) -> &'static str {
        match self {
            Opcode::Sw => "sw",
            Opcode::Lw => "lw",
            Opcode::Sb => "sb",
            Opcode::Lb => "lb",
            Opcode::Move => "move",
            Opcode::Li => "li",
            Opcode::Addiu => "addiu",
            Opcode::Addu => "addu",
            Opcode::Nand => "nand",
            Opcode::Beq => "beq",
            Opcode::Bnez => "bnez",
            Opcode::J => "j",
            Opcode::Jal => "jal",
            Opcode::Jr => "jr",
            Opcode::Nop => "nop",
        }
    }

    pub fn from_mnemonic(s: &str) -> Option<Opcode> {
        Opcode::ALL.into_iter().find(|o| o.mnemonic() == s)
    }
}

/// The four load/store instructions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MemOp {
    Lw,
    Sw,
    Lb,
    Sb,
}

impl MemOp {
    pub fn width(self) -> Width {
        match self {
            MemOp::Lw | MemOp::Sw => Width::Word,
            MemOp::Lb | MemOp::Sb => Width::Byte,
        }
    }

    pub fn is_load(self) -> bool {
        matches!(self, MemOp::Lw | MemOp::Lb)
    }

    pub fn opcode(self) -> Opcode {
        match self {
            MemOp::Lw => Opcode::Lw,
            MemOp::Sw => Opcode::Sw,
            MemOp::Lb => Opcode::Lb,
            MemOp::Sb => Opcode::Sb,
        }
    }
}

/// One decoded machine instruction. Branch and jump targets are absolute
/// addresses, resolved by the front end.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Instruction {
    /// `lw/sw/lb/sb reg offset(base)`; `reg` is the loaded or stored register.
    Mem { op: MemOp, reg: Reg, offset: i16, base: Reg },
    Move { rd: Reg, rs: Reg },
    Li { rd: Reg, value: u32 },
    Addiu { rt: Reg, rs: Reg, imm: i16 },
    Addu { rd: Reg, rs: Reg, rt: Reg },
    Nand { rd: Reg, rs: Reg, rt: Reg },
    Beq { rs: Reg, rt: Reg, target: u32 },
    Bnez { rs: Reg, target: u32 },
    J { target: u32 },
    Jal { target: u32 },
    Jr { rs: Reg },
    Nop,
}

impl Instruction {
    pub fn opcode(&self) -> Opcode {
        match self {
            Instruction::Mem { op, .. } => op.opcode(),
            Instruction::Move { .. } => Opcode::Move,
            Instruction::Li { .. } => Opcode::Li,
            Instruction::Addiu { .. } => Opcode::Addiu,
            Instruction::Addu { .. } => Opcode::Addu,
            Instruction::Nand { .. } => Opcode::Nand,
            Instruction::Beq { .. } => Opcode::Beq,
            Instruction::Bnez { .. } => Opcode::Bnez,
            Instruction::J { .. } => Opcode::J,
            Instruction::Jal { .. } => Opcode::Jal,
            Instruction::Jr { .. } => Opcode::Jr,
            Instruction::Nop => Opcode::Nop,
        }
    }

    /// Render with a custom formatter for code/data addresses.
    pub fn render(&self, addr: &dyn Fn(u32) -> String) -> String {
        match *self {
            Instruction::Mem { op, reg, offset, base } => {
                format!("{} {} {}({})", op.opcode().mnemonic(), reg, offset, base)
            }
            Instruction::Move { rd, rs } => format!("move {rd} {rs}"),
            Instruction::Li { rd, value } => format!("li {} {}", rd, addr(value)),
            Instruction::Addiu { rt, rs, imm } => format!("addiu {rt} {rs} {imm}"),
            Instruction::Addu { rd, rs, rt } => format!("addu {rd} {rs} {rt}"),
            Instruction::Nand { rd, rs, rt } => format!("nand {rd} {rs} {rt}"),
            Instruction::Beq { rs, rt, target } => format!("beq {} {} {}", rs, rt, addr(target)),
            Instruction::Bnez { rs, target } => format!("bnez {} {}", rs, addr(target)),
            Instruction::J { target } => format!("j {}", addr(target)),
            Instruction::Jal { target } => format!("jal {}", addr(target)),
            Instruction::Jr { rs } => format!("jr {rs}"),
            Instruction::Nop => String::from("nop"),
        }
    }
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render(&|a| format!("{a:#010x}")))
    }
}

/// A byte blob in the data segment.
///
/// `step` is the element stride used when the label is read as a string,
/// `size` the extent used when it is read as an array.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DataBlob {
    pub label: String,
    pub addr: u32,
    pub bytes: Vec<u8>,
    pub step: u32,
    pub size: u32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Pragma {
    Entry(String),
    Assume { label: String, hypothesis: Annotation },
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Program {
    pub base: u32,
    pub code: Vec<Instruction>,
    pub labels: BTreeMap<String, u32>,
    pub data: Vec<DataBlob>,
    pub pragmas: Vec<Pragma>,
}

impl Program {
    pub fn new() -> Program {
        Program { base: CODE_BASE, ..Program::default() }
    }

    pub fn addr_of(&self, index: usize) -> u32 {
        self.base.wrapping_add(4 * index as u32)
    }

    /// One past the last instruction.
    pub fn end(&self) -> u32 {
        self.addr_of(self.code.len())
    }

    pub fn instr_at(&self, addr: u32) -> Option<&Instruction> {
        let off = addr.checked_sub(self.base)?;
        if off % 4 != 0 {
            return None;
        }
        self.code.get((off / 4) as usize)
    }

    pub fn lookup(&self, label: &str) -> Option<u32> {
        self.labels.get(label).copied()
    }

    /// A code label naming `addr`. Ties go to the alphabetically first name.
    pub fn label_at(&self, addr: u32) -> Option<&str> {
        if let Some(b) = self.blob_at(addr) {
            return Some(&b.label);
        }
        self.labels.iter().find(|(_, a)| **a == addr).map(|(n, _)| n.as_str())
    }

    /// The data blob starting exactly at `addr`.
    pub fn blob_at(&self, addr: u32) -> Option<&DataBlob> {
        self.data.iter().find(|b| b.addr == addr)
    }

    pub fn entry_label(&self) -> Option<&str> {
        self.pragmas.iter().rev().find_map(|p| match p {
            Pragma::Entry(l) => Some(l.as_str()),
            _ => None,
        })
    }

    pub fn assumption(&self, label: &str) -> Option<&Annotation> {
        self.pragmas.iter().rev().find_map(|p| match p {
            Pragma::Assume { label: l, hypothesis } if l == label => Some(hypothesis),
            _ => None,
        })
    }

    /// Next free 4-aligned data address.
    pub fn data_end(&self) -> u32 {
        self.data
            .iter()
            .map(|b| b.addr + ((b.bytes.len() as u32 + 3) & !3))
            .max()
            .unwrap_or(DATA_BASE)
    }

    /// Instruction text with addresses shown as labels where one exists.
    pub fn format_instr(&self, i: &Instruction) -> String {
        i.render(&|a| match self.label_at(a) {
            Some(l) => String::from(l),
            None => format!("{a:#010x}"),
        })
    }
}
