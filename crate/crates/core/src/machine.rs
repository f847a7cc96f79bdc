//! Reference interpreter on exact 32-bit words.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::fmt;

use crate::device::DeviceMap;
use crate::isa::{Instruction, MemOp, Program};
use crate::reg::Reg;

/// Initial stack pointer.
pub const SP_INIT: u32 = 0x7fff_fff0;
/// Return address handed to the entry routine; jumping to it ends the run.
pub const RETURN_SENTINEL: u32 = 0xffff_fffc;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Fault {
    UnalignedWordAccess { pc: u32, addr: u32 },
    UninitializedRead { pc: u32, addr: u32 },
    /// Control reached an address holding no instruction.
    BadPc { pc: u32 },
    /// A read under one alias of `lo` after another alias last wrote it.
    AliasFault { pc: u32, lo: u32 },
    FuelExhausted,
    /// No entry label to start from.
    NoEntry,
}

impl fmt::Display for Fault {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Fault::UnalignedWordAccess { pc, addr } => write!(f, "unaligned word access to {addr:#010x} at {pc:#010x}"),
            Fault::UninitializedRead { pc, addr } => write!(f, "uninitialized read of {addr:#010x} at {pc:#010x}"),
            Fault::BadPc { pc } => write!(f, "no instruction at {pc:#010x}"),
            Fault::AliasFault { pc, lo } => write!(f, "alias fault on {lo:#010x} at {pc:#010x}"),
            Fault::FuelExhausted => write!(f, "fuel exhausted"),
            Fault::NoEntry => write!(f, "no entry label"),
        }
    }
}

/// How a run ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Exit {
    HaltDevice,
    /// The entry routine returned to [`RETURN_SENTINEL`].
    Returned,
    Fault(Fault),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RunConfig {
    pub devices: DeviceMap,
    pub fuel: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig { devices: DeviceMap::default(), fuel: 1_000_000 }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MachineState {
    pub regs: [u32; 32],
    /// Sparse word memory keyed by aligned address.
    pub mem: BTreeMap<u32, u32>,
    pub pc: u32,
    pub output: Vec<u8>,
    pub halted: bool,
    pub steps: u64,
}

/// Initial memory words from the program's data blobs, little-endian.
pub fn data_words(p: &Program) -> BTreeMap<u32, u32> {
    let mut mem = BTreeMap::new();
    for b in &p.data {
        for (i, chunk) in b.bytes.chunks(4).enumerate() {
            let mut w = [0u8; 4];
            w[..chunk.len()].copy_from_slice(chunk);
            mem.insert(b.addr + 4 * i as u32, u32::from_le_bytes(w));
        }
    }
    mem
}

pub(crate) fn byte_of(word: u32, addr: u32) -> u8 {
    word.to_le_bytes()[(addr & 3) as usize]
}

pub(crate) fn with_byte(word: u32, addr: u32, b: u8) -> u32 {
    let mut bytes = word.to_le_bytes();
    bytes[(addr & 3) as usize] = b;
    u32::from_le_bytes(bytes)
}

/// Effect of a store on the device window: `Some(true)` halts.
pub(crate) fn device_store(d: &DeviceMap, addr: u32, low: u8, output: &mut Vec<u8>) -> bool {
    if addr == d.halt_port() {
        return true;
    }
    if addr == d.print_port() {
        output.push(low);
    }
    false
}

impl MachineState {
    pub fn new(p: &Program, entry: u32) -> MachineState {
        let mut regs = [0; 32];
        regs[Reg::SP.index()] = SP_INIT;
        regs[Reg::RA.index()] = RETURN_SENTINEL;
        MachineState { regs, mem: data_words(p), pc: entry, output: Vec::new(), halted: false, steps: 0 }
    }

    fn r(&self, r: Reg) -> u32 {
        self.regs[r.index()]
    }

    fn w(&mut self, r: Reg, v: u32) {
        if r != Reg::ZERO {
            self.regs[r.index()] = v;
        }
    }

    /// Execute one instruction. Returns the exit if the run ends here.
    pub fn step(&mut self, p: &Program, d: &DeviceMap) -> Option<Exit> {
        let pc = self.pc;
        let Some(&i) = p.instr_at(pc) else {
            return Some(Exit::Fault(Fault::BadPc { pc }));
        };
        self.steps += 1;
        let mut next = pc.wrapping_add(4);
        match i {
            Instruction::Mem { op, reg, offset, base } => {
                let addr = self.r(base).wrapping_add(offset as i32 as u32);
                let word_addr = addr & !3;
                if op.width() == crate::types::Width::Word && addr & 3 != 0 {
                    return Some(Exit::Fault(Fault::UnalignedWordAccess { pc, addr }));
                }
                if d.contains(addr) {
                    if op.is_load() {
                        self.w(reg, 0);
                    } else if device_store(d, addr, self.r(reg) as u8, &mut self.output) {
                        self.halted = true;
                        self.pc = next;
                        return Some(Exit::HaltDevice);
                    }
                } else {
                    match op {
                        MemOp::Lw => match self.mem.get(&addr) {
                            Some(&v) => self.w(reg, v),
                            None => return Some(Exit::Fault(Fault::UninitializedRead { pc, addr })),
                        },
                        MemOp::Lb => match self.mem.get(&word_addr) {
                            Some(&v) => self.w(reg, byte_of(v, addr) as i8 as i32 as u32),
                            None => return Some(Exit::Fault(Fault::UninitializedRead { pc, addr })),
                        },
                        MemOp::Sw => {
                            self.mem.insert(addr, self.r(reg));
                        }
                        MemOp::Sb => {
                            let old = self.mem.get(&word_addr).copied().unwrap_or(0);
                            self.mem.insert(word_addr, with_byte(old, addr, self.r(reg) as u8));
                        }
                    }
                }
            }
            Instruction::Move { rd, rs } => self.w(rd, self.r(rs)),
            Instruction::Li { rd, value } => self.w(rd, value),
            Instruction::Addiu { rt, rs, imm } => self.w(rt, self.r(rs).wrapping_add(imm as i32 as u32)),
            Instruction::Addu { rd, rs, rt } => self.w(rd, self.r(rs).wrapping_add(self.r(rt))),
            Instruction::Nand { rd, rs, rt } => self.w(rd, !(self.r(rs) & self.r(rt))),
            Instruction::Beq { rs, rt, target } => {
                if self.r(rs) == self.r(rt) {
                    next = target;
                }
            }
            Instruction::Bnez { rs, target } => {
                if self.r(rs) != 0 {
                    next = target;
                }
            }
            Instruction::J { target } => next = target,
            Instruction::Jal { target } => {
                self.w(Reg::RA, next);
                next = target;
            }
            Instruction::Jr { rs } => {
                next = self.r(rs);
                if next == RETURN_SENTINEL {
                    self.pc = next;
                    self.halted = true;
                    return Some(Exit::Returned);
                }
            }
            Instruction::Nop => {}
        }
        self.pc = next;
        None
    }
}

/// Run `p` from its entry label until it halts, faults or runs out of fuel.
pub fn run(p: &Program, cfg: &RunConfig) -> (MachineState, Exit) {
    let Some(entry) = p.entry_label().and_then(|l| p.lookup(l)) else {
        return (MachineState::new(p, p.base), Exit::Fault(Fault::NoEntry));
    };
    let mut st = MachineState::new(p, entry);
    loop {
        if st.steps >= cfg.fuel {
            return (st, Exit::Fault(Fault::FuelExhausted));
        }
        if let Some(e) = st.step(p, &cfg.devices) {
            return (st, e);
        }
    }
}
