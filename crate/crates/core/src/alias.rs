//! Interpreter under the hardware-aliasing model.
//!
//! Every word carries, next to its arithmetic value `lo`, a tag `hi` that is
//! a keyed digest of the exact calculation that produced it. Memory cells
//! are selected by the full pair, so two addresses that are equal as
//! numbers but were calculated differently select different cells.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::device::DeviceMap;
use crate::isa::{Instruction, MemOp, Program};
use crate::machine::{self, data_words, device_store, run as run_clean, Exit, Fault, RunConfig, RETURN_SENTINEL, SP_INIT};
use crate::reg::Reg;
use crate::types::Width;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct SaltedWord {
    pub lo: u32,
    pub hi: u32,
}

/// Operations whose results get a fresh tag.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AluOp {
    Li,
    Addiu,
    Addu,
    Nand,
    /// Effective address `base + offset` of any load or store.
    Ea,
    Jal,
    /// A value assembled from bytes rather than stored as a whole word.
    Bytes,
    Init,
}

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn digest(seed: u64, op: AluOp, inputs: &[SaltedWord], imm: i64) -> u32 {
    let mut h = mix(seed ^ 0x9e37_79b9_7f4a_7c15);
    h = mix(h ^ op as u64);
    for w in inputs {
        h = mix(h ^ ((w.hi as u64) << 32 | w.lo as u64));
    }
    h = mix(h ^ imm as u64);
    (h >> 32) as u32 ^ h as u32
}

/// Result of an arithmetic or address calculation: exact `lo`, and a `hi`
/// determined by the seed, the operation, both halves of every input and
/// the immediate.
pub fn alu_result(op: AluOp, inputs: &[SaltedWord], imm: i64, seed: u64) -> SaltedWord {
    let lo = match op {
        AluOp::Li | AluOp::Jal | AluOp::Init => imm as u32,
        AluOp::Addiu | AluOp::Ea => inputs[0].lo.wrapping_add(imm as u32),
        AluOp::Addu => inputs[0].lo.wrapping_add(inputs[1].lo),
        AluOp::Nand => !(inputs[0].lo & inputs[1].lo),
        AluOp::Bytes => inputs[0].lo,
    };
    SaltedWord { lo, hi: digest(seed, op, inputs, imm) }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AliasConfig {
    pub seed: u64,
    pub devices: DeviceMap,
    pub fuel: u64,
}

impl AliasConfig {
    pub fn new(seed: u64, run: &RunConfig) -> AliasConfig {
        AliasConfig { seed, devices: run.devices, fuel: run.fuel }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AliasState {
    pub regs: [SaltedWord; 32],
    /// Last writer tag and value of every byte written at run time.
    pub bytes: BTreeMap<u32, (u32, u8)>,
    /// Value tag of whole words stored by `sw`, with the writer tag.
    pub words: BTreeMap<u32, (u32, u32)>,
    image: BTreeMap<u32, u32>,
    pub pc: u32,
    pub output: Vec<u8>,
    pub halted: bool,
    pub steps: u64,
    pub faults: Vec<Fault>,
}

enum Read {
    Ok(u8),
    Fault(Fault),
}

impl AliasState {
    pub fn new(p: &Program, entry: u32, seed: u64) -> AliasState {
        let mut regs = [SaltedWord::default(); 32];
        regs[Reg::SP.index()] = alu_result(AluOp::Init, &[], SP_INIT as i64, seed);
        regs[Reg::RA.index()] = alu_result(AluOp::Init, &[], RETURN_SENTINEL as i64, seed);
        AliasState {
            regs,
            bytes: BTreeMap::new(),
            words: BTreeMap::new(),
            image: data_words(p),
            pc: entry,
            output: Vec::new(),
            halted: false,
            steps: 0,
            faults: Vec::new(),
        }
    }

    pub fn lo_regs(&self) -> [u32; 32] {
        self.regs.map(|w| w.lo)
    }

    fn r(&self, r: Reg) -> SaltedWord {
        self.regs[r.index()]
    }

    fn w(&mut self, r: Reg, v: SaltedWord) {
        if r != Reg::ZERO {
            self.regs[r.index()] = v;
        }
    }

    fn read_byte(&self, pc: u32, key: u32, addr: u32) -> Read {
        match self.bytes.get(&addr) {
            Some(&(k, b)) if k == key => Read::Ok(b),
            Some(_) => Read::Fault(Fault::AliasFault { pc, lo: addr }),
            None => match self.image.get(&(addr & !3)) {
                Some(&w) => Read::Ok(machine::byte_of(w, addr)),
                None => Read::Fault(Fault::UninitializedRead { pc, addr }),
            },
        }
    }

    fn fault(&mut self, f: Fault) -> Option<Exit> {
        self.faults.push(f);
        Some(Exit::Fault(f))
    }

    pub fn step(&mut self, p: &Program, cfg: &AliasConfig) -> Option<Exit> {
        let pc = self.pc;
        let Some(&i) = p.instr_at(pc) else {
            return self.fault(Fault::BadPc { pc });
        };
        self.steps += 1;
        let seed = cfg.seed;
        let mut next = pc.wrapping_add(4);
        match i {
            Instruction::Mem { op, reg, offset, base } => {
                let ea = alu_result(AluOp::Ea, &[self.r(base)], offset as i64, seed);
                let addr = ea.lo;
                if op.width() == Width::Word && addr & 3 != 0 {
                    return self.fault(Fault::UnalignedWordAccess { pc, addr });
                }
                if cfg.devices.contains(addr) {
                    if op.is_load() {
                        self.w(reg, SaltedWord::default());
                    } else if device_store(&cfg.devices, addr, self.r(reg).lo as u8, &mut self.output) {
                        self.halted = true;
                        self.pc = next;
                        return Some(Exit::HaltDevice);
                    }
                } else {
                    match op {
                        MemOp::Lw => {
                            let mut bs = [0u8; 4];
                            for (j, b) in bs.iter_mut().enumerate() {
                                match self.read_byte(pc, ea.hi, addr + j as u32) {
                                    Read::Ok(v) => *b = v,
                                    Read::Fault(f) => return self.fault(f),
                                }
                            }
                            let lo = u32::from_le_bytes(bs);
                            let v = match self.words.get(&addr) {
                                Some(&(k, hi)) if k == ea.hi => SaltedWord { lo, hi },
                                _ => alu_result(AluOp::Bytes, &[SaltedWord { lo, hi: 0 }], 0, seed),
                            };
                            self.w(reg, v);
                        }
                        MemOp::Lb => match self.read_byte(pc, ea.hi, addr) {
                            Read::Ok(b) => {
                                let lo = b as i8 as i32 as u32;
                                self.w(reg, alu_result(AluOp::Bytes, &[SaltedWord { lo, hi: 0 }], 0, seed));
                            }
                            Read::Fault(f) => return self.fault(f),
                        },
                        MemOp::Sw => {
                            let v = self.r(reg);
                            for (j, b) in v.lo.to_le_bytes().into_iter().enumerate() {
                                self.bytes.insert(addr + j as u32, (ea.hi, b));
                            }
                            self.words.insert(addr, (ea.hi, v.hi));
                        }
                        MemOp::Sb => {
                            let word = addr & !3;
                            let fresh = (0..4).all(|j| !self.bytes.contains_key(&(word + j)))
                                && !self.image.contains_key(&word);
                            if fresh {
                                // Like the clean machine, a store into an absent word
                                // materialises the whole word.
                                for j in 0..4 {
                                    self.bytes.insert(word + j, (ea.hi, 0));
                                }
                            }
                            self.bytes.insert(addr, (ea.hi, self.r(reg).lo as u8));
                            self.words.remove(&word);
                        }
                    }
                }
            }
            Instruction::Move { rd, rs } => self.w(rd, self.r(rs)),
            Instruction::Li { rd, value } => self.w(rd, alu_result(AluOp::Li, &[], value as i64, seed)),
            Instruction::Addiu { rt, rs, imm } => {
                self.w(rt, alu_result(AluOp::Addiu, &[self.r(rs)], imm as i64, seed))
            }
            Instruction::Addu { rd, rs, rt } => {
                self.w(rd, alu_result(AluOp::Addu, &[self.r(rs), self.r(rt)], 0, seed))
            }
            Instruction::Nand { rd, rs, rt } => {
                self.w(rd, alu_result(AluOp::Nand, &[self.r(rs), self.r(rt)], 0, seed))
            }
            Instruction::Beq { rs, rt, target } => {
                if self.r(rs).lo == self.r(rt).lo {
                    next = target;
                }
            }
            Instruction::Bnez { rs, target } => {
                if self.r(rs).lo != 0 {
                    next = target;
                }
            }
            Instruction::J { target } => next = target,
            Instruction::Jal { target } => {
                self.w(Reg::RA, alu_result(AluOp::Jal, &[], next as i64, seed));
                next = target;
            }
            Instruction::Jr { rs } => {
                next = self.r(rs).lo;
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

/// Run `p` from its entry label on the aliasing machine.
pub fn run_aliased(p: &Program, cfg: &AliasConfig) -> (AliasState, Exit) {
    let Some(entry) = p.entry_label().and_then(|l| p.lookup(l)) else {
        let mut st = AliasState::new(p, p.base, cfg.seed);
        st.faults.push(Fault::NoEntry);
        return (st, Exit::Fault(Fault::NoEntry));
    };
    let mut st = AliasState::new(p, entry, cfg.seed);
    loop {
        if st.steps >= cfg.fuel {
            st.faults.push(Fault::FuelExhausted);
            return (st, Exit::Fault(Fault::FuelExhausted));
        }
        if let Some(e) = st.step(p, cfg) {
            return (st, e);
        }
    }
}

/// First difference between a clean run and one aliased run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Divergence {
    Exit { clean: Exit, aliased: Exit },
    Output { clean: Vec<u8>, aliased: Vec<u8> },
    Register { reg: Reg, clean: u32, aliased: u32 },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DiffReport {
    pub clean_exit: Exit,
    pub clean_output: Vec<u8>,
    pub seeds: u64,
    /// Seeds that diverged, each with its first divergence.
    pub divergent: Vec<(u64, Divergence)>,
}

/// Compare the clean run of `p` with aliased runs under seeds `0..seeds`.
pub fn diff_runs(p: &Program, seeds: u64, cfg: &RunConfig) -> DiffReport {
    let (clean, clean_exit) = run_clean(p, cfg);
    let mut divergent = Vec::new();
    for seed in 0..seeds {
        let (st, exit) = run_aliased(p, &AliasConfig::new(seed, cfg));
        let d = if exit != clean_exit {
            Some(Divergence::Exit { clean: clean_exit, aliased: exit })
        } else if st.output != clean.output {
            Some(Divergence::Output { clean: clean.output.clone(), aliased: st.output.clone() })
        } else {
            Reg::all()
                .find(|r| st.r(*r).lo != clean.regs[r.index()])
                .map(|r| Divergence::Register { reg: r, clean: clean.regs[r.index()], aliased: st.r(r).lo })
        };
        if let Some(d) = d {
            divergent.push((seed, d));
        }
    }
    DiffReport { clean_exit, clean_output: clean.output, seeds, divergent }
}
