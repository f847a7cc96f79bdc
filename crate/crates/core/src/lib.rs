//! Certification of RISC machine code against hardware aliasing.
//!
//! A program is read as code for an abstract stack machine: every machine
//! instruction is disassembled to a stack instruction, and annotated types
//! are inferred over registers and stack slots. A complete, consistent
//! annotation is a proof that every memory address is always calculated the
//! same way, so aliased copies of a cell can never be mixed up.
//!
//! The crate is `no_std` and needs only `alloc`. Parsing, reports and the
//! command-line driver live in the `hwalias` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod alias;
pub mod annotation;
pub mod certifier;
pub mod device;
pub mod disasm;
pub mod isa;
pub mod machine;
pub mod oracle;
pub mod reg;
pub mod safety;
pub mod smallstep;
pub mod stack;
pub mod types;
pub mod unify;

pub use annotation::{Annotation, Loc};
pub use certifier::{certify_program, CertConfig, CertReport, Theory, Verdict};
pub use device::DeviceMap;
pub use isa::{Instruction, Opcode, Program};
pub use reg::Reg;
pub use stack::StackInstr;
pub use types::{AnnotatedType, OffsetSet, Tower, Width};
