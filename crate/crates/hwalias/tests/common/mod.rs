//! Shared fixtures for the integration tests and the acceptance run.
#![allow(dead_code)]

pub mod criteria;
pub mod events;
pub mod gen;
pub mod golden;
pub mod sp_matrix;

use std::path::PathBuf;

use hwalias::asm::parse_program;
use hwalias_core::{certify_program, CertConfig, CertReport, Program};

pub fn corpus_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("corpus").join(name)
}

pub fn corpus(name: &str) -> Program {
    let text = std::fs::read_to_string(corpus_path(name)).expect("corpus file");
    parse_program(&text).expect("corpus parses")
}

pub fn certify(p: &Program) -> CertReport {
    certify_program(p, &CertConfig::default())
}

pub const CORPUS: [&str; 8] = [
    "hello.s",
    "foo_good.s",
    "foo_bad.s",
    "foo_bad_caller.s",
    "array_offsets.s",
    "mixed_steps.s",
    "string_steps.s",
    "no_mem.s",
];
