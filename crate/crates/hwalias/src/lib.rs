//! Text formats, reports and the command-line driver for `hwalias-core`.

pub mod annot_text;
pub mod asm;
pub mod cli;
pub mod report;
