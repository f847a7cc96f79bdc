//! Assembly text to [`Program`].
//!
//! One statement per line. `#` starts a comment; `#@` starts a pragma:
//!
//! ```text
//! #@ entry main
//! #@ assume printstr: sp*=c^[0], ra=u^0, a0=c^rep(1)!{0}
//! main:
//!     addiu sp sp -32
//!     sw ra 28(sp)
//! msg: .bytes step=1 "Hi\0"
//! ```
//!
//! Operands may be separated by spaces or commas. Labels bind to the next
//! instruction or data blob; `.bytes` takes an optional `step=` and `size=`
//! followed by quoted strings and byte literals.

use std::collections::BTreeMap;
use std::fmt;

use hwalias_core::isa::{DataBlob, MemOp, Pragma, DATA_BASE};
use hwalias_core::{Instruction, Opcode, Program, Reg};

use crate::annot_text::parse_annotation;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AsmError {
    SyntaxError { line: usize, msg: String },
    DuplicateLabel { line: usize, name: String },
    UndefinedLabel { line: usize, name: String },
}

impl fmt::Display for AsmError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AsmError::SyntaxError { line, msg } => write!(f, "line {line}: {msg}"),
            AsmError::DuplicateLabel { line, name } => write!(f, "line {line}: label `{name}` defined twice"),
            AsmError::UndefinedLabel { line, name } => write!(f, "line {line}: undefined label `{name}`"),
        }
    }
}

impl std::error::Error for AsmError {}

/// An address operand before label resolution.
#[derive(Clone, Debug)]
enum Target {
    Abs(u32),
    Label(String),
}

enum Stmt {
    Instr(Instruction, Option<Target>),
    Data { step: Option<u32>, size: Option<u32>, bytes: Vec<u8> },
}

fn syntax<T>(line: usize, msg: impl Into<String>) -> Result<T, AsmError> {
    Err(AsmError::SyntaxError { line, msg: msg.into() })
}

fn is_label(s: &str) -> bool {
    let mut cs = s.chars();
    matches!(cs.next(), Some(c) if c.is_ascii_alphabetic() || c == '_' || c == '$' || c == '.')
        && cs.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '$' || c == '.')
}

fn parse_int(s: &str) -> Option<i64> {
    let (neg, body) = match s.strip_prefix('-') {
        Some(b) => (true, b),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let v = if let Some(h) = body.strip_prefix("0x").or_else(|| body.strip_prefix("0X")) {
        i64::from_str_radix(h, 16).ok()?
    } else {
        if body.is_empty() || !body.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        body.parse().ok()?
    };
    Some(if neg { -v } else { v })
}

struct Line<'a> {
    no: usize,
    ops: Vec<&'a str>,
}

impl Line<'_> {
    fn arity(&self, n: usize) -> Result<(), AsmError> {
        if self.ops.len() == n {
            Ok(())
        } else {
            syntax(self.no, format!("expected {} operand(s), found {}", n, self.ops.len()))
        }
    }

    fn reg(&self, i: usize) -> Result<Reg, AsmError> {
        Reg::parse(self.ops[i]).map_or_else(|| syntax(self.no, format!("bad register `{}`", self.ops[i])), Ok)
    }

    fn imm(&self, s: &str) -> Result<i16, AsmError> {
        match parse_int(s) {
            Some(v) => i16::try_from(v).or_else(|_| syntax(self.no, format!("immediate {v} does not fit in 16 bits"))),
            None => syntax(self.no, format!("bad immediate `{s}`")),
        }
    }

    fn target(&self, i: usize) -> Result<Target, AsmError> {
        let s = self.ops[i];
        if let Some(v) = parse_int(s) {
            return match u32::try_from(v).ok().or_else(|| i32::try_from(v).ok().map(|v| v as u32)) {
                Some(a) => Ok(Target::Abs(a)),
                None => syntax(self.no, format!("address {v} out of range")),
            };
        }
        if is_label(s) {
            Ok(Target::Label(s.to_string()))
        } else {
            syntax(self.no, format!("bad address `{s}`"))
        }
    }

    /// `k(base)`
    fn mem(&self, i: usize) -> Result<(i16, Reg), AsmError> {
        let s = self.ops[i];
        let Some((k, rest)) = s.split_once('(') else {
            return syntax(self.no, format!("expected `offset(base)`, found `{s}`"));
        };
        let Some(base) = rest.strip_suffix(')') else {
            return syntax(self.no, format!("unclosed `(` in `{s}`"));
        };
        let k = if k.is_empty() { 0 } else { self.imm(k)? };
        match Reg::parse(base) {
            Some(r) => Ok((k, r)),
            None => syntax(self.no, format!("bad register `{base}`")),
        }
    }
}

fn instruction(no: usize, text: &str) -> Result<Stmt, AsmError> {
    let mut words = text.split(|c: char| c.is_whitespace() || c == ',').filter(|w| !w.is_empty());
    let mnemonic = words.next().unwrap_or_default();
    let l = Line { no, ops: words.collect() };
    let Some(op) = Opcode::from_mnemonic(mnemonic) else {
        return syntax(no, format!("unknown mnemonic `{mnemonic}`"));
    };
    let placeholder = 0;
    let (i, t) = match op {
        Opcode::Sw | Opcode::Lw | Opcode::Sb | Opcode::Lb => {
            l.arity(2)?;
            let mop = match op {
                Opcode::Sw => MemOp::Sw,
                Opcode::Lw => MemOp::Lw,
                Opcode::Sb => MemOp::Sb,
                _ => MemOp::Lb,
            };
            let (offset, base) = l.mem(1)?;
            (Instruction::Mem { op: mop, reg: l.reg(0)?, offset, base }, None)
        }
        Opcode::Move => {
            l.arity(2)?;
            (Instruction::Move { rd: l.reg(0)?, rs: l.reg(1)? }, None)
        }
        Opcode::Li => {
            l.arity(2)?;
            (Instruction::Li { rd: l.reg(0)?, value: placeholder }, Some(l.target(1)?))
        }
        Opcode::Addiu => {
            l.arity(3)?;
            (Instruction::Addiu { rt: l.reg(0)?, rs: l.reg(1)?, imm: l.imm(l.ops[2])? }, None)
        }
        Opcode::Addu | Opcode::Nand => {
            l.arity(3)?;
            let (rd, rs, rt) = (l.reg(0)?, l.reg(1)?, l.reg(2)?);
            let i = if op == Opcode::Addu { Instruction::Addu { rd, rs, rt } } else { Instruction::Nand { rd, rs, rt } };
            (i, None)
        }
        Opcode::Beq => {
            l.arity(3)?;
            (Instruction::Beq { rs: l.reg(0)?, rt: l.reg(1)?, target: placeholder }, Some(l.target(2)?))
        }
        Opcode::Bnez => {
            l.arity(2)?;
            (Instruction::Bnez { rs: l.reg(0)?, target: placeholder }, Some(l.target(1)?))
        }
        Opcode::J | Opcode::Jal => {
            l.arity(1)?;
            let i = if op == Opcode::J { Instruction::J { target: placeholder } } else { Instruction::Jal { target: placeholder } };
            (i, Some(l.target(0)?))
        }
        Opcode::Jr => {
            l.arity(1)?;
            (Instruction::Jr { rs: l.reg(0)? }, None)
        }
        Opcode::Nop => {
            l.arity(0)?;
            (Instruction::Nop, None)
        }
    };
    Ok(Stmt::Instr(i, t))
}

fn escape(no: usize, c: Option<char>) -> Result<u8, AsmError> {
    Ok(match c {
        Some('0') => 0,
        Some('n') => b'\n',
        Some('t') => b'\t',
        Some('\\') => b'\\',
        Some('"') => b'"',
        Some('\'') => b'\'',
        other => return syntax(no, format!("bad escape `\\{}`", other.map(String::from).unwrap_or_default())),
    })
}

fn data(no: usize, text: &str) -> Result<Stmt, AsmError> {
    let mut step = None;
    let mut size = None;
    let mut bytes = Vec::new();
    let mut rest = text.trim_start();
    while !rest.is_empty() {
        let q = rest.chars().next().unwrap_or_default();
        if q == '"' || q == '\'' {
            let mut chars = rest[1..].char_indices();
            let mut closed = None;
            while let Some((i, c)) = chars.next() {
                match c {
                    '\\' => bytes.push(escape(no, chars.next().map(|(_, c)| c))?),
                    c if c == q => {
                        closed = Some(i + 2);
                        break;
                    }
                    c if c.is_ascii() => bytes.push(c as u8),
                    _ => return syntax(no, "non-ASCII character in string"),
                }
            }
            let Some(end) = closed else {
                return syntax(no, "unterminated string");
            };
            rest = rest[end..].trim_start();
        } else {
            let end = rest.find(|c: char| c.is_whitespace() || c == ',').unwrap_or(rest.len());
            let word = &rest[..end];
            if let Some((key, v)) = word.split_once('=') {
                let Some(v) = parse_int(v).and_then(|v| u32::try_from(v).ok()).filter(|v| *v >= 1) else {
                    return syntax(no, format!("bad value in `{word}`"));
                };
                match key {
                    "step" => step = Some(v),
                    "size" => size = Some(v),
                    _ => return syntax(no, format!("unknown attribute `{key}`")),
                }
            } else {
                match parse_int(word).and_then(|v| u8::try_from(v).ok()) {
                    Some(b) => bytes.push(b),
                    None => return syntax(no, format!("bad byte `{word}`")),
                }
            }
            rest = rest[end..].trim_start_matches(|c: char| c.is_whitespace() || c == ',');
        }
    }
    Ok(Stmt::Data { step, size, bytes })
}

fn pragma(no: usize, text: &str) -> Result<Pragma, AsmError> {
    let text = text.trim();
    if let Some(l) = text.strip_prefix("entry") {
        let l = l.trim();
        if is_label(l) {
            return Ok(Pragma::Entry(l.to_string()));
        }
        return syntax(no, format!("bad entry label `{l}`"));
    }
    if let Some(rest) = text.strip_prefix("assume") {
        let Some((label, bindings)) = rest.split_once(':') else {
            return syntax(no, "expected `assume LABEL: bindings`");
        };
        let label = label.trim();
        if !is_label(label) {
            return syntax(no, format!("bad label `{label}`"));
        }
        return match parse_annotation(bindings) {
            Ok(hypothesis) => Ok(Pragma::Assume { label: label.to_string(), hypothesis }),
            Err(e) => syntax(no, format!("in assume: {e}")),
        };
    }
    syntax(no, format!("unknown pragma `{text}`"))
}

/// Assemble `text` with code at `CODE_BASE` and data from `DATA_BASE`.
pub fn parse_program(text: &str) -> Result<Program, AsmError> {
    let mut p = Program::new();
    let mut fixups: Vec<(usize, usize, Target)> = Vec::new();
    let mut pending: Vec<(usize, String)> = Vec::new();
    let mut data_labels: BTreeMap<String, usize> = BTreeMap::new();
    let mut code_labels: Vec<(usize, String, usize)> = Vec::new();
    let mut blobs = Vec::new();
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let no = i + 1;
        if let Some(pr) = raw.trim_start().strip_prefix("#@") {
            p.pragmas.push(pragma(no, pr)?);
            continue;
        }
        let mut body = strip_comment(raw).trim();
        while let Some((head, tail)) = split_label(body) {
            if !is_label(head) {
                return syntax(no, format!("bad label `{head}`"));
            }
            if seen.insert(head.to_string(), no).is_some() {
                return Err(AsmError::DuplicateLabel { line: no, name: head.to_string() });
            }
            pending.push((no, head.to_string()));
            body = tail.trim();
        }
        if body.is_empty() {
            continue;
        }
        let stmt = match body.strip_prefix(".bytes") {
            Some(rest) if rest.is_empty() || rest.starts_with(char::is_whitespace) => data(no, rest)?,
            _ if body.starts_with('.') => return syntax(no, format!("unknown directive `{body}`")),
            _ => instruction(no, body)?,
        };
        match stmt {
            Stmt::Instr(ins, t) => {
                for (_, l) in pending.drain(..) {
                    code_labels.push((p.code.len(), l, no));
                }
                if let Some(t) = t {
                    fixups.push((p.code.len(), no, t));
                }
                p.code.push(ins);
            }
            Stmt::Data { step, size, bytes } => {
                let label = match pending.pop() {
                    Some((_, l)) => l,
                    None => format!("data{}", blobs.len()),
                };
                // Extra labels on the same blob are aliases.
                for (_, l) in pending.drain(..) {
                    data_labels.insert(l, blobs.len());
                }
                data_labels.insert(label.clone(), blobs.len());
                blobs.push((label, bytes, step, size));
            }
        }
    }
    for (_, l) in pending.drain(..) {
        code_labels.push((p.code.len(), l, 0));
    }
    for (idx, l, _) in code_labels {
        let a = p.addr_of(idx);
        p.labels.insert(l, a);
    }
    let mut addr = DATA_BASE;
    for (label, bytes, step, size) in blobs {
        let len = bytes.len() as u32;
        p.data.push(DataBlob { label, addr, step: step.unwrap_or(1), size: size.unwrap_or(len.max(1)), bytes });
        addr += (len + 3) & !3;
        if len == 0 {
            addr += 4;
        }
    }
    for (l, b) in &data_labels {
        p.labels.insert(l.clone(), p.data[*b].addr);
    }
    for (idx, no, t) in fixups {
        let a = match t {
            Target::Abs(a) => a,
            Target::Label(l) => match p.labels.get(&l) {
                Some(a) => *a,
                None => return Err(AsmError::UndefinedLabel { line: no, name: l }),
            },
        };
        match &mut p.code[idx] {
            Instruction::Li { value, .. } => *value = a,
            Instruction::Beq { target, .. }
            | Instruction::Bnez { target, .. }
            | Instruction::J { target }
            | Instruction::Jal { target } => *target = a,
            _ => unreachable!("only address-taking instructions have fixups"),
        }
    }
    for pr in &p.pragmas {
        let l = match pr {
            Pragma::Entry(l) | Pragma::Assume { label: l, .. } => l,
        };
        if !p.labels.contains_key(l) {
            return Err(AsmError::UndefinedLabel { line: seen.get(l).copied().unwrap_or(0), name: l.clone() });
        }
    }
    Ok(p)
}

/// Drop a `#` comment, leaving `#` inside quotes alone.
fn strip_comment(s: &str) -> &str {
    let mut quote = None;
    let mut escaped = false;
    for (i, c) in s.char_indices() {
        match quote {
            Some(q) => {
                if escaped {
                    escaped = false;
                } else if c == '\\' {
                    escaped = true;
                } else if c == q {
                    quote = None;
                }
            }
            None if c == '"' || c == '\'' => quote = Some(c),
            None if c == '#' => return &s[..i],
            None => {}
        }
    }
    s
}

/// `label: rest`, if the line starts with a label definition.
fn split_label(s: &str) -> Option<(&str, &str)> {
    let (head, tail) = s.split_once(':')?;
    let head = head.trim();
    (!head.is_empty() && !head.contains(char::is_whitespace) && !head.contains('"') && !head.contains('\''))
        .then_some((head, tail))
}
