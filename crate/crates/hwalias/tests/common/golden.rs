//! The worked example's annotation tables, cell by cell.
//!
//! Each row is the annotation after the instruction; a `$label:` row is the
//! annotation at that label. `None` marks rows the tables leave blank. An
//! empty cell means the location is unbound.

use hwalias_core::annotation::Loc;
use hwalias_core::certifier::RoutineTheory;
use hwalias_core::{Annotation, Program, Reg};

pub struct Table {
    pub routine: &'static str,
    pub columns: &'static [&'static str],
    /// The table lists every binding, not a selection of columns.
    pub complete: bool,
    pub rows: &'static [Row],
}

pub struct Row {
    pub instr: &'static str,
    pub stack: &'static str,
    pub cells: Option<&'static [&'static str]>,
}

const fn row(instr: &'static str, stack: &'static str, cells: &'static [&'static str]) -> Row {
    Row { instr, stack, cells: Some(cells) }
}

const fn blank(instr: &'static str, stack: &'static str) -> Row {
    Row { instr, stack, cells: None }
}

const C0: &str = "c^[0]";
const U0: &str = "u^0";
const U1: &str = "u^1!{0}";
const X: &str = "?x";
const S1: &str = "c^rep(1)!{0}";
const M2: &str = "c^[32,0]!{24,28}";
const M3: &str = "c^[32,0]!{16,24,28}";
const P2: &str = "c^[32,0]!{20,24}";
const P4: &str = "c^[32,0]!{12,20,24,28}";

pub const MAIN: Table = Table {
    routine: "main",
    columns: &["sp*", "ra", "a0", "fp", "gp", "v0", "v1", "(16)", "(24)", "(28)"],
    complete: false,
    rows: &[
        row("main:", "", &[C0, U0, "", X, "", S1, C0, "", "", ""]),
        row("move gp sp", "cspt", &[C0, U0, "", X, C0, S1, C0, "", "", ""]),
        row("addiu sp sp -32", "push", &["c^[32,0]", U0, "", X, C0, S1, C0, "", "", ""]),
        row("sw ra 28(sp)", "put", &["c^[32,0]!{28}", U0, "", X, C0, S1, C0, "", "", U0]),
        row("sw fp 24(sp)", "put", &[M2, U0, "", X, C0, S1, C0, "", X, U0]),
        row("move fp sp", "cspt", &[M2, U0, "", M2, C0, S1, C0, "", X, U0]),
        row("sw gp 16(sp)", "put", &[M3, U0, "", M2, C0, S1, C0, C0, X, U0]),
        row("li a0 helloworld", "newx", &[M3, U0, "c^rep(1)", M2, C0, S1, C0, C0, X, U0]),
        row("jal printstr", "gosub", &[M3, U0, C0, M2, C0, C0, U1, C0, X, U0]),
        row("lw gp 16(sp)", "get", &[M3, U0, C0, M2, C0, C0, U1, C0, X, U0]),
        row("jal halt", "gosub", &[M3, U0, C0, M2, C0, C0, U1, C0, X, U0]),
        blank("nop", "nop"),
        row("lw gp 16(sp)", "get", &[M3, U0, C0, M2, C0, C0, U1, C0, X, U0]),
        blank("nop", "nop"),
        row("lw ra 28(sp)", "get", &[M3, U0, C0, M2, C0, C0, U1, C0, X, U0]),
        row("lw fp 24(sp)", "get", &[M3, U0, C0, X, C0, C0, U1, C0, X, U0]),
        row("move sp gp", "rspf", &[C0, U0, C0, X, C0, C0, U1, C0, X, U0]),
        row("jr ra", "return", &[C0, U0, C0, X, C0, C0, U1, C0, X, U0]),
    ],
};

pub const PRINTSTR: Table = Table {
    routine: "printstr",
    columns: &["sp*", "fp", "ra", "a0", "gp", "v0", "v1", "(12)", "(20)", "(24)", "(28)"],
    complete: false,
    rows: &[
        row("printstr:", "", &[C0, X, U0, S1, "", S1, U1, "", "", "", ""]),
        row("move gp sp", "cspt", &[C0, X, U0, S1, C0, S1, U1, "", "", "", ""]),
        row("addiu sp sp -32", "push", &["c^[32,0]", X, U0, S1, C0, S1, U1, "", "", "", ""]),
        row("sw ra 24(sp)", "put", &["c^[32,0]!{24}", X, U0, S1, C0, S1, U1, "", "", U0, ""]),
        row("sw fp 20(sp)", "put", &[P2, X, U0, S1, C0, S1, U1, "", X, U0, ""]),
        row("move fp sp", "cspt", &[P2, P2, U0, S1, C0, S1, U1, "", X, U0, ""]),
        row("sw gp 12(sp)", "put", &["c^[32,0]!{12,20,24}", P2, U0, S1, C0, S1, U1, C0, X, U0, ""]),
        row("sw a0 28(sp)", "put", &[P4, P2, U0, S1, C0, S1, U1, C0, X, U0, S1]),
        row("move a0 zero", "mov", &[P4, P2, U0, C0, C0, S1, U1, C0, X, U0, S1]),
        blank("j $B", "goto"),
        row("$A:", "", &[P4, P2, U0, C0, C0, C0, U1, C0, X, U0, S1]),
        row("lw v0 28(sp)", "get", &[P4, P2, U0, C0, C0, S1, U1, C0, X, U0, S1]),
        blank("nop", "nop"),
        row("lb v0 0(v0)", "getbx", &[P4, P2, U0, C0, C0, C0, U1, C0, X, U0, S1]),
        row("move v1 v0", "mov", &[P4, P2, U0, C0, C0, C0, C0, C0, X, U0, S1]),
        row("lw v0 28(sp)", "get", &[P4, P2, U0, C0, C0, S1, C0, C0, X, U0, S1]),
        row("addiu v0 v0 1", "stepx", &[P4, P2, U0, C0, C0, S1, C0, C0, X, U0, S1]),
        row("sw v0 28(sp)", "put", &[P4, P2, U0, C0, C0, S1, C0, C0, X, U0, S1]),
        row("move a0 v1", "mov", &[P4, P2, U0, C0, C0, S1, C0, C0, X, U0, S1]),
        row("jal printchar", "gosub", &[P4, P2, U0, C0, C0, S1, U1, C0, X, U0, S1]),
        row("lw gp 12(sp)", "get", &[P4, P2, U0, C0, C0, S1, U1, C0, X, U0, S1]),
        row("lw v0 28(sp)", "get", &[P4, P2, U0, C0, C0, S1, U1, C0, X, U0, S1]),
        row("lb v0 0(v0)", "getbx", &[P4, P2, U0, C0, C0, C0, U1, C0, X, U0, S1]),
        row("bnez v0 $A", "ifnz", &[P4, P2, U0, C0, C0, C0, U1, C0, X, U0, S1]),
        row("move sp fp", "cspf", &[P2, P2, U0, C0, C0, C0, U1, C0, X, U0, S1]),
        row("lw ra 24(sp)", "get", &[P2, P2, U0, C0, C0, C0, U1, C0, X, U0, S1]),
        row("lw fp 20(sp)", "get", &[P2, X, U0, C0, C0, C0, U1, C0, X, U0, S1]),
        row("move sp gp", "rspf", &[C0, X, U0, C0, C0, C0, U1, C0, X, U0, S1]),
        row("jr ra", "return", &[C0, X, U0, C0, C0, C0, U1, C0, X, U0, S1]),
    ],
};

pub const HALT: Table = Table {
    routine: "halt",
    columns: &["v1", "zero", "ra"],
    complete: true,
    rows: &[
        row("halt:", "", &["", C0, U0]),
        row("li v1 0xb0000010", "newh", &["u^1", C0, U0]),
        row("sb zero 0(v1)", "sbth", &[U1, C0, U0]),
        row("jr ra", "return", &[U1, C0, U0]),
    ],
};

pub const PRINTCHAR: Table = Table {
    routine: "printchar",
    columns: &["v1", "a0", "ra"],
    complete: false,
    rows: &[
        row("printchar:", "", &["", C0, U0]),
        row("li v1 0xb0000000", "newh", &["u^1", C0, U0]),
        row("sb a0 0(v1)", "sbth", &[U1, C0, U0]),
        row("jr ra", "return", &[U1, C0, U0]),
    ],
};

pub const TABLES: [&Table; 4] = [&MAIN, &PRINTSTR, &HALT, &PRINTCHAR];

fn loc(col: &str) -> (Loc, bool) {
    if let Some(k) = col.strip_prefix('(').and_then(|c| c.strip_suffix(')')) {
        return (Loc::Slot(k.parse().expect("slot column")), false);
    }
    let (name, star) = match col.strip_suffix('*') {
        Some(n) => (n, true),
        None => (col, false),
    };
    (Loc::Reg(Reg::parse(name).expect("register column")), star)
}

fn cell(a: &Annotation, l: Loc) -> String {
    let t = match l {
        Loc::Reg(r) => a.get(r),
        Loc::Slot(k) => a.slots.get(&k),
    };
    t.map(ToString::to_string).unwrap_or_default()
}

/// Compare a routine theory with a table; returns every mismatch.
pub fn compare(t: &Table, p: &Program, r: &RoutineTheory) -> Vec<String> {
    let mut bad = Vec::new();
    let mut addr = r.entry_addr;
    let mut checked = 0;
    for (i, g) in t.rows.iter().enumerate() {
        let (ann, what) = if let Some(label) = g.instr.strip_suffix(':') {
            if p.lookup(label) != Some(addr) {
                bad.push(format!("row {i}: label {label} is not at {addr:#010x}"));
                continue;
            }
            if label == t.routine {
                (Some(r.entry.clone()), format!("{label}:"))
            } else {
                (r.rows.get(&addr).map(|row| row.pre.clone()), format!("{label}:"))
            }
        } else {
            let Some(row) = r.rows.get(&addr) else {
                bad.push(format!("row {i}: no annotated instruction at {addr:#010x}"));
                break;
            };
            let text = p.format_instr(&row.instr);
            if text != g.instr {
                bad.push(format!("row {i}: instruction `{text}`, table has `{}`", g.instr));
            }
            if row.chosen.kind().name() != g.stack {
                bad.push(format!("row {i} `{}`: chose {}, table has {}", g.instr, row.chosen.kind().name(), g.stack));
            }
            addr += 4;
            (Some(row.post.clone()), g.instr.to_string())
        };
        let (Some(ann), Some(cells)) = (ann, g.cells) else { continue };
        for (col, want) in t.columns.iter().zip(cells.iter()) {
            let (l, star) = loc(col);
            let got = cell(&ann, l);
            if got != *want {
                bad.push(format!("`{what}` column {col}: got `{got}`, table has `{want}`"));
            }
            if star && ann.star != Some(match l {
                Loc::Reg(r) => r,
                Loc::Slot(_) => unreachable!(),
            }) {
                bad.push(format!("`{what}`: {col} is not starred"));
            }
            checked += 1;
        }
        if t.complete {
            let listed = t.columns.iter().zip(cells.iter()).filter(|(_, c)| !c.is_empty()).count();
            let present = ann.regs.len() + ann.slots.len();
            if listed != present {
                bad.push(format!("`{what}`: {present} bindings, table lists {listed}: {{{ann}}}"));
            }
        }
    }
    if checked == 0 {
        bad.push(String::from("no cells compared"));
    }
    bad
}

/// Number of cells a table displays.
pub fn cell_count(t: &Table) -> usize {
    t.rows.iter().filter_map(|r| r.cells).map(|c| c.len()).sum()
}
