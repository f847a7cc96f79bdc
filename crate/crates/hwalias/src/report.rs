//! Machine-readable reports and their human-readable table.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use hwalias_core::alias::{DiffReport, Divergence};
use hwalias_core::machine::Exit;
use hwalias_core::oracle::Violation;
use hwalias_core::{CertReport, Program};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    pub version: u32,
    pub file: String,
    pub verdict: String,
    pub rows: Vec<RowOut>,
    pub failures: Vec<FailureOut>,
    pub overrides: Vec<String>,
    pub oracle: Option<OracleOut>,
    pub diff: Option<DiffOut>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowOut {
    pub routine: String,
    pub address: String,
    pub instr: String,
    pub stack: String,
    pub pre: String,
    pub post: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureOut {
    pub routine: String,
    pub address: Option<String>,
    pub rule: Option<String>,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleOut {
    pub ok: bool,
    pub violations: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiffOut {
    pub seeds: u64,
    pub divergent: u64,
    pub clean_exit: String,
    pub clean_output: String,
    pub first: Vec<SeedOut>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedOut {
    pub seed: u64,
    pub divergence: String,
}

fn hex(a: u32) -> String {
    format!("{a:#010x}")
}

pub fn exit_text(e: &Exit) -> String {
    match e {
        Exit::HaltDevice => "halt device".into(),
        Exit::Returned => "returned".into(),
        Exit::Fault(f) => format!("fault: {f}"),
    }
}

fn divergence_text(d: &Divergence) -> String {
    match d {
        Divergence::Exit { clean, aliased } => format!("exit: clean {}, aliased {}", exit_text(clean), exit_text(aliased)),
        Divergence::Output { clean, aliased } => format!(
            "output: clean {:?}, aliased {:?}",
            String::from_utf8_lossy(clean),
            String::from_utf8_lossy(aliased)
        ),
        Divergence::Register { reg, clean, aliased } => {
            format!("register {reg}: clean {clean:#010x}, aliased {aliased:#010x}")
        }
    }
}

impl Report {
    pub fn certification(file: &str, p: &Program, r: &CertReport, oracle: Option<&[Violation]>) -> Report {
        let mut rows = Vec::new();
        if let Some(t) = &r.theory {
            for rt in &t.routines {
                for row in rt.rows.values() {
                    rows.push(RowOut {
                        routine: rt.label.clone(),
                        address: hex(row.addr),
                        instr: p.format_instr(&row.instr),
                        stack: row.chosen.text(&|a| p.label_at(a).map_or_else(|| hex(a), String::from)),
                        pre: row.pre.to_string(),
                        post: row.post.to_string(),
                    });
                }
            }
        }
        rows.sort_by(|a, b| a.address.cmp(&b.address));
        let failures = r
            .failures
            .iter()
            .map(|f| FailureOut {
                routine: f.routine.clone(),
                address: f.addr.map(hex),
                rule: f.rule.map(|k| k.name().to_string()),
                error: f.error.to_string(),
            })
            .collect();
        Report {
            version: SCHEMA_VERSION,
            file: file.to_string(),
            verdict: r.verdict.to_string(),
            rows,
            failures,
            overrides: r.overrides.iter().map(ToString::to_string).collect(),
            oracle: oracle.map(|v| OracleOut { ok: v.is_empty(), violations: v.iter().map(ToString::to_string).collect() }),
            diff: None,
        }
    }

    pub fn differential(file: &str, d: &DiffReport) -> Report {
        let verdict = if d.divergent.is_empty() { "NO-DIVERGENCE" } else { "DIVERGENT" };
        Report {
            version: SCHEMA_VERSION,
            file: file.to_string(),
            verdict: verdict.into(),
            rows: Vec::new(),
            failures: Vec::new(),
            overrides: Vec::new(),
            oracle: None,
            diff: Some(DiffOut {
                seeds: d.seeds,
                divergent: d.divergent.len() as u64,
                clean_exit: exit_text(&d.clean_exit),
                clean_output: String::from_utf8_lossy(&d.clean_output).into_owned(),
                first: d
                    .divergent
                    .iter()
                    .map(|(s, v)| SeedOut { seed: *s, divergence: divergence_text(v) })
                    .collect(),
            }),
        }
    }

    /// The human-readable form: the same fields as the JSON, one per line
    /// or column.
    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "file: {}", self.file);
        let _ = writeln!(s, "verdict: {}", self.verdict);
        let w = self.rows.iter().map(|r| r.instr.len()).max().unwrap_or(0);
        let ws = self.rows.iter().map(|r| r.stack.len()).max().unwrap_or(0);
        let wr = self.rows.iter().map(|r| r.routine.len()).max().unwrap_or(0);
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{} {:wr$}  {:w$}  {:ws$}  {{{}}} -> {{{}}}",
                r.address, r.routine, r.instr, r.stack, r.pre, r.post
            );
        }
        for f in &self.failures {
            let at = f.address.as_deref().map(|a| format!(" at {a}")).unwrap_or_default();
            let rule = f.rule.as_deref().map(|k| format!(" ({k})")).unwrap_or_default();
            let _ = writeln!(s, "failure: {}{}{}: {}", f.routine, at, rule, f.error);
        }
        for o in &self.overrides {
            let _ = writeln!(s, "override: {o}");
        }
        if let Some(o) = &self.oracle {
            let _ = writeln!(s, "oracle: {}", if o.ok { "ok" } else { "rejected" });
            for v in &o.violations {
                let _ = writeln!(s, "oracle violation: {v}");
            }
        }
        if let Some(d) = &self.diff {
            let _ = writeln!(s, "clean exit: {}", d.clean_exit);
            let _ = writeln!(s, "clean output: {:?}", d.clean_output);
            let _ = writeln!(s, "divergent seeds: {}/{}", d.divergent, d.seeds);
            for x in &d.first {
                let _ = writeln!(s, "seed {}: {}", x.seed, x.divergence);
            }
        }
        s
    }
}
