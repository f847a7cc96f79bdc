//! Command-line driver. [`execute`] captures output so it can be tested
//! without spawning a process.

use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::Context as _;
use clap::{Args, Parser, Subcommand, ValueEnum};

use hwalias_core::alias::{diff_runs, run_aliased, AliasConfig};
use hwalias_core::isa::Pragma;
use hwalias_core::machine::{run, Exit, RunConfig};
use hwalias_core::oracle::check_program;
use hwalias_core::safety::BytePolicy;
use hwalias_core::{certify_program, CertConfig, DeviceMap, Program, Reg, Verdict};

use crate::asm::parse_program;
use crate::report::{exit_text, Report};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "hwalias", version, about = "Certify machine code safe against hardware aliasing")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Disassemble and annotate; exit 0 iff SAFE.
    Certify(CertifyArgs),
    /// Run on the clean or the aliasing machine.
    Run(RunArgs),
    /// Compare clean and aliased runs over many seeds; exit 0 iff none diverge.
    Diff(DiffArgs),
}

fn parse_u32(s: &str) -> Result<u32, String> {
    let r = match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(h) => u32::from_str_radix(h, 16),
        None => s.parse(),
    };
    r.map_err(|e| e.to_string())
}

#[derive(Args, Debug)]
struct Common {
    file: PathBuf,
    /// Entry label, overriding the `entry` pragma.
    #[arg(long)]
    entry: Option<String>,
    /// Base address of the device window.
    #[arg(long, value_parser = parse_u32, default_value = "0xb0000000")]
    device_base: u32,
    /// Offset of the halt port within the device window.
    #[arg(long, value_parser = parse_u32, default_value = "0x10")]
    halt_offset: u32,
}

impl Common {
    fn devices(&self) -> DeviceMap {
        DeviceMap { base: self.device_base, halt_offset: self.halt_offset, ..DeviceMap::default() }
    }
}

#[derive(Args, Debug)]
struct CertifyArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum, default_value_t = Policy::SmallStructs)]
    byte_policy: Policy,
    /// Fail when a caller does not meet a callee's hypothesis.
    #[arg(long)]
    strict_hypotheses: bool,
    /// Also write the report as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Policy {
    Forbid,
    SmallStructs,
    Permissive,
}

impl From<Policy> for BytePolicy {
    fn from(p: Policy) -> BytePolicy {
        match p {
            Policy::Forbid => BytePolicy::Forbid,
            Policy::SmallStructs => BytePolicy::SmallStructs,
            Policy::Permissive => BytePolicy::Permissive,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Mode {
    Clean,
    Alias,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum, default_value_t = Mode::Clean)]
    mode: Mode,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1_000_000)]
    fuel: u64,
}

#[derive(Args, Debug)]
struct DiffArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 100)]
    seeds: u64,
    #[arg(long, default_value_t = 1_000_000)]
    fuel: u64,
    #[arg(long)]
    json: Option<PathBuf>,
}

/// What a command printed and its exit code.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Outcome {
    pub code: i32,
    pub stdout: Vec<u8>,
    pub stderr: String,
}

impl Outcome {
    fn input_error(e: impl std::fmt::Display) -> Outcome {
        Outcome { code: EXIT_INPUT, stdout: Vec::new(), stderr: format!("error: {e}\n") }
    }
}

fn load(c: &Common) -> Result<Program, Outcome> {
    let text = std::fs::read_to_string(&c.file)
        .with_context(|| format!("cannot read {}", c.file.display()))
        .map_err(|e| Outcome::input_error(format!("{e:#}")))?;
    let mut p = parse_program(&text).map_err(|e| Outcome::input_error(format!("{}: {e}", c.file.display())))?;
    if let Some(l) = &c.entry {
        if p.lookup(l).is_none() {
            return Err(Outcome::input_error(format!("no label `{l}`")));
        }
        p.pragmas.push(Pragma::Entry(l.clone()));
    }
    Ok(p)
}

fn write_json(path: &PathBuf, r: &Report) -> Result<(), Outcome> {
    let text = serde_json::to_string_pretty(r).expect("reports serialize");
    std::fs::write(path, text + "\n").map_err(|e| Outcome::input_error(format!("cannot write {}: {e}", path.display())))
}

fn certify(a: &CertifyArgs) -> Result<Outcome, Outcome> {
    let p = load(&a.common)?;
    let cfg = CertConfig {
        devices: a.common.devices(),
        byte_policy: a.byte_policy.into(),
        strict_hypotheses: a.strict_hypotheses,
        entry: a.common.entry.clone(),
    };
    let report = certify_program(&p, &cfg);
    let oracle = report.theory.as_ref().map(check_program);
    let mut out = Report::certification(&a.common.file.display().to_string(), &p, &report, oracle.as_deref());
    // A theory the oracle rejects is not trusted.
    if report.verdict == Verdict::Safe && oracle.as_ref().is_some_and(|v| !v.is_empty()) {
        out.verdict = Verdict::Unsafe.to_string();
    }
    if let Some(path) = &a.json {
        write_json(path, &out)?;
    }
    let code = if out.verdict == Verdict::Safe.to_string() { EXIT_OK } else { EXIT_FAIL };
    Ok(Outcome { code, stdout: out.table().into_bytes(), stderr: String::new() })
}

fn registers(regs: &[u32; 32]) -> String {
    let mut s = String::new();
    for (i, r) in Reg::all().enumerate() {
        let _ = write!(s, "{:>4}={:#010x}", r.name(), regs[i]);
        s.push(if i % 4 == 3 { '\n' } else { ' ' });
    }
    s
}

fn run_cmd(a: &RunArgs) -> Result<Outcome, Outcome> {
    let p = load(&a.common)?;
    let rc = RunConfig { devices: a.common.devices(), fuel: a.fuel };
    let (stdout, regs, exit, faults) = match a.mode {
        Mode::Clean => {
            let (st, exit) = run(&p, &rc);
            (st.output, st.regs, exit, Vec::new())
        }
        Mode::Alias => {
            let (st, exit) = run_aliased(&p, &AliasConfig::new(a.seed, &rc));
            (st.output.clone(), st.lo_regs(), exit, st.faults)
        }
    };
    let mut err = format!("exit: {}\n", exit_text(&exit));
    err += &registers(&regs);
    for f in &faults {
        let _ = writeln!(err, "fault: {f}");
    }
    let code = if matches!(exit, Exit::HaltDevice | Exit::Returned) { EXIT_OK } else { EXIT_FAIL };
    Ok(Outcome { code, stdout, stderr: err })
}

fn diff(a: &DiffArgs) -> Result<Outcome, Outcome> {
    let p = load(&a.common)?;
    let rc = RunConfig { devices: a.common.devices(), fuel: a.fuel };
    let d = diff_runs(&p, a.seeds, &rc);
    let out = Report::differential(&a.common.file.display().to_string(), &d);
    if let Some(path) = &a.json {
        write_json(path, &out)?;
    }
    let code = if d.divergent.is_empty() { EXIT_OK } else { EXIT_FAIL };
    Ok(Outcome { code, stdout: out.table().into_bytes(), stderr: String::new() })
}

/// Run the command line `args` (program name first).
pub fn execute<I, T>(args: I) -> Outcome
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                Outcome { code: EXIT_INPUT, stdout: Vec::new(), stderr: text }
            } else {
                Outcome { code: EXIT_OK, stdout: text.into_bytes(), stderr: String::new() }
            };
        }
    };
    let r = match &cli.cmd {
        Cmd::Certify(a) => certify(a),
        Cmd::Run(a) => run_cmd(a),
        Cmd::Diff(a) => diff(a),
    };
    r.unwrap_or_else(|e| e)
}
