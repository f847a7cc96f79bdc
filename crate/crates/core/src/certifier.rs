//! The certifier: a depth-first search for a disassembly and annotation of
//! every reachable instruction, driven by the control-flow rules.

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::annotation::{Annotation, Loc};
use crate::device::DeviceMap;
use crate::disasm::{candidates, Context};
use crate::isa::{Instruction, Program};
use crate::reg::Reg;
use crate::safety::{check_safety, BytePolicy, Violation};
use crate::smallstep::{apply_smallstep, RuleError};
use crate::stack::{Kind, StackInstr};
use crate::types::{AnnotatedType, OffsetSet};
use crate::unify::{unify, Subst};

#[derive(Clone, Debug, Default)]
pub struct CertConfig {
    pub devices: DeviceMap,
    pub byte_policy: BytePolicy,
    /// Treat a caller binding that does not meet a callee hypothesis as a
    /// failure rather than a reported override.
    pub strict_hypotheses: bool,
    /// Entry label overriding the program's `entry` pragma.
    pub entry: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Safe,
    Unsafe,
    Unsupported,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Safe => "SAFE",
            Verdict::Unsafe => "UNSAFE",
            Verdict::Unsupported => "UNSUPPORTED",
        })
    }
}

/// One annotated instruction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Row {
    pub addr: u32,
    pub instr: Instruction,
    pub pre: Annotation,
    pub chosen: StackInstr,
    pub post: Annotation,
}

/// A callee hypothesis the caller's binding does not meet. It is trusted,
/// and listed so a human can sign it off.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Override {
    pub site: u32,
    pub callee: String,
    pub reg: Reg,
    pub hypothesis: AnnotatedType,
    pub actual: Option<AnnotatedType>,
}

impl fmt::Display for Override {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "call to {} at {:#010x}: {}={} assumed, caller has ", self.callee, self.site, self.reg, self.hypothesis)?;
        match &self.actual {
            Some(t) => write!(f, "{}={}", self.reg, t),
            None => write!(f, "{} unbound", self.reg),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CallSite {
    pub site: u32,
    pub callee: String,
    /// Index of the callee's theory in [`Theory::routines`].
    pub routine: usize,
    /// Registers the call rebinds, with their types as seen by the caller;
    /// `None` if the callee never returns.
    pub exit: Option<Annotation>,
    /// Registers the call may change.
    pub clobbers: BTreeSet<Reg>,
    pub overrides: Vec<Override>,
}

/// The annotated body of one routine under one entry annotation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RoutineTheory {
    pub label: String,
    pub entry_addr: u32,
    pub entry: Annotation,
    /// Registers and star at every return; `None` if no return is reachable.
    pub exit: Option<Annotation>,
    pub rows: BTreeMap<u32, Row>,
    pub calls: BTreeMap<u32, CallSite>,
    pub clobbers: BTreeSet<Reg>,
    /// Certified once from the callee's own hypothesis rather than from a
    /// caller's annotation.
    pub generic: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Theory {
    /// Root routine first, then callees in discovery order.
    pub routines: Vec<RoutineTheory>,
}

impl Theory {
    pub fn root(&self) -> &RoutineTheory {
        &self.routines[0]
    }

    pub fn routine(&self, label: &str) -> Option<&RoutineTheory> {
        self.routines.iter().find(|r| r.label == label)
    }

    pub fn overrides(&self) -> Vec<Override> {
        self.routines
            .iter()
            .flat_map(|r| r.calls.values())
            .flat_map(|c| c.overrides.iter().cloned())
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CertError {
    MissingEntry,
    UnreachableEntry(String),
    NoDisassembly,
    AnnotationMismatch { label: Option<String>, expected: Annotation, found: Annotation },
    HypothesisNotMet(Override),
    ReturnRegisterNotU0,
    Rule(RuleError),
    FellOffEnd,
    UnknownCallee(u32),
    NoStackForCall,
    RecursionUnsupported { cycle: Vec<String> },
    CalleeUnsafe { label: String, inner: Box<Failure> },
    StackNotRestored { label: String },
    Unsafe(Violation),
}

/// Where and why the search failed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Failure {
    pub routine: String,
    pub addr: Option<u32>,
    pub rule: Option<Kind>,
    pub error: CertError,
}

impl Failure {
    fn is_unsupported(&self) -> bool {
        match &self.error {
            CertError::RecursionUnsupported { .. } | CertError::MissingEntry | CertError::UnreachableEntry(_) => true,
            CertError::CalleeUnsafe { inner, .. } => inner.is_unsupported(),
            _ => false,
        }
    }
}

impl fmt::Display for CertError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CertError::MissingEntry => write!(f, "no entry label"),
            CertError::UnreachableEntry(l) => write!(f, "entry label {l} not found"),
            CertError::NoDisassembly => write!(f, "no disassembly fits"),
            CertError::AnnotationMismatch { label, expected, found } => {
                if let Some(l) = label {
                    write!(f, "at {l}: ")?;
                }
                write!(f, "annotation mismatch: expected {{{expected}}}, found {{{found}}}")
            }
            CertError::HypothesisNotMet(o) => write!(f, "hypothesis not met: {o}"),
            CertError::ReturnRegisterNotU0 => write!(f, "return register is not u^0"),
            CertError::Rule(e) => write!(f, "{e}"),
            CertError::FellOffEnd => write!(f, "control runs past the end of the code"),
            CertError::UnknownCallee(a) => write!(f, "no routine label at {a:#010x}"),
            CertError::NoStackForCall => write!(f, "call without a starred stack pointer"),
            CertError::RecursionUnsupported { cycle } => write!(f, "recursion: {}", cycle.join(" -> ")),
            CertError::CalleeUnsafe { label, inner } => write!(f, "callee {label} not certified: {inner}"),
            CertError::StackNotRestored { label } => write!(f, "{label} does not restore the stack pointer"),
            CertError::Unsafe(v) => write!(f, "{v}"),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.routine)?;
        if let Some(a) = self.addr {
            write!(f, " at {a:#010x}")?;
        }
        if let Some(k) = self.rule {
            write!(f, " ({})", k.name())?;
        }
        write!(f, ": {}", self.error)
    }
}

#[derive(Clone, Debug)]
pub struct CertReport {
    pub verdict: Verdict,
    pub theory: Option<Theory>,
    pub failures: Vec<Failure>,
    pub overrides: Vec<Override>,
}

/// The default hypothesis for an entry without an `assume` pragma.
pub fn default_entry() -> Annotation {
    Annotation::new()
        .with_star(Reg::SP, AnnotatedType::c0())
        .with(Reg::RA, AnnotatedType::u0())
}

fn with_zero(mut a: Annotation) -> Annotation {
    a.regs.insert(Reg::ZERO, AnnotatedType::c0());
    a
}

/// The part of a return annotation a caller can observe.
fn exit_view(a: &Annotation) -> Annotation {
    Annotation { star: a.star, regs: a.regs.clone(), ..Annotation::default() }
}

fn rename(t: &AnnotatedType, tag: &str) -> AnnotatedType {
    let set = |x: &OffsetSet| match x {
        OffsetSet::Var(v) => OffsetSet::Var(format!("{tag}'{v}")),
        c => c.clone(),
    };
    match t {
        AnnotatedType::Var(v) => AnnotatedType::Var(format!("{tag}'{v}")),
        AnnotatedType::Calc { tower, offsets } => AnnotatedType::Calc { tower: tower.clone(), offsets: set(offsets) },
        AnnotatedType::Uncalc { size, offsets } => AnnotatedType::Uncalc { size: *size, offsets: set(offsets) },
    }
}

fn written_reg(s: &StackInstr) -> Option<Reg> {
    match *s {
        StackInstr::Cspt { dst, .. }
        | StackInstr::Get { dst, .. }
        | StackInstr::NewX { dst, .. }
        | StackInstr::NewH { dst, .. }
        | StackInstr::GetX { dst, .. }
        | StackInstr::Lwfh { dst, .. }
        | StackInstr::Mov { dst, .. }
        | StackInstr::Addaiu { dst, .. }
        | StackInstr::AddOp { dst, .. }
        | StackInstr::NandOp { dst, .. } => Some(dst),
        StackInstr::StepX { r, .. } => Some(r),
        StackInstr::Cspf { sp, .. } | StackInstr::Rspf { sp, .. } | StackInstr::Push { sp, .. } => Some(sp),
        _ => None,
    }
}

#[derive(Clone)]
struct Work {
    label: String,
    entry_addr: u32,
    entry: Annotation,
    rows: BTreeMap<u32, Row>,
    pending: Vec<(u32, Annotation)>,
    exit: Option<Annotation>,
    calls: BTreeMap<u32, CallSite>,
    /// Chosen reading (newx or newh) of each data label.
    modes: BTreeMap<u32, Kind>,
}

type MemoKey = (String, Option<Annotation>);

struct Engine<'p> {
    program: &'p Program,
    ctx: Context<'p>,
    cfg: &'p CertConfig,
    routines: Vec<RoutineTheory>,
    memo: BTreeMap<MemoKey, Result<usize, Failure>>,
    active: Vec<String>,
}

struct Best(Option<(usize, Failure)>);

impl Best {
    fn offer(&mut self, depth: usize, f: Failure) {
        if self.0.as_ref().is_none_or(|(d, _)| depth > *d) {
            self.0 = Some((depth, f));
        }
    }
}

#[allow(clippy::result_large_err)]
impl<'p> Engine<'p> {
    fn fail(&self, w: &Work, addr: Option<u32>, rule: Option<Kind>, error: CertError) -> Failure {
        Failure { routine: w.label.clone(), addr, rule, error }
    }

    /// Certify `label` from `entry`. A generic routine is memoised on its
    /// label alone.
    fn routine(&mut self, label: &str, entry: Annotation, generic: bool) -> Result<usize, Failure> {
        let key = (String::from(label), (!generic).then(|| entry.clone()));
        if let Some(r) = self.memo.get(&key) {
            return r.clone();
        }
        if let Some(pos) = self.active.iter().position(|l| l == label) {
            let mut cycle = self.active[pos..].to_vec();
            cycle.push(String::from(label));
            return Err(Failure {
                routine: String::from(label),
                addr: None,
                rule: None,
                error: CertError::RecursionUnsupported { cycle },
            });
        }
        let Some(entry_addr) = self.program.lookup(label) else {
            return Err(Failure {
                routine: String::from(label),
                addr: None,
                rule: None,
                error: CertError::UnreachableEntry(String::from(label)),
            });
        };
        self.active.push(String::from(label));
        let work = Work {
            label: String::from(label),
            entry_addr,
            entry: entry.clone(),
            rows: BTreeMap::new(),
            pending: vec![(entry_addr, entry)],
            exit: None,
            calls: BTreeMap::new(),
            modes: BTreeMap::new(),
        };
        let mut best = Best(None);
        let res = self.explore(work, &mut best);
        self.active.pop();
        let out = match res {
            Some(w) => {
                let mut clobbers: BTreeSet<Reg> = w.rows.values().filter_map(|r| written_reg(&r.chosen)).collect();
                for c in w.calls.values() {
                    clobbers.extend(c.clobbers.iter().copied());
                }
                clobbers.remove(&Reg::ZERO);
                self.routines.push(RoutineTheory {
                    label: w.label,
                    entry_addr: w.entry_addr,
                    entry: w.entry,
                    exit: w.exit,
                    rows: w.rows,
                    calls: w.calls,
                    clobbers,
                    generic,
                });
                Ok(self.routines.len() - 1)
            }
            None => Err(best.0.map(|(_, f)| f).expect("a failed search records a failure")),
        };
        self.memo.insert(key, out.clone());
        out
    }

    fn explore(&mut self, mut w: Work, best: &mut Best) -> Option<Work> {
        loop {
            let Some((addr, ann)) = w.pending.pop() else {
                return Some(w);
            };
            if let Some(row) = w.rows.get(&addr) {
                if row.pre != ann {
                    let e = CertError::AnnotationMismatch {
                        label: self.program.label_at(addr).map(String::from),
                        expected: row.pre.clone(),
                        found: ann,
                    };
                    best.offer(w.rows.len(), self.fail(&w, Some(addr), None, e));
                    return None;
                }
                continue;
            }
            let Some(instr) = self.program.instr_at(addr).copied() else {
                best.offer(w.rows.len(), self.fail(&w, Some(addr), None, CertError::FellOffEnd));
                return None;
            };
            let mut cands = candidates(&instr, &ann, &self.ctx);
            cands.retain(|c| match c {
                StackInstr::NewX { addr, .. } | StackInstr::NewH { addr, .. } => {
                    w.modes.get(addr).is_none_or(|k| *k == c.kind())
                }
                _ => true,
            });
            match cands.len() {
                0 => {
                    best.offer(w.rows.len(), self.fail(&w, Some(addr), None, CertError::NoDisassembly));
                    return None;
                }
                1 => {
                    if let Err(f) = self.advance(&mut w, addr, instr, &ann, cands[0]) {
                        best.offer(w.rows.len(), f);
                        return None;
                    }
                }
                _ => {
                    for c in cands {
                        let mut next = w.clone();
                        match self.advance(&mut next, addr, instr, &ann, c) {
                            Ok(()) => {
                                if let Some(done) = self.explore(next, best) {
                                    return Some(done);
                                }
                            }
                            Err(f) => best.offer(next.rows.len(), f),
                        }
                    }
                    return None;
                }
            }
        }
    }

    fn advance(&mut self, w: &mut Work, addr: u32, instr: Instruction, pre: &Annotation, s: StackInstr) -> Result<(), Failure> {
        let rule = Some(s.kind());
        let post = match s {
            StackInstr::Gosub { target } => self.call(w, addr, target, pre)?,
            _ => Some(apply_smallstep(&s, pre).map_err(|e| {
                let e = match e {
                    RuleError::ReturnRegisterNotU0 => CertError::ReturnRegisterNotU0,
                    e => CertError::Rule(e),
                };
                self.fail(w, Some(addr), rule, e)
            })?),
        };
        if let StackInstr::NewX { addr: d, .. } | StackInstr::NewH { addr: d, .. } = s {
            w.modes.insert(d, s.kind());
        }
        let Some(post) = post else {
            // The callee never returns.
            w.rows.insert(addr, Row { addr, instr, pre: pre.clone(), chosen: s, post: pre.clone() });
            return Ok(());
        };
        w.rows.insert(addr, Row { addr, instr, pre: pre.clone(), chosen: s, post: post.clone() });
        let next = addr.wrapping_add(4);
        match s {
            StackInstr::Goto { target } => w.pending.push((target, post)),
            StackInstr::Ifnz { target, .. } | StackInstr::IfEq { target, .. } => {
                w.pending.push((target, post.clone()));
                w.pending.push((next, post));
            }
            StackInstr::Return { .. } => {
                let restored = match (w.entry.star_type(), post.star_type()) {
                    (Some((r, t)), Some((q, u))) => r == q && t.tower() == u.tower(),
                    (None, None) => true,
                    _ => false,
                };
                if !restored {
                    let e = CertError::StackNotRestored { label: w.label.clone() };
                    return Err(self.fail(w, Some(addr), rule, e));
                }
                let exit = exit_view(&post);
                match &w.exit {
                    Some(prev) if *prev != exit => {
                        let e = CertError::AnnotationMismatch {
                            label: Some(w.label.clone()),
                            expected: prev.clone(),
                            found: exit,
                        };
                        return Err(self.fail(w, Some(addr), rule, e));
                    }
                    Some(_) => {}
                    None => w.exit = Some(exit),
                }
            }
            _ => w.pending.push((next, post)),
        }
        Ok(())
    }

    /// The continuation annotation after a call, or `None` if the callee
    /// never returns.
    fn call(&mut self, w: &mut Work, site: u32, target: u32, pre: &Annotation) -> Result<Option<Annotation>, Failure> {
        let rule = Some(Kind::Gosub);
        let fail = |e| Failure { routine: w.label.clone(), addr: Some(site), rule, error: e };
        let Some(label) = self.program.labels.iter().find(|(_, a)| **a == target).map(|(l, _)| l.clone()) else {
            return Err(fail(CertError::UnknownCallee(target)));
        };
        let Some((star, star_t)) = pre.star_type().map(|(r, t)| (r, t.clone())) else {
            return Err(fail(CertError::NoStackForCall));
        };
        if star == Reg::RA {
            return Err(fail(CertError::NoStackForCall));
        }
        let wrap = |f: Failure| match f.error {
            CertError::RecursionUnsupported { .. } => Failure { routine: w.label.clone(), addr: Some(site), rule, ..f },
            _ => fail(CertError::CalleeUnsafe { label: label.clone(), inner: Box::new(f) }),
        };
        let hypothesis = self.program.assumption(&label).cloned();
        let (idx, cont, overrides) = match hypothesis {
            Some(h) => {
                let h = with_zero(h);
                match h.star {
                    Some(r) if r != star => {
                        return Err(fail(CertError::AnnotationMismatch { label: Some(label.clone()), expected: h, found: pre.clone() }));
                    }
                    Some(r) if *h.get(r).expect("starred register is bound") != AnnotatedType::c0() => {
                        return Err(fail(CertError::StackNotRestored { label: label.clone() }));
                    }
                    _ => {}
                }
                let idx = self.routine(&label, h.clone(), true).map_err(wrap)?;
                let mut s = Subst::new();
                let mut overrides = Vec::new();
                for (r, ht) in &h.regs {
                    if h.star == Some(*r) || *r == Reg::ZERO {
                        continue;
                    }
                    let actual = if *r == Reg::RA { Some(AnnotatedType::u0()) } else { pre.get(*r).cloned() };
                    match actual.as_ref().and_then(|t| unify(&rename(ht, &label), t, &s).ok()) {
                        Some(next) => s = next,
                        None => overrides.push(Override {
                            site,
                            callee: label.clone(),
                            reg: *r,
                            hypothesis: ht.clone(),
                            actual,
                        }),
                    }
                }
                if self.cfg.strict_hypotheses {
                    if let Some(o) = overrides.first() {
                        return Err(fail(CertError::HypothesisNotMet(o.clone())));
                    }
                }
                let exit = self.routines[idx].exit.clone();
                let cont = match exit {
                    None => None,
                    Some(exit) => {
                        if h.star.is_none() && exit.regs.contains_key(&star) {
                            return Err(fail(CertError::StackNotRestored { label: label.clone() }));
                        }
                        let mut cont = pre.clone();
                        for (r, t) in &exit.regs {
                            if *r != star {
                                cont.set(*r, s.apply(&rename(t, &label)));
                            }
                        }
                        Some(cont)
                    }
                };
                (idx, cont, overrides)
            }
            None => {
                let mut entry = pre.clone();
                entry.set(Reg::RA, AnnotatedType::u0());
                entry.regs.insert(star, AnnotatedType::c0());
                entry.clear_slots();
                entry.sp_copies.clear();
                let idx = self.routine(&label, entry, false).map_err(wrap)?;
                let cont = self.routines[idx].exit.clone().map(|exit| {
                    let mut cont = exit;
                    cont.regs.insert(star, star_t.clone());
                    cont.slots = pre.slots.clone();
                    let clobbers = &self.routines[idx].clobbers;
                    cont.sp_copies = pre
                        .sp_copies
                        .iter()
                        .filter(|l| match l {
                            Loc::Reg(r) => !clobbers.contains(r) && *r != Reg::RA,
                            Loc::Slot(_) => true,
                        })
                        .copied()
                        .collect();
                    cont
                });
                (idx, cont, Vec::new())
            }
        };
        let mut clobbers = self.routines[idx].clobbers.clone();
        clobbers.insert(Reg::RA);
        let generic = self.routines[idx].generic;
        let callee_exit = self.routines[idx].exit.as_ref();
        let exit = cont.as_ref().map(|c| {
            let mut e = Annotation::new();
            for (r, t) in &c.regs {
                let changed = if generic {
                    callee_exit.is_some_and(|x| x.regs.contains_key(r))
                } else {
                    clobbers.contains(r)
                };
                if *r != star && changed {
                    e.regs.insert(*r, t.clone());
                }
            }
            e
        });
        w.calls.insert(site, CallSite { site, callee: label, routine: idx, exit, clobbers, overrides });
        Ok(cont)
    }
}

/// Keep only the routines reachable from `root`, renumbering call sites.
fn prune(routines: &[RoutineTheory], root: usize) -> Theory {
    let mut order = vec![root];
    let mut i = 0;
    while i < order.len() {
        for c in routines[order[i]].calls.values() {
            if !order.contains(&c.routine) {
                order.push(c.routine);
            }
        }
        i += 1;
    }
    let mut out: Vec<RoutineTheory> = order.iter().map(|&j| routines[j].clone()).collect();
    for r in &mut out {
        for c in r.calls.values_mut() {
            c.routine = order.iter().position(|&j| j == c.routine).expect("reachable");
        }
    }
    Theory { routines: out }
}

/// Certify `p` from its entry label.
pub fn certify_program(p: &Program, cfg: &CertConfig) -> CertReport {
    let unsupported = |error| CertReport {
        verdict: Verdict::Unsupported,
        theory: None,
        failures: vec![Failure { routine: String::new(), addr: None, rule: None, error }],
        overrides: Vec::new(),
    };
    let Some(label) = cfg.entry.clone().or_else(|| p.entry_label().map(String::from)) else {
        return unsupported(CertError::MissingEntry);
    };
    if p.lookup(&label).is_none() {
        return unsupported(CertError::UnreachableEntry(label));
    }
    let (entry, generic) = match p.assumption(&label) {
        Some(h) => (with_zero(h.clone()), true),
        None => (with_zero(default_entry()), false),
    };
    let mut engine = Engine {
        program: p,
        ctx: Context { program: p, devices: cfg.devices },
        cfg,
        routines: Vec::new(),
        memo: BTreeMap::new(),
        active: Vec::new(),
    };
    match engine.routine(&label, entry, generic) {
        Ok(root) => {
            let theory = prune(&engine.routines, root);
            let violations = check_safety(&theory, cfg.byte_policy);
            let overrides = theory.overrides();
            let failures: Vec<Failure> = violations
                .into_iter()
                .map(|v| Failure { routine: v.routine.clone(), addr: Some(v.addr), rule: None, error: CertError::Unsafe(v) })
                .collect();
            let verdict = if failures.is_empty() { Verdict::Safe } else { Verdict::Unsafe };
            CertReport { verdict, theory: Some(theory), failures, overrides }
        }
        Err(f) => CertReport {
            verdict: if f.is_unsupported() { Verdict::Unsupported } else { Verdict::Unsafe },
            theory: None,
            failures: vec![f],
            overrides: Vec::new(),
        },
    }
}
