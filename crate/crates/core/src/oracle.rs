//! Independent check of a theory by folding events along dataflow traces.
//!
//! Every value enters a register by introduction (a literal, an arithmetic
//! result or a hypothesis) and is then followed through copies, stack cells
//! and pointer operations. Each operation is an event, and a running type
//! is folded along every trace. The oracle reads only the chosen stack
//! instructions, the routine entry hypotheses and the call summaries; it
//! never consults the certifier's per-row annotations.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::annotation::Loc;
use crate::certifier::{RoutineTheory, Theory};
use crate::reg::Reg;
use crate::stack::StackInstr;
use crate::types::{AnnotatedType, OffsetSet, Tower, Width};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Event {
    Write { k: i64, w: Width },
    Read { k: i64, w: Width },
    IntroArray(u32),
    IntroString(u32),
    IntroHyp(AnnotatedType),
    Arith,
    FrameUp(i64),
    FrameDown(i64),
    Copy,
}

impl Event {
    fn introduces(&self) -> bool {
        matches!(self, Event::IntroArray(_) | Event::IntroString(_) | Event::IntroHyp(_) | Event::Arith)
    }
}

/// Why an event cannot be folded.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FoldError {
    /// The guard of equation `eq` is false.
    Guard { eq: u8 },
    /// No equation covers this event on this kind of value.
    NoEquation,
    /// Accesses and shifts need a ground running type.
    NotGround,
}

impl fmt::Display for FoldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FoldError::Guard { eq } => write!(f, "guard of fold rule {eq} fails"),
            FoldError::NoEquation => write!(f, "event not allowed on this kind of value"),
            FoldError::NotGround => write!(f, "running type is not ground"),
        }
    }
}

fn in_bound(k: i64, w: Width, n: u32) -> bool {
    k >= 0 && n as i64 - w.bytes() as i64 >= k
}

/// Extend the running type `t` of a trace by `e`.
pub fn fold_event(t: &AnnotatedType, e: &Event) -> Result<AnnotatedType, FoldError> {
    match e {
        Event::Copy => return Ok(t.clone()),
        Event::IntroArray(n) => return Ok(AnnotatedType::array(*n, &[])),
        Event::IntroString(n) => return Ok(AnnotatedType::string(*n, &[])),
        Event::IntroHyp(h) => return Ok(h.clone()),
        Event::Arith => return Ok(AnnotatedType::c0()),
        _ => {}
    }
    let (n, xs, eqs) = match t {
        AnnotatedType::Uncalc { size, offsets: OffsetSet::Concrete(x) } => (*size, x, [1, 2]),
        AnnotatedType::Calc { tower: Tower::Rep(n), offsets: OffsetSet::Concrete(x) } => (*n, x, [4, 5]),
        AnnotatedType::Calc { tower: Tower::Finite(fs), offsets: OffsetSet::Concrete(x) } => (fs[0], x, [8, 9]),
        _ => return Err(FoldError::NotGround),
    };
    match (e, t) {
        (Event::Write { k, w }, _) => {
            if !in_bound(*k, *w, n) {
                return Err(FoldError::Guard { eq: eqs[0] });
            }
            let mut x = xs.clone();
            x.insert(*k as u32);
            Ok(match t {
                AnnotatedType::Uncalc { size, .. } => AnnotatedType::Uncalc { size: *size, offsets: OffsetSet::Concrete(x) },
                AnnotatedType::Calc { tower, .. } => AnnotatedType::Calc { tower: tower.clone(), offsets: OffsetSet::Concrete(x) },
                AnnotatedType::Var(_) => unreachable!(),
            })
        }
        (Event::Read { k, w }, _) => {
            if in_bound(*k, *w, n) && xs.contains(&(*k as u32)) {
                Ok(t.clone())
            } else {
                Err(FoldError::Guard { eq: eqs[1] })
            }
        }
        (Event::FrameDown(m), AnnotatedType::Calc { tower: Tower::Rep(step), .. }) => {
            // The written pattern repeats at every step, so it is kept.
            if *m > 0 && *m == *step as i64 {
                Ok(t.clone())
            } else {
                Err(FoldError::Guard { eq: 3 })
            }
        }
        (Event::FrameUp(m), AnnotatedType::Calc { tower: Tower::Finite(fs), .. }) => {
            if *m <= 0 || *m > u32::MAX as i64 {
                return Err(FoldError::Guard { eq: 6 });
            }
            let mut g = vec![*m as u32];
            g.extend_from_slice(fs);
            Ok(AnnotatedType::Calc { tower: Tower::Finite(g), offsets: OffsetSet::empty() })
        }
        (Event::FrameDown(m), AnnotatedType::Calc { tower: Tower::Finite(fs), .. }) => {
            if *m > 0 && fs.len() >= 2 && fs[0] as i64 == *m {
                Ok(AnnotatedType::Calc { tower: Tower::Finite(fs[1..].to_vec()), offsets: OffsetSet::empty() })
            } else {
                Err(FoldError::Guard { eq: 7 })
            }
        }
        _ => Err(FoldError::NoEquation),
    }
}

/// One event on one link of the dataflow graph: the value at `from` (none
/// for an introduction) flows to `to`, transformed by `event`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Step {
    pub from: Option<Loc>,
    pub to: Loc,
    pub event: Event,
}

fn on(r: Reg, event: Event) -> Step {
    Step { from: Some(Loc::Reg(r)), to: Loc::Reg(r), event }
}

fn copy(from: Loc, to: Loc) -> Step {
    Step { from: Some(from), to, event: Event::Copy }
}

fn intro(to: Reg, event: Event) -> Step {
    Step { from: None, to: Loc::Reg(to), event }
}

/// The located events of `s`. `sp_frame` is the current stack frame size,
/// which a restore pops.
pub fn events_of(s: &StackInstr, sp_frame: u32) -> Vec<Step> {
    match *s {
        StackInstr::Cspt { dst, sp } => vec![copy(Loc::Reg(sp), Loc::Reg(dst))],
        StackInstr::Cspf { sp, src } => vec![copy(Loc::Reg(src), Loc::Reg(sp))],
        StackInstr::Rspf { sp, src } => {
            vec![on(sp, Event::FrameDown(sp_frame as i64)), copy(Loc::Reg(src), Loc::Reg(sp))]
        }
        StackInstr::Push { sp, n } => vec![on(sp, Event::FrameUp(n as i64))],
        StackInstr::Get { dst, k, sp, width } => {
            let read = on(sp, Event::Read { k: k as i64, w: width });
            match width {
                Width::Word => vec![read, copy(Loc::Slot(k as u32), Loc::Reg(dst))],
                Width::Byte => vec![read, intro(dst, Event::Arith)],
            }
        }
        StackInstr::Put { src, k, sp, width } => {
            let write = on(sp, Event::Write { k: k as i64, w: width });
            match width {
                Width::Word => vec![write, copy(Loc::Reg(src), Loc::Slot(k as u32))],
                Width::Byte => vec![write, Step { from: None, to: Loc::Slot(k as u32), event: Event::Arith }],
            }
        }
        StackInstr::NewX { dst, step, .. } => vec![intro(dst, Event::IntroString(step))],
        StackInstr::NewH { dst, size, .. } => vec![intro(dst, Event::IntroArray(size))],
        StackInstr::StepX { r, n } => vec![on(r, Event::FrameDown(n as i64))],
        StackInstr::GetX { dst, k, base, width } | StackInstr::Lwfh { dst, k, base, width } => {
            vec![on(base, Event::Read { k: k as i64, w: width }), intro(dst, Event::Arith)]
        }
        StackInstr::PutX { k, base, width, .. } | StackInstr::Swth { k, base, width, .. } => {
            vec![on(base, Event::Write { k: k as i64, w: width })]
        }
        StackInstr::Mov { dst, src } => vec![copy(Loc::Reg(src), Loc::Reg(dst))],
        StackInstr::Addaiu { dst, .. } | StackInstr::AddOp { dst, .. } | StackInstr::NandOp { dst, .. } => {
            vec![intro(dst, Event::Arith)]
        }
        StackInstr::Gosub { .. }
        | StackInstr::Return { .. }
        | StackInstr::Goto { .. }
        | StackInstr::Ifnz { .. }
        | StackInstr::IfEq { .. }
        | StackInstr::Nop => Vec::new(),
    }
}

/// The value a trace carries at one location.
#[derive(Clone, Debug, PartialEq, Eq)]
struct Val {
    ty: AnnotatedType,
    /// The trace started at the routine's stack-pointer hypothesis and has
    /// seen only copies, shifts and stack accesses since.
    sp_trace: bool,
}

type State = BTreeMap<Loc, Val>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ViolationKind {
    Fold { event: Event, error: FoldError },
    /// A trace was read from a location holding none.
    Unbound,
    /// A value not descended from the entry stack pointer reaches it.
    ForeignStackPointer,
    /// The stack pointer is restored to a frame other than the enclosing one.
    FrameMismatch,
    /// The routine returns with its stack frames unbalanced.
    Unbalanced,
    /// Two paths reach an address with different running types.
    Convergence { first: Option<AnnotatedType>, other: Option<AnnotatedType> },
    /// A reachable address has no chosen instruction.
    Unannotated,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub routine: String,
    pub addr: u32,
    pub loc: Option<Loc>,
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at {:#010x}", self.routine, self.addr)?;
        match self.loc {
            Some(Loc::Reg(r)) => write!(f, " on {r}")?,
            Some(Loc::Slot(k)) => write!(f, " on ({k})")?,
            None => {}
        }
        f.write_str(": ")?;
        match &self.kind {
            ViolationKind::Fold { event, error } => write!(f, "{event:?}: {error}"),
            ViolationKind::Unbound => write!(f, "no trace reaches this location"),
            ViolationKind::ForeignStackPointer => write!(f, "value moved into the stack pointer is not a stack pointer copy"),
            ViolationKind::FrameMismatch => write!(f, "stack pointer restored to the wrong frame"),
            ViolationKind::Unbalanced => write!(f, "frames not balanced at return"),
            ViolationKind::Convergence { first, other } => {
                let show = |t: &Option<AnnotatedType>| t.as_ref().map_or(String::from("nothing"), |t| alloc::format!("{t}"));
                write!(f, "paths disagree: {} vs {}", show(first), show(other))
            }
            ViolationKind::Unannotated => write!(f, "reachable but not disassembled"),
        }
    }
}

fn frames(v: Option<&Val>) -> Option<&[u32]> {
    match v.map(|v| &v.ty) {
        Some(AnnotatedType::Calc { tower: Tower::Finite(fs), .. }) => Some(fs),
        _ => None,
    }
}

struct Checker<'t> {
    routine: &'t RoutineTheory,
    star: Option<Reg>,
    out: Vec<Violation>,
}

impl Checker<'_> {
    fn report(&mut self, addr: u32, loc: Option<Loc>, kind: ViolationKind) {
        self.out.push(Violation { routine: self.routine.label.clone(), addr, loc, kind });
    }

    /// Apply one instruction; `None` if the path must stop.
    fn exec(&mut self, addr: u32, s: &StackInstr, mut st: State) -> Option<State> {
        let star = self.star.map(Loc::Reg);
        let sp_frame = star.and_then(|l| frames(st.get(&l))).map_or(0, |f| f[0]);
        for step in events_of(s, sp_frame) {
            let val = match step.from {
                None => None,
                Some(l) => match st.get(&l) {
                    Some(v) => Some(v.clone()),
                    None => {
                        self.report(addr, Some(l), ViolationKind::Unbound);
                        return None;
                    }
                },
            };
            let base_ty = val.as_ref().map_or(AnnotatedType::c0(), |v| v.ty.clone());
            let ty = match fold_event(&base_ty, &step.event) {
                Ok(t) => t,
                Err(error) => {
                    self.report(addr, Some(step.to), ViolationKind::Fold { event: step.event.clone(), error });
                    return None;
                }
            };
            let sp_trace = !step.event.introduces() && val.is_some_and(|v| v.sp_trace);
            if Some(step.to) == star && step.event == Event::Copy {
                // Only an exact copy of the stack pointer, at the frame it is
                // being restored to, may be moved back into it.
                if !sp_trace {
                    self.report(addr, Some(step.to), ViolationKind::ForeignStackPointer);
                    return None;
                }
                if frames(st.get(&step.to)) != frames(Some(&Val { ty: ty.clone(), sp_trace })) {
                    self.report(addr, Some(step.to), ViolationKind::FrameMismatch);
                    return None;
                }
            }
            if let (Loc::Reg(Reg::ZERO), false) = (step.to, Some(step.to) == star) {
                continue;
            }
            if let Loc::Slot(k) = step.to {
                let hit: Vec<Loc> = st
                    .keys()
                    .filter(|l| matches!(l, Loc::Slot(j) if *j != k && *j < k + 4 && k < *j + 4))
                    .copied()
                    .collect();
                for l in hit {
                    st.remove(&l);
                }
            }
            st.insert(step.to, Val { ty, sp_trace });
        }
        if matches!(s, StackInstr::Push { .. } | StackInstr::Rspf { .. }) {
            // Cells of a started or finished frame carry no trace.
            st.retain(|l, _| matches!(l, Loc::Reg(_)));
        }
        Some(st)
    }

    fn run(&mut self) {
        let r = self.routine;
        let mut start = State::new();
        for (reg, t) in &r.entry.regs {
            start.insert(Loc::Reg(*reg), Val { ty: t.clone(), sp_trace: Some(*reg) == self.star });
        }
        for (k, t) in &r.entry.slots {
            start.insert(Loc::Slot(*k), Val { ty: t.clone(), sp_trace: false });
        }
        let entry_frames = self.star.and_then(|s| frames(start.get(&Loc::Reg(s)))).map(<[u32]>::to_vec);
        let mut seen: BTreeMap<u32, State> = BTreeMap::new();
        let mut work = vec![(r.entry_addr, start)];
        while let Some((addr, st)) = work.pop() {
            if let Some(prev) = seen.get(&addr) {
                if *prev != st {
                    let locs: BTreeSet<Loc> = prev.keys().chain(st.keys()).copied().collect();
                    let loc = locs.into_iter().find(|l| prev.get(l) != st.get(l));
                    let pick = |s: &State| loc.and_then(|l| s.get(&l)).map(|v| v.ty.clone());
                    let kind = ViolationKind::Convergence { first: pick(prev), other: pick(&st) };
                    self.report(addr, loc, kind);
                }
                continue;
            }
            seen.insert(addr, st.clone());
            let Some(row) = r.rows.get(&addr) else {
                self.report(addr, None, ViolationKind::Unannotated);
                continue;
            };
            let s = row.chosen;
            let Some(mut next) = self.exec(addr, &s, st) else { continue };
            let fall = addr.wrapping_add(4);
            match s {
                StackInstr::Goto { target } => work.push((target, next)),
                StackInstr::Ifnz { target, .. } | StackInstr::IfEq { target, .. } => {
                    work.push((target, next.clone()));
                    work.push((fall, next));
                }
                StackInstr::Return { .. } => {
                    let now = self.star.and_then(|s| frames(next.get(&Loc::Reg(s)))).map(<[u32]>::to_vec);
                    if now != entry_frames {
                        self.report(addr, self.star.map(Loc::Reg), ViolationKind::Unbalanced);
                    }
                }
                StackInstr::Gosub { .. } => {
                    let Some(call) = r.calls.get(&addr) else {
                        self.report(addr, None, ViolationKind::Unannotated);
                        continue;
                    };
                    let Some(exit) = &call.exit else { continue };
                    for reg in &call.clobbers {
                        if Some(*reg) != self.star {
                            next.remove(&Loc::Reg(*reg));
                        }
                    }
                    for (reg, t) in &exit.regs {
                        if Some(*reg) != self.star {
                            next.insert(Loc::Reg(*reg), Val { ty: t.clone(), sp_trace: false });
                        }
                    }
                    work.push((fall, next));
                }
                _ => work.push((fall, next)),
            }
        }
    }
}

/// Check every routine of `t`. An empty result means every trace folds and
/// converging paths agree.
pub fn check_program(t: &Theory) -> Vec<Violation> {
    let mut out = Vec::new();
    for r in &t.routines {
        let mut c = Checker { routine: r, star: r.entry.star, out: Vec::new() };
        c.run();
        out.extend(c.out);
    }
    out
}
