//! One check per acceptance criterion. Each returns a one-line summary on
//! success and the reason on failure.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use hwalias::annot_text::{parse_annotation, parse_type};
use hwalias::asm::parse_program;
use hwalias::cli::execute;
use hwalias_core::alias::diff_runs;
use hwalias_core::certifier::CertError;
use hwalias_core::disasm::{candidates, sp_admissible, Context};
use hwalias_core::machine::{run, Exit, RunConfig};
use hwalias_core::oracle::{check_program, fold_event, Event, FoldError};
use hwalias_core::stack::Kind;
use hwalias_core::{AnnotatedType, DeviceMap, Loc, Reg, StackInstr, Theory, Verdict, Width};

use super::{certify, corpus, corpus_path, events, gen, golden, sp_matrix, theories, CORPUS};

pub type Outcome = Result<String, String>;
pub type Check = fn() -> Outcome;

macro_rules! ensure {
    ($c:expr, $($msg:tt)*) => {
        if !$c {
            return Err(format!($($msg)*));
        }
    };
}

pub fn golden_tables() -> Outcome {
    let p = corpus("hello.s");
    let r = certify(&p);
    ensure!(r.verdict == Verdict::Safe, "hello.s is {}: {:?}", r.verdict, r.failures);
    let t = r.theory.as_ref().unwrap();
    let mut bad = Vec::new();
    let mut cells = 0;
    for table in golden::TABLES {
        let Some(rt) = t.routine(table.routine) else {
            bad.push(format!("no theory for {}", table.routine));
            continue;
        };
        bad.extend(golden::compare(table, &p, rt).into_iter().map(|m| format!("{}: {m}", table.routine)));
        cells += golden::cell_count(table);
    }
    ensure!(bad.is_empty(), "{} mismatches, first: {}", bad.len(), bad[0]);
    Ok(format!("SAFE, {cells} cells match in 4 tables"))
}

fn failure_at(file: &str, instr: &str) -> Outcome {
    let p = corpus(file);
    let r = certify(&p);
    ensure!(r.verdict == Verdict::Unsafe, "{file} is {}", r.verdict);
    let f = &r.failures[0];
    ensure!(matches!(f.error, CertError::NoDisassembly), "{file} fails with {}", f.error);
    let at = f.addr.and_then(|a| p.instr_at(a)).map(|i| p.format_instr(i)).unwrap_or_default();
    ensure!(at == instr, "{file} fails at `{at}`, expected `{instr}`");
    Ok(format!("{file} UNSAFE (no disassembly at `{at}`)"))
}

pub fn frame_restore() -> Outcome {
    let good = certify(&corpus("foo_good.s"));
    ensure!(good.verdict == Verdict::Safe, "foo_good.s is {}", good.verdict);
    let bad = failure_at("foo_bad.s", "addiu sp sp 32")?;
    Ok(format!("foo_good.s SAFE, {bad}"))
}

pub fn element_access() -> Outcome {
    let right = certify(&corpus("string_steps.s"));
    ensure!(right.verdict == Verdict::Safe, "string_steps.s is {}", right.verdict);
    let mid = certify(&corpus("mixed_steps.s"));
    ensure!(mid.verdict == Verdict::Unsafe, "mixed_steps.s is {}", mid.verdict);
    let left = certify(&corpus("array_offsets.s"));
    ensure!(left.verdict == Verdict::Safe, "array_offsets.s is {}", left.verdict);
    let chose_newh = left
        .theory
        .as_ref()
        .unwrap()
        .root()
        .rows
        .values()
        .any(|r| matches!(r.chosen, StackInstr::NewH { .. }));
    ensure!(chose_newh, "array_offsets.s certified without a newh reading");
    Ok(String::from("right SAFE, middle UNSAFE, left SAFE via newh"))
}

/// One explicit case of the event equations.
pub struct Case {
    pub eq: u8,
    pub what: &'static str,
    pub ty: &'static str,
    pub event: Event,
    /// The folded type, or `None` when the guard must fail.
    pub result: Option<&'static str>,
}

const fn case(eq: u8, what: &'static str, ty: &'static str, event: Event, result: Option<&'static str>) -> Case {
    Case { eq, what, ty, event, result }
}

const W: Width = Width::Word;
const B: Width = Width::Byte;

pub fn cases() -> Vec<Case> {
    use Event::*;
    vec![
        case(1, "satisfied", "u^8", Write { k: 0, w: W }, Some("u^8!{0}")),
        case(1, "boundary", "u^8!{0}", Write { k: 4, w: W }, Some("u^8!{0,4}")),
        case(1, "violated", "u^8", Write { k: 5, w: W }, None),
        case(1, "violated below", "u^8", Write { k: -1, w: B }, None),
        case(2, "satisfied", "u^8!{0,4}", Read { k: 0, w: W }, Some("u^8!{0,4}")),
        case(2, "boundary", "u^8!{4}", Read { k: 4, w: W }, Some("u^8!{4}")),
        case(2, "violated, unwritten", "u^8!{0}", Read { k: 4, w: W }, None),
        case(2, "violated, out of bounds", "u^8!{0,4}", Read { k: 8, w: W }, None),
        case(3, "satisfied", "c^rep(4)!{0}", FrameDown(4), Some("c^rep(4)!{0}")),
        case(3, "boundary", "c^rep(1)", FrameDown(1), Some("c^rep(1)")),
        case(3, "violated", "c^rep(4)!{0}", FrameDown(2), None),
        case(3, "violated, backwards", "c^rep(4)", FrameDown(-4), None),
        case(4, "satisfied", "c^rep(4)", Write { k: 0, w: B }, Some("c^rep(4)!{0}")),
        case(4, "boundary", "c^rep(4)", Write { k: 0, w: W }, Some("c^rep(4)!{0}")),
        case(4, "violated", "c^rep(4)", Write { k: 1, w: W }, None),
        case(5, "satisfied", "c^rep(4)!{0,2}", Read { k: 2, w: B }, Some("c^rep(4)!{0,2}")),
        case(5, "boundary", "c^rep(4)!{3}", Read { k: 3, w: B }, Some("c^rep(4)!{3}")),
        case(5, "violated", "c^rep(1)!{0}", Read { k: 1, w: B }, None),
        case(6, "satisfied", "c^[0]!{0}", FrameUp(32), Some("c^[32,0]")),
        case(6, "boundary", "c^[8,0]!{4}", FrameUp(1), Some("c^[1,8,0]")),
        case(6, "violated", "c^[0]", FrameUp(0), None),
        case(6, "violated, negative", "c^[0]", FrameUp(-8), None),
        case(7, "satisfied", "c^[32,16,0]!{28}", FrameDown(32), Some("c^[16,0]")),
        case(7, "boundary", "c^[32,0]!{28}", FrameDown(32), Some("c^[0]")),
        case(7, "violated, wrong size", "c^[32,0]", FrameDown(16), None),
        case(7, "violated, outermost frame", "c^[0]", FrameDown(0), None),
        case(8, "satisfied", "c^[32,0]", Write { k: 28, w: W }, Some("c^[32,0]!{28}")),
        case(8, "boundary", "c^[8,0]!{0}", Write { k: 7, w: B }, Some("c^[8,0]!{0,7}")),
        case(8, "violated", "c^[32,0]", Write { k: 29, w: W }, None),
        case(9, "satisfied", "c^[32,0]!{24,28}", Read { k: 24, w: W }, Some("c^[32,0]!{24,28}")),
        case(9, "boundary", "c^[32,0]!{28}", Read { k: 28, w: W }, Some("c^[32,0]!{28}")),
        case(9, "violated", "c^[32,0]!{24}", Read { k: 28, w: W }, None),
    ]
}

fn check_case(c: &Case) -> Result<(), String> {
    let t = parse_type(c.ty).map_err(|e| format!("bad fixture {}: {e}", c.ty))?;
    let got = fold_event(&t, &c.event);
    let want = match c.result {
        Some(s) => Ok(parse_type(s).map_err(|e| format!("bad fixture {s}: {e}"))?),
        None => Err(FoldError::Guard { eq: c.eq }),
    };
    ensure!(got == want, "({}) {}: {} · {:?} gave {got:?}, expected {want:?}", c.eq, c.what, c.ty, c.event);
    Ok(())
}

/// Types to sweep for one equation, with the events that exercise it.
fn sweep_types(n: u32) -> Vec<AnnotatedType> {
    let all: Vec<u32> = (0..n).collect();
    let mut out = Vec::new();
    for xs in [vec![], vec![0], all.clone(), vec![n.saturating_sub(4)], vec![n.saturating_sub(1)]] {
        out.push(AnnotatedType::array(n, &xs));
        if n > 0 {
            out.push(AnnotatedType::string(n, &xs));
        }
        out.push(AnnotatedType::stack(&[n, 0], &xs));
        out.push(AnnotatedType::stack(&[n], &xs));
    }
    out
}

/// Brute force over every k in [-1, n + 1] and every shift in [-1, n + 1].
/// Returns the number of comparisons and the guard boundaries hit.
pub fn brute_force() -> Result<(usize, usize), String> {
    let mut compared = 0;
    let mut boundaries = 0;
    for n in [0u32, 1, 2, 3, 4, 5, 8, 12, 32] {
        for t in sweep_types(n) {
            for w in [B, W] {
                for k in -1..=n as i64 + 1 {
                    for e in [Event::Write { k, w }, Event::Read { k, w }] {
                        let got = fold_event(&t, &e);
                        let want = events::expect(&t, &e);
                        ensure!(got == want, "{t} · {e:?}: got {got:?}, brute force says {want:?}");
                        compared += 1;
                    }
                    if k >= 0 && k == n as i64 - w.bytes() as i64 {
                        ensure!(
                            fold_event(&t, &Event::Write { k, w }).is_ok(),
                            "{t}: write at the boundary k = n - w = {k} refused"
                        );
                        ensure!(
                            fold_event(&t, &Event::Write { k: k + 1, w }).is_err(),
                            "{t}: write one past the boundary accepted"
                        );
                        boundaries += 1;
                    }
                }
            }
            for m in -1..=n as i64 + 1 {
                for e in [Event::FrameUp(m), Event::FrameDown(m)] {
                    let got = fold_event(&t, &e);
                    let want = events::expect(&t, &e);
                    ensure!(got == want, "{t} · {e:?}: got {got:?}, brute force says {want:?}");
                    compared += 1;
                }
            }
        }
    }
    Ok((compared, boundaries))
}

pub fn event_algebra() -> Outcome {
    let cs = cases();
    for eq in 1..=9u8 {
        let kinds: BTreeSet<&str> = cs
            .iter()
            .filter(|c| c.eq == eq)
            .map(|c| c.what.split(',').next().unwrap())
            .collect();
        ensure!(
            ["satisfied", "boundary", "violated"].iter().all(|k| kinds.contains(k)),
            "equation ({eq}) lacks a satisfied, boundary or violated case"
        );
    }
    for c in &cs {
        check_case(c)?;
    }
    let (compared, boundaries) = brute_force()?;
    Ok(format!("{} cases, {compared} brute-force comparisons, {boundaries} boundaries", cs.len()))
}

fn kind_set(ks: impl IntoIterator<Item = Kind>) -> BTreeSet<&'static str> {
    ks.into_iter().map(Kind::name).collect()
}

pub fn sp_matrix() -> Outcome {
    let anns: Vec<_> = sp_matrix::ANNOTATIONS
        .iter()
        .map(|s| {
            let mut a = parse_annotation(s).expect("matrix annotation parses");
            a.sp_copies.insert(Loc::Reg(Reg::GP));
            a
        })
        .collect();
    for c in sp_matrix::MATRIX {
        let want: BTreeSet<&str> = c.kinds.iter().copied().collect();
        let direct = kind_set(sp_admissible(c.op, c.r1_star, c.r2_star, c.same).iter().copied());
        ensure!(direct == want, "{:?} ({}, {}): admissible {direct:?}, matrix {want:?}", c.op, c.r1_star, c.r2_star);
        let p = parse_program(&format!("main: {}", c.example)).expect("matrix example parses");
        ensure!(p.code[0].opcode() == c.op, "example `{}` is not {:?}", c.example, c.op);
        let ctx = Context { program: &p, devices: DeviceMap::default() };
        let found = kind_set(anns.iter().flat_map(|a| candidates(&p.code[0], a, &ctx)).map(|s| s.kind()));
        ensure!(found == want, "`{}`: candidates {found:?}, matrix {want:?}", c.example);
    }
    Ok(format!("{} configurations", sp_matrix::MATRIX.len()))
}

pub const RANDOM_PROGRAMS: usize = 500;
pub const SEEDS: u64 = 100;

/// The SAFE theories behind criterion 6, for reuse by the oracle check.
pub struct SafeSet {
    pub names: Vec<String>,
    pub theories: Vec<Theory>,
    pub tried: usize,
}

pub fn safe_set() -> SafeSet {
    let mut names = Vec::new();
    let mut theories = Vec::new();
    for f in CORPUS {
        let r = certify(&corpus(f));
        if r.verdict == Verdict::Safe {
            names.push(f.to_string());
            theories.push(r.theory.unwrap());
        }
    }
    let (progs, tried) = gen::certifiable(0x5eed, RANDOM_PROGRAMS);
    for (i, (_, p)) in progs.iter().enumerate() {
        names.push(format!("random #{i}"));
        theories.push(certify(p).theory.unwrap());
    }
    SafeSet { names, theories, tried }
}

pub fn differential() -> Outcome {
    let start = Instant::now();
    let rc = RunConfig::default();
    let mut safe = 0;
    for f in CORPUS {
        let p = corpus(f);
        if certify(&p).verdict != Verdict::Safe {
            continue;
        }
        safe += 1;
        let d = diff_runs(&p, SEEDS, &rc);
        ensure!(d.divergent.is_empty(), "{f} is SAFE but diverges on seed {}: {:?}", d.divergent[0].0, d.divergent[0].1);
    }
    let (progs, tried) = gen::certifiable(0x5eed, RANDOM_PROGRAMS);
    for (src, p) in &progs {
        let d = diff_runs(p, SEEDS, &rc);
        ensure!(d.divergent.is_empty(), "random SAFE program diverges on seed {}: {:?}\n{src}", d.divergent[0].0, d.divergent[0].1);
    }
    for f in ["foo_bad_caller.s", "mixed_steps.s"] {
        let d = diff_runs(&corpus(f), SEEDS, &rc);
        ensure!(d.divergent.len() as u64 == SEEDS, "{f} diverges on only {}/{SEEDS} seeds", d.divergent.len());
    }
    let secs = start.elapsed().as_secs_f64();
    ensure!(start.elapsed() < Duration::from_secs(60), "took {secs:.1} s");
    Ok(format!(
        "{safe} corpus + {} random SAFE programs ({tried} generated), 0 divergences over {SEEDS} seeds; both drivers {SEEDS}/{SEEDS}; {secs:.1} s",
        progs.len()
    ))
}

pub fn oracle_agreement() -> Outcome {
    let s = safe_set();
    for (name, t) in s.names.iter().zip(&s.theories) {
        let v = check_program(t);
        ensure!(v.is_empty(), "oracle rejects SAFE theory {name}: {}", v[0]);
    }
    let mut bad = theories::hand_built();
    let hand = bad.len();
    for (name, t) in s.names.iter().zip(&s.theories) {
        bad.extend(theories::mutants(name, t));
    }
    for b in &bad {
        let v = check_program(&b.theory);
        ensure!(v.iter().any(|v| v.addr == b.addr), "oracle misses {} (reports {:?})", b.name, v.first().map(ToString::to_string));
    }
    Ok(format!("{} SAFE theories accepted; {hand} hand-built and {} mutated theories flagged", s.theories.len(), bad.len() - hand))
}

pub fn hello_world() -> Outcome {
    let path = corpus_path("hello.s");
    let file = path.to_str().unwrap();
    let clean = execute(["hwalias", "run", file]);
    ensure!(clean.code == 0, "clean run exits {}: {}", clean.code, clean.stderr);
    ensure!(clean.stdout == b"Hi", "clean run prints {:?}", String::from_utf8_lossy(&clean.stdout));
    ensure!(clean.stderr.starts_with("exit: halt device"), "clean run: {}", clean.stderr.lines().next().unwrap_or(""));
    let (_, exit) = run(&corpus("hello.s"), &RunConfig::default());
    ensure!(exit == Exit::HaltDevice, "clean machine exits {exit:?}");
    for seed in 0..10 {
        let seed = seed.to_string();
        let a = execute(["hwalias", "run", file, "--mode", "alias", "--seed", &seed]);
        ensure!(a.code == 0, "alias run, seed {seed}, exits {}", a.code);
        ensure!(a.stdout == clean.stdout, "alias run, seed {seed}, prints {:?}", String::from_utf8_lossy(&a.stdout));
        ensure!(a.stderr.starts_with("exit: halt device"), "alias run, seed {seed}: {}", a.stderr.lines().next().unwrap_or(""));
    }
    Ok(String::from("prints \"Hi\" on the clean machine and on 10 aliased seeds, halting via the device"))
}

pub const ALL: [(&str, Check); 8] = [
    ("golden annotation tables", golden_tables),
    ("frame restore discrimination", frame_restore),
    ("element access discrimination", element_access),
    ("event algebra", event_algebra),
    ("stack-pointer matrix", sp_matrix),
    ("differential soundness", differential),
    ("oracle agreement", oracle_agreement),
    ("hello world end to end", hello_world),
];
