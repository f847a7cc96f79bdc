//! Random small programs for the differential runs.
//!
//! The generator keeps a rough model of which registers hold numbers, data
//! pointers or stack copies, so most of what it emits is well formed. The
//! certifier is the filter: only programs it certifies are kept.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use hwalias::asm::parse_program;
use hwalias_core::{certify_program, CertConfig, Program, Verdict};

pub const MAX_INSTRS: usize = 12;

const POOL: [&str; 7] = ["t0", "t1", "t2", "t3", "v0", "v1", "a0"];

#[derive(Clone, Copy, PartialEq)]
enum Held {
    Number,
    /// `written` is a bit per offset stored through this register.
    Pointer { steps: u32, step: u32, written: u8 },
}

struct Model {
    held: Vec<(&'static str, Held)>,
    frame: Option<i32>,
    slots: Vec<i32>,
    step: u32,
}

impl Model {
    fn numbers(&self) -> Vec<&'static str> {
        self.held.iter().filter(|(_, h)| *h == Held::Number).map(|(r, _)| *r).collect()
    }

    fn pointers(&self) -> Vec<&'static str> {
        self.held.iter().filter(|(_, h)| matches!(h, Held::Pointer { .. })).map(|(r, _)| *r).collect()
    }

    fn bound(&self) -> Vec<&'static str> {
        self.held.iter().map(|(r, _)| *r).collect()
    }

    fn written(&self, r: &str) -> u8 {
        match self.held.iter().find(|(s, _)| *s == r) {
            Some((_, Held::Pointer { written, .. })) => *written,
            _ => 0,
        }
    }

    fn note_write(&mut self, r: &str, k: u32) {
        for (s, h) in self.held.iter_mut() {
            if let (true, Held::Pointer { written, .. }) = (*s == r, h) {
                *written |= 1 << k;
            }
        }
    }

    fn set(&mut self, r: &'static str, h: Held) {
        self.held.retain(|(s, _)| *s != r);
        self.held.push((r, h));
    }
}

fn pick<'a>(rng: &mut impl Rng, xs: &[&'a str]) -> Option<&'a str> {
    xs.choose(rng).copied()
}

/// One random program text; at most `MAX_INSTRS` instructions.
pub fn random_source(rng: &mut impl Rng) -> String {
    let step = *[1u32, 4].choose(rng).unwrap();
    let framed = rng.gen_bool(0.7);
    let call = framed && rng.gen_bool(0.2);
    let mut m = Model {
        held: Vec::new(),
        frame: framed.then(|| *[8, 16, 32].choose(rng).unwrap()),
        slots: Vec::new(),
        step,
    };
    let overhead = 1 + if framed { 3 } else { 0 } + if call { 5 } else { 0 };
    let body_len = rng.gen_range(1..=MAX_INSTRS - overhead);

    let mut body: Vec<String> = Vec::new();
    let mut labels = 0;
    // A branch skips exactly one instruction: its label goes on the one
    // after next, or on the epilogue.
    let mut pending: Vec<(String, u32)> = Vec::new();
    let mut emitted = 0;
    let call_at = if call { rng.gen_range(0..=body_len) } else { usize::MAX };
    while emitted < body_len {
        if emitted == call_at && !body.iter().any(|l| l == "jal leaf") {
            body.push(String::from("jal leaf"));
            m.set("v0", Held::Number);
        }
        let Some((line, label)) = op(rng, &mut m, body_len - emitted, &mut labels) else { continue };
        let (due, rest): (Vec<_>, Vec<_>) = pending.drain(..).partition(|(_, wait)| *wait == 0);
        body.extend(due.into_iter().map(|(l, _)| format!("{l}:")));
        pending = rest.into_iter().map(|(l, wait)| (l, wait - 1)).collect();
        body.push(line);
        if let Some(l) = label {
            pending.push((l, 1));
        }
        emitted += 1;
    }
    if call && !body.iter().any(|l| l == "jal leaf") {
        body.push(String::from("jal leaf"));
    }

    let mut out = String::from("#@ entry main\nmain:\n");
    let f = m.frame;
    if let Some(f) = f {
        out += &format!("  move gp sp\n  addiu sp sp {}\n", -f);
        if call {
            out += &format!("  sw ra {}(sp)\n", f - 4);
        }
    }
    for l in body {
        out += &format!("  {l}\n");
    }
    let tail: String = pending.iter().map(|(l, _)| format!("{l}:\n  ")).collect();
    match f {
        Some(f) => {
            if call {
                out += &format!("  {tail}lw ra {}(sp)\n  move sp gp\n", f - 4);
            } else {
                out += &format!("  {tail}move sp gp\n");
            }
            out += "  jr ra\n";
        }
        None => out += &format!("  {tail}jr ra\n"),
    }
    if call {
        out += "leaf:\n  addiu v0 zero 3\n  jr ra\n";
    }
    out += &format!("buf: .bytes step={step} size=8 1 2 3 4 5 6 7 8\n");
    out += "cell: .bytes step=2 size=3 9 8 7 6 5 4\n";
    out
}

fn op(rng: &mut impl Rng, m: &mut Model, left: usize, labels: &mut u32) -> Option<(String, Option<String>)> {
    let dst = *POOL.choose(rng).unwrap();
    let numbers = m.numbers();
    let pointers = m.pointers();
    let bound = m.bound();
    let line = match rng.gen_range(0..11) {
        0 => {
            m.set(dst, Held::Number);
            format!("addiu {dst} zero {}", rng.gen_range(-20..100))
        }
        1 => {
            let a = pick(rng, &numbers)?;
            let b = pick(rng, &numbers)?;
            m.set(dst, Held::Number);
            let op = if rng.gen_bool(0.5) { "addu" } else { "nand" };
            format!("{op} {dst} {a} {b}")
        }
        2 => {
            let a = pick(rng, &bound)?;
            let h = m.held.iter().find(|(r, _)| *r == a).unwrap().1;
            m.set(dst, h);
            format!("move {dst} {a}")
        }
        3 => {
            let f = m.frame?;
            let src = pick(rng, &bound)?;
            let k = 4 * rng.gen_range(0..f / 4);
            m.slots.push(k);
            format!("sw {src} {k}(sp)")
        }
        4 => {
            m.frame?;
            let k = *m.slots.choose(rng)?;
            m.set(dst, Held::Number);
            format!("lw {dst} {k}(sp)")
        }
        5 => {
            // `cell` is small enough for byte access under the default policy.
            let (label, step) = if rng.gen_bool(0.5) { ("buf", m.step) } else { ("cell", 2) };
            m.set(dst, Held::Pointer { steps: 0, step, written: 0 });
            format!("li {dst} {label}")
        }
        6 => {
            let p = pick(rng, &pointers)?;
            let v = pick(rng, &numbers).unwrap_or("zero");
            let k = rng.gen_range(0..3);
            m.note_write(p, k);
            format!("sb {v} {k}({p})")
        }
        7 => {
            let p = pick(rng, &pointers)?;
            let written = m.written(p);
            let k = if written != 0 && rng.gen_bool(0.8) {
                *(0..3).filter(|k| written & (1 << k) != 0).collect::<Vec<_>>().choose(rng).unwrap()
            } else {
                rng.gen_range(0..3)
            };
            m.set(dst, Held::Number);
            format!("lb {dst} {k}({p})")
        }
        8 => {
            let p = pick(rng, &pointers)?;
            let Some(Held::Pointer { steps, step, written }) = m.held.iter().find(|(r, _)| *r == p).map(|x| x.1)
            else {
                return None;
            };
            if steps >= 2 {
                return None;
            }
            m.set(p, Held::Pointer { steps: steps + 1, step, written });
            format!("addiu {p} {p} {step}")
        }
        9 => {
            let p = pick(rng, &pointers)?;
            let v = pick(rng, &numbers).unwrap_or("zero");
            m.note_write(p, 0);
            format!("sw {v} 0({p})")
        }
        _ => {
            if left < 2 {
                return None;
            }
            let a = pick(rng, &numbers)?;
            *labels += 1;
            let l = format!("$F{labels}");
            let line = if rng.gen_bool(0.5) {
                format!("bnez {a} {l}")
            } else {
                let b = pick(rng, &numbers)?;
                format!("beq {a} {b} {l}")
            };
            return Some((line, Some(l)));
        }
    };
    Some((line, None))
}

/// Generate programs from `seed` until `count` of them certify SAFE.
/// Returns the sources and parsed programs, and how many were tried.
pub fn certifiable(seed: u64, count: usize) -> (Vec<(String, Program)>, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut kept = Vec::new();
    let mut tried = 0;
    while kept.len() < count {
        tried += 1;
        assert!(tried < 200 * count, "generator yields too few certifiable programs");
        let src = random_source(&mut rng);
        let p = parse_program(&src).unwrap_or_else(|e| panic!("generated source does not parse: {e}\n{src}"));
        assert!(p.code.len() <= MAX_INSTRS, "generated program too long:\n{src}");
        if certify_program(&p, &CertConfig::default()).verdict == Verdict::Safe {
            kept.push((src, p));
        }
    }
    (kept, tried)
}
