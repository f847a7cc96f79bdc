//! Parser for the annotation text form.
//!
//! ```text
//! annotation := [binding {"," binding}]
//! binding    := reg ["*"] "=" type | "(" n ")" "=" type
//! type       := "c^" tower offsets | "u^" n offsets | "?" name
//! tower      := "[" n {"," n} "]" | "rep(" n ")"
//! offsets    := "" | "!{" [n {"," n}] "}" | "!?" name
//! ```
//!
//! Printing is the `Display` impl on the core types; this module is its
//! inverse.

use std::collections::BTreeSet;
use std::fmt;

use hwalias_core::{AnnotatedType, Annotation, OffsetSet, Reg, Tower};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParseError {
    pub pos: usize,
    pub msg: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "column {}: {}", self.pos + 1, self.msg)
    }
}

impl std::error::Error for ParseError {}

struct Cursor<'a> {
    s: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn rest(&self) -> &'a str {
        &self.s[self.pos..]
    }

    fn skip_ws(&mut self) {
        let r = self.rest();
        self.pos += r.len() - r.trim_start().len();
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError { pos: self.pos, msg: msg.into() })
    }

    fn eat(&mut self, tok: &str) -> bool {
        self.skip_ws();
        if self.rest().starts_with(tok) {
            self.pos += tok.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: &str) -> Result<(), ParseError> {
        if self.eat(tok) {
            Ok(())
        } else {
            self.err(format!("expected `{tok}`"))
        }
    }

    fn number(&mut self) -> Result<u32, ParseError> {
        self.skip_ws();
        let n = self.rest().bytes().take_while(u8::is_ascii_digit).count();
        if n == 0 {
            return self.err("expected a number");
        }
        let v = self.rest()[..n].parse().or_else(|_| self.err("number out of range"))?;
        self.pos += n;
        Ok(v)
    }

    fn ident(&mut self) -> Result<&'a str, ParseError> {
        self.skip_ws();
        let n = self
            .rest()
            .bytes()
            .take_while(|b| b.is_ascii_alphanumeric() || *b == b'_' || *b == b'\'' || *b == b'$')
            .count();
        if n == 0 {
            return self.err("expected a name");
        }
        let id = &self.rest()[..n];
        self.pos += n;
        Ok(id)
    }

    fn list(&mut self, close: &str) -> Result<Vec<u32>, ParseError> {
        let mut out = Vec::new();
        if self.eat(close) {
            return Ok(out);
        }
        loop {
            out.push(self.number()?);
            if self.eat(close) {
                return Ok(out);
            }
            self.expect(",")?;
        }
    }

    fn offsets(&mut self) -> Result<OffsetSet, ParseError> {
        if self.eat("!?") {
            return Ok(OffsetSet::Var(self.ident()?.to_string()));
        }
        if self.eat("!{") {
            let ks = self.list("}")?;
            let set: BTreeSet<u32> = ks.iter().copied().collect();
            if set.len() != ks.len() {
                return self.err("repeated offset");
            }
            return Ok(OffsetSet::Concrete(set));
        }
        Ok(OffsetSet::empty())
    }

    fn ty(&mut self) -> Result<AnnotatedType, ParseError> {
        self.skip_ws();
        if self.eat("?") {
            return Ok(AnnotatedType::Var(self.ident()?.to_string()));
        }
        if self.eat("c^") {
            let tower = if self.eat("[") {
                let fs = self.list("]")?;
                if fs.is_empty() {
                    return self.err("empty tower");
                }
                Tower::Finite(fs)
            } else if self.eat("rep(") {
                let n = self.number()?;
                self.expect(")")?;
                if n == 0 {
                    return self.err("repeating step must be at least 1");
                }
                Tower::Rep(n)
            } else {
                return self.err("expected `[` or `rep(` after `c^`");
            };
            return Ok(AnnotatedType::Calc { tower, offsets: self.offsets()? });
        }
        if self.eat("u^") {
            let size = self.number()?;
            let offsets = self.offsets()?;
            if size == 0 && offsets != OffsetSet::empty() {
                return self.err("u^0 admits no offsets");
            }
            return Ok(AnnotatedType::Uncalc { size, offsets });
        }
        self.err("expected a type (`c^`, `u^` or `?`)")
    }
}

/// Parse one annotated type.
pub fn parse_type(s: &str) -> Result<AnnotatedType, ParseError> {
    let mut c = Cursor { s, pos: 0 };
    let t = c.ty()?;
    c.skip_ws();
    if !c.rest().is_empty() {
        return c.err("trailing text");
    }
    Ok(t)
}

/// Parse a comma-separated annotation.
pub fn parse_annotation(s: &str) -> Result<Annotation, ParseError> {
    let mut c = Cursor { s, pos: 0 };
    let mut a = Annotation::new();
    c.skip_ws();
    if c.rest().is_empty() {
        return Ok(a);
    }
    loop {
        let start = c.pos;
        if c.eat("(") {
            let k = c.number()?;
            c.expect(")")?;
            c.expect("=")?;
            let t = c.ty()?;
            if a.slots.insert(k, t).is_some() {
                return Err(ParseError { pos: start, msg: format!("slot ({k}) bound twice") });
            }
        } else {
            let name = c.ident()?;
            let Some(r) = Reg::parse(name) else {
                return Err(ParseError { pos: start, msg: format!("unknown register `{name}`") });
            };
            let starred = c.eat("*");
            c.expect("=")?;
            let t = c.ty()?;
            if a.regs.insert(r, t).is_some() {
                return Err(ParseError { pos: start, msg: format!("register {r} bound twice") });
            }
            if starred {
                if a.star.is_some() {
                    return Err(ParseError { pos: start, msg: "more than one starred register".into() });
                }
                a.star = Some(r);
            }
        }
        c.skip_ws();
        if c.rest().is_empty() {
            return Ok(a);
        }
        c.expect(",")?;
    }
}
