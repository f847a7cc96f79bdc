//! Annotated types: frame towers, offset sets and the operations the
//! inference rules are built from.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

/// Access width in bytes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Width {
    Byte = 1,
    Word = 4,
}

impl Width {
    pub fn bytes(self) -> u32 {
        self as u32
    }
}

/// Frame sizes of a calculated value.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Tower {
    /// Nested frame sizes, current frame first. `c^0` is `Finite([0])`.
    Finite(Vec<u32>),
    /// A string pointer stepping by a fixed stride, of unknown extent.
    Rep(u32),
}

impl Tower {
    /// Bound that accesses through this value must respect.
    pub fn bound(&self) -> u32 {
        match self {
            Tower::Finite(fs) => fs.first().copied().unwrap_or(0),
            Tower::Rep(n) => *n,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum OffsetSet {
    Concrete(BTreeSet<u32>),
    Var(String),
}

impl OffsetSet {
    pub fn empty() -> OffsetSet {
        OffsetSet::Concrete(BTreeSet::new())
    }

    pub fn of(ks: &[u32]) -> OffsetSet {
        OffsetSet::Concrete(ks.iter().copied().collect())
    }

    pub fn contains(&self, k: u32) -> bool {
        matches!(self, OffsetSet::Concrete(s) if s.contains(&k))
    }

    pub fn is_ground(&self) -> bool {
        matches!(self, OffsetSet::Concrete(_))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AnnotatedType {
    /// `c`: a value that may be stepped by arithmetic.
    Calc { tower: Tower, offsets: OffsetSet },
    /// `u`: a value that must only be copied; `size` bytes may be accessed
    /// through it.
    Uncalc { size: u32, offsets: OffsetSet },
    Var(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TypeError {
    NotStackLike,
    NonPositiveFrame(i64),
    FrameMismatch { expected: u32, found: i64 },
    /// Popping the outermost frame.
    NoEnclosingFrame,
    OutOfBounds { k: i64, bound: u32 },
    ReadBeforeWrite { k: u32 },
    ImmutableValue,
    SymbolicOffsets,
}

impl fmt::Display for TypeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TypeError::NotStackLike => write!(f, "value is not a stack or string pointer"),
            TypeError::NonPositiveFrame(n) => write!(f, "frame size {n} is not positive"),
            TypeError::FrameMismatch { expected, found } => {
                write!(f, "current frame is {expected}, not {found}")
            }
            TypeError::NoEnclosingFrame => write!(f, "no enclosing frame to return to"),
            TypeError::OutOfBounds { k, bound } => {
                write!(f, "offset {k} out of bounds for extent {bound}")
            }
            TypeError::ReadBeforeWrite { k } => write!(f, "offset {k} read before written"),
            TypeError::ImmutableValue => write!(f, "value admits no memory access"),
            TypeError::SymbolicOffsets => write!(f, "offset set is not concrete"),
        }
    }
}

impl AnnotatedType {
    /// `c^0`, the type of arithmetic results.
    pub fn c0() -> AnnotatedType {
        AnnotatedType::stack(&[0], &[])
    }

    /// `c^[frames]!{offsets}`.
    pub fn stack(frames: &[u32], offsets: &[u32]) -> AnnotatedType {
        AnnotatedType::Calc {
            tower: Tower::Finite(frames.to_vec()),
            offsets: OffsetSet::of(offsets),
        }
    }

    /// `c^rep(step)!{offsets}`.
    pub fn string(step: u32, offsets: &[u32]) -> AnnotatedType {
        AnnotatedType::Calc { tower: Tower::Rep(step), offsets: OffsetSet::of(offsets) }
    }

    /// `u^size!{offsets}`.
    pub fn array(size: u32, offsets: &[u32]) -> AnnotatedType {
        AnnotatedType::Uncalc { size, offsets: OffsetSet::of(offsets) }
    }

    /// `u^0`, a return address.
    pub fn u0() -> AnnotatedType {
        AnnotatedType::array(0, &[])
    }

    pub fn is_calc(&self) -> bool {
        matches!(self, AnnotatedType::Calc { .. })
    }

    pub fn is_finite_calc(&self) -> bool {
        matches!(self, AnnotatedType::Calc { tower: Tower::Finite(_), .. })
    }

    pub fn is_ground(&self) -> bool {
        match self {
            AnnotatedType::Calc { offsets, .. } | AnnotatedType::Uncalc { offsets, .. } => {
                offsets.is_ground()
            }
            AnnotatedType::Var(_) => false,
        }
    }

    pub fn offsets(&self) -> Option<&OffsetSet> {
        match self {
            AnnotatedType::Calc { offsets, .. } | AnnotatedType::Uncalc { offsets, .. } => {
                Some(offsets)
            }
            AnnotatedType::Var(_) => None,
        }
    }

    pub fn tower(&self) -> Option<&Tower> {
        match self {
            AnnotatedType::Calc { tower, .. } => Some(tower),
            _ => None,
        }
    }

    /// Extent an access through this value is checked against.
    fn access_bound(&self) -> Result<(u32, &OffsetSet), TypeError> {
        match self {
            AnnotatedType::Calc { tower, offsets } => Ok((tower.bound(), offsets)),
            AnnotatedType::Uncalc { size: 0, .. } | AnnotatedType::Var(_) => {
                Err(TypeError::ImmutableValue)
            }
            AnnotatedType::Uncalc { size, offsets } => Ok((*size, offsets)),
        }
    }

    fn with_offsets(&self, offsets: OffsetSet) -> AnnotatedType {
        match self {
            AnnotatedType::Calc { tower, .. } => AnnotatedType::Calc { tower: tower.clone(), offsets },
            AnnotatedType::Uncalc { size, .. } => AnnotatedType::Uncalc { size: *size, offsets },
            AnnotatedType::Var(v) => AnnotatedType::Var(v.clone()),
        }
    }
}

fn check_bound(k: i64, w: Width, bound: u32) -> Result<u32, TypeError> {
    if k < 0 || k + w.bytes() as i64 > bound as i64 {
        return Err(TypeError::OutOfBounds { k, bound });
    }
    Ok(k as u32)
}

/// Open a new frame of `n` bytes on a stack pointer.
pub fn push_frame(t: &AnnotatedType, n: i64) -> Result<AnnotatedType, TypeError> {
    let AnnotatedType::Calc { tower: Tower::Finite(fs), .. } = t else {
        return Err(TypeError::NotStackLike);
    };
    if n <= 0 || n > u32::MAX as i64 {
        return Err(TypeError::NonPositiveFrame(n));
    }
    let mut frames = vec![n as u32];
    frames.extend_from_slice(fs);
    Ok(AnnotatedType::Calc { tower: Tower::Finite(frames), offsets: OffsetSet::empty() })
}

/// Close the current frame of a stack pointer, or step a string pointer.
///
/// Strings keep their offset set: the same pattern holds at every step.
pub fn pop_frame(t: &AnnotatedType, n: i64) -> Result<AnnotatedType, TypeError> {
    match t {
        AnnotatedType::Calc { tower: Tower::Finite(fs), .. } => {
            if fs[0] as i64 != n {
                return Err(TypeError::FrameMismatch { expected: fs[0], found: n });
            }
            if fs.len() < 2 {
                return Err(TypeError::NoEnclosingFrame);
            }
            Ok(AnnotatedType::Calc {
                tower: Tower::Finite(fs[1..].to_vec()),
                offsets: OffsetSet::empty(),
            })
        }
        AnnotatedType::Calc { tower: Tower::Rep(m), .. } => {
            if *m as i64 != n {
                return Err(TypeError::FrameMismatch { expected: *m, found: n });
            }
            Ok(t.clone())
        }
        _ => Err(TypeError::NotStackLike),
    }
}

/// Record a `w`-byte write at offset `k` through `t`.
pub fn record_write(t: &AnnotatedType, k: i64, w: Width) -> Result<AnnotatedType, TypeError> {
    let (bound, offsets) = t.access_bound()?;
    let OffsetSet::Concrete(set) = offsets else {
        return Err(TypeError::SymbolicOffsets);
    };
    let k = check_bound(k, w, bound)?;
    let mut set = set.clone();
    set.insert(k);
    Ok(t.with_offsets(OffsetSet::Concrete(set)))
}

/// Check a `w`-byte read at offset `k` through `t`.
pub fn check_read(t: &AnnotatedType, k: i64, w: Width) -> Result<(), TypeError> {
    let (bound, offsets) = t.access_bound()?;
    let k = check_bound(k, w, bound)?;
    match offsets {
        OffsetSet::Concrete(s) if s.contains(&k) => Ok(()),
        OffsetSet::Concrete(_) => Err(TypeError::ReadBeforeWrite { k }),
        OffsetSet::Var(_) => Err(TypeError::SymbolicOffsets),
    }
}

impl fmt::Display for OffsetSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OffsetSet::Concrete(s) if s.is_empty() => Ok(()),
            OffsetSet::Concrete(s) => {
                f.write_str("!{")?;
                for (i, k) in s.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{k}")?;
                }
                f.write_str("}")
            }
            OffsetSet::Var(v) => write!(f, "!?{v}"),
        }
    }
}

impl fmt::Display for Tower {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tower::Finite(fs) => {
                f.write_str("[")?;
                for (i, n) in fs.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{n}")?;
                }
                f.write_str("]")
            }
            Tower::Rep(n) => write!(f, "rep({n})"),
        }
    }
}

impl fmt::Display for AnnotatedType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AnnotatedType::Calc { tower, offsets } => write!(f, "c^{tower}{offsets}"),
            AnnotatedType::Uncalc { size, offsets } => write!(f, "u^{size}{offsets}"),
            AnnotatedType::Var(v) => write!(f, "?{v}"),
        }
    }
}
