//! A brute-force reading of the event equations.
//!
//! Bounds are checked by enumerating the bytes an access touches rather than
//! by arithmetic on the endpoints, and offset sets are plain lists.

use hwalias_core::oracle::{Event, FoldError};
use hwalias_core::{AnnotatedType, OffsetSet, Tower, Width};

/// Every byte of `[k, k + w)` lies in `[0, n)`.
pub fn fits(k: i64, w: Width, n: u32) -> bool {
    (k..k + w.bytes() as i64).all(|b| (0..n as i64).any(|c| c == b))
}

fn offsets(t: &AnnotatedType) -> Vec<u32> {
    match t.offsets() {
        Some(OffsetSet::Concrete(x)) => x.iter().copied().collect(),
        _ => panic!("ground type expected"),
    }
}

fn with_offsets(t: &AnnotatedType, xs: &[u32]) -> AnnotatedType {
    match t {
        AnnotatedType::Uncalc { size, .. } => AnnotatedType::array(*size, xs),
        AnnotatedType::Calc { tower, .. } => AnnotatedType::Calc { tower: tower.clone(), offsets: OffsetSet::of(xs) },
        AnnotatedType::Var(_) => unreachable!(),
    }
}

/// The expected fold of one access or shift event.
pub fn expect(t: &AnnotatedType, e: &Event) -> Result<AnnotatedType, FoldError> {
    let (n, write_eq, read_eq) = match t {
        AnnotatedType::Uncalc { size, .. } => (*size, 1, 2),
        AnnotatedType::Calc { tower: Tower::Rep(n), .. } => (*n, 4, 5),
        AnnotatedType::Calc { tower: Tower::Finite(fs), .. } => (fs[0], 8, 9),
        AnnotatedType::Var(_) => return Err(FoldError::NotGround),
    };
    let xs = offsets(t);
    match *e {
        Event::Write { k, w } => {
            if !fits(k, w, n) {
                return Err(FoldError::Guard { eq: write_eq });
            }
            let mut ys = xs.clone();
            if !ys.contains(&(k as u32)) {
                ys.push(k as u32);
            }
            Ok(with_offsets(t, &ys))
        }
        Event::Read { k, w } => {
            if fits(k, w, n) && xs.iter().any(|&x| x as i64 == k) {
                Ok(t.clone())
            } else {
                Err(FoldError::Guard { eq: read_eq })
            }
        }
        Event::FrameDown(m) => match t {
            AnnotatedType::Calc { tower: Tower::Rep(step), .. } => {
                if m >= 1 && m == *step as i64 {
                    Ok(t.clone())
                } else {
                    Err(FoldError::Guard { eq: 3 })
                }
            }
            AnnotatedType::Calc { tower: Tower::Finite(fs), .. } => {
                if fs.len() > 1 && m >= 1 && fs[0] as i64 == m {
                    Ok(AnnotatedType::stack(&fs[1..], &[]))
                } else {
                    Err(FoldError::Guard { eq: 7 })
                }
            }
            _ => Err(FoldError::NoEquation),
        },
        Event::FrameUp(m) => match t {
            AnnotatedType::Calc { tower: Tower::Finite(fs), .. } => {
                if m >= 1 && m <= u32::MAX as i64 {
                    let mut g = vec![m as u32];
                    g.extend_from_slice(fs);
                    Ok(AnnotatedType::stack(&g, &[]))
                } else {
                    Err(FoldError::Guard { eq: 6 })
                }
            }
            _ => Err(FoldError::NoEquation),
        },
        _ => panic!("not an access or shift event"),
    }
}
