//! First-order unification over type and offset-set variables.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::string::String;

use crate::types::{AnnotatedType, OffsetSet};

/// Bindings for type variables (`?x`) and offset-set variables (`!?X`).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Subst {
    pub types: BTreeMap<String, AnnotatedType>,
    pub sets: BTreeMap<String, OffsetSet>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mismatch {
    pub left: Box<AnnotatedType>,
    pub right: Box<AnnotatedType>,
}

impl Subst {
    pub fn new() -> Subst {
        Subst::default()
    }

    pub fn is_empty(&self) -> bool {
        self.types.is_empty() && self.sets.is_empty()
    }

    pub fn apply_set(&self, x: &OffsetSet) -> OffsetSet {
        let mut cur = x;
        while let OffsetSet::Var(v) = cur {
            match self.sets.get(v) {
                Some(next) => cur = next,
                None => break,
            }
        }
        cur.clone()
    }

    /// Resolve every variable bound by this substitution.
    pub fn apply(&self, t: &AnnotatedType) -> AnnotatedType {
        let mut cur = t;
        while let AnnotatedType::Var(v) = cur {
            match self.types.get(v) {
                Some(next) => cur = next,
                None => return cur.clone(),
            }
        }
        match cur {
            AnnotatedType::Calc { tower, offsets } => {
                AnnotatedType::Calc { tower: tower.clone(), offsets: self.apply_set(offsets) }
            }
            AnnotatedType::Uncalc { size, offsets } => {
                AnnotatedType::Uncalc { size: *size, offsets: self.apply_set(offsets) }
            }
            AnnotatedType::Var(_) => unreachable!(),
        }
    }
}

fn unify_sets(a: &OffsetSet, b: &OffsetSet, s: &mut Subst) -> bool {
    let a = s.apply_set(a);
    let b = s.apply_set(b);
    match (&a, &b) {
        (OffsetSet::Var(x), OffsetSet::Var(y)) if x == y => true,
        (OffsetSet::Var(x), _) => {
            s.sets.insert(x.clone(), b);
            true
        }
        (_, OffsetSet::Var(y)) => {
            s.sets.insert(y.clone(), a);
            true
        }
        (OffsetSet::Concrete(p), OffsetSet::Concrete(q)) => p == q,
    }
}

/// Extend `s` to the most general substitution equating `t1` and `t2`.
pub fn unify(t1: &AnnotatedType, t2: &AnnotatedType, s: &Subst) -> Result<Subst, Mismatch> {
    let mut out = s.clone();
    let a = out.apply(t1);
    let b = out.apply(t2);
    let ok = match (&a, &b) {
        (AnnotatedType::Var(x), AnnotatedType::Var(y)) if x == y => true,
        (AnnotatedType::Var(x), _) => {
            out.types.insert(x.clone(), b.clone());
            true
        }
        (_, AnnotatedType::Var(y)) => {
            out.types.insert(y.clone(), a.clone());
            true
        }
        (
            AnnotatedType::Calc { tower: ta, offsets: xa },
            AnnotatedType::Calc { tower: tb, offsets: xb },
        ) => ta == tb && unify_sets(xa, xb, &mut out),
        (
            AnnotatedType::Uncalc { size: na, offsets: xa },
            AnnotatedType::Uncalc { size: nb, offsets: xb },
        ) => na == nb && unify_sets(xa, xb, &mut out),
        _ => false,
    };
    if ok {
        Ok(out)
    } else {
        Err(Mismatch { left: Box::new(t1.clone()), right: Box::new(t2.clone()) })
    }
}
