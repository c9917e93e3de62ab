//! The DFT expression AST and its failure-time semantics.
//!
//! An expression denotes, for a given assignment of failure times to its
//! basic events, the time at which its own event occurs. Gates are the
//! usual min/max/case combinators over times:
//!
//! * `And` fires when both inputs have fired (max), `Or` when either has
//!   (min).
//! * `Pand(x, y)` fires at `y`'s time when the inputs fail in order
//!   (`x <= y`), else never.
//! * `Before`/`Simult`/`InclBefore` return the left time when it is
//!   strictly before / ties with / weakly precedes the right, else never.
//! * Spare gates (`Hsp`, `Csp`, `Wsp`, `SharedSpare`) distinguish the
//!   spare's dormant and active states; `Wsp` and `SharedSpare` evaluate
//!   by expanding into the operator combinators.
//! * `Always` fires at time 0, `Never` at `+inf`.

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::time::ExtTime;

/// A DFT structure-function expression over named basic events.
///
/// The derived `Ord` doubles as the canonical operand order used by the
/// rewrite engine when sorting commutative chains, so the variant order
/// here is part of the crate's normal form.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum FailureExpr {
    /// Fails at time 0.
    Always,
    /// Never fails.
    Never,
    /// A leaf component failure.
    Basic(String),
    And(Box<FailureExpr>, Box<FailureExpr>),
    Or(Box<FailureExpr>, Box<FailureExpr>),
    /// Priority-AND: fires at the right input's time if the left failed
    /// first or simultaneously.
    Pand(Box<FailureExpr>, Box<FailureExpr>),
    /// Functional dependency: `dep` forced by `trigger` (min of the two).
    Fdep(Box<FailureExpr>, Box<FailureExpr>),
    Before(Box<FailureExpr>, Box<FailureExpr>),
    Simult(Box<FailureExpr>, Box<FailureExpr>),
    InclBefore(Box<FailureExpr>, Box<FailureExpr>),
    /// Hot spare: spare fails identically in both states (max).
    Hsp(Box<FailureExpr>, Box<FailureExpr>),
    /// Cold spare: `Csp(main, spare)` fires at the spare's active-state
    /// failure time once the main has failed.
    Csp(Box<FailureExpr>, Box<FailureExpr>),
    /// Warm spare: `Wsp(main, spare_active, spare_dormant)` over the two
    /// state variables of one physical spare.
    Wsp(Box<FailureExpr>, Box<FailureExpr>, Box<FailureExpr>),
    /// A spare shared with one other main:
    /// `SharedSpare(main, other_main, spare_active, spare_dormant)`.
    SharedSpare(
        Box<FailureExpr>,
        Box<FailureExpr>,
        Box<FailureExpr>,
        Box<FailureExpr>,
    ),
}

/// Failure times for the basic events of an expression under evaluation.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Assignment(BTreeMap<String, ExtTime>);

/// Evaluation failure.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EvalError {
    /// The assignment has no entry for a referenced basic event.
    UnknownBasic(String),
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalError::UnknownBasic(name) => {
                write!(f, "no failure time assigned to basic event `{name}`")
            }
        }
    }
}

impl Assignment {
    pub fn new() -> Self {
        Assignment(BTreeMap::new())
    }

    pub fn set(&mut self, name: impl Into<String>, t: ExtTime) {
        self.0.insert(name.into(), t);
    }

    pub fn get(&self, name: &str) -> Result<ExtTime, EvalError> {
        self.0
            .get(name)
            .copied()
            .ok_or_else(|| EvalError::UnknownBasic(name.into()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, ExtTime)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

impl<S: Into<String>> FromIterator<(S, ExtTime)> for Assignment {
    fn from_iter<I: IntoIterator<Item = (S, ExtTime)>>(iter: I) -> Self {
        Assignment(iter.into_iter().map(|(k, v)| (k.into(), v)).collect())
    }
}

/// `x` strictly before `y`, else never.
fn before(x: ExtTime, y: ExtTime) -> ExtTime {
    if x < y {
        x
    } else {
        ExtTime::Infinity
    }
}

fn simult(x: ExtTime, y: ExtTime) -> ExtTime {
    if x == y {
        x
    } else {
        ExtTime::Infinity
    }
}

fn incl_before(x: ExtTime, y: ExtTime) -> ExtTime {
    if x <= y {
        x
    } else {
        ExtTime::Infinity
    }
}

impl FailureExpr {
    pub fn basic(name: impl Into<String>) -> Self {
        FailureExpr::Basic(name.into())
    }

    pub fn and(l: FailureExpr, r: FailureExpr) -> Self {
        FailureExpr::And(Box::new(l), Box::new(r))
    }

    pub fn or(l: FailureExpr, r: FailureExpr) -> Self {
        FailureExpr::Or(Box::new(l), Box::new(r))
    }

    pub fn pand(l: FailureExpr, r: FailureExpr) -> Self {
        FailureExpr::Pand(Box::new(l), Box::new(r))
    }

    pub fn fdep(dep: FailureExpr, trigger: FailureExpr) -> Self {
        FailureExpr::Fdep(Box::new(dep), Box::new(trigger))
    }

    pub fn before(l: FailureExpr, r: FailureExpr) -> Self {
        FailureExpr::Before(Box::new(l), Box::new(r))
    }

    pub fn simult(l: FailureExpr, r: FailureExpr) -> Self {
        FailureExpr::Simult(Box::new(l), Box::new(r))
    }

    pub fn incl_before(l: FailureExpr, r: FailureExpr) -> Self {
        FailureExpr::InclBefore(Box::new(l), Box::new(r))
    }

    pub fn hsp(main: FailureExpr, spare: FailureExpr) -> Self {
        FailureExpr::Hsp(Box::new(main), Box::new(spare))
    }

    pub fn csp(main: FailureExpr, spare: FailureExpr) -> Self {
        FailureExpr::Csp(Box::new(main), Box::new(spare))
    }

    pub fn wsp(main: FailureExpr, active: FailureExpr, dormant: FailureExpr) -> Self {
        FailureExpr::Wsp(Box::new(main), Box::new(active), Box::new(dormant))
    }

    pub fn shared_spare(
        main: FailureExpr,
        other_main: FailureExpr,
        active: FailureExpr,
        dormant: FailureExpr,
    ) -> Self {
        FailureExpr::SharedSpare(
            Box::new(main),
            Box::new(other_main),
            Box::new(active),
            Box::new(dormant),
        )
    }

    /// Right-nested `Or` chain over `terms`; `Never` when empty.
    pub fn or_chain(terms: Vec<FailureExpr>) -> FailureExpr {
        let mut it = terms.into_iter().rev();
        match it.next() {
            None => FailureExpr::Never,
            Some(last) => it.fold(last, |acc, e| FailureExpr::or(e, acc)),
        }
    }

    /// Right-nested `And` chain over `terms`; `Always` when empty.
    pub fn and_chain(terms: Vec<FailureExpr>) -> FailureExpr {
        let mut it = terms.into_iter().rev();
        match it.next() {
            None => FailureExpr::Always,
            Some(last) => it.fold(last, |acc, e| FailureExpr::and(e, acc)),
        }
    }

    /// Flattens a nested chain of the same variant as `self` (only `And`
    /// and `Or` are treated as chains).
    pub fn chain_terms(&self) -> Vec<&FailureExpr> {
        fn walk<'a>(e: &'a FailureExpr, or_chain: bool, out: &mut Vec<&'a FailureExpr>) {
            match e {
                FailureExpr::Or(l, r) if or_chain => {
                    walk(l, or_chain, out);
                    walk(r, or_chain, out);
                }
                FailureExpr::And(l, r) if !or_chain => {
                    walk(l, or_chain, out);
                    walk(r, or_chain, out);
                }
                other => out.push(other),
            }
        }
        let mut out = Vec::new();
        match self {
            FailureExpr::Or(..) => walk(self, true, &mut out),
            FailureExpr::And(..) => walk(self, false, &mut out),
            other => out.push(other),
        }
        out
    }

    /// The time of occurrence of this expression's event under `a`.
    pub fn eval(&self, a: &Assignment) -> Result<ExtTime, EvalError> {
        use FailureExpr::*;
        Ok(match self {
            Always => ExtTime::ZERO,
            Never => ExtTime::Infinity,
            Basic(name) => a.get(name)?,
            And(l, r) => l.eval(a)?.max(r.eval(a)?),
            Or(l, r) => l.eval(a)?.min(r.eval(a)?),
            Pand(x, y) => {
                let (x, y) = (x.eval(a)?, y.eval(a)?);
                if x <= y {
                    y
                } else {
                    ExtTime::Infinity
                }
            }
            Fdep(dep, trigger) => dep.eval(a)?.min(trigger.eval(a)?),
            Before(x, y) => before(x.eval(a)?, y.eval(a)?),
            Simult(x, y) => simult(x.eval(a)?, y.eval(a)?),
            InclBefore(x, y) => incl_before(x.eval(a)?, y.eval(a)?),
            Hsp(main, spare) => main.eval(a)?.max(spare.eval(a)?),
            Csp(main, spare) => {
                let (y, x) = (main.eval(a)?, spare.eval(a)?);
                if y < x {
                    x
                } else {
                    ExtTime::Infinity
                }
            }
            // main AND (dormant before main) + active AND (main before active)
            // + the two simultaneity cases.
            Wsp(main, active, dormant) => {
                let y = main.eval(a)?;
                let xa = active.eval(a)?;
                let xd = dormant.eval(a)?;
                y.max(before(xd, y))
                    .min(xa.max(before(y, xa)))
                    .min(simult(y, xa))
                    .min(simult(y, xd))
            }
            // main AND (dormant before main) + active AND (main before active)
            // + main AND (other main before main, i.e. the spare was taken).
            SharedSpare(main, other, active, dormant) => {
                let x = main.eval(a)?;
                let y = other.eval(a)?;
                let za = active.eval(a)?;
                let zd = dormant.eval(a)?;
                x.max(before(zd, x))
                    .min(za.max(before(x, za)))
                    .min(x.max(before(y, x)))
            }
        })
    }

    /// The set of basic-event names occurring in this expression.
    pub fn basics(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_basics(&mut out);
        out
    }

    fn collect_basics(&self, out: &mut BTreeSet<String>) {
        use FailureExpr::*;
        match self {
            Always | Never => {}
            Basic(name) => {
                out.insert(name.clone());
            }
            And(l, r)
            | Or(l, r)
            | Pand(l, r)
            | Fdep(l, r)
            | Before(l, r)
            | Simult(l, r)
            | InclBefore(l, r)
            | Hsp(l, r)
            | Csp(l, r) => {
                l.collect_basics(out);
                r.collect_basics(out);
            }
            Wsp(a, b, c) => {
                a.collect_basics(out);
                b.collect_basics(out);
                c.collect_basics(out);
            }
            SharedSpare(a, b, c, d) => {
                a.collect_basics(out);
                b.collect_basics(out);
                c.collect_basics(out);
                d.collect_basics(out);
            }
        }
    }

    pub fn contains_always(&self) -> bool {
        use FailureExpr::*;
        match self {
            Always => true,
            Never | Basic(_) => false,
            And(l, r)
            | Or(l, r)
            | Pand(l, r)
            | Fdep(l, r)
            | Before(l, r)
            | Simult(l, r)
            | InclBefore(l, r)
            | Hsp(l, r)
            | Csp(l, r) => l.contains_always() || r.contains_always(),
            Wsp(a, b, c) => [a, b, c].iter().any(|e| e.contains_always()),
            SharedSpare(a, b, c, d) => [a, b, c, d].iter().any(|e| e.contains_always()),
        }
    }
}

impl fmt::Display for FailureExpr {
    /// Prints in the model-file expression grammar, with `and`/`or`
    /// chains flattened to n-ary form.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn args(f: &mut fmt::Formatter<'_>, name: &str, xs: &[&FailureExpr]) -> fmt::Result {
            write!(f, "{name}(")?;
            for (i, x) in xs.iter().enumerate() {
                if i > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{x}")?;
            }
            write!(f, ")")
        }
        use FailureExpr::*;
        match self {
            Always => write!(f, "always"),
            Never => write!(f, "never"),
            Basic(name) => write!(f, "{name}"),
            And(..) => args(f, "and", &self.chain_terms()),
            Or(..) => args(f, "or", &self.chain_terms()),
            Pand(l, r) => args(f, "pand", &[l, r]),
            Fdep(dep, trigger) => args(f, "fdep", &[dep, trigger]),
            Before(l, r) => args(f, "before", &[l, r]),
            Simult(l, r) => args(f, "simult", &[l, r]),
            InclBefore(l, r) => args(f, "ibefore", &[l, r]),
            Hsp(main, spare) => args(f, "hsp", &[main, spare]),
            Csp(main, spare) => args(f, "csp", &[main, spare]),
            Wsp(main, xa, xd) => args(f, "wsp", &[main, xa, xd]),
            SharedSpare(m, o, za, zd) => args(f, "sharedspare", &[m, o, za, zd]),
        }
    }
}
