//! Algebraic simplification of DFT expressions.
//!
//! Rules are data: a named left/right pattern pair over expression
//! metavariables, optionally guarded by a side condition. The shipped set
//! ([`default_rules`]) covers the identity-element absorptions,
//! idempotence, the gate-equivalence rewrites (`fdep -> or`,
//! `hsp -> and`, `pand -> and . ibefore`), distribution of the before
//! operators over `or`, simultaneity elimination for distinct basic
//! events, and the spare-gate collapses used to reduce shared-spare
//! benchmarks. Soundness is not assumed: every rule is checkable against
//! the evaluator by seeded assignment sampling ([`rule_soundness`]).
//!
//! Strategy is innermost-first fixed-point iteration with a step cap.
//! Commutative chains (`and`/`or`/`simult`) are kept flattened and sorted
//! in the canonical operand order so idempotence and commutativity behave
//! confluently and results can be compared structurally.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::expr::{Assignment, FailureExpr};
use crate::rng::SampleRng;
use crate::time::ExtTime;

/// An expression pattern: a [`FailureExpr`] shape with metavariables at
/// the leaves.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Pattern {
    Var(String),
    Always,
    Never,
    Basic(String),
    And(Box<Pattern>, Box<Pattern>),
    Or(Box<Pattern>, Box<Pattern>),
    Pand(Box<Pattern>, Box<Pattern>),
    Fdep(Box<Pattern>, Box<Pattern>),
    Before(Box<Pattern>, Box<Pattern>),
    Simult(Box<Pattern>, Box<Pattern>),
    InclBefore(Box<Pattern>, Box<Pattern>),
    Hsp(Box<Pattern>, Box<Pattern>),
    Csp(Box<Pattern>, Box<Pattern>),
    Wsp(Box<Pattern>, Box<Pattern>, Box<Pattern>),
    SharedSpare(Box<Pattern>, Box<Pattern>, Box<Pattern>, Box<Pattern>),
}

/// Guard on a rule application.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SideCondition {
    /// The named metavariables must be bound to pairwise-distinct basic
    /// events. Distinct declared basics carry continuous laws, which is
    /// what justifies the almost-sure rules (ties have probability zero).
    DistinctBasics(Vec<String>),
}

/// Rules that need chain-level (AC) matching are implemented directly.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Builtin {
    /// `(X + Z) . (Y + Z) = (X . Y) + Z` generalized to `or` chains with
    /// any common part (min/max distributivity).
    AndOrFactor,
}

#[derive(Clone, Debug)]
pub enum RuleBody {
    Rewrite { lhs: Pattern, rhs: Pattern },
    Builtin(Builtin),
}

#[derive(Clone, Debug)]
pub struct RewriteRule {
    pub name: String,
    pub body: RuleBody,
    pub side: Option<SideCondition>,
}

impl RewriteRule {
    pub fn new(name: &str, lhs: Pattern, rhs: Pattern) -> Self {
        RewriteRule {
            name: name.into(),
            body: RuleBody::Rewrite { lhs, rhs },
            side: None,
        }
    }

    pub fn with_side(name: &str, lhs: Pattern, rhs: Pattern, side: SideCondition) -> Self {
        RewriteRule {
            name: name.into(),
            body: RuleBody::Rewrite { lhs, rhs },
            side: Some(side),
        }
    }
}

/// Termination strategy. Only innermost-first fixed-point iteration is
/// implemented; the tag exists so rule files can state it explicitly.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Strategy {
    #[default]
    InnermostFixedPoint,
}

#[derive(Clone, Debug)]
pub struct RuleSet {
    rules: Vec<RewriteRule>,
    step_cap: usize,
    strategy: Strategy,
}

pub const DEFAULT_STEP_CAP: usize = 10_000;

impl RuleSet {
    pub fn new(rules: Vec<RewriteRule>) -> Self {
        RuleSet {
            rules,
            step_cap: DEFAULT_STEP_CAP,
            strategy: Strategy::InnermostFixedPoint,
        }
    }

    pub fn with_step_cap(mut self, cap: usize) -> Self {
        assert!(cap > 0, "step cap must be positive");
        self.step_cap = cap;
        self
    }

    pub fn rules(&self) -> &[RewriteRule] {
        &self.rules
    }

    pub fn push(&mut self, rule: RewriteRule) {
        self.rules.push(rule);
    }

    pub fn step_cap(&self) -> usize {
        self.step_cap
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }
}

#[derive(Clone, Debug)]
pub struct Simplified {
    pub expr: FailureExpr,
    /// Rule applications performed.
    pub steps: usize,
}

#[derive(Clone, Debug)]
pub enum RewriteError {
    /// The step cap was reached; carries the partially simplified tree.
    StepCapExceeded { partial: FailureExpr, cap: usize },
}

impl fmt::Display for RewriteError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RewriteError::StepCapExceeded { cap, .. } => {
                write!(f, "rewrite step cap of {cap} applications exceeded")
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Pattern helpers

pub fn pvar(name: &str) -> Pattern {
    Pattern::Var(name.into())
}

fn pand(l: Pattern, r: Pattern) -> Pattern {
    Pattern::And(Box::new(l), Box::new(r))
}

fn por(l: Pattern, r: Pattern) -> Pattern {
    Pattern::Or(Box::new(l), Box::new(r))
}

fn pbefore(l: Pattern, r: Pattern) -> Pattern {
    Pattern::Before(Box::new(l), Box::new(r))
}

fn psimult(l: Pattern, r: Pattern) -> Pattern {
    Pattern::Simult(Box::new(l), Box::new(r))
}

fn pibefore(l: Pattern, r: Pattern) -> Pattern {
    Pattern::InclBefore(Box::new(l), Box::new(r))
}

impl Pattern {
    /// Metavariables in order of first occurrence.
    pub fn vars(&self) -> Vec<String> {
        fn walk(p: &Pattern, out: &mut Vec<String>) {
            match p {
                Pattern::Var(v) => {
                    if !out.iter().any(|x| x == v) {
                        out.push(v.clone());
                    }
                }
                Pattern::Always | Pattern::Never | Pattern::Basic(_) => {}
                Pattern::And(l, r)
                | Pattern::Or(l, r)
                | Pattern::Pand(l, r)
                | Pattern::Fdep(l, r)
                | Pattern::Before(l, r)
                | Pattern::Simult(l, r)
                | Pattern::InclBefore(l, r)
                | Pattern::Hsp(l, r)
                | Pattern::Csp(l, r) => {
                    walk(l, out);
                    walk(r, out);
                }
                Pattern::Wsp(a, b, c) => {
                    walk(a, out);
                    walk(b, out);
                    walk(c, out);
                }
                Pattern::SharedSpare(a, b, c, d) => {
                    walk(a, out);
                    walk(b, out);
                    walk(c, out);
                    walk(d, out);
                }
            }
        }
        let mut out = Vec::new();
        walk(self, &mut out);
        out
    }

    /// Instantiates every metavariable as a basic event of the same name.
    pub fn instantiate_fresh(&self) -> FailureExpr {
        let binds: BTreeMap<String, FailureExpr> = self
            .vars()
            .into_iter()
            .map(|v| (v.clone(), FailureExpr::Basic(v)))
            .collect();
        substitute(self, &binds)
    }
}

type Bindings = BTreeMap<String, FailureExpr>;

fn match_pattern(p: &Pattern, e: &FailureExpr, binds: &mut Bindings) -> bool {
    match (p, e) {
        (Pattern::Var(v), _) => match binds.get(v) {
            Some(bound) => bound == e,
            None => {
                binds.insert(v.clone(), e.clone());
                true
            }
        },
        (Pattern::Always, FailureExpr::Always) => true,
        (Pattern::Never, FailureExpr::Never) => true,
        (Pattern::Basic(a), FailureExpr::Basic(b)) => a == b,
        (Pattern::And(pl, pr), FailureExpr::And(el, er))
        | (Pattern::Or(pl, pr), FailureExpr::Or(el, er))
        | (Pattern::Pand(pl, pr), FailureExpr::Pand(el, er))
        | (Pattern::Fdep(pl, pr), FailureExpr::Fdep(el, er))
        | (Pattern::Before(pl, pr), FailureExpr::Before(el, er))
        | (Pattern::Simult(pl, pr), FailureExpr::Simult(el, er))
        | (Pattern::InclBefore(pl, pr), FailureExpr::InclBefore(el, er))
        | (Pattern::Hsp(pl, pr), FailureExpr::Hsp(el, er))
        | (Pattern::Csp(pl, pr), FailureExpr::Csp(el, er)) => {
            match_pattern(pl, el, binds) && match_pattern(pr, er, binds)
        }
        (Pattern::Wsp(pa, pb, pc), FailureExpr::Wsp(ea, eb, ec)) => {
            match_pattern(pa, ea, binds)
                && match_pattern(pb, eb, binds)
                && match_pattern(pc, ec, binds)
        }
        (Pattern::SharedSpare(pa, pb, pc, pd), FailureExpr::SharedSpare(ea, eb, ec, ed)) => {
            match_pattern(pa, ea, binds)
                && match_pattern(pb, eb, binds)
                && match_pattern(pc, ec, binds)
                && match_pattern(pd, ed, binds)
        }
        _ => false,
    }
}

fn substitute(p: &Pattern, binds: &Bindings) -> FailureExpr {
    match p {
        Pattern::Var(v) => binds
            .get(v)
            .unwrap_or_else(|| panic!("unbound metavariable `{v}` in rule right-hand side"))
            .clone(),
        Pattern::Always => FailureExpr::Always,
        Pattern::Never => FailureExpr::Never,
        Pattern::Basic(name) => FailureExpr::Basic(name.clone()),
        Pattern::And(l, r) => FailureExpr::and(substitute(l, binds), substitute(r, binds)),
        Pattern::Or(l, r) => FailureExpr::or(substitute(l, binds), substitute(r, binds)),
        Pattern::Pand(l, r) => FailureExpr::pand(substitute(l, binds), substitute(r, binds)),
        Pattern::Fdep(l, r) => FailureExpr::fdep(substitute(l, binds), substitute(r, binds)),
        Pattern::Before(l, r) => FailureExpr::before(substitute(l, binds), substitute(r, binds)),
        Pattern::Simult(l, r) => FailureExpr::simult(substitute(l, binds), substitute(r, binds)),
        Pattern::InclBefore(l, r) => {
            FailureExpr::incl_before(substitute(l, binds), substitute(r, binds))
        }
        Pattern::Hsp(l, r) => FailureExpr::hsp(substitute(l, binds), substitute(r, binds)),
        Pattern::Csp(l, r) => FailureExpr::csp(substitute(l, binds), substitute(r, binds)),
        Pattern::Wsp(a, b, c) => FailureExpr::wsp(
            substitute(a, binds),
            substitute(b, binds),
            substitute(c, binds),
        ),
        Pattern::SharedSpare(a, b, c, d) => FailureExpr::shared_spare(
            substitute(a, binds),
            substitute(b, binds),
            substitute(c, binds),
            substitute(d, binds),
        ),
    }
}

fn side_holds(side: &Option<SideCondition>, binds: &Bindings) -> bool {
    match side {
        None => true,
        Some(SideCondition::DistinctBasics(vars)) => {
            let mut names: Vec<&str> = Vec::with_capacity(vars.len());
            for v in vars {
                match binds.get(v) {
                    Some(FailureExpr::Basic(name)) => names.push(name),
                    _ => return false,
                }
            }
            for i in 0..names.len() {
                for j in (i + 1)..names.len() {
                    if names[i] == names[j] {
                        return false;
                    }
                }
            }
            true
        }
    }
}

// ---------------------------------------------------------------------------
// Shipped rule sets

fn distinct(vars: &[&str]) -> SideCondition {
    SideCondition::DistinctBasics(vars.iter().map(|v| String::from(*v)).collect())
}

/// The default simplification rules.
pub fn default_rules() -> RuleSet {
    let x = || pvar("X");
    let y = || pvar("Y");
    let z = || pvar("Z");
    let rules = vec![
        // Identity elements.
        RewriteRule::new("and-never", pand(x(), Pattern::Never), Pattern::Never),
        RewriteRule::new("and-always", pand(x(), Pattern::Always), x()),
        RewriteRule::new("or-always", por(x(), Pattern::Always), Pattern::Always),
        RewriteRule::new("or-never", por(x(), Pattern::Never), x()),
        // Idempotence.
        RewriteRule::new("and-idem", pand(x(), x()), x()),
        RewriteRule::new("or-idem", por(x(), x()), x()),
        RewriteRule::new("simult-idem", psimult(x(), x()), x()),
        RewriteRule::new("before-idem", pbefore(x(), x()), Pattern::Never),
        RewriteRule::new("ibefore-idem", pibefore(x(), x()), x()),
        // Gate equivalences.
        RewriteRule::new(
            "fdep-or",
            Pattern::Fdep(Box::new(x()), Box::new(y())),
            por(x(), y()),
        ),
        RewriteRule::new(
            "hsp-and",
            Pattern::Hsp(Box::new(y()), Box::new(x())),
            pand(y(), x()),
        ),
        RewriteRule::new(
            "pand-seq",
            Pattern::Pand(Box::new(x()), Box::new(y())),
            pand(y(), pibefore(x(), y())),
        ),
        // Distribution of the before operators over or.
        RewriteRule::new(
            "before-or",
            pbefore(x(), por(y(), z())),
            pand(pbefore(x(), y()), pbefore(x(), z())),
        ),
        RewriteRule::new(
            "ibefore-or",
            pibefore(x(), por(y(), z())),
            pand(pibefore(x(), y()), pibefore(x(), z())),
        ),
        // Temporal absorptions.
        RewriteRule::new(
            "ibefore-simult",
            por(pibefore(x(), y()), psimult(x(), y())),
            pibefore(x(), y()),
        ),
        RewriteRule::new(
            "before-antisym",
            pand(pbefore(x(), y()), pbefore(y(), x())),
            Pattern::Never,
        ),
        RewriteRule::new("and-before-absorb", pand(x(), pbefore(x(), y())), pbefore(x(), y())),
        RewriteRule::new("before-never", pbefore(x(), Pattern::Never), x()),
        RewriteRule::new("ibefore-never", pibefore(x(), Pattern::Never), x()),
        // Almost-sure rules for distinct basic events with continuous laws.
        RewriteRule::with_side(
            "simult-distinct",
            psimult(x(), y()),
            Pattern::Never,
            distinct(&["X", "Y"]),
        ),
        RewriteRule::with_side(
            "ibefore-strict",
            pibefore(x(), y()),
            pbefore(x(), y()),
            distinct(&["X", "Y"]),
        ),
        // Spare-gate collapses.
        RewriteRule::new(
            "wsp-hot",
            Pattern::Wsp(Box::new(y()), Box::new(x()), Box::new(x())),
            pand(y(), x()),
        ),
        RewriteRule::with_side(
            "sspare-pair",
            pand(
                Pattern::SharedSpare(Box::new(x()), Box::new(y()), Box::new(z()), Box::new(z())),
                Pattern::SharedSpare(Box::new(y()), Box::new(x()), Box::new(z()), Box::new(z())),
            ),
            pand(x(), pand(y(), z())),
            distinct(&["X", "Y", "Z"]),
        ),
        // Chain-level factorization (needs AC matching).
        RewriteRule {
            name: "and-or-factor".into(),
            body: RuleBody::Builtin(Builtin::AndOrFactor),
            side: None,
        },
    ];
    RuleSet::new(rules)
}

/// The compound definitions of the warm and shared spare gates as rewrite
/// rules. Not part of [`default_rules`] — expanding a spare gate destroys
/// the shape the analytic evaluator matches on — but shipped so the
/// definitions themselves are oracle-checkable.
pub fn definitional_rules() -> RuleSet {
    let y = || pvar("Y");
    let xa = || pvar("Xa");
    let xd = || pvar("Xd");
    let rules = vec![
        RewriteRule::new(
            "wsp-expand",
            Pattern::Wsp(Box::new(y()), Box::new(xa()), Box::new(xd())),
            por(
                por(
                    por(
                        pand(y(), pbefore(xd(), y())),
                        pand(xa(), pbefore(y(), xa())),
                    ),
                    psimult(y(), xa()),
                ),
                psimult(y(), xd()),
            ),
        ),
        RewriteRule::new(
            "sspare-expand",
            Pattern::SharedSpare(
                Box::new(pvar("X")),
                Box::new(y()),
                Box::new(pvar("Za")),
                Box::new(pvar("Zd")),
            ),
            por(
                por(
                    pand(pvar("X"), pbefore(pvar("Zd"), pvar("X"))),
                    pand(pvar("Za"), pbefore(pvar("X"), pvar("Za"))),
                ),
                pand(pvar("X"), pbefore(y(), pvar("X"))),
            ),
        ),
    ];
    RuleSet::new(rules)
}

// ---------------------------------------------------------------------------
// Canonical form

/// Sorted, flattened normal form: `and`/`or` chains are right-nested with
/// operands in the canonical expression order, `simult` operands sorted.
pub fn canonicalize(e: &FailureExpr) -> FailureExpr {
    use FailureExpr::*;
    match e {
        Always | Never | Basic(_) => e.clone(),
        And(..) | Or(..) => {
            let is_and = matches!(e, And(..));
            let mut terms: Vec<FailureExpr> =
                e.chain_terms().into_iter().map(canonicalize).collect();
            terms.sort();
            if is_and {
                FailureExpr::and_chain(terms)
            } else {
                FailureExpr::or_chain(terms)
            }
        }
        Simult(l, r) => {
            let (l, r) = (canonicalize(l), canonicalize(r));
            if l <= r {
                FailureExpr::simult(l, r)
            } else {
                FailureExpr::simult(r, l)
            }
        }
        Pand(l, r) => FailureExpr::pand(canonicalize(l), canonicalize(r)),
        Fdep(l, r) => FailureExpr::fdep(canonicalize(l), canonicalize(r)),
        Before(l, r) => FailureExpr::before(canonicalize(l), canonicalize(r)),
        InclBefore(l, r) => FailureExpr::incl_before(canonicalize(l), canonicalize(r)),
        Hsp(l, r) => FailureExpr::hsp(canonicalize(l), canonicalize(r)),
        Csp(l, r) => FailureExpr::csp(canonicalize(l), canonicalize(r)),
        Wsp(a, b, c) => FailureExpr::wsp(canonicalize(a), canonicalize(b), canonicalize(c)),
        SharedSpare(a, b, c, d) => FailureExpr::shared_spare(
            canonicalize(a),
            canonicalize(b),
            canonicalize(c),
            canonicalize(d),
        ),
    }
}

// ---------------------------------------------------------------------------
// Engine

struct Engine<'a> {
    rules: &'a RuleSet,
    steps: usize,
    capped: bool,
}

/// Simplifies `expr` to a fixed point of `rules` (innermost first).
///
/// The result evaluates identically to the input on every assignment
/// (almost surely, for rules guarded by the distinct-basics condition)
/// and is in canonical chain form.
pub fn simplify(expr: &FailureExpr, rules: &RuleSet) -> Result<Simplified, RewriteError> {
    let mut eng = Engine {
        rules,
        steps: 0,
        capped: false,
    };
    let out = eng.simp(expr.clone());
    if eng.capped {
        Err(RewriteError::StepCapExceeded {
            partial: out,
            cap: rules.step_cap,
        })
    } else {
        Ok(Simplified {
            expr: out,
            steps: eng.steps,
        })
    }
}

impl Engine<'_> {
    fn budget_left(&mut self) -> bool {
        if self.steps >= self.rules.step_cap {
            self.capped = true;
            return false;
        }
        true
    }

    fn simp(&mut self, e: FailureExpr) -> FailureExpr {
        use FailureExpr::*;
        // Children first.
        let e = match e {
            Always | Never | Basic(_) => e,
            And(l, r) => FailureExpr::and(self.simp(*l), self.simp(*r)),
            Or(l, r) => FailureExpr::or(self.simp(*l), self.simp(*r)),
            Pand(l, r) => FailureExpr::pand(self.simp(*l), self.simp(*r)),
            Fdep(l, r) => FailureExpr::fdep(self.simp(*l), self.simp(*r)),
            Before(l, r) => FailureExpr::before(self.simp(*l), self.simp(*r)),
            Simult(l, r) => FailureExpr::simult(self.simp(*l), self.simp(*r)),
            InclBefore(l, r) => FailureExpr::incl_before(self.simp(*l), self.simp(*r)),
            Hsp(l, r) => FailureExpr::hsp(self.simp(*l), self.simp(*r)),
            Csp(l, r) => FailureExpr::csp(self.simp(*l), self.simp(*r)),
            Wsp(a, b, c) => FailureExpr::wsp(self.simp(*a), self.simp(*b), self.simp(*c)),
            SharedSpare(a, b, c, d) => FailureExpr::shared_spare(
                self.simp(*a),
                self.simp(*b),
                self.simp(*c),
                self.simp(*d),
            ),
        };
        if self.capped {
            return e;
        }
        let e = canonicalize_node(e);
        match self.apply_here(&e) {
            Some(next) if self.budget_was_spent_ok() => self.simp(next),
            Some(next) => next,
            None => e,
        }
    }

    // apply_here already incremented steps; re-simplify unless capped.
    fn budget_was_spent_ok(&self) -> bool {
        !self.capped
    }

    /// First applicable rewrite at this node, if any.
    fn apply_here(&mut self, e: &FailureExpr) -> Option<FailureExpr> {
        match e {
            FailureExpr::And(..) | FailureExpr::Or(..) => self.apply_chain(e),
            _ => self.apply_node(e),
        }
    }

    fn apply_node(&mut self, e: &FailureExpr) -> Option<FailureExpr> {
        if !self.budget_left() {
            return None;
        }
        for rule in &self.rules.rules {
            if let RuleBody::Rewrite { lhs, rhs } = &rule.body {
                let mut binds = Bindings::new();
                if match_pattern(lhs, e, &mut binds) && side_holds(&rule.side, &binds) {
                    self.steps += 1;
                    return Some(substitute(rhs, &binds));
                }
            }
        }
        None
    }

    fn apply_chain(&mut self, e: &FailureExpr) -> Option<FailureExpr> {
        if !self.budget_left() {
            return None;
        }
        let is_and = matches!(e, FailureExpr::And(..));
        let terms: Vec<FailureExpr> = e.chain_terms().into_iter().cloned().collect();
        for rule in &self.rules.rules {
            match &rule.body {
                RuleBody::Rewrite { lhs, rhs } => {
                    if !root_matches_chain(lhs, is_and) {
                        continue;
                    }
                    for i in 0..terms.len() {
                        for j in 0..terms.len() {
                            if i == j {
                                continue;
                            }
                            let cand = if is_and {
                                FailureExpr::and(terms[i].clone(), terms[j].clone())
                            } else {
                                FailureExpr::or(terms[i].clone(), terms[j].clone())
                            };
                            let mut binds = Bindings::new();
                            if match_pattern(lhs, &cand, &mut binds)
                                && side_holds(&rule.side, &binds)
                            {
                                self.steps += 1;
                                let repl = substitute(rhs, &binds);
                                return Some(rebuild_chain(&terms, i, j, repl, is_and));
                            }
                        }
                    }
                }
                RuleBody::Builtin(Builtin::AndOrFactor) => {
                    if !is_and {
                        continue;
                    }
                    for i in 0..terms.len() {
                        for j in (i + 1)..terms.len() {
                            if let Some(repl) = and_or_factor(&terms[i], &terms[j]) {
                                self.steps += 1;
                                return Some(rebuild_chain(&terms, i, j, repl, is_and));
                            }
                        }
                    }
                }
            }
        }
        None
    }
}

fn root_matches_chain(p: &Pattern, is_and: bool) -> bool {
    matches!(
        (p, is_and),
        (Pattern::And(..), true) | (Pattern::Or(..), false)
    )
}

fn rebuild_chain(
    terms: &[FailureExpr],
    i: usize,
    j: usize,
    repl: FailureExpr,
    is_and: bool,
) -> FailureExpr {
    let mut rest: Vec<FailureExpr> = terms
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != i && k != j)
        .map(|(_, t)| t.clone())
        .collect();
    rest.push(repl);
    if is_and {
        FailureExpr::and_chain(rest)
    } else {
        FailureExpr::or_chain(rest)
    }
}

fn or_elems(e: &FailureExpr) -> Vec<FailureExpr> {
    match e {
        FailureExpr::Or(..) => e.chain_terms().into_iter().cloned().collect(),
        other => vec![other.clone()],
    }
}

/// `max(min A, min B) = min(max(min A', min B'), min C)` where
/// `C = A ∩ B` (multiset) and `A'`, `B'` are the leftovers. Returns the
/// factored form when there is a common part and at least one real chain.
fn and_or_factor(x: &FailureExpr, y: &FailureExpr) -> Option<FailureExpr> {
    let xs = or_elems(x);
    let ys = or_elems(y);
    if xs.len() == 1 && ys.len() == 1 {
        return None;
    }
    let mut rest_y = ys.clone();
    let mut common = Vec::new();
    let mut rest_x = Vec::new();
    for e in xs {
        if let Some(pos) = rest_y.iter().position(|o| *o == e) {
            rest_y.remove(pos);
            common.push(e);
        } else {
            rest_x.push(e);
        }
    }
    if common.is_empty() {
        return None;
    }
    common.push(FailureExpr::and(
        FailureExpr::or_chain(rest_x),
        FailureExpr::or_chain(rest_y),
    ));
    Some(FailureExpr::or_chain(common))
}

fn canonicalize_node(e: FailureExpr) -> FailureExpr {
    use FailureExpr::*;
    match e {
        And(..) | Or(..) => {
            let is_and = matches!(e, And(..));
            let mut terms: Vec<FailureExpr> = e.chain_terms().into_iter().cloned().collect();
            terms.sort();
            if is_and {
                FailureExpr::and_chain(terms)
            } else {
                FailureExpr::or_chain(terms)
            }
        }
        Simult(l, r) => {
            if l <= r {
                Simult(l, r)
            } else {
                Simult(r, l)
            }
        }
        other => other,
    }
}

// ---------------------------------------------------------------------------
// Sampling equivalence oracle

/// How random assignments are drawn for equivalence checking.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SampleProfile {
    /// Continuous draws mixed with deliberate ties, zeros and infinities.
    Mixed,
    /// Pairwise-distinct strictly-positive finite draws, the sample space
    /// of rules guarded by the distinct-basics condition.
    DistinctContinuous,
}

#[derive(Clone, Debug)]
pub enum EquivVerdict {
    Equivalent {
        trials: usize,
    },
    Counterexample {
        assignment: Assignment,
        lhs: ExtTime,
        rhs: ExtTime,
    },
}

impl EquivVerdict {
    pub fn is_equivalent(&self) -> bool {
        matches!(self, EquivVerdict::Equivalent { .. })
    }
}

fn draw_assignment(names: &[&str], rng: &mut SampleRng, profile: SampleProfile) -> Assignment {
    let mut values: Vec<ExtTime> = Vec::with_capacity(names.len());
    for k in 0..names.len() {
        let t = match profile {
            SampleProfile::DistinctContinuous => loop {
                let cand = ExtTime::Finite(draw_positive(rng));
                if !values.contains(&cand) {
                    break cand;
                }
            },
            SampleProfile::Mixed => {
                let r = rng.next_f64();
                if r < 0.10 {
                    ExtTime::ZERO
                } else if r < 0.20 {
                    ExtTime::Infinity
                } else if r < 0.35 && k > 0 {
                    values[rng.next_below(k as u64) as usize]
                } else {
                    ExtTime::Finite(draw_positive(rng))
                }
            }
        };
        values.push(t);
    }
    names.iter().copied().zip(values).collect()
}

fn draw_positive(rng: &mut SampleRng) -> f64 {
    // Exponential spread keeps both small and large times common.
    -2.0 * libm::log(1.0 - rng.next_f64())
}

/// Samples `trials` assignments with the given profile and compares
/// evaluations exactly. Deterministic in `seed`.
pub fn check_equiv_with(
    e1: &FailureExpr,
    e2: &FailureExpr,
    trials: usize,
    seed: u64,
    profile: SampleProfile,
) -> EquivVerdict {
    assert!(trials >= 1, "at least one trial required");
    let mut names: Vec<String> = e1.basics().into_iter().collect();
    for n in e2.basics() {
        if !names.contains(&n) {
            names.push(n);
        }
    }
    names.sort();
    let name_refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();

    for trial in 0..trials {
        let mut rng = SampleRng::substream(seed, trial as u64);
        let a = draw_assignment(&name_refs, &mut rng, profile);
        let (lhs, rhs) = (
            e1.eval(&a).expect("assignment covers e1"),
            e2.eval(&a).expect("assignment covers e2"),
        );
        if lhs != rhs {
            return EquivVerdict::Counterexample {
                assignment: a,
                lhs,
                rhs,
            };
        }
    }
    EquivVerdict::Equivalent { trials }
}

/// Randomized equivalence check over the full assignment space (ties,
/// zeros and infinities included).
pub fn check_equiv(e1: &FailureExpr, e2: &FailureExpr, trials: usize, seed: u64) -> EquivVerdict {
    check_equiv_with(e1, e2, trials, seed, SampleProfile::Mixed)
}

/// Instances `(lhs, rhs)` of a rule with metavariables bound to fresh
/// basic events, suitable for soundness sampling.
pub fn rule_instances(rule: &RewriteRule) -> Vec<(FailureExpr, FailureExpr)> {
    match &rule.body {
        RuleBody::Rewrite { lhs, rhs } => {
            let l = lhs.instantiate_fresh();
            let binds: Bindings = lhs
                .vars()
                .into_iter()
                .map(|v| (v.clone(), FailureExpr::Basic(v)))
                .collect();
            vec![(l, substitute(rhs, &binds))]
        }
        RuleBody::Builtin(Builtin::AndOrFactor) => {
            let b = FailureExpr::basic;
            let pairs = [
                // (A + C) . (B + C)
                (
                    FailureExpr::or(b("A"), b("C")),
                    FailureExpr::or(b("B"), b("C")),
                ),
                // (A + B + C) . (B + C): common part of size two
                (
                    FailureExpr::or(b("A"), FailureExpr::or(b("B"), b("C"))),
                    FailureExpr::or(b("B"), b("C")),
                ),
                // A . (A + B): absorption via the empty leftover
                (b("A"), FailureExpr::or(b("A"), b("B"))),
            ];
            pairs
                .into_iter()
                .map(|(x, y)| {
                    let lhs = FailureExpr::and(x.clone(), y.clone());
                    let rhs = and_or_factor(&x, &y).expect("factor instance applies");
                    (lhs, rhs)
                })
                .collect()
        }
    }
}

/// Checks one rule against the evaluator on sampled assignments that
/// satisfy its side condition.
pub fn rule_soundness(rule: &RewriteRule, trials: usize, seed: u64) -> EquivVerdict {
    let profile = if rule.side.is_some() {
        SampleProfile::DistinctContinuous
    } else {
        SampleProfile::Mixed
    };
    for (i, (lhs, rhs)) in rule_instances(rule).into_iter().enumerate() {
        let v = check_equiv_with(&lhs, &rhs, trials, seed ^ (i as u64).wrapping_mul(0x9E37), profile);
        if !v.is_equivalent() {
            return v;
        }
    }
    EquivVerdict::Equivalent { trials }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;

    fn b(name: &str) -> FailureExpr {
        FailureExpr::basic(name)
    }

    fn simp(e: FailureExpr) -> FailureExpr {
        simplify(&e, &default_rules()).unwrap().expr
    }

    #[test]
    fn gate_equivalence_examples() {
        assert_eq!(simp(FailureExpr::fdep(b("X"), b("T"))), FailureExpr::or(b("T"), b("X")));
        assert_eq!(simp(FailureExpr::hsp(b("Y"), b("X"))), FailureExpr::and(b("X"), b("Y")));
        assert_eq!(simp(FailureExpr::and(b("X"), FailureExpr::Never)), FailureExpr::Never);
        assert_eq!(simp(FailureExpr::or(b("X"), b("X"))), b("X"));
    }

    #[test]
    fn pand_becomes_after_shape_for_distinct_basics() {
        let got = simp(FailureExpr::pand(b("MS"), b("MA")));
        let want = FailureExpr::and(b("MA"), FailureExpr::before(b("MS"), b("MA")));
        assert_eq!(got, want);
    }

    #[test]
    fn pand_on_identical_args_collapses_exactly() {
        // pand(A, A) fires at A; ibefore-idem and and-idem get there
        // without touching the almost-sure rules.
        assert_eq!(simp(FailureExpr::pand(b("A"), b("A"))), b("A"));
        // On a tie-capable pair of distinct subtrees the inclusive
        // operator must survive (only basics get the strictness rule).
        let sub = FailureExpr::and(b("A"), b("B"));
        let got = simp(FailureExpr::pand(sub.clone(), b("C")));
        assert_eq!(
            got,
            canonicalize(&FailureExpr::and(
                b("C"),
                FailureExpr::incl_before(sub, b("C"))
            ))
        );
    }

    #[test]
    fn simult_distinct_eliminated_identical_kept() {
        assert_eq!(simp(FailureExpr::simult(b("A"), b("B"))), FailureExpr::Never);
        assert_eq!(simp(FailureExpr::simult(b("A"), b("A"))), b("A"));
    }

    #[test]
    fn cpu_factorization() {
        // (P + CS + SS) . (B + CS + SS) = (P . B) + CS + SS
        let trig = FailureExpr::or(b("CS"), b("SS"));
        let e = FailureExpr::and(
            FailureExpr::or(b("P"), trig.clone()),
            FailureExpr::or(b("B"), trig),
        );
        let got = simp(e);
        let want = canonicalize(&FailureExpr::or(
            b("CS"),
            FailureExpr::or(b("SS"), FailureExpr::and(b("B"), b("P"))),
        ));
        assert_eq!(got, want);
    }

    #[test]
    fn shared_spare_pair_collapses() {
        let e = FailureExpr::and(
            FailureExpr::shared_spare(b("PA"), b("PB"), b("PS"), b("PS")),
            FailureExpr::shared_spare(b("PB"), b("PA"), b("PS"), b("PS")),
        );
        let got = simp(e);
        let want = canonicalize(&FailureExpr::and(b("PA"), FailureExpr::and(b("PB"), b("PS"))));
        assert_eq!(got, want);
    }

    #[test]
    fn wsp_hot_degenerates_to_and() {
        assert_eq!(
            simp(FailureExpr::wsp(b("Y"), b("X"), b("X"))),
            FailureExpr::and(b("X"), b("Y"))
        );
    }

    #[test]
    fn every_default_rule_is_sound() {
        for rule in default_rules().rules() {
            let v = rule_soundness(rule, 1000, 0xD0F7);
            assert!(v.is_equivalent(), "rule {} failed: {v:?}", rule.name);
        }
    }

    #[test]
    fn definitional_rules_are_sound() {
        for rule in definitional_rules().rules() {
            let v = rule_soundness(rule, 1000, 0xF00D);
            assert!(v.is_equivalent(), "rule {} failed: {v:?}", rule.name);
        }
    }

    #[test]
    fn check_equiv_finds_pand_asymmetry() {
        let v = check_equiv(
            &FailureExpr::pand(b("X"), b("Y")),
            &FailureExpr::pand(b("Y"), b("X")),
            1000,
            7,
        );
        assert!(!v.is_equivalent(), "PAND is order-sensitive");
    }

    #[test]
    fn check_equiv_idempotence() {
        let v = check_equiv(&b("X"), &FailureExpr::or(b("X"), b("X")), 10, 0);
        assert!(v.is_equivalent());
    }

    #[test]
    fn simplify_preserves_eval_on_samples() {
        // Metamorphic: simplify must not change evaluation anywhere the
        // almost-sure side conditions hold.
        let exprs = [
            FailureExpr::pand(b("A"), b("B")),
            FailureExpr::hsp(FailureExpr::fdep(b("P"), FailureExpr::or(b("C"), b("S"))), b("B")),
            FailureExpr::or(
                FailureExpr::and(b("A"), FailureExpr::before(b("B"), b("A"))),
                FailureExpr::and(b("A"), b("C")),
            ),
            FailureExpr::wsp(b("Y"), b("Xa"), b("Xd")),
        ];
        for (k, e) in exprs.iter().enumerate() {
            let s = simp(e.clone());
            let v = check_equiv_with(e, &s, 2000, 31 + k as u64, SampleProfile::DistinctContinuous);
            assert!(v.is_equivalent(), "{e} vs {s}: {v:?}");
        }
    }

    #[test]
    fn simplify_is_idempotent() {
        let exprs = [
            FailureExpr::pand(b("A"), b("B")),
            FailureExpr::and(
                FailureExpr::shared_spare(b("PA"), b("PB"), b("PS"), b("PS")),
                FailureExpr::shared_spare(b("PB"), b("PA"), b("PS"), b("PS")),
            ),
            FailureExpr::or(FailureExpr::fdep(b("X"), b("T")), FailureExpr::simult(b("X"), b("T"))),
        ];
        for e in exprs {
            let once = simp(e);
            let twice = simp(once.clone());
            assert_eq!(once, twice);
        }
    }

    #[test]
    fn step_cap_reports_partial() {
        let e = FailureExpr::pand(b("A"), b("B"));
        let rules = default_rules().with_step_cap(1);
        match simplify(&e, &rules) {
            Err(RewriteError::StepCapExceeded { partial, cap }) => {
                assert_eq!(cap, 1);
                // One application happened; the tree is mid-rewrite.
                assert_ne!(partial, e);
            }
            other => panic!("expected cap error, got {other:?}"),
        }
    }

    #[test]
    fn canonical_order_is_stable() {
        let e = FailureExpr::or(
            FailureExpr::and(b("MA"), b("MB")),
            FailureExpr::or(b("SS"), b("CS")),
        );
        assert_eq!(format!("{}", canonicalize(&e)), "or(CS, SS, and(MA, MB))");
    }
}
