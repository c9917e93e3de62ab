//! Analytic top-event probabilities.
//!
//! `Pr(top fails by t)` is computed by simplifying the structure function
//! to a union (`or` chain) of evaluable terms, expanding the union by the
//! probabilistic principle of inclusion–exclusion, and evaluating each
//! signed intersection from the gate probability formulas:
//!
//! * products of CDFs for independent conjunctions,
//! * `∫₀ᵗ f_Y F_X` for an ordered pair (the priority-AND shape),
//! * `∫₀ᵗ f_X (1 − F_Y)` for the before operator,
//! * nested conditional-density integrals for cold and warm spares.
//!
//! Intersections run in one of two modes. `Exact` conjoins the subset's
//! expressions, re-simplifies and factorizes over independent component
//! groups, which stays correct when union terms share basic events.
//! `PaperFaithful` multiplies the terms' individual probabilities
//! unconditionally. Both are reported so the divergence on shared-event
//! unions is visible rather than silent.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::cell::{Cell, RefCell};
use core::fmt;

use crate::dist::{ConditionalLaw, Distribution};
use crate::expr::FailureExpr;
use crate::model::{DftModel, ModelError};
use crate::quad::{integrate, QuadError, QuadResult};
use crate::rewrite::{default_rules, simplify, RewriteError, RuleSet};

/// Tolerances for the quadrature-backed gate formulas.
#[derive(Clone, Copy, Debug)]
pub struct QuadratureConfig {
    /// Absolute tolerance per integral; nested inner integrals run at a
    /// tenth of it.
    pub tol: f64,
    pub max_depth: u32,
    /// Improper upper limits are truncated where the integrating
    /// density's remaining mass falls below this.
    pub tail_mass: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            tol: 1e-10,
            max_depth: 60,
            tail_mass: 1e-14,
        }
    }
}

/// How subset intersections are evaluated in the PIE expansion.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Mode {
    #[default]
    Exact,
    PaperFaithful,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Exact => write!(f, "exact"),
            Mode::PaperFaithful => write!(f, "paper"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Analytic,
    MonteCarlo,
    Both,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Analytic => write!(f, "analytic"),
            Method::MonteCarlo => write!(f, "mc"),
            Method::Both => write!(f, "both"),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ProbConfig {
    pub quad: QuadratureConfig,
    pub mode: Mode,
    /// Union sizes beyond this are rejected (2^n - 1 PIE terms).
    pub max_union_terms: usize,
}

pub const DEFAULT_MAX_UNION_TERMS: usize = 20;

impl Default for ProbConfig {
    fn default() -> Self {
        ProbConfig {
            quad: QuadratureConfig::default(),
            mode: Mode::Exact,
            max_union_terms: DEFAULT_MAX_UNION_TERMS,
        }
    }
}

/// An analytic probability with its numerical-error bookkeeping.
#[derive(Clone, Copy, Debug)]
pub struct ProbResult {
    pub value: f64,
    pub method: Method,
    pub mode: Mode,
    /// Conservative absolute bound on the quadrature error.
    pub quad_error: f64,
    pub mc_half_width: Option<f64>,
    /// Signed PIE terms evaluated (2^n - 1 for an n-term union).
    pub term_count: usize,
}

#[derive(Clone, Debug)]
pub enum ProbError {
    /// No analytic pattern covers this subexpression; use the
    /// Monte-Carlo path instead.
    UnmatchedPattern(String),
    TermExplosion { terms: usize, max: usize },
    Quadrature(QuadError),
    Rewrite(RewriteError),
    Model(ModelError),
    InvalidTime(f64),
    /// The signed sum left [0, 1] by more than the numerical slack.
    BoundsViolated { value: f64 },
}

impl fmt::Display for ProbError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProbError::UnmatchedPattern(e) => {
                write!(f, "no analytic formula for `{e}` (use the Monte-Carlo method)")
            }
            ProbError::TermExplosion { terms, max } => write!(
                f,
                "union of {terms} terms exceeds the cap of {max} (2^n - 1 PIE terms); \
                 raise the cap or use the Monte-Carlo method"
            ),
            ProbError::Quadrature(e) => write!(f, "{e}"),
            ProbError::Rewrite(e) => write!(f, "{e}"),
            ProbError::Model(e) => write!(f, "{e}"),
            ProbError::InvalidTime(t) => write!(f, "time must be >= 0, got {t}"),
            ProbError::BoundsViolated { value } => {
                write!(f, "probability {value} outside [0, 1] beyond numerical slack")
            }
        }
    }
}

impl From<QuadError> for ProbError {
    fn from(e: QuadError) -> Self {
        ProbError::Quadrature(e)
    }
}

impl From<RewriteError> for ProbError {
    fn from(e: RewriteError) -> Self {
        ProbError::Rewrite(e)
    }
}

impl From<ModelError> for ProbError {
    fn from(e: ModelError) -> Self {
        ProbError::Model(e)
    }
}

// ---------------------------------------------------------------------------
// Gate probability formulas

/// `Pr(X < Y and Y <= t) = ∫₀ᵗ f_Y(u) F_X(u) du` — the priority-AND
/// probability for basic events.
pub fn after_prob(
    x: &Distribution,
    y: &Distribution,
    t: f64,
    cfg: &QuadratureConfig,
) -> Result<QuadResult, ProbError> {
    if t < 0.0 {
        return Err(ProbError::InvalidTime(t));
    }
    let (upper, trunc) = truncated_upper(y, t, cfg);
    let r = integrate(&|u| y.pdf(u) * x.cdf(u), 0.0, upper, cfg.tol, cfg.max_depth)?;
    Ok(QuadResult {
        value: r.value,
        error: r.error + trunc,
    })
}

/// `Pr(X < Y and X <= t) = ∫₀ᵗ f_X(u)(1 - F_Y(u)) du`. The improper
/// inner tail `∫ f_Y` is the CDF complement, never quadrature to
/// infinity.
pub fn before_prob(
    x: &Distribution,
    y: &Distribution,
    t: f64,
    cfg: &QuadratureConfig,
) -> Result<QuadResult, ProbError> {
    if t < 0.0 {
        return Err(ProbError::InvalidTime(t));
    }
    let (upper, trunc) = truncated_upper(x, t, cfg);
    let r = integrate(&|u| x.pdf(u) * (1.0 - y.cdf(u)), 0.0, upper, cfg.tol, cfg.max_depth)?;
    Ok(QuadResult {
        value: r.value,
        error: r.error + trunc,
    })
}

/// Cold-spare probability: `∫₀ᵗ (∫ᵥᵗ f(u | activated at v) du) f_Y(v) dv`
/// by nested adaptive quadrature (inner at a tenth of the tolerance).
pub fn csp_prob(
    main: &Distribution,
    spare: &ConditionalLaw,
    t: f64,
    cfg: &QuadratureConfig,
) -> Result<QuadResult, ProbError> {
    conditional_activation_prob(main, spare, None, t, cfg)
}

/// Warm-spare probability: the cold-spare double integral with the
/// dormant-survival factor `1 - F_dormant(v)` (the spare must still be
/// dormant-alive at activation; it fails in exactly one state), plus the
/// disjoint dormant-first scenario `∫₀ᵗ f_Y(u) F_dormant(u) du`.
pub fn wsp_prob(
    main: &Distribution,
    spare_active: &ConditionalLaw,
    spare_dormant: &Distribution,
    t: f64,
    cfg: &QuadratureConfig,
) -> Result<QuadResult, ProbError> {
    let active_part = conditional_activation_prob(main, spare_active, Some(spare_dormant), t, cfg)?;
    let dormant_part = after_prob(spare_dormant, main, t, cfg)?;
    Ok(QuadResult {
        value: active_part.value + dormant_part.value,
        error: active_part.error + dormant_part.error,
    })
}

fn conditional_activation_prob(
    main: &Distribution,
    spare: &ConditionalLaw,
    dormant: Option<&Distribution>,
    t: f64,
    cfg: &QuadratureConfig,
) -> Result<QuadResult, ProbError> {
    if t < 0.0 {
        return Err(ProbError::InvalidTime(t));
    }
    if t == 0.0 {
        return Ok(QuadResult { value: 0.0, error: 0.0 });
    }
    let (upper, trunc) = truncated_upper(main, t, cfg);
    let inner_tol = cfg.tol / 10.0;
    let inner_failure: Cell<Option<QuadError>> = Cell::new(None);
    let g = |v: f64| {
        let survival = dormant.map_or(1.0, |d| 1.0 - d.cdf(v));
        if survival == 0.0 {
            return 0.0;
        }
        match integrate(&|u| spare.cond_pdf(v, u), v, t, inner_tol, cfg.max_depth) {
            Ok(inner) => main.pdf(v) * survival * inner.value,
            Err(e) => {
                inner_failure.set(Some(e));
                0.0
            }
        }
    };
    let outer = integrate(&g, 0.0, upper, cfg.tol, cfg.max_depth)?;
    if let Some(e) = inner_failure.get() {
        return Err(ProbError::Quadrature(e));
    }
    Ok(QuadResult {
        value: outer.value,
        // Inner integrals contribute at most their tolerance against a
        // unit outer density mass.
        error: outer.error + inner_tol + trunc,
    })
}

fn truncated_upper(density_of: &Distribution, t: f64, cfg: &QuadratureConfig) -> (f64, f64) {
    let h = density_of.horizon(cfg.tail_mass);
    if h < t {
        (h, cfg.tail_mass)
    } else {
        (t, 0.0)
    }
}

// ---------------------------------------------------------------------------
// Inclusion–exclusion

/// All nonempty subsets of an `n`-term union as `(bitmask, sign)` in
/// ascending bitmask order, sign `(-1)^(|S|+1)`.
pub fn pie_expand(n: usize, max: usize) -> Result<Vec<(u64, i8)>, ProbError> {
    if n > max {
        return Err(ProbError::TermExplosion { terms: n, max });
    }
    assert!(n >= 1 && n < 64, "union size {n} out of range");
    let mut out = Vec::with_capacity((1usize << n) - 1);
    for mask in 1u64..(1u64 << n) {
        let sign = if mask.count_ones() % 2 == 1 { 1 } else { -1 };
        out.push((mask, sign));
    }
    Ok(out)
}

/// One evaluated signed term of the PIE expansion.
#[derive(Clone, Copy, Debug)]
pub struct PieTerm {
    pub mask: u64,
    pub sign: i8,
    pub prob: f64,
    pub err: f64,
}

/// An atomic analytically-evaluable event shape.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum EvaluableAtom {
    /// One basic event: its CDF.
    Cdf(String),
    /// Independent basics in conjunction: a CDF product.
    Product(Vec<String>),
    /// `Y and (X before Y)`: the ordered-failure integral.
    After { x: String, y: String },
    /// Bare before operator.
    Before { x: String, y: String },
    Csp { main: String, spare: String },
    Wsp {
        main: String,
        spare_active: String,
        spare_dormant: String,
    },
}

struct Evaluator<'m> {
    model: &'m DftModel,
    rules: RuleSet,
    quad: QuadratureConfig,
    t: f64,
    /// Resolved activation mains per spare binding (index-aligned).
    resolved_mains: Vec<Vec<FailureExpr>>,
    cache: RefCell<BTreeMap<EvaluableAtom, (f64, f64)>>,
}

impl<'m> Evaluator<'m> {
    fn new(model: &'m DftModel, t: f64, quad: QuadratureConfig) -> Result<Self, ProbError> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(ProbError::InvalidTime(t));
        }
        let resolved_mains = model
            .spares
            .iter()
            .map(|b| b.mains.iter().map(|m| model.resolve(m)).collect::<Result<Vec<_>, _>>())
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Evaluator {
            model,
            rules: default_rules(),
            quad,
            t,
            resolved_mains,
            cache: RefCell::new(BTreeMap::new()),
        })
    }

    fn law(&self, name: &str) -> Option<&Distribution> {
        self.model.laws.get(name)
    }

    fn binding_index(&self, active_var: &str) -> Option<usize> {
        self.model.spares.iter().position(|b| b.active_var == active_var)
    }

    /// Decomposes a union term into the atoms of its independent
    /// component groups.
    fn match_term(&self, term: &FailureExpr) -> Result<Vec<EvaluableAtom>, ProbError> {
        let unmatched = || ProbError::UnmatchedPattern(format!("{term}"));
        let factors: Vec<&FailureExpr> = match term {
            FailureExpr::And(..) => term.chain_terms(),
            other => vec![other],
        };

        // Group factors into connected components by shared basic events;
        // distinct declared basics are independent, so components multiply.
        let mut comps: Vec<(BTreeSet<String>, Vec<&FailureExpr>)> = Vec::new();
        for f in factors {
            let bs = f.basics();
            let mut merged: (BTreeSet<String>, Vec<&FailureExpr>) = (bs, vec![f]);
            let mut keep = Vec::with_capacity(comps.len());
            for (cb, cf) in comps.drain(..) {
                if cb.intersection(&merged.0).next().is_some() {
                    merged.0.extend(cb);
                    let mut cf = cf;
                    cf.extend(merged.1.drain(..));
                    merged.1 = cf;
                } else {
                    keep.push((cb, cf));
                }
            }
            keep.push(merged);
            comps = keep;
        }

        let mut singles: Vec<String> = Vec::new();
        let mut atoms: Vec<EvaluableAtom> = Vec::new();
        for (_, fs) in &comps {
            match self.match_component(fs) {
                Some(EvaluableAtom::Cdf(name)) => singles.push(name),
                Some(atom) => atoms.push(atom),
                None => return Err(unmatched()),
            }
        }
        singles.sort();
        match singles.len() {
            0 => {}
            1 => atoms.push(EvaluableAtom::Cdf(singles.pop().expect("one element"))),
            _ => atoms.push(EvaluableAtom::Product(singles)),
        }
        atoms.sort();
        if atoms.is_empty() {
            return Err(unmatched());
        }
        Ok(atoms)
    }

    fn match_component(&self, fs: &[&FailureExpr]) -> Option<EvaluableAtom> {
        match fs {
            [single] => self.match_single(single),
            [a, b] => self.match_after_pair(a, b).or_else(|| self.match_after_pair(b, a)),
            _ => None,
        }
    }

    fn match_single(&self, e: &FailureExpr) -> Option<EvaluableAtom> {
        match e {
            FailureExpr::Basic(x) => {
                self.law(x)?;
                Some(EvaluableAtom::Cdf(x.clone()))
            }
            FailureExpr::Before(l, r) => {
                let (x, y) = (basic_name(l)?, basic_name(r)?);
                if x == y {
                    return None;
                }
                self.law(x)?;
                self.law(y)?;
                Some(EvaluableAtom::Before { x: x.into(), y: y.into() })
            }
            FailureExpr::Csp(main, spare) => {
                let (m, s) = (basic_name(main)?, basic_name(spare)?);
                self.law(m)?;
                let bi = self.binding_index(s)?;
                let b = &self.model.spares[bi];
                if b.dormant_var.is_some() {
                    return None;
                }
                if self.resolved_mains[bi].as_slice() != [FailureExpr::basic(m)] {
                    return None;
                }
                Some(EvaluableAtom::Csp { main: m.into(), spare: s.into() })
            }
            FailureExpr::Wsp(main, xa, xd) => {
                let (m, a, d) = (basic_name(main)?, basic_name(xa)?, basic_name(xd)?);
                self.law(m)?;
                self.law(d)?;
                let bi = self.binding_index(a)?;
                let b = &self.model.spares[bi];
                if b.dormant_var.as_deref() != Some(d) {
                    return None;
                }
                if self.resolved_mains[bi].as_slice() != [FailureExpr::basic(m)] {
                    return None;
                }
                Some(EvaluableAtom::Wsp {
                    main: m.into(),
                    spare_active: a.into(),
                    spare_dormant: d.into(),
                })
            }
            _ => None,
        }
    }

    /// `Y . (X before Y)` over distinct basics.
    fn match_after_pair(&self, y: &FailureExpr, bef: &FailureExpr) -> Option<EvaluableAtom> {
        let yn = basic_name(y)?;
        if let FailureExpr::Before(l, r) = bef {
            let (x, y2) = (basic_name(l)?, basic_name(r)?);
            if y2 == yn && x != yn && self.law(x).is_some() && self.law(yn).is_some() {
                return Some(EvaluableAtom::After { x: x.into(), y: yn.into() });
            }
        }
        None
    }

    fn atom_prob(&self, atom: &EvaluableAtom) -> Result<(f64, f64), ProbError> {
        if let Some(hit) = self.cache.borrow().get(atom) {
            return Ok(*hit);
        }
        let t = self.t;
        let law = |n: &str| {
            self.law(n)
                .copied()
                .ok_or_else(|| ProbError::Model(ModelError::MissingDistribution(n.into())))
        };
        let out = match atom {
            EvaluableAtom::Cdf(x) => (law(x)?.cdf(t), 0.0),
            EvaluableAtom::Product(xs) => {
                let mut v = 1.0;
                for x in xs {
                    v *= law(x)?.cdf(t);
                }
                (v, 0.0)
            }
            EvaluableAtom::After { x, y } => {
                let r = after_prob(&law(x)?, &law(y)?, t, &self.quad)?;
                (r.value, r.error)
            }
            EvaluableAtom::Before { x, y } => {
                let r = before_prob(&law(x)?, &law(y)?, t, &self.quad)?;
                (r.value, r.error)
            }
            EvaluableAtom::Csp { main, spare } => {
                let b = self
                    .model
                    .binding_for(spare)
                    .ok_or_else(|| ProbError::Model(ModelError::MissingConditionalLaw(spare.clone())))?;
                let r = csp_prob(&law(main)?, &b.law, t, &self.quad)?;
                (r.value, r.error)
            }
            EvaluableAtom::Wsp {
                main,
                spare_active,
                spare_dormant,
            } => {
                let b = self.model.binding_for(spare_active).ok_or_else(|| {
                    ProbError::Model(ModelError::MissingConditionalLaw(spare_active.clone()))
                })?;
                let r = wsp_prob(&law(main)?, &b.law, &law(spare_dormant)?, t, &self.quad)?;
                (r.value, r.error)
            }
        };
        self.cache.borrow_mut().insert(atom.clone(), out);
        Ok(out)
    }

    fn atoms_prob(&self, atoms: &[EvaluableAtom]) -> Result<(f64, f64), ProbError> {
        let mut value = 1.0;
        let mut err = 0.0;
        for a in atoms {
            let (v, e) = self.atom_prob(a)?;
            value *= v;
            err += e;
        }
        Ok((value, err))
    }

    /// Exact intersection probability of a set of union terms: conjoin,
    /// re-simplify, factorize over independent components.
    fn exact_intersection(&self, terms: &[&FailureExpr]) -> Result<(f64, f64), ProbError> {
        let merged = FailureExpr::and_chain(terms.iter().map(|t| (*t).clone()).collect());
        let simplified = simplify(&merged, &self.rules)?.expr;
        match simplified {
            FailureExpr::Never => Ok((0.0, 0.0)),
            FailureExpr::Always => Ok((1.0, 0.0)),
            other => {
                let atoms = self.match_term(&other)?;
                self.atoms_prob(&atoms)
            }
        }
    }
}

fn basic_name(e: &FailureExpr) -> Option<&str> {
    match e {
        FailureExpr::Basic(n) => Some(n),
        _ => None,
    }
}

/// The simplified top event as a list of union terms.
///
/// `degenerate` short-circuits when simplification reaches `Never`
/// (probability 0) or `Always` (probability 1).
#[derive(Clone, Debug)]
pub struct UnionTerms {
    pub terms: Vec<FailureExpr>,
    pub degenerate: Option<f64>,
}

/// Simplifies the model's top event and splits the resulting `or` chain.
pub fn union_terms(model: &DftModel, rules: &RuleSet) -> Result<UnionTerms, ProbError> {
    let resolved = model.resolve_top()?;
    let simplified = simplify(&resolved, rules)?.expr;
    match &simplified {
        FailureExpr::Never => Ok(UnionTerms {
            terms: Vec::new(),
            degenerate: Some(0.0),
        }),
        FailureExpr::Always => Ok(UnionTerms {
            terms: vec![FailureExpr::Always],
            degenerate: Some(1.0),
        }),
        FailureExpr::Or(..) => Ok(UnionTerms {
            terms: simplified.chain_terms().into_iter().cloned().collect(),
            degenerate: None,
        }),
        other => Ok(UnionTerms {
            terms: vec![other.clone()],
            degenerate: None,
        }),
    }
}

/// Probability of the intersection of `terms` at time `t` in the given
/// mode. In paper-faithful mode this is the product of the terms'
/// individual probabilities even when they share basic events.
pub fn intersect_prob(
    model: &DftModel,
    terms: &[FailureExpr],
    t: f64,
    cfg: &QuadratureConfig,
    mode: Mode,
) -> Result<(f64, f64), ProbError> {
    let ev = Evaluator::new(model, t, *cfg)?;
    match mode {
        Mode::Exact => {
            let refs: Vec<&FailureExpr> = terms.iter().collect();
            ev.exact_intersection(&refs)
        }
        Mode::PaperFaithful => {
            let mut value = 1.0;
            let mut err = 0.0;
            for term in terms {
                let atoms = ev.match_term(term)?;
                let (v, e) = ev.atoms_prob(&atoms)?;
                value *= v;
                err += e;
            }
            Ok((value, err))
        }
    }
}

/// The full signed PIE expansion of the model at `t`, plus the union-term
/// list it was expanded from (terms in canonical order).
pub fn pie_breakdown(
    model: &DftModel,
    t: f64,
    cfg: &ProbConfig,
) -> Result<(UnionTerms, Vec<PieTerm>), ProbError> {
    let ev = Evaluator::new(model, t, cfg.quad)?;
    let union = union_terms(model, &ev.rules)?;
    if union.degenerate.is_some() {
        return Ok((union, Vec::new()));
    }
    let n = union.terms.len();
    if n > cfg.max_union_terms {
        return Err(ProbError::TermExplosion {
            terms: n,
            max: cfg.max_union_terms,
        });
    }

    // Per-term atoms and probabilities are shared by both modes.
    let mut term_probs: Vec<(f64, f64)> = Vec::with_capacity(n);
    for term in &union.terms {
        let atoms = ev.match_term(term)?;
        term_probs.push(ev.atoms_prob(&atoms)?);
    }

    let mut out = Vec::with_capacity((1usize << n) - 1);
    for (mask, sign) in pie_expand(n, cfg.max_union_terms)? {
        let members: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let (prob, err) = if members.len() == 1 {
            term_probs[members[0]]
        } else {
            match cfg.mode {
                Mode::Exact => {
                    let refs: Vec<&FailureExpr> =
                        members.iter().map(|&i| &union.terms[i]).collect();
                    ev.exact_intersection(&refs)?
                }
                Mode::PaperFaithful => {
                    let mut v = 1.0;
                    let mut e = 0.0;
                    for &i in &members {
                        v *= term_probs[i].0;
                        e += term_probs[i].1;
                    }
                    (v, e)
                }
            }
        };
        out.push(PieTerm {
            mask,
            sign,
            prob,
            err,
        });
    }
    Ok((union, out))
}

/// `Pr(top event fails by t)` analytically.
///
/// The signed subset sum runs in ascending bitmask order so results are
/// bit-stable however the per-subset work is scheduled.
pub fn dft_event_prob(model: &DftModel, t: f64, cfg: &ProbConfig) -> Result<ProbResult, ProbError> {
    let (union, pie) = pie_breakdown(model, t, cfg)?;
    if let Some(v) = union.degenerate {
        return Ok(ProbResult {
            value: v,
            method: Method::Analytic,
            mode: cfg.mode,
            quad_error: 0.0,
            mc_half_width: None,
            term_count: union.terms.len(),
        });
    }
    let mut value = 0.0;
    let mut err = 0.0;
    for term in &pie {
        value += term.sign as f64 * term.prob;
        err += term.err;
    }
    let slack = err + 1e-12;
    if value < -slack || value > 1.0 + slack {
        return Err(ProbError::BoundsViolated { value });
    }
    Ok(ProbResult {
        value: value.clamp(0.0, 1.0),
        method: Method::Analytic,
        mode: cfg.mode,
        quad_error: err,
        mc_half_width: None,
        term_count: pie.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SpareBinding;
    use libm::exp;

    fn exp_law(rate: f64) -> Distribution {
        Distribution::exponential(rate).unwrap()
    }

    fn quad() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    /// Two independent exponentials bound to a top expression.
    fn two_basic_model(top: FailureExpr, la: f64, lb: f64) -> DftModel {
        let mut m = DftModel::new("T");
        m.definitions.insert("T".into(), top);
        m.laws.insert("a".into(), exp_law(la));
        m.laws.insert("b".into(), exp_law(lb));
        m
    }

    fn b(name: &str) -> FailureExpr {
        FailureExpr::basic(name)
    }

    fn prob(model: &DftModel, t: f64) -> ProbResult {
        dft_event_prob(model, t, &ProbConfig::default()).unwrap()
    }

    #[test]
    fn single_basic_is_the_cdf() {
        let m = two_basic_model(b("a"), 1.0, 2.0);
        let r = prob(&m, 1.0);
        assert!((r.value - (1.0 - exp(-1.0))).abs() < 1e-10);
        assert_eq!(r.term_count, 1);
        assert_eq!(prob(&m, 0.0).value, 0.0);
    }

    #[test]
    fn and_or_closed_forms() {
        let fa = 1.0 - exp(-1.0);
        let fb = 1.0 - exp(-2.0);
        let m = two_basic_model(FailureExpr::and(b("a"), b("b")), 1.0, 2.0);
        assert!((prob(&m, 1.0).value - fa * fb).abs() < 1e-12);

        let m = two_basic_model(FailureExpr::or(b("a"), b("b")), 1.0, 2.0);
        let r = prob(&m, 1.0);
        assert!((r.value - (fa + fb - fa * fb)).abs() < 1e-12);
        assert_eq!(r.term_count, 3);
    }

    // Closed form of eq-after for two exponentials.
    fn after_closed(l1: f64, l2: f64, t: f64) -> f64 {
        (1.0 - exp(-l2 * t)) - l2 / (l1 + l2) * (1.0 - exp(-(l1 + l2) * t))
    }

    #[test]
    fn after_integral_against_closed_form() {
        let x = exp_law(1.0);
        let y = exp_law(2.0);
        let r = after_prob(&x, &y, 1.0, &quad()).unwrap();
        assert!((r.value - after_closed(1.0, 2.0, 1.0)).abs() < 1e-10);
        assert_eq!(after_prob(&x, &y, 0.0, &quad()).unwrap().value, 0.0);
        // Identically distributed inputs race to 1/2.
        let r = after_prob(&x, &exp_law(1.0), 50.0, &quad()).unwrap();
        assert!((r.value - 0.5).abs() < 1e-6);
    }

    #[test]
    fn before_integral_race_probability() {
        let x = exp_law(1.0);
        let y = exp_law(2.0);
        let r = before_prob(&x, &y, 50.0, &quad()).unwrap();
        assert!((r.value - 1.0 / 3.0).abs() < 1e-6);
        assert_eq!(before_prob(&x, &y, 0.0, &quad()).unwrap().value, 0.0);
    }

    #[test]
    fn before_after_partition_identity() {
        // Pr(X<Y, X<=t) + Pr(Y<X, X<=t) = F_X(t) for continuous laws.
        let x = exp_law(1.0);
        let y = exp_law(2.0);
        for t in [0.3, 1.0, 4.0] {
            let s = before_prob(&x, &y, t, &quad()).unwrap().value
                + after_prob(&y, &x, t, &quad()).unwrap().value;
            assert!((s - x.cdf(t)).abs() < 1e-8, "t={t}");
        }
    }

    #[test]
    fn csp_erlang_closed_form() {
        let main = exp_law(1.0);
        let law = ConditionalLaw::memoryless_activation(&exp_law(1.0)).unwrap();
        let r = csp_prob(&main, &law, 1.0, &quad()).unwrap();
        // Erlang-2 CDF at 1.
        assert!((r.value - (1.0 - 2.0 * exp(-1.0))).abs() < 1e-9, "got {}", r.value);
        assert_eq!(csp_prob(&main, &law, 0.0, &quad()).unwrap().value, 0.0);
    }

    #[test]
    fn csp_fast_spare_limit() {
        // A spare that fails almost instantly after activation makes the
        // gate probability approach the main's CDF.
        let main = exp_law(1.0);
        let law = ConditionalLaw::memoryless_activation(&exp_law(1e4)).unwrap();
        let r = csp_prob(&main, &law, 1.0, &quad()).unwrap();
        assert!((r.value - main.cdf(1.0)).abs() < 1e-3);
    }

    #[test]
    fn wsp_alpha_one_is_and() {
        // Dormant law identical to the active law: the gate degenerates
        // to AND for memoryless laws.
        let main = exp_law(1.0);
        let spare = exp_law(1.0);
        let law = ConditionalLaw::memoryless_activation(&spare).unwrap();
        let r = wsp_prob(&main, &law, &spare, 1.0, &quad()).unwrap();
        let want = main.cdf(1.0) * spare.cdf(1.0);
        assert!((r.value - want).abs() < 1e-9, "got {} want {want}", r.value);
    }

    #[test]
    fn wsp_alpha_to_zero_is_csp() {
        let main = exp_law(1.0);
        let active = exp_law(1.0);
        let dormant = active.dormant_variant(1e-6).unwrap();
        let law = ConditionalLaw::memoryless_activation(&active).unwrap();
        let w = wsp_prob(&main, &law, &dormant, 1.0, &quad()).unwrap();
        let c = csp_prob(&main, &law, 1.0, &quad()).unwrap();
        assert!((w.value - c.value).abs() < 1e-4);
    }

    #[test]
    fn pie_expand_bookkeeping() {
        assert_eq!(pie_expand(1, 20).unwrap(), vec![(1, 1)]);
        let two = pie_expand(2, 20).unwrap();
        assert_eq!(two, vec![(0b01, 1), (0b10, 1), (0b11, -1)]);
        assert_eq!(pie_expand(6, 20).unwrap().len(), 63);
        assert!(matches!(
            pie_expand(21, 20),
            Err(ProbError::TermExplosion { terms: 21, max: 20 })
        ));
    }

    #[test]
    fn exact_vs_paper_on_shared_event_terms() {
        // Union terms and(MA, before(MS, MA)) and and(MA, MB) share MA.
        let mut m = DftModel::new("T");
        m.definitions.insert(
            "T".into(),
            FailureExpr::or(
                FailureExpr::and(b("MA"), FailureExpr::before(b("MS"), b("MA"))),
                FailureExpr::and(b("MA"), b("MB")),
            ),
        );
        for (n, r) in [("MA", 1.0), ("MS", 2.0), ("MB", 0.5)] {
            m.laws.insert(n.into(), exp_law(r));
        }
        let t = 1.0;
        let after = after_prob(&exp_law(2.0), &exp_law(1.0), t, &quad()).unwrap().value;
        let f_ma = exp_law(1.0).cdf(t);
        let f_mb = exp_law(0.5).cdf(t);

        let terms = [
            FailureExpr::and(b("MA"), FailureExpr::before(b("MS"), b("MA"))),
            FailureExpr::and(b("MA"), b("MB")),
        ];
        // Exact: merged conjunction MA.MB.(MS before MA) factorizes into
        // the after integral times F_MB.
        let (exact, _) = intersect_prob(&m, &terms, t, &quad(), Mode::Exact).unwrap();
        assert!((exact - after * f_mb).abs() < 1e-9);
        // Paper-faithful: plain product keeps the extra F_MA.
        let (paper, _) = intersect_prob(&m, &terms, t, &quad(), Mode::PaperFaithful).unwrap();
        assert!((paper - after * f_ma * f_mb).abs() < 1e-9);
        assert!((exact - paper).abs() > 1e-3);

        // Full union probabilities differ between modes accordingly.
        let pe = dft_event_prob(&m, t, &ProbConfig::default()).unwrap();
        let pp = dft_event_prob(
            &m,
            t,
            &ProbConfig {
                mode: Mode::PaperFaithful,
                ..ProbConfig::default()
            },
        )
        .unwrap();
        let delta = exact - paper;
        assert!(((pe.value - pp.value) + delta).abs() < 1e-9);
    }

    #[test]
    fn monotone_in_time() {
        let m = two_basic_model(
            FailureExpr::or(FailureExpr::and(b("a"), b("b")), FailureExpr::pand(b("a"), b("b"))),
            1.0,
            0.7,
        );
        let mut last = 0.0;
        for t in [0.0, 0.25, 0.5, 1.0, 2.0, 5.0, 10.0] {
            let v = prob(&m, t).value;
            assert!(v + 1e-12 >= last, "not monotone at t={t}");
            last = v;
        }
    }

    #[test]
    fn disjoint_support_products() {
        // {and(P, B), and(PA, PB, PS)} have disjoint basics: the exact
        // intersection is the product of the two CDF products.
        let mut m = DftModel::new("T");
        m.definitions.insert(
            "T".into(),
            FailureExpr::or(
                FailureExpr::and(b("P"), b("B")),
                FailureExpr::and(b("PA"), FailureExpr::and(b("PB"), b("PS"))),
            ),
        );
        for n in ["P", "B", "PA", "PB", "PS"] {
            m.laws.insert(n.into(), exp_law(1.0));
        }
        let t = 0.8;
        let f = exp_law(1.0).cdf(t);
        let terms: Vec<FailureExpr> = union_terms(&m, &default_rules()).unwrap().terms;
        let (v, _) = intersect_prob(&m, &terms, t, &quad(), Mode::Exact).unwrap();
        assert!((v - f * f * f * f * f).abs() < 1e-12);
    }

    #[test]
    fn unmatched_pattern_reported() {
        // An inclusive-before over compound inputs has no analytic atom.
        let m = two_basic_model(
            FailureExpr::incl_before(FailureExpr::and(b("a"), b("b")), b("a")),
            1.0,
            2.0,
        );
        match dft_event_prob(&m, 1.0, &ProbConfig::default()) {
            Err(ProbError::UnmatchedPattern(_)) => {}
            other => panic!("expected unmatched pattern, got {other:?}"),
        }
    }

    #[test]
    fn term_explosion_enforced() {
        let mut m = DftModel::new("T");
        m.definitions.insert(
            "T".into(),
            FailureExpr::or(b("a"), FailureExpr::or(b("b"), b("c"))),
        );
        for n in ["a", "b", "c"] {
            m.laws.insert(n.into(), exp_law(1.0));
        }
        let cfg = ProbConfig {
            max_union_terms: 2,
            ..ProbConfig::default()
        };
        assert!(matches!(
            dft_event_prob(&m, 1.0, &cfg),
            Err(ProbError::TermExplosion { terms: 3, max: 2 })
        ));
    }

    #[test]
    fn never_and_always_degenerate() {
        let mut m = DftModel::new("T");
        m.definitions
            .insert("T".into(), FailureExpr::and(b("a"), FailureExpr::Never));
        m.laws.insert("a".into(), exp_law(1.0));
        let r = prob(&m, 5.0);
        assert_eq!(r.value, 0.0);
        assert_eq!(r.term_count, 0);

        let mut m = DftModel::new("T");
        m.definitions
            .insert("T".into(), FailureExpr::or(b("a"), FailureExpr::Always));
        m.laws.insert("a".into(), exp_law(1.0));
        assert_eq!(prob(&m, 5.0).value, 1.0);
    }

    #[test]
    fn csp_atom_through_model() {
        let mut m = DftModel::new("T");
        m.definitions
            .insert("T".into(), FailureExpr::csp(b("M"), b("S")));
        m.laws.insert("M".into(), exp_law(1.0));
        m.spares.push(SpareBinding {
            spare: "S".into(),
            active_var: "S".into(),
            dormant_var: None,
            law: ConditionalLaw::memoryless_activation(&exp_law(1.0)).unwrap(),
            dormancy: 1.0,
            mains: vec![b("M")],
        });
        let r = prob(&m, 1.0);
        assert!((r.value - (1.0 - 2.0 * exp(-1.0))).abs() < 1e-9);
    }
}
