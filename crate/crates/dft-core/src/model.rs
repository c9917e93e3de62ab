//! A bound DFT model: named definitions, failure-time laws for the basic
//! events, and conditional activation metadata for spare gates.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::dist::{ConditionalLaw, Distribution};
use crate::expr::FailureExpr;

/// Runtime data for one physical spare with a conditionally-activated
/// state: which variable receives the conditional draw, which (if any)
/// carries the dormant-state law, and which expressions activate it.
#[derive(Clone, Debug)]
pub struct SpareBinding {
    /// Physical spare name as declared (for reporting and printing).
    pub spare: String,
    /// Variable bound to the active-state failure time.
    pub active_var: String,
    /// Dormant-state variable; `None` for a cold spare.
    pub dormant_var: Option<String>,
    /// Activation law of the active state.
    pub law: ConditionalLaw,
    /// Dormancy factor used to derive the dormant law (1 for cold-spare
    /// bookkeeping only).
    pub dormancy: f64,
    /// The spare activates when the earliest of these fails.
    pub mains: Vec<FailureExpr>,
}

/// A named DFT: a top event, intermediate definitions, distribution
/// bindings and spare metadata.
///
/// Leaf names must be bound exactly one way: a definition, a declared
/// law, or a spare binding's active variable. Declared basics are
/// pairwise distinct by construction (map keys), which is what licenses
/// the distinct-basics rewrite rules on them.
#[derive(Clone, Debug, Default)]
pub struct DftModel {
    pub top: String,
    pub definitions: BTreeMap<String, FailureExpr>,
    pub laws: BTreeMap<String, Distribution>,
    pub spares: Vec<SpareBinding>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ModelError {
    Undefined(String),
    Redefined(String),
    Cycle(Vec<String>),
    MissingDistribution(String),
    MissingConditionalLaw(String),
    /// A warm spare gate's active and dormant variables must be two
    /// distinct names for one physical spare.
    WspVarsNotDistinct(String),
    /// Spare activation expressions may not depend on conditionally
    /// activated variables.
    SpareMainUsesActiveVar { spare: String, var: String },
}

impl fmt::Display for ModelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelError::Undefined(n) => write!(f, "undefined event `{n}`"),
            ModelError::Redefined(n) => write!(f, "`{n}` is defined more than once"),
            ModelError::Cycle(path) => {
                write!(f, "definition cycle: {}", path.join(" -> "))
            }
            ModelError::MissingDistribution(n) => {
                write!(f, "basic event `{n}` has no failure distribution")
            }
            ModelError::MissingConditionalLaw(n) => {
                write!(f, "spare variable `{n}` has no conditional activation law")
            }
            ModelError::WspVarsNotDistinct(n) => {
                write!(f, "warm spare `{n}` needs distinct active/dormant variables")
            }
            ModelError::SpareMainUsesActiveVar { spare, var } => {
                write!(f, "main of spare `{spare}` references active variable `{var}`")
            }
        }
    }
}

impl DftModel {
    pub fn new(top: impl Into<String>) -> Self {
        DftModel {
            top: top.into(),
            ..DftModel::default()
        }
    }

    pub fn binding_for(&self, active_var: &str) -> Option<&SpareBinding> {
        self.spares.iter().find(|b| b.active_var == active_var)
    }

    fn is_leaf(&self, name: &str) -> bool {
        self.laws.contains_key(name) || self.binding_for(name).is_some()
    }

    /// Inlines definitions in `expr` down to leaves.
    pub fn resolve(&self, expr: &FailureExpr) -> Result<FailureExpr, ModelError> {
        let mut stack = Vec::new();
        self.resolve_inner(expr, &mut stack)
    }

    /// The fully inlined top-event expression.
    pub fn resolve_top(&self) -> Result<FailureExpr, ModelError> {
        let mut stack = Vec::new();
        self.resolve_name(&self.top, &mut stack)
    }

    fn resolve_name(
        &self,
        name: &str,
        stack: &mut Vec<String>,
    ) -> Result<FailureExpr, ModelError> {
        if let Some(pos) = stack.iter().position(|n| n == name) {
            let mut path: Vec<String> = stack[pos..].to_vec();
            path.push(name.to_string());
            return Err(ModelError::Cycle(path));
        }
        match self.definitions.get(name) {
            Some(def) => {
                stack.push(name.to_string());
                let out = self.resolve_inner(def, stack);
                stack.pop();
                out
            }
            None if self.is_leaf(name) => Ok(FailureExpr::basic(name)),
            None => Err(ModelError::Undefined(name.to_string())),
        }
    }

    fn resolve_inner(
        &self,
        expr: &FailureExpr,
        stack: &mut Vec<String>,
    ) -> Result<FailureExpr, ModelError> {
        use FailureExpr::*;
        Ok(match expr {
            Always => Always,
            Never => Never,
            Basic(name) => self.resolve_name(name, stack)?,
            And(l, r) => FailureExpr::and(
                self.resolve_inner(l, stack)?,
                self.resolve_inner(r, stack)?,
            ),
            Or(l, r) => FailureExpr::or(
                self.resolve_inner(l, stack)?,
                self.resolve_inner(r, stack)?,
            ),
            Pand(l, r) => FailureExpr::pand(
                self.resolve_inner(l, stack)?,
                self.resolve_inner(r, stack)?,
            ),
            Fdep(l, r) => FailureExpr::fdep(
                self.resolve_inner(l, stack)?,
                self.resolve_inner(r, stack)?,
            ),
            Before(l, r) => FailureExpr::before(
                self.resolve_inner(l, stack)?,
                self.resolve_inner(r, stack)?,
            ),
            Simult(l, r) => FailureExpr::simult(
                self.resolve_inner(l, stack)?,
                self.resolve_inner(r, stack)?,
            ),
            InclBefore(l, r) => FailureExpr::incl_before(
                self.resolve_inner(l, stack)?,
                self.resolve_inner(r, stack)?,
            ),
            Hsp(l, r) => FailureExpr::hsp(
                self.resolve_inner(l, stack)?,
                self.resolve_inner(r, stack)?,
            ),
            Csp(l, r) => FailureExpr::csp(
                self.resolve_inner(l, stack)?,
                self.resolve_inner(r, stack)?,
            ),
            Wsp(a, b, c) => FailureExpr::wsp(
                self.resolve_inner(a, stack)?,
                self.resolve_inner(b, stack)?,
                self.resolve_inner(c, stack)?,
            ),
            SharedSpare(a, b, c, d) => FailureExpr::shared_spare(
                self.resolve_inner(a, stack)?,
                self.resolve_inner(b, stack)?,
                self.resolve_inner(c, stack)?,
                self.resolve_inner(d, stack)?,
            ),
        })
    }

    /// Structural checks: the top resolves, every leaf is bound exactly
    /// one way, warm-spare variables are distinct, and spare activation
    /// expressions resolve without touching active variables.
    pub fn validate(&self) -> Result<(), ModelError> {
        for name in self.definitions.keys() {
            if self.laws.contains_key(name) {
                return Err(ModelError::Redefined(name.clone()));
            }
        }
        for b in &self.spares {
            if self.laws.contains_key(&b.active_var)
                || self.definitions.contains_key(&b.active_var)
            {
                return Err(ModelError::Redefined(b.active_var.clone()));
            }
            if let Some(d) = &b.dormant_var {
                if d == &b.active_var {
                    return Err(ModelError::WspVarsNotDistinct(b.spare.clone()));
                }
                if !self.laws.contains_key(d) {
                    return Err(ModelError::MissingDistribution(d.clone()));
                }
            }
            for main in &b.mains {
                let resolved = self.resolve(main)?;
                for basic in resolved.basics() {
                    if self.binding_for(&basic).is_some() {
                        return Err(ModelError::SpareMainUsesActiveVar {
                            spare: b.spare.clone(),
                            var: basic,
                        });
                    }
                }
            }
        }
        let top = self.resolve_top()?;
        check_wsp_vars(&top)?;
        Ok(())
    }
}

fn check_wsp_vars(e: &FailureExpr) -> Result<(), ModelError> {
    use FailureExpr::*;
    match e {
        Wsp(main, xa, xd) => {
            if let (Basic(a), Basic(d)) = (xa.as_ref(), xd.as_ref()) {
                if a == d {
                    return Err(ModelError::WspVarsNotDistinct(a.clone()));
                }
            }
            check_wsp_vars(main)?;
            check_wsp_vars(xa)?;
            check_wsp_vars(xd)
        }
        Always | Never | Basic(_) => Ok(()),
        And(l, r)
        | Or(l, r)
        | Pand(l, r)
        | Fdep(l, r)
        | Before(l, r)
        | Simult(l, r)
        | InclBefore(l, r)
        | Hsp(l, r)
        | Csp(l, r) => {
            check_wsp_vars(l)?;
            check_wsp_vars(r)
        }
        SharedSpare(a, b, c, d) => {
            check_wsp_vars(a)?;
            check_wsp_vars(b)?;
            check_wsp_vars(c)?;
            check_wsp_vars(d)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::Distribution;

    fn exp_law(rate: f64) -> Distribution {
        Distribution::exponential(rate).unwrap()
    }

    #[test]
    fn resolve_inlines_definitions() {
        let mut m = DftModel::new("T");
        m.definitions.insert(
            "T".into(),
            FailureExpr::and(FailureExpr::basic("G"), FailureExpr::basic("B")),
        );
        m.definitions
            .insert("G".into(), FailureExpr::or(FailureExpr::basic("A"), FailureExpr::basic("B")));
        m.laws.insert("A".into(), exp_law(1.0));
        m.laws.insert("B".into(), exp_law(2.0));
        let top = m.resolve_top().unwrap();
        assert_eq!(
            top,
            FailureExpr::and(
                FailureExpr::or(FailureExpr::basic("A"), FailureExpr::basic("B")),
                FailureExpr::basic("B")
            )
        );
        m.validate().unwrap();
    }

    #[test]
    fn cycle_detected_with_path() {
        let mut m = DftModel::new("A");
        m.definitions.insert("A".into(), FailureExpr::basic("B"));
        m.definitions.insert("B".into(), FailureExpr::basic("A"));
        match m.resolve_top() {
            Err(ModelError::Cycle(path)) => assert_eq!(path, ["A", "B", "A"]),
            other => panic!("expected cycle, got {other:?}"),
        }
    }

    #[test]
    fn undefined_leaf_rejected() {
        let mut m = DftModel::new("T");
        m.definitions
            .insert("T".into(), FailureExpr::basic("ghost"));
        assert_eq!(m.resolve_top(), Err(ModelError::Undefined("ghost".into())));
    }

    #[test]
    fn leaf_with_definition_and_law_rejected() {
        let mut m = DftModel::new("A");
        m.definitions.insert("A".into(), FailureExpr::basic("B"));
        m.laws.insert("A".into(), exp_law(1.0));
        m.laws.insert("B".into(), exp_law(1.0));
        assert_eq!(m.validate(), Err(ModelError::Redefined("A".into())));
    }

    #[test]
    fn wsp_variable_distinctness_enforced() {
        let mut m = DftModel::new("T");
        m.definitions.insert(
            "T".into(),
            FailureExpr::wsp(FailureExpr::basic("Y"), FailureExpr::basic("X"), FailureExpr::basic("X")),
        );
        m.laws.insert("Y".into(), exp_law(1.0));
        m.laws.insert("X".into(), exp_law(1.0));
        assert_eq!(m.validate(), Err(ModelError::WspVarsNotDistinct("X".into())));
    }
}
