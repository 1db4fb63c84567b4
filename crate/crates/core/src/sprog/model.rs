use std::collections::{BTreeSet, HashMap};

use crate::error::{Error, Result};
use crate::polybasis::{Distribution, Germ};

use super::expr::{AffineExpr, AffineTerm, Expr, Factor, GermId, Term, VarId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    /// Here-and-now; decided before the uncertainty is revealed.
    First,
    /// Wait-and-see recourse.
    Second,
}

impl Stage {
    pub fn name(&self) -> &'static str {
        match self {
            Stage::First => "first",
            Stage::Second => "second",
        }
    }
}

/// A named block of scalar variables sharing one stage.
#[derive(Debug, Clone, PartialEq)]
pub struct VarBlock {
    pub name: String,
    pub stage: Stage,
    pub shape: Vec<usize>,
    pub offset: usize,
}

impl VarBlock {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Handle to a variable block; indexes into its scalars.
#[derive(Debug, Clone, PartialEq)]
pub struct VarHandle {
    pub block: usize,
    offset: usize,
    shape: Vec<usize>,
}

impl VarHandle {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    /// Scalar at a flat (row-major) position.
    pub fn at(&self, flat: usize) -> VarId {
        assert!(flat < self.len(), "index {flat} out of range {}", self.len());
        VarId(self.offset + flat)
    }

    /// Scalar at a multi-dimensional position.
    pub fn at_nd(&self, idx: &[usize]) -> VarId {
        assert_eq!(idx.len(), self.shape.len(), "rank mismatch");
        let flat = idx
            .iter()
            .zip(&self.shape)
            .fold(0, |acc, (&i, &n)| {
                assert!(i < n, "index {i} out of range {n}");
                acc * n + i
            });
        VarId(self.offset + flat)
    }

    pub fn iter(&self) -> impl Iterator<Item = VarId> + '_ {
        (0..self.len()).map(|i| VarId(self.offset + i))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    /// `expr = 0`
    Eq,
    /// `expr ≤ 0`
    Le,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub expr: AffineExpr,
    pub sense: Sense,
    /// Violation probability override for chance-constrained inequalities.
    pub epsilon: Option<f64>,
}

/// Dimensions reported by [`StochModel::finalize`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelSummary {
    pub n_first: usize,
    pub n_second: usize,
    pub n_germs: usize,
    pub n_eq: usize,
    pub n_ineq: usize,
}

/// A two-stage stochastic LP whose coefficients are affine in independent germs.
#[derive(Debug, Clone, Default)]
pub struct StochModel {
    blocks: Vec<VarBlock>,
    stages: Vec<Stage>,
    scalar_block: Vec<usize>,
    germs: Vec<Germ>,
    germ_units: Vec<Option<String>>,
    unused: BTreeSet<usize>,
    names: HashMap<String, NameRef>,
    constraints: Vec<Constraint>,
    constraint_names: HashMap<String, usize>,
    objective: Option<AffineExpr>,
    finalized: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum NameRef {
    Block(usize),
    Germ(usize),
}

pub(crate) fn valid_name(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
}

pub(crate) fn valid_constraint_name(name: &str) -> bool {
    !name.is_empty()
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || "_.[],-".contains(c))
}

impl StochModel {
    pub fn new() -> Self {
        StochModel::default()
    }

    fn check_open(&self) -> Result<()> {
        if self.finalized {
            return Err(Error::model("model is finalized"));
        }
        Ok(())
    }

    fn claim_name(&mut self, name: &str, r: NameRef) -> Result<()> {
        if !valid_name(name) {
            return Err(Error::model(format!("invalid name `{name}`")));
        }
        if self.names.contains_key(name) {
            return Err(Error::model(format!("duplicate name `{name}`")));
        }
        self.names.insert(name.to_string(), r);
        Ok(())
    }

    pub fn add_variable(&mut self, name: &str, stage: Stage, shape: &[usize]) -> Result<VarHandle> {
        self.check_open()?;
        if shape.is_empty() || shape.contains(&0) {
            return Err(Error::model(format!("variable `{name}` has an empty shape")));
        }
        let block = self.blocks.len();
        self.claim_name(name, NameRef::Block(block))?;
        let offset = self.stages.len();
        let b = VarBlock {
            name: name.to_string(),
            stage,
            shape: shape.to_vec(),
            offset,
        };
        for _ in 0..b.len() {
            self.stages.push(stage);
            self.scalar_block.push(block);
        }
        self.blocks.push(b);
        Ok(self.handle(block))
    }

    /// Adds a variable block together with its bounds, which become ordinary
    /// inequality constraints named `<name>[i].lb` / `<name>[i].ub`.
    pub fn add_bounded_variable(
        &mut self,
        name: &str,
        stage: Stage,
        shape: &[usize],
        lower: Option<f64>,
        upper: Option<f64>,
    ) -> Result<VarHandle> {
        let h = self.add_variable(name, stage, shape)?;
        for i in 0..h.len() {
            let v = h.at(i);
            if let Some(lo) = lower {
                self.add_constraint(
                    &format!("{name}[{i}].lb"),
                    Expr::constant(lo).add_var(-1.0, v),
                    Sense::Le,
                    None,
                )?;
            }
            if let Some(hi) = upper {
                self.add_constraint(
                    &format!("{name}[{i}].ub"),
                    Expr::var(v).add_const(-hi),
                    Sense::Le,
                    None,
                )?;
            }
        }
        Ok(h)
    }

    pub fn add_germ(&mut self, name: &str, distribution: Distribution) -> Result<GermId> {
        self.check_open()?;
        let germ = Germ::new(name, distribution)?;
        let id = self.germs.len();
        self.claim_name(name, NameRef::Germ(id))?;
        self.germs.push(germ);
        self.germ_units.push(None);
        Ok(GermId(id))
    }

    /// Attaches a free-form unit label (e.g. `EUR/MWh`) to a germ.
    pub fn set_germ_units(&mut self, germ: GermId, units: &str) -> Result<()> {
        self.check_open()?;
        if units.is_empty() || units.chars().any(char::is_whitespace) {
            return Err(Error::model(format!("invalid unit label `{units}`")));
        }
        let slot = self
            .germ_units
            .get_mut(germ.0)
            .ok_or_else(|| Error::model(format!("unknown germ #{}", germ.0)))?;
        *slot = Some(units.to_string());
        Ok(())
    }

    pub fn germ_units(&self, germ: GermId) -> Option<&str> {
        self.germ_units.get(germ.0).and_then(|u| u.as_deref())
    }

    /// Marks a germ as intentionally unreferenced.
    pub fn declare_unused(&mut self, germ: GermId) -> Result<()> {
        self.check_open()?;
        if germ.0 >= self.germs.len() {
            return Err(Error::model(format!("unknown germ #{}", germ.0)));
        }
        self.unused.insert(germ.0);
        Ok(())
    }

    /// Checks the degree rules and canonicalizes a raw expression.
    pub fn validate_expr(&self, expr: &Expr) -> Result<AffineExpr> {
        let mut out = Vec::with_capacity(expr.terms.len());
        for term in &expr.terms {
            out.push(self.validate_term(term)?);
        }
        Ok(AffineExpr::from_terms(out))
    }

    fn validate_term(&self, term: &Term) -> Result<AffineTerm> {
        if !term.coef.is_finite() {
            return Err(self.inadmissible(term, "coefficient is not finite"));
        }
        let mut germ = None;
        let mut var = None;
        for f in &term.factors {
            match *f {
                Factor::Germ(g) => {
                    if g.0 >= self.germs.len() {
                        return Err(self.inadmissible(term, "unknown germ"));
                    }
                    if germ.replace(g).is_some() {
                        return Err(self.inadmissible(term, "germ degree exceeds 1"));
                    }
                }
                Factor::Var(v) => {
                    if v.0 >= self.stages.len() {
                        return Err(self.inadmissible(term, "unknown variable"));
                    }
                    if var.replace(v).is_some() {
                        return Err(self.inadmissible(term, "variable degree exceeds 1"));
                    }
                }
            }
        }
        Ok(AffineTerm {
            coef: term.coef,
            germ,
            var,
        })
    }

    fn inadmissible(&self, term: &Term, reason: &str) -> Error {
        Error::InadmissibleTerm {
            term: self.describe_term(term),
            reason: reason.to_string(),
        }
    }

    fn describe_term(&self, term: &Term) -> String {
        let mut s = term.coef.to_string();
        for f in &term.factors {
            s.push('*');
            match *f {
                Factor::Germ(g) => match self.germs.get(g.0) {
                    Some(germ) => s.push_str(&germ.name),
                    None => s.push_str(&format!("germ#{}", g.0)),
                },
                Factor::Var(v) if v.0 < self.stages.len() => s.push_str(&self.var_label(v)),
                Factor::Var(v) => s.push_str(&format!("var#{}", v.0)),
            }
        }
        s
    }

    pub fn add_constraint(
        &mut self,
        name: &str,
        expr: Expr,
        sense: Sense,
        epsilon: Option<f64>,
    ) -> Result<usize> {
        let expr = self.validate_expr(&expr)?;
        self.push_constraint(name, expr, sense, epsilon)
    }

    pub(crate) fn push_constraint(
        &mut self,
        name: &str,
        expr: AffineExpr,
        sense: Sense,
        epsilon: Option<f64>,
    ) -> Result<usize> {
        self.check_open()?;
        if !valid_constraint_name(name) {
            return Err(Error::model(format!("invalid constraint name `{name}`")));
        }
        if self.constraint_names.contains_key(name) {
            return Err(Error::model(format!("duplicate constraint name `{name}`")));
        }
        match (sense, epsilon) {
            (Sense::Eq, Some(_)) => {
                return Err(Error::model(format!(
                    "equality `{name}` cannot carry a violation probability"
                )))
            }
            (Sense::Le, Some(e)) if !(e > 0.0 && e < 1.0) => {
                return Err(Error::model(format!(
                    "violation probability of `{name}` must lie in (0, 1), got {e}"
                )))
            }
            _ => {}
        }
        let id = self.constraints.len();
        self.constraint_names.insert(name.to_string(), id);
        self.constraints.push(Constraint {
            name: name.to_string(),
            expr,
            sense,
            epsilon,
        });
        Ok(id)
    }

    /// `lhs ≤ rhs`.
    pub fn add_le(&mut self, name: &str, lhs: Expr, rhs: Expr) -> Result<usize> {
        self.add_constraint(name, lhs - rhs, Sense::Le, None)
    }

    /// `lhs = rhs`.
    pub fn add_eq(&mut self, name: &str, lhs: Expr, rhs: Expr) -> Result<usize> {
        self.add_constraint(name, lhs - rhs, Sense::Eq, None)
    }

    /// Sets the cost whose expectation is minimized.
    pub fn set_objective(&mut self, expr: Expr) -> Result<()> {
        self.check_open()?;
        let e = self.validate_expr(&expr)?;
        self.objective = Some(e);
        Ok(())
    }

    pub(crate) fn set_objective_affine(&mut self, expr: AffineExpr) -> Result<()> {
        self.check_open()?;
        self.objective = Some(expr);
        Ok(())
    }

    /// Validates the model and freezes its structure.
    pub fn finalize(&mut self) -> Result<ModelSummary> {
        if self.finalized {
            return Ok(self.summary());
        }
        let objective = self
            .objective
            .as_ref()
            .ok_or_else(|| Error::model("objective is not set"))?;
        let mut referenced = BTreeSet::new();
        for e in self
            .constraints
            .iter()
            .map(|c| &c.expr)
            .chain(std::iter::once(objective))
        {
            referenced.extend(e.germs().map(|g| g.0));
        }
        let orphans: Vec<&str> = (0..self.germs.len())
            .filter(|g| !referenced.contains(g) && !self.unused.contains(g))
            .map(|g| self.germs[g].name.as_str())
            .collect();
        if !orphans.is_empty() {
            return Err(Error::model(format!(
                "germs never referenced and not declared unused: {}",
                orphans.join(", ")
            )));
        }
        for c in &self.constraints {
            if c.sense == Sense::Eq
                && c.expr.has_germ()
                && !c.expr.vars().any(|v| self.stages[v.0] == Stage::Second)
            {
                return Err(Error::model(format!(
                    "equality `{}` depends on a germ but has no recourse variable to absorb it",
                    c.name
                )));
            }
        }
        self.finalized = true;
        Ok(self.summary())
    }

    pub fn is_finalized(&self) -> bool {
        self.finalized
    }

    pub fn summary(&self) -> ModelSummary {
        let n_first = self.stages.iter().filter(|s| **s == Stage::First).count();
        let n_eq = self
            .constraints
            .iter()
            .filter(|c| c.sense == Sense::Eq)
            .count();
        ModelSummary {
            n_first,
            n_second: self.stages.len() - n_first,
            n_germs: self.germs.len(),
            n_eq,
            n_ineq: self.constraints.len() - n_eq,
        }
    }

    pub fn handle(&self, block: usize) -> VarHandle {
        let b = &self.blocks[block];
        VarHandle {
            block,
            offset: b.offset,
            shape: b.shape.clone(),
        }
    }

    pub fn variable(&self, name: &str) -> Option<VarHandle> {
        match self.names.get(name) {
            Some(NameRef::Block(b)) => Some(self.handle(*b)),
            _ => None,
        }
    }

    pub fn germ_id(&self, name: &str) -> Option<GermId> {
        match self.names.get(name) {
            Some(NameRef::Germ(g)) => Some(GermId(*g)),
            _ => None,
        }
    }

    pub(crate) fn lookup(&self, name: &str) -> Option<NameRef> {
        self.names.get(name).copied()
    }

    pub fn blocks(&self) -> &[VarBlock] {
        &self.blocks
    }

    pub fn germs(&self) -> &[Germ] {
        &self.germs
    }

    pub fn unused_germs(&self) -> impl Iterator<Item = GermId> + '_ {
        self.unused.iter().map(|&g| GermId(g))
    }

    pub fn n_vars(&self) -> usize {
        self.stages.len()
    }

    pub fn stage(&self, v: VarId) -> Stage {
        self.stages[v.0]
    }

    pub fn first_stage_vars(&self) -> impl Iterator<Item = VarId> + '_ {
        (0..self.stages.len())
            .filter(|&i| self.stages[i] == Stage::First)
            .map(VarId)
    }

    pub fn second_stage_vars(&self) -> impl Iterator<Item = VarId> + '_ {
        (0..self.stages.len())
            .filter(|&i| self.stages[i] == Stage::Second)
            .map(VarId)
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn constraint_id(&self, name: &str) -> Option<usize> {
        self.constraint_names.get(name).copied()
    }

    pub fn objective(&self) -> Option<&AffineExpr> {
        self.objective.as_ref()
    }

    /// `name[flat]` label of a scalar variable.
    pub fn var_label(&self, v: VarId) -> String {
        let b = &self.blocks[self.scalar_block[v.0]];
        format!("{}[{}]", b.name, v.0 - b.offset)
    }

    /// Block and flat position of a scalar variable.
    pub fn var_position(&self, v: VarId) -> (usize, usize) {
        let block = self.scalar_block[v.0];
        (block, v.0 - self.blocks[block].offset)
    }

    /// Whether an expression mentions any recourse variable.
    pub fn has_recourse(&self, e: &AffineExpr) -> bool {
        e.vars().any(|v| self.stages[v.0] == Stage::Second)
    }

    /// Germ means in natural units, the realization of "no surprise".
    pub fn germ_means(&self) -> Vec<f64> {
        self.germs.iter().map(|g| g.distribution.mean()).collect()
    }
}
