use std::collections::BTreeMap;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

/// Index of one scalar decision variable in a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub usize);

/// Index of one germ in a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GermId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Factor {
    /// A germ in natural units.
    Germ(GermId),
    Var(VarId),
}

/// `coef × Π factors`, before admissibility checks.
#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub coef: f64,
    pub factors: Vec<Factor>,
}

/// A sum of raw terms. Built freely; checked when handed to a model.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Expr {
    pub terms: Vec<Term>,
}

impl Expr {
    pub fn new() -> Self {
        Expr::default()
    }

    pub fn constant(c: f64) -> Self {
        Expr::new().add_const(c)
    }

    pub fn var(v: VarId) -> Self {
        Expr::new().add_var(1.0, v)
    }

    pub fn germ(g: GermId) -> Self {
        Expr::new().add_germ(1.0, g)
    }

    pub fn term(mut self, coef: f64, factors: &[Factor]) -> Self {
        self.terms.push(Term {
            coef,
            factors: factors.to_vec(),
        });
        self
    }

    pub fn add_const(self, c: f64) -> Self {
        self.term(c, &[])
    }

    pub fn add_var(self, c: f64, v: VarId) -> Self {
        self.term(c, &[Factor::Var(v)])
    }

    pub fn add_germ(self, c: f64, g: GermId) -> Self {
        self.term(c, &[Factor::Germ(g)])
    }

    /// `c · germ · var`, a variable with an uncertain coefficient.
    pub fn add_germ_var(self, c: f64, g: GermId, v: VarId) -> Self {
        self.term(c, &[Factor::Germ(g), Factor::Var(v)])
    }

    pub fn sum_vars(coef: f64, vars: impl IntoIterator<Item = VarId>) -> Self {
        vars.into_iter().fold(Expr::new(), |e, v| e.add_var(coef, v))
    }

    /// Term-by-term product. The result may violate the degree rules.
    pub fn product(&self, other: &Expr) -> Expr {
        let mut out = Expr::new();
        for a in &self.terms {
            for b in &other.terms {
                let mut factors = a.factors.clone();
                factors.extend_from_slice(&b.factors);
                out.terms.push(Term {
                    coef: a.coef * b.coef,
                    factors,
                });
            }
        }
        out
    }
}

impl Add for Expr {
    type Output = Expr;
    fn add(mut self, rhs: Expr) -> Expr {
        self.terms.extend(rhs.terms);
        self
    }
}

impl AddAssign for Expr {
    fn add_assign(&mut self, rhs: Expr) {
        self.terms.extend(rhs.terms);
    }
}

impl Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        self + (-rhs)
    }
}

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        self * -1.0
    }
}

impl Mul<f64> for Expr {
    type Output = Expr;
    fn mul(mut self, k: f64) -> Expr {
        for t in &mut self.terms {
            t.coef *= k;
        }
        self
    }
}

/// An admissible term: at most one germ and at most one variable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineTerm {
    pub coef: f64,
    pub germ: Option<GermId>,
    pub var: Option<VarId>,
}

/// Canonical germ-affine, variable-affine expression: like terms merged,
/// exact zeros dropped, ordered by (variable, germ) with absent keys first.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AffineExpr {
    terms: Vec<AffineTerm>,
}

impl AffineExpr {
    pub fn from_terms(terms: impl IntoIterator<Item = AffineTerm>) -> Self {
        let mut merged: BTreeMap<(Option<VarId>, Option<GermId>), f64> = BTreeMap::new();
        for t in terms {
            *merged.entry((t.var, t.germ)).or_insert(0.0) += t.coef;
        }
        AffineExpr {
            terms: merged
                .into_iter()
                .filter(|(_, c)| *c != 0.0)
                .map(|((var, germ), coef)| AffineTerm { coef, germ, var })
                .collect(),
        }
    }

    pub fn terms(&self) -> &[AffineTerm] {
        &self.terms
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn has_germ(&self) -> bool {
        self.terms.iter().any(|t| t.germ.is_some())
    }

    pub fn vars(&self) -> impl Iterator<Item = VarId> + '_ {
        self.terms.iter().filter_map(|t| t.var)
    }

    pub fn germs(&self) -> impl Iterator<Item = GermId> + '_ {
        self.terms.iter().filter_map(|t| t.germ)
    }

    /// Value at concrete variable values and natural-unit germ values.
    pub fn evaluate(&self, vars: &[f64], germs: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let g = t.germ.map_or(1.0, |g| germs[g.0]);
                let v = t.var.map_or(1.0, |v| vars[v.0]);
                t.coef * g * v
            })
            .sum()
    }

    /// The same expression with every germ frozen at a natural-unit value.
    pub fn at_realization(&self, germs: &[f64]) -> AffineExpr {
        AffineExpr::from_terms(self.terms.iter().map(|t| AffineTerm {
            coef: t.coef * t.germ.map_or(1.0, |g| germs[g.0]),
            germ: None,
            var: t.var,
        }))
    }
}
