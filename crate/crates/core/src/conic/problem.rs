use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::galerkin::{LinForm, ProjectedInequality, ProjectedProgram};

/// Sparse affine row `Σ coef · x_j` paired with a scalar whose meaning
/// depends on where the row sits (right-hand side or offset).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Row {
    pub terms: Vec<(usize, f64)>,
    pub value: f64,
}

impl Row {
    pub fn new(terms: Vec<(usize, f64)>, value: f64) -> Self {
        Row { terms, value }
    }

    pub fn dot(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(j, c)| c * x[j]).sum()
    }
}

/// Second-order cone `‖A·x + b‖ ≤ c·x + d`.
///
/// `head` holds `(c, d)` and each `body` row one `(A_i, b_i)`. A projected
/// chance constraint `μ + λ‖σ‖ ≤ 0` is written with head `−μ/λ` and body `σ`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SocCone {
    pub head: Row,
    pub body: Vec<Row>,
}

impl SocCone {
    /// `c·x + d − ‖A·x + b‖`; non-negative iff the point is inside the cone.
    pub fn margin(&self, x: &[f64]) -> f64 {
        let norm = self
            .body
            .iter()
            .map(|r| (r.dot(x) + r.value).powi(2))
            .sum::<f64>()
            .sqrt();
        self.head.dot(x) + self.head.value - norm
    }
}

/// Canonical conic program:
///
/// ```text
/// minimize    c·x + c0
/// subject to  E x = e          (equalities: row · x = value)
///             G x ≤ g          (inequalities: row · x ≤ value)
///             ‖A_k x + b_k‖ ≤ c_k·x + d_k
///             lower ≤ x ≤ upper
/// ```
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConicProblem {
    pub n_vars: usize,
    pub objective: Vec<(usize, f64)>,
    pub objective_constant: f64,
    pub equalities: Vec<Row>,
    pub inequalities: Vec<Row>,
    pub cones: Vec<SocCone>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemDims {
    pub n_vars: usize,
    pub n_equalities: usize,
    pub n_inequalities: usize,
    pub n_cones: usize,
    pub nnz: usize,
}

impl ConicProblem {
    pub fn new(n_vars: usize) -> Self {
        ConicProblem {
            n_vars,
            lower: vec![f64::NEG_INFINITY; n_vars],
            upper: vec![f64::INFINITY; n_vars],
            ..Default::default()
        }
    }

    pub fn dims(&self) -> ProblemDims {
        let rows = self
            .equalities
            .iter()
            .chain(&self.inequalities)
            .chain(self.cones.iter().flat_map(|c| std::iter::once(&c.head).chain(&c.body)));
        ProblemDims {
            n_vars: self.n_vars,
            n_equalities: self.equalities.len(),
            n_inequalities: self.inequalities.len(),
            n_cones: self.cones.len(),
            nnz: rows.map(|r| r.terms.len()).sum(),
        }
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective_constant + self.objective.iter().map(|&(j, c)| c * x[j]).sum::<f64>()
    }

    /// Checks index ranges, finiteness and bound consistency.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Model(format!("conic problem: {msg}")));
        if self.lower.len() != self.n_vars || self.upper.len() != self.n_vars {
            return bad("bound vectors do not match the variable count".into());
        }
        let check_row = |r: &Row, what: &str| -> Result<()> {
            for &(j, c) in &r.terms {
                if j >= self.n_vars {
                    return bad(format!("{what} references column {j} of {}", self.n_vars));
                }
                if !c.is_finite() {
                    return bad(format!("{what} has a non-finite coefficient"));
                }
            }
            if !r.value.is_finite() {
                return bad(format!("{what} has a non-finite value"));
            }
            Ok(())
        };
        check_row(
            &Row::new(self.objective.clone(), self.objective_constant),
            "objective",
        )?;
        for r in &self.equalities {
            check_row(r, "equality")?;
        }
        for r in &self.inequalities {
            check_row(r, "inequality")?;
        }
        for c in &self.cones {
            check_row(&c.head, "cone head")?;
            for r in &c.body {
                check_row(r, "cone body")?;
            }
        }
        for j in 0..self.n_vars {
            if self.lower[j] > self.upper[j] || self.lower[j].is_nan() || self.upper[j].is_nan() {
                return bad(format!("inconsistent bounds on column {j}"));
            }
        }
        Ok(())
    }

    /// Largest violation of any constraint at `x` (0 when feasible).
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let eq = self
            .equalities
            .iter()
            .map(|r| (r.dot(x) - r.value).abs());
        let ineq = self.inequalities.iter().map(|r| (r.dot(x) - r.value).max(0.0));
        let cones = self.cones.iter().map(|c| (-c.margin(x)).max(0.0));
        let bounds = (0..self.n_vars).map(|j| {
            (self.lower[j] - x[j]).max(x[j] - self.upper[j]).max(0.0)
        });
        eq.chain(ineq).chain(cones).chain(bounds).fold(0.0, f64::max)
    }
}

fn row_from(form: &LinForm, scale: f64) -> Row {
    Row::new(
        form.terms.iter().map(|&(j, c)| (j, c * scale)).collect(),
        form.constant * scale,
    )
}

/// Canonical conic form of a projected program. Column order is the
/// projected layout: first stage, then recourse coefficients.
pub fn assemble(projected: &ProjectedProgram) -> ConicProblem {
    let mut p = ConicProblem::new(projected.layout.n_columns());
    p.objective = projected.objective.terms.clone();
    p.objective_constant = projected.objective.constant;
    for e in &projected.equalities {
        p.equalities
            .push(Row::new(e.form.terms.clone(), -e.form.constant));
    }
    for ineq in &projected.inequalities {
        match ineq {
            ProjectedInequality::Linear { form, .. } => {
                p.inequalities.push(Row::new(form.terms.clone(), -form.constant));
            }
            ProjectedInequality::Soc {
                mean,
                lambda,
                spread,
                ..
            } => p.cones.push(SocCone {
                head: row_from(mean, -1.0 / lambda),
                body: spread.iter().map(|(_, f)| row_from(f, 1.0)).collect(),
            }),
        }
    }
    p
}
