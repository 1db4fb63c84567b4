use crate::error::{Error, Result};
use crate::sprog::{AffineExpr, Sense, Stage, StochModel, VarId};

use super::problem::{ConicProblem, Row};

/// Tolerance on `Σ p_s = 1`.
pub const PROBABILITY_SUM_TOL: f64 = 1e-12;

/// The deterministic equivalent of a model over a finite scenario set.
#[derive(Debug, Clone)]
pub struct ExtensiveForm {
    pub problem: ConicProblem,
    pub n_scenarios: usize,
    pub n_first: usize,
    pub n_second: usize,
    /// Per model variable: column (first stage) or offset inside a scenario block.
    slots: Vec<(Stage, usize)>,
}

impl ExtensiveForm {
    /// Column of variable `v` in scenario `s` (first-stage columns are shared).
    pub fn column(&self, v: VarId, s: usize) -> usize {
        match self.slots[v.0] {
            (Stage::First, j) => j,
            (Stage::Second, k) => self.n_first + s * self.n_second + k,
        }
    }

    /// First-stage values in model variable order.
    pub fn first_stage_values(&self, x: &[f64]) -> Vec<f64> {
        self.slots
            .iter()
            .filter(|(st, _)| *st == Stage::First)
            .map(|&(_, j)| x[j])
            .collect()
    }

    /// Values of every model variable in scenario `s`.
    pub fn scenario_values(&self, x: &[f64], s: usize) -> Vec<f64> {
        (0..self.slots.len())
            .map(|v| x[self.column(VarId(v), s)])
            .collect()
    }
}

fn check_probabilities(p: &[f64]) -> Result<()> {
    if p.iter().any(|&q| !(q >= 0.0) || !q.is_finite()) {
        return Err(Error::InvalidProbabilities(
            "probabilities must be finite and non-negative".into(),
        ));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > PROBABILITY_SUM_TOL {
        return Err(Error::InvalidProbabilities(format!(
            "probabilities sum to {total}, not 1"
        )));
    }
    Ok(())
}

/// Row of `expr` frozen at one realization, with its constant moved aside.
fn realize(
    expr: &AffineExpr,
    omega: &[f64],
    column: impl Fn(VarId) -> usize,
) -> (Vec<(usize, f64)>, f64) {
    let mut terms: Vec<(usize, f64)> = Vec::with_capacity(expr.terms().len());
    let mut constant = 0.0;
    for t in expr.terms() {
        let c = t.coef * t.germ.map_or(1.0, |g| omega[g.0]);
        match t.var {
            Some(v) => terms.push((column(v), c)),
            None => constant += c,
        }
    }
    terms.sort_unstable_by_key(|t| t.0);
    let mut merged: Vec<(usize, f64)> = Vec::with_capacity(terms.len());
    for (j, c) in terms {
        match merged.last_mut() {
            Some(last) if last.0 == j => last.1 += c,
            _ => merged.push((j, c)),
        }
    }
    merged.retain(|t| t.1 != 0.0);
    (merged, constant)
}

/// One copy of the recourse variables and of every uncertain or recourse
/// constraint per scenario, shared first-stage variables, and the
/// probability-weighted cost. Inequalities must hold in every scenario.
pub fn assemble_extensive_form(
    model: &StochModel,
    scenarios: &[Vec<f64>],
    probabilities: &[f64],
) -> Result<ExtensiveForm> {
    if !model.is_finalized() {
        return Err(Error::model("model must be finalized before assembly"));
    }
    if scenarios.is_empty() {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: 0,
        });
    }
    if probabilities.len() != scenarios.len() {
        return Err(Error::DimensionMismatch {
            expected: scenarios.len(),
            got: probabilities.len(),
        });
    }
    let n_germs = model.germs().len();
    if let Some(bad) = scenarios.iter().find(|s| s.len() != n_germs) {
        return Err(Error::DimensionMismatch {
            expected: n_germs,
            got: bad.len(),
        });
    }
    check_probabilities(probabilities)?;

    let mut n_first = 0;
    let mut n_second = 0;
    let slots: Vec<(Stage, usize)> = (0..model.n_vars())
        .map(|v| match model.stage(VarId(v)) {
            Stage::First => {
                n_first += 1;
                (Stage::First, n_first - 1)
            }
            Stage::Second => {
                n_second += 1;
                (Stage::Second, n_second - 1)
            }
        })
        .collect();
    let ns = scenarios.len();
    let mut ef = ExtensiveForm {
        problem: ConicProblem::new(n_first + ns * n_second),
        n_scenarios: ns,
        n_first,
        n_second,
        slots,
    };

    let mut eqs = Vec::new();
    let mut ineqs = Vec::new();
    for c in model.constraints() {
        let shared = !c.expr.has_germ() && !model.has_recourse(&c.expr);
        let copies = if shared { 1 } else { ns };
        for (s, omega) in scenarios.iter().enumerate().take(copies) {
            let (terms, constant) = realize(&c.expr, omega, |v| ef.column(v, s));
            let row = Row::new(terms, -constant);
            match c.sense {
                Sense::Eq => eqs.push(row),
                Sense::Le => ineqs.push(row),
            }
        }
    }

    let objective = model
        .objective()
        .ok_or_else(|| Error::model("objective is not set"))?;
    let mut q = vec![0.0; ef.problem.n_vars];
    let mut q0 = 0.0;
    for (s, (omega, &p)) in scenarios.iter().zip(probabilities).enumerate() {
        let (terms, constant) = realize(objective, omega, |v| ef.column(v, s));
        for (j, c) in terms {
            q[j] += p * c;
        }
        q0 += p * constant;
    }

    ef.problem.objective = q
        .into_iter()
        .enumerate()
        .filter(|(_, c)| *c != 0.0)
        .collect();
    ef.problem.objective_constant = q0;
    ef.problem.equalities = eqs;
    ef.problem.inequalities = ineqs;
    Ok(ef)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polybasis::Distribution;
    use crate::sprog::Expr;

    fn toy() -> StochModel {
        let mut m = StochModel::new();
        let g = m.add_germ("d", Distribution::normal(5.0, 1.0).unwrap()).unwrap();
        let x = m.add_bounded_variable("x", Stage::First, &[1], Some(0.0), None).unwrap();
        let z = m.add_bounded_variable("z", Stage::Second, &[1], Some(0.0), None).unwrap();
        m.add_le("cover", Expr::germ(g), Expr::var(x.at(0)) + Expr::var(z.at(0)))
            .unwrap();
        m.set_objective(Expr::var(x.at(0)) + Expr::var(z.at(0)) * 3.0)
            .unwrap();
        m.finalize().unwrap();
        m
    }

    #[test]
    fn counts_and_sharing() {
        let m = toy();
        let s = vec![vec![4.0], vec![6.0], vec![5.0]];
        let ef = assemble_extensive_form(&m, &s, &[0.25, 0.5, 0.25]).unwrap();
        assert_eq!(ef.problem.n_vars, 1 + 3);
        // x.lb once, z.lb and cover per scenario
        assert_eq!(ef.problem.inequalities.len(), 1 + 3 + 3);
        assert_eq!(ef.column(VarId(1), 2), 3);
        let obj: Vec<_> = ef.problem.objective.clone();
        assert_eq!(obj, vec![(0, 1.0), (1, 0.75), (2, 1.5), (3, 0.75)]);
    }

    #[test]
    fn rejects_bad_inputs() {
        let m = toy();
        assert!(matches!(
            assemble_extensive_form(&m, &[vec![1.0]], &[0.9]),
            Err(Error::InvalidProbabilities(_))
        ));
        assert!(matches!(
            assemble_extensive_form(&m, &[vec![1.0, 2.0]], &[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
