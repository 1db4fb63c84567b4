use std::sync::Arc;

use crate::error::{Error, Result};
use crate::multibasis::{moments, MultiIndexBasis};
use crate::sprog::{AffineExpr, StochModel, VarId};

use super::project::{Column, ColumnLayout};

/// A solved coefficient table: first-stage values plus one coefficient
/// vector per recourse variable.
#[derive(Debug, Clone)]
pub struct RecoursePolicy {
    pub basis: Arc<MultiIndexBasis>,
    /// Per model variable: one value (first stage) or `|A|` coefficients.
    pub coefficients: Vec<Vec<f64>>,
}

impl RecoursePolicy {
    /// Reads a policy out of a solution vector over the projected columns.
    pub fn from_solution(
        layout: &ColumnLayout,
        basis: Arc<MultiIndexBasis>,
        x: &[f64],
    ) -> Result<Self> {
        if x.len() != layout.n_columns() {
            return Err(Error::DimensionMismatch {
                expected: layout.n_columns(),
                got: x.len(),
            });
        }
        let k = layout.basis_len;
        let coefficients = layout
            .columns
            .iter()
            .map(|c| match *c {
                Column::First(j) => vec![x[j]],
                Column::Second(base) => x[base..base + k].to_vec(),
            })
            .collect();
        Ok(RecoursePolicy {
            basis,
            coefficients,
        })
    }

    /// A deterministic policy: one value per variable, no uncertainty modes.
    pub fn constant(basis: Arc<MultiIndexBasis>, model: &StochModel, values: &[f64]) -> Self {
        let k = basis.len();
        let coefficients = values
            .iter()
            .enumerate()
            .map(|(v, &x)| match model.stage(VarId(v)) {
                crate::sprog::Stage::First => vec![x],
                crate::sprog::Stage::Second => {
                    let mut c = vec![0.0; k];
                    c[0] = x;
                    c
                }
            })
            .collect();
        RecoursePolicy {
            basis,
            coefficients,
        }
    }

    pub fn n_vars(&self) -> usize {
        self.coefficients.len()
    }

    /// Value of a first-stage variable, or the mean of a recourse variable.
    pub fn mean(&self, v: VarId) -> f64 {
        self.coefficients[v.0][0]
    }

    /// `(mean, variance)` of a variable under the policy.
    pub fn moments(&self, v: VarId) -> (f64, f64) {
        moments(&self.coefficients[v.0])
    }

    /// Concrete values of every model variable at a natural-unit realization.
    pub fn evaluate(&self, omega: &[f64]) -> Result<Vec<f64>> {
        let germs = self.basis.germs();
        if omega.len() != germs.len() {
            return Err(Error::DimensionMismatch {
                expected: germs.len(),
                got: omega.len(),
            });
        }
        for (g, &w) in germs.iter().zip(omega) {
            if !g.in_support(w) {
                log::warn!("{} = {w} lies outside its support", g.name);
            }
        }
        let y = self.basis.standardize(omega)?;
        let psi = self.basis.eval_all(&y)?;
        Ok(self.evaluate_with_basis_values(&psi))
    }

    /// Like [`RecoursePolicy::evaluate`] with precomputed `Ψ_α(y)` values.
    pub fn evaluate_with_basis_values(&self, psi: &[f64]) -> Vec<f64> {
        self.coefficients
            .iter()
            .map(|c| {
                if c.len() == 1 {
                    c[0]
                } else {
                    c.iter().zip(psi).map(|(a, p)| a * p).sum()
                }
            })
            .collect()
    }
}

/// `z(ω)` for every variable; see [`RecoursePolicy::evaluate`].
pub fn evaluate_policy(policy: &RecoursePolicy, omega: &[f64]) -> Result<Vec<f64>> {
    policy.evaluate(omega)
}

/// Residual of a model expression under the policy at a realization.
pub fn residual(policy: &RecoursePolicy, expr: &AffineExpr, omega: &[f64]) -> Result<f64> {
    Ok(expr.evaluate(&policy.evaluate(omega)?, omega))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polybasis::{Distribution, Germ};

    fn basis() -> Arc<MultiIndexBasis> {
        let g = Germ::new("y", Distribution::normal(0.0, 1.0).unwrap()).unwrap();
        Arc::new(MultiIndexBasis::new(vec![g], 1).unwrap())
    }

    #[test]
    fn affine_policy_on_one_germ() {
        let p = RecoursePolicy {
            basis: basis(),
            coefficients: vec![vec![7.0], vec![2.0, 3.0]],
        };
        assert_eq!(p.evaluate(&[1.0]).unwrap(), vec![7.0, 5.0]);
        assert_eq!(p.evaluate(&[0.0]).unwrap(), vec![7.0, 2.0]);
        assert_eq!(p.moments(VarId(1)), (2.0, 9.0));
        assert!(p.evaluate(&[0.0, 1.0]).is_err());
    }

    #[test]
    fn natural_units_are_standardized() {
        let g = Germ::new("p", Distribution::normal(10.0, 4.0).unwrap()).unwrap();
        let b = Arc::new(MultiIndexBasis::new(vec![g], 1).unwrap());
        let p = RecoursePolicy {
            basis: b,
            coefficients: vec![vec![1.0, 2.0]],
        };
        assert_eq!(p.evaluate(&[14.0]).unwrap(), vec![3.0]);
    }
}
