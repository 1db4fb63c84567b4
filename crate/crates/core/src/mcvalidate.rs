//! Out-of-sample validation of a solved policy: empirical chance-constraint
//! violation rates, equality residuals and cost statistics.
//!
//! Sample `i` is always the `i`-th counter-addressed realization of the seed,
//! and per-sample results are combined in index order, so every report is
//! bit-identical regardless of how the work is scheduled.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::galerkin::RecoursePolicy;
use crate::sa_benchmark::write_csv;
use crate::sampling::realization;
use crate::sprog::{Sense, StochModel};

/// A residual above this counts as a violation. It sits above the solver's
/// feasibility tolerance so that constraints held at equality by a
/// deterministic recourse are not flagged on round-off.
pub const VIOLATION_TOL: f64 = 1e-6;

/// Default violation target for inequalities without their own ε.
pub const DEFAULT_EPSILON: f64 = 0.05;

pub const DEFAULT_MC_SAMPLES: usize = 10_000;

const Z95: f64 = 1.959_963_984_540_054;

/// Wilson score 95% interval for `k` successes out of `n`.
pub fn wilson_interval(k: usize, n: usize) -> (f64, f64) {
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0).min(p), (centre + half).min(1.0).max(p))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintViolation {
    pub constraint: String,
    pub epsilon: f64,
    pub violations: usize,
    pub samples: usize,
    pub probability: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub above_target: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationReport {
    pub seed: u64,
    pub samples: usize,
    pub constraints: Vec<ConstraintViolation>,
    pub count_above_target: usize,
    pub max_probability: f64,
    pub max_constraint: Option<String>,
}

impl ViolationReport {
    pub fn fraction_above_target(&self) -> f64 {
        if self.constraints.is_empty() {
            0.0
        } else {
            self.count_above_target as f64 / self.constraints.len() as f64
        }
    }

    pub fn summary_line(&self) -> String {
        format!(
            "{} of {} inequalities above target, max empirical violation {:.2}% ({}) over {} samples",
            self.count_above_target,
            self.constraints.len(),
            100.0 * self.max_probability,
            self.max_constraint.as_deref().unwrap_or("-"),
            self.samples
        )
    }
}

fn check_inputs(policy: &RecoursePolicy, model: &StochModel, n_mc: usize) -> Result<()> {
    if n_mc == 0 {
        return Err(Error::Config("the Monte-Carlo sample count must be at least 1".into()));
    }
    if policy.n_vars() != model.n_vars() {
        return Err(Error::DimensionMismatch {
            expected: model.n_vars(),
            got: policy.n_vars(),
        });
    }
    if policy.basis.n_germs() != model.germs().len() {
        return Err(Error::GermMismatch(
            "the policy basis and the model declare different germs".into(),
        ));
    }
    Ok(())
}

/// Runs `f` on every `(ω, z(ω))` sample and returns the outputs in index order.
fn per_sample<T: Send>(
    policy: &RecoursePolicy,
    model: &StochModel,
    n_mc: usize,
    seed: u64,
    f: impl Fn(&[f64], &[f64]) -> T + Sync,
) -> Result<Vec<T>> {
    let germs = model.germs();
    (0..n_mc)
        .into_par_iter()
        .map(|i| {
            let omega = realization(germs, seed, i as u64);
            let y = policy.basis.standardize(&omega)?;
            let psi = policy.basis.eval_all(&y)?;
            let z = policy.evaluate_with_basis_values(&psi);
            Ok(f(&omega, &z))
        })
        .collect()
}

/// Empirical violation rate of every inequality over `n_mc` realizations.
pub fn estimate_violations(
    policy: &RecoursePolicy,
    model: &StochModel,
    n_mc: usize,
    seed: u64,
    default_epsilon: f64,
) -> Result<ViolationReport> {
    check_inputs(policy, model, n_mc)?;
    let ineqs: Vec<_> = model
        .constraints()
        .iter()
        .filter(|c| c.sense == Sense::Le)
        .collect();
    let flags = per_sample(policy, model, n_mc, seed, |omega, z| {
        ineqs
            .iter()
            .map(|c| c.expr.evaluate(z, omega) > VIOLATION_TOL)
            .collect::<Vec<bool>>()
    })?;
    let mut counts = vec![0usize; ineqs.len()];
    for f in &flags {
        for (c, &v) in counts.iter_mut().zip(f) {
            *c += v as usize;
        }
    }
    let constraints: Vec<ConstraintViolation> = ineqs
        .iter()
        .zip(&counts)
        .map(|(c, &k)| {
            let epsilon = c.epsilon.unwrap_or(default_epsilon);
            let probability = k as f64 / n_mc as f64;
            let (ci_low, ci_high) = wilson_interval(k, n_mc);
            ConstraintViolation {
                constraint: c.name.clone(),
                epsilon,
                violations: k,
                samples: n_mc,
                probability,
                ci_low,
                ci_high,
                above_target: probability > epsilon,
            }
        })
        .collect();
    let worst = constraints
        .iter()
        .fold(None::<&ConstraintViolation>, |best, c| match best {
            Some(b) if b.probability >= c.probability => Some(b),
            _ => Some(c),
        });
    Ok(ViolationReport {
        seed,
        samples: n_mc,
        count_above_target: constraints.iter().filter(|c| c.above_target).count(),
        max_probability: worst.map_or(0.0, |c| c.probability),
        max_constraint: worst.filter(|c| c.violations > 0).map(|c| c.constraint.clone()),
        constraints,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostEstimate {
    pub seed: u64,
    pub samples: usize,
    pub mean: f64,
    pub sd: f64,
    pub standard_error: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Monte-Carlo mean of the cost evaluated through the policy, with a
/// normal-approximation 95% interval.
pub fn estimate_cost(
    policy: &RecoursePolicy,
    model: &StochModel,
    n_mc: usize,
    seed: u64,
) -> Result<CostEstimate> {
    check_inputs(policy, model, n_mc)?;
    let objective = model
        .objective()
        .ok_or_else(|| Error::model("objective is not set"))?;
    let costs = per_sample(policy, model, n_mc, seed, |omega, z| {
        objective.evaluate(z, omega)
    })?;
    let n = n_mc as f64;
    let mean = costs.iter().sum::<f64>() / n;
    let sd = if n_mc > 1 {
        (costs.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    let standard_error = sd / n.sqrt();
    Ok(CostEstimate {
        seed,
        samples: n_mc,
        mean,
        sd,
        standard_error,
        ci_low: mean - Z95 * standard_error,
        ci_high: mean + Z95 * standard_error,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EqualityResidual {
    pub constraint: String,
    pub max_abs_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub seed: u64,
    pub samples: usize,
    pub equalities: Vec<EqualityResidual>,
    pub max_abs_residual: f64,
}

/// Largest absolute residual of every equality over `n_mc` realizations.
pub fn equality_residuals(
    policy: &RecoursePolicy,
    model: &StochModel,
    n_mc: usize,
    seed: u64,
) -> Result<ResidualReport> {
    check_inputs(policy, model, n_mc)?;
    let eqs: Vec<_> = model
        .constraints()
        .iter()
        .filter(|c| c.sense == Sense::Eq)
        .collect();
    let residuals = per_sample(policy, model, n_mc, seed, |omega, z| {
        eqs.iter()
            .map(|c| c.expr.evaluate(z, omega).abs())
            .collect::<Vec<f64>>()
    })?;
    let mut worst = vec![0.0f64; eqs.len()];
    for r in &residuals {
        for (w, &v) in worst.iter_mut().zip(r) {
            *w = w.max(v);
        }
    }
    Ok(ResidualReport {
        seed,
        samples: n_mc,
        max_abs_residual: worst.iter().copied().fold(0.0, f64::max),
        equalities: eqs
            .iter()
            .zip(worst)
            .map(|(c, m)| EqualityResidual {
                constraint: c.name.clone(),
                max_abs_residual: m,
            })
            .collect(),
    })
}

#[derive(Serialize)]
struct ViolationRow<'a> {
    constraint: &'a str,
    probability: f64,
    ci_low: f64,
    ci_high: f64,
    epsilon: f64,
    above_target: bool,
}

/// Writes `violations_n{n}_seed{seed}.csv`.
pub fn write_violations(report: &ViolationReport, dir: &Path) -> Result<PathBuf> {
    let path = dir.join(format!(
        "violations_n{}_seed{}.csv",
        report.samples, report.seed
    ));
    let rows: Vec<ViolationRow> = report
        .constraints
        .iter()
        .map(|c| ViolationRow {
            constraint: &c.constraint,
            probability: c.probability,
            ci_low: c.ci_low,
            ci_high: c.ci_high,
            epsilon: c.epsilon,
            above_target: c.above_target,
        })
        .collect();
    write_csv(&path, &rows)?;
    Ok(path)
}

/// Writes `cost_n{n}_seed{seed}.csv` with a single row.
pub fn write_cost(cost: &CostEstimate, dir: &Path) -> Result<PathBuf> {
    let path = dir.join(format!("cost_n{}_seed{}.csv", cost.samples, cost.seed));
    write_csv(&path, std::slice::from_ref(cost))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::galerkin::{project_model, ProjectionSettings};
    use crate::multibasis::MultiIndexBasis;
    use crate::polybasis::{Distribution, Germ};
    use crate::sprog::{Expr, Stage};

    #[test]
    fn wilson_contains_estimate() {
        for (k, n) in [(0, 10), (5, 10), (10, 10), (500, 10_000)] {
            let (lo, hi) = wilson_interval(k, n);
            let p = k as f64 / n as f64;
            assert!(lo <= p && p <= hi && lo >= 0.0 && hi <= 1.0);
        }
        let (lo, hi) = wilson_interval(500, 10_000);
        assert!(lo > 0.045 && hi < 0.055);
    }

    fn one_germ_model(rhs_shift: f64) -> (StochModel, Arc<MultiIndexBasis>) {
        let mut m = StochModel::new();
        let g = m.add_germ("y", Distribution::normal(0.0, 1.0).unwrap()).unwrap();
        let z = m.add_variable("z", Stage::Second, &[1]).unwrap();
        m.add_eq("track", Expr::var(z.at(0)), Expr::germ(g)).unwrap();
        m.add_le("cap", Expr::var(z.at(0)), Expr::constant(rhs_shift))
            .unwrap();
        m.set_objective(Expr::var(z.at(0)) * 2.0).unwrap();
        m.finalize().unwrap();
        let basis = Arc::new(
            MultiIndexBasis::new(
                vec![Germ::new("y", Distribution::normal(0.0, 1.0).unwrap()).unwrap()],
                1,
            )
            .unwrap(),
        );
        (m, basis)
    }

    fn tracking_policy(basis: &Arc<MultiIndexBasis>) -> RecoursePolicy {
        RecoursePolicy {
            basis: basis.clone(),
            coefficients: vec![vec![0.0, 1.0]],
        }
    }

    #[test]
    fn gaussian_tail_at_boundary() {
        // z = y, z ≤ 1.645 is violated with probability 1 − Φ(1.645) ≈ 0.05.
        let (m, basis) = one_germ_model(1.645);
        let r = estimate_violations(&tracking_policy(&basis), &m, 10_000, 4, 0.05).unwrap();
        let c = &r.constraints[0];
        let target = 0.049_985;
        let band = 3.29 * (target * (1.0 - target) / 10_000.0f64).sqrt();
        assert!((c.probability - target).abs() <= band, "{c:?}");
        let again = estimate_violations(&tracking_policy(&basis), &m, 10_000, 4, 0.05).unwrap();
        assert_eq!(r, again);
    }

    #[test]
    fn slack_constraint_never_violated() {
        let (m, basis) = one_germ_model(100.0);
        let r = estimate_violations(&tracking_policy(&basis), &m, 2_000, 1, 0.05).unwrap();
        assert_eq!(r.constraints[0].violations, 0);
        assert_eq!(r.count_above_target, 0);
        assert!(r.max_constraint.is_none());
    }

    #[test]
    fn cost_and_residuals() {
        let (m, basis) = one_germ_model(1.645);
        let p = tracking_policy(&basis);
        let c = estimate_cost(&p, &m, 20_000, 9).unwrap();
        assert!(c.mean.abs() < 3.0 * c.standard_error, "{c:?}");
        assert!((c.sd - 2.0).abs() < 0.05);
        let res = equality_residuals(&p, &m, 1_000, 9).unwrap();
        assert!(res.max_abs_residual < 1e-12);
    }

    #[test]
    fn solved_policy_matches_projection() {
        let (m, basis) = one_germ_model(1.645);
        let prog = project_model(&m, &basis, &ProjectionSettings::default()).unwrap();
        assert_eq!(prog.report.n_soc + prog.report.n_linear_inequalities, 1);
        assert!(estimate_cost(&tracking_policy(&basis), &m, 0, 0).is_err());
    }
}
