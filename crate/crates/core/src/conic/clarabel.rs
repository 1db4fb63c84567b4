use std::time::Instant;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettings, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::problem::ConicProblem;

/// Environment variable read by [`SolverSettings::default`] for the solver's
/// thread count.
pub const THREADS_ENV: &str = "CHAOSPROJ_SOLVER_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub status: SolveStatus,
    /// `c·x + c0` at the returned point; NaN when not optimal.
    pub objective: f64,
    /// Present iff `status` is optimal.
    pub x: Option<Vec<f64>>,
    pub iterations: u32,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub solve_seconds: f64,
    /// The solver stopped at its relaxed tolerances.
    pub reduced_accuracy: bool,
    pub solver_status: String,
}

impl SolveResult {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    /// The primal point, or an error carrying the status and residuals.
    pub fn into_solution(self) -> Result<(f64, Vec<f64>)> {
        match self.x {
            Some(x) if self.status == SolveStatus::Optimal => Ok((self.objective, x)),
            _ => Err(Error::Solver(format!(
                "{:?} ({}) after {} iterations, primal residual {:.3e}, dual residual {:.3e}",
                self.status,
                self.solver_status,
                self.iterations,
                self.primal_residual,
                self.dual_residual
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub tol_gap_rel: f64,
    pub tol_gap_abs: f64,
    pub tol_feas: f64,
    pub max_iter: u32,
    pub threads: u32,
    pub verbose: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        let threads = std::env::var(THREADS_ENV)
            .ok()
            .and_then(|s| s.parse().ok())
            .unwrap_or(1);
        SolverSettings {
            tol_gap_rel: 1e-8,
            tol_gap_abs: 1e-8,
            tol_feas: 1e-8,
            max_iter: 200,
            threads,
            verbose: false,
        }
    }
}

/// Anything that can solve a [`ConicProblem`].
pub trait ConicSolver {
    fn solve(&self, problem: &ConicProblem) -> Result<SolveResult>;
}

/// Interior-point solver backed by Clarabel.
#[derive(Debug, Clone, Default)]
pub struct ClarabelSolver {
    pub settings: SolverSettings,
}

impl ClarabelSolver {
    pub fn new(settings: SolverSettings) -> Self {
        ClarabelSolver { settings }
    }
}

fn trivial_failure(status: SolveStatus, why: &str) -> SolveResult {
    SolveResult {
        status,
        objective: f64::NAN,
        x: None,
        iterations: 0,
        primal_residual: f64::NAN,
        dual_residual: f64::NAN,
        solve_seconds: 0.0,
        reduced_accuracy: false,
        solver_status: why.to_string(),
    }
}

/// Tolerance for rows without variables (`0 = b`, `0 ≤ b`).
const EMPTY_ROW_TOL: f64 = 1e-12;

impl ConicSolver for ClarabelSolver {
    fn solve(&self, p: &ConicProblem) -> Result<SolveResult> {
        p.validate()?;
        let start = Instant::now();
        let n = p.n_vars;
        let mut rows_i = Vec::new();
        let mut cols_j = Vec::new();
        let mut vals = Vec::new();
        let mut b = Vec::new();
        let mut cones = Vec::new();

        let mut push = |terms: &[(usize, f64)], scale: f64, rhs: f64, b: &mut Vec<f64>| {
            let r = b.len();
            for &(j, c) in terms {
                rows_i.push(r);
                cols_j.push(j);
                vals.push(c * scale);
            }
            b.push(rhs);
        };

        let mut n_eq = 0;
        for r in &p.equalities {
            if r.terms.is_empty() {
                if r.value.abs() > EMPTY_ROW_TOL {
                    return Ok(trivial_failure(SolveStatus::Infeasible, "inconsistent empty equality"));
                }
                continue;
            }
            push(&r.terms, 1.0, r.value, &mut b);
            n_eq += 1;
        }
        if n_eq > 0 {
            cones.push(SupportedConeT::ZeroConeT(n_eq));
        }

        let mut n_nn = 0;
        for r in &p.inequalities {
            if r.terms.is_empty() {
                if r.value < -EMPTY_ROW_TOL {
                    return Ok(trivial_failure(SolveStatus::Infeasible, "violated empty inequality"));
                }
                continue;
            }
            push(&r.terms, 1.0, r.value, &mut b);
            n_nn += 1;
        }
        for j in 0..n {
            if p.lower[j].is_finite() {
                push(&[(j, 1.0)], -1.0, -p.lower[j], &mut b);
                n_nn += 1;
            }
            if p.upper[j].is_finite() {
                push(&[(j, 1.0)], 1.0, p.upper[j], &mut b);
                n_nn += 1;
            }
        }
        if n_nn > 0 {
            cones.push(SupportedConeT::NonnegativeConeT(n_nn));
        }

        for c in &p.cones {
            // s = b − A x must lie in the cone: s_0 = c·x + d, s_i = A_i x + b_i.
            push(&c.head.terms, -1.0, c.head.value, &mut b);
            for r in &c.body {
                push(&r.terms, -1.0, r.value, &mut b);
            }
            cones.push(SupportedConeT::SecondOrderConeT(1 + c.body.len()));
        }

        let m = b.len();
        let a = CscMatrix::new_from_triplets(m, n, rows_i, cols_j, vals);
        let pmat = CscMatrix::zeros((n, n));
        let mut q = vec![0.0; n];
        for &(j, c) in &p.objective {
            q[j] += c;
        }

        let s = &self.settings;
        let settings = DefaultSettings {
            tol_gap_rel: s.tol_gap_rel,
            tol_gap_abs: s.tol_gap_abs,
            tol_feas: s.tol_feas,
            max_iter: s.max_iter,
            max_threads: s.threads,
            verbose: s.verbose,
            ..DefaultSettings::default()
        };
        let mut solver = DefaultSolver::new(&pmat, &q, &a, &b, &cones, settings)
            .map_err(|e| Error::Solver(format!("solver setup failed: {e}")))?;
        solver.solve();
        let sol = &solver.solution;

        let (status, reduced) = match sol.status {
            SolverStatus::Solved => (SolveStatus::Optimal, false),
            SolverStatus::AlmostSolved => (SolveStatus::Optimal, true),
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
                (SolveStatus::Infeasible, false)
            }
            SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => {
                (SolveStatus::Unbounded, false)
            }
            _ => (SolveStatus::NumericalFailure, false),
        };
        if reduced {
            log::warn!("solver returned a reduced-accuracy solution");
        }
        let x = (status == SolveStatus::Optimal).then(|| sol.x.clone());
        let objective = x.as_deref().map_or(f64::NAN, |x| p.objective_value(x));
        Ok(SolveResult {
            status,
            objective,
            x,
            iterations: sol.iterations,
            primal_residual: sol.r_prim,
            dual_residual: sol.r_dual,
            solve_seconds: start.elapsed().as_secs_f64(),
            reduced_accuracy: reduced,
            solver_status: format!("{:?}", sol.status),
        })
    }
}

/// Solves with Clarabel under the given settings.
pub fn solve(problem: &ConicProblem, settings: &SolverSettings) -> Result<SolveResult> {
    ClarabelSolver::new(*settings).solve(problem)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conic::problem::{Row, SocCone};

    #[test]
    fn small_lp() {
        // min -x - y  s.t. x + 2y ≤ 4, 3x + y ≤ 6, x, y ≥ 0  → (1.6, 1.2), -2.8
        let mut p = ConicProblem::new(2);
        p.objective = vec![(0, -1.0), (1, -1.0)];
        p.inequalities.push(Row::new(vec![(0, 1.0), (1, 2.0)], 4.0));
        p.inequalities.push(Row::new(vec![(0, 3.0), (1, 1.0)], 6.0));
        p.lower = vec![0.0, 0.0];
        let r = solve(&p, &SolverSettings::default()).unwrap();
        assert!(r.is_optimal());
        assert!((r.objective + 2.8).abs() < 1e-7);
        let x = r.x.unwrap();
        assert!((x[0] - 1.6).abs() < 1e-6 && (x[1] - 1.2).abs() < 1e-6);
    }

    #[test]
    fn small_socp() {
        // min t  s.t. ‖(x − 3, 4)‖ ≤ t, x = 3  → t = 4
        let mut p = ConicProblem::new(2);
        p.objective = vec![(1, 1.0)];
        p.equalities.push(Row::new(vec![(0, 1.0)], 3.0));
        p.cones.push(SocCone {
            head: Row::new(vec![(1, 1.0)], 0.0),
            body: vec![Row::new(vec![(0, 1.0)], -3.0), Row::new(vec![], 4.0)],
        });
        let r = solve(&p, &SolverSettings::default()).unwrap();
        assert!((r.objective - 4.0).abs() < 1e-6, "{r:?}");
    }

    #[test]
    fn infeasible_and_empty_rows() {
        let mut p = ConicProblem::new(1);
        p.objective = vec![(0, 1.0)];
        p.equalities.push(Row::new(vec![], 0.0));
        p.lower[0] = 1.0;
        p.upper[0] = 2.0;
        let r = solve(&p, &SolverSettings::default()).unwrap();
        assert!((r.objective - 1.0).abs() < 1e-7);

        p.upper[0] = 0.5;
        p.lower[0] = f64::NEG_INFINITY;
        p.inequalities.push(Row::new(vec![(0, -1.0)], -1.0));
        let r = solve(&p, &SolverSettings::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Infeasible);
        assert!(r.x.is_none());
        assert!(r.into_solution().is_err());

        let mut q = ConicProblem::new(1);
        q.equalities.push(Row::new(vec![], 1.0));
        assert_eq!(
            solve(&q, &SolverSettings::default()).unwrap().status,
            SolveStatus::Infeasible
        );
    }

    #[test]
    fn unbounded() {
        let mut p = ConicProblem::new(1);
        p.objective = vec![(0, -1.0)];
        p.lower[0] = 0.0;
        let r = solve(&p, &SolverSettings::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Unbounded);
    }
}
