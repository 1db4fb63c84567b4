//! End-to-end intrusive solve: project, assemble, solve, read the policy.

use std::sync::Arc;
use std::time::Instant;

use crate::conic::{assemble, solve, ConicProblem, SolveResult, SolverSettings};
use crate::error::Result;
use crate::galerkin::{basis_for, project_model, ProjectedProgram, ProjectionSettings, RecoursePolicy};
use crate::multibasis::MultiIndexBasis;
use crate::sa_benchmark::{first_stage_trajectories, Decisions};
use crate::sprog::StochModel;

#[derive(Debug, Clone)]
pub struct PceSolution {
    pub basis: Arc<MultiIndexBasis>,
    pub program: ProjectedProgram,
    pub problem: ConicProblem,
    pub result: SolveResult,
    pub policy: RecoursePolicy,
    /// Expected cost, the constant mode of the projected objective.
    pub objective: f64,
    /// First-stage values in model variable order.
    pub first_stage: Vec<f64>,
    /// Basis construction, projection, assembly and solve.
    pub wall_seconds: f64,
}

impl PceSolution {
    pub fn decisions(&self, model: &StochModel) -> Decisions {
        Decisions {
            objective: self.objective,
            trajectories: first_stage_trajectories(model, &self.first_stage),
        }
    }
}

/// Projects `model` onto a total-degree basis and solves the conic program.
/// A non-optimal solve is an error carrying the solver status.
pub fn solve_pce(
    model: &StochModel,
    degree: usize,
    projection: &ProjectionSettings,
    solver: &SolverSettings,
) -> Result<PceSolution> {
    let start = Instant::now();
    let basis = Arc::new(basis_for(model, degree)?);
    let program = project_model(model, &basis, projection)?;
    let problem = assemble(&program);
    log::info!("projected onto {} basis terms: {:?}", basis.len(), problem.dims());
    let result = solve(&problem, solver)?;
    let (objective, x) = result.clone().into_solution()?;
    let policy = RecoursePolicy::from_solution(&program.layout, basis.clone(), &x)?;
    let first_stage = model.first_stage_vars().map(|v| policy.mean(v)).collect();
    Ok(PceSolution {
        basis,
        program,
        problem,
        result,
        policy,
        objective,
        first_stage,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}
