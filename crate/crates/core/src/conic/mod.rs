//! Canonical conic programs, the solver adapter, extensive-form assembly for
//! scenario approximation, and a text dump for external cross-checks.

mod clarabel;
mod dump;
mod extensive;
mod problem;

pub use clarabel::{
    solve, ClarabelSolver, ConicSolver, SolveResult, SolveStatus, SolverSettings, THREADS_ENV,
};
pub use dump::{dump, load, read_dump, write_dump, DUMP_HEADER};
pub use extensive::{assemble_extensive_form, ExtensiveForm, PROBABILITY_SUM_TOL};
pub use problem::{assemble, ConicProblem, ProblemDims, Row, SocCone};
