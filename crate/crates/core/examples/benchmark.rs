//! Repeated scenario approximation against the projected solution.

use chaosproj::conic::SolverSettings;
use chaosproj::galerkin::ProjectionSettings;
use chaosproj::pce::solve_pce;
use chaosproj::sa_benchmark::{compare, run_repetitions};
use chaosproj::vpp::{build_instance, VppConfig};

fn main() -> chaosproj::Result<()> {
    let model = build_instance(&VppConfig::default())?;
    let settings = SolverSettings::default();
    let pce = solve_pce(&model, 1, &ProjectionSettings::default(), &settings)?;
    for n_s in [25, 100] {
        let runs = run_repetitions(&model, n_s, 4, 0, &settings)?;
        let decs: Vec<_> = runs.iter().map(|r| r.decisions(&model)).collect();
        let report = compare(&pce.decisions(&model), &decs)?;
        let secs = runs.iter().map(|r| r.wall_seconds).sum::<f64>() / runs.len() as f64;
        println!(
            "n_s = {n_s:>3}: SA {:.2} (cv {:.4}), PCE {:.2}, gap {:.3}%, envelope coverage {:.1}%, {secs:.2} s/run vs PCE {:.2} s",
            report.reference_objective,
            report.reference_cv,
            report.pce_objective,
            100.0 * report.gap_rel,
            100.0 * report.coverage,
            pce.wall_seconds
        );
    }
    Ok(())
}
