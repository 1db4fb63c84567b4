//! Monte-Carlo check of a projected policy: violations, cost, equality residuals.

use chaosproj::conic::SolverSettings;
use chaosproj::galerkin::ProjectionSettings;
use chaosproj::mcvalidate::{equality_residuals, estimate_cost, estimate_violations};
use chaosproj::pce::solve_pce;
use chaosproj::vpp::{build_instance, VppConfig};

fn main() -> chaosproj::Result<()> {
    let model = build_instance(&VppConfig::default())?;
    let settings = ProjectionSettings::default();
    let s = solve_pce(&model, 1, &settings, &SolverSettings::default())?;
    let n = 2000;
    let viol = estimate_violations(&s.policy, &model, n, 11, settings.epsilon)?;
    println!("{}", viol.summary_line());
    let mut worst: Vec<_> = viol.constraints.iter().collect();
    worst.sort_by(|a, b| b.probability.total_cmp(&a.probability));
    for c in worst.iter().take(5) {
        println!("  {:<18} {:.4} [{:.4}, {:.4}]", c.constraint, c.probability, c.ci_low, c.ci_high);
    }
    let cost = estimate_cost(&s.policy, &model, n, 11)?;
    println!("cost {:.2} (projected {:.2}), 95% CI [{:.2}, {:.2}]", cost.mean, s.objective, cost.ci_low, cost.ci_high);
    let res = equality_residuals(&s.policy, &model, n, 11)?;
    println!("max equality residual {:.2e}", res.max_abs_residual);
    Ok(())
}
