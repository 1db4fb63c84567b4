//! A two-stage newsvendor: model, project, solve, and inspect the affine recourse.

use chaosproj::conic::SolverSettings;
use chaosproj::galerkin::ProjectionSettings;
use chaosproj::mcvalidate::{estimate_cost, estimate_violations};
use chaosproj::pce::solve_pce;
use chaosproj::polybasis::Distribution;
use chaosproj::sprog::{Expr, Stage, StochModel};

fn main() -> chaosproj::Result<()> {
    let mut m = StochModel::new();
    let order = m.add_bounded_variable("order", Stage::First, &[1], Some(0.0), None)?.at(0);
    let short = m.add_bounded_variable("short", Stage::Second, &[1], Some(0.0), None)?.at(0);
    let surplus = m.add_bounded_variable("surplus", Stage::Second, &[1], Some(0.0), None)?.at(0);
    let demand = m.add_germ("demand", Distribution::normal(10.0, 2.0)?)?;
    m.add_eq(
        "balance",
        Expr::var(order).add_var(1.0, short).add_var(-1.0, surplus),
        Expr::germ(demand),
    )?;
    m.set_objective(Expr::var(order).add_var(3.0, short).add_var(0.5, surplus))?;
    m.finalize()?;

    let settings = ProjectionSettings::with_epsilon(0.1);
    let s = solve_pce(&m, 1, &settings, &SolverSettings::default())?;
    println!("order {:.4}, expected cost {:.4}", s.first_stage[0], s.objective);
    for v in [short, surplus] {
        let (mean, sd) = s.policy.moments(v);
        println!("{}: mean {mean:.4}, sd {sd:.4}, coefficients {:?}", m.var_label(v), s.policy.coefficients[v.0]);
    }
    let cost = estimate_cost(&s.policy, &m, 20_000, 1)?;
    let viol = estimate_violations(&s.policy, &m, 20_000, 1, settings.epsilon)?;
    println!("sampled cost {:.4} ± {:.4}", cost.mean, cost.standard_error);
    println!("{}", viol.summary_line());
    Ok(())
}
