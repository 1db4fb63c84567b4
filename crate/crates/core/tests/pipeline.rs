use chaosproj::conic::{assemble, read_dump, solve, write_dump, SolverSettings};
use chaosproj::galerkin::{basis_for, project_model, ProjectionSettings};
use chaosproj::mcvalidate::estimate_violations;
use chaosproj::pce::solve_pce;
use chaosproj::polybasis::Distribution;
use chaosproj::sprog::{read_model, write_model, Expr, Stage, StochModel};

/// Newsvendor with a chance-constrained shortfall.
fn newsvendor() -> StochModel {
    let mut m = StochModel::new();
    let order = m.add_bounded_variable("order", Stage::First, &[1], Some(0.0), None).unwrap().at(0);
    let short = m.add_bounded_variable("short", Stage::Second, &[1], Some(0.0), None).unwrap().at(0);
    let surplus = m.add_bounded_variable("surplus", Stage::Second, &[1], Some(0.0), None).unwrap().at(0);
    let d = m.add_germ("demand", Distribution::normal(10.0, 2.0).unwrap()).unwrap();
    m.add_eq("balance", Expr::var(order).add_var(1.0, short).add_var(-1.0, surplus), Expr::germ(d)).unwrap();
    m.set_objective(Expr::var(order).add_var(3.0, short).add_var(0.5, surplus)).unwrap();
    m.finalize().unwrap();
    m
}

#[test]
fn text_round_trips_preserve_the_solution() {
    let m = newsvendor();
    let mut reread = read_model(&write_model(&m)).unwrap();
    reread.finalize().unwrap();
    let settings = ProjectionSettings::default();
    let basis = basis_for(&reread, 1).unwrap();
    let problem = assemble(&project_model(&reread, &basis, &settings).unwrap());
    let back = read_dump(&write_dump(&problem)).unwrap();
    let solver = SolverSettings::default();
    let a = solve(&problem, &solver).unwrap().objective;
    let b = solve(&back, &solver).unwrap().objective;
    let c = solve_pce(&m, 1, &settings, &solver).unwrap().objective;
    assert!((a - b).abs() < 1e-9 && (a - c).abs() < 1e-9, "{a} {b} {c}");
}

#[test]
fn newsvendor_matches_the_gaussian_quantile() {
    // surplus = order - demand must stay >= 0 with probability 1 - eps, so
    // the cheapest order is the (1 - eps) demand quantile.
    let m = newsvendor();
    let solver = SolverSettings::default();
    // Standard normal quantiles at 0.95 and 0.80.
    for (eps, z) in [(0.05, 1.644_853_626_951_472_2), (0.2, 0.841_621_233_572_914_3)] {
        let settings = ProjectionSettings::with_epsilon(eps);
        let s = solve_pce(&m, 1, &settings, &solver).unwrap();
        let q = 10.0 + 2.0 * z;
        assert!((s.first_stage[0] - q).abs() < 1e-5, "eps {eps}: {} vs {q}", s.first_stage[0]);
        let v = estimate_violations(&s.policy, &m, 20_000, 4, eps).unwrap();
        let p = v.max_probability;
        assert!((p - eps).abs() < 4.0 * (eps * (1.0 - eps) / 20_000.0).sqrt(), "eps {eps}: {p}");
    }
}

#[test]
fn cantelli_is_more_conservative() {
    let m = newsvendor();
    let solver = SolverSettings::default();
    let g = solve_pce(&m, 1, &ProjectionSettings::with_epsilon(0.05), &solver).unwrap();
    let c = solve_pce(&m, 1, &ProjectionSettings::cantelli(0.05), &solver).unwrap();
    assert!(c.objective > g.objective);
    // lambda = sqrt(0.95 / 0.05)
    assert!((c.first_stage[0] - (10.0 + 2.0 * 19f64.sqrt())).abs() < 1e-5);
}

#[test]
fn higher_degree_keeps_the_affine_optimum() {
    let m = newsvendor();
    let solver = SolverSettings::default();
    let settings = ProjectionSettings::default();
    let d1 = solve_pce(&m, 1, &settings, &solver).unwrap();
    let d3 = solve_pce(&m, 3, &settings, &solver).unwrap();
    assert!((d1.objective - d3.objective).abs() < 1e-6 * d1.objective.abs());
    assert_eq!(d3.basis.len(), 4);
}

#[test]
fn documented_model_text_solves() {
    let text = "chaosproj-model 1
germ demand normal mean=10 sd=2
var order first 1
var short second 1
objective
  1 order[0]
  3 short[0]
end
eq balance
  1 order[0]
  1 short[0]
  -1 demand
end
le short_nonneg eps=0.05
  -1 short[0]
end
";
    let mut m = read_model(text).unwrap();
    m.finalize().unwrap();
    // short = demand - order carries the full spread, so its mean must
    // cover the 95% quantile: order = 10 - 2 * 1.6449, cost = order + 3 (10 - order).
    let s = solve_pce(&m, 1, &ProjectionSettings::default(), &SolverSettings::default()).unwrap();
    let order = 10.0 - 2.0 * 1.644_853_626_951_472_2;
    assert!((s.first_stage[0] - order).abs() < 1e-5, "{}", s.first_stage[0]);
    assert!((s.objective - (order + 3.0 * (10.0 - order))).abs() < 1e-4);
}
