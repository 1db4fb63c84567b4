use std::path::Path;

use chaosproj::cli::{load_policy, main_with_args, RunManifest, MANIFEST_FILE};
use chaosproj::sprog::load_model;

fn run(args: &[&str]) -> i32 {
    let mut full = vec!["chaosproj"];
    full.extend_from_slice(args);
    main_with_args(full)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn solve_validate_and_reload_policy() {
    let tmp = tempfile::tempdir().unwrap();
    let (m, sol, val) = (tmp.path().join("m"), tmp.path().join("s"), tmp.path().join("v"));
    assert_eq!(run(&["build-vpp", "--out", s(&m)]), 0);
    let model_path = m.join("model.txt");
    assert_eq!(run(&["solve", s(&model_path), "--epsilon", "0.1", "--out", s(&sol)]), 0);
    assert_eq!(
        run(&["validate", s(&model_path), "--solution", s(&sol), "--mc-samples", "300", "--seed", "3", "--out", s(&val)]),
        0
    );
    for f in ["violations_n300_seed3.csv", "cost_n300_seed3.csv", "residuals_n300_seed3.csv", "summary.txt", MANIFEST_FILE] {
        assert!(val.join(f).exists(), "{f}");
    }

    let mut model = load_model(&model_path).unwrap();
    model.finalize().unwrap();
    let (info, policy) = load_policy(&model, &sol).unwrap();
    assert_eq!(info.basis_len, 9);
    assert!((info.projection.lambda - 1.281_551_565_545).abs() < 1e-9);
    let first: Vec<f64> = model.first_stage_vars().map(|v| policy.mean(v)).collect();
    let mut rdr = csv::Reader::from_path(sol.join("first_stage.csv")).unwrap();
    let written: Vec<f64> = rdr.records().map(|r| r.unwrap()[1].parse().unwrap()).collect();
    assert_eq!(first, written);

    let manifest = RunManifest::load(&sol.join(MANIFEST_FILE)).unwrap();
    assert!(manifest.error.is_none());
    assert!(manifest.model.unwrap().is_absolute());
    assert!(manifest.outputs.contains(&"coefficients.csv".to_string()));
}

#[test]
fn failures_map_to_exit_codes_and_manifests() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let missing = tmp.path().join("missing.txt");
    assert_eq!(run(&["solve", s(&missing), "--out", s(&out)]), 1);
    let manifest = RunManifest::load(&out.join(MANIFEST_FILE)).unwrap();
    assert_eq!(manifest.error.unwrap().kind, "io");

    // x >= 1 and x <= 0 with no uncertainty: the solver reports infeasibility.
    let bad = tmp.path().join("bad.txt");
    let mut m = chaosproj::sprog::StochModel::new();
    let x = m
        .add_bounded_variable("x", chaosproj::sprog::Stage::First, &[1], Some(1.0), Some(0.0))
        .unwrap()
        .at(0);
    m.set_objective(chaosproj::sprog::Expr::var(x)).unwrap();
    m.finalize().unwrap();
    chaosproj::sprog::save_model(&m, &bad).unwrap();
    assert_eq!(run(&["solve", s(&bad), "--out", s(&out)]), 2);
    let manifest = RunManifest::load(&out.join(MANIFEST_FILE)).unwrap();
    assert_eq!(manifest.error.unwrap().kind, "solver");

    assert_eq!(run(&["solve"]), 1);
    assert_eq!(run(&["--help"]), 0);
}

#[test]
fn project_reports_dimensions() {
    let tmp = tempfile::tempdir().unwrap();
    let m = tmp.path().join("m");
    let p = tmp.path().join("p");
    assert_eq!(run(&["build-vpp", "--uncertainty-scale", "0.5", "--out", s(&m)]), 0);
    assert_eq!(run(&["project", s(&m.join("model.txt")), "--out", s(&p)]), 0);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(p.join("projection.json")).unwrap()).unwrap();
    assert_eq!(report["basis_len"], 9);
    let problem = chaosproj::conic::load(&p.join("projected.conic")).unwrap();
    assert_eq!(problem.dims().n_vars, report["n_columns"].as_u64().unwrap() as usize);
    let columns = std::fs::read_to_string(p.join("columns.csv")).unwrap();
    assert_eq!(columns.lines().count(), problem.dims().n_vars + 1);
}
