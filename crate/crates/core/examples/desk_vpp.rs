//! The desk VPP instance end to end: build, solve, and print the offers.

use chaosproj::conic::SolverSettings;
use chaosproj::galerkin::ProjectionSettings;
use chaosproj::pce::solve_pce;
use chaosproj::vpp::{build_instance, VppConfig};

fn main() -> chaosproj::Result<()> {
    let cfg = match std::env::args().nth(1) {
        Some(path) => VppConfig::load(std::path::Path::new(&path))?,
        None => VppConfig::default(),
    };
    let model = build_instance(&cfg)?;
    println!("{:?}", model.summary());
    let s = solve_pce(&model, 1, &ProjectionSettings::default(), &SolverSettings::default())?;
    println!("expected cost {:.2} in {:.2} s ({} iterations)", s.objective, s.wall_seconds, s.result.iterations);
    for t in s.decisions(&model).trajectories {
        let vals: Vec<String> = t.values.iter().map(|v| format!("{v:.3}")).collect();
        println!("{:<6} {}", t.name, vals.join(" "));
    }
    let soc = model.variable("soc").expect("soc block");
    for h in [0, 6, 12, 18, 23] {
        let (mean, sd) = s.policy.moments(soc.at(h));
        println!("soc[{h:>2}] mean {mean:.3} MWh, sd {sd:.3}");
    }
    Ok(())
}
