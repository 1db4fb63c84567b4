//! Latin hypercube scenarios and the extensive-form benchmark.

use chaosproj::conic::SolverSettings;
use chaosproj::sa_benchmark::{lhs_sample, solve_scenarios};
use chaosproj::vpp::{build_instance, VppConfig};

fn main() -> chaosproj::Result<()> {
    let model = build_instance(&VppConfig::default())?;
    let set = lhs_sample(model.germs(), 40, 3)?;
    println!("{} scenarios of {} germs, first: {:?}", set.samples.len(), model.germs().len(), set.samples[0]);
    let (objective, first_stage, secs) = solve_scenarios(&model, &set, &SolverSettings::default())?;
    println!("SA objective {objective:.3} in {secs:.2} s");
    println!("DAM bids: {:?}", first_stage[..24].iter().map(|x| (x * 1000.0).round() / 1000.0).collect::<Vec<_>>());
    Ok(())
}
