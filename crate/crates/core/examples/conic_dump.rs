//! Write the projected conic program to the text format, read it back, and
//! solve both copies.

use chaosproj::conic::{assemble, read_dump, solve, write_dump, SolverSettings};
use chaosproj::galerkin::{basis_for, project_model, ProjectionSettings};
use chaosproj::vpp::{build_instance, VppConfig};

fn main() -> chaosproj::Result<()> {
    let model = build_instance(&VppConfig::default())?;
    let basis = basis_for(&model, 1)?;
    let program = project_model(&model, &basis, &ProjectionSettings::default())?;
    let problem = assemble(&program);
    let text = write_dump(&problem);
    let reread = read_dump(&text)?;
    println!("dump: {} bytes, {:?}", text.len(), reread.dims());
    println!("first lines:\n{}", text.lines().take(4).collect::<Vec<_>>().join("\n"));
    let settings = SolverSettings::default();
    let a = solve(&problem, &settings)?;
    let b = solve(&reread, &settings)?;
    println!("objective {:.6} vs reread {:.6}", a.objective, b.objective);
    Ok(())
}
