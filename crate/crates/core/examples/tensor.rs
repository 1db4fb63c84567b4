//! Total-degree index sets and the sparse triple-product tensor.

use chaosproj::multibasis::{cardinality, MultiIndexBasis};
use chaosproj::polybasis::{Distribution, Germ};

fn main() -> chaosproj::Result<()> {
    for (n, d) in [(1, 4), (2, 2), (8, 1), (8, 2), (10, 4)] {
        println!("N = {n:>2}, degree {d}: |A| = {}", cardinality(n, d));
    }
    let germs = vec![
        Germ::new("load", Distribution::normal(0.0, 1.0)?)?,
        Germ::new("irradiance", Distribution::uniform(-1.0, 1.0)?)?,
    ];
    let basis = MultiIndexBasis::new(germs, 2)?;
    let tensor = basis.triple_tensor()?;
    println!("basis of {} terms, tensor with {} non-zeros of {}", basis.len(), tensor.nnz(), tensor.size().pow(3));
    for (a, alpha) in basis.index_set().iter().enumerate() {
        println!("  mode {a}: {alpha}");
    }
    for (z, e, a, v) in tensor.entries().filter(|&(z, e, a, _)| z <= e && e <= a && a > 0) {
        println!("  <psi_{z} psi_{e} psi_{a}> = {v:.6}");
    }
    Ok(())
}
