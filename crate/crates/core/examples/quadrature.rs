//! Orthonormal families and their Gauss rules for each supported distribution.

use chaosproj::polybasis::{standardize, Distribution};

fn main() -> chaosproj::Result<()> {
    let dists = [
        Distribution::normal(0.0, 1.0)?,
        Distribution::uniform(-1.0, 1.0)?,
        Distribution::gamma(3.0, 1.0)?,
        Distribution::beta(2.0, 5.0, 0.0, 1.0)?,
    ];
    for dist in &dists {
        let (family, map) = standardize(dist)?;
        let rule = family.gauss_rule(5)?;
        let mut worst: f64 = 0.0;
        for m in 0..=4 {
            for n in 0..=4 {
                let target = if m == n { 1.0 } else { 0.0 };
                worst = worst.max((family.inner_product_with(&rule, m, n)? - target).abs());
            }
        }
        let mean = rule.integrate(|y| map.apply(y));
        println!(
            "{:<8} family {:<9} nodes {} exact to degree {}, max Gram error {:.1e}, mean {:.6} (expected {:.6})",
            dist.kind_name(),
            family.kind().name(),
            rule.len(),
            rule.exact_degree(),
            worst,
            mean,
            dist.mean()
        );
    }
    Ok(())
}
