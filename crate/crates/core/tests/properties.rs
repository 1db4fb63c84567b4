use chaosproj::multibasis::MultiIndexBasis;
use chaosproj::polybasis::{standardize, Distribution, Germ};
use chaosproj::sa_benchmark::lhs_sample;
use proptest::prelude::*;

fn distribution() -> impl Strategy<Value = Distribution> {
    prop_oneof![
        (-5.0..5.0f64, 0.1..3.0f64).prop_map(|(m, s)| Distribution::normal(m, s).unwrap()),
        (-5.0..0.0f64, 0.1..4.0f64).prop_map(|(lo, w)| Distribution::uniform(lo, lo + w).unwrap()),
        (0.3..6.0f64, 0.2..3.0f64).prop_map(|(k, th)| Distribution::gamma(k, th).unwrap()),
        (0.3..5.0f64, 0.3..5.0f64).prop_map(|(a, b)| Distribution::beta(a, b, -1.0, 2.0).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn families_are_orthonormal(dist in distribution()) {
        let (family, map) = standardize(&dist).unwrap();
        let rule = family.gauss_rule(7).unwrap();
        for m in 0..=6 {
            for n in 0..=6 {
                let ip = rule.integrate(|y| family.eval(m, y).unwrap() * family.eval(n, y).unwrap());
                prop_assert!((ip - f64::from(u8::from(m == n))).abs() < 1e-9, "<{m},{n}> = {ip}");
            }
        }
        let mean = rule.integrate(|y| map.apply(y));
        prop_assert!((mean - dist.mean()).abs() < 1e-9 * (1.0 + dist.mean().abs()));
    }

    #[test]
    fn tensor_is_symmetric_with_unit_diagonal(a in distribution(), b in distribution(), degree in 1usize..=2) {
        let basis = MultiIndexBasis::new(vec![Germ::new("a", a).unwrap(), Germ::new("b", b).unwrap()], degree).unwrap();
        let t = basis.triple_tensor().unwrap();
        let k = basis.len();
        for i in 0..k {
            prop_assert!((t.get(0, i, i) - 1.0).abs() < 1e-10);
            for j in 0..k {
                for l in 0..k {
                    prop_assert_eq!(t.get(i, j, l).to_bits(), t.get(l, i, j).to_bits());
                    prop_assert_eq!(t.get(i, j, l).to_bits(), t.get(j, i, l).to_bits());
                }
            }
        }
    }

    #[test]
    fn lhs_puts_one_draw_in_each_stratum(dists in prop::collection::vec(distribution(), 1..4), n in 1usize..60, seed in any::<u64>()) {
        let germs: Vec<Germ> = dists.iter().enumerate().map(|(i, d)| Germ::new(format!("g{i}"), *d).unwrap()).collect();
        let set = lhs_sample(&germs, n, seed).unwrap();
        prop_assert_eq!(set.samples.len(), n);
        for (d, g) in germs.iter().enumerate() {
            let mut hits = vec![0usize; n];
            for s in &set.samples {
                let u = g.distribution.cdf(s[d]);
                hits[((u * n as f64) as usize).min(n - 1)] += 1;
            }
            prop_assert!(hits.iter().all(|&h| h == 1), "{hits:?}");
        }
    }
}
