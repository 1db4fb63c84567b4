//! Univariate orthonormal polynomial families matched to input distributions.
//!
//! Every supported marginal is mapped onto a standardized germ through an
//! affine transform, and the germ is paired with its Askey-scheme family:
//!
//! | distribution | standardized germ        | family                          |
//! |--------------|--------------------------|---------------------------------|
//! | normal       | N(0, 1)                  | Hermite (probabilists')         |
//! | uniform      | U(-1, 1)                 | Legendre                        |
//! | gamma(k, θ)  | Gamma(k, 1) on [0, ∞)    | generalized Laguerre, α = k - 1 |
//! | beta(a, b)   | 2·Beta(a, b) - 1         | Jacobi, α = b - 1, β = a - 1    |
//!
//! All families are orthonormal under the germ's probability measure, so the
//! degree-0 polynomial is identically one and every norm is one. Inner
//! products are evaluated with Gauss rules built from the three-term
//! recurrence (Golub–Welsch).

use std::collections::BTreeMap;
use std::fmt;
use std::sync::{Arc, Mutex};

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF, Gamma, Normal, Uniform};

use crate::error::{Error, Result};

/// Highest polynomial degree a family built by [`standardize`] supports.
pub const DEFAULT_MAX_DEGREE: usize = 32;

/// Marginal distribution of one uncertain input, in natural units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Distribution {
    Normal { mean: f64, sd: f64 },
    Uniform { lower: f64, upper: f64 },
    /// Shape `shape` (k) and scale `scale` (θ); support `[0, ∞)`.
    Gamma { shape: f64, scale: f64 },
    /// Beta(`alpha`, `beta`) stretched onto `[lower, upper]`.
    Beta {
        alpha: f64,
        beta: f64,
        lower: f64,
        upper: f64,
    },
}

impl Distribution {
    pub fn normal(mean: f64, sd: f64) -> Result<Self> {
        let d = Distribution::Normal { mean, sd };
        d.validate()?;
        Ok(d)
    }

    pub fn uniform(lower: f64, upper: f64) -> Result<Self> {
        let d = Distribution::Uniform { lower, upper };
        d.validate()?;
        Ok(d)
    }

    /// Uniform distribution with the given mean and standard deviation.
    pub fn uniform_from_moments(mean: f64, sd: f64) -> Result<Self> {
        let half = sd * 3f64.sqrt();
        Self::uniform(mean - half, mean + half)
    }

    pub fn gamma(shape: f64, scale: f64) -> Result<Self> {
        let d = Distribution::Gamma { shape, scale };
        d.validate()?;
        Ok(d)
    }

    pub fn beta(alpha: f64, beta: f64, lower: f64, upper: f64) -> Result<Self> {
        let d = Distribution::Beta {
            alpha,
            beta,
            lower,
            upper,
        };
        d.validate()?;
        Ok(d)
    }

    /// Builds a distribution from a kind name and named parameters, as found
    /// in model files. Unknown kinds are rejected by name.
    pub fn from_kind(kind: &str, params: &[(&str, f64)]) -> Result<Self> {
        let get = |key: &str| -> Result<f64> {
            params
                .iter()
                .find(|(k, _)| *k == key)
                .map(|(_, v)| *v)
                .ok_or_else(|| {
                    Error::InvalidDistribution(format!("{kind} requires parameter `{key}`"))
                })
        };
        let allowed: &[&str] = match kind {
            "normal" => &["mean", "sd"],
            "uniform" => &["lower", "upper"],
            "gamma" => &["shape", "scale"],
            "beta" => &["alpha", "beta", "lower", "upper"],
            other => return Err(Error::UnsupportedDistribution(other.to_string())),
        };
        if let Some((k, _)) = params.iter().find(|(k, _)| !allowed.contains(k)) {
            return Err(Error::InvalidDistribution(format!(
                "{kind} has no parameter `{k}`"
            )));
        }
        match kind {
            "normal" => Self::normal(get("mean")?, get("sd")?),
            "uniform" => Self::uniform(get("lower")?, get("upper")?),
            "gamma" => Self::gamma(get("shape")?, get("scale")?),
            _ => Self::beta(get("alpha")?, get("beta")?, get("lower")?, get("upper")?),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Distribution::Normal { .. } => "normal",
            Distribution::Uniform { .. } => "uniform",
            Distribution::Gamma { .. } => "gamma",
            Distribution::Beta { .. } => "beta",
        }
    }

    /// Named parameters in canonical order (inverse of [`Distribution::from_kind`]).
    pub fn params(&self) -> Vec<(&'static str, f64)> {
        match *self {
            Distribution::Normal { mean, sd } => vec![("mean", mean), ("sd", sd)],
            Distribution::Uniform { lower, upper } => vec![("lower", lower), ("upper", upper)],
            Distribution::Gamma { shape, scale } => vec![("shape", shape), ("scale", scale)],
            Distribution::Beta {
                alpha,
                beta,
                lower,
                upper,
            } => vec![
                ("alpha", alpha),
                ("beta", beta),
                ("lower", lower),
                ("upper", upper),
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidDistribution(msg));
        let finite = self.params().iter().all(|(_, v)| v.is_finite());
        if !finite {
            return bad(format!("{} parameters must be finite", self.kind_name()));
        }
        match *self {
            Distribution::Normal { sd, .. } if sd <= 0.0 => {
                bad(format!("normal sd must be positive, got {sd}"))
            }
            Distribution::Uniform { lower, upper } if lower >= upper => {
                bad(format!("uniform needs lower < upper, got [{lower}, {upper}]"))
            }
            Distribution::Gamma { shape, scale } if shape <= 0.0 || scale <= 0.0 => bad(format!(
                "gamma shape and scale must be positive, got ({shape}, {scale})"
            )),
            Distribution::Beta {
                alpha,
                beta,
                lower,
                upper,
            } if alpha <= 0.0 || beta <= 0.0 || lower >= upper => bad(format!(
                "beta needs positive shapes and lower < upper, got ({alpha}, {beta}, [{lower}, {upper}])"
            )),
            _ => Ok(()),
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Distribution::Normal { mean, .. } => mean,
            Distribution::Uniform { lower, upper } => 0.5 * (lower + upper),
            Distribution::Gamma { shape, scale } => shape * scale,
            Distribution::Beta {
                alpha,
                beta,
                lower,
                upper,
            } => lower + (upper - lower) * alpha / (alpha + beta),
        }
    }

    pub fn sd(&self) -> f64 {
        match *self {
            Distribution::Normal { sd, .. } => sd,
            Distribution::Uniform { lower, upper } => (upper - lower) / (2.0 * 3f64.sqrt()),
            Distribution::Gamma { shape, scale } => shape.sqrt() * scale,
            Distribution::Beta {
                alpha,
                beta,
                lower,
                upper,
            } => {
                let s = alpha + beta;
                (upper - lower) * (alpha * beta / (s * s * (s + 1.0))).sqrt()
            }
        }
    }

    /// Support in natural units.
    pub fn support(&self) -> (f64, f64) {
        match *self {
            Distribution::Normal { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            Distribution::Uniform { lower, upper } | Distribution::Beta { lower, upper, .. } => {
                (lower, upper)
            }
            Distribution::Gamma { .. } => (0.0, f64::INFINITY),
        }
    }

    /// Inverse CDF of the standardized germ at probability `p ∈ (0, 1)`.
    pub fn standardized_quantile(&self, p: f64) -> f64 {
        match *self {
            Distribution::Normal { .. } => Normal::standard().inverse_cdf(p),
            Distribution::Uniform { .. } => 2.0 * p - 1.0,
            Distribution::Gamma { shape, .. } => Gamma::new(shape, 1.0)
                .expect("validated gamma shape")
                .inverse_cdf(p),
            Distribution::Beta { alpha, beta, .. } => {
                2.0 * Beta::new(alpha, beta)
                    .expect("validated beta shapes")
                    .inverse_cdf(p)
                    - 1.0
            }
        }
    }

    /// Inverse CDF in natural units.
    pub fn quantile(&self, p: f64) -> f64 {
        self.affine_map().apply(self.standardized_quantile(p))
    }

    /// CDF in natural units.
    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            Distribution::Normal { mean, sd } => Normal::new(mean, sd).expect("validated").cdf(x),
            Distribution::Uniform { lower, upper } => {
                Uniform::new(lower, upper).expect("validated").cdf(x)
            }
            Distribution::Gamma { shape, scale } => Gamma::new(shape, 1.0 / scale)
                .expect("validated")
                .cdf(x),
            Distribution::Beta {
                alpha,
                beta,
                lower,
                upper,
            } => Beta::new(alpha, beta)
                .expect("validated")
                .cdf(((x - lower) / (upper - lower)).clamp(0.0, 1.0)),
        }
    }

    /// Affine map from the standardized germ to natural units.
    pub fn affine_map(&self) -> AffineMap {
        match *self {
            Distribution::Normal { mean, sd } => AffineMap::new(mean, sd),
            Distribution::Uniform { lower, upper } | Distribution::Beta { lower, upper, .. } => {
                AffineMap::new(0.5 * (lower + upper), 0.5 * (upper - lower))
            }
            Distribution::Gamma { scale, .. } => AffineMap::new(0.0, scale),
        }
    }

    pub fn family_kind(&self) -> FamilyKind {
        match *self {
            Distribution::Normal { .. } => FamilyKind::Hermite,
            Distribution::Uniform { .. } => FamilyKind::Legendre,
            Distribution::Gamma { shape, .. } => FamilyKind::Laguerre { alpha: shape - 1.0 },
            Distribution::Beta { alpha, beta, .. } => FamilyKind::Jacobi {
                alpha: beta - 1.0,
                beta: alpha - 1.0,
            },
        }
    }
}

/// `x = offset + scale · y`, mapping a standardized germ value `y` to natural units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineMap {
    pub offset: f64,
    pub scale: f64,
}

impl AffineMap {
    pub fn new(offset: f64, scale: f64) -> Self {
        AffineMap { offset, scale }
    }

    pub fn identity() -> Self {
        AffineMap::new(0.0, 1.0)
    }

    pub fn apply(&self, y: f64) -> f64 {
        self.offset + self.scale * y
    }

    pub fn invert(&self, x: f64) -> f64 {
        (x - self.offset) / self.scale
    }
}

/// Askey-scheme family, parametrized on the standardized germ domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FamilyKind {
    /// Probabilists' Hermite, standard normal weight.
    Hermite,
    /// Legendre, uniform weight on `[-1, 1]`.
    Legendre,
    /// Generalized Laguerre, weight `y^alpha e^{-y}` on `[0, ∞)`.
    Laguerre { alpha: f64 },
    /// Jacobi, weight `(1 - y)^alpha (1 + y)^beta` on `[-1, 1]`.
    Jacobi { alpha: f64, beta: f64 },
}

impl FamilyKind {
    pub fn name(&self) -> &'static str {
        match self {
            FamilyKind::Hermite => "hermite",
            FamilyKind::Legendre => "legendre",
            FamilyKind::Laguerre { .. } => "laguerre",
            FamilyKind::Jacobi { .. } => "jacobi",
        }
    }

    /// Monic recurrence `p_{n+1} = (y - a_n) p_n - b_n p_{n-1}` for the
    /// normalized (probability) weight, so `b_0 = 1`.
    fn monic_coefficients(&self, n: usize) -> (f64, f64) {
        let nf = n as f64;
        match *self {
            FamilyKind::Hermite => (0.0, if n == 0 { 1.0 } else { nf }),
            FamilyKind::Legendre => (
                0.0,
                if n == 0 {
                    1.0
                } else {
                    nf * nf / (4.0 * nf * nf - 1.0)
                },
            ),
            FamilyKind::Laguerre { alpha } => (
                2.0 * nf + alpha + 1.0,
                if n == 0 { 1.0 } else { nf * (nf + alpha) },
            ),
            FamilyKind::Jacobi { alpha, beta } => {
                let s = alpha + beta;
                let a = if n == 0 {
                    (beta - alpha) / (s + 2.0)
                } else {
                    (beta * beta - alpha * alpha) / ((2.0 * nf + s) * (2.0 * nf + s + 2.0))
                };
                let b = match n {
                    0 => 1.0,
                    1 => 4.0 * (1.0 + alpha) * (1.0 + beta) / ((2.0 + s).powi(2) * (3.0 + s)),
                    _ => {
                        let t = 2.0 * nf + s;
                        4.0 * nf * (nf + alpha) * (nf + beta) * (nf + s)
                            / (t * t * (t + 1.0) * (t - 1.0))
                    }
                };
                (a, b)
            }
        }
    }
}

/// Gauss rule on the standardized germ domain; weights absorb the density and sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Highest polynomial degree integrated exactly.
    pub fn exact_degree(&self) -> usize {
        2 * self.len() - 1
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

/// Number of Gauss nodes needed to integrate a polynomial of total degree `degree` exactly.
pub fn nodes_for_degree(degree: usize) -> usize {
    (degree + 2) / 2
}

/// An orthonormal polynomial family with recurrence coefficients up to a fixed degree.
pub struct PolynomialFamily {
    kind: FamilyKind,
    max_degree: usize,
    // Orthonormal recurrence: sqrt(b_{n+1}) ψ_{n+1} = (y - a_n) ψ_n - sqrt(b_n) ψ_{n-1}.
    alpha: Vec<f64>,
    sqrt_beta: Vec<f64>,
    rules: Mutex<BTreeMap<usize, Arc<QuadratureRule>>>,
}

impl PolynomialFamily {
    /// Builds the family with recurrence coefficients for degrees `0..=max_degree`.
    pub fn new(kind: FamilyKind, max_degree: usize) -> Result<Self> {
        match kind {
            FamilyKind::Laguerre { alpha } if alpha <= -1.0 => {
                return Err(Error::InvalidDistribution(format!(
                    "laguerre parameter must exceed -1, got {alpha}"
                )))
            }
            FamilyKind::Jacobi { alpha, beta } if alpha <= -1.0 || beta <= -1.0 => {
                return Err(Error::InvalidDistribution(format!(
                    "jacobi parameters must exceed -1, got ({alpha}, {beta})"
                )))
            }
            _ => {}
        }
        // One extra coefficient so that the (max_degree + 1)-node rule is available.
        let (alpha, sqrt_beta) = (0..=max_degree + 1)
            .map(|n| {
                let (a, b) = kind.monic_coefficients(n);
                (a, b.sqrt())
            })
            .unzip();
        Ok(PolynomialFamily {
            kind,
            max_degree,
            alpha,
            sqrt_beta,
            rules: Mutex::new(BTreeMap::new()),
        })
    }

    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    /// Mean of the standardized germ (`a_0`).
    pub fn germ_mean(&self) -> f64 {
        self.alpha[0]
    }

    /// Standard deviation of the standardized germ; `y = germ_mean + germ_sd · ψ_1(y)`.
    pub fn germ_sd(&self) -> f64 {
        self.sqrt_beta[1]
    }

    /// Support of the standardized germ.
    pub fn support(&self) -> (f64, f64) {
        match self.kind {
            FamilyKind::Hermite => (f64::NEG_INFINITY, f64::INFINITY),
            FamilyKind::Legendre | FamilyKind::Jacobi { .. } => (-1.0, 1.0),
            FamilyKind::Laguerre { .. } => (0.0, f64::INFINITY),
        }
    }

    /// Orthonormal polynomial of degree `degree` at `y`.
    pub fn eval(&self, degree: usize, y: f64) -> Result<f64> {
        self.check_degree(degree)?;
        Ok(*self.eval_upto(degree, y).last().expect("non-empty"))
    }

    /// Values of `ψ_0 … ψ_degree` at `y`.
    pub fn eval_all(&self, degree: usize, y: f64) -> Result<Vec<f64>> {
        self.check_degree(degree)?;
        Ok(self.eval_upto(degree, y))
    }

    fn eval_upto(&self, degree: usize, y: f64) -> Vec<f64> {
        let mut values = Vec::with_capacity(degree + 1);
        values.push(1.0);
        let (mut prev, mut cur) = (0.0, 1.0);
        for n in 0..degree {
            let next = ((y - self.alpha[n]) * cur - self.sqrt_beta[n] * prev) / self.sqrt_beta[n + 1];
            prev = cur;
            cur = next;
            values.push(cur);
        }
        values
    }

    fn check_degree(&self, degree: usize) -> Result<()> {
        if degree > self.max_degree {
            return Err(Error::DegreeOutOfRange {
                degree,
                max: self.max_degree,
            });
        }
        Ok(())
    }

    /// `n`-node Gauss rule from the eigen-decomposition of the Jacobi matrix.
    pub fn gauss_rule(&self, n: usize) -> Result<Arc<QuadratureRule>> {
        if n == 0 {
            return Err(Error::InsufficientQuadrature {
                have: 0,
                need: 1,
                degree: 0,
            });
        }
        if n > self.max_degree + 1 {
            return Err(Error::DegreeOutOfRange {
                degree: n,
                max: self.max_degree + 1,
            });
        }
        if let Some(rule) = self.rules.lock().expect("rule cache poisoned").get(&n) {
            return Ok(Arc::clone(rule));
        }
        let rule = Arc::new(self.compute_rule(n)?);
        self.rules
            .lock()
            .expect("rule cache poisoned")
            .insert(n, Arc::clone(&rule));
        Ok(rule)
    }

    fn compute_rule(&self, n: usize) -> Result<QuadratureRule> {
        let jacobi = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                self.alpha[i]
            } else if i + 1 == j {
                self.sqrt_beta[j]
            } else if j + 1 == i {
                self.sqrt_beta[i]
            } else {
                0.0
            }
        });
        let eig = SymmetricEigen::try_new(jacobi, 1e-15, 10_000).ok_or_else(|| {
            Error::EigenSolve(format!(
                "{} recurrence matrix of order {n} did not converge",
                self.kind.name()
            ))
        })?;
        let mut pairs: Vec<(f64, f64)> = (0..n)
            .map(|k| (eig.eigenvalues[k], eig.eigenvectors[(0, k)].powi(2)))
            .collect();
        if pairs.iter().any(|(x, w)| !x.is_finite() || !w.is_finite()) {
            return Err(Error::EigenSolve(format!(
                "non-finite nodes or weights for {} rule of order {n}",
                self.kind.name()
            )));
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (nodes, weights) = pairs.into_iter().unzip();
        Ok(QuadratureRule { nodes, weights })
    }

    /// `⟨ψ_m, ψ_n⟩` under the germ measure, using the smallest exact rule.
    pub fn inner_product(&self, m: usize, n: usize) -> Result<f64> {
        let rule = self.gauss_rule(nodes_for_degree(m + n))?;
        self.inner_product_with(&rule, m, n)
    }

    /// `⟨ψ_m, ψ_n⟩` with a caller-supplied rule; rejects rules that are too small.
    pub fn inner_product_with(&self, rule: &QuadratureRule, m: usize, n: usize) -> Result<f64> {
        let need = nodes_for_degree(m + n);
        if rule.len() < need {
            return Err(Error::InsufficientQuadrature {
                have: rule.len(),
                need,
                degree: m + n,
            });
        }
        let top = m.max(n);
        self.check_degree(top)?;
        Ok(rule.integrate(|y| {
            let v = self.eval_upto(top, y);
            v[m] * v[n]
        }))
    }

    /// `⟨ψ_i ψ_j, ψ_k⟩` under the germ measure.
    pub fn triple_product(&self, i: usize, j: usize, k: usize) -> Result<f64> {
        let rule = self.gauss_rule(nodes_for_degree(i + j + k))?;
        self.triple_product_with(&rule, i, j, k)
    }

    pub fn triple_product_with(
        &self,
        rule: &QuadratureRule,
        i: usize,
        j: usize,
        k: usize,
    ) -> Result<f64> {
        let need = nodes_for_degree(i + j + k);
        if rule.len() < need {
            return Err(Error::InsufficientQuadrature {
                have: rule.len(),
                need,
                degree: i + j + k,
            });
        }
        let top = i.max(j).max(k);
        self.check_degree(top)?;
        Ok(rule.integrate(|y| {
            let v = self.eval_upto(top, y);
            v[i] * v[j] * v[k]
        }))
    }
}

impl Clone for PolynomialFamily {
    fn clone(&self) -> Self {
        PolynomialFamily {
            kind: self.kind,
            max_degree: self.max_degree,
            alpha: self.alpha.clone(),
            sqrt_beta: self.sqrt_beta.clone(),
            rules: Mutex::new(BTreeMap::new()),
        }
    }
}

impl fmt::Debug for PolynomialFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PolynomialFamily")
            .field("kind", &self.kind)
            .field("max_degree", &self.max_degree)
            .finish()
    }
}

impl PartialEq for PolynomialFamily {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind && self.max_degree == other.max_degree
    }
}

/// Askey-matched family and the affine map from the standardized germ to natural units.
pub fn standardize(dist: &Distribution) -> Result<(PolynomialFamily, AffineMap)> {
    dist.validate()?;
    let family = PolynomialFamily::new(dist.family_kind(), DEFAULT_MAX_DEGREE)?;
    Ok((family, dist.affine_map()))
}

/// One independent uncertain input: a named distribution with its matched family.
#[derive(Debug, Clone, PartialEq)]
pub struct Germ {
    pub name: String,
    pub distribution: Distribution,
    pub family: Arc<PolynomialFamily>,
    pub map: AffineMap,
}

impl Germ {
    pub fn new(name: impl Into<String>, distribution: Distribution) -> Result<Self> {
        let (family, map) = standardize(&distribution)?;
        Ok(Germ {
            name: name.into(),
            distribution,
            family: Arc::new(family),
            map,
        })
    }

    /// Natural-unit value to standardized germ value.
    pub fn standardize(&self, natural: f64) -> f64 {
        self.map.invert(natural)
    }

    pub fn natural(&self, standardized: f64) -> f64 {
        self.map.apply(standardized)
    }

    pub fn in_support(&self, natural: f64) -> bool {
        let (lo, hi) = self.distribution.support();
        natural >= lo && natural <= hi
    }

    /// Expansion of the natural-unit germ on `(ψ_0, ψ_1)`: `(mean, sd)`.
    pub fn linear_modes(&self) -> (f64, f64) {
        (
            self.map.apply(self.family.germ_mean()),
            self.map.scale * self.family.germ_sd(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn family(kind: FamilyKind) -> PolynomialFamily {
        PolynomialFamily::new(kind, 12).unwrap()
    }

    #[test]
    fn degree_zero_is_one() {
        let f = family(FamilyKind::Laguerre { alpha: 0.5 });
        for y in [-3.0, 0.0, 0.7, 42.0] {
            assert_eq!(f.eval(0, y).unwrap(), 1.0);
        }
    }

    #[test]
    fn hermite_degree_two_at_origin() {
        let f = family(FamilyKind::Hermite);
        assert!((f.eval(2, 0.0).unwrap() + 1.0 / 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn legendre_degree_one_at_endpoint() {
        let f = family(FamilyKind::Legendre);
        assert!((f.eval(1, 1.0).unwrap() - 3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn degree_beyond_range_is_rejected() {
        let f = family(FamilyKind::Hermite);
        assert!(matches!(
            f.eval(13, 0.0),
            Err(Error::DegreeOutOfRange { degree: 13, max: 12 })
        ));
    }

    #[test]
    fn single_node_hermite_rule() {
        let rule = family(FamilyKind::Hermite).gauss_rule(1).unwrap();
        assert_eq!(rule.nodes, vec![0.0]);
        assert!((rule.weights[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_node_rule_rejected() {
        assert!(family(FamilyKind::Hermite).gauss_rule(0).is_err());
    }

    #[test]
    fn small_rule_rejected_for_inner_product() {
        let f = family(FamilyKind::Hermite);
        let rule = f.gauss_rule(2).unwrap();
        assert!(matches!(
            f.inner_product_with(&rule, 2, 2),
            Err(Error::InsufficientQuadrature { have: 2, need: 3, .. })
        ));
        assert!(f.inner_product_with(&rule, 1, 2).is_ok());
    }

    #[test]
    fn standardize_normal_and_uniform() {
        let (f, map) = standardize(&Distribution::normal(0.0, 4.28).unwrap()).unwrap();
        assert_eq!(f.kind(), FamilyKind::Hermite);
        assert_eq!(map, AffineMap::new(0.0, 4.28));

        let d = Distribution::uniform_from_moments(0.10, 0.0577).unwrap();
        let (f, map) = standardize(&d).unwrap();
        assert_eq!(f.kind(), FamilyKind::Legendre);
        assert!((map.offset - 0.10).abs() < 1e-15);
        assert!((map.scale - 0.0577 * 3f64.sqrt()).abs() < 1e-15);
        assert!((map.scale - 0.0999).abs() < 5e-5);
    }

    #[test]
    fn unknown_kind_is_named() {
        let err = Distribution::from_kind("triangular", &[]).unwrap_err();
        assert!(err.to_string().contains("triangular"));
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(Distribution::normal(0.0, 0.0).is_err());
        assert!(Distribution::uniform(1.0, 1.0).is_err());
        assert!(Distribution::gamma(-1.0, 1.0).is_err());
        assert!(Distribution::beta(2.0, 0.0, 0.0, 1.0).is_err());
        assert!(Distribution::from_kind("normal", &[("mean", 0.0)]).is_err());
        assert!(Distribution::from_kind("normal", &[("mean", 0.0), ("sd", 1.0), ("x", 1.0)]).is_err());
    }

    #[test]
    fn germ_moments_match_distribution() {
        let dists = [
            Distribution::normal(1.0, 2.0).unwrap(),
            Distribution::uniform(-2.0, 5.0).unwrap(),
            Distribution::gamma(2.5, 0.3).unwrap(),
            Distribution::beta(2.0, 3.0, 1.0, 4.0).unwrap(),
        ];
        for d in dists {
            let (f, map) = standardize(&d).unwrap();
            let mean = map.apply(f.germ_mean());
            let sd = map.scale * f.germ_sd();
            assert!((mean - d.mean()).abs() < 1e-12, "{d:?}");
            assert!((sd - d.sd()).abs() < 1e-12, "{d:?}");
        }
    }
}
