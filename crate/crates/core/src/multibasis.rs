//! Multivariate tensor-product basis over all germs.
//!
//! The index set is the total-degree set `{α : Σ α_i ≤ d}` in graded
//! lexicographic order: lower total degree first and, within a degree, larger
//! leading components first. The constant index is therefore always position
//! 0, which is where the mean of an expansion lives.

use std::collections::HashMap;
use std::fmt;
use std::sync::OnceLock;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::polybasis::{nodes_for_degree, Germ};

/// Entries of the triple-product tensor below this magnitude are quadrature
/// round-off on structural zeros and are not stored.
pub const TENSOR_DROP_TOL: f64 = 1e-12;

/// Per-germ polynomial degrees of one multivariate basis function.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex(pub Vec<usize>);

impl MultiIndex {
    pub fn zeros(n: usize) -> Self {
        MultiIndex(vec![0; n])
    }

    pub fn unit(n: usize, i: usize) -> Self {
        let mut v = vec![0; n];
        v[i] = 1;
        MultiIndex(v)
    }

    pub fn total_degree(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn degrees(&self) -> &[usize] {
        &self.0
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, d) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{d}")?;
        }
        write!(f, ")")
    }
}

/// `C(n + d, d)`, the size of the total-degree index set.
pub fn cardinality(n_germs: usize, max_degree: usize) -> usize {
    let k = max_degree.min(n_germs);
    (1..=k).fold(1usize, |acc, i| acc * (n_germs + max_degree - k + i) / i)
}

/// All multi-indices of total degree at most `max_degree`, graded-lex ordered.
pub fn build_index_set(n_germs: usize, max_degree: usize) -> Vec<MultiIndex> {
    let mut out = Vec::with_capacity(cardinality(n_germs, max_degree));
    for degree in 0..=max_degree {
        let mut current = vec![0; n_germs];
        compositions(degree, 0, &mut current, &mut out);
        if n_germs == 0 {
            break;
        }
    }
    out
}

fn compositions(remaining: usize, pos: usize, current: &mut Vec<usize>, out: &mut Vec<MultiIndex>) {
    if pos + 1 >= current.len() {
        if let Some(last) = current.last_mut() {
            *last = remaining;
        } else if remaining > 0 {
            return;
        }
        out.push(MultiIndex(current.clone()));
        return;
    }
    for first in (0..=remaining).rev() {
        current[pos] = first;
        compositions(remaining - first, pos + 1, current, out);
    }
    current[pos] = 0;
}

/// Sparse symmetric tensor `M[ζ][η][α] = ⟨Ψ_ζ Ψ_η, Ψ_α⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct TripleTensor {
    size: usize,
    // Row-major by first index: for each ζ, sorted (η, α, value).
    rows: Vec<Vec<(usize, usize, f64)>>,
}

impl TripleTensor {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn get(&self, zeta: usize, eta: usize, alpha: usize) -> f64 {
        let row = &self.rows[zeta];
        match row.binary_search_by(|&(e, a, _)| (e, a).cmp(&(eta, alpha))) {
            Ok(pos) => row[pos].2,
            Err(_) => 0.0,
        }
    }

    /// Stored entries with first index `zeta`, as `(η, α, value)`.
    pub fn slice(&self, zeta: usize) -> &[(usize, usize, f64)] {
        &self.rows[zeta]
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, usize, f64)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(z, row)| row.iter().map(move |&(e, a, v)| (z, e, a, v)))
    }
}

/// Truncated multivariate orthonormal basis over an ordered list of germs.
pub struct MultiIndexBasis {
    germs: Vec<Germ>,
    max_degree: usize,
    index_set: Vec<MultiIndex>,
    lookup: HashMap<MultiIndex, usize>,
    tensor: OnceLock<TripleTensor>,
}

impl MultiIndexBasis {
    pub fn new(germs: Vec<Germ>, max_degree: usize) -> Result<Self> {
        for g in &germs {
            if g.family.max_degree() < max_degree {
                return Err(Error::DegreeOutOfRange {
                    degree: max_degree,
                    max: g.family.max_degree(),
                });
            }
        }
        let index_set = build_index_set(germs.len(), max_degree);
        let lookup = index_set
            .iter()
            .enumerate()
            .map(|(i, a)| (a.clone(), i))
            .collect();
        Ok(MultiIndexBasis {
            germs,
            max_degree,
            index_set,
            lookup,
            tensor: OnceLock::new(),
        })
    }

    pub fn germs(&self) -> &[Germ] {
        &self.germs
    }

    pub fn n_germs(&self) -> usize {
        self.germs.len()
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn len(&self) -> usize {
        self.index_set.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index_set.is_empty()
    }

    pub fn index_set(&self) -> &[MultiIndex] {
        &self.index_set
    }

    pub fn position(&self, alpha: &MultiIndex) -> Option<usize> {
        self.lookup.get(alpha).copied()
    }

    /// Position of the first-degree index of germ `i`, if retained.
    pub fn unit_position(&self, germ: usize) -> Option<usize> {
        if self.max_degree == 0 {
            return None;
        }
        self.position(&MultiIndex::unit(self.germs.len(), germ))
    }

    fn check_dim(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.germs.len() {
            return Err(Error::DimensionMismatch {
                expected: self.germs.len(),
                got: y.len(),
            });
        }
        Ok(())
    }

    /// `Ψ_α(y)` for standardized germ values `y`.
    pub fn eval_basis(&self, alpha: &MultiIndex, y: &[f64]) -> Result<f64> {
        self.check_dim(y)?;
        if alpha.0.len() != self.germs.len() {
            return Err(Error::DimensionMismatch {
                expected: self.germs.len(),
                got: alpha.0.len(),
            });
        }
        self.germs
            .iter()
            .zip(&alpha.0)
            .zip(y)
            .try_fold(1.0, |acc, ((g, &d), &yi)| Ok(acc * g.family.eval(d, yi)?))
    }

    /// All `Ψ_α(y)` in index-set order.
    pub fn eval_all(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(y)?;
        let per_germ = self
            .germs
            .iter()
            .zip(y)
            .map(|(g, &yi)| g.family.eval_all(self.max_degree, yi))
            .collect::<Result<Vec<_>>>()?;
        Ok(self
            .index_set
            .iter()
            .map(|alpha| {
                alpha
                    .0
                    .iter()
                    .enumerate()
                    .map(|(i, &d)| per_germ[i][d])
                    .product()
            })
            .collect())
    }

    /// Standardized germ values for a natural-unit realization.
    pub fn standardize(&self, omega: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(omega)?;
        Ok(self
            .germs
            .iter()
            .zip(omega)
            .map(|(g, &w)| g.standardize(w))
            .collect())
    }

    /// The triple-product tensor, computed on first use with the minimal exact rule.
    pub fn triple_tensor(&self) -> Result<&TripleTensor> {
        if let Some(t) = self.tensor.get() {
            return Ok(t);
        }
        let t = self.compute_tensor(nodes_for_degree(3 * self.max_degree))?;
        Ok(self.tensor.get_or_init(|| t))
    }

    /// Builds the tensor with an explicit per-germ quadrature order.
    pub fn triple_tensor_with_order(&self, nodes: usize) -> Result<TripleTensor> {
        self.compute_tensor(nodes)
    }

    fn compute_tensor(&self, nodes: usize) -> Result<TripleTensor> {
        let d = self.max_degree;
        let need = nodes_for_degree(3 * d);
        if nodes < need {
            return Err(Error::InsufficientQuadrature {
                have: nodes,
                need,
                degree: 3 * d,
            });
        }
        // Univariate tables t[i][a][b][c]; separability of the tensor-product basis.
        let tables = self
            .germs
            .iter()
            .map(|g| {
                let rule = g.family.gauss_rule(nodes)?;
                let mut t = vec![0.0; (d + 1).pow(3)];
                for a in 0..=d {
                    for b in a..=d {
                        for c in b..=d {
                            let v = g.family.triple_product_with(&rule, a, b, c)?;
                            for (x, y, z) in permutations(a, b, c) {
                                t[(x * (d + 1) + y) * (d + 1) + z] = v;
                            }
                        }
                    }
                }
                Ok(t)
            })
            .collect::<Result<Vec<_>>>()?;
        let n = self.index_set.len();
        let idx = |a: usize, b: usize, c: usize| (a * (d + 1) + b) * (d + 1) + c;
        let value = |z: usize, e: usize, a: usize| -> f64 {
            let (mz, me, ma) = (&self.index_set[z].0, &self.index_set[e].0, &self.index_set[a].0);
            let mut v = 1.0;
            for (i, t) in tables.iter().enumerate() {
                v *= t[idx(mz[i], me[i], ma[i])];
                if v == 0.0 {
                    break;
                }
            }
            v
        };
        // Canonical triples z ≤ e ≤ a, then mirrored, so symmetry is exact.
        let canonical: Vec<Vec<(usize, usize, f64)>> = (0..n)
            .into_par_iter()
            .map(|z| {
                let mut row = Vec::new();
                for e in z..n {
                    for a in e..n {
                        let v = value(z, e, a);
                        if v.abs() > TENSOR_DROP_TOL {
                            row.push((e, a, v));
                        }
                    }
                }
                row
            })
            .collect();
        let mut rows: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); n];
        for (z, row) in canonical.iter().enumerate() {
            for &(e, a, v) in row {
                for (x, y, w) in permutations(z, e, a) {
                    rows[x].push((y, w, v));
                }
            }
        }
        for row in &mut rows {
            row.sort_by(|p, q| (p.0, p.1).cmp(&(q.0, q.1)));
            row.dedup_by(|p, q| p.0 == q.0 && p.1 == q.1);
        }
        Ok(TripleTensor { size: n, rows })
    }
}

fn permutations(a: usize, b: usize, c: usize) -> [(usize, usize, usize); 6] {
    [
        (a, b, c),
        (a, c, b),
        (b, a, c),
        (b, c, a),
        (c, a, b),
        (c, b, a),
    ]
}

impl fmt::Debug for MultiIndexBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MultiIndexBasis")
            .field("germs", &self.germs.iter().map(|g| &g.name).collect::<Vec<_>>())
            .field("max_degree", &self.max_degree)
            .field("cardinality", &self.index_set.len())
            .finish()
    }
}

/// Expansion coefficients of one variable, in index-set order.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientVector(pub Vec<f64>);

impl CoefficientVector {
    pub fn moments(&self) -> (f64, f64) {
        moments(&self.0)
    }

    /// `Σ_α c_α Ψ_α(y)`.
    pub fn evaluate(&self, basis: &MultiIndexBasis, y: &[f64]) -> Result<f64> {
        if self.0.len() != basis.len() {
            return Err(Error::DimensionMismatch {
                expected: basis.len(),
                got: self.0.len(),
            });
        }
        Ok(basis
            .eval_all(y)?
            .iter()
            .zip(&self.0)
            .map(|(p, c)| p * c)
            .sum())
    }
}

/// Mean (constant coefficient) and variance (sum of squares of the rest).
pub fn moments(coeffs: &[f64]) -> (f64, f64) {
    let mean = coeffs.first().copied().unwrap_or(0.0);
    let var = coeffs.iter().skip(1).map(|c| c * c).sum();
    (mean, var)
}
