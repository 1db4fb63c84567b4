use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::multibasis::MultiIndexBasis;
use crate::sprog::{AffineExpr, Constraint, Sense, Stage, StochModel, VarId};

/// How a violation probability ε is turned into a safety factor λ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TailBound {
    /// `λ = Φ⁻¹(1 − ε)`, exact for Gaussian residuals.
    Gaussian,
    /// `λ = √((1 − ε)/ε)`, valid for any residual distribution.
    Cantelli,
}

impl TailBound {
    pub fn lambda(&self, epsilon: f64) -> f64 {
        match self {
            TailBound::Gaussian => Normal::standard().inverse_cdf(1.0 - epsilon),
            TailBound::Cantelli => ((1.0 - epsilon) / epsilon).sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectionSettings {
    /// Safety factor for inequalities without their own ε.
    pub lambda: f64,
    /// Global violation target, used for reporting and by the Cantelli bound.
    pub epsilon: f64,
    pub bound: TailBound,
    /// Accept terms whose exact expansion exceeds the basis degree and drop
    /// the excess modes instead of failing.
    pub truncate: bool,
}

impl Default for ProjectionSettings {
    fn default() -> Self {
        ProjectionSettings {
            lambda: 1.645,
            epsilon: 0.05,
            bound: TailBound::Gaussian,
            truncate: false,
        }
    }
}

impl ProjectionSettings {
    /// Gaussian settings whose global λ is derived from `epsilon`.
    pub fn with_epsilon(epsilon: f64) -> Self {
        ProjectionSettings {
            lambda: TailBound::Gaussian.lambda(epsilon),
            epsilon,
            ..Default::default()
        }
    }

    /// Distribution-free settings: λ from the Cantelli bound at `epsilon`.
    pub fn cantelli(epsilon: f64) -> Self {
        ProjectionSettings {
            lambda: TailBound::Cantelli.lambda(epsilon),
            epsilon,
            bound: TailBound::Cantelli,
            truncate: false,
        }
    }

    /// Safety factor for a constraint with an optional ε override.
    pub fn lambda_for(&self, epsilon: Option<f64>) -> Result<f64> {
        let lambda = match epsilon {
            Some(e) => self.bound.lambda(e),
            None => self.lambda,
        };
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::NonPositiveSafetyFactor(lambda));
        }
        Ok(lambda)
    }
}

/// `Σ coef · column + constant`, columns sorted and unique.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LinForm {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl LinForm {
    fn from_map(map: BTreeMap<usize, f64>, constant: f64) -> Self {
        LinForm {
            terms: map.into_iter().filter(|(_, c)| *c != 0.0).collect(),
            constant,
        }
    }

    /// No variable terms and a zero constant.
    pub fn is_zero(&self) -> bool {
        self.terms.is_empty() && self.constant == 0.0
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(j, c)| c * x[j]).sum::<f64>()
    }
}

/// Where a model variable lives among the projected columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Column {
    /// First-stage scalar: one column, constant mode only.
    First(usize),
    /// Recourse scalar: `|A|` consecutive columns starting here, one per mode.
    Second(usize),
}

/// Column layout: first-stage block first, then recourse coefficients
/// (variable-major, mode-minor in basis order).
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnLayout {
    pub columns: Vec<Column>,
    pub n_first: usize,
    pub n_second: usize,
    pub basis_len: usize,
}

impl ColumnLayout {
    pub fn new(model: &StochModel, basis_len: usize) -> Self {
        let n_first = model.first_stage_vars().count();
        let mut next_first = 0;
        let mut next_second = n_first;
        let columns = (0..model.n_vars())
            .map(|v| match model.stage(VarId(v)) {
                Stage::First => {
                    next_first += 1;
                    Column::First(next_first - 1)
                }
                Stage::Second => {
                    next_second += basis_len;
                    Column::Second(next_second - basis_len)
                }
            })
            .collect();
        ColumnLayout {
            columns,
            n_first,
            n_second: model.n_vars() - n_first,
            basis_len,
        }
    }

    pub fn n_columns(&self) -> usize {
        self.n_first + self.n_second * self.basis_len
    }

    pub fn column(&self, v: VarId) -> Column {
        self.columns[v.0]
    }

    /// Human-readable column labels (`x[3]`, `z[0]@(1,0)`).
    pub fn labels(&self, model: &StochModel, basis: &MultiIndexBasis) -> Vec<String> {
        let mut out = vec![String::new(); self.n_columns()];
        for (v, c) in self.columns.iter().enumerate() {
            let label = model.var_label(VarId(v));
            match *c {
                Column::First(j) => out[j] = label,
                Column::Second(base) => {
                    for (a, idx) in basis.index_set().iter().enumerate() {
                        out[base + a] = format!("{label}@{idx}");
                    }
                }
            }
        }
        out
    }
}

/// Stable identifier of a projected row: source constraint and basis mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RowId {
    pub source: usize,
    pub mode: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedEquality {
    pub id: RowId,
    /// `form = 0`.
    pub form: LinForm,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProjectedInequality {
    /// `form ≤ 0`.
    Linear { source: usize, form: LinForm },
    /// `mean + λ · ‖spread‖ ≤ 0`, one spread entry per non-constant mode.
    Soc {
        source: usize,
        mean: LinForm,
        lambda: f64,
        spread: Vec<(usize, LinForm)>,
    },
}

impl ProjectedInequality {
    pub fn source(&self) -> usize {
        match self {
            ProjectedInequality::Linear { source, .. } | ProjectedInequality::Soc { source, .. } => {
                *source
            }
        }
    }

    /// Left-hand side of the projected constraint at `x`; feasible iff `≤ 0`.
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        match self {
            ProjectedInequality::Linear { form, .. } => form.evaluate(x),
            ProjectedInequality::Soc {
                mean,
                lambda,
                spread,
                ..
            } => {
                let norm = spread
                    .iter()
                    .map(|(_, f)| f.evaluate(x).powi(2))
                    .sum::<f64>()
                    .sqrt();
                mean.evaluate(x) + lambda * norm
            }
        }
    }
}

/// Dimensions of a projected program.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectionReport {
    pub basis_len: usize,
    pub n_germs: usize,
    pub degree: usize,
    pub n_first: usize,
    pub n_coefficients: usize,
    pub n_columns: usize,
    pub n_equalities: usize,
    pub n_soc: usize,
    pub n_linear_inequalities: usize,
    /// Terms whose expansion was cut at the basis degree.
    pub truncated_terms: usize,
}

/// The deterministic coefficient-space counterpart of a stochastic model.
#[derive(Debug, Clone)]
pub struct ProjectedProgram {
    pub layout: ColumnLayout,
    pub equalities: Vec<ProjectedEquality>,
    pub inequalities: Vec<ProjectedInequality>,
    /// Expected cost: the constant mode of the projected objective.
    pub objective: LinForm,
    pub report: ProjectionReport,
}

/// Projection of one expression onto every basis mode.
struct ModeForms {
    rows: Vec<BTreeMap<usize, f64>>,
    constants: Vec<f64>,
    truncated: usize,
}

impl ModeForms {
    fn into_forms(self) -> Vec<LinForm> {
        self.rows
            .into_iter()
            .zip(self.constants)
            .map(|(m, c)| LinForm::from_map(m, c))
            .collect()
    }
}

/// Basis over the model's germs, in model order.
pub fn basis_for(model: &StochModel, degree: usize) -> Result<MultiIndexBasis> {
    MultiIndexBasis::new(model.germs().to_vec(), degree)
}

fn check_germs(model: &StochModel, basis: &MultiIndexBasis) -> Result<()> {
    if model.germs().len() != basis.n_germs() {
        return Err(Error::GermMismatch(format!(
            "model has {} germs, basis has {}",
            model.germs().len(),
            basis.n_germs()
        )));
    }
    for (i, (a, b)) in model.germs().iter().zip(basis.germs()).enumerate() {
        if a.name != b.name || a.distribution != b.distribution {
            return Err(Error::GermMismatch(format!(
                "germ {i}: model has `{}` ({:?}), basis has `{}` ({:?})",
                a.name, a.distribution, b.name, b.distribution
            )));
        }
    }
    Ok(())
}

/// Maps every model variable to its projected columns.
pub fn expand_recourse(model: &StochModel, basis: &MultiIndexBasis) -> Result<ColumnLayout> {
    check_germs(model, basis)?;
    Ok(ColumnLayout::new(model, basis.len()))
}

/// Galerkin projection of a germ-affine expression onto all modes.
///
/// With `mean_only` just the constant mode is produced, which is exact at
/// any degree.
fn project_expr(
    name: &str,
    expr: &AffineExpr,
    basis: &MultiIndexBasis,
    layout: &ColumnLayout,
    settings: &ProjectionSettings,
    mean_only: bool,
) -> Result<ModeForms> {
    let modes = if mean_only { 1 } else { basis.len() };
    let degree = basis.max_degree();
    let mut rows = vec![BTreeMap::new(); modes];
    let mut constants = vec![0.0; modes];
    let mut truncated = 0;
    let overflow = |needed: usize| Error::DegreeOverflow {
        constraint: name.to_string(),
        needed,
        max: degree,
    };

    for t in expr.terms() {
        let Some(g) = t.germ else {
            match t.var.map(|v| layout.column(v)) {
                None => constants[0] += t.coef,
                Some(Column::First(j)) => *rows[0].entry(j).or_insert(0.0) += t.coef,
                Some(Column::Second(base)) => {
                    for (a, row) in rows.iter_mut().enumerate() {
                        *row.entry(base + a).or_insert(0.0) += t.coef;
                    }
                }
            }
            continue;
        };

        let (m, s) = basis.germs()[g.0].linear_modes();
        let unit = basis.unit_position(g.0).filter(|&u| u < modes);
        let exact_unit = mean_only || basis.unit_position(g.0).is_some();
        match t.var.map(|v| layout.column(v)) {
            None => {
                constants[0] += t.coef * m;
                match unit {
                    Some(u) => constants[u] += t.coef * s,
                    None if exact_unit => {}
                    None if settings.truncate => truncated += 1,
                    None => return Err(overflow(1)),
                }
            }
            Some(Column::First(j)) => {
                *rows[0].entry(j).or_insert(0.0) += t.coef * m;
                match unit {
                    Some(u) => *rows[u].entry(j).or_insert(0.0) += t.coef * s,
                    None if exact_unit => {}
                    None if settings.truncate => truncated += 1,
                    None => return Err(overflow(1)),
                }
            }
            Some(Column::Second(base)) => {
                for (a, row) in rows.iter_mut().enumerate() {
                    *row.entry(base + a).or_insert(0.0) += t.coef * m;
                }
                if mean_only {
                    // ⟨ξ_g z, Ψ_0⟩ = s · z̃_{e_g}: exact at any degree.
                    if let Some(u) = basis.unit_position(g.0) {
                        *rows[0].entry(base + u).or_insert(0.0) += t.coef * s;
                    }
                    continue;
                }
                if !settings.truncate {
                    return Err(overflow(degree + 1));
                }
                truncated += 1;
                if let Some(u) = basis.unit_position(g.0) {
                    let tensor = basis.triple_tensor()?;
                    for &(eta, alpha, v) in tensor.slice(u) {
                        if alpha < modes {
                            *rows[alpha].entry(base + eta).or_insert(0.0) += t.coef * s * v;
                        }
                    }
                }
            }
        }
    }
    Ok(ModeForms {
        rows,
        constants,
        truncated,
    })
}

/// Projects an equality onto `|A|` linear rows, one per mode.
pub fn project_equality(
    source: usize,
    constraint: &Constraint,
    basis: &MultiIndexBasis,
    layout: &ColumnLayout,
    settings: &ProjectionSettings,
) -> Result<(Vec<ProjectedEquality>, usize)> {
    if constraint.sense != Sense::Eq {
        return Err(Error::model(format!("`{}` is not an equality", constraint.name)));
    }
    let forms = project_expr(
        &constraint.name,
        &constraint.expr,
        basis,
        layout,
        settings,
        false,
    )?;
    let truncated = forms.truncated;
    let rows = forms
        .into_forms()
        .into_iter()
        .enumerate()
        .map(|(mode, form)| ProjectedEquality {
            id: RowId { source, mode },
            form,
        })
        .collect();
    Ok((rows, truncated))
}

/// Projects an inequality onto `mean + λ‖spread‖ ≤ 0`, or a linear row when
/// the spread carries no decision variable.
pub fn project_inequality(
    source: usize,
    constraint: &Constraint,
    basis: &MultiIndexBasis,
    layout: &ColumnLayout,
    settings: &ProjectionSettings,
) -> Result<(ProjectedInequality, usize)> {
    if constraint.sense != Sense::Le {
        return Err(Error::model(format!("`{}` is not an inequality", constraint.name)));
    }
    let lambda = settings.lambda_for(constraint.epsilon)?;
    let forms = project_expr(
        &constraint.name,
        &constraint.expr,
        basis,
        layout,
        settings,
        false,
    )?;
    let truncated = forms.truncated;
    let mut forms = forms.into_forms().into_iter();
    let mut mean = forms.next().unwrap_or_default();
    let spread: Vec<(usize, LinForm)> = forms
        .enumerate()
        .map(|(i, f)| (i + 1, f))
        .filter(|(_, f)| !f.is_zero())
        .collect();

    if spread.iter().all(|(_, f)| f.terms.is_empty()) {
        let sd = spread.iter().map(|(_, f)| f.constant.powi(2)).sum::<f64>().sqrt();
        mean.constant += lambda * sd;
        return Ok((ProjectedInequality::Linear { source, form: mean }, truncated));
    }
    Ok((
        ProjectedInequality::Soc {
            source,
            mean,
            lambda,
            spread,
        },
        truncated,
    ))
}

/// Expected cost as a linear form: the constant mode of the projected objective.
pub fn project_objective(
    model: &StochModel,
    basis: &MultiIndexBasis,
    layout: &ColumnLayout,
) -> Result<LinForm> {
    let obj = model
        .objective()
        .ok_or_else(|| Error::model("objective is not set"))?;
    let forms = project_expr(
        "objective",
        obj,
        basis,
        layout,
        &ProjectionSettings::default(),
        true,
    )?;
    Ok(forms.into_forms().remove(0))
}

/// Projects a finalized model onto the basis.
pub fn project_model(
    model: &StochModel,
    basis: &MultiIndexBasis,
    settings: &ProjectionSettings,
) -> Result<ProjectedProgram> {
    if !model.is_finalized() {
        return Err(Error::model("model must be finalized before projection"));
    }
    settings.lambda_for(None)?;
    let layout = expand_recourse(model, basis)?;

    enum Projected {
        Eq(Vec<ProjectedEquality>),
        Ineq(ProjectedInequality),
    }
    let projected: Vec<(Projected, usize)> = model
        .constraints()
        .par_iter()
        .enumerate()
        .map(|(i, c)| match c.sense {
            Sense::Eq => project_equality(i, c, basis, &layout, settings)
                .map(|(r, t)| (Projected::Eq(r), t)),
            Sense::Le => project_inequality(i, c, basis, &layout, settings)
                .map(|(r, t)| (Projected::Ineq(r), t)),
        })
        .collect::<Result<_>>()?;

    let mut equalities = Vec::new();
    let mut inequalities = Vec::new();
    let mut truncated_terms = 0;
    for (p, t) in projected {
        truncated_terms += t;
        match p {
            Projected::Eq(rows) => equalities.extend(rows),
            Projected::Ineq(row) => inequalities.push(row),
        }
    }
    if truncated_terms > 0 {
        log::warn!("{truncated_terms} terms truncated at degree {}", basis.max_degree());
    }
    let objective = project_objective(model, basis, &layout)?;
    let n_soc = inequalities
        .iter()
        .filter(|r| matches!(r, ProjectedInequality::Soc { .. }))
        .count();
    let report = ProjectionReport {
        basis_len: basis.len(),
        n_germs: basis.n_germs(),
        degree: basis.max_degree(),
        n_first: layout.n_first,
        n_coefficients: layout.n_second * layout.basis_len,
        n_columns: layout.n_columns(),
        n_equalities: equalities.len(),
        n_soc,
        n_linear_inequalities: inequalities.len() - n_soc,
        truncated_terms,
    };
    Ok(ProjectedProgram {
        layout,
        equalities,
        inequalities,
        objective,
        report,
    })
}
