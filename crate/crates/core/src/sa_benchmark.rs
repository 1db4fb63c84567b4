//! Scenario-approximation baseline and PCE-vs-SA comparison metrics.
//!
//! Scenarios come from Latin hypercube sampling: per germ, `n_s` equiprobable
//! strata each receive one draw at a uniformly random position inside the
//! stratum, mapped through the inverse CDF; the stratum order is permuted
//! independently per germ. Within-stratum positions are addressed by
//! `(germ, stratum)` and permutations by germ, so scenario sets depend only
//! on the seed.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conic::{assemble_extensive_form, solve, SolveStatus, SolverSettings};
use crate::error::{Error, Result};
use crate::polybasis::Germ;
use crate::sampling::{open_unit, stream_rng};
use crate::sprog::{Stage, StochModel};

/// Absolute slack when testing whether a value lies inside an envelope.
pub const ENVELOPE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSet {
    /// `n_s × n_germs`, natural units.
    pub samples: Vec<Vec<f64>>,
    pub probabilities: Vec<f64>,
    pub seed: u64,
    pub method: &'static str,
}

impl ScenarioSet {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

pub fn lhs_sample(germs: &[Germ], n_s: usize, seed: u64) -> Result<ScenarioSet> {
    if n_s == 0 {
        return Err(Error::Config("the scenario count must be at least 1".into()));
    }
    let mut samples = vec![vec![0.0; germs.len()]; n_s];
    for (d, g) in germs.iter().enumerate() {
        let mut strata: Vec<usize> = (0..n_s).collect();
        strata.shuffle(&mut stream_rng(seed, 2 * d as u64 + 1, 0));
        let mut pos = stream_rng(seed, 2 * d as u64, 0);
        let offsets: Vec<f64> = (0..n_s).map(|_| open_unit(&mut pos)).collect();
        for (i, &k) in strata.iter().enumerate() {
            let u = (k as f64 + offsets[k]) / n_s as f64;
            samples[i][d] = g.distribution.quantile(u.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON));
        }
    }
    Ok(ScenarioSet {
        samples,
        probabilities: vec![1.0 / n_s as f64; n_s],
        seed,
        method: "lhs",
    })
}

/// One named first-stage block, e.g. the hourly DAM bids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub name: String,
    pub values: Vec<f64>,
}

/// Objective and first-stage decisions of one solved program.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decisions {
    pub objective: f64,
    pub trajectories: Vec<Trajectory>,
}

/// Splits first-stage values (model variable order) into named blocks.
pub fn first_stage_trajectories(model: &StochModel, first_stage: &[f64]) -> Vec<Trajectory> {
    let mut out = Vec::new();
    let mut next = 0;
    for b in model.blocks().iter().filter(|b| b.stage == Stage::First) {
        out.push(Trajectory {
            name: b.name.clone(),
            values: first_stage[next..next + b.len()].to_vec(),
        });
        next += b.len();
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaRun {
    pub n_s: usize,
    pub seed: u64,
    pub objective: f64,
    /// First-stage values in model variable order.
    pub first_stage: Vec<f64>,
    /// Sampling, assembly and solve.
    pub wall_seconds: f64,
    pub solve_seconds: f64,
}

impl SaRun {
    pub fn decisions(&self, model: &StochModel) -> Decisions {
        Decisions {
            objective: self.objective,
            trajectories: first_stage_trajectories(model, &self.first_stage),
        }
    }
}

/// Assembles and solves the extensive form over `scenarios`.
pub fn solve_scenarios(
    model: &StochModel,
    scenarios: &ScenarioSet,
    settings: &SolverSettings,
) -> Result<(f64, Vec<f64>, f64)> {
    let ef = assemble_extensive_form(model, &scenarios.samples, &scenarios.probabilities)?;
    let result = solve(&ef.problem, settings)?;
    let seconds = result.solve_seconds;
    if result.status == SolveStatus::Infeasible && scenarios.len() > 1 {
        if let Some(s) = first_infeasible_scenario(model, scenarios, settings)? {
            return Err(Error::Solver(format!(
                "extensive form infeasible; scenario {s} is infeasible on its own"
            )));
        }
    }
    let (objective, x) = result.into_solution()?;
    Ok((objective, ef.first_stage_values(&x), seconds))
}

fn first_infeasible_scenario(
    model: &StochModel,
    scenarios: &ScenarioSet,
    settings: &SolverSettings,
) -> Result<Option<usize>> {
    for (s, omega) in scenarios.samples.iter().enumerate() {
        let ef = assemble_extensive_form(model, std::slice::from_ref(omega), &[1.0])?;
        if solve(&ef.problem, settings)?.status == SolveStatus::Infeasible {
            return Ok(Some(s));
        }
    }
    Ok(None)
}

/// Scenario approximation with `n_s` LHS scenarios.
pub fn solve_sa(
    model: &StochModel,
    n_s: usize,
    seed: u64,
    settings: &SolverSettings,
) -> Result<SaRun> {
    let start = Instant::now();
    let scenarios = lhs_sample(model.germs(), n_s, seed)?;
    let (objective, first_stage, solve_seconds) = solve_scenarios(model, &scenarios, settings)?;
    log::info!("SA n_s = {n_s}, seed {seed}: objective {objective}, solve {solve_seconds:.2} s");
    Ok(SaRun {
        n_s,
        seed,
        objective,
        first_stage,
        wall_seconds: start.elapsed().as_secs_f64(),
        solve_seconds,
    })
}

/// Independent repetitions with seeds `base_seed, base_seed + 1, …`, run
/// concurrently; results are ordered by repetition.
pub fn run_repetitions(
    model: &StochModel,
    n_s: usize,
    repetitions: usize,
    base_seed: u64,
    settings: &SolverSettings,
) -> Result<Vec<SaRun>> {
    (0..repetitions)
        .into_par_iter()
        .map(|r| solve_sa(model, n_s, base_seed + r as u64, settings))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub decision: String,
    pub step: usize,
    pub pce: f64,
    pub reference_mean: f64,
    pub reference_min: f64,
    pub reference_max: f64,
    pub error: f64,
    pub inside: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionSummary {
    pub decision: String,
    /// Root-mean-square deviation from the reference mean over the horizon.
    pub rmse: f64,
    /// Fraction of steps inside the reference min–max envelope.
    pub coverage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub pce_objective: f64,
    pub reference_objective: f64,
    pub reference_sd: f64,
    pub reference_cv: f64,
    pub gap_abs: f64,
    pub gap_rel: f64,
    pub rows: Vec<ComparisonRow>,
    pub decisions: Vec<DecisionSummary>,
    /// Fraction of all (decision, step) pairs inside the envelope.
    pub coverage: f64,
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Compares a candidate solution against a set of reference runs.
pub fn compare(candidate: &Decisions, reference: &[Decisions]) -> Result<ComparisonReport> {
    if reference.is_empty() {
        return Err(Error::Config("comparison needs at least one reference run".into()));
    }
    let objectives: Vec<f64> = reference.iter().map(|d| d.objective).collect();
    let (ref_obj, ref_sd) = mean_sd(&objectives);
    let mut rows = Vec::new();
    let mut decisions = Vec::new();
    for (k, traj) in candidate.trajectories.iter().enumerate() {
        let mut sq = 0.0;
        let mut inside_count = 0;
        for r in reference {
            let other = r.trajectories.get(k).filter(|o| o.name == traj.name);
            match other {
                Some(o) if o.values.len() == traj.values.len() => {}
                _ => {
                    return Err(Error::Config(format!(
                        "reference runs do not match decision `{}` and its horizon",
                        traj.name
                    )))
                }
            }
        }
        for (t, &v) in traj.values.iter().enumerate() {
            let column: Vec<f64> = reference.iter().map(|r| r.trajectories[k].values[t]).collect();
            let (mean, _) = mean_sd(&column);
            let lo = column.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = column.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let inside = v >= lo - ENVELOPE_TOL && v <= hi + ENVELOPE_TOL;
            inside_count += inside as usize;
            sq += (v - mean).powi(2);
            rows.push(ComparisonRow {
                decision: traj.name.clone(),
                step: t,
                pce: v,
                reference_mean: mean,
                reference_min: lo,
                reference_max: hi,
                error: v - mean,
                inside,
            });
        }
        let n = traj.values.len().max(1) as f64;
        decisions.push(DecisionSummary {
            decision: traj.name.clone(),
            rmse: (sq / n).sqrt(),
            coverage: inside_count as f64 / n,
        });
    }
    let coverage = if rows.is_empty() {
        1.0
    } else {
        rows.iter().filter(|r| r.inside).count() as f64 / rows.len() as f64
    };
    let gap_abs = candidate.objective - ref_obj;
    Ok(ComparisonReport {
        pce_objective: candidate.objective,
        reference_objective: ref_obj,
        reference_sd: ref_sd,
        reference_cv: if ref_obj != 0.0 { ref_sd / ref_obj.abs() } else { f64::NAN },
        gap_abs,
        gap_rel: gap_abs / ref_obj.abs(),
        rows,
        decisions,
        coverage,
    })
}

/// Accuracy of a group of runs (one method, one `n_s`) against the reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyRow {
    pub method: String,
    pub n_s: usize,
    pub repetitions: usize,
    pub objective_mean: f64,
    pub objective_rmse: f64,
    pub decision: String,
    /// Per-step RMSE against the reference mean, averaged over the horizon.
    pub bid_rmse: f64,
}

/// One row per decision block for a group of runs.
pub fn accuracy_rows(
    method: &str,
    n_s: usize,
    runs: &[Decisions],
    reference: &[Decisions],
) -> Result<Vec<AccuracyRow>> {
    if runs.is_empty() || reference.is_empty() {
        return Err(Error::Config("accuracy needs runs and a reference".into()));
    }
    let ref_obj = mean_sd(&reference.iter().map(|d| d.objective).collect::<Vec<_>>()).0;
    let m = runs.len() as f64;
    let objective_mean = runs.iter().map(|d| d.objective).sum::<f64>() / m;
    let objective_rmse = (runs
        .iter()
        .map(|d| (d.objective - ref_obj).powi(2))
        .sum::<f64>()
        / m)
        .sqrt();
    let mut out = Vec::new();
    for (k, traj) in runs[0].trajectories.iter().enumerate() {
        let horizon = traj.values.len();
        let mut acc = 0.0;
        for t in 0..horizon {
            let ref_mean = reference
                .iter()
                .map(|r| r.trajectories[k].values[t])
                .sum::<f64>()
                / reference.len() as f64;
            let mse = runs
                .iter()
                .map(|d| (d.trajectories[k].values[t] - ref_mean).powi(2))
                .sum::<f64>()
                / m;
            acc += mse.sqrt();
        }
        out.push(AccuracyRow {
            method: method.to_string(),
            n_s,
            repetitions: runs.len(),
            objective_mean,
            objective_rmse,
            decision: traj.name.clone(),
            bid_rmse: acc / horizon.max(1) as f64,
        });
    }
    Ok(out)
}

pub(crate) fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Serialize)]
struct SummaryRow<'a> {
    metric: &'a str,
    decision: &'a str,
    value: f64,
}

/// Writes `comparison_ns{n_s}_seed{seed}.csv` (one row per step per
/// decision) and `summary_ns{n_s}_seed{seed}.csv`; returns both paths.
pub fn write_comparison(
    report: &ComparisonReport,
    dir: &Path,
    n_s: usize,
    seed: u64,
) -> Result<(PathBuf, PathBuf)> {
    let rows_path = dir.join(format!("comparison_ns{n_s}_seed{seed}.csv"));
    write_csv(&rows_path, &report.rows)?;
    let mut summary = vec![
        SummaryRow { metric: "pce_objective", decision: "", value: report.pce_objective },
        SummaryRow { metric: "reference_objective", decision: "", value: report.reference_objective },
        SummaryRow { metric: "reference_cv", decision: "", value: report.reference_cv },
        SummaryRow { metric: "gap_abs", decision: "", value: report.gap_abs },
        SummaryRow { metric: "gap_rel", decision: "", value: report.gap_rel },
        SummaryRow { metric: "coverage", decision: "", value: report.coverage },
    ];
    for d in &report.decisions {
        summary.push(SummaryRow { metric: "rmse", decision: &d.decision, value: d.rmse });
        summary.push(SummaryRow { metric: "coverage", decision: &d.decision, value: d.coverage });
    }
    let summary_path = dir.join(format!("summary_ns{n_s}_seed{seed}.csv"));
    write_csv(&summary_path, &summary)?;
    Ok((rows_path, summary_path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polybasis::Distribution;

    fn germ(d: Distribution) -> Germ {
        Germ::new("g", d).unwrap()
    }

    #[test]
    fn two_normal_strata() {
        let g = germ(Distribution::normal(0.0, 1.0).unwrap());
        for seed in 0..20 {
            let s = lhs_sample(std::slice::from_ref(&g), 2, seed).unwrap();
            let mut p: Vec<f64> = s.samples.iter().map(|x| g.distribution.cdf(x[0])).collect();
            p.sort_by(f64::total_cmp);
            assert!(p[0] > 0.0 && p[0] < 0.5 && p[1] > 0.5 && p[1] < 1.0);
        }
    }

    #[test]
    fn one_per_quarter() {
        let g = germ(Distribution::uniform(0.0, 1.0).unwrap());
        let s = lhs_sample(&[g.clone(), g], 4, 3).unwrap();
        for d in 0..2 {
            let mut bins = [0; 4];
            for x in &s.samples {
                bins[(x[d] * 4.0) as usize] += 1;
            }
            assert_eq!(bins, [1; 4]);
        }
        assert!(lhs_sample(&[], 0, 0).is_err());
    }

    #[test]
    fn seeds_reproduce() {
        let g = germ(Distribution::gamma(2.0, 1.5).unwrap());
        let a = lhs_sample(std::slice::from_ref(&g), 50, 11).unwrap();
        let b = lhs_sample(std::slice::from_ref(&g), 50, 11).unwrap();
        let c = lhs_sample(std::slice::from_ref(&g), 50, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    fn dec(obj: f64, v: Vec<f64>) -> Decisions {
        Decisions {
            objective: obj,
            trajectories: vec![Trajectory {
                name: "bid".into(),
                values: v,
            }],
        }
    }

    #[test]
    fn compare_identical_and_envelope() {
        let a = dec(10.0, vec![1.0, 2.0]);
        let r = compare(&a, &[a.clone(), a.clone()]).unwrap();
        assert_eq!(r.gap_abs, 0.0);
        assert_eq!(r.decisions[0].rmse, 0.0);
        assert_eq!(r.coverage, 1.0);

        let pce = dec(1.0, vec![1.0; 3]);
        let runs = [dec(1.0, vec![0.9; 3]), dec(1.0, vec![1.1; 3])];
        let r = compare(&pce, &runs).unwrap();
        assert!(r.decisions[0].rmse < 1e-15);
        assert_eq!(r.coverage, 1.0);

        let short = dec(1.0, vec![1.0]);
        assert!(compare(&pce, &[short]).is_err());
    }
}
