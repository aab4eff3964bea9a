//! The attainable set, Pareto-efficiency testing and identification of the
//! extreme-efficient DMUs that span its frontier.
//!
//! The attainable set is the free-disposal hull of the convex hull of the
//! observed indicator vectors: `{Y >= 0 : Y <= sum λ_j Y_j, sum λ_j = 1,
//! λ >= 0}`. Membership and efficiency are decided by small LPs routed
//! through the solver backend.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::Dataset;
use crate::settings::EngineSettings;
use crate::solver::{LinearProblem, RowOp, SolveLimits, SolverBackend, SolverError};

/// The extreme-efficient DMUs, in dataset order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficientSet {
    pub members: Vec<String>,
    /// Indicator vectors of the members, aligned with `members`.
    pub matrix: Vec<Vec<f64>>,
}

impl EfficientSet {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Where a goal bundle sits relative to the attainable set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GoalClassification {
    /// Not attainable with the observed performances.
    OutsideAS,
    /// Strictly dominated: an unambitious goal bundle.
    InteriorOfAS,
    OnParetoFrontier,
}

#[derive(Debug, Error)]
pub enum FrontierError {
    #[error("point is outside the attainable set")]
    PointOutsideAttainableSet,
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("solver did not reach optimality on an internal LP")]
    NotOptimal,
}

/// True iff the point belongs to the attainable set, within the LP
/// feasibility tolerance. Decided by minimizing the total componentwise
/// shortfall against the best dominating convex combination.
pub fn as_membership(
    point: &[f64],
    dataset: &Dataset,
    backend: &dyn SolverBackend,
    settings: &EngineSettings,
) -> Result<bool, FrontierError> {
    Ok(membership_shortfall(point, dataset, backend)? <= settings.feasibility_tol)
}

fn membership_shortfall(
    point: &[f64],
    dataset: &Dataset,
    backend: &dyn SolverBackend,
) -> Result<f64, FrontierError> {
    let s = dataset.indicator_count();
    let mut lp = LinearProblem::new();
    let lambdas: Vec<_> = dataset
        .dmus
        .iter()
        .map(|d| lp.add_continuous(format!("lam_{}", d.id), 0.0, f64::INFINITY, 0.0))
        .collect();
    let shortfalls: Vec<_> = (0..s)
        .map(|r| lp.add_continuous(format!("short_{r}"), 0.0, f64::INFINITY, 1.0))
        .collect();
    for r in 0..s {
        let mut terms: Vec<_> = dataset
            .dmus
            .iter()
            .zip(&lambdas)
            .map(|(d, &l)| (l, d.values[r]))
            .collect();
        terms.push((shortfalls[r], 1.0));
        lp.add_row(format!("dom_{r}"), terms, RowOp::Ge, point[r]);
    }
    lp.add_row(
        "convexity",
        lambdas.iter().map(|&l| (l, 1.0)).collect(),
        RowOp::Eq,
        1.0,
    );
    let sol = backend.solve(&lp, &SolveLimits::default())?;
    if !sol.is_optimal() {
        return Err(FrontierError::NotOptimal);
    }
    Ok(sol.objective)
}

/// Optimal value of the additive efficiency test: the largest total
/// componentwise improvement available inside the attainable set. Zero
/// (within tolerance) iff the point is Pareto-efficient.
///
/// Errors if the point is not in the attainable set.
pub fn pareto_slack(
    point: &[f64],
    dataset: &Dataset,
    backend: &dyn SolverBackend,
    settings: &EngineSettings,
) -> Result<f64, FrontierError> {
    if !as_membership(point, dataset, backend, settings)? {
        return Err(FrontierError::PointOutsideAttainableSet);
    }
    slack_against(point, &point_matrix(dataset), backend)
}

fn point_matrix(dataset: &Dataset) -> Vec<(String, Vec<f64>)> {
    dataset
        .dmus
        .iter()
        .map(|d| (d.id.clone(), d.values.clone()))
        .collect()
}

/// Additive slack of `point` against the convex hull of `spanning`.
fn slack_against(
    point: &[f64],
    spanning: &[(String, Vec<f64>)],
    backend: &dyn SolverBackend,
) -> Result<f64, FrontierError> {
    let s = point.len();
    let mut lp = LinearProblem::new();
    let lambdas: Vec<_> = spanning
        .iter()
        .map(|(id, _)| lp.add_continuous(format!("lam_{id}"), 0.0, f64::INFINITY, 0.0))
        .collect();
    // maximize total slack == minimize its negation
    let slacks: Vec<_> = (0..s)
        .map(|r| lp.add_continuous(format!("t_{r}"), 0.0, f64::INFINITY, -1.0))
        .collect();
    for r in 0..s {
        let mut terms: Vec<_> = spanning
            .iter()
            .zip(&lambdas)
            .map(|((_, y), &l)| (l, y[r]))
            .collect();
        terms.push((slacks[r], -1.0));
        lp.add_row(format!("dom_{r}"), terms, RowOp::Ge, point[r]);
    }
    lp.add_row(
        "convexity",
        lambdas.iter().map(|&l| (l, 1.0)).collect(),
        RowOp::Eq,
        1.0,
    );
    let sol = backend.solve(&lp, &SolveLimits::default())?;
    if !sol.is_optimal() {
        return Err(FrontierError::NotOptimal);
    }
    Ok(-sol.objective)
}

/// All extreme-efficient DMUs: Pareto-efficient units that are not
/// dominated by a convex combination of the other efficient units.
/// Duplicated efficient points keep only their lexicographically smallest
/// id as the representative.
pub fn extreme_efficient_set(
    dataset: &Dataset,
    backend: &dyn SolverBackend,
    settings: &EngineSettings,
) -> Result<EfficientSet, FrontierError> {
    let points = point_matrix(dataset);

    let mut efficient: Vec<usize> = Vec::new();
    for (j, (_, y)) in points.iter().enumerate() {
        let slack = slack_against(y, &points, backend)?;
        if slack <= settings.efficiency_tol {
            efficient.push(j);
        }
    }

    // Collapse duplicates onto one representative before the extremity
    // test; otherwise twins eliminate each other.
    let mut candidates: Vec<usize> = Vec::new();
    for &j in &efficient {
        let duplicate_of = candidates.iter().find(|&&k| {
            points[k]
                .1
                .iter()
                .zip(&points[j].1)
                .all(|(a, b)| (a - b).abs() <= 1e-12)
        });
        match duplicate_of {
            Some(&k) => {
                if points[j].0 < points[k].0 {
                    let pos = candidates.iter().position(|&c| c == k).unwrap();
                    candidates[pos] = j;
                }
            }
            None => candidates.push(j),
        }
    }

    let mut extreme: Vec<usize> = Vec::new();
    for &j in &candidates {
        let others: Vec<(String, Vec<f64>)> = candidates
            .iter()
            .filter(|&&k| k != j)
            .map(|&k| points[k].clone())
            .collect();
        if others.is_empty() {
            extreme.push(j);
            continue;
        }
        // j is non-extreme iff a convex combination of the others
        // dominates it.
        let shortfall = {
            let s = points[j].1.len();
            let mut lp = LinearProblem::new();
            let lambdas: Vec<_> = others
                .iter()
                .map(|(id, _)| lp.add_continuous(format!("lam_{id}"), 0.0, f64::INFINITY, 0.0))
                .collect();
            let shortfalls: Vec<_> = (0..s)
                .map(|r| lp.add_continuous(format!("short_{r}"), 0.0, f64::INFINITY, 1.0))
                .collect();
            for r in 0..s {
                let mut terms: Vec<_> = others
                    .iter()
                    .zip(&lambdas)
                    .map(|((_, y), &l)| (l, y[r]))
                    .collect();
                terms.push((shortfalls[r], 1.0));
                lp.add_row(format!("dom_{r}"), terms, RowOp::Ge, points[j].1[r]);
            }
            lp.add_row(
                "convexity",
                lambdas.iter().map(|&l| (l, 1.0)).collect(),
                RowOp::Eq,
                1.0,
            );
            let sol = backend.solve(&lp, &SolveLimits::default())?;
            if !sol.is_optimal() {
                return Err(FrontierError::NotOptimal);
            }
            sol.objective
        };
        if shortfall > settings.feasibility_tol {
            extreme.push(j);
        }
    }

    extreme.sort_unstable();
    Ok(EfficientSet {
        members: extreme.iter().map(|&j| points[j].0.clone()).collect(),
        matrix: extreme.iter().map(|&j| points[j].1.clone()).collect(),
    })
}

/// Classify a goal bundle against the attainable set.
pub fn classify_goal(
    goal: &[f64],
    dataset: &Dataset,
    backend: &dyn SolverBackend,
    settings: &EngineSettings,
) -> Result<GoalClassification, FrontierError> {
    if !as_membership(goal, dataset, backend, settings)? {
        return Ok(GoalClassification::OutsideAS);
    }
    let slack = slack_against(goal, &point_matrix(dataset), backend)?;
    if slack <= settings.efficiency_tol {
        Ok(GoalClassification::OnParetoFrontier)
    } else {
        Ok(GoalClassification::InteriorOfAS)
    }
}
