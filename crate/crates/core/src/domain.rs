//! Core data model: indicators, DMUs, payment schedules, groupings and
//! dataset-level validation.
//!
//! All types are immutable after construction and safe to share across
//! threads. Validation never fails; it reports findings as [`Violation`]
//! values so callers can decide how to surface them.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

/// Tolerance used when checking that indicator weights sum to one.
pub const WEIGHT_SUM_TOL: f64 = 1e-9;

/// An index indicator (a "the more the better" performance measure).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Indicator {
    pub id: String,
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub description: String,
}

impl Indicator {
    pub fn new(id: impl Into<String>) -> Self {
        Indicator {
            id: id.into(),
            name: String::new(),
            description: String::new(),
        }
    }
}

/// One DMU's observed performance, goals and incentive endowment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DmuRecord {
    pub id: String,
    pub group_id: String,
    /// Period-t indicator levels, one per indicator.
    pub values: Vec<f64>,
    /// Goal levels set in period t-1, one per indicator.
    pub goals: Vec<f64>,
    /// Incentives initially available to this DMU.
    pub endowment: f64,
}

/// How deviation ceilings are determined for the payment function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "ceilings", rename_all = "snake_case")]
pub enum CeilingsMode {
    /// Ceiling equals the DMU's actual level in that indicator.
    ProportionalToActual,
    /// Explicit ceiling matrix, one row per DMU (dataset order), one
    /// column per indicator.
    Explicit(Vec<Vec<f64>>),
}

/// Indicator weights and deviation ceilings defining the payment scheme.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaymentSchedule {
    /// Per-indicator weights; must be strictly positive and sum to one.
    pub weights: Vec<f64>,
    #[serde(flatten)]
    pub ceilings_mode: CeilingsMode,
}

impl PaymentSchedule {
    pub fn equal_weights(s: usize) -> Self {
        PaymentSchedule {
            weights: vec![1.0 / s as f64; s],
            ceilings_mode: CeilingsMode::ProportionalToActual,
        }
    }

    /// Deviation ceiling for DMU index `j` (dataset order) and indicator `r`.
    pub fn ceiling(&self, dmu_index: usize, indicator: usize, actual: f64) -> f64 {
        match &self.ceilings_mode {
            CeilingsMode::ProportionalToActual => actual,
            CeilingsMode::Explicit(rows) => rows[dmu_index][indicator],
        }
    }
}

/// A partition of the DMUs into groups that share a common benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grouping {
    /// Group id -> member DMU ids. Ordered for deterministic iteration.
    pub groups: BTreeMap<String, Vec<String>>,
}

impl Grouping {
    /// One group per DMU (standard per-unit DEA benchmarking).
    pub fn singletons(dmus: &[DmuRecord]) -> Self {
        let groups = dmus
            .iter()
            .map(|d| (d.id.clone(), vec![d.id.clone()]))
            .collect();
        Grouping { groups }
    }

    /// A single group holding every DMU.
    pub fn single_group(dmus: &[DmuRecord]) -> Self {
        let members = dmus.iter().map(|d| d.id.clone()).collect();
        let mut groups = BTreeMap::new();
        groups.insert("all".to_string(), members);
        Grouping { groups }
    }

    /// Grouping read off the DMUs' `group_id` labels.
    pub fn from_labels(dmus: &[DmuRecord]) -> Self {
        let mut groups: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for d in dmus {
            groups.entry(d.group_id.clone()).or_default().push(d.id.clone());
        }
        Grouping { groups }
    }
}

/// A full, analysis-ready dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub indicators: Vec<Indicator>,
    pub dmus: Vec<DmuRecord>,
    pub schedule: PaymentSchedule,
    pub grouping: Grouping,
}

impl Dataset {
    /// Number of indicators.
    pub fn indicator_count(&self) -> usize {
        self.indicators.len()
    }

    /// Position of a DMU by id, if present.
    pub fn dmu_index(&self, id: &str) -> Option<usize> {
        self.dmus.iter().position(|d| d.id == id)
    }

    pub fn dmu(&self, id: &str) -> Option<&DmuRecord> {
        self.dmus.iter().find(|d| d.id == id)
    }
}

/// A single validation finding, with enough coordinates to locate it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    /// Short machine-readable rule name, e.g. `weights_sum_to_one`.
    pub rule: String,
    /// Human-readable description of what is wrong and where.
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dmu_id: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub indicator_id: Option<String>,
}

impl Violation {
    fn new(rule: &str, message: String) -> Self {
        Violation {
            rule: rule.to_string(),
            message,
            dmu_id: None,
            indicator_id: None,
        }
    }

    fn dmu(mut self, id: &str) -> Self {
        self.dmu_id = Some(id.to_string());
        self
    }

    fn indicator(mut self, id: &str) -> Self {
        self.indicator_id = Some(id.to_string());
        self
    }
}

/// Checks every dataset invariant and returns the findings. An empty list
/// means the dataset is admissible for analysis. Pure and idempotent.
pub fn validate_dataset(dataset: &Dataset) -> Vec<Violation> {
    let mut out = Vec::new();
    let s = dataset.indicators.len();

    if s == 0 {
        out.push(Violation::new(
            "indicator_count",
            "dataset must define at least one indicator".to_string(),
        ));
    }
    let mut seen = BTreeSet::new();
    for ind in &dataset.indicators {
        if !seen.insert(ind.id.as_str()) {
            out.push(
                Violation::new(
                    "indicator_ids_unique",
                    format!("indicator id '{}' appears more than once", ind.id),
                )
                .indicator(&ind.id),
            );
        }
    }

    if dataset.dmus.is_empty() {
        out.push(Violation::new("dmu_count", "dataset has no DMUs".to_string()));
    }
    let mut dmu_ids = BTreeSet::new();
    for dmu in &dataset.dmus {
        if !dmu_ids.insert(dmu.id.as_str()) {
            out.push(
                Violation::new(
                    "dmu_ids_unique",
                    format!("DMU id '{}' appears more than once", dmu.id),
                )
                .dmu(&dmu.id),
            );
        }
        if dmu.values.len() != s {
            out.push(
                Violation::new(
                    "values_length",
                    format!(
                        "DMU '{}' has {} indicator values, expected {}",
                        dmu.id,
                        dmu.values.len(),
                        s
                    ),
                )
                .dmu(&dmu.id),
            );
        }
        if dmu.goals.len() != s {
            out.push(
                Violation::new(
                    "goals_length",
                    format!(
                        "DMU '{}' has {} goal values, expected {}",
                        dmu.id,
                        dmu.goals.len(),
                        s
                    ),
                )
                .dmu(&dmu.id),
            );
        }
        for (r, &v) in dmu.values.iter().enumerate() {
            if !(v >= 0.0) {
                out.push(
                    Violation::new(
                        "values_nonnegative",
                        format!("DMU '{}' indicator {} has negative value {}", dmu.id, r, v),
                    )
                    .dmu(&dmu.id)
                    .indicator(indicator_id(dataset, r)),
                );
            }
        }
        if !dmu.values.is_empty() && dmu.values.iter().all(|&v| v == 0.0) {
            out.push(
                Violation::new(
                    "values_nonzero",
                    format!("DMU '{}' violates Y_j != 0: all indicator values are zero", dmu.id),
                )
                .dmu(&dmu.id),
            );
        }
        for (r, &g) in dmu.goals.iter().enumerate() {
            if !(g >= 0.0) {
                out.push(
                    Violation::new(
                        "goals_nonnegative",
                        format!("DMU '{}' indicator {} has negative goal {}", dmu.id, r, g),
                    )
                    .dmu(&dmu.id)
                    .indicator(indicator_id(dataset, r)),
                );
            }
        }
        if !(dmu.endowment > 0.0) {
            out.push(
                Violation::new(
                    "endowment_positive",
                    format!("DMU '{}' has non-positive endowment {}", dmu.id, dmu.endowment),
                )
                .dmu(&dmu.id),
            );
        }
    }

    // Payment schedule.
    if dataset.schedule.weights.len() != s {
        out.push(Violation::new(
            "weights_length",
            format!(
                "schedule has {} weights, expected one per indicator ({})",
                dataset.schedule.weights.len(),
                s
            ),
        ));
    }
    for (r, &w) in dataset.schedule.weights.iter().enumerate() {
        if !(w > 0.0) {
            out.push(
                Violation::new(
                    "weights_positive",
                    format!(
                        "weight for indicator {} is {}; weights must be strictly positive \
                         (drop the indicator instead of zero-weighting it)",
                        r, w
                    ),
                )
                .indicator(indicator_id(dataset, r)),
            );
        }
    }
    let sum: f64 = dataset.schedule.weights.iter().sum();
    if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
        out.push(Violation::new(
            "weights_sum_to_one",
            format!("indicator weights sum to {sum}, expected 1"),
        ));
    }
    if let CeilingsMode::Explicit(rows) = &dataset.schedule.ceilings_mode {
        if rows.len() != dataset.dmus.len() {
            out.push(Violation::new(
                "ceilings_shape",
                format!(
                    "explicit ceilings have {} rows, expected one per DMU ({})",
                    rows.len(),
                    dataset.dmus.len()
                ),
            ));
        } else {
            for (j, dmu) in dataset.dmus.iter().enumerate() {
                if rows[j].len() != s {
                    out.push(
                        Violation::new(
                            "ceilings_shape",
                            format!("ceiling row for DMU '{}' has {} entries, expected {}", dmu.id, rows[j].len(), s),
                        )
                        .dmu(&dmu.id),
                    );
                    continue;
                }
                for r in 0..s.min(dmu.values.len()) {
                    if dmu.values[r] > 0.0 && !(rows[j][r] > 0.0) {
                        out.push(
                            Violation::new(
                                "ceilings_positive",
                                format!(
                                    "ceiling for DMU '{}' indicator {} is {} but the actual value is positive",
                                    dmu.id, r, rows[j][r]
                                ),
                            )
                            .dmu(&dmu.id)
                            .indicator(indicator_id(dataset, r)),
                        );
                    }
                }
            }
        }
    }

    // Grouping: exact partition of the DMU ids.
    let mut assigned = BTreeMap::new();
    for (gid, members) in &dataset.grouping.groups {
        if members.is_empty() {
            out.push(Violation::new(
                "group_nonempty",
                format!("group '{gid}' has no members"),
            ));
        }
        for m in members {
            if dataset.dmu_index(m).is_none() {
                out.push(
                    Violation::new(
                        "group_member_exists",
                        format!("group '{gid}' references unknown DMU '{m}'"),
                    )
                    .dmu(m),
                );
            }
            if let Some(prev) = assigned.insert(m.clone(), gid.clone()) {
                out.push(
                    Violation::new(
                        "group_partition",
                        format!("DMU '{m}' appears in groups '{prev}' and '{gid}'"),
                    )
                    .dmu(m),
                );
            }
        }
    }
    for dmu in &dataset.dmus {
        if !assigned.contains_key(&dmu.id) {
            out.push(
                Violation::new(
                    "group_partition",
                    format!("DMU '{}' is not assigned to any group", dmu.id),
                )
                .dmu(&dmu.id),
            );
        }
    }

    out
}

fn indicator_id(dataset: &Dataset, r: usize) -> &str {
    dataset.indicators.get(r).map(|i| i.id.as_str()).unwrap_or("?")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_fixtures::table1_dataset;

    #[test]
    fn table1_dataset_is_clean() {
        let ds = table1_dataset();
        assert_eq!(validate_dataset(&ds), vec![]);
    }

    #[test]
    fn weight_sum_violation_is_reported() {
        let mut ds = table1_dataset();
        ds.schedule.weights = vec![0.5, 0.4];
        let v = validate_dataset(&ds);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule, "weights_sum_to_one");
    }

    #[test]
    fn zero_vector_dmu_is_reported() {
        let mut ds = table1_dataset();
        ds.dmus[2].values = vec![0.0, 0.0];
        let v = validate_dataset(&ds);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule, "values_nonzero");
        assert_eq!(v[0].dmu_id.as_deref(), Some("C"));
    }

    #[test]
    fn validation_is_idempotent() {
        let mut ds = table1_dataset();
        ds.dmus[0].endowment = -1.0;
        let first = validate_dataset(&ds);
        let second = validate_dataset(&ds);
        assert_eq!(first, second);
        assert_eq!(first[0].rule, "endowment_positive");
    }

    #[test]
    fn grouping_must_partition_dmus() {
        let mut ds = table1_dataset();
        ds.grouping.groups.get_mut("A").unwrap().push("B".to_string());
        let v = validate_dataset(&ds);
        assert!(v.iter().any(|x| x.rule == "group_partition"));
    }

    #[test]
    fn zero_weight_rejected_with_guidance() {
        let mut ds = table1_dataset();
        ds.schedule.weights = vec![1.0, 0.0];
        let v = validate_dataset(&ds);
        assert!(v.iter().any(|x| x.rule == "weights_positive"));
    }
}
