//! Dataset ingestion (CSV trio or a single JSON file) and report
//! rendering.
//!
//! The renderer performs no arithmetic beyond rounding: every number in a
//! report is taken from the dataset, the group solutions, or the payments
//! module, so reports stay recomputable from raw inputs. Rounding happens
//! only at render time — two decimals for money, one decimal for rates;
//! the JSON format is lossless.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{
    Dataset, DmuRecord, Grouping, Indicator, PaymentSchedule, Violation, validate_dataset,
};
use crate::frontier::{classify_goal, FrontierError, GoalClassification};
use crate::gab::GroupSolution;
use crate::payments::PaymentBreakdown;
use crate::settings::EngineSettings;
use crate::solver::{backend_by_id, SolverError};

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read '{path}': {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("CSV error in '{path}': {source}")]
    Csv {
        path: PathBuf,
        source: csv::Error,
    },
    #[error("JSON error in '{path}': {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("schema error in '{path}'{}: {message}", fmt_line(*.line))]
    Schema {
        path: PathBuf,
        line: Option<u64>,
        message: String,
    },
    #[error("dataset failed validation with {} finding(s)", .0.len())]
    Validation(Vec<Violation>),
}

fn fmt_line(line: Option<u64>) -> String {
    line.map(|l| format!(" line {l}")).unwrap_or_default()
}

/// Load and fully validate a dataset. A directory is read as the CSV trio
/// `dmus.csv` / `goals.csv` / `weights.csv`; a file is parsed as the JSON
/// mirror of [`Dataset`].
pub fn load_dataset(path: &Path) -> Result<Dataset, LoadError> {
    let dataset = if path.is_dir() {
        load_csv_dir(path)?
    } else {
        load_json(path)?
    };
    let violations = validate_dataset(&dataset);
    if violations.is_empty() {
        Ok(dataset)
    } else {
        Err(LoadError::Validation(violations))
    }
}

fn load_json(path: &Path) -> Result<Dataset, LoadError> {
    let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| LoadError::Json {
        path: path.to_path_buf(),
        source,
    })
}

fn load_csv_dir(dir: &Path) -> Result<Dataset, LoadError> {
    let weights_path = dir.join("weights.csv");
    let dmus_path = dir.join("dmus.csv");
    let goals_path = dir.join("goals.csv");

    // weights.csv fixes the indicator identities and their order
    let mut indicators: Vec<Indicator> = Vec::new();
    let mut weights: Vec<f64> = Vec::new();
    {
        let mut rdr = open_csv(&weights_path)?;
        let headers = read_headers(&mut rdr, &weights_path)?;
        let id_col = require_column(&headers, "indicator_id", &weights_path)?;
        let w_col = require_column(&headers, "weight", &weights_path)?;
        for rec in rdr.records() {
            let rec = rec.map_err(|source| LoadError::Csv {
                path: weights_path.clone(),
                source,
            })?;
            let line = rec.position().map(|p| p.line());
            indicators.push(Indicator::new(&rec[id_col]));
            weights.push(parse_number(&rec[w_col], &weights_path, line, "weight")?);
        }
    }

    // dmus.csv: identity, group, endowment and one column per indicator
    let mut dmus: Vec<DmuRecord> = Vec::new();
    {
        let mut rdr = open_csv(&dmus_path)?;
        let headers = read_headers(&mut rdr, &dmus_path)?;
        let id_col = require_column(&headers, "dmu_id", &dmus_path)?;
        let group_col = require_column(&headers, "group_id", &dmus_path)?;
        let endow_col = require_column(&headers, "endowment", &dmus_path)?;
        let value_cols: Vec<usize> = indicators
            .iter()
            .map(|ind| require_column(&headers, &ind.id, &dmus_path))
            .collect::<Result<_, _>>()?;
        for rec in rdr.records() {
            let rec = rec.map_err(|source| LoadError::Csv {
                path: dmus_path.clone(),
                source,
            })?;
            let line = rec.position().map(|p| p.line());
            let values = value_cols
                .iter()
                .zip(&indicators)
                .map(|(&c, ind)| parse_number(&rec[c], &dmus_path, line, &ind.id))
                .collect::<Result<Vec<f64>, _>>()?;
            dmus.push(DmuRecord {
                id: rec[id_col].to_string(),
                group_id: rec[group_col].to_string(),
                values,
                goals: Vec::new(), // filled from goals.csv below
                endowment: parse_number(&rec[endow_col], &dmus_path, line, "endowment")?,
            });
        }
    }

    // goals.csv: one goal vector per DMU, referentially checked both ways
    {
        let mut rdr = open_csv(&goals_path)?;
        let headers = read_headers(&mut rdr, &goals_path)?;
        let id_col = require_column(&headers, "dmu_id", &goals_path)?;
        let goal_cols: Vec<usize> = indicators
            .iter()
            .map(|ind| require_column(&headers, &ind.id, &goals_path))
            .collect::<Result<_, _>>()?;
        for rec in rdr.records() {
            let rec = rec.map_err(|source| LoadError::Csv {
                path: goals_path.clone(),
                source,
            })?;
            let line = rec.position().map(|p| p.line());
            let id = rec[id_col].to_string();
            let goals = goal_cols
                .iter()
                .zip(&indicators)
                .map(|(&c, ind)| parse_number(&rec[c], &goals_path, line, &ind.id))
                .collect::<Result<Vec<f64>, _>>()?;
            match dmus.iter_mut().find(|d| d.id == id) {
                Some(dmu) => dmu.goals = goals,
                None => {
                    return Err(LoadError::Schema {
                        path: goals_path.clone(),
                        line,
                        message: format!("goals reference unknown DMU '{id}'"),
                    })
                }
            }
        }
    }
    for dmu in &dmus {
        if dmu.goals.is_empty() {
            return Err(LoadError::Schema {
                path: goals_path.clone(),
                line: None,
                message: format!("no goals given for DMU '{}'", dmu.id),
            });
        }
    }

    let grouping = Grouping::from_labels(&dmus);
    Ok(Dataset {
        indicators,
        dmus,
        schedule: PaymentSchedule {
            weights,
            ceilings_mode: crate::domain::CeilingsMode::ProportionalToActual,
        },
        grouping,
    })
}

fn open_csv(path: &Path) -> Result<csv::Reader<std::fs::File>, LoadError> {
    if !path.is_file() {
        return Err(LoadError::Io {
            path: path.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "no such file"),
        });
    }
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|source| LoadError::Csv {
            path: path.to_path_buf(),
            source,
        })
}

fn read_headers(
    rdr: &mut csv::Reader<std::fs::File>,
    path: &Path,
) -> Result<csv::StringRecord, LoadError> {
    rdr.headers().cloned().map_err(|source| LoadError::Csv {
        path: path.to_path_buf(),
        source,
    })
}

fn require_column(
    headers: &csv::StringRecord,
    name: &str,
    path: &Path,
) -> Result<usize, LoadError> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| LoadError::Schema {
            path: path.to_path_buf(),
            line: Some(1),
            message: format!("missing column '{name}'"),
        })
}

fn parse_number(
    field: &str,
    path: &Path,
    line: Option<u64>,
    column: &str,
) -> Result<f64, LoadError> {
    field.parse::<f64>().map_err(|_| LoadError::Schema {
        path: path.to_path_buf(),
        line,
        message: format!("column '{column}': '{field}' is not a number"),
    })
}

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("no group solution covers DMU '{0}'")]
    MissingSolution(String),
    #[error(transparent)]
    Frontier(#[from] FrontierError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// Everything reported for one DMU. All monetary fields reproduce from the
/// raw inputs via the payments module; rates are percentages at full
/// precision.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportRow {
    pub dmu_id: String,
    pub group_id: String,
    pub endowment: f64,
    pub actual: Vec<f64>,
    pub targets: Vec<f64>,
    pub goals: Vec<f64>,
    pub payment_vs_targets: PaymentBreakdown,
    pub payment_vs_goals: PaymentBreakdown,
    /// Payment vs targets over the endowment, in percent.
    pub rate_vs_targets: f64,
    pub rate_vs_goals: f64,
    /// Per-indicator rate vs targets: payment over the indicator's share,
    /// in percent.
    pub indicator_rates: Vec<f64>,
    pub classification: GoalClassification,
    pub reference_set: Vec<String>,
}

/// The assembled report: one row per DMU, dataset order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PaymentReport {
    pub indicators: Vec<String>,
    pub rows: Vec<ReportRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
    Text,
}

/// Assemble the per-DMU report from the group solutions. Fails if any DMU
/// is not covered by a solution.
pub fn build_report(
    solutions: &[GroupSolution],
    dataset: &Dataset,
    settings: &EngineSettings,
) -> Result<PaymentReport, ReportError> {
    let backend = backend_by_id(&settings.solver)?;
    let mut rows = Vec::with_capacity(dataset.dmus.len());
    for dmu in &dataset.dmus {
        let (sol, j) = solutions
            .iter()
            .find_map(|s| s.member_index(&dmu.id).map(|j| (s, j)))
            .ok_or_else(|| ReportError::MissingSolution(dmu.id.clone()))?;
        let classification = classify_goal(&dmu.goals, dataset, backend.as_ref(), settings)?;
        let vs_targets = sol.payments_vs_targets[j].clone();
        let vs_goals = sol.payments_vs_goals[j].clone();
        let indicator_rates = vs_targets
            .per_indicator
            .iter()
            .zip(&dataset.schedule.weights)
            .map(|(p, w)| 100.0 * p / (dmu.endowment * w))
            .collect();
        rows.push(ReportRow {
            dmu_id: dmu.id.clone(),
            group_id: sol.group_id.clone(),
            endowment: dmu.endowment,
            actual: dmu.values.clone(),
            targets: sol.targets[j].clone(),
            goals: dmu.goals.clone(),
            rate_vs_targets: 100.0 * vs_targets.total / dmu.endowment,
            rate_vs_goals: 100.0 * vs_goals.total / dmu.endowment,
            payment_vs_targets: vs_targets,
            payment_vs_goals: vs_goals,
            indicator_rates,
            classification,
            reference_set: sol.reference_set.clone(),
        });
    }
    Ok(PaymentReport {
        indicators: dataset.indicators.iter().map(|i| i.id.clone()).collect(),
        rows,
    })
}

/// Render the report in the requested format. Text is the three-row-per-DMU
/// table layout, CSV is one row per (DMU, row kind), JSON is lossless.
pub fn render_report(report: &PaymentReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => render_json(report),
        ReportFormat::Csv => render_csv(report),
        ReportFormat::Text => render_text(report),
    }
}

fn render_json(report: &PaymentReport) -> String {
    let mut out = serde_json::to_string_pretty(report).expect("report serializes");
    out.push('\n');
    out
}

/// Money and indicator levels: two decimals with trailing zeros trimmed.
fn fmt2(x: f64) -> String {
    let s = format!("{x:.2}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

fn fmt_rate(x: f64) -> String {
    format!("{x:.1}%")
}

fn render_csv(report: &PaymentReport) -> String {
    let mut wtr = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["dmu_id".to_string(), "group_id".to_string(), "row".to_string()];
    header.extend(report.indicators.iter().cloned());
    header.extend(report.indicators.iter().map(|i| format!("payment_{i}")));
    header.extend([
        "payment_total".to_string(),
        "rate_pct".to_string(),
        "classification".to_string(),
        "reference_set".to_string(),
    ]);
    wtr.write_record(&header).expect("csv header");
    for row in &report.rows {
        let class = format!("{:?}", row.classification);
        let rs = row.reference_set.join(" ");
        let blank_pay = vec![String::new(); report.indicators.len() + 2];
        let kinds: [(&str, &Vec<f64>, Option<(&PaymentBreakdown, f64)>); 3] = [
            ("actual", &row.actual, None),
            (
                "targets",
                &row.targets,
                Some((&row.payment_vs_targets, row.rate_vs_targets)),
            ),
            (
                "goals",
                &row.goals,
                Some((&row.payment_vs_goals, row.rate_vs_goals)),
            ),
        ];
        for (kind, levels, pay) in kinds {
            let mut rec = vec![row.dmu_id.clone(), row.group_id.clone(), kind.to_string()];
            rec.extend(levels.iter().map(|v| v.to_string()));
            match pay {
                Some((breakdown, rate)) => {
                    rec.extend(breakdown.per_indicator.iter().map(|v| v.to_string()));
                    rec.push(breakdown.total.to_string());
                    rec.push(rate.to_string());
                }
                None => rec.extend(blank_pay.clone()),
            }
            rec.push(class.clone());
            rec.push(rs.clone());
            wtr.write_record(&rec).expect("csv record");
        }
    }
    String::from_utf8(wtr.into_inner().expect("csv flush")).expect("csv is utf-8")
}

fn render_text(report: &PaymentReport) -> String {
    let mut out = String::new();
    for row in &report.rows {
        let star = if row.classification == GoalClassification::OutsideAS {
            "*"
        } else {
            ""
        };
        let _ = writeln!(
            out,
            "DMU {}  (group {}, Q = {})  RS = {{{}}}{}",
            row.dmu_id,
            row.group_id,
            fmt2(row.endowment),
            row.reference_set.join(", "),
            match row.classification {
                GoalClassification::OutsideAS => "  goals outside AS",
                GoalClassification::InteriorOfAS => "  goals inside AS",
                GoalClassification::OnParetoFrontier => "  goals on the Pareto frontier",
            },
        );
        let levels = |v: &[f64]| v.iter().map(|x| fmt2(*x)).collect::<Vec<_>>().join(", ");
        let pays = |b: &PaymentBreakdown| {
            let mut parts: Vec<String> = b.per_indicator.iter().map(|x| fmt2(*x)).collect();
            parts.push(fmt2(b.total));
            parts.join("/")
        };
        let _ = writeln!(out, "  actual   ({})", levels(&row.actual));
        let _ = writeln!(
            out,
            "  targets  ({})  payments {}  rate {}",
            levels(&row.targets),
            pays(&row.payment_vs_targets),
            fmt_rate(row.rate_vs_targets),
        );
        let _ = writeln!(
            out,
            "  goals{}  ({})  payments {}  rate {}",
            star,
            levels(&row.goals),
            pays(&row.payment_vs_goals),
            fmt_rate(row.rate_vs_goals),
        );
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gab::run_analysis;
    use crate::settings::GroupingMode;
    use crate::test_fixtures::table1_dataset;

    fn fixture_dir() -> PathBuf {
        Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/table1")
    }

    fn table1_solutions(ds: &Dataset, st: &EngineSettings) -> Vec<GroupSolution> {
        run_analysis(ds, st)
            .unwrap()
            .into_iter()
            .map(|o| o.result.unwrap())
            .collect()
    }

    fn singleton_settings() -> EngineSettings {
        EngineSettings {
            grouping_mode: GroupingMode::Singletons,
            ..EngineSettings::default()
        }
    }

    #[test]
    fn bundled_fixture_loads() {
        let ds = load_dataset(&fixture_dir()).unwrap();
        assert_eq!(ds.dmus.len(), 6);
        assert_eq!(ds.indicator_count(), 2);
        assert_eq!(ds.schedule.weights, vec![0.5, 0.5]);
        assert_eq!(ds, table1_dataset());
    }

    #[test]
    fn missing_goals_name_the_dmu() {
        let tmp = tempfile::tempdir().unwrap();
        for f in ["dmus.csv", "weights.csv", "goals.csv"] {
            std::fs::copy(fixture_dir().join(f), tmp.path().join(f)).unwrap();
        }
        // drop DMU F's goals
        let goals = std::fs::read_to_string(tmp.path().join("goals.csv")).unwrap();
        let trimmed: Vec<&str> = goals.lines().filter(|l| !l.starts_with("F")).collect();
        std::fs::write(tmp.path().join("goals.csv"), trimmed.join("\n")).unwrap();
        let err = load_dataset(tmp.path()).unwrap_err();
        assert!(err.to_string().contains("'F'"), "{err}");
    }

    #[test]
    fn unknown_dmu_in_goals_is_schema_error() {
        let tmp = tempfile::tempdir().unwrap();
        for f in ["dmus.csv", "weights.csv", "goals.csv"] {
            std::fs::copy(fixture_dir().join(f), tmp.path().join(f)).unwrap();
        }
        let mut goals = std::fs::read_to_string(tmp.path().join("goals.csv")).unwrap();
        goals.push_str("X,1,1\n");
        std::fs::write(tmp.path().join("goals.csv"), goals).unwrap();
        let err = load_dataset(tmp.path()).unwrap_err();
        assert!(matches!(err, LoadError::Schema { .. }), "{err}");
        assert!(err.to_string().contains("'X'"));
    }

    #[test]
    fn non_numeric_cell_reports_line() {
        let tmp = tempfile::tempdir().unwrap();
        for f in ["dmus.csv", "weights.csv", "goals.csv"] {
            std::fs::copy(fixture_dir().join(f), tmp.path().join(f)).unwrap();
        }
        let dmus = std::fs::read_to_string(tmp.path().join("dmus.csv")).unwrap();
        std::fs::write(tmp.path().join("dmus.csv"), dmus.replace("6,5", "six,5")).unwrap();
        let err = load_dataset(tmp.path()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line"), "{msg}");
        assert!(msg.contains("six"), "{msg}");
    }

    #[test]
    fn missing_file_error_names_the_path() {
        let tmp = tempfile::tempdir().unwrap();
        let err = load_dataset(tmp.path()).unwrap_err();
        assert!(err.to_string().contains("weights.csv"), "{err}");
    }

    #[test]
    fn weight_sum_violation_surfaces_from_load() {
        let tmp = tempfile::tempdir().unwrap();
        for f in ["dmus.csv", "goals.csv"] {
            std::fs::copy(fixture_dir().join(f), tmp.path().join(f)).unwrap();
        }
        std::fs::write(
            tmp.path().join("weights.csv"),
            "indicator_id,weight\ny1,0.5\ny2,0.4\n",
        )
        .unwrap();
        match load_dataset(tmp.path()) {
            Err(LoadError::Validation(v)) => {
                assert!(v.iter().any(|x| x.rule == "weights_sum_to_one"))
            }
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn json_dataset_round_trips() {
        let ds = table1_dataset();
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("data.json");
        std::fs::write(&path, serde_json::to_string_pretty(&ds).unwrap()).unwrap();
        let loaded = load_dataset(&path).unwrap();
        assert_eq!(loaded, ds);
    }

    #[test]
    fn text_report_matches_published_layout() {
        let ds = table1_dataset();
        let st = singleton_settings();
        let sols = table1_solutions(&ds, &st);
        let report = build_report(&sols, &ds, &st).unwrap();
        let text = render_report(&report, ReportFormat::Text);
        // the DMU D block: targets (4, 5.8), payments 6.67/5.5/12.17,
        // goals outside AS hence starred, goal payments 6.67/2.5/9.17
        let d_block: Vec<&str> = text
            .lines()
            .skip_while(|l| !l.starts_with("DMU D"))
            .take(4)
            .collect();
        assert!(d_block[0].contains("goals outside AS"), "{d_block:?}");
        assert!(d_block[2].contains("(4, 5.8)"), "{d_block:?}");
        assert!(d_block[2].contains("payments 6.67/5.5/12.17"), "{d_block:?}");
        assert!(d_block[3].starts_with("  goals*"), "{d_block:?}");
        assert!(d_block[3].contains("payments 6.67/2.5/9.17"), "{d_block:?}");
        // A's goals (3, 7) and C's (8, 4) are unattainable too; the rest
        // are unstarred
        assert!(text.contains("DMU B"));
        assert_eq!(text.lines().filter(|l| l.starts_with("  goals*")).count(), 3);
    }

    #[test]
    fn csv_and_json_values_agree() {
        let ds = table1_dataset();
        let st = singleton_settings();
        let sols = table1_solutions(&ds, &st);
        let report = build_report(&sols, &ds, &st).unwrap();
        let csv_text = render_report(&report, ReportFormat::Csv);
        let json_text = render_report(&report, ReportFormat::Json);
        let parsed: PaymentReport = serde_json::from_str(&json_text).unwrap();
        // 3 rows per DMU plus the header
        assert_eq!(csv_text.lines().count(), 1 + 3 * ds.dmus.len());
        for (row, orig) in parsed.rows.iter().zip(&report.rows) {
            assert_eq!(row.targets, orig.targets);
            assert_eq!(
                row.payment_vs_targets.total,
                orig.payment_vs_targets.total
            );
        }
        // the CSV carries the same full-precision totals
        for row in &report.rows {
            assert!(
                csv_text.contains(&row.payment_vs_targets.total.to_string()),
                "total for {} missing",
                row.dmu_id
            );
        }
    }

    #[test]
    fn json_rendering_is_deterministic() {
        let ds = table1_dataset();
        let st = singleton_settings();
        let sols = table1_solutions(&ds, &st);
        let report = build_report(&sols, &ds, &st).unwrap();
        let first = render_report(&report, ReportFormat::Json);
        let reparsed: PaymentReport = serde_json::from_str(&first).unwrap();
        let second = render_report(&reparsed, ReportFormat::Json);
        assert_eq!(first, second);
    }

    #[test]
    fn empty_report_is_a_valid_document() {
        let report = PaymentReport {
            indicators: Vec::new(),
            rows: Vec::new(),
        };
        assert_eq!(render_report(&report, ReportFormat::Text), "");
        let json = render_report(&report, ReportFormat::Json);
        assert!(serde_json::from_str::<PaymentReport>(&json).is_ok());
        let csv_text = render_report(&report, ReportFormat::Csv);
        assert_eq!(csv_text.lines().count(), 1); // header only
    }

    #[test]
    fn missing_solution_is_reported() {
        let ds = table1_dataset();
        let st = singleton_settings();
        let mut sols = table1_solutions(&ds, &st);
        sols.retain(|s| s.group_id != "C");
        let err = build_report(&sols, &ds, &st).unwrap_err();
        assert!(matches!(err, ReportError::MissingSolution(ref id) if id == "C"));
    }
}
