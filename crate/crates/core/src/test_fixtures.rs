//! In-memory copies of the bundled example data, shared by unit and
//! integration tests. Not part of the public API.

use crate::domain::{Dataset, DmuRecord, Grouping, Indicator, PaymentSchedule};

/// The six-DMU, two-indicator example dataset (also available as CSV under
/// `fixtures/table1/`). Singleton grouping, equal weights.
pub fn table1_dataset() -> Dataset {
    let rows: [(&str, [f64; 2], [f64; 2], f64); 6] = [
        ("A", [1.0, 7.0], [3.0, 7.0], 25.0),
        ("B", [6.0, 5.0], [5.0, 4.0], 30.0),
        ("C", [9.0, 1.0], [8.0, 4.0], 20.0),
        ("D", [3.0, 4.0], [4.0, 7.0], 20.0),
        ("E", [5.0, 2.0], [6.0, 3.0], 25.0),
        ("F", [2.0, 5.0], [2.0, 6.6], 20.0),
    ];
    let dmus: Vec<DmuRecord> = rows
        .iter()
        .map(|(id, values, goals, endowment)| DmuRecord {
            id: id.to_string(),
            group_id: id.to_string(),
            values: values.to_vec(),
            goals: goals.to_vec(),
            endowment: *endowment,
        })
        .collect();
    let grouping = Grouping::singletons(&dmus);
    Dataset {
        indicators: vec![Indicator::new("y1"), Indicator::new("y2")],
        dmus,
        schedule: PaymentSchedule::equal_weights(2),
        grouping,
    }
}
