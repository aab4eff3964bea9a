//! Achievement and incentive payment functions, plus the region-indicator
//! form used to check the linearization.
//!
//! The payment for one indicator is a piecewise linear, non-increasing
//! function of the deviation `s` (goal or target level minus actual level):
//! the full share `Q * w` when `s <= 0`, zero when `s >= ceiling`, and a
//! linear ramp in between. A zero ceiling degenerates to a step function.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{DmuRecord, PaymentSchedule};

/// Which branch of the piecewise payment function is active for one
/// (indicator, DMU) cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PaymentRegion {
    /// Deviation at most zero: full share paid.
    FullPay,
    /// Deviation between zero and the ceiling: linear ramp.
    LinearPay,
    /// Deviation at or above the ceiling: nothing paid.
    ZeroPay,
}

impl PaymentRegion {
    /// The region implied by a deviation value. Boundaries are resolved
    /// toward the lower region; payments agree there either way.
    pub fn from_deviation(deviation: f64, ceiling: f64) -> Self {
        if deviation <= 0.0 {
            PaymentRegion::FullPay
        } else if deviation < ceiling {
            PaymentRegion::LinearPay
        } else {
            PaymentRegion::ZeroPay
        }
    }

    /// Whether a deviation is admissible for this region.
    pub fn contains(&self, deviation: f64, ceiling: f64) -> bool {
        match self {
            PaymentRegion::FullPay => deviation <= 0.0,
            PaymentRegion::LinearPay => (0.0..=ceiling).contains(&deviation),
            PaymentRegion::ZeroPay => deviation >= ceiling,
        }
    }
}

/// Per-indicator and total payments for one DMU.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaymentBreakdown {
    pub per_indicator: Vec<f64>,
    pub total: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum PaymentError {
    #[error("deviation {deviation} is outside region {region:?} for ceiling {ceiling}")]
    RegionMismatch {
        region: PaymentRegion,
        deviation: f64,
        ceiling: f64,
    },
}

/// Degree of achievement in `[0, 1]` as a function of the deviation.
/// With a zero ceiling the middle branch vanishes and the function is a
/// step: 1 for `s <= 0`, else 0.
pub fn achievement(deviation: f64, ceiling: f64) -> f64 {
    debug_assert!(ceiling >= 0.0, "ceiling must be nonnegative");
    if deviation <= 0.0 {
        1.0
    } else if ceiling > 0.0 && deviation < ceiling {
        1.0 - deviation / ceiling
    } else {
        0.0
    }
}

/// Incentive paid for one indicator: `Q * w * achievement(s, ceiling)`.
pub fn payment(deviation: f64, endowment: f64, weight: f64, ceiling: f64) -> f64 {
    endowment * weight * achievement(deviation, ceiling)
}

/// Payment against a goal or target vector expressed as deviations from
/// the DMU's actuals. `dmu_index` locates the DMU in the dataset for
/// explicit ceiling lookup.
pub fn total_payment(
    deviations: &[f64],
    dmu: &DmuRecord,
    dmu_index: usize,
    schedule: &PaymentSchedule,
) -> PaymentBreakdown {
    let per_indicator: Vec<f64> = deviations
        .iter()
        .enumerate()
        .map(|(r, &s)| {
            let ceiling = schedule.ceiling(dmu_index, r, dmu.values[r]);
            payment(s, dmu.endowment, schedule.weights[r], ceiling)
        })
        .collect();
    let total = per_indicator.iter().sum();
    PaymentBreakdown { per_indicator, total }
}

/// Region-indicator evaluation of the payment: the full share when the
/// full-pay indicator is active, the ramp when the linear indicator is
/// active, zero otherwise. Errors when the deviation is incompatible with
/// the claimed region.
pub fn linearized_payment(
    region: PaymentRegion,
    deviation: f64,
    endowment: f64,
    weight: f64,
    ceiling: f64,
) -> Result<f64, PaymentError> {
    if !region.contains(deviation, ceiling) {
        return Err(PaymentError::RegionMismatch {
            region,
            deviation,
            ceiling,
        });
    }
    let share = endowment * weight;
    Ok(match region {
        PaymentRegion::FullPay => share,
        PaymentRegion::LinearPay => {
            if ceiling > 0.0 {
                share * (1.0 - deviation / ceiling)
            } else {
                // ceiling 0 forces deviation 0; the ramp collapses to full pay
                share
            }
        }
        PaymentRegion::ZeroPay => 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_fixtures::table1_dataset;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn achievement_boundaries() {
        // 20% room for improvement leaves 80% achievement
        assert!(close(achievement(0.2 * 5.0, 5.0), 0.8, 1e-12));
        assert_eq!(achievement(0.0, 3.0), 1.0);
        assert_eq!(achievement(3.0, 3.0), 0.0);
        // zero ceiling: step function
        assert_eq!(achievement(0.0, 0.0), 1.0);
        assert_eq!(achievement(1e-9, 0.0), 0.0);
    }

    #[test]
    fn payment_matches_worked_example() {
        // DMU D, indicator 1: goal 4, actual 3
        assert!(close(payment(1.0, 20.0, 0.5, 3.0), 20.0 / 3.0, 1e-9));
        // DMU D, indicator 2: goal 7, actual 4
        assert!(close(payment(3.0, 20.0, 0.5, 4.0), 2.5, 1e-12));
        // outperformed goal pays the full share
        assert!(close(payment(-5.0, 10.0, 0.5, 2.0), 5.0, 1e-12));
    }

    #[test]
    fn total_payment_matches_goal_rows() {
        let ds = table1_dataset();
        // DMU E vs goals (6,3): actual (5,2), Q=25
        let e = ds.dmu("E").unwrap();
        let je = ds.dmu_index("E").unwrap();
        let devs: Vec<f64> = e.goals.iter().zip(&e.values).map(|(g, y)| g - y).collect();
        let b = total_payment(&devs, e, je, &ds.schedule);
        assert!(close(b.per_indicator[0], 10.0, 1e-9));
        assert!(close(b.per_indicator[1], 6.25, 1e-9));
        assert!(close(b.total, 16.25, 1e-9));

        // DMU D vs DEA targets (4, 5.8)
        let d = ds.dmu("D").unwrap();
        let jd = ds.dmu_index("D").unwrap();
        let devs = [4.0 - 3.0, 5.8 - 4.0];
        let b = total_payment(&devs, d, jd, &ds.schedule);
        assert!(close(b.per_indicator[0], 20.0 / 3.0, 1e-9));
        assert!(close(b.per_indicator[1], 5.5, 1e-9));
        assert!(close(b.total, 20.0 / 3.0 + 5.5, 1e-9));

        // every goal met pays the whole endowment
        let devs = [-0.1, -2.0];
        let b = total_payment(&devs, d, jd, &ds.schedule);
        assert!(close(b.total, d.endowment, 1e-12));
    }

    #[test]
    fn linearized_payment_branches() {
        let p = linearized_payment(PaymentRegion::LinearPay, 1.0, 20.0, 0.5, 3.0).unwrap();
        assert!(close(p, 20.0 / 3.0, 1e-9));
        let p = linearized_payment(PaymentRegion::FullPay, -2.0, 10.0, 0.5, 5.0).unwrap();
        assert!(close(p, 5.0, 1e-12));
        let p = linearized_payment(PaymentRegion::ZeroPay, 7.0, 10.0, 0.5, 5.0).unwrap();
        assert_eq!(p, 0.0);
    }

    #[test]
    fn linearized_payment_rejects_inconsistent_region() {
        let err = linearized_payment(PaymentRegion::FullPay, 1.0, 10.0, 0.5, 5.0).unwrap_err();
        assert!(matches!(err, PaymentError::RegionMismatch { .. }));
    }

    #[test]
    fn boundary_agreement() {
        // s = 0: FullPay and LinearPay agree
        let a = linearized_payment(PaymentRegion::FullPay, 0.0, 12.0, 0.25, 4.0).unwrap();
        let b = linearized_payment(PaymentRegion::LinearPay, 0.0, 12.0, 0.25, 4.0).unwrap();
        assert_eq!(a, b);
        // s = ceiling: LinearPay and ZeroPay agree
        let a = linearized_payment(PaymentRegion::LinearPay, 4.0, 12.0, 0.25, 4.0).unwrap();
        let b = linearized_payment(PaymentRegion::ZeroPay, 4.0, 12.0, 0.25, 4.0).unwrap();
        assert_eq!(a, b);
    }

    proptest! {
        #[test]
        fn payment_is_bounded_and_scales(
            s in -20.0f64..20.0,
            q in 0.1f64..1000.0,
            w in 0.01f64..1.0,
            d in 0.001f64..10.0,
            c in 0.1f64..10.0,
        ) {
            let p = payment(s, q, w, d);
            prop_assert!(p >= 0.0 && p <= q * w + 1e-12);
            // scale covariance in the endowment
            let scaled = payment(s, c * q, w, d);
            prop_assert!((scaled - c * p).abs() <= 1e-9 * (1.0 + scaled.abs()));
        }

        #[test]
        fn payment_is_non_increasing(
            s1 in -20.0f64..20.0,
            delta in 0.0f64..20.0,
            q in 0.1f64..1000.0,
            w in 0.01f64..1.0,
            d in 0.001f64..10.0,
        ) {
            prop_assert!(payment(s1 + delta, q, w, d) <= payment(s1, q, w, d) + 1e-12);
        }

        #[test]
        fn region_form_equals_direct_form(
            s in -20.0f64..20.0,
            q in 0.1f64..1000.0,
            w in 0.01f64..1.0,
            d in 0.001f64..10.0,
        ) {
            let region = PaymentRegion::from_deviation(s, d);
            let lin = linearized_payment(region, s, q, w, d).unwrap();
            prop_assert!((lin - payment(s, q, w, d)).abs() <= 1e-12 * (1.0 + q));
        }
    }
}
