//! No-vaccination estimate: severity criteria frozen at their pre-pivot
//! relation to incidence.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::aggregator::{run_series, IndicatorSeries, ModelConfig};
use crate::epicriteria::{CriteriaMatrix, PerformanceVector};
use crate::error::{PaciError, Result};
use crate::numfmt::sig6;

pub const COUNTERFACTUAL_HEADER: [&str; 3] = ["date", "actual", "counterfactual"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CounterfactualSpec {
    /// Row index of the pivot. Rows before it calibrate the frozen ratios;
    /// rows after it are replaced.
    pub pivot_day: usize,
}

/// Pre-pivot averages used to rebuild the severity criteria.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrozenRatios {
    pub lethality: f64,
    pub wards_per_case: f64,
    pub icu_per_case: f64,
}

/// Averages over the first `pivot_day` rows; ratios skip rows with zero
/// incidence.
pub fn frozen_ratios(matrix: &CriteriaMatrix, spec: &CounterfactualSpec) -> Result<FrozenRatios> {
    let len = matrix.len();
    if spec.pivot_day == 0 || spec.pivot_day >= len {
        return Err(PaciError::PivotOutOfRange {
            pivot: spec.pivot_day,
            len,
        });
    }
    let calib = &matrix.rows()[..spec.pivot_day];
    let lethality = calib.iter().map(|r| r.lethality).sum::<f64>() / calib.len() as f64;
    let active: Vec<&PerformanceVector> = calib.iter().filter(|r| r.incidence > 0.0).collect();
    if active.is_empty() {
        return Err(PaciError::NoPrePivotActivity);
    }
    let n = active.len() as f64;
    Ok(FrozenRatios {
        lethality,
        wards_per_case: active.iter().map(|r| r.wards / r.incidence).sum::<f64>() / n,
        icu_per_case: active.iter().map(|r| r.icu / r.incidence).sum::<f64>() / n,
    })
}

/// The criteria matrix with post-pivot severity rebuilt from the frozen
/// ratios. Incidence and transmission are untouched.
pub fn counterfactual_matrix(
    matrix: &CriteriaMatrix,
    spec: &CounterfactualSpec,
) -> Result<CriteriaMatrix> {
    let ratios = frozen_ratios(matrix, spec)?;
    let rows = matrix
        .rows()
        .iter()
        .enumerate()
        .map(|(t, r)| {
            if t <= spec.pivot_day {
                *r
            } else {
                PerformanceVector {
                    lethality: ratios.lethality,
                    wards: ratios.wards_per_case * r.incidence,
                    icu: ratios.icu_per_case * r.incidence,
                    ..*r
                }
            }
        })
        .collect();
    CriteriaMatrix::with_flags(rows, matrix.flags().to_vec())
}

pub fn no_vaccination_series(
    matrix: &CriteriaMatrix,
    cfg: &ModelConfig,
    spec: &CounterfactualSpec,
) -> Result<IndicatorSeries> {
    Ok(run_series(&counterfactual_matrix(matrix, spec)?, cfg))
}

/// Actual and counterfactual indicator side by side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterfactualComparison {
    pub ratios: FrozenRatios,
    pub actual: IndicatorSeries,
    pub counterfactual: IndicatorSeries,
}

impl CounterfactualComparison {
    pub fn compute(
        matrix: &CriteriaMatrix,
        cfg: &ModelConfig,
        spec: &CounterfactualSpec,
    ) -> Result<Self> {
        Ok(Self {
            ratios: frozen_ratios(matrix, spec)?,
            actual: run_series(matrix, cfg),
            counterfactual: no_vaccination_series(matrix, cfg, spec)?,
        })
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(COUNTERFACTUAL_HEADER)?;
        for (a, c) in self.actual.points.iter().zip(&self.counterfactual.points) {
            wtr.write_record([a.date.to_string(), sig6(a.overall), sig6(c.overall)])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn matrix(rows: &[[f64; 5]]) -> CriteriaMatrix {
        let start = NaiveDate::from_ymd_opt(2021, 3, 1).unwrap();
        CriteriaMatrix::from_rows(
            rows.iter()
                .enumerate()
                .map(|(i, x)| PerformanceVector::new(start + chrono::Days::new(i as u64), *x))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn ratios_skip_zero_incidence() {
        let m = matrix(&[
            [0.0, 0.0, 3.0, 10.0, 1.0],
            [100.0, 1.0, 1.0, 200.0, 20.0],
            [200.0, 1.0, 2.0, 200.0, 20.0],
            [300.0, 1.0, 9.0, 999.0, 99.0],
        ]);
        let r = frozen_ratios(&m, &CounterfactualSpec { pivot_day: 3 }).unwrap();
        assert_eq!(r.lethality, 2.0);
        assert_eq!(r.wards_per_case, 1.5);
        assert!((r.icu_per_case - 0.15).abs() < 1e-15);
    }

    #[test]
    fn post_pivot_rows_are_rebuilt() {
        let m = matrix(&[
            [100.0, 1.0, 1.0, 200.0, 20.0],
            [100.0, 1.0, 1.0, 200.0, 20.0],
            [400.0, 1.1, 0.2, 100.0, 5.0],
        ]);
        let cf = counterfactual_matrix(&m, &CounterfactualSpec { pivot_day: 1 }).unwrap();
        assert_eq!(cf.rows()[..2], m.rows()[..2]);
        assert_eq!(cf.rows()[2].values(), [400.0, 1.1, 1.0, 800.0, 80.0]);
    }

    #[test]
    fn pivot_bounds() {
        let m = matrix(&[[1.0; 5], [1.0; 5]]);
        for pivot in [0, 2, 9] {
            assert!(matches!(
                frozen_ratios(&m, &CounterfactualSpec { pivot_day: pivot }),
                Err(PaciError::PivotOutOfRange { .. })
            ));
        }
        let quiet = matrix(&[[0.0; 5], [0.0; 5], [1.0; 5]]);
        assert!(matches!(
            frozen_ratios(&quiet, &CounterfactualSpec { pivot_day: 2 }),
            Err(PaciError::NoPrePivotActivity)
        ));
    }
}
