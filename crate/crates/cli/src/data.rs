//! Loading inputs and configurations from disk.

use std::fs;
use std::path::Path;

use chrono::NaiveDate;
use paci_core::aggregator::ModelConfig;
use paci_core::epicriteria::{
    compute_performances, CriteriaMatrix, RawSeries, CRITERIA_HEADER, RAW_HEADER,
};

use crate::error::{AppError, AppResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputKind {
    /// Daily counts: `date,new_cases,new_deaths,wards,icu`.
    Raw,
    /// Criteria performances: `date,incid,trans,letha,wards,icu`.
    Criteria,
}

pub fn detect(text: &str) -> AppResult<InputKind> {
    let header: Vec<&str> = text
        .lines()
        .next()
        .unwrap_or_default()
        .trim_start_matches('\u{feff}')
        .split(',')
        .map(str::trim)
        .collect();
    if header == RAW_HEADER {
        Ok(InputKind::Raw)
    } else if header == CRITERIA_HEADER {
        Ok(InputKind::Criteria)
    } else {
        Err(AppError::new(
            "header",
            format!(
                "unrecognised CSV header `{}`; expected `{}` or `{}`",
                header.join(","),
                RAW_HEADER.join(","),
                CRITERIA_HEADER.join(",")
            ),
        ))
    }
}

fn read(path: &Path) -> AppResult<String> {
    fs::read_to_string(path)
        .map_err(|e| AppError::new("io", format!("cannot read {}: {e}", path.display())))
}

pub fn load_raw(path: &Path) -> AppResult<RawSeries> {
    let text = read(path)?;
    match detect(&text)? {
        InputKind::Raw => Ok(RawSeries::read_csv(text.as_bytes())?),
        InputKind::Criteria => Err(AppError::usage(format!(
            "{} holds criteria performances; this command needs daily counts",
            path.display()
        ))),
    }
}

/// Criteria matrix from either input kind, restricted to `[from, to]`.
/// Raw counts use their full history for the rolling windows before the
/// date range is applied.
pub fn load_matrix(
    path: &Path,
    from: Option<NaiveDate>,
    to: Option<NaiveDate>,
) -> AppResult<CriteriaMatrix> {
    let text = read(path)?;
    let matrix = match detect(&text)? {
        InputKind::Raw => compute_performances(&RawSeries::read_csv(text.as_bytes())?)?,
        InputKind::Criteria => CriteriaMatrix::read_csv(text.as_bytes())?,
    };
    let matrix = matrix.slice_dates(from, to);
    if matrix.is_empty() {
        return Err(AppError::new(
            "empty-input",
            "no rows in the selected date range",
        ));
    }
    Ok(matrix)
}

pub fn load_config(path: Option<&Path>) -> AppResult<ModelConfig> {
    match path {
        Some(p) => Ok(ModelConfig::from_json(&read(p)?)?),
        None => Ok(ModelConfig::default()),
    }
}
