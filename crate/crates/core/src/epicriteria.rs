//! Daily epidemic counts and the five criteria derived from them.
//!
//! Criteria, in order:
//!
//! | # | name         | definition                                                       |
//! |---|--------------|------------------------------------------------------------------|
//! | 1 | incidence    | 7-day mean of new cases                                          |
//! | 2 | transmission | geometric mean over 7 days of consecutive weekly-sum ratios      |
//! | 3 | lethality    | 14-day mean of `100 * deaths(u) / cases(u - 14)`                 |
//! | 4 | wards        | ward occupancy (non-ICU), pass-through                           |
//! | 5 | icu          | ICU occupancy, pass-through                                      |
//!
//! Day indices are positions in the [`RawSeries`]; every transform only looks
//! backwards, so appending days never changes earlier outputs.

use std::io::{Read, Write};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{PaciError, Result};
use crate::numfmt::sig6;

/// Header of the raw-series CSV.
pub const RAW_HEADER: [&str; 5] = ["date", "new_cases", "new_deaths", "wards", "icu"];
/// Header of the criteria-matrix CSV.
pub const CRITERIA_HEADER: [&str; 6] = ["date", "incid", "trans", "letha", "wards", "icu"];

/// Short criterion names in criterion order.
pub const CRITERIA: [&str; 5] = ["incid", "trans", "letha", "wards", "icu"];

/// First day index at which incidence is defined.
pub const INCIDENCE_FIRST_DAY: usize = 6;
/// First day index at which transmission is defined.
pub const TRANSMISSION_FIRST_DAY: usize = 13;
/// First day index at which lethality is defined.
pub const LETHALITY_FIRST_DAY: usize = 27;
/// First evaluable day of the whole criteria vector (slowest transform).
pub const FIRST_EVALUABLE_DAY: usize = LETHALITY_FIRST_DAY;
/// Minimum series length for [`compute_performances`].
pub const MIN_SERIES_LEN: usize = FIRST_EVALUABLE_DAY + 1;

const WEEK: usize = 7;
const DEATH_LAG: usize = 14;
const LETHALITY_WINDOW: usize = 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DailyRecord {
    pub date: NaiveDate,
    pub new_cases: u64,
    pub new_deaths: u64,
    pub wards: u64,
    pub icu: u64,
}

/// Contiguous daily series of raw counts. Construction validates that dates
/// are consecutive calendar days.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RawSeries {
    records: Vec<DailyRecord>,
}

impl RawSeries {
    pub fn new(records: Vec<DailyRecord>) -> Result<Self> {
        for pair in records.windows(2) {
            let (prev, next) = (pair[0].date, pair[1].date);
            if next <= prev {
                return Err(PaciError::DatesNotIncreasing { date: next });
            }
            if prev.succ_opt() != Some(next) {
                return Err(PaciError::MissingDay { prev, next });
            }
        }
        Ok(Self { records })
    }

    /// Builds a series starting at `start` from per-day count tuples
    /// `(new_cases, new_deaths, wards, icu)`.
    pub fn from_counts(start: NaiveDate, counts: &[(u64, u64, u64, u64)]) -> Result<Self> {
        let records = counts
            .iter()
            .zip(start.iter_days())
            .map(|(&(new_cases, new_deaths, wards, icu), date)| DailyRecord {
                date,
                new_cases,
                new_deaths,
                wards,
                icu,
            })
            .collect();
        Self::new(records)
    }

    pub fn records(&self) -> &[DailyRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn date(&self, t: usize) -> Option<NaiveDate> {
        self.records.get(t).map(|r| r.date)
    }

    /// Keeps only the days in `[from, to]` (inclusive, either bound optional).
    pub fn slice_dates(&self, from: Option<NaiveDate>, to: Option<NaiveDate>) -> Self {
        let records = self
            .records
            .iter()
            .filter(|r| from.is_none_or(|f| r.date >= f) && to.is_none_or(|t| r.date <= t))
            .copied()
            .collect();
        Self { records }
    }

    fn check_day(&self, t: usize, first: usize) -> Result<()> {
        if t >= self.len() {
            return Err(PaciError::DayOutOfRange {
                day: t,
                len: self.len(),
            });
        }
        if t < first {
            return Err(PaciError::InsufficientHistory {
                day: t,
                required: first,
            });
        }
        Ok(())
    }

    fn cases(&self, u: usize) -> u64 {
        self.records[u].new_cases
    }

    /// Sum of new cases over the seven days ending at `u`.
    fn weekly_cases(&self, u: usize) -> u64 {
        self.records[u + 1 - WEEK..=u]
            .iter()
            .map(|r| r.new_cases)
            .sum()
    }

    /// Reads the `date,new_cases,new_deaths,wards,icu` CSV format.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(reader);
        check_header(rdr.headers()?, &RAW_HEADER)?;
        let mut records = Vec::new();
        for (i, row) in rdr.records().enumerate() {
            let row = row?;
            let line = i + 2;
            let date = parse_date(&row[0], line)?;
            let count = |idx: usize| parse_count(&row[idx], RAW_HEADER[idx], line);
            records.push(DailyRecord {
                date,
                new_cases: count(1)?,
                new_deaths: count(2)?,
                wards: count(3)?,
                icu: count(4)?,
            });
        }
        Self::new(records)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(RAW_HEADER)?;
        for r in &self.records {
            wtr.write_record([
                r.date.to_string(),
                r.new_cases.to_string(),
                r.new_deaths.to_string(),
                r.wards.to_string(),
                r.icu.to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

pub(crate) fn check_header(found: &csv::StringRecord, expected: &[&str]) -> Result<()> {
    let found_fields: Vec<&str> = found.iter().map(str::trim).collect();
    if found_fields != expected {
        return Err(PaciError::Header {
            expected: expected.join(","),
            found: found_fields.join(","),
        });
    }
    Ok(())
}

pub(crate) fn parse_date(field: &str, line: usize) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(field.trim(), "%Y-%m-%d").map_err(|e| PaciError::Parse {
        line,
        message: format!("bad date `{field}`: {e}"),
    })
}

fn parse_count(field: &str, column: &str, line: usize) -> Result<u64> {
    let value: i64 = field.trim().parse().map_err(|e| PaciError::Parse {
        line,
        message: format!("bad integer `{field}` in `{column}`: {e}"),
    })?;
    if value < 0 {
        return Err(PaciError::NegativeCount {
            column: column.to_string(),
            value: field.trim().to_string(),
            line,
        });
    }
    Ok(value as u64)
}

/// Criterion 1: seven-day mean of new cases ending at day `t`.
pub fn incidence(raw: &RawSeries, t: usize) -> Result<f64> {
    raw.check_day(t, INCIDENCE_FIRST_DAY)?;
    Ok(raw.weekly_cases(t) as f64 / WEEK as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transmission {
    pub value: f64,
    /// A previous-week sum in the window was zero; `value` is the 1.0 fallback.
    pub zero_activity: bool,
}

/// Criterion 2: geometric mean, over the seven days ending at `t`, of the
/// ratio between a weekly case sum and the weekly sum shifted one day back.
///
/// If any of the seven denominators is zero the growth is not measurable and
/// the result is `1.0` with `zero_activity` set.
pub fn transmission(raw: &RawSeries, t: usize) -> Result<Transmission> {
    raw.check_day(t, TRANSMISSION_FIRST_DAY)?;
    let mut log_sum = 0.0;
    for u in t + 1 - WEEK..=t {
        let numerator = raw.weekly_cases(u);
        let denominator = raw.weekly_cases(u - 1);
        if denominator == 0 {
            return Ok(Transmission {
                value: 1.0,
                zero_activity: true,
            });
        }
        log_sum += (numerator as f64 / denominator as f64).ln();
    }
    Ok(Transmission {
        value: (log_sum / WEEK as f64).exp(),
        zero_activity: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lethality {
    pub value: f64,
    /// Days of the 14-day window dropped because the lagged case count was 0.
    pub skipped_days: usize,
}

impl Lethality {
    /// True when every day of the window was skipped.
    pub fn undefined(&self) -> bool {
        self.skipped_days == LETHALITY_WINDOW
    }
}

/// Criterion 3: mean over the 14 days ending at `t` of
/// `100 * deaths(u) / cases(u - 14)`, in percent.
///
/// Days whose lagged case count is zero are skipped and the mean is taken
/// over the days kept; with all days skipped the value is 0.
pub fn lethality(raw: &RawSeries, t: usize) -> Result<Lethality> {
    raw.check_day(t, LETHALITY_FIRST_DAY)?;
    let mut sum = 0.0;
    let mut kept = 0usize;
    for u in t + 1 - LETHALITY_WINDOW..=t {
        let lagged = raw.cases(u - DEATH_LAG);
        if lagged == 0 {
            continue;
        }
        sum += 100.0 * raw.records[u].new_deaths as f64 / lagged as f64;
        kept += 1;
    }
    let value = if kept == 0 { 0.0 } else { sum / kept as f64 };
    Ok(Lethality {
        value,
        skipped_days: LETHALITY_WINDOW - kept,
    })
}

/// Criterion 4: ward occupancy on day `t`.
pub fn wards(raw: &RawSeries, t: usize) -> Result<f64> {
    raw.check_day(t, 0)?;
    Ok(raw.records[t].wards as f64)
}

/// Criterion 5: ICU occupancy on day `t`.
pub fn icu(raw: &RawSeries, t: usize) -> Result<f64> {
    raw.check_day(t, 0)?;
    Ok(raw.records[t].icu as f64)
}

/// The five criteria performances on one day.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerformanceVector {
    pub date: NaiveDate,
    pub incidence: f64,
    pub transmission: f64,
    pub lethality: f64,
    pub wards: f64,
    pub icu: f64,
}

impl PerformanceVector {
    pub fn new(date: NaiveDate, values: [f64; 5]) -> Self {
        let [incidence, transmission, lethality, wards, icu] = values;
        Self {
            date,
            incidence,
            transmission,
            lethality,
            wards,
            icu,
        }
    }

    pub fn values(&self) -> [f64; 5] {
        [
            self.incidence,
            self.transmission,
            self.lethality,
            self.wards,
            self.icu,
        ]
    }

    /// Lists the violated invariants (negative or non-finite entries).
    pub fn violations(&self) -> Vec<String> {
        self.values()
            .iter()
            .zip(CRITERIA)
            .filter(|(v, _)| !(v.is_finite() && **v >= 0.0))
            .map(|(v, name)| format!("{name} must be finite and >= 0 (got {v})"))
            .collect()
    }
}

/// Auditing flags attached to a computed criteria row.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowFlags {
    pub zero_activity: bool,
    pub lethality_undefined: bool,
}

/// One [`PerformanceVector`] per evaluable day, in date order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriteriaMatrix {
    rows: Vec<PerformanceVector>,
    flags: Vec<RowFlags>,
}

impl CriteriaMatrix {
    /// Builds a matrix from externally supplied rows (no flags).
    pub fn from_rows(rows: Vec<PerformanceVector>) -> Result<Self> {
        let flags = vec![RowFlags::default(); rows.len()];
        Self::with_flags(rows, flags)
    }

    pub(crate) fn with_flags(rows: Vec<PerformanceVector>, flags: Vec<RowFlags>) -> Result<Self> {
        for pair in rows.windows(2) {
            if pair[1].date <= pair[0].date {
                return Err(PaciError::DatesNotIncreasing { date: pair[1].date });
            }
        }
        for row in &rows {
            let violations = row.violations();
            if !violations.is_empty() {
                return Err(PaciError::Parse {
                    line: 0,
                    message: format!("{}: {}", row.date, violations.join("; ")),
                });
            }
        }
        Ok(Self { rows, flags })
    }

    pub fn rows(&self) -> &[PerformanceVector] {
        &self.rows
    }

    pub fn flags(&self) -> &[RowFlags] {
        &self.flags
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Column `j` (criterion order) as a vector.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r.values()[j]).collect()
    }

    pub fn slice_dates(&self, from: Option<NaiveDate>, to: Option<NaiveDate>) -> Self {
        let keep = |d: NaiveDate| from.is_none_or(|f| d >= f) && to.is_none_or(|t| d <= t);
        let (rows, flags) = self
            .rows
            .iter()
            .zip(&self.flags)
            .filter(|(r, _)| keep(r.date))
            .map(|(r, f)| (*r, *f))
            .unzip();
        Self { rows, flags }
    }

    /// Reads the `date,incid,trans,letha,wards,icu` CSV format.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(reader);
        check_header(rdr.headers()?, &CRITERIA_HEADER)?;
        let mut rows = Vec::new();
        for (i, row) in rdr.records().enumerate() {
            let row = row?;
            let line = i + 2;
            let date = parse_date(&row[0], line)?;
            let mut values = [0.0; 5];
            for (j, v) in values.iter_mut().enumerate() {
                let field = row[j + 1].trim();
                *v = field.parse().map_err(|e| PaciError::Parse {
                    line,
                    message: format!("bad number `{field}` in `{}`: {e}", CRITERIA_HEADER[j + 1]),
                })?;
            }
            rows.push(PerformanceVector::new(date, values));
        }
        Self::from_rows(rows)
    }

    /// Writes the matrix with six significant digits per value.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(CRITERIA_HEADER)?;
        for row in &self.rows {
            let mut record = vec![row.date.to_string()];
            record.extend(row.values().iter().map(|v| sig6(*v)));
            wtr.write_record(&record)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Evaluates the five criteria on every day from [`FIRST_EVALUABLE_DAY`] on.
pub fn compute_performances(raw: &RawSeries) -> Result<CriteriaMatrix> {
    if raw.len() < MIN_SERIES_LEN {
        return Err(PaciError::SeriesTooShort {
            len: raw.len(),
            required: MIN_SERIES_LEN,
        });
    }
    let mut rows = Vec::with_capacity(raw.len() - FIRST_EVALUABLE_DAY);
    let mut flags = Vec::with_capacity(rows.capacity());
    for t in FIRST_EVALUABLE_DAY..raw.len() {
        let trans = transmission(raw, t)?;
        let letha = lethality(raw, t)?;
        rows.push(PerformanceVector::new(
            raw.records[t].date,
            [
                incidence(raw, t)?,
                trans.value,
                letha.value,
                wards(raw, t)?,
                icu(raw, t)?,
            ],
        ));
        flags.push(RowFlags {
            zero_activity: trans.zero_activity,
            lethality_undefined: letha.undefined(),
        });
    }
    CriteriaMatrix::with_flags(rows, flags)
}

/// Symmetric 5x5 table of Pearson coefficients. `None` marks a pair involving
/// a constant column, where the coefficient is undefined.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationTable {
    pub entries: [[Option<f64>; 5]; 5],
}

impl CorrelationTable {
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.entries[i][j]
    }
}

/// Pearson correlation between every pair of criteria columns.
pub fn correlations(matrix: &CriteriaMatrix) -> Result<CorrelationTable> {
    const MIN_ROWS: usize = 3;
    if matrix.len() < MIN_ROWS {
        return Err(PaciError::SeriesTooShort {
            len: matrix.len(),
            required: MIN_ROWS,
        });
    }
    let n = matrix.len() as f64;
    let centered: Vec<Vec<f64>> = (0..5)
        .map(|j| {
            let col = matrix.column(j);
            let mean = col.iter().sum::<f64>() / n;
            col.into_iter().map(|x| x - mean).collect()
        })
        .collect();
    let norms: Vec<f64> = centered
        .iter()
        .map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();

    let mut entries = [[None; 5]; 5];
    for i in 0..5 {
        entries[i][i] = Some(1.0);
        for j in i + 1..5 {
            let r = if norms[i] > 0.0 && norms[j] > 0.0 {
                let dot: f64 = centered[i]
                    .iter()
                    .zip(&centered[j])
                    .map(|(a, b)| a * b)
                    .sum();
                Some((dot / (norms[i] * norms[j])).clamp(-1.0, 1.0))
            } else {
                None
            };
            entries[i][j] = r;
            entries[j][i] = r;
        }
    }
    Ok(CorrelationTable { entries })
}
