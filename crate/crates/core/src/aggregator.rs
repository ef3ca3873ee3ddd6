//! Additive aggregation, chromatic states and model configuration.

use std::cmp::Ordering;
use std::io::Write;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::epicriteria::{CriteriaMatrix, PerformanceVector, CRITERIA};
use crate::error::{PaciError, Result};
use crate::numfmt::sig6;
use crate::valuemodel::{default_functions, PiecewiseLinear, DEFAULT_CAP};

/// Schema tag of the configuration document.
pub const CONFIG_SCHEMA: &str = "paci-config/1";

/// Header of the indicator-series CSV.
pub const SERIES_HEADER: [&str; 8] = [
    "date", "overall", "state", "c_incid", "c_trans", "c_letha", "c_wards", "c_icu",
];

const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

/// Five criteria weights, each in (0, 1), summing to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 5]", into = "[f64; 5]")]
pub struct WeightVector([f64; 5]);

impl WeightVector {
    pub fn new(w: [f64; 5]) -> Result<Self> {
        let violations = Self::violations(&w);
        if violations.is_empty() {
            Ok(Self(w))
        } else {
            Err(PaciError::Config(violations))
        }
    }

    pub fn violations(w: &[f64; 5]) -> Vec<String> {
        let mut out = Vec::new();
        for (name, x) in CRITERIA.iter().zip(w) {
            if !(*x > 0.0 && *x < 1.0) {
                out.push(format!("weight of {name} must lie in (0, 1), got {x}"));
            }
        }
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            out.push(format!("weights must sum to 1 (sum is {sum})"));
        }
        out
    }

    pub fn as_array(&self) -> [f64; 5] {
        self.0
    }

    /// Weights after the final expert adjustment of the ratio-scale weights.
    pub fn published() -> Self {
        Self([0.280, 0.141, 0.193, 0.193, 0.193])
    }

    pub fn equal() -> Self {
        Self([0.2; 5])
    }
}

impl TryFrom<[f64; 5]> for WeightVector {
    type Error = PaciError;
    fn try_from(w: [f64; 5]) -> Result<Self> {
        Self::new(w)
    }
}

impl From<WeightVector> for [f64; 5] {
    fn from(w: WeightVector) -> Self {
        w.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cutoff {
    pub value: f64,
    pub label: String,
    /// `#rrggbb`.
    pub color: String,
}

/// Ascending cut-off lines; each opens the band `[value, next value)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateScale {
    pub cutoffs: Vec<Cutoff>,
    /// Half-width of the hysteresis zone around each cut-off line.
    #[serde(default)]
    pub hysteresis: f64,
}

impl Default for StateScale {
    fn default() -> Self {
        let c = |value: f64, label: &str, color: &str| Cutoff {
            value,
            label: label.to_string(),
            color: color.to_string(),
        };
        Self {
            cutoffs: vec![
                c(0.0, "baseline", "#1a9641"),
                c(10.0, "residual", "#a6d96a"),
                c(40.0, "alert", "#ffff33"),
                c(80.0, "alarm", "#fdae61"),
                c(100.0, "critical", "#d7191c"),
                c(120.0, "break", "#8b0000"),
                c(180.0, "emergency", "#3d0000"),
            ],
            hysteresis: 0.0,
        }
    }
}

impl StateScale {
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.cutoffs.is_empty() {
            out.push("state scale needs at least one cut-off".to_string());
        }
        if self.cutoffs.windows(2).any(|w| !(w[1].value > w[0].value)) {
            out.push("cut-off values must be strictly increasing".to_string());
        }
        for (i, c) in self.cutoffs.iter().enumerate() {
            if self.cutoffs[..i].iter().any(|o| o.label == c.label) {
                out.push(format!("duplicate state label `{}`", c.label));
            }
            if !is_hex_color(&c.color) {
                out.push(format!(
                    "color `{}` of `{}` is not #rrggbb",
                    c.color, c.label
                ));
            }
        }
        if !(self.hysteresis >= 0.0 && self.hysteresis.is_finite()) {
            out.push(format!("hysteresis must be >= 0 (got {})", self.hysteresis));
        }
        out
    }

    /// Band index for `value` with half-open bands; below the first line
    /// counts as the first band.
    fn band(&self, value: f64) -> usize {
        self.cutoffs
            .partition_point(|c| c.value <= value)
            .saturating_sub(1)
    }

    fn index_of(&self, label: &str) -> Option<usize> {
        self.cutoffs.iter().position(|c| c.label == label)
    }

    pub fn cutoff(&self, label: &str) -> Option<&Cutoff> {
        self.cutoffs.iter().find(|c| c.label == label)
    }
}

fn is_hex_color(s: &str) -> bool {
    s.len() == 7 && s.starts_with('#') && s[1..].chars().all(|c| c.is_ascii_hexdigit())
}

/// State label of `value`.
///
/// Bands are `[cutoff_k, cutoff_{k+1})`. With a positive hysteresis and a
/// known previous state, the state only moves up once the value clears the
/// next line by the hysteresis, and only moves down once it falls below the
/// current line by the same margin. An unknown previous label is ignored.
pub fn classify<'a>(value: f64, scale: &'a StateScale, previous: Option<&str>) -> &'a str {
    let plain = scale.band(value);
    let idx = match previous.and_then(|p| scale.index_of(p)) {
        Some(prev) if scale.hysteresis > 0.0 => {
            let up = scale.band(value - scale.hysteresis);
            let down = scale.band(value + scale.hysteresis);
            if up > prev {
                up
            } else if down < prev {
                down
            } else {
                prev
            }
        }
        _ => plain,
    };
    &scale.cutoffs[idx].label
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigMetadata {
    pub name: String,
    pub version: String,
    pub created: NaiveDate,
}

/// Everything the indicator needs: value functions, weights, states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelConfigDoc")]
pub struct ModelConfig {
    pub schema: String,
    pub metadata: ConfigMetadata,
    pub value_functions: Vec<PiecewiseLinear>,
    pub weights: WeightVector,
    pub state_scale: StateScale,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            schema: CONFIG_SCHEMA.to_string(),
            metadata: ConfigMetadata {
                name: "paci-portugal".to_string(),
                version: "1".to_string(),
                created: NaiveDate::from_ymd_opt(2021, 7, 14).expect("valid date"),
            },
            value_functions: default_functions().to_vec(),
            weights: WeightVector::published(),
            state_scale: StateScale::default(),
        }
    }
}

impl ModelConfig {
    /// Two-criterion baseline in the style of a risk matrix: linear value
    /// functions on incidence and transmission (100 points at the critical
    /// levels 1125 and 1.0, same cap), no contribution from the severity
    /// criteria, equal weights.
    pub fn risk_matrix_baseline() -> Self {
        let linear = |x, v| PiecewiseLinear::linear(x, v, DEFAULT_CAP).expect("valid line");
        let zero = PiecewiseLinear::zero(DEFAULT_CAP).expect("valid zero function");
        Self {
            metadata: ConfigMetadata {
                name: "risk-matrix-baseline".to_string(),
                ..Self::default().metadata
            },
            value_functions: vec![
                linear(1125.0, 100.0),
                linear(1.0, 100.0),
                zero.clone(),
                zero.clone(),
                zero,
            ],
            weights: WeightVector::equal(),
            ..Self::default()
        }
    }

    /// Every violated invariant, for reporting back to the caller.
    pub fn violations(&self) -> Vec<String> {
        config_violations(
            &self.schema,
            &self.value_functions,
            &self.weights.0,
            &self.state_scale,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(PaciError::Config(v))
        }
    }

    /// Parses a configuration document. Structural problems surface as JSON
    /// errors; every broken invariant is listed in a single config error.
    pub fn from_json(text: &str) -> Result<Self> {
        Self::try_from(serde_json::from_str::<ModelConfigDoc>(text)?)
    }

    pub fn from_value(value: serde_json::Value) -> Result<Self> {
        Self::try_from(serde_json::from_value::<ModelConfigDoc>(value)?)
    }

    pub fn to_json_pretty(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Identifies the configuration an [`IndicatorPoint`] was computed with.
    pub fn provenance(&self) -> String {
        format!("{}@{}", self.metadata.name, self.metadata.version)
    }

    /// Values `v_j(x_j)` of the five criteria.
    pub fn criterion_values(&self, x: &PerformanceVector) -> [f64; 5] {
        let xs = x.values();
        std::array::from_fn(|j| self.value_functions[j].value_at(xs[j].max(0.0)))
    }

    /// Largest attainable indicator value.
    pub fn cap(&self) -> f64 {
        self.value_functions
            .iter()
            .map(PiecewiseLinear::cap)
            .fold(0.0, f64::max)
    }
}

fn config_violations(
    schema: &str,
    functions: &[PiecewiseLinear],
    weights: &[f64; 5],
    scale: &StateScale,
) -> Vec<String> {
    let mut out = Vec::new();
    if schema != CONFIG_SCHEMA {
        out.push(format!("schema must be `{CONFIG_SCHEMA}` (got `{schema}`)"));
    }
    if functions.len() != 5 {
        out.push(format!(
            "exactly 5 value functions are required (got {})",
            functions.len()
        ));
    }
    out.extend(WeightVector::violations(weights));
    out.extend(scale.violations());
    out
}

/// Unvalidated wire form of [`ModelConfig`].
#[derive(Deserialize)]
struct ModelConfigDoc {
    schema: String,
    metadata: ConfigMetadata,
    value_functions: Vec<PiecewiseLinear>,
    weights: [f64; 5],
    state_scale: StateScale,
}

impl TryFrom<ModelConfigDoc> for ModelConfig {
    type Error = PaciError;
    fn try_from(doc: ModelConfigDoc) -> Result<Self> {
        let violations = config_violations(
            &doc.schema,
            &doc.value_functions,
            &doc.weights,
            &doc.state_scale,
        );
        if !violations.is_empty() {
            return Err(PaciError::Config(violations));
        }
        Ok(Self {
            schema: doc.schema,
            metadata: doc.metadata,
            value_functions: doc.value_functions,
            weights: WeightVector(doc.weights),
            state_scale: doc.state_scale,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorPoint {
    pub date: NaiveDate,
    pub overall: f64,
    /// `w_j * v_j(x_j)` per criterion.
    pub contributions: [f64; 5],
    pub state: String,
    /// Configuration the point was computed with.
    pub provenance: String,
}

/// Weighted sum of the criterion values, with the state attached.
pub fn aggregate(x: &PerformanceVector, cfg: &ModelConfig) -> IndicatorPoint {
    aggregate_with_previous(x, cfg, None)
}

fn aggregate_with_previous(
    x: &PerformanceVector,
    cfg: &ModelConfig,
    previous: Option<&str>,
) -> IndicatorPoint {
    let values = cfg.criterion_values(x);
    let w = cfg.weights.as_array();
    let contributions: [f64; 5] = std::array::from_fn(|j| w[j] * values[j]);
    let overall = contributions.iter().sum();
    IndicatorPoint {
        date: x.date,
        overall,
        contributions,
        state: classify(overall, &cfg.state_scale, previous).to_string(),
        provenance: cfg.provenance(),
    }
}

/// Impact ordering of two days: `Greater` means `a` impacts more than `b`.
pub fn compare(a: &IndicatorPoint, b: &IndicatorPoint) -> Result<Ordering> {
    if a.provenance != b.provenance {
        return Err(PaciError::ConfigMismatch {
            left: a.provenance.clone(),
            right: b.provenance.clone(),
        });
    }
    Ok(a.overall.total_cmp(&b.overall))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorSeries {
    pub points: Vec<IndicatorPoint>,
}

impl IndicatorSeries {
    pub fn overall(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.overall).collect()
    }

    pub fn dates(&self) -> Vec<NaiveDate> {
        self.points.iter().map(|p| p.date).collect()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(SERIES_HEADER)?;
        for p in &self.points {
            let mut record = vec![p.date.to_string(), sig6(p.overall), p.state.clone()];
            record.extend(p.contributions.iter().map(|c| sig6(*c)));
            wtr.write_record(&record)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Aggregates every row in date order. States are assigned sequentially so
/// hysteresis sees the previous day's state.
pub fn run_series(matrix: &CriteriaMatrix, cfg: &ModelConfig) -> IndicatorSeries {
    let mut points: Vec<IndicatorPoint> = Vec::with_capacity(matrix.len());
    for row in matrix.rows() {
        let previous = points.last().map(|p| p.state.as_str());
        let point = aggregate_with_previous(row, cfg, previous);
        points.push(point);
    }
    IndicatorSeries { points }
}

/// Performance profiles that sit on the cut-off lines.
pub const REFERENCE_PROFILES: [(&str, f64, [f64; 5]); 7] = [
    ("baseline", 0.0, [0.0, 0.0, 0.0, 0.0, 0.0]),
    ("residual", 10.0, [338.0, 0.93, 0.36, 750.0, 60.0]),
    ("alert", 40.0, [707.0, 0.963, 1.43, 1571.0, 126.0]),
    ("alarm", 80.0, [1000.0, 0.989, 2.89, 2222.0, 178.0]),
    ("critical", 100.0, [1125.0, 1.0, 3.6, 2500.0, 200.0]),
    ("break", 120.0, [1227.0, 1.009, 4.31, 2727.0, 218.0]),
    ("emergency", 180.0, [1506.0, 1.034, 6.47, 3346.0, 268.0]),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileCheck {
    pub profile: String,
    pub performances: [f64; 5],
    pub expected: f64,
    pub computed: f64,
}

impl ProfileCheck {
    pub fn deviation(&self) -> f64 {
        self.computed - self.expected
    }
}

/// Evaluates the reference profiles under `cfg`.
pub fn reference_profiles_check(cfg: &ModelConfig) -> Vec<ProfileCheck> {
    let date = NaiveDate::default();
    REFERENCE_PROFILES
        .iter()
        .map(|&(name, expected, perf)| ProfileCheck {
            profile: name.to_string(),
            performances: perf,
            expected,
            computed: aggregate(&PerformanceVector::new(date, perf), cfg).overall,
        })
        .collect()
}
