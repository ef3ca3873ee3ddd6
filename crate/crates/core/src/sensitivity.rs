//! Robustness of the indicator: exact min/max envelopes over a weight
//! polyhedron and Monte-Carlo weight simulation.

use std::io::Write;

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregator::ModelConfig;
use crate::epicriteria::{compute_performances, CriteriaMatrix, RawSeries};
use crate::error::{PaciError, Result};
use crate::numfmt::sig6;

pub const ENVELOPE_HEADER: [&str; 4] = ["date", "v_minus", "v_nominal", "v_plus"];
pub const SIMULATION_HEADER: [&str; 3] = ["sample_id", "date", "value"];

/// Slack allowed on the sum-to-one and box constraints.
const FEASIBILITY_TOLERANCE: f64 = 1e-12;

/// Criteria whose performances are perturbed; wards and ICU are exact counts.
const PERTURBED_CRITERIA: usize = 3;

const MAX_REJECTIONS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    /// Relative change applied to incidence, transmission and lethality.
    pub perf_delta: f64,
    /// Relative change applied to every criterion value.
    pub value_delta: f64,
    /// Half-width of the relative box around the nominal weights.
    pub weight_delta: f64,
    pub rng_seed: u64,
    pub sample_count: usize,
}

impl Default for PerturbationSpec {
    fn default() -> Self {
        Self {
            perf_delta: 0.1,
            value_delta: 0.1,
            weight_delta: 0.1,
            rng_seed: 42,
            sample_count: 400,
        }
    }
}

impl PerturbationSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, d) in [
            ("perf_delta", self.perf_delta),
            ("value_delta", self.value_delta),
            ("weight_delta", self.weight_delta),
        ] {
            if !(d.abs() < 1.0) {
                return Err(PaciError::Perturbation(format!(
                    "{name} must satisfy |delta| < 1 (got {d})"
                )));
            }
        }
        if self.sample_count == 0 {
            return Err(PaciError::Perturbation(
                "sample_count must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Box bounds intersected with the unit simplex.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightPolyhedron {
    lower: [f64; 5],
    upper: [f64; 5],
}

impl WeightPolyhedron {
    pub fn new(lower: [f64; 5], upper: [f64; 5]) -> Result<Self> {
        for j in 0..5 {
            if !(0.0 <= lower[j] && lower[j] <= upper[j] && upper[j] <= 1.0) {
                return Err(PaciError::EmptyPolyhedron(format!(
                    "bounds of weight {} must satisfy 0 <= {} <= {} <= 1",
                    j + 1,
                    lower[j],
                    upper[j]
                )));
            }
        }
        let lo: f64 = lower.iter().sum();
        let hi: f64 = upper.iter().sum();
        if lo > 1.0 + FEASIBILITY_TOLERANCE || hi < 1.0 - FEASIBILITY_TOLERANCE {
            return Err(PaciError::EmptyPolyhedron(format!(
                "box sums [{lo}, {hi}] do not bracket 1"
            )));
        }
        Ok(Self { lower, upper })
    }

    /// The box `w (1 - delta) .. w (1 + delta)`, clamped to [0, 1].
    pub fn around(w: [f64; 5], delta: f64) -> Result<Self> {
        let d = delta.abs();
        Self::new(
            w.map(|x| (x * (1.0 - d)).clamp(0.0, 1.0)),
            w.map(|x| (x * (1.0 + d)).clamp(0.0, 1.0)),
        )
    }

    pub fn lower(&self) -> [f64; 5] {
        self.lower
    }

    pub fn upper(&self) -> [f64; 5] {
        self.upper
    }

    pub fn contains(&self, w: &[f64; 5]) -> bool {
        let sum: f64 = w.iter().sum();
        (sum - 1.0).abs() <= 1e-9
            && (0..5).all(|j| {
                w[j] >= self.lower[j] - FEASIBILITY_TOLERANCE
                    && w[j] <= self.upper[j] + FEASIBILITY_TOLERANCE
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Min,
    Max,
}

/// Optimum of `sum w_j values_j` over the polyhedron.
///
/// Every weight starts at its lower bound; the remaining mass goes to the
/// coefficients in order of preference (smallest first when minimizing),
/// each filled up to its upper bound.
pub fn optimize_over_weights(
    values: [f64; 5],
    poly: &WeightPolyhedron,
    sense: Sense,
) -> ([f64; 5], f64) {
    let mut w = poly.lower;
    let mut order = [0usize, 1, 2, 3, 4];
    match sense {
        Sense::Min => order.sort_by(|&a, &b| values[a].total_cmp(&values[b])),
        Sense::Max => order.sort_by(|&a, &b| values[b].total_cmp(&values[a])),
    }
    let mut residual = 1.0 - w.iter().sum::<f64>();
    for &j in &order {
        if residual <= 0.0 {
            break;
        }
        let step = residual.min(poly.upper[j] - poly.lower[j]);
        w[j] += step;
        residual -= step;
    }
    let objective = w.iter().zip(&values).map(|(a, b)| a * b).sum();
    (w, objective)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeDay {
    pub date: NaiveDate,
    pub v_minus: f64,
    pub v_nominal: f64,
    pub v_plus: f64,
}

impl EnvelopeDay {
    pub fn spread(&self) -> f64 {
        self.v_plus - self.v_minus
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpreadSummary {
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator); zero for one day.
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub days: Vec<EnvelopeDay>,
}

impl Envelope {
    pub fn summary(&self) -> SpreadSummary {
        let n = self.days.len();
        if n == 0 {
            return SpreadSummary { mean: 0.0, sd: 0.0 };
        }
        let mean = self.days.iter().map(EnvelopeDay::spread).sum::<f64>() / n as f64;
        let sd = if n > 1 {
            let ss: f64 = self.days.iter().map(|d| (d.spread() - mean).powi(2)).sum();
            (ss / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        SpreadSummary { mean, sd }
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(ENVELOPE_HEADER)?;
        for d in &self.days {
            wtr.write_record([
                d.date.to_string(),
                sig6(d.v_minus),
                sig6(d.v_nominal),
                sig6(d.v_plus),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Criterion values of one row with performances and values scaled by
/// `1 + sign * delta`, clamped to `[0, cap]`.
fn perturbed_values(
    cfg: &ModelConfig,
    x: [f64; 5],
    spec: &PerturbationSpec,
    sign: f64,
) -> [f64; 5] {
    std::array::from_fn(|j| {
        let f = &cfg.value_functions[j];
        let xj = if j < PERTURBED_CRITERIA {
            x[j] * (1.0 + sign * spec.perf_delta)
        } else {
            x[j]
        };
        let v = f.value_at(xj.max(0.0)) * (1.0 + sign * spec.value_delta);
        v.clamp(0.0, f.cap())
    })
}

/// Daily bounds of the indicator under the perturbation, from raw counts.
pub fn exact_envelope(
    raw: &RawSeries,
    cfg: &ModelConfig,
    spec: &PerturbationSpec,
) -> Result<Envelope> {
    envelope_from_matrix(&compute_performances(raw)?, cfg, spec)
}

/// Daily bounds of the indicator under the perturbation.
pub fn envelope_from_matrix(
    matrix: &CriteriaMatrix,
    cfg: &ModelConfig,
    spec: &PerturbationSpec,
) -> Result<Envelope> {
    spec.validate()?;
    cfg.validate()?;
    let nominal_w = cfg.weights.as_array();
    let poly = WeightPolyhedron::around(nominal_w, spec.weight_delta)?;
    let days = matrix
        .rows()
        .par_iter()
        .map(|row| {
            let x = row.values();
            let nominal = cfg.criterion_values(row);
            let (_, v_minus) =
                optimize_over_weights(perturbed_values(cfg, x, spec, -1.0), &poly, Sense::Min);
            let (_, v_plus) =
                optimize_over_weights(perturbed_values(cfg, x, spec, 1.0), &poly, Sense::Max);
            EnvelopeDay {
                date: row.date,
                v_minus,
                v_nominal: nominal.iter().zip(&nominal_w).map(|(v, w)| v * w).sum(),
                v_plus,
            }
        })
        .collect();
    Ok(Envelope { days })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplingMode {
    /// Uniform over the whole unit simplex.
    FullSimplex,
    /// Uniform in the box `w (1 +- weight_delta)`, renormalized, kept only
    /// when the renormalized vector stays in the box.
    AroundNominal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub sample_id: u64,
    pub weights: [f64; 5],
    pub values: Vec<f64>,
}

/// Weight sampler plus precomputed criterion values for a series.
///
/// Sample `i` uses its own ChaCha stream, so any subset of samples can be
/// produced in any order (or in parallel) with the same result.
#[derive(Debug, Clone)]
pub struct MonteCarlo {
    dates: Vec<NaiveDate>,
    values: Vec<[f64; 5]>,
    nominal: [f64; 5],
    poly: WeightPolyhedron,
    mode: SamplingMode,
    spec: PerturbationSpec,
}

impl MonteCarlo {
    pub fn new(
        matrix: &CriteriaMatrix,
        cfg: &ModelConfig,
        spec: &PerturbationSpec,
        mode: SamplingMode,
    ) -> Result<Self> {
        spec.validate()?;
        cfg.validate()?;
        let nominal = cfg.weights.as_array();
        Ok(Self {
            dates: matrix.rows().iter().map(|r| r.date).collect(),
            values: matrix
                .rows()
                .iter()
                .map(|r| cfg.criterion_values(r))
                .collect(),
            nominal,
            poly: WeightPolyhedron::around(nominal, spec.weight_delta)?,
            mode,
            spec: *spec,
        })
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn polyhedron(&self) -> &WeightPolyhedron {
        &self.poly
    }

    fn rng(&self, sample_id: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.spec.rng_seed);
        rng.set_stream(sample_id);
        rng
    }

    pub fn weights(&self, sample_id: u64) -> Result<[f64; 5]> {
        let mut rng = self.rng(sample_id);
        match self.mode {
            SamplingMode::FullSimplex => {
                let e: [f64; 5] = std::array::from_fn(|_| -(1.0 - rng.random::<f64>()).ln());
                let s: f64 = e.iter().sum();
                Ok(e.map(|x| x / s))
            }
            SamplingMode::AroundNominal if self.spec.weight_delta == 0.0 => Ok(self.nominal),
            SamplingMode::AroundNominal => {
                let (lo, hi) = (self.poly.lower(), self.poly.upper());
                for _ in 0..MAX_REJECTIONS {
                    let u: [f64; 5] = std::array::from_fn(|j| rng.random_range(lo[j]..=hi[j]));
                    let s: f64 = u.iter().sum();
                    let w = u.map(|x| x / s);
                    if self.poly.contains(&w) {
                        return Ok(w);
                    }
                }
                Err(PaciError::Perturbation(format!(
                    "no weight vector accepted after {MAX_REJECTIONS} draws"
                )))
            }
        }
    }

    pub fn trajectory(&self, sample_id: u64) -> Result<Trajectory> {
        let weights = self.weights(sample_id)?;
        let values = self
            .values
            .iter()
            .map(|v| v.iter().zip(&weights).map(|(a, b)| a * b).sum())
            .collect();
        Ok(Trajectory {
            sample_id,
            weights,
            values,
        })
    }

    pub fn run(&self) -> Result<Vec<Trajectory>> {
        (0..self.spec.sample_count as u64)
            .into_par_iter()
            .map(|i| self.trajectory(i))
            .collect()
    }

    /// Long-format CSV of all samples, computed in parallel batches and
    /// written in sample order.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        const BATCH: u64 = 256;
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(SIMULATION_HEADER)?;
        let total = self.spec.sample_count as u64;
        let mut start = 0;
        while start < total {
            let end = (start + BATCH).min(total);
            let batch: Vec<Trajectory> = (start..end)
                .into_par_iter()
                .map(|i| self.trajectory(i))
                .collect::<Result<_>>()?;
            for t in &batch {
                for (date, v) in self.dates.iter().zip(&t.values) {
                    wtr.write_record([t.sample_id.to_string(), date.to_string(), sig6(*v)])?;
                }
            }
            start = end;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Indicator trajectories under random weights, from raw counts.
pub fn monte_carlo_weights(
    raw: &RawSeries,
    cfg: &ModelConfig,
    spec: &PerturbationSpec,
    mode: SamplingMode,
) -> Result<Vec<Trajectory>> {
    MonteCarlo::new(&compute_performances(raw)?, cfg, spec, mode)?.run()
}
