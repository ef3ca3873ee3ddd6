//! Piecewise-linear value functions with a saturation cap.

use serde::{Deserialize, Serialize};

use crate::dcm::{IntervalScaleResult, LevelSequence};
use crate::error::{PaciError, Result};

/// Saturation value of every default function.
pub const DEFAULT_CAP: f64 = 180.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Continuous,
    /// Inputs are counts; evaluation itself is the same linear interpolation.
    Integer,
}

/// Non-decreasing piecewise-linear function, flat at `cap` from `cap_onset`
/// on and flat at its last breakpoint value beyond the last breakpoint.
///
/// JSON: `{breakpoints: [[x, v], ...], cap, cap_onset, domain}`, where a
/// `null` cap onset means the cap is never reached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ValueFunctionDoc", into = "ValueFunctionDoc")]
pub struct PiecewiseLinear {
    breakpoints: Vec<(f64, f64)>,
    cap: f64,
    cap_onset: f64,
    domain: Domain,
}

#[derive(Serialize, Deserialize)]
struct ValueFunctionDoc {
    breakpoints: Vec<(f64, f64)>,
    cap: f64,
    cap_onset: Option<f64>,
    domain: Domain,
}

impl TryFrom<ValueFunctionDoc> for PiecewiseLinear {
    type Error = PaciError;

    fn try_from(doc: ValueFunctionDoc) -> Result<Self> {
        let f = PiecewiseLinear::capped(doc.breakpoints, doc.cap, doc.domain)?;
        let declared = doc.cap_onset.unwrap_or(f64::INFINITY);
        let tolerance = 1e-9 * declared.abs().max(1.0);
        let matches = (declared.is_infinite() && f.cap_onset.is_infinite())
            || (declared - f.cap_onset).abs() <= tolerance;
        if !matches {
            return Err(PaciError::ValueFunction(format!(
                "declared cap_onset {declared} disagrees with breakpoints ({})",
                f.cap_onset
            )));
        }
        Ok(f)
    }
}

impl From<PiecewiseLinear> for ValueFunctionDoc {
    fn from(f: PiecewiseLinear) -> Self {
        ValueFunctionDoc {
            cap_onset: f.cap_onset.is_finite().then_some(f.cap_onset),
            breakpoints: f.breakpoints,
            cap: f.cap,
            domain: f.domain,
        }
    }
}

impl PiecewiseLinear {
    /// Builds a function from `points` truncated at the first crossing of
    /// `cap`; the crossing point is found by linear interpolation and becomes
    /// the last breakpoint.
    pub fn capped(points: Vec<(f64, f64)>, cap: f64, domain: Domain) -> Result<Self> {
        let bad = |m: String| Err(PaciError::ValueFunction(m));
        if points.is_empty() {
            return bad("at least one breakpoint is required".into());
        }
        if !cap.is_finite() {
            return bad("cap must be finite".into());
        }
        if points
            .iter()
            .any(|(x, v)| !(x.is_finite() && v.is_finite()))
        {
            return bad("breakpoints must be finite".into());
        }
        if points.windows(2).any(|w| w[1].0 <= w[0].0) {
            return bad("breakpoint x values must be strictly increasing".into());
        }
        if points.windows(2).any(|w| w[1].1 < w[0].1) {
            return bad("breakpoint values must be non-decreasing".into());
        }
        if points[0].1 > cap {
            return bad(format!("first value {} exceeds the cap {cap}", points[0].1));
        }

        let mut breakpoints = Vec::with_capacity(points.len());
        let mut cap_onset = f64::INFINITY;
        for (k, &(x, v)) in points.iter().enumerate() {
            if v < cap {
                breakpoints.push((x, v));
                continue;
            }
            let mut onset = if v == cap || k == 0 {
                x
            } else {
                let (x0, v0) = points[k - 1];
                x0 + (cap - v0) * (x - x0) / (v - v0)
            };
            // On a count domain the cap starts at the count nearest to the
            // crossing; the count before it keeps its segment value.
            if domain == Domain::Integer && onset.fract() != 0.0 && k > 0 {
                let (x0, v0) = points[k - 1];
                let rounded = onset.round().max(x0 + 1.0);
                let below = rounded - 1.0;
                if below > x0 {
                    breakpoints.push((below, v0 + (v - v0) * (below - x0) / (x - x0)));
                }
                onset = rounded;
            }
            breakpoints.push((onset, cap));
            cap_onset = onset;
            break;
        }
        Ok(Self {
            breakpoints,
            cap,
            cap_onset,
            domain,
        })
    }

    /// Straight line through `(0, 0)` and `(x_ref, v_ref)`, capped.
    pub fn linear(x_ref: f64, v_ref: f64, cap: f64) -> Result<Self> {
        let slope = v_ref / x_ref;
        if !(slope.is_finite() && slope > 0.0) {
            return Err(PaciError::ValueFunction(format!(
                "reference point ({x_ref}, {v_ref}) does not define a positive slope"
            )));
        }
        Self::capped(
            vec![(0.0, 0.0), (cap / slope, cap)],
            cap,
            Domain::Continuous,
        )
    }

    /// The function that is 0 everywhere.
    pub fn zero(cap: f64) -> Result<Self> {
        Self::capped(vec![(0.0, 0.0)], cap, Domain::Continuous)
    }

    pub fn breakpoints(&self) -> &[(f64, f64)] {
        &self.breakpoints
    }

    pub fn cap(&self) -> f64 {
        self.cap
    }

    /// Smallest `x` with value `cap`; infinite when the cap is never reached.
    pub fn cap_onset(&self) -> f64 {
        self.cap_onset
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    /// Value at `x` by linear interpolation.
    pub fn evaluate(&self, x: f64) -> Result<f64> {
        if !(x >= 0.0) {
            return Err(PaciError::ValueFunction(format!(
                "performance must be >= 0 (got {x})"
            )));
        }
        Ok(self.value_at(x))
    }

    /// Evaluation without the sign check; below the first breakpoint the
    /// first value holds.
    pub(crate) fn value_at(&self, x: f64) -> f64 {
        let bp = &self.breakpoints;
        if x >= self.cap_onset {
            return self.cap;
        }
        let (first, last) = (bp[0], bp[bp.len() - 1]);
        if x <= first.0 {
            return first.1;
        }
        if x >= last.0 {
            return last.1;
        }
        let k = bp.partition_point(|&(bx, _)| bx <= x);
        let ((x0, v0), (x1, v1)) = (bp[k - 1], bp[k]);
        v0 + (v1 - v0) * (x - x0) / (x1 - x0)
    }

    /// Largest value the function takes.
    pub fn max_value(&self) -> f64 {
        self.breakpoints[self.breakpoints.len() - 1].1
    }
}

/// Builds the value function of an elicited interval scale.
pub fn from_dcm(
    scale: &IntervalScaleResult,
    cap: f64,
    seq: &LevelSequence,
) -> Result<PiecewiseLinear> {
    if scale.values.len() != seq.len() {
        return Err(PaciError::ValueFunction(format!(
            "{} scale values for {} levels",
            scale.values.len(),
            seq.len()
        )));
    }
    let anchors = seq.anchors();
    let top_anchor = anchors.lo.value.max(anchors.hi.value);
    if cap < top_anchor {
        return Err(PaciError::ValueFunction(format!(
            "cap {cap} is below the anchor value {top_anchor}"
        )));
    }
    let points = seq
        .levels()
        .iter()
        .copied()
        .zip(scale.values.iter().copied())
        .collect();
    PiecewiseLinear::capped(points, cap, Domain::Continuous)
}

/// `scale * (x / anchor_x)^2` on `[0, anchor_x]`, `cap` beyond.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticApproximation {
    pub scale: f64,
    pub anchor_x: f64,
    pub cap: f64,
}

/// A value curve on `[0, inf)` that is constant at `cap` from some point on.
pub trait CappedCurve {
    fn value_at(&self, x: f64) -> f64;
    fn cap(&self) -> f64;
    /// Point from which the curve stays at its cap (may be infinite).
    fn saturation_point(&self) -> f64;
    /// Points where the curve is not smooth.
    fn kinks(&self) -> Vec<f64>;
}

impl CappedCurve for PiecewiseLinear {
    fn value_at(&self, x: f64) -> f64 {
        PiecewiseLinear::value_at(self, x)
    }
    fn cap(&self) -> f64 {
        self.cap
    }
    fn saturation_point(&self) -> f64 {
        self.cap_onset
    }
    fn kinks(&self) -> Vec<f64> {
        self.breakpoints.iter().map(|&(x, _)| x).collect()
    }
}

impl CappedCurve for QuadraticApproximation {
    fn value_at(&self, x: f64) -> f64 {
        if x <= self.anchor_x {
            self.scale * (x / self.anchor_x).powi(2)
        } else {
            self.cap
        }
    }
    fn cap(&self) -> f64 {
        self.cap
    }
    fn saturation_point(&self) -> f64 {
        self.anchor_x
    }
    fn kinks(&self) -> Vec<f64> {
        vec![self.anchor_x]
    }
}

/// Panels per smooth segment in the Simpson rule.
const SIMPSON_PANELS: usize = 10_000;

fn simpson(g: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let n = panels + panels % 2;
    let h = (b - a) / n as f64;
    let mut sum = g(a) + g(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * g(a + h * i as f64);
    }
    sum * h / 3.0
}

/// `sqrt(int (f - q)^2) / sqrt(int f^2)` over `[0, X]`, where `X` is the
/// point from which both curves sit at their common cap.
///
/// The integrals are split at every kink of either curve, so each Simpson
/// sub-integral sees a polynomial integrand.
pub fn relative_l2_distance(f: &impl CappedCurve, q: &impl CappedCurve) -> Result<f64> {
    if f.cap() != q.cap() {
        return Err(PaciError::ValueFunction(format!(
            "caps differ ({} vs {}); the distance integral diverges",
            f.cap(),
            q.cap()
        )));
    }
    let upper = f.saturation_point().max(q.saturation_point()).max(0.0);
    if !upper.is_finite() {
        return Err(PaciError::ValueFunction(
            "a curve never reaches its cap; the distance integral diverges".into(),
        ));
    }
    let mut cuts: Vec<f64> = f
        .kinks()
        .into_iter()
        .chain(q.kinks())
        .chain([0.0, upper])
        .filter(|&x| (0.0..=upper).contains(&x))
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let (mut diff, mut norm) = (0.0, 0.0);
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        // Sample strictly inside the segment so a jump at a cut is
        // attributed to the correct side.
        let inner = |x: f64| x.clamp(a + (b - a) * 1e-12, b - (b - a) * 1e-12);
        let fv = |x: f64| f.value_at(inner(x));
        let qv = |x: f64| q.value_at(inner(x));
        diff += simpson(|x| (fv(x) - qv(x)).powi(2), a, b, SIMPSON_PANELS);
        norm += simpson(|x| fv(x).powi(2), a, b, SIMPSON_PANELS);
    }
    if norm == 0.0 {
        return Ok(if diff == 0.0 { 0.0 } else { f64::INFINITY });
    }
    Ok((diff / norm).sqrt())
}

/// Incidence levels (cases/day) of the elicited incidence scale.
pub const INCIDENCE_LEVELS: [f64; 8] = [0.0, 225.0, 450.0, 675.0, 900.0, 1125.0, 1350.0, 1575.0];
/// Blank cards between consecutive incidence levels.
pub const INCIDENCE_CARDS: [u32; 7] = [0, 2, 4, 6, 8, 10, 13];

/// The five default value functions, in criterion order.
pub fn default_functions() -> [PiecewiseLinear; 5] {
    let cap = DEFAULT_CAP;
    let build = |points: Vec<(f64, f64)>, domain| {
        PiecewiseLinear::capped(points, cap, domain).expect("default breakpoints are valid")
    };
    let v1 = default_incidence_function();
    let v2 = build(
        vec![
            (0.0, 0.0),
            (0.92, 4.0),
            (0.94, 16.0),
            (0.96, 36.0),
            (0.98, 64.0),
            (1.00, 100.0),
            (1.02, 144.0),
            (1.04, 196.0),
        ],
        Domain::Continuous,
    );
    let v3 = build(vec![(0.0, 0.0), (7.2, 200.0)], Domain::Continuous);
    let v4 = build(
        (0..8)
            .map(|k| {
                (
                    500.0 * k as f64,
                    [0.0, 4.0, 16.0, 36.0, 64.0, 100.0, 144.0, 196.0][k],
                )
            })
            .collect(),
        Domain::Integer,
    );
    let v5 = build(
        (0..8)
            .map(|k| {
                (
                    40.0 * k as f64,
                    [0.0, 4.0, 16.0, 36.0, 64.0, 100.0, 144.0, 196.0][k],
                )
            })
            .collect(),
        Domain::Integer,
    );
    [v1, v2, v3, v4, v5]
}

/// Incidence value function rebuilt from its card judgements.
fn default_incidence_function() -> PiecewiseLinear {
    use crate::dcm::{build_interval_scale, Anchor, Anchors, CardJudgements};
    let seq = LevelSequence::new(
        INCIDENCE_LEVELS.to_vec(),
        Anchors {
            lo: Anchor {
                index: 0,
                value: 0.0,
            },
            hi: Anchor {
                index: 5,
                value: 100.0,
            },
        },
    )
    .expect("incidence levels are valid");
    let scale = build_interval_scale(&seq, &CardJudgements::new(INCIDENCE_CARDS.to_vec()))
        .expect("incidence judgements are valid");
    from_dcm(&scale, DEFAULT_CAP, &seq).expect("incidence scale is valid")
}
