//! Deck-of-cards elicitation (simplified pairwise-comparison variant).
//!
//! Experts order performance levels by impact and put blank cards between
//! consecutive levels. `k` cards between two levels means a difference of
//! `k + 1` units. Two anchored levels with fixed values turn unit counts into
//! an interval scale. The same card mechanics applied to a ranking of swing
//! situations, plus the ratio `z` between the largest and smallest swing
//! weight, give a ratio scale for the criteria weights.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{PaciError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Anchor {
    pub index: usize,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Anchors {
    pub lo: Anchor,
    pub hi: Anchor,
}

/// Performance levels in ascending impact order, two of which are anchored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSequence {
    levels: Vec<f64>,
    anchors: Anchors,
}

impl LevelSequence {
    pub fn new(levels: Vec<f64>, anchors: Anchors) -> Result<Self> {
        let bad = |m: String| Err(PaciError::Judgements(m));
        if levels.len() < 2 {
            return bad(format!("need at least 2 levels, got {}", levels.len()));
        }
        if levels.iter().any(|x| !x.is_finite()) {
            return bad("levels must be finite".into());
        }
        if levels.windows(2).any(|w| w[1] <= w[0]) {
            return bad("levels must be strictly increasing".into());
        }
        let (lo, hi) = (anchors.lo, anchors.hi);
        if lo.index >= levels.len() || hi.index >= levels.len() {
            return bad(format!(
                "anchor index out of range for {} levels",
                levels.len()
            ));
        }
        if lo.index == hi.index {
            return bad("anchor indices must be distinct".into());
        }
        if !(lo.value.is_finite() && hi.value.is_finite()) || lo.value == hi.value {
            return bad("anchor values must be finite and distinct".into());
        }
        Ok(Self { levels, anchors })
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn anchors(&self) -> Anchors {
        self.anchors
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }
}

/// Blank-card counts between consecutive levels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CardJudgements {
    gaps: Vec<u32>,
}

impl CardJudgements {
    pub fn new(gaps: Vec<u32>) -> Self {
        Self { gaps }
    }

    pub fn gaps(&self) -> &[u32] {
        &self.gaps
    }

    /// Number of levels these gaps separate.
    pub fn level_count(&self) -> usize {
        self.gaps.len() + 1
    }

    /// Units from level 0 up to each level.
    fn cumulative_units(&self) -> Vec<u64> {
        let mut acc = 0u64;
        std::iter::once(0)
            .chain(self.gaps.iter().map(|&g| {
                acc += u64::from(g) + 1;
                acc
            }))
            .collect()
    }
}

/// The JSON document for interval-scale judgements:
/// `{levels, anchors: {lo: {index, value}, hi: {index, value}}, gaps}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleJudgements {
    pub levels: Vec<f64>,
    pub anchors: Anchors,
    pub gaps: Vec<u32>,
}

impl ScaleJudgements {
    /// An empty `gaps` list means no blank cards anywhere.
    pub fn into_parts(self) -> Result<(LevelSequence, CardJudgements)> {
        let gaps = if self.gaps.is_empty() {
            vec![0; self.levels.len().saturating_sub(1)]
        } else {
            self.gaps
        };
        let seq = LevelSequence::new(self.levels, self.anchors)?;
        Ok((seq, CardJudgements::new(gaps)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalScaleResult {
    /// Scale points per unit (alpha).
    pub unit_value: f64,
    /// One value per level.
    pub values: Vec<f64>,
    /// Units between the two anchors (h).
    pub unit_count: u64,
}

/// Turns card counts into level values.
///
/// With `h` units between the anchors, one unit is worth
/// `alpha = (v_hi - v_lo) / h` and every level sits at
/// `v_lo + alpha * (units from the low anchor)`, on both sides of the anchors.
pub fn build_interval_scale(
    seq: &LevelSequence,
    cards: &CardJudgements,
) -> Result<IntervalScaleResult> {
    if cards.level_count() != seq.len() {
        return Err(PaciError::Judgements(format!(
            "{} gaps do not fit {} levels",
            cards.gaps.len(),
            seq.len()
        )));
    }
    let Anchors { lo, hi } = seq.anchors;
    let units = cards.cumulative_units();
    // h >= 1 because each gap holds at least one unit.
    let unit_count = units[lo.index].abs_diff(units[hi.index]);
    let unit_value = if lo.index < hi.index {
        (hi.value - lo.value) / unit_count as f64
    } else {
        (lo.value - hi.value) / unit_count as f64
    };
    if unit_value < 0.0 {
        return Err(PaciError::Judgements(format!(
            "anchor values decrease along the level order (unit value {unit_value})"
        )));
    }
    let origin = units[lo.index] as f64;
    let values = units
        .iter()
        .map(|&u| lo.value + unit_value * (u as f64 - origin))
        .collect();
    Ok(IntervalScaleResult {
        unit_value,
        values,
        unit_count,
    })
}

/// Upper-triangular table of card counts `e[i][j]` (i < j) between levels.
/// Entries may be missing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "PairwiseTableDoc", into = "PairwiseTableDoc")]
pub struct PairwiseTable {
    size: usize,
    entries: BTreeMap<(usize, usize), u32>,
}

/// Wire form: `{size, entries: [[i, j, cards], ...]}`.
#[derive(Serialize, Deserialize)]
struct PairwiseTableDoc {
    size: usize,
    entries: Vec<(usize, usize, u32)>,
}

impl TryFrom<PairwiseTableDoc> for PairwiseTable {
    type Error = PaciError;

    fn try_from(doc: PairwiseTableDoc) -> Result<Self> {
        let mut table = PairwiseTable::empty(doc.size);
        for (i, j, e) in doc.entries {
            table.set(i, j, e)?;
        }
        Ok(table)
    }
}

impl From<PairwiseTable> for PairwiseTableDoc {
    fn from(t: PairwiseTable) -> Self {
        PairwiseTableDoc {
            size: t.size,
            entries: t.entries.into_iter().map(|((i, j), e)| (i, j, e)).collect(),
        }
    }
}

impl PairwiseTable {
    pub fn empty(size: usize) -> Self {
        Self {
            size,
            entries: BTreeMap::new(),
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, i: usize, j: usize) -> Option<u32> {
        self.entries.get(&(i, j)).copied()
    }

    pub fn set(&mut self, i: usize, j: usize, cards: u32) -> Result<()> {
        if i >= j || j >= self.size {
            return Err(PaciError::Judgements(format!(
                "entry ({i}, {j}) is not in the upper triangle of a {0}x{0} table",
                self.size
            )));
        }
        self.entries.insert((i, j), cards);
        Ok(())
    }

    pub fn entries(&self) -> impl Iterator<Item = ((usize, usize), u32)> + '_ {
        self.entries.iter().map(|(k, v)| (*k, *v))
    }
}

/// Completes the table from consecutive gaps with `e_ij = e_ik + e_kj + 1`.
pub fn fill_pairwise_table(cards: &CardJudgements) -> PairwiseTable {
    let n = cards.level_count();
    let mut table = PairwiseTable::empty(n);
    for i in 0..n {
        let mut acc: Option<u32> = None;
        for j in i + 1..n {
            let gap = cards.gaps[j - 1];
            let e = match acc {
                None => gap,
                Some(prev) => prev + gap + 1,
            };
            table.entries.insert((i, j), e);
            acc = Some(e);
        }
    }
    table
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub i: usize,
    pub k: usize,
    pub j: usize,
    /// `e_ij - (e_ik + e_kj + 1)`.
    pub residual: i64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub violations: Vec<Violation>,
}

impl ConsistencyReport {
    pub fn is_consistent(&self) -> bool {
        self.violations.is_empty()
    }

    /// Entries that take part in the largest number of violated triples,
    /// i.e. the judgements most likely to need revision.
    pub fn suspect_entries(&self) -> Vec<(usize, usize)> {
        let mut counts: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for v in &self.violations {
            for pair in [(v.i, v.j), (v.i, v.k), (v.k, v.j)] {
                *counts.entry(pair).or_default() += 1;
            }
        }
        let max = counts.values().copied().max().unwrap_or(0);
        counts
            .into_iter()
            .filter(|&(_, c)| c == max && max > 0)
            .map(|(pair, _)| pair)
            .collect()
    }
}

/// Lists every triple `i < k < j` with all three entries present that breaks
/// `e_ij = e_ik + e_kj + 1`.
pub fn check_consistency(table: &PairwiseTable) -> ConsistencyReport {
    let mut violations = Vec::new();
    for (&(i, j), &e_ij) in &table.entries {
        for k in i + 1..j {
            let (Some(e_ik), Some(e_kj)) = (table.get(i, k), table.get(k, j)) else {
                continue;
            };
            let residual = i64::from(e_ij) - (i64::from(e_ik) + i64::from(e_kj) + 1);
            if residual != 0 {
                violations.push(Violation { i, k, j, residual });
            }
        }
    }
    ConsistencyReport { violations }
}

/// Swing ranking for weights: `{tiers, tier_gaps, z}`.
///
/// `tiers[0]` holds the criteria (0-based indices) whose swing has the
/// highest impact; ties share a tier. `z` is the ratio between the weight of
/// the first tier and the weight of the last one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwingRanking {
    pub tiers: Vec<Vec<usize>>,
    pub tier_gaps: Vec<u32>,
    pub z: f64,
}

impl SwingRanking {
    pub fn criteria_count(&self) -> usize {
        self.tiers.iter().map(Vec::len).sum()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(PaciError::Judgements(m));
        let n = self.criteria_count();
        if n == 0 || self.tiers.iter().any(Vec::is_empty) {
            return bad("tiers must be non-empty".into());
        }
        let mut seen = vec![false; n];
        for &c in self.tiers.iter().flatten() {
            if c >= n || seen[c] {
                return bad(format!(
                    "criteria must be a permutation of 0..{n}; bad index {c}"
                ));
            }
            seen[c] = true;
        }
        if self.tier_gaps.len() + 1 != self.tiers.len() {
            return bad(format!(
                "{} tier gaps do not fit {} tiers",
                self.tier_gaps.len(),
                self.tiers.len()
            ));
        }
        if self.tiers.len() > 1 && !(self.z.is_finite() && self.z > 1.0) {
            return bad(format!(
                "z must exceed 1 with several tiers (got {})",
                self.z
            ));
        }
        Ok(())
    }
}

/// Normalised weights in criterion order.
///
/// The last tier gets weight 1, the first gets `z`; with `h` units between
/// them one unit is worth `(z - 1) / h`, and each tier sits at
/// `1 + alpha * (units above the last tier)`.
pub fn build_weights(ranking: &SwingRanking) -> Result<Vec<f64>> {
    ranking.validate()?;
    let n = ranking.criteria_count();
    if ranking.tiers.len() == 1 {
        return Ok(vec![1.0 / n as f64; n]);
    }
    let units_below: Vec<u64> = {
        // units between tier t and the last tier
        let mut acc = 0u64;
        let mut v: Vec<u64> = ranking
            .tier_gaps
            .iter()
            .rev()
            .map(|&g| {
                acc += u64::from(g) + 1;
                acc
            })
            .collect();
        v.reverse();
        v.push(0);
        v
    };
    let h = units_below[0] as f64;
    let alpha = (ranking.z - 1.0) / h;
    let mut raw = vec![0.0; n];
    for (tier, members) in ranking.tiers.iter().enumerate() {
        let w = 1.0 + alpha * units_below[tier] as f64;
        for &c in members {
            raw[c] = w;
        }
    }
    let total: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|w| w / total).collect())
}
