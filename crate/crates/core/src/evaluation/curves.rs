use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::sync::OnceLock;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::metrics::{compute_eer, threshold_at_fmr, ScoreSet};
use crate::embedder::EmbeddingBackend;
use crate::explain::{influence_ordering, InfluenceProfile, PreparedPair};
use crate::imaging::Label;
use crate::spectral::{BandPartition, Norm};
use crate::{par, precision, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Deletion,
    Insertion,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    /// Equal error rate, threshold re-fitted at every step.
    Eer,
    /// FNMR at a threshold frozen on the unaltered pairs.
    Fnmr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OrderingSource {
    Influence,
    Random { seed: u64 },
}

impl OrderingSource {
    pub fn label(&self) -> &'static str {
        match self {
            OrderingSource::Influence => "influence",
            OrderingSource::Random { .. } => "random",
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            OrderingSource::Influence => None,
            OrderingSource::Random { seed } => Some(*seed),
        }
    }
}

macro_rules! text_enum {
    ($ty:ty { $($name:literal => $variant:expr),+ $(,)? }) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                $(if *self == $variant { return f.write_str($name); })+
                unreachable!()
            }
        }

        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($name => Ok($variant),)+
                    other => Err(Error::Parameter(format!(
                        "unknown value `{other}` (expected one of: {})",
                        [$($name),+].join(", ")
                    ))),
                }
            }
        }
    };
}

text_enum!(Direction { "deletion" => Direction::Deletion, "insertion" => Direction::Insertion });
text_enum!(MetricKind { "eer" => MetricKind::Eer, "fnmr" => MetricKind::Fnmr });

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub fraction: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalCurve {
    pub direction: Direction,
    pub metric: MetricKind,
    pub points: Vec<CurvePoint>,
    pub band_size: f64,
    pub norm: Norm,
    /// Frozen decision threshold for [`MetricKind::Fnmr`].
    pub threshold: Option<f64>,
    pub ordering: OrderingSource,
    /// Pairs the curve was computed over.
    pub n_pairs: usize,
}

/// Trapezoidal area under the curve.
pub fn curve_auc(curve: &EvalCurve) -> Result<f64> {
    points_auc(&curve.points)
}

pub fn points_auc(points: &[CurvePoint]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::Metric(format!(
            "AUC needs at least two points, got {}",
            points.len()
        )));
    }
    Ok(points
        .windows(2)
        .map(|w| (w[1].fraction - w[0].fraction) * (w[0].value + w[1].value) / 2.0)
        .sum())
}

/// An image pair with its verification label.
#[derive(Debug, Clone)]
pub struct LabeledPair {
    pub pair: PreparedPair,
    pub label: Label,
    pub tag: Option<String>,
}

/// Seed of the `index`-th random baseline under `master_seed`.
pub fn baseline_seed(master_seed: u64, index: usize) -> u64 {
    master_seed.wrapping_add((index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Per-pair random band order: ChaCha8 seeded with `seed`, stream = pair index.
pub fn random_order(bands: usize, seed: u64, pair_index: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(pair_index as u64);
    let mut order: Vec<usize> = (0..bands).collect();
    order.shuffle(&mut rng);
    order
}

/// Shared state for insertion/deletion curves over one set of pairs:
/// unaltered scores, the frozen threshold and (lazily) influence profiles.
pub struct CurveStudy<'a> {
    pairs: Vec<LabeledPair>,
    backend: &'a dyn EmbeddingBackend,
    partition: BandPartition,
    metric: MetricKind,
    target_fmr: f64,
    unaltered: Vec<f64>,
    threshold: Option<f64>,
    profiles: OnceLock<Vec<InfluenceProfile>>,
}

impl<'a> CurveStudy<'a> {
    pub fn new(
        pairs: Vec<LabeledPair>,
        backend: &'a dyn EmbeddingBackend,
        partition: BandPartition,
        metric: MetricKind,
        target_fmr: f64,
    ) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::Parameter("curve evaluation needs at least one pair".into()));
        }
        if let Some(p) = pairs.iter().find(|p| p.pair.size() != partition.size()) {
            return Err(Error::PartitionMismatch(format!(
                "partition built for {0}x{0}, found a {1}x{1} pair",
                partition.size(),
                p.pair.size()
            )));
        }
        let unaltered = par::map_indexed(pairs.len(), backend.serialize_calls(), |i| {
            pairs[i].pair.reference_score(backend)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        let mut study = Self {
            pairs,
            backend,
            partition,
            metric,
            target_fmr,
            unaltered,
            threshold: None,
            profiles: OnceLock::new(),
        };
        let all: Vec<usize> = (0..study.pairs.len()).collect();
        let scores = study.score_set(&all, |i| study.unaltered[i]);
        match metric {
            MetricKind::Eer => {
                compute_eer(&scores)?;
            }
            MetricKind::Fnmr => {
                if scores.genuine.is_empty() {
                    return Err(Error::Metric("FNMR needs genuine pairs".into()));
                }
                study.threshold = Some(threshold_at_fmr(&scores, target_fmr)?);
            }
        }
        Ok(study)
    }

    pub fn pairs(&self) -> &[LabeledPair] {
        &self.pairs
    }

    pub fn partition(&self) -> &BandPartition {
        &self.partition
    }

    pub fn target_fmr(&self) -> f64 {
        self.target_fmr
    }

    pub fn threshold(&self) -> Option<f64> {
        self.threshold
    }

    pub fn unaltered_scores(&self) -> &[f64] {
        &self.unaltered
    }

    /// Influence profiles of every pair, computed on first use.
    pub fn profiles(&self) -> Result<&[InfluenceProfile]> {
        if let Some(p) = self.profiles.get() {
            return Ok(p);
        }
        let computed = par::map_indexed(self.pairs.len(), self.backend.serialize_calls(), |i| {
            self.pairs[i].pair.influence(self.backend, &self.partition)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        Ok(self.profiles.get_or_init(|| computed))
    }

    pub fn n_degenerate(&self) -> Result<usize> {
        Ok(self.profiles()?.iter().filter(|p| p.degenerate).count())
    }

    fn score_set(&self, members: &[usize], score: impl Fn(usize) -> f64) -> ScoreSet {
        let mut set = ScoreSet::default();
        for &i in members {
            match self.pairs[i].label {
                Label::Genuine => set.genuine.push(score(i)),
                Label::Imposter => set.imposter.push(score(i)),
            }
        }
        set
    }

    fn metric_value(&self, scores: &ScoreSet) -> Result<f64> {
        match self.metric {
            MetricKind::Eer => Ok(compute_eer(scores)?.eer),
            MetricKind::Fnmr => {
                if scores.genuine.is_empty() {
                    return Err(Error::Metric("FNMR needs genuine pairs".into()));
                }
                Ok(scores.fnmr(self.threshold.expect("threshold frozen at construction")))
            }
        }
    }

    /// Metric over all pairs with nothing masked.
    pub fn unaltered_metric(&self) -> Result<f64> {
        let all: Vec<usize> = (0..self.pairs.len()).collect();
        self.metric_value(&self.score_set(&all, |i| self.unaltered[i]))
    }

    /// One insertion or deletion curve.
    ///
    /// Step `j` of `K` masks, on both images of every pair, that pair's top
    /// `j` bands (deletion) or every band except its top `j` (insertion).
    /// Influence ordering drops pairs with degenerate profiles.
    pub fn curve(&self, direction: Direction, ordering: OrderingSource) -> Result<EvalCurve> {
        let bands = self.partition.len();
        let (members, orders): (Vec<usize>, Vec<Vec<usize>>) = match ordering {
            OrderingSource::Influence => {
                let profiles = self.profiles()?;
                let mut members = Vec::new();
                let mut orders = Vec::new();
                for (i, p) in profiles.iter().enumerate() {
                    if p.degenerate {
                        continue;
                    }
                    members.push(i);
                    orders.push(influence_ordering(p)?);
                }
                let dropped = profiles.len() - members.len();
                if dropped > 0 {
                    log::warn!("{dropped} pair(s) with degenerate profiles excluded from the influence curve");
                }
                (members, orders)
            }
            OrderingSource::Random { seed } => (0..self.pairs.len())
                .map(|i| (i, random_order(bands, seed, i)))
                .unzip(),
        };
        if members.is_empty() {
            return Err(Error::Metric("no pairs left to evaluate".into()));
        }

        // rows: member -> score at each step 0..=bands
        let rows = par::map_indexed(members.len(), self.backend.serialize_calls(), |m| {
            let i = members[m];
            let order = &orders[m];
            (0..=bands)
                .map(|step| {
                    let removed = match direction {
                        Direction::Deletion => &order[..step],
                        Direction::Insertion => &order[step..],
                    };
                    if removed.is_empty() {
                        Ok(self.unaltered[i])
                    } else {
                        self.pairs[i]
                            .pair
                            .score_without(self.backend, &self.partition, removed)
                    }
                })
                .collect::<Result<Vec<f64>>>()
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

        let points = (0..=bands)
            .map(|step| {
                let mut scores = ScoreSet::default();
                for (m, &i) in members.iter().enumerate() {
                    match self.pairs[i].label {
                        Label::Genuine => scores.genuine.push(rows[m][step]),
                        Label::Imposter => scores.imposter.push(rows[m][step]),
                    }
                }
                Ok(CurvePoint {
                    fraction: step as f64 / bands as f64,
                    value: self.metric_value(&scores)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;

        Ok(EvalCurve {
            direction,
            metric: self.metric,
            points,
            band_size: self.partition.band_size(),
            norm: self.partition.norm(),
            threshold: self.threshold,
            ordering,
            n_pairs: members.len(),
        })
    }
}

/// Builds a [`CurveStudy`] and returns a single curve.
#[allow(clippy::too_many_arguments)]
pub fn run_curve(
    pairs: Vec<LabeledPair>,
    backend: &dyn EmbeddingBackend,
    partition: BandPartition,
    direction: Direction,
    metric: MetricKind,
    ordering: OrderingSource,
    target_fmr: f64,
) -> Result<EvalCurve> {
    CurveStudy::new(pairs, backend, partition, metric, target_fmr)?.curve(direction, ordering)
}

/// Writes curves as `fraction,metric_value,ordering,seed` rows.
pub fn write_curves_csv<W: Write>(mut out: W, curves: &[EvalCurve]) -> std::io::Result<()> {
    writeln!(out, "fraction,metric_value,ordering,seed")?;
    for curve in curves {
        let seed = curve
            .ordering
            .seed()
            .map(|s| s.to_string())
            .unwrap_or_default();
        for p in &curve.points {
            writeln!(
                out,
                "{},{},{},{}",
                precision::round9(p.fraction),
                precision::round9(p.value),
                curve.ordering.label(),
                seed
            )?;
        }
    }
    Ok(())
}

/// JSON manifest written alongside a curves CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub model_id: String,
    pub s: f64,
    pub norm: Norm,
    pub metric: MetricKind,
    pub direction: Direction,
    pub target_fmr: f64,
    pub master_seed: u64,
    pub n_pairs: usize,
    pub n_degenerate: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub low_res: Option<f64>,
    pub interpolation: String,
}
