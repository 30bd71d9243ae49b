use crate::{Error, Result};

/// Comparison scores of genuine (mated) and imposter (non-mated) pairs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreSet {
    pub genuine: Vec<f64>,
    pub imposter: Vec<f64>,
}

impl ScoreSet {
    pub fn new(genuine: Vec<f64>, imposter: Vec<f64>) -> Self {
        Self { genuine, imposter }
    }

    fn check_values(&self) -> Result<()> {
        let bad = self
            .genuine
            .iter()
            .chain(&self.imposter)
            .find(|v| !v.is_finite() || v.abs() > 1.0 + 1e-9);
        match bad {
            Some(v) => Err(Error::Metric(format!("score {v} outside [-1, 1]"))),
            None => Ok(()),
        }
    }

    /// Fraction of imposter scores `>= threshold`.
    pub fn fmr(&self, threshold: f64) -> f64 {
        let accepted = self.imposter.iter().filter(|&&s| s >= threshold).count();
        accepted as f64 / self.imposter.len() as f64
    }

    /// Fraction of genuine scores `< threshold`.
    pub fn fnmr(&self, threshold: f64) -> f64 {
        let rejected = self.genuine.iter().filter(|&&s| s < threshold).count();
        rejected as f64 / self.genuine.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EerPoint {
    pub eer: f64,
    pub threshold: f64,
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Equal error rate on finite samples.
///
/// Candidate thresholds are one sentinel below every score, the midpoints
/// of consecutive distinct scores, and one sentinel above every score. The
/// first (lowest) candidate minimizing `|FMR - FNMR|` is chosen and the
/// mean of the two rates there is reported.
pub fn compute_eer(scores: &ScoreSet) -> Result<EerPoint> {
    if scores.genuine.is_empty() || scores.imposter.is_empty() {
        return Err(Error::Metric(
            "EER needs at least one genuine and one imposter score".into(),
        ));
    }
    scores.check_values()?;
    let genuine = sorted(&scores.genuine);
    let imposter = sorted(&scores.imposter);
    let mut all = sorted(&[genuine.as_slice(), imposter.as_slice()].concat());
    all.dedup();

    let (n_gen, n_imp) = (genuine.len() as f64, imposter.len() as f64);
    let rates = |t: f64| {
        let fnmr = genuine.partition_point(|&s| s < t) as f64 / n_gen;
        let fmr = (imposter.len() - imposter.partition_point(|&s| s < t)) as f64 / n_imp;
        (fmr, fnmr)
    };

    let lowest = all[0] - 1.0;
    let highest = all[all.len() - 1] + 1.0;
    let candidates = std::iter::once(lowest)
        .chain(all.windows(2).map(|w| (w[0] + w[1]) / 2.0))
        .chain(std::iter::once(highest));

    let mut best: Option<(f64, EerPoint)> = None;
    for t in candidates {
        let (fmr, fnmr) = rates(t);
        let gap = (fmr - fnmr).abs();
        if best.as_ref().is_none_or(|(g, _)| gap < *g) {
            best = Some((
                gap,
                EerPoint {
                    eer: (fmr + fnmr) / 2.0,
                    threshold: t,
                },
            ));
        }
    }
    Ok(best.map(|(_, p)| p).expect("at least two candidates"))
}

/// Smallest representable threshold with `FMR(τ) <= target_fmr`.
///
/// `FMR` only drops when τ passes strictly above an imposter score, so the
/// result is the next float above the highest imposter score that must be
/// rejected.
pub fn threshold_at_fmr(scores: &ScoreSet, target_fmr: f64) -> Result<f64> {
    if !(target_fmr > 0.0 && target_fmr < 1.0) {
        return Err(Error::Parameter(format!(
            "target FMR must lie in (0, 1), got {target_fmr}"
        )));
    }
    if scores.imposter.is_empty() {
        return Err(Error::Metric(
            "a threshold at fixed FMR needs imposter scores".into(),
        ));
    }
    scores.check_values()?;
    let mut imposter = sorted(&scores.imposter);
    imposter.dedup();
    let n = scores.imposter.len();
    for s in imposter {
        let t = s.next_up();
        let accepted = scores.imposter.iter().filter(|&&v| v >= t).count();
        if accepted as f64 / n as f64 <= target_fmr {
            return Ok(t);
        }
    }
    unreachable!("FMR above the largest imposter score is 0")
}
