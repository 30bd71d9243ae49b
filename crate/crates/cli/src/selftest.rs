//! Quick correctness checks runnable from an installed binary.

use freqxplain::embedder::SpectralToyEmbedder;
use freqxplain::evaluation::{compute_eer, threshold_at_fmr, ScoreSet};
use freqxplain::explain::{influence_ordering, PreparedPair};
use freqxplain::spectral::{
    build_partition, forward_transform, inverse_transform, FrequencyMask, Norm, SpatialImage,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Faults that can be injected to confirm the checks catch them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Fault {
    /// Flip one coefficient of every band mask so it loses mirror symmetry.
    MaskSymmetry,
}

pub struct Check {
    pub name: &'static str,
    pub outcome: Result<(), String>,
}

type CheckResult = Result<(), String>;

fn random_image(rng: &mut ChaCha8Rng, size: usize, channels: usize) -> SpatialImage {
    SpatialImage::from_fn(size, channels, |_, _, _| rng.random_range(0.0..255.0))
        .expect("valid shape")
}

fn round_trip(rng: &mut ChaCha8Rng) -> CheckResult {
    for &size in &[4, 8, 16, 112] {
        for &channels in &[1, 3] {
            let img = random_image(rng, size, channels);
            let back = forward_transform(&img)
                .and_then(|s| inverse_transform(&s))
                .map_err(|e| e.to_string())?;
            let err = img
                .pixels()
                .iter()
                .zip(back.pixels())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            if err > 1e-6 {
                return Err(format!("N={size} C={channels}: max error {err:e}"));
            }
        }
    }
    Ok(())
}

fn parseval(rng: &mut ChaCha8Rng) -> CheckResult {
    for &size in &[8, 16, 112] {
        let img = random_image(rng, size, 3);
        let spatial: f64 = img.pixels().iter().map(|v| v * v).sum();
        let spec = forward_transform(&img).map_err(|e| e.to_string())?;
        let spectral = spec.energy() * (size * size) as f64;
        let rel = (spatial - spectral).abs() / spatial;
        if rel > 1e-6 {
            return Err(format!("N={size}: relative energy mismatch {rel:e}"));
        }
    }
    Ok(())
}

fn partition(fault: Option<Fault>) -> CheckResult {
    let n = 112;
    for norm in [Norm::L1, Norm::L2] {
        for s in [1.0, 2.0, 4.0, 8.0, 14.0] {
            let p = build_partition(n, s, norm).map_err(|e| e.to_string())?;
            let expected = (56.0 / s).ceil() as usize;
            if p.len() != expected {
                return Err(format!("{norm} s={s}: {} bands, expected {expected}", p.len()));
            }
            let mut seen = vec![0u32; n * n];
            for j in 0..p.len() {
                let mut mask = p.mask(j).map_err(|e| e.to_string())?;
                if fault == Some(Fault::MaskSymmetry) {
                    let mut keep = mask.keep().to_vec();
                    keep[1] = !keep[1];
                    mask = FrequencyMask::from_keep(n, keep).map_err(|e| e.to_string())?;
                }
                if !mask.is_mirror_symmetric() {
                    return Err(format!("{norm} s={s}: band {j} mask is not mirror-symmetric"));
                }
                for (i, k) in mask.keep().iter().enumerate() {
                    if !k {
                        seen[i] += 1;
                    }
                }
            }
            let dc = (n / 2) * n + n / 2;
            if seen[dc] != 0 {
                return Err(format!("{norm} s={s}: DC masked"));
            }
            if let Some(i) = (0..n * n).find(|&i| i != dc && seen[i] != 1) {
                return Err(format!(
                    "{norm} s={s}: coordinate {i} covered by {} bands",
                    seen[i]
                ));
            }
        }
    }
    Ok(())
}

fn toy_oracle(rng: &mut ChaCha8Rng) -> CheckResult {
    let p = build_partition(16, 1.0, Norm::L2).map_err(|e| e.to_string())?;
    let supported = [1usize, 4];
    let toy = SpectralToyEmbedder::new(supported, p.clone()).map_err(|e| e.to_string())?;
    for i in 0..10 {
        let pair = PreparedPair::new(random_image(rng, 16, 3), random_image(rng, 16, 3))
            .map_err(|e| e.to_string())?;
        let prof = pair.influence(&toy, &p).map_err(|e| e.to_string())?;
        for (j, a) in prof.absolute.iter().enumerate() {
            let inside = supported.contains(&j);
            if inside == (*a == 0.0) {
                return Err(format!("pair {i}: band {j} has influence {a}"));
            }
        }
        let order = influence_ordering(&prof).map_err(|e| e.to_string())?;
        let mut top = order[..supported.len()].to_vec();
        top.sort_unstable();
        if top != supported {
            return Err(format!("pair {i}: ordering starts with {top:?}"));
        }
    }
    Ok(())
}

/// EER from a sweep over every distinct score used as the threshold.
fn brute_eer(set: &ScoreSet) -> f64 {
    let mut taus: Vec<f64> = set.genuine.iter().chain(&set.imposter).copied().collect();
    taus.sort_by(f64::total_cmp);
    taus.dedup();
    taus.push(f64::INFINITY);
    let mut best = (f64::INFINITY, 0.0);
    for t in taus {
        let (fmr, fnmr) = (set.fmr(t), set.fnmr(t));
        if (fmr - fnmr).abs() < best.0 {
            best = ((fmr - fnmr).abs(), (fmr + fnmr) / 2.0);
        }
    }
    best.1
}

fn eer_oracle(rng: &mut ChaCha8Rng) -> CheckResult {
    for i in 0..200 {
        let ng = rng.random_range(1..=25);
        let ni = rng.random_range(1..=25);
        // coarse grid so ties are common
        let mut draw = |n| -> Vec<f64> {
            (0..n).map(|_| rng.random_range(-8i32..=8) as f64 / 8.0).collect()
        };
        let set = ScoreSet::new(draw(ng), draw(ni));
        let eer = compute_eer(&set).map_err(|e| e.to_string())?.eer;
        if eer != brute_eer(&set) {
            return Err(format!("set {i}: EER {eer} vs sweep {}", brute_eer(&set)));
        }
        let target = rng.random_range(0.01..0.99);
        let t = threshold_at_fmr(&set, target).map_err(|e| e.to_string())?;
        if set.fmr(t) > target || set.fmr(t.next_down()) <= target {
            return Err(format!("set {i}: threshold {t} is not the smallest with FMR <= {target}"));
        }
    }
    Ok(())
}

/// Runs every check; `fault` deliberately corrupts one of them.
pub fn run(fault: Option<Fault>) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5e1f_7e57);
    vec![
        Check { name: "transform round trip", outcome: round_trip(&mut rng) },
        Check { name: "Parseval energy", outcome: parseval(&mut rng) },
        Check { name: "band partition and masks", outcome: partition(fault) },
        Check { name: "toy embedder influence oracle", outcome: toy_oracle(&mut rng) },
        Check { name: "EER and threshold oracle", outcome: eer_oracle(&mut rng) },
    ]
}
