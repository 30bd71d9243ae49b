use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use freqxplain::embedder::SpectralToyEmbedder;
use freqxplain::evaluation::{compute_eer, ScoreSet};
use freqxplain::explain::{FhpRecord, PreparedPair};
use freqxplain::imaging::{load_image, save_png, ResizePolicy};
use freqxplain::precision::round9;
use freqxplain::spectral::{build_partition, Norm, SpatialImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_freqxplain"))
}

fn run(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("binary runs");
    if !out.status.success() {
        eprintln!("stderr: {}", String::from_utf8_lossy(&out.stderr));
    }
    out
}

fn noise(rng: &mut ChaCha8Rng, n: usize) -> SpatialImage {
    SpatialImage::from_fn(n, 3, |_, _, _| rng.random_range(0.0..255.0)).unwrap()
}

/// Sum of cosines at the given (u, v) offsets around a mid-grey level.
fn waves(n: usize, freqs: &[(f64, f64, f64)]) -> SpatialImage {
    let w = 2.0 * PI / n as f64;
    SpatialImage::from_fn(n, 3, |c, r, col| {
        128.0
            + freqs
                .iter()
                .map(|(u, v, amp)| amp * (w * (u * r as f64 + v * col as f64) + c as f64).cos())
                .sum::<f64>()
    })
    .unwrap()
}

fn write_pair(dir: &Path, name: &str, a: &SpatialImage, b: &SpatialImage) -> (PathBuf, PathBuf) {
    let pa = dir.join(format!("{name}_a.png"));
    let pb = dir.join(format!("{name}_b.png"));
    save_png(a, &pa).unwrap();
    save_png(b, &pb).unwrap();
    (pa, pb)
}

fn read_json(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

fn entropy(p: &[f64]) -> f64 {
    p.iter().filter(|v| **v > 0.0).map(|v| -v * v.ln()).sum()
}

/// Manifest of `pairs` noise pairs, alternating genuine and imposter.
fn noise_manifest(dir: &Path, n: usize, pairs: usize, seed: u64) -> PathBuf {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut csv = String::from("path_a,path_b,label\n");
    for i in 0..pairs {
        let a = noise(&mut rng, n);
        let (b, label) = if i % 2 == 0 {
            let b = SpatialImage::from_fn(n, 3, |c, r, col| {
                (a.get(c, r, col) + rng.random_range(-30.0..30.0)).clamp(0.0, 255.0)
            })
            .unwrap();
            (b, "genuine")
        } else {
            (noise(&mut rng, n), "imposter")
        };
        write_pair(dir, &format!("n{i}"), &a, &b);
        csv.push_str(&format!("n{i}_a.png,n{i}_b.png,{label}\n"));
    }
    let path = dir.join("noise.csv");
    std::fs::write(&path, csv).unwrap();
    path
}

#[test]
fn explain_writes_normalized_profile_and_plots() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (a, b) = write_pair(dir.path(), "p", &noise(&mut rng, 32), &noise(&mut rng, 32));
    let json = dir.path().join("fhp.json");
    let plot = dir.path().join("fhp.svg");
    let out = run(cli()
        .arg("explain")
        .args([&a, &b])
        .args(["--toy-bands", "0,2", "--band-size", "4", "--mode", "both", "-o"])
        .arg(&json)
        .arg("--plot")
        .arg(&plot));
    assert!(out.status.success());

    let rec: FhpRecord = serde_json::from_slice(&std::fs::read(&json).unwrap()).unwrap();
    assert!(!rec.degenerate);
    assert_eq!(rec.bands.len(), 4);
    assert!((rec.absolute.iter().sum::<f64>() - 1.0).abs() < 1e-8);
    assert_eq!(rec.absolute[1], 0.0);
    assert_eq!(rec.absolute[3], 0.0);
    let raw = read_json(&json);
    assert_eq!(raw["bands"][0]["b"], 0.0);
    assert_eq!(raw["bands"][0]["t"], 4.0);

    assert!(!plot.exists());
    for mode in ["absolute", "directed"] {
        let svg = std::fs::read_to_string(dir.path().join(format!("fhp_{mode}.svg"))).unwrap();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches(r#"class="bar""#).count(), 4);
        assert!(svg.contains(">16</text>"), "bars are labelled by upper bound");
    }
}

#[test]
fn explain_json_goes_to_stdout_by_default() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (a, b) = write_pair(dir.path(), "p", &noise(&mut rng, 16), &noise(&mut rng, 16));
    let out = run(cli().arg("explain").args([&a, &b]).args(["--projection-seed", "3", "-s", "2"]));
    assert!(out.status.success());
    let rec: FhpRecord = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(rec.model_id, "projection-3-512");
    assert_eq!(rec.bands.len(), 4);
}

#[test]
fn low_resolution_shifts_influence_to_low_bands() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (a, b) = write_pair(dir.path(), "p", &noise(&mut rng, 112), &noise(&mut rng, 112));
    let share = |extra: &[&str]| {
        let out = run(cli()
            .arg("explain")
            .args([&a, &b])
            .args(["--toy-bands", "0,1,2", "--band-size", "14"])
            .args(extra));
        assert!(out.status.success());
        let rec: FhpRecord = serde_json::from_slice(&out.stdout).unwrap();
        rec.bands
            .iter()
            .zip(&rec.absolute)
            .filter(|(b, _)| b.upper <= 28.0)
            .map(|(_, v)| v)
            .sum::<f64>()
    };
    let plain = share(&[]);
    let low = share(&["--low-res", "0.25"]);
    assert!(low > plain, "{plain} -> {low}");
    // degrading one side only is also accepted
    let cross = share(&["--low-res", "0.25", "--cross-resolution"]);
    assert!(cross.is_finite());
}

#[test]
fn degenerate_profile_exits_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    // identical images with energy in both read bands: no single removal
    // changes the (perfect) match
    let img = waves(32, &[(1.0, 0.0, 40.0), (5.0, 0.0, 30.0)]);
    let (a, b) = write_pair(dir.path(), "same", &img, &img);
    let out = cli()
        .arg("explain")
        .args([&a, &b])
        .args(["--toy-bands", "0,1", "--band-size", "4"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let rec: FhpRecord = serde_json::from_slice(&out.stdout).unwrap();
    assert!(rec.degenerate);
    assert!(rec.absolute.iter().all(|v| *v == 0.0));
}

#[test]
fn curves_endpoint_matches_unaltered_eer_and_counts_baselines() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = noise_manifest(dir.path(), 32, 20, 4);
    let csv = dir.path().join("curves.csv");
    let svg = dir.path().join("curves.svg");
    let out = run(cli()
        .arg("curves")
        .arg(&manifest)
        .args(["--toy-bands", "0,1", "--band-size", "4", "--baseline-seeds", "3", "-o"])
        .arg(&csv)
        .arg("--plot")
        .arg(&svg));
    assert!(out.status.success());

    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("fraction,metric_value,ordering,seed"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    let curves: std::collections::BTreeSet<(&str, &str)> =
        rows.iter().map(|r| (r[2], r[3])).collect();
    assert_eq!(curves.len(), 4);
    assert_eq!(rows.iter().filter(|r| r[2] == "influence").count(), 5);
    assert!(rows.iter().filter(|r| r[2] == "influence").all(|r| r[3].is_empty()));

    // unaltered EER computed independently from the same files
    let p = build_partition(32, 4.0, Norm::L2).unwrap();
    let toy = SpectralToyEmbedder::new([0, 1], p).unwrap();
    let mut set = ScoreSet::default();
    for i in 0..20 {
        let load = |s: &str| load_image(&dir.path().join(format!("n{i}_{s}.png")), None, ResizePolicy::Error).unwrap();
        let score = PreparedPair::new(load("a"), load("b")).unwrap().reference_score(&toy).unwrap();
        if i % 2 == 0 {
            set.genuine.push(score);
        } else {
            set.imposter.push(score);
        }
    }
    let eer = round9(compute_eer(&set).unwrap().eer);
    assert_eq!(rows[0][0], "0");
    assert_eq!(rows[0][1].parse::<f64>().unwrap(), eer);

    let manifest_json = read_json(&csv.with_extension("json"));
    assert_eq!(manifest_json["n_pairs"], 20);
    assert_eq!(manifest_json["metric"], "eer");
    assert_eq!(manifest_json["direction"], "deletion");
    assert_eq!(manifest_json["target_fmr"], 0.1);
    assert_eq!(manifest_json["s"], 4.0);
    assert_eq!(manifest_json["norm"], "L2");
    assert!(manifest_json["interpolation"].as_str().unwrap().contains("bilinear"));

    let plot = std::fs::read_to_string(&svg).unwrap();
    assert_eq!(plot.matches(r#"class="curve""#).count(), 1);
    assert_eq!(plot.matches(r#"class="baseline""#).count(), 3);
}

#[test]
fn curves_need_both_labels() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    write_pair(dir.path(), "g", &noise(&mut rng, 16), &noise(&mut rng, 16));
    let manifest = dir.path().join("m.csv");
    std::fs::write(&manifest, "path_a,path_b,label\ng_a.png,g_b.png,genuine\n").unwrap();
    let out = cli()
        .arg("curves")
        .arg(&manifest)
        .args(["--toy-bands", "0", "-o"])
        .arg(dir.path().join("c.csv"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("imposter"));
}

#[test]
fn aggregate_single_pair_has_zero_spread() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    write_pair(dir.path(), "p", &noise(&mut rng, 32), &noise(&mut rng, 32));
    let manifest = dir.path().join("m.csv");
    std::fs::write(&manifest, "path_a,path_b,label\np_a.png,p_b.png,imposter\n").unwrap();
    let out = run(cli().arg("aggregate").arg(&manifest).args(["--toy-bands", "0,1,2", "-s", "4"]));
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let groups = v["groups"].as_array().unwrap();
    assert_eq!(groups.len(), 1);
    assert_eq!(groups[0]["count"], 1);
    assert!(floats(&groups[0]["absolute"]["std"]).iter().all(|s| *s == 0.0));
    assert!(floats(&groups[0]["directed"]["std"]).iter().all(|s| *s == 0.0));
}

#[test]
fn aggregate_groups_by_tag_and_wider_support_is_more_distributed() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut csv = String::from("path_a,path_b,label,tag\n");
    for i in 0..6 {
        let mut pick = |bands: &[f64]| -> Vec<(f64, f64, f64)> {
            bands
                .iter()
                .map(|r| {
                    let angle: f64 = rng.random_range(0.0..PI / 2.0);
                    let r = r + rng.random_range(0.2..0.8);
                    ((r * angle.cos()).round(), (r * angle.sin()).round(), 25.0)
                })
                .collect()
        };
        // narrow: energy in band 0 only; wide: bands 0 through 3
        let narrow = [1.0, 2.0];
        let wide = [1.0, 5.0, 9.0, 13.0];
        let (a, b) = (waves(32, &pick(&narrow)), waves(32, &pick(&narrow)));
        write_pair(dir.path(), &format!("a{i}"), &a, &b);
        let (a, b) = (waves(32, &pick(&wide)), waves(32, &pick(&wide)));
        write_pair(dir.path(), &format!("b{i}"), &a, &b);
        csv.push_str(&format!("a{i}_a.png,a{i}_b.png,imposter,bona fide\n"));
        csv.push_str(&format!("b{i}_a.png,b{i}_b.png,imposter,morph\n"));
    }
    let manifest = dir.path().join("tags.csv");
    std::fs::write(&manifest, csv).unwrap();
    let plot = dir.path().join("agg.svg");
    let out = run(cli()
        .arg("aggregate")
        .arg(&manifest)
        .args(["--toy-bands", "0,1,2,3", "-s", "4", "--group-by-tag", "--plot"])
        .arg(&plot));
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let groups = v["groups"].as_array().unwrap();
    assert_eq!(groups.len(), 2);
    assert_eq!(groups[0]["tag"], "bona fide");
    assert_eq!(groups[1]["tag"], "morph");
    let narrow = floats(&groups[0]["absolute"]["mean"]);
    let wide = floats(&groups[1]["absolute"]["mean"]);
    assert!(entropy(&wide) > entropy(&narrow), "{narrow:?} vs {wide:?}");
    for tag in ["bona_fide", "morph"] {
        let svg = std::fs::read_to_string(dir.path().join(format!("agg_{tag}.svg"))).unwrap();
        assert_eq!(svg.matches(r#"class="errorbar""#).count(), 4);
    }
}

#[test]
fn degrade_writes_same_sized_png() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.png");
    save_png(&SpatialImage::constant(40, 3, 90.0).unwrap(), &input).unwrap();
    let output = dir.path().join("out.png");
    let out = run(cli().arg("degrade").arg(&input).arg(&output).args(["--factor", "0.25"]));
    assert!(out.status.success());
    let img = load_image(&output, None, ResizePolicy::Error).unwrap();
    assert_eq!(img.size(), 40);
    assert!(img.pixels().iter().all(|v| *v == 90.0));

    let bad = cli().arg("degrade").arg(&input).arg(&output).args(["--factor", "1.5"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn selftest_passes_and_reports_injected_fault() {
    let ok = run(cli().arg("selftest"));
    assert!(ok.status.success());
    let text = String::from_utf8_lossy(&ok.stdout);
    assert!(text.contains("5 passed, 0 failed"), "{text}");

    let bad = cli().args(["selftest", "--inject-fault", "mask-symmetry"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(1));
    let text = String::from_utf8_lossy(&bad.stdout);
    assert!(text.contains("FAIL  band partition and masks"), "{text}");
}

#[test]
fn backend_selection_errors() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (a, b) = write_pair(dir.path(), "p", &noise(&mut rng, 16), &noise(&mut rng, 16));
    let none = cli().arg("explain").args([&a, &b]).output().unwrap();
    assert_eq!(none.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&none.stderr).contains("exactly one backend"));
    let two = cli()
        .arg("explain")
        .args([&a, &b])
        .args(["--toy-bands", "0", "--projection-seed", "1"])
        .output()
        .unwrap();
    assert_eq!(two.status.code(), Some(1));
    let missing = cli()
        .arg("explain")
        .arg(dir.path().join("nope.png"))
        .arg(&b)
        .args(["--toy-bands", "0"])
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("nope.png"));
}

#[test]
fn unusual_band_size_warns_but_runs() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (a, b) = write_pair(dir.path(), "p", &noise(&mut rng, 16), &noise(&mut rng, 16));
    let out = run(cli().arg("explain").args([&a, &b]).args(["--toy-bands", "0", "-s", "3"]));
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("band size 3"));
}

#[cfg(feature = "onnx")]
#[test]
fn onnx_model_resolves_through_model_dir() {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures");
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let (a, b) = write_pair(dir.path(), "p", &noise(&mut rng, 8), &noise(&mut rng, 8));
    let out = run(cli()
        .env("FREQXPLAIN_MODEL_DIR", &fixtures)
        .arg("explain")
        .args([&a, &b])
        .args(["--model", "tiny_embedder.onnx", "-s", "1"]));
    assert!(out.status.success());
    let rec: FhpRecord = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(rec.model_id, "tiny-embedder");
    assert_eq!(rec.bands.len(), 4);
}
