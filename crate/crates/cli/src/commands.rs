use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use freqxplain::evaluation::{
    baseline_seed, curve_auc, write_curves_csv, CurveStudy, Direction, EvalCurve, LabeledPair,
    MetricKind, OrderingSource, RunManifest,
};
use freqxplain::explain::{aggregate_profiles, FhpRecord, InfluenceMode, InfluenceProfile, PreparedPair};
use freqxplain::imaging::{
    degrade_resolution, load_image, read_manifest, save_png, Label, PairRecord, ResizePolicy,
    INTERPOLATION_CONVENTION,
};
use freqxplain::precision::{round9, round9_all};
use freqxplain::spectral::{build_partition, BandPartition, BandSpec, Norm, SpatialImage};

use crate::backend::{BackendArgs, Prepared};
use crate::plot::{self, Series};
use crate::selftest::{self, Fault};

const RECOMMENDED_BAND_SIZES: [f64; 5] = [1.0, 2.0, 4.0, 8.0, 14.0];

#[derive(Debug, Parser)]
#[command(name = "freqxplain", version, about = "Frequency-domain explanations for face verification")]
pub struct Cli {
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,

    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Frequency heat plot of one image pair.
    Explain(ExplainArgs),
    /// Insertion or deletion curves over a pair manifest.
    Curves(CurvesArgs),
    /// Mean and standard deviation of heat plots over a pair manifest.
    Aggregate(AggregateArgs),
    /// Down- and up-scale an image by a factor.
    Degrade(DegradeArgs),
    /// Run the built-in correctness checks.
    Selftest(SelftestArgs),
}

#[derive(Debug, Clone, Args)]
pub struct BandArgs {
    /// Radial width of each frequency band.
    #[arg(long, short = 's', default_value_t = 8.0)]
    pub band_size: f64,

    #[arg(long, default_value = "l2", value_parser = parse_norm)]
    pub norm: Norm,
}

fn parse_norm(s: &str) -> Result<Norm, String> {
    s.parse().map_err(|e: freqxplain::Error| e.to_string())
}

#[derive(Debug, Clone, Args)]
pub struct DegradeOpts {
    /// Down/up-scale factor applied before explaining (e.g. 0.25).
    #[arg(long, value_name = "M")]
    pub low_res: Option<f64>,

    /// Apply --low-res to the second image of each pair only.
    #[arg(long, requires = "low_res")]
    pub cross_resolution: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Absolute,
    Directed,
    Both,
}

impl ModeArg {
    fn modes(self) -> Vec<InfluenceMode> {
        match self {
            ModeArg::Absolute => vec![InfluenceMode::Absolute],
            ModeArg::Directed => vec![InfluenceMode::Directed],
            ModeArg::Both => vec![InfluenceMode::Absolute, InfluenceMode::Directed],
        }
    }
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    pub image_a: PathBuf,
    pub image_b: PathBuf,
    #[command(flatten)]
    pub backend: BackendArgs,
    #[command(flatten)]
    pub bands: BandArgs,
    #[command(flatten)]
    pub degrade: DegradeOpts,
    /// Which heat plot(s) to draw.
    #[arg(long, value_enum, default_value = "absolute")]
    pub mode: ModeArg,
    /// JSON output (default: stdout).
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// SVG bar plot; with `--mode both` `_absolute`/`_directed` is appended to the stem.
    #[arg(long)]
    pub plot: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CurvesArgs {
    /// CSV with columns path_a,path_b,label[,tag].
    pub manifest: PathBuf,
    #[command(flatten)]
    pub backend: BackendArgs,
    #[command(flatten)]
    pub bands: BandArgs,
    #[command(flatten)]
    pub degrade: DegradeOpts,
    #[arg(long, value_enum, default_value = "eer")]
    pub metric: MetricArg,
    #[arg(long, value_enum, default_value = "deletion")]
    pub direction: DirectionArg,
    /// FMR at which the FNMR threshold is frozen.
    #[arg(long, default_value_t = 0.1)]
    pub target_fmr: f64,
    /// Master seed for the random baselines.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of random-ordering baseline curves.
    #[arg(long, default_value_t = 10)]
    pub baseline_seeds: usize,
    /// Curves CSV.
    #[arg(long, short)]
    pub out: PathBuf,
    /// Run manifest JSON (default: the CSV path with a `.json` extension).
    #[arg(long)]
    pub run_manifest: Option<PathBuf>,
    /// SVG line plot.
    #[arg(long)]
    pub plot: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    Eer,
    Fnmr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DirectionArg {
    Deletion,
    Insertion,
}

#[derive(Debug, Args)]
pub struct AggregateArgs {
    pub manifest: PathBuf,
    #[command(flatten)]
    pub backend: BackendArgs,
    #[command(flatten)]
    pub bands: BandArgs,
    #[command(flatten)]
    pub degrade: DegradeOpts,
    #[arg(long, value_enum, default_value = "absolute")]
    pub mode: ModeArg,
    /// Aggregate each manifest tag separately.
    #[arg(long)]
    pub group_by_tag: bool,
    /// JSON output (default: stdout).
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    /// SVG bar plot with error bars; one file per group and mode.
    #[arg(long)]
    pub plot: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DegradeArgs {
    pub input: PathBuf,
    pub output: PathBuf,
    #[arg(long, short = 'm', default_value_t = 0.25)]
    pub factor: f64,
}

#[derive(Debug, Args)]
pub struct SelftestArgs {
    /// Deliberately break one check to confirm failures are reported.
    #[arg(long, value_enum)]
    pub inject_fault: Option<Fault>,
}

/// Result of a command that finished without an error.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success,
    /// Output was written but carries no usable explanation.
    Degenerate,
    /// Self-test checks failed.
    Failed,
}

pub fn run(cli: Cli) -> anyhow::Result<Status> {
    match cli.jobs {
        Some(0) => bail!("--jobs must be at least 1"),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .context("building the worker pool")?
            .install(|| dispatch(cli.command)),
        None => dispatch(cli.command),
    }
}

fn dispatch(command: Command) -> anyhow::Result<Status> {
    match command {
        Command::Explain(a) => cmd_explain(&a),
        Command::Curves(a) => cmd_curves(&a),
        Command::Aggregate(a) => cmd_aggregate(&a),
        Command::Degrade(a) => cmd_degrade(&a),
        Command::Selftest(a) => Ok(cmd_selftest(&a)),
    }
}

fn check_band_size(s: f64) {
    if s.is_finite() && s > 0.0 && !RECOMMENDED_BAND_SIZES.contains(&s) {
        log::warn!("band size {s} is outside the usual set {{1, 2, 4, 8, 14}}");
    }
}

fn write_output(path: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> anyhow::Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// `dir/stem_suffix.ext` for each suffix, or the path itself without suffixes.
fn suffixed(path: &Path, suffixes: &[String]) -> PathBuf {
    if suffixes.is_empty() {
        return path.to_path_buf();
    }
    let stem = path.file_stem().unwrap_or_default().to_string_lossy();
    let ext = path
        .extension()
        .map(|e| e.to_string_lossy().into_owned())
        .unwrap_or_else(|| "svg".into());
    path.with_file_name(format!("{stem}_{}.{ext}", suffixes.join("_")))
}

fn sanitize(tag: &str) -> String {
    tag.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect()
}

struct Loader {
    expected: Option<usize>,
    policy: ResizePolicy,
    low_res: Option<f64>,
    cross: bool,
}

impl Loader {
    fn new(prepared: &Prepared, policy: ResizePolicy, opts: &DegradeOpts) -> Self {
        Self {
            expected: prepared.expected_size(),
            policy,
            low_res: opts.low_res,
            cross: opts.cross_resolution,
        }
    }

    fn pair(&self, a: &Path, b: &Path) -> anyhow::Result<PreparedPair> {
        let mut img_a = load_image(a, self.expected, self.policy)?;
        let mut img_b = load_image(b, self.expected, self.policy)?;
        if let Some(m) = self.low_res {
            if !self.cross {
                img_a = degrade_resolution(&img_a, m)?;
            }
            img_b = degrade_resolution(&img_b, m)?;
        }
        Ok(PreparedPair::new(img_a, img_b)?)
    }

    fn manifest(&self, records: &[PairRecord]) -> anyhow::Result<Vec<LabeledPair>> {
        records
            .par_iter()
            .map(|r| {
                let pair = self.pair(&r.path_a, &r.path_b).with_context(|| {
                    format!("pair {} / {}", r.path_a.display(), r.path_b.display())
                })?;
                Ok(LabeledPair {
                    pair,
                    label: r.label,
                    tag: r.tag.clone(),
                })
            })
            .collect()
    }
}

fn partition_for(size: usize, bands: &BandArgs) -> anyhow::Result<BandPartition> {
    check_band_size(bands.band_size);
    Ok(build_partition(size, bands.band_size, bands.norm)?)
}

fn band_uppers(partition: &BandPartition) -> Vec<f64> {
    partition.bands().iter().map(|b| b.upper).collect()
}

fn fhp_plot(record: &FhpRecord, mode: InfluenceMode, uppers: &[f64]) -> String {
    let (values, signed) = match mode {
        InfluenceMode::Absolute => (&record.absolute, false),
        InfluenceMode::Directed => (&record.directed, true),
    };
    plot::bar_chart(
        &format!("{mode} FHP, {} s={} {}", record.model_id, record.band_size, record.norm),
        &format!("{mode} influence"),
        uppers,
        values,
        None,
        signed,
    )
}

pub fn cmd_explain(args: &ExplainArgs) -> anyhow::Result<Status> {
    let choice = args.backend.choice()?;
    let policy = args.backend.resize.into();
    let prepared = Prepared::load(&choice, policy)?;
    let pair = Loader::new(&prepared, policy, &args.degrade).pair(&args.image_a, &args.image_b)?;
    let partition = partition_for(pair.size(), &args.bands)?;
    let backend = prepared.finish(&partition)?;

    let profile = pair.influence(backend.as_ref(), &partition)?;
    let record = profile.to_record(backend.model_id());
    write_output(args.out.as_deref(), &to_json(&record)?)?;

    if let Some(path) = &args.plot {
        let modes = args.mode.modes();
        let uppers = band_uppers(&partition);
        for mode in &modes {
            let suffix = if modes.len() > 1 { vec![mode.to_string()] } else { vec![] };
            let target = suffixed(path, &suffix);
            fs::write(&target, fhp_plot(&record, *mode, &uppers))
                .with_context(|| format!("writing {}", target.display()))?;
        }
    }

    if profile.degenerate {
        log::error!("masking no band changed the score; the heat plot is degenerate");
        return Ok(Status::Degenerate);
    }
    Ok(Status::Success)
}

pub fn cmd_curves(args: &CurvesArgs) -> anyhow::Result<Status> {
    let choice = args.backend.choice()?;
    let policy = args.backend.resize.into();
    let prepared = Prepared::load(&choice, policy)?;
    let records = read_manifest(&args.manifest)?;
    let genuine = records.iter().filter(|r| r.label == Label::Genuine).count();
    ensure!(
        genuine > 0 && genuine < records.len(),
        "curves need at least one genuine and one imposter pair ({} genuine of {})",
        genuine,
        records.len()
    );
    let pairs = Loader::new(&prepared, policy, &args.degrade).manifest(&records)?;
    let partition = partition_for(pairs[0].pair.size(), &args.bands)?;
    let backend = prepared.finish(&partition)?;

    let metric = match args.metric {
        MetricArg::Eer => MetricKind::Eer,
        MetricArg::Fnmr => MetricKind::Fnmr,
    };
    let direction = match args.direction {
        DirectionArg::Deletion => Direction::Deletion,
        DirectionArg::Insertion => Direction::Insertion,
    };
    let study = CurveStudy::new(pairs, backend.as_ref(), partition, metric, args.target_fmr)?;

    let mut curves = vec![study.curve(direction, OrderingSource::Influence)?];
    for i in 0..args.baseline_seeds {
        let seed = baseline_seed(args.seed, i);
        curves.push(study.curve(direction, OrderingSource::Random { seed })?);
    }

    let mut csv = Vec::new();
    write_curves_csv(&mut csv, &curves)?;
    fs::write(&args.out, &csv).with_context(|| format!("writing {}", args.out.display()))?;

    let manifest = RunManifest {
        model_id: backend.model_id().to_string(),
        s: args.bands.band_size,
        norm: args.bands.norm,
        metric,
        direction,
        target_fmr: args.target_fmr,
        master_seed: args.seed,
        n_pairs: study.pairs().len(),
        n_degenerate: study.n_degenerate()?,
        threshold: study.threshold().map(round9),
        low_res: args.degrade.low_res,
        interpolation: INTERPOLATION_CONVENTION.to_string(),
    };
    let manifest_path = args
        .run_manifest
        .clone()
        .unwrap_or_else(|| args.out.with_extension("json"));
    fs::write(&manifest_path, to_json(&manifest)?)
        .with_context(|| format!("writing {}", manifest_path.display()))?;

    let influence_auc = curve_auc(&curves[0])?;
    if curves.len() > 1 {
        let baseline: Vec<f64> = curves[1..].iter().map(curve_auc).collect::<Result<_, _>>()?;
        let mean = baseline.iter().sum::<f64>() / baseline.len() as f64;
        println!(
            "{direction} {metric}: influence AUC {} | random baseline mean AUC {} over {} seeds",
            round9(influence_auc),
            round9(mean),
            baseline.len()
        );
    } else {
        println!("{direction} {metric}: influence AUC {}", round9(influence_auc));
    }

    if let Some(path) = &args.plot {
        fs::write(path, curves_plot(&curves, metric, direction))
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(Status::Success)
}

fn curves_plot(curves: &[EvalCurve], metric: MetricKind, direction: Direction) -> String {
    let points: Vec<Vec<(f64, f64)>> = curves
        .iter()
        .map(|c| c.points.iter().map(|p| (p.fraction, p.value)).collect())
        .collect();
    let series: Vec<Series<'_>> = curves
        .iter()
        .zip(&points)
        .map(|(c, pts)| Series {
            name: match c.ordering.seed() {
                Some(seed) => format!("random (seed {seed})"),
                None => "influence".into(),
            },
            points: pts,
            dashed: c.ordering != OrderingSource::Influence,
        })
        .collect();
    let label = match metric {
        MetricKind::Eer => "EER",
        MetricKind::Fnmr => "FNMR",
    };
    plot::line_chart(
        &format!("{direction} curve"),
        label,
        "fraction of bands",
        &series,
    )
}

#[derive(Debug, Serialize)]
struct ModeStats {
    mean: Vec<f64>,
    std: Vec<f64>,
}

#[derive(Debug, Serialize)]
struct GroupRecord {
    tag: Option<String>,
    count: usize,
    n_degenerate: usize,
    absolute: ModeStats,
    directed: ModeStats,
}

#[derive(Debug, Serialize)]
struct AggregateRecord {
    model_id: String,
    norm: Norm,
    band_size: f64,
    bands: Vec<BandSpec>,
    groups: Vec<GroupRecord>,
}

pub fn cmd_aggregate(args: &AggregateArgs) -> anyhow::Result<Status> {
    let choice = args.backend.choice()?;
    let policy = args.backend.resize.into();
    let prepared = Prepared::load(&choice, policy)?;
    let records = read_manifest(&args.manifest)?;
    ensure!(!records.is_empty(), "manifest {} has no pairs", args.manifest.display());
    let pairs = Loader::new(&prepared, policy, &args.degrade).manifest(&records)?;
    let partition = partition_for(pairs[0].pair.size(), &args.bands)?;
    let backend = prepared.finish(&partition)?;

    let profiles: Vec<InfluenceProfile> = pairs
        .par_iter()
        .map(|p| p.pair.influence(backend.as_ref(), &partition))
        .collect::<Result<_, _>>()?;

    let mut groups: Vec<(Option<String>, Vec<usize>)> = Vec::new();
    if args.group_by_tag {
        for (i, p) in pairs.iter().enumerate() {
            match groups.iter_mut().find(|(t, _)| *t == p.tag) {
                Some((_, members)) => members.push(i),
                None => groups.push((p.tag.clone(), vec![i])),
            }
        }
    } else {
        groups.push((None, (0..pairs.len()).collect()));
    }

    let mut out = Vec::new();
    for (tag, members) in &groups {
        let usable: Vec<InfluenceProfile> = members
            .iter()
            .map(|&i| &profiles[i])
            .filter(|p| !p.degenerate)
            .cloned()
            .collect();
        let n_degenerate = members.len() - usable.len();
        let name = tag.as_deref().unwrap_or("all pairs");
        if usable.is_empty() {
            bail!("every pair in {name} has a degenerate heat plot");
        }
        if n_degenerate > 0 {
            log::warn!("{name}: {n_degenerate} degenerate pair(s) left out of the aggregate");
        }
        let abs = aggregate_profiles(&usable, InfluenceMode::Absolute)?;
        let dir = aggregate_profiles(&usable, InfluenceMode::Directed)?;
        out.push(GroupRecord {
            tag: tag.clone(),
            count: usable.len(),
            n_degenerate,
            absolute: ModeStats {
                mean: round9_all(&abs.mean),
                std: round9_all(&abs.std),
            },
            directed: ModeStats {
                mean: round9_all(&dir.mean),
                std: round9_all(&dir.std),
            },
        });
    }

    let record = AggregateRecord {
        model_id: backend.model_id().to_string(),
        norm: partition.norm(),
        band_size: partition.band_size(),
        bands: partition.bands().to_vec(),
        groups: out,
    };
    write_output(args.out.as_deref(), &to_json(&record)?)?;

    if let Some(path) = &args.plot {
        let modes = args.mode.modes();
        let uppers = band_uppers(&partition);
        for g in &record.groups {
            for mode in &modes {
                let mut suffix = Vec::new();
                if args.group_by_tag {
                    suffix.push(sanitize(g.tag.as_deref().unwrap_or("untagged")));
                }
                if modes.len() > 1 {
                    suffix.push(mode.to_string());
                }
                let stats = match mode {
                    InfluenceMode::Absolute => &g.absolute,
                    InfluenceMode::Directed => &g.directed,
                };
                let title = match &g.tag {
                    Some(t) => format!("mean {mode} FHP, {t} (n={})", g.count),
                    None => format!("mean {mode} FHP (n={})", g.count),
                };
                let svg = plot::bar_chart(
                    &title,
                    &format!("{mode} influence"),
                    &uppers,
                    &stats.mean,
                    Some(&stats.std),
                    *mode == InfluenceMode::Directed,
                );
                let target = suffixed(path, &suffix);
                fs::write(&target, svg).with_context(|| format!("writing {}", target.display()))?;
            }
        }
    }
    Ok(Status::Success)
}

pub fn cmd_degrade(args: &DegradeArgs) -> anyhow::Result<Status> {
    let img: SpatialImage = load_image(&args.input, None, ResizePolicy::Error)?;
    let low = degrade_resolution(&img, args.factor)?;
    save_png(&low, &args.output)?;
    Ok(Status::Success)
}

pub fn cmd_selftest(args: &SelftestArgs) -> Status {
    let report = selftest::run(args.inject_fault);
    for check in &report {
        match &check.outcome {
            Ok(()) => println!("PASS  {}", check.name),
            Err(msg) => println!("FAIL  {}: {msg}", check.name),
        }
    }
    let failed = report.iter().filter(|c| c.outcome.is_err()).count();
    println!("{} passed, {failed} failed", report.len() - failed);
    if failed == 0 {
        Status::Success
    } else {
        Status::Failed
    }
}
