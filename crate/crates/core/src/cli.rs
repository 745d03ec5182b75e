//! The `boxseg` command line.
//!
//! Exit codes: 0 on success, 1 for usage and configuration errors, 2 for
//! errors in input data. Every run prints its resolved configuration and
//! seed to stderr; outputs never contain timestamps, so reruns with the same
//! configuration produce identical files.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{de::DeserializeOwned, Serialize};

use crate::clustering::{cluster_per_semantic, ClusterMethod, Clustering, VoteSet, DEFAULT_TAU};
use crate::error::Error;
use crate::eval::{default_thresholds, detection_proxy, evaluate, gt_masks, check_masks, label_quality};
use crate::instancer::{back_project, detector_baseline, read_masks, write_masks, write_masks_ply};
use crate::oracle::{derive_seed, gen_scene, simulate_votes, SceneGenParams, VoteNoise};
use crate::pipeline::{run_pipeline, votes_to_masks, SegmentConfig};
use crate::scene::{
    load_scene, read_boxes, save_scene_json, write_boxes, write_json, BoxAnnotationSet, SceneCloud, SceneFormat,
};
use crate::weaklabel::{associate, degrade_annotations, make_targets, undecided_fraction, AssociationStrategy};

#[derive(Debug, Parser)]
#[command(name = "boxseg", version, about = "Box-supervised 3D instance segmentation experiments")]
struct Cli {
    /// Worker threads for scene-level parallelism (default: one per core).
    /// Results do not depend on this value.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Associate scene points with boxes and write weak labels and targets.
    Genlabels(GenlabelsArgs),
    /// Generate synthetic scenes and simulated votes.
    Simulate(SimulateArgs),
    /// Cluster a vote file.
    Cluster(ClusterArgs),
    /// Back-project clusters to instance masks.
    Segment(SegmentArgs),
    /// Evaluate instance masks against a scene's ground truth.
    Eval(EvalArgs),
    /// Drop and jitter annotation boxes.
    Degrade(DegradeArgs),
    /// Detect-then-segment baseline: NMS over box votes, then association.
    Baseline(BaselineArgs),
    /// Weak labels, simulated votes, clustering and evaluation in one go.
    Pipeline(PipelineArgs),
    /// Mean mAP over a scene directory for a range of clustering thresholds.
    SweepTau(SweepTauArgs),
    /// Weak-label quality under increasing annotation degradation.
    SweepDegrade(SweepDegradeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Algo {
    /// Greedy IoU clustering of box votes.
    Nmc,
    /// Connected components of vote centers within a radius.
    Sc,
}

#[derive(Debug, Args, Serialize)]
struct GenlabelsArgs {
    /// Scene file (scene-json or PLY).
    #[arg(long)]
    scene: PathBuf,
    /// `scene` to use the boxes stored in the scene file, otherwise a boxes
    /// file.
    #[arg(long, default_value = "scene")]
    boxes_from: String,
    #[arg(long, value_enum, default_value = "decided")]
    strategy: AssociationStrategy,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct SimulateArgs {
    /// Scene generator parameters (JSON). Defaults are used when omitted.
    #[arg(long)]
    gen_config: Option<PathBuf>,
    /// Vote noise parameters (JSON). Noiseless when omitted.
    #[arg(long)]
    noise_config: Option<PathBuf>,
    /// Overrides the seeds of both config files.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of scenes.
    #[arg(long, default_value_t = 1)]
    count: usize,
    /// Association used to derive the votes.
    #[arg(long, value_enum, default_value = "decided")]
    strategy: AssociationStrategy,
    /// Output directory; receives scene_NNN.json and votes_NNN.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct ClusterArgs {
    #[arg(long)]
    votes: PathBuf,
    /// IoU threshold of the greedy clustering.
    #[arg(long, default_value_t = DEFAULT_TAU)]
    tau: f64,
    /// Cluster each predicted class separately.
    #[arg(long)]
    per_semantic: bool,
    #[arg(long, value_enum, default_value = "nmc")]
    algo: Algo,
    /// Linking distance of center clustering, in meters.
    #[arg(long, default_value_t = 0.05)]
    radius: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct SegmentArgs {
    #[arg(long)]
    votes: PathBuf,
    #[arg(long)]
    clusters: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Also write a colored PLY of the masks (needs --scene).
    #[arg(long)]
    ply: Option<PathBuf>,
    #[arg(long)]
    scene: Option<PathBuf>,
    /// Seed of the mask colors.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args, Serialize)]
struct EvalArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    scene: PathBuf,
    /// Match boxes fitted to the masks instead of the masks themselves.
    #[arg(long)]
    detection_proxy: bool,
    /// IoU thresholds listed per class, as `a,b,c` or `start:step:end`
    /// (default 0.25 and 0.50:0.05:0.95).
    #[arg(long)]
    thresholds: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct DegradeArgs {
    /// Boxes file or scene-json with boxes.
    #[arg(long)]
    boxes: PathBuf,
    /// Probability of dropping each box.
    #[arg(long, default_value_t = 0.0)]
    drop: f64,
    /// Maximum corner displacement per coordinate, in meters.
    #[arg(long, default_value_t = 0.0)]
    jitter: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct BaselineArgs {
    #[arg(long)]
    votes: PathBuf,
    #[arg(long)]
    scene: PathBuf,
    /// NMS IoU threshold.
    #[arg(long, default_value_t = 0.25)]
    nms: f64,
    #[arg(long, value_enum, default_value = "decided")]
    strategy: AssociationStrategy,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct ClusterOpts {
    /// IoU threshold of the greedy clustering.
    #[arg(long, default_value_t = DEFAULT_TAU)]
    tau: f64,
    #[arg(long, value_enum, default_value = "nmc")]
    algo: Algo,
    /// Linking distance of center clustering, in meters.
    #[arg(long, default_value_t = 0.05)]
    radius: f64,
    /// Cluster each predicted class separately.
    #[arg(long)]
    per_semantic: bool,
    /// Cluster per-point votes instead of segment-averaged votes.
    #[arg(long)]
    no_aggregate: bool,
}

impl ClusterOpts {
    fn config(&self) -> Result<SegmentConfig, Failure> {
        let cfg = SegmentConfig {
            method: method(self.algo, self.tau, self.radius)?,
            per_semantic: self.per_semantic,
            aggregate_segments: !self.no_aggregate,
        };
        cfg.validate().map_err(Failure::usage_from)?;
        Ok(cfg)
    }
}

#[derive(Debug, Args, Serialize)]
struct PipelineArgs {
    /// Scene-json with ground truth and boxes.
    #[arg(long)]
    scene: PathBuf,
    /// Vote noise parameters (JSON). Noiseless when omitted.
    #[arg(long)]
    noise: Option<PathBuf>,
    /// Overrides the noise seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value = "decided")]
    strategy: AssociationStrategy,
    #[command(flatten)]
    cluster: ClusterOpts,
    /// Report file.
    #[arg(long)]
    out: PathBuf,
    /// Also write the predicted masks.
    #[arg(long)]
    masks: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct SweepTauArgs {
    /// Directory with scene_NNN.json files and optionally votes_NNN.json.
    #[arg(long)]
    scene_dir: PathBuf,
    /// Thresholds as `start:step:end` or `a,b,c`.
    #[arg(long, default_value = "0.1:0.1:0.9")]
    taus: String,
    /// Noise used to simulate votes for scenes without a votes file.
    #[arg(long)]
    noise: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Cluster each predicted class separately.
    #[arg(long)]
    per_semantic: bool,
    /// Cluster per-point votes instead of segment-averaged votes.
    #[arg(long)]
    no_aggregate: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct SweepDegradeArgs {
    /// Directory with scene_NNN.json files carrying boxes and ground truth.
    #[arg(long)]
    scene_dir: PathBuf,
    /// Corner jitter levels in meters.
    #[arg(long, default_value = "0,0.05,0.1,0.2")]
    jitters: String,
    /// Box drop rates.
    #[arg(long, default_value = "0,0.05,0.1")]
    drops: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "decided")]
    strategy: AssociationStrategy,
    #[arg(long)]
    out: PathBuf,
}

/// A failed run: exit code and message.
#[derive(Debug)]
struct Failure {
    code: i32,
    msg: String,
}

impl Failure {
    fn usage(msg: impl Into<String>) -> Self {
        Failure { code: 1, msg: msg.into() }
    }

    fn usage_from(e: Error) -> Self {
        Failure::usage(match e {
            Error::InvalidParam(m) => m,
            other => other.to_string(),
        })
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParam(m) => Failure::usage(m),
            e => Failure {
                code: if e.is_data_error() { 2 } else { 1 },
                msg: e.to_string(),
            },
        }
    }
}

type CliResult<T = ()> = Result<T, Failure>;

/// Parses `argv` (program name first), runs the subcommand and returns the
/// process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.jobs.unwrap_or(0)).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    match pool.install(|| dispatch(cli.command)) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            f.code
        }
    }
}

fn announce<A: Serialize>(name: &str, args: &A, seed: Option<u64>) {
    let config = serde_json::to_string(args).unwrap_or_default();
    eprintln!("boxseg {name}: {config}");
    match seed {
        Some(s) => eprintln!("seed: {s}"),
        None => eprintln!("seed: none"),
    }
}

fn dispatch(command: Command) -> CliResult {
    match command {
        Command::Genlabels(a) => genlabels(a),
        Command::Simulate(a) => simulate(a),
        Command::Cluster(a) => cluster(a),
        Command::Segment(a) => segment(a),
        Command::Eval(a) => eval(a),
        Command::Degrade(a) => degrade(a),
        Command::Baseline(a) => baseline(a),
        Command::Pipeline(a) => pipeline(a),
        Command::SweepTau(a) => sweep_tau(a),
        Command::SweepDegrade(a) => sweep_degrade(a),
    }
}

/// Reads a configuration file; any failure is a usage error.
fn read_config<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    crate::scene::parse_json_file(path).map_err(|e| Failure::usage(format!("config {}: {e}", path.display())))
}

fn scene_with_boxes(path: &Path) -> CliResult<(SceneCloud, BoxAnnotationSet)> {
    let (scene, boxes) = load_scene(path, SceneFormat::from_path(path))?;
    let boxes = boxes.ok_or_else(|| Error::Schema(format!("{} has no boxes", path.display())))?;
    Ok((scene, boxes))
}

fn read_votes(path: &Path) -> CliResult<VoteSet> {
    Ok(crate::scene::parse_json_file(path)?)
}

fn method(algo: Algo, tau: f64, radius: f64) -> CliResult<ClusterMethod> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Failure::usage("tau must be in (0,1)"));
    }
    match algo {
        Algo::Nmc => Ok(ClusterMethod::Nmc { tau }),
        Algo::Sc if radius > 0.0 && radius.is_finite() => Ok(ClusterMethod::Spatial { radius }),
        Algo::Sc => Err(Failure::usage("radius must be positive")),
    }
}

/// `start:step:end` (inclusive) or a comma-separated list.
fn parse_values(text: &str, what: &str) -> CliResult<Vec<f64>> {
    let bad = || Failure::usage(format!("cannot parse {what} \"{text}\""));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
    let values = if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        let [start, step, end] = parts[..] else {
            return Err(bad());
        };
        let (start, step, end) = (num(start)?, num(step)?, num(end)?);
        if !(step > 0.0) || end < start {
            return Err(bad());
        }
        let n = ((end - start) / step + 1e-9).floor() as usize + 1;
        (0..n).map(|i| ((start + i as f64 * step) * 1e9).round() / 1e9).collect()
    } else {
        text.split(',').map(num).collect::<CliResult<Vec<f64>>>()?
    };
    if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
        return Err(bad());
    }
    Ok(values)
}

fn scene_files(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("scene_") && n.ends_with(".json"))
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::Schema(format!("no scene_*.json files in {}", dir.display())).into());
    }
    Ok(files)
}

fn votes_path_for(scene: &Path) -> PathBuf {
    let name = scene.file_name().and_then(|n| n.to_str()).unwrap_or_default();
    scene.with_file_name(name.replacen("scene_", "votes_", 1))
}

fn write_text(path: &Path, text: &str) -> CliResult {
    std::fs::write(path, text).map_err(|e| Error::io(path, e).into())
}

#[derive(Serialize)]
struct LabelFile<'a> {
    strategy: AssociationStrategy,
    undecided_fraction: f64,
    tags: &'a [crate::weaklabel::Tag],
    targets: crate::weaklabel::TrainingTargets,
}

fn genlabels(a: GenlabelsArgs) -> CliResult {
    announce("genlabels", &a, None);
    let (scene, stored) = load_scene(&a.scene, SceneFormat::from_path(&a.scene))?;
    let boxes = if a.boxes_from == "scene" {
        stored.ok_or_else(|| Error::Schema(format!("{} has no boxes", a.scene.display())))?
    } else {
        read_boxes(Path::new(&a.boxes_from))?
    };
    let assoc = associate(&scene, &boxes, a.strategy);
    let fraction = undecided_fraction(&assoc);
    eprintln!("undecided fraction: {fraction}");
    let file = LabelFile {
        strategy: a.strategy,
        undecided_fraction: fraction,
        tags: &assoc.tags,
        targets: make_targets(&assoc, &scene, &boxes),
    };
    Ok(write_json(&a.out, &file, false)?)
}

fn simulate(a: SimulateArgs) -> CliResult {
    let gen: SceneGenParams = match &a.gen_config {
        Some(p) => read_config(p)?,
        None => SceneGenParams::default(),
    };
    let noise: VoteNoise = match &a.noise_config {
        Some(p) => read_config(p)?,
        None => VoteNoise::zero(0),
    };
    gen.validate().map_err(Failure::usage_from)?;
    noise.validate().map_err(Failure::usage_from)?;
    let seed = a.seed.unwrap_or(gen.seed);
    announce("simulate", &(&a, &gen, &noise), Some(seed));
    std::fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    (0..a.count).into_par_iter().try_for_each(|i| -> CliResult {
        let (scene_seed, noise_seed) = match a.seed {
            Some(k) => (derive_seed(k, 2 * i as u64), derive_seed(k, 2 * i as u64 + 1)),
            None => (derive_seed(gen.seed, i as u64), derive_seed(noise.seed, i as u64)),
        };
        let (scene, boxes) = gen_scene(&SceneGenParams { seed: scene_seed, ..gen.clone() })?;
        let assoc = associate(&scene, &boxes, a.strategy);
        let votes = simulate_votes(&scene, &boxes, &assoc, &VoteNoise { seed: noise_seed, ..noise })?;
        save_scene_json(&a.out.join(format!("scene_{i:03}.json")), &scene, Some(&boxes))?;
        write_json(&a.out.join(format!("votes_{i:03}.json")), &votes, false)?;
        Ok(())
    })
}

fn cluster(a: ClusterArgs) -> CliResult {
    announce("cluster", &a, None);
    let m = method(a.algo, a.tau, a.radius)?;
    let votes = read_votes(&a.votes)?;
    let clustering = if a.per_semantic {
        cluster_per_semantic(&votes, &m)
    } else {
        m.run(&votes)
    };
    eprintln!("{} votes, {} clusters", votes.len(), clustering.len());
    Ok(write_json(&a.out, &clustering, false)?)
}

fn segment(a: SegmentArgs) -> CliResult {
    announce("segment", &a, Some(a.seed));
    if a.ply.is_some() && a.scene.is_none() {
        return Err(Failure::usage("--ply needs --scene"));
    }
    let votes = read_votes(&a.votes)?;
    let clustering: Clustering = crate::scene::parse_json_file(&a.clusters)?;
    let masks = back_project(&clustering, &votes)?;
    write_masks(&a.out, &masks)?;
    if let (Some(ply), Some(scene_path)) = (&a.ply, &a.scene) {
        let (scene, _) = load_scene(scene_path, SceneFormat::from_path(scene_path))?;
        check_masks(&masks, scene.len())?;
        write_masks_ply(ply, &scene, &masks, a.seed)?;
    }
    Ok(())
}

fn eval(a: EvalArgs) -> CliResult {
    announce("eval", &a, None);
    let thresholds = match &a.thresholds {
        Some(t) => parse_values(t, "thresholds")?,
        None => default_thresholds(),
    };
    let (scene, _) = load_scene(&a.scene, SceneFormat::from_path(&a.scene))?;
    let preds = read_masks(&a.pred)?;
    check_masks(&preds, scene.len())?;
    let report = if a.detection_proxy {
        detection_proxy(&preds, &scene, &thresholds)?
    } else {
        evaluate(&preds, &gt_masks(&scene)?, &thresholds, &scene.class_names)
    };
    print!("{}", report.to_table());
    Ok(write_json(&a.out, &report, true)?)
}

fn degrade(a: DegradeArgs) -> CliResult {
    announce("degrade", &a, Some(a.seed));
    let boxes = read_boxes(&a.boxes)?;
    let out = degrade_annotations(&boxes, a.drop, a.jitter, a.seed)?;
    eprintln!("{} of {} boxes kept", out.len(), boxes.len());
    Ok(write_boxes(&a.out, &out)?)
}

fn baseline(a: BaselineArgs) -> CliResult {
    announce("baseline", &a, None);
    if !(0.0..=1.0).contains(&a.nms) {
        return Err(Failure::usage("nms threshold must be in [0,1]"));
    }
    let (scene, _) = load_scene(&a.scene, SceneFormat::from_path(&a.scene))?;
    let votes = read_votes(&a.votes)?;
    if let Some(bad) = votes.expansion.iter().flatten().find(|&&p| p >= scene.len()) {
        return Err(Error::Schema(format!("votes reference point {bad} outside the scene")).into());
    }
    let masks = detector_baseline(&votes, &scene, a.nms, a.strategy);
    Ok(write_masks(&a.out, &masks)?)
}

fn pipeline(a: PipelineArgs) -> CliResult {
    let cfg = a.cluster.config()?;
    let mut noise: VoteNoise = match &a.noise {
        Some(p) => read_config(p)?,
        None => VoteNoise::zero(0),
    };
    if let Some(s) = a.seed {
        noise.seed = s;
    }
    noise.validate().map_err(Failure::usage_from)?;
    announce("pipeline", &(&a, &noise), Some(noise.seed));
    let (scene, boxes) = scene_with_boxes(&a.scene)?;
    let run = run_pipeline(&scene, &boxes, a.strategy, &noise, &cfg, &default_thresholds())?;
    eprintln!("undecided fraction: {}", run.undecided_fraction);
    print!("{}", run.report.to_table());
    if let Some(m) = &a.masks {
        write_masks(m, &run.masks)?;
    }
    Ok(write_json(&a.out, &run.report, true)?)
}

fn sweep_tau(a: SweepTauArgs) -> CliResult {
    announce("sweep-tau", &a, Some(a.seed));
    let taus = parse_values(&a.taus, "taus")?;
    if taus.iter().any(|&t| !(t > 0.0 && t < 1.0)) {
        return Err(Failure::usage("tau must be in (0,1)"));
    }
    let noise: VoteNoise = match &a.noise {
        Some(p) => read_config(p)?,
        None => VoteNoise::zero(0),
    };
    noise.validate().map_err(Failure::usage_from)?;
    let files = scene_files(&a.scene_dir)?;
    let thresholds = [0.25, 0.5];
    // per scene: (mAP25, mAP50) for each tau
    let per_scene: Vec<Vec<(f64, f64)>> = files
        .par_iter()
        .enumerate()
        .map(|(i, path)| -> CliResult<Vec<(f64, f64)>> {
            let (scene, boxes) = scene_with_boxes(path)?;
            let votes_path = votes_path_for(path);
            let votes = if votes_path.exists() {
                read_votes(&votes_path)?
            } else {
                let assoc = associate(&scene, &boxes, AssociationStrategy::DecidedOnly);
                let seed = derive_seed(a.seed, i as u64);
                simulate_votes(&scene, &boxes, &assoc, &VoteNoise { seed, ..noise })?
            };
            let gts = gt_masks(&scene)?;
            taus.iter()
                .map(|&tau| {
                    let cfg = SegmentConfig {
                        method: ClusterMethod::Nmc { tau },
                        per_semantic: a.per_semantic,
                        aggregate_segments: !a.no_aggregate,
                    };
                    let masks = votes_to_masks(&votes, scene.segment_ids.as_deref(), &cfg)?;
                    let r = evaluate(&masks, &gts, &thresholds, &scene.class_names);
                    Ok((r.map25, r.map50))
                })
                .collect()
        })
        .collect::<CliResult<_>>()?;
    let n = per_scene.len() as f64;
    let mut csv = String::from("tau,mAP25,mAP50\n");
    for (k, tau) in taus.iter().enumerate() {
        let m25 = per_scene.iter().map(|s| s[k].0).sum::<f64>() / n;
        let m50 = per_scene.iter().map(|s| s[k].1).sum::<f64>() / n;
        let _ = writeln!(csv, "{tau},{m25},{m50}");
    }
    write_text(&a.out, &csv)
}

fn sweep_degrade(a: SweepDegradeArgs) -> CliResult {
    announce("sweep-degrade", &a, Some(a.seed));
    let jitters = parse_values(&a.jitters, "jitters")?;
    let drops = parse_values(&a.drops, "drops")?;
    let files = scene_files(&a.scene_dir)?;
    let settings: Vec<(&str, f64, f64)> = jitters
        .iter()
        .map(|&j| ("jitter", 0.0, j))
        .chain(drops.iter().map(|&d| ("drop", d, 0.0)))
        .collect();
    let per_scene: Vec<Vec<(f64, f64)>> = files
        .par_iter()
        .enumerate()
        .map(|(i, path)| -> CliResult<Vec<(f64, f64)>> {
            let (scene, boxes) = scene_with_boxes(path)?;
            let seed = derive_seed(a.seed, i as u64);
            settings
                .iter()
                .map(|&(_, drop, jitter)| {
                    let degraded = degrade_annotations(&boxes, drop, jitter, seed)?;
                    let r = label_quality(&scene, &degraded, a.strategy, &[0.25, 0.5])?;
                    Ok((r.map25, r.map50))
                })
                .collect()
        })
        .collect::<CliResult<_>>()?;
    let n = per_scene.len() as f64;
    let mut csv = String::from("sweep,drop,jitter,mAP25,mAP50\n");
    for (k, (kind, drop, jitter)) in settings.iter().enumerate() {
        let m25 = per_scene.iter().map(|s| s[k].0).sum::<f64>() / n;
        let m50 = per_scene.iter().map(|s| s[k].1).sum::<f64>() / n;
        let _ = writeln!(csv, "{kind},{drop},{jitter},{m25},{m50}");
    }
    write_text(&a.out, &csv)
}
