//! `cvekit`: dataset generation, mesh labelling, density maps, statistics
//! and evaluation for crowd volume estimation.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use cvekit_core::anthro::{
    alignment_report, rescale_population, sample_population, AnthropometricModel, Gender, PersonSample,
    ScalingConfig, ALIGNMENT_CSV_HEADER,
};
use cvekit_core::data_model::{read_annotations, read_labels, write_vdm, FrameAnnotation, KvConfig, PartTaxonomy, TriMesh};
use cvekit_core::densitymap::{render_ppvdm, render_vdm, SmoothingConfig};
use cvekit_core::evalharness::{
    bins_to_csv, crowd_size_bins, dataset_stats, decoupling_eval, evaluate_full, filter_subset, oracular_estimator,
    DecouplingConfig, OverlapRule, PredictionSet, SubsetFilter,
};
use cvekit_core::meshvol::{is_watertight, split_parts, MeshVolError, DEFAULT_PLANE_TOL};
use cvekit_core::metrics::{mae_ppmae_scatter, EvalRecord, SCATTER_CSV_HEADER};
use cvekit_core::plot::{line_svg, scatter_svg, Axes};
use cvekit_core::scenegen::{
    build_humanoid, character_pools, derive_seed, generate_dataset, SceneConfig, SceneError,
};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

const VERSION: &str = env!("CARGO_PKG_VERSION");
/// Relative tolerance of the per-frame map mass check.
const CONSERVATION_TOL: f64 = 1e-6;

mod exit {
    pub const FAILURE: u8 = 1;
    pub const CONFIG: u8 = 2;
    pub const PLACEMENT: u8 = 3;
    pub const NOT_WATERTIGHT: u8 = 4;
    pub const CONSERVATION: u8 = 5;
}

#[derive(Parser)]
#[command(name = "cvekit", version, about = "Crowd volume estimation toolkit")]
struct Cli {
    /// Worker threads for per-frame parallelism (never changes outputs).
    #[arg(long, global = true, env = "CVE_WORKERS")]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic train/val/test dataset.
    Gen(GenArgs),
    /// Per-part volumes of a labelled OBJ mesh.
    Label(LabelArgs),
    /// Render one density map per annotated frame.
    Maps(MapsArgs),
    /// Score predictions against ground truth.
    Eval(EvalArgs),
    /// Dataset statistics or population alignment.
    Stats(StatsArgs),
    /// Draw an anthropometric population as CSV.
    Sample(SampleArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Scene config (key=value); defaults apply to missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Also write OBJ meshes, label sidecars and analytic part volumes for
    /// the first N characters.
    #[arg(long, default_value_t = 0)]
    dump_meshes: usize,
}

#[derive(Args)]
struct LabelArgs {
    #[arg(long)]
    mesh: PathBuf,
    /// Sidecar with one `vertex_index part_id` pair per line.
    #[arg(long)]
    labels: PathBuf,
    #[arg(long)]
    taxonomy: Option<PathBuf>,
    /// Boundary plane traversal tolerance, meters.
    #[arg(long, default_value_t = DEFAULT_PLANE_TOL)]
    tol: f64,
}

#[derive(Args)]
struct MapsArgs {
    #[arg(long)]
    annotations: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Per-part maps instead of whole-body maps.
    #[arg(long)]
    per_part: bool,
    #[arg(long, default_value_t = 4.0)]
    sigma: f64,
    /// Kernel half-width in multiples of sigma.
    #[arg(long, default_value_t = 4.0)]
    truncation: f64,
    #[arg(long)]
    taxonomy: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Protocol {
    Full,
    Decoupling,
    Bins,
    Scatter,
}

#[derive(Clone, Copy, ValueEnum)]
enum Baseline {
    /// Ground-truth count times the mean person volume.
    Oracular,
}

#[derive(Args)]
struct EvalArgs {
    /// Ground-truth annotations.
    #[arg(long)]
    gt: PathBuf,
    /// `frame_id,V_pred_dm3` CSV or a directory of `<frame_id>.vdm` maps.
    #[arg(long, required_unless_present = "baseline", conflicts_with = "baseline")]
    preds: Option<PathBuf>,
    /// Score a reference estimator instead of a prediction file.
    #[arg(long, value_enum)]
    baseline: Option<Baseline>,
    /// Annotations the baseline's mean person volume is taken from
    /// (defaults to the ground truth itself).
    #[arg(long, requires = "baseline")]
    mean_volume_from: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "full")]
    protocol: Protocol,
    /// all, s1 or s2.
    #[arg(long, default_value = "all")]
    subset: String,
    /// Extra tags a frame must carry (any of them).
    #[arg(long)]
    include: Vec<String>,
    /// Tags that remove a frame.
    #[arg(long)]
    exclude: Vec<String>,
    #[arg(long, default_value_t = cvekit_core::evalharness::DEFAULT_MIN_VOLUME_DM3)]
    min_volume: f64,
    /// Drop only pairs with IoU above this instead of any intersection.
    #[arg(long)]
    iou: Option<f64>,
    /// Crowd-size bin edges; `inf` is accepted as the last edge.
    #[arg(long, value_delimiter = ',', default_value = "1,5,10,15,20,25,inf")]
    edges: Vec<f64>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    taxonomy: Option<PathBuf>,
}

#[derive(Args)]
struct StatsArgs {
    /// Annotation file to summarise.
    #[arg(long, conflicts_with = "samples")]
    annotations: Option<PathBuf>,
    /// Population CSV as written by `cvekit sample`.
    #[arg(long, required_unless_present = "annotations")]
    samples: Option<PathBuf>,
    /// Second population to compare against `--samples`.
    #[arg(long, requires = "samples")]
    after: Option<PathBuf>,
    /// Anthropometric model whose per-gender log-normals are the target.
    #[arg(long)]
    target_config: Option<PathBuf>,
    #[arg(long, default_value_t = 50)]
    bins: usize,
    /// Also write the CSV to this file.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    taxonomy: Option<PathBuf>,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    model: Option<PathBuf>,
    /// Divide every log-space sigma by this factor.
    #[arg(long, default_value_t = 1.0)]
    narrow: f64,
    /// Rescale the drawn population with truncated-normal axis factors.
    #[arg(long)]
    rescale: bool,
    /// Scaling config (alpha/beta/gamma .mean/.std/.lower/.upper).
    #[arg(long, requires = "rescale")]
    scaling: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

/// An error with the process exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

trait WithCode<T> {
    fn code(self, code: u8) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> WithCode<T> for Result<T, E> {
    fn code(self, code: u8) -> Result<T, Failure> {
        self.map_err(|e| Failure { code, error: e.into() })
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.workers {
        builder = builder.num_threads(n);
    }
    let result = match builder.build() {
        Ok(pool) => pool.install(|| run(cli.command)),
        Err(e) => Err(Failure {
            code: exit::CONFIG,
            error: anyhow!("cannot start worker pool: {e}"),
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn run(command: Command) -> CmdResult {
    match command {
        Command::Gen(a) => cmd_gen(a),
        Command::Label(a) => cmd_label(a),
        Command::Maps(a) => cmd_maps(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Stats(a) => cmd_stats(a),
        Command::Sample(a) => cmd_sample(a),
    }
}

fn taxonomy(path: &Option<PathBuf>) -> Result<PartTaxonomy, Failure> {
    match path {
        Some(p) => PartTaxonomy::load(p)
            .with_context(|| format!("loading taxonomy {}", p.display()))
            .code(exit::CONFIG),
        None => Ok(PartTaxonomy::default()),
    }
}

fn annotations(path: &Path, tax: &PartTaxonomy) -> Result<Vec<FrameAnnotation>, Failure> {
    read_annotations(path, tax)
        .with_context(|| format!("reading annotations {}", path.display()))
        .code(exit::CONFIG)
}

fn write_file(path: &Path, contents: &str) -> CmdResult {
    fs::write(path, contents)
        .with_context(|| format!("writing {}", path.display()))
        .code(exit::FAILURE)
}

fn create_dir(path: &Path) -> CmdResult {
    fs::create_dir_all(path)
        .with_context(|| format!("creating {}", path.display()))
        .code(exit::FAILURE)
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

fn manifest(cfg: &SceneConfig, seed: u64) -> String {
    let canonical = format!("{}seed={seed}\n", cfg.to_config().to_canonical_string());
    let digest = Sha256::digest(canonical.as_bytes());
    let mut out = String::new();
    let _ = writeln!(out, "tool=cvekit {VERSION}");
    let _ = writeln!(out, "seed={seed}");
    let _ = writeln!(out, "config_sha256={}", hex(&digest));
    for (k, v) in cfg.to_config().iter() {
        let _ = writeln!(out, "config.{k}={v}");
    }
    out
}

fn cmd_gen(a: GenArgs) -> CmdResult {
    let cfg = match &a.config {
        Some(p) => SceneConfig::load(p)
            .with_context(|| format!("loading scene config {}", p.display()))
            .code(exit::CONFIG)?,
        None => SceneConfig::default(),
    };
    let summary = match generate_dataset(&cfg, a.seed, &a.out) {
        Ok(s) => s,
        Err(e @ SceneError::Placement { .. }) => return Err(e).code(exit::PLACEMENT),
        Err(e @ (SceneError::Config(_) | SceneError::Kv(_) | SceneError::Anthro(_) | SceneError::PoolTooSmall { .. })) => {
            return Err(e).code(exit::CONFIG)
        }
        Err(e) => return Err(e).code(exit::FAILURE),
    };
    write_file(&a.out.join("manifest.txt"), &manifest(&cfg, a.seed))?;
    if a.dump_meshes > 0 {
        dump_meshes(&cfg, a.seed, a.dump_meshes, &a.out.join("meshes"))?;
    }
    for (split, n) in &summary.frames {
        println!("{split}: {n} frames");
    }
    println!("persons: {}", summary.persons);
    Ok(())
}

fn dump_meshes(cfg: &SceneConfig, seed: u64, count: usize, dir: &Path) -> CmdResult {
    create_dir(dir)?;
    let pools = character_pools(cfg, seed).code(exit::CONFIG)?;
    let tax = PartTaxonomy::default();
    for (i, c) in pools.iter().flat_map(|p| &p.characters).take(count).enumerate() {
        let body = build_humanoid(&c.sample, derive_seed(seed, "dump", i as u64)).code(exit::FAILURE)?;
        body.mesh.write_obj(dir.join(format!("{}.obj", c.id))).code(exit::FAILURE)?;
        let labels = body.mesh.vertex_labels.as_deref().unwrap_or_default();
        write_file(
            &dir.join(format!("{}.labels", c.id)),
            &cvekit_core::data_model::labels_to_string(labels),
        )?;
        let mut csv = String::from("part_id,name,volume_dm3\n");
        for (p, v) in &body.part_volumes_dm3 {
            let _ = writeln!(csv, "{p},{},{v}", tax.name(*p).unwrap_or(""));
        }
        let _ = writeln!(csv, "total,,{}", body.total_volume_dm3);
        write_file(&dir.join(format!("{}.parts.csv", c.id)), &csv)?;
    }
    Ok(())
}

fn cmd_label(a: LabelArgs) -> CmdResult {
    let tax = taxonomy(&a.taxonomy)?;
    let mesh = TriMesh::read_obj(&a.mesh)
        .with_context(|| format!("reading mesh {}", a.mesh.display()))
        .code(exit::CONFIG)?;
    let labels = read_labels(&a.labels, mesh.vertices.len())
        .with_context(|| format!("reading labels {}", a.labels.display()))
        .code(exit::CONFIG)?;
    let report = is_watertight(&mesh);
    if !report.watertight {
        let shown: Vec<String> = report.offending_edges.iter().take(10).map(|(a, b)| format!("({a},{b})")).collect();
        return Err(anyhow!(
            "mesh is not watertight: {} offending edges, first: {}",
            report.offending_edges.len(),
            shown.join(" ")
        ))
        .code(exit::NOT_WATERTIGHT);
    }
    let mesh = mesh.with_labels(labels).code(exit::CONFIG)?;
    let volumes = match split_parts(&mesh, &tax, a.tol) {
        Ok(v) => v,
        Err(e @ MeshVolError::NotWatertight { .. }) => return Err(e).code(exit::NOT_WATERTIGHT),
        Err(e @ MeshVolError::UnknownPart(_)) => return Err(e).code(exit::CONFIG),
        Err(e) => return Err(e).code(exit::FAILURE),
    };
    let mut csv = String::from("part_id,name,volume_dm3\n");
    for (p, v) in &volumes.parts {
        let _ = writeln!(csv, "{p},{},{v}", tax.name(*p).unwrap_or(""));
    }
    let _ = writeln!(csv, "total,,{}", volumes.total);
    print!("{csv}");
    Ok(())
}

struct Conservation {
    frame_id: String,
    expected: f64,
    got: f64,
}

impl Conservation {
    fn rel_error(&self) -> f64 {
        if self.expected == 0.0 {
            self.got.abs()
        } else {
            (self.got - self.expected).abs() / self.expected
        }
    }

    fn ok(&self) -> bool {
        self.rel_error() <= CONSERVATION_TOL
    }
}

fn cmd_maps(a: MapsArgs) -> CmdResult {
    let tax = taxonomy(&a.taxonomy)?;
    let frames = annotations(&a.annotations, &tax)?;
    let cfg = SmoothingConfig {
        sigma_px: a.sigma,
        truncation_radius: a.truncation,
    };
    cfg.validate().code(exit::CONFIG)?;
    create_dir(&a.out)?;
    let checks: Vec<Result<Conservation, Failure>> = frames
        .par_iter()
        .map(|f| {
            let map = if a.per_part {
                render_ppvdm(f, &tax, &cfg)
            } else {
                render_vdm(f, &cfg)
            }
            .with_context(|| format!("frame {}", f.frame_id))
            .code(exit::CONFIG)?;
            write_vdm(&map, a.out.join(format!("{}.vdm", f.frame_id))).code(exit::FAILURE)?;
            // Check what was stored, after binary32 rounding.
            Ok(Conservation {
                frame_id: f.frame_id.clone(),
                expected: f.total_volume_dm3(),
                got: map.quantized().sum(),
            })
        })
        .collect();
    let checks: Vec<Conservation> = checks.into_iter().collect::<Result<_, _>>()?;
    let mut csv = String::from("frame_id,expected_dm3,map_sum_dm3,rel_error,ok\n");
    for c in &checks {
        let _ = writeln!(csv, "{},{},{},{},{}", c.frame_id, c.expected, c.got, c.rel_error(), c.ok());
    }
    write_file(&a.out.join("conservation.csv"), &csv)?;
    let failed: Vec<&str> = checks.iter().filter(|c| !c.ok()).map(|c| c.frame_id.as_str()).collect();
    let worst = checks.iter().map(Conservation::rel_error).fold(0.0, f64::max);
    println!(
        "{} maps, conservation {}: max relative error {worst:e}, {} failing",
        checks.len(),
        if failed.is_empty() { "ok" } else { "FAILED" },
        failed.len()
    );
    if !failed.is_empty() {
        return Err(anyhow!("mass conservation failed for frames: {}", failed.join(", "))).code(exit::CONSERVATION);
    }
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> CmdResult {
    let tax = taxonomy(&a.taxonomy)?;
    let all = annotations(&a.gt, &tax)?;
    let mut filter = SubsetFilter::preset(&a.subset)
        .ok_or_else(|| anyhow!("unknown subset {:?}; use all, s1 or s2", a.subset))
        .code(exit::CONFIG)?;
    filter.include.extend(a.include.iter().cloned());
    filter.exclude.extend(a.exclude.iter().cloned());
    let gt = filter_subset(&all, &filter);
    if gt.is_empty() {
        return Err(anyhow!("no frames left after subset filtering")).code(exit::CONFIG);
    }
    let preds = match (&a.preds, a.baseline) {
        (Some(p), _) => {
            if !p.exists() {
                return Err(anyhow!("predictions {} not found", p.display())).code(exit::CONFIG);
            }
            PredictionSet::load(p, &gt)
                .with_context(|| format!("loading predictions {}", p.display()))
                .code(exit::CONFIG)?
        }
        (None, Some(Baseline::Oracular)) => {
            let source = match &a.mean_volume_from {
                Some(p) => annotations(p, &tax)?,
                None => gt.clone(),
            };
            let stats = dataset_stats(&source).code(exit::CONFIG)?;
            oracular_estimator(&gt, stats.mean_person_volume_dm3)
        }
        (None, None) => return Err(anyhow!("either --preds or --baseline is required")).code(exit::CONFIG),
    };
    create_dir(&a.out)?;
    let config_error = |e: cvekit_core::evalharness::EvalError| {
        use cvekit_core::evalharness::EvalError as E;
        let code = match e {
            E::MissingPredictions(_) | E::SizeMismatch { .. } | E::NotAMap(_) | E::BadEdges(_) => exit::CONFIG,
            _ => exit::FAILURE,
        };
        Failure { code, error: e.into() }
    };
    match a.protocol {
        Protocol::Full => {
            let report = evaluate_full(&gt, &preds).map_err(config_error)?;
            let csv = report.to_csv();
            write_file(&a.out.join("report.csv"), &csv)?;
            print!("{csv}");
        }
        Protocol::Decoupling => {
            let cfg = DecouplingConfig {
                min_volume_dm3: a.min_volume,
                overlap: a.iou.map_or(OverlapRule::AnyIntersection, OverlapRule::IouAbove),
            };
            let report = decoupling_eval(&gt, &preds, &cfg).map_err(config_error)?;
            let csv = report.to_csv();
            write_file(&a.out.join("report.csv"), &csv)?;
            print!("{csv}");
        }
        Protocol::Bins => {
            let bins = crowd_size_bins(&gt, &preds, &a.edges).map_err(config_error)?;
            let csv = bins_to_csv(&bins);
            write_file(&a.out.join("bins.csv"), &csv)?;
            let overall = evaluate_full(&gt, &preds).map_err(config_error)?;
            write_file(&a.out.join("report.csv"), &overall.to_csv())?;
            let curve: Vec<(f64, f64)> = bins
                .iter()
                .filter_map(|b| b.report.map(|r| (b.lo, r.mae)))
                .collect();
            let axes = Axes {
                title: "Error vs crowd size".into(),
                x_label: "persons per frame (bin start)".into(),
                y_label: "MAE (dm3)".into(),
            };
            write_file(&a.out.join("bins.svg"), &line_svg(&curve, &axes))?;
            print!("{csv}");
        }
        Protocol::Scatter => {
            let records = cvekit_core::evalharness::build_records(&gt, &preds).map_err(config_error)?;
            let (kept, empty): (Vec<EvalRecord>, Vec<EvalRecord>) = records.into_iter().partition(|r| r.n_persons > 0);
            if !empty.is_empty() {
                log::warn!("{} empty frames left out of the scatter", empty.len());
            }
            let points = mae_ppmae_scatter(&kept).code(exit::FAILURE)?;
            let mut csv = format!("{SCATTER_CSV_HEADER}\n");
            for p in &points {
                let _ = writeln!(csv, "{}", p.csv_row());
            }
            write_file(&a.out.join("report.csv"), &csv)?;
            let axes = Axes {
                title: "MAE vs PP-MAE per frame".into(),
                x_label: "absolute error (dm3)".into(),
                y_label: "per-person absolute error (dm3)".into(),
            };
            let xy: Vec<(f64, f64)> = points.iter().map(|p| (p.ae, p.pp_ae)).collect();
            write_file(&a.out.join("scatter.svg"), &scatter_svg(&xy, &axes))?;
            println!("{} scatter points", points.len());
        }
    }
    Ok(())
}

const SAMPLE_CSV_HEADER: &str = "gender,height_m,mass_kg,bmi,volume_dm3";

fn samples_to_csv(samples: &[PersonSample]) -> String {
    let mut out = format!("{SAMPLE_CSV_HEADER}\n");
    for s in samples {
        let _ = writeln!(out, "{},{},{},{},{}", s.gender, s.height_m, s.mass_kg, s.bmi, s.volume_dm3);
    }
    out
}

fn read_samples(path: &Path) -> anyhow::Result<Vec<PersonSample>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        let bad = || anyhow!("{}:{}: expected {SAMPLE_CSV_HEADER}", path.display(), i + 1);
        if f.len() != 5 {
            return Err(bad());
        }
        let gender = match f[0] {
            "male" => Gender::Male,
            "female" => Gender::Female,
            _ => return Err(bad()),
        };
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
        out.push(PersonSample {
            gender,
            height_m: num(f[1])?,
            mass_kg: num(f[2])?,
            bmi: num(f[3])?,
            volume_dm3: num(f[4])?,
        });
    }
    Ok(out)
}

fn load_model(path: &Option<PathBuf>) -> Result<AnthropometricModel, Failure> {
    match path {
        Some(p) => {
            let cfg = KvConfig::load(p).with_context(|| format!("loading {}", p.display())).code(exit::CONFIG)?;
            AnthropometricModel::from_config(&cfg).code(exit::CONFIG)
        }
        None => Ok(AnthropometricModel::default()),
    }
}

fn cmd_stats(a: StatsArgs) -> CmdResult {
    let csv = if let Some(path) = &a.annotations {
        let tax = taxonomy(&a.taxonomy)?;
        let frames = annotations(path, &tax)?;
        dataset_stats(&frames).code(exit::CONFIG)?.to_csv()
    } else {
        let path = a.samples.as_ref().expect("clap requires samples");
        let before = read_samples(path).code(exit::CONFIG)?;
        if before.is_empty() {
            return Err(anyhow!("{} has no samples", path.display())).code(exit::CONFIG);
        }
        let after = match &a.after {
            Some(p) => read_samples(p).code(exit::CONFIG)?,
            None => before.clone(),
        };
        let target = load_model(&a.target_config)?;
        let mut csv = format!("{ALIGNMENT_CSV_HEADER}\n");
        for gender in [Gender::Male, Gender::Female] {
            let pick = |s: &[PersonSample], f: fn(&PersonSample) -> f64| -> Vec<f64> {
                s.iter().filter(|p| p.gender == gender).map(f).collect()
            };
            let g = target.gender(gender);
            for (feature, params, get) in [
                ("height", g.height, (|p: &PersonSample| p.height_m) as fn(&PersonSample) -> f64),
                ("mass", g.mass, |p: &PersonSample| p.mass_kg),
            ] {
                let (b, af) = (pick(&before, get), pick(&after, get));
                if b.len() < 2 || af.len() < 2 {
                    continue;
                }
                let r = alignment_report(&b, &af, &params, a.bins).code(exit::CONFIG)?;
                let _ = writeln!(csv, "{}", r.csv_row(&format!("kl_{feature}_{gender}")));
            }
        }
        csv
    };
    if let Some(out) = &a.out {
        write_file(out, &csv)?;
    }
    print!("{csv}");
    Ok(())
}

fn cmd_sample(a: SampleArgs) -> CmdResult {
    let mut model = load_model(&a.model)?;
    if !(a.narrow.is_finite() && a.narrow > 0.0) {
        return Err(anyhow!("--narrow must be positive")).code(exit::CONFIG);
    }
    for g in [&mut model.male, &mut model.female] {
        g.height.sigma /= a.narrow;
        g.mass.sigma /= a.narrow;
    }
    let mut samples = sample_population(&model, a.n, a.seed).code(exit::CONFIG)?;
    if a.rescale {
        let scaling = match &a.scaling {
            Some(p) => {
                let cfg = KvConfig::load(p).with_context(|| format!("loading {}", p.display())).code(exit::CONFIG)?;
                ScalingConfig::from_config(&cfg).code(exit::CONFIG)?
            }
            None => ScalingConfig::default(),
        };
        samples = rescale_population(&samples, &scaling, model.body_density, derive_seed(a.seed, "rescale", 0))
            .code(exit::CONFIG)?;
    }
    write_file(&a.out, &samples_to_csv(&samples))?;
    println!("{} samples written to {}", samples.len(), a.out.display());
    Ok(())
}
