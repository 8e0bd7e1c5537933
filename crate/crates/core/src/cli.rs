//! The `dermalight` command line.
//!
//! Every subcommand maps onto one library operation. Settings resolve as
//! flags > `--config` file > built-in defaults. The config file is flat
//! `key=value` text whose keys are long flag names without the dashes;
//! `#` starts a comment. Keys that belong to another subcommand are
//! ignored, keys that belong to none are rejected.
//!
//! Exit codes: 0 success, 2 bad input or configuration, 3 failed
//! computation. `DERMALIGHT_THREADS` caps the worker pool; outputs do not
//! depend on it. Each run holds a lock file in its output directory and
//! writes a `*.run.json` sidecar with the resolved config, input and output
//! hashes and wall time.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{ArgAction, Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::colorimetry::{spectrum_to_rgb, ColorSpace, Illuminant};
use crate::error::{Error, Result};
use crate::formats::{self, PngDepth};
use crate::mapops::{self, EditSpec, Inverter, Renderer};
use crate::neural::{train_with, LossWeights, TrainConfig};
use crate::optics::{SkinParams, WavelengthGrid};
use crate::space::{build_lut_with, gen_dataset, AlbedoLut, AlbedoSource, ParamWarp, Sampler, AXES};
use crate::transport::{simulate_spectrum, SimConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_COMPUTE: i32 = 3;

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "DERMALIGHT_THREADS";

const LOCK_FILE: &str = ".dermalight.lock";

#[derive(Debug, Parser)]
#[command(name = "dermalight", version, about = "Biophysical skin albedo: simulate, tabulate, learn, invert and edit")]
#[command(args_override_self = true, propagate_version = true)]
pub struct Cli {
    /// Flat key=value file supplying defaults for any long flag.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one reflectance spectrum; writes CSV and prints linear RGB.
    Simulate(SimulateArgs),
    /// Tabulate RGB albedo over a regular grid of the warped parameter space.
    BuildLut(BuildLutArgs),
    /// Draw (parameters, albedo) training pairs.
    GenDataset(GenDatasetArgs),
    /// Train the encoder/decoder pair on a dataset.
    Train(TrainArgs),
    /// Invert an albedo image into parameter maps.
    Invert(InvertArgs),
    /// Render albedo from parameter maps.
    Reconstruct(ReconstructArgs),
    /// Apply biophysical edits to parameter maps.
    Edit(EditArgs),
    /// Compare two images.
    Metrics(MetricsArgs),
    /// Export the embedded spectral tables and colour matrices as CSV.
    ExportData(ExportDataArgs),
}

/// Transport settings shared by every simulating subcommand.
#[derive(Debug, Args)]
pub struct SimArgs {
    /// Photons per wavelength band.
    #[arg(long, default_value_t = 1_000_000)]
    pub photons: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Weight below which Russian roulette is played.
    #[arg(long, default_value_t = 1e-4)]
    pub roulette_threshold: f64,
    /// Survival probability of a roulette round.
    #[arg(long, default_value_t = 0.1)]
    pub roulette_survival: f64,
    /// Interaction cap per photon.
    #[arg(long, default_value_t = SimConfig::default().max_events)]
    pub max_events: u64,
    /// Split photon weight by Fresnel reflectance at the surface.
    #[arg(long, default_value_t = true, action = ArgAction::Set)]
    pub fresnel: bool,
    /// `d65` or `file:<csv>` (wavelength_nm, power).
    #[arg(long, default_value = "d65")]
    pub illuminant: String,
}

impl SimArgs {
    fn sim_config(&self) -> SimConfig {
        SimConfig {
            photons_per_band: self.photons,
            roulette_threshold: self.roulette_threshold,
            roulette_survival: self.roulette_survival,
            seed: self.seed,
            fresnel_exit: self.fresnel,
            max_events: self.max_events,
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Melanosome volume fraction.
    #[arg(long)]
    pub vm: f64,
    /// Blood volume fraction.
    #[arg(long)]
    pub vb: f64,
    /// Epidermal thickness in micrometres.
    #[arg(long)]
    pub t: f64,
    /// Eumelanin fraction of melanin.
    #[arg(long)]
    pub phim: f64,
    /// Deoxygenated fraction of haemoglobin.
    #[arg(long)]
    pub phih: f64,
    #[command(flatten)]
    pub sim: SimArgs,
    /// Spectrum CSV (wavelength_nm, reflectance, stderr).
    #[arg(long, default_value = "spectrum.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BuildLutArgs {
    /// Nodes per axis: melanin, blood, thickness, melanin ratio, haemoglobin ratio.
    #[arg(long, default_value = "8,8,3,3,3")]
    pub res: String,
    #[command(flatten)]
    pub sim: SimArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SourceKind {
    /// Full spectral Monte Carlo per record.
    Mc,
    /// Multilinear interpolation in a LUT.
    Lut,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SamplerKind {
    Halton,
    Uniform,
}

#[derive(Debug, Args)]
pub struct GenDatasetArgs {
    /// Total records; a fifth of them form the uniform validation split.
    #[arg(long)]
    pub n: usize,
    #[arg(long, value_enum, default_value_t = SourceKind::Lut)]
    pub source: SourceKind,
    /// LUT to interpolate when `--source lut`.
    #[arg(long)]
    pub lut: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = SamplerKind::Halton)]
    pub sampler: SamplerKind,
    #[command(flatten)]
    pub sim: SimArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Weights file receiving the best-validation networks; the final-epoch
    /// networks go to `<out>.last`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 400)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub lr: f64,
    #[arg(long, default_value_t = 4096)]
    pub batch: usize,
    /// Hidden layer width of both networks.
    #[arg(long, default_value_t = 70)]
    pub width: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.9)]
    pub beta1: f64,
    #[arg(long, default_value_t = 0.999)]
    pub beta2: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub eps: f64,
    #[arg(long, default_value_t = 1.0)]
    pub w_param: f64,
    #[arg(long, default_value_t = 1.0)]
    pub w_albedo: f64,
    #[arg(long, default_value_t = 1.0)]
    pub w_cycle: f64,
    /// Per-epoch loss CSV.
    #[arg(long)]
    pub history: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Lut,
    Neural,
}

/// Model selection shared by `invert` and `reconstruct`.
#[derive(Debug, Args)]
pub struct ModelArgs {
    #[arg(long, value_enum)]
    pub method: Method,
    /// LUT file for `--method lut`.
    #[arg(long)]
    pub lut: Option<PathBuf>,
    /// Weights file for `--method neural`.
    #[arg(long)]
    pub weights: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InvertArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Albedo image: PFM (linear) or PNG (sRGB).
    #[arg(long)]
    pub image: PathBuf,
    /// Skin mask; texels below 0.5 are skipped.
    #[arg(long)]
    pub mask: Option<PathBuf>,
    /// Output directory for the parameter maps.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Parameter map directory.
    #[arg(long)]
    pub maps: PathBuf,
    /// Image supplying the texels outside the mask.
    #[arg(long)]
    pub passthrough: Option<PathBuf>,
    /// Output image; PFM or PNG by extension.
    #[arg(long)]
    pub out: PathBuf,
    /// Bits per channel of PNG output.
    #[arg(long, value_enum, default_value_t = Depth::Sixteen)]
    pub png_depth: Depth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Depth {
    #[value(name = "8")]
    Eight,
    #[value(name = "16")]
    Sixteen,
}

#[derive(Debug, Args)]
pub struct EditArgs {
    #[arg(long)]
    pub maps: PathBuf,
    /// Named edit: tan, flush, thin, thicken, vitiligo, deoxygenate, oxygenate.
    #[arg(long)]
    pub preset: Option<String>,
    /// Extra `axis:op:value` edit (scale, set or offset); repeatable.
    #[arg(long = "op", action = ArgAction::Append)]
    pub ops: Vec<String>,
    /// Restricts every edit to this mask.
    #[arg(long)]
    pub mask: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
    #[arg(long)]
    pub mask: Option<PathBuf>,
    /// Amplification of the error image.
    #[arg(long, default_value_t = 1.0)]
    pub gain: f64,
    /// Writes `gain · |a - b|` as an image.
    #[arg(long)]
    pub error_map: Option<PathBuf>,
    /// Writes the metrics as JSON in addition to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExportDataArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "d65")]
    pub illuminant: String,
}

/// Parses `args` (program name first), runs the subcommand and returns the
/// process exit code. Errors are reported on stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let (argv, from_file) = match merge_config(argv) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let matches = match Cli::command().try_get_matches_from(&argv) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return EXIT_CONFIG;
        }
    };
    let resolved = resolved_config(&matches, &from_file);
    let pool = match thread_pool() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    match pool.install(|| execute(&cli.command, resolved)) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Maps a library error to the process exit code. Unreadable or corrupt
/// inputs count as configuration errors.
pub fn exit_code(e: &Error) -> i32 {
    let bad_input = matches!(e, Error::Format { .. } | Error::Version { .. } | Error::HashMismatch { .. });
    if e.is_config() || bad_input {
        EXIT_CONFIG
    } else {
        EXIT_COMPUTE
    }
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::Config(format!("{THREADS_ENV}={v:?} is not a positive integer")))?;
        b = b.num_threads(n);
    }
    b.build().map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}

/// Finds `--config` and the subcommand in raw arguments.
fn scan(argv: &[OsString]) -> (Option<PathBuf>, Option<(usize, String)>) {
    let mut config = None;
    let mut sub = None;
    let mut i = 1;
    while i < argv.len() {
        let a = argv[i].to_string_lossy();
        if a == "--config" {
            config = argv.get(i + 1).map(PathBuf::from);
            i += 2;
            continue;
        }
        if let Some(p) = a.strip_prefix("--config=") {
            config = Some(PathBuf::from(p));
        } else if sub.is_none() && !a.starts_with('-') {
            sub = Some((i, a.into_owned()));
        }
        i += 1;
    }
    (config, sub)
}

/// Parses a flat `key=value` file.
pub fn parse_config_file(path: &Path) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("{}:{}: expected key=value", path.display(), n + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(Error::Config(format!("{}:{}: empty key", path.display(), n + 1)));
        }
        out.push((k.replace('_', "-"), v.to_string()));
    }
    Ok(out)
}

fn long_flags(cmd: &clap::Command) -> Vec<String> {
    cmd.get_arguments().filter_map(|a| a.get_long().map(str::to_string)).collect()
}

/// Splices config-file values in front of the user's flags. With
/// `args_override_self`, later occurrences win, which gives flags
/// precedence over the file.
fn merge_config(argv: Vec<OsString>) -> Result<(Vec<OsString>, Vec<String>)> {
    let (Some(path), Some((pos, sub))) = scan(&argv) else {
        return Ok((argv, Vec::new()));
    };
    let entries = parse_config_file(&path)?;
    let root = Cli::command();
    let Some(sub_cmd) = root.find_subcommand(&sub) else {
        // Let clap report the unknown subcommand.
        return Ok((argv, Vec::new()));
    };
    let here = long_flags(sub_cmd);
    let anywhere: Vec<String> = root.get_subcommands().flat_map(long_flags).collect();
    let mut injected = Vec::new();
    let mut keys = Vec::new();
    for (k, v) in entries {
        if k == "config" || !anywhere.contains(&k) {
            return Err(Error::Config(format!("{}: unknown key `{k}`", path.display())));
        }
        if here.contains(&k) {
            injected.push(OsString::from(format!("--{k}")));
            injected.push(OsString::from(v));
            keys.push(k);
        }
    }
    let mut out: Vec<OsString> = argv[..=pos].to_vec();
    out.extend(injected);
    out.extend(argv[pos + 1..].iter().cloned());
    let user: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    keys.retain(|k| !user.iter().any(|u| *u == format!("--{k}") || u.starts_with(&format!("--{k}="))));
    Ok((out, keys))
}

/// Resolved value and origin of every argument of the chosen subcommand.
fn resolved_config(matches: &clap::ArgMatches, from_file: &[String]) -> BTreeMap<String, Value> {
    let mut out = BTreeMap::new();
    let Some((_, sub)) = matches.subcommand() else {
        return out;
    };
    for id in sub.ids() {
        let key = id.as_str();
        let Some(raw) = sub.get_raw(key) else { continue };
        let values: Vec<String> = raw.map(|v| v.to_string_lossy().into_owned()).collect();
        let source = match sub.value_source(key) {
            Some(clap::parser::ValueSource::DefaultValue) => "default",
            _ if from_file.iter().any(|k| k.replace('-', "_") == key) => "config",
            _ => "flag",
        };
        out.insert(key.to_string(), json!({ "value": values.join(","), "source": source }));
    }
    out
}

/// Exclusive hold on a run directory, released on drop.
#[derive(Debug)]
pub struct RunLock {
    path: PathBuf,
}

impl RunLock {
    pub fn acquire(dir: &Path) -> Result<RunLock> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(LOCK_FILE);
        match std::fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(RunLock { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::Config(format!(
                "{} exists: another dermalight run is using this directory",
                path.display()
            ))),
            Err(e) => Err(Error::io(&path, e)),
        }
    }
}

impl Drop for RunLock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.path);
    }
}

fn parent_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

fn require_input(path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::Config(format!("input {} does not exist", path.display())))
    }
}

fn illuminant(spec: &str) -> Result<Illuminant> {
    Illuminant::from_spec(spec).map_err(|e| match e {
        Error::Config(_) => e,
        other => Error::Config(other.to_string()),
    })
}

/// Bookkeeping for the run-metadata sidecar.
struct Run {
    command: &'static str,
    config: BTreeMap<String, Value>,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    extra: BTreeMap<String, Value>,
    start: Instant,
}

impl Run {
    fn new(command: &'static str, config: BTreeMap<String, Value>) -> Self {
        Run {
            command,
            config,
            inputs: Vec::new(),
            outputs: Vec::new(),
            extra: BTreeMap::new(),
            start: Instant::now(),
        }
    }

    fn input(&mut self, p: &Path) -> Result<()> {
        require_input(p)?;
        self.inputs.push(p.to_path_buf());
        Ok(())
    }

    fn hashes(paths: &[PathBuf]) -> Result<BTreeMap<String, Value>> {
        let mut out = BTreeMap::new();
        for p in paths {
            let files: Vec<PathBuf> = if p.is_dir() {
                let mut v: Vec<PathBuf> = std::fs::read_dir(p)
                    .map_err(|e| Error::io(p, e))?
                    .filter_map(|e| e.ok().map(|e| e.path()))
                    .filter(|f| f.is_file() && !f.ends_with(LOCK_FILE) && !f.to_string_lossy().ends_with(".run.json"))
                    .collect();
                v.sort();
                v
            } else {
                vec![p.clone()]
            };
            for f in files {
                out.insert(f.display().to_string(), Value::from(formats::file_sha256(&f)?));
            }
        }
        Ok(out)
    }

    /// Writes `<out>.run.json`, or `<dir>/run.json` for directory outputs.
    fn finish(self, sidecar: &Path) -> Result<()> {
        let doc = json!({
            "command": self.command,
            "version": env!("CARGO_PKG_VERSION"),
            "config": self.config,
            "threads": rayon::current_num_threads(),
            "inputs": Run::hashes(&self.inputs)?,
            "outputs": Run::hashes(&self.outputs)?,
            "results": self.extra,
            "wall_time_s": self.start.elapsed().as_secs_f64(),
        });
        let text = serde_json::to_string_pretty(&doc).expect("run metadata serializes");
        formats::write_atomic(sidecar, text.as_bytes())
    }
}

fn file_sidecar(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(OsString::from).unwrap_or_default();
    name.push(".run.json");
    out.with_file_name(name)
}

fn execute(cmd: &Command, config: BTreeMap<String, Value>) -> Result<()> {
    match cmd {
        Command::Simulate(a) => cmd_simulate(a, Run::new("simulate", config)),
        Command::BuildLut(a) => cmd_build_lut(a, Run::new("build-lut", config)),
        Command::GenDataset(a) => cmd_gen_dataset(a, Run::new("gen-dataset", config)),
        Command::Train(a) => cmd_train(a, Run::new("train", config)),
        Command::Invert(a) => cmd_invert(a, Run::new("invert", config)),
        Command::Reconstruct(a) => cmd_reconstruct(a, Run::new("reconstruct", config)),
        Command::Edit(a) => cmd_edit(a, Run::new("edit", config)),
        Command::Metrics(a) => cmd_metrics(a, Run::new("metrics", config)),
        Command::ExportData(a) => cmd_export_data(a, Run::new("export-data", config)),
    }
}

fn cmd_simulate(a: &SimulateArgs, mut run: Run) -> Result<()> {
    let p = SkinParams::new(a.vm, a.vb, a.t, a.phim, a.phih);
    p.check_physical().map_err(|e| Error::Config(e.to_string()))?;
    let cfg = a.sim.sim_config();
    cfg.validate()?;
    let ill = illuminant(&a.sim.illuminant)?;
    let _lock = RunLock::acquire(&parent_dir(&a.out))?;
    let s = simulate_spectrum(&p, &cfg)?;
    let conv = spectrum_to_rgb(&s.reflectance, &ColorSpace::new(&ill));
    formats::write_spectrum_csv(&a.out, &s.reflectance, Some(&s.stderr))?;
    let rgb = conv.rgb.to_array();
    println!("linear_rgb {:.6} {:.6} {:.6}", rgb[0], rgb[1], rgb[2]);
    if conv.clamped {
        log::warn!("RGB clamped by up to {:.2e}", conv.max_clamp);
    }
    run.outputs.push(a.out.clone());
    run.extra.insert("linear_rgb".into(), json!(rgb));
    run.extra.insert(
        "bands_nm".into(),
        json!([WavelengthGrid::wavelength(0), WavelengthGrid::wavelength(crate::BANDS - 1)]),
    );
    run.finish(&file_sidecar(&a.out))
}

/// Parses `8,8,3,3,3`.
pub fn parse_resolutions(s: &str) -> Result<[usize; AXES]> {
    let v: Vec<usize> = s
        .split(',')
        .map(|x| x.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Config(format!("--res `{s}` is not a comma-separated list of integers")))?;
    v.try_into()
        .map_err(|v: Vec<usize>| Error::Config(format!("--res needs {AXES} values, got {}", v.len())))
}

fn cmd_build_lut(a: &BuildLutArgs, mut run: Run) -> Result<()> {
    let res = parse_resolutions(&a.res)?;
    let cfg = a.sim.sim_config();
    cfg.validate()?;
    let ill = illuminant(&a.sim.illuminant)?;
    let _lock = RunLock::acquire(&parent_dir(&a.out))?;
    let lut = build_lut_with(res, &cfg, &ParamWarp::default(), &ill)?;
    formats::save_lut(&lut, &a.out)?;
    let dups = lut.duplicate_nodes().len();
    println!("nodes {} duplicates {dups}", lut.len());
    run.outputs.push(a.out.clone());
    run.extra.insert("nodes".into(), json!(lut.len()));
    run.extra.insert("duplicate_nodes".into(), json!(dups));
    run.finish(&file_sidecar(&a.out))
}

fn cmd_gen_dataset(a: &GenDatasetArgs, mut run: Run) -> Result<()> {
    let sampler = match a.sampler {
        SamplerKind::Halton => Sampler::Halton,
        SamplerKind::Uniform => Sampler::Uniform { seed: a.sim.seed },
    };
    let lut;
    let source = match a.source {
        SourceKind::Lut => {
            let path = a.lut.as_ref().ok_or_else(|| Error::Config("--source lut needs --lut".into()))?;
            run.input(path)?;
            lut = formats::load_lut(path)?;
            AlbedoSource::LutInterp(&lut)
        }
        SourceKind::Mc => {
            let cfg = a.sim.sim_config();
            cfg.validate()?;
            AlbedoSource::MonteCarlo {
                cfg,
                illuminant: illuminant(&a.sim.illuminant)?,
                warp: ParamWarp::default(),
            }
        }
    };
    let _lock = RunLock::acquire(&parent_dir(&a.out))?;
    let ds = gen_dataset(a.n, &source, &sampler, a.sim.seed)?;
    formats::save_dataset(&ds, &a.out)?;
    println!(
        "records {} train {} val {}",
        ds.len(),
        ds.count(crate::space::Split::Train),
        ds.count(crate::space::Split::Val)
    );
    run.outputs.push(a.out.clone());
    run.finish(&file_sidecar(&a.out))
}

fn cmd_train(a: &TrainArgs, mut run: Run) -> Result<()> {
    let cfg = TrainConfig {
        learning_rate: a.lr,
        batch_size: a.batch,
        epochs: a.epochs,
        beta1: a.beta1,
        beta2: a.beta2,
        epsilon: a.eps,
        seed: a.seed,
        hidden_width: a.width,
        loss_weights: LossWeights { param: a.w_param, albedo: a.w_albedo, cycle: a.w_cycle },
    };
    cfg.validate()?;
    run.input(&a.dataset)?;
    let ds = formats::load_dataset(&a.dataset)?;
    let _lock = RunLock::acquire(&parent_dir(&a.out))?;
    let outcome = train_with(&ds, &cfg, |e| {
        log::info!(
            "epoch {:>4} train {:.6} val {:.6} (albedo {:.6}, cycle {:.6})",
            e.epoch,
            e.train.total,
            e.val.total,
            e.val.albedo,
            e.val.cycle
        );
    })?;
    let best = &outcome.history[outcome.best_epoch - 1];
    let mut meta = cfg.to_pairs();
    meta.push(("warp".into(), formats::warp_meta(&ds.warp)));
    meta.push(("dataset_sha256".into(), formats::file_sha256(&a.dataset)?));
    meta.push(("best_epoch".into(), outcome.best_epoch.to_string()));
    meta.push(("val_loss".into(), best.val.total.to_string()));
    formats::save_weights(&outcome.best, &meta, &a.out)?;
    let last = last_weights_path(&a.out);
    let mut last_meta = meta.clone();
    last_meta.push(("snapshot".into(), "last_epoch".into()));
    formats::save_weights(&outcome.last, &last_meta, &last)?;
    run.outputs.push(a.out.clone());
    run.outputs.push(last);
    if let Some(h) = &a.history {
        formats::write_history_csv(h, &outcome.history)?;
        run.outputs.push(h.clone());
    }
    println!(
        "best_epoch {} val_total {:.6} val_albedo {:.6} val_cycle {:.6}",
        outcome.best_epoch, best.val.total, best.val.albedo, best.val.cycle
    );
    run.extra.insert("best_epoch".into(), json!(outcome.best_epoch));
    run.extra.insert(
        "best_val".into(),
        json!({ "param": best.val.param, "albedo": best.val.albedo, "cycle": best.val.cycle, "total": best.val.total }),
    );
    run.finish(&file_sidecar(&a.out))
}

/// `<out>.last`, where `train` keeps the final-epoch weights.
pub fn last_weights_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(OsString::from).unwrap_or_default();
    name.push(".last");
    out.with_file_name(name)
}

/// A loaded inversion/reconstruction model.
enum Model {
    Lut(AlbedoLut),
    Neural(formats::WeightsFile, ParamWarp),
}

fn load_model(m: &ModelArgs, run: &mut Run) -> Result<Model> {
    match m.method {
        Method::Lut => {
            let p = m.lut.as_ref().ok_or_else(|| Error::Config("--method lut needs --lut".into()))?;
            run.input(p)?;
            Ok(Model::Lut(formats::load_lut(p)?))
        }
        Method::Neural => {
            let p = m.weights.as_ref().ok_or_else(|| Error::Config("--method neural needs --weights".into()))?;
            run.input(p)?;
            let w = formats::load_weights(p)?;
            let warp = match formats::meta_get(&w.meta, "warp") {
                Some(s) => formats::parse_warp_meta(s, p)?,
                None => ParamWarp::default(),
            };
            Ok(Model::Neural(w, warp))
        }
    }
}

fn model_warp(m: &Model) -> ParamWarp {
    match m {
        Model::Lut(l) => *l.warp(),
        Model::Neural(_, w) => *w,
    }
}

fn cmd_invert(a: &InvertArgs, mut run: Run) -> Result<()> {
    let model = load_model(&a.model, &mut run)?;
    run.input(&a.image)?;
    let image = formats::read_image(&a.image)?;
    let mask = match &a.mask {
        Some(p) => {
            run.input(p)?;
            Some(formats::read_mask(p)?)
        }
        None => None,
    };
    let _lock = RunLock::acquire(&a.out)?;
    let inverter = match &model {
        Model::Lut(l) => Inverter::Lut(l),
        Model::Neural(w, warp) => Inverter::Neural { encoder: &w.net.encoder, warp: *warp },
    };
    let start = Instant::now();
    let pm = mapops::invert_map(&image, mask.as_ref(), &inverter)?;
    let secs = start.elapsed().as_secs_f64();
    formats::save_param_maps(&a.out, &pm, &model_warp(&model))?;
    println!("texels {} seconds {secs:.3}", pm.len());
    run.outputs.push(a.out.clone());
    run.extra.insert("invert_seconds".into(), json!(secs));
    run.finish(&a.out.join("run.json"))
}

fn cmd_reconstruct(a: &ReconstructArgs, mut run: Run) -> Result<()> {
    let model = load_model(&a.model, &mut run)?;
    run.input(&a.maps)?;
    let pm = formats::load_param_maps(&a.maps)?;
    let passthrough = match &a.passthrough {
        Some(p) => {
            run.input(p)?;
            Some(formats::read_image(p)?)
        }
        None => None,
    };
    let _lock = RunLock::acquire(&parent_dir(&a.out))?;
    let renderer = match &model {
        Model::Lut(l) => Renderer::Lut(l),
        Model::Neural(w, warp) => Renderer::Neural { decoder: &w.net.decoder, warp: *warp },
    };
    let img = mapops::reconstruct_map(&pm, &renderer, passthrough.as_ref())?;
    let depth = match a.png_depth {
        Depth::Eight => PngDepth::Eight,
        Depth::Sixteen => PngDepth::Sixteen,
    };
    formats::write_image(&a.out, &img, depth)?;
    run.outputs.push(a.out.clone());
    run.finish(&file_sidecar(&a.out))
}

fn cmd_edit(a: &EditArgs, mut run: Run) -> Result<()> {
    if a.preset.is_none() && a.ops.is_empty() {
        return Err(Error::Config("edit needs --preset or at least one --op".into()));
    }
    run.input(&a.maps)?;
    let pm = formats::load_param_maps(&a.maps)?;
    let mask = match &a.mask {
        Some(p) => {
            run.input(p)?;
            Some(formats::read_mask(p)?)
        }
        None => None,
    };
    let warp = ParamWarp::default();
    let mut spec = match &a.preset {
        Some(name) => mapops::preset(name, mask.clone(), &warp)?,
        None => EditSpec::default(),
    };
    for op in &a.ops {
        let mut op = EditSpec::parse_op(op)?;
        op.mask = mask.clone();
        spec.ops.push(op);
    }
    let _lock = RunLock::acquire(&a.out)?;
    let (edited, report) = mapops::edit(&pm, &spec, &warp)?;
    formats::save_param_maps(&a.out, &edited, &warp)?;
    println!("clamped {}", report.clamped);
    run.outputs.push(a.out.clone());
    run.extra.insert("clamped".into(), json!(report.clamped));
    run.finish(&a.out.join("run.json"))
}

fn cmd_metrics(a: &MetricsArgs, mut run: Run) -> Result<()> {
    if !(a.gain > 0.0 && a.gain.is_finite()) {
        return Err(Error::Config(format!("--gain must be positive, got {}", a.gain)));
    }
    run.input(&a.a)?;
    run.input(&a.b)?;
    let ia = formats::read_image(&a.a)?;
    let ib = formats::read_image(&a.b)?;
    let mask = match &a.mask {
        Some(p) => {
            run.input(p)?;
            Some(formats::read_mask(p)?)
        }
        None => None,
    };
    let m = mapops::error_metrics(&ia, &ib, mask.as_ref(), a.gain)?;
    let doc = json!({
        "mse": m.mse,
        "mse_per_channel": m.mse_per_channel,
        "mae_per_channel": m.mae_per_channel,
        "texels": m.texels,
    });
    println!("{}", serde_json::to_string_pretty(&doc).expect("metrics serialize"));
    let written: Vec<&PathBuf> = a.out.iter().chain(a.error_map.iter()).collect();
    let Some(first) = written.first() else {
        return Ok(());
    };
    let _lock = RunLock::acquire(&parent_dir(first))?;
    if let Some(p) = &a.error_map {
        formats::write_image(p, &m.abs_error, PngDepth::Sixteen)?;
        run.outputs.push(p.clone());
    }
    if let Some(p) = &a.out {
        let text = serde_json::to_string_pretty(&doc).expect("metrics serialize");
        formats::write_atomic(p, text.as_bytes())?;
        run.outputs.push(p.clone());
    }
    run.extra.insert("metrics".into(), doc);
    run.finish(&file_sidecar(first))
}

fn cmd_export_data(a: &ExportDataArgs, mut run: Run) -> Result<()> {
    let ill = illuminant(&a.illuminant)?;
    let _lock = RunLock::acquire(&a.out)?;
    let files = formats::export_data(&a.out, &ill)?;
    for f in &files {
        println!("{}", f.display());
    }
    run.outputs.push(a.out.clone());
    run.finish(&a.out.join("run.json"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clap_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn resolutions_parse() {
        assert_eq!(parse_resolutions("8,8,3,3,3").unwrap(), [8, 8, 3, 3, 3]);
        assert!(parse_resolutions("8,8,3").is_err());
        assert!(parse_resolutions("8,x,3,3,3").is_err());
    }

    #[test]
    fn config_file_splices_before_flags() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.conf");
        std::fs::write(&cfg, "# defaults\nphotons = 50\nseed=7\nepochs=3\n").unwrap();
        let mut argv: Vec<OsString> = ["dermalight", "--config", cfg.to_str().unwrap(), "simulate", "--seed", "9"]
            .iter()
            .map(OsString::from)
            .collect();
        argv.extend("--vm 0.1 --vb 0.1 --t 100 --phim 0.5 --phih 0.5".split(' ').map(OsString::from));
        let (merged, from_file) = merge_config(argv).unwrap();
        let m = Cli::command().try_get_matches_from(&merged).unwrap();
        let (_, sub) = m.subcommand().unwrap();
        assert_eq!(sub.get_one::<u64>("photons"), Some(&50));
        assert_eq!(sub.get_one::<u64>("seed"), Some(&9));
        assert_eq!(from_file, vec!["photons".to_string()]);
    }

    #[test]
    fn unknown_config_key_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.conf");
        std::fs::write(&cfg, "photon=50\n").unwrap();
        let argv: Vec<OsString> =
            ["dermalight", "simulate", "--config", cfg.to_str().unwrap()].iter().map(OsString::from).collect();
        assert!(merge_config(argv).unwrap_err().is_config());
    }

    #[test]
    fn lock_is_exclusive_and_released() {
        let dir = tempfile::tempdir().unwrap();
        let a = RunLock::acquire(dir.path()).unwrap();
        assert!(RunLock::acquire(dir.path()).unwrap_err().is_config());
        drop(a);
        RunLock::acquire(dir.path()).unwrap();
    }
}
