use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use apple_picker::{
    coords::{read_box, write_picks},
    ctf::CtfParams,
    mrc::{read_mrc, write_mrc},
    overlay::{write_mask_pgm, write_pick_overlay},
    pipeline::pick_micrograph,
    synth::{evaluate, generate, Evaluation, GroundTruth, SynthParams},
    CoordFormat, PickerConfig, Real,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

mod settings;

#[derive(Parser)]
#[command(name = "apple-picker", version, about = "Template-free particle picker for cryo-EM micrographs")]
struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Pick particles in one or more MRC micrographs.
    Pick(Box<PickArgs>),
    /// Write a synthetic micrograph and its ground-truth centers.
    Synth(SynthArgs),
    /// Score a box file against ground-truth centers.
    Evaluate(EvaluateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Precision {
    F32,
    F64,
}

#[derive(Args)]
struct PickArgs {
    /// Input micrographs (.mrc).
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// TOML file with picker settings; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Named parameter set: betagal, t20s, ribosome70s, klh.
    #[arg(long)]
    preset: Option<String>,
    /// Particle diameter in original pixels.
    #[arg(long)]
    particle_size: Option<usize>,
    /// Query/reference window side in binned pixels; odd values are rounded down.
    #[arg(long)]
    query_size: Option<usize>,
    #[arg(long)]
    container_size: Option<usize>,
    #[arg(long)]
    tau1: Option<f64>,
    #[arg(long)]
    tau2: Option<f64>,
    #[arg(long = "bin")]
    bin_factor: Option<usize>,
    /// Border pixels discarded on every side before binning.
    #[arg(long = "crop")]
    border_crop: Option<usize>,
    #[arg(long)]
    threshold_divisor: Option<f64>,
    /// Minimum distance between picks in original pixels.
    #[arg(long = "min-distance")]
    min_center_distance: Option<f64>,
    #[arg(long)]
    svm_bandwidth: Option<f64>,
    #[arg(long)]
    svm_slack: Option<f64>,
    /// Cluster area bounds in binned pixels.
    #[arg(long = "min-pixels")]
    min_cluster_pixels: Option<usize>,
    #[arg(long = "max-pixels")]
    max_cluster_pixels: Option<usize>,
    /// Cluster diameter bounds in original pixels.
    #[arg(long = "min-diameter")]
    min_cluster_diameter: Option<usize>,
    #[arg(long = "max-diameter")]
    max_cluster_diameter: Option<usize>,
    /// Skip erosion and filter clusters by size only.
    #[arg(long, conflicts_with = "erosion")]
    no_erosion: bool,
    #[arg(long)]
    erosion: bool,
    #[arg(long, value_enum)]
    out_format: Option<OutFormat>,
    /// Output directory; defaults to each input's directory.
    #[arg(long, short)]
    out_dir: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// CTF parameter file, or a directory holding `<stem>.ctf` per micrograph.
    #[arg(long)]
    ctf_sidecar: Option<PathBuf>,
    /// Also write `<stem>.overlay.pgm` and `<stem>.mask.pgm`.
    #[arg(long)]
    overlay: bool,
    /// Also write a CSV summary of all micrographs here.
    #[arg(long)]
    summary: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "f64")]
    precision: Precision,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    Box,
    Star,
}

impl From<OutFormat> for CoordFormat {
    fn from(f: OutFormat) -> Self {
        match f {
            OutFormat::Box => CoordFormat::Box,
            OutFormat::Star => CoordFormat::Star,
        }
    }
}

#[derive(Args)]
struct SynthArgs {
    /// Output micrograph (.mrc); truth goes to `<stem>_truth.csv` beside it.
    #[arg(long, short)]
    out: PathBuf,
    #[arg(long, default_value_t = 1024)]
    width: usize,
    #[arg(long, default_value_t = 1024)]
    height: usize,
    #[arg(long, default_value_t = 40)]
    num_particles: usize,
    #[arg(long, default_value_t = 40.0)]
    diameter: f64,
    /// In-disk signal variance over noise variance.
    #[arg(long, default_value_t = 0.5)]
    snr: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.0)]
    background_mean: f64,
    #[arg(long, default_value_t = 1.0)]
    contrast: f64,
    /// Pixel size in Å recorded in the header.
    #[arg(long)]
    pixel_size: Option<f64>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Box file with picks.
    #[arg(long)]
    picks: PathBuf,
    /// Ground-truth CSV.
    #[arg(long)]
    truth: PathBuf,
    /// Particle diameter in pixels.
    #[arg(long)]
    diameter: f64,
    /// Defaults to half the diameter.
    #[arg(long)]
    match_radius: Option<f64>,
    /// Also write the evaluation as CSV here.
    #[arg(long)]
    report: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let outcome = match cli.command {
        Command::Pick(a) => run_pick(*a),
        Command::Synth(a) => run_synth(a).map(|_| ExitCode::SUCCESS),
        Command::Evaluate(a) => run_evaluate(a).map(|_| ExitCode::SUCCESS),
    };
    outcome.unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        ExitCode::from(2)
    })
}

fn resolve_config(a: &PickArgs) -> Result<(PickerConfig, settings::RunOptions)> {
    let (mut c, mut run) = settings::load(a.config.as_deref(), a.preset.as_deref())?;
    macro_rules! flag {
        ($($field:ident),*) => { $( if let Some(v) = a.$field { c.$field = v; } )* };
    }
    macro_rules! opt_flag {
        ($($field:ident),*) => { $( if a.$field.is_some() { c.$field = a.$field; } )* };
    }
    flag!(particle_size, container_size, tau1, tau2, bin_factor, border_crop, threshold_divisor, svm_bandwidth, svm_slack);
    opt_flag!(query_size, min_center_distance, min_cluster_pixels, max_cluster_pixels, min_cluster_diameter, max_cluster_diameter);
    if a.no_erosion {
        c.erosion = false;
    }
    if a.erosion {
        c.erosion = true;
    }
    if let Some(f) = a.out_format {
        c.out_format = f.into();
    }
    if a.threads.is_some() {
        run.threads = a.threads;
    }
    if a.ctf_sidecar.is_some() {
        run.ctf_sidecar = a.ctf_sidecar.clone();
    }
    if a.out_dir.is_some() {
        run.out_dir = a.out_dir.clone();
    }
    run.overlay |= a.overlay;
    if let Some(n) = c.query_size.filter(|n| n % 2 == 1 && *n > 2) {
        log::warn!("query size {n} is odd; using {}", n - 1);
        c.query_size = Some(n - 1);
    }
    c.validate()?;
    Ok((c, run))
}

struct FileReport {
    input: PathBuf,
    output: Option<PathBuf>,
    picks: usize,
    seconds: f64,
    error: Option<String>,
}

fn sidecar_for(input: &Path, sidecar: Option<&Path>) -> Option<PathBuf> {
    let s = sidecar?;
    if s.is_dir() {
        let stem = input.file_stem().unwrap_or_default();
        Some(s.join(stem).with_extension("ctf"))
    } else {
        Some(s.to_path_buf())
    }
}

fn output_path(input: &Path, out_dir: Option<&Path>, suffix: &str) -> PathBuf {
    let stem = input.file_stem().unwrap_or_default().to_string_lossy();
    let dir = out_dir
        .map(Path::to_path_buf)
        .or_else(|| input.parent().map(Path::to_path_buf))
        .unwrap_or_default();
    dir.join(format!("{stem}{suffix}"))
}

fn pick_one<T: Real>(input: &Path, config: &PickerConfig, run: &settings::RunOptions) -> Result<(PathBuf, usize)> {
    let m = read_mrc::<T>(input)?;
    let ctf = match sidecar_for(input, run.ctf_sidecar.as_deref()) {
        Some(p) => Some(CtfParams::<T>::read_sidecar(&p)?),
        None => None,
    };
    let result = pick_micrograph(&m, config, ctf.as_ref())?;
    let out_dir = run.out_dir.as_deref();
    let out = output_path(input, out_dir, &format!(".{}", config.out_format.extension()));
    write_picks(&result.picks, &out, config.out_format)?;
    if run.overlay {
        write_pick_overlay(&result.processed, &result.picks, output_path(input, out_dir, ".overlay.pgm"))?;
        write_mask_pgm(&result.segmentation.labels, output_path(input, out_dir, ".mask.pgm"))?;
    }
    Ok((out, result.picks.len()))
}

fn run_pick(a: PickArgs) -> Result<ExitCode> {
    let (config, run) = resolve_config(&a)?;
    if let Some(dir) = &run.out_dir {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = run.threads {
        pool = pool.num_threads(t);
    }
    let pool = pool.build()?;

    let reports: Vec<FileReport> = pool.install(|| {
        a.inputs
            .par_iter()
            .map(|input| {
                let start = Instant::now();
                let outcome = match a.precision {
                    Precision::F32 => pick_one::<f32>(input, &config, &run),
                    Precision::F64 => pick_one::<f64>(input, &config, &run),
                };
                let seconds = start.elapsed().as_secs_f64();
                match outcome {
                    Ok((out, n)) => {
                        log::info!("{}: {n} picks in {seconds:.2}s", input.display());
                        FileReport { input: input.clone(), output: Some(out), picks: n, seconds, error: None }
                    }
                    Err(e) => {
                        log::error!("{}: {e:#}", input.display());
                        FileReport { input: input.clone(), output: None, picks: 0, seconds, error: Some(format!("{e:#}")) }
                    }
                }
            })
            .collect()
    });

    let mut csv = String::from("input,output,picks,seconds,error\n");
    for r in &reports {
        let out = r.output.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let err = r.error.clone().unwrap_or_default();
        println!(
            "{}\t{}\t{:.2}s\t{}",
            r.input.display(),
            if r.error.is_some() { "FAILED".to_string() } else { format!("{} picks", r.picks) },
            r.seconds,
            if err.is_empty() { out.clone() } else { err.clone() }
        );
        csv.push_str(&format!("{},{},{},{:.3},{}\n", r.input.display(), out, r.picks, r.seconds, err.replace(',', ";")));
    }
    if let Some(path) = &a.summary {
        std::fs::write(path, csv).with_context(|| format!("writing {}", path.display()))?;
    }

    let failed = reports.iter().filter(|r| r.error.is_some()).count();
    let total: usize = reports.iter().map(|r| r.picks).sum();
    println!("{} micrographs, {} failed, {total} picks", reports.len(), failed);
    Ok(match failed {
        0 => ExitCode::SUCCESS,
        f if f == reports.len() => ExitCode::from(2),
        _ => ExitCode::from(1),
    })
}

fn run_synth(a: SynthArgs) -> Result<()> {
    let params = SynthParams {
        background_mean: a.background_mean,
        contrast: a.contrast,
        ..SynthParams::new(a.width, a.height, a.num_particles, a.diameter, a.snr, a.seed)
    };
    let (mut m, truth) = generate::<f32>(&params)?;
    m.pixel_size = a.pixel_size;
    write_mrc(&m, &a.out)?;
    let truth_path = output_path(&a.out, None, "_truth.csv");
    truth.write_csv(&truth_path)?;
    println!("wrote {} and {}", a.out.display(), truth_path.display());
    Ok(())
}

fn run_evaluate(a: EvaluateArgs) -> Result<()> {
    let picks = read_box(&a.picks)?;
    let truth = GroundTruth::read_csv(&a.truth, a.diameter)?;
    let radius = a.match_radius.unwrap_or(a.diameter / 2.0);
    if radius.is_nan() || radius <= 0.0 {
        bail!("match radius must be positive");
    }
    let e: Evaluation = evaluate(&picks, &truth, radius)?;
    println!("{}", e.summary());
    if let Some(path) = &a.report {
        std::fs::write(path, format!("{}\n{}\n", Evaluation::CSV_HEADER, e.csv_row()))
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}
