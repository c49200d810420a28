use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ggd::bench::{
    best_rows, run_sweep, run_timing, timing_chart, BenchRecord, CsvSink, Criterion, GridLevel, NamedImage,
    RunSettings, SweepPlan, TimingPlan,
};
use ggd::ggd_core::noise::{calibrate_sigma, contaminate, relative_noise};
use ggd::ggd_core::pipeline::denoise_observed;
use ggd::ggd_core::{Backend, BackendOptions, DenoiseParams, GeodesicAlgorithm, MetricReport, Stage};
use ggd::{pgm, GgdError, Result};

#[derive(Parser)]
#[command(name = "ggd", version, about = "Geodesic Gramian denoising of grayscale images")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Add Gaussian noise calibrated to a relative noise level.
    Noise(NoiseArgs),
    /// Denoise one image.
    Denoise(DenoiseArgs),
    /// Compare a test image against a reference.
    Metrics(MetricsArgs),
    /// Run a parameter-grid sweep and report the best cells.
    Sweep(SweepArgs),
    /// Time the backends over centre crops of increasing size.
    Timing(TimingArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Geodesic {
    Floyd,
    Dijkstra,
}

impl From<Geodesic> for GeodesicAlgorithm {
    fn from(g: Geodesic) -> Self {
        match g {
            Geodesic::Floyd => GeodesicAlgorithm::Floyd,
            Geodesic::Dijkstra => GeodesicAlgorithm::DijkstraAll,
        }
    }
}

fn parse_backend(s: &str) -> std::result::Result<Backend, String> {
    s.parse().map_err(|e: ggd::ggd_core::Error| e.to_string())
}

#[derive(Args)]
struct BackendFlags {
    /// Convergence tolerance (MCLA eta, ALB and PIME delta).
    #[arg(long)]
    tol: Option<f64>,
    /// Iteration, restart or sweep limit.
    #[arg(long)]
    max_iters: Option<usize>,
    /// ALB Lanczos steps per restart.
    #[arg(long)]
    lanczos_steps: Option<usize>,
    /// ALB: use harmonic restarts where they are safe.
    #[arg(long)]
    harmonic: bool,
    /// RSVD extra sample columns.
    #[arg(long, default_value_t = 0)]
    oversampling: usize,
    /// RSVD power iterations.
    #[arg(long, default_value_t = 0)]
    power_iters: usize,
    /// MCLA columns drawn per iteration (defaults to the rank).
    #[arg(long)]
    mcla_batch: Option<usize>,
}

impl BackendFlags {
    fn options(&self) -> BackendOptions {
        BackendOptions {
            tolerance: self.tol,
            max_iterations: self.max_iters,
            seed: 0,
            lanczos_steps: self.lanczos_steps,
            harmonic: self.harmonic,
            oversampling: self.oversampling,
            power_iterations: self.power_iters,
            mcla_batch: self.mcla_batch,
        }
    }
}

#[derive(Args)]
struct NoiseArgs {
    #[arg(short, long)]
    input: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
    /// Relative noise in percent.
    #[arg(long)]
    zeta: f64,
    /// Accepted deviation from zeta, in percent.
    #[arg(long, default_value_t = 0.5)]
    tolerance: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct DenoiseArgs {
    #[arg(short, long)]
    input: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
    /// Neighbours per patch.
    #[arg(long, default_value_t = 10)]
    delta: usize,
    /// Odd patch side.
    #[arg(long, default_value_t = 5)]
    rho: usize,
    /// Singular vectors kept.
    #[arg(long, default_value_t = 20)]
    rank: usize,
    #[arg(long, default_value = "exact", value_parser = parse_backend)]
    backend: Backend,
    #[arg(long, value_enum, default_value_t = Geodesic::Dijkstra)]
    geodesic: Geodesic,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    tuning: BackendFlags,
}

#[derive(Args)]
struct MetricsArgs {
    reference: PathBuf,
    test: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    /// Clean reference images.
    #[arg(required = true)]
    images: Vec<PathBuf>,
    /// Noise levels in percent; 20, 30 and 40 have default grids.
    #[arg(long, value_delimiter = ',', default_value = "20,30,40")]
    zeta: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "exact,mcla,alb,pime,rsvd", value_parser = parse_backend)]
    backend: Vec<Backend>,
    /// Replace the delta list of every level.
    #[arg(long, value_delimiter = ',')]
    delta: Option<Vec<usize>>,
    /// Replace the rho list of every level.
    #[arg(long, value_delimiter = ',')]
    rho: Option<Vec<usize>>,
    /// Replace the rank list of every level.
    #[arg(long, value_delimiter = ',')]
    rank: Option<Vec<usize>>,
    /// Centre-crop every image to size x size first; 0 keeps the full image.
    #[arg(long, default_value_t = 64)]
    size: usize,
    /// Timed runs per cell (the CSV holds the median).
    #[arg(long, default_value_t = 1)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    csv: PathBuf,
    /// Cache directory for the noisy realizations.
    #[arg(long)]
    noisy_dir: Option<PathBuf>,
    /// Accepted deviation of the noise level, in percent.
    #[arg(long, default_value_t = 0.5)]
    tolerance: f64,
    #[arg(long, value_enum, default_value_t = Geodesic::Dijkstra)]
    geodesic: Geodesic,
    #[command(flatten)]
    tuning: BackendFlags,
}

#[derive(Args)]
struct TimingArgs {
    #[arg(short, long)]
    input: PathBuf,
    /// Crop sizes.
    #[arg(long, value_delimiter = ',', default_value = "50,60,70,80,90,100")]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    delta: usize,
    #[arg(long, default_value_t = 5)]
    rho: usize,
    #[arg(long, default_value_t = 15)]
    rank: usize,
    #[arg(long, value_delimiter = ',', default_value = "exact,mcla,alb,pime,rsvd", value_parser = parse_backend)]
    backend: Vec<Backend>,
    #[arg(long, default_value_t = 3)]
    reps: usize,
    /// Relative noise added to each crop, in percent.
    #[arg(long, default_value_t = 20.0)]
    zeta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    csv: PathBuf,
    #[arg(long)]
    svg: Option<PathBuf>,
    /// Logarithmic time axis in the SVG.
    #[arg(long)]
    log: bool,
    #[arg(long, value_enum, default_value_t = Geodesic::Dijkstra)]
    geodesic: Geodesic,
    #[command(flatten)]
    tuning: BackendFlags,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Noise(a) => noise(a),
        Command::Denoise(a) => denoise(a),
        Command::Metrics(a) => metrics(a),
        Command::Sweep(a) => sweep(a),
        Command::Timing(a) => timing(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}

fn noise(a: NoiseArgs) -> Result<()> {
    let clean = pgm::read_pgm(&a.input)?;
    let spec = calibrate_sigma(&clean, a.zeta, a.tolerance, a.seed)?;
    let noisy = pgm::quantize(&contaminate(&clean, &spec));
    pgm::write_pgm(&a.output, &noisy)?;
    println!("zeta={:.4} sigma={:.4}", relative_noise(&clean, &noisy)?, spec.sigma);
    Ok(())
}

fn denoise(a: DenoiseArgs) -> Result<()> {
    let image = pgm::read_pgm(&a.input)?;
    let params = DenoiseParams {
        backend: a.backend,
        backend_options: a.tuning.options(),
        geodesic_algorithm: a.geodesic.into(),
        ..DenoiseParams::new(a.delta, a.rho, a.rank).with_seed(a.seed)
    };
    let start = Instant::now();
    let mut last = start;
    let mut stages = Vec::new();
    let outcome = denoise_observed(&image, &params, |stage| {
        let now = Instant::now();
        stages.push((stage, (now - last).as_secs_f64() * 1e3));
        last = now;
    })?;
    let total = start.elapsed().as_secs_f64() * 1e3;
    pgm::write_pgm(&a.output, &outcome.image)?;
    if !outcome.converged() {
        let iterations = outcome.triplets.as_ref().map_or(0, |t| t.iterations);
        eprintln!(
            "warning: {} backend stopped after {iterations} iterations without converging; output written anyway",
            a.backend
        );
    }
    let mut line: Vec<String> = Stage::ALL
        .iter()
        .map(|s| {
            let ms = stages.iter().find(|(t, _)| t == s).map_or(0.0, |(_, ms)| *ms);
            format!("{}_ms={ms:.1}", s.name())
        })
        .collect();
    line.push(format!("total_ms={total:.1}"));
    println!("{}", line.join(" "));
    Ok(())
}

fn format_metrics(m: &MetricReport) -> String {
    let psnr = if m.psnr.is_infinite() { "inf".to_string() } else { format!("{:.2}", m.psnr) };
    format!("re={:.4} psnr={psnr} ssim={:.4}", m.re, m.ssim)
}

fn metrics(a: MetricsArgs) -> Result<()> {
    let reference = pgm::read_pgm(&a.reference)?;
    let test = pgm::read_pgm(&a.test)?;
    println!("{}", format_metrics(&MetricReport::compute(&reference, &test)?));
    Ok(())
}

fn sweep(a: SweepArgs) -> Result<()> {
    let mut levels = Vec::new();
    for &zeta in &a.zeta {
        let mut level = GridLevel::standard(zeta).unwrap_or(GridLevel {
            zeta,
            deltas: Vec::new(),
            rhos: Vec::new(),
            ranks: Vec::new(),
        });
        if let Some(d) = &a.delta {
            level.deltas = d.clone();
        }
        if let Some(r) = &a.rho {
            level.rhos = r.clone();
        }
        if let Some(l) = &a.rank {
            level.ranks = l.clone();
        }
        if level.cells() == 0 {
            return Err(GgdError::Invalid(format!(
                "no default grid for zeta={zeta}; pass --delta, --rho and --rank"
            )));
        }
        levels.push(level);
    }
    let plan = SweepPlan {
        levels,
        backends: a.backend.clone(),
        repetitions: a.reps,
        base_seed: a.seed,
    };
    plan.validate()?;
    let mut images = Vec::new();
    for path in &a.images {
        let mut img = NamedImage::load(path)?;
        if a.size > 0 {
            img.image = img.image.crop_center(a.size, a.size)?;
        }
        images.push(img);
    }
    let settings = RunSettings {
        geodesic: a.geodesic.into(),
        noise_tolerance: a.tolerance,
        backend_options: a.tuning.options(),
        noisy_dir: a.noisy_dir.clone(),
    };
    settings.backend_options.validate()?;

    let mut sink = CsvSink::append(&a.csv)?;
    let records = run_sweep(&images, &plan, &settings, |r| {
        if r.metrics.is_none() {
            eprintln!(
                "warning: run failed: {} zeta={} {} delta={} rho={} rank={}",
                r.image_name, r.zeta, r.backend, r.delta, r.rho, r.rank
            );
        }
        sink.push(r)
    })?;
    for (tag, by) in [("best-psnr", Criterion::Psnr), ("best-ssim", Criterion::Ssim)] {
        for r in best_rows(&records, by) {
            println!("{tag} {}", describe(r));
        }
    }
    Ok(())
}

fn describe(r: &BenchRecord) -> String {
    let metrics = r.metrics.as_ref().map(format_metrics).unwrap_or_default();
    format!(
        "image={} zeta={} backend={} delta={} rho={} rank={} {metrics}",
        r.image_name, r.zeta, r.backend, r.delta, r.rho, r.rank
    )
}

fn timing(a: TimingArgs) -> Result<()> {
    let image = NamedImage::load(&a.input)?;
    let plan = TimingPlan {
        sizes: a.sizes.clone(),
        delta: a.delta,
        rho: a.rho,
        rank: a.rank,
        backends: a.backend.clone(),
        repetitions: a.reps,
        zeta: a.zeta,
        base_seed: a.seed,
    };
    let settings = RunSettings {
        geodesic: a.geodesic.into(),
        backend_options: a.tuning.options(),
        ..RunSettings::default()
    };
    settings.backend_options.validate()?;
    let mut sink = CsvSink::append(&a.csv)?;
    let points = run_timing(&image, &plan, &settings, |r| {
        match r.wall_ms {
            Some(ms) => println!("{} backend={} wall_ms={ms:.1}", r.image_name, r.backend),
            None => eprintln!("warning: run failed: {} backend={}", r.image_name, r.backend),
        }
        sink.push(r)
    })?;
    if let Some(path) = &a.svg {
        std::fs::write(path, timing_chart(&points, a.log)).map_err(|e| GgdError::io(path, e))?;
    }
    Ok(())
}
