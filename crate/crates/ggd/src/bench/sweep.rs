use std::path::{Path, PathBuf};
use std::time::Instant;

use ggd_core::lowrank::{compute, compute_owned};
use ggd_core::noise::{calibrate_sigma, contaminate};
use ggd_core::pipeline::{reconstruct, spectral_basis_input, uniform_patches};
use ggd_core::{Backend, BackendOptions, DenoiseParams, GeodesicAlgorithm, GrayImage, Matrix, MetricReport, PatchMatrix};

use super::plan::{noise_seed, GridLevel, RunKey, SweepPlan};
use super::record::BenchRecord;
use crate::error::{GgdError, Result};
use crate::pgm;

/// A clean reference image and the name used in the CSV.
#[derive(Debug, Clone)]
pub struct NamedImage {
    pub name: String,
    pub image: GrayImage,
}

impl NamedImage {
    /// Reads a PGM and names it after the file stem.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "image".into());
        Ok(Self {
            name,
            image: pgm::read_pgm(path)?,
        })
    }
}

/// Settings shared by sweeps and timing runs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub geodesic: GeodesicAlgorithm,
    /// Accepted deviation from the requested relative noise, in percent.
    pub noise_tolerance: f64,
    /// Backend tuning; the seed is replaced per run.
    pub backend_options: BackendOptions,
    /// Where noisy realizations are cached, if anywhere.
    pub noisy_dir: Option<PathBuf>,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            geodesic: GeodesicAlgorithm::DijkstraAll,
            noise_tolerance: 0.5,
            backend_options: BackendOptions::default(),
            noisy_dir: None,
        }
    }
}

/// The single noisy realization of `clean` at `zeta` percent, quantized to
/// 8 bits so that a cached copy is bit-identical to a fresh one.
pub fn noisy_realization(clean: &NamedImage, zeta: f64, base_seed: u64, settings: &RunSettings) -> Result<GrayImage> {
    let seed = noise_seed(base_seed, &clean.name, zeta);
    let cached = settings
        .noisy_dir
        .as_ref()
        .map(|dir| dir.join(format!("{}_zeta{}_seed{}.pgm", clean.name, zeta, seed)));
    if let Some(path) = cached.as_ref().filter(|p| p.exists()) {
        let image = pgm::read_pgm(path)?;
        clean.image.same_shape(&image)?;
        return Ok(image);
    }
    let spec = calibrate_sigma(&clean.image, zeta, settings.noise_tolerance, seed)?;
    let noisy = pgm::quantize(&contaminate(&clean.image, &spec));
    if let Some(path) = cached {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| GgdError::io(dir, e))?;
        }
        pgm::write_pgm(&path, &noisy)?;
    }
    Ok(noisy)
}

pub fn median(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty(), "median of nothing");
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    if values.len() % 2 == 1 {
        values[mid]
    } else {
        0.5 * (values[mid - 1] + values[mid])
    }
}

pub(crate) fn elapsed_ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

/// Patches and Gramian of one noisy image for one `(delta, rho)`, with the
/// time it took to build them.
pub(crate) struct Prepared {
    pub patches: PatchMatrix,
    /// `None` for a constant image, whose output is the input.
    pub gramian: Option<Matrix>,
    pub ms: f64,
}

pub(crate) fn prepare(noisy: &GrayImage, delta: usize, rho: usize, rank: usize, geodesic: GeodesicAlgorithm) -> Result<Prepared> {
    DenoiseParams::new(delta, rho, rank).validate(noisy.rows(), noisy.cols())?;
    let start = Instant::now();
    let patches = ggd_core::patchgraph::extract_patches(noisy, rho)?;
    if uniform_patches(&patches) {
        return Ok(Prepared {
            patches,
            gramian: None,
            ms: elapsed_ms(start),
        });
    }
    let (patches, gramian) = spectral_basis_input(noisy, delta, rho, geodesic)?;
    Ok(Prepared {
        patches,
        gramian: Some(gramian.into_matrix()),
        ms: elapsed_ms(start),
    })
}

/// Output of one backend run on a prepared Gramian.
pub(crate) struct Timed {
    pub image: GrayImage,
    pub converged: bool,
    /// Median of backend plus merge time over the repetitions.
    pub ms: f64,
}

/// Runs `backend` `repetitions` times at `rank` and keeps the last output.
pub(crate) fn time_backend(
    prepared: &Prepared,
    backend: Backend,
    rank: usize,
    opts: &BackendOptions,
    repetitions: usize,
) -> Result<Timed> {
    let mut times = Vec::with_capacity(repetitions);
    let mut last = None;
    for _ in 0..repetitions {
        let start = Instant::now();
        let (image, converged) = match &prepared.gramian {
            Some(g) => {
                let triplets = compute(g, rank, backend, opts)?;
                (reconstruct(&prepared.patches, &triplets.right)?, triplets.converged)
            }
            None => (ggd_core::pipeline::shepard_merge(&prepared.patches)?.clamp_to_range(), true),
        };
        times.push(elapsed_ms(start));
        last = Some((image, converged));
    }
    let (image, converged) = last.expect("at least one repetition");
    Ok(Timed {
        image,
        converged,
        ms: median(&mut times),
    })
}

/// Runs every cell of `plan` on every image. Each finished record is passed
/// to `sink` (typically a CSV writer) before the next run starts; failed
/// runs become records without metrics. Only errors from creating the noisy
/// realizations and from `sink` abort the sweep.
pub fn run_sweep(
    images: &[NamedImage],
    plan: &SweepPlan,
    settings: &RunSettings,
    mut sink: impl FnMut(&BenchRecord) -> Result<()>,
) -> Result<Vec<BenchRecord>> {
    plan.validate()?;
    let mut out = Vec::with_capacity(images.len() * plan.runs_per_image());
    for clean in images {
        for level in &plan.levels {
            let noisy = noisy_realization(clean, level.zeta, plan.base_seed, settings)?;
            for &delta in &level.deltas {
                for &rho in &level.rhos {
                    for record in sweep_cell(clean, &noisy, level, delta, rho, plan, settings) {
                        sink(&record)?;
                        out.push(record);
                    }
                }
            }
        }
    }
    Ok(out)
}

/// (metrics, wall_ms, converged) of one run.
type RunResult = Result<(MetricReport, f64, bool)>;

/// All backends and ranks for one `(delta, rho)`, sharing one Gramian.
fn sweep_cell(
    clean: &NamedImage,
    noisy: &GrayImage,
    level: &GridLevel,
    delta: usize,
    rho: usize,
    plan: &SweepPlan,
    settings: &RunSettings,
) -> Vec<BenchRecord> {
    let key = |backend, rank| RunKey {
        image_name: &clean.name,
        zeta: level.zeta,
        backend,
        delta,
        rho,
        rank,
    };
    let prepared = prepare(noisy, delta, rho, level.max_rank(), settings.geodesic);
    let mut out = Vec::new();
    for &backend in &plan.backends {
        let runs: Vec<RunResult> = match &prepared {
            Err(e) => level.ranks.iter().map(|_| Err(GgdError::Invalid(e.to_string()))).collect(),
            Ok(prepared) if backend == Backend::Exact => exact_runs(clean, prepared, &level.ranks, plan, settings),
            Ok(prepared) => level
                .ranks
                .iter()
                .map(|&rank| {
                    let opts = BackendOptions {
                        seed: key(backend, rank).seed(plan.base_seed),
                        ..settings.backend_options.clone()
                    };
                    let timed = time_backend(prepared, backend, rank, &opts, plan.repetitions)?;
                    let metrics = MetricReport::compute(&clean.image, &timed.image)?;
                    Ok((metrics, prepared.ms + timed.ms, timed.converged))
                })
                .collect(),
        };
        for (&rank, run) in level.ranks.iter().zip(runs) {
            out.push(to_record(key(backend, rank), plan.base_seed, run));
        }
    }
    out
}

/// Exact triplets are nested in the rank, so one decomposition at the
/// largest rank serves every rank; each row reports the time of that
/// decomposition plus its own merge.
fn exact_runs(
    clean: &NamedImage,
    prepared: &Prepared,
    ranks: &[usize],
    plan: &SweepPlan,
    settings: &RunSettings,
) -> Vec<RunResult> {
    let Some(gramian) = &prepared.gramian else {
        return ranks
            .iter()
            .map(|&rank| {
                let timed = time_backend(prepared, Backend::Exact, rank, &settings.backend_options, plan.repetitions)?;
                let metrics = MetricReport::compute(&clean.image, &timed.image)?;
                Ok((metrics, prepared.ms + timed.ms, true))
            })
            .collect();
    };
    let max_rank = ranks.iter().copied().max().unwrap_or(1);
    let mut times = Vec::with_capacity(plan.repetitions);
    let mut solved = None;
    for _ in 0..plan.repetitions {
        let copy = gramian.clone();
        let start = Instant::now();
        solved = Some(compute_owned(copy, max_rank, Backend::Exact, &settings.backend_options));
        times.push(elapsed_ms(start));
    }
    let triplets = match solved.expect("at least one repetition") {
        Ok(t) => t,
        Err(e) => return ranks.iter().map(|_| Err(GgdError::Core(e.clone()))).collect(),
    };
    let solve_ms = median(&mut times);
    ranks
        .iter()
        .map(|&rank| {
            let start = Instant::now();
            let image = reconstruct(&prepared.patches, &triplets.right.leading_columns(rank))?;
            let merge_ms = elapsed_ms(start);
            let metrics = MetricReport::compute(&clean.image, &image)?;
            Ok((metrics, prepared.ms + solve_ms + merge_ms, triplets.converged))
        })
        .collect()
}

fn to_record(key: RunKey<'_>, base_seed: u64, run: RunResult) -> BenchRecord {
    let (metrics, wall_ms, converged) = match run {
        Ok((m, ms, c)) => (Some(m), Some(ms), c),
        Err(_) => (None, None, false),
    };
    BenchRecord {
        image_name: key.image_name.to_string(),
        zeta: key.zeta,
        backend: key.backend,
        delta: key.delta,
        rho: key.rho,
        rank: key.rank,
        metrics,
        wall_ms,
        seed: key.seed(base_seed),
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::{best_rows, Criterion};

    fn scene(size: usize) -> NamedImage {
        let image = GrayImage::from_fn(size, size, |i, j| {
            let ring = (((i as f64 - 7.5).powi(2) + (j as f64 - 7.5).powi(2)).sqrt() / 3.0).floor();
            60.0 + 40.0 * (ring % 3.0) + if (i + j) % 7 == 0 { 30.0 } else { 0.0 }
        })
        .unwrap();
        NamedImage {
            name: "scene".into(),
            image,
        }
    }

    fn small_plan() -> SweepPlan {
        SweepPlan {
            levels: vec![GridLevel {
                zeta: 20.0,
                deltas: vec![6, 8],
                rhos: vec![3],
                ranks: vec![4, 6],
            }],
            backends: vec![Backend::Exact, Backend::Alb, Backend::Rsvd],
            repetitions: 1,
            base_seed: 11,
        }
    }

    #[test]
    fn median_of_odd_and_even() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 3.0, 2.0]), 2.5);
    }

    #[test]
    fn sweep_covers_grid_and_is_deterministic() {
        let images = [scene(16)];
        let plan = small_plan();
        let settings = RunSettings::default();
        let mut streamed = 0;
        let a = run_sweep(&images, &plan, &settings, |_| {
            streamed += 1;
            Ok(())
        })
        .unwrap();
        assert_eq!(a.len(), plan.runs_per_image());
        assert_eq!(streamed, a.len());
        assert!(a.iter().all(|r| r.converged && r.metrics.is_some()));

        let b = run_sweep(&images, &plan, &settings, |_| Ok(())).unwrap();
        let strip = |rs: &[BenchRecord]| -> Vec<(u64, Option<MetricReport>)> { rs.iter().map(|r| (r.seed, r.metrics)).collect() };
        assert_eq!(strip(&a), strip(&b));

        for best in best_rows(&a, Criterion::Psnr) {
            let mut group = a.iter().filter(|r| r.backend == best.backend);
            assert!(group.all(|r| r.psnr() <= best.psnr()));
        }
    }

    #[test]
    fn exact_rows_match_direct_denoise() {
        let images = [scene(16)];
        let plan = SweepPlan {
            backends: vec![Backend::Exact],
            ..small_plan()
        };
        let rows = run_sweep(&images, &plan, &RunSettings::default(), |_| Ok(())).unwrap();
        let noisy = noisy_realization(&images[0], 20.0, plan.base_seed, &RunSettings::default()).unwrap();
        for r in rows {
            let direct = ggd_core::denoise(&noisy, &DenoiseParams::new(r.delta, r.rho, r.rank)).unwrap();
            let m = MetricReport::compute(&images[0].image, &direct).unwrap();
            assert!((m.psnr - r.psnr().unwrap()).abs() < 1e-9, "{r:?}");
        }
    }

    #[test]
    fn failed_cells_are_recorded_blank() {
        let plan = SweepPlan {
            levels: vec![GridLevel {
                zeta: 20.0,
                deltas: vec![6],
                rhos: vec![3, 21],
                ranks: vec![4],
            }],
            ..small_plan()
        };
        let rows = run_sweep(&[scene(16)], &plan, &RunSettings::default(), |_| Ok(())).unwrap();
        assert_eq!(rows.len(), 6);
        for r in &rows {
            assert_eq!(r.metrics.is_none(), r.rho == 21);
            assert_eq!(r.converged, r.rho == 3);
        }
    }

    #[test]
    fn cached_noise_is_reused() {
        let dir = tempfile::tempdir().unwrap();
        let settings = RunSettings {
            noisy_dir: Some(dir.path().join("noisy")),
            ..RunSettings::default()
        };
        let clean = scene(16);
        let fresh = noisy_realization(&clean, 30.0, 5, &settings).unwrap();
        assert_eq!(std::fs::read_dir(dir.path().join("noisy")).unwrap().count(), 1);
        let cached = noisy_realization(&clean, 30.0, 5, &settings).unwrap();
        assert_eq!(fresh, cached);
        let uncached = noisy_realization(&clean, 30.0, 5, &RunSettings::default()).unwrap();
        assert_eq!(fresh, uncached);
        let zeta = ggd_core::noise::relative_noise(&clean.image, &fresh).unwrap();
        assert!((zeta - 30.0).abs() < 0.6, "{zeta}");
    }
}
