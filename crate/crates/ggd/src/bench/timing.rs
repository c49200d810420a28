use ggd_core::{Backend, BackendOptions, MetricReport};

use super::plan::RunKey;
use super::record::BenchRecord;
use super::svg::{line_chart, Chart, Series};
use super::sweep::{noisy_realization, prepare, time_backend, NamedImage, RunSettings};
use crate::error::{GgdError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TimingPlan {
    /// Side lengths of the square centre crops.
    pub sizes: Vec<usize>,
    pub delta: usize,
    pub rho: usize,
    pub rank: usize,
    pub backends: Vec<Backend>,
    pub repetitions: usize,
    /// Relative noise added to every crop, in percent.
    pub zeta: f64,
    pub base_seed: u64,
}

impl Default for TimingPlan {
    fn default() -> Self {
        Self {
            sizes: vec![50, 60, 70, 80, 90, 100],
            delta: 10,
            rho: 5,
            rank: 15,
            backends: Backend::ALL.to_vec(),
            repetitions: 3,
            zeta: 20.0,
            base_seed: 0,
        }
    }
}

/// A timing row and the crop size it belongs to.
#[derive(Debug, Clone, PartialEq)]
pub struct TimingPoint {
    pub size: usize,
    pub record: BenchRecord,
}

/// Times the denoiser on centre crops of `image`, strictly sequentially.
/// The graph and Gramian are built once per size and their time is added to
/// every backend's median run time. Crops are named `<name>@<size>`.
pub fn run_timing(
    image: &NamedImage,
    plan: &TimingPlan,
    settings: &RunSettings,
    mut sink: impl FnMut(&BenchRecord) -> Result<()>,
) -> Result<Vec<TimingPoint>> {
    if plan.sizes.is_empty() || plan.backends.is_empty() || plan.repetitions == 0 {
        return Err(GgdError::Invalid("timing needs sizes, backends and at least one repetition".into()));
    }
    let largest = plan.sizes.iter().copied().max().expect("non-empty");
    let (rows, cols) = (image.image.rows(), image.image.cols());
    if largest > rows.min(cols) {
        return Err(GgdError::Invalid(format!(
            "image {} is {rows}x{cols}, smaller than the requested {largest}x{largest} crop",
            image.name
        )));
    }

    let mut out = Vec::new();
    for &size in &plan.sizes {
        let crop = NamedImage {
            name: format!("{}@{size}", image.name),
            image: image.image.crop_center(size, size)?,
        };
        let noisy = noisy_realization(&crop, plan.zeta, plan.base_seed, settings)?;
        let prepared = prepare(&noisy, plan.delta, plan.rho, plan.rank, settings.geodesic);
        for &backend in &plan.backends {
            let key = RunKey {
                image_name: &crop.name,
                zeta: plan.zeta,
                backend,
                delta: plan.delta,
                rho: plan.rho,
                rank: plan.rank,
            };
            let seed = key.seed(plan.base_seed);
            let run = prepared.as_ref().map_err(|e| GgdError::Invalid(e.to_string())).and_then(|p| {
                let opts = BackendOptions {
                    seed,
                    ..settings.backend_options.clone()
                };
                let timed = time_backend(p, backend, plan.rank, &opts, plan.repetitions)?;
                let metrics = MetricReport::compute(&crop.image, &timed.image)?;
                Ok((metrics, p.ms + timed.ms, timed.converged))
            });
            let (metrics, wall_ms, converged) = match run {
                Ok((m, ms, c)) => (Some(m), Some(ms), c),
                Err(_) => (None, None, false),
            };
            let record = BenchRecord {
                image_name: crop.name.clone(),
                zeta: plan.zeta,
                backend,
                delta: plan.delta,
                rho: plan.rho,
                rank: plan.rank,
                metrics,
                wall_ms,
                seed,
                converged,
            };
            sink(&record)?;
            out.push(TimingPoint { size, record });
        }
    }
    Ok(out)
}

/// Seconds against crop size, one polyline per backend.
pub fn timing_chart(points: &[TimingPoint], log_y: bool) -> String {
    let mut series: Vec<Series> = Vec::new();
    for p in points {
        let Some(ms) = p.record.wall_ms else { continue };
        let label = p.record.backend.name();
        let idx = match series.iter().position(|s| s.label == label) {
            Some(i) => i,
            None => {
                series.push(Series {
                    label: label.to_string(),
                    points: Vec::new(),
                });
                series.len() - 1
            }
        };
        series[idx].points.push((p.size as f64, ms / 1e3));
    }
    let chart = Chart {
        title: "Computational time".into(),
        x_label: "n (image is n x n)".into(),
        y_label: "seconds".into(),
        log_y,
    };
    line_chart(&chart, &series)
}
