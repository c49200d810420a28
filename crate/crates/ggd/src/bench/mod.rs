//! Experiment harness: parameter sweeps with best-row selection, backend
//! timing over crop sizes, and their CSV and SVG output.

mod plan;
mod record;
mod svg;
mod sweep;
mod timing;

pub use plan::{noise_seed, GridLevel, RunKey, SweepPlan};
pub use record::{best_rows, read_records, read_records_from, write_records, BenchRecord, CsvSink, Criterion, HEADER};
pub use svg::{line_chart, Chart, Series};
pub use sweep::{median, noisy_realization, run_sweep, NamedImage, RunSettings};
pub use timing::{run_timing, timing_chart, TimingPlan, TimingPoint};
