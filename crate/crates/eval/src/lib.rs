//! Benchmarks for reconstruction methods: Bures sweeps over the number of
//! measurements, element-wise error maps and eigenvalue statistics.

pub mod errormap;
pub mod parallel;
pub mod psd;
pub mod report;
pub mod svg;
pub mod sweep;

pub use errormap::{error_map, error_map_from, ErrorMap};
pub use psd::{psd_stats, PsdStats};
pub use report::{sweeps_from_csv, sweeps_to_csv};
pub use sweep::{bures_sweep, reconstruct_sweep, Method, SweepResult, SweepRow, SweepSpec};
