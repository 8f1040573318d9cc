//! Utility-loss measurement and privacy-budget sweeps over the three
//! mechanisms, with CSV and JSON reports.

mod config;
mod report;
mod sweep;

pub use config::{DataSplits, DatasetSpec, EpsilonGrid, SensitivityRecord, SensitivitySource, SweepConfig};
pub use report::{
    emit_report, load_report, trend_statistics, write_report, write_rows_csv, write_summary_csv, MechanismTrend,
    ReportFormat,
};
pub use sweep::{
    average_rows, resolve_sensitivity, row_noise_seed, run_sweep, train_attacker, train_pipeline, utility_loss,
    victim_attack_accuracy, AveragedRow, Baseline, Pipeline, SweepReport, SweepRow,
};
