pub mod accuracy;
pub mod report;
pub mod roc;

pub use accuracy::{accuracy_per_song, group_stats, AccuracyReport, GroupStats, SongAccuracy, SongScores, DEFAULT_ACC_THRESHOLD};
pub use report::{evaluate_records, MetricReport, MetricValue};
pub use roc::{auc, auc_sirr, roc_points, FrameRecord, NegativeSet, RocCurve, RocPoint};
