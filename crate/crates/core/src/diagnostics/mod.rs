//! Imbalance statistics, KS tests, clustering purity and classification
//! metrics.

pub mod ks;
pub mod metrics;
pub mod projection;
pub mod purity;
pub mod report;
pub mod stats;

pub use ks::{ks_pvalue, ks_stat, ks_test, KsMethod, KsResult};
pub use metrics::{classification_metrics, ClassMetrics, Metrics};
pub use projection::{pca_2d, write_projection_csv};
pub use purity::cluster_purity;
pub use report::{imbalance_report, ImbalanceReport, NamedKs, TopicLabelReport, DEFAULT_TOP_K};
pub use stats::{distribution_stats, population_std, DistributionReport};
