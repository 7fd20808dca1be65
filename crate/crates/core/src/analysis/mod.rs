//! Profile analysis: correlation filter, PCA maps, clustering of importance
//! vectors and summary reports.

pub mod cluster;
pub mod pca;
pub mod reports;
pub mod stats;

pub use cluster::{adjusted_rand_index, kmeans, select_k, silhouette, KMeans, KSelection};
pub use pca::{fit_pca, project_centroids, Pca};
pub use reports::{ai_preference_rate, cluster_membership_report, convex_hull, radar_table, reader_ai_rates, RateScope};
pub use stats::{correlation_matrix, redundancy_report, CorrelationMatrix, RedundantPair};
