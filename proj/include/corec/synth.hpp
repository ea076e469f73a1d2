#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "corec/ratings.hpp"

namespace corec {

/// Parameters of the generative model: a K x K block preference matrix,
/// a biased rating channel (truth revealed with probability p, any other
/// level uniformly otherwise), and a heterogeneous erasure channel
/// (entries with an information-rich endpoint observed with probability
/// beta, all-sparse entries with probability alpha).
struct SynthConfig {
  int num_users = 0;
  int num_items = 0;
  int num_clusters = 1;
  int levels = 2;
  double truth_prob = 0.9;  // p, must exceed 1/levels
  double alpha = 0.05;      // observation probability, sparse entities
  double beta = 0.5;        // observation probability, rich entities
  int eta = 2;              // cap on rich entities per cluster
  int rich_users_per_cluster = 2;  // 0 (none) or in [2, eta]
  int rich_items_per_cluster = 2;
  double mu_cap = 0.5;  // separability bound on cross-cluster agreement
  std::uint64_t seed = 0;
  int max_preference_retries = 1000;

  int user_cluster_size() const { return num_users / num_clusters; }
  int item_cluster_size() const { return num_items / num_clusters; }

  /// Throws std::invalid_argument when a model condition is violated.
  void validate() const;
};

/// key = value lines; '#' starts a comment. Unknown keys are an error.
SynthConfig load_synth_config(const std::filesystem::path& path);

struct PreferenceDraw {
  PreferenceMatrix matrix;
  ClusterModel clusters;
  double achieved_mu_users = 0.0;
  double achieved_mu_items = 0.0;
};

/// Draws K x K block values i.i.d. uniform over {1..G}, rejecting until both
/// fractional-separability conditions hold with agreement <= mu_cap.
/// Cluster assignments are contiguous index blocks; the rich entities are
/// the first indices of each cluster.
PreferenceDraw generate_preferences(const SynthConfig& cfg);

/// Biased rating channel: every entry of the dense output equals the true
/// preference with probability p and each wrong level with (1-p)/(G-1).
RatingMatrix apply_biased_channel(const PreferenceMatrix& truth, double p,
                                  std::uint64_t seed);

/// Independent per-entry erasure. An entry is observed with probability beta
/// when either endpoint is information-rich and alpha otherwise.
RatingMatrix apply_erasure(const RatingMatrix& dense,
                           const ClusterModel& clusters, double alpha,
                           double beta, std::uint64_t seed);

struct GeneratedInstance {
  PreferenceMatrix truth;
  ClusterModel clusters;
  RatingMatrix observed;
  SynthConfig config;
  double achieved_mu_users = 0.0;
  double achieved_mu_items = 0.0;
};

/// Full pipeline: preferences -> rating channel -> erasure channel.
GeneratedInstance generate_instance(const SynthConfig& cfg);

/// Exact E[number of observed entries] under the generator:
/// beta * #(entries with a rich endpoint) + alpha * #(all-sparse entries).
double expected_observations(const SynthConfig& cfg);

/// The sample-complexity scales of the recovery theorems, evaluated at cfg,
/// with regime flags. Asymptotic omega(.) conditions are operationalized as
/// ">= omega_constant * scale".
struct ThresholdReport {
  // clustering model
  double clustering_necessary_alpha;    // K / U; recovery impossible below
  double clustering_sufficient_alpha;   // K ln M / M
  double clustering_sufficient_alpha_given_beta;  // ln M / (M beta)
  // co-clustering model
  double coclustering_necessary_alpha;  // K^2 / (U M)
  double coclustering_necessary_beta;   // K / (eta (M + U) - eta^2 K)
  double coclustering_sample_scale;     // K^2 ln M
  double clustering_sample_scale;       // M K ln M
  double cluster_count_cap;             // M / ln M; model assumes K = O(cap)

  double expected_observed;             // E[X_R]
  double omega_constant;

  bool below_clustering_necessary;      // alpha <= K / U
  bool clustering_sufficient;           // Theorem-2 regime
  bool below_coclustering_necessary;    // Theorem-3 regime (both bounds)
  bool coclustering_sufficient;         // Theorem-4 regime
  bool cluster_count_ok;                // K <= M / ln M
};

ThresholdReport thresholds(const SynthConfig& cfg, double omega_constant = 1.0);

/// Probability two observed ratings agree when the underlying preferences
/// are equal: p^2 + (1-p)^2 / (G-1).
double same_pref_agree_prob(double p, int levels);

/// Probability two observed ratings agree when the underlying preferences
/// differ: (1-p^2)/(G-1) - ((1-p)/(G-1))^2.
double diff_pref_agree_prob(double p, int levels);

/// Closed-form expected similarity for the six user-pair cases:
///   1 same cluster, rich/rich        4 cross cluster, rich/sparse
///   2 same cluster, rich/sparse      5 same cluster, sparse/sparse
///   3 cross cluster, rich/rich       6 cross cluster, sparse/sparse
/// Same-cluster cases are exact (lower == upper); cross-cluster cases bound
/// the expectation via the agreement fraction mu.
struct ExpectedSimilarity {
  double lower;
  double upper;
};
ExpectedSimilarity expected_similarity(int pair_case, const SynthConfig& cfg,
                                       double mu);

/// Expected co-rating: scenario 1 = both rich (M beta^2),
/// scenario 2 = rich/sparse (M alpha beta).
double expected_co_rating(int scenario, const SynthConfig& cfg);

void write_clusters_csv(const std::filesystem::path& path,
                        const ClusterModel& clusters);

}  // namespace corec
