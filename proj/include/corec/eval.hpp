#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "corec/algorithms.hpp"
#include "corec/ratings.hpp"
#include "corec/synth.hpp"

namespace corec {

/// Per-algorithm knobs. Zero means "resolve automatically": theory cluster
/// sizes fall back to the similarity-gap estimate, as do the hybrid set
/// sizes and the baseline's k.
struct AlgoParams {
  int cluster_size_users = 0;
  int cluster_size_items = 0;
  int set_size_users = 0;  // hybrid T on the user axis
  int set_size_items = 0;
  int top_k = 0;           // paf
};

struct ProtocolParams {
  std::string algorithm = "hcor";  // ucr icr cor hucr hicr hcor paf
  AlgoParams algo;
  double hide_fraction = 0.7;
  double noise = 0.0;  // train-entry flip probability
  double quantize_threshold = 3.5;
  std::uint64_t seed = 0;
  int threads = 1;
  std::vector<int> top_x = {1, 2, 3, 4, 5, 6};
  std::vector<int> sparse_thresholds = {30,  40,  50,  60,  70,  80,  90,
                                        100, 110, 120, 130, 140, 150, 160,
                                        170, 180, 190, 200};
};

struct EvalCounts {
  std::int64_t test_size = 0;
  std::int64_t predicted = 0;
  std::int64_t unpredicted = 0;
  std::int64_t correct = 0;
  std::int64_t wrong = 0;
};

/// Entries with no prediction count as errors in every metric.
struct EvalReport {
  std::string algorithm;
  AlgoParams resolved;
  double hide_fraction = 0.0;
  double noise = 0.0;
  std::uint64_t seed = 0;

  EvalCounts counts;
  double overall_error = 0.0;
  std::map<int, double> top_x_error;
  std::map<int, double> sparse_user_error;          // absent = empty bucket
  std::map<int, std::int64_t> sparse_user_entries;  // test entries per bucket

  std::string to_json() const;
  static EvalReport from_json(const std::string& text);
  void write_json(const std::filesystem::path& path) const;
  void write_csv(const std::filesystem::path& path) const;
};

EvalCounts eval_counts(const CompletedMatrix& pred, const RatingMatrix& truth,
                       std::span<const Position> test);

/// Fraction of test entries wrong or unpredicted.
double overall_error(const CompletedMatrix& pred, const RatingMatrix& truth,
                     std::span<const Position> test);

/// Accuracy at the top: per user, the x test items ranked highest by the
/// liked-vote margin; an error is a selected item whose hidden label is not
/// `liked` (or that has no prediction). Users with fewer than x test items
/// contribute all of them; the denominator counts contributed items.
double top_x_error(const CompletedMatrix& pred, const RatingMatrix& truth,
                   std::span<const Position> test, int x,
                   Level liked = kLiked);

/// Error over test entries of users whose TRAIN rating count is below each
/// threshold. Empty buckets are absent from the result.
std::map<int, double> sparse_user_error(const CompletedMatrix& pred,
                                        const RatingMatrix& truth,
                                        const MaskSplit& mask,
                                        std::span<const int> thresholds);

/// All metrics of one completed run. `truth` is the quantized matrix the
/// mask was drawn from (pre-noise); metrics are functions of (pred, truth,
/// mask) only, so rerunning on stored predictions reproduces the report.
EvalReport evaluate(const CompletedMatrix& pred, const RatingMatrix& truth,
                    const MaskSplit& mask, const ProtocolParams& params,
                    const AlgoParams& resolved);

/// Fills in zero-valued algorithm parameters from the train matrix (gap
/// estimates anchored at high-support entities).
AlgoParams resolve_params(const RatingMatrix& train, const std::string& algo,
                          AlgoParams requested);

CompletedMatrix run_algorithm(const RatingMatrix& train,
                              const std::string& algo,
                              const AlgoParams& params, const Targets& targets,
                              int threads);

/// The full §-style protocol: quantize (unless already binary), hide, flip
/// train entries with probability `noise`, run the algorithm on train, and
/// score all three metrics on the hidden entries. Reproducible by seed.
EvalReport run_protocol(const RatingMatrix& data, const ProtocolParams& params);

enum class SweepParam { alpha, beta, truth_prob };

struct SweepRow {
  double value = 0.0;
  int trial = 0;
  std::uint64_t seed = 0;
  bool recovered = false;
  std::int64_t observed = 0;
  double expected_observed = 0.0;
};

struct SweepPoint {
  double value = 0.0;
  double recovery_fraction = 0.0;
  ThresholdReport thresholds;
};

struct SweepResult {
  std::string param;
  std::string algorithm;
  int trials = 0;
  std::vector<SweepRow> rows;      // one per (point, trial)
  std::vector<SweepPoint> points;  // one per grid point
};

/// Monte-Carlo recovery probability along a parameter grid. Trials run
/// concurrently on independent derived seeds; theory-mode sizes (U/K, M/K)
/// parameterize the algorithms.
SweepResult phase_sweep(const SynthConfig& base, SweepParam param, double from,
                        double to, int steps, int trials,
                        const std::string& algorithm, int threads);

void write_sweep_rows_csv(const std::filesystem::path& path,
                          const SweepResult& sweep);
void write_sweep_summary_csv(const std::filesystem::path& path,
                             const SweepResult& sweep);

std::string thresholds_to_json(const ThresholdReport& report);

}  // namespace corec
