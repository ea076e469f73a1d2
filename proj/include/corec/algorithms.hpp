#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "corec/ratings.hpp"
#include "corec/similarity.hpp"

namespace corec {

inline constexpr Level kUnpredicted = 0;

/// Entries to predict: the full grid, or a sparse set of positions (the
/// evaluation protocol only scores hidden entries, so completing the full
/// grid would be wasted work on large datasets).
class Targets {
 public:
  static Targets all() { return Targets{}; }
  static Targets at(std::vector<Position> positions);

  bool is_all() const { return is_all_; }
  std::span<const Position> positions() const { return positions_; }

 private:
  bool is_all_ = true;
  std::vector<Position> positions_;  // sorted by (user, item)
};

/// Predictions plus the per-level vote tallies that produced them. Tallies
/// are the ranking scores of the evaluation metrics (integer vote counts,
/// except the hybrid co-clustering score which carries a square root).
class CompletedMatrix {
 public:
  CompletedMatrix() = default;
  static CompletedMatrix dense(int num_users, int num_items, int levels,
                               std::string method);
  static CompletedMatrix sparse(int num_users, int num_items, int levels,
                                std::string method,
                                std::vector<Position> positions);

  int num_users() const { return num_users_; }
  int num_items() const { return num_items_; }
  int levels() const { return levels_; }
  const std::string& method() const { return method_; }
  bool is_dense() const { return positions_.empty(); }

  /// kUnpredicted when no voter had an observed rating there.
  Level at(int u, int m) const;
  std::span<const float> tallies_at(int u, int m) const;

  /// Stored positions (empty means the full grid, row-major).
  std::span<const Position> positions() const { return positions_; }

  /// True when every entry of the full grid equals the preference matrix.
  bool recovers(const PreferenceMatrix& truth) const;

  std::int64_t count_unpredicted() const;

  void write_csv(const std::filesystem::path& path) const;

  void store(std::size_t slot, Level value, std::span<const double> tallies);
  std::size_t slot_of(int u, int m) const;

 private:
  int num_users_ = 0, num_items_ = 0, levels_ = 2;
  std::string method_;
  std::vector<Position> positions_;  // empty = dense row-major grid
  std::vector<Level> values_;
  std::vector<float> tallies_;  // values_.size() * levels_
};

/// Plurality winner over per-level tallies (1-based level), smallest level
/// on ties; kUnpredicted when every tally is zero.
Level vote_argmax(std::span<const double> tallies);

enum class Provenance {
  via_rich_anchor,       // anchored on the most-similar entity
  direct_modified_norm,  // ranked by modified normalized similarity
  direct_raw,            // ranked by raw similarity
};

struct NeighborSet {
  int anchor = -1;
  std::vector<int> members;  // includes the anchor
  Provenance provenance = Provenance::via_rich_anchor;
};

/// Steps (i)-(ii) of the user-clustering algorithm: anchor on the entity
/// with the highest raw similarity to `entity`, then rank the rest by
/// normalized similarity to that anchor. members = {entity, anchor,
/// cluster_size - 2 ranked entities}. All argmax ties break to the
/// smallest index.
NeighborSet cluster_neighbors(const SimilarityTable& table, int entity,
                              int cluster_size);

// ---------------------------------------------------------------------------
// Completion algorithms. Every prediction is a plurality vote; a vote with
// no observed ballots yields kUnpredicted. Deterministic at any thread count.
// ---------------------------------------------------------------------------

/// User clustering: each user's row is voted within its own neighbor set.
CompletedMatrix ucr(const RatingMatrix& r, int cluster_size,
                    const Targets& targets = Targets::all(), int threads = 1);

/// Item clustering: mirror of ucr along the item axis.
CompletedMatrix icr(const RatingMatrix& r, int cluster_size,
                    const Targets& targets = Targets::all(), int threads = 1);

/// Co-clustering: vote over the user-set x item-set block.
CompletedMatrix cor(const RatingMatrix& r, int user_cluster_size,
                    int item_cluster_size,
                    const Targets& targets = Targets::all(), int threads = 1);

/// Hybrid user clustering: three candidate sets (via the anchor route, by
/// modified normalized similarity, by raw similarity), each fused into a
/// super-user by per-item plurality; the super-user most similar to the
/// target user supplies the row.
CompletedMatrix hucr(const RatingMatrix& r, int set_size,
                     const Targets& targets = Targets::all(), int threads = 1);

/// Hybrid item clustering: mirror of hucr along the item axis.
CompletedMatrix hicr(const RatingMatrix& r, int set_size,
                     const Targets& targets = Targets::all(), int threads = 1);

/// Hybrid co-clustering: per entry, combines the winning user set's column
/// votes, the winning item set's row votes, and the square root of the
/// block votes.
CompletedMatrix hcor(const RatingMatrix& r, int user_set_size,
                     int item_set_size,
                     const Targets& targets = Targets::all(), int threads = 1);

/// Popularity-among-friends baseline: vote among the k users with the
/// highest raw similarity (the target user itself does not vote).
CompletedMatrix paf_baseline(const RatingMatrix& r, int k,
                             const Targets& targets = Targets::all(),
                             int threads = 1);

/// Per-entry score of the hybrid co-clustering vote:
/// row votes + column votes + sqrt(block votes), per level.
std::vector<double> hcor_scores(std::span<const double> row_votes,
                                std::span<const double> column_votes,
                                std::span<const double> block_votes);

/// The candidate sets and fused super-row of one hybrid selection, exposed
/// for diagnostics and for the co-clustering pass. `rows` must be the matrix
/// whose rows are the table's axis (the transposed matrix for items).
struct HybridSelection {
  NeighborSet sets[3];
  int winner = 0;                   // index into sets
  std::vector<Level> super_row;     // fused row of the winner
  std::vector<float> super_tallies; // vote tallies behind super_row
};
HybridSelection hybrid_selection(const RatingMatrix& rows,
                                 const SimilarityTable& table, int entity,
                                 int set_size);

/// Largest consecutive drop in a descending score sequence, searched at cut
/// positions [lo, hi]; ties break to the smaller cut. Returns the number of
/// scores before the drop.
int max_gap_cut(std::span<const double> sorted_scores, int lo, int hi);

/// Cluster-size estimate from the similarity phase transition around
/// `anchor`: candidates are sorted by raw similarity and the largest gap
/// within [2, n/2] is taken as the cluster boundary.
int estimate_set_size(const RatingMatrix& r, int anchor, Axis axis);
int estimate_set_size(const SimilarityTable& table, int anchor);

struct ClusterSizeEstimate {
  double observed_fraction = 0.0;  // X_R / (U M)
  int size = 0;
};

/// Observation-rate-based estimate. With a cluster-count hint the size is
/// U / K_hint; otherwise falls back to the similarity-gap estimate anchored
/// at the user with the largest support.
ClusterSizeEstimate estimate_cluster_size(const RatingMatrix& r,
                                          std::optional<int> cluster_count_hint);

/// Incremental addition of one user: only the new pairwise scores are
/// computed (the table grows in place; existing pairs are untouched) and
/// only the new user's neighbor set and row are predicted.
struct IncrementalUserResult {
  RatingMatrix augmented;
  NeighborSet neighbors;
  std::vector<Level> predicted_row;
  std::vector<float> tallies;  // num_items * levels
};
IncrementalUserResult add_user_incremental(const RatingMatrix& r,
                                           SimilarityTable& user_table,
                                           std::span<const Level> dense_row,
                                           int cluster_size);

}  // namespace corec
