#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace corec {

/// Rating levels are 1..G; 0 marks an erased (unobserved) entry.
using Level = std::uint8_t;
inline constexpr Level kErased = 0;

struct Entry {
  std::int32_t index;  // column (or row, on the transposed axis)
  Level level;
  bool operator==(const Entry&) const = default;
};

struct Position {
  std::int32_t user;
  std::int32_t item;
  auto operator<=>(const Position&) const = default;
};

struct RatingTriple {
  std::int32_t user;  // 0-based
  std::int32_t item;  // 0-based
  std::int32_t rating;
};

/// Sparse U x M matrix of observed ratings. Immutable after construction;
/// safe to share across threads.
class RatingMatrix {
 public:
  RatingMatrix() = default;
  RatingMatrix(int num_users, int num_items, int levels);

  /// Duplicate (user, item) triples keep the last occurrence.
  static RatingMatrix from_triples(int num_users, int num_items, int levels,
                                   std::span<const RatingTriple> triples);

  int num_users() const { return num_users_; }
  int num_items() const { return num_items_; }
  int levels() const { return levels_; }

  std::span<const Entry> row(int u) const { return rows_[u]; }
  int support_size(int u) const { return static_cast<int>(rows_[u].size()); }

  /// Observed level at (u, m), or kErased.
  Level at(int u, int m) const;

  std::int64_t num_observed() const { return observed_; }

  /// All observed positions, sorted by (user, item).
  std::vector<Position> positions() const;

  RatingMatrix transposed() const;

  /// Submatrix keeping only the given positions (same dimensions).
  RatingMatrix restricted_to(std::span<const Position> keep) const;

  /// Copy with one extra user row appended. `dense_row` has length M with
  /// kErased for unobserved entries.
  RatingMatrix with_appended_user(std::span<const Level> dense_row) const;

  bool operator==(const RatingMatrix&) const = default;

 private:
  int num_users_ = 0;
  int num_items_ = 0;
  int levels_ = 2;
  std::int64_t observed_ = 0;
  std::vector<std::vector<Entry>> rows_;  // each sorted by index

  friend class RatingMatrixBuilder;
};

/// Accumulates entries (last write wins), then freezes into a RatingMatrix.
class RatingMatrixBuilder {
 public:
  RatingMatrixBuilder(int num_users, int num_items, int levels);
  void set(int u, int m, int level);
  RatingMatrix build() &&;

 private:
  RatingMatrix m_;
};

struct ClusterModel {
  int num_clusters = 1;
  std::vector<int> user_cluster;             // size U
  std::vector<int> item_cluster;             // size M
  std::vector<std::uint8_t> user_rich;       // size U, 0/1
  std::vector<std::uint8_t> item_rich;       // size M, 0/1

  bool is_user_rich(int u) const { return user_rich[u] != 0; }
  bool is_item_rich(int m) const { return item_rich[m] != 0; }
  int num_rich_users() const;
  int num_rich_items() const;
};

/// Ground-truth preference matrix. Either a dense U x M value grid or a
/// compact K x K block matrix plus cluster assignments.
class PreferenceMatrix {
 public:
  static PreferenceMatrix dense(int num_users, int num_items, int levels,
                                std::vector<Level> values);
  static PreferenceMatrix blocks(int num_users, int num_items, int levels,
                                 int user_clusters, int item_clusters,
                                 std::vector<Level> block_values,
                                 std::vector<int> user_cluster,
                                 std::vector<int> item_cluster);

  int num_users() const { return num_users_; }
  int num_items() const { return num_items_; }
  int levels() const { return levels_; }
  bool is_block_form() const { return !block_values_.empty(); }

  Level at(int u, int m) const;

  Level block_value(int user_cluster, int item_cluster) const;

  /// Fraction of items on which the two users' rows agree.
  double row_agreement(int u, int v) const;
  /// Fraction of users on which the two items' columns agree.
  double column_agreement(int m, int n) const;

 private:
  int num_users_ = 0, num_items_ = 0, levels_ = 2;
  std::vector<Level> values_;        // dense form
  int user_clusters_ = 0, item_clusters_ = 0;
  std::vector<Level> block_values_;  // block form, row-major K_u x K_i
  std::vector<int> user_cluster_, item_cluster_;
};

/// Exhaustive fractional-separability check: the largest cross-cluster
/// agreement fraction, and whether same-cluster rows agree everywhere.
struct SeparabilityCheck {
  double max_cross_agreement = 0.0;
  bool within_cluster_consistent = true;
};
SeparabilityCheck check_user_separability(const PreferenceMatrix& b,
                                          const ClusterModel& clusters);
SeparabilityCheck check_item_separability(const PreferenceMatrix& b,
                                          const ClusterModel& clusters);

struct MaskSplit {
  std::vector<Position> train;  // sorted
  std::vector<Position> test;   // sorted
  double hide_fraction = 0.0;
  std::uint64_t seed = 0;
};

enum class RatingsFormat { movielens_dat, csv_triples };

/// Loads a ratings file. Ids in the file are 1-based and map to index id-1;
/// dimensions are the largest ids seen, so the grid matches the published
/// dataset shape even when some ids never occur.
/// `levels_override` fixes G; 0 infers it as the maximum observed rating.
RatingMatrix load_ratings(const std::filesystem::path& path,
                          RatingsFormat format, int levels_override = 0);

/// Two-level reclassification: > threshold becomes level 2 ("liked", the
/// +1 label), <= threshold becomes level 1. Support is unchanged.
RatingMatrix quantize_binary(const RatingMatrix& r, double threshold = 3.5);
inline constexpr Level kDisliked = 1;
inline constexpr Level kLiked = 2;

/// Uniformly random partition of the support; round(hide_fraction * |support|)
/// positions go to test. Deterministic per seed.
MaskSplit split_mask(const RatingMatrix& r, double hide_fraction,
                     std::uint64_t seed);

/// Flips each observed entry of a binary matrix with probability flip_prob.
RatingMatrix flip_noise(const RatingMatrix& r, double flip_prob,
                        std::uint64_t seed);

void write_triples_csv(const std::filesystem::path& path,
                       const RatingMatrix& r);
void write_mask_csv(const std::filesystem::path& path, const MaskSplit& mask);
MaskSplit read_mask_csv(const std::filesystem::path& path);

}  // namespace corec
