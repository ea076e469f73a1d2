#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <vector>

#include "corec/ratings.hpp"

namespace corec {

enum class Axis { users, items };

/// Sentinel for scores whose denominator is empty (no co-ratings, or an
/// empty support). Compares below every defined score, so such pairs are
/// never selected by an argmax.
inline constexpr double kUndefinedScore =
    -std::numeric_limits<double>::infinity();

inline bool is_defined_score(double s) { return s != kUndefinedScore; }

/// Co-rating: number of positions both entities have observed.
std::int64_t co_rating(const RatingMatrix& r, int a, int b, Axis axis);

/// Similarity: agreements minus disagreements over co-rated positions,
/// i.e. 2 * #agreements - co_rating.
std::int64_t similarity(const RatingMatrix& r, int a, int b, Axis axis);

/// similarity / co_rating, in [-1, 1]; kUndefinedScore when co_rating = 0.
double normalized_similarity(const RatingMatrix& r, int a, int b, Axis axis);

/// similarity(a, b) / sqrt(|support of b|). Asymmetric: the denominator
/// counts the SECOND entity's ratings. kUndefinedScore when b rated nothing.
double modified_normalized_similarity(const RatingMatrix& r, int a, int b,
                                      Axis axis);

/// All-pairs co-rating and agreement counts on one axis, packed triangular.
/// Built by accumulating over the opposite axis' observation lists, so the
/// cost is sum over positions of (list length)^2 rather than n^2 * M.
class SimilarityTable {
 public:
  /// Deterministic at any thread count: each worker scans all lists but
  /// only accumulates pairs it owns.
  static SimilarityTable build(const RatingMatrix& r, Axis axis,
                               int threads = 1);

  Axis axis() const { return axis_; }
  int size() const { return n_; }

  std::uint32_t phi(int a, int b) const { return phi_[pair_index(a, b)]; }
  std::uint32_t agreements(int a, int b) const {
    return agree_[pair_index(a, b)];
  }
  std::int64_t sigma(int a, int b) const {
    std::size_t i = pair_index(a, b);
    return 2 * static_cast<std::int64_t>(agree_[i]) - phi_[i];
  }
  double normalized(int a, int b) const {
    std::size_t i = pair_index(a, b);
    if (phi_[i] == 0) return kUndefinedScore;
    return (2.0 * agree_[i] - phi_[i]) / phi_[i];
  }
  double modified_normalized(int a, int b) const;

  std::int64_t support(int e) const { return support_[e]; }

  /// Appends the last entity of `augmented` (its axis size must be size()+1),
  /// computing only the new pairwise scores. Existing pairs are untouched.
  void append_entity(const RatingMatrix& augmented);

  void write_csv(const std::filesystem::path& path) const;

  bool operator==(const SimilarityTable&) const = default;

 private:
  // pair (a, b), a != b, lives at hi*(hi-1)/2 + lo; appending an entity
  // extends the arrays without moving existing cells.
  std::size_t pair_index(int a, int b) const;

  Axis axis_ = Axis::users;
  int n_ = 0;
  std::vector<std::uint32_t> phi_;
  std::vector<std::uint32_t> agree_;
  std::vector<std::int32_t> support_;
};

}  // namespace corec
