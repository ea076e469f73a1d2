#include "corec/similarity.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>

#include "corec/parallel.hpp"

namespace corec {

namespace {

struct PairCounts {
  std::int64_t phi = 0;
  std::int64_t agree = 0;
};

// Walks the shorter support and binary-searches the longer one, which keeps
// the per-pair cost at the smaller support size for sparse-sparse pairs.
PairCounts count_pair(std::span<const Entry> a, std::span<const Entry> b) {
  if (a.size() > b.size()) std::swap(a, b);
  PairCounts c;
  auto it = b.begin();
  for (const auto& e : a) {
    it = std::lower_bound(it, b.end(), e.index,
                          [](const Entry& x, int v) { return x.index < v; });
    if (it == b.end()) break;
    if (it->index == e.index) {
      ++c.phi;
      c.agree += it->level == e.level;
    }
  }
  return c;
}

std::span<const Entry> axis_row(const RatingMatrix& r,
                                const RatingMatrix& transposed, Axis axis,
                                int e) {
  return axis == Axis::users ? r.row(e) : transposed.row(e);
}

void check_pair(int a, int b, int n) {
  if (a == b) throw std::invalid_argument("self-pairs are undefined");
  if (a < 0 || b < 0 || a >= n || b >= n) {
    throw std::out_of_range("entity index outside the axis");
  }
}

}  // namespace

std::int64_t co_rating(const RatingMatrix& r, int a, int b, Axis axis) {
  int n = axis == Axis::users ? r.num_users() : r.num_items();
  check_pair(a, b, n);
  if (axis == Axis::users) return count_pair(r.row(a), r.row(b)).phi;
  RatingMatrix t = r.transposed();
  return count_pair(t.row(a), t.row(b)).phi;
}

std::int64_t similarity(const RatingMatrix& r, int a, int b, Axis axis) {
  int n = axis == Axis::users ? r.num_users() : r.num_items();
  check_pair(a, b, n);
  PairCounts c;
  if (axis == Axis::users) {
    c = count_pair(r.row(a), r.row(b));
  } else {
    RatingMatrix t = r.transposed();
    c = count_pair(t.row(a), t.row(b));
  }
  return 2 * c.agree - c.phi;
}

double normalized_similarity(const RatingMatrix& r, int a, int b, Axis axis) {
  int n = axis == Axis::users ? r.num_users() : r.num_items();
  check_pair(a, b, n);
  PairCounts c;
  if (axis == Axis::users) {
    c = count_pair(r.row(a), r.row(b));
  } else {
    RatingMatrix t = r.transposed();
    c = count_pair(t.row(a), t.row(b));
  }
  if (c.phi == 0) return kUndefinedScore;
  return static_cast<double>(2 * c.agree - c.phi) / static_cast<double>(c.phi);
}

double modified_normalized_similarity(const RatingMatrix& r, int a, int b,
                                      Axis axis) {
  int n = axis == Axis::users ? r.num_users() : r.num_items();
  check_pair(a, b, n);
  RatingMatrix t;
  if (axis == Axis::items) t = r.transposed();
  auto row_a = axis == Axis::users ? r.row(a) : t.row(a);
  auto row_b = axis == Axis::users ? r.row(b) : t.row(b);
  if (row_b.empty()) return kUndefinedScore;
  PairCounts c = count_pair(row_a, row_b);
  return static_cast<double>(2 * c.agree - c.phi) /
         std::sqrt(static_cast<double>(row_b.size()));
}

std::size_t SimilarityTable::pair_index(int a, int b) const {
  check_pair(a, b, n_);
  auto hi = static_cast<std::size_t>(std::max(a, b));
  auto lo = static_cast<std::size_t>(std::min(a, b));
  return hi * (hi - 1) / 2 + lo;
}

SimilarityTable SimilarityTable::build(const RatingMatrix& r, Axis axis,
                                       int threads) {
  SimilarityTable t;
  t.axis_ = axis;
  const RatingMatrix view = axis == Axis::users ? r.transposed() : r;
  // `view` rows enumerate, per position of the opposite axis, the entities
  // that observed it; pairs within one row co-rate that position.
  const int n = axis == Axis::users ? r.num_users() : r.num_items();
  t.n_ = n;
  std::size_t cells = static_cast<std::size_t>(n) * (n - 1) / 2;
  t.phi_.assign(cells, 0);
  t.agree_.assign(cells, 0);
  t.support_.assign(n, 0);
  for (int pos = 0; pos < view.num_users(); ++pos) {
    for (const auto& e : view.row(pos)) ++t.support_[e.index];
  }
  if (n < 2) return t;

  threads = std::max(threads, 1);
  parallel_for(0, threads, threads, [&](int worker) {
    for (int pos = 0; pos < view.num_users(); ++pos) {
      auto list = view.row(pos);
      for (std::size_t j = 1; j < list.size(); ++j) {
        // owner of a cell is fixed by its higher index, so workers never
        // touch the same cell
        if (static_cast<int>(list[j].index) % threads != worker) continue;
        std::size_t base =
            static_cast<std::size_t>(list[j].index) *
            (static_cast<std::size_t>(list[j].index) - 1) / 2;
        for (std::size_t i = 0; i < j; ++i) {
          std::size_t cell = base + list[i].index;
          ++t.phi_[cell];
          t.agree_[cell] += list[i].level == list[j].level;
        }
      }
    }
  });
  return t;
}

double SimilarityTable::modified_normalized(int a, int b) const {
  if (support_[b] == 0) return kUndefinedScore;
  return static_cast<double>(sigma(a, b)) /
         std::sqrt(static_cast<double>(support_[b]));
}

void SimilarityTable::append_entity(const RatingMatrix& augmented) {
  const RatingMatrix* m = &augmented;
  RatingMatrix t;
  if (axis_ == Axis::items) {
    t = augmented.transposed();
    m = &t;
  }
  if (m->num_users() != n_ + 1) {
    throw std::invalid_argument(
        "append_entity expects exactly one new entity on the table axis");
  }
  int added = n_;
  phi_.resize(phi_.size() + added);
  agree_.resize(agree_.size() + added);
  std::size_t base = static_cast<std::size_t>(added) * (added - 1) / 2;
  for (int other = 0; other < added; ++other) {
    PairCounts c = count_pair(m->row(added), m->row(other));
    phi_[base + other] = static_cast<std::uint32_t>(c.phi);
    agree_[base + other] = static_cast<std::uint32_t>(c.agree);
  }
  support_.push_back(static_cast<std::int32_t>(m->row(added).size()));
  ++n_;
}

void SimilarityTable::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "a,b,phi,sigma\n";
  for (int b = 1; b < n_; ++b) {
    for (int a = 0; a < b; ++a) {
      out << (a + 1) << ',' << (b + 1) << ',' << phi(a, b) << ','
          << sigma(a, b) << '\n';
    }
  }
}

}  // namespace corec
