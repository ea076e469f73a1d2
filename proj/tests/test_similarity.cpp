#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "corec/similarity.hpp"
#include "oracles.hpp"

using namespace corec;

namespace {

// the worked pair: u = [1,*,2,1,*], v = [1,2,2,2,*]
RatingMatrix worked_pair() {
  RatingMatrixBuilder b(2, 5, 2);
  b.set(0, 0, 1);
  b.set(0, 2, 2);
  b.set(0, 3, 1);
  b.set(1, 0, 1);
  b.set(1, 1, 2);
  b.set(1, 2, 2);
  b.set(1, 3, 2);
  return std::move(b).build();
}

}  // namespace

TEST_CASE("co-rating counts the overlap of two supports") {
  RatingMatrix r = worked_pair();
  CHECK(co_rating(r, 0, 1, Axis::users) == 3);
}

TEST_CASE("similarity is agreements minus disagreements") {
  RatingMatrix r = worked_pair();
  // agrees on items 0 and 2, disagrees on 3
  CHECK(similarity(r, 0, 1, Axis::users) == 1);
  CHECK(normalized_similarity(r, 0, 1, Axis::users) ==
        doctest::Approx(1.0 / 3.0));
}

TEST_CASE("disjoint supports co-rate nothing and have no normalized score") {
  RatingMatrixBuilder b(2, 4, 2);
  b.set(0, 0, 1);
  b.set(0, 1, 1);
  b.set(1, 2, 2);
  b.set(1, 3, 2);
  RatingMatrix r = std::move(b).build();
  CHECK(co_rating(r, 0, 1, Axis::users) == 0);
  CHECK(similarity(r, 0, 1, Axis::users) == 0);
  CHECK(normalized_similarity(r, 0, 1, Axis::users) == kUndefinedScore);
  CHECK(normalized_similarity(r, 0, 1, Axis::users) < -1.0);
}

TEST_CASE("identical full rows agree everywhere") {
  RatingMatrixBuilder b(2, 5, 3);
  for (int m = 0; m < 5; ++m) {
    b.set(0, m, 1 + m % 3);
    b.set(1, m, 1 + m % 3);
  }
  RatingMatrix r = std::move(b).build();
  CHECK(co_rating(r, 0, 1, Axis::users) == 5);
  CHECK(similarity(r, 0, 1, Axis::users) == 5);
  CHECK(normalized_similarity(r, 0, 1, Axis::users) == 1.0);
}

TEST_CASE("opposite binary rows disagree everywhere") {
  RatingMatrixBuilder b(2, 4, 2);
  for (int m = 0; m < 4; ++m) {
    b.set(0, m, 1);
    b.set(1, m, 2);
  }
  RatingMatrix r = std::move(b).build();
  CHECK(similarity(r, 0, 1, Axis::users) == -4);
}

TEST_CASE("self-pairs are rejected") {
  RatingMatrix r = worked_pair();
  CHECK_THROWS_AS(co_rating(r, 1, 1, Axis::users), std::invalid_argument);
  CHECK_THROWS_AS(similarity(r, 0, 0, Axis::users), std::invalid_argument);
}

TEST_CASE("modified normalized similarity divides by the second support") {
  // sigma = 6 against a row with 9 ratings -> 6 / sqrt(9) = 2.0
  RatingMatrixBuilder b(2, 9, 2);
  for (int m = 0; m < 9; ++m) b.set(1, m, 1);
  for (int m = 0; m < 6; ++m) b.set(0, m, 1);
  RatingMatrix r = std::move(b).build();
  CHECK(similarity(r, 0, 1, Axis::users) == 6);
  CHECK(modified_normalized_similarity(r, 0, 1, Axis::users) ==
        doctest::Approx(2.0));
  // asymmetry: the denominator follows the second argument
  CHECK(modified_normalized_similarity(r, 1, 0, Axis::users) ==
        doctest::Approx(6.0 / std::sqrt(6.0)));
}

TEST_CASE("modified normalized similarity of an empty support is undefined") {
  RatingMatrixBuilder b(2, 4, 2);
  b.set(0, 0, 1);
  RatingMatrix r = std::move(b).build();
  CHECK(modified_normalized_similarity(r, 0, 1, Axis::users) ==
        kUndefinedScore);
}

TEST_CASE("identical full binary rows score support over its square root") {
  RatingMatrixBuilder b(2, 4, 2);
  for (int m = 0; m < 4; ++m) {
    b.set(0, m, 2);
    b.set(1, m, 2);
  }
  RatingMatrix r = std::move(b).build();
  CHECK(modified_normalized_similarity(r, 0, 1, Axis::users) ==
        doctest::Approx(2.0));
}

TEST_CASE("similarity table matches pairwise recomputation") {
  RatingMatrix r = oracle::random_matrix(20, 30, 3, 0.3, 904);
  SimilarityTable t = SimilarityTable::build(r, Axis::users);
  Rng rng(1);
  for (int i = 0; i < 50; ++i) {
    int a = static_cast<int>(rng.below(20));
    int b = static_cast<int>(rng.below(20));
    if (a == b) continue;
    CHECK(t.phi(a, b) == oracle::user_phi(r, a, b));
    CHECK(t.sigma(a, b) == oracle::user_sigma(r, a, b));
    CHECK(t.sigma(a, b) == similarity(r, a, b, Axis::users));
    CHECK(t.modified_normalized(a, b) ==
          doctest::Approx(oracle::user_modified(r, a, b)));
  }
  CHECK(t.size() == 20);
}

TEST_CASE("two users produce exactly one pair") {
  RatingMatrix r = worked_pair();
  SimilarityTable t = SimilarityTable::build(r, Axis::users);
  CHECK(t.size() == 2);
  CHECK(t.phi(0, 1) == 3);
  CHECK(t.phi(1, 0) == 3);  // symmetric accessors
  CHECK(t.sigma(0, 1) == t.sigma(1, 0));
}

TEST_CASE("parallel and serial table builds are identical") {
  RatingMatrix r = oracle::random_matrix(40, 60, 4, 0.25, 905);
  SimilarityTable serial = SimilarityTable::build(r, Axis::users, 1);
  SimilarityTable parallel = SimilarityTable::build(r, Axis::users, 4);
  CHECK(serial == parallel);
  SimilarityTable items_serial = SimilarityTable::build(r, Axis::items, 1);
  SimilarityTable items_parallel = SimilarityTable::build(r, Axis::items, 3);
  CHECK(items_serial == items_parallel);
}

TEST_CASE("item-axis scores equal user-axis scores on the transpose") {
  RatingMatrix r = oracle::random_matrix(12, 9, 3, 0.4, 906);
  RatingMatrix t = r.transposed();
  for (int m = 0; m < r.num_items(); ++m) {
    for (int n = m + 1; n < r.num_items(); ++n) {
      CHECK(similarity(r, m, n, Axis::items) ==
            similarity(t, m, n, Axis::users));
      CHECK(co_rating(r, m, n, Axis::items) ==
            co_rating(t, m, n, Axis::users));
    }
  }
}

TEST_CASE("permuting item order leaves user-axis scores unchanged") {
  RatingMatrix r = oracle::random_matrix(10, 15, 3, 0.4, 907);
  // reverse the item order
  RatingMatrixBuilder b(10, 15, 3);
  for (const auto& pos : r.positions()) {
    b.set(pos.user, 14 - pos.item, r.at(pos.user, pos.item));
  }
  RatingMatrix perm = std::move(b).build();
  for (int u = 0; u < 10; ++u) {
    for (int v = u + 1; v < 10; ++v) {
      CHECK(similarity(r, u, v, Axis::users) ==
            similarity(perm, u, v, Axis::users));
      CHECK(co_rating(r, u, v, Axis::users) ==
            co_rating(perm, u, v, Axis::users));
    }
  }
}

TEST_CASE("binary similarity equals the signed dot product of +-1 rows") {
  RatingMatrix r = oracle::random_matrix(8, 12, 2, 0.5, 908);
  for (int u = 0; u < 8; ++u) {
    for (int v = u + 1; v < 8; ++v) {
      std::int64_t dot = 0;
      for (int m = 0; m < 12; ++m) {
        Level a = r.at(u, m), b = r.at(v, m);
        if (a != kErased && b != kErased) {
          dot += (a == 2 ? 1 : -1) * (b == 2 ? 1 : -1);
        }
      }
      CHECK(similarity(r, u, v, Axis::users) == dot);
    }
  }
}

TEST_CASE("agreements plus disagreements equal the co-rating") {
  RatingMatrix r = oracle::random_matrix(10, 10, 4, 0.5, 909);
  SimilarityTable t = SimilarityTable::build(r, Axis::users);
  for (int u = 0; u < 10; ++u) {
    for (int v = u + 1; v < 10; ++v) {
      std::int64_t agree = t.agreements(u, v);
      std::int64_t disagree = t.phi(u, v) - agree;
      CHECK(agree + disagree == t.phi(u, v));
      CHECK(t.sigma(u, v) == agree - disagree);
      CHECK(std::llabs(t.sigma(u, v)) <= t.phi(u, v));
      // same parity
      CHECK((t.sigma(u, v) - t.phi(u, v)) % 2 == 0);
    }
  }
}

TEST_CASE("table csv export lists every unordered pair") {
  RatingMatrix r = oracle::random_matrix(5, 6, 2, 0.6, 910);
  SimilarityTable t = SimilarityTable::build(r, Axis::users);
  auto path = std::filesystem::temp_directory_path() / "simtable.csv";
  t.write_csv(path);
  std::ifstream in(path);
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) ++lines;
  CHECK(lines == 1 + 5 * 4 / 2);
}
