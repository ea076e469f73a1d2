#pragma once

// Brute-force reference implementations used as test oracles. Everything
// here recomputes results from first principles with plain dense loops and
// deliberately shares no code with the library's optimized paths.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "corec/algorithms.hpp"
#include "corec/random.hpp"
#include "corec/ratings.hpp"

namespace oracle {

using corec::kErased;
using corec::Level;
using corec::RatingMatrix;

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline std::int64_t user_phi(const RatingMatrix& r, int u, int v) {
  std::int64_t phi = 0;
  for (int m = 0; m < r.num_items(); ++m) {
    phi += r.at(u, m) != kErased && r.at(v, m) != kErased;
  }
  return phi;
}

inline std::int64_t user_sigma(const RatingMatrix& r, int u, int v) {
  std::int64_t agree = 0;
  for (int m = 0; m < r.num_items(); ++m) {
    agree += r.at(u, m) != kErased && r.at(u, m) == r.at(v, m);
  }
  return 2 * agree - user_phi(r, u, v);
}

inline double user_normalized(const RatingMatrix& r, int u, int v) {
  std::int64_t phi = user_phi(r, u, v);
  if (phi == 0) return kNegInf;
  return static_cast<double>(user_sigma(r, u, v)) / static_cast<double>(phi);
}

inline std::int64_t user_support(const RatingMatrix& r, int u) {
  std::int64_t s = 0;
  for (int m = 0; m < r.num_items(); ++m) s += r.at(u, m) != kErased;
  return s;
}

inline double user_modified(const RatingMatrix& r, int u, int v) {
  std::int64_t s = user_support(r, v);
  if (s == 0) return kNegInf;
  return static_cast<double>(user_sigma(r, u, v)) /
         std::sqrt(static_cast<double>(s));
}

inline Level plurality(const std::vector<double>& votes) {
  int best = -1;
  for (int g = 0; g < static_cast<int>(votes.size()); ++g) {
    if (votes[g] > 0 && (best < 0 || votes[g] > votes[best])) best = g;
  }
  return best < 0 ? corec::kUnpredicted : static_cast<Level>(best + 1);
}

// index list [0, n) minus excluded, sorted by (score desc, index asc)
template <typename ScoreFn>
std::vector<int> ranked(int n, const std::vector<int>& excluded, ScoreFn score) {
  std::vector<int> ids;
  for (int w = 0; w < n; ++w) {
    bool skip = false;
    for (int e : excluded) skip = skip || (w == e);
    if (!skip) ids.push_back(w);
  }
  std::stable_sort(ids.begin(), ids.end(), [&](int a, int b) {
    double sa = score(a), sb = score(b);
    if (sa != sb) return sa > sb;
    return a < b;
  });
  return ids;
}

inline int user_anchor(const RatingMatrix& r, int u) {
  int best = -1;
  std::int64_t best_sigma = 0;
  for (int w = 0; w < r.num_users(); ++w) {
    if (w == u) continue;
    std::int64_t s = user_sigma(r, u, w);
    if (best < 0 || s > best_sigma) {
      best = w;
      best_sigma = s;
    }
  }
  return best;
}

// the anchor-route neighbor set {u, v, cs - 2 ranked by normalized
// similarity to v}
inline std::vector<int> ucr_members(const RatingMatrix& r, int u, int cs) {
  int v = user_anchor(r, u);
  std::vector<int> members = {u, v};
  auto rest = ranked(r.num_users(), {u, v},
                     [&](int w) { return user_normalized(r, v, w); });
  for (int i = 0; i < cs - 2; ++i) members.push_back(rest[i]);
  return members;
}

inline std::vector<double> row_vote(const RatingMatrix& r,
                                    const std::vector<int>& voters, int m,
                                    int levels) {
  std::vector<double> votes(levels, 0.0);
  for (int w : voters) {
    Level x = r.at(w, m);
    if (x != kErased) votes[x - 1] += 1.0;
  }
  return votes;
}

inline std::vector<std::vector<Level>> ucr_predictions(const RatingMatrix& r,
                                                       int cs) {
  std::vector<std::vector<Level>> pred(
      r.num_users(), std::vector<Level>(r.num_items(), corec::kUnpredicted));
  for (int u = 0; u < r.num_users(); ++u) {
    auto members = ucr_members(r, u, cs);
    for (int m = 0; m < r.num_items(); ++m) {
      pred[u][m] = plurality(row_vote(r, members, m, r.levels()));
    }
  }
  return pred;
}

inline std::vector<std::vector<Level>> paf_predictions(const RatingMatrix& r,
                                                       int k) {
  std::vector<std::vector<Level>> pred(
      r.num_users(), std::vector<Level>(r.num_items(), corec::kUnpredicted));
  for (int u = 0; u < r.num_users(); ++u) {
    auto order = ranked(r.num_users(), {u}, [&](int w) {
      return static_cast<double>(user_sigma(r, u, w));
    });
    std::vector<int> friends(order.begin(), order.begin() + k);
    for (int m = 0; m < r.num_items(); ++m) {
      pred[u][m] = plurality(row_vote(r, friends, m, r.levels()));
    }
  }
  return pred;
}

struct HybridTrace {
  std::vector<int> sets[3];       // candidate sets, anchor user excluded
  int winner = 0;
  std::vector<Level> super_row;   // winner's fused row
};

inline HybridTrace hybrid_trace(const RatingMatrix& r, int u, int T) {
  HybridTrace t;
  int v = user_anchor(r, u);
  t.sets[0] = {v};
  auto rest = ranked(r.num_users(), {u, v},
                     [&](int w) { return user_normalized(r, v, w); });
  for (int i = 0; i < T - 2; ++i) t.sets[0].push_back(rest[i]);
  auto by_modified = ranked(r.num_users(), {u},
                            [&](int w) { return user_modified(r, u, w); });
  t.sets[1].assign(by_modified.begin(), by_modified.begin() + (T - 1));
  auto by_sigma = ranked(r.num_users(), {u}, [&](int w) {
    return static_cast<double>(user_sigma(r, u, w));
  });
  t.sets[2].assign(by_sigma.begin(), by_sigma.begin() + (T - 1));

  std::vector<std::vector<Level>> supers(3);
  std::int64_t best_sigma = 0;
  int winner = -1;
  for (int z = 0; z < 3; ++z) {
    supers[z].resize(r.num_items());
    for (int m = 0; m < r.num_items(); ++m) {
      supers[z][m] = plurality(row_vote(r, t.sets[z], m, r.levels()));
    }
    std::int64_t phi = 0, agree = 0;
    for (int m = 0; m < r.num_items(); ++m) {
      Level mine = r.at(u, m);
      if (mine != kErased && supers[z][m] != corec::kUnpredicted) {
        ++phi;
        agree += supers[z][m] == mine;
      }
    }
    std::int64_t sigma = 2 * agree - phi;
    if (winner < 0 || sigma > best_sigma) {
      winner = z;
      best_sigma = sigma;
    }
  }
  t.winner = winner;
  t.super_row = supers[winner];
  return t;
}

inline Level cor_prediction(const RatingMatrix& r, int u, int m, int ucs,
                            int ics) {
  std::vector<int> fu = ucr_members(r, u, ucs);
  RatingMatrix rt = r.transposed();
  std::vector<int> nm = ucr_members(rt, m, ics);
  std::vector<double> votes(r.levels(), 0.0);
  for (int w : fu) {
    for (int l : nm) {
      Level x = r.at(w, l);
      if (x != kErased) votes[x - 1] += 1.0;
    }
  }
  return plurality(votes);
}

inline Level hcor_prediction(const RatingMatrix& r, int u, int m, int tu,
                             int ti) {
  HybridTrace ut = hybrid_trace(r, u, tu);
  RatingMatrix rt = r.transposed();
  HybridTrace it = hybrid_trace(rt, m, ti);
  const auto& fu = ut.sets[ut.winner];
  const auto& nm = it.sets[it.winner];
  std::vector<double> score(r.levels(), 0.0);
  for (int g = 1; g <= r.levels(); ++g) {
    double c1 = 0, c2 = 0, c3 = 0;
    for (int v : fu) c1 += r.at(v, m) == g;
    for (int n : nm) c2 += r.at(u, n) == g;
    for (int v : fu) {
      for (int n : nm) c3 += r.at(v, n) == g;
    }
    score[g - 1] = c1 + c2 + std::sqrt(c3);
  }
  return plurality(score);
}

// Exact E[number of observed entries]: walk the grid and add each entry's
// observation probability.
inline double expected_observed_by_enumeration(
    const corec::ClusterModel& clusters, double alpha, double beta) {
  double total = 0.0;
  for (std::size_t u = 0; u < clusters.user_rich.size(); ++u) {
    for (std::size_t m = 0; m < clusters.item_rich.size(); ++m) {
      total += (clusters.user_rich[u] || clusters.item_rich[m]) ? beta : alpha;
    }
  }
  return total;
}

// Exact E[similarity] of two users with observation probabilities qu, qv and
// truth rows bu, bv: per item, sum over rating pairs of the joint probability
// times the +/-1 contribution.
inline double expected_similarity_by_enumeration(
    const std::vector<Level>& bu, const std::vector<Level>& bv, double qu,
    double qv, double p, int levels) {
  double total = 0.0;
  auto level_prob = [&](Level truth, int g) {
    return g == truth ? p : (1.0 - p) / (levels - 1);
  };
  for (std::size_t m = 0; m < bu.size(); ++m) {
    double agree = 0.0;
    for (int g = 1; g <= levels; ++g) {
      agree += level_prob(bu[m], g) * level_prob(bv[m], g);
    }
    total += qu * qv * (2.0 * agree - 1.0);
  }
  return total;
}

// Random sparse matrix; each entry observed with prob density, uniform level.
inline RatingMatrix random_matrix(int users, int items, int levels,
                                  double density, std::uint64_t seed) {
  corec::Rng rng(seed);
  corec::RatingMatrixBuilder b(users, items, levels);
  for (int u = 0; u < users; ++u) {
    for (int m = 0; m < items; ++m) {
      if (rng.bernoulli(density)) {
        b.set(u, m, 1 + static_cast<int>(rng.below(levels)));
      }
    }
  }
  return std::move(b).build();
}

}  // namespace oracle
