#include "corec/algorithms.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <stdexcept>
#include <unordered_map>

#include "corec/parallel.hpp"

namespace corec {

// ---------------------------------------------------------------------------
// Targets and CompletedMatrix
// ---------------------------------------------------------------------------

Targets Targets::at(std::vector<Position> positions) {
  std::sort(positions.begin(), positions.end());
  positions.erase(std::unique(positions.begin(), positions.end()),
                  positions.end());
  Targets t;
  t.is_all_ = false;
  t.positions_ = std::move(positions);
  return t;
}

CompletedMatrix CompletedMatrix::dense(int num_users, int num_items,
                                       int levels, std::string method) {
  CompletedMatrix c;
  c.num_users_ = num_users;
  c.num_items_ = num_items;
  c.levels_ = levels;
  c.method_ = std::move(method);
  c.values_.assign(static_cast<std::size_t>(num_users) * num_items,
                   kUnpredicted);
  c.tallies_.assign(c.values_.size() * levels, 0.0f);
  return c;
}

CompletedMatrix CompletedMatrix::sparse(int num_users, int num_items,
                                        int levels, std::string method,
                                        std::vector<Position> positions) {
  CompletedMatrix c;
  c.num_users_ = num_users;
  c.num_items_ = num_items;
  c.levels_ = levels;
  c.method_ = std::move(method);
  c.positions_ = std::move(positions);
  c.values_.assign(c.positions_.size(), kUnpredicted);
  c.tallies_.assign(c.values_.size() * levels, 0.0f);
  return c;
}

std::size_t CompletedMatrix::slot_of(int u, int m) const {
  if (is_dense()) {
    return static_cast<std::size_t>(u) * num_items_ + m;
  }
  Position key{u, m};
  auto it = std::lower_bound(positions_.begin(), positions_.end(), key);
  if (it == positions_.end() || !(*it == key)) {
    throw std::out_of_range("position was not predicted");
  }
  return static_cast<std::size_t>(it - positions_.begin());
}

Level CompletedMatrix::at(int u, int m) const {
  if (is_dense()) {
    return values_[static_cast<std::size_t>(u) * num_items_ + m];
  }
  Position key{u, m};
  auto it = std::lower_bound(positions_.begin(), positions_.end(), key);
  if (it == positions_.end() || !(*it == key)) return kUnpredicted;
  return values_[static_cast<std::size_t>(it - positions_.begin())];
}

std::span<const float> CompletedMatrix::tallies_at(int u, int m) const {
  std::size_t slot = slot_of(u, m);
  return {tallies_.data() + slot * levels_, static_cast<std::size_t>(levels_)};
}

void CompletedMatrix::store(std::size_t slot, Level value,
                            std::span<const double> tallies) {
  values_[slot] = value;
  float* dst = tallies_.data() + slot * levels_;
  for (int g = 0; g < levels_; ++g) dst[g] = static_cast<float>(tallies[g]);
}

bool CompletedMatrix::recovers(const PreferenceMatrix& truth) const {
  if (!is_dense() || truth.num_users() != num_users_ ||
      truth.num_items() != num_items_) {
    return false;
  }
  for (int u = 0; u < num_users_; ++u) {
    for (int m = 0; m < num_items_; ++m) {
      if (values_[static_cast<std::size_t>(u) * num_items_ + m] !=
          truth.at(u, m)) {
        return false;
      }
    }
  }
  return true;
}

std::int64_t CompletedMatrix::count_unpredicted() const {
  std::int64_t n = 0;
  for (Level v : values_) n += v == kUnpredicted;
  return n;
}

void CompletedMatrix::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "user,item,prediction";
  for (int g = 1; g <= levels_; ++g) out << ",votes_" << g;
  out << '\n';
  auto emit = [&](int u, int m, std::size_t slot) {
    out << (u + 1) << ',' << (m + 1) << ',';
    if (values_[slot] == kUnpredicted) {
      out << '*';
    } else {
      out << int(values_[slot]);
    }
    for (int g = 0; g < levels_; ++g) out << ',' << tallies_[slot * levels_ + g];
    out << '\n';
  };
  if (is_dense()) {
    for (int u = 0; u < num_users_; ++u) {
      for (int m = 0; m < num_items_; ++m) {
        emit(u, m, static_cast<std::size_t>(u) * num_items_ + m);
      }
    }
  } else {
    for (std::size_t i = 0; i < positions_.size(); ++i) {
      emit(positions_[i].user, positions_[i].item, i);
    }
  }
}

Level vote_argmax(std::span<const double> tallies) {
  int best = -1;
  double best_score = 0.0;
  for (int g = 0; g < static_cast<int>(tallies.size()); ++g) {
    if (tallies[g] > 0.0 && (best < 0 || tallies[g] > best_score)) {
      best = g;
      best_score = tallies[g];
    }
  }
  return best < 0 ? kUnpredicted : static_cast<Level>(best + 1);
}

std::vector<double> hcor_scores(std::span<const double> row_votes,
                                std::span<const double> column_votes,
                                std::span<const double> block_votes) {
  std::vector<double> s(row_votes.size());
  for (std::size_t g = 0; g < s.size(); ++g) {
    s[g] = row_votes[g] + column_votes[g] + std::sqrt(block_votes[g]);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Internal helpers
// ---------------------------------------------------------------------------

namespace {

// Per-position per-level vote counts with sparse clearing.
class VoteScratch {
 public:
  VoteScratch(int positions, int levels)
      : levels_(levels), counts_(static_cast<std::size_t>(positions) * levels,
                                 0),
        dirty_(positions, 0) {}

  void add(int position, Level level) {
    if (!dirty_[position]) {
      dirty_[position] = 1;
      touched_.push_back(position);
    }
    ++counts_[static_cast<std::size_t>(position) * levels_ + level - 1];
  }

  void add_row(std::span<const Entry> row) {
    for (const auto& e : row) add(e.index, e.level);
  }

  const std::int32_t* at(int position) const {
    return counts_.data() + static_cast<std::size_t>(position) * levels_;
  }

  std::span<const std::int32_t> touched() const { return touched_; }

  void clear() {
    for (int p : touched_) {
      dirty_[p] = 0;
      std::fill_n(counts_.begin() + static_cast<std::size_t>(p) * levels_,
                  levels_, 0);
    }
    touched_.clear();
  }

 private:
  int levels_;
  std::vector<std::int32_t> counts_;
  std::vector<std::uint8_t> dirty_;
  std::vector<std::int32_t> touched_;
};

// Top `count` indices in [0, n) excluding `self`, by score desc then index.
template <typename ScoreFn>
std::vector<int> top_by_score(int n, int self, int count, ScoreFn&& score) {
  std::vector<std::pair<double, int>> ranked;
  ranked.reserve(n - 1);
  for (int w = 0; w < n; ++w) {
    if (w == self) continue;
    ranked.emplace_back(score(w), w);
  }
  auto cmp = [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  };
  count = std::min<int>(count, static_cast<int>(ranked.size()));
  std::partial_sort(ranked.begin(), ranked.begin() + count, ranked.end(), cmp);
  std::vector<int> out(count);
  for (int i = 0; i < count; ++i) out[i] = ranked[i].second;
  return out;
}

CompletedMatrix make_output(int num_users, int num_items, int levels,
                            std::string method, const Targets& targets) {
  if (targets.is_all()) {
    return CompletedMatrix::dense(num_users, num_items, levels,
                                  std::move(method));
  }
  return CompletedMatrix::sparse(
      num_users, num_items, levels, std::move(method),
      {targets.positions().begin(), targets.positions().end()});
}

// Contiguous slot ranges of each user's targets in a sparse output.
std::vector<std::pair<std::size_t, std::size_t>> user_slot_ranges(
    std::span<const Position> positions, int num_users) {
  std::vector<std::pair<std::size_t, std::size_t>> ranges(
      num_users, {0, 0});
  std::size_t i = 0;
  while (i < positions.size()) {
    std::size_t j = i;
    while (j < positions.size() && positions[j].user == positions[i].user) ++j;
    ranges[positions[i].user] = {i, j};
    i = j;
  }
  return ranges;
}

// Sparse targets regrouped by item: slot indices sorted by (item, user).
struct ItemGroupedTargets {
  std::vector<std::pair<std::size_t, std::size_t>> ranges;  // per item
  std::vector<std::size_t> slots;  // into the output's position order
};

ItemGroupedTargets group_by_item(std::span<const Position> positions,
                                 int num_items) {
  ItemGroupedTargets g;
  g.slots.resize(positions.size());
  for (std::size_t i = 0; i < positions.size(); ++i) g.slots[i] = i;
  std::sort(g.slots.begin(), g.slots.end(), [&](std::size_t a, std::size_t b) {
    const auto& pa = positions[a];
    const auto& pb = positions[b];
    if (pa.item != pb.item) return pa.item < pb.item;
    return pa.user < pb.user;
  });
  g.ranges.assign(num_items, {0, 0});
  std::size_t i = 0;
  while (i < g.slots.size()) {
    int item = positions[g.slots[i]].item;
    std::size_t j = i;
    while (j < g.slots.size() && positions[g.slots[j]].item == item) ++j;
    g.ranges[item] = {i, j};
    i = j;
  }
  return g;
}

void check_set_size(int size, int axis_count, const char* what) {
  if (size < 2) {
    throw std::invalid_argument(std::string(what) + " must be >= 2");
  }
  if (size > axis_count) {
    throw std::invalid_argument(std::string(what) +
                                " exceeds the number of entities on the axis");
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Neighbor selection
// ---------------------------------------------------------------------------

NeighborSet cluster_neighbors(const SimilarityTable& table, int entity,
                              int cluster_size) {
  const int n = table.size();
  check_set_size(cluster_size, n, "cluster size");
  int anchor = -1;
  std::int64_t best = 0;
  for (int w = 0; w < n; ++w) {
    if (w == entity) continue;
    std::int64_t s = table.sigma(entity, w);
    if (anchor < 0 || s > best) {
      anchor = w;
      best = s;
    }
  }
  NeighborSet ns;
  ns.anchor = entity;
  ns.provenance = Provenance::via_rich_anchor;
  ns.members.reserve(cluster_size);
  ns.members.push_back(entity);
  ns.members.push_back(anchor);
  if (cluster_size > 2) {
    std::vector<std::pair<double, int>> ranked;
    ranked.reserve(n - 2);
    for (int w = 0; w < n; ++w) {
      if (w == entity || w == anchor) continue;
      ranked.emplace_back(table.normalized(anchor, w), w);
    }
    auto cmp = [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    };
    int count = cluster_size - 2;
    std::partial_sort(ranked.begin(), ranked.begin() + count, ranked.end(),
                      cmp);
    for (int i = 0; i < count; ++i) ns.members.push_back(ranked[i].second);
  }
  return ns;
}

// ---------------------------------------------------------------------------
// Theory algorithms: user clustering, item clustering, co-clustering
// ---------------------------------------------------------------------------

CompletedMatrix ucr(const RatingMatrix& r, int cluster_size,
                    const Targets& targets, int threads) {
  const int num_users = r.num_users(), num_items = r.num_items();
  const int levels = r.levels();
  check_set_size(cluster_size, num_users, "cluster size");
  SimilarityTable table = SimilarityTable::build(r, Axis::users, threads);
  CompletedMatrix out = make_output(num_users, num_items, levels, "ucr",
                                    targets);
  auto ranges = targets.is_all()
                    ? std::vector<std::pair<std::size_t, std::size_t>>{}
                    : user_slot_ranges(out.positions(), num_users);
  parallel_for(0, std::max(threads, 1), threads, [&](int worker) {
    VoteScratch votes(num_items, levels);
    std::vector<double> tally(levels);
    for (int u = worker; u < num_users; u += std::max(threads, 1)) {
      if (!targets.is_all() && ranges[u].first == ranges[u].second) continue;
      NeighborSet ns = cluster_neighbors(table, u, cluster_size);
      for (int w : ns.members) votes.add_row(r.row(w));
      auto emit = [&](int m, std::size_t slot) {
        const std::int32_t* c = votes.at(m);
        for (int g = 0; g < levels; ++g) tally[g] = c[g];
        out.store(slot, vote_argmax(tally), tally);
      };
      if (targets.is_all()) {
        for (int m = 0; m < num_items; ++m) {
          emit(m, static_cast<std::size_t>(u) * num_items + m);
        }
      } else {
        for (std::size_t i = ranges[u].first; i < ranges[u].second; ++i) {
          emit(out.positions()[i].item, i);
        }
      }
      votes.clear();
    }
  });
  return out;
}

CompletedMatrix icr(const RatingMatrix& r, int cluster_size,
                    const Targets& targets, int threads) {
  const int num_users = r.num_users(), num_items = r.num_items();
  const int levels = r.levels();
  check_set_size(cluster_size, num_items, "cluster size");
  SimilarityTable table = SimilarityTable::build(r, Axis::items, threads);
  const RatingMatrix columns = r.transposed();
  CompletedMatrix out = make_output(num_users, num_items, levels, "icr",
                                    targets);
  ItemGroupedTargets grouped;
  if (!targets.is_all()) grouped = group_by_item(out.positions(), num_items);
  parallel_for(0, std::max(threads, 1), threads, [&](int worker) {
    VoteScratch votes(num_users, levels);
    std::vector<double> tally(levels);
    for (int m = worker; m < num_items; m += std::max(threads, 1)) {
      if (!targets.is_all() &&
          grouped.ranges[m].first == grouped.ranges[m].second) {
        continue;
      }
      NeighborSet ns = cluster_neighbors(table, m, cluster_size);
      for (int l : ns.members) votes.add_row(columns.row(l));
      auto emit = [&](int u, std::size_t slot) {
        const std::int32_t* c = votes.at(u);
        for (int g = 0; g < levels; ++g) tally[g] = c[g];
        out.store(slot, vote_argmax(tally), tally);
      };
      if (targets.is_all()) {
        for (int u = 0; u < num_users; ++u) {
          emit(u, static_cast<std::size_t>(u) * num_items + m);
        }
      } else {
        for (std::size_t i = grouped.ranges[m].first;
             i < grouped.ranges[m].second; ++i) {
          std::size_t slot = grouped.slots[i];
          emit(out.positions()[slot].user, slot);
        }
      }
      votes.clear();
    }
  });
  return out;
}

namespace {

// Deduplicates neighbor sets so each distinct (user set, item set) block is
// voted once. Returns the set id per entity plus the member lists.
struct DedupedSets {
  std::vector<int> id_of;                 // per entity
  std::vector<std::vector<int>> members;  // per id, selection order
};

DedupedSets dedup_sets(const SimilarityTable& table, int count, int set_size) {
  DedupedSets d;
  d.id_of.resize(count);
  std::map<std::vector<int>, int> ids;
  for (int e = 0; e < count; ++e) {
    NeighborSet ns = cluster_neighbors(table, e, set_size);
    std::vector<int> key = ns.members;
    std::sort(key.begin(), key.end());
    auto [it, inserted] = ids.emplace(std::move(key), ids.size());
    if (inserted) d.members.push_back(std::move(ns.members));
    d.id_of[e] = it->second;
  }
  return d;
}

}  // namespace

CompletedMatrix cor(const RatingMatrix& r, int user_cluster_size,
                    int item_cluster_size, const Targets& targets,
                    int threads) {
  const int num_users = r.num_users(), num_items = r.num_items();
  const int levels = r.levels();
  check_set_size(user_cluster_size, num_users, "user cluster size");
  check_set_size(item_cluster_size, num_items, "item cluster size");
  SimilarityTable user_table = SimilarityTable::build(r, Axis::users, threads);
  SimilarityTable item_table = SimilarityTable::build(r, Axis::items, threads);
  DedupedSets users = dedup_sets(user_table, num_users, user_cluster_size);
  DedupedSets items = dedup_sets(item_table, num_items, item_cluster_size);

  // item membership flags per distinct item set
  std::vector<std::vector<std::uint8_t>> item_flags(items.members.size());
  for (std::size_t i = 0; i < items.members.size(); ++i) {
    item_flags[i].assign(num_items, 0);
    for (int m : items.members[i]) item_flags[i][m] = 1;
  }

  CompletedMatrix out = make_output(num_users, num_items, levels, "cor",
                                    targets);
  auto ranges = targets.is_all()
                    ? std::vector<std::pair<std::size_t, std::size_t>>{}
                    : user_slot_ranges(out.positions(), num_users);

  parallel_for(0, std::max(threads, 1), threads, [&](int worker) {
    // block votes memoized per (user set, item set); values are identical
    // across workers, so thread-local memos preserve determinism
    std::unordered_map<std::uint64_t, std::vector<double>> memo;
    std::vector<double> tally(levels);
    for (int u = worker; u < num_users; u += std::max(threads, 1)) {
      if (!targets.is_all() && ranges[u].first == ranges[u].second) continue;
      int fid = users.id_of[u];
      auto block_tally = [&](int nid) -> const std::vector<double>& {
        std::uint64_t key =
            (static_cast<std::uint64_t>(fid) << 32) | static_cast<std::uint32_t>(nid);
        auto it = memo.find(key);
        if (it != memo.end()) return it->second;
        std::vector<double> t(levels, 0.0);
        const auto& flags = item_flags[nid];
        for (int w : users.members[fid]) {
          for (const auto& e : r.row(w)) {
            if (flags[e.index]) t[e.level - 1] += 1.0;
          }
        }
        return memo.emplace(key, std::move(t)).first->second;
      };
      auto emit = [&](int m, std::size_t slot) {
        const auto& t = block_tally(items.id_of[m]);
        for (int g = 0; g < levels; ++g) tally[g] = t[g];
        out.store(slot, vote_argmax(tally), tally);
      };
      if (targets.is_all()) {
        for (int m = 0; m < num_items; ++m) {
          emit(m, static_cast<std::size_t>(u) * num_items + m);
        }
      } else {
        for (std::size_t i = ranges[u].first; i < ranges[u].second; ++i) {
          emit(out.positions()[i].item, i);
        }
      }
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// Hybrid algorithms
// ---------------------------------------------------------------------------

HybridSelection hybrid_selection(const RatingMatrix& rows,
                                 const SimilarityTable& table, int entity,
                                 int set_size) {
  const int n = table.size();
  const int positions = rows.num_items();
  const int levels = rows.levels();
  check_set_size(set_size, n, "set size");

  HybridSelection sel;
  sel.sets[0] = cluster_neighbors(table, entity, set_size);
  sel.sets[1].anchor = entity;
  sel.sets[1].provenance = Provenance::direct_modified_norm;
  sel.sets[1].members = {entity};
  for (int w : top_by_score(n, entity, set_size - 1, [&](int w) {
         return table.modified_normalized(entity, w);
       })) {
    sel.sets[1].members.push_back(w);
  }
  sel.sets[2].anchor = entity;
  sel.sets[2].provenance = Provenance::direct_raw;
  sel.sets[2].members = {entity};
  for (int w : top_by_score(n, entity, set_size - 1, [&](int w) {
         return static_cast<double>(table.sigma(entity, w));
       })) {
    sel.sets[2].members.push_back(w);
  }

  // fuse each candidate set into a super-entity by per-position plurality;
  // the anchor itself does not vote
  std::vector<std::vector<std::int32_t>> counts(
      3, std::vector<std::int32_t>(
             static_cast<std::size_t>(positions) * levels, 0));
  std::vector<std::vector<Level>> super_rows(
      3, std::vector<Level>(positions, kUnpredicted));
  std::vector<double> tally(levels);
  std::int64_t best_sigma = 0;
  int winner = -1;
  for (int z = 0; z < 3; ++z) {
    auto& c = counts[z];
    for (std::size_t i = 1; i < sel.sets[z].members.size(); ++i) {
      for (const auto& e : rows.row(sel.sets[z].members[i])) {
        ++c[static_cast<std::size_t>(e.index) * levels + e.level - 1];
      }
    }
    for (int pos = 0; pos < positions; ++pos) {
      for (int g = 0; g < levels; ++g) {
        tally[g] = c[static_cast<std::size_t>(pos) * levels + g];
      }
      super_rows[z][pos] = vote_argmax(tally);
    }
    // raw similarity between the entity and the fused super-row
    std::int64_t phi = 0, agree = 0;
    for (const auto& e : rows.row(entity)) {
      Level s = super_rows[z][e.index];
      if (s != kUnpredicted) {
        ++phi;
        agree += s == e.level;
      }
    }
    std::int64_t sigma = 2 * agree - phi;
    if (winner < 0 || sigma > best_sigma) {
      winner = z;
      best_sigma = sigma;
    }
  }
  sel.winner = winner;
  sel.super_row = std::move(super_rows[winner]);
  sel.super_tallies.resize(static_cast<std::size_t>(positions) * levels);
  for (std::size_t i = 0; i < sel.super_tallies.size(); ++i) {
    sel.super_tallies[i] = static_cast<float>(counts[winner][i]);
  }
  return sel;
}

CompletedMatrix hucr(const RatingMatrix& r, int set_size,
                     const Targets& targets, int threads) {
  const int num_users = r.num_users(), num_items = r.num_items();
  const int levels = r.levels();
  check_set_size(set_size, num_users, "set size");
  SimilarityTable table = SimilarityTable::build(r, Axis::users, threads);
  CompletedMatrix out = make_output(num_users, num_items, levels, "hucr",
                                    targets);
  auto ranges = targets.is_all()
                    ? std::vector<std::pair<std::size_t, std::size_t>>{}
                    : user_slot_ranges(out.positions(), num_users);
  parallel_for(0, std::max(threads, 1), threads, [&](int worker) {
    std::vector<double> tally(levels);
    for (int u = worker; u < num_users; u += std::max(threads, 1)) {
      if (!targets.is_all() && ranges[u].first == ranges[u].second) continue;
      HybridSelection sel = hybrid_selection(r, table, u, set_size);
      auto emit = [&](int m, std::size_t slot) {
        for (int g = 0; g < levels; ++g) {
          tally[g] = sel.super_tallies[static_cast<std::size_t>(m) * levels + g];
        }
        out.store(slot, sel.super_row[m], tally);
      };
      if (targets.is_all()) {
        for (int m = 0; m < num_items; ++m) {
          emit(m, static_cast<std::size_t>(u) * num_items + m);
        }
      } else {
        for (std::size_t i = ranges[u].first; i < ranges[u].second; ++i) {
          emit(out.positions()[i].item, i);
        }
      }
    }
  });
  return out;
}

CompletedMatrix hicr(const RatingMatrix& r, int set_size,
                     const Targets& targets, int threads) {
  const int num_users = r.num_users(), num_items = r.num_items();
  const int levels = r.levels();
  check_set_size(set_size, num_items, "set size");
  SimilarityTable table = SimilarityTable::build(r, Axis::items, threads);
  const RatingMatrix columns = r.transposed();
  CompletedMatrix out = make_output(num_users, num_items, levels, "hicr",
                                    targets);
  ItemGroupedTargets grouped;
  if (!targets.is_all()) grouped = group_by_item(out.positions(), num_items);
  parallel_for(0, std::max(threads, 1), threads, [&](int worker) {
    std::vector<double> tally(levels);
    for (int m = worker; m < num_items; m += std::max(threads, 1)) {
      if (!targets.is_all() &&
          grouped.ranges[m].first == grouped.ranges[m].second) {
        continue;
      }
      HybridSelection sel = hybrid_selection(columns, table, m, set_size);
      auto emit = [&](int u, std::size_t slot) {
        for (int g = 0; g < levels; ++g) {
          tally[g] = sel.super_tallies[static_cast<std::size_t>(u) * levels + g];
        }
        out.store(slot, sel.super_row[u], tally);
      };
      if (targets.is_all()) {
        for (int u = 0; u < num_users; ++u) {
          emit(u, static_cast<std::size_t>(u) * num_items + m);
        }
      } else {
        for (std::size_t i = grouped.ranges[m].first;
             i < grouped.ranges[m].second; ++i) {
          std::size_t slot = grouped.slots[i];
          emit(out.positions()[slot].user, slot);
        }
      }
    }
  });
  return out;
}

namespace {

// Winner voter lists (super-entity member sets, anchor excluded) for every
// entity on the table's axis.
std::vector<std::vector<int>> hybrid_winner_sets(const RatingMatrix& rows,
                                                 const SimilarityTable& table,
                                                 int set_size, int threads) {
  std::vector<std::vector<int>> sets(table.size());
  parallel_for(0, std::max(threads, 1), threads, [&](int worker) {
    for (int e = worker; e < table.size(); e += std::max(threads, 1)) {
      HybridSelection sel = hybrid_selection(rows, table, e, set_size);
      const auto& members = sel.sets[sel.winner].members;
      sets[e].assign(members.begin() + 1, members.end());
    }
  });
  return sets;
}

}  // namespace

CompletedMatrix hcor(const RatingMatrix& r, int user_set_size,
                     int item_set_size, const Targets& targets, int threads) {
  const int num_users = r.num_users(), num_items = r.num_items();
  const int levels = r.levels();
  check_set_size(user_set_size, num_users, "user set size");
  check_set_size(item_set_size, num_items, "item set size");
  SimilarityTable user_table = SimilarityTable::build(r, Axis::users, threads);
  SimilarityTable item_table = SimilarityTable::build(r, Axis::items, threads);
  const RatingMatrix columns = r.transposed();
  std::vector<std::vector<int>> user_sets =
      hybrid_winner_sets(r, user_table, user_set_size, threads);
  std::vector<std::vector<int>> item_sets =
      hybrid_winner_sets(columns, item_table, item_set_size, threads);

  CompletedMatrix out = make_output(num_users, num_items, levels, "hcor",
                                    targets);
  auto ranges = targets.is_all()
                    ? std::vector<std::pair<std::size_t, std::size_t>>{}
                    : user_slot_ranges(out.positions(), num_users);
  parallel_for(0, std::max(threads, 1), threads, [&](int worker) {
    VoteScratch member_votes(num_items, levels);  // over the user set's rows
    std::vector<Level> own_row(num_items, kErased);
    std::vector<double> row_votes(levels), col_votes(levels),
        block_votes(levels);
    for (int u = worker; u < num_users; u += std::max(threads, 1)) {
      if (!targets.is_all() && ranges[u].first == ranges[u].second) continue;
      for (int v : user_sets[u]) member_votes.add_row(r.row(v));
      for (const auto& e : r.row(u)) own_row[e.index] = e.level;
      auto emit = [&](int m, std::size_t slot) {
        const std::int32_t* c1 = member_votes.at(m);
        for (int g = 0; g < levels; ++g) {
          row_votes[g] = c1[g];
          col_votes[g] = 0.0;
          block_votes[g] = 0.0;
        }
        for (int n : item_sets[m]) {
          if (own_row[n] != kErased) col_votes[own_row[n] - 1] += 1.0;
          const std::int32_t* c3 = member_votes.at(n);
          for (int g = 0; g < levels; ++g) block_votes[g] += c3[g];
        }
        std::vector<double> scores =
            hcor_scores(row_votes, col_votes, block_votes);
        out.store(slot, vote_argmax(scores), scores);
      };
      if (targets.is_all()) {
        for (int m = 0; m < num_items; ++m) {
          emit(m, static_cast<std::size_t>(u) * num_items + m);
        }
      } else {
        for (std::size_t i = ranges[u].first; i < ranges[u].second; ++i) {
          emit(out.positions()[i].item, i);
        }
      }
      member_votes.clear();
      for (const auto& e : r.row(u)) own_row[e.index] = kErased;
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// Baseline and estimators
// ---------------------------------------------------------------------------

CompletedMatrix paf_baseline(const RatingMatrix& r, int k,
                             const Targets& targets, int threads) {
  const int num_users = r.num_users(), num_items = r.num_items();
  const int levels = r.levels();
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  if (k >= num_users) {
    throw std::invalid_argument("k must be smaller than the user count");
  }
  SimilarityTable table = SimilarityTable::build(r, Axis::users, threads);
  CompletedMatrix out = make_output(num_users, num_items, levels, "paf",
                                    targets);
  auto ranges = targets.is_all()
                    ? std::vector<std::pair<std::size_t, std::size_t>>{}
                    : user_slot_ranges(out.positions(), num_users);
  parallel_for(0, std::max(threads, 1), threads, [&](int worker) {
    VoteScratch votes(num_items, levels);
    std::vector<double> tally(levels);
    for (int u = worker; u < num_users; u += std::max(threads, 1)) {
      if (!targets.is_all() && ranges[u].first == ranges[u].second) continue;
      auto friends = top_by_score(num_users, u, k, [&](int w) {
        return static_cast<double>(table.sigma(u, w));
      });
      for (int w : friends) votes.add_row(r.row(w));
      auto emit = [&](int m, std::size_t slot) {
        const std::int32_t* c = votes.at(m);
        for (int g = 0; g < levels; ++g) tally[g] = c[g];
        out.store(slot, vote_argmax(tally), tally);
      };
      if (targets.is_all()) {
        for (int m = 0; m < num_items; ++m) {
          emit(m, static_cast<std::size_t>(u) * num_items + m);
        }
      } else {
        for (std::size_t i = ranges[u].first; i < ranges[u].second; ++i) {
          emit(out.positions()[i].item, i);
        }
      }
      votes.clear();
    }
  });
  return out;
}

int max_gap_cut(std::span<const double> sorted_scores, int lo, int hi) {
  if (lo < 1) throw std::invalid_argument("cut search must start at >= 1");
  hi = std::min<int>(hi, static_cast<int>(sorted_scores.size()) - 1);
  if (hi < lo) throw std::invalid_argument("empty cut search range");
  int best_cut = lo;
  double best_gap = sorted_scores[lo - 1] - sorted_scores[lo];
  for (int cut = lo + 1; cut <= hi; ++cut) {
    double gap = sorted_scores[cut - 1] - sorted_scores[cut];
    if (gap > best_gap) {
      best_gap = gap;
      best_cut = cut;
    }
  }
  return best_cut;
}

int estimate_set_size(const SimilarityTable& table, int anchor) {
  const int n = table.size();
  if (n - 1 < 3) {
    throw std::invalid_argument(
        "set-size estimation needs at least 3 candidates");
  }
  std::vector<double> scores;
  scores.reserve(n - 1);
  for (int w = 0; w < n; ++w) {
    if (w != anchor) scores.push_back(static_cast<double>(table.sigma(anchor, w)));
  }
  std::sort(scores.begin(), scores.end(), std::greater<>());
  return max_gap_cut(scores, 2, n / 2);
}

int estimate_set_size(const RatingMatrix& r, int anchor, Axis axis) {
  SimilarityTable table = SimilarityTable::build(r, axis);
  return estimate_set_size(table, anchor);
}

ClusterSizeEstimate estimate_cluster_size(
    const RatingMatrix& r, std::optional<int> cluster_count_hint) {
  if (r.num_users() == 0 || r.num_items() == 0) {
    throw std::invalid_argument("empty rating matrix");
  }
  ClusterSizeEstimate est;
  est.observed_fraction =
      static_cast<double>(r.num_observed()) /
      (static_cast<double>(r.num_users()) * r.num_items());
  if (cluster_count_hint) {
    if (*cluster_count_hint < 1) {
      throw std::invalid_argument("cluster count hint must be >= 1");
    }
    est.size = r.num_users() / *cluster_count_hint;
    return est;
  }
  int anchor = 0;
  for (int u = 1; u < r.num_users(); ++u) {
    if (r.support_size(u) > r.support_size(anchor)) anchor = u;
  }
  est.size = estimate_set_size(r, anchor, Axis::users);
  return est;
}

IncrementalUserResult add_user_incremental(const RatingMatrix& r,
                                           SimilarityTable& user_table,
                                           std::span<const Level> dense_row,
                                           int cluster_size) {
  if (user_table.axis() != Axis::users) {
    throw std::invalid_argument("incremental addition needs the user table");
  }
  if (user_table.size() != r.num_users()) {
    throw std::invalid_argument("similarity table does not match the matrix");
  }
  IncrementalUserResult res;
  res.augmented = r.with_appended_user(dense_row);
  user_table.append_entity(res.augmented);
  const int new_user = r.num_users();
  const int num_items = r.num_items();
  const int levels = r.levels();
  res.predicted_row.assign(num_items, kUnpredicted);
  res.tallies.assign(static_cast<std::size_t>(num_items) * levels, 0.0f);
  if (res.augmented.row(new_user).empty()) {
    // no co-ratings with anyone: there is no signal to anchor on
    res.neighbors.anchor = new_user;
    res.neighbors.members = {new_user};
    return res;
  }
  res.neighbors = cluster_neighbors(user_table, new_user, cluster_size);
  VoteScratch votes(num_items, levels);
  for (int w : res.neighbors.members) votes.add_row(res.augmented.row(w));
  std::vector<double> tally(levels);
  for (int m : votes.touched()) {
    const std::int32_t* c = votes.at(m);
    for (int g = 0; g < levels; ++g) {
      tally[g] = c[g];
      res.tallies[static_cast<std::size_t>(m) * levels + g] =
          static_cast<float>(c[g]);
    }
    res.predicted_row[m] = vote_argmax(tally);
  }
  return res;
}

}  // namespace corec
