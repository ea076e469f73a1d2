#include "corec/ratings.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>

#include "corec/random.hpp"

namespace corec {

namespace {

void check_level(int level, int levels) {
  if (level < 1 || level > levels) {
    throw std::invalid_argument("rating level " + std::to_string(level) +
                                " outside [1, " + std::to_string(levels) +
                                "]");
  }
}

}  // namespace

RatingMatrix::RatingMatrix(int num_users, int num_items, int levels)
    : num_users_(num_users), num_items_(num_items), levels_(levels),
      rows_(num_users) {
  if (num_users < 0 || num_items < 0) {
    throw std::invalid_argument("negative matrix dimensions");
  }
  if (levels < 2) throw std::invalid_argument("levels must be >= 2");
}

RatingMatrix RatingMatrix::from_triples(int num_users, int num_items,
                                        int levels,
                                        std::span<const RatingTriple> triples) {
  RatingMatrixBuilder b(num_users, num_items, levels);
  for (const auto& t : triples) b.set(t.user, t.item, t.rating);
  return std::move(b).build();
}

Level RatingMatrix::at(int u, int m) const {
  const auto& row = rows_[u];
  auto it = std::lower_bound(row.begin(), row.end(), m,
                             [](const Entry& e, int v) { return e.index < v; });
  if (it != row.end() && it->index == m) return it->level;
  return kErased;
}

std::vector<Position> RatingMatrix::positions() const {
  std::vector<Position> out;
  out.reserve(static_cast<std::size_t>(observed_));
  for (int u = 0; u < num_users_; ++u) {
    for (const auto& e : rows_[u]) out.push_back({u, e.index});
  }
  return out;
}

RatingMatrix RatingMatrix::transposed() const {
  RatingMatrix t(num_items_, num_users_, levels_);
  std::vector<int> counts(num_items_, 0);
  for (const auto& row : rows_) {
    for (const auto& e : row) ++counts[e.index];
  }
  for (int m = 0; m < num_items_; ++m) t.rows_[m].reserve(counts[m]);
  for (int u = 0; u < num_users_; ++u) {
    for (const auto& e : rows_[u]) {
      t.rows_[e.index].push_back({u, e.level});
    }
  }
  t.observed_ = observed_;
  return t;
}

RatingMatrix RatingMatrix::restricted_to(std::span<const Position> keep) const {
  RatingMatrix out(num_users_, num_items_, levels_);
  for (const auto& pos : keep) {
    Level v = at(pos.user, pos.item);
    if (v != kErased) {
      out.rows_[pos.user].push_back({pos.item, v});
      ++out.observed_;
    }
  }
  for (auto& row : out.rows_) {
    std::sort(row.begin(), row.end(),
              [](const Entry& a, const Entry& b) { return a.index < b.index; });
  }
  return out;
}

RatingMatrix RatingMatrix::with_appended_user(
    std::span<const Level> dense_row) const {
  if (static_cast<int>(dense_row.size()) != num_items_) {
    throw std::invalid_argument("appended row length != number of items");
  }
  RatingMatrix out = *this;
  out.num_users_ = num_users_ + 1;
  out.rows_.emplace_back();
  for (int m = 0; m < num_items_; ++m) {
    if (dense_row[m] != kErased) {
      check_level(dense_row[m], levels_);
      out.rows_.back().push_back({m, dense_row[m]});
      ++out.observed_;
    }
  }
  return out;
}

RatingMatrixBuilder::RatingMatrixBuilder(int num_users, int num_items,
                                         int levels)
    : m_(num_users, num_items, levels) {}

void RatingMatrixBuilder::set(int u, int m, int level) {
  if (u < 0 || u >= m_.num_users_ || m < 0 || m >= m_.num_items_) {
    throw std::out_of_range("rating position outside the matrix");
  }
  check_level(level, m_.levels_);
  // staged unsorted; duplicates resolved in build()
  m_.rows_[u].push_back({m, static_cast<Level>(level)});
}

RatingMatrix RatingMatrixBuilder::build() && {
  m_.observed_ = 0;
  for (auto& row : m_.rows_) {
    // stable sort + keep the last occurrence of each index
    std::stable_sort(row.begin(), row.end(),
                     [](const Entry& a, const Entry& b) {
                       return a.index < b.index;
                     });
    std::vector<Entry> dedup;
    dedup.reserve(row.size());
    for (const auto& e : row) {
      if (!dedup.empty() && dedup.back().index == e.index) {
        dedup.back().level = e.level;
      } else {
        dedup.push_back(e);
      }
    }
    row = std::move(dedup);
    m_.observed_ += static_cast<std::int64_t>(row.size());
  }
  return std::move(m_);
}

int ClusterModel::num_rich_users() const {
  int n = 0;
  for (auto f : user_rich) n += f != 0;
  return n;
}

int ClusterModel::num_rich_items() const {
  int n = 0;
  for (auto f : item_rich) n += f != 0;
  return n;
}

PreferenceMatrix PreferenceMatrix::dense(int num_users, int num_items,
                                         int levels,
                                         std::vector<Level> values) {
  if (static_cast<std::int64_t>(values.size()) !=
      static_cast<std::int64_t>(num_users) * num_items) {
    throw std::invalid_argument("dense preference size mismatch");
  }
  PreferenceMatrix b;
  b.num_users_ = num_users;
  b.num_items_ = num_items;
  b.levels_ = levels;
  b.values_ = std::move(values);
  return b;
}

PreferenceMatrix PreferenceMatrix::blocks(int num_users, int num_items,
                                          int levels, int user_clusters,
                                          int item_clusters,
                                          std::vector<Level> block_values,
                                          std::vector<int> user_cluster,
                                          std::vector<int> item_cluster) {
  if (static_cast<int>(block_values.size()) != user_clusters * item_clusters) {
    throw std::invalid_argument("block value grid size mismatch");
  }
  if (static_cast<int>(user_cluster.size()) != num_users ||
      static_cast<int>(item_cluster.size()) != num_items) {
    throw std::invalid_argument("cluster assignment size mismatch");
  }
  PreferenceMatrix b;
  b.num_users_ = num_users;
  b.num_items_ = num_items;
  b.levels_ = levels;
  b.user_clusters_ = user_clusters;
  b.item_clusters_ = item_clusters;
  b.block_values_ = std::move(block_values);
  b.user_cluster_ = std::move(user_cluster);
  b.item_cluster_ = std::move(item_cluster);
  return b;
}

Level PreferenceMatrix::at(int u, int m) const {
  if (!values_.empty()) {
    return values_[static_cast<std::size_t>(u) * num_items_ + m];
  }
  return block_values_[static_cast<std::size_t>(user_cluster_[u]) *
                           item_clusters_ +
                       item_cluster_[m]];
}

Level PreferenceMatrix::block_value(int user_cluster, int item_cluster) const {
  return block_values_[static_cast<std::size_t>(user_cluster) * item_clusters_ +
                       item_cluster];
}

double PreferenceMatrix::row_agreement(int u, int v) const {
  std::int64_t same = 0;
  for (int m = 0; m < num_items_; ++m) same += at(u, m) == at(v, m);
  return num_items_ == 0 ? 0.0 : static_cast<double>(same) / num_items_;
}

double PreferenceMatrix::column_agreement(int m, int n) const {
  std::int64_t same = 0;
  for (int u = 0; u < num_users_; ++u) same += at(u, m) == at(u, n);
  return num_users_ == 0 ? 0.0 : static_cast<double>(same) / num_users_;
}

SeparabilityCheck check_user_separability(const PreferenceMatrix& b,
                                          const ClusterModel& clusters) {
  SeparabilityCheck out;
  for (int u = 0; u < b.num_users(); ++u) {
    for (int v = u + 1; v < b.num_users(); ++v) {
      double agree = b.row_agreement(u, v);
      if (clusters.user_cluster[u] == clusters.user_cluster[v]) {
        if (agree < 1.0) out.within_cluster_consistent = false;
      } else {
        out.max_cross_agreement = std::max(out.max_cross_agreement, agree);
      }
    }
  }
  return out;
}

SeparabilityCheck check_item_separability(const PreferenceMatrix& b,
                                          const ClusterModel& clusters) {
  SeparabilityCheck out;
  for (int m = 0; m < b.num_items(); ++m) {
    for (int n = m + 1; n < b.num_items(); ++n) {
      double agree = b.column_agreement(m, n);
      if (clusters.item_cluster[m] == clusters.item_cluster[n]) {
        if (agree < 1.0) out.within_cluster_consistent = false;
      } else {
        out.max_cross_agreement = std::max(out.max_cross_agreement, agree);
      }
    }
  }
  return out;
}

namespace {

struct ParsedRecord {
  long user, item, rating;
};

// Splits on "::" (movielens) or "," (csv). Returns false on blank lines.
bool parse_record(const std::string& line, RatingsFormat format,
                  ParsedRecord& rec, std::string& error) {
  if (line.empty() || line == "\r") return false;
  const std::string sep = format == RatingsFormat::movielens_dat ? "::" : ",";
  long fields[3];
  std::size_t pos = 0;
  for (int f = 0; f < 3; ++f) {
    std::size_t end = line.find(sep, pos);
    std::string_view token(line.data() + pos,
                           (end == std::string::npos ? line.size() : end) - pos);
    while (!token.empty() && (token.back() == '\r' || token.back() == ' ')) {
      token.remove_suffix(1);
    }
    while (!token.empty() && token.front() == ' ') token.remove_prefix(1);
    long value = 0;
    auto [ptr, ec] = std::from_chars(token.begin(), token.end(), value);
    if (ec != std::errc() || ptr != token.end()) {
      error = "field " + std::to_string(f + 1) + " is not an integer";
      return false;
    }
    fields[f] = value;
    if (end == std::string::npos) {
      if (f < 2) {
        error = "expected at least 3 fields";
        return false;
      }
      pos = line.size();
    } else {
      pos = end + sep.size();
    }
  }
  rec = {fields[0], fields[1], fields[2]};  // trailing fields (timestamp) ignored
  return true;
}

bool looks_like_header(const std::string& line) {
  for (char c : line) {
    if ((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z')) return true;
    if (c == ',') continue;
    if (c >= '0' && c <= '9') return false;
  }
  return false;
}

}  // namespace

RatingMatrix load_ratings(const std::filesystem::path& path,
                          RatingsFormat format, int levels_override) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("cannot open ratings file: " + path.string());
  }
  std::vector<RatingTriple> triples;
  long max_user = 0, max_item = 0, max_rating = 0;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && format == RatingsFormat::csv_triples &&
        looks_like_header(line)) {
      continue;
    }
    ParsedRecord rec;
    std::string error;
    if (!parse_record(line, format, rec, error)) {
      if (error.empty()) continue;  // blank line
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": " + error);
    }
    if (rec.user < 1 || rec.item < 1) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": ids must be positive");
    }
    if (rec.rating < 1) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": rating must be >= 1");
    }
    max_user = std::max(max_user, rec.user);
    max_item = std::max(max_item, rec.item);
    max_rating = std::max(max_rating, rec.rating);
    triples.push_back({static_cast<std::int32_t>(rec.user - 1),
                       static_cast<std::int32_t>(rec.item - 1),
                       static_cast<std::int32_t>(rec.rating)});
  }
  int levels = levels_override > 0 ? levels_override
                                   : std::max<long>(max_rating, 2);
  if (levels_override > 0 && max_rating > levels_override) {
    throw std::runtime_error("rating " + std::to_string(max_rating) +
                             " exceeds the configured level count " +
                             std::to_string(levels_override));
  }
  return RatingMatrix::from_triples(static_cast<int>(max_user),
                                    static_cast<int>(max_item), levels,
                                    triples);
}

RatingMatrix quantize_binary(const RatingMatrix& r, double threshold) {
  RatingMatrixBuilder out(r.num_users(), r.num_items(), 2);
  for (int u = 0; u < r.num_users(); ++u) {
    for (const auto& e : r.row(u)) {
      out.set(u, e.index, e.level > threshold ? kLiked : kDisliked);
    }
  }
  return std::move(out).build();
}

MaskSplit split_mask(const RatingMatrix& r, double hide_fraction,
                     std::uint64_t seed) {
  if (hide_fraction < 0.0 || hide_fraction > 1.0) {
    throw std::invalid_argument("hide_fraction outside [0, 1]");
  }
  std::vector<Position> all = r.positions();
  Rng rng(derive_seed(seed, Stream::split_mask));
  rng.shuffle(all);
  auto test_count = static_cast<std::size_t>(
      std::llround(hide_fraction * static_cast<double>(all.size())));
  MaskSplit mask;
  mask.hide_fraction = hide_fraction;
  mask.seed = seed;
  mask.test.assign(all.begin(), all.begin() + test_count);
  mask.train.assign(all.begin() + test_count, all.end());
  std::sort(mask.test.begin(), mask.test.end());
  std::sort(mask.train.begin(), mask.train.end());
  return mask;
}

RatingMatrix flip_noise(const RatingMatrix& r, double flip_prob,
                        std::uint64_t seed) {
  if (r.levels() != 2) {
    throw std::invalid_argument(
        "flip_noise requires a binary matrix; use the synth rating channel "
        "for more levels");
  }
  if (flip_prob < 0.0 || flip_prob > 1.0) {
    throw std::invalid_argument("flip probability outside [0, 1]");
  }
  Rng rng(derive_seed(seed, Stream::flip_noise));
  RatingMatrixBuilder out(r.num_users(), r.num_items(), 2);
  for (int u = 0; u < r.num_users(); ++u) {
    for (const auto& e : r.row(u)) {
      Level v = e.level;
      if (rng.bernoulli(flip_prob)) v = (v == kLiked) ? kDisliked : kLiked;
      out.set(u, e.index, v);
    }
  }
  return std::move(out).build();
}

void write_triples_csv(const std::filesystem::path& path,
                       const RatingMatrix& r) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "user,item,rating\n";
  for (int u = 0; u < r.num_users(); ++u) {
    for (const auto& e : r.row(u)) {
      out << (u + 1) << ',' << (e.index + 1) << ',' << int(e.level) << '\n';
    }
  }
}

void write_mask_csv(const std::filesystem::path& path, const MaskSplit& mask) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "user,item,split\n";
  for (const auto& p : mask.train) {
    out << (p.user + 1) << ',' << (p.item + 1) << ",train\n";
  }
  for (const auto& p : mask.test) {
    out << (p.user + 1) << ',' << (p.item + 1) << ",test\n";
  }
}

MaskSplit read_mask_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open mask file: " + path.string());
  MaskSplit mask;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 || line.empty() || line == "\r") continue;
    auto c1 = line.find(',');
    auto c2 = line.find(',', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": expected user,item,split");
    }
    Position p{std::stoi(line.substr(0, c1)) - 1,
               std::stoi(line.substr(c1 + 1, c2 - c1 - 1)) - 1};
    std::string split = line.substr(c2 + 1);
    while (!split.empty() && (split.back() == '\r' || split.back() == ' ')) {
      split.pop_back();
    }
    if (split == "train") {
      mask.train.push_back(p);
    } else if (split == "test") {
      mask.test.push_back(p);
    } else {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": unknown split label '" + split + "'");
    }
  }
  std::sort(mask.train.begin(), mask.train.end());
  std::sort(mask.test.begin(), mask.test.end());
  return mask;
}

}  // namespace corec
