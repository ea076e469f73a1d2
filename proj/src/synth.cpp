#include "corec/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "corec/random.hpp"

namespace corec {

void SynthConfig::validate() const {
  if (num_users <= 0 || num_items <= 0) {
    throw std::invalid_argument("synth: dimensions must be positive");
  }
  if (levels < 2) throw std::invalid_argument("synth: levels must be >= 2");
  if (num_clusters < 1) {
    throw std::invalid_argument("synth: cluster count must be >= 1");
  }
  if (num_users % num_clusters != 0 || num_items % num_clusters != 0) {
    throw std::invalid_argument(
        "synth: cluster count must divide both dimensions (equal-size "
        "clusters)");
  }
  if (truth_prob <= 1.0 / levels || truth_prob > 1.0) {
    throw std::invalid_argument(
        "synth: truth probability must lie in (1/levels, 1]");
  }
  if (!(alpha > 0.0 && alpha <= beta && beta <= 1.0)) {
    throw std::invalid_argument(
        "synth: need 0 < alpha <= beta <= 1 (sparse entities are observed "
        "less often than rich ones)");
  }
  if (eta < 2) throw std::invalid_argument("synth: eta must be >= 2");
  for (auto [count, size, what] :
       {std::tuple{rich_users_per_cluster, user_cluster_size(), "user"},
        std::tuple{rich_items_per_cluster, item_cluster_size(), "item"}}) {
    if (count == 0) continue;  // homogeneous-sparse variant
    if (count < 2 || count > eta) {
      throw std::invalid_argument(std::string("synth: rich ") + what +
                                  " count must be 0 or in [2, eta]");
    }
    if (count > size) {
      throw std::invalid_argument(std::string("synth: rich ") + what +
                                  " count exceeds the cluster size");
    }
  }
  if (!(mu_cap > 0.0 && mu_cap < 1.0)) {
    throw std::invalid_argument("synth: mu_cap must lie in (0, 1)");
  }
}

SynthConfig load_synth_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path.string());
  SynthConfig cfg;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    std::string key, eq, value;
    if (!(ss >> key)) continue;
    if (!(ss >> eq >> value) || eq != "=") {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": expected 'key = value'");
    }
    if (key == "users") cfg.num_users = std::stoi(value);
    else if (key == "items") cfg.num_items = std::stoi(value);
    else if (key == "clusters") cfg.num_clusters = std::stoi(value);
    else if (key == "levels") cfg.levels = std::stoi(value);
    else if (key == "p") cfg.truth_prob = std::stod(value);
    else if (key == "alpha") cfg.alpha = std::stod(value);
    else if (key == "beta") cfg.beta = std::stod(value);
    else if (key == "eta") cfg.eta = std::stoi(value);
    else if (key == "rich_users") cfg.rich_users_per_cluster = std::stoi(value);
    else if (key == "rich_items") cfg.rich_items_per_cluster = std::stoi(value);
    else if (key == "mu_cap") cfg.mu_cap = std::stod(value);
    else if (key == "seed") cfg.seed = std::stoull(value);
    else {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": unknown key '" + key + "'");
    }
  }
  return cfg;
}

namespace {

ClusterModel make_clusters(const SynthConfig& cfg) {
  ClusterModel c;
  c.num_clusters = cfg.num_clusters;
  c.user_cluster.resize(cfg.num_users);
  c.item_cluster.resize(cfg.num_items);
  c.user_rich.assign(cfg.num_users, 0);
  c.item_rich.assign(cfg.num_items, 0);
  int ucs = cfg.user_cluster_size();
  int ics = cfg.item_cluster_size();
  for (int u = 0; u < cfg.num_users; ++u) {
    c.user_cluster[u] = u / ucs;
    if (u % ucs < cfg.rich_users_per_cluster) c.user_rich[u] = 1;
  }
  for (int m = 0; m < cfg.num_items; ++m) {
    c.item_cluster[m] = m / ics;
    if (m % ics < cfg.rich_items_per_cluster) c.item_rich[m] = 1;
  }
  return c;
}

// Cross-cluster agreement fractions computed on the K x K block grid; each
// block contributes size/total to the agreement of its row (column) pair.
double max_cross_row_agreement(const std::vector<Level>& blocks, int k) {
  double worst = 0.0;
  for (int i = 0; i < k; ++i) {
    for (int j = i + 1; j < k; ++j) {
      int same = 0;
      for (int c = 0; c < k; ++c) same += blocks[i * k + c] == blocks[j * k + c];
      worst = std::max(worst, static_cast<double>(same) / k);
    }
  }
  return worst;
}

double max_cross_column_agreement(const std::vector<Level>& blocks, int k) {
  double worst = 0.0;
  for (int i = 0; i < k; ++i) {
    for (int j = i + 1; j < k; ++j) {
      int same = 0;
      for (int r = 0; r < k; ++r) same += blocks[r * k + i] == blocks[r * k + j];
      worst = std::max(worst, static_cast<double>(same) / k);
    }
  }
  return worst;
}

}  // namespace

PreferenceDraw generate_preferences(const SynthConfig& cfg) {
  cfg.validate();
  const int k = cfg.num_clusters;
  Rng rng(derive_seed(cfg.seed, Stream::preference_blocks));
  std::vector<Level> blocks(static_cast<std::size_t>(k) * k);
  double best_mu = 2.0;
  for (int attempt = 0; attempt < cfg.max_preference_retries; ++attempt) {
    for (auto& b : blocks) {
      b = static_cast<Level>(1 + rng.below(cfg.levels));
    }
    double mu_users = k == 1 ? 0.0 : max_cross_row_agreement(blocks, k);
    double mu_items = k == 1 ? 0.0 : max_cross_column_agreement(blocks, k);
    double mu = std::max(mu_users, mu_items);
    best_mu = std::min(best_mu, mu);
    if (mu <= cfg.mu_cap) {
      PreferenceDraw draw;
      draw.clusters = make_clusters(cfg);
      draw.matrix = PreferenceMatrix::blocks(
          cfg.num_users, cfg.num_items, cfg.levels, k, k, std::move(blocks),
          draw.clusters.user_cluster, draw.clusters.item_cluster);
      draw.achieved_mu_users = mu_users;
      draw.achieved_mu_items = mu_items;
      return draw;
    }
  }
  std::ostringstream msg;
  msg << "separability rejection cap reached after "
      << cfg.max_preference_retries << " draws; best achieved mu = " << best_mu
      << " > cap " << cfg.mu_cap;
  throw std::runtime_error(msg.str());
}

RatingMatrix apply_biased_channel(const PreferenceMatrix& truth, double p,
                                  std::uint64_t seed) {
  if (p <= 1.0 / truth.levels()) {
    throw std::invalid_argument(
        "rating channel requires p > 1/levels (biased toward the truth)");
  }
  const int levels = truth.levels();
  Rng rng(derive_seed(seed, Stream::rating_channel));
  RatingMatrixBuilder out(truth.num_users(), truth.num_items(), levels);
  for (int u = 0; u < truth.num_users(); ++u) {
    for (int m = 0; m < truth.num_items(); ++m) {
      Level b = truth.at(u, m);
      Level observed = b;
      if (p < 1.0 && !rng.bernoulli(p)) {
        // uniform over the other levels
        auto offset = static_cast<Level>(1 + rng.below(levels - 1));
        observed = static_cast<Level>((b - 1 + offset) % levels + 1);
      }
      out.set(u, m, observed);
    }
  }
  return std::move(out).build();
}

RatingMatrix apply_erasure(const RatingMatrix& dense,
                           const ClusterModel& clusters, double alpha,
                           double beta, std::uint64_t seed) {
  if (!(alpha > 0.0 && alpha <= 1.0 && beta > 0.0 && beta <= 1.0)) {
    throw std::invalid_argument("observation probabilities must be in (0, 1]");
  }
  Rng rng(derive_seed(seed, Stream::erasure));
  RatingMatrixBuilder out(dense.num_users(), dense.num_items(),
                          dense.levels());
  for (int u = 0; u < dense.num_users(); ++u) {
    bool rich_user = clusters.is_user_rich(u);
    for (const auto& e : dense.row(u)) {
      double keep = rich_user || clusters.is_item_rich(e.index) ? beta : alpha;
      if (rng.bernoulli(keep)) out.set(u, e.index, e.level);
    }
  }
  return std::move(out).build();
}

GeneratedInstance generate_instance(const SynthConfig& cfg) {
  PreferenceDraw draw = generate_preferences(cfg);
  RatingMatrix noisy = apply_biased_channel(draw.matrix, cfg.truth_prob,
                                            cfg.seed);
  GeneratedInstance inst{std::move(draw.matrix), std::move(draw.clusters),
                         RatingMatrix{}, cfg, draw.achieved_mu_users,
                         draw.achieved_mu_items};
  inst.observed =
      apply_erasure(noisy, inst.clusters, cfg.alpha, cfg.beta, cfg.seed);
  return inst;
}

double expected_observations(const SynthConfig& cfg) {
  cfg.validate();
  double rich_users = cfg.num_clusters * cfg.rich_users_per_cluster;
  double rich_items = cfg.num_clusters * cfg.rich_items_per_cluster;
  double total = static_cast<double>(cfg.num_users) * cfg.num_items;
  double rich_endpoint = rich_users * cfg.num_items +
                         rich_items * cfg.num_users - rich_users * rich_items;
  return cfg.beta * rich_endpoint + cfg.alpha * (total - rich_endpoint);
}

ThresholdReport thresholds(const SynthConfig& cfg, double omega_constant) {
  cfg.validate();
  const double u = cfg.num_users, m = cfg.num_items, k = cfg.num_clusters;
  const double log_m = std::log(m);
  const double c = omega_constant;
  ThresholdReport r{};
  r.clustering_necessary_alpha = k / u;
  r.clustering_sufficient_alpha = k * log_m / m;
  r.clustering_sufficient_alpha_given_beta = log_m / (m * cfg.beta);
  r.coclustering_necessary_alpha = k * k / (u * m);
  r.coclustering_necessary_beta =
      k / (cfg.eta * (m + u) - static_cast<double>(cfg.eta) * cfg.eta * k);
  r.coclustering_sample_scale = k * k * log_m;
  r.clustering_sample_scale = m * k * log_m;
  r.cluster_count_cap = m / log_m;
  r.expected_observed = expected_observations(cfg);
  r.omega_constant = c;

  r.below_clustering_necessary = cfg.alpha <= r.clustering_necessary_alpha;
  r.clustering_sufficient =
      cfg.alpha >= c * r.clustering_sufficient_alpha &&
      cfg.alpha * cfg.beta >= c * log_m / m;
  r.below_coclustering_necessary =
      cfg.alpha <= r.coclustering_necessary_alpha &&
      cfg.beta <= r.coclustering_necessary_beta;
  bool enough_samples = cfg.alpha >= c * k * k * log_m / (m * m) ||
                        cfg.beta >= c * k * log_m / m;
  bool enough_overlap = cfg.alpha * cfg.beta >= c * log_m / m ||
                        cfg.beta * cfg.beta >= c * log_m / k;
  r.coclustering_sufficient = enough_samples && enough_overlap;
  r.cluster_count_ok = k <= r.cluster_count_cap;
  return r;
}

double same_pref_agree_prob(double p, int levels) {
  double wrong = (1.0 - p) / (levels - 1);
  return p * p + (levels - 1) * wrong * wrong;
}

double diff_pref_agree_prob(double p, int levels) {
  double wrong = (1.0 - p) / (levels - 1);
  return (1.0 - p * p) / (levels - 1) - wrong * wrong;
}

ExpectedSimilarity expected_similarity(int pair_case, const SynthConfig& cfg,
                                       double mu) {
  cfg.validate();
  if (mu < 0.0 || mu > 1.0) {
    throw std::invalid_argument("mu must lie in [0, 1]");
  }
  const double m = cfg.num_items;
  const double z1 = same_pref_agree_prob(cfg.truth_prob, cfg.levels);
  const double z2 = diff_pref_agree_prob(cfg.truth_prob, cfg.levels);
  double coef;
  switch (pair_case) {
    case 1: case 3: coef = m * cfg.beta * cfg.beta; break;
    case 2: case 4: coef = m * cfg.alpha * cfg.beta; break;
    case 5: case 6: coef = m * cfg.alpha * cfg.alpha; break;
    default:
      throw std::invalid_argument("pair case must be 1..6");
  }
  bool same_cluster = pair_case == 1 || pair_case == 2 || pair_case == 5;
  if (same_cluster) {
    double exact = coef * (2.0 * z1 - 1.0);
    return {exact, exact};
  }
  // cross-cluster: the pair agrees on some fraction mu1 <= mu of the items,
  // giving coef * (2 (mu1 z1 + (1 - mu1) z2) - 1); bounded by mu1 in [0, mu]
  return {coef * (2.0 * z2 - 1.0),
          coef * (2.0 * (mu * z1 + (1.0 - mu) * z2) - 1.0)};
}

double expected_co_rating(int scenario, const SynthConfig& cfg) {
  cfg.validate();
  const double m = cfg.num_items;
  if (scenario == 1) return m * cfg.beta * cfg.beta;
  if (scenario == 2) return m * cfg.alpha * cfg.beta;
  throw std::invalid_argument("co-rating scenario must be 1 or 2");
}

void write_clusters_csv(const std::filesystem::path& path,
                        const ClusterModel& clusters) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "axis,id,cluster,rich\n";
  for (std::size_t u = 0; u < clusters.user_cluster.size(); ++u) {
    out << "user," << (u + 1) << ',' << (clusters.user_cluster[u] + 1) << ','
        << int(clusters.user_rich[u]) << '\n';
  }
  for (std::size_t m = 0; m < clusters.item_cluster.size(); ++m) {
    out << "item," << (m + 1) << ',' << (clusters.item_cluster[m] + 1) << ','
        << int(clusters.item_rich[m]) << '\n';
  }
}

}  // namespace corec
