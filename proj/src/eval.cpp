#include "corec/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include <json.hpp>

#include "corec/parallel.hpp"
#include "corec/random.hpp"

namespace corec {

using ordered_json = nlohmann::ordered_json;

EvalCounts eval_counts(const CompletedMatrix& pred, const RatingMatrix& truth,
                       std::span<const Position> test) {
  EvalCounts c;
  c.test_size = static_cast<std::int64_t>(test.size());
  for (const auto& pos : test) {
    Level p = pred.at(pos.user, pos.item);
    if (p == kUnpredicted) {
      ++c.unpredicted;
    } else if (p == truth.at(pos.user, pos.item)) {
      ++c.correct;
    } else {
      ++c.wrong;
    }
  }
  c.predicted = c.correct + c.wrong;
  return c;
}

double overall_error(const CompletedMatrix& pred, const RatingMatrix& truth,
                     std::span<const Position> test) {
  if (test.empty()) throw std::invalid_argument("empty test set");
  EvalCounts c = eval_counts(pred, truth, test);
  return static_cast<double>(c.wrong + c.unpredicted) /
         static_cast<double>(c.test_size);
}

namespace {

// Liked-vote margin used to rank a user's hidden items; unpredicted entries
// rank below everything.
double liked_margin(const CompletedMatrix& pred, int u, int m, Level liked) {
  Level p = pred.at(u, m);
  if (p == kUnpredicted) return -std::numeric_limits<double>::infinity();
  auto t = pred.tallies_at(u, m);
  double margin = 0.0;
  for (int g = 0; g < static_cast<int>(t.size()); ++g) {
    if (g == liked - 1) {
      margin += t[g];
    } else {
      margin -= t[g];
    }
  }
  return margin;
}

// test positions grouped per user (positions are sorted by user already)
template <typename Fn>
void for_each_user_group(std::span<const Position> test, Fn&& fn) {
  std::size_t i = 0;
  while (i < test.size()) {
    std::size_t j = i;
    while (j < test.size() && test[j].user == test[i].user) ++j;
    fn(test.subspan(i, j - i));
    i = j;
  }
}

}  // namespace

double top_x_error(const CompletedMatrix& pred, const RatingMatrix& truth,
                   std::span<const Position> test, int x, Level liked) {
  if (x < 1) throw std::invalid_argument("x must be >= 1");
  if (pred.levels() != 2) {
    throw std::invalid_argument(
        "accuracy at the top needs binary predictions with a liked level");
  }
  if (test.empty()) throw std::invalid_argument("empty test set");
  std::int64_t errors = 0, contributed = 0;
  std::vector<std::pair<double, int>> ranked;
  for_each_user_group(test, [&](std::span<const Position> group) {
    int u = group.front().user;
    ranked.clear();
    for (const auto& pos : group) {
      ranked.emplace_back(liked_margin(pred, u, pos.item, liked), pos.item);
    }
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });
    int take = std::min<int>(x, static_cast<int>(ranked.size()));
    for (int i = 0; i < take; ++i) {
      int m = ranked[i].second;
      bool no_vote = pred.at(u, m) == kUnpredicted;
      if (no_vote || truth.at(u, m) != liked) ++errors;
    }
    contributed += take;
  });
  return static_cast<double>(errors) / static_cast<double>(contributed);
}

std::map<int, double> sparse_user_error(const CompletedMatrix& pred,
                                        const RatingMatrix& truth,
                                        const MaskSplit& mask,
                                        std::span<const int> thresholds) {
  if (thresholds.empty()) {
    throw std::invalid_argument("no sparse-user thresholds given");
  }
  // train-visible rating counts per user
  std::map<int, std::int64_t> train_count;
  for (const auto& pos : mask.train) ++train_count[pos.user];
  // per-user test outcome tallies
  struct UserErr {
    std::int64_t entries = 0, errors = 0;
  };
  std::map<int, UserErr> per_user;
  for (const auto& pos : mask.test) {
    auto& ue = per_user[pos.user];
    ++ue.entries;
    Level p = pred.at(pos.user, pos.item);
    if (p == kUnpredicted || p != truth.at(pos.user, pos.item)) ++ue.errors;
  }
  std::map<int, double> out;
  for (int t : thresholds) {
    std::int64_t entries = 0, errors = 0;
    for (const auto& [u, ue] : per_user) {
      auto it = train_count.find(u);
      std::int64_t count = it == train_count.end() ? 0 : it->second;
      if (count < t) {
        entries += ue.entries;
        errors += ue.errors;
      }
    }
    if (entries > 0) {
      out[t] = static_cast<double>(errors) / static_cast<double>(entries);
    }
  }
  return out;
}

EvalReport evaluate(const CompletedMatrix& pred, const RatingMatrix& truth,
                    const MaskSplit& mask, const ProtocolParams& params,
                    const AlgoParams& resolved) {
  EvalReport rep;
  rep.algorithm = params.algorithm;
  rep.resolved = resolved;
  rep.hide_fraction = params.hide_fraction;
  rep.noise = params.noise;
  rep.seed = params.seed;
  rep.counts = eval_counts(pred, truth, mask.test);
  if (rep.counts.test_size == 0) {
    throw std::invalid_argument("empty test set");
  }
  rep.overall_error =
      static_cast<double>(rep.counts.wrong + rep.counts.unpredicted) /
      static_cast<double>(rep.counts.test_size);
  if (truth.levels() == 2) {
    for (int x : params.top_x) {
      rep.top_x_error[x] = top_x_error(pred, truth, mask.test, x);
    }
  }
  rep.sparse_user_error =
      sparse_user_error(pred, truth, mask, params.sparse_thresholds);
  std::map<int, std::int64_t> train_count;
  for (const auto& pos : mask.train) ++train_count[pos.user];
  for (const auto& pos : mask.test) {
    auto it = train_count.find(pos.user);
    std::int64_t count = it == train_count.end() ? 0 : it->second;
    for (int t : params.sparse_thresholds) {
      if (count < t) ++rep.sparse_user_entries[t];
    }
  }
  return rep;
}

AlgoParams resolve_params(const RatingMatrix& train, const std::string& algo,
                          AlgoParams requested) {
  AlgoParams p = requested;
  // gap estimate anchored at the highest-support entity of an axis; the
  // median over the few richest anchors smooths single-anchor noise
  auto estimate_axis = [&](Axis axis) {
    SimilarityTable table = SimilarityTable::build(train, axis);
    int n = table.size();
    std::vector<int> order(n);
    for (int e = 0; e < n; ++e) order[e] = e;
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      if (table.support(a) != table.support(b)) {
        return table.support(a) > table.support(b);
      }
      return a < b;
    });
    int anchors = std::min(n, 25);
    std::vector<int> estimates;
    estimates.reserve(anchors);
    for (int i = 0; i < anchors; ++i) {
      estimates.push_back(estimate_set_size(table, order[i]));
    }
    std::sort(estimates.begin(), estimates.end());
    return estimates[estimates.size() / 2];
  };
  bool needs_users = algo == "ucr" || algo == "cor";
  bool needs_items = algo == "icr" || algo == "cor";
  bool needs_set_users = algo == "hucr" || algo == "hcor";
  bool needs_set_items = algo == "hicr" || algo == "hcor";
  if (needs_users && p.cluster_size_users == 0) {
    p.cluster_size_users = std::max(2, estimate_axis(Axis::users));
  }
  if (needs_items && p.cluster_size_items == 0) {
    p.cluster_size_items = std::max(2, estimate_axis(Axis::items));
  }
  if (needs_set_users && p.set_size_users == 0) {
    p.set_size_users = std::max(2, estimate_axis(Axis::users));
  }
  if (needs_set_items && p.set_size_items == 0) {
    p.set_size_items = std::max(2, estimate_axis(Axis::items));
  }
  if (algo == "paf" && p.top_k == 0) {
    p.top_k = std::max(1, estimate_axis(Axis::users) - 1);
  }
  return p;
}

CompletedMatrix run_algorithm(const RatingMatrix& train,
                              const std::string& algo,
                              const AlgoParams& params, const Targets& targets,
                              int threads) {
  if (algo == "ucr") {
    return ucr(train, params.cluster_size_users, targets, threads);
  }
  if (algo == "icr") {
    return icr(train, params.cluster_size_items, targets, threads);
  }
  if (algo == "cor") {
    return cor(train, params.cluster_size_users, params.cluster_size_items,
               targets, threads);
  }
  if (algo == "hucr") {
    return hucr(train, params.set_size_users, targets, threads);
  }
  if (algo == "hicr") {
    return hicr(train, params.set_size_items, targets, threads);
  }
  if (algo == "hcor") {
    return hcor(train, params.set_size_users, params.set_size_items, targets,
                threads);
  }
  if (algo == "paf") {
    return paf_baseline(train, params.top_k, targets, threads);
  }
  throw std::invalid_argument("unknown algorithm '" + algo + "'");
}

EvalReport run_protocol(const RatingMatrix& data,
                        const ProtocolParams& params) {
  RatingMatrix binary = data.levels() == 2
                            ? data
                            : quantize_binary(data, params.quantize_threshold);
  MaskSplit mask = split_mask(binary, params.hide_fraction, params.seed);
  RatingMatrix train = binary.restricted_to(mask.train);
  if (params.noise > 0.0) {
    train = flip_noise(train, params.noise, params.seed);
  }
  AlgoParams resolved = resolve_params(train, params.algorithm, params.algo);
  CompletedMatrix pred =
      run_algorithm(train, params.algorithm, resolved,
                    Targets::at(mask.test), params.threads);
  return evaluate(pred, binary, mask, params, resolved);
}

// ---------------------------------------------------------------------------
// Report serialization
// ---------------------------------------------------------------------------

namespace {

ordered_json params_to_json(const AlgoParams& p) {
  return ordered_json{{"cluster_size_users", p.cluster_size_users},
                      {"cluster_size_items", p.cluster_size_items},
                      {"set_size_users", p.set_size_users},
                      {"set_size_items", p.set_size_items},
                      {"top_k", p.top_k}};
}

AlgoParams params_from_json(const ordered_json& j) {
  AlgoParams p;
  p.cluster_size_users = j.at("cluster_size_users").get<int>();
  p.cluster_size_items = j.at("cluster_size_items").get<int>();
  p.set_size_users = j.at("set_size_users").get<int>();
  p.set_size_items = j.at("set_size_items").get<int>();
  p.top_k = j.at("top_k").get<int>();
  return p;
}

template <typename V>
ordered_json int_map_to_json(const std::map<int, V>& m) {
  ordered_json j = ordered_json::object();
  for (const auto& [k, v] : m) j[std::to_string(k)] = v;
  return j;
}

}  // namespace

std::string EvalReport::to_json() const {
  ordered_json j{
      {"algorithm", algorithm},
      {"params", params_to_json(resolved)},
      {"hide_fraction", hide_fraction},
      {"noise", noise},
      {"seed", seed},
      {"counts",
       ordered_json{{"test", counts.test_size},
                    {"predicted", counts.predicted},
                    {"unpredicted", counts.unpredicted},
                    {"correct", counts.correct},
                    {"wrong", counts.wrong}}},
      {"overall_error", overall_error},
      {"top_x_error", int_map_to_json(top_x_error)},
      {"sparse_user_error", int_map_to_json(sparse_user_error)},
      {"sparse_user_entries", int_map_to_json(sparse_user_entries)},
  };
  return j.dump(2) + "\n";
}

EvalReport EvalReport::from_json(const std::string& text) {
  ordered_json j = ordered_json::parse(text);
  EvalReport r;
  r.algorithm = j.at("algorithm").get<std::string>();
  r.resolved = params_from_json(j.at("params"));
  r.hide_fraction = j.at("hide_fraction").get<double>();
  r.noise = j.at("noise").get<double>();
  r.seed = j.at("seed").get<std::uint64_t>();
  const auto& c = j.at("counts");
  r.counts.test_size = c.at("test").get<std::int64_t>();
  r.counts.predicted = c.at("predicted").get<std::int64_t>();
  r.counts.unpredicted = c.at("unpredicted").get<std::int64_t>();
  r.counts.correct = c.at("correct").get<std::int64_t>();
  r.counts.wrong = c.at("wrong").get<std::int64_t>();
  r.overall_error = j.at("overall_error").get<double>();
  for (const auto& [k, v] : j.at("top_x_error").items()) {
    r.top_x_error[std::stoi(k)] = v.get<double>();
  }
  for (const auto& [k, v] : j.at("sparse_user_error").items()) {
    r.sparse_user_error[std::stoi(k)] = v.get<double>();
  }
  for (const auto& [k, v] : j.at("sparse_user_entries").items()) {
    r.sparse_user_entries[std::stoi(k)] = v.get<std::int64_t>();
  }
  return r;
}

void EvalReport::write_json(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << to_json();
}

void EvalReport::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "metric,key,value\n";
  out << "overall_error,," << overall_error << '\n';
  out << "test,," << counts.test_size << '\n';
  out << "predicted,," << counts.predicted << '\n';
  out << "unpredicted,," << counts.unpredicted << '\n';
  out << "correct,," << counts.correct << '\n';
  out << "wrong,," << counts.wrong << '\n';
  for (const auto& [x, v] : top_x_error) {
    out << "top_x_error," << x << ',' << v << '\n';
  }
  for (const auto& [t, v] : sparse_user_error) {
    out << "sparse_user_error," << t << ',' << v << '\n';
  }
  for (const auto& [t, v] : sparse_user_entries) {
    out << "sparse_user_entries," << t << ',' << v << '\n';
  }
}

std::string thresholds_to_json(const ThresholdReport& r) {
  ordered_json j{
      {"clustering_necessary_alpha", r.clustering_necessary_alpha},
      {"clustering_sufficient_alpha", r.clustering_sufficient_alpha},
      {"clustering_sufficient_alpha_given_beta",
       r.clustering_sufficient_alpha_given_beta},
      {"coclustering_necessary_alpha", r.coclustering_necessary_alpha},
      {"coclustering_necessary_beta", r.coclustering_necessary_beta},
      {"clustering_sample_scale", r.clustering_sample_scale},
      {"coclustering_sample_scale", r.coclustering_sample_scale},
      {"cluster_count_cap", r.cluster_count_cap},
      {"expected_observed", r.expected_observed},
      {"omega_constant", r.omega_constant},
      {"below_clustering_necessary", r.below_clustering_necessary},
      {"clustering_sufficient", r.clustering_sufficient},
      {"below_coclustering_necessary", r.below_coclustering_necessary},
      {"coclustering_sufficient", r.coclustering_sufficient},
      {"cluster_count_ok", r.cluster_count_ok},
  };
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Phase sweep
// ---------------------------------------------------------------------------

SweepResult phase_sweep(const SynthConfig& base, SweepParam param, double from,
                        double to, int steps, int trials,
                        const std::string& algorithm, int threads) {
  if (steps < 1 || trials < 1) {
    throw std::invalid_argument("sweep needs at least one step and one trial");
  }
  SweepResult result;
  result.param = param == SweepParam::alpha  ? "alpha"
                 : param == SweepParam::beta ? "beta"
                                             : "p";
  result.algorithm = algorithm;
  result.trials = trials;
  result.rows.resize(static_cast<std::size_t>(steps) * trials);

  auto config_at = [&](double value, std::uint64_t seed) {
    SynthConfig cfg = base;
    switch (param) {
      case SweepParam::alpha: cfg.alpha = value; break;
      case SweepParam::beta: cfg.beta = value; break;
      case SweepParam::truth_prob: cfg.truth_prob = value; break;
    }
    cfg.seed = seed;
    return cfg;
  };
  auto value_at = [&](int i) {
    return steps == 1 ? from : from + (to - from) * i / (steps - 1);
  };

  const int total = steps * trials;
  parallel_for(0, total, threads, [&](int idx) {
    int point = idx / trials;
    int trial = idx % trials;
    double value = value_at(point);
    std::uint64_t seed =
        derive_seed(base.seed, {static_cast<std::uint64_t>(Stream::sweep_trial),
                                static_cast<std::uint64_t>(point),
                                static_cast<std::uint64_t>(trial)});
    SynthConfig cfg = config_at(value, seed);
    GeneratedInstance inst = generate_instance(cfg);
    AlgoParams params;
    params.cluster_size_users = cfg.user_cluster_size();
    params.cluster_size_items = cfg.item_cluster_size();
    params.set_size_users = cfg.user_cluster_size();
    params.set_size_items = cfg.item_cluster_size();
    params.top_k = std::max(1, cfg.user_cluster_size() - 1);
    CompletedMatrix pred =
        run_algorithm(inst.observed, algorithm, params, Targets::all(), 1);
    SweepRow& row = result.rows[idx];
    row.value = value;
    row.trial = trial;
    row.seed = seed;
    row.recovered = pred.recovers(inst.truth);
    row.observed = inst.observed.num_observed();
    row.expected_observed = expected_observations(cfg);
  });

  result.points.resize(steps);
  for (int i = 0; i < steps; ++i) {
    double value = value_at(i);
    int recovered = 0;
    for (int t = 0; t < trials; ++t) {
      recovered += result.rows[static_cast<std::size_t>(i) * trials + t]
                       .recovered;
    }
    result.points[i].value = value;
    result.points[i].recovery_fraction =
        static_cast<double>(recovered) / trials;
    result.points[i].thresholds = thresholds(config_at(value, base.seed));
  }
  return result;
}

void write_sweep_rows_csv(const std::filesystem::path& path,
                          const SweepResult& sweep) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << sweep.param << ",trial,seed,recovered,observed,expected_observed\n";
  for (const auto& row : sweep.rows) {
    out << row.value << ',' << row.trial << ',' << row.seed << ','
        << (row.recovered ? 1 : 0) << ',' << row.observed << ','
        << row.expected_observed << '\n';
  }
}

void write_sweep_summary_csv(const std::filesystem::path& path,
                             const SweepResult& sweep) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << sweep.param
      << ",recovery_fraction,expected_observed,clustering_sufficient,"
         "below_clustering_necessary\n";
  for (const auto& p : sweep.points) {
    out << p.value << ',' << p.recovery_fraction << ','
        << p.thresholds.expected_observed << ','
        << (p.thresholds.clustering_sufficient ? 1 : 0) << ','
        << (p.thresholds.below_clustering_necessary ? 1 : 0) << '\n';
  }
}

}  // namespace corec
