// Python bindings for the corec library: rating matrices, the synthetic
// generator, similarity scores, the completion algorithms and the
// evaluation protocol.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstdint>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "corec/algorithms.hpp"
#include "corec/eval.hpp"
#include "corec/ratings.hpp"
#include "corec/similarity.hpp"
#include "corec/synth.hpp"

namespace py = pybind11;
using namespace corec;

namespace {

Axis parse_axis(const std::string& axis) {
  if (axis == "users") return Axis::users;
  if (axis == "items") return Axis::items;
  throw std::invalid_argument("axis must be 'users' or 'items'");
}

RatingsFormat parse_format(const std::string& format) {
  if (format == "movielens-dat") return RatingsFormat::movielens_dat;
  if (format == "csv-triples") return RatingsFormat::csv_triples;
  throw std::invalid_argument("format must be 'movielens-dat' or 'csv-triples'");
}

RatingMatrix matrix_from_triples(
    int num_users, int num_items, int levels,
    const std::vector<std::tuple<int, int, int>>& triples) {
  std::vector<RatingTriple> converted;
  converted.reserve(triples.size());
  for (const auto& [u, m, v] : triples) converted.push_back({u, m, v});
  return RatingMatrix::from_triples(num_users, num_items, levels, converted);
}

Targets targets_from(const std::optional<std::vector<std::tuple<int, int>>>&
                         positions) {
  if (!positions) return Targets::all();
  std::vector<Position> converted;
  converted.reserve(positions->size());
  for (const auto& [u, m] : *positions) converted.push_back({u, m});
  return Targets::at(std::move(converted));
}

py::dict report_to_dict(const EvalReport& rep) {
  py::dict d;
  d["algorithm"] = rep.algorithm;
  py::dict params;
  params["cluster_size_users"] = rep.resolved.cluster_size_users;
  params["cluster_size_items"] = rep.resolved.cluster_size_items;
  params["set_size_users"] = rep.resolved.set_size_users;
  params["set_size_items"] = rep.resolved.set_size_items;
  params["top_k"] = rep.resolved.top_k;
  d["params"] = params;
  d["hide_fraction"] = rep.hide_fraction;
  d["noise"] = rep.noise;
  d["seed"] = rep.seed;
  py::dict counts;
  counts["test"] = rep.counts.test_size;
  counts["predicted"] = rep.counts.predicted;
  counts["unpredicted"] = rep.counts.unpredicted;
  counts["correct"] = rep.counts.correct;
  counts["wrong"] = rep.counts.wrong;
  d["counts"] = counts;
  d["overall_error"] = rep.overall_error;
  py::dict topx;
  for (const auto& [x, v] : rep.top_x_error) topx[py::int_(x)] = v;
  d["top_x_error"] = topx;
  py::dict sparse;
  for (const auto& [t, v] : rep.sparse_user_error) sparse[py::int_(t)] = v;
  d["sparse_user_error"] = sparse;
  return d;
}

py::dict thresholds_to_dict(const ThresholdReport& r) {
  py::dict d;
  d["clustering_necessary_alpha"] = r.clustering_necessary_alpha;
  d["clustering_sufficient_alpha"] = r.clustering_sufficient_alpha;
  d["clustering_sufficient_alpha_given_beta"] =
      r.clustering_sufficient_alpha_given_beta;
  d["coclustering_necessary_alpha"] = r.coclustering_necessary_alpha;
  d["coclustering_necessary_beta"] = r.coclustering_necessary_beta;
  d["clustering_sample_scale"] = r.clustering_sample_scale;
  d["coclustering_sample_scale"] = r.coclustering_sample_scale;
  d["cluster_count_cap"] = r.cluster_count_cap;
  d["expected_observed"] = r.expected_observed;
  d["omega_constant"] = r.omega_constant;
  d["below_clustering_necessary"] = r.below_clustering_necessary;
  d["clustering_sufficient"] = r.clustering_sufficient;
  d["below_coclustering_necessary"] = r.below_coclustering_necessary;
  d["coclustering_sufficient"] = r.coclustering_sufficient;
  d["cluster_count_ok"] = r.cluster_count_ok;
  return d;
}

ProtocolParams protocol_params(const std::string& algorithm,
                               double hide_fraction, double noise,
                               double quantize_threshold, std::uint64_t seed,
                               int threads, int cluster_size_users,
                               int cluster_size_items, int set_size_users,
                               int set_size_items, int top_k) {
  ProtocolParams p;
  p.algorithm = algorithm;
  p.hide_fraction = hide_fraction;
  p.noise = noise;
  p.quantize_threshold = quantize_threshold;
  p.seed = seed;
  p.threads = threads;
  p.algo.cluster_size_users = cluster_size_users;
  p.algo.cluster_size_items = cluster_size_items;
  p.algo.set_size_users = set_size_users;
  p.algo.set_size_items = set_size_items;
  p.algo.top_k = top_k;
  return p;
}

}  // namespace

PYBIND11_MODULE(_corec, m) {
  m.doc() = "similarity-based clustering and co-clustering matrix completion";

  py::class_<RatingMatrix>(m, "RatingMatrix")
      .def(py::init(&matrix_from_triples), py::arg("num_users"),
           py::arg("num_items"), py::arg("levels"), py::arg("triples"))
      .def_property_readonly("num_users", &RatingMatrix::num_users)
      .def_property_readonly("num_items", &RatingMatrix::num_items)
      .def_property_readonly("levels", &RatingMatrix::levels)
      .def_property_readonly("num_observed", &RatingMatrix::num_observed)
      .def("at",
           [](const RatingMatrix& r, int u, int v) {
             return static_cast<int>(r.at(u, v));
           },
           py::arg("user"), py::arg("item"),
           "observed level, or 0 when erased")
      .def("triples",
           [](const RatingMatrix& r) {
             std::vector<std::tuple<int, int, int>> out;
             out.reserve(static_cast<std::size_t>(r.num_observed()));
             for (int u = 0; u < r.num_users(); ++u) {
               for (const auto& e : r.row(u)) {
                 out.emplace_back(u, e.index, static_cast<int>(e.level));
               }
             }
             return out;
           })
      .def("transposed", &RatingMatrix::transposed)
      .def("__repr__", [](const RatingMatrix& r) {
        return "<RatingMatrix " + std::to_string(r.num_users()) + "x" +
               std::to_string(r.num_items()) + ", " +
               std::to_string(r.num_observed()) + " observed>";
      });

  py::class_<MaskSplit>(m, "MaskSplit")
      .def_property_readonly("train",
                             [](const MaskSplit& m_) {
                               std::vector<std::tuple<int, int>> out;
                               for (const auto& p : m_.train) {
                                 out.emplace_back(p.user, p.item);
                               }
                               return out;
                             })
      .def_property_readonly("test",
                             [](const MaskSplit& m_) {
                               std::vector<std::tuple<int, int>> out;
                               for (const auto& p : m_.test) {
                                 out.emplace_back(p.user, p.item);
                               }
                               return out;
                             })
      .def_readonly("hide_fraction", &MaskSplit::hide_fraction)
      .def_readonly("seed", &MaskSplit::seed);

  m.def("load_ratings",
        [](const std::string& path, const std::string& format, int levels) {
          return load_ratings(path, parse_format(format), levels);
        },
        py::arg("path"), py::arg("format") = "csv-triples",
        py::arg("levels") = 0);
  m.def("quantize_binary", &quantize_binary, py::arg("ratings"),
        py::arg("threshold") = 3.5);
  m.def("split_mask", &split_mask, py::arg("ratings"),
        py::arg("hide_fraction"), py::arg("seed"));
  m.def("flip_noise", &flip_noise, py::arg("ratings"), py::arg("flip_prob"),
        py::arg("seed"));

  py::class_<SynthConfig>(m, "SynthConfig")
      .def(py::init<>())
      .def_readwrite("num_users", &SynthConfig::num_users)
      .def_readwrite("num_items", &SynthConfig::num_items)
      .def_readwrite("num_clusters", &SynthConfig::num_clusters)
      .def_readwrite("levels", &SynthConfig::levels)
      .def_readwrite("truth_prob", &SynthConfig::truth_prob)
      .def_readwrite("alpha", &SynthConfig::alpha)
      .def_readwrite("beta", &SynthConfig::beta)
      .def_readwrite("eta", &SynthConfig::eta)
      .def_readwrite("rich_users_per_cluster",
                     &SynthConfig::rich_users_per_cluster)
      .def_readwrite("rich_items_per_cluster",
                     &SynthConfig::rich_items_per_cluster)
      .def_readwrite("mu_cap", &SynthConfig::mu_cap)
      .def_readwrite("seed", &SynthConfig::seed)
      .def("validate", &SynthConfig::validate);

  py::class_<ClusterModel>(m, "ClusterModel")
      .def_readonly("num_clusters", &ClusterModel::num_clusters)
      .def_readonly("user_cluster", &ClusterModel::user_cluster)
      .def_readonly("item_cluster", &ClusterModel::item_cluster)
      .def("is_user_rich", &ClusterModel::is_user_rich)
      .def("is_item_rich", &ClusterModel::is_item_rich);

  py::class_<PreferenceMatrix>(m, "PreferenceMatrix")
      .def_property_readonly("num_users", &PreferenceMatrix::num_users)
      .def_property_readonly("num_items", &PreferenceMatrix::num_items)
      .def_property_readonly("levels", &PreferenceMatrix::levels)
      .def("at",
           [](const PreferenceMatrix& b, int u, int m) {
             return static_cast<int>(b.at(u, m));
           });

  py::class_<GeneratedInstance>(m, "GeneratedInstance")
      .def_readonly("truth", &GeneratedInstance::truth)
      .def_readonly("clusters", &GeneratedInstance::clusters)
      .def_readonly("observed", &GeneratedInstance::observed)
      .def_readonly("achieved_mu_users", &GeneratedInstance::achieved_mu_users)
      .def_readonly("achieved_mu_items", &GeneratedInstance::achieved_mu_items);

  m.def("generate_instance", &generate_instance, py::arg("config"));
  m.def("expected_observations", &expected_observations, py::arg("config"));
  m.def("thresholds",
        [](const SynthConfig& cfg, double omega_constant) {
          return thresholds_to_dict(thresholds(cfg, omega_constant));
        },
        py::arg("config"), py::arg("omega_constant") = 1.0);
  m.def("same_pref_agree_prob", &same_pref_agree_prob, py::arg("p"),
        py::arg("levels"));
  m.def("diff_pref_agree_prob", &diff_pref_agree_prob, py::arg("p"),
        py::arg("levels"));
  m.def("expected_similarity",
        [](int pair_case, const SynthConfig& cfg, double mu) {
          auto e = expected_similarity(pair_case, cfg, mu);
          return py::make_tuple(e.lower, e.upper);
        },
        py::arg("pair_case"), py::arg("config"), py::arg("mu"));
  m.def("expected_co_rating", &expected_co_rating, py::arg("scenario"),
        py::arg("config"));

  m.def("co_rating",
        [](const RatingMatrix& r, int a, int b, const std::string& axis) {
          return co_rating(r, a, b, parse_axis(axis));
        },
        py::arg("ratings"), py::arg("a"), py::arg("b"),
        py::arg("axis") = "users");
  m.def("similarity",
        [](const RatingMatrix& r, int a, int b, const std::string& axis) {
          return similarity(r, a, b, parse_axis(axis));
        },
        py::arg("ratings"), py::arg("a"), py::arg("b"),
        py::arg("axis") = "users");
  m.def("normalized_similarity",
        [](const RatingMatrix& r, int a, int b, const std::string& axis) {
          return normalized_similarity(r, a, b, parse_axis(axis));
        },
        py::arg("ratings"), py::arg("a"), py::arg("b"),
        py::arg("axis") = "users");
  m.def("modified_normalized_similarity",
        [](const RatingMatrix& r, int a, int b, const std::string& axis) {
          return modified_normalized_similarity(r, a, b, parse_axis(axis));
        },
        py::arg("ratings"), py::arg("a"), py::arg("b"),
        py::arg("axis") = "users");

  py::class_<SimilarityTable>(m, "SimilarityTable")
      .def_property_readonly("size", &SimilarityTable::size)
      .def("phi", &SimilarityTable::phi)
      .def("sigma", &SimilarityTable::sigma)
      .def("agreements", &SimilarityTable::agreements)
      .def("normalized", &SimilarityTable::normalized)
      .def("modified_normalized", &SimilarityTable::modified_normalized)
      .def("support", &SimilarityTable::support);
  m.def("build_similarity_table",
        [](const RatingMatrix& r, const std::string& axis, int threads) {
          return SimilarityTable::build(r, parse_axis(axis), threads);
        },
        py::arg("ratings"), py::arg("axis") = "users", py::arg("threads") = 1);

  py::class_<CompletedMatrix>(m, "CompletedMatrix")
      .def_property_readonly("num_users", &CompletedMatrix::num_users)
      .def_property_readonly("num_items", &CompletedMatrix::num_items)
      .def_property_readonly("levels", &CompletedMatrix::levels)
      .def_property_readonly("method", &CompletedMatrix::method)
      .def("at",
           [](const CompletedMatrix& c, int u, int m) {
             return static_cast<int>(c.at(u, m));
           },
           "predicted level, or 0 when no voter had a rating")
      .def("tallies_at",
           [](const CompletedMatrix& c, int u, int m) {
             auto t = c.tallies_at(u, m);
             return std::vector<float>(t.begin(), t.end());
           })
      .def("recovers", &CompletedMatrix::recovers)
      .def("count_unpredicted", &CompletedMatrix::count_unpredicted);

  using OptPositions = std::optional<std::vector<std::tuple<int, int>>>;
  m.def("ucr",
        [](const RatingMatrix& r, int cluster_size, const OptPositions& at,
           int threads) {
          return ucr(r, cluster_size, targets_from(at), threads);
        },
        py::arg("ratings"), py::arg("cluster_size"),
        py::arg("targets") = py::none(), py::arg("threads") = 1);
  m.def("icr",
        [](const RatingMatrix& r, int cluster_size, const OptPositions& at,
           int threads) {
          return icr(r, cluster_size, targets_from(at), threads);
        },
        py::arg("ratings"), py::arg("cluster_size"),
        py::arg("targets") = py::none(), py::arg("threads") = 1);
  m.def("cor",
        [](const RatingMatrix& r, int user_cluster_size, int item_cluster_size,
           const OptPositions& at, int threads) {
          return cor(r, user_cluster_size, item_cluster_size, targets_from(at),
                     threads);
        },
        py::arg("ratings"), py::arg("user_cluster_size"),
        py::arg("item_cluster_size"), py::arg("targets") = py::none(),
        py::arg("threads") = 1);
  m.def("hucr",
        [](const RatingMatrix& r, int set_size, const OptPositions& at,
           int threads) {
          return hucr(r, set_size, targets_from(at), threads);
        },
        py::arg("ratings"), py::arg("set_size"),
        py::arg("targets") = py::none(), py::arg("threads") = 1);
  m.def("hicr",
        [](const RatingMatrix& r, int set_size, const OptPositions& at,
           int threads) {
          return hicr(r, set_size, targets_from(at), threads);
        },
        py::arg("ratings"), py::arg("set_size"),
        py::arg("targets") = py::none(), py::arg("threads") = 1);
  m.def("hcor",
        [](const RatingMatrix& r, int user_set_size, int item_set_size,
           const OptPositions& at, int threads) {
          return hcor(r, user_set_size, item_set_size, targets_from(at),
                      threads);
        },
        py::arg("ratings"), py::arg("user_set_size"), py::arg("item_set_size"),
        py::arg("targets") = py::none(), py::arg("threads") = 1);
  m.def("paf",
        [](const RatingMatrix& r, int k, const OptPositions& at, int threads) {
          return paf_baseline(r, k, targets_from(at), threads);
        },
        py::arg("ratings"), py::arg("k"), py::arg("targets") = py::none(),
        py::arg("threads") = 1);

  m.def("estimate_set_size",
        [](const RatingMatrix& r, int anchor, const std::string& axis) {
          return estimate_set_size(r, anchor, parse_axis(axis));
        },
        py::arg("ratings"), py::arg("anchor"), py::arg("axis") = "users");
  m.def("estimate_cluster_size",
        [](const RatingMatrix& r, std::optional<int> cluster_count_hint) {
          auto est = estimate_cluster_size(r, cluster_count_hint);
          return py::make_tuple(est.observed_fraction, est.size);
        },
        py::arg("ratings"), py::arg("cluster_count_hint") = py::none(),
        "returns (observed_fraction, size)");

  m.def("run_protocol",
        [](const RatingMatrix& data, const std::string& algorithm,
           double hide_fraction, double noise, double quantize_threshold,
           std::uint64_t seed, int threads, int cluster_size_users,
           int cluster_size_items, int set_size_users, int set_size_items,
           int top_k) {
          return report_to_dict(run_protocol(
              data, protocol_params(algorithm, hide_fraction, noise,
                                    quantize_threshold, seed, threads,
                                    cluster_size_users, cluster_size_items,
                                    set_size_users, set_size_items, top_k)));
        },
        py::arg("data"), py::arg("algorithm") = "hcor",
        py::arg("hide_fraction") = 0.7, py::arg("noise") = 0.0,
        py::arg("quantize_threshold") = 3.5, py::arg("seed") = 0,
        py::arg("threads") = 1, py::arg("cluster_size_users") = 0,
        py::arg("cluster_size_items") = 0, py::arg("set_size_users") = 0,
        py::arg("set_size_items") = 0, py::arg("top_k") = 0);

  m.def("phase_sweep",
        [](const SynthConfig& base, const std::string& param, double from,
           double to, int steps, int trials, const std::string& algorithm,
           int threads) {
          SweepParam which;
          if (param == "alpha") {
            which = SweepParam::alpha;
          } else if (param == "beta") {
            which = SweepParam::beta;
          } else if (param == "p") {
            which = SweepParam::truth_prob;
          } else {
            throw std::invalid_argument("param must be alpha, beta or p");
          }
          SweepResult sweep = phase_sweep(base, which, from, to, steps, trials,
                                          algorithm, threads);
          py::list points;
          for (const auto& p : sweep.points) {
            py::dict d;
            d["value"] = p.value;
            d["recovery_fraction"] = p.recovery_fraction;
            d["thresholds"] = thresholds_to_dict(p.thresholds);
            points.append(d);
          }
          return points;
        },
        py::arg("config"), py::arg("param"), py::arg("from_value"),
        py::arg("to_value"), py::arg("steps"), py::arg("trials"),
        py::arg("algorithm") = "ucr", py::arg("threads") = 1);
}
