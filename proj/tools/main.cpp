// corec command line: dataset ingestion, synthetic instance generation,
// protocol runs, phase sweeps, and report recomputation. Every run writes a
// manifest; re-running from a manifest reproduces the outputs byte for byte.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include "corec/algorithms.hpp"
#include "corec/eval.hpp"
#include "corec/ratings.hpp"
#include "corec/synth.hpp"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;
using namespace corec;

namespace {

struct DataOptions {
  std::string path;
  std::string format = "csv-triples";  // or movielens-dat
  int levels = 0;                      // 0 = infer
};

RatingsFormat parse_format(const std::string& name) {
  if (name == "movielens-dat" || name == "movielens" || name == "dat") {
    return RatingsFormat::movielens_dat;
  }
  if (name == "csv-triples" || name == "csv") {
    return RatingsFormat::csv_triples;
  }
  throw CLI::ValidationError("--format",
                             "expected movielens-dat or csv-triples");
}

RatingMatrix load_data(const DataOptions& data) {
  return load_ratings(data.path, parse_format(data.format), data.levels);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// key = value lines, '#' comments; flags given on the command line win
std::map<std::string, std::string> parse_kv_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path.string());
  std::map<std::string, std::string> kv;
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
    kv[key] = value;
  }
  return kv;
}

// overlays config-file values onto synth parameters the user did not flag
void overlay_synth_config(const CLI::App* cmd, const fs::path& path,
                          SynthConfig& cfg) {
  SynthConfig file_cfg = load_synth_config(path);
  if (cmd->count("--users") == 0) cfg.num_users = file_cfg.num_users;
  if (cmd->count("--items") == 0) cfg.num_items = file_cfg.num_items;
  if (cmd->count("--clusters") == 0) cfg.num_clusters = file_cfg.num_clusters;
  if (cmd->count("--levels") == 0) cfg.levels = file_cfg.levels;
  if (cmd->count("--p") == 0) cfg.truth_prob = file_cfg.truth_prob;
  if (cmd->count("--alpha") == 0) cfg.alpha = file_cfg.alpha;
  if (cmd->count("--beta") == 0) cfg.beta = file_cfg.beta;
  if (cmd->count("--eta") == 0) cfg.eta = file_cfg.eta;
  if (cmd->count("--rich-users") == 0) {
    cfg.rich_users_per_cluster = file_cfg.rich_users_per_cluster;
  }
  if (cmd->count("--rich-items") == 0) {
    cfg.rich_items_per_cluster = file_cfg.rich_items_per_cluster;
  }
  if (cmd->count("--mu-cap") == 0) cfg.mu_cap = file_cfg.mu_cap;
  if (cmd->count("--seed") == 0) cfg.seed = file_cfg.seed;
}

void overlay_run_config(const CLI::App* cmd, const fs::path& path,
                        DataOptions& data, ProtocolParams& params) {
  auto kv = parse_kv_config(path);
  auto take = [&](const char* key, const char* flag) -> const std::string* {
    auto it = kv.find(key);
    if (it == kv.end() || cmd->count(flag) > 0) return nullptr;
    return &it->second;
  };
  if (const auto* v = take("data", "--data")) data.path = *v;
  if (const auto* v = take("format", "--format")) data.format = *v;
  if (const auto* v = take("levels", "--levels")) data.levels = std::stoi(*v);
  if (const auto* v = take("algo", "--algo")) params.algorithm = *v;
  if (const auto* v = take("cluster_size_users", "--cluster-size-users")) {
    params.algo.cluster_size_users = std::stoi(*v);
  }
  if (const auto* v = take("cluster_size_items", "--cluster-size-items")) {
    params.algo.cluster_size_items = std::stoi(*v);
  }
  if (const auto* v = take("T_users", "--T-users")) {
    params.algo.set_size_users = std::stoi(*v);
  }
  if (const auto* v = take("T_items", "--T-items")) {
    params.algo.set_size_items = std::stoi(*v);
  }
  if (const auto* v = take("k", "--k")) params.algo.top_k = std::stoi(*v);
  if (const auto* v = take("hide", "--hide")) {
    params.hide_fraction = std::stod(*v);
  }
  if (const auto* v = take("noise", "--noise")) params.noise = std::stod(*v);
  if (const auto* v = take("threshold", "--threshold")) {
    params.quantize_threshold = std::stod(*v);
  }
  if (const auto* v = take("seed", "--seed")) params.seed = std::stoull(*v);
  const char* known[] = {"data", "format", "levels", "algo",
                         "cluster_size_users", "cluster_size_items", "T_users",
                         "T_items", "k", "hide", "noise", "threshold", "seed"};
  for (const auto& [key, value] : kv) {
    bool ok = false;
    for (const char* name : known) ok = ok || key == name;
    if (!ok) {
      throw std::runtime_error("unknown config key '" + key + "'");
    }
  }
}

ordered_json synth_to_json(const SynthConfig& cfg) {
  return ordered_json{{"users", cfg.num_users},
                      {"items", cfg.num_items},
                      {"clusters", cfg.num_clusters},
                      {"levels", cfg.levels},
                      {"p", cfg.truth_prob},
                      {"alpha", cfg.alpha},
                      {"beta", cfg.beta},
                      {"eta", cfg.eta},
                      {"rich_users", cfg.rich_users_per_cluster},
                      {"rich_items", cfg.rich_items_per_cluster},
                      {"mu_cap", cfg.mu_cap},
                      {"seed", cfg.seed}};
}

SynthConfig synth_from_json(const ordered_json& j) {
  SynthConfig cfg;
  cfg.num_users = j.at("users").get<int>();
  cfg.num_items = j.at("items").get<int>();
  cfg.num_clusters = j.at("clusters").get<int>();
  cfg.levels = j.at("levels").get<int>();
  cfg.truth_prob = j.at("p").get<double>();
  cfg.alpha = j.at("alpha").get<double>();
  cfg.beta = j.at("beta").get<double>();
  cfg.eta = j.at("eta").get<int>();
  cfg.rich_users_per_cluster = j.at("rich_users").get<int>();
  cfg.rich_items_per_cluster = j.at("rich_items").get<int>();
  cfg.mu_cap = j.at("mu_cap").get<double>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
  return cfg;
}

ordered_json algo_params_to_json(const AlgoParams& p) {
  return ordered_json{{"cluster_size_users", p.cluster_size_users},
                      {"cluster_size_items", p.cluster_size_items},
                      {"set_size_users", p.set_size_users},
                      {"set_size_items", p.set_size_items},
                      {"top_k", p.top_k}};
}

AlgoParams algo_params_from_json(const ordered_json& j) {
  AlgoParams p;
  p.cluster_size_users = j.at("cluster_size_users").get<int>();
  p.cluster_size_items = j.at("cluster_size_items").get<int>();
  p.set_size_users = j.at("set_size_users").get<int>();
  p.set_size_items = j.at("set_size_items").get<int>();
  p.top_k = j.at("top_k").get<int>();
  return p;
}

// manifest of a protocol run; the output directory and thread count are
// execution details and stay out of it
ordered_json run_manifest(const DataOptions& data,
                          const ProtocolParams& params) {
  return ordered_json{{"command", "run"},
                      {"data", data.path},
                      {"format", data.format},
                      {"levels", data.levels},
                      {"algorithm", params.algorithm},
                      {"params", algo_params_to_json(params.algo)},
                      {"hide_fraction", params.hide_fraction},
                      {"noise", params.noise},
                      {"quantize_threshold", params.quantize_threshold},
                      {"seed", params.seed},
                      {"top_x", params.top_x},
                      {"sparse_thresholds", params.sparse_thresholds}};
}

void run_from_manifest(const ordered_json& manifest, DataOptions& data,
                       ProtocolParams& params) {
  data.path = manifest.at("data").get<std::string>();
  data.format = manifest.at("format").get<std::string>();
  data.levels = manifest.at("levels").get<int>();
  params.algorithm = manifest.at("algorithm").get<std::string>();
  params.algo = algo_params_from_json(manifest.at("params"));
  params.hide_fraction = manifest.at("hide_fraction").get<double>();
  params.noise = manifest.at("noise").get<double>();
  params.quantize_threshold = manifest.at("quantize_threshold").get<double>();
  params.seed = manifest.at("seed").get<std::uint64_t>();
  params.top_x = manifest.at("top_x").get<std::vector<int>>();
  params.sparse_thresholds =
      manifest.at("sparse_thresholds").get<std::vector<int>>();
}

CompletedMatrix read_predictions_csv(const fs::path& path, int num_users,
                                     int num_items, int levels,
                                     const std::string& method) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  std::getline(in, line);  // header
  struct Row {
    Position pos;
    Level value;
    std::vector<double> tallies;
  };
  std::vector<Row> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      auto comma = line.find(',', start);
      fields.push_back(line.substr(start, comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (static_cast<int>(fields.size()) != 3 + levels) {
      throw std::runtime_error("unexpected column count in " + path.string());
    }
    Row row;
    row.pos = {std::stoi(fields[0]) - 1, std::stoi(fields[1]) - 1};
    row.value = fields[2] == "*" ? kUnpredicted
                                 : static_cast<Level>(std::stoi(fields[2]));
    for (int g = 0; g < levels; ++g) {
      row.tallies.push_back(std::stod(fields[3 + g]));
    }
    rows.push_back(std::move(row));
  }
  std::vector<Position> positions;
  positions.reserve(rows.size());
  for (const auto& row : rows) positions.push_back(row.pos);
  CompletedMatrix pred = CompletedMatrix::sparse(num_users, num_items, levels,
                                                 method, std::move(positions));
  for (const auto& row : rows) {
    pred.store(pred.slot_of(row.pos.user, row.pos.item), row.value,
               row.tallies);
  }
  return pred;
}

int command_ingest(const DataOptions& data, const std::string& out_dir) {
  RatingMatrix r = load_data(data);
  std::cout << "users=" << r.num_users() << " items=" << r.num_items()
            << " levels=" << r.levels() << " entries=" << r.num_observed()
            << '\n';
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    write_triples_csv(fs::path(out_dir) / "ratings.csv", r);
    ordered_json stats{{"users", r.num_users()},
                       {"items", r.num_items()},
                       {"levels", r.levels()},
                       {"entries", r.num_observed()}};
    write_text(fs::path(out_dir) / "stats.json", stats.dump(2) + "\n");
  }
  return 0;
}

int command_synth(const SynthConfig& cfg, const std::string& out_dir) {
  GeneratedInstance inst = generate_instance(cfg);
  fs::create_directories(out_dir);
  fs::path dir(out_dir);
  write_triples_csv(dir / "ratings.csv", inst.observed);
  // the ground truth as triples over the full grid
  {
    std::ofstream out(dir / "truth.csv");
    out << "user,item,rating\n";
    for (int u = 0; u < cfg.num_users; ++u) {
      for (int m = 0; m < cfg.num_items; ++m) {
        out << (u + 1) << ',' << (m + 1) << ',' << int(inst.truth.at(u, m))
            << '\n';
      }
    }
  }
  write_clusters_csv(dir / "clusters.csv", inst.clusters);
  write_text(dir / "thresholds.json", thresholds_to_json(thresholds(cfg)));
  ordered_json manifest{{"command", "synth"},
                        {"config", synth_to_json(cfg)},
                        {"achieved_mu_users", inst.achieved_mu_users},
                        {"achieved_mu_items", inst.achieved_mu_items}};
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
  std::cout << "instance written to " << out_dir << " (observed "
            << inst.observed.num_observed() << " of "
            << static_cast<long long>(cfg.num_users) * cfg.num_items
            << " entries)\n";
  return 0;
}

int command_run(const DataOptions& data, const ProtocolParams& params,
                const std::string& out_dir) {
  RatingMatrix raw = load_data(data);
  RatingMatrix binary = raw.levels() == 2
                            ? raw
                            : quantize_binary(raw, params.quantize_threshold);
  MaskSplit mask = split_mask(binary, params.hide_fraction, params.seed);
  RatingMatrix train = binary.restricted_to(mask.train);
  if (params.noise > 0.0) train = flip_noise(train, params.noise, params.seed);
  AlgoParams resolved = resolve_params(train, params.algorithm, params.algo);
  CompletedMatrix pred = run_algorithm(train, params.algorithm, resolved,
                                       Targets::at(mask.test), params.threads);
  EvalReport report = evaluate(pred, binary, mask, params, resolved);

  fs::create_directories(out_dir);
  fs::path dir(out_dir);
  write_text(dir / "manifest.json", run_manifest(data, params).dump(2) + "\n");
  report.write_json(dir / "report.json");
  report.write_csv(dir / "report.csv");
  pred.write_csv(dir / "predictions.csv");
  write_mask_csv(dir / "masks.csv", mask);
  std::cout << "overall_error=" << report.overall_error;
  if (!report.top_x_error.empty()) {
    std::cout << " top_1_error=" << report.top_x_error.begin()->second;
  }
  std::cout << " unpredicted=" << report.counts.unpredicted << '\n';
  return 0;
}

int command_sweep(const SynthConfig& base, const std::string& param,
                  double from, double to, int steps, int trials,
                  const std::string& algorithm, int threads,
                  const std::string& out_dir) {
  SweepParam which;
  if (param == "alpha") {
    which = SweepParam::alpha;
  } else if (param == "beta") {
    which = SweepParam::beta;
  } else if (param == "p") {
    which = SweepParam::truth_prob;
  } else {
    throw CLI::ValidationError("--param", "expected alpha, beta or p");
  }
  SweepResult sweep =
      phase_sweep(base, which, from, to, steps, trials, algorithm, threads);
  fs::create_directories(out_dir);
  fs::path dir(out_dir);
  write_sweep_rows_csv(dir / "sweep_trials.csv", sweep);
  write_sweep_summary_csv(dir / "sweep_summary.csv", sweep);
  ordered_json manifest{{"command", "sweep"},
                        {"config", synth_to_json(base)},
                        {"param", param},
                        {"from", from},
                        {"to", to},
                        {"steps", steps},
                        {"trials", trials},
                        {"algorithm", algorithm}};
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
  for (const auto& point : sweep.points) {
    std::cout << param << "=" << point.value
              << " recovery=" << point.recovery_fraction << '\n';
  }
  return 0;
}

int command_report(const std::string& run_dir, const std::string& data_override) {
  fs::path dir(run_dir);
  ordered_json manifest = ordered_json::parse(read_text(dir / "manifest.json"));
  if (manifest.at("command").get<std::string>() != "run") {
    throw std::runtime_error("report needs a protocol-run directory");
  }
  DataOptions data;
  ProtocolParams params;
  run_from_manifest(manifest, data, params);
  if (!data_override.empty()) data.path = data_override;

  RatingMatrix raw = load_data(data);
  RatingMatrix binary = raw.levels() == 2
                            ? raw
                            : quantize_binary(raw, params.quantize_threshold);
  MaskSplit mask = read_mask_csv(dir / "masks.csv");
  std::string stored = read_text(dir / "report.json");
  EvalReport stored_report = EvalReport::from_json(stored);
  CompletedMatrix pred =
      read_predictions_csv(dir / "predictions.csv", binary.num_users(),
                           binary.num_items(), 2, params.algorithm);
  EvalReport recomputed =
      evaluate(pred, binary, mask, params, stored_report.resolved);
  write_text(dir / "report_recomputed.json", recomputed.to_json());
  bool identical = recomputed.to_json() == stored;
  std::cout << (identical ? "report reproduced bit-for-bit"
                          : "MISMATCH against the stored report")
            << '\n';
  return identical ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"similarity-based clustering and co-clustering matrix "
               "completion"};
  app.require_subcommand(1);

  std::string out_dir;

  // ingest ------------------------------------------------------------
  auto* ingest = app.add_subcommand("ingest", "load a ratings file and "
                                              "report its shape");
  DataOptions ingest_data;
  ingest->add_option("--data", ingest_data.path, "ratings file")->required();
  ingest->add_option("--format", ingest_data.format,
                     "movielens-dat or csv-triples");
  ingest->add_option("--levels", ingest_data.levels,
                     "rating levels (0 = infer)");
  ingest->add_option("--out", out_dir, "directory for normalized outputs")
      ->envname("COREC_OUT");

  // synth ---------------------------------------------------------------
  auto* synth = app.add_subcommand("synth", "generate a synthetic instance "
                                            "and its threshold report");
  SynthConfig synth_cfg;
  std::string synth_config_path;
  synth->add_option("--config", synth_config_path, "key = value config file");
  synth->add_option("--users,--U", synth_cfg.num_users);
  synth->add_option("--items,--M", synth_cfg.num_items);
  synth->add_option("--clusters,--K", synth_cfg.num_clusters);
  synth->add_option("--levels,--G", synth_cfg.levels);
  synth->add_option("--p", synth_cfg.truth_prob);
  synth->add_option("--alpha", synth_cfg.alpha);
  synth->add_option("--beta", synth_cfg.beta);
  synth->add_option("--eta", synth_cfg.eta);
  synth->add_option("--rich-users", synth_cfg.rich_users_per_cluster);
  synth->add_option("--rich-items", synth_cfg.rich_items_per_cluster);
  synth->add_option("--mu-cap", synth_cfg.mu_cap);
  synth->add_option("--seed", synth_cfg.seed);
  synth->add_option("--out", out_dir, "output directory")
      ->envname("COREC_OUT")
      ->required();

  // run -----------------------------------------------------------------
  auto* run = app.add_subcommand("run", "hide, complete and score a dataset");
  DataOptions run_data;
  ProtocolParams run_params;
  std::string manifest_path;
  std::string run_config_path;
  run->add_option("--config", run_config_path, "key = value config file");
  run->add_option("--data", run_data.path, "ratings file");
  run->add_option("--format", run_data.format,
                  "movielens-dat or csv-triples");
  run->add_option("--levels", run_data.levels, "rating levels (0 = infer)");
  run->add_option("--algo", run_params.algorithm,
                  "ucr icr cor hucr hicr hcor paf");
  run->add_option("--cluster-size-users", run_params.algo.cluster_size_users,
                  "theory-mode user cluster size (0 = estimate)");
  run->add_option("--cluster-size-items", run_params.algo.cluster_size_items,
                  "theory-mode item cluster size (0 = estimate)");
  run->add_option("--T-users", run_params.algo.set_size_users,
                  "hybrid user set size (0 = estimate)");
  run->add_option("--T-items", run_params.algo.set_size_items,
                  "hybrid item set size (0 = estimate)");
  run->add_option("--k", run_params.algo.top_k,
                  "baseline friend count (0 = estimate)");
  run->add_option("--hide", run_params.hide_fraction, "hidden fraction");
  run->add_option("--noise", run_params.noise, "train flip probability");
  run->add_option("--threshold", run_params.quantize_threshold,
                  "liked/disliked split");
  run->add_option("--seed", run_params.seed);
  run->add_option("--threads", run_params.threads);
  run->add_option("--manifest", manifest_path,
                  "replay a stored manifest (other flags ignored)");
  run->add_option("--out", out_dir, "output directory")
      ->envname("COREC_OUT")
      ->required();

  // sweep -----------------------------------------------------------------
  auto* sweep = app.add_subcommand("sweep", "recovery probability along a "
                                            "parameter grid");
  SynthConfig sweep_cfg;
  std::string sweep_param = "alpha";
  double sweep_from = 0.0, sweep_to = 0.0;
  int sweep_steps = 1, sweep_trials = 1, sweep_threads = 1;
  std::string sweep_algo = "ucr";
  std::string sweep_config_path;
  sweep->add_option("--config", sweep_config_path, "key = value config file");
  sweep->add_option("--users,--U", sweep_cfg.num_users);
  sweep->add_option("--items,--M", sweep_cfg.num_items);
  sweep->add_option("--clusters,--K", sweep_cfg.num_clusters);
  sweep->add_option("--levels,--G", sweep_cfg.levels);
  sweep->add_option("--p", sweep_cfg.truth_prob);
  sweep->add_option("--alpha", sweep_cfg.alpha);
  sweep->add_option("--beta", sweep_cfg.beta);
  sweep->add_option("--eta", sweep_cfg.eta);
  sweep->add_option("--rich-users", sweep_cfg.rich_users_per_cluster);
  sweep->add_option("--rich-items", sweep_cfg.rich_items_per_cluster);
  sweep->add_option("--mu-cap", sweep_cfg.mu_cap);
  sweep->add_option("--seed", sweep_cfg.seed);
  sweep->add_option("--param", sweep_param, "alpha, beta or p")->required();
  sweep->add_option("--from", sweep_from)->required();
  sweep->add_option("--to", sweep_to)->required();
  sweep->add_option("--steps", sweep_steps)->required();
  sweep->add_option("--trials", sweep_trials)->required();
  sweep->add_option("--algo", sweep_algo);
  sweep->add_option("--threads", sweep_threads);
  sweep->add_option("--out", out_dir, "output directory")
      ->envname("COREC_OUT")
      ->required();

  // report ----------------------------------------------------------------
  auto* report = app.add_subcommand("report", "recompute metrics from stored "
                                              "predictions");
  std::string report_dir, report_data;
  report->add_option("--run-dir", report_dir, "directory of a previous run")
      ->required();
  report->add_option("--data", report_data,
                     "override the dataset path in the manifest");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(ingest)) {
      return command_ingest(ingest_data, out_dir);
    }
    if (app.got_subcommand(synth)) {
      if (!synth_config_path.empty()) {
        overlay_synth_config(synth, synth_config_path, synth_cfg);
      }
      synth_cfg.validate();
      return command_synth(synth_cfg, out_dir);
    }
    if (app.got_subcommand(run)) {
      if (!manifest_path.empty()) {
        ordered_json manifest = ordered_json::parse(read_text(manifest_path));
        run_from_manifest(manifest, run_data, run_params);
      } else {
        if (!run_config_path.empty()) {
          overlay_run_config(run, run_config_path, run_data, run_params);
        }
        if (run_data.path.empty()) {
          std::cerr << "error: run needs --data, --config or --manifest\n";
          return 2;
        }
      }
      return command_run(run_data, run_params, out_dir);
    }
    if (app.got_subcommand(sweep)) {
      if (!sweep_config_path.empty()) {
        overlay_synth_config(sweep, sweep_config_path, sweep_cfg);
      }
      return command_sweep(sweep_cfg, sweep_param, sweep_from, sweep_to,
                           sweep_steps, sweep_trials, sweep_algo,
                           sweep_threads, out_dir);
    }
    if (app.got_subcommand(report)) {
      return command_report(report_dir, report_data);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
