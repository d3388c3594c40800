// Command-line front end wiring the whole pipeline: collection, pair
// building, training, evaluation, correlation, and guided inference.
// Exit codes: 0 ok, 2 bad config, 3 missing/invalid inputs, 4 judge failure.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "prm/collect.hpp"
#include "prm/common.hpp"
#include "prm/evalbench.hpp"
#include "prm/guide.hpp"
#include "prm/judge_http.hpp"
#include "prm/mctsp.hpp"
#include "prm/pairs.hpp"
#include "prm/taskenv.hpp"
#include "prm/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

struct ConfigDoc {
  json root = json::object();
};

const std::map<std::string, std::set<std::string>>& known_config_keys() {
  static const std::map<std::string, std::set<std::string>> keys = {
      {"collect", {"envs", "iterations", "rollouts", "c", "seed", "judge", "out"}},
      {"pairs", {"dataset", "types", "weights", "margin", "seed", "out"}},
      {"train", {"pairs", "dataset", "dim", "hidden", "epochs", "lr", "lambda", "seed", "out"}},
      {"eval", {"pairs", "model", "scorer", "out"}},
      {"correlate", {"dataset", "out"}},
      {"guide", {"envs", "model", "mode", "n", "mask", "epsilon", "episodes", "seed", "out"}},
  };
  return keys;
}

ConfigDoc load_config(const std::string& path) {
  ConfigDoc doc;
  if (path.empty()) return doc;
  if (!fs::exists(path)) throw prm::ConfigError("config file not found: " + path);
  try {
    doc.root = json::parse(prm::read_text_file(path));
  } catch (const json::exception& e) {
    throw prm::ConfigError(path + ": " + e.what());
  }
  if (!doc.root.is_object()) throw prm::ConfigError(path + ": config must be a JSON object");
  const auto& known = known_config_keys();
  for (const auto& [key, value] : doc.root.items()) {
    if (key == "workers" || key == "judge_endpoint") continue;
    auto it = known.find(key);
    if (it == known.end()) throw prm::ConfigError("unknown config key '" + key + "'");
    if (!value.is_object()) throw prm::ConfigError("config section '" + key + "' must be an object");
    for (const auto& [sub, subval] : value.items()) {
      (void)subval;
      if (!it->second.count(sub)) {
        throw prm::ConfigError("unknown config key '" + key + "." + sub + "'");
      }
    }
  }
  return doc;
}

json config_section(const ConfigDoc& doc, const std::string& name) {
  return doc.root.value(name, json::object());
}

/// Fills `var` from the config section when the flag was not passed.
template <typename T>
void apply_config(const json& section, const std::string& key, const CLI::Option* opt, T& var) {
  if (opt != nullptr && opt->count() > 0) return;  // flags win
  if (!section.contains(key)) return;
  try {
    var = section.at(key).get<T>();
  } catch (const json::exception&) {
    throw prm::ConfigError("config key '" + key + "' has the wrong type");
  }
}

std::string resolve_endpoint(const ConfigDoc& doc) {
  if (doc.root.contains("judge_endpoint")) {
    try {
      return doc.root.at("judge_endpoint").get<std::string>();
    } catch (const json::exception&) {
      throw prm::ConfigError("config key 'judge_endpoint' must be a string");
    }
  }
  const char* env = std::getenv("PRM_JUDGE_ENDPOINT");
  if (env != nullptr && *env != '\0') return env;
  throw prm::ConfigError(
      "judge endpoint not configured; set PRM_JUDGE_ENDPOINT or the judge_endpoint config key");
}

unsigned resolve_workers(const ConfigDoc& doc, const CLI::Option* opt, unsigned flag_value) {
  unsigned workers = flag_value;
  if ((opt == nullptr || opt->count() == 0) && doc.root.contains("workers")) {
    try {
      workers = doc.root.at("workers").get<unsigned>();
    } catch (const json::exception&) {
      throw prm::ConfigError("config key 'workers' must be a non-negative integer");
    }
  }
  return workers == 0 ? prm::default_workers() : workers;
}

std::vector<std::string> split_list(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

std::set<prm::pairs::EvalType> parse_types(const std::string& list) {
  std::set<prm::pairs::EvalType> out;
  for (const auto& name : split_list(list, ',')) {
    if (name.empty()) throw prm::ConfigError("empty entry in types list '" + list + "'");
    out.insert(prm::pairs::type_from_name(name));
  }
  return out;
}

prm::pairs::DimensionWeights parse_weights(const std::string& list) {
  auto parts = split_list(list, ',');
  if (parts.size() != 5) {
    throw prm::ConfigError("weights must be five comma-separated numbers, got '" + list + "'");
  }
  double w[5];
  for (int i = 0; i < 5; ++i) {
    try {
      std::size_t used = 0;
      w[i] = std::stod(parts[i], &used);
      if (used != parts[i].size()) throw std::invalid_argument(parts[i]);
    } catch (const std::exception&) {
      throw prm::ConfigError("invalid weight '" + parts[i] + "'");
    }
  }
  prm::pairs::DimensionWeights out{w[0], w[1], w[2], w[3], w[4]};
  out.check();
  return out;
}

std::vector<int> parse_int_list(const std::string& list, const std::string& what) {
  std::vector<int> out;
  for (const auto& part : split_list(list, ',')) {
    try {
      std::size_t used = 0;
      int v = std::stoi(part, &used);
      if (used != part.size() || v < 1) throw std::invalid_argument(part);
      out.push_back(v);
    } catch (const std::exception&) {
      throw prm::ConfigError("invalid " + what + " entry '" + part + "'");
    }
  }
  return out;
}

std::vector<prm::guide::DimMask> parse_masks(const std::string& list) {
  std::vector<prm::guide::DimMask> out;
  for (const auto& part : split_list(list, ',')) {
    out.push_back(prm::guide::mask_from_names(split_list(part, '+')));
  }
  return out;
}

ordered_json run_manifest(const std::string& command, std::uint64_t seed,
                          const ordered_json& config,
                          const std::vector<std::pair<std::string, std::string>>& inputs) {
  ordered_json m;
  m["command"] = command;
  m["version"] = prm::kVersion;
  m["seed"] = seed;
  m["config"] = config;
  ordered_json in = ordered_json::object();
  for (const auto& [path, digest] : inputs) in[path] = digest;
  m["inputs"] = std::move(in);
  return m;
}

std::vector<std::pair<std::string, std::string>> dataset_digests(const fs::path& dir) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const char* name : {"trajectories.jsonl", "siblings.jsonl"}) {
    fs::path p = dir / name;
    if (fs::exists(p)) out.emplace_back(p.string(), prm::file_digest(p));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

struct CollectArgs {
  std::string envs, judge = "rule", out;
  int iterations = 200, rollouts = 8;
  double c = 1.4;
  std::uint64_t seed = 0;
};

int cmd_collect(const CollectArgs& a, const ConfigDoc& doc, unsigned workers) {
  auto envs = prm::taskenv::load_directory(a.envs);
  prm::mctsp::SearchBudget budget;
  budget.iterations = a.iterations;
  budget.rollouts_per_expansion = a.rollouts;
  budget.exploration_c = a.c;
  budget.rng_seed = a.seed;

  prm::collect::JudgeFactory factory;
  if (a.judge == "rule") {
    factory = prm::collect::rule_judge_factory();
  } else if (a.judge == "remote") {
    prm::judge::EndpointConfig ep;
    ep.endpoint = resolve_endpoint(doc);
    factory = [ep](const prm::taskenv::TaskGraph&) -> std::unique_ptr<prm::judge::StepJudge> {
      return prm::judge::make_remote_judge(ep);
    };
  } else {
    throw prm::ConfigError("judge must be 'rule' or 'remote', got '" + a.judge + "'");
  }

  prm::collect::run_collection(envs, budget, factory, a.judge, a.out, workers);

  ordered_json cfg{{"envs", a.envs},       {"iterations", a.iterations}, {"rollouts", a.rollouts},
                   {"c", a.c},             {"seed", a.seed},             {"judge", a.judge},
                   {"out", a.out},         {"workers", workers}};
  std::vector<std::pair<std::string, std::string>> inputs;
  for (const auto& env : envs) {
    fs::path p = fs::path(a.envs) / (env.id + ".json");
    inputs.emplace_back(p.string(), prm::file_digest(p));
  }
  prm::write_text_file(fs::path(a.out) / "run_manifest.json",
                       run_manifest("collect", a.seed, cfg, inputs).dump(2) + "\n");
  return 0;
}

struct PairsArgs {
  std::string dataset, types = "H,OS,E,TR,C,Tot,Traj", weights = "1,1,1,1,1", out;
  double margin = 0.05;
  std::uint64_t seed = 0;
};

int cmd_pairs(const PairsArgs& a) {
  auto ds = prm::collect::load_dataset(a.dataset);
  auto types = parse_types(a.types);
  auto weights = parse_weights(a.weights);
  auto ps = prm::pairs::build_pairs(ds, types, weights, a.margin, a.seed);
  prm::pairs::write_pairs(ps, a.out);

  ordered_json cfg{{"dataset", a.dataset}, {"types", a.types}, {"weights", a.weights},
                   {"margin", a.margin},   {"seed", a.seed},   {"out", a.out}};
  prm::write_text_file(a.out + ".run.json",
                       run_manifest("pairs", a.seed, cfg, dataset_digests(a.dataset)).dump(2) + "\n");
  return 0;
}

struct TrainArgs {
  std::string pairs, dataset, out;
  int dim = 256, hidden = 32, epochs = 500;
  double lr = 0.1, lambda = 1e-6;
  std::uint64_t seed = 0;
};

int cmd_train(const TrainArgs& a) {
  if (a.dim < 1) throw prm::ConfigError("dim must be >= 1");
  if (a.hidden < 1) throw prm::ConfigError("hidden must be >= 1");
  auto ds = prm::collect::load_dataset(a.dataset);
  auto ps = prm::pairs::load_pairs(a.pairs);

  prm::trainer::FeatureExtractor fe;
  fe.d = static_cast<std::size_t>(a.dim);

  auto examples = prm::trainer::build_regression_examples(ds);
  auto stage1 = prm::trainer::fit_regression(examples, fe, a.lambda);

  prm::trainer::RewardModelParams params;
  params.extractor = fe;
  params.head = stage1.head;
  params.gate = prm::trainer::make_gating(fe.d, static_cast<std::size_t>(a.hidden), a.seed);

  auto bt = prm::trainer::build_bt_examples(ps);
  if (bt.empty()) throw prm::InputError("no step-level pairs to train the gating network");
  auto stage2 = prm::trainer::fit_gating(params, bt, a.epochs, a.lr, a.seed);
  params.gate = stage2.gate;

  ordered_json cfg{{"pairs", a.pairs},   {"dataset", a.dataset}, {"dim", a.dim},
                   {"hidden", a.hidden}, {"epochs", a.epochs},   {"lr", a.lr},
                   {"lambda", a.lambda}, {"seed", a.seed},       {"out", a.out}};
  auto inputs = dataset_digests(a.dataset);
  inputs.emplace_back(a.pairs, prm::file_digest(a.pairs));
  ordered_json manifest = run_manifest("train", a.seed, cfg, inputs);
  manifest["n_regression_examples"] = examples.size();
  manifest["n_bt_pairs"] = bt.size();
  manifest["regression_loss"] = stage1.loss;
  manifest["bt_loss_initial"] = stage2.loss_trace.empty() ? 0.0 : stage2.loss_trace.front();
  manifest["bt_loss_final"] = stage2.final_loss;
  char sum[24];
  std::snprintf(sum, sizeof(sum), "%016llx",
                static_cast<unsigned long long>(prm::trainer::extractor_checksum(params.extractor)));
  manifest["extractor_checksum"] = sum;
  std::snprintf(sum, sizeof(sum), "%016llx",
                static_cast<unsigned long long>(prm::trainer::head_checksum(params.head)));
  manifest["head_checksum"] = sum;
  params.manifest = manifest;

  prm::trainer::save_model(params, a.out);
  return 0;
}

struct EvalArgs {
  std::string pairs, model, scorer = "trained", out;
};

int cmd_eval(const EvalArgs& a, const ConfigDoc& doc, unsigned workers) {
  auto ps = prm::pairs::load_pairs(a.pairs);

  std::unique_ptr<prm::evalbench::RewardScorer> scorer;
  if (a.scorer == "trained") {
    if (a.model.empty()) throw prm::ConfigError("--model is required for the trained scorer");
    scorer = std::make_unique<prm::evalbench::TrainedScorer>(prm::trainer::load_model(a.model));
  } else if (a.scorer == "oracle") {
    scorer = std::make_unique<prm::evalbench::OracleScorer>(ps.weights);
  } else if (a.scorer == "random") {
    scorer = std::make_unique<prm::evalbench::UniformRandomScorer>(ps.seed);
  } else if (a.scorer == "judge") {
    prm::judge::EndpointConfig ep;
    ep.endpoint = resolve_endpoint(doc);
    scorer = std::make_unique<prm::evalbench::BaselineJudgeScorer>(
        std::shared_ptr<prm::judge::RemoteJudge>(prm::judge::make_remote_judge(ep)));
  } else {
    throw prm::ConfigError("scorer must be one of trained|oracle|random|judge, got '" + a.scorer + "'");
  }

  auto report = prm::evalbench::evaluate(*scorer, ps, workers);
  prm::write_text_file(fs::path(a.out) / "report.md", prm::evalbench::render_markdown({report}));
  prm::write_text_file(fs::path(a.out) / "report.csv", prm::evalbench::render_csv({report}));

  ordered_json cfg{{"pairs", a.pairs}, {"model", a.model}, {"scorer", a.scorer}, {"out", a.out}};
  std::vector<std::pair<std::string, std::string>> inputs{{a.pairs, prm::file_digest(a.pairs)}};
  if (!a.model.empty()) inputs.emplace_back(a.model, prm::file_digest(a.model));
  prm::write_text_file(fs::path(a.out) / "manifest.json",
                       run_manifest("eval", ps.seed, cfg, inputs).dump(2) + "\n");
  return 0;
}

struct CorrelateArgs {
  std::string dataset, out;
};

int cmd_correlate(const CorrelateArgs& a) {
  auto ds = prm::collect::load_dataset(a.dataset);
  auto m = prm::evalbench::correlation_matrix(ds);
  prm::write_text_file(a.out, prm::evalbench::correlation_csv(m));

  ordered_json cfg{{"dataset", a.dataset}, {"out", a.out}};
  ordered_json manifest = run_manifest("correlate", 0, cfg, dataset_digests(a.dataset));
  manifest["n_steps"] = m.n;
  prm::write_text_file(a.out + ".run.json", manifest.dump(2) + "\n");
  return 0;
}

struct GuideArgs {
  std::string envs, model, mode = "rerank", n = "1,2,4,8", mask;
  double epsilon = 0.5;
  int episodes = 100;
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_guide(const GuideArgs& a, unsigned workers) {
  auto envs = prm::taskenv::load_directory(a.envs);

  std::unique_ptr<prm::guide::ActionScorer> scorer;
  if (a.model.empty()) {
    scorer = std::make_unique<prm::guide::OracleActionScorer>();
  } else {
    scorer = std::make_unique<prm::guide::TrainedActionScorer>(prm::trainer::load_model(a.model));
  }

  prm::guide::AgentPolicy policy;
  policy.kind = prm::guide::PolicyKind::EpsOracle;
  policy.epsilon = a.epsilon;

  prm::guide::GuidanceConfig cfg;
  if (a.mode == "rerank") {
    cfg.mode = prm::guide::GuideMode::Rerank;
  } else if (a.mode == "mcts") {
    cfg.mode = prm::guide::GuideMode::RmMcts;
  } else {
    throw prm::ConfigError("mode must be 'rerank' or 'mcts', got '" + a.mode + "'");
  }
  cfg.episodes = a.episodes;
  cfg.seed = a.seed;

  auto n_values = parse_int_list(a.n, "n");
  if (n_values.empty()) throw prm::ConfigError("n list must be non-empty");
  auto points = prm::guide::scaling_sweep(envs, policy, *scorer, cfg, n_values, workers);
  prm::write_text_file(fs::path(a.out) / "scaling.csv", prm::guide::scaling_csv(points));

  if (!a.mask.empty()) {
    auto masks = parse_masks(a.mask);
    cfg.n_candidates = *std::max_element(n_values.begin(), n_values.end());
    auto rows = prm::guide::ablation_sweep(envs, policy, *scorer, cfg, masks, workers);
    prm::write_text_file(fs::path(a.out) / "ablation.csv", prm::guide::ablation_csv(rows));
  }

  ordered_json cfgj{{"envs", a.envs},       {"model", a.model},       {"mode", a.mode},
                    {"n", a.n},             {"mask", a.mask},         {"epsilon", a.epsilon},
                    {"episodes", a.episodes}, {"seed", a.seed},       {"out", a.out},
                    {"workers", workers},   {"scorer", scorer->name()}};
  std::vector<std::pair<std::string, std::string>> inputs;
  for (const auto& env : envs) {
    fs::path p = fs::path(a.envs) / (env.id + ".json");
    inputs.emplace_back(p.string(), prm::file_digest(p));
  }
  if (!a.model.empty()) inputs.emplace_back(a.model, prm::file_digest(a.model));
  prm::write_text_file(fs::path(a.out) / "manifest.json",
                       run_manifest("guide", a.seed, cfgj, inputs).dump(2) + "\n");
  return 0;
}

std::string one_line(std::string msg) {
  for (char& ch : msg) {
    if (ch == '\n' || ch == '\r') ch = ' ';
  }
  return msg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"step-wise process reward pipeline for task-graph agents"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  unsigned workers_flag = 0;
  app.add_option("--config", config_path, "JSON config file; flags override its values");
  auto* workers_opt =
      app.add_option("--workers", workers_flag, "worker threads (0 = hardware default)");

  CollectArgs ca;
  auto* collect = app.add_subcommand("collect", "run search + annotation over environments");
  auto* ca_envs = collect->add_option("--envs", ca.envs, "environment directory");
  auto* ca_iter = collect->add_option("--iterations", ca.iterations);
  auto* ca_roll = collect->add_option("--rollouts", ca.rollouts);
  auto* ca_c = collect->add_option("--c", ca.c);
  auto* ca_seed = collect->add_option("--seed", ca.seed);
  auto* ca_judge = collect->add_option("--judge", ca.judge)->check(CLI::IsMember({"rule", "remote"}));
  auto* ca_out = collect->add_option("--out", ca.out, "dataset output directory");

  PairsArgs pa;
  auto* pairs = app.add_subcommand("pairs", "build preference pairs from a dataset");
  auto* pa_ds = pairs->add_option("--dataset", pa.dataset);
  auto* pa_types = pairs->add_option("--types", pa.types);
  auto* pa_w = pairs->add_option("--weights", pa.weights);
  auto* pa_margin = pairs->add_option("--margin", pa.margin);
  auto* pa_seed = pairs->add_option("--seed", pa.seed);
  auto* pa_out = pairs->add_option("--out", pa.out, "output JSONL file");

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "fit the two-stage reward model");
  auto* ta_pairs = train->add_option("--pairs", ta.pairs);
  auto* ta_ds = train->add_option("--dataset", ta.dataset);
  auto* ta_dim = train->add_option("--dim", ta.dim);
  auto* ta_hidden = train->add_option("--hidden", ta.hidden);
  auto* ta_epochs = train->add_option("--epochs", ta.epochs);
  auto* ta_lr = train->add_option("--lr", ta.lr);
  auto* ta_lambda = train->add_option("--lambda", ta.lambda);
  auto* ta_seed = train->add_option("--seed", ta.seed);
  auto* ta_out = train->add_option("--out", ta.out, "model file");

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "pairwise accuracy of a scorer on a pair set");
  auto* ea_pairs = eval->add_option("--pairs", ea.pairs);
  auto* ea_model = eval->add_option("--model", ea.model);
  auto* ea_scorer =
      eval->add_option("--scorer", ea.scorer)->check(CLI::IsMember({"trained", "oracle", "random", "judge"}));
  auto* ea_out = eval->add_option("--out", ea.out, "report output directory");

  CorrelateArgs ra;
  auto* correlate = app.add_subcommand("correlate", "dimension correlation study over a dataset");
  auto* ra_ds = correlate->add_option("--dataset", ra.dataset);
  auto* ra_out = correlate->add_option("--out", ra.out, "correlation CSV file");

  GuideArgs ga;
  auto* gd = app.add_subcommand("guide", "reward-guided inference sweeps");
  auto* ga_envs = gd->add_option("--envs", ga.envs);
  auto* ga_model = gd->add_option("--model", ga.model);
  auto* ga_mode = gd->add_option("--mode", ga.mode)->check(CLI::IsMember({"rerank", "mcts"}));
  auto* ga_n = gd->add_option("--n", ga.n);
  auto* ga_mask = gd->add_option("--mask", ga.mask);
  auto* ga_eps = gd->add_option("--epsilon", ga.epsilon);
  auto* ga_episodes = gd->add_option("--episodes", ga.episodes);
  auto* ga_seed = gd->add_option("--seed", ga.seed);
  auto* ga_out = gd->add_option("--out", ga.out, "sweep output directory");

  try {
    try {
      app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
      return app.exit(e);
    } catch (const CLI::ParseError& e) {
      throw prm::ConfigError(e.what());
    }

    ConfigDoc doc = load_config(config_path);
    unsigned workers = resolve_workers(doc, workers_opt, workers_flag);

    if (collect->parsed()) {
      json sec = config_section(doc, "collect");
      apply_config(sec, "envs", ca_envs, ca.envs);
      apply_config(sec, "iterations", ca_iter, ca.iterations);
      apply_config(sec, "rollouts", ca_roll, ca.rollouts);
      apply_config(sec, "c", ca_c, ca.c);
      apply_config(sec, "seed", ca_seed, ca.seed);
      apply_config(sec, "judge", ca_judge, ca.judge);
      apply_config(sec, "out", ca_out, ca.out);
      if (ca.envs.empty()) throw prm::ConfigError("collect: --envs is required");
      if (ca.out.empty()) throw prm::ConfigError("collect: --out is required");
      return cmd_collect(ca, doc, workers);
    }
    if (pairs->parsed()) {
      json sec = config_section(doc, "pairs");
      apply_config(sec, "dataset", pa_ds, pa.dataset);
      apply_config(sec, "types", pa_types, pa.types);
      apply_config(sec, "weights", pa_w, pa.weights);
      apply_config(sec, "margin", pa_margin, pa.margin);
      apply_config(sec, "seed", pa_seed, pa.seed);
      apply_config(sec, "out", pa_out, pa.out);
      if (pa.dataset.empty()) throw prm::ConfigError("pairs: --dataset is required");
      if (pa.out.empty()) throw prm::ConfigError("pairs: --out is required");
      return cmd_pairs(pa);
    }
    if (train->parsed()) {
      json sec = config_section(doc, "train");
      apply_config(sec, "pairs", ta_pairs, ta.pairs);
      apply_config(sec, "dataset", ta_ds, ta.dataset);
      apply_config(sec, "dim", ta_dim, ta.dim);
      apply_config(sec, "hidden", ta_hidden, ta.hidden);
      apply_config(sec, "epochs", ta_epochs, ta.epochs);
      apply_config(sec, "lr", ta_lr, ta.lr);
      apply_config(sec, "lambda", ta_lambda, ta.lambda);
      apply_config(sec, "seed", ta_seed, ta.seed);
      apply_config(sec, "out", ta_out, ta.out);
      if (ta.pairs.empty()) throw prm::ConfigError("train: --pairs is required");
      if (ta.dataset.empty()) throw prm::ConfigError("train: --dataset is required");
      if (ta.out.empty()) throw prm::ConfigError("train: --out is required");
      return cmd_train(ta);
    }
    if (eval->parsed()) {
      json sec = config_section(doc, "eval");
      apply_config(sec, "pairs", ea_pairs, ea.pairs);
      apply_config(sec, "model", ea_model, ea.model);
      apply_config(sec, "scorer", ea_scorer, ea.scorer);
      apply_config(sec, "out", ea_out, ea.out);
      if (ea.pairs.empty()) throw prm::ConfigError("eval: --pairs is required");
      if (ea.out.empty()) throw prm::ConfigError("eval: --out is required");
      return cmd_eval(ea, doc, workers);
    }
    if (correlate->parsed()) {
      json sec = config_section(doc, "correlate");
      apply_config(sec, "dataset", ra_ds, ra.dataset);
      apply_config(sec, "out", ra_out, ra.out);
      if (ra.dataset.empty()) throw prm::ConfigError("correlate: --dataset is required");
      if (ra.out.empty()) throw prm::ConfigError("correlate: --out is required");
      return cmd_correlate(ra);
    }
    if (gd->parsed()) {
      json sec = config_section(doc, "guide");
      apply_config(sec, "envs", ga_envs, ga.envs);
      apply_config(sec, "model", ga_model, ga.model);
      apply_config(sec, "mode", ga_mode, ga.mode);
      apply_config(sec, "n", ga_n, ga.n);
      apply_config(sec, "mask", ga_mask, ga.mask);
      apply_config(sec, "epsilon", ga_eps, ga.epsilon);
      apply_config(sec, "episodes", ga_episodes, ga.episodes);
      apply_config(sec, "seed", ga_seed, ga.seed);
      apply_config(sec, "out", ga_out, ga.out);
      if (ga.envs.empty()) throw prm::ConfigError("guide: --envs is required");
      if (ga.out.empty()) throw prm::ConfigError("guide: --out is required");
      return cmd_guide(ga, workers);
    }
    throw prm::ConfigError("no subcommand given");
  } catch (const prm::ConfigError& e) {
    std::cerr << "error: " << one_line(e.what()) << "\n";
    return 2;
  } catch (const prm::InputError& e) {
    std::cerr << "error: " << one_line(e.what()) << "\n";
    return 3;
  } catch (const prm::JudgeError& e) {
    std::cerr << "error: " << one_line(e.what()) << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << one_line(e.what()) << "\n";
    return 1;
  }
}
