#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "prm/common.hpp"
#include "prm/dims.hpp"
#include "prm/judge.hpp"
#include "prm/mctsp.hpp"
#include "prm/taskenv.hpp"

namespace prm::collect {

/// One scored step of an agent trajectory, with its scored sibling actions
/// (the other children expanded at the same tree node).
struct AnnotatedStep {
  std::string env_id;
  std::string instruction;
  std::string observation;
  int step_idx = 0;  // 1-based
  taskenv::ActionRecord action;
  std::vector<std::pair<taskenv::ActionRecord, dims::StepScores>> siblings;
  dims::StepScores scores;
  int m_eff = 0;
  int rollout_n = 0;
  std::vector<std::string> trajectory;  // action texts of steps 1..step_idx-1
};

struct AnnotatedTrajectory {
  std::string env_id;
  std::string instruction;
  std::vector<AnnotatedStep> steps;
  bool verified_success = false;
  int total_steps = 0;
};

struct AnnotateOutput {
  std::vector<AnnotatedTrajectory> trajectories;
  std::vector<AnnotatedStep> pruned_steps;  // steps on no successful path
  int n_pruned_paths = 0;
};

// ---------------------------------------------------------------------------
// JSON wire forms
// ---------------------------------------------------------------------------

namespace detail {

inline nlohmann::ordered_json action_to_json(const taskenv::ActionRecord& a) {
  return {{"id", a.id}, {"text", a.text}, {"tags", std::vector<std::string>(a.tags.begin(), a.tags.end())}};
}

inline taskenv::ActionRecord action_from_json(const nlohmann::json& j) {
  taskenv::ActionRecord a;
  a.id = j.at("id").get<std::string>();
  a.text = j.at("text").get<std::string>();
  for (const auto& t : j.at("tags")) a.tags.insert(t.get<std::string>());
  return a;
}

inline nlohmann::ordered_json scores_to_json(const dims::StepScores& s) {
  return {{"h", s.h}, {"os", s.os}, {"e", s.e}, {"tr", s.tr}, {"c", s.c}};
}

inline dims::StepScores scores_from_json(const nlohmann::json& j) {
  dims::StepScores s;
  s.h = j.at("h").get<double>();
  s.os = j.at("os").get<double>();
  s.e = j.at("e").get<double>();
  s.tr = j.at("tr").get<int>();
  s.c = j.at("c").get<int>();
  if (!s.valid()) throw InputError("step record carries invalid scores");
  return s;
}

}  // namespace detail

inline nlohmann::ordered_json step_to_json(const AnnotatedStep& st) {
  nlohmann::ordered_json j;
  j["env_id"] = st.env_id;
  j["instruction"] = st.instruction;
  j["observation"] = st.observation;
  j["step_idx"] = st.step_idx;
  j["action"] = detail::action_to_json(st.action);
  j["trajectory"] = st.trajectory;
  j["scores"] = detail::scores_to_json(st.scores);
  nlohmann::ordered_json sibs = nlohmann::ordered_json::array();
  for (const auto& [a, s] : st.siblings) {
    sibs.push_back({{"action", detail::action_to_json(a)}, {"scores", detail::scores_to_json(s)}});
  }
  j["siblings"] = std::move(sibs);
  j["m_eff"] = st.m_eff;
  j["n"] = st.rollout_n;
  return j;
}

inline AnnotatedStep step_from_json(const nlohmann::json& j) {
  AnnotatedStep st;
  st.env_id = j.at("env_id").get<std::string>();
  st.instruction = j.at("instruction").get<std::string>();
  st.observation = j.at("observation").get<std::string>();
  st.step_idx = j.at("step_idx").get<int>();
  st.action = detail::action_from_json(j.at("action"));
  st.trajectory = j.at("trajectory").get<std::vector<std::string>>();
  st.scores = detail::scores_from_json(j.at("scores"));
  for (const auto& sj : j.at("siblings")) {
    st.siblings.emplace_back(detail::action_from_json(sj.at("action")),
                             detail::scores_from_json(sj.at("scores")));
  }
  st.m_eff = j.at("m_eff").get<int>();
  st.rollout_n = j.at("n").get<int>();
  return st;
}

inline nlohmann::ordered_json trajectory_to_json(const AnnotatedTrajectory& t) {
  nlohmann::ordered_json j;
  j["env_id"] = t.env_id;
  j["instruction"] = t.instruction;
  nlohmann::ordered_json steps = nlohmann::ordered_json::array();
  for (const auto& st : t.steps) steps.push_back(step_to_json(st));
  j["steps"] = std::move(steps);
  j["verified_success"] = t.verified_success;
  j["total_steps"] = t.total_steps;
  return j;
}

inline AnnotatedTrajectory trajectory_from_json(const nlohmann::json& j) {
  AnnotatedTrajectory t;
  t.env_id = j.at("env_id").get<std::string>();
  t.instruction = j.at("instruction").get<std::string>();
  for (const auto& sj : j.at("steps")) t.steps.push_back(step_from_json(sj));
  t.verified_success = j.at("verified_success").get<bool>();
  t.total_steps = j.at("total_steps").get<int>();
  if (t.total_steps != static_cast<int>(t.steps.size())) {
    throw InputError("trajectory record: total_steps does not match steps");
  }
  return t;
}

// ---------------------------------------------------------------------------
// Annotation
// ---------------------------------------------------------------------------

namespace detail {

inline AnnotatedStep make_step(const mctsp::SearchResult& res, const taskenv::TaskGraph& env,
                               const mctsp::SearchNode& node) {
  const mctsp::SearchNode& parent = *node.parent;
  AnnotatedStep st;
  st.env_id = env.id;
  st.instruction = env.instruction;
  st.observation = taskenv::render_observation(env, parent.state);
  st.step_idx = node.depth;
  st.action = *node.action;
  st.scores = node.scores;
  st.m_eff = node.depth + env.min_steps_capped(node.state);
  st.rollout_n = res.budget.rollouts_per_expansion;
  st.trajectory = mctsp::detail::trajectory_texts(parent);
  for (const auto& sib : parent.children) {
    if (sib.get() == &node) continue;
    st.siblings.emplace_back(*sib->action, sib->scores);
  }
  return st;
}

}  // namespace detail

/**
 * Turns a finished search tree into the final dataset pieces: every
 * root-to-leaf path ending in a verified goal state becomes one trajectory;
 * all other paths are pruned, but their scored steps are kept as negatives
 * for preference-pair construction.
 */
inline AnnotateOutput annotate_tree(const mctsp::SearchResult& res, const taskenv::TaskGraph& env) {
  if (res.env_id != env.id) {
    throw InputError("annotate_tree: tree belongs to '" + res.env_id + "', not '" + env.id + "'");
  }
  if (!res.root || res.root->state != env.initial) {
    throw InputError("annotate_tree: tree root does not match environment initial state");
  }

  AnnotateOutput out;
  std::set<const mctsp::SearchNode*> on_success_path;

  // Preorder pass 1: find verified success leaves, mark their ancestry.
  std::function<void(const mctsp::SearchNode&)> mark = [&](const mctsp::SearchNode& node) {
    if (node.children.empty()) {
      AnnotatedTrajectory traj;
      bool verified = false;
      if (env.is_goal(node.state)) {
        traj.env_id = env.id;
        traj.instruction = env.instruction;
        for (const mctsp::SearchNode* cur = &node; cur->parent != nullptr; cur = cur->parent) {
          traj.steps.push_back(detail::make_step(res, env, *cur));
        }
        std::reverse(traj.steps.begin(), traj.steps.end());
        traj.total_steps = static_cast<int>(traj.steps.size());
        // Verification: replay the actions and confirm goal within horizon.
        taskenv::EpisodeState ep = taskenv::initial_episode(env);
        for (const auto& st : traj.steps) ep = taskenv::step(env, ep, st.action.id);
        verified = taskenv::is_success(env, ep) && ep.steps_taken <= env.horizon;
      }
      if (verified) {
        traj.verified_success = true;
        for (const mctsp::SearchNode* cur = &node; cur->parent != nullptr; cur = cur->parent) {
          on_success_path.insert(cur);
        }
        out.trajectories.push_back(std::move(traj));
      } else {
        out.n_pruned_paths += 1;
      }
    }
    for (const auto& child : node.children) mark(*child);
  };
  mark(*res.root);

  // Preorder pass 2: every scored node absent from all success paths is a
  // pruned step record.
  std::function<void(const mctsp::SearchNode&)> sweep = [&](const mctsp::SearchNode& node) {
    if (node.parent != nullptr && !on_success_path.count(&node)) {
      out.pruned_steps.push_back(detail::make_step(res, env, node));
    }
    for (const auto& child : node.children) sweep(*child);
  };
  sweep(*res.root);
  return out;
}

// ---------------------------------------------------------------------------
// Dataset directory
// ---------------------------------------------------------------------------

struct Dataset {
  std::filesystem::path dir;
  std::vector<AnnotatedTrajectory> trajectories;
  std::vector<AnnotatedStep> pruned_steps;
  nlohmann::json manifest;

  /// Canonical step order: trajectory steps first (file order), then pruned.
  std::vector<const AnnotatedStep*> all_steps() const {
    std::vector<const AnnotatedStep*> out;
    for (const auto& t : trajectories) {
      for (const auto& st : t.steps) out.push_back(&st);
    }
    for (const auto& st : pruned_steps) out.push_back(&st);
    return out;
  }

  std::vector<std::string> env_ids() const {
    std::set<std::string> ids;
    for (const auto& t : trajectories) ids.insert(t.env_id);
    for (const auto& st : pruned_steps) ids.insert(st.env_id);
    return {ids.begin(), ids.end()};
  }
};

using JudgeFactory = std::function<std::unique_ptr<judge::StepJudge>(const taskenv::TaskGraph&)>;

inline JudgeFactory rule_judge_factory() {
  return [](const taskenv::TaskGraph& env) {
    return std::make_unique<judge::RuleJudge>(env.instruction_tags);
  };
}

/**
 * Runs search + annotation for every environment (environments in parallel,
 * one tree per worker) and writes the dataset directory:
 * trajectories.jsonl, siblings.jsonl, trees/<env>.json, manifest.json.
 * Per-environment failures are recorded in the manifest without aborting
 * the other environments.
 */
inline Dataset run_collection(const std::vector<taskenv::TaskGraph>& envs,
                              const mctsp::SearchBudget& budget,
                              const JudgeFactory& judge_factory,
                              const std::string& judge_name,
                              const std::filesystem::path& out_dir,
                              unsigned workers = 1) {
  if (envs.empty()) throw InputError("run_collection: no environments");
  budget.check();

  struct PerEnv {
    AnnotateOutput annotated;
    nlohmann::ordered_json tree;
    std::optional<std::string> error;
  };
  std::vector<PerEnv> results(envs.size());

  parallel_for(envs.size(), workers, [&](std::size_t i) {
    try {
      auto j = judge_factory(envs[i]);
      mctsp::SearchResult res = mctsp::search(envs[i], budget, *j);
      results[i].annotated = annotate_tree(res, envs[i]);
      results[i].tree = mctsp::serialize_tree(res);
    } catch (const std::exception& e) {
      results[i].error = e.what();
    }
  });

  std::filesystem::create_directories(out_dir);
  std::string traj_lines, sibling_lines;
  nlohmann::ordered_json tasks = nlohmann::ordered_json::array();
  nlohmann::ordered_json env_errors = nlohmann::ordered_json::object();
  Dataset ds;
  ds.dir = out_dir;
  int n_trajectories = 0, n_pruned = 0, n_ok = 0;

  for (std::size_t i = 0; i < envs.size(); ++i) {
    const auto& env = envs[i];
    PerEnv& r = results[i];
    if (r.error) {
      env_errors[env.id] = *r.error;
      continue;
    }
    n_ok += 1;
    for (const auto& t : r.annotated.trajectories) {
      traj_lines += trajectory_to_json(t).dump();
      traj_lines += '\n';
      ds.trajectories.push_back(t);
    }
    for (const auto& st : r.annotated.pruned_steps) {
      sibling_lines += step_to_json(st).dump();
      sibling_lines += '\n';
      ds.pruned_steps.push_back(st);
    }
    write_text_file(out_dir / "trees" / (env.id + ".json"), r.tree.dump(2) + "\n");
    tasks.push_back({{"env_id", env.id},
                     {"n_trajectories", r.annotated.trajectories.size()},
                     {"n_pruned", r.annotated.n_pruned_paths}});
    n_trajectories += static_cast<int>(r.annotated.trajectories.size());
    n_pruned += r.annotated.n_pruned_paths;
  }
  if (n_ok == 0) throw Error("run_collection: every environment failed");

  write_text_file(out_dir / "trajectories.jsonl", traj_lines);
  write_text_file(out_dir / "siblings.jsonl", sibling_lines);

  nlohmann::ordered_json manifest;
  manifest["seed"] = budget.rng_seed;
  manifest["budget"] = {{"iterations", budget.iterations},
                        {"rollouts", budget.rollouts_per_expansion},
                        {"c", budget.exploration_c}};
  manifest["judge"] = judge_name;
  manifest["n_tasks"] = n_ok;
  manifest["n_trajectories"] = n_trajectories;
  manifest["n_pruned"] = n_pruned;
  manifest["tasks"] = std::move(tasks);
  manifest["env_errors"] = std::move(env_errors);
  write_text_file(out_dir / "manifest.json", manifest.dump(2) + "\n");
  ds.manifest = nlohmann::json::parse(manifest.dump());
  return ds;
}

inline Dataset load_dataset(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw InputError("dataset directory not found: " + dir.string());
  }
  Dataset ds;
  ds.dir = dir;
  auto parse_lines = [](const std::string& text, const std::string& what, auto&& fn) {
    std::size_t line_no = 0;
    for (const auto& line : split(text, '\n')) {
      ++line_no;
      if (line.empty()) continue;
      try {
        fn(nlohmann::json::parse(line));
      } catch (const nlohmann::json::exception& e) {
        throw InputError(what + " line " + std::to_string(line_no) + ": " + e.what());
      }
    }
  };
  parse_lines(read_text_file(dir / "trajectories.jsonl"), "trajectories.jsonl",
              [&](const nlohmann::json& j) { ds.trajectories.push_back(trajectory_from_json(j)); });
  parse_lines(read_text_file(dir / "siblings.jsonl"), "siblings.jsonl",
              [&](const nlohmann::json& j) { ds.pruned_steps.push_back(step_from_json(j)); });
  std::filesystem::path manifest_path = dir / "manifest.json";
  if (std::filesystem::exists(manifest_path)) {
    ds.manifest = nlohmann::json::parse(read_text_file(manifest_path));
  }
  if (ds.trajectories.empty() && ds.pruned_steps.empty()) {
    throw InputError("dataset is empty: " + dir.string());
  }
  return ds;
}

/// Task-id split: no environment contributes to both halves. Writes two
/// dataset directories and returns them loaded.
inline std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, double eval_fraction,
                                                 std::uint64_t seed,
                                                 const std::filesystem::path& out_train,
                                                 const std::filesystem::path& out_eval) {
  if (!(eval_fraction > 0.0 && eval_fraction < 1.0)) {
    throw ConfigError("split: eval_fraction must lie in (0,1)");
  }
  std::vector<std::string> ids = ds.env_ids();
  if (ids.size() < 2) throw InputError("split: need at least two tasks");

  std::mt19937_64 rng = seeded_engine(seed, "dataset-split");
  for (std::size_t i = ids.size(); i > 1; --i) {
    std::size_t j = rand_below(rng, i);
    std::swap(ids[i - 1], ids[j]);
  }
  auto n_eval = static_cast<std::size_t>(std::llround(eval_fraction * static_cast<double>(ids.size())));
  n_eval = std::clamp<std::size_t>(n_eval, 1, ids.size() - 1);
  std::set<std::string> eval_ids(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_eval));

  auto write_half = [&](const std::filesystem::path& out_dir, bool is_eval) {
    std::filesystem::create_directories(out_dir);
    std::string traj_lines, sibling_lines;
    std::set<std::string> kept;
    int n_traj = 0;
    for (const auto& t : ds.trajectories) {
      if ((eval_ids.count(t.env_id) != 0) != is_eval) continue;
      traj_lines += trajectory_to_json(t).dump();
      traj_lines += '\n';
      kept.insert(t.env_id);
      ++n_traj;
    }
    for (const auto& st : ds.pruned_steps) {
      if ((eval_ids.count(st.env_id) != 0) != is_eval) continue;
      sibling_lines += step_to_json(st).dump();
      sibling_lines += '\n';
      kept.insert(st.env_id);
    }
    write_text_file(out_dir / "trajectories.jsonl", traj_lines);
    write_text_file(out_dir / "siblings.jsonl", sibling_lines);
    nlohmann::ordered_json manifest;
    manifest["split_of"] = ds.dir.string();
    manifest["split"] = is_eval ? "eval" : "train";
    manifest["seed"] = seed;
    manifest["n_tasks"] = kept.size();
    manifest["n_trajectories"] = n_traj;
    write_text_file(out_dir / "manifest.json", manifest.dump(2) + "\n");
  };
  write_half(out_train, false);
  write_half(out_eval, true);
  return {load_dataset(out_train), load_dataset(out_eval)};
}

}  // namespace prm::collect
