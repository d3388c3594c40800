#pragma once

#include <algorithm>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "prm/common.hpp"

namespace prm::taskenv {

using StateId = std::string;
using ActionId = std::string;
using TagSet = std::set<std::string>;

/// One labelled action a virtual agent can take on some screen.
/// `follows` lists action ids that are sensible immediate predecessors;
/// it drives the rule-based coherence judge.
struct ActionRecord {
  ActionId id;
  std::string text;
  TagSet tags;
  std::set<ActionId> follows;
};

struct OutEdge {
  ActionRecord action;
  StateId to;
};

/// Returned as a distinguished value by min_steps when no goal is reachable.
inline constexpr int kUnreachable = -1;

/**
 * Deterministic task environment: a finite directed graph of UI states.
 * Episodes start at `initial` and succeed on entering any goal state
 * within `horizon` steps. The graph is the single source of truth for
 * every exact quantity the reward pipeline needs (shortest distances,
 * rollout outcomes, tag relevance, action ordering).
 */
class TaskGraph {
 public:
  std::string id;
  std::string instruction;
  TagSet instruction_tags;
  StateId initial;
  std::set<StateId> goals;
  int horizon = 0;

  static TaskGraph from_json(const nlohmann::json& j, const std::string& env_id);
  static TaskGraph load_file(const std::filesystem::path& path);

  const std::vector<StateId>& states() const { return states_; }

  bool has_state(const StateId& s) const { return edges_.count(s) != 0; }

  /// Legal actions at a state, in declaration order.
  const std::vector<OutEdge>& actions_at(const StateId& s) const {
    auto it = edges_.find(s);
    if (it == edges_.end()) throw InputError(id + ": unknown state: " + s);
    return it->second;
  }

  const OutEdge& edge_at(const StateId& s, const ActionId& a) const {
    for (const OutEdge& e : actions_at(s)) {
      if (e.action.id == a) return e;
    }
    throw InputError(id + ": no action '" + a + "' at state '" + s + "'");
  }

  bool is_goal(const StateId& s) const { return goals.count(s) != 0; }

  /// Exact shortest number of steps from `s` to any goal; empty if unreachable.
  std::optional<int> min_steps(const StateId& s) const {
    auto it = dist_.find(s);
    if (it == dist_.end()) throw InputError(id + ": unknown state: " + s);
    return it->second < 0 ? std::nullopt : std::optional<int>(it->second);
  }

  /// min_steps with unreachable states capped at the episode horizon.
  int min_steps_capped(const StateId& s) const {
    auto d = min_steps(s);
    return d ? *d : horizon;
  }

 private:
  std::vector<StateId> states_;
  std::map<StateId, std::vector<OutEdge>> edges_;
  std::map<StateId, int> dist_;  // kUnreachable when no goal is reachable

  void compute_distances();
};

/// Immutable episode snapshot. `step` returns a new value; no hidden state.
struct EpisodeState {
  struct HistoryStep {
    StateId state;  // state the action was taken from
    ActionRecord action;
  };

  StateId current;
  int steps_taken = 0;
  std::vector<HistoryStep> history;
};

inline EpisodeState initial_episode(const TaskGraph& env) {
  return EpisodeState{env.initial, 0, {}};
}

inline bool is_success(const TaskGraph& env, const EpisodeState& st) {
  return env.is_goal(st.current);
}

/// Episode is over when the goal is reached, the horizon is spent, or the
/// current state offers no actions.
inline bool is_terminal(const TaskGraph& env, const EpisodeState& st) {
  return is_success(env, st) || st.steps_taken >= env.horizon ||
         env.actions_at(st.current).empty();
}

inline EpisodeState step(const TaskGraph& env, const EpisodeState& st, const ActionId& action) {
  if (st.steps_taken >= env.horizon) {
    throw Error(env.id + ": episode horizon exhausted at state '" + st.current + "'");
  }
  const OutEdge& e = env.edge_at(st.current, action);
  EpisodeState next = st;
  next.history.push_back({st.current, e.action});
  next.current = e.to;
  next.steps_taken += 1;
  return next;
}

/// Canonical textual observation for a state. This exact rendering is what
/// judge prompts and reward-model features see, so its format is frozen.
inline std::string render_observation(const TaskGraph& env, const StateId& s) {
  std::string out = "Screen: " + s + "\nOptions: ";
  const auto& edges = env.actions_at(s);
  if (edges.empty()) {
    out += "(none)";
  } else {
    for (std::size_t i = 0; i < edges.size(); ++i) {
      if (i) out += " | ";
      out += edges[i].action.text;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Loading / validation
// ---------------------------------------------------------------------------

namespace detail {

inline void require(bool cond, const std::string& env_id, const std::string& msg) {
  if (!cond) throw InputError(env_id + ": " + msg);
}

inline std::set<std::string> string_set(const nlohmann::json& j, const std::string& env_id,
                                        const std::string& field) {
  require(j.is_array(), env_id, field + " must be an array of strings");
  std::set<std::string> out;
  for (const auto& v : j) {
    require(v.is_string(), env_id, field + " must contain only strings");
    out.insert(v.get<std::string>());
  }
  return out;
}

}  // namespace detail

inline TaskGraph TaskGraph::from_json(const nlohmann::json& j, const std::string& env_id) {
  using detail::require;
  TaskGraph g;
  g.id = env_id;
  require(j.is_object(), env_id, "environment file must hold a JSON object");
  for (const char* key : {"states", "transitions", "initial", "goals", "instruction",
                          "instruction_tags", "horizon"}) {
    require(j.contains(key), env_id, std::string("missing required field '") + key + "'");
  }

  require(j["states"].is_array() && !j["states"].empty(), env_id, "states must be a non-empty array");
  std::set<StateId> seen;
  for (const auto& s : j["states"]) {
    require(s.is_string(), env_id, "states must contain only strings");
    StateId id = s.get<StateId>();
    require(seen.insert(id).second, env_id, "duplicate state '" + id + "'");
    g.states_.push_back(id);
    g.edges_[id];  // ensure presence even when the state has no out-edges
  }

  require(j["initial"].is_string(), env_id, "initial must be a string");
  g.initial = j["initial"].get<StateId>();
  require(seen.count(g.initial) != 0, env_id, "initial state '" + g.initial + "' not declared");

  g.goals = detail::string_set(j["goals"], env_id, "goals");
  require(!g.goals.empty(), env_id, "goals must be non-empty");
  for (const auto& s : g.goals) {
    require(seen.count(s) != 0, env_id, "goal state '" + s + "' not declared");
  }

  require(j["instruction"].is_string(), env_id, "instruction must be a string");
  g.instruction = j["instruction"].get<std::string>();
  require(!g.instruction.empty(), env_id, "instruction must be non-empty");
  g.instruction_tags = detail::string_set(j["instruction_tags"], env_id, "instruction_tags");

  require(j["horizon"].is_number_integer(), env_id, "horizon must be an integer");
  g.horizon = j["horizon"].get<int>();
  require(g.horizon > 0, env_id, "horizon must be positive");

  require(j["transitions"].is_array(), env_id, "transitions must be an array");
  std::set<ActionId> action_ids;
  std::size_t idx = 0;
  for (const auto& t : j["transitions"]) {
    std::string where = "transitions[" + std::to_string(idx) + "]";
    require(t.is_object(), env_id, where + " must be an object");
    for (const char* key : {"from", "action_id", "text", "tags", "follows", "to"}) {
      require(t.contains(key), env_id, where + " missing field '" + key + "'");
    }
    OutEdge e;
    require(t["from"].is_string() && t["to"].is_string(), env_id, where + ": from/to must be strings");
    StateId from = t["from"].get<StateId>();
    e.to = t["to"].get<StateId>();
    require(seen.count(from) != 0, env_id, where + ": unknown source state '" + from + "'");
    require(seen.count(e.to) != 0, env_id, where + ": unknown target state '" + e.to + "'");
    require(t["action_id"].is_string() && t["text"].is_string(), env_id,
            where + ": action_id/text must be strings");
    e.action.id = t["action_id"].get<ActionId>();
    e.action.text = t["text"].get<std::string>();
    require(!e.action.id.empty() && !e.action.text.empty(), env_id,
            where + ": action_id and text must be non-empty");
    require(action_ids.insert(e.action.id).second, env_id,
            where + ": duplicate action id '" + e.action.id + "'");
    e.action.tags = detail::string_set(t["tags"], env_id, where + ".tags");
    auto follows = detail::string_set(t["follows"], env_id, where + ".follows");
    e.action.follows.insert(follows.begin(), follows.end());
    g.edges_[from].push_back(std::move(e));
    ++idx;
  }

  // follows may only reference declared action ids
  for (const auto& [state, edges] : g.edges_) {
    (void)state;
    for (const OutEdge& e : edges) {
      for (const ActionId& f : e.action.follows) {
        require(action_ids.count(f) != 0, env_id,
                "action '" + e.action.id + "' follows unknown action '" + f + "'");
      }
    }
  }

  g.compute_distances();
  require(g.dist_.at(g.initial) >= 0, env_id, "no goal reachable from initial state");
  require(g.dist_.at(g.initial) <= g.horizon, env_id,
          "shortest solution exceeds horizon");
  return g;
}

inline TaskGraph TaskGraph::load_file(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(path.string() + ": " + e.what());
  }
  return from_json(j, path.stem().string());
}

inline void TaskGraph::compute_distances() {
  // reverse breadth-first search from the goal set
  std::map<StateId, std::vector<StateId>> rev;
  for (const auto& [from, edges] : edges_) {
    for (const OutEdge& e : edges) rev[e.to].push_back(from);
  }
  for (const auto& s : states_) dist_[s] = kUnreachable;
  std::deque<StateId> queue;
  for (const auto& goal : goals) {
    dist_[goal] = 0;
    queue.push_back(goal);
  }
  while (!queue.empty()) {
    StateId s = queue.front();
    queue.pop_front();
    auto it = rev.find(s);
    if (it == rev.end()) continue;
    for (const StateId& p : it->second) {
      if (dist_[p] == kUnreachable) {
        dist_[p] = dist_[s] + 1;
        queue.push_back(p);
      }
    }
  }
}

/// Loads every *.json environment in a directory, sorted by filename.
inline std::vector<TaskGraph> load_directory(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw InputError("not a directory: " + dir.string());
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw InputError("no environment files in " + dir.string());
  std::vector<TaskGraph> envs;
  envs.reserve(files.size());
  for (const auto& f : files) envs.push_back(TaskGraph::load_file(f));
  return envs;
}

}  // namespace prm::taskenv
