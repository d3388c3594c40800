#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "prm/common.hpp"
#include "prm/dims.hpp"
#include "prm/judge.hpp"
#include "prm/taskenv.hpp"

namespace prm::mctsp {

struct SearchBudget {
  int iterations = 200;
  int rollouts_per_expansion = 8;  // N
  double exploration_c = 1.4;
  std::uint64_t rng_seed = 0;

  void check() const {
    if (iterations < 1) throw ConfigError("budget: iterations must be >= 1");
    if (rollouts_per_expansion < 1) throw ConfigError("budget: rollouts must be >= 1");
    if (exploration_c < 0.0) throw ConfigError("budget: exploration c must be >= 0");
  }
};

/**
 * One node of the search tree. `scores` is the node's five-dimension snapshot,
 * computed exactly once when the node is expanded; `value` accumulates the
 * snapshots backed up through this node. `path` is the node's stable address
 * ("" for the root, child indices joined by '/'), used for serialization and
 * per-node RNG stream derivation.
 */
struct SearchNode {
  std::optional<taskenv::ActionRecord> action;  // absent at root
  taskenv::StateId state;
  int n = 0;
  std::array<double, 5> value{};
  dims::StepScores scores{};
  double ac_along_path = 0.0;
  int depth = 0;
  double len_mean = 0.0;  // mean remaining length estimate (rollout statistic)
  int m_eff = 0;
  std::string path;
  SearchNode* parent = nullptr;
  std::vector<std::unique_ptr<SearchNode>> children;
  std::set<taskenv::ActionId> expanded_actions;

  bool is_root() const { return parent == nullptr; }

  double value_sum() const {
    double s = 0.0;
    for (double v : value) s += v;
    return s;
  }
};

/// v(S) = H + OS + E + TR + C.
inline double composite_value(const dims::StepScores& s) {
  return s.h + s.os + s.e + static_cast<double>(s.tr) + static_cast<double>(s.c);
}

/// UCB used by BestChild: v/n + c*sqrt(2 ln n_parent / n_child).
inline double ucb_score(double v_child, int n_child, int n_parent, double c) {
  if (n_child < 1 || n_parent < 1) throw Error("ucb_score: visit counts must be >= 1");
  return v_child / static_cast<double>(n_child) +
         c * std::sqrt(2.0 * std::log(static_cast<double>(n_parent)) /
                       static_cast<double>(n_child));
}

/// Unvisited children are taken first (insertion order); among visited
/// children the UCB argmax wins with ties broken toward the lowest index.
inline std::size_t best_child_index(const SearchNode& node, double c) {
  if (node.children.empty()) throw Error("best_child: node has no children");
  for (std::size_t i = 0; i < node.children.size(); ++i) {
    if (node.children[i]->n == 0) return i;
  }
  std::size_t best = 0;
  double best_score = ucb_score(node.children[0]->value_sum(), node.children[0]->n, node.n, c);
  for (std::size_t i = 1; i < node.children.size(); ++i) {
    double s = ucb_score(node.children[i]->value_sum(), node.children[i]->n, node.n, c);
    if (s > best_score) {
      best_score = s;
      best = i;
    }
  }
  return best;
}

inline SearchNode& best_child(SearchNode& node, double c) {
  return *node.children[best_child_index(node, c)];
}

inline const SearchNode& best_child(const SearchNode& node, double c) {
  return *node.children[best_child_index(node, c)];
}

/// Uniform random playout from `state` for at most `max_steps` steps.
/// Returns the success flag and the number of steps consumed.
inline std::pair<bool, int> default_policy(const taskenv::TaskGraph& env,
                                           const taskenv::StateId& state,
                                           std::mt19937_64& rng, int max_steps) {
  taskenv::StateId s = state;
  int steps = 0;
  while (true) {
    if (env.is_goal(s)) return {true, steps};
    if (steps >= max_steps) return {false, steps};
    const auto& edges = env.actions_at(s);
    if (edges.empty()) return {false, steps};
    s = edges[rand_below(rng, edges.size())].to;
    ++steps;
  }
}

/// Adds `scores` to the node and every ancestor, incrementing visit counts.
inline void backup(SearchNode& leaf, const dims::StepScores& scores) {
  std::array<double, 5> add = scores.as_array();
  for (SearchNode* cur = &leaf; cur != nullptr; cur = cur->parent) {
    cur->n += 1;
    for (int i = 0; i < 5; ++i) cur->value[i] += add[i];
  }
}

// ---------------------------------------------------------------------------
// Node scoring
// ---------------------------------------------------------------------------

/// Everything a scorer may need to evaluate a freshly expanded node.
struct NodeContext {
  const taskenv::TaskGraph& env;
  const SearchNode& parent;
  const taskenv::ActionRecord& action;
  const taskenv::StateId& state;       // state after the action
  int depth = 0;                       // 1-based step index of this node
  int m_eff = 0;
  std::uint64_t rollout_seed = 0;      // derived from (budget seed, node path)
  int rollouts = 1;                    // N
  std::vector<std::string> trajectory; // action texts of steps 1..depth-1
  std::string node_path;               // the node's own tree address
};

struct NodeEvaluation {
  dims::StepScores scores;
  double len_mean = 0.0;
};

using NodeScorer = std::function<NodeEvaluation(const NodeContext&)>;

/// The standard scorer: N random rollouts feed r/OS/E and the helpfulness
/// credit rule; TR and C come from the judge.
inline NodeScorer make_oracle_scorer(judge::StepJudge& j) {
  return [&j](const NodeContext& ctx) -> NodeEvaluation {
    std::mt19937_64 rng(ctx.rollout_seed);
    dims::RolloutBundle bundle;
    int cap = ctx.env.horizon - ctx.depth;
    for (int k = 0; k < ctx.rollouts; ++k) {
      auto [ok, steps] = default_policy(ctx.env, ctx.state, rng, cap);
      bundle.add(ok, ok ? steps : ctx.env.horizon);
    }
    int r = dims::basic_reward(bundle);
    double os = dims::odds_of_success(bundle);
    double len_mean = dims::mean_remaining_length(bundle);
    double len0 = static_cast<double>(ctx.env.min_steps_capped(ctx.env.initial));
    double e = dims::efficiency(ctx.parent.len_mean, len_mean, len0);
    double h = dims::helpfulness({ctx.parent.ac_along_path, ctx.m_eff, ctx.depth, r});

    judge::JudgeRequest req;
    req.instruction = ctx.env.instruction;
    req.observation = taskenv::render_observation(ctx.env, ctx.parent.state);
    req.trajectory = ctx.trajectory;
    req.action = ctx.action;
    if (ctx.parent.action) req.prev_action = *ctx.parent.action;
    req.dimension = judge::Dimension::TR;
    int tr = j.evaluate(req).value;
    req.dimension = judge::Dimension::C;
    int c = j.evaluate(req).value;

    dims::StepScores s{h, os, e, tr, c};
    if (!s.valid()) throw Error("node scoring produced invalid step scores");
    return {s, len_mean};
  };
}

// ---------------------------------------------------------------------------
// Search
// ---------------------------------------------------------------------------

struct SearchDiagnostics {
  int aborted_iterations = 0;
  std::vector<std::string> errors;
};

struct SearchResult {
  std::unique_ptr<SearchNode> root;
  SearchBudget budget;
  std::string env_id;
  SearchDiagnostics diagnostics;
  /// Leaf path per completed iteration, for backup replay checks.
  std::vector<std::string> backup_log;
};

namespace detail {

inline bool node_terminal(const taskenv::TaskGraph& env, const SearchNode& node) {
  return env.is_goal(node.state) || node.depth >= env.horizon ||
         env.actions_at(node.state).empty();
}

inline std::vector<std::string> trajectory_texts(const SearchNode& node) {
  // action texts from the root down to `node` inclusive, oldest first
  std::vector<std::string> out;
  for (const SearchNode* cur = &node; cur != nullptr && cur->action; cur = cur->parent) {
    out.push_back(cur->action->text);
  }
  std::reverse(out.begin(), out.end());
  return out;
}

inline std::mt19937_64 expand_engine(std::uint64_t seed, const SearchNode& node, int draw_index) {
  std::uint64_t h = hash_mix(seed, fnv1a64("expand:" + node.path));
  return std::mt19937_64(hash_mix(h, static_cast<std::uint64_t>(draw_index)));
}

}  // namespace detail

/// Adds one child for a uniformly chosen untried action. The child starts
/// with n = 0 and zero value; scoring is the search loop's job.
inline SearchNode& expand(SearchNode& node, const taskenv::TaskGraph& env,
                          std::uint64_t budget_seed, std::size_t width_cap = 0) {
  const auto& edges = env.actions_at(node.state);
  std::size_t width = width_cap == 0 ? edges.size() : std::min(edges.size(), width_cap);
  if (node.expanded_actions.size() >= width) {
    throw Error("expand: node is fully expanded");
  }
  std::vector<const taskenv::OutEdge*> untried;
  for (const auto& e : edges) {
    if (!node.expanded_actions.count(e.action.id)) untried.push_back(&e);
  }
  auto rng = detail::expand_engine(budget_seed, node, static_cast<int>(node.children.size()));
  const taskenv::OutEdge* pick = untried[rand_below(rng, untried.size())];

  auto child = std::make_unique<SearchNode>();
  child->action = pick->action;
  child->state = pick->to;
  child->depth = node.depth + 1;
  child->parent = &node;
  child->path = node.path.empty() ? std::to_string(node.children.size())
                                  : node.path + "/" + std::to_string(node.children.size());
  node.expanded_actions.insert(pick->action.id);
  node.children.push_back(std::move(child));
  return *node.children.back();
}

inline void score_node(SearchNode& node, const taskenv::TaskGraph& env,
                       const SearchBudget& budget, const NodeScorer& scorer) {
  if (node.is_root()) throw Error("score_node: root carries no action to score");
  NodeContext ctx{env,
                  *node.parent,
                  *node.action,
                  node.state,
                  node.depth,
                  node.depth + env.min_steps_capped(node.state),
                  hash_mix(budget.rng_seed, fnv1a64("rollout:" + node.path)),
                  budget.rollouts_per_expansion,
                  detail::trajectory_texts(*node.parent),
                  node.path};
  node.m_eff = ctx.m_eff;
  NodeEvaluation eval = scorer(ctx);
  node.scores = eval.scores;
  node.len_mean = eval.len_mean;
  node.ac_along_path = dims::update_ac(node.parent->ac_along_path, eval.scores.h);
}

/**
 * MCTS-P main loop: TreePolicy (UCB descent + expansion), five-dimension
 * scoring at expansion, Backup of the node's snapshot through its ancestors.
 * `width_cap` limits children per node (0 = all legal actions); guide's
 * reward-in-the-loop search uses it as its N.
 */
inline SearchResult search_with(const taskenv::TaskGraph& env, const SearchBudget& budget,
                                const NodeScorer& scorer, std::size_t width_cap = 0) {
  budget.check();
  SearchResult res;
  res.budget = budget;
  res.env_id = env.id;
  res.root = std::make_unique<SearchNode>();
  res.root->state = env.initial;
  res.root->depth = 0;
  res.root->len_mean = static_cast<double>(env.min_steps_capped(env.initial));
  res.root->m_eff = env.min_steps_capped(env.initial);

  for (int iter = 0; iter < budget.iterations; ++iter) {
    try {
      SearchNode* cur = res.root.get();
      while (!detail::node_terminal(env, *cur)) {
        const auto& edges = env.actions_at(cur->state);
        std::size_t width = width_cap == 0 ? edges.size() : std::min(edges.size(), width_cap);
        if (cur->expanded_actions.size() < width) {
          SearchNode& child = expand(*cur, env, budget.rng_seed, width_cap);
          score_node(child, env, budget, scorer);
          cur = &child;
          break;
        }
        cur = &best_child(*cur, budget.exploration_c);
      }
      backup(*cur, cur->scores);  // root snapshot is zero by construction
      res.backup_log.push_back(cur->path);
    } catch (const JudgeError&) {
      throw;  // judge failures abort the whole search, never silently skip
    } catch (const std::exception& e) {
      res.diagnostics.aborted_iterations += 1;
      res.diagnostics.errors.emplace_back(e.what());
    }
  }
  return res;
}

inline SearchResult search(const taskenv::TaskGraph& env, const SearchBudget& budget,
                           judge::StepJudge& j) {
  return search_with(env, budget, make_oracle_scorer(j));
}

/// Greedy exploitation descent (best_child with c = 0); returns action ids.
inline std::vector<taskenv::ActionId> greedy_path(const SearchResult& res) {
  std::vector<taskenv::ActionId> out;
  const SearchNode* cur = res.root.get();
  while (!cur->children.empty()) {
    cur = &best_child(*cur, 0.0);
    out.push_back(cur->action->id);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

inline nlohmann::ordered_json serialize_tree(const SearchResult& res) {
  nlohmann::ordered_json nodes = nlohmann::ordered_json::array();
  std::function<void(const SearchNode&)> walk = [&](const SearchNode& node) {
    nlohmann::ordered_json j;
    j["path"] = node.path;
    if (node.action) {
      j["action_id"] = node.action->id;
    } else {
      j["action_id"] = nullptr;
    }
    j["n"] = node.n;
    j["v"] = node.value;
    j["scores"] = node.scores.as_array();
    j["ac"] = node.ac_along_path;
    nodes.push_back(std::move(j));
    for (const auto& child : node.children) walk(*child);
  };
  walk(*res.root);
  nlohmann::ordered_json out;
  out["env_id"] = res.env_id;
  out["budget"] = {{"iterations", res.budget.iterations},
                   {"rollouts", res.budget.rollouts_per_expansion},
                   {"c", res.budget.exploration_c},
                   {"seed", res.budget.rng_seed}};
  out["aborted_iterations"] = res.diagnostics.aborted_iterations;
  out["nodes"] = std::move(nodes);
  return out;
}

/// Rebuilds a tree from its snapshot, replaying action ids against the
/// environment to recover states. Backup logs are not part of snapshots.
inline SearchResult deserialize_tree(const nlohmann::json& j, const taskenv::TaskGraph& env) {
  if (!j.is_object() || !j.contains("nodes") || !j.contains("env_id")) {
    throw InputError("tree snapshot: missing env_id/nodes");
  }
  if (j["env_id"].get<std::string>() != env.id) {
    throw InputError("tree snapshot: env_id '" + j["env_id"].get<std::string>() +
                     "' does not match environment '" + env.id + "'");
  }
  SearchResult res;
  res.env_id = env.id;
  if (j.contains("budget")) {
    res.budget.iterations = j["budget"].value("iterations", 0);
    res.budget.rollouts_per_expansion = j["budget"].value("rollouts", 1);
    res.budget.exploration_c = j["budget"].value("c", 0.0);
    res.budget.rng_seed = j["budget"].value("seed", 0ull);
  }
  res.diagnostics.aborted_iterations = j.value("aborted_iterations", 0);

  std::map<std::string, SearchNode*> by_path;
  for (const auto& nj : j["nodes"]) {
    std::string path = nj.at("path").get<std::string>();
    auto node = std::make_unique<SearchNode>();
    node->path = path;
    node->n = nj.at("n").get<int>();
    auto v = nj.at("v").get<std::array<double, 5>>();
    node->value = v;
    auto s = nj.at("scores").get<std::array<double, 5>>();
    node->scores = {s[0], s[1], s[2], static_cast<int>(s[3]), static_cast<int>(s[4])};
    node->ac_along_path = nj.at("ac").get<double>();
    if (path.empty()) {
      if (res.root) throw InputError("tree snapshot: duplicate root");
      node->state = env.initial;
      node->depth = 0;
      node->len_mean = static_cast<double>(env.min_steps_capped(env.initial));
      node->m_eff = env.min_steps_capped(env.initial);
      res.root = std::move(node);
      by_path[""] = res.root.get();
      continue;
    }
    std::size_t cut = path.rfind('/');
    std::string parent_path = cut == std::string::npos ? "" : path.substr(0, cut);
    auto it = by_path.find(parent_path);
    if (it == by_path.end()) {
      throw InputError("tree snapshot: node '" + path + "' appears before its parent");
    }
    SearchNode* parent = it->second;
    if (nj.at("action_id").is_null()) {
      throw InputError("tree snapshot: non-root node '" + path + "' lacks an action id");
    }
    auto action_id = nj.at("action_id").get<std::string>();
    const taskenv::OutEdge& edge = env.edge_at(parent->state, action_id);
    node->action = edge.action;
    node->state = edge.to;
    node->depth = parent->depth + 1;
    node->m_eff = node->depth + env.min_steps_capped(node->state);
    node->parent = parent;
    parent->expanded_actions.insert(action_id);
    by_path[path] = node.get();
    parent->children.push_back(std::move(node));
  }
  if (!res.root) throw InputError("tree snapshot: no root node");
  return res;
}

}  // namespace prm::mctsp
