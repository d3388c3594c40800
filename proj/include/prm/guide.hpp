#pragma once

#include <array>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "prm/common.hpp"
#include "prm/dims.hpp"
#include "prm/mctsp.hpp"
#include "prm/taskenv.hpp"
#include "prm/trainer.hpp"

namespace prm::guide {

// ---------------------------------------------------------------------------
// Dimension masks
// ---------------------------------------------------------------------------

using DimMask = std::array<bool, 5>;

inline DimMask full_mask() {
  DimMask m;
  m.fill(true);
  return m;
}

inline DimMask mask_from_names(const std::vector<std::string>& names) {
  if (names.empty()) throw ConfigError("dimension mask must name at least one dimension");
  DimMask m{};
  for (const auto& name : names) m[static_cast<int>(dims::dim_from_name(name))] = true;
  return m;
}

inline std::string mask_label(const DimMask& m) {
  std::vector<std::string> parts;
  for (int i = 0; i < 5; ++i) {
    if (m[i]) parts.emplace_back(dims::kDimNames[i]);
  }
  if (parts.empty()) throw ConfigError("dimension mask must name at least one dimension");
  return join(parts, "+");
}

inline bool is_full_mask(const DimMask& m) {
  for (bool b : m) {
    if (!b) return false;
  }
  return true;
}

/// Masked dimensions contribute 0; the rest sum unweighted.
inline double masked_reward(const std::array<double, 5>& scores, const DimMask& m) {
  double total = 0.0;
  for (int i = 0; i < 5; ++i) {
    if (m[i]) total += scores[i];
  }
  return total;
}

// ---------------------------------------------------------------------------
// Policies
// ---------------------------------------------------------------------------

enum class PolicyKind { EpsOracle, Uniform };

/**
 * Candidate proposer standing in for a stochastic agent. EPS_ORACLE proposes
 * the first shortest-path action with probability 1-epsilon and a uniform
 * legal action otherwise; UNIFORM always samples uniformly.
 */
struct AgentPolicy {
  PolicyKind kind = PolicyKind::EpsOracle;
  double epsilon = 0.5;
  std::uint64_t rng_seed = 0;  // folded into every episode stream

  void check() const {
    if (epsilon < 0.0 || epsilon > 1.0) throw ConfigError("policy epsilon must be in [0,1]");
  }
};

/// First action (declaration order) minimizing the successor's capped
/// remaining distance to goal.
inline const taskenv::OutEdge& bfs_optimal_edge(const taskenv::TaskGraph& env,
                                                const taskenv::StateId& state) {
  const auto& edges = env.actions_at(state);
  if (edges.empty()) throw Error("bfs_optimal_edge: state has no actions");
  const taskenv::OutEdge* best = &edges[0];
  int best_len = env.min_steps_capped(edges[0].to);
  for (std::size_t i = 1; i < edges.size(); ++i) {
    int len = env.min_steps_capped(edges[i].to);
    if (len < best_len) {
      best_len = len;
      best = &edges[i];
    }
  }
  return *best;
}

inline const taskenv::OutEdge& propose_action(const AgentPolicy& policy,
                                              const taskenv::TaskGraph& env,
                                              const taskenv::StateId& state,
                                              std::mt19937_64& rng) {
  const auto& edges = env.actions_at(state);
  if (edges.empty()) throw Error("propose_action: state has no actions");
  bool explore = policy.kind == PolicyKind::Uniform || rand_unit(rng) < policy.epsilon;
  if (explore) return edges[rand_below(rng, edges.size())];
  return bfs_optimal_edge(env, state);
}

// ---------------------------------------------------------------------------
// Step scorers
// ---------------------------------------------------------------------------

/// Everything needed to score one candidate action at one episode step.
struct StepContext {
  const taskenv::TaskGraph* env = nullptr;
  taskenv::StateId state;  // state before the action
  int steps_taken = 0;
  const taskenv::ActionRecord* action = nullptr;
  const taskenv::ActionRecord* prev_action = nullptr;  // null at the first step
  std::vector<std::string> trajectory;                 // action texts so far
  double ac_prev = 0.0;
};

/// Produces the five dimension scores for a candidate step. Implementations
/// must be safe to call from multiple threads after prepare().
class ActionScorer {
 public:
  virtual ~ActionScorer() = default;
  virtual std::string name() const = 0;
  virtual std::array<double, 5> score_step(const StepContext& ctx) = 0;
  virtual void prepare(const taskenv::TaskGraph&) {}
};

/**
 * Ground-truth scorer computed from the environment: exact reachability,
 * random-walk success probability (dynamic program), shortest-path length
 * deltas, and the rule judges for TR/C.
 */
class OracleActionScorer final : public ActionScorer {
 public:
  std::string name() const override { return "oracle"; }

  void prepare(const taskenv::TaskGraph& env) override { success_table(env); }

  std::array<double, 5> score_step(const StepContext& ctx) override {
    const taskenv::TaskGraph& env = *ctx.env;
    const taskenv::OutEdge& edge = env.edge_at(ctx.state, ctx.action->id);
    int i = ctx.steps_taken + 1;
    int budget_after = env.horizon - i;

    auto ms_next = env.min_steps(edge.to);
    int r = ms_next && *ms_next <= budget_after ? 1 : 0;
    double os = success_probability(env, edge.to, budget_after);
    double len0 = static_cast<double>(env.min_steps_capped(env.initial));
    double e = dims::efficiency(static_cast<double>(env.min_steps_capped(ctx.state)),
                                static_cast<double>(env.min_steps_capped(edge.to)), len0);
    double h = dims::helpfulness({ctx.ac_prev, i + env.min_steps_capped(edge.to), i, r});

    bool relevant = false;
    for (const auto& tag : ctx.action->tags) {
      if (env.instruction_tags.count(tag)) {
        relevant = true;
        break;
      }
    }
    bool coherent = ctx.steps_taken == 0 ||
                    (ctx.prev_action != nullptr && ctx.action->follows.count(ctx.prev_action->id) != 0);
    return {h, os, e, relevant ? 1.0 : 0.0, coherent ? 1.0 : 0.0};
  }

  /// P(uniform random walk from `state` reaches a goal within `budget` steps).
  double success_probability(const taskenv::TaskGraph& env, const taskenv::StateId& state,
                             int budget) {
    if (budget < 0) budget = 0;
    auto table = success_table(env);
    return table->at(state)[static_cast<std::size_t>(budget)];
  }

 private:
  using Table = std::unordered_map<taskenv::StateId, std::vector<double>>;

  std::shared_ptr<const Table> success_table(const taskenv::TaskGraph& env) {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = tables_.find(env.id);
    if (it != tables_.end()) return it->second;
    auto table = std::make_shared<Table>();
    std::size_t budgets = static_cast<std::size_t>(env.horizon) + 1;
    for (const auto& s : env.states()) (*table)[s] = std::vector<double>(budgets, 0.0);
    for (std::size_t t = 0; t < budgets; ++t) {
      for (const auto& s : env.states()) {
        double& cell = (*table)[s][t];
        if (env.is_goal(s)) {
          cell = 1.0;
          continue;
        }
        if (t == 0) continue;
        const auto& edges = env.actions_at(s);
        if (edges.empty()) continue;
        double total = 0.0;
        for (const auto& e : edges) total += (*table)[e.to][t - 1];
        cell = total / static_cast<double>(edges.size());
      }
    }
    tables_[env.id] = table;
    return table;
  }

  std::mutex mu_;
  std::map<std::string, std::shared_ptr<const Table>> tables_;
};

/// Scores candidates with the trained reward model's five dimension heads.
class TrainedActionScorer final : public ActionScorer {
 public:
  explicit TrainedActionScorer(trainer::RewardModelParams params) : params_(std::move(params)) {
    params_.check();
  }

  std::string name() const override { return "trained"; }

  std::array<double, 5> score_step(const StepContext& ctx) override {
    std::string x = trainer::step_prompt(ctx.env->instruction,
                                         taskenv::render_observation(*ctx.env, ctx.state),
                                         ctx.trajectory);
    return trainer::predict_dims(params_, x, ctx.action->text);
  }

 private:
  trainer::RewardModelParams params_;
};

// ---------------------------------------------------------------------------
// Guided episodes
// ---------------------------------------------------------------------------

enum class GuideMode { Rerank, RmMcts };

struct GuidanceConfig {
  GuideMode mode = GuideMode::Rerank;
  int n_candidates = 1;  // N
  DimMask mask = full_mask();
  int episodes = 1;
  std::uint64_t seed = 0;
  int mcts_iterations = 200;  // RM_MCTS search budget

  void check() const {
    if (n_candidates < 1) throw ConfigError("guidance: N must be >= 1");
    if (episodes < 1) throw ConfigError("guidance: episodes must be >= 1");
    if (mcts_iterations < 1) throw ConfigError("guidance: mcts iterations must be >= 1");
    mask_label(mask);  // rejects the empty mask
  }
};

struct RerankChoice {
  taskenv::ActionRecord action;
  std::array<double, 5> scores;
};

/**
 * Best-of-N step: samples N candidates from the policy (with replacement),
 * scores each distinct candidate once under the mask, and returns the argmax.
 * Ties go to the earliest-sampled candidate.
 */
inline RerankChoice rerank_step(const AgentPolicy& policy, const taskenv::TaskGraph& env,
                                const taskenv::EpisodeState& st, ActionScorer& scorer,
                                const GuidanceConfig& cfg, double ac_prev,
                                std::mt19937_64& rng) {
  if (taskenv::is_terminal(env, st)) throw Error("rerank_step: episode state is terminal");

  StepContext sc;
  sc.env = &env;
  sc.state = st.current;
  sc.steps_taken = st.steps_taken;
  sc.prev_action = st.history.empty() ? nullptr : &st.history.back().action;
  for (const auto& h : st.history) sc.trajectory.push_back(h.action.text);
  sc.ac_prev = ac_prev;

  std::map<taskenv::ActionId, std::array<double, 5>> scored;
  const taskenv::ActionRecord* best = nullptr;
  std::array<double, 5> best_scores{};
  double best_reward = 0.0;
  for (int k = 0; k < cfg.n_candidates; ++k) {
    const taskenv::OutEdge& cand = propose_action(policy, env, st.current, rng);
    if (scored.count(cand.action.id)) continue;  // duplicates scored once
    sc.action = &cand.action;
    std::array<double, 5> scores = scorer.score_step(sc);
    scored.emplace(cand.action.id, scores);
    double reward = masked_reward(scores, cfg.mask);
    if (best == nullptr || reward > best_reward) {
      best = &cand.action;
      best_scores = scores;
      best_reward = reward;
    }
  }
  return {*best, best_scores};
}

namespace detail {

inline bool run_rerank_episode(const taskenv::TaskGraph& env, const AgentPolicy& policy,
                               ActionScorer& scorer, const GuidanceConfig& cfg,
                               std::mt19937_64& rng) {
  taskenv::EpisodeState st = taskenv::initial_episode(env);
  double ac = 0.0;
  while (!taskenv::is_terminal(env, st)) {
    RerankChoice choice = rerank_step(policy, env, st, scorer, cfg, ac, rng);
    st = taskenv::step(env, st, choice.action.id);
    ac = dims::update_ac(ac, choice.scores[0]);
  }
  return taskenv::is_success(env, st);
}

/// Reward-in-the-loop search: node snapshots carry the scorer's masked reward
/// (in the first component; the rest are zero), so backed-up values and the
/// greedy descent rank nodes by exactly that reward. Tree mechanics, seeds,
/// and budgets are mctsp's own.
inline bool run_mcts_episode(const taskenv::TaskGraph& env, ActionScorer& scorer,
                             const GuidanceConfig& cfg, std::uint64_t episode_seed) {
  mctsp::SearchBudget budget;
  budget.iterations = cfg.mcts_iterations;
  budget.rollouts_per_expansion = 1;  // unused: the scorer does not roll out
  budget.rng_seed = episode_seed;

  std::unordered_map<std::string, double> ac_by_path{{"", 0.0}};
  mctsp::NodeScorer adapter = [&](const mctsp::NodeContext& ctx) -> mctsp::NodeEvaluation {
    StepContext sc;
    sc.env = &ctx.env;
    sc.state = ctx.parent.state;
    sc.steps_taken = ctx.depth - 1;
    sc.action = &ctx.action;
    sc.prev_action = ctx.parent.action ? &*ctx.parent.action : nullptr;
    sc.trajectory = ctx.trajectory;
    sc.ac_prev = ac_by_path.at(ctx.parent.path);
    std::array<double, 5> scores = scorer.score_step(sc);
    ac_by_path[ctx.node_path] = dims::update_ac(sc.ac_prev, scores[0]);

    mctsp::NodeEvaluation eval;
    eval.scores = dims::StepScores{masked_reward(scores, cfg.mask), 0.0, 0.0, 0, 0};
    eval.len_mean = static_cast<double>(env.min_steps_capped(ctx.state));
    return eval;
  };

  mctsp::SearchResult res =
      mctsp::search_with(env, budget, adapter, static_cast<std::size_t>(cfg.n_candidates));
  taskenv::EpisodeState st = taskenv::initial_episode(env);
  for (const taskenv::ActionId& id : mctsp::greedy_path(res)) {
    if (taskenv::is_terminal(env, st)) break;
    st = taskenv::step(env, st, id);
  }
  return taskenv::is_success(env, st);
}

}  // namespace detail

struct RateRecord {
  int successes = 0;
  int episodes = 0;
  double rate = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

/// Wilson 95% binomial interval.
inline RateRecord binomial_rate(int successes, int episodes) {
  if (episodes < 1) throw Error("binomial_rate: episodes must be >= 1");
  if (successes < 0 || successes > episodes) throw Error("binomial_rate: successes out of range");
  RateRecord rec;
  rec.successes = successes;
  rec.episodes = episodes;
  double n = static_cast<double>(episodes);
  double p = static_cast<double>(successes) / n;
  rec.rate = p;
  const double z = 1.959963984540054;
  double z2 = z * z;
  double denom = 1.0 + z2 / n;
  double center = (p + z2 / (2.0 * n)) / denom;
  double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
  rec.ci_low = std::max(0.0, center - half);
  rec.ci_high = std::min(1.0, center + half);
  return rec;
}

/// Runs cfg.episodes guided episodes per environment; success pooled over all
/// of them. Episodes are independent; per-episode streams derive from
/// (seed, env id, episode index), so worker count never changes results.
inline RateRecord run_guided(const std::vector<taskenv::TaskGraph>& envs,
                             const AgentPolicy& policy, ActionScorer& scorer,
                             const GuidanceConfig& cfg, std::size_t workers = 1) {
  if (envs.empty()) throw InputError("run_guided: no environments");
  policy.check();
  cfg.check();
  for (const auto& env : envs) scorer.prepare(env);

  std::size_t total = envs.size() * static_cast<std::size_t>(cfg.episodes);
  std::vector<char> success(total, 0);
  parallel_for(total, workers, [&](std::size_t idx) {
    const taskenv::TaskGraph& env = envs[idx / cfg.episodes];
    int episode = static_cast<int>(idx % cfg.episodes);
    std::string label = "guide:" + env.id + ":" + std::to_string(episode);
    if (cfg.mode == GuideMode::Rerank) {
      std::mt19937_64 rng = seeded_engine(hash_mix(cfg.seed, policy.rng_seed), label);
      success[idx] = detail::run_rerank_episode(env, policy, scorer, cfg, rng) ? 1 : 0;
    } else {
      std::uint64_t episode_seed = hash_mix(hash_mix(cfg.seed, policy.rng_seed), fnv1a64(label));
      success[idx] = detail::run_mcts_episode(env, scorer, cfg, episode_seed) ? 1 : 0;
    }
  });

  int hits = 0;
  for (char s : success) hits += s;
  return binomial_rate(hits, static_cast<int>(total));
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

struct ScalingPoint {
  int n = 0;
  RateRecord record;
};

inline std::vector<ScalingPoint> scaling_sweep(const std::vector<taskenv::TaskGraph>& envs,
                                               const AgentPolicy& policy, ActionScorer& scorer,
                                               GuidanceConfig cfg, const std::vector<int>& n_values,
                                               std::size_t workers = 1) {
  if (n_values.empty()) throw ConfigError("scaling sweep: no N values");
  std::vector<ScalingPoint> out;
  for (int n : n_values) {
    cfg.n_candidates = n;
    out.push_back({n, run_guided(envs, policy, scorer, cfg, workers)});
  }
  return out;
}

inline std::string scaling_csv(const std::vector<ScalingPoint>& points) {
  std::string out = "n,successes,episodes,rate,ci_low,ci_high\n";
  for (const auto& pt : points) {
    out += std::to_string(pt.n) + "," + std::to_string(pt.record.successes) + "," +
           std::to_string(pt.record.episodes) + "," + fmt_fixed(pt.record.rate, 6) + "," +
           fmt_fixed(pt.record.ci_low, 6) + "," + fmt_fixed(pt.record.ci_high, 6) + "\n";
  }
  return out;
}

struct AblationRow {
  DimMask mask{};
  std::string label;
  RateRecord record;
};

/// Success rate per dimension mask; the full-mask row is emitted last.
inline std::vector<AblationRow> ablation_sweep(const std::vector<taskenv::TaskGraph>& envs,
                                               const AgentPolicy& policy, ActionScorer& scorer,
                                               GuidanceConfig cfg,
                                               const std::vector<DimMask>& masks,
                                               std::size_t workers = 1) {
  if (masks.empty()) throw ConfigError("ablation sweep: no masks");
  std::vector<AblationRow> partial, full;
  for (const DimMask& mask : masks) {
    cfg.mask = mask;
    AblationRow row{mask, mask_label(mask), run_guided(envs, policy, scorer, cfg, workers)};
    (is_full_mask(mask) ? full : partial).push_back(std::move(row));
  }
  for (auto& row : full) partial.push_back(std::move(row));
  return partial;
}

inline std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::string out = "mask,rate,ci_low,ci_high\n";
  for (const auto& row : rows) {
    out += row.label + "," + fmt_fixed(row.record.rate, 6) + "," +
           fmt_fixed(row.record.ci_low, 6) + "," + fmt_fixed(row.record.ci_high, 6) + "\n";
  }
  return out;
}

}  // namespace prm::guide
