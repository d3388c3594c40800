#pragma once

#include <map>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "prm/collect.hpp"
#include "prm/common.hpp"
#include "prm/dims.hpp"

namespace prm::pairs {

enum class EvalType : int { H = 0, OS = 1, E = 2, TR = 3, C = 4, Tot = 5, Traj = 6 };

inline constexpr std::array<EvalType, 7> kAllTypes = {
    EvalType::H, EvalType::OS, EvalType::E, EvalType::TR,
    EvalType::C, EvalType::Tot, EvalType::Traj};

inline const char* type_name(EvalType t) {
  switch (t) {
    case EvalType::H: return "H";
    case EvalType::OS: return "OS";
    case EvalType::E: return "E";
    case EvalType::TR: return "TR";
    case EvalType::C: return "C";
    case EvalType::Tot: return "Tot";
    case EvalType::Traj: return "Traj";
  }
  throw Error("invalid evaluation type");
}

inline EvalType type_from_name(const std::string& name) {
  for (EvalType t : kAllTypes) {
    if (name == type_name(t)) return t;
  }
  throw ConfigError("unknown evaluation type: " + name);
}

struct DimensionWeights {
  double w_h = 1.0, w_os = 1.0, w_e = 1.0, w_tr = 1.0, w_c = 1.0;

  double sum() const { return w_h + w_os + w_e + w_tr + w_c; }

  void check() const {
    if (w_h < 0 || w_os < 0 || w_e < 0 || w_tr < 0 || w_c < 0) {
      throw ConfigError("dimension weights must be non-negative");
    }
    if (!(sum() > 0)) throw ConfigError("dimension weight sum must be positive");
  }
};

/// Tot: weighted mean of the five dimensions, normalized by the weight sum so
/// all-ones scores give 1 regardless of weighting.
inline double total_score(const dims::StepScores& s, const DimensionWeights& w) {
  w.check();
  return (w.w_h * s.h + w.w_os * s.os + w.w_e * s.e + w.w_tr * s.tr + w.w_c * s.c) / w.sum();
}

/// Traj: mean Tot over the trajectory's steps.
inline double trajectory_score(const collect::AnnotatedTrajectory& t, const DimensionWeights& w) {
  if (t.steps.empty()) throw InputError("trajectory_score: empty trajectory");
  double acc = 0.0;
  for (const auto& st : t.steps) acc += total_score(st.scores, w);
  return acc / static_cast<double>(t.steps.size());
}

// ---------------------------------------------------------------------------
// Pair payloads
// ---------------------------------------------------------------------------

/// Step-level candidate: one action with its ground-truth scores, so labels
/// stay re-checkable from the pair file alone.
struct CandidateAction {
  std::string id;
  std::string text;
  taskenv::TagSet tags;
  dims::StepScores scores;
};

/// Trajectory-level candidate.
struct CandidateTrajectory {
  std::vector<std::string> actions;
  double score = 0.0;  // trajectory_score under the build weights
};

using CandidatePayload = std::variant<CandidateAction, CandidateTrajectory>;

struct PreferencePair {
  std::string id;
  std::string instruction;
  std::string observation;
  int step_idx = 0;  // 0 for Traj pairs
  std::vector<std::string> trajectory;
  EvalType type = EvalType::H;
  CandidatePayload x;
  CandidatePayload y;
  char label = 'X';
  double margin = 0.0;
};

/// Ground-truth score of a candidate under an evaluation type.
inline double candidate_score(const CandidatePayload& c, EvalType t, const DimensionWeights& w) {
  if (t == EvalType::Traj) {
    if (!std::holds_alternative<CandidateTrajectory>(c)) {
      throw InputError("Traj pair carries a non-trajectory candidate");
    }
    return std::get<CandidateTrajectory>(c).score;
  }
  if (!std::holds_alternative<CandidateAction>(c)) {
    throw InputError("step-level pair carries a trajectory candidate");
  }
  const dims::StepScores& s = std::get<CandidateAction>(c).scores;
  switch (t) {
    case EvalType::H: return s.h;
    case EvalType::OS: return s.os;
    case EvalType::E: return s.e;
    case EvalType::TR: return s.tr;
    case EvalType::C: return s.c;
    case EvalType::Tot: return total_score(s, w);
    case EvalType::Traj: break;
  }
  throw Error("invalid evaluation type");
}

struct PairSet {
  std::vector<PreferencePair> pairs;
  DimensionWeights weights;
  double margin_min = 0.05;
  std::uint64_t seed = 0;
  std::map<std::string, int> counts;  // per type name
};

// ---------------------------------------------------------------------------
// Construction
// ---------------------------------------------------------------------------

namespace detail {

inline bool is_binary(EvalType t) { return t == EvalType::TR || t == EvalType::C; }

inline CandidateAction to_candidate(const taskenv::ActionRecord& a, const dims::StepScores& s) {
  return {a.id, a.text, a.tags, s};
}

/// Seeded X/Y coin per pair id; balanced but deterministic.
inline bool x_gets_first(std::uint64_t seed, const std::string& pair_id) {
  return (hash_mix(seed, fnv1a64(pair_id)) & 1ull) == 0;
}

}  // namespace detail

/**
 * Emits one preference pair per candidate pair and requested type whose
 * ground-truth score difference clears the margin (binary dimensions must
 * differ exactly by 1). Candidate groups are deduplicated across records so
 * a sibling set contributes once regardless of how many of its members sit
 * on retained trajectories.
 */
inline PairSet build_pairs(const collect::Dataset& ds, const std::set<EvalType>& types,
                           const DimensionWeights& w, double margin_min, std::uint64_t seed) {
  w.check();
  if (margin_min <= 0.0) throw ConfigError("margin_min must be positive");
  PairSet out;
  out.weights = w;
  out.margin_min = margin_min;
  out.seed = seed;
  for (EvalType t : kAllTypes) {
    if (types.count(t)) out.counts[type_name(t)] = 0;
  }

  std::map<std::string, std::map<std::string, int>> counters;  // env -> type -> next seq
  auto emit = [&](EvalType t, const std::string& env_id, const std::string& instruction,
                  const std::string& observation, int step_idx,
                  const std::vector<std::string>& trajectory, const CandidatePayload& better,
                  const CandidatePayload& worse, double margin) {
    int seq = counters[env_id][type_name(t)]++;
    PreferencePair p;
    p.id = env_id + ":" + type_name(t) + ":" + std::to_string(seq);
    p.instruction = instruction;
    p.observation = observation;
    p.step_idx = step_idx;
    p.trajectory = trajectory;
    p.type = t;
    p.margin = margin;
    if (detail::x_gets_first(seed, p.id)) {
      p.x = better;
      p.y = worse;
      p.label = 'X';
    } else {
      p.x = worse;
      p.y = better;
      p.label = 'Y';
    }
    out.pairs.push_back(std::move(p));
    out.counts[type_name(t)] += 1;
  };

  // Step-level types over deduplicated candidate groups.
  std::set<std::uint64_t> seen_groups;
  for (const collect::AnnotatedStep* st : ds.all_steps()) {
    std::vector<CandidateAction> cands;
    cands.push_back(detail::to_candidate(st->action, st->scores));
    for (const auto& [a, s] : st->siblings) cands.push_back(detail::to_candidate(a, s));
    std::sort(cands.begin(), cands.end(),
              [](const CandidateAction& a, const CandidateAction& b) { return a.id < b.id; });

    std::uint64_t key = fnv1a64(st->env_id);
    key = hash_mix(key, static_cast<std::uint64_t>(st->step_idx));
    key = hash_mix(key, fnv1a64(join(st->trajectory, "\x1f")));
    for (const auto& c : cands) key = hash_mix(key, fnv1a64(c.id));
    if (!seen_groups.insert(key).second) continue;
    if (cands.size() < 2) continue;

    for (EvalType t : {EvalType::H, EvalType::OS, EvalType::E, EvalType::TR, EvalType::C,
                       EvalType::Tot}) {
      if (!types.count(t)) continue;
      for (std::size_t i = 0; i < cands.size(); ++i) {
        for (std::size_t j = i + 1; j < cands.size(); ++j) {
          double si = candidate_score(cands[i], t, w);
          double sj = candidate_score(cands[j], t, w);
          double diff = si - sj;
          double adiff = std::abs(diff);
          if (detail::is_binary(t)) {
            if (adiff != 1.0) continue;
          } else {
            if (!(adiff >= margin_min)) continue;
          }
          const CandidateAction& better = diff > 0 ? cands[i] : cands[j];
          const CandidateAction& worse = diff > 0 ? cands[j] : cands[i];
          emit(t, st->env_id, st->instruction, st->observation, st->step_idx, st->trajectory,
               better, worse, adiff);
        }
      }
    }
  }

  // Trajectory-level pairs: same-task trajectory pairs ranked by Traj score.
  if (types.count(EvalType::Traj)) {
    std::map<std::string, std::vector<const collect::AnnotatedTrajectory*>> by_env;
    std::vector<std::string> env_order;
    for (const auto& t : ds.trajectories) {
      if (!by_env.count(t.env_id)) env_order.push_back(t.env_id);
      by_env[t.env_id].push_back(&t);
    }
    for (const auto& env_id : env_order) {
      const auto& trajs = by_env[env_id];
      for (std::size_t i = 0; i < trajs.size(); ++i) {
        for (std::size_t j = i + 1; j < trajs.size(); ++j) {
          double si = trajectory_score(*trajs[i], w);
          double sj = trajectory_score(*trajs[j], w);
          double diff = si - sj;
          double adiff = std::abs(diff);
          if (!(adiff >= margin_min)) continue;
          auto payload = [&](const collect::AnnotatedTrajectory& t, double score) {
            CandidateTrajectory c;
            for (const auto& st : t.steps) c.actions.push_back(st.action.text);
            c.score = score;
            return c;
          };
          const auto& better = diff > 0 ? *trajs[i] : *trajs[j];
          const auto& worse = diff > 0 ? *trajs[j] : *trajs[i];
          double sb = diff > 0 ? si : sj;
          double sw = diff > 0 ? sj : si;
          emit(EvalType::Traj, env_id, better.instruction, better.steps.front().observation, 0,
               {}, payload(better, sb), payload(worse, sw), adiff);
        }
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Wire format
// ---------------------------------------------------------------------------

namespace detail {

inline nlohmann::ordered_json payload_to_json(const CandidatePayload& c) {
  if (std::holds_alternative<CandidateAction>(c)) {
    const auto& a = std::get<CandidateAction>(c);
    return {{"id", a.id},
            {"text", a.text},
            {"tags", std::vector<std::string>(a.tags.begin(), a.tags.end())},
            {"scores", collect::detail::scores_to_json(a.scores)}};
  }
  const auto& t = std::get<CandidateTrajectory>(c);
  return {{"actions", t.actions}, {"score", t.score}};
}

inline CandidatePayload payload_from_json(const nlohmann::json& j, EvalType t) {
  if (t == EvalType::Traj) {
    CandidateTrajectory c;
    c.actions = j.at("actions").get<std::vector<std::string>>();
    c.score = j.at("score").get<double>();
    return c;
  }
  CandidateAction c;
  c.id = j.at("id").get<std::string>();
  c.text = j.at("text").get<std::string>();
  for (const auto& tag : j.at("tags")) c.tags.insert(tag.get<std::string>());
  c.scores = collect::detail::scores_from_json(j.at("scores"));
  return c;
}

}  // namespace detail

inline nlohmann::ordered_json pair_to_json(const PreferencePair& p) {
  nlohmann::ordered_json j;
  j["id"] = p.id;
  j["instruction"] = p.instruction;
  j["observation"] = p.observation;
  j["step_idx"] = p.step_idx;
  j["trajectory"] = p.trajectory;
  j["evaluation_type"] = type_name(p.type);
  j["action_x"] = detail::payload_to_json(p.x);
  j["action_y"] = detail::payload_to_json(p.y);
  j["label"] = std::string(1, p.label);
  j["margin"] = p.margin;
  return j;
}

inline PreferencePair pair_from_json(const nlohmann::json& j) {
  PreferencePair p;
  p.id = j.at("id").get<std::string>();
  p.instruction = j.at("instruction").get<std::string>();
  p.observation = j.at("observation").get<std::string>();
  p.step_idx = j.at("step_idx").get<int>();
  p.trajectory = j.at("trajectory").get<std::vector<std::string>>();
  p.type = type_from_name(j.at("evaluation_type").get<std::string>());
  p.x = detail::payload_from_json(j.at("action_x"), p.type);
  p.y = detail::payload_from_json(j.at("action_y"), p.type);
  std::string label = j.at("label").get<std::string>();
  if (label != "X" && label != "Y") throw InputError("pair label must be X or Y");
  p.label = label[0];
  p.margin = j.value("margin", 0.0);
  return p;
}

inline void write_pairs(const PairSet& ps, const std::filesystem::path& out_file) {
  std::string lines;
  for (const auto& p : ps.pairs) {
    lines += pair_to_json(p).dump();
    lines += '\n';
  }
  write_text_file(out_file, lines);
  nlohmann::ordered_json manifest;
  manifest["weights"] = {{"w_h", ps.weights.w_h},
                         {"w_os", ps.weights.w_os},
                         {"w_e", ps.weights.w_e},
                         {"w_tr", ps.weights.w_tr},
                         {"w_c", ps.weights.w_c}};
  manifest["margin_min"] = ps.margin_min;
  manifest["seed"] = ps.seed;
  manifest["counts"] = ps.counts;
  write_text_file(out_file.string() + ".manifest.json", manifest.dump(2) + "\n");
}

inline PairSet load_pairs(const std::filesystem::path& file) {
  if (!std::filesystem::exists(file)) throw InputError("pair file not found: " + file.string());
  PairSet ps;
  std::size_t line_no = 0;
  for (const auto& line : split(read_text_file(file), '\n')) {
    ++line_no;
    if (line.empty()) continue;
    try {
      ps.pairs.push_back(pair_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw InputError(file.string() + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  std::filesystem::path manifest_path = file.string() + ".manifest.json";
  if (std::filesystem::exists(manifest_path)) {
    nlohmann::json m = nlohmann::json::parse(read_text_file(manifest_path));
    if (m.contains("weights")) {
      ps.weights.w_h = m["weights"].value("w_h", 1.0);
      ps.weights.w_os = m["weights"].value("w_os", 1.0);
      ps.weights.w_e = m["weights"].value("w_e", 1.0);
      ps.weights.w_tr = m["weights"].value("w_tr", 1.0);
      ps.weights.w_c = m["weights"].value("w_c", 1.0);
    }
    ps.margin_min = m.value("margin_min", 0.05);
    ps.seed = m.value("seed", 0ull);
  }
  for (const auto& p : ps.pairs) ps.counts[type_name(p.type)] += 1;
  return ps;
}

}  // namespace prm::pairs
