#pragma once

#include <array>
#include <cmath>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "prm/collect.hpp"
#include "prm/common.hpp"
#include "prm/judge.hpp"
#include "prm/pairs.hpp"
#include "prm/trainer.hpp"

namespace prm::evalbench {

enum class Choice { X, Y, TIE };

// ---------------------------------------------------------------------------
// Scorers
// ---------------------------------------------------------------------------

/**
 * Scores one side of a preference pair under its evaluation type. choose()
 * defaults to comparing the two scalar scores; the pairwise baseline judge
 * overrides it because it never produces scalars.
 */
class RewardScorer {
 public:
  virtual ~RewardScorer() = default;
  virtual std::string name() const = 0;
  virtual double score(const pairs::PreferencePair& p, bool side_x) = 0;

  virtual Choice choose(const pairs::PreferencePair& p) {
    double sx = score(p, true);
    double sy = score(p, false);
    if (std::abs(sx - sy) <= tie_epsilon) return Choice::TIE;
    return sx > sy ? Choice::X : Choice::Y;
  }

  double tie_epsilon = 1e-9;
};

/// Scores from the trained reward model: dimension component for H/OS/E/TR/C,
/// scalarized reward for Tot, mean scalarized reward over steps for Traj.
class TrainedScorer final : public RewardScorer {
 public:
  explicit TrainedScorer(trainer::RewardModelParams params) : params_(std::move(params)) {
    params_.check();
  }

  std::string name() const override { return "trained"; }

  double score(const pairs::PreferencePair& p, bool side_x) override {
    const pairs::CandidatePayload& cand = side_x ? p.x : p.y;
    if (p.type == pairs::EvalType::Traj) {
      const auto& traj = std::get<pairs::CandidateTrajectory>(cand);
      if (traj.actions.empty()) throw InputError("trained scorer: empty candidate trajectory");
      double total = 0.0;
      std::vector<std::string> prefix;
      for (const auto& act : traj.actions) {
        total += trainer::scalar_reward(params_, trainer::step_prompt(p.instruction, p.observation, prefix), act);
        prefix.push_back(act);
      }
      return total / static_cast<double>(traj.actions.size());
    }
    const auto& act = std::get<pairs::CandidateAction>(cand);
    std::string x = trainer::step_prompt(p.instruction, p.observation, p.trajectory);
    if (p.type == pairs::EvalType::Tot) return trainer::scalar_reward(params_, x, act.text);
    std::array<double, 5> dims = trainer::predict_dims(params_, x, act.text);
    return dims[static_cast<std::size_t>(p.type)];
  }

  const trainer::RewardModelParams& params() const { return params_; }

 private:
  trainer::RewardModelParams params_;
};

/// Reads the ground-truth scores carried in the pair payloads; reproduces the
/// labels by construction. `invert` flips every score (negative control).
class OracleScorer final : public RewardScorer {
 public:
  explicit OracleScorer(pairs::DimensionWeights weights, bool invert = false)
      : weights_(weights), invert_(invert) {
    weights_.check();
  }

  std::string name() const override { return invert_ ? "oracle-inverted" : "oracle"; }

  double score(const pairs::PreferencePair& p, bool side_x) override {
    double s = pairs::candidate_score(side_x ? p.x : p.y, p.type, weights_);
    return invert_ ? -s : s;
  }

 private:
  pairs::DimensionWeights weights_;
  bool invert_;
};

/// Coin-flip control: per-(pair, side) deterministic uniform scores.
class UniformRandomScorer final : public RewardScorer {
 public:
  explicit UniformRandomScorer(std::uint64_t seed) : seed_(seed) {}

  std::string name() const override { return "random"; }

  double score(const pairs::PreferencePair& p, bool side_x) override {
    std::mt19937_64 rng = seeded_engine(seed_, p.id + (side_x ? "#x" : "#y"));
    return rand_unit(rng);
  }

 private:
  std::uint64_t seed_;
};

/// Candidate text for the pairwise judge prompt: the action itself, or the
/// step-rendered trajectory for Traj pairs.
inline std::string candidate_prompt_text(const pairs::CandidatePayload& cand) {
  if (const auto* act = std::get_if<pairs::CandidateAction>(&cand)) return act->text;
  return prompts::render_trajectory(std::get<pairs::CandidateTrajectory>(cand).actions);
}

/// First standalone X or Y token in a judge response body.
inline std::optional<char> parse_choice_token(const std::string& body) {
  for (std::size_t i = 0; i < body.size(); ++i) {
    char ch = body[i];
    if (ch != 'X' && ch != 'Y') continue;
    bool left_ok = i == 0 || !std::isalnum(static_cast<unsigned char>(body[i - 1]));
    bool right_ok = i + 1 >= body.size() || !std::isalnum(static_cast<unsigned char>(body[i + 1]));
    if (left_ok && right_ok) return ch;
  }
  return std::nullopt;
}

inline const char* type_block(pairs::EvalType t) {
  switch (t) {
    case pairs::EvalType::H: return prompts::kBlockHelpfulness;
    case pairs::EvalType::OS: return prompts::kBlockOddsOfSuccess;
    case pairs::EvalType::E: return prompts::kBlockEfficiency;
    case pairs::EvalType::TR: return prompts::kBlockTaskRelevance;
    case pairs::EvalType::C: return prompts::kBlockCoherence;
    case pairs::EvalType::Tot: return prompts::kBlockTotal;
    case pairs::EvalType::Traj: return prompts::kBlockTrajectory;
  }
  throw Error("type_block: unknown evaluation type");
}

/**
 * Pairwise judge baseline: renders the two-action evaluation prompt, queries
 * the remote endpoint, and maps the response token. The prompt instructs the
 * judge to output "Y" when ACTION_X is better and "X" when ACTION_Y is
 * better, so the mapping is inverted on purpose.
 */
class BaselineJudgeScorer final : public RewardScorer {
 public:
  explicit BaselineJudgeScorer(std::shared_ptr<judge::RemoteJudge> client)
      : client_(std::move(client)) {
    if (!client_) throw Error("baseline judge scorer requires a remote judge client");
  }

  std::string name() const override { return "judge"; }

  double score(const pairs::PreferencePair&, bool) override {
    throw Error("baseline judge produces pairwise choices, not scalar scores");
  }

  Choice choose(const pairs::PreferencePair& p) override {
    std::string prompt = prompts::render_pairwise_prompt(
        type_block(p.type), p.instruction, p.observation, p.trajectory, p.step_idx,
        candidate_prompt_text(p.x), candidate_prompt_text(p.y));
    std::string body = client_->post_prompt(prompt, pairs::type_name(p.type), fnv1a64(p.id));
    auto token = parse_choice_token(body);
    if (!token) throw JudgeError("unparseable pairwise judge response: " + body);
    return *token == 'Y' ? Choice::X : Choice::Y;
  }

 private:
  std::shared_ptr<judge::RemoteJudge> client_;
};

// ---------------------------------------------------------------------------
// Accuracy evaluation
// ---------------------------------------------------------------------------

struct AccuracyReport {
  std::string scorer;
  std::map<pairs::EvalType, int> n_per_type;
  std::map<pairs::EvalType, int> correct_per_type;
  double avg = 0.0;  // unweighted mean over the types present

  bool has_type(pairs::EvalType t) const { return n_per_type.count(t) != 0; }

  double accuracy(pairs::EvalType t) const {
    auto it = n_per_type.find(t);
    if (it == n_per_type.end() || it->second == 0) {
      throw InputError("accuracy: no pairs of type " + std::string(pairs::type_name(t)));
    }
    return static_cast<double>(correct_per_type.at(t)) / static_cast<double>(it->second);
  }
};

/// Pairwise accuracy per evaluation type; ties count as incorrect.
inline AccuracyReport evaluate(RewardScorer& scorer, const pairs::PairSet& ps,
                               std::size_t workers = 1) {
  if (ps.pairs.empty()) throw InputError("evaluate: empty pair set");
  std::vector<Choice> choices(ps.pairs.size(), Choice::TIE);
  parallel_for(ps.pairs.size(), workers,
               [&](std::size_t i) { choices[i] = scorer.choose(ps.pairs[i]); });

  AccuracyReport rep;
  rep.scorer = scorer.name();
  for (std::size_t i = 0; i < ps.pairs.size(); ++i) {
    const auto& p = ps.pairs[i];
    rep.n_per_type[p.type] += 1;
    int& correct = rep.correct_per_type[p.type];
    if ((choices[i] == Choice::X && p.label == 'X') ||
        (choices[i] == Choice::Y && p.label == 'Y')) {
      ++correct;
    }
  }
  double total = 0.0;
  for (const auto& [t, n] : rep.n_per_type) {
    (void)n;
    total += rep.accuracy(t);
  }
  rep.avg = total / static_cast<double>(rep.n_per_type.size());
  return rep;
}

/// Accuracy table, one row per report: columns H, OS, E, TR, C, Tot, Traj, Avg.
inline std::string render_markdown(const std::vector<AccuracyReport>& reports) {
  std::string out = "| Scorer | H | OS | E | TR | C | Tot | Traj | Avg |\n";
  out += "|---|---|---|---|---|---|---|---|---|\n";
  for (const auto& rep : reports) {
    out += "| " + rep.scorer + " |";
    for (pairs::EvalType t : pairs::kAllTypes) {
      out += rep.has_type(t) ? " " + fmt_fixed(rep.accuracy(t), 4) + " |" : " - |";
    }
    out += " " + fmt_fixed(rep.avg, 4) + " |\n";
  }
  return out;
}

inline std::string render_csv(const std::vector<AccuracyReport>& reports) {
  std::string out = "scorer,H,OS,E,TR,C,Tot,Traj,Avg\n";
  for (const auto& rep : reports) {
    out += rep.scorer;
    for (pairs::EvalType t : pairs::kAllTypes) {
      out += rep.has_type(t) ? "," + fmt_fixed(rep.accuracy(t), 6) : ",";
    }
    out += "," + fmt_fixed(rep.avg, 6) + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dimension correlation study
// ---------------------------------------------------------------------------

struct CorrelationMatrix {
  std::array<std::array<double, 5>, 5> r{};
  std::array<std::array<bool, 5>, 5> defined{};
  std::size_t n = 0;
};

/// Pearson correlations between the five dimensions over score rows.
/// Constant dimensions yield undefined off-diagonal entries, never NaN.
inline CorrelationMatrix correlation_matrix(const std::vector<std::array<double, 5>>& rows) {
  if (rows.size() < 3) throw InputError("correlation_matrix: need at least 3 samples");
  CorrelationMatrix out;
  out.n = rows.size();
  double n = static_cast<double>(rows.size());

  std::array<double, 5> mean{};
  for (const auto& row : rows) {
    for (int d = 0; d < 5; ++d) mean[d] += row[d];
  }
  for (int d = 0; d < 5; ++d) mean[d] /= n;

  std::array<std::array<double, 5>, 5> cov{};
  for (const auto& row : rows) {
    for (int a = 0; a < 5; ++a) {
      double da = row[a] - mean[a];
      for (int b = a; b < 5; ++b) cov[a][b] += da * (row[b] - mean[b]);
    }
  }
  std::array<bool, 5> constant{};
  for (int d = 0; d < 5; ++d) constant[d] = cov[d][d] <= 0.0;

  for (int a = 0; a < 5; ++a) {
    out.r[a][a] = 1.0;
    out.defined[a][a] = true;
    for (int b = a + 1; b < 5; ++b) {
      if (constant[a] || constant[b]) continue;
      double r = cov[a][b] / std::sqrt(cov[a][a] * cov[b][b]);
      r = std::max(-1.0, std::min(1.0, r));
      out.r[a][b] = out.r[b][a] = r;
      out.defined[a][b] = out.defined[b][a] = true;
    }
  }
  return out;
}

inline CorrelationMatrix correlation_matrix(const collect::Dataset& ds) {
  std::vector<std::array<double, 5>> rows;
  for (const collect::AnnotatedStep* st : ds.all_steps()) rows.push_back(st->scores.as_array());
  return correlation_matrix(rows);
}

inline std::string correlation_csv(const CorrelationMatrix& m) {
  std::string out = "dim,H,OS,E,TR,C\n";
  for (int a = 0; a < 5; ++a) {
    out += dims::kDimNames[a];
    for (int b = 0; b < 5; ++b) {
      out += ",";
      out += m.defined[a][b] ? fmt_fixed(m.r[a][b], 6) : "UNDEFINED";
    }
    out += "\n";
  }
  return out;
}

}  // namespace prm::evalbench
