#pragma once

#include <array>
#include <cctype>
#include <cmath>
#include <cstring>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "prm/collect.hpp"
#include "prm/common.hpp"
#include "prm/pairs.hpp"
#include "prm/prompts.hpp"

namespace prm::trainer {

// ---------------------------------------------------------------------------
// Dense matrix helpers (desk-scale; no external linear algebra needed)
// ---------------------------------------------------------------------------

struct Mat {
  std::size_t rows = 0, cols = 0;
  std::vector<double> a;

  Mat() = default;
  Mat(std::size_t r, std::size_t c) : rows(r), cols(c), a(r * c, 0.0) {}

  double& at(std::size_t i, std::size_t j) { return a[i * cols + j]; }
  double at(std::size_t i, std::size_t j) const { return a[i * cols + j]; }
};

/// Solves A·X = B for symmetric positive definite A via Cholesky.
/// Throws when A is not positive definite (singular normal equations).
inline Mat cholesky_solve(Mat A, const Mat& B) {
  if (A.rows != A.cols || A.rows != B.rows) throw Error("cholesky_solve: shape mismatch");
  std::size_t n = A.rows;
  // in-place lower factor
  for (std::size_t j = 0; j < n; ++j) {
    double diag = A.at(j, j);
    for (std::size_t k = 0; k < j; ++k) diag -= A.at(j, k) * A.at(j, k);
    if (!(diag > 0.0) || !std::isfinite(diag)) {
      throw Error("normal equations are singular; rerun with ridge lambda > 0");
    }
    double root = std::sqrt(diag);
    A.at(j, j) = root;
    for (std::size_t i = j + 1; i < n; ++i) {
      double v = A.at(i, j);
      for (std::size_t k = 0; k < j; ++k) v -= A.at(i, k) * A.at(j, k);
      A.at(i, j) = v / root;
    }
  }
  Mat X(B.rows, B.cols);
  for (std::size_t c = 0; c < B.cols; ++c) {
    // forward: L y = b
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      double v = B.at(i, c);
      for (std::size_t k = 0; k < i; ++k) v -= A.at(i, k) * y[k];
      y[i] = v / A.at(i, i);
    }
    // backward: L^T x = y
    for (std::size_t ii = n; ii > 0; --ii) {
      std::size_t i = ii - 1;
      double v = y[i];
      for (std::size_t k = i + 1; k < n; ++k) v -= A.at(k, i) * X.at(k, c);
      X.at(i, c) = v / A.at(i, i);
    }
  }
  return X;
}

// ---------------------------------------------------------------------------
// Feature extractor (frozen backbone stand-in)
// ---------------------------------------------------------------------------

enum class ExtractorKind { HashedNgram, Custom };

/**
 * Deterministic hashed bag of word 1/2-grams, L2-normalized. Stands in for a
 * frozen language-model backbone: everything downstream only assumes a fixed
 * map from text to a d-vector.
 */
struct FeatureExtractor {
  ExtractorKind kind = ExtractorKind::HashedNgram;
  std::size_t d = 256;

  std::vector<double> extract(const std::string& x,
                              const std::optional<std::string>& y = std::nullopt) const {
    if (kind != ExtractorKind::HashedNgram) {
      throw Error("extract: only the hashed n-gram extractor is implemented");
    }
    std::vector<double> out(d, 0.0);
    std::string text = y ? x + "\n" + *y : x;
    std::vector<std::string> tokens;
    std::string cur;
    for (char ch : text) {
      unsigned char u = static_cast<unsigned char>(ch);
      if (std::isalnum(u)) {
        cur += static_cast<char>(std::tolower(u));
      } else if (!cur.empty()) {
        tokens.push_back(std::move(cur));
        cur.clear();
      }
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));

    auto bump = [&](const std::string& gram) { out[fnv1a64(gram) % d] += 1.0; };
    for (const auto& t : tokens) bump(t);
    for (std::size_t i = 0; i + 1 < tokens.size(); ++i) bump(tokens[i] + "_" + tokens[i + 1]);

    double norm_sq = 0.0;
    for (double v : out) norm_sq += v * v;
    if (norm_sq > 0.0) {
      double inv = 1.0 / std::sqrt(norm_sq);
      for (double& v : out) v *= inv;
    }
    return out;
  }

  nlohmann::ordered_json config_json() const {
    return {{"lowercase", true}, {"ngrams", {1, 2}}};
  }
};

// ---------------------------------------------------------------------------
// Model parameters
// ---------------------------------------------------------------------------

struct RegressionHead {
  Mat W;  // d x 5
};

struct GatingNet {
  std::size_t k = 32;
  std::string activation = "tanh";
  Mat w1;                   // d x k
  std::vector<double> b1;   // k
  Mat w2;                   // k x 5
  std::vector<double> b2;   // 5
};

inline GatingNet make_gating(std::size_t d, std::size_t k, std::uint64_t seed) {
  GatingNet g;
  g.k = k;
  g.w1 = Mat(d, k);
  g.b1.assign(k, 0.0);
  g.w2 = Mat(k, 5);
  g.b2.assign(5, 0.0);
  std::mt19937_64 rng = seeded_engine(seed, "gating-init");
  for (double& v : g.w1.a) v = (rand_unit(rng) - 0.5) * 0.1;
  for (double& v : g.w2.a) v = (rand_unit(rng) - 0.5) * 0.1;
  return g;
}

struct RewardModelParams {
  FeatureExtractor extractor;
  RegressionHead head;
  GatingNet gate;
  std::string version = kVersion;
  nlohmann::json manifest = nlohmann::json::object();

  void check() const {
    if (head.W.rows != extractor.d || head.W.cols != 5) {
      throw InputError("model: regression head shape does not match extractor dimension");
    }
    if (gate.w1.rows != extractor.d || gate.w1.cols != gate.k || gate.b1.size() != gate.k ||
        gate.w2.rows != gate.k || gate.w2.cols != 5 || gate.b2.size() != 5) {
      throw InputError("model: gating network shapes are inconsistent");
    }
  }
};

// ---------------------------------------------------------------------------
// Inference
// ---------------------------------------------------------------------------

inline std::array<double, 5> predict_dims_from_features(const RewardModelParams& p,
                                                        const std::vector<double>& h) {
  std::array<double, 5> r{};
  for (std::size_t i = 0; i < p.head.W.rows; ++i) {
    double hi = h[i];
    if (hi == 0.0) continue;
    for (std::size_t j = 0; j < 5; ++j) r[j] += p.head.W.at(i, j) * hi;
  }
  return r;
}

/// r̂ = Wᵀ·f(x ⊕ y): the five predicted dimension scores.
inline std::array<double, 5> predict_dims(const RewardModelParams& p, const std::string& x,
                                          const std::string& y) {
  return predict_dims_from_features(p, p.extractor.extract(x, y));
}

inline std::array<double, 5> softmax5(const std::array<double, 5>& u) {
  double mx = u[0];
  for (double v : u) mx = std::max(mx, v);
  std::array<double, 5> g{};
  double total = 0.0;
  for (int i = 0; i < 5; ++i) {
    g[i] = std::exp(u[i] - mx);
    total += g[i];
  }
  for (int i = 0; i < 5; ++i) g[i] /= total;
  return g;
}

namespace detail {

struct GateForward {
  std::vector<double> a;        // hidden activations, size k
  std::array<double, 5> u{};    // logits
  std::array<double, 5> g{};    // softmax output
};

inline GateForward gate_forward(const GatingNet& gate, const std::vector<double>& h) {
  GateForward f;
  f.a.assign(gate.k, 0.0);
  for (std::size_t i = 0; i < gate.w1.rows; ++i) {
    double hi = h[i];
    if (hi == 0.0) continue;
    for (std::size_t j = 0; j < gate.k; ++j) f.a[j] += gate.w1.at(i, j) * hi;
  }
  for (std::size_t j = 0; j < gate.k; ++j) f.a[j] = std::tanh(f.a[j] + gate.b1[j]);
  for (int j = 0; j < 5; ++j) f.u[j] = gate.b2[j];
  for (std::size_t i = 0; i < gate.k; ++i) {
    double ai = f.a[i];
    for (int j = 0; j < 5; ++j) f.u[j] += gate.w2.at(i, j) * ai;
  }
  f.g = softmax5(f.u);
  return f;
}

}  // namespace detail

/// Prompt-conditioned mixing coefficients (softmax; responses never enter).
inline std::array<double, 5> gate_coefficients(const RewardModelParams& p, const std::string& x) {
  std::vector<double> h = p.extractor.extract(x);
  return detail::gate_forward(p.gate, h).g;
}

/// Scalarized reward R = g_φ(x) · r̂(x, y).
inline double scalar_reward(const RewardModelParams& p, const std::string& x, const std::string& y) {
  std::array<double, 5> g = gate_coefficients(p, x);
  std::array<double, 5> r = predict_dims(p, x, y);
  double out = 0.0;
  for (int i = 0; i < 5; ++i) out += g[i] * r[i];
  return out;
}

/// Bradley-Terry negative log-likelihood, overflow-free.
inline double bt_loss(double r_chosen, double r_rejected) {
  if (!std::isfinite(r_chosen) || !std::isfinite(r_rejected)) {
    throw Error("bt_loss: non-finite inputs");
  }
  double delta = r_chosen - r_rejected;
  // log(1 + exp(-delta)) without overflow for very negative delta
  if (delta > 0.0) return std::log1p(std::exp(-delta));
  return -delta + std::log1p(std::exp(delta));
}

// ---------------------------------------------------------------------------
// Stage 1: regression head (closed form)
// ---------------------------------------------------------------------------

struct RegressionExample {
  std::string x;
  std::string y;
  std::array<double, 5> r{};
};

struct FitRegressionResult {
  RegressionHead head;
  double loss = 0.0;  // mean squared five-dimensional error of the fit
};

inline FitRegressionResult fit_regression(const std::vector<RegressionExample>& examples,
                                          const FeatureExtractor& fe, double lambda) {
  if (examples.empty()) throw InputError("fit_regression: no training examples");
  if (lambda < 0.0) throw ConfigError("fit_regression: lambda must be >= 0");
  std::size_t d = fe.d;
  std::size_t n = examples.size();

  std::vector<std::vector<double>> feats;
  feats.reserve(n);
  for (const auto& ex : examples) feats.push_back(fe.extract(ex.x, ex.y));

  Mat A(d, d);
  Mat B(d, 5);
  double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t e = 0; e < n; ++e) {
    const auto& h = feats[e];
    for (std::size_t i = 0; i < d; ++i) {
      double hi = h[i];
      if (hi == 0.0) continue;
      double w = hi * inv_n;
      for (std::size_t j = i; j < d; ++j) A.at(i, j) += w * h[j];
      for (std::size_t j = 0; j < 5; ++j) B.at(i, j) += w * examples[e].r[j];
    }
  }
  for (std::size_t i = 0; i < d; ++i) {
    A.at(i, i) += lambda;
    for (std::size_t j = i + 1; j < d; ++j) A.at(j, i) = A.at(i, j);
  }

  FitRegressionResult out;
  out.head.W = cholesky_solve(std::move(A), B);

  double loss = 0.0;
  RewardModelParams probe;
  probe.extractor = fe;
  probe.head = out.head;
  for (std::size_t e = 0; e < n; ++e) {
    std::array<double, 5> pred = predict_dims_from_features(probe, feats[e]);
    for (int j = 0; j < 5; ++j) {
      double diff = pred[j] - examples[e].r[j];
      loss += diff * diff;
    }
  }
  out.loss = loss * inv_n;
  return out;
}

// ---------------------------------------------------------------------------
// Stage 2: gating network (Bradley-Terry, full-batch gradient descent)
// ---------------------------------------------------------------------------

struct TrainPair {
  std::string x;
  std::string chosen;
  std::string rejected;
};

struct GateGradient {
  Mat dw1;
  std::vector<double> db1;
  Mat dw2;
  std::vector<double> db2;
  double loss = 0.0;
};

namespace detail {

struct PreparedPair {
  std::vector<double> hx;       // extract(x), gate input
  std::array<double, 5> delta;  // r̂(x, chosen) − r̂(x, rejected)
};

inline std::vector<PreparedPair> prepare_pairs(const RewardModelParams& p,
                                               const std::vector<TrainPair>& pairs) {
  std::vector<PreparedPair> out;
  out.reserve(pairs.size());
  for (const auto& pr : pairs) {
    PreparedPair pp;
    pp.hx = p.extractor.extract(pr.x);
    std::array<double, 5> rc = predict_dims(p, pr.x, pr.chosen);
    std::array<double, 5> rr = predict_dims(p, pr.x, pr.rejected);
    for (int i = 0; i < 5; ++i) pp.delta[i] = rc[i] - rr[i];
    out.push_back(std::move(pp));
  }
  return out;
}

/// Mean bt_loss over prepared pairs and its analytic gradient w.r.t. φ.
inline GateGradient gate_gradient(const GatingNet& gate, const std::vector<PreparedPair>& pairs) {
  std::size_t d = gate.w1.rows;
  GateGradient grad;
  grad.dw1 = Mat(d, gate.k);
  grad.db1.assign(gate.k, 0.0);
  grad.dw2 = Mat(gate.k, 5);
  grad.db2.assign(5, 0.0);

  double inv_n = 1.0 / static_cast<double>(pairs.size());
  for (const auto& pp : pairs) {
    GateForward f = gate_forward(gate, pp.hx);
    double margin = 0.0;
    for (int i = 0; i < 5; ++i) margin += f.g[i] * pp.delta[i];
    grad.loss += bt_loss(margin, 0.0);

    // dL/dmargin = −σ(−margin)
    double dmargin = -1.0 / (1.0 + std::exp(margin));
    // softmax Jacobian applied to delta: dmargin/du_i = g_i (δ_i − g·δ)
    std::array<double, 5> du{};
    for (int i = 0; i < 5; ++i) du[i] = dmargin * f.g[i] * (pp.delta[i] - margin) * inv_n;

    for (int j = 0; j < 5; ++j) grad.db2[j] += du[j];
    std::vector<double> da(gate.k, 0.0);
    for (std::size_t i = 0; i < gate.k; ++i) {
      double ai = f.a[i];
      for (int j = 0; j < 5; ++j) {
        grad.dw2.at(i, j) += ai * du[j];
        da[i] += gate.w2.at(i, j) * du[j];
      }
    }
    for (std::size_t i = 0; i < gate.k; ++i) da[i] *= 1.0 - f.a[i] * f.a[i];  // tanh'
    for (std::size_t j = 0; j < gate.k; ++j) grad.db1[j] += da[j];
    for (std::size_t i = 0; i < d; ++i) {
      double hi = pp.hx[i];
      if (hi == 0.0) continue;
      for (std::size_t j = 0; j < gate.k; ++j) grad.dw1.at(i, j) += hi * da[j];
    }
  }
  grad.loss *= inv_n;
  return grad;
}

}  // namespace detail

struct FitGatingResult {
  GatingNet gate;
  std::vector<double> loss_trace;  // loss before each update
  double final_loss = 0.0;
};

/**
 * Stage 2: full-batch gradient descent on mean Bradley-Terry loss. Only the
 * gating parameters move; the extractor and regression head are read-only
 * here (the frozen-backbone contract, checksum-tested).
 */
inline FitGatingResult fit_gating(const RewardModelParams& p, const std::vector<TrainPair>& pairs,
                                  int epochs, double learning_rate, std::uint64_t /*seed*/ = 0) {
  if (pairs.empty()) throw InputError("fit_gating: no preference pairs");
  if (epochs < 0) throw ConfigError("fit_gating: epochs must be >= 0");
  if (!(learning_rate > 0.0)) throw ConfigError("fit_gating: learning rate must be positive");
  p.check();

  std::vector<detail::PreparedPair> prepared = detail::prepare_pairs(p, pairs);
  FitGatingResult out;
  out.gate = p.gate;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    GateGradient grad = detail::gate_gradient(out.gate, prepared);
    if (!std::isfinite(grad.loss)) {
      throw Error("fit_gating: non-finite loss at epoch " + std::to_string(epoch));
    }
    out.loss_trace.push_back(grad.loss);
    for (std::size_t i = 0; i < out.gate.w1.a.size(); ++i) {
      out.gate.w1.a[i] -= learning_rate * grad.dw1.a[i];
    }
    for (std::size_t i = 0; i < out.gate.b1.size(); ++i) {
      out.gate.b1[i] -= learning_rate * grad.db1[i];
    }
    for (std::size_t i = 0; i < out.gate.w2.a.size(); ++i) {
      out.gate.w2.a[i] -= learning_rate * grad.dw2.a[i];
    }
    for (std::size_t i = 0; i < out.gate.b2.size(); ++i) {
      out.gate.b2[i] -= learning_rate * grad.db2[i];
    }
  }
  out.final_loss = detail::gate_gradient(out.gate, prepared).loss;
  return out;
}

/// Max relative error between the analytic φ-gradient and central finite
/// differences (step 1e−5) of the mean bt_loss.
inline double grad_check(const RewardModelParams& p, const std::vector<TrainPair>& pairs) {
  if (pairs.empty()) throw InputError("grad_check: no pairs");
  p.check();
  std::vector<detail::PreparedPair> prepared = detail::prepare_pairs(p, pairs);
  GateGradient analytic = detail::gate_gradient(p.gate, prepared);

  GatingNet probe = p.gate;
  const double step = 1e-5;
  auto loss_at = [&]() { return detail::gate_gradient(probe, prepared).loss; };
  double max_rel = 0.0;
  auto check_param = [&](double& slot, double analytic_grad) {
    double saved = slot;
    slot = saved + step;
    double hi = loss_at();
    slot = saved - step;
    double lo = loss_at();
    slot = saved;
    double numeric = (hi - lo) / (2.0 * step);
    double scale = std::max({std::abs(analytic_grad), std::abs(numeric), 1e-8});
    double rel = std::abs(analytic_grad - numeric) / scale;
    if (std::abs(analytic_grad) < 1e-10 && std::abs(numeric) < 1e-10) rel = 0.0;
    max_rel = std::max(max_rel, rel);
  };
  for (std::size_t i = 0; i < probe.w1.a.size(); ++i) check_param(probe.w1.a[i], analytic.dw1.a[i]);
  for (std::size_t i = 0; i < probe.b1.size(); ++i) check_param(probe.b1[i], analytic.db1[i]);
  for (std::size_t i = 0; i < probe.w2.a.size(); ++i) check_param(probe.w2.a[i], analytic.dw2.a[i]);
  for (std::size_t i = 0; i < probe.b2.size(); ++i) check_param(probe.b2[i], analytic.db2[i]);
  return max_rel;
}

// ---------------------------------------------------------------------------
// Frozen-backbone checksums
// ---------------------------------------------------------------------------

inline std::uint64_t hash_doubles(const std::vector<double>& v, std::uint64_t h = 0x9e3779b97f4a7c15ull) {
  for (double x : v) {
    std::uint64_t bits;
    std::memcpy(&bits, &x, sizeof(bits));
    h = hash_mix(h, bits);
  }
  return h;
}

inline std::uint64_t extractor_checksum(const FeatureExtractor& fe) {
  std::uint64_t h = fnv1a64(fe.kind == ExtractorKind::HashedNgram ? "hashed_ngram" : "custom");
  h = hash_mix(h, fe.d);
  return hash_mix(h, fnv1a64(fe.config_json().dump()));
}

inline std::uint64_t head_checksum(const RegressionHead& head) { return hash_doubles(head.W.a); }

// ---------------------------------------------------------------------------
// Dataset glue
// ---------------------------------------------------------------------------

/// x for a step: the agent preamble plus instruction/observation/trajectory.
inline std::string step_prompt(const std::string& instruction, const std::string& observation,
                               const std::vector<std::string>& trajectory) {
  return prompts::render_model_prompt(instruction, observation, trajectory);
}

/// One regression example per distinct annotated step (shared trajectory
/// prefixes are deduplicated).
inline std::vector<RegressionExample> build_regression_examples(const collect::Dataset& ds) {
  std::vector<RegressionExample> out;
  std::set<std::uint64_t> seen;
  for (const collect::AnnotatedStep* st : ds.all_steps()) {
    std::uint64_t key = fnv1a64(st->env_id);
    key = hash_mix(key, static_cast<std::uint64_t>(st->step_idx));
    key = hash_mix(key, fnv1a64(join(st->trajectory, "\x1f")));
    key = hash_mix(key, fnv1a64(st->action.id));
    if (!seen.insert(key).second) continue;
    RegressionExample ex;
    ex.x = step_prompt(st->instruction, st->observation, st->trajectory);
    ex.y = st->action.text;
    ex.r = st->scores.as_array();
    out.push_back(std::move(ex));
  }
  return out;
}

/// Step-level preference pairs as (x, chosen, rejected) texts. Traj pairs are
/// skipped: the gate consumes one step context at a time.
inline std::vector<TrainPair> build_bt_examples(const pairs::PairSet& ps) {
  std::vector<TrainPair> out;
  for (const auto& p : ps.pairs) {
    if (p.type == pairs::EvalType::Traj) continue;
    const auto& xa = std::get<pairs::CandidateAction>(p.x);
    const auto& ya = std::get<pairs::CandidateAction>(p.y);
    TrainPair tp;
    tp.x = step_prompt(p.instruction, p.observation, p.trajectory);
    tp.chosen = p.label == 'X' ? xa.text : ya.text;
    tp.rejected = p.label == 'X' ? ya.text : xa.text;
    out.push_back(std::move(tp));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Model file
// ---------------------------------------------------------------------------

namespace detail {

inline nlohmann::ordered_json mat_to_json(const Mat& m) {
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < m.rows; ++i) {
    nlohmann::ordered_json row = nlohmann::ordered_json::array();
    for (std::size_t j = 0; j < m.cols; ++j) row.push_back(m.at(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Mat mat_from_json(const nlohmann::json& j, std::size_t rows, std::size_t cols,
                         const std::string& what) {
  if (!j.is_array() || j.size() != rows) {
    throw InputError("model: " + what + " must have " + std::to_string(rows) + " rows");
  }
  Mat m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    const auto& row = j[i];
    if (!row.is_array() || row.size() != cols) {
      throw InputError("model: " + what + " row " + std::to_string(i) + " must have " +
                       std::to_string(cols) + " entries");
    }
    for (std::size_t jj = 0; jj < cols; ++jj) m.at(i, jj) = row[jj].get<double>();
  }
  return m;
}

}  // namespace detail

inline void save_model(const RewardModelParams& p, const std::filesystem::path& path) {
  p.check();
  nlohmann::ordered_json j;
  j["version"] = p.version;
  j["extractor"] = {{"kind", "hashed_ngram"}, {"d", p.extractor.d}, {"config", p.extractor.config_json()}};
  j["W"] = detail::mat_to_json(p.head.W);
  j["gate"] = {{"k", p.gate.k},
               {"activation", p.gate.activation},
               {"w1", detail::mat_to_json(p.gate.w1)},
               {"b1", p.gate.b1},
               {"w2", detail::mat_to_json(p.gate.w2)},
               {"b2", p.gate.b2}};
  j["manifest"] = p.manifest;
  write_text_file(path, j.dump(2) + "\n");
}

inline RewardModelParams load_model(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw InputError("model file not found: " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw InputError(path.string() + ": " + e.what());
  }
  RewardModelParams p;
  try {
    p.version = j.at("version").get<std::string>();
    const auto& ej = j.at("extractor");
    if (ej.at("kind").get<std::string>() != "hashed_ngram") {
      throw InputError("model: unsupported extractor kind");
    }
    p.extractor.kind = ExtractorKind::HashedNgram;
    p.extractor.d = ej.at("d").get<std::size_t>();
    p.head.W = detail::mat_from_json(j.at("W"), p.extractor.d, 5, "W");
    const auto& gj = j.at("gate");
    p.gate.k = gj.at("k").get<std::size_t>();
    p.gate.activation = gj.at("activation").get<std::string>();
    if (p.gate.activation != "tanh") throw InputError("model: unsupported gate activation");
    p.gate.w1 = detail::mat_from_json(gj.at("w1"), p.extractor.d, p.gate.k, "gate.w1");
    p.gate.b1 = gj.at("b1").get<std::vector<double>>();
    p.gate.w2 = detail::mat_from_json(gj.at("w2"), p.gate.k, 5, "gate.w2");
    p.gate.b2 = gj.at("b2").get<std::vector<double>>();
    if (j.contains("manifest")) p.manifest = j["manifest"];
  } catch (const nlohmann::json::exception& e) {
    throw InputError(path.string() + ": " + e.what());
  }
  p.check();
  return p;
}

}  // namespace prm::trainer
