// Acceptance gate: ten end-to-end checks over the library and its artifacts.
// Each check prints one [PASS]/[FAIL] line; the process exits nonzero if any
// check fails. Everything here is seeded, so a passing run is reproducible.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "prm/collect.hpp"
#include "prm/dims.hpp"
#include "prm/evalbench.hpp"
#include "prm/guide.hpp"
#include "prm/judge.hpp"
#include "prm/mctsp.hpp"
#include "prm/pairs.hpp"
#include "prm/prompts.hpp"
#include "prm/taskenv.hpp"
#include "prm/trainer.hpp"

namespace fs = std::filesystem;
using namespace prm;
using nlohmann::json;

namespace {

std::vector<std::string> g_notes;

void note(const std::string& line) { g_notes.push_back(line); }

void check(bool cond, const std::string& what) {
  if (!cond) throw std::runtime_error(what);
}

void check_near(double got, double want, double tol, const std::string& what) {
  if (!(std::abs(got - want) <= tol)) {
    std::ostringstream os;
    os << what << ": got " << got << ", want " << want << " +/- " << tol;
    throw std::runtime_error(os.str());
  }
}

fs::path source_root() { return fs::path(PRM_SOURCE_DIR); }

std::vector<taskenv::TaskGraph> all_fixtures() {
  return taskenv::load_directory(source_root() / "fixtures");
}

taskenv::TaskGraph fixture(const std::string& name) {
  return taskenv::TaskGraph::load_file(source_root() / "fixtures" / (name + ".json"));
}

fs::path work_dir() {
  static fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "prm_acceptance";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::vector<std::string> salad_corpus(std::size_t n, std::uint64_t seed) {
  static const char* vocab[] = {"tap",  "open", "type",   "save", "note", "search", "cart",
                                "item", "menu", "panel",  "dark", "send", "file",   "move",
                                "blue", "milk", "trash",  "mail", "home", "screen", "draft",
                                "font", "sort", "filter", "name"};
  auto rng = seeded_engine(seed, "salad");
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::string text;
    std::size_t words = 4 + rand_below(rng, 5);
    for (std::size_t w = 0; w < words; ++w) {
      if (w) text += ' ';
      text += vocab[rand_below(rng, std::size(vocab))];
    }
    out.push_back(text);
  }
  return out;
}

// -----------------------------------------------------------------------
// 1. Closed-form dimension values on the canonical three-step task
// -----------------------------------------------------------------------

void criterion_formulas() {
  // A three-step task solved on the shortest path: each step contributes 1/3
  // and the accumulated contribution walks 1/3 -> 2/3 -> 1.
  double ac = 0.0;
  for (int i = 1; i <= 3; ++i) {
    double h = dims::helpfulness({ac, 3, i, 1});
    check_near(h, 1.0 / 3.0, 1e-9, "three-step H at step " + std::to_string(i));
    ac = dims::update_ac(ac, h);
    check_near(ac, i / 3.0, 1e-9, "AC after step " + std::to_string(i));
  }
  check_near(dims::helpfulness({0.0, 4, 1, 0}), -0.25, 1e-9, "failing step H");
  check_near(dims::update_ac(0.1, -0.25), 0.0, 1e-9, "AC clips at zero");

  dims::RolloutBundle bundle;
  bundle.add(true, 2);
  bundle.add(true, 1);
  bundle.add(false, 6);
  check(dims::basic_reward(bundle) == 1, "basic reward with one success");
  check_near(dims::odds_of_success(bundle), 2.0 / 3.0, 1e-9, "odds of success 2/3");

  check_near(dims::efficiency(2.0, 1.0, 3.0), 1.0 / 3.0, 1e-9, "efficiency (2,1,3)");
  check_near(dims::efficiency(7.0, 4.0, 10.0), 0.3, 1e-9, "efficiency (7,4,10)");

  dims::StepScores s;
  s.h = dims::helpfulness({0.0, 3, 1, 1});
  s.os = dims::odds_of_success(bundle);
  s.e = dims::efficiency(2.0, 1.0, 3.0);
  s.tr = 1;
  s.c = 1;
  check_near(pairs::total_score(s, pairs::DimensionWeights{}), 2.0 / 3.0, 1e-9,
             "uniform total score");
  check_near(mctsp::composite_value(s), 10.0 / 3.0, 1e-9, "composite node value");

  // The search reproduces the same numbers from the environment alone.
  auto env = fixture("fixture_a_notes");
  auto j = collect::rule_judge_factory()(env);
  mctsp::SearchBudget budget;
  budget.iterations = 200;
  budget.rollouts_per_expansion = 16;
  budget.rng_seed = 1;
  auto res = mctsp::search(env, budget, *j);
  const mctsp::SearchNode* opener = nullptr;
  for (const auto& child : res.root->children) {
    if (child->action->id == "open_editor") opener = child.get();
  }
  check(opener != nullptr, "search expanded the optimal opener");
  check(opener->m_eff == 3, "optimal opener m_eff");
  check_near(opener->scores.h, 1.0 / 3.0, 1e-9, "searched H at step 1");
  check_near(opener->ac_along_path, 1.0 / 3.0, 1e-9, "searched AC at step 1");
  check(opener->scores.tr == 1 && opener->scores.c == 1, "searched TR/C at step 1");
  note("three-step H = 1/3 per step; AC = 1/3, 2/3, 1; failing-step H = -1/4");
}

// -----------------------------------------------------------------------
// 2. Exact oracles against exhaustive enumeration
// -----------------------------------------------------------------------

int exhaustive_min_steps(const taskenv::TaskGraph& env, const taskenv::StateId& from, int depth) {
  if (env.is_goal(from)) return 0;
  if (depth == 0) return -1;
  int best = -1;
  for (const auto& e : env.actions_at(from)) {
    int sub = exhaustive_min_steps(env, e.to, depth - 1);
    if (sub >= 0 && (best < 0 || sub + 1 < best)) best = sub + 1;
  }
  return best;
}

double exhaustive_walk_prob(const taskenv::TaskGraph& env, const taskenv::StateId& s, int budget) {
  if (env.is_goal(s)) return 1.0;
  if (budget <= 0) return 0.0;
  const auto& edges = env.actions_at(s);
  if (edges.empty()) return 0.0;
  double total = 0.0;
  for (const auto& e : edges) total += exhaustive_walk_prob(env, e.to, budget - 1);
  return total / static_cast<double>(edges.size());
}

void criterion_oracles() {
  int states_checked = 0;
  for (const auto& env : all_fixtures()) {
    guide::OracleActionScorer scorer;
    scorer.prepare(env);
    for (const auto& s : env.states()) {
      int brute = exhaustive_min_steps(env, s, env.horizon);
      auto exact = env.min_steps(s);
      if (brute >= 0) {
        check(exact.has_value() && *exact == brute,
              env.id + "/" + s + ": min_steps mismatches enumeration");
        check(env.min_steps_capped(s) == brute, env.id + "/" + s + ": capped min_steps");
      } else {
        check(!exact.has_value() || *exact > env.horizon,
              env.id + "/" + s + ": enumeration found no path but min_steps did");
        check(env.min_steps_capped(s) == env.horizon,
              env.id + "/" + s + ": unreachable states cap at the horizon");
      }
      for (int b = 0; b <= env.horizon; ++b) {
        double dp = scorer.success_probability(env, s, b);
        double brute_p = exhaustive_walk_prob(env, s, b);
        check(std::abs(dp - brute_p) <= 1e-12,
              env.id + "/" + s + ": success probability at budget " + std::to_string(b));
      }
      ++states_checked;
    }
  }

  // Odds-of-success bookkeeping equals direct counting.
  auto rng = seeded_engine(2, "os-count");
  for (int trial = 0; trial < 50; ++trial) {
    dims::RolloutBundle bundle;
    int n = 1 + static_cast<int>(rand_below(rng, 40));
    int wins = 0;
    for (int k = 0; k < n; ++k) {
      bool ok = rand_unit(rng) < 0.37;
      wins += ok ? 1 : 0;
      bundle.add(ok, ok ? static_cast<int>(rand_below(rng, 6)) + 1 : 8);
    }
    check_near(dims::odds_of_success(bundle), static_cast<double>(wins) / n, 1e-12,
               "odds vs direct count");
  }
  note("every state of every bundled environment checked (" + std::to_string(states_checked) +
       " states)");
}

// -----------------------------------------------------------------------
// 3. Search invariants and optimal-path recovery
// -----------------------------------------------------------------------

bool path_covers(const std::string& node, const std::string& leaf) {
  if (node.empty()) return true;
  if (leaf == node) return true;
  return leaf.size() > node.size() && leaf.compare(0, node.size(), node) == 0 &&
         leaf[node.size()] == '/';
}

void criterion_search() {
  auto envs = all_fixtures();

  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto& env = envs[seed % envs.size()];
    auto j = collect::rule_judge_factory()(env);
    mctsp::SearchBudget budget;
    budget.iterations = 60;
    budget.rollouts_per_expansion = 6;
    budget.rng_seed = seed;
    auto res = mctsp::search(env, budget, *j);

    int completed = budget.iterations - res.diagnostics.aborted_iterations;
    check(res.root->n == completed, env.id + ": root visits conserve iterations");
    check(static_cast<int>(res.backup_log.size()) == completed,
          env.id + ": one backup per completed iteration");

    // Replay the backup log independently: each node's visit count and value
    // must equal the sum over logged leaves passing through it.
    std::map<std::string, const mctsp::SearchNode*> by_path;
    std::function<void(const mctsp::SearchNode*)> index = [&](const mctsp::SearchNode* nd) {
      by_path[nd->path] = nd;
      for (const auto& ch : nd->children) index(ch.get());
    };
    index(res.root.get());

    for (const auto& [path, nd] : by_path) {
      int visits = 0;
      std::array<double, 5> value{};
      for (const auto& leaf_path : res.backup_log) {
        if (!path_covers(path, leaf_path)) continue;
        ++visits;
        auto leaf_scores = by_path.at(leaf_path)->scores.as_array();
        for (int k = 0; k < 5; ++k) value[k] += leaf_scores[k];
      }
      check(nd->n == visits, env.id + ": replayed visits at node '" + path + "'");
      for (int k = 0; k < 5; ++k) {
        check(std::abs(nd->value[k] - value[k]) <= 1e-9,
              env.id + ": replayed value at node '" + path + "'");
      }
    }
  }

  const std::map<std::string, std::vector<std::string>> optimal = {
      {"fixture_a_notes", {"open_editor", "type_text", "save_note"}},
      {"fixture_b_shop", {"open_search", "open_item", "add_to_cart", "checkout"}},
      {"fixture_c_settings", {"open_quick_panel", "toggle_dark_quick"}},
  };
  for (const auto& [name, want] : optimal) {
    auto env = fixture(name);
    int hits = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      auto j = collect::rule_judge_factory()(env);
      mctsp::SearchBudget budget;
      budget.iterations = 200;
      budget.rollouts_per_expansion = 8;
      budget.rng_seed = seed;
      auto res = mctsp::search(env, budget, *j);
      std::vector<std::string> got;
      for (const auto& id : mctsp::greedy_path(res)) {
        got.push_back(id);
        if (got.size() == want.size()) break;
      }
      if (got == want) ++hits;
    }
    note(name + ": greedy descent recovered the optimal path in " + std::to_string(hits) +
         "/100 seeded searches");
    check(hits >= 95, name + ": optimal-path recovery below 95/100 (" + std::to_string(hits) + ")");
  }
}

// -----------------------------------------------------------------------
// 4. Scorer controls: exact oracle, chance-level random
// -----------------------------------------------------------------------

pairs::PairSet control_pairs(int per_type) {
  pairs::PairSet ps;
  ps.seed = 99;
  int serial = 0;
  for (int rep = 0; rep < per_type; ++rep) {
    for (pairs::EvalType t : pairs::kAllTypes) {
      pairs::PreferencePair p;
      p.id = "ctrl:" + std::string(pairs::type_name(t)) + ":" + std::to_string(serial);
      p.instruction = "finish the task";
      p.observation = "Screen: home\nOptions: a | b";
      p.step_idx = 1;
      p.type = t;
      bool good_on_x = serial % 2 == 0;
      if (t == pairs::EvalType::Traj) {
        pairs::CandidateTrajectory good{{"open the panel", "flip the switch"}, 0.9};
        pairs::CandidateTrajectory bad{{"scroll around", "scroll around more"}, 0.2};
        p.x = good_on_x ? good : bad;
        p.y = good_on_x ? bad : good;
      } else {
        pairs::CandidateAction good{"g" + std::to_string(serial), "do the right thing", {}, {}};
        good.scores = dims::StepScores{0.5, 0.9, 0.4, 1, 1};
        pairs::CandidateAction bad{"b" + std::to_string(serial), "do the wrong thing", {}, {}};
        bad.scores = dims::StepScores{0.1, 0.2, 0.05, 0, 0};
        p.x = good_on_x ? good : bad;
        p.y = good_on_x ? bad : good;
      }
      p.label = good_on_x ? 'X' : 'Y';
      p.margin = 0.3;
      ps.pairs.push_back(std::move(p));
      ++serial;
    }
  }
  return ps;
}

void criterion_controls() {
  auto ps = control_pairs(1500);
  evalbench::OracleScorer oracle(ps.weights);
  auto rep = evalbench::evaluate(oracle, ps, default_workers());
  for (pairs::EvalType t : pairs::kAllTypes) {
    check(rep.n_per_type.at(t) == 1500, "control pair count per type");
    check(rep.accuracy(t) == 1.0,
          std::string("oracle accuracy on ") + pairs::type_name(t) + " is not exactly 1");
  }

  evalbench::UniformRandomScorer random(5);
  auto rr = evalbench::evaluate(random, ps, default_workers());
  for (pairs::EvalType t : pairs::kAllTypes) {
    double acc = rr.accuracy(t);
    check_near(acc, 0.5, 0.05, std::string("random accuracy on ") + pairs::type_name(t));
  }
  note("oracle exactly 1.0 on all seven types; random within 0.5 +/- 0.05 at n=1500/type");
}

// -----------------------------------------------------------------------
// 5. Trainer soundness
// -----------------------------------------------------------------------

void criterion_trainer() {
  trainer::FeatureExtractor fe;
  fe.d = 32;

  auto xs = salad_corpus(220, 3);
  auto ys = salad_corpus(220, 4);
  trainer::Mat planted(32, 5);
  auto rng = seeded_engine(9, "planted");
  for (double& v : planted.a) v = (rand_unit(rng) - 0.5) * 2.0;
  std::vector<trainer::RegressionExample> examples;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    trainer::RegressionExample ex;
    ex.x = xs[i];
    ex.y = ys[i];
    auto h = fe.extract(ex.x, ex.y);
    for (int jj = 0; jj < 5; ++jj) {
      double acc = 0.0;
      for (std::size_t f = 0; f < 32; ++f) acc += planted.at(f, jj) * h[f];
      ex.r[jj] = acc;
    }
    examples.push_back(std::move(ex));
  }
  auto fit = trainer::fit_regression(examples, fe, 1e-10);
  double max_err = 0.0;
  for (std::size_t i = 0; i < planted.a.size(); ++i) {
    max_err = std::max(max_err, std::abs(fit.head.W.a[i] - planted.a[i]));
  }
  check(max_err < 1e-6, "planted regression recovery above 1e-6");
  note("planted head recovered to max error " + std::to_string(max_err));

  trainer::RewardModelParams p;
  p.extractor = fe;
  p.head = fit.head;
  p.gate = trainer::make_gating(32, 8, 17);

  auto ctxs = salad_corpus(12, 13);
  auto chosen = salad_corpus(12, 14);
  auto rejected = salad_corpus(12, 15);
  std::vector<trainer::TrainPair> tp;
  for (std::size_t i = 0; i < ctxs.size(); ++i) tp.push_back({ctxs[i], chosen[i], rejected[i]});
  double gerr = trainer::grad_check(p, tp);
  check(gerr < 1e-4, "gate gradient check above 1e-4");
  note("gate gradient max relative error " + std::to_string(gerr));

  check_near(trainer::bt_loss(0.37, 0.37), std::log(2.0), 1e-9, "preference loss at equal scores");

  for (const auto& x : salad_corpus(20, 19)) {
    auto g = trainer::gate_coefficients(p, x);
    double sum = 0.0;
    for (double v : g) sum += v;
    check_near(sum, 1.0, 1e-9, "gate coefficients sum to one");
    // The gate reads the step context only: the same coefficients decompose
    // the scalar reward for any candidate response.
    for (const auto& y : {chosen[0], rejected[0]}) {
      auto r = trainer::predict_dims(p, x, y);
      double manual = 0.0;
      for (int k = 0; k < 5; ++k) manual += g[k] * r[k];
      check_near(trainer::scalar_reward(p, x, y), manual, 1e-12,
                 "gate decomposition is response-invariant");
    }
  }

  std::uint64_t head_before = trainer::head_checksum(p.head);
  std::uint64_t fe_before = trainer::extractor_checksum(p.extractor);
  trainer::fit_gating(p, tp, 200, 0.3);
  check(trainer::head_checksum(p.head) == head_before, "gating stage moved the regression head");
  check(trainer::extractor_checksum(p.extractor) == fe_before, "gating stage moved the extractor");
}

// -----------------------------------------------------------------------
// 6. The gate finds the informative dimension
// -----------------------------------------------------------------------

void criterion_gate_signal() {
  const std::size_t d = 128;
  trainer::FeatureExtractor fe;
  fe.d = d;

  auto ctxs = salad_corpus(40, 21);
  auto good = salad_corpus(40, 22);
  auto bad = salad_corpus(40, 23);
  std::vector<trainer::TrainPair> tp;
  std::vector<trainer::RegressionExample> examples;
  for (std::size_t i = 0; i < ctxs.size(); ++i) {
    tp.push_back({ctxs[i], good[i], bad[i]});
    trainer::RegressionExample c;
    c.x = ctxs[i];
    c.y = good[i];
    c.r = {-0.5, -0.5, 1.0, -0.5, -0.5};  // dimension 2 carries the signal
    trainer::RegressionExample r;
    r.x = ctxs[i];
    r.y = bad[i];
    r.r = {0.2, 0.2, -1.0, 0.2, 0.2};  // the other dimensions vote against it
    examples.push_back(std::move(c));
    examples.push_back(std::move(r));
  }

  trainer::RewardModelParams p;
  p.extractor = fe;
  p.head = trainer::fit_regression(examples, fe, 1e-8).head;
  p.gate = trainer::make_gating(d, 16, 29);

  auto fitted = trainer::fit_gating(p, tp, 600, 0.5);
  trainer::RewardModelParams trained = p;
  trained.gate = fitted.gate;

  double mass = 0.0;
  for (const auto& pr : tp) mass += trainer::gate_coefficients(trained, pr.x)[2];
  mass /= static_cast<double>(tp.size());
  note("mean gate weight on the informative dimension: " + fmt_fixed(mass, 4));
  check(mass > 0.8, "gate weight on the informative dimension is not above 0.8");

  trainer::RewardModelParams uniform = p;
  uniform.gate = trainer::GatingNet{};
  uniform.gate.k = 16;
  uniform.gate.w1 = trainer::Mat(d, 16);
  uniform.gate.b1.assign(16, 0.0);
  uniform.gate.w2 = trainer::Mat(16, 5);
  uniform.gate.b2.assign(5, 0.0);  // all-zero net: exactly uniform gates

  auto accuracy = [&](const trainer::RewardModelParams& m) {
    int correct = 0;
    for (const auto& pr : tp) {
      double sc = trainer::scalar_reward(m, pr.x, pr.chosen);
      double sr = trainer::scalar_reward(m, pr.x, pr.rejected);
      if (sc > sr) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(tp.size());
  };
  double acc_trained = accuracy(trained);
  double acc_uniform = accuracy(uniform);
  note("scalarized pairwise accuracy: trained gate " + fmt_fixed(acc_trained, 4) +
       ", uniform gate " + fmt_fixed(acc_uniform, 4));
  check(acc_trained >= acc_uniform + 0.05,
        "trained gate does not beat the uniform gate by 5 points");
}

// -----------------------------------------------------------------------
// 7. Candidate scaling under reranking
// -----------------------------------------------------------------------

void criterion_scaling() {
  auto envs = all_fixtures();
  guide::AgentPolicy policy;
  policy.epsilon = 0.5;
  guide::OracleActionScorer scorer;
  guide::GuidanceConfig cfg;
  cfg.episodes = 84;  // 6 environments x 84 = 504 episodes per point
  cfg.seed = 2026;

  auto points = guide::scaling_sweep(envs, policy, scorer, cfg, {1, 2, 4, 8}, default_workers());
  for (const auto& pt : points) {
    note("N=" + std::to_string(pt.n) + ": rate " + fmt_fixed(pt.record.rate, 4) + " [" +
         fmt_fixed(pt.record.ci_low, 4) + ", " + fmt_fixed(pt.record.ci_high, 4) + "] over " +
         std::to_string(pt.record.episodes) + " episodes");
  }

  const auto& n1 = points[0].record;
  const auto& n4 = points[2].record;
  check(n4.rate > n1.rate, "N=4 does not beat N=1");
  check(n4.ci_low > n1.ci_high, "N=4 and N=1 confidence intervals overlap");

  for (std::size_t i = 1; i < points.size(); ++i) {
    const auto& lo = points[i - 1].record;
    const auto& hi = points[i].record;
    bool non_decreasing = hi.rate >= lo.rate;
    bool overlap = hi.ci_high >= lo.ci_low && lo.ci_high >= hi.ci_low;
    check(non_decreasing || overlap,
          "rate drops beyond interval overlap between N=" + std::to_string(points[i - 1].n) +
              " and N=" + std::to_string(points[i].n));
  }
}

// -----------------------------------------------------------------------
// 8. Dimension ablations under reranking
// -----------------------------------------------------------------------

void criterion_ablations() {
  auto envs = all_fixtures();
  guide::AgentPolicy policy;
  policy.epsilon = 0.5;
  guide::OracleActionScorer scorer;
  guide::GuidanceConfig cfg;
  cfg.n_candidates = 4;
  cfg.episodes = 84;
  cfg.seed = 4096;

  std::vector<guide::DimMask> masks;
  for (const char* name : {"H", "OS", "E", "TR", "C"}) {
    masks.push_back(guide::mask_from_names({name}));
  }
  masks.push_back(guide::full_mask());

  auto rows = guide::ablation_sweep(envs, policy, scorer, cfg, masks, default_workers());
  const auto& full = rows.back();
  check(guide::is_full_mask(full.mask), "full mask is not the last ablation row");
  for (const auto& row : rows) {
    note(row.label + ": rate " + fmt_fixed(row.record.rate, 4) + " [" +
         fmt_fixed(row.record.ci_low, 4) + ", " + fmt_fixed(row.record.ci_high, 4) + "]");
  }

  const guide::AblationRow* h_row = nullptr;
  for (const auto& row : rows) {
    if (row.label == "H") h_row = &row;
    if (guide::is_full_mask(row.mask)) continue;
    double width = row.record.ci_high - row.record.ci_low;
    check(full.record.rate >= row.record.rate - width,
          "full mask falls more than an interval width below mask " + row.label);
  }
  check(h_row != nullptr, "missing single-dimension H row");
  for (const auto& row : rows) {
    if (guide::is_full_mask(row.mask) || row.label == "H") continue;
    if (h_row->record.rate >= row.record.rate) continue;
    double gap = row.record.rate - h_row->record.rate;
    double width = row.record.ci_high - row.record.ci_low;
    check(gap < width, "single mask " + row.label + " beats H beyond an interval width");
    note("note: " + row.label + " edges out H by " + fmt_fixed(gap, 4) +
         " (inside its interval width " + fmt_fixed(width, 4) + ")");
  }
}

// -----------------------------------------------------------------------
// 9. Correlation study
// -----------------------------------------------------------------------

void criterion_correlation() {
  auto rng = seeded_engine(31, "planted-corr");
  std::vector<std::array<double, 5>> rows;
  for (int i = 0; i < 10000; ++i) {
    double x = rand_unit(rng) * 2.0 - 1.0;
    double e = rand_unit(rng) * 2.0 - 1.0;
    rows.push_back({x, 0.5 * x + e, e, x + e, x - e});
  }
  auto planted = evalbench::correlation_matrix(rows);
  check_near(planted.r[0][1], 0.4472135954999579, 0.05, "planted correlation at n=10000");
  note("planted slope-0.5 correlation: " + fmt_fixed(planted.r[0][1], 4) + " (target 0.4472)");

  fs::path ds_dir = work_dir() / "corr_dataset";
  mctsp::SearchBudget budget;
  budget.iterations = 80;
  budget.rollouts_per_expansion = 4;
  budget.rng_seed = 11;
  auto ds = collect::run_collection(all_fixtures(), budget, collect::rule_judge_factory(), "rule",
                                    ds_dir, default_workers());
  auto m = evalbench::correlation_matrix(ds);
  check(m.n >= 3, "dataset correlation needs samples");
  for (int a = 0; a < 5; ++a) {
    check(m.r[a][a] == 1.0 && m.defined[a][a], "correlation diagonal is not exactly 1");
    for (int b = 0; b < 5; ++b) {
      check(m.r[a][b] == m.r[b][a], "correlation matrix is not symmetric");
      check(m.defined[a][b] == m.defined[b][a], "definedness is not symmetric");
      if (m.defined[a][b]) {
        check(m.r[a][b] >= -1.0 && m.r[a][b] <= 1.0, "correlation out of [-1, 1]");
      }
    }
  }
  for (int a = 0; a < 5; ++a) {
    for (int b = a + 1; b < 5; ++b) {
      std::string cell = m.defined[a][b] ? fmt_fixed(m.r[a][b], 4) : "UNDEFINED";
      note(std::string(dims::kDimNames[a]) + "-" + dims::kDimNames[b] + ": " + cell);
    }
  }
}

// -----------------------------------------------------------------------
// 10. Pipeline determinism and frozen artifacts
// -----------------------------------------------------------------------

struct PipelineOutput {
  std::string trajectories;
  std::string siblings;
  std::string manifest;
  std::string pairs_file;
  std::string report_md;
  std::string report_csv;
  json model_w;
  json model_gate;
};

PipelineOutput run_pipeline(const fs::path& dir) {
  mctsp::SearchBudget budget;
  budget.iterations = 100;
  budget.rollouts_per_expansion = 4;
  budget.rng_seed = 7;
  auto ds = collect::run_collection(all_fixtures(), budget, collect::rule_judge_factory(), "rule",
                                    dir / "dataset", 4);

  std::set<pairs::EvalType> types(std::begin(pairs::kAllTypes), std::end(pairs::kAllTypes));
  auto ps = pairs::build_pairs(ds, types, pairs::DimensionWeights{}, 0.05, 7);
  pairs::write_pairs(ps, dir / "pairs.jsonl");

  trainer::RewardModelParams params;
  params.extractor.d = 128;
  auto fit = trainer::fit_regression(trainer::build_regression_examples(ds), params.extractor,
                                     1e-6);
  params.head = fit.head;
  params.gate = trainer::make_gating(128, 16, 7);
  auto gate_fit = trainer::fit_gating(params, trainer::build_bt_examples(ps), 150, 0.2);
  params.gate = gate_fit.gate;
  trainer::save_model(params, dir / "model.json");

  evalbench::OracleScorer oracle(ps.weights);
  evalbench::TrainedScorer trained(trainer::load_model(dir / "model.json"));
  std::vector<evalbench::AccuracyReport> reports{evalbench::evaluate(oracle, ps, 4),
                                                 evalbench::evaluate(trained, ps, 4)};
  write_text_file(dir / "report.md", evalbench::render_markdown(reports));
  write_text_file(dir / "report.csv", evalbench::render_csv(reports));

  PipelineOutput out;
  out.trajectories = read_text_file(dir / "dataset" / "trajectories.jsonl");
  out.siblings = read_text_file(dir / "dataset" / "siblings.jsonl");
  out.manifest = read_text_file(dir / "dataset" / "manifest.json");
  out.pairs_file = read_text_file(dir / "pairs.jsonl");
  out.report_md = read_text_file(dir / "report.md");
  out.report_csv = read_text_file(dir / "report.csv");
  auto model = json::parse(read_text_file(dir / "model.json"));
  out.model_w = model.at("W");
  out.model_gate = model.at("gate");
  return out;
}

void check_schema(const json& j, const std::set<std::string>& want, const std::string& what) {
  std::set<std::string> got;
  for (const auto& [k, v] : j.items()) {
    (void)v;
    got.insert(k);
  }
  check(got == want, what + ": unexpected key set");
}

void criterion_determinism() {
  auto a = run_pipeline(work_dir() / "pipe1");
  auto b = run_pipeline(work_dir() / "pipe2");
  check(a.trajectories == b.trajectories, "trajectory files differ between runs");
  check(a.siblings == b.siblings, "sibling files differ between runs");
  check(a.manifest == b.manifest, "dataset manifests differ between runs");
  check(a.pairs_file == b.pairs_file, "pair files differ between runs");
  check(a.report_md == b.report_md, "markdown reports differ between runs");
  check(a.report_csv == b.report_csv, "CSV reports differ between runs");
  check(a.model_w == b.model_w, "model heads differ between runs");
  check(a.model_gate == b.model_gate, "model gates differ between runs");
  note("two seeded pipeline runs produced byte-identical artifacts");

  // Prompt renderings against their golden files.
  auto env = fixture("fixture_a_notes");
  std::vector<std::string> traj;
  auto st = taskenv::initial_episode(env);
  for (const char* act : {"open_editor", "type_text"}) {
    traj.push_back(env.edge_at(st.current, act).action.text);
    st = taskenv::step(env, st, act);
  }
  std::string obs = taskenv::render_observation(env, st.current);
  std::string candidate = env.edge_at(st.current, "save_note").action.text;
  std::string decoy = env.edge_at(st.current, "reopen_fonts").action.text;

  auto golden = [](const std::string& name) {
    return read_text_file(source_root() / "prompts" / name);
  };
  const std::pair<pairs::EvalType, const char*> judge_goldens[] = {
      {pairs::EvalType::H, "judge_h.txt"},     {pairs::EvalType::OS, "judge_os.txt"},
      {pairs::EvalType::E, "judge_e.txt"},     {pairs::EvalType::TR, "judge_tr.txt"},
      {pairs::EvalType::C, "judge_c.txt"},     {pairs::EvalType::Tot, "judge_tot.txt"},
      {pairs::EvalType::Traj, "judge_traj.txt"},
  };
  for (const auto& [type, name] : judge_goldens) {
    std::string rendered = prompts::render_judge_prompt(evalbench::type_block(type),
                                                        env.instruction, obs, traj, candidate);
    check(rendered + "\n" == golden(name), std::string("golden drift: ") + name);
  }
  std::string pairwise =
      prompts::render_pairwise_prompt(prompts::kBlockTotal, env.instruction, obs, traj,
                                      static_cast<int>(traj.size()) + 1, candidate, decoy);
  check(pairwise + "\n" == golden("pairwise_tot.txt"), "golden drift: pairwise_tot.txt");
  std::string model_prompt = prompts::render_model_prompt(env.instruction, obs, traj);
  check(model_prompt + "\n" == golden("model.txt"), "golden drift: model.txt");

  auto shop = fixture("fixture_b_shop");
  auto shop_st = taskenv::initial_episode(shop);
  const auto& first = shop.edge_at(shop_st.current, "open_search").action;
  shop_st = taskenv::step(shop, shop_st, "open_search");
  judge::JudgeRequest req;
  req.instruction = shop.instruction;
  req.observation = taskenv::render_observation(shop, shop_st.current);
  req.trajectory = {first.text};
  req.action = shop.edge_at(shop_st.current, "open_item").action;
  req.prev_action = first;
  req.dimension = judge::Dimension::TR;
  check(judge::render_prompt(req) + "\n" == golden("tr_fixture_b.txt"),
        "golden drift: tr_fixture_b.txt");
  note("all ten prompt goldens match byte for byte");

  // JSONL schemas stay frozen.
  const std::set<std::string> traj_keys = {"env_id", "instruction", "steps", "total_steps",
                                           "verified_success"};
  const std::set<std::string> step_keys = {"env_id",    "instruction", "observation", "step_idx",
                                           "action",    "trajectory",  "scores",      "siblings",
                                           "m_eff",     "n"};
  const std::set<std::string> score_keys = {"h", "os", "e", "tr", "c"};
  const std::set<std::string> action_keys = {"id", "text", "tags"};
  const std::set<std::string> pair_keys = {"id",       "instruction",     "observation",
                                           "step_idx", "trajectory",      "evaluation_type",
                                           "action_x", "action_y",        "label",
                                           "margin"};
  for (const auto& line : split(a.trajectories, '\n')) {
    if (line.empty()) continue;
    auto j = json::parse(line);
    check_schema(j, traj_keys, "trajectory record");
    for (const auto& s : j.at("steps")) {
      check_schema(s, step_keys, "step record");
      check_schema(s.at("scores"), score_keys, "score record");
      check_schema(s.at("action"), action_keys, "action record");
    }
  }
  for (const auto& line : split(a.siblings, '\n')) {
    if (line.empty()) continue;
    check_schema(json::parse(line), step_keys, "pruned step record");
  }
  for (const auto& line : split(a.pairs_file, '\n')) {
    if (line.empty()) continue;
    check_schema(json::parse(line), pair_keys, "preference pair record");
  }
  note("trajectory, step, and pair schemas match their frozen key sets");
}

struct Criterion {
  int id;
  const char* title;
  void (*run)();
};

}  // namespace

int main() {
  const Criterion criteria[] = {
      {1, "closed-form dimension values", criterion_formulas},
      {2, "exact oracles vs exhaustive enumeration", criterion_oracles},
      {3, "search invariants and optimal-path recovery", criterion_search},
      {4, "oracle and random scorer controls", criterion_controls},
      {5, "trainer soundness", criterion_trainer},
      {6, "gate signal routing", criterion_gate_signal},
      {7, "candidate scaling", criterion_scaling},
      {8, "dimension ablations", criterion_ablations},
      {9, "correlation study", criterion_correlation},
      {10, "pipeline determinism and frozen artifacts", criterion_determinism},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    g_notes.clear();
    try {
      c.run();
      std::cout << "[PASS] " << c.id << ". " << c.title << "\n";
    } catch (const std::exception& e) {
      ++failures;
      std::cout << "[FAIL] " << c.id << ". " << c.title << ": " << e.what() << "\n";
    }
    for (const auto& line : g_notes) std::cout << "       " << line << "\n";
  }
  if (failures == 0) {
    std::cout << "acceptance: 10/10 checks passed\n";
    return 0;
  }
  std::cout << "acceptance: " << failures << " check(s) failed\n";
  return 1;
}
