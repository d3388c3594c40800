#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "prm/trainer.hpp"

namespace fs = std::filesystem;
using namespace prm;
using namespace prm::trainer;
using Catch::Matchers::WithinAbs;

namespace {

/// Deterministic word-salad corpus so hashed features are diverse.
std::vector<std::string> make_corpus(std::size_t n, std::uint64_t seed) {
  static const char* vocab[] = {"tap",  "open",   "type", "save",  "note", "search", "cart",
                                "item", "scroll", "menu", "panel", "dark", "draft",  "send",
                                "file", "move",   "blue", "milk",  "home", "screen"};
  auto rng = seeded_engine(seed, "corpus");
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::string text;
    std::size_t words = 3 + rand_below(rng, 6);
    for (std::size_t w = 0; w < words; ++w) {
      if (w) text += ' ';
      text += vocab[rand_below(rng, std::size(vocab))];
    }
    out.push_back(text);
  }
  return out;
}

FeatureExtractor small_extractor(std::size_t d = 32) {
  FeatureExtractor fe;
  fe.d = d;
  return fe;
}

RewardModelParams make_params(std::size_t d, std::size_t k, std::uint64_t seed) {
  RewardModelParams p;
  p.extractor = small_extractor(d);
  p.head.W = Mat(d, 5);
  auto rng = seeded_engine(seed, "head");
  for (double& v : p.head.W.a) v = (rand_unit(rng) - 0.5);
  p.gate = make_gating(d, k, seed);
  return p;
}

std::vector<TrainPair> synthetic_pairs(std::size_t n, std::uint64_t seed) {
  auto ctxs = make_corpus(n, seed);
  auto good = make_corpus(n, seed + 1);
  auto bad = make_corpus(n, seed + 2);
  std::vector<TrainPair> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back({ctxs[i], good[i], bad[i]});
  return out;
}

}  // namespace

TEST_CASE("cholesky solves SPD systems and rejects the rest") {
  Mat A(2, 2);
  A.at(0, 0) = 4;
  A.at(0, 1) = 2;
  A.at(1, 0) = 2;
  A.at(1, 1) = 3;
  Mat B(2, 1);
  B.at(0, 0) = 2;
  B.at(1, 0) = 1;
  Mat X = cholesky_solve(std::move(A), B);
  CHECK_THAT(X.at(0, 0), WithinAbs(0.5, 1e-12));
  CHECK_THAT(X.at(1, 0), WithinAbs(0.0, 1e-12));

  Mat S(2, 2);  // rank 1: singular
  S.at(0, 0) = 1;
  S.at(0, 1) = 1;
  S.at(1, 0) = 1;
  S.at(1, 1) = 1;
  Mat b2(2, 1);
  CHECK_THROWS_WITH(cholesky_solve(std::move(S), b2),
                    Catch::Matchers::ContainsSubstring("ridge"));
}

TEST_CASE("hashed n-gram features are unit length and deterministic") {
  auto fe = small_extractor(64);
  auto h1 = fe.extract("Open the note editor", std::string("Type text"));
  auto h2 = fe.extract("Open the note editor", std::string("Type text"));
  CHECK(h1 == h2);
  REQUIRE(h1.size() == 64);

  double norm = 0.0;
  for (double v : h1) norm += v * v;
  CHECK_THAT(norm, WithinAbs(1.0, 1e-12));

  SECTION("the response text participates in the features") {
    auto hx = fe.extract("Open the note editor");
    CHECK(hx != h1);
  }
  SECTION("token order matters through bigrams") {
    auto ab = fe.extract("alpha beta");
    auto ba = fe.extract("beta alpha");
    CHECK(ab != ba);
  }
  SECTION("case and punctuation are folded away") {
    CHECK(fe.extract("OPEN, the (note) editor!") == fe.extract("open the note editor"));
  }
  SECTION("empty text maps to the zero vector") {
    auto hz = fe.extract("");
    for (double v : hz) CHECK(v == 0.0);
  }
  SECTION("config is frozen") {
    auto cfg = fe.config_json();
    CHECK(cfg.at("lowercase") == true);
    CHECK(cfg.at("ngrams") == nlohmann::json({1, 2}));
  }
}

TEST_CASE("ridge regression recovers a planted linear head") {
  const std::size_t d = 32;
  auto fe = small_extractor(d);
  auto xs = make_corpus(220, 3);
  auto ys = make_corpus(220, 4);

  Mat planted(d, 5);
  auto rng = seeded_engine(9, "planted");
  for (double& v : planted.a) v = (rand_unit(rng) - 0.5) * 2.0;

  std::vector<RegressionExample> examples;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    RegressionExample ex;
    ex.x = xs[i];
    ex.y = ys[i];
    auto h = fe.extract(ex.x, ex.y);
    for (int j = 0; j < 5; ++j) {
      double acc = 0.0;
      for (std::size_t f = 0; f < d; ++f) acc += planted.at(f, j) * h[f];
      ex.r[j] = acc;
    }
    examples.push_back(std::move(ex));
  }

  auto fit = fit_regression(examples, fe, 1e-10);
  REQUIRE(fit.head.W.rows == d);
  REQUIRE(fit.head.W.cols == 5);
  double max_err = 0.0;
  for (std::size_t i = 0; i < planted.a.size(); ++i) {
    max_err = std::max(max_err, std::abs(fit.head.W.a[i] - planted.a[i]));
  }
  CHECK(max_err < 1e-6);
  CHECK(fit.loss < 1e-12);

  CHECK_THROWS_AS(fit_regression({}, fe, 1e-6), InputError);
  CHECK_THROWS_AS(fit_regression(examples, fe, -1.0), ConfigError);
}

TEST_CASE("bt loss hits its closed-form anchors and stays finite") {
  CHECK_THAT(bt_loss(0.7, 0.7), WithinAbs(std::log(2.0), 1e-12));
  CHECK_THAT(bt_loss(1.0, 0.0), WithinAbs(0.31326168751822286, 1e-12));
  CHECK_THAT(bt_loss(0.0, 1.0), WithinAbs(1.3132616875182228, 1e-12));
  CHECK(std::isfinite(bt_loss(1000.0, -1000.0)));
  CHECK(std::isfinite(bt_loss(-1000.0, 1000.0)));
  CHECK_THAT(bt_loss(1000.0, -1000.0), WithinAbs(0.0, 1e-12));
  CHECK_THROWS_AS(bt_loss(std::nan(""), 0.0), Error);
}

TEST_CASE("softmax is shift-stable and normalized") {
  auto g = softmax5({1.0, 2.0, 3.0, 4.0, 5.0});
  double sum = 0.0;
  for (double v : g) sum += v;
  CHECK_THAT(sum, WithinAbs(1.0, 1e-12));
  for (int i = 1; i < 5; ++i) CHECK(g[i] > g[i - 1]);

  auto shifted = softmax5({1001.0, 1002.0, 1003.0, 1004.0, 1005.0});
  for (int i = 0; i < 5; ++i) CHECK_THAT(shifted[i], WithinAbs(g[i], 1e-12));
  auto huge = softmax5({1e4, 0, 0, 0, 0});
  CHECK(std::isfinite(huge[0]));
  CHECK_THAT(huge[0], WithinAbs(1.0, 1e-12));
}

TEST_CASE("gating initialization is seeded and bounded") {
  auto g1 = make_gating(16, 8, 5);
  auto g2 = make_gating(16, 8, 5);
  auto g3 = make_gating(16, 8, 6);
  CHECK(g1.w1.a == g2.w1.a);
  CHECK(g1.w1.a != g3.w1.a);
  for (double v : g1.w1.a) {
    CHECK(v >= -0.05);
    CHECK(v <= 0.05);
  }
  for (double v : g1.b1) CHECK(v == 0.0);
  for (double v : g1.b2) CHECK(v == 0.0);
  CHECK(g1.activation == "tanh");
}

TEST_CASE("gate coefficients are a distribution over the five dimensions") {
  auto p = make_params(32, 8, 7);
  auto g = gate_coefficients(p, "open the note editor");
  double sum = 0.0;
  for (double v : g) {
    CHECK(v > 0.0);
    sum += v;
  }
  CHECK_THAT(sum, WithinAbs(1.0, 1e-9));

  // The scalar reward decomposes as the gate-weighted head output, with the
  // gate a function of the context alone.
  std::string x = "open the note editor";
  for (const char* y : {"type text", "scroll around"}) {
    auto r = predict_dims(p, x, y);
    double manual = 0.0;
    for (int i = 0; i < 5; ++i) manual += g[i] * r[i];
    CHECK_THAT(scalar_reward(p, x, y), WithinAbs(manual, 1e-12));
  }
}

TEST_CASE("analytic gate gradients match central differences") {
  auto p = make_params(24, 6, 11);
  auto pairs = synthetic_pairs(12, 13);
  CHECK(grad_check(p, pairs) < 1e-4);
  CHECK_THROWS_AS(grad_check(p, {}), InputError);
}

TEST_CASE("gate training reduces the preference loss and freezes the backbone") {
  const std::size_t d = 32;
  auto p = make_params(d, 8, 17);

  // Plant a signal: dimension 2 of the head separates chosen from rejected.
  // The gate must learn to listen to it.
  auto ctxs = make_corpus(24, 21);
  std::vector<TrainPair> pairs;
  for (std::size_t i = 0; i < ctxs.size(); ++i) {
    pairs.push_back({ctxs[i], "save the draft note", "scroll the menu panel"});
  }
  auto fe = p.extractor;
  std::vector<RegressionExample> examples;
  for (const auto& tp : pairs) {
    for (const auto* y : {&tp.chosen, &tp.rejected}) {
      RegressionExample ex;
      ex.x = tp.x;
      ex.y = *y;
      ex.r = {0.0, 0.0, y == &tp.chosen ? 1.0 : -1.0, 0.0, 0.0};
      examples.push_back(std::move(ex));
    }
  }
  p.head = fit_regression(examples, fe, 1e-8).head;

  std::uint64_t head_before = head_checksum(p.head);
  std::uint64_t fe_before = extractor_checksum(p.extractor);

  auto fit = fit_gating(p, pairs, 400, 0.5);
  REQUIRE(fit.loss_trace.size() == 400);
  CHECK(fit.final_loss < fit.loss_trace.front());
  CHECK(fit.final_loss < 0.25);

  CHECK(head_checksum(p.head) == head_before);
  CHECK(extractor_checksum(p.extractor) == fe_before);

  // The trained gate routes mass to the planted dimension.
  RewardModelParams trained = p;
  trained.gate = fit.gate;
  double mass = 0.0;
  for (const auto& tp : pairs) mass += gate_coefficients(trained, tp.x)[2];
  mass /= static_cast<double>(pairs.size());
  CHECK(mass > 0.8);

  CHECK_THROWS_AS(fit_gating(p, {}, 10, 0.1), InputError);
  CHECK_THROWS_AS(fit_gating(p, pairs, 10, 0.0), ConfigError);
  CHECK_THROWS_AS(fit_gating(p, pairs, -1, 0.1), ConfigError);
}

TEST_CASE("models round-trip through disk with bit-exact predictions") {
  auto p = make_params(32, 8, 23);
  p.manifest = {{"note", "round trip"}};
  fs::path dir = fs::temp_directory_path() / "prm_trainer_model";
  fs::remove_all(dir);
  fs::path file = dir / "model.json";
  save_model(p, file);

  auto q = load_model(file);
  CHECK(q.version == p.version);
  CHECK(q.extractor.d == p.extractor.d);
  CHECK(q.head.W.a == p.head.W.a);
  CHECK(q.gate.w1.a == p.gate.w1.a);
  CHECK(q.gate.b2 == p.gate.b2);
  CHECK(q.manifest.at("note") == "round trip");

  std::string x = "open the search results";
  std::string y = "tap the first item";
  CHECK(scalar_reward(q, x, y) == scalar_reward(p, x, y));
  auto rp = predict_dims(p, x, y);
  auto rq = predict_dims(q, x, y);
  for (int i = 0; i < 5; ++i) CHECK(rp[i] == rq[i]);

  SECTION("corrupted files are rejected as input errors") {
    auto doc = nlohmann::json::parse(read_text_file(file));

    auto reject = [&](nlohmann::json mutated) {
      write_text_file(dir / "bad.json", mutated.dump());
      CHECK_THROWS_AS(load_model(dir / "bad.json"), InputError);
    };

    auto bad = doc;
    bad["extractor"]["kind"] = "bag_of_chars";
    reject(bad);

    bad = doc;
    bad["gate"]["activation"] = "relu";
    reject(bad);

    bad = doc;
    bad["W"].erase(0);  // wrong row count
    reject(bad);

    bad = doc;
    bad.erase("gate");
    reject(bad);

    write_text_file(dir / "bad.json", "{truncated");
    CHECK_THROWS_AS(load_model(dir / "bad.json"), InputError);
    CHECK_THROWS_AS(load_model(dir / "absent.json"), InputError);
  }

  fs::remove_all(dir);
}

TEST_CASE("dataset glue builds deduplicated training examples") {
  collect::Dataset ds;
  collect::AnnotatedStep st;
  st.env_id = "envz";
  st.instruction = "do it";
  st.observation = "Screen: home\nOptions: a | b";
  st.step_idx = 1;
  st.action.id = "a1";
  st.action.text = "tap a";
  st.scores.h = 0.25;
  st.scores.os = 0.5;
  st.scores.tr = 1;
  st.scores.c = 1;

  collect::AnnotatedTrajectory t;
  t.env_id = "envz";
  t.instruction = "do it";
  t.steps = {st};
  ds.trajectories = {t};

  // One pruned record repeats the step verbatim; another differs only in the
  // candidate action, which is enough to count as a distinct example.
  collect::AnnotatedStep pruned = st;
  pruned.action.id = "a2";
  pruned.action.text = "tap b";
  ds.pruned_steps = {st, pruned};

  auto examples = build_regression_examples(ds);
  REQUIRE(examples.size() == 2);
  CHECK(examples[0].y == "tap a");
  CHECK(examples[1].y == "tap b");
  CHECK(examples[0].x.find("[INST]\ndo it\n[/INST]") != std::string::npos);
  CHECK(examples[0].x.find("[OBS]\nScreen: home") != std::string::npos);
  CHECK_THAT(examples[0].r[0], WithinAbs(0.25, 1e-12));

  SECTION("a changed trajectory prefix also defeats the dedupe") {
    ds.pruned_steps[0].trajectory = {"tap something first"};
    CHECK(build_regression_examples(ds).size() == 3);
  }
  SECTION("a changed environment also defeats the dedupe") {
    ds.pruned_steps[0].env_id = "envq";
    CHECK(build_regression_examples(ds).size() == 3);
  }
}

TEST_CASE("bt examples carry the labeled orientation and skip trajectory pairs") {
  pairs::PairSet ps;
  pairs::PreferencePair p;
  p.id = "envz:H:0";
  p.instruction = "do it";
  p.observation = "Screen: home";
  p.step_idx = 1;
  p.type = pairs::EvalType::H;
  pairs::CandidateAction good{"a1", "tap the right thing", {}, {}};
  pairs::CandidateAction bad{"a2", "tap the wrong thing", {}, {}};
  p.x = bad;
  p.y = good;
  p.label = 'Y';
  ps.pairs.push_back(p);

  pairs::PreferencePair tp;
  tp.id = "envz:Traj:0";
  tp.type = pairs::EvalType::Traj;
  tp.x = pairs::CandidateTrajectory{{"one"}, 1.0};
  tp.y = pairs::CandidateTrajectory{{"two"}, 0.0};
  tp.label = 'X';
  ps.pairs.push_back(tp);

  auto bt = build_bt_examples(ps);
  REQUIRE(bt.size() == 1);
  CHECK(bt[0].chosen == "tap the right thing");
  CHECK(bt[0].rejected == "tap the wrong thing");
  CHECK(bt[0].x.find("do it") != std::string::npos);
}

TEST_CASE("checksums are order-sensitive content hashes") {
  CHECK(hash_doubles({1.0, 2.0}) != hash_doubles({2.0, 1.0}));
  CHECK(hash_doubles({1.0, 2.0}) == hash_doubles({1.0, 2.0}));
  CHECK(hash_doubles({1.0}) != hash_doubles({2.0}));
  CHECK(hash_doubles({1.0, 2.0}) != hash_doubles({1.0}));

  auto fe = small_extractor(32);
  auto fe2 = small_extractor(64);
  CHECK(extractor_checksum(fe) != extractor_checksum(fe2));
}
