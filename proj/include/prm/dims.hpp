#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "prm/common.hpp"

namespace prm::dims {

/// Names and canonical order of the five step-level dimensions.
enum class Dim : int { H = 0, OS = 1, E = 2, TR = 3, C = 4 };

inline constexpr std::array<const char*, 5> kDimNames = {"H", "OS", "E", "TR", "C"};

inline const char* dim_name(Dim d) { return kDimNames[static_cast<int>(d)]; }

inline Dim dim_from_name(const std::string& name) {
  for (int i = 0; i < 5; ++i) {
    if (name == kDimNames[i]) return static_cast<Dim>(i);
  }
  throw ConfigError("unknown dimension name: " + name);
}

/// One step's five-dimensional annotation. H and E may be negative;
/// OS lies in [0,1]; TR and C are binary.
struct StepScores {
  double h = 0.0;
  double os = 0.0;
  double e = 0.0;
  int tr = 0;
  int c = 0;

  double component(Dim d) const {
    switch (d) {
      case Dim::H: return h;
      case Dim::OS: return os;
      case Dim::E: return e;
      case Dim::TR: return tr;
      case Dim::C: return c;
    }
    throw Error("invalid dimension");
  }

  std::array<double, 5> as_array() const {
    return {h, os, e, static_cast<double>(tr), static_cast<double>(c)};
  }

  bool valid() const {
    return std::isfinite(h) && std::isfinite(e) && os >= 0.0 && os <= 1.0 &&
           (tr == 0 || tr == 1) && (c == 0 || c == 1);
  }
};

/// Outcome of a batch of simulated continuations from one step: whether each
/// rollout reached the goal and how many further steps it consumed (failed
/// rollouts carry the episode horizon as their length).
struct RolloutBundle {
  std::vector<int> successes;          // 0/1 per rollout
  std::vector<int> remaining_lengths;  // steps consumed on success, horizon on failure

  std::size_t n() const { return successes.size(); }

  void add(bool success, int remaining) {
    successes.push_back(success ? 1 : 0);
    remaining_lengths.push_back(remaining);
  }

  void check() const {
    if (successes.empty() || successes.size() != remaining_lengths.size()) {
      throw Error("rollout bundle must be non-empty and aligned");
    }
  }
};

/// r_i: 1 when any simulated continuation reaches the goal, else 0.
inline int basic_reward(const RolloutBundle& b) {
  b.check();
  for (int s : b.successes) {
    if (s) return 1;
  }
  return 0;
}

/// OS_i: fraction of simulated continuations that reach the goal.
inline double odds_of_success(const RolloutBundle& b) {
  b.check();
  int hits = 0;
  for (int s : b.successes) hits += s;
  return static_cast<double>(hits) / static_cast<double>(b.n());
}

/// Len_i: mean of per-rollout remaining lengths.
inline double mean_remaining_length(const RolloutBundle& b) {
  b.check();
  long long total = 0;
  for (int len : b.remaining_lengths) {
    if (len < 0) throw Error("remaining length must be non-negative");
    total += len;
  }
  return static_cast<double>(total) / static_cast<double>(b.n());
}

/// Inputs to the helpfulness credit rule at step i (1-based).
/// `m_eff` is the effective total step count of the trajectory the step sits
/// on; `ac_prev` is the accumulated contribution after step i-1; `r` is the
/// basic reward of step i.
struct HelpfulnessContext {
  double ac_prev = 0.0;
  int m_eff = 0;
  int i = 0;
  int r = 0;
};

/// H_i = (1 - AC_{i-1}) / (m - i + 1) * (2 r_i - 1).
inline double helpfulness(const HelpfulnessContext& ctx) {
  if (ctx.i < 1) throw Error("helpfulness: step index must be >= 1");
  if (ctx.r != 0 && ctx.r != 1) throw Error("helpfulness: basic reward must be 0 or 1");
  if (ctx.ac_prev < 0.0) throw Error("helpfulness: accumulated contribution must be >= 0");
  int denom = ctx.m_eff - ctx.i + 1;
  if (denom < 1) throw Error("helpfulness: denominator m - i + 1 must be >= 1");
  return (1.0 - ctx.ac_prev) / static_cast<double>(denom) *
         static_cast<double>(2 * ctx.r - 1);
}

/// AC_i = max(AC_{i-1} + H_i, 0), with AC_0 = 0.
inline double update_ac(double ac_prev, double h) {
  return std::max(ac_prev + h, 0.0);
}

/// E_i = (Len_{i-1} - Len_i) / len0. `len0` is the shortest solution length
/// from the initial state and must be positive.
inline double efficiency(double len_prev, double len_cur, double len0) {
  if (!(len0 > 0.0)) throw Error("efficiency: len0 must be positive");
  if (len_prev < 0.0 || len_cur < 0.0) throw Error("efficiency: lengths must be non-negative");
  return (len_prev - len_cur) / len0;
}

}  // namespace prm::dims
