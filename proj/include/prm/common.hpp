#pragma once

#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace prm {

inline constexpr const char* kVersion = "0.1.0";

/// Base class for all toolkit errors. Subclasses map to CLI exit codes.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Invalid configuration (unknown keys, out-of-range values). Exit code 2.
struct ConfigError : Error {
  using Error::Error;
};

/// Missing or malformed input artifacts (env files, datasets, models). Exit code 3.
struct InputError : Error {
  using Error::Error;
};

/// Judge transport/parse failures. Exit code 4.
struct JudgeError : Error {
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Hashing / RNG
// ---------------------------------------------------------------------------

inline std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ull) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::uint64_t hash_mix(std::uint64_t a, std::uint64_t b) {
  // splitmix64 finalizer over the pair
  std::uint64_t z = a + 0x9e3779b97f4a7c15ull + (b << 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

/// Deterministic engine derived from a seed plus a stream label.
/// Stream separation keeps results independent of scheduling order.
inline std::mt19937_64 seeded_engine(std::uint64_t seed, std::string_view stream) {
  return std::mt19937_64(hash_mix(seed, fnv1a64(stream)));
}

/// Uniform integer in [0, n). Implementation-pinned (no std::uniform_int_distribution)
/// so sequences are identical across standard libraries.
inline std::size_t rand_below(std::mt19937_64& rng, std::size_t n) {
  if (n == 0) throw Error("rand_below: empty range");
  return static_cast<std::size_t>(rng() % n);
}

/// Uniform double in [0, 1) with 53 random bits.
inline double rand_unit(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * (1.0 / 9007199254740992.0);
}

// ---------------------------------------------------------------------------
// Small text helpers
// ---------------------------------------------------------------------------

inline std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

inline std::vector<std::string> split(std::string_view text, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = text.find(sep, start);
    if (pos == std::string_view::npos) {
      out.emplace_back(text.substr(start));
      break;
    }
    out.emplace_back(text.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

/// Fixed-precision decimal used in CSV reports; deterministic across platforms.
inline std::string fmt_fixed(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

// ---------------------------------------------------------------------------
// File IO
// ---------------------------------------------------------------------------

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write file: " + path.string());
  out << content;
}

/// Content hash recorded in run manifests so outputs are traceable to inputs.
inline std::string file_digest(const std::filesystem::path& path) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "fnv1a64:%016llx",
                static_cast<unsigned long long>(fnv1a64(read_text_file(path))));
  return buf;
}

// ---------------------------------------------------------------------------
// Worker pool
// ---------------------------------------------------------------------------

/// Runs fn(i) for i in [0, n) on up to `workers` threads. Tasks must be
/// independent; results keyed by index stay deterministic under any schedule.
inline void parallel_for(std::size_t n, unsigned workers, const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  if (workers <= 1 || n == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  unsigned n_threads = static_cast<unsigned>(std::min<std::size_t>(workers, n));
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> threads;
  std::exception_ptr first_error;
  std::mutex err_mu;
  threads.reserve(n_threads);
  for (unsigned t = 0; t < n_threads; ++t) {
    threads.emplace_back([&] {
      while (true) {
        std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(err_mu);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : threads) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

inline unsigned default_workers() {
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1u : std::min(hw, 8u);
}

}  // namespace prm
