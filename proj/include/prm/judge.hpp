#pragma once

#include <atomic>
#include <cctype>
#include <chrono>
#include <condition_variable>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "prm/common.hpp"
#include "prm/prompts.hpp"
#include "prm/taskenv.hpp"

namespace prm::judge {

enum class Dimension { TR, C };

inline const char* dimension_name(Dimension d) { return d == Dimension::TR ? "TR" : "C"; }

struct JudgeRequest {
  std::string instruction;
  std::string observation;
  std::vector<std::string> trajectory;  // action texts of steps 1..i-1
  taskenv::ActionRecord action;
  std::optional<taskenv::ActionRecord> prev_action;
  Dimension dimension = Dimension::TR;

  /// 1-based index of the step under evaluation.
  int step_idx() const { return static_cast<int>(trajectory.size()) + 1; }
};

struct JudgeVerdict {
  int value = 0;
  std::string rationale;
  enum class Source { Rule, Remote } source = Source::Rule;
};

// ---------------------------------------------------------------------------
// Rule judges
// ---------------------------------------------------------------------------

/// TR rule: the action is task-relevant iff it shares a tag with the instruction.
inline JudgeVerdict rule_task_relevance(const JudgeRequest& req, const taskenv::TagSet& instruction_tags) {
  if (req.dimension != Dimension::TR) throw Error("rule_task_relevance: wrong dimension");
  bool overlap = false;
  for (const auto& tag : req.action.tags) {
    if (instruction_tags.count(tag)) {
      overlap = true;
      break;
    }
  }
  return {overlap ? 1 : 0,
          overlap ? "action tags overlap instruction tags" : "action tags disjoint from instruction tags",
          JudgeVerdict::Source::Rule};
}

/// C rule: the first step is vacuously coherent; later steps are coherent iff
/// the previous action id appears in the action's declared follows set.
inline JudgeVerdict rule_coherence(const JudgeRequest& req) {
  if (req.dimension != Dimension::C) throw Error("rule_coherence: wrong dimension");
  if (req.trajectory.empty()) {
    return {1, "first step is vacuously coherent", JudgeVerdict::Source::Rule};
  }
  if (!req.prev_action) throw Error("rule_coherence: missing prev_action beyond step 1");
  bool follows = req.action.follows.count(req.prev_action->id) != 0;
  return {follows ? 1 : 0,
          follows ? "previous action is a declared predecessor" : "previous action is not a declared predecessor",
          JudgeVerdict::Source::Rule};
}

inline std::string render_prompt(const JudgeRequest& req) {
  const char* block = req.dimension == Dimension::TR ? prompts::kBlockTaskRelevance
                                                     : prompts::kBlockCoherence;
  return prompts::render_judge_prompt(block, req.instruction, req.observation,
                                      req.trajectory, req.action.text);
}

// ---------------------------------------------------------------------------
// Judge interface
// ---------------------------------------------------------------------------

/// Scores one step on TR or C. Implementations must be safe to call from
/// multiple threads.
class StepJudge {
 public:
  virtual ~StepJudge() = default;
  virtual JudgeVerdict evaluate(const JudgeRequest& req) = 0;
  virtual std::string name() const = 0;
};

/// Deterministic offline judge; the acceptance pipeline runs on this.
class RuleJudge final : public StepJudge {
 public:
  explicit RuleJudge(taskenv::TagSet instruction_tags)
      : instruction_tags_(std::move(instruction_tags)) {}

  JudgeVerdict evaluate(const JudgeRequest& req) override {
    return req.dimension == Dimension::TR ? rule_task_relevance(req, instruction_tags_)
                                          : rule_coherence(req);
  }

  std::string name() const override { return "rule"; }

 private:
  taskenv::TagSet instruction_tags_;
};

// ---------------------------------------------------------------------------
// Remote judge
// ---------------------------------------------------------------------------

/// Verdict parsing: the first standalone `0` or `1` token in the body is the
/// verdict; the full body is kept as rationale.
inline std::optional<int> parse_verdict_token(const std::string& body) {
  for (std::size_t i = 0; i < body.size(); ++i) {
    char ch = body[i];
    if (ch != '0' && ch != '1') continue;
    bool left_ok = i == 0 || !std::isalnum(static_cast<unsigned char>(body[i - 1]));
    bool right_ok = i + 1 >= body.size() || !std::isalnum(static_cast<unsigned char>(body[i + 1]));
    if (left_ok && right_ok) return ch - '0';
  }
  return std::nullopt;
}

struct EndpointConfig {
  std::string endpoint;         // e.g. http://127.0.0.1:8701/judge
  int timeout_s = 30;
  int max_attempts = 3;
  int backoff_initial_ms = 500; // doubles per retry: 0.5s, 1s, 2s
  int max_inflight = 4;
};

struct ParsedUrl {
  std::string host;
  int port = 80;
  std::string path = "/";
};

inline ParsedUrl parse_http_url(const std::string& url) {
  const std::string scheme = "http://";
  if (url.rfind(scheme, 0) != 0) {
    throw ConfigError("judge endpoint must be an http:// URL: " + url);
  }
  std::string rest = url.substr(scheme.size());
  ParsedUrl out;
  std::size_t slash = rest.find('/');
  std::string authority = slash == std::string::npos ? rest : rest.substr(0, slash);
  out.path = slash == std::string::npos ? "/" : rest.substr(slash);
  std::size_t colon = authority.find(':');
  if (colon == std::string::npos) {
    out.host = authority;
  } else {
    out.host = authority.substr(0, colon);
    try {
      out.port = std::stoi(authority.substr(colon + 1));
    } catch (const std::exception&) {
      throw ConfigError("judge endpoint has an invalid port: " + url);
    }
  }
  if (out.host.empty()) throw ConfigError("judge endpoint has an empty host: " + url);
  return out;
}

/// HTTP transport used by RemoteJudge. Factored out so tests can exercise
/// retry and parse behavior without sockets.
class JudgeTransport {
 public:
  virtual ~JudgeTransport() = default;
  struct Response {
    bool transport_ok = false;
    int status = 0;
    std::string body;
    std::string error;
  };
  virtual Response post(const std::string& json_body) = 0;
};

class StepJudgeClock {
 public:
  virtual ~StepJudgeClock() = default;
  virtual void sleep_ms(int ms) { std::this_thread::sleep_for(std::chrono::milliseconds(ms)); }
};

/**
 * Client for an HTTP judge endpoint. Sends the rendered prompt as
 * {prompt, dimension, correlation_id}, retries transient failures with
 * exponential backoff, and never fabricates a verdict: exhausted retries and
 * unparseable bodies surface as JudgeError.
 */
class RemoteJudge final : public StepJudge {
 public:
  RemoteJudge(EndpointConfig cfg, std::unique_ptr<JudgeTransport> transport,
              std::unique_ptr<StepJudgeClock> clock = nullptr)
      : cfg_(std::move(cfg)), transport_(std::move(transport)), clock_(std::move(clock)) {
    if (!transport_) throw Error("remote judge requires a transport");
    if (!clock_) clock_ = std::make_unique<StepJudgeClock>();
    if (cfg_.max_attempts < 1) throw ConfigError("judge max_attempts must be >= 1");
    if (cfg_.max_inflight < 1) throw ConfigError("judge max_inflight must be >= 1");
  }

  JudgeVerdict evaluate(const JudgeRequest& req) override {
    std::uint64_t tag = hash_mix(fnv1a64(req.instruction), fnv1a64(req.action.id));
    std::string body = post_prompt(render_prompt(req), dimension_name(req.dimension), tag);
    auto verdict = parse_verdict_token(body);
    if (!verdict) throw JudgeError("unparseable judge response: " + body);
    return {*verdict, body, JudgeVerdict::Source::Remote};
  }

  /// Sends {prompt, dimension, correlation_id} and returns the response body.
  /// Retries transport failures and 5xx with exponential backoff; any other
  /// non-2xx status or exhausted retries raise JudgeError. Also used by the
  /// pairwise baseline-judge scorer, which parses bodies differently.
  std::string post_prompt(const std::string& prompt, const std::string& dimension,
                          std::uint64_t tag) {
    std::string correlation_id = next_correlation_id(tag);
    nlohmann::ordered_json body = {
        {"prompt", prompt},
        {"dimension", dimension},
        {"correlation_id", correlation_id},
    };
    std::string payload = body.dump();

    InflightGuard guard(*this);
    std::string last_error;
    for (int attempt = 1; attempt <= cfg_.max_attempts; ++attempt) {
      if (attempt > 1) {
        clock_->sleep_ms(cfg_.backoff_initial_ms << (attempt - 2));
      }
      JudgeTransport::Response resp = transport_->post(payload);
      if (!resp.transport_ok) {
        last_error = "transport failure: " + resp.error;
        continue;
      }
      if (resp.status >= 500) {
        last_error = "server error: status " + std::to_string(resp.status);
        continue;
      }
      if (resp.status < 200 || resp.status >= 300) {
        throw JudgeError("judge endpoint rejected request (" + correlation_id +
                         "): status " + std::to_string(resp.status));
      }
      return resp.body;
    }
    throw JudgeError("judge unreachable after " + std::to_string(cfg_.max_attempts) +
                     " attempts (" + correlation_id + "): " + last_error);
  }

  std::string name() const override { return "remote"; }

 private:
  class InflightGuard {
   public:
    explicit InflightGuard(RemoteJudge& j) : j_(j) {
      std::unique_lock<std::mutex> lock(j_.mu_);
      j_.cv_.wait(lock, [&] { return j_.inflight_ < j_.cfg_.max_inflight; });
      ++j_.inflight_;
    }
    ~InflightGuard() {
      {
        std::lock_guard<std::mutex> lock(j_.mu_);
        --j_.inflight_;
      }
      j_.cv_.notify_one();
    }

   private:
    RemoteJudge& j_;
  };

  std::string next_correlation_id(std::uint64_t tag) {
    std::uint64_t n = counter_.fetch_add(1);
    char buf[48];
    std::snprintf(buf, sizeof(buf), "rq-%016llx-%llu",
                  static_cast<unsigned long long>(tag), static_cast<unsigned long long>(n));
    return buf;
  }

  EndpointConfig cfg_;
  std::unique_ptr<JudgeTransport> transport_;
  std::unique_ptr<StepJudgeClock> clock_;
  std::atomic<std::uint64_t> counter_{0};
  std::mutex mu_;
  std::condition_variable cv_;
  int inflight_ = 0;
};

}  // namespace prm::judge
