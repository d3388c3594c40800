#pragma once

// httplib-backed transport for RemoteJudge, split out so that translation
// units which only need rule judges avoid the heavy HTTP dependency.

#include <memory>
#include <string>

#include "httplib.h"
#include "prm/judge.hpp"

namespace prm::judge {

class HttpTransport final : public JudgeTransport {
 public:
  explicit HttpTransport(const EndpointConfig& cfg) : url_(parse_http_url(cfg.endpoint)) {
    client_ = std::make_unique<httplib::Client>(url_.host, url_.port);
    client_->set_connection_timeout(cfg.timeout_s, 0);
    client_->set_read_timeout(cfg.timeout_s, 0);
    client_->set_write_timeout(cfg.timeout_s, 0);
  }

  Response post(const std::string& json_body) override {
    auto res = client_->Post(url_.path, json_body, "application/json");
    if (!res) {
      return {false, 0, "", httplib::to_string(res.error())};
    }
    return {true, res->status, res->body, ""};
  }

 private:
  ParsedUrl url_;
  std::unique_ptr<httplib::Client> client_;
};

inline std::unique_ptr<RemoteJudge> make_remote_judge(const EndpointConfig& cfg) {
  return std::make_unique<RemoteJudge>(cfg, std::make_unique<HttpTransport>(cfg));
}

}  // namespace prm::judge
