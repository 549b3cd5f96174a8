#pragma once

#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "kolb/llm/gateway.hpp"

namespace kolb::llm {

struct HttpResponse {
  int status = 0;
  std::string body;
};

class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  // Throws TransportError when the endpoint is unreachable.
  virtual HttpResponse post(const std::string& url, const std::string& body,
                            const std::map<std::string, std::string>& headers, double timeout_s) = 0;
};

// cpp-httplib backed transport (plain http and https).
std::shared_ptr<HttpTransport> make_httplib_transport();

// Chat-completions wire protocol: one user message in, choices[0] out.
class HttpChatProvider : public Provider {
 public:
  HttpChatProvider(ProviderConfig config, std::shared_ptr<HttpTransport> transport);
  std::string complete(const CompletionRequest& request) override;

  // Exposed for wire-format tests.
  static std::string request_body(const ProviderConfig& config, const std::string& prompt);
  static std::string parse_response(const std::string& body);

 private:
  ProviderConfig config_;
  std::shared_ptr<HttpTransport> transport_;
};

// Replays authored responses in order, per template id. Entries with
// template "*" serve any template that has no queue of its own. Once a
// queue is down to its last entry that entry keeps being returned.
class ScriptedProvider : public Provider {
 public:
  struct Entry {
    std::string template_id;
    std::string response;
  };

  ScriptedProvider() = default;
  explicit ScriptedProvider(std::vector<Entry> entries);
  // JSONL records {"template": ..., "response": ...}.
  static std::shared_ptr<ScriptedProvider> load(const std::filesystem::path& path);

  std::string complete(const CompletionRequest& request) override;
  std::vector<CompletionRequest> requests() const;

 private:
  mutable std::mutex mu_;
  std::map<std::string, std::deque<std::string>> queues_;
  std::vector<CompletionRequest> seen_;
};

// Wraps a callable. Handy for echo stubs and synthetic environments.
class FunctionProvider : public Provider {
 public:
  using Fn = std::function<std::string(const CompletionRequest&)>;
  explicit FunctionProvider(Fn fn) : fn_(std::move(fn)) {}
  std::string complete(const CompletionRequest& request) override { return fn_(request); }

 private:
  Fn fn_;
};

// Builds the provider named by config.kind ("none" yields nullptr).
std::shared_ptr<Provider> make_provider(const ProviderConfig& config);

}  // namespace kolb::llm
