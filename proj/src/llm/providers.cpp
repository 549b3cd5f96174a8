#include "kolb/llm/providers.hpp"

#include <cstdlib>

#include "httplib.h"
#include "kolb/util/error.hpp"
#include "kolb/util/json_io.hpp"

namespace kolb::llm {

namespace {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

SplitUrl split_url(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("endpoint must be an absolute URL: " + url);
  auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

class HttplibTransport : public HttpTransport {
 public:
  HttpResponse post(const std::string& url, const std::string& body,
                    const std::map<std::string, std::string>& headers, double timeout_s) override {
    auto parts = split_url(url);
    httplib::Client client(parts.origin);
    auto secs = static_cast<time_t>(timeout_s);
    client.set_read_timeout(secs, 0);
    client.set_write_timeout(secs, 0);
    client.set_connection_timeout(10, 0);
    httplib::Headers hdrs;
    for (const auto& [k, v] : headers) hdrs.emplace(k, v);
    auto res = client.Post(parts.path, hdrs, body, "application/json");
    if (!res) throw TransportError("POST " + url + " failed: " + httplib::to_string(res.error()));
    return HttpResponse{res->status, res->body};
  }
};

}  // namespace

std::shared_ptr<HttpTransport> make_httplib_transport() { return std::make_shared<HttplibTransport>(); }

HttpChatProvider::HttpChatProvider(ProviderConfig config, std::shared_ptr<HttpTransport> transport)
    : config_(std::move(config)), transport_(std::move(transport)) {
  if (config_.endpoint.empty()) throw ConfigError("provider.endpoint is required for http providers");
}

std::string HttpChatProvider::request_body(const ProviderConfig& config, const std::string& prompt) {
  Json body{{"model", config.model},
            {"messages", Json::array({Json{{"role", "user"}, {"content", prompt}}})},
            {"temperature", config.temperature},
            {"top_p", config.top_p},
            {"max_tokens", config.max_tokens},
            {"seed", config.seed}};
  return canonical_dump(body);
}

std::string HttpChatProvider::parse_response(const std::string& body) {
  Json j = Json::parse(body, nullptr, false);
  if (j.is_discarded()) throw TransportError("provider returned non-JSON body");
  try {
    return j.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const Json::exception&) {
    throw TransportError("provider response has no choices[0].message.content");
  }
}

std::string HttpChatProvider::complete(const CompletionRequest& request) {
  std::map<std::string, std::string> headers;
  if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key) {
    headers["Authorization"] = std::string("Bearer ") + key;
  }
  auto res = transport_->post(config_.endpoint, request_body(config_, request.prompt), headers, config_.timeout_s);
  if (res.status == 429 || res.status >= 500) {
    throw TransportError("provider HTTP status " + std::to_string(res.status));
  }
  if (res.status != 200) {
    throw EpisodeError("provider rejected request with HTTP status " + std::to_string(res.status) + ": " +
                       res.body.substr(0, 512));
  }
  return parse_response(res.body);
}

ScriptedProvider::ScriptedProvider(std::vector<Entry> entries) {
  for (auto& e : entries) queues_[e.template_id].push_back(std::move(e.response));
}

std::shared_ptr<ScriptedProvider> ScriptedProvider::load(const std::filesystem::path& path) {
  std::vector<Entry> entries;
  for (const auto& j : read_jsonl(path)) {
    entries.push_back(Entry{j.value("template", std::string("*")), j.at("response").get<std::string>()});
  }
  return std::make_shared<ScriptedProvider>(std::move(entries));
}

std::string ScriptedProvider::complete(const CompletionRequest& request) {
  std::lock_guard<std::mutex> lock(mu_);
  seen_.push_back(request);
  auto it = queues_.find(request.template_id);
  if (it == queues_.end() || it->second.empty()) it = queues_.find("*");
  if (it == queues_.end() || it->second.empty()) {
    throw EpisodeError("scripted provider has no response for template " + request.template_id);
  }
  auto& q = it->second;
  std::string response = q.front();
  if (q.size() > 1) q.pop_front();
  return response;
}

std::vector<CompletionRequest> ScriptedProvider::requests() const {
  std::lock_guard<std::mutex> lock(mu_);
  return seen_;
}

std::shared_ptr<Provider> make_provider(const ProviderConfig& config) {
  if (config.kind == "http") return std::make_shared<HttpChatProvider>(config, make_httplib_transport());
  if (config.kind == "script") {
    if (config.script_path.empty()) throw ConfigError("provider.script_path is required for script providers");
    return ScriptedProvider::load(config.script_path);
  }
  return nullptr;
}

}  // namespace kolb::llm
