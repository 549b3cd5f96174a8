#include "kolb/llm/gateway.hpp"

#include <thread>

#include "kolb/util/error.hpp"
#include "kolb/util/hash.hpp"

namespace kolb::llm {

std::string ProviderConfig::digest() const { return sha256_hex(canonical_dump(to_json())); }

Json ProviderConfig::to_json() const {
  return Json{{"kind", kind},
              {"endpoint", endpoint},
              {"model", model},
              {"api_key_env", api_key_env},
              {"temperature", temperature},
              {"top_p", top_p},
              {"max_tokens", max_tokens},
              {"seed", seed},
              {"timeout_s", timeout_s},
              {"requests_per_minute", requests_per_minute},
              {"script_path", script_path}};
}

ProviderConfig ProviderConfig::from_json(const Json& j) {
  ProviderConfig c;
  if (!j.is_object()) throw ConfigError("provider config must be an object");
  c.kind = j.value("kind", c.kind);
  c.endpoint = j.value("endpoint", c.endpoint);
  c.model = j.value("model", c.model);
  c.api_key_env = j.value("api_key_env", c.api_key_env);
  c.temperature = j.value("temperature", c.temperature);
  c.top_p = j.value("top_p", c.top_p);
  c.max_tokens = j.value("max_tokens", c.max_tokens);
  c.seed = j.value("seed", c.seed);
  c.timeout_s = j.value("timeout_s", c.timeout_s);
  c.requests_per_minute = j.value("requests_per_minute", c.requests_per_minute);
  c.script_path = j.value("script_path", c.script_path);
  if (c.kind != "http" && c.kind != "script" && c.kind != "none") {
    throw ConfigError("provider.kind must be one of http, script, none (got '" + c.kind + "')");
  }
  return c;
}

CassetteMode parse_cassette_mode(const std::string& s) {
  if (s == "record") return CassetteMode::record;
  if (s == "replay") return CassetteMode::replay;
  if (s == "passthrough") return CassetteMode::passthrough;
  throw ConfigError("cassette mode must be record, replay or passthrough (got '" + s + "')");
}

std::string to_string(CassetteMode mode) {
  switch (mode) {
    case CassetteMode::record:
      return "record";
    case CassetteMode::replay:
      return "replay";
    case CassetteMode::passthrough:
      return "passthrough";
  }
  return "passthrough";
}

std::string Cassette::fingerprint(const std::string& rendered_prompt) { return sha256_hex(rendered_prompt); }

Cassette Cassette::load(const std::filesystem::path& path) {
  Cassette c;
  for (const auto& j : read_jsonl(path)) {
    c.add(Record{j.at("fingerprint").get<std::string>(), j.value("template", std::string{}),
                 j.at("response").get<std::string>()});
  }
  return c;
}

void Cassette::save(const std::filesystem::path& path) const {
  std::vector<Json> lines;
  lines.reserve(records_.size());
  for (const auto& r : records_) {
    lines.push_back(Json{{"fingerprint", r.fingerprint}, {"template", r.template_id}, {"response", r.response}});
  }
  write_jsonl(path, lines);
}

void Cassette::add(Record record) {
  pending_[record.fingerprint].push_back(records_.size());
  records_.push_back(std::move(record));
}

std::optional<std::string> Cassette::take(const std::string& fingerprint) {
  auto it = pending_.find(fingerprint);
  if (it == pending_.end() || it->second.empty()) return std::nullopt;
  std::size_t idx = it->second.front();
  it->second.pop_front();
  return records_[idx].response;
}

Gateway::Gateway(std::shared_ptr<Provider> provider, GatewayOptions options, Cassette cassette)
    : provider_(std::move(provider)), options_(options), cassette_(std::move(cassette)) {
  if (options_.mode != CassetteMode::replay && !provider_) {
    throw ConfigError("gateway needs a provider unless running in replay mode");
  }
}

std::string Gateway::complete(const std::string& rendered, const std::string& template_id) {
  std::lock_guard<std::mutex> lock(mu_);
  const std::string fp = Cassette::fingerprint(rendered);

  if (options_.mode == CassetteMode::replay) {
    auto hit = cassette_.take(fp);
    if (!hit) throw ReplayMissError(fp);
    transcript_.push_back(TranscriptEntry{template_id, fp, sha256_hex(*hit), 0.0, true});
    return *hit;
  }

  if (options_.requests_per_minute > 0 && last_request_) {
    auto min_gap = std::chrono::duration<double>(60.0 / options_.requests_per_minute);
    auto elapsed = std::chrono::steady_clock::now() - *last_request_;
    if (elapsed < min_gap) std::this_thread::sleep_for(min_gap - elapsed);
  }

  std::string last_error;
  for (int attempt = 0; attempt <= options_.transport_retries; ++attempt) {
    auto start = std::chrono::steady_clock::now();
    last_request_ = start;
    ++provider_calls_;
    try {
      std::string response = provider_->complete(CompletionRequest{rendered, template_id});
      double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
      transcript_.push_back(TranscriptEntry{template_id, fp, sha256_hex(response), ms, false});
      if (options_.mode == CassetteMode::record) {
        cassette_.add(Cassette::Record{fp, template_id, response});
      }
      return response;
    } catch (const TransportError& e) {
      last_error = e.what();
    }
  }
  throw EpisodeError("provider failed after " + std::to_string(options_.transport_retries + 1) +
                     " attempts: " + last_error);
}

Cassette Gateway::cassette() const {
  std::lock_guard<std::mutex> lock(mu_);
  return cassette_;
}

std::vector<TranscriptEntry> Gateway::transcript() const {
  std::lock_guard<std::mutex> lock(mu_);
  return transcript_;
}

std::size_t Gateway::provider_calls() const {
  std::lock_guard<std::mutex> lock(mu_);
  return provider_calls_;
}

}  // namespace kolb::llm
