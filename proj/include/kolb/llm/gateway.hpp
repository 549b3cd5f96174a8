#pragma once

#include <chrono>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "kolb/util/json_io.hpp"

namespace kolb::llm {

struct CompletionRequest {
  std::string prompt;
  std::string template_id;
};

class Provider {
 public:
  virtual ~Provider() = default;
  // Throws TransportError on retryable failures.
  virtual std::string complete(const CompletionRequest& request) = 0;
};

// Sampling defaults are deterministic so recorded cassettes stay valid.
struct ProviderConfig {
  std::string kind = "none";  // http | script | none
  std::string endpoint;       // chat-completions URL
  std::string model;
  std::string api_key_env = "KOLB_API_KEY";
  double temperature = 0.0;
  double top_p = 1.0;
  int max_tokens = 4096;
  int seed = 0;
  double timeout_s = 600.0;
  double requests_per_minute = 0.0;  // 0 = no ceiling
  std::string script_path;           // kind == script

  // Hash over every field except credentials.
  std::string digest() const;
  Json to_json() const;
  static ProviderConfig from_json(const Json& j);
};

enum class CassetteMode { record, replay, passthrough };

CassetteMode parse_cassette_mode(const std::string& s);
std::string to_string(CassetteMode mode);

// Recorded provider responses keyed by the content hash of the rendered
// prompt. Repeated identical prompts replay their responses in order.
class Cassette {
 public:
  struct Record {
    std::string fingerprint;
    std::string template_id;
    std::string response;
  };

  static std::string fingerprint(const std::string& rendered_prompt);
  static Cassette load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  void add(Record record);
  // Next unconsumed response for the fingerprint.
  std::optional<std::string> take(const std::string& fingerprint);
  const std::vector<Record>& records() const { return records_; }

 private:
  std::vector<Record> records_;
  std::map<std::string, std::deque<std::size_t>> pending_;
};

struct TranscriptEntry {
  std::string template_id;
  std::string prompt_hash;
  std::string response_hash;
  double latency_ms = 0.0;
  bool from_cassette = false;
};

struct GatewayOptions {
  CassetteMode mode = CassetteMode::passthrough;
  int transport_retries = 3;
  double requests_per_minute = 0.0;
};

// Thread-safe: calls from concurrent episodes serialize on an internal
// mutex, which also enforces the request-rate ceiling.
class Gateway {
 public:
  Gateway(std::shared_ptr<Provider> provider, GatewayOptions options, Cassette cassette = {});

  // Replay mode never touches the provider; a miss throws ReplayMissError.
  // Transport failures are retried, then rethrown as EpisodeError.
  std::string complete(const std::string& rendered, const std::string& template_id);

  CassetteMode mode() const { return options_.mode; }
  Cassette cassette() const;
  std::vector<TranscriptEntry> transcript() const;
  std::size_t provider_calls() const;

 private:
  std::shared_ptr<Provider> provider_;
  GatewayOptions options_;
  mutable std::mutex mu_;
  Cassette cassette_;
  std::vector<TranscriptEntry> transcript_;
  std::size_t provider_calls_ = 0;
  std::optional<std::chrono::steady_clock::time_point> last_request_;
};

}  // namespace kolb::llm
