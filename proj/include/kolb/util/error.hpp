#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace kolb {

// Misconfiguration: missing template, unbound slot, malformed config or
// bundle manifest. Never retried.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Unrecoverable failure of an episode (provider exhausted its retries,
// a gated stage failed, ...). Callers restart the episode from scratch.
class EpisodeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Executor could not spawn the interpreter. Distinct from the generated
// code failing.
class SpawnError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Iterative numerical routine failed to converge.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Environment callback ran past its wall-clock limit.
class TimeoutError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Transport-level provider failure; the gateway retries these.
class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Replay cassette has no recorded response for a prompt fingerprint.
class ReplayMissError : public std::runtime_error {
 public:
  explicit ReplayMissError(std::string fingerprint)
      : std::runtime_error("cassette replay miss for fingerprint " + fingerprint),
        fingerprint_(std::move(fingerprint)) {}
  const std::string& fingerprint() const { return fingerprint_; }

 private:
  std::string fingerprint_;
};

// Structured output still malformed after the retry budget.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::vector<std::string> attempt_digests)
      : std::runtime_error(what), attempt_digests_(std::move(attempt_digests)) {}
  const std::vector<std::string>& attempt_digests() const { return attempt_digests_; }

 private:
  std::vector<std::string> attempt_digests_;
};

}  // namespace kolb
