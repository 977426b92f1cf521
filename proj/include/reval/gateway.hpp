// SPDX-License-Identifier: Apache-2.0
//
// Model backends: an OpenAI-style chat endpoint and deterministic stubs.
#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>

#include "json.hpp"
#include "reval/promptkit.hpp"

namespace reval::gateway {

enum class BackendKind { http_chat, oracle, anti_oracle, fixed, scripted };

std::string_view to_string(BackendKind kind);
BackendKind backend_from_string(std::string_view text);

struct ModelConfig {
  BackendKind backend = BackendKind::oracle;
  std::string endpoint_url;
  std::string model_name;
  double temperature = 0.2;
  int max_tokens = 1024;
  std::int64_t seed = 0;
  /// Requests per minute; 0 disables limiting.
  double rate_limit = 60.0;
  int retries = 3;
  double request_timeout = 120.0;
  /// Reply of the fixed backend.
  std::string fixed_text = "ANSWER: NO";
  /// Transcript replayed by the scripted backend.
  std::filesystem::path transcript;
};

/// Throws ConfigError when a backend's requirements are not met.
void validate(const ModelConfig& config);

struct RawResponse {
  std::string text;
  double latency_ms = 0;
  int prompt_tokens = 0;
  int completion_tokens = 0;
  nlohmann::json backend_meta = nlohmann::json::object();
};

/// Spaces calls evenly at the configured rate across threads.
class RateLimiter {
 public:
  explicit RateLimiter(double per_minute);
  void acquire();

 private:
  std::mutex mutex_;
  std::chrono::steady_clock::duration interval_{};
  std::chrono::steady_clock::time_point next_{};
};

class Backend {
 public:
  virtual ~Backend() = default;
  /// Blocking. Throws BackendUnavailable, AuthError, or TranscriptMiss.
  virtual RawResponse complete(const promptkit::PromptBundle& prompt, const builder::ProblemInstance& problem) = 0;
};

std::unique_ptr<Backend> make_backend(const ModelConfig& config);

/// Well-formed but wrong answer line for a problem.
std::string wrong_answer_line(const builder::ProblemInstance& problem);

/// Transcript lookup key: the problem key plus the task.
std::string transcript_key(const builder::ProblemKey& key, Task task);

nlohmann::ordered_json transcript_entry(const builder::ProblemKey& key, Task task, const std::string& text);

}  // namespace reval::gateway
