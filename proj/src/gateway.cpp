// SPDX-License-Identifier: Apache-2.0
#include "reval/gateway.hpp"

#include <cstdlib>
#include <thread>

#include <spdlog/spdlog.h>

#include "httplib.h"
#include "reval/io.hpp"

namespace reval::gateway {
namespace {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

constexpr const char* kKeyVariable = "REVAL_API_KEY";

int line_count(std::string_view text) {
  int n = 0;
  for (char c : text) n += c == '\n' ? 1 : 0;
  return n;
}

class OracleBackend final : public Backend {
 public:
  RawResponse complete(const promptkit::PromptBundle&, const builder::ProblemInstance& problem) override {
    RawResponse r;
    r.text = promptkit::answer_line(problem);
    r.backend_meta = {{"backend", "oracle"}};
    return r;
  }
};

class AntiOracleBackend final : public Backend {
 public:
  RawResponse complete(const promptkit::PromptBundle&, const builder::ProblemInstance& problem) override {
    RawResponse r;
    r.text = wrong_answer_line(problem);
    r.backend_meta = {{"backend", "anti_oracle"}};
    return r;
  }
};

class FixedBackend final : public Backend {
 public:
  explicit FixedBackend(std::string text) : text_(std::move(text)) {}
  RawResponse complete(const promptkit::PromptBundle&, const builder::ProblemInstance&) override {
    RawResponse r;
    r.text = text_;
    r.backend_meta = {{"backend", "fixed"}};
    return r;
  }

 private:
  std::string text_;
};

class ScriptedBackend final : public Backend {
 public:
  explicit ScriptedBackend(const std::filesystem::path& path) {
    for (const auto& entry : io::read_jsonl(path)) {
      try {
        const auto& k = entry.at("key");
        const auto key = builder::key_from_json(k);
        const auto task = task_from_string(k.at("task").get<std::string>());
        replies_[transcript_key(key, task)] = entry.at("text").get<std::string>();
      } catch (const json::exception& e) {
        throw ConfigError("transcript " + path.string() + ": " + e.what());
      }
    }
  }

  RawResponse complete(const promptkit::PromptBundle&, const builder::ProblemInstance& problem) override {
    auto it = replies_.find(transcript_key(problem.key, problem.task));
    if (it == replies_.end()) {
      throw TranscriptMiss("no transcript entry for " + transcript_key(problem.key, problem.task));
    }
    RawResponse r;
    r.text = it->second;
    r.backend_meta = {{"backend", "scripted"}};
    return r;
  }

 private:
  std::map<std::string, std::string> replies_;
};

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

Endpoint split_url(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) throw ConfigError("endpoint_url needs a scheme: " + url);
  const auto slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

class HttpChatBackend final : public Backend {
 public:
  HttpChatBackend(ModelConfig config, std::string api_key)
      : config_(std::move(config)), api_key_(std::move(api_key)), limiter_(config_.rate_limit),
        endpoint_(split_url(config_.endpoint_url)) {}

  RawResponse complete(const promptkit::PromptBundle& prompt, const builder::ProblemInstance&) override {
    const json body = {{"model", config_.model_name},
                       {"messages", json::array({{{"role", "system"}, {"content", prompt.system_text}},
                                                 {{"role", "user"}, {"content", prompt.user_text}}})},
                       {"temperature", config_.temperature},
                       {"max_tokens", config_.max_tokens},
                       {"seed", config_.seed}};
    const auto payload = body.dump();
    std::string last_error;
    for (int attempt = 0; attempt <= config_.retries; ++attempt) {
      if (attempt > 0) {
        const auto delay = std::chrono::milliseconds(500LL << std::min(attempt - 1, 6));
        spdlog::warn("chat request retry {} in {} ms: {}", attempt, delay.count(), last_error);
        std::this_thread::sleep_for(delay);
      }
      limiter_.acquire();
      httplib::Client client(endpoint_.origin);
      const auto timeout = std::chrono::milliseconds(static_cast<long long>(config_.request_timeout * 1000));
      client.set_connection_timeout(timeout);
      client.set_read_timeout(timeout);
      client.set_write_timeout(timeout);
      const httplib::Headers headers = {{"Authorization", "Bearer " + api_key_}};
      const auto started = Clock::now();
      auto res = client.Post(endpoint_.path, headers, payload, "application/json");
      const double latency =
          std::chrono::duration<double, std::milli>(Clock::now() - started).count();
      if (!res) {
        last_error = httplib::to_string(res.error());
        continue;
      }
      if (res->status == 401 || res->status == 403) {
        throw AuthError("endpoint rejected credentials (HTTP " + std::to_string(res->status) + ")");
      }
      if (res->status == 429 || res->status >= 500) {
        last_error = "HTTP " + std::to_string(res->status);
        continue;
      }
      if (res->status != 200) {
        throw BackendUnavailable("HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
      }
      try {
        const auto reply = json::parse(res->body);
        RawResponse r;
        r.text = reply.at("choices").at(0).at("message").at("content").get<std::string>();
        r.latency_ms = latency;
        if (reply.contains("usage")) {
          r.prompt_tokens = reply["usage"].value("prompt_tokens", 0);
          r.completion_tokens = reply["usage"].value("completion_tokens", 0);
        }
        r.backend_meta = {{"backend", "http_chat"}, {"attempts", attempt + 1}};
        if (reply.contains("model")) r.backend_meta["model"] = reply["model"];
        return r;
      } catch (const json::exception& e) {
        last_error = std::string("malformed reply: ") + e.what();
      }
    }
    throw BackendUnavailable("chat endpoint failed after " + std::to_string(config_.retries + 1) +
                             " attempt(s): " + last_error);
  }

 private:
  ModelConfig config_;
  std::string api_key_;
  RateLimiter limiter_;
  Endpoint endpoint_;
};

}  // namespace

std::string_view to_string(BackendKind kind) {
  switch (kind) {
    case BackendKind::http_chat: return "http_chat";
    case BackendKind::oracle: return "oracle";
    case BackendKind::anti_oracle: return "anti_oracle";
    case BackendKind::fixed: return "fixed";
    case BackendKind::scripted: return "scripted";
  }
  return "?";
}

BackendKind backend_from_string(std::string_view text) {
  if (text == "http_chat") return BackendKind::http_chat;
  if (text == "oracle") return BackendKind::oracle;
  if (text == "anti_oracle") return BackendKind::anti_oracle;
  if (text == "fixed") return BackendKind::fixed;
  if (text == "scripted") return BackendKind::scripted;
  throw ConfigError("unknown backend '" + std::string(text) + "'");
}

void validate(const ModelConfig& config) {
  if (config.temperature < 0) throw ConfigError("temperature must be >= 0");
  if (config.max_tokens <= 0) throw ConfigError("max_tokens must be positive");
  if (config.retries < 0) throw ConfigError("retries must be >= 0");
  if (config.rate_limit < 0) throw ConfigError("rate_limit must be >= 0");
  if (config.backend == BackendKind::http_chat) {
    if (config.endpoint_url.empty()) throw ConfigError("http_chat needs endpoint_url");
    split_url(config.endpoint_url);
    if (config.model_name.empty()) throw ConfigError("http_chat needs a model name");
    const char* key = std::getenv(kKeyVariable);
    if (key == nullptr || *key == '\0') throw ConfigError(std::string("http_chat needs ") + kKeyVariable);
  }
  if (config.backend == BackendKind::scripted && config.transcript.empty()) {
    throw ConfigError("scripted backend needs a transcript file");
  }
}

RateLimiter::RateLimiter(double per_minute) {
  if (per_minute > 0) {
    interval_ = std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(60.0 / per_minute));
  }
}

void RateLimiter::acquire() {
  if (interval_ == Clock::duration::zero()) return;
  Clock::time_point slot;
  {
    std::lock_guard lock(mutex_);
    const auto now = Clock::now();
    slot = std::max(now, next_);
    next_ = slot + interval_;
  }
  std::this_thread::sleep_until(slot);
}

std::unique_ptr<Backend> make_backend(const ModelConfig& config) {
  validate(config);
  switch (config.backend) {
    case BackendKind::oracle: return std::make_unique<OracleBackend>();
    case BackendKind::anti_oracle: return std::make_unique<AntiOracleBackend>();
    case BackendKind::fixed: return std::make_unique<FixedBackend>(config.fixed_text);
    case BackendKind::scripted: return std::make_unique<ScriptedBackend>(config.transcript);
    case BackendKind::http_chat: return std::make_unique<HttpChatBackend>(config, std::getenv(kKeyVariable));
  }
  throw ConfigError("unsupported backend");
}

std::string wrong_answer_line(const builder::ProblemInstance& problem) {
  const auto& g = problem.ground_truth;
  switch (problem.task) {
    case Task::CCP:
      return g.coverage.value_or(false) ? "ANSWER: NO" : "ANSWER: YES";
    case Task::PSP:
      return "ANSWER: value=" + g.value_type->value_repr + "_X type=" + g.value_type->type_name;
    case Task::EPP: {
      const int lines = std::max(1, line_count(problem.rendered_program));
      for (int l = 1; l <= lines; ++l) {
        if (g.next_lines.count(l) == 0) return "ANSWER: line " + std::to_string(l);
      }
      return g.next_lines.count(kExitLine) != 0 ? "ANSWER: line " + std::to_string(lines + 1) : "ANSWER: EXIT";
    }
    case Task::OP:
      // A tuple tagged with a marker never equals the expected value yet
      // still parses, so the assertion fails rather than erroring.
      return "ANSWER: ('_X', " + g.expected_literal->text + ")";
  }
  return {};
}

std::string transcript_key(const builder::ProblemKey& key, Task task) {
  return key.record_id + "\x1f" + key.input_id + "\x1f" + std::to_string(key.stmt_index) + "\x1f" +
         key.variable + "\x1f" + std::string(to_string(task));
}

nlohmann::ordered_json transcript_entry(const builder::ProblemKey& key, Task task, const std::string& text) {
  auto k = builder::to_json(key);
  k["task"] = to_string(task);
  nlohmann::ordered_json out;
  out["key"] = k;
  out["text"] = text;
  return out;
}

}  // namespace reval::gateway
