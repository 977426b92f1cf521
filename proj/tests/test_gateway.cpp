// SPDX-License-Identifier: Apache-2.0
#include <atomic>
#include <cstdlib>
#include <thread>

#include "doctest.h"
#include "httplib.h"
#include "reval/gateway.hpp"
#include "reval/grader.hpp"
#include "support.hpp"

using namespace reval;
using namespace reval::gateway;

namespace {

builder::ProblemInstance problem(Task task) {
  builder::ProblemInstance p;
  p.key = {"R/0", "0", 1, "y"};
  p.task = task;
  p.rendered_program = builder::render_program("def f(x):\n    y = x + 1\n    return y\n");
  p.question_payload = {2, "y = x + 1", "y", "assert f(1) == ??", "f(1)"};
  p.ground_truth.coverage = true;
  p.ground_truth.value_type = tracer::VariableSnapshot{"2", "int", true};
  p.ground_truth.next_lines = {3};
  p.ground_truth.expected_literal = LiteralValue{"2"};
  return p;
}

grader::Judgment ask(Backend& backend, const builder::ProblemInstance& p) {
  const auto bundle = promptkit::render_prompt(p, promptkit::Strategy::fewshot, {});
  const auto r = backend.complete(bundle, p);
  return grader::grade(p, grader::parse_answer(p.task, r.text, p.rendered_program));
}

// A local chat endpoint replying with canned statuses in order.
class FakeEndpoint {
 public:
  explicit FakeEndpoint(std::vector<int> statuses) : statuses_(std::move(statuses)) {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      const auto i = calls_++;
      last_auth_ = req.get_header_value("Authorization");
      const int status = i < statuses_.size() ? statuses_[i] : 200;
      res.status = status;
      if (status == 200) {
        const auto body = nlohmann::json::parse(req.body);
        nlohmann::json reply = {{"choices", {{{"message", {{"content", "ANSWER: YES"}}}}}},
                                {"usage", {{"prompt_tokens", 11}, {"completion_tokens", 2}}},
                                {"model", body["model"]}};
        res.set_content(reply.dump(), "application/json");
      }
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeEndpoint() {
    server_.stop();
    thread_.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions"; }
  std::size_t calls() const { return calls_; }
  std::string last_auth() const { return last_auth_; }

 private:
  httplib::Server server_;
  std::vector<int> statuses_;
  std::atomic<std::size_t> calls_{0};
  std::string last_auth_;
  int port_ = 0;
  std::thread thread_;
};

ModelConfig http_config(const std::string& url) {
  ModelConfig c;
  c.backend = BackendKind::http_chat;
  c.endpoint_url = url;
  c.model_name = "stub-model";
  c.rate_limit = 0;
  c.retries = 1;
  c.request_timeout = 5;
  return c;
}

}  // namespace

TEST_CASE("oracle and anti-oracle backends") {
  auto oracle = make_backend({});
  ModelConfig anti;
  anti.backend = BackendKind::anti_oracle;
  auto wrong = make_backend(anti);
  for (Task t : kAllTasks) {
    CAPTURE(to_string(t));
    CHECK(ask(*oracle, problem(t)).correct);
    const auto j = ask(*wrong, problem(t));
    CHECK_FALSE(j.correct);
    CHECK(j.reason == grader::Reason::mismatch);
  }
  CHECK(oracle->complete({}, problem(Task::CCP)).text == "ANSWER: YES");
  CHECK(wrong->complete({}, problem(Task::CCP)).text == "ANSWER: NO");
}

TEST_CASE("fixed backend echoes its text") {
  ModelConfig c;
  c.backend = BackendKind::fixed;
  c.fixed_text = "no idea";
  CHECK(make_backend(c)->complete({}, problem(Task::PSP)).text == "no idea");
}

TEST_CASE("scripted backend replays a transcript") {
  test::TempDir dir;
  const auto p = problem(Task::EPP);
  io::write_atomic(dir.path() / "t.jsonl", transcript_entry(p.key, Task::EPP, "ANSWER: line 3").dump() + "\n");
  ModelConfig c;
  c.backend = BackendKind::scripted;
  c.transcript = dir.path() / "t.jsonl";
  auto a = make_backend(c);
  auto b = make_backend(c);
  CHECK(a->complete({}, p).text == "ANSWER: line 3");
  CHECK(a->complete({}, p).text == b->complete({}, p).text);
  CHECK_THROWS_AS(a->complete({}, problem(Task::CCP)), TranscriptMiss);
}

TEST_CASE("validate rejects incomplete configs") {
  ModelConfig scripted;
  scripted.backend = BackendKind::scripted;
  CHECK_THROWS_AS(validate(scripted), ConfigError);
  ModelConfig bad;
  bad.max_tokens = 0;
  CHECK_THROWS_AS(validate(bad), ConfigError);
  ModelConfig http;
  http.backend = BackendKind::http_chat;
  CHECK_THROWS_AS(validate(http), ConfigError);
  CHECK_THROWS_AS(backend_from_string("gpt"), ConfigError);
}

TEST_CASE("rate limiter spaces calls") {
  RateLimiter limiter(1200);  // one call per 50 ms
  const auto start = std::chrono::steady_clock::now();
  for (int i = 0; i < 5; ++i) limiter.acquire();
  const auto elapsed = std::chrono::steady_clock::now() - start;
  CHECK(elapsed >= std::chrono::milliseconds(190));
}

TEST_CASE("http chat backend") {
  ::setenv("REVAL_API_KEY", "test-key", 1);

  SUBCASE("success returns the message content") {
    FakeEndpoint server({200});
    auto backend = make_backend(http_config(server.url()));
    const auto r = backend->complete(promptkit::render_prompt(problem(Task::CCP), promptkit::Strategy::fewshot, {}),
                                     problem(Task::CCP));
    CHECK(r.text == "ANSWER: YES");
    CHECK(r.prompt_tokens == 11);
    CHECK(server.last_auth() == "Bearer test-key");
  }
  SUBCASE("transient failures are retried") {
    FakeEndpoint server({503});
    auto backend = make_backend(http_config(server.url()));
    CHECK(backend->complete({}, problem(Task::CCP)).text == "ANSWER: YES");
    CHECK(server.calls() == 2);
  }
  SUBCASE("exhausted retries") {
    FakeEndpoint server({429, 500, 502});
    auto backend = make_backend(http_config(server.url()));
    CHECK_THROWS_AS(backend->complete({}, problem(Task::CCP)), BackendUnavailable);
    CHECK(server.calls() == 2);
  }
  SUBCASE("rejected credentials are not retried") {
    FakeEndpoint server({401});
    auto backend = make_backend(http_config(server.url()));
    CHECK_THROWS_AS(backend->complete({}, problem(Task::CCP)), AuthError);
    CHECK(server.calls() == 1);
  }
  ::unsetenv("REVAL_API_KEY");
}
