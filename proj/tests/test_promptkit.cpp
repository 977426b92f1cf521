// SPDX-License-Identifier: Apache-2.0
#include "doctest.h"
#include "reval/promptkit.hpp"

using namespace reval;
using namespace reval::promptkit;

namespace {

const std::vector<Exemplar>& pool() {
  static const auto exemplars = build_exemplars({}, 3);
  return exemplars;
}

builder::ProblemInstance evaluated(Task task) {
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

std::string last_line(const std::string& text) {
  auto end = text.size();
  while (end > 0 && text[end - 1] == '\n') --end;
  return text.substr(text.rfind('\n', end - 1) + 1, end - text.rfind('\n', end - 1) - 1);
}

std::size_t count(const std::string& text, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
  return n;
}

}  // namespace

TEST_CASE("exemplar pool covers every task") {
  REQUIRE_FALSE(pool().empty());
  for (Task t : kAllTasks) {
    CHECK(std::any_of(pool().begin(), pool().end(), [&](const Exemplar& e) { return e.problem.task == t; }));
  }
  for (const auto& e : pool()) CHECK(e.problem.key.record_id.rfind("EX/", 0) == 0);
}

TEST_CASE("prompt ends with the answer format request") {
  for (Task t : kAllTasks) {
    const auto p = evaluated(t);
    const auto b = render_prompt(p, Strategy::fewshot, select_shots(pool(), p, 2));
    CHECK(last_line(b.user_text) == "Finish with exactly one line of the form: " + answer_format_spec(t));
    CHECK(b.shot_keys.size() == 2);
    CHECK(count(b.user_text, "## Example ") == 2);
    CHECK_FALSE(leaks_ground_truth(b, p));
    CHECK(b.user_text.find("1 | def f(x):") != std::string::npos);
  }
}

TEST_CASE("cot exemplars carry reasoning before their answer") {
  const auto p = evaluated(Task::PSP);
  const auto shots = select_shots(pool(), p, 2);
  const auto b = render_prompt(p, Strategy::cot, shots);
  CHECK(count(b.user_text, "Reasoning: ") == 2);
  for (const auto& s : shots) {
    const auto reasoning = b.user_text.find("Reasoning: " + s.reasoning);
    const auto answer = b.user_text.find(answer_line(s.problem), reasoning);
    CHECK(reasoning != std::string::npos);
    CHECK(answer != std::string::npos);
  }
  CHECK(b.user_text.find("Reason step by step") != std::string::npos);
  CHECK(render_prompt(p, Strategy::fewshot, shots).user_text.find("Reasoning: ") == std::string::npos);
}

TEST_CASE("shots must match the task and differ from the problem") {
  const auto p = evaluated(Task::CCP);
  const auto epp_shots = select_shots(pool(), evaluated(Task::EPP), 1);
  CHECK_THROWS_AS(render_prompt(p, Strategy::fewshot, epp_shots), ExemplarTaskMismatch);
  Exemplar self{p, ""};
  CHECK_THROWS_AS(render_prompt(p, Strategy::fewshot, {self}), Error);
  auto same_record = pool();
  for (auto& e : same_record) e.problem.key.record_id = "R/0";
  CHECK(select_shots(same_record, p, 3).empty());
}

TEST_CASE("rendering is deterministic") {
  const auto p = evaluated(Task::OP);
  const auto a = render_prompt(p, Strategy::cot, select_shots(pool(), p, 3));
  const auto b = render_prompt(p, Strategy::cot, select_shots(build_exemplars({}, 3), p, 3));
  CHECK(a.user_text == b.user_text);
  CHECK(a.system_text == b.system_text);
  CHECK(template_version() == template_version());
  CHECK(template_version().size() == 16);
}

TEST_CASE("answer lines") {
  CHECK(answer_line(evaluated(Task::CCP)) == "ANSWER: YES");
  CHECK(answer_line(evaluated(Task::PSP)) == "ANSWER: value=2 type=int");
  auto epp = evaluated(Task::EPP);
  epp.ground_truth.next_lines = {kExitLine, 7, 4};
  CHECK(answer_line(epp) == "ANSWER: line 4");
  epp.ground_truth.next_lines = {kExitLine};
  CHECK(answer_line(epp) == "ANSWER: EXIT");
  CHECK(answer_line(evaluated(Task::OP)) == "ANSWER: 2");
}

TEST_CASE("leakage check sees answer lines in the problem section") {
  const auto p = evaluated(Task::CCP);
  auto b = render_prompt(p, Strategy::fewshot, {});
  CHECK_FALSE(leaks_ground_truth(b, p));
  b.user_text += "ANSWER: YES\n";
  CHECK(leaks_ground_truth(b, p));
}

TEST_CASE("exemplars round-trip") {
  for (const auto& e : pool()) {
    const auto back = exemplar_from_json(nlohmann::json::parse(to_json(e).dump()));
    CHECK(back.problem == e.problem);
    CHECK(back.reasoning == e.reasoning);
  }
}
