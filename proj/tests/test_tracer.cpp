// SPDX-License-Identifier: Apache-2.0
#include <cstdlib>

#include "doctest.h"
#include "json.hpp"
#include "reval/tracer.hpp"
#include "support.hpp"

using namespace reval;
using namespace reval::tracer;

namespace {

std::vector<int> stmt_lines(const Trace& t) {
  std::vector<int> out;
  for (const auto& s : t.steps) {
    if (s.event == StepEvent::stmt) out.push_back(s.line_no);
  }
  return out;
}

Trace run(const std::string& program, const std::string& invocation, ResourceLimits limits = {}) {
  return trace_execution(program, invocation, limits);
}

// State after the first stmt step at `line`.
const ProgramState& after_first(const Trace& t, int line) {
  for (const auto& s : t.steps) {
    if (s.event == StepEvent::stmt && s.line_no == line) return s.state_after;
  }
  FAIL("line never executed: " << line);
  throw Error("unreachable");
}

}  // namespace

TEST_CASE("golden traces match byte for byte and follow the hand trace") {
  const auto cases = nlohmann::json::parse(test::fixture_text("golden/cases.json"));
  const bool update = std::getenv("REVAL_UPDATE_GOLDEN") != nullptr;
  REQUIRE(cases.size() >= 10);
  for (const auto& c : cases) {
    const auto name = c["name"].get<std::string>();
    CAPTURE(name);
    auto trace = run(test::fixture_text("golden/" + c["program"].get<std::string>()), c["invocation"].get<std::string>());
    trace.record_id = name;
    trace.input_id = "0";

    CHECK(stmt_lines(trace) == c["lines"].get<std::vector<int>>());
    CHECK(to_string(trace.terminated) == c["terminated"].get<std::string>());
    if (c["output"].is_null()) {
      CHECK_FALSE(trace.output_value.has_value());
    } else {
      REQUIRE(trace.output_value.has_value());
      CHECK(trace.output_value->value_repr == c["output"].get<std::string>());
    }

    const auto wire = serialize_trace(trace);
    const auto golden = test::fixture("golden/" + name + ".trace.jsonl");
    if (update) io::write_atomic(golden, wire);
    CHECK(wire == io::read_file(golden));
    CHECK(parse_trace(wire) == trace);
  }
}

TEST_CASE("step states are taken after the statement completes") {
  const auto t = run(test::fixture_text("golden/straight_line.py"), "f(1)");
  CHECK(after_first(t, 2).find("y")->value_repr == "2");
  CHECK(after_first(t, 2).find("z") == nullptr);
  CHECK(after_first(t, 3).find("z")->value_repr == "4");
  CHECK(after_first(t, 3).find("x")->type_name == "int");
  for (std::size_t i = 0; i < t.steps.size(); ++i) CHECK(t.steps[i].step_index == static_cast<int>(i));
}

TEST_CASE("attribute mutation shows up as self entries") {
  const auto t = run(test::fixture_text("golden/attribute.py"), "use()");
  const auto& s = after_first(t, 6);
  REQUIRE(s.find("self.items") != nullptr);
  CHECK(s.find("self.items")->value_repr == "[7]");
  CHECK(s.find("self.count") == nullptr);
  CHECK(after_first(t, 7).find("self.count")->value_repr == "1");
  CHECK(after_first(t, 12).find("b")->value_repr == "Box(items=[])");
  CHECK(after_first(t, 12).find("b")->type_name == "Box");
}

TEST_CASE("each frame gets its own id") {
  const auto t = run(test::fixture_text("golden/helper_call.py"), "sum_sq(2, 3)");
  std::set<int> frames;
  for (const auto& s : t.steps) {
    if (s.event == StepEvent::call) frames.insert(s.frame_id);
  }
  CHECK(frames.size() == 3);
}

TEST_CASE("executed_lines is the set of stmt lines") {
  const auto t = run(test::fixture_text("golden/branch.py"), "g(5)");
  CHECK(t.executed_lines == std::set<int>{2, 3, 6});
}

TEST_CASE("step and time limits terminate with timeout") {
  const std::string spin = "def spin():\n    while True:\n        pass\n";
  ResourceLimits steps{10.0, 50};
  const auto a = run(spin, "spin()", steps);
  CHECK(a.terminated == Termination::timeout);
  CHECK(a.steps.size() <= 52);

  ResourceLimits wall{0.5, 100000000};
  const auto b = run("import time\ndef nap():\n    time.sleep(30)\n", "nap()", wall);
  CHECK(b.terminated == Termination::timeout);
}

TEST_CASE("non-representable values are marked") {
  const auto t = run("def f():\n    g = (i for i in range(3))\n    return 1\n", "f()");
  const auto* g = after_first(t, 2).find("g");
  REQUIRE(g != nullptr);
  CHECK_FALSE(g->representable);
  CHECK(g->type_name == "generator");
}

TEST_CASE("canonical values") {
  const auto s = snapshot_state(
      "{'a': {3, 1, 2}, 'b': float('nan'), 'c': (1,), 'd': {'z': 1, 'a': 2}, 'e': b'x', 'f': frozenset()}");
  CHECK(s.find("a")->value_repr == "{1, 2, 3}");
  CHECK(s.find("b")->value_repr == "float('nan')");
  CHECK(s.find("c")->value_repr == "(1,)");
  CHECK(s.find("d")->value_repr == "{'a': 2, 'z': 1}");
  CHECK(s.find("e")->value_repr == "b'x'");
  CHECK(s.find("f")->value_repr == "frozenset()");
}

TEST_CASE("grade_in_sandbox distinguishes pass, fail and error") {
  const std::string prog = "def f(x):\n    return x + 1\n";
  CHECK(grade_in_sandbox(prog, "assert f(1) == 2", {}) == GradeOutcome::pass);
  CHECK(grade_in_sandbox(prog, "assert f(1) == 3", {}) == GradeOutcome::fail);
  CHECK(grade_in_sandbox(prog, "assert f(1) == nope", {}) == GradeOutcome::error);
  CHECK(grade_in_sandbox(prog, "assert candidate(1) == 2", {}, "candidate = f\n") == GradeOutcome::pass);
}

TEST_CASE("parse_trace rejects malformed input") {
  CHECK_THROWS_AS(parse_trace("{}\n"), ParseError);
  CHECK_THROWS_AS(parse_trace("{\"record_id\": 1}\n{}\n"), ParseError);
}
