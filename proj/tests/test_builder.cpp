// SPDX-License-Identifier: Apache-2.0
#include "doctest.h"
#include "reval/builder.hpp"
#include "support.hpp"

using namespace reval;
using namespace reval::builder;

namespace {

corpus::BenchmarkRecord make_record(const std::string& id, const std::string& entry, const std::string& prompt,
                                    const std::string& body, const std::vector<std::string>& assertions) {
  nlohmann::json line = {{"task_id", id},   {"entry_point", entry},     {"prompt", prompt},
                         {"canonical_solution", body}, {"assertions", assertions}};
  return corpus::parse_record(line, corpus::Format::humaneval_like, 1);
}

struct Built {
  corpus::BenchmarkRecord record;
  analyzer::StatementTable table;
  analyzer::BlockGraph graph;
  tracer::Trace trace;
};

Built prepare(const corpus::BenchmarkRecord& record, std::size_t input = 0) {
  Built b{record, {}, {}, {}};
  const auto program = corpus::traced_program(record);
  b.table = analyzer::index_statements(program);
  b.graph = analyzer::build_blocks(b.table, program);
  b.trace = tracer::trace_execution(program, record.test_inputs.at(input).invocation_text, {});
  b.trace.record_id = record.record_id;
  b.trace.input_id = record.test_inputs.at(input).input_id;
  return b;
}

int index_at(const analyzer::StatementTable& t, int line) { return t.at_line(line)->stmt_index; }

const ProblemInstance& find(const std::vector<ProblemInstance>& ps, Task task, int line) {
  for (const auto& p : ps) {
    if (p.task == task && p.question_payload.target_line == line) return p;
  }
  FAIL("no " << to_string(task) << " problem at line " << line);
  throw Error("unreachable");
}

}  // namespace

TEST_CASE("straight-line record yields four aligned instances") {
  const auto rec = make_record("S/0", "f", "def f(x):\n", "    y = x + 1\n    return y\n", {"assert f(1) == 2"});
  const auto b = prepare(rec);
  const auto ps = build_problems(b.record, b.trace, b.table, b.graph, {3});
  const auto& ccp = find(ps, Task::CCP, 2);
  CHECK(*ccp.ground_truth.coverage);
  const auto& psp = find(ps, Task::PSP, 2);
  CHECK(psp.key.variable == "y");
  CHECK(psp.ground_truth.value_type->value_repr == "2");
  CHECK(psp.ground_truth.value_type->type_name == "int");
  CHECK(find(ps, Task::EPP, 2).ground_truth.next_lines == std::set<int>{3});
  for (const auto& p : ps) {
    if (p.task == Task::OP && p.key == psp.key) {
      CHECK(p.ground_truth.expected_literal->text == "2");
      CHECK(p.question_payload.masked_assertion == "assert f(1) == ??");
    }
  }
}

TEST_CASE("unexecuted terminal becomes a CCP-only site") {
  const auto rec = make_record("B/0", "g", "def g(x):\n",
                               "    if x > 0:\n        return 1\n    return -1\n", {"assert g(-1) == -1"});
  const auto b = prepare(rec);
  const auto ps = build_problems(b.record, b.trace, b.table, b.graph, {3});
  const auto& ccp = find(ps, Task::CCP, 3);
  CHECK_FALSE(*ccp.ground_truth.coverage);
  CHECK(ccp.key.variable.empty());
  for (const auto& p : ps) CHECK_FALSE((p.task != Task::CCP && p.question_payload.target_line == 3));
}

TEST_CASE("unfinished traces are skipped") {
  const auto rec = make_record("T/0", "spin", "def spin(n):\n", "    while True:\n        n += 1\n", {"assert spin(1) == 1"});
  auto b = prepare(rec);
  CHECK(b.trace.terminated == tracer::Termination::timeout);
  CHECK_THROWS_AS(build_problems(b.record, b.trace, b.table, b.graph, {3}), BuildSkip);
}

TEST_CASE("next_statements") {
  const auto rec = make_record("L/0", "acc", "def acc(n):\n",
                               "    s = 0\n    for i in range(n):\n        s += i\n    return s\n", {"assert acc(3) == 3"});
  const auto b = prepare(rec);
  CHECK(next_statements(b.trace, b.table, index_at(b.table, 2)) == std::set<int>{3});
  // The header is revisited after every iteration, so the body's successor
  // is always the header and the header carries the loop exit.
  CHECK(next_statements(b.trace, b.table, index_at(b.table, 4)) == std::set<int>{3});
  CHECK(next_statements(b.trace, b.table, index_at(b.table, 3)) == std::set<int>{4, 5});
  CHECK(next_statements(b.trace, b.table, index_at(b.table, 5)) == std::set<int>{kExitLine});
  CHECK_THROWS_AS(next_statements(b.trace, b.table, index_at(b.table, 4), 4), NotExecuted);

  const auto zero = prepare(make_record("L/1", "acc", "def acc(n):\n",
                                        "    s = 0\n    for i in range(n):\n        s += i\n    return s\n",
                                        {"assert acc(0) == 0"}));
  CHECK_THROWS_AS(next_statements(zero.trace, zero.table, index_at(zero.table, 4)), NotExecuted);
}

TEST_CASE("state_after") {
  const auto rec = make_record("A/0", "h", "def h(n):\n",
                               "    a = 4\n    a += 1\n    s = 0\n    for i in range(n):\n        s += i\n    return a + s\n",
                               {"assert h(3) == 8"});
  const auto b = prepare(rec);
  CHECK(state_after(b.trace, b.table, index_at(b.table, 3), "a") == tracer::VariableSnapshot{"5", "int", true});
  // Second iteration of "s += i" with i = 1: 0 + 0 + 1.
  CHECK(state_after(b.trace, b.table, index_at(b.table, 6), "s", 2).value_repr == "1");
  CHECK(state_after(b.trace, b.table, index_at(b.table, 6), "s", 3).value_repr == "3");
  CHECK_THROWS_AS(state_after(b.trace, b.table, index_at(b.table, 2), "zz"), VariableAbsent);
  CHECK_THROWS_AS(state_after(b.trace, b.table, index_at(b.table, 6), "s", 4), NotExecuted);
}

TEST_CASE("mask_assertions") {
  const auto rec = make_record("M/0", "f", "def f(x):\n", "    return x\n",
                               {"assert f(15) == 5", "assert f(2) == 2", "assert f(3) == f(3)", "assert f([1]) == [1]"});
  const auto masked = mask_assertions(rec);
  REQUIRE(masked.size() == 3);
  CHECK(masked[0].masked_text == "assert f(15) == ??");
  CHECK(masked[0].expected_literal.text == "5");
  CHECK(masked[2].masked_text == "assert f([1]) == ??");
  CHECK(unmask(masked[2].masked_text, masked[2].expected_literal.text) == rec.assertions[3].text);
}

TEST_CASE("render_program numbers lines and inverts") {
  const std::string program = "def f():\n\n    return 1\n";
  const auto rendered = render_program(program);
  CHECK(rendered == "1 | def f():\n2 | \n3 |     return 1\n");
  CHECK(strip_line_numbers(rendered) == program);
  std::string long_program;
  for (int i = 0; i < 12; ++i) long_program += "x = " + std::to_string(i) + "\n";
  CHECK(render_program(long_program).rfind(" 1 | x = 0\n", 0) == 0);
  CHECK(strip_line_numbers(render_program(long_program)) == long_program);
}

TEST_CASE("fixture corpus invariants") {
  const auto records = corpus::load_corpus(test::fixture("humaneval_fixture.jsonl"), corpus::Format::humaneval_like);
  std::set<std::tuple<std::string, std::string, int, std::string, Task>> ids;
  for (const auto& r : records) {
    for (std::size_t in = 0; in < r.test_inputs.size(); ++in) {
      const auto b = prepare(r, in);
      std::vector<ProblemInstance> ps;
      try {
        ps = build_problems(b.record, b.trace, b.table, b.graph, {3});
      } catch (const BuildSkip&) {
        continue;
      }
      std::map<ProblemKey, std::map<Task, const ProblemInstance*>> by_key;
      for (const auto& p : ps) {
        CHECK(ids.emplace(p.key.record_id, p.key.input_id, p.key.stmt_index, p.key.variable, p.task).second);
        by_key[p.key][p.task] = &p;
        CHECK(problem_from_json(nlohmann::json::parse(to_json(p).dump())) == p);
      }
      for (const auto& [key, tasks] : by_key) {
        if (tasks.count(Task::PSP) == 0) {
          CHECK(tasks.size() == 1);
          continue;
        }
        REQUIRE(tasks.size() == 4);
        for (const auto& [t, p] : tasks) CHECK(p->rendered_program == tasks.at(Task::CCP)->rendered_program);
        const auto* ccp = tasks.at(Task::CCP);
        CHECK(*ccp->ground_truth.coverage ==
              (b.trace.executed_lines.count(ccp->question_payload.target_line) != 0));
        CHECK(tasks.at(Task::PSP)->ground_truth.value_type->representable);
        // Every EPP successor is observed: some occurrence of the site is
        // followed, in the same frame, by that line (or by the frame's return).
        const int line = tasks.at(Task::EPP)->question_payload.target_line;
        for (int next : tasks.at(Task::EPP)->ground_truth.next_lines) {
          bool seen = false;
          for (std::size_t i = 0; i < b.trace.steps.size() && !seen; ++i) {
            const auto& s = b.trace.steps[i];
            if (s.event != tracer::StepEvent::stmt || s.line_no != line) continue;
            for (std::size_t j = i + 1; j < b.trace.steps.size(); ++j) {
              const auto& n = b.trace.steps[j];
              if (n.frame_id != s.frame_id) continue;
              seen = (next == kExitLine) ? n.event == tracer::StepEvent::return_event
                                         : n.event == tracer::StepEvent::stmt && n.line_no == next;
              break;
            }
          }
          CHECK_MESSAGE(seen, key.record_id << " line " << line << " -> " << next);
          CHECK((next == kExitLine || b.trace.executed_lines.count(next) != 0));
        }
      }
    }
  }
  CHECK(ids.size() > 40);
}
