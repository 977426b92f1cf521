// SPDX-License-Identifier: Apache-2.0
#include "doctest.h"
#include "reval/analyzer.hpp"
#include "reval/corpus.hpp"
#include "support.hpp"

using namespace reval;
using namespace reval::analyzer;

namespace {

const std::string kBranch =
    "def g(c):\n"
    "    if c:\n"
    "        a = 1\n"
    "    else:\n"
    "        a = 2\n"
    "    return a\n";

std::set<std::pair<int, int>> edges(const BlockGraph& g) { return g.edges; }

void check_partition(const StatementTable& table, const BlockGraph& graph) {
  std::map<int, int> seen;
  for (const auto& b : graph.blocks) {
    REQUIRE_FALSE(b.stmt_indices.empty());
    CHECK(b.terminal_stmt == b.stmt_indices.back());
    for (int s : b.stmt_indices) ++seen[s];
    // Inside a block control flows straight through.
    for (std::size_t i = 0; i + 1 < b.stmt_indices.size(); ++i) {
      CHECK(graph.successors.at(b.stmt_indices[i]) == std::set<int>{b.stmt_indices[i + 1]});
    }
  }
  CHECK(seen.size() == table.entries.size());
  for (const auto& [s, n] : seen) CHECK(n == 1);
}

}  // namespace

TEST_CASE("statement table numbering") {
  const auto table = index_statements(
      "def f(x):\n"
      "    \"\"\"Doc.\"\"\"\n"
      "    a = 1; b = 2\n"
      "    if x: return a\n"
      "    total = (a +\n"
      "             b)\n"
      "    pass\n"
      "    return total\n");
  REQUIRE(table.entries.size() == 5);
  CHECK(table.at(1).line_no == 3);
  CHECK(table.at(2).line_no == 4);
  CHECK(table.at(2).kind == StmtKind::branch_head);
  CHECK(table.at(3).kind == StmtKind::assign);
  CHECK(table.at(3).end_line == 6);
  CHECK(table.owning(6)->stmt_index == 3);
  CHECK(table.at(4).text == "pass");
  CHECK(table.at(5).kind == StmtKind::return_stmt);
  CHECK(table.at(5).return_names == std::vector<std::string>{"total"});
  CHECK(table.at_line(2) == nullptr);
  CHECK_THROWS_AS(table.at(6), std::out_of_range);
  CHECK_THROWS_AS(index_statements("def f(:\n"), ParseError);
}

TEST_CASE("if/else gives four blocks") {
  const auto table = index_statements(kBranch);
  const auto graph = build_blocks(table, kBranch);
  REQUIRE(graph.blocks.size() == 4);
  CHECK(edges(graph) == std::set<std::pair<int, int>>{{0, 1}, {0, 2}, {1, 3}, {2, 3}});
  CHECK(graph.successors.at(4) == std::set<int>{kExitStmt});
  check_partition(table, graph);
}

TEST_CASE("loop body forms one block with a back edge") {
  const std::string program =
      "def f(n):\n"
      "    while n > 0:\n"
      "        n -= 1\n"
      "        k = n\n"
      "    return n\n";
  const auto table = index_statements(program);
  const auto graph = build_blocks(table, program);
  REQUIRE(graph.blocks.size() == 3);
  CHECK(graph.blocks[1].stmt_indices == std::vector<int>{2, 3});
  CHECK(edges(graph) == std::set<std::pair<int, int>>{{0, 1}, {0, 2}, {1, 0}});
}

TEST_CASE("break, continue and try edges") {
  const std::string program =
      "def f(xs):\n"
      "    for x in xs:\n"
      "        if x is None:\n"
      "            continue\n"
      "        if x < 0:\n"
      "            break\n"
      "    try:\n"
      "        y = 1 // x\n"
      "    except ZeroDivisionError:\n"
      "        y = 0\n"
      "    return y\n";
  const auto table = index_statements(program);
  const auto graph = build_blocks(table, program);
  auto idx = [&](int line) { return table.at_line(line)->stmt_index; };
  CHECK(graph.successors.at(idx(4)) == std::set<int>{idx(2)});
  CHECK(graph.successors.at(idx(6)) == std::set<int>{idx(7)});
  CHECK(graph.successors.at(idx(2)) == std::set<int>{idx(3), idx(7)});
  CHECK(graph.successors.at(idx(7)) == std::set<int>{idx(8), idx(10)});
  CHECK(graph.successors.at(idx(8)) == std::set<int>{idx(11)});
  check_partition(table, graph);
}

TEST_CASE("blocks partition every fixture program") {
  for (auto [file, format] : {std::pair{"humaneval_fixture.jsonl", corpus::Format::humaneval_like},
                              std::pair{"classeval_fixture.jsonl", corpus::Format::classeval_like}}) {
    for (const auto& r : corpus::load_corpus(test::fixture(file), format)) {
      CAPTURE(r.record_id);
      const auto program = corpus::traced_program(r);
      const auto table = index_statements(program);
      for (std::size_t i = 0; i < table.entries.size(); ++i) {
        CHECK(table.entries[i].stmt_index == static_cast<int>(i) + 1);
        if (i > 0) CHECK(table.entries[i - 1].line_no < table.entries[i].line_no);
      }
      check_partition(table, build_blocks(table, program));
    }
  }
}

TEST_CASE("site ranking prefers executed block terminals") {
  const auto table = index_statements(kBranch);
  const auto graph = build_blocks(table, kBranch);
  const auto trace = tracer::trace_execution(kBranch, "g(True)", {});
  const auto all = select_sites(table, graph, trace, 10);
  // Terminals of ordinary blocks first (executed 2 and 4 interleaved with
  // unexecuted 3), then the branch head.
  CHECK(all == std::vector<int>{2, 3, 4, 1});
  CHECK(select_sites(table, graph, trace, 2) == std::vector<int>{2, 3});
  CHECK(select_sites(table, graph, trace, 0).empty());
}

TEST_CASE("psp targets by statement kind") {
  const std::string program =
      "class P:\n"
      "    def __init__(self):\n"
      "        self.v = 0\n"
      "\n"
      "    def bump(self, k):\n"
      "        self.v += k\n"
      "        return self.v\n"
      "\n"
      "\n"
      "def f(n):\n"
      "    s = 0\n"
      "    y = n + 1\n"
      "    s += y\n"
      "    items = []\n"
      "    items.append(s)\n"
      "    p = P()\n"
      "    p.bump(2)\n"
      "    return s * 2\n"
      "\n"
      "\n"
      "def g():\n"
      "    t = f(1)\n"
      "    return 7\n";
  const auto table = index_statements(program);
  const auto trace = tracer::trace_execution(program, "g()", {});
  std::map<int, PspTarget> by_line;
  for (const auto& t : select_psp_targets(table, trace)) by_line[table.at(t.stmt_index).line_no] = t;

  CHECK(by_line.count(11) == 0);  // trivial initialization
  CHECK(by_line.at(12).variable == "y");
  CHECK(by_line.at(12).source_rule == PspRule::assign_lhs);
  CHECK(by_line.at(13).variable == "s");
  CHECK(by_line.at(13).source_rule == PspRule::aug_assign);
  CHECK(by_line.count(14) == 0);
  CHECK(by_line.at(15).variable == "items");
  CHECK(by_line.at(15).source_rule == PspRule::changed_var);
  CHECK(by_line.at(16).variable == "p");
  CHECK(by_line.at(17).source_rule == PspRule::changed_var);
  CHECK(by_line.at(18).variable == "s");
  CHECK(by_line.at(18).source_rule == PspRule::return_var);
  CHECK(by_line.at(6).variable == "self.v");
  CHECK(by_line.at(7).variable == "self.v");
  CHECK(by_line.at(22).variable == "t");
  CHECK(by_line.at(23).variable == "t");
  CHECK(by_line.at(23).source_rule == PspRule::nearest_var);
}
