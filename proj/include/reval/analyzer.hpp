// SPDX-License-Identifier: Apache-2.0
//
// Static analysis of subject programs: statement numbering, basic blocks over
// the control-flow graph, and selection of question sites and state targets.
#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "reval/tracer.hpp"

namespace reval::analyzer {

enum class StmtKind { assign, aug_assign, return_stmt, branch_head, loop_head, call_stmt, other };

std::string_view to_string(StmtKind kind);

struct StatementEntry {
  int stmt_index = 0;  // 1-based
  int line_no = 0;
  /// Last line owned by the statement (header end for compound statements).
  int end_line = 0;
  std::string text;
  StmtKind kind = StmtKind::other;
  int function_id = 0;
  /// Assignment or loop targets: identifiers, subscript bases, `self.<attr>`.
  std::vector<std::string> targets;
  bool trivial_init = false;
  bool constant_rhs = false;
  /// Local names read by a return expression, in source order.
  std::vector<std::string> return_names;
};

struct StatementTable {
  std::vector<StatementEntry> entries;

  const StatementEntry& at(int stmt_index) const;
  /// Entry owning a source line, if any (continuation lines included).
  const StatementEntry* owning(int line_no) const;
  const StatementEntry* at_line(int line_no) const;
};

// Statement tree of a function body as reported by the subject runtime.
struct SyntaxNode {
  int line = 0;
  std::string node_type;
  bool folded = false;
  std::vector<SyntaxNode> body;
  std::vector<SyntaxNode> orelse;
  std::vector<SyntaxNode> finalbody;
  std::vector<std::vector<SyntaxNode>> handlers;
  std::vector<std::vector<SyntaxNode>> cases;
};

struct FunctionBody {
  int function_id = 0;
  std::string name;
  int def_line = 0;
  std::vector<SyntaxNode> body;
};

struct ProgramStructure {
  StatementTable table;
  std::vector<FunctionBody> functions;
};

/// Parses and indexes a program. Results are memoized by program text.
/// Throws ParseError.
std::shared_ptr<const ProgramStructure> analyze(std::string_view program);

StatementTable index_statements(std::string_view program);

struct Block {
  int block_id = 0;
  std::vector<int> stmt_indices;
  int terminal_stmt = 0;
};

inline constexpr int kExitStmt = 0;

struct BlockGraph {
  std::vector<Block> blocks;
  std::set<std::pair<int, int>> edges;
  /// Statement-level control-flow successors; kExitStmt marks function exit.
  std::map<int, std::set<int>> successors;
  /// First statement of each function body, keyed by function id.
  std::map<int, int> function_entries;

  int block_of(int stmt_index) const;
  bool is_terminal(int stmt_index) const;
};

BlockGraph build_blocks(const StatementTable& table, std::string_view program);

/// Question sites ranked for one traced input: terminals of ordinary blocks,
/// then branch/loop-head terminals, then the remaining statements. Within a
/// tier executed and unexecuted statements alternate, lowest index first.
std::vector<int> select_sites(const StatementTable& table, const BlockGraph& graph,
                              const tracer::Trace& trace, std::size_t budget);

enum class PspRule { assign_lhs, aug_assign, return_var, nearest_var, changed_new, changed_var, changed_attr };

std::string_view to_string(PspRule rule);

struct PspTarget {
  int stmt_index = 0;
  std::string variable;
  PspRule source_rule = PspRule::assign_lhs;
  friend bool operator==(const PspTarget&, const PspTarget&) = default;
};

/// At most one target per executed statement, judged at the statement's
/// first dynamic occurrence.
std::vector<PspTarget> select_psp_targets(const StatementTable& table, const tracer::Trace& trace);

}  // namespace reval::analyzer
