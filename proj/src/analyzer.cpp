// SPDX-License-Identifier: Apache-2.0
#include "reval/analyzer.hpp"

#include <algorithm>
#include <mutex>
#include <unordered_map>

#include "reval/runtime.hpp"

namespace reval::analyzer {
namespace {

using nlohmann::json;

StmtKind kind_from_string(std::string_view text) {
  if (text == "assign") return StmtKind::assign;
  if (text == "aug_assign") return StmtKind::aug_assign;
  if (text == "return_stmt") return StmtKind::return_stmt;
  if (text == "branch_head") return StmtKind::branch_head;
  if (text == "loop_head") return StmtKind::loop_head;
  if (text == "call_stmt") return StmtKind::call_stmt;
  return StmtKind::other;
}

bool is_head(StmtKind kind) { return kind == StmtKind::branch_head || kind == StmtKind::loop_head; }

std::vector<SyntaxNode> read_nodes(const json& list, std::vector<StatementEntry>& entries);

SyntaxNode read_node(const json& node, std::vector<StatementEntry>& entries) {
  SyntaxNode out;
  out.line = node.at("line").get<int>();
  out.node_type = node.at("node_type").get<std::string>();
  out.folded = node.at("folded").get<bool>();
  if (!out.folded) {
    StatementEntry e;
    e.line_no = out.line;
    e.end_line = node.at("end_line").get<int>();
    e.text = node.at("text").get<std::string>();
    e.kind = kind_from_string(node.at("kind").get<std::string>());
    e.function_id = node.at("function_id").get<int>();
    e.targets = node.at("targets").get<std::vector<std::string>>();
    e.trivial_init = node.at("trivial_init").get<bool>();
    e.constant_rhs = node.at("constant_rhs").get<bool>();
    e.return_names = node.at("return_names").get<std::vector<std::string>>();
    entries.push_back(std::move(e));
  }
  if (node.contains("body")) out.body = read_nodes(node["body"], entries);
  if (node.contains("orelse")) out.orelse = read_nodes(node["orelse"], entries);
  if (node.contains("finalbody")) out.finalbody = read_nodes(node["finalbody"], entries);
  if (node.contains("handlers")) {
    for (const auto& h : node["handlers"]) out.handlers.push_back(read_nodes(h, entries));
  }
  if (node.contains("cases")) {
    for (const auto& c : node["cases"]) out.cases.push_back(read_nodes(c, entries));
  }
  return out;
}

std::vector<SyntaxNode> read_nodes(const json& list, std::vector<StatementEntry>& entries) {
  std::vector<SyntaxNode> out;
  for (const auto& node : list) out.push_back(read_node(node, entries));
  return out;
}

std::shared_ptr<const ProgramStructure> analyze_uncached(std::string_view program) {
  const auto reply = runtime::call_helper({{"mode", "analyze"}, {"source", program}}, 60.0);
  if (reply.value("timed_out", false)) {
    throw RuntimeUnavailable("analysis timed out");
  }
  if (!reply.value("ok", false)) {
    throw ParseError(reply.value("error", std::string("parse failure")));
  }
  auto structure = std::make_shared<ProgramStructure>();
  std::vector<StatementEntry> entries;
  for (const auto& fn : reply.at("functions")) {
    FunctionBody body;
    body.function_id = fn.at("function_id").get<int>();
    body.name = fn.at("name").get<std::string>();
    body.def_line = fn.at("def_line").get<int>();
    body.body = read_nodes(fn.at("body"), entries);
    structure->functions.push_back(std::move(body));
  }
  std::sort(entries.begin(), entries.end(),
            [](const StatementEntry& a, const StatementEntry& b) { return a.line_no < b.line_no; });
  for (std::size_t i = 0; i < entries.size(); ++i) {
    entries[i].stmt_index = static_cast<int>(i) + 1;
  }
  structure->table.entries = std::move(entries);
  return structure;
}

// -- control flow -----------------------------------------------------------

struct LoopContext {
  int head = kExitStmt;
  int after = kExitStmt;
};

class CfgBuilder {
 public:
  explicit CfgBuilder(const StatementTable& table) : table_(table) {}

  std::map<int, std::set<int>> successors;

  int index_of(const SyntaxNode& node) const {
    const auto* entry = table_.owning(node.line);
    return entry == nullptr ? kExitStmt : entry->stmt_index;
  }

  int entry_of(const std::vector<SyntaxNode>& list, int follow) const {
    return list.empty() ? follow : index_of(list.front());
  }

  void link(int from, int to) {
    if (from == kExitStmt || from == to) return;
    successors[from].insert(to);
  }

  void build_list(const std::vector<SyntaxNode>& list, int follow, const LoopContext* loop) {
    for (std::size_t i = 0; i < list.size(); ++i) {
      const int next = i + 1 < list.size() ? index_of(list[i + 1]) : follow;
      build_node(list[i], next, loop);
    }
  }

  void build_node(const SyntaxNode& node, int next, const LoopContext* loop) {
    const int self = index_of(node);
    successors.try_emplace(self);
    const auto& type = node.node_type;
    if (type == "If") {
      link(self, entry_of(node.body, next));
      link(self, entry_of(node.orelse, next));
      build_list(node.body, next, loop);
      build_list(node.orelse, next, loop);
    } else if (type == "For" || type == "AsyncFor" || type == "While") {
      const LoopContext inner{self, next};
      link(self, entry_of(node.body, self));
      link(self, entry_of(node.orelse, next));
      build_list(node.body, self, &inner);
      build_list(node.orelse, next, loop);
    } else if (type == "Try" || type == "TryStar") {
      const int finally_entry = entry_of(node.finalbody, next);
      const int else_entry = entry_of(node.orelse, finally_entry);
      link(self, entry_of(node.body, else_entry));
      build_list(node.body, else_entry, loop);
      for (const auto& handler : node.handlers) {
        link(self, entry_of(handler, finally_entry));
        build_list(handler, finally_entry, loop);
      }
      build_list(node.orelse, finally_entry, loop);
      build_list(node.finalbody, next, loop);
    } else if (type == "With" || type == "AsyncWith") {
      // The runtime revisits the header when the context manager exits.
      link(self, entry_of(node.body, self));
      link(self, next);
      build_list(node.body, self, loop);
    } else if (type == "Match") {
      for (const auto& c : node.cases) {
        link(self, entry_of(c, next));
        build_list(c, next, loop);
      }
      link(self, next);
    } else if (type == "Return" || type == "Raise") {
      link(self, kExitStmt);
    } else if (type == "Break") {
      link(self, loop != nullptr ? loop->after : next);
    } else if (type == "Continue") {
      link(self, loop != nullptr ? loop->head : next);
    } else {
      link(self, next);
    }
  }

 private:
  const StatementTable& table_;
};

std::mutex g_cache_mutex;
std::unordered_map<std::string, std::shared_ptr<const ProgramStructure>> g_cache;

// First stmt step at `line`; steps.size() when the line never executed.
std::size_t first_occurrence(const tracer::Trace& trace, int line) {
  for (std::size_t i = 0; i < trace.steps.size(); ++i) {
    const auto& s = trace.steps[i];
    if (s.event == tracer::StepEvent::stmt && s.line_no == line) return i;
  }
  return trace.steps.size();
}

const tracer::ProgramState* state_before(const tracer::Trace& trace, std::size_t step) {
  const int frame = trace.steps[step].frame_id;
  for (std::size_t i = step; i-- > 0;) {
    if (trace.steps[i].frame_id == frame) return &trace.steps[i].state_after;
  }
  return nullptr;
}

bool admissible(const tracer::ProgramState& state, const std::string& name) {
  const auto* snap = state.find(name);
  return snap != nullptr && snap->representable;
}

std::optional<PspTarget> dynamic_target(int stmt_index, const tracer::ProgramState* before,
                                        const tracer::ProgramState& after) {
  std::optional<std::string> fresh, changed, attr;
  for (const auto& [name, snap] : after.bindings) {
    if (!snap.representable) continue;
    const auto* old = before != nullptr ? before->find(name) : nullptr;
    const bool is_attr = name.rfind("self.", 0) == 0;
    const bool differs = old == nullptr || !(*old == snap);
    if (!differs) continue;
    if (is_attr) {
      if (!attr) attr = name;
    } else if (old == nullptr) {
      if (!fresh) fresh = name;
    } else if (!changed) {
      changed = name;
    }
  }
  if (fresh) return PspTarget{stmt_index, *fresh, PspRule::changed_new};
  if (changed) return PspTarget{stmt_index, *changed, PspRule::changed_var};
  if (attr) return PspTarget{stmt_index, *attr, PspRule::changed_attr};
  return std::nullopt;
}

}  // namespace

std::string_view to_string(StmtKind kind) {
  switch (kind) {
    case StmtKind::assign: return "assign";
    case StmtKind::aug_assign: return "aug_assign";
    case StmtKind::return_stmt: return "return_stmt";
    case StmtKind::branch_head: return "branch_head";
    case StmtKind::loop_head: return "loop_head";
    case StmtKind::call_stmt: return "call_stmt";
    case StmtKind::other: return "other";
  }
  return "?";
}

std::string_view to_string(PspRule rule) {
  switch (rule) {
    case PspRule::assign_lhs: return "assign_lhs";
    case PspRule::aug_assign: return "aug_assign";
    case PspRule::return_var: return "return_var";
    case PspRule::nearest_var: return "nearest_var";
    case PspRule::changed_new: return "changed_new";
    case PspRule::changed_var: return "changed_var";
    case PspRule::changed_attr: return "changed_attr";
  }
  return "?";
}

const StatementEntry& StatementTable::at(int stmt_index) const {
  if (stmt_index < 1 || static_cast<std::size_t>(stmt_index) > entries.size()) {
    throw std::out_of_range("statement index " + std::to_string(stmt_index));
  }
  return entries[static_cast<std::size_t>(stmt_index) - 1];
}

const StatementEntry* StatementTable::owning(int line_no) const {
  // Entries are sorted by line; the owner is the last entry starting at or
  // before the line whose span covers it.
  auto it = std::upper_bound(entries.begin(), entries.end(), line_no,
                             [](int line, const StatementEntry& e) { return line < e.line_no; });
  while (it != entries.begin()) {
    --it;
    if (it->line_no <= line_no && line_no <= it->end_line) return &*it;
    if (it->line_no < line_no) break;
  }
  return nullptr;
}

const StatementEntry* StatementTable::at_line(int line_no) const {
  auto it = std::lower_bound(entries.begin(), entries.end(), line_no,
                             [](const StatementEntry& e, int line) { return e.line_no < line; });
  return it != entries.end() && it->line_no == line_no ? &*it : nullptr;
}

std::shared_ptr<const ProgramStructure> analyze(std::string_view program) {
  const std::string key(program);
  {
    std::lock_guard lock(g_cache_mutex);
    if (auto it = g_cache.find(key); it != g_cache.end()) return it->second;
  }
  auto structure = analyze_uncached(program);
  std::lock_guard lock(g_cache_mutex);
  return g_cache.try_emplace(key, std::move(structure)).first->second;
}

StatementTable index_statements(std::string_view program) { return analyze(program)->table; }

int BlockGraph::block_of(int stmt_index) const {
  for (const auto& block : blocks) {
    if (std::find(block.stmt_indices.begin(), block.stmt_indices.end(), stmt_index) !=
        block.stmt_indices.end()) {
      return block.block_id;
    }
  }
  return -1;
}

bool BlockGraph::is_terminal(int stmt_index) const {
  return std::any_of(blocks.begin(), blocks.end(),
                     [&](const Block& b) { return b.terminal_stmt == stmt_index; });
}

BlockGraph build_blocks(const StatementTable& table, std::string_view program) {
  const auto structure = analyze(program);
  CfgBuilder builder(table);
  BlockGraph graph;
  for (const auto& fn : structure->functions) {
    if (fn.body.empty()) continue;
    graph.function_entries[fn.function_id] = builder.entry_of(fn.body, kExitStmt);
    builder.build_list(fn.body, kExitStmt, nullptr);
  }
  graph.successors = std::move(builder.successors);

  const int n = static_cast<int>(table.entries.size());
  std::vector<int> pred_count(static_cast<std::size_t>(n) + 1, 0);
  std::vector<int> sole_pred(static_cast<std::size_t>(n) + 1, kExitStmt);
  for (const auto& [from, targets] : graph.successors) {
    for (int to : targets) {
      if (to == kExitStmt) continue;
      ++pred_count[static_cast<std::size_t>(to)];
      sole_pred[static_cast<std::size_t>(to)] = from;
    }
  }
  std::set<int> entry_points;
  for (const auto& [fid, entry] : graph.function_entries) entry_points.insert(entry);

  auto succ_count = [&](int s) {
    auto it = graph.successors.find(s);
    return it == graph.successors.end() ? 0 : static_cast<int>(it->second.size());
  };
  auto leader = [&](int s) {
    if (entry_points.count(s) != 0 || is_head(table.at(s).kind)) return true;
    if (pred_count[static_cast<std::size_t>(s)] != 1) return true;
    const int p = sole_pred[static_cast<std::size_t>(s)];
    return succ_count(p) != 1 || is_head(table.at(p).kind);
  };

  std::vector<bool> placed(static_cast<std::size_t>(n) + 1, false);
  for (int s = 1; s <= n; ++s) {
    if (placed[static_cast<std::size_t>(s)] || !leader(s)) continue;
    Block block;
    int current = s;
    while (true) {
      block.stmt_indices.push_back(current);
      placed[static_cast<std::size_t>(current)] = true;
      if (is_head(table.at(current).kind) || succ_count(current) != 1) break;
      const int next = *graph.successors[current].begin();
      if (next == kExitStmt || placed[static_cast<std::size_t>(next)] || leader(next)) break;
      current = next;
    }
    block.terminal_stmt = block.stmt_indices.back();
    graph.blocks.push_back(std::move(block));
  }
  for (int s = 1; s <= n; ++s) {
    if (!placed[static_cast<std::size_t>(s)]) {
      graph.blocks.push_back(Block{0, {s}, s});
    }
  }
  std::sort(graph.blocks.begin(), graph.blocks.end(),
            [](const Block& a, const Block& b) { return a.stmt_indices.front() < b.stmt_indices.front(); });
  std::vector<int> block_index(static_cast<std::size_t>(n) + 1, -1);
  for (std::size_t i = 0; i < graph.blocks.size(); ++i) {
    graph.blocks[i].block_id = static_cast<int>(i);
    for (int s : graph.blocks[i].stmt_indices) block_index[static_cast<std::size_t>(s)] = static_cast<int>(i);
  }
  for (const auto& block : graph.blocks) {
    auto it = graph.successors.find(block.terminal_stmt);
    if (it == graph.successors.end()) continue;
    for (int to : it->second) {
      if (to == kExitStmt) continue;
      graph.edges.emplace(block.block_id, block_index[static_cast<std::size_t>(to)]);
    }
  }
  return graph;
}

std::vector<int> select_sites(const StatementTable& table, const BlockGraph& graph,
                              const tracer::Trace& trace, std::size_t budget) {
  if (budget == 0 || table.entries.empty()) return {};
  std::vector<int> ordinary, heads, rest;
  std::set<int> terminals;
  for (const auto& block : graph.blocks) terminals.insert(block.terminal_stmt);
  for (const auto& e : table.entries) {
    if (terminals.count(e.stmt_index) == 0) {
      rest.push_back(e.stmt_index);
    } else if (is_head(e.kind)) {
      heads.push_back(e.stmt_index);
    } else {
      ordinary.push_back(e.stmt_index);
    }
  }
  std::vector<int> ranked;
  auto interleave = [&](const std::vector<int>& tier) {
    std::vector<int> covered, uncovered;
    for (int s : tier) {
      (trace.executed_lines.count(table.at(s).line_no) != 0 ? covered : uncovered).push_back(s);
    }
    std::size_t i = 0, j = 0;
    while (i < covered.size() || j < uncovered.size()) {
      if (i < covered.size()) ranked.push_back(covered[i++]);
      if (j < uncovered.size()) ranked.push_back(uncovered[j++]);
    }
  };
  interleave(ordinary);
  interleave(heads);
  interleave(rest);
  if (ranked.size() > budget) ranked.resize(budget);
  return ranked;
}

std::vector<PspTarget> select_psp_targets(const StatementTable& table, const tracer::Trace& trace) {
  std::vector<PspTarget> out;
  for (const auto& entry : table.entries) {
    const auto step = first_occurrence(trace, entry.line_no);
    if (step == trace.steps.size()) continue;
    const auto& after = trace.steps[step].state_after;
    std::optional<PspTarget> target;
    switch (entry.kind) {
      case StmtKind::assign:
        if (entry.trivial_init) break;
        for (const auto& name : entry.targets) {
          if (admissible(after, name)) {
            target = PspTarget{entry.stmt_index, name, PspRule::assign_lhs};
            break;
          }
        }
        break;
      case StmtKind::aug_assign:
        for (const auto& name : entry.targets) {
          if (admissible(after, name)) {
            target = PspTarget{entry.stmt_index, name, PspRule::aug_assign};
            break;
          }
        }
        break;
      case StmtKind::return_stmt:
        for (const auto& name : entry.return_names) {
          if (admissible(after, name)) {
            target = PspTarget{entry.stmt_index, name, PspRule::return_var};
            break;
          }
        }
        for (int k = entry.stmt_index - 1; !target && k >= 1; --k) {
          const auto& prior = table.at(k);
          if (prior.function_id != entry.function_id) continue;
          const bool variable_source = (prior.kind == StmtKind::assign && !prior.constant_rhs) ||
                                       prior.kind == StmtKind::aug_assign ||
                                       prior.kind == StmtKind::loop_head;
          if (!variable_source) continue;
          for (const auto& name : prior.targets) {
            if (admissible(after, name)) {
              target = PspTarget{entry.stmt_index, name, PspRule::nearest_var};
              break;
            }
          }
        }
        break;
      default:
        target = dynamic_target(entry.stmt_index, state_before(trace, step), after);
    }
    if (target) out.push_back(std::move(*target));
  }
  return out;
}

}  // namespace reval::analyzer
