// SPDX-License-Identifier: Apache-2.0
#include "reval/builder.hpp"

#include <algorithm>
#include <map>

#include <spdlog/spdlog.h>

namespace reval::builder {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

// Step indices of the stmt events at a line, in execution order.
std::vector<std::size_t> occurrences(const tracer::Trace& trace, int line) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < trace.steps.size(); ++i) {
    const auto& s = trace.steps[i];
    if (s.event == tracer::StepEvent::stmt && s.line_no == line) out.push_back(i);
  }
  return out;
}

int parse_line_label(const json& value) {
  if (value.is_string() && value.get<std::string>() == "EXIT") return kExitLine;
  return value.get<int>();
}

}  // namespace

std::string line_label(int line) { return line == kExitLine ? "EXIT" : std::to_string(line); }

ordered_json to_json(const ProblemKey& key) {
  ordered_json out;
  out["record_id"] = key.record_id;
  out["input_id"] = key.input_id;
  out["stmt_index"] = key.stmt_index;
  out["variable"] = key.variable;
  return out;
}

ProblemKey key_from_json(const json& value) {
  return {value.at("record_id").get<std::string>(), value.at("input_id").get<std::string>(),
          value.at("stmt_index").get<int>(), value.at("variable").get<std::string>()};
}

ordered_json to_json(const ProblemInstance& problem) {
  ordered_json out;
  out["key"] = to_json(problem.key);
  out["task"] = to_string(problem.task);
  out["rendered_program"] = problem.rendered_program;

  const auto& q = problem.question_payload;
  ordered_json payload;
  payload["invocation"] = q.invocation;
  if (problem.task == Task::OP) {
    payload["masked_assertion"] = q.masked_assertion;
  } else {
    payload["target_line"] = q.target_line;
    payload["statement_text"] = q.statement_text;
    if (problem.task == Task::PSP) payload["variable"] = q.variable;
  }
  out["question_payload"] = payload;

  const auto& g = problem.ground_truth;
  ordered_json truth;
  switch (problem.task) {
    case Task::CCP:
      truth["coverage"] = g.coverage.value_or(false);
      break;
    case Task::PSP:
      truth["value_repr"] = g.value_type ? g.value_type->value_repr : "";
      truth["type_name"] = g.value_type ? g.value_type->type_name : "";
      truth["representable"] = g.value_type ? g.value_type->representable : false;
      truth["occurrence"] = g.occurrence;
      break;
    case Task::EPP: {
      ordered_json lines = ordered_json::array();
      for (int line : g.next_lines) {
        if (line == kExitLine) {
          lines.push_back("EXIT");
        } else {
          lines.push_back(line);
        }
      }
      truth["next_lines"] = lines;
      truth["occurrence"] = g.occurrence;
      break;
    }
    case Task::OP:
      truth["expected_literal"] = g.expected_literal ? g.expected_literal->text : "";
      truth["assertion"] = g.owning_assertion;
      truth["grading_prelude"] = g.grading_prelude;
      break;
  }
  out["ground_truth"] = truth;
  return out;
}

ProblemInstance problem_from_json(const json& value) {
  ProblemInstance p;
  try {
    p.key = key_from_json(value.at("key"));
    p.task = task_from_string(value.at("task").get<std::string>());
    p.rendered_program = value.at("rendered_program").get<std::string>();
    const auto& payload = value.at("question_payload");
    p.question_payload.invocation = payload.at("invocation").get<std::string>();
    p.question_payload.masked_assertion = payload.value("masked_assertion", std::string());
    p.question_payload.target_line = payload.value("target_line", 0);
    p.question_payload.statement_text = payload.value("statement_text", std::string());
    p.question_payload.variable = payload.value("variable", std::string());
    const auto& truth = value.at("ground_truth");
    auto& g = p.ground_truth;
    switch (p.task) {
      case Task::CCP:
        g.coverage = truth.at("coverage").get<bool>();
        break;
      case Task::PSP:
        g.value_type = tracer::VariableSnapshot{truth.at("value_repr").get<std::string>(),
                                                truth.at("type_name").get<std::string>(),
                                                truth.value("representable", true)};
        g.occurrence = truth.value("occurrence", 1);
        break;
      case Task::EPP:
        for (const auto& line : truth.at("next_lines")) g.next_lines.insert(parse_line_label(line));
        g.occurrence = truth.value("occurrence", 1);
        break;
      case Task::OP:
        g.expected_literal = LiteralValue{truth.at("expected_literal").get<std::string>()};
        g.owning_assertion = truth.at("assertion").get<std::string>();
        g.grading_prelude = truth.value("grading_prelude", std::string());
        break;
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed problem: ") + e.what());
  }
  return p;
}

std::set<int> next_statements(const tracer::Trace& trace, const analyzer::StatementTable& table,
                              int stmt_index, int occurrence) {
  const int line = table.at(stmt_index).line_no;
  const auto at = occurrences(trace, line);
  if (at.empty() || static_cast<std::size_t>(occurrence) > at.size()) {
    throw NotExecuted("statement " + std::to_string(stmt_index) + " executed " +
                      std::to_string(at.size()) + " time(s)");
  }
  std::set<int> out;
  for (std::size_t i : at) {
    const int frame = trace.steps[i].frame_id;
    for (std::size_t j = i + 1; j < trace.steps.size(); ++j) {
      const auto& s = trace.steps[j];
      if (s.frame_id != frame) continue;
      if (s.event == tracer::StepEvent::stmt) {
        out.insert(s.line_no);
        break;
      }
      if (s.event == tracer::StepEvent::return_event) {
        out.insert(kExitLine);
        break;
      }
    }
  }
  return out;
}

tracer::VariableSnapshot state_after(const tracer::Trace& trace,
                                     const analyzer::StatementTable& table, int stmt_index,
                                     const std::string& variable, int occurrence) {
  const auto at = occurrences(trace, table.at(stmt_index).line_no);
  if (occurrence < 1 || static_cast<std::size_t>(occurrence) > at.size()) {
    throw NotExecuted("statement " + std::to_string(stmt_index) + " has no occurrence " +
                      std::to_string(occurrence));
  }
  const auto& state = trace.steps[at[static_cast<std::size_t>(occurrence) - 1]].state_after;
  const auto* snap = state.find(variable);
  if (snap == nullptr) {
    throw VariableAbsent("'" + variable + "' not bound after statement " + std::to_string(stmt_index));
  }
  return *snap;
}

std::vector<MaskedAssertion> mask_assertions(const corpus::BenchmarkRecord& record) {
  std::vector<MaskedAssertion> out;
  for (std::size_t i = 0; i < record.assertions.size(); ++i) {
    const auto& a = record.assertions[i];
    if (!a.rhs_literal) {
      spdlog::debug("{}: assertion {} has no literal right operand, not masked", record.record_id, i + 1);
      continue;
    }
    MaskedAssertion m;
    m.masked_text = a.text.substr(0, a.rhs_begin) + std::string(kMaskToken) + a.text.substr(a.rhs_end);
    m.expected_literal = *a.rhs_literal;
    m.assertion_index = i;
    m.invocation_text = a.invocation_text;
    out.push_back(std::move(m));
  }
  return out;
}

std::string unmask(std::string_view masked_text, std::string_view literal) {
  std::string out(masked_text);
  const auto pos = out.rfind(kMaskToken);
  if (pos != std::string::npos) out.replace(pos, kMaskToken.size(), literal);
  return out;
}

std::string render_program(std::string_view program) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < program.size()) {
    auto end = program.find('\n', start);
    if (end == std::string_view::npos) end = program.size();
    lines.push_back(program.substr(start, end - start));
    start = end + 1;
  }
  const auto width = std::to_string(lines.size()).size();
  std::string out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto number = std::to_string(i + 1);
    out.append(width - number.size(), ' ');
    out += number;
    out += " | ";
    out += lines[i];
    out += '\n';
  }
  return out;
}

std::string strip_line_numbers(std::string_view rendered) {
  std::string out;
  std::size_t start = 0;
  while (start < rendered.size()) {
    auto end = rendered.find('\n', start);
    if (end == std::string_view::npos) end = rendered.size();
    const auto line = rendered.substr(start, end - start);
    const auto bar = line.find(" | ");
    out += bar == std::string_view::npos ? line : line.substr(bar + 3);
    out += '\n';
    start = end + 1;
  }
  return out;
}

std::vector<ProblemInstance> build_problems(const corpus::BenchmarkRecord& record,
                                            const tracer::Trace& trace,
                                            const analyzer::StatementTable& table,
                                            const analyzer::BlockGraph& graph,
                                            const BuildConfig& config) {
  if (trace.terminated != tracer::Termination::ok) {
    throw BuildSkip("trace terminated with " + std::string(tracer::to_string(trace.terminated)));
  }
  auto input = std::find_if(record.test_inputs.begin(), record.test_inputs.end(),
                            [&](const corpus::InputCase& c) { return c.input_id == trace.input_id; });
  if (input == record.test_inputs.end()) {
    throw BuildSkip("input '" + trace.input_id + "' not in record");
  }
  std::optional<MaskedAssertion> op;
  for (auto& m : mask_assertions(record)) {
    if (m.invocation_text == input->invocation_text) {
      op = std::move(m);
      break;
    }
  }
  if (!op) throw BuildSkip("no maskable assertion for input '" + input->input_id + "'");

  std::map<int, analyzer::PspTarget> targets;
  for (auto& t : analyzer::select_psp_targets(table, trace)) targets.emplace(t.stmt_index, std::move(t));

  const auto rendered = render_program(corpus::traced_program(record));
  const auto ranked = analyzer::select_sites(table, graph, trace, table.entries.size());
  std::vector<ProblemInstance> out;
  std::size_t accepted = 0;
  for (int site : ranked) {
    if (accepted == config.site_budget) break;
    const auto& entry = table.at(site);
    const bool executed = trace.executed_lines.count(entry.line_no) != 0;
    auto target = targets.find(site);
    const bool ic_site = executed && target != targets.end();
    const bool ccp_only = !executed && graph.is_terminal(site);
    if (!ic_site && !ccp_only) continue;
    ++accepted;

    ProblemInstance base;
    base.key = {record.record_id, trace.input_id, site, ic_site ? target->second.variable : ""};
    base.rendered_program = rendered;
    base.question_payload.target_line = entry.line_no;
    base.question_payload.statement_text = entry.text;
    base.question_payload.invocation = input->invocation_text;

    auto ccp = base;
    ccp.task = Task::CCP;
    ccp.ground_truth.coverage = executed;
    out.push_back(std::move(ccp));
    if (!ic_site) continue;

    auto psp = base;
    psp.task = Task::PSP;
    psp.question_payload.variable = base.key.variable;
    psp.ground_truth.value_type = state_after(trace, table, site, base.key.variable, 1);
    psp.ground_truth.occurrence = 1;
    out.push_back(std::move(psp));

    auto epp = base;
    epp.task = Task::EPP;
    epp.ground_truth.next_lines = next_statements(trace, table, site, 1);
    epp.ground_truth.occurrence = 1;
    out.push_back(std::move(epp));

    auto opi = base;
    opi.task = Task::OP;
    opi.question_payload.target_line = 0;
    opi.question_payload.statement_text.clear();
    opi.question_payload.masked_assertion = op->masked_text;
    opi.ground_truth.expected_literal = op->expected_literal;
    opi.ground_truth.owning_assertion = record.assertions[op->assertion_index].text;
    opi.ground_truth.grading_prelude = corpus::grading_prelude(record);
    out.push_back(std::move(opi));
  }
  if (out.empty()) throw BuildSkip("no admissible sites");
  return out;
}

}  // namespace reval::builder
