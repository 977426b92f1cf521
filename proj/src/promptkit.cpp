// SPDX-License-Identifier: Apache-2.0
#include "reval/promptkit.hpp"

#include <spdlog/spdlog.h>

#include "reval/embedded_exemplars.hpp"
#include "reval/embedded_tpl_cot.hpp"
#include "reval/embedded_tpl_fewshot.hpp"
#include "reval/embedded_tpl_question_ccp.hpp"
#include "reval/embedded_tpl_question_epp.hpp"
#include "reval/embedded_tpl_question_op.hpp"
#include "reval/embedded_tpl_question_psp.hpp"
#include "reval/embedded_tpl_system.hpp"
#include "reval/io.hpp"

namespace reval::promptkit {
namespace {

constexpr std::string_view kProblemHeading = "## Problem";
constexpr std::size_t kReasoningSteps = 40;

std::string trimmed(std::string_view text) {
  while (!text.empty() && (text.back() == '\n' || text.back() == ' ')) text.remove_suffix(1);
  return std::string(text);
}

std::string fill(std::string_view tpl, const builder::ProblemInstance& p) {
  const auto& q = p.question_payload;
  const std::pair<std::string_view, std::string> vars[] = {
      {"{{line}}", std::to_string(q.target_line)},
      {"{{statement}}", q.statement_text},
      {"{{variable}}", q.variable},
      {"{{invocation}}", q.invocation},
      {"{{masked_assertion}}", q.masked_assertion},
  };
  std::string out = trimmed(tpl);
  for (const auto& [name, value] : vars) {
    for (auto pos = out.find(name); pos != std::string::npos; pos = out.find(name, pos + value.size())) {
      out.replace(pos, name.size(), value);
    }
  }
  return out;
}

std::string_view question_template(Task task) {
  switch (task) {
    case Task::CCP: return embedded::kTemplate_question_ccp;
    case Task::PSP: return embedded::kTemplate_question_psp;
    case Task::EPP: return embedded::kTemplate_question_epp;
    case Task::OP: return embedded::kTemplate_question_op;
  }
  return {};
}

std::string problem_block(const builder::ProblemInstance& p) {
  std::string out = "Program:\n```python\n" + p.rendered_program + "```\n";
  out += "Input: `" + p.question_payload.invocation + "`\n";
  out += "Question: " + fill(question_template(p.task), p) + "\n";
  return out;
}

std::string key_label(const builder::ProblemKey& k) {
  return k.record_id + "/" + k.input_id + "/" + std::to_string(k.stmt_index) +
         (k.variable.empty() ? "" : "/" + k.variable);
}

}  // namespace

std::string_view to_string(Strategy strategy) { return strategy == Strategy::fewshot ? "fewshot" : "cot"; }

Strategy strategy_from_string(std::string_view text) {
  if (text == "fewshot") return Strategy::fewshot;
  if (text == "cot") return Strategy::cot;
  throw ConfigError("unknown strategy '" + std::string(text) + "'");
}

nlohmann::ordered_json to_json(const Exemplar& exemplar) {
  nlohmann::ordered_json out;
  out["problem"] = builder::to_json(exemplar.problem);
  out["reasoning"] = exemplar.reasoning;
  return out;
}

Exemplar exemplar_from_json(const nlohmann::json& value) {
  if (!value.contains("problem")) throw ParseError("exemplar without problem");
  return {builder::problem_from_json(value["problem"]), value.value("reasoning", std::string())};
}

std::string answer_format_spec(Task task) {
  switch (task) {
    case Task::CCP: return "ANSWER: YES or ANSWER: NO";
    case Task::PSP: return "ANSWER: value=<literal> type=<type_name>";
    case Task::EPP: return "ANSWER: line <number> or ANSWER: EXIT";
    case Task::OP: return "ANSWER: <literal>";
  }
  return {};
}

std::string answer_line(const builder::ProblemInstance& problem) {
  const auto& g = problem.ground_truth;
  switch (problem.task) {
    case Task::CCP:
      return g.coverage.value_or(false) ? "ANSWER: YES" : "ANSWER: NO";
    case Task::PSP:
      return "ANSWER: value=" + g.value_type->value_repr + " type=" + g.value_type->type_name;
    case Task::EPP: {
      auto it = g.next_lines.begin();
      if (it != g.next_lines.end() && *it == kExitLine && g.next_lines.size() > 1) ++it;
      if (it == g.next_lines.end() || *it == kExitLine) return "ANSWER: EXIT";
      return "ANSWER: line " + std::to_string(*it);
    }
    case Task::OP:
      return "ANSWER: " + g.expected_literal->text;
  }
  return {};
}

PromptBundle render_prompt(const builder::ProblemInstance& problem, Strategy strategy,
                           const std::vector<Exemplar>& shots) {
  PromptBundle bundle;
  bundle.strategy = strategy;
  bundle.system_text = trimmed(embedded::kTemplate_system);
  bundle.answer_format_spec = answer_format_spec(problem.task);

  std::string user = trimmed(strategy == Strategy::cot ? embedded::kTemplate_cot : embedded::kTemplate_fewshot);
  user += "\n";
  for (std::size_t i = 0; i < shots.size(); ++i) {
    const auto& shot = shots[i].problem;
    if (shot.task != problem.task) {
      throw ExemplarTaskMismatch("exemplar " + key_label(shot.key) + " is a " + std::string(to_string(shot.task)) +
                                 " problem, expected " + std::string(to_string(problem.task)));
    }
    if (shot.key == problem.key) {
      throw Error("exemplar " + key_label(shot.key) + " is the evaluated problem");
    }
    bundle.shot_keys.push_back(shot.key);
    user += "\n## Example " + std::to_string(i + 1) + "\n" + problem_block(shot);
    if (strategy == Strategy::cot) user += "Reasoning: " + shots[i].reasoning + "\n";
    user += answer_line(shot) + "\n";
  }
  user += "\n" + std::string(kProblemHeading) + "\n" + problem_block(problem);
  if (strategy == Strategy::cot) {
    user += "Reason step by step, then emit the final answer line.\n";
  }
  user += "Finish with exactly one line of the form: " + bundle.answer_format_spec + "\n";
  bundle.user_text = std::move(user);
  return bundle;
}

std::vector<Exemplar> select_shots(const std::vector<Exemplar>& pool, const builder::ProblemInstance& problem,
                                   std::size_t count) {
  std::vector<Exemplar> out;
  for (const auto& e : pool) {
    if (out.size() == count) break;
    if (e.problem.task == problem.task && e.problem.key != problem.key &&
        e.problem.key.record_id != problem.key.record_id) {
      out.push_back(e);
    }
  }
  return out;
}

std::string make_reasoning(const builder::ProblemInstance& problem, const tracer::Trace& trace) {
  std::string visited;
  std::size_t shown = 0, total = 0;
  for (const auto& step : trace.steps) {
    if (step.event != tracer::StepEvent::stmt) continue;
    ++total;
    if (shown < kReasoningSteps) {
      visited += (shown == 0 ? "" : ", ") + std::to_string(step.line_no);
      ++shown;
    }
  }
  if (total > shown) visited += ", ...";
  const auto& q = problem.question_payload;
  const auto& g = problem.ground_truth;
  std::string out = "Running `" + q.invocation + "` executes lines " + visited + ". ";
  const auto line = std::to_string(q.target_line);
  switch (problem.task) {
    case Task::CCP:
      out += g.coverage.value_or(false) ? "Line " + line + " is among them." : "Line " + line + " is never reached.";
      break;
    case Task::PSP:
      out += "After line " + line + " first runs, `" + q.variable + "` holds " + g.value_type->value_repr +
             " of type " + g.value_type->type_name + ".";
      break;
    case Task::EPP: {
      std::string next;
      for (int l : g.next_lines) {
        next += (next.empty() ? "" : " or ") + (l == kExitLine ? std::string("the function exit") : "line " + std::to_string(l));
      }
      out += "Line " + line + " is followed by " + next + ".";
      break;
    }
    case Task::OP:
      out += "The call evaluates to " + g.expected_literal->text + ".";
      break;
  }
  return out;
}

std::vector<Exemplar> build_exemplars(const ResourceLimits& limits, std::size_t site_budget) {
  std::vector<Exemplar> out;
  std::size_t ordinal = 0;
  for (const auto& line : io::split_lines(embedded::kExemplarCorpus)) {
    const auto record =
        corpus::parse_record(nlohmann::json::parse(line), corpus::Format::humaneval_like, ++ordinal);
    const auto program = corpus::traced_program(record);
    const auto table = analyzer::index_statements(program);
    const auto graph = analyzer::build_blocks(table, program);
    for (const auto& input : record.test_inputs) {
      auto trace = tracer::trace_execution(program, input.invocation_text, limits);
      trace.record_id = record.record_id;
      trace.input_id = input.input_id;
      try {
        for (auto& p : builder::build_problems(record, trace, table, graph, {site_budget})) {
          auto reasoning = make_reasoning(p, trace);
          out.push_back({std::move(p), std::move(reasoning)});
        }
      } catch (const BuildSkip& e) {
        spdlog::warn("exemplar {} skipped: {}", record.record_id, e.what());
      }
    }
  }
  return out;
}

bool leaks_ground_truth(const PromptBundle& bundle, const builder::ProblemInstance& problem) {
  const auto heading = bundle.user_text.rfind(std::string("\n") + std::string(kProblemHeading) + "\n");
  const std::string_view section =
      heading == std::string::npos ? std::string_view(bundle.user_text)
                                   : std::string_view(bundle.user_text).substr(heading);
  const auto truth = answer_line(problem);
  std::size_t start = 0;
  while (start < section.size()) {
    auto end = section.find('\n', start);
    if (end == std::string_view::npos) end = section.size();
    if (section.substr(start, end - start) == truth) return true;
    start = end + 1;
  }
  return false;
}

std::string template_version() {
  std::string all;
  for (auto part : {embedded::kTemplate_system, embedded::kTemplate_fewshot, embedded::kTemplate_cot,
                    embedded::kTemplate_question_ccp, embedded::kTemplate_question_psp,
                    embedded::kTemplate_question_epp, embedded::kTemplate_question_op, embedded::kExemplarCorpus}) {
    all += part;
    all += '\0';
  }
  return io::sha256_hex(all).substr(0, 16);
}

}  // namespace reval::promptkit
