// SPDX-License-Identifier: Apache-2.0
#include "reval/grader.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <mutex>
#include <regex>
#include <vector>

#include <spdlog/spdlog.h>

#include "reval/literal.hpp"

namespace reval::grader {
namespace {

using nlohmann::json;

constexpr auto kIcase = std::regex::ECMAScript | std::regex::icase;

std::string trim(std::string_view text) {
  auto begin = text.find_first_not_of(" \t\r\n");
  if (begin == std::string_view::npos) return {};
  auto end = text.find_last_not_of(" \t\r\n");
  return std::string(text.substr(begin, end - begin + 1));
}

// Models often wrap answers in markdown emphasis or code spans.
std::string unwrap(std::string text) {
  text = trim(text);
  while (text.size() >= 2 && (text.front() == '`' || text.front() == '*') && text.back() == text.front()) {
    text = trim(text.substr(1, text.size() - 2));
  }
  return text;
}

std::vector<std::string> lines_of(std::string_view raw) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= raw.size()) {
    auto end = raw.find('\n', start);
    if (end == std::string_view::npos) end = raw.size();
    out.push_back(unwrap(std::string(raw.substr(start, end - start))));
    start = end + 1;
  }
  return out;
}

// Text after "ANSWER:" on a line, or nullopt.
std::optional<std::string> answer_body(const std::string& line) {
  static const std::regex re(R"(^\W*answer\W*?:\s*(.*)$)", kIcase);
  std::smatch m;
  if (!std::regex_match(line, m, re)) return std::nullopt;
  return unwrap(m[1].str());
}

std::optional<bool> yes_no(const std::string& text) {
  static const std::regex re(R"(^(yes|no)\b[\s.!]*$)", kIcase);
  std::smatch m;
  if (!std::regex_match(text, m, re)) return std::nullopt;
  return std::tolower(static_cast<unsigned char>(m[1].str()[0])) == 'y';
}

std::optional<ValueAnswer> value_type(const std::string& body) {
  static const std::regex value_re(R"(^value\s*=\s*)", kIcase);
  static const std::regex type_re(R"(\s+type\s*=\s*([A-Za-z_][\w.]*)\s*$)", kIcase);
  std::smatch v;
  if (!std::regex_search(body, v, value_re)) return std::nullopt;
  const std::string rest = v.suffix().str();
  // The type clause is taken from the end so values containing "type=" survive.
  std::smatch t;
  std::string::const_iterator from = rest.begin();
  std::optional<std::pair<std::size_t, std::string>> last;
  while (std::regex_search(from, rest.end(), t, type_re)) {
    last = {static_cast<std::size_t>(t[0].first - rest.begin()), t[1].str()};
    from = t[0].first + 1;
  }
  if (!last) return std::nullopt;
  auto value = trim(rest.substr(0, last->first));
  if (!value.empty() && value.back() == ',') value = trim(value.substr(0, value.size() - 1));
  if (value.empty()) return std::nullopt;
  return ValueAnswer{value, last->second};
}

std::optional<int> line_choice(const std::string& text, bool allow_bare) {
  static const std::regex exit_re(R"(^exit\b.*$)", kIcase);
  static const std::regex line_re(R"(^line\s+(\d+)\b[\s.]*$)", kIcase);
  static const std::regex bare_re(R"(^(\d+)[\s.]*$)");
  std::smatch m;
  if (std::regex_match(text, exit_re)) return kExitLine;
  if (std::regex_match(text, m, line_re)) return std::stoi(m[1].str());
  if (allow_bare && std::regex_match(text, m, bare_re)) return std::stoi(m[1].str());
  return std::nullopt;
}

std::optional<int> line_mention(const std::string& text) {
  static const std::regex re(R"(\bline\s+(\d+)\b)", kIcase);
  std::smatch m;
  std::optional<int> last;
  auto from = text.cbegin();
  while (std::regex_search(from, text.cend(), m, re)) {
    last = std::stoi(m[1].str());
    from = m[0].second;
  }
  return last;
}

std::optional<int> line_of_statement(const std::string& text, std::string_view rendered) {
  if (text.empty() || rendered.empty()) return std::nullopt;
  const auto program = builder::strip_line_numbers(rendered);
  std::optional<int> found;
  int number = 0;
  for (const auto& line : lines_of(program)) {
    ++number;
    if (trim(line) != text) continue;
    if (found) return std::nullopt;
    found = number;
  }
  return found;
}

ParsedAnswer parsed(Task task, Payload payload, std::string excerpt, bool fallback) {
  ParsedAnswer out;
  out.task = task;
  out.payload = std::move(payload);
  out.parse_ok = true;
  out.fallback = fallback;
  out.raw_excerpt = std::move(excerpt);
  return out;
}

std::string render(const Payload& payload) {
  if (const auto* b = std::get_if<bool>(&payload)) return *b ? "YES" : "NO";
  if (const auto* v = std::get_if<ValueAnswer>(&payload)) return "value=" + v->value_repr + " type=" + v->type_name;
  if (const auto* l = std::get_if<LineAnswer>(&payload)) return builder::line_label(l->line);
  if (const auto* t = std::get_if<LiteralAnswer>(&payload)) return t->text;
  return {};
}

std::mutex g_op_mutex;
std::map<std::pair<std::string, std::string>, tracer::GradeOutcome> g_op_cache;

tracer::GradeOutcome run_assertion(const std::string& program, const std::string& prelude,
                                   const std::string& assertion, const ResourceLimits& limits) {
  const auto key = std::make_pair(program + '\0' + prelude, assertion);
  {
    std::lock_guard lock(g_op_mutex);
    if (auto it = g_op_cache.find(key); it != g_op_cache.end()) return it->second;
  }
  const auto outcome = tracer::grade_in_sandbox(program, assertion, limits, prelude);
  std::lock_guard lock(g_op_mutex);
  g_op_cache.emplace(key, outcome);
  return outcome;
}

}  // namespace

ParsedAnswer parse_answer(Task task, std::string_view raw, std::string_view rendered_program) {
  const auto lines = lines_of(raw);
  for (auto it = lines.rbegin(); it != lines.rend(); ++it) {
    const auto body = answer_body(*it);
    if (!body) continue;
    switch (task) {
      case Task::CCP:
        if (auto b = yes_no(*body)) return parsed(task, *b, *it, false);
        break;
      case Task::PSP:
        if (auto v = value_type(*body)) return parsed(task, *v, *it, false);
        break;
      case Task::EPP:
        if (auto l = line_choice(*body, true)) return parsed(task, LineAnswer{*l}, *it, false);
        break;
      case Task::OP:
        if (!body->empty()) return parsed(task, LiteralAnswer{*body}, *it, false);
        break;
    }
  }
  // Tolerant fallbacks, again preferring the last occurrence.
  for (auto it = lines.rbegin(); it != lines.rend(); ++it) {
    const auto body = answer_body(*it).value_or(*it);
    if (task == Task::CCP) {
      if (auto b = yes_no(body)) return parsed(task, *b, *it, true);
    } else if (task == Task::EPP) {
      if (auto l = line_choice(body, true)) return parsed(task, LineAnswer{*l}, *it, true);
      if (auto l = line_mention(body)) return parsed(task, LineAnswer{*l}, *it, true);
      if (auto l = line_of_statement(body, rendered_program)) {
        spdlog::debug("EPP answer matched by statement text: {}", body);
        return parsed(task, LineAnswer{*l}, *it, true);
      }
    }
  }
  ParsedAnswer failed;
  failed.task = task;
  for (auto it = lines.rbegin(); it != lines.rend(); ++it) {
    if (!it->empty()) {
      failed.raw_excerpt = *it;
      break;
    }
  }
  return failed;
}

std::string_view to_string(Reason reason) {
  switch (reason) {
    case Reason::match: return "match";
    case Reason::mismatch: return "mismatch";
    case Reason::parse_fail: return "parse_fail";
    case Reason::sandbox_error: return "sandbox_error";
  }
  return "?";
}

Reason reason_from_string(std::string_view text) {
  if (text == "match") return Reason::match;
  if (text == "mismatch") return Reason::mismatch;
  if (text == "parse_fail") return Reason::parse_fail;
  if (text == "sandbox_error") return Reason::sandbox_error;
  throw ParseError("unknown judgment reason '" + std::string(text) + "'");
}

nlohmann::ordered_json to_json(const Judgment& judgment) {
  nlohmann::ordered_json out;
  out["key"] = builder::to_json(judgment.key);
  out["task"] = to_string(judgment.task);
  out["correct"] = judgment.correct;
  out["reason"] = to_string(judgment.reason);
  out["answer"] = judgment.answer;
  if (judgment.task == Task::CCP) {
    out["ccp_truth"] = judgment.ccp_truth ? json(*judgment.ccp_truth) : json();
    out["ccp_predicted"] = judgment.ccp_predicted ? json(*judgment.ccp_predicted) : json();
  }
  return out;
}

Judgment judgment_from_json(const json& value) {
  Judgment j;
  try {
    j.key = builder::key_from_json(value.at("key"));
    j.task = task_from_string(value.at("task").get<std::string>());
    j.correct = value.at("correct").get<bool>();
    j.reason = reason_from_string(value.at("reason").get<std::string>());
    j.answer = value.value("answer", std::string());
    if (value.contains("ccp_truth") && value["ccp_truth"].is_boolean()) j.ccp_truth = value["ccp_truth"].get<bool>();
    if (value.contains("ccp_predicted") && value["ccp_predicted"].is_boolean()) {
      j.ccp_predicted = value["ccp_predicted"].get<bool>();
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed judgment: ") + e.what());
  }
  return j;
}

Judgment grade(const builder::ProblemInstance& problem, const ParsedAnswer& answer,
               const ResourceLimits& limits) {
  if (answer.task != problem.task) {
    throw TaskMismatch("answer for " + std::string(to_string(answer.task)) + " given to a " +
                       std::string(to_string(problem.task)) + " problem");
  }
  Judgment j;
  j.key = problem.key;
  j.task = problem.task;
  const auto& truth = problem.ground_truth;
  if (problem.task == Task::CCP) j.ccp_truth = truth.coverage;
  if (!answer.parse_ok) {
    j.reason = Reason::parse_fail;
    return j;
  }
  j.answer = render(answer.payload);
  switch (problem.task) {
    case Task::CCP: {
      const bool predicted = std::get<bool>(answer.payload);
      j.ccp_predicted = predicted;
      j.correct = truth.coverage && predicted == *truth.coverage;
      break;
    }
    case Task::PSP: {
      const auto& v = std::get<ValueAnswer>(answer.payload);
      j.correct = truth.value_type && v.type_name == truth.value_type->type_name &&
                  literal::values_match(v.value_repr, truth.value_type->value_repr);
      break;
    }
    case Task::EPP:
      j.correct = truth.next_lines.count(std::get<LineAnswer>(answer.payload).line) != 0;
      break;
    case Task::OP: {
      const auto program = builder::strip_line_numbers(problem.rendered_program);
      const auto assertion =
          builder::unmask(problem.question_payload.masked_assertion, std::get<LiteralAnswer>(answer.payload).text);
      const auto outcome = run_assertion(program, truth.grading_prelude, assertion, limits);
      if (outcome == tracer::GradeOutcome::error) {
        j.reason = Reason::sandbox_error;
        return j;
      }
      j.correct = outcome == tracer::GradeOutcome::pass;
      break;
    }
  }
  j.reason = j.correct ? Reason::match : Reason::mismatch;
  return j;
}

}  // namespace reval::grader
