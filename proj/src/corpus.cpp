// SPDX-License-Identifier: Apache-2.0
#include "reval/corpus.hpp"

#include <set>

#include "reval/io.hpp"
#include "reval/runtime.hpp"

namespace reval::corpus {
namespace {

using nlohmann::json;

constexpr double kHelperTimeout = 60.0;

std::string required_string(const json& line, const char* field, std::size_t ordinal) {
  auto it = line.find(field);
  if (it == line.end() || !it->is_string()) {
    throw FormatError(ordinal, std::string("missing string field '") + field + "'");
  }
  return it->get<std::string>();
}

std::string optional_string(const json& line, const char* field, std::size_t ordinal) {
  auto it = line.find(field);
  if (it == line.end() || it->is_null()) return {};
  if (!it->is_string()) {
    throw FormatError(ordinal, std::string("field '") + field + "' must be a string");
  }
  return it->get<std::string>();
}

std::vector<std::string> string_list(const json& value, const char* field, std::size_t ordinal) {
  if (!value.is_array()) {
    throw FormatError(ordinal, std::string("field '") + field + "' must be an array");
  }
  std::vector<std::string> out;
  for (const auto& item : value) {
    if (!item.is_string()) {
      throw FormatError(ordinal, std::string("field '") + field + "' must hold strings");
    }
    out.push_back(item.get<std::string>());
  }
  return out;
}

// Raw fields of one line before the runtime has looked at the assertions.
struct Pending {
  BenchmarkRecord record;
  std::string test_source;
  std::vector<std::string> assertion_texts;
};

Pending read_line(const json& line, Format format, std::size_t ordinal) {
  if (!line.is_object()) {
    throw FormatError(ordinal, "record is not an object");
  }
  Pending p;
  auto& r = p.record;
  r.record_id = required_string(line, "task_id", ordinal);
  r.entry_point = required_string(line, "entry_point", ordinal);
  if (format == Format::humaneval_like) {
    r.source_code = required_string(line, "prompt", ordinal);
    r.canonical_solution = r.source_code + required_string(line, "canonical_solution", ordinal);
    r.context = optional_string(line, "context", ordinal);
    if (auto it = line.find("assertions"); it != line.end()) {
      p.assertion_texts = string_list(*it, "assertions", ordinal);
    } else {
      p.test_source = required_string(line, "test", ordinal);
    }
  } else {
    r.source_code = required_string(line, "skeleton", ordinal);
    r.canonical_solution = required_string(line, "solution_code", ordinal);
    r.context = optional_string(line, "import_statement", ordinal);
    auto cases = line.find("test_cases");
    if (cases == line.end() || !cases->is_array()) {
      throw FormatError(ordinal, "missing array field 'test_cases'");
    }
    for (const auto& test_case : *cases) {
      auto asserts = test_case.find("assertions");
      if (!test_case.is_object() || asserts == test_case.end()) {
        throw FormatError(ordinal, "test case without 'assertions'");
      }
      for (auto& text : string_list(*asserts, "assertions", ordinal)) {
        p.assertion_texts.push_back(std::move(text));
      }
    }
    if (r.entry_point.find('.') == std::string::npos) {
      throw FormatError(ordinal, "entry_point must name 'ClassName.method'");
    }
  }
  return p;
}

struct Resolved {
  std::optional<std::string> parse_error;
  std::optional<std::string> test_error;
};

// One runtime round trip resolves assertions, derives inputs, and checks that
// every program parses.
std::vector<Resolved> resolve(std::vector<Pending>& pending) {
  json items = json::array();
  for (const auto& p : pending) {
    json item = {{"entry_point", p.record.entry_point}, {"program", traced_program(p.record)}};
    if (!p.test_source.empty()) item["test_source"] = p.test_source;
    item["assertions"] = p.assertion_texts;
    items.push_back(std::move(item));
  }
  const auto reply = runtime::call_helper({{"mode", "tests"}, {"items", items}}, kHelperTimeout);
  if (!reply.value("ok", false) || !reply.contains("items")) {
    throw RuntimeUnavailable("assertion analysis failed: " + reply.value("error", std::string("timeout")));
  }
  std::vector<Resolved> out;
  for (std::size_t i = 0; i < pending.size(); ++i) {
    const auto& item = reply["items"][i];
    auto& record = pending[i].record;
    record.assertions.clear();
    record.test_inputs.clear();
    std::set<std::string> seen_invocations;
    for (const auto& a : item["assertions"]) {
      AssertionStmt stmt;
      stmt.text = a["text"].get<std::string>();
      if (a["rhs"].is_string()) {
        stmt.rhs_literal = LiteralValue{a["rhs"].get<std::string>()};
        stmt.rhs_begin = a["rhs_begin"].get<std::size_t>();
        stmt.rhs_end = a["rhs_end"].get<std::size_t>();
      }
      if (a["invocation"].is_string()) {
        stmt.invocation_text = a["invocation"].get<std::string>();
        if (seen_invocations.insert(*stmt.invocation_text).second) {
          InputCase input;
          input.input_id = std::to_string(record.test_inputs.size());
          input.invocation_text = *stmt.invocation_text;
          for (const auto& arg : a["arguments"]) {
            input.arguments.push_back(LiteralValue{arg.is_string() ? arg.get<std::string>() : ""});
          }
          record.test_inputs.push_back(std::move(input));
        }
      }
      record.assertions.push_back(std::move(stmt));
    }
    Resolved r;
    if (item["parse_error"].is_string()) r.parse_error = item["parse_error"].get<std::string>();
    if (item["test_error"].is_string()) r.test_error = item["test_error"].get<std::string>();
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<std::string> violations(const BenchmarkRecord& record, const Resolved& resolved) {
  std::vector<std::string> out;
  if (record.record_id.empty()) out.emplace_back("record_id empty");
  if (record.entry_point.empty()) out.emplace_back("entry_point empty");
  if (resolved.parse_error) out.push_back("parse failure: " + *resolved.parse_error);
  if (resolved.test_error) out.push_back("test parse failure: " + *resolved.test_error);
  if (record.assertions.empty()) out.emplace_back("assertions empty");
  for (std::size_t i = 0; i < record.assertions.size(); ++i) {
    if (record.assertions[i].text.rfind("assert", 0) != 0) {
      out.push_back("assertion " + std::to_string(i + 1) + " does not start with 'assert'");
    }
  }
  return out;
}

}  // namespace

std::string_view to_string(Format format) {
  return format == Format::humaneval_like ? "humaneval_like" : "classeval_like";
}

Format format_from_string(std::string_view text) {
  if (text == "humaneval_like") return Format::humaneval_like;
  if (text == "classeval_like") return Format::classeval_like;
  throw ConfigError("unknown corpus format '" + std::string(text) + "'");
}

std::string traced_program(const BenchmarkRecord& record) {
  if (record.context.empty()) return record.canonical_solution;
  std::string program = record.context;
  if (program.back() != '\n') program.push_back('\n');
  return program + record.canonical_solution;
}

std::string grading_prelude(const BenchmarkRecord& record) {
  if (record.entry_point.find('.') != std::string::npos) return {};
  return "candidate = " + record.entry_point + "\n";
}

BenchmarkRecord parse_record(const nlohmann::json& line, Format format, std::size_t ordinal) {
  std::vector<Pending> pending{read_line(line, format, ordinal)};
  const auto resolved = resolve(pending);
  if (auto v = violations(pending[0].record, resolved[0]); !v.empty()) {
    throw FormatError(ordinal, v.front());
  }
  return std::move(pending[0].record);
}

std::vector<BenchmarkRecord> load_corpus(const std::filesystem::path& path, Format format) {
  const auto content = io::read_file(path);
  std::vector<Pending> pending;
  std::set<std::string> ids;
  std::size_t ordinal = 0;
  for (const auto& text : io::split_lines(content)) {
    ++ordinal;
    json line;
    try {
      line = json::parse(text);
    } catch (const json::parse_error& e) {
      throw FormatError(ordinal, std::string("malformed line: ") + e.what());
    }
    pending.push_back(read_line(line, format, ordinal));
    if (!ids.insert(pending.back().record.record_id).second) {
      throw FormatError(ordinal, "duplicate record_id '" + pending.back().record.record_id + "'");
    }
  }
  if (pending.empty()) return {};
  const auto resolved = resolve(pending);
  std::vector<BenchmarkRecord> records;
  records.reserve(pending.size());
  for (std::size_t i = 0; i < pending.size(); ++i) {
    if (auto v = violations(pending[i].record, resolved[i]); !v.empty()) {
      throw FormatError(i + 1, v.front());
    }
    records.push_back(std::move(pending[i].record));
  }
  return records;
}

nlohmann::json serialize_record(const BenchmarkRecord& record, Format format) {
  nlohmann::ordered_json out;
  json texts = json::array();
  for (const auto& a : record.assertions) texts.push_back(a.text);
  out["task_id"] = record.record_id;
  out["entry_point"] = record.entry_point;
  if (format == Format::humaneval_like) {
    out["prompt"] = record.source_code;
    const bool prefixed = record.canonical_solution.rfind(record.source_code, 0) == 0;
    if (!prefixed) {
      throw Error("record '" + record.record_id + "': canonical solution does not extend its prompt");
    }
    out["canonical_solution"] = record.canonical_solution.substr(record.source_code.size());
    if (!record.context.empty()) out["context"] = record.context;
    out["assertions"] = texts;
  } else {
    out["skeleton"] = record.source_code;
    out["solution_code"] = record.canonical_solution;
    if (!record.context.empty()) out["import_statement"] = record.context;
    out["test_cases"] = json::array({json{{"assertions", texts}}});
  }
  return json::parse(out.dump());
}

std::vector<std::string> validate_record(const BenchmarkRecord& record) {
  Pending p;
  p.record = record;
  for (const auto& a : record.assertions) p.assertion_texts.push_back(a.text);
  std::vector<Pending> pending{std::move(p)};
  std::vector<Resolved> resolved;
  try {
    resolved = resolve(pending);
  } catch (const RuntimeUnavailable& e) {
    return {std::string("runtime unavailable: ") + e.what()};
  }
  return violations(record, resolved[0]);
}

}  // namespace reval::corpus
