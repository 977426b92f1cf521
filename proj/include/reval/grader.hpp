// SPDX-License-Identifier: Apache-2.0
//
// Answer extraction and per-task correctness.
#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include "json.hpp"
#include "reval/builder.hpp"

namespace reval::grader {

struct ValueAnswer {
  std::string value_repr;
  std::string type_name;
  friend bool operator==(const ValueAnswer&, const ValueAnswer&) = default;
};

struct LineAnswer {
  int line = kExitLine;
  friend bool operator==(const LineAnswer&, const LineAnswer&) = default;
};

struct LiteralAnswer {
  std::string text;
  friend bool operator==(const LiteralAnswer&, const LiteralAnswer&) = default;
};

using Payload = std::variant<std::monostate, bool, ValueAnswer, LineAnswer, LiteralAnswer>;

struct ParsedAnswer {
  Task task = Task::CCP;
  Payload payload;
  bool parse_ok = false;
  /// True when a tolerant fallback rather than the ANSWER grammar matched.
  bool fallback = false;
  std::string raw_excerpt;
};

/// Scans for the last line matching the task's answer grammar. For EPP,
/// `rendered_program` enables matching a statement's text to its line.
/// Never throws.
ParsedAnswer parse_answer(Task task, std::string_view raw, std::string_view rendered_program = {});

enum class Reason { match, mismatch, parse_fail, sandbox_error };
std::string_view to_string(Reason reason);
Reason reason_from_string(std::string_view text);

struct Judgment {
  builder::ProblemKey key;
  Task task = Task::CCP;
  bool correct = false;
  Reason reason = Reason::parse_fail;
  /// Canonical rendering of the parsed answer; empty on parse failure.
  std::string answer;
  /// CCP only: truth label and predicted label (nullopt when unparsed).
  std::optional<bool> ccp_truth;
  std::optional<bool> ccp_predicted;
  friend bool operator==(const Judgment&, const Judgment&) = default;
};

nlohmann::ordered_json to_json(const Judgment& judgment);
Judgment judgment_from_json(const nlohmann::json& value);

/// Throws TaskMismatch. OP answers are checked by running the unmasked
/// assertion against the canonical solution; results are memoized.
Judgment grade(const builder::ProblemInstance& problem, const ParsedAnswer& parsed,
               const ResourceLimits& limits = {});

}  // namespace reval::grader
