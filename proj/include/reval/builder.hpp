// SPDX-License-Identifier: Apache-2.0
//
// Problem construction: turns a traced record into aligned CCP/PSP/EPP/OP
// instances with ground truth.
#pragma once

#include <compare>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "reval/analyzer.hpp"
#include "reval/corpus.hpp"
#include "reval/tracer.hpp"

namespace reval::builder {

struct ProblemKey {
  std::string record_id;
  std::string input_id;
  int stmt_index = 0;
  /// PSP variable; empty for CCP-only keys.
  std::string variable;
  friend auto operator<=>(const ProblemKey&, const ProblemKey&) = default;
};

struct GroundTruth {
  std::optional<bool> coverage;
  std::optional<tracer::VariableSnapshot> value_type;
  /// kExitLine stands for "the function returns".
  std::set<int> next_lines;
  std::optional<LiteralValue> expected_literal;
  std::string owning_assertion;
  /// Code run before the assertion when grading OP answers.
  std::string grading_prelude;
  /// Dynamic occurrence (1-based) anchoring PSP; 0 when not applicable.
  int occurrence = 0;
  friend bool operator==(const GroundTruth&, const GroundTruth&) = default;
};

struct QuestionPayload {
  int target_line = 0;
  std::string statement_text;
  std::string variable;
  std::string masked_assertion;
  std::string invocation;
  friend bool operator==(const QuestionPayload&, const QuestionPayload&) = default;
};

struct ProblemInstance {
  ProblemKey key;
  Task task = Task::CCP;
  std::string rendered_program;
  QuestionPayload question_payload;
  GroundTruth ground_truth;
  friend bool operator==(const ProblemInstance&, const ProblemInstance&) = default;
};

nlohmann::ordered_json to_json(const ProblemKey& key);
ProblemKey key_from_json(const nlohmann::json& value);
nlohmann::ordered_json to_json(const ProblemInstance& problem);
ProblemInstance problem_from_json(const nlohmann::json& value);

/// "EXIT" for kExitLine, the number otherwise.
std::string line_label(int line);

struct BuildConfig {
  std::size_t site_budget = 3;
};

/// Throws BuildSkip when the trace did not finish normally, the input has no
/// maskable assertion, or no site qualifies.
std::vector<ProblemInstance> build_problems(const corpus::BenchmarkRecord& record,
                                            const tracer::Trace& trace,
                                            const analyzer::StatementTable& table,
                                            const analyzer::BlockGraph& graph,
                                            const BuildConfig& config);

/// Observed successors of statement I over every occurrence in the trace.
/// Throws NotExecuted when I executed fewer than `occurrence` times.
std::set<int> next_statements(const tracer::Trace& trace, const analyzer::StatementTable& table,
                              int stmt_index, int occurrence = 1);

/// Throws NotExecuted or VariableAbsent.
tracer::VariableSnapshot state_after(const tracer::Trace& trace,
                                     const analyzer::StatementTable& table, int stmt_index,
                                     const std::string& variable, int occurrence = 1);

struct MaskedAssertion {
  std::string masked_text;
  LiteralValue expected_literal;
  std::size_t assertion_index = 0;
  std::optional<std::string> invocation_text;
};

inline constexpr std::string_view kMaskToken = "??";

std::vector<MaskedAssertion> mask_assertions(const corpus::BenchmarkRecord& record);

/// Replaces the mask token with a literal.
std::string unmask(std::string_view masked_text, std::string_view literal);

/// Prefixes every line with its right-aligned 1-based number and " | ".
std::string render_program(std::string_view program);
std::string strip_line_numbers(std::string_view rendered);

}  // namespace reval::builder
