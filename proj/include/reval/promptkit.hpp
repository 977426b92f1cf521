// SPDX-License-Identifier: Apache-2.0
//
// Prompt rendering for the four tasks with few-shot or chain-of-thought
// exemplars.
#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "reval/builder.hpp"

namespace reval::promptkit {

enum class Strategy { fewshot, cot };

std::string_view to_string(Strategy strategy);
Strategy strategy_from_string(std::string_view text);

struct Exemplar {
  builder::ProblemInstance problem;
  /// Worked reasoning shown under the cot strategy.
  std::string reasoning;
};

nlohmann::ordered_json to_json(const Exemplar& exemplar);
Exemplar exemplar_from_json(const nlohmann::json& value);

struct PromptBundle {
  std::string system_text;
  std::string user_text;
  Strategy strategy = Strategy::fewshot;
  std::vector<builder::ProblemKey> shot_keys;
  std::string answer_format_spec;
};

std::string answer_format_spec(Task task);

/// The answer line a correct response ends with. For EPP the smallest
/// admissible successor is used.
std::string answer_line(const builder::ProblemInstance& problem);

/// Throws ExemplarTaskMismatch for an exemplar of another task, and Error
/// when an exemplar shares the evaluated problem's key.
PromptBundle render_prompt(const builder::ProblemInstance& problem, Strategy strategy,
                           const std::vector<Exemplar>& shots);

/// The first `count` exemplars of the problem's task whose key differs.
std::vector<Exemplar> select_shots(const std::vector<Exemplar>& pool, const builder::ProblemInstance& problem,
                                   std::size_t count);

/// Reasoning text for an exemplar, derived from its trace.
std::string make_reasoning(const builder::ProblemInstance& problem, const tracer::Trace& trace);

/// Solved exemplars built from the bundled held-out programs.
std::vector<Exemplar> build_exemplars(const ResourceLimits& limits, std::size_t site_budget);

/// True when the problem's own answer line appears as a line of the
/// evaluated-problem section of the prompt.
bool leaks_ground_truth(const PromptBundle& bundle, const builder::ProblemInstance& problem);

/// Digest of every template and the exemplar corpus.
std::string template_version();

}  // namespace reval::promptkit
