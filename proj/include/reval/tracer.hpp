// SPDX-License-Identifier: Apache-2.0
//
// Statement-level execution tracing of subject programs.
//
// A trace is produced by running the program in a separate interpreter
// process with a line hook installed. Only frames of functions defined in the
// traced program text are recorded; comprehension and lambda frames are not.
// Each stmt step carries the local state observed immediately after the
// statement completes, that is, at the next line or return event of the same
// frame.
#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "reval/common.hpp"

namespace reval::tracer {

enum class StepEvent { stmt, call, return_event };

struct VariableSnapshot {
  std::string value_repr;
  std::string type_name;
  bool representable = false;
  friend bool operator==(const VariableSnapshot&, const VariableSnapshot&) = default;
};

/// Local scope bindings; method frames add `self.<attr>` entries.
struct ProgramState {
  std::map<std::string, VariableSnapshot> bindings;
  const VariableSnapshot* find(std::string_view name) const;
  friend bool operator==(const ProgramState&, const ProgramState&) = default;
};

struct ExecutionStep {
  int step_index = 0;
  /// Activation ordinal of the frame that executed the step.
  int frame_id = 0;
  int line_no = 0;
  StepEvent event = StepEvent::stmt;
  ProgramState state_after;
  friend bool operator==(const ExecutionStep&, const ExecutionStep&) = default;
};

enum class Termination { ok, timeout, exception };

struct Trace {
  std::string record_id;
  std::string input_id;
  std::vector<ExecutionStep> steps;
  std::optional<VariableSnapshot> output_value;
  Termination terminated = Termination::ok;
  std::set<int> executed_lines;
  /// Diagnostic for timeout/exception terminations. Not serialized.
  std::string error_message;
  friend bool operator==(const Trace& a, const Trace& b) {
    return a.record_id == b.record_id && a.input_id == b.input_id && a.steps == b.steps &&
           a.output_value == b.output_value && a.terminated == b.terminated &&
           a.executed_lines == b.executed_lines;
  }
};

std::string_view to_string(StepEvent event);
std::string_view to_string(Termination termination);

Trace trace_execution(std::string_view program, std::string_view invocation,
                      const ResourceLimits& limits);

/// Canonicalizes the bindings of a dict display evaluated in the subject
/// runtime, using the same rules as the trace hook. `program` is executed
/// first so the expression may refer to names it defines.
ProgramState snapshot_state(std::string_view bindings_expression, std::string_view program = {});

enum class GradeOutcome { pass, fail, error };
std::string_view to_string(GradeOutcome outcome);

/// Executes `program`, then `prelude`, then the assertion. `fail` means the
/// assertion predicate was false; `error` covers every other raised condition
/// and timeouts.
GradeOutcome grade_in_sandbox(std::string_view program, std::string_view assertion_text,
                              const ResourceLimits& limits, std::string_view prelude = {});

// Wire format: a header line, one line per step, a trailer line.
std::string serialize_trace(const Trace& trace);
Trace parse_trace(std::string_view text);

nlohmann::ordered_json snapshot_to_json(const VariableSnapshot& snapshot);
VariableSnapshot snapshot_from_json(const nlohmann::json& value);

}  // namespace reval::tracer
