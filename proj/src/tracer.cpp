// SPDX-License-Identifier: Apache-2.0
#include "reval/tracer.hpp"

#include "reval/io.hpp"
#include "reval/runtime.hpp"

namespace reval::tracer {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

// Interpreter start-up and module import are not covered by the in-process
// wall clock, so the hard kill fires later than the cooperative limit.
constexpr double kHardKillGrace = 5.0;

StepEvent event_from_string(std::string_view text) {
  if (text == "stmt") return StepEvent::stmt;
  if (text == "call") return StepEvent::call;
  if (text == "return_event") return StepEvent::return_event;
  throw ParseError("unknown step event '" + std::string(text) + "'");
}

Termination termination_from_string(std::string_view text) {
  if (text == "ok") return Termination::ok;
  if (text == "timeout") return Termination::timeout;
  if (text == "exception") return Termination::exception;
  throw ParseError("unknown termination '" + std::string(text) + "'");
}

ProgramState state_from_json(const json& value) {
  ProgramState state;
  for (const auto& [name, snap] : value.items()) {
    state.bindings.emplace(name, snapshot_from_json(snap));
  }
  return state;
}

ordered_json state_to_json(const ProgramState& state) {
  ordered_json out = ordered_json::object();
  for (const auto& [name, snap] : state.bindings) {
    out[name] = snapshot_to_json(snap);
  }
  return out;
}

ExecutionStep step_from_json(const json& value) {
  ExecutionStep step;
  step.step_index = value.at("step_index").get<int>();
  step.frame_id = value.at("frame_id").get<int>();
  step.line_no = value.at("line_no").get<int>();
  step.event = event_from_string(value.at("event").get<std::string>());
  step.state_after = state_from_json(value.at("state_after"));
  return step;
}

void recompute_executed_lines(Trace& trace) {
  trace.executed_lines.clear();
  for (const auto& step : trace.steps) {
    if (step.event == StepEvent::stmt) trace.executed_lines.insert(step.line_no);
  }
}

}  // namespace

const VariableSnapshot* ProgramState::find(std::string_view name) const {
  auto it = bindings.find(std::string(name));
  return it == bindings.end() ? nullptr : &it->second;
}

std::string_view to_string(StepEvent event) {
  switch (event) {
    case StepEvent::stmt: return "stmt";
    case StepEvent::call: return "call";
    case StepEvent::return_event: return "return_event";
  }
  return "?";
}

std::string_view to_string(Termination termination) {
  switch (termination) {
    case Termination::ok: return "ok";
    case Termination::timeout: return "timeout";
    case Termination::exception: return "exception";
  }
  return "?";
}

std::string_view to_string(GradeOutcome outcome) {
  switch (outcome) {
    case GradeOutcome::pass: return "pass";
    case GradeOutcome::fail: return "fail";
    case GradeOutcome::error: return "error";
  }
  return "?";
}

nlohmann::ordered_json snapshot_to_json(const VariableSnapshot& snapshot) {
  ordered_json out;
  out["value_repr"] = snapshot.value_repr;
  out["type_name"] = snapshot.type_name;
  out["representable"] = snapshot.representable;
  return out;
}

VariableSnapshot snapshot_from_json(const nlohmann::json& value) {
  return {value.at("value_repr").get<std::string>(), value.at("type_name").get<std::string>(),
          value.at("representable").get<bool>()};
}

Trace trace_execution(std::string_view program, std::string_view invocation,
                      const ResourceLimits& limits) {
  const json request = {{"mode", "trace"},
                        {"program", program},
                        {"invocation", invocation},
                        {"max_steps", limits.max_steps},
                        {"wall_seconds", limits.wall_seconds}};
  const auto reply = runtime::call_helper(request, limits.wall_seconds + kHardKillGrace);
  Trace trace;
  if (reply.value("timed_out", false)) {
    trace.terminated = Termination::timeout;
    trace.error_message = "killed after wall-clock limit";
    return trace;
  }
  if (!reply.value("ok", false)) {
    trace.terminated = Termination::exception;
    trace.error_message = reply.value("error", std::string("program failed to load"));
    return trace;
  }
  for (const auto& step : reply.at("steps")) {
    trace.steps.push_back(step_from_json(step));
  }
  trace.terminated = termination_from_string(reply.at("terminated").get<std::string>());
  if (trace.terminated == Termination::ok && reply.at("output_value").is_object()) {
    trace.output_value = snapshot_from_json(reply.at("output_value"));
  }
  trace.error_message = reply.value("error", std::string());
  recompute_executed_lines(trace);
  return trace;
}

ProgramState snapshot_state(std::string_view bindings_expression, std::string_view program) {
  const json request = {{"mode", "snapshot"}, {"bindings", bindings_expression}, {"program", program}};
  const auto reply = runtime::call_helper(request, 30.0);
  if (!reply.value("ok", false) || !reply.contains("state")) {
    throw ParseError("snapshot failed: " + reply.value("error", std::string("timeout")));
  }
  return state_from_json(reply.at("state"));
}

GradeOutcome grade_in_sandbox(std::string_view program, std::string_view assertion_text,
                              const ResourceLimits& limits, std::string_view prelude) {
  const json request = {{"mode", "grade"},
                        {"program", program},
                        {"assertion", assertion_text},
                        {"prelude", prelude},
                        {"wall_seconds", limits.wall_seconds}};
  const auto reply = runtime::call_helper(request, limits.wall_seconds + kHardKillGrace);
  if (reply.value("timed_out", false) || !reply.value("ok", false)) {
    return GradeOutcome::error;
  }
  const auto outcome = reply.value("outcome", std::string("error"));
  if (outcome == "pass") return GradeOutcome::pass;
  if (outcome == "fail") return GradeOutcome::fail;
  return GradeOutcome::error;
}

std::string serialize_trace(const Trace& trace) {
  std::string out;
  ordered_json header;
  header["record_id"] = trace.record_id;
  header["input_id"] = trace.input_id;
  out += header.dump() + "\n";
  for (const auto& step : trace.steps) {
    ordered_json line;
    line["step_index"] = step.step_index;
    line["line_no"] = step.line_no;
    line["event"] = to_string(step.event);
    line["frame_id"] = step.frame_id;
    line["state_after"] = state_to_json(step.state_after);
    out += line.dump() + "\n";
  }
  ordered_json trailer;
  trailer["terminated"] = to_string(trace.terminated);
  trailer["output_value"] = trace.output_value ? snapshot_to_json(*trace.output_value) : ordered_json();
  out += trailer.dump() + "\n";
  return out;
}

Trace parse_trace(std::string_view text) {
  const auto lines = io::split_lines(text);
  if (lines.size() < 2) {
    throw ParseError("trace needs a header and a trailer");
  }
  Trace trace;
  try {
    const auto header = json::parse(lines.front());
    trace.record_id = header.at("record_id").get<std::string>();
    trace.input_id = header.at("input_id").get<std::string>();
    for (std::size_t i = 1; i + 1 < lines.size(); ++i) {
      trace.steps.push_back(step_from_json(json::parse(lines[i])));
    }
    const auto trailer = json::parse(lines.back());
    trace.terminated = termination_from_string(trailer.at("terminated").get<std::string>());
    if (trailer.at("output_value").is_object()) {
      trace.output_value = snapshot_from_json(trailer.at("output_value"));
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed trace: ") + e.what());
  }
  recompute_executed_lines(trace);
  return trace;
}

}  // namespace reval::tracer
