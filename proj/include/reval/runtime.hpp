// SPDX-License-Identifier: Apache-2.0
//
// Subject-language runtime access. Every interaction with subject programs
// (parsing, tracing, assertion grading) goes through a short-lived
// interpreter subprocess running the embedded helper script.
#pragma once

#include <chrono>
#include <string>
#include <vector>

#include "json.hpp"

namespace reval::runtime {

struct ProcessResult {
  int exit_code = -1;
  bool timed_out = false;
  std::string out;
  std::string err;
};

/// Runs argv[0] with the given stdin, killing the process group after
/// `timeout`. Throws RuntimeUnavailable when the executable cannot start.
ProcessResult run_process(const std::vector<std::string>& argv, const std::string& stdin_data,
                          std::chrono::milliseconds timeout);

/// Interpreter command; `REVAL_PYTHON` overrides the default `python3`.
std::string interpreter();

/// Sends one request to the helper and returns its JSON reply. A reply with
/// `"timed_out": true` is synthesized when the hard deadline kills the child.
nlohmann::json call_helper(const nlohmann::json& request, double timeout_seconds);

}  // namespace reval::runtime
