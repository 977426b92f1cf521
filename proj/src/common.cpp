// SPDX-License-Identifier: Apache-2.0
#include "reval/common.hpp"

namespace reval {

std::string_view to_string(Task task) {
  switch (task) {
    case Task::CCP: return "CCP";
    case Task::PSP: return "PSP";
    case Task::EPP: return "EPP";
    case Task::OP: return "OP";
  }
  return "?";
}

Task task_from_string(std::string_view text) {
  if (text == "CCP") return Task::CCP;
  if (text == "PSP") return Task::PSP;
  if (text == "EPP") return Task::EPP;
  if (text == "OP") return Task::OP;
  throw ParseError("unknown task '" + std::string(text) + "'");
}

}  // namespace reval
