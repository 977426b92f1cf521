// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace reval {

/// Base class of every error raised by the harness.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define REVAL_DEFINE_ERROR(Name)          \
  class Name : public Error {             \
   public:                                \
    using Error::Error;                   \
  }

REVAL_DEFINE_ERROR(IoError);
REVAL_DEFINE_ERROR(ParseError);
REVAL_DEFINE_ERROR(RuntimeUnavailable);
REVAL_DEFINE_ERROR(NotExecuted);
REVAL_DEFINE_ERROR(VariableAbsent);
REVAL_DEFINE_ERROR(BuildSkip);
REVAL_DEFINE_ERROR(ExemplarTaskMismatch);
REVAL_DEFINE_ERROR(BackendUnavailable);
REVAL_DEFINE_ERROR(AuthError);
REVAL_DEFINE_ERROR(TranscriptMiss);
REVAL_DEFINE_ERROR(TaskMismatch);
REVAL_DEFINE_ERROR(EmptySet);
REVAL_DEFINE_ERROR(IncompleteRun);
REVAL_DEFINE_ERROR(ConfigError);

#undef REVAL_DEFINE_ERROR

/// Malformed corpus line. `ordinal` is the 1-based record number.
class FormatError : public Error {
 public:
  FormatError(std::size_t ordinal, const std::string& what)
      : Error("record " + std::to_string(ordinal) + ": " + what), ordinal_(ordinal) {}
  std::size_t ordinal() const noexcept { return ordinal_; }

 private:
  std::size_t ordinal_;
};

enum class Task { CCP, PSP, EPP, OP };

inline constexpr Task kAllTasks[] = {Task::CCP, Task::PSP, Task::EPP, Task::OP};

std::string_view to_string(Task task);
Task task_from_string(std::string_view text);

struct ResourceLimits {
  double wall_seconds = 10.0;
  std::int64_t max_steps = 100000;
};

/// A constant written in subject-language literal syntax.
struct LiteralValue {
  std::string text;
  friend bool operator==(const LiteralValue&, const LiteralValue&) = default;
};

/// Successor marker meaning "the function returns/exits".
inline constexpr int kExitLine = 0;

}  // namespace reval
