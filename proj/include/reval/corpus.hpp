// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "reval/common.hpp"

namespace reval::corpus {

enum class Format { humaneval_like, classeval_like };

std::string_view to_string(Format format);
Format format_from_string(std::string_view text);

struct InputCase {
  std::string input_id;
  std::vector<LiteralValue> arguments;
  std::string invocation_text;
  friend bool operator==(const InputCase&, const InputCase&) = default;
};

struct AssertionStmt {
  std::string text;
  /// Present iff the right operand of an `==`/`is` comparison is a constant.
  std::optional<LiteralValue> rhs_literal;
  /// Byte range of the right operand inside `text`, when rhs_literal is set.
  std::size_t rhs_begin = 0;
  std::size_t rhs_end = 0;
  /// Entry-point call this assertion exercises, if one was recognized.
  std::optional<std::string> invocation_text;
  friend bool operator==(const AssertionStmt&, const AssertionStmt&) = default;
};

struct BenchmarkRecord {
  std::string record_id;
  std::string source_code;
  std::string entry_point;
  std::string canonical_solution;
  std::vector<InputCase> test_inputs;
  std::vector<AssertionStmt> assertions;
  std::string context;
  friend bool operator==(const BenchmarkRecord&, const BenchmarkRecord&) = default;
};

/// Program text that is traced and graded: context followed by the solution.
std::string traced_program(const BenchmarkRecord& record);

/// Statements run before a graded assertion (binds `candidate` for
/// function-style entry points).
std::string grading_prelude(const BenchmarkRecord& record);

/// Reads a line-delimited corpus. Throws FormatError (with the 1-based record
/// ordinal) or IoError.
std::vector<BenchmarkRecord> load_corpus(const std::filesystem::path& path, Format format);

/// Parses one corpus line's JSON into a record.
BenchmarkRecord parse_record(const nlohmann::json& line, Format format, std::size_t ordinal);

/// Serializes a record into the corpus line format it was loaded from.
nlohmann::json serialize_record(const BenchmarkRecord& record, Format format);

/// Empty when the record is valid; otherwise one string per violation.
std::vector<std::string> validate_record(const BenchmarkRecord& record);

}  // namespace reval::corpus
