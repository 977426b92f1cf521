// SPDX-License-Identifier: Apache-2.0
//
// Subject-language (Python) literal values: a parser for the literal subset
// produced by the tracer's canonicalization, and the equivalence relation the
// grader uses to compare a predicted value with the ground truth.
#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

namespace reval::literal {

using BigInt = boost::multiprecision::cpp_int;

struct Value;
using ValuePtr = std::shared_ptr<const Value>;

struct NoneValue {};
struct Complex {
  double real = 0.0;
  double imag = 0.0;
};
struct Bytes {
  std::string data;
};
struct Sequence {
  enum class Kind { list, tuple, set, frozenset } kind = Kind::list;
  std::vector<ValuePtr> items;
};
struct Mapping {
  std::vector<std::pair<ValuePtr, ValuePtr>> items;
};

struct Value {
  std::variant<NoneValue, bool, BigInt, double, Complex, std::string, Bytes, Sequence, Mapping> data;
};

/// Parses one literal expression; nullopt when the text is not in the
/// supported literal subset.
std::optional<Value> parse(std::string_view text);

/// Python `==` on literals, with one change: NaN equals NaN so that the
/// relation is reflexive.
bool equivalent(const Value& a, const Value& b);

/// Whitespace outside string quotes removed, and every string literal
/// re-quoted with single quotes.
std::string normalize_text(std::string_view text);

/// Literal equivalence when both sides parse, normalized text equality
/// otherwise.
bool values_match(std::string_view predicted, std::string_view truth);

}  // namespace reval::literal
