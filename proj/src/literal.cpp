// SPDX-License-Identifier: Apache-2.0
#include "reval/literal.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <limits>

namespace reval::literal {
namespace {

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  std::optional<Value> parse_all() {
    auto value = parse_top();
    skip_ws();
    if (!value || pos_ != text_.size()) {
      return std::nullopt;
    }
    return value;
  }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;

  bool eof() const { return pos_ >= text_.size(); }
  char peek(std::size_t ahead = 0) const {
    return pos_ + ahead < text_.size() ? text_[pos_ + ahead] : '\0';
  }
  void skip_ws() {
    while (!eof() && (std::isspace(static_cast<unsigned char>(peek())) != 0)) ++pos_;
  }
  bool consume(char c) {
    skip_ws();
    if (peek() == c) {
      ++pos_;
      return true;
    }
    return false;
  }
  bool consume_word(std::string_view word) {
    skip_ws();
    if (text_.substr(pos_, word.size()) != word) return false;
    const char after = peek(word.size());
    if (std::isalnum(static_cast<unsigned char>(after)) != 0 || after == '_') return false;
    pos_ += word.size();
    return true;
  }

  // A bare comma-separated sequence at top level is a tuple.
  std::optional<Value> parse_top() {
    auto first = parse_sum();
    if (!first) return std::nullopt;
    skip_ws();
    if (peek() != ',') return first;
    Sequence tuple{Sequence::Kind::tuple, {}};
    tuple.items.push_back(std::make_shared<const Value>(std::move(*first)));
    while (consume(',')) {
      skip_ws();
      if (eof()) break;
      auto next = parse_sum();
      if (!next) return std::nullopt;
      tuple.items.push_back(std::make_shared<const Value>(std::move(*next)));
    }
    return Value{std::move(tuple)};
  }

  static bool is_number(const Value& v) {
    return std::holds_alternative<BigInt>(v.data) || std::holds_alternative<double>(v.data) ||
           std::holds_alternative<Complex>(v.data) || std::holds_alternative<bool>(v.data);
  }

  static double as_double(const Value& v) {
    if (auto b = std::get_if<bool>(&v.data)) return *b ? 1.0 : 0.0;
    if (auto i = std::get_if<BigInt>(&v.data)) return i->convert_to<double>();
    if (auto d = std::get_if<double>(&v.data)) return *d;
    return 0.0;
  }

  // Only `real +/- imaginary` is accepted, as in the language's own literal
  // evaluator.
  std::optional<Value> parse_sum() {
    auto left = parse_unary();
    if (!left) return std::nullopt;
    skip_ws();
    while (peek() == '+' || peek() == '-') {
      const bool minus = peek() == '-';
      ++pos_;
      auto right = parse_unary();
      if (!right || !is_number(*left)) return std::nullopt;
      auto* imag = std::get_if<Complex>(&right->data);
      if (imag == nullptr || imag->real != 0.0) return std::nullopt;
      Complex c;
      if (auto lc = std::get_if<Complex>(&left->data)) {
        c = *lc;
      } else {
        c.real = as_double(*left);
      }
      c.imag += minus ? -imag->imag : imag->imag;
      left = Value{c};
      skip_ws();
    }
    return left;
  }

  std::optional<Value> parse_unary() {
    skip_ws();
    if (peek() == '-' || peek() == '+') {
      const bool minus = peek() == '-';
      ++pos_;
      auto inner = parse_unary();
      if (!inner) return std::nullopt;
      if (!minus) return is_number(*inner) ? inner : std::nullopt;
      if (auto b = std::get_if<bool>(&inner->data)) return Value{BigInt(*b ? -1 : 0)};
      if (auto i = std::get_if<BigInt>(&inner->data)) return Value{BigInt(-*i)};
      if (auto d = std::get_if<double>(&inner->data)) return Value{-*d};
      if (auto c = std::get_if<Complex>(&inner->data)) return Value{Complex{-c->real, -c->imag}};
      return std::nullopt;
    }
    return parse_atom();
  }

  std::optional<Value> parse_atom() {
    skip_ws();
    const char c = peek();
    if (c == '[') {
      ++pos_;
      return parse_items(']', Sequence::Kind::list);
    }
    if (c == '(') {
      ++pos_;
      return parse_paren();
    }
    if (c == '{') {
      ++pos_;
      return parse_brace();
    }
    if (std::isdigit(static_cast<unsigned char>(c)) != 0 ||
        (c == '.' && std::isdigit(static_cast<unsigned char>(peek(1))) != 0)) {
      return parse_number();
    }
    if (c == '\'' || c == '"' || is_string_prefix()) {
      return parse_strings();
    }
    if (consume_word("None")) return Value{NoneValue{}};
    if (consume_word("True")) return Value{true};
    if (consume_word("False")) return Value{false};
    if (consume_word("set")) {
      if (!consume('(')) return std::nullopt;
      if (consume(')')) return Value{Sequence{Sequence::Kind::set, {}}};
      auto inner = parse_sum();
      if (!inner || !consume(')')) return std::nullopt;
      return to_set(std::move(*inner), Sequence::Kind::set);
    }
    if (consume_word("frozenset")) {
      if (!consume('(')) return std::nullopt;
      if (consume(')')) return Value{Sequence{Sequence::Kind::frozenset, {}}};
      auto inner = parse_sum();
      if (!inner || !consume(')')) return std::nullopt;
      return to_set(std::move(*inner), Sequence::Kind::frozenset);
    }
    if (consume_word("float")) {
      if (!consume('(')) return std::nullopt;
      auto arg = parse_strings();
      if (!arg || !consume(')')) return std::nullopt;
      auto* s = std::get_if<std::string>(&arg->data);
      if (s == nullptr) return std::nullopt;
      std::string lowered;
      for (char ch : *s) {
        if (std::isspace(static_cast<unsigned char>(ch)) == 0) {
          lowered.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
        }
      }
      if (lowered == "nan" || lowered == "+nan" || lowered == "-nan") {
        return Value{std::numeric_limits<double>::quiet_NaN()};
      }
      if (lowered == "inf" || lowered == "+inf" || lowered == "infinity") {
        return Value{std::numeric_limits<double>::infinity()};
      }
      if (lowered == "-inf" || lowered == "-infinity") {
        return Value{-std::numeric_limits<double>::infinity()};
      }
      return std::nullopt;
    }
    return std::nullopt;
  }

  static std::optional<Value> to_set(Value inner, Sequence::Kind kind) {
    auto* seq = std::get_if<Sequence>(&inner.data);
    if (seq == nullptr) return std::nullopt;
    Sequence out{kind, seq->items};
    return Value{std::move(out)};
  }

  std::optional<Value> parse_items(char close, Sequence::Kind kind) {
    Sequence seq{kind, {}};
    if (consume(close)) return Value{std::move(seq)};
    while (true) {
      auto item = parse_sum();
      if (!item) return std::nullopt;
      seq.items.push_back(std::make_shared<const Value>(std::move(*item)));
      if (consume(close)) break;
      if (!consume(',')) return std::nullopt;
      if (consume(close)) break;
    }
    return Value{std::move(seq)};
  }

  std::optional<Value> parse_paren() {
    if (consume(')')) return Value{Sequence{Sequence::Kind::tuple, {}}};
    auto first = parse_sum();
    if (!first) return std::nullopt;
    if (consume(')')) return first;
    if (!consume(',')) return std::nullopt;
    Sequence tuple{Sequence::Kind::tuple, {}};
    tuple.items.push_back(std::make_shared<const Value>(std::move(*first)));
    if (consume(')')) return Value{std::move(tuple)};
    while (true) {
      auto item = parse_sum();
      if (!item) return std::nullopt;
      tuple.items.push_back(std::make_shared<const Value>(std::move(*item)));
      if (consume(')')) break;
      if (!consume(',')) return std::nullopt;
      if (consume(')')) break;
    }
    return Value{std::move(tuple)};
  }

  std::optional<Value> parse_brace() {
    if (consume('}')) return Value{Mapping{}};
    auto first = parse_sum();
    if (!first) return std::nullopt;
    if (consume(':')) {
      Mapping map;
      auto value = parse_sum();
      if (!value) return std::nullopt;
      map.items.emplace_back(std::make_shared<const Value>(std::move(*first)),
                             std::make_shared<const Value>(std::move(*value)));
      while (!consume('}')) {
        if (!consume(',')) return std::nullopt;
        if (consume('}')) break;
        auto key = parse_sum();
        if (!key || !consume(':')) return std::nullopt;
        auto val = parse_sum();
        if (!val) return std::nullopt;
        map.items.emplace_back(std::make_shared<const Value>(std::move(*key)),
                               std::make_shared<const Value>(std::move(*val)));
      }
      return Value{std::move(map)};
    }
    Sequence set{Sequence::Kind::set, {}};
    set.items.push_back(std::make_shared<const Value>(std::move(*first)));
    while (!consume('}')) {
      if (!consume(',')) return std::nullopt;
      if (consume('}')) break;
      auto item = parse_sum();
      if (!item) return std::nullopt;
      set.items.push_back(std::make_shared<const Value>(std::move(*item)));
    }
    return Value{std::move(set)};
  }

  std::optional<Value> parse_number() {
    const std::size_t start = pos_;
    std::string digits;
    auto is_digit_of = [](char ch, int base) {
      if (base == 16) return std::isxdigit(static_cast<unsigned char>(ch)) != 0;
      if (base == 8) return ch >= '0' && ch <= '7';
      if (base == 2) return ch == '0' || ch == '1';
      return std::isdigit(static_cast<unsigned char>(ch)) != 0;
    };
    if (peek() == '0' && std::strchr("xXoObB", peek(1)) != nullptr && peek(1) != '\0') {
      const char marker = static_cast<char>(std::tolower(static_cast<unsigned char>(peek(1))));
      const int base = marker == 'x' ? 16 : marker == 'o' ? 8 : 2;
      pos_ += 2;
      while (!eof() && (is_digit_of(peek(), base) || peek() == '_')) {
        if (peek() != '_') digits.push_back(peek());
        ++pos_;
      }
      if (digits.empty()) return std::nullopt;
      BigInt value = 0;
      for (char ch : digits) {
        const int d = std::isdigit(static_cast<unsigned char>(ch)) != 0
                          ? ch - '0'
                          : std::tolower(static_cast<unsigned char>(ch)) - 'a' + 10;
        value = value * base + d;
      }
      return Value{value};
    }
    bool is_float = false;
    while (!eof() && (std::isdigit(static_cast<unsigned char>(peek())) != 0 || peek() == '_')) {
      if (peek() != '_') digits.push_back(peek());
      ++pos_;
    }
    if (peek() == '.') {
      is_float = true;
      digits.push_back('.');
      ++pos_;
      while (!eof() && (std::isdigit(static_cast<unsigned char>(peek())) != 0 || peek() == '_')) {
        if (peek() != '_') digits.push_back(peek());
        ++pos_;
      }
    }
    if (peek() == 'e' || peek() == 'E') {
      std::size_t save = pos_;
      std::string exponent = "e";
      ++pos_;
      if (peek() == '+' || peek() == '-') exponent.push_back(peek()), ++pos_;
      if (std::isdigit(static_cast<unsigned char>(peek())) == 0) {
        pos_ = save;
      } else {
        while (!eof() && (std::isdigit(static_cast<unsigned char>(peek())) != 0 || peek() == '_')) {
          if (peek() != '_') exponent.push_back(peek());
          ++pos_;
        }
        digits += exponent;
        is_float = true;
      }
    }
    const bool imaginary = peek() == 'j' || peek() == 'J';
    if (imaginary) ++pos_;
    if (std::isalnum(static_cast<unsigned char>(peek())) != 0 || peek() == '_') {
      pos_ = start;
      return std::nullopt;
    }
    if (imaginary) {
      return Value{Complex{0.0, std::strtod(digits.c_str(), nullptr)}};
    }
    if (is_float) {
      return Value{std::strtod(digits.c_str(), nullptr)};
    }
    // Leading zeros are only legal for zero itself.
    if (digits.size() > 1 && digits.front() == '0' &&
        digits.find_first_not_of('0') != std::string::npos) {
      return std::nullopt;
    }
    return Value{BigInt(digits)};
  }

  bool is_string_prefix() const {
    std::size_t i = 0;
    while (i < 2 && std::strchr("rRbBuU", peek(i)) != nullptr && peek(i) != '\0') ++i;
    return i > 0 && (peek(i) == '\'' || peek(i) == '"');
  }

  // Adjacent string literals concatenate.
  std::optional<Value> parse_strings() {
    std::optional<bool> bytes;
    std::string joined;
    bool any = false;
    while (true) {
      skip_ws();
      if (!(peek() == '\'' || peek() == '"' || is_string_prefix())) break;
      bool raw = false;
      bool is_bytes = false;
      while (peek() != '\'' && peek() != '"') {
        const char p = static_cast<char>(std::tolower(static_cast<unsigned char>(peek())));
        raw = raw || p == 'r';
        is_bytes = is_bytes || p == 'b';
        ++pos_;
      }
      if (bytes.has_value() && *bytes != is_bytes) return std::nullopt;
      bytes = is_bytes;
      auto piece = parse_quoted(raw);
      if (!piece) return std::nullopt;
      joined += *piece;
      any = true;
    }
    if (!any) return std::nullopt;
    if (bytes.value_or(false)) return Value{Bytes{std::move(joined)}};
    return Value{std::move(joined)};
  }

  static void append_utf8(std::string& out, unsigned long cp) {
    if (cp < 0x80) {
      out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
      out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
      out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
      out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
  }

  std::optional<std::string> parse_quoted(bool raw) {
    const char quote = peek();
    const bool triple = peek(1) == quote && peek(2) == quote;
    pos_ += triple ? 3 : 1;
    std::string out;
    while (true) {
      if (eof()) return std::nullopt;
      const char c = peek();
      if (c == quote && (!triple || (peek(1) == quote && peek(2) == quote))) {
        pos_ += triple ? 3 : 1;
        return out;
      }
      if (c == '\n' && !triple) return std::nullopt;
      if (c != '\\') {
        out.push_back(c);
        ++pos_;
        continue;
      }
      const char e = peek(1);
      if (raw) {
        out.push_back('\\');
        if (e != '\0') out.push_back(e);
        pos_ += 2;
        continue;
      }
      pos_ += 2;
      switch (e) {
        case '\n': break;
        case '\\': out.push_back('\\'); break;
        case '\'': out.push_back('\''); break;
        case '"': out.push_back('"'); break;
        case 'a': out.push_back('\a'); break;
        case 'b': out.push_back('\b'); break;
        case 'f': out.push_back('\f'); break;
        case 'n': out.push_back('\n'); break;
        case 'r': out.push_back('\r'); break;
        case 't': out.push_back('\t'); break;
        case 'v': out.push_back('\v'); break;
        case 'x':
        case 'u':
        case 'U': {
          const std::size_t width = e == 'x' ? 2 : e == 'u' ? 4 : 8;
          if (pos_ + width > text_.size()) return std::nullopt;
          const std::string hex(text_.substr(pos_, width));
          for (char h : hex) {
            if (std::isxdigit(static_cast<unsigned char>(h)) == 0) return std::nullopt;
          }
          pos_ += width;
          const unsigned long cp = std::strtoul(hex.c_str(), nullptr, 16);
          if (e == 'x') {
            out.push_back(static_cast<char>(cp));
          } else {
            append_utf8(out, cp);
          }
          break;
        }
        default:
          if (e >= '0' && e <= '7') {
            unsigned long cp = static_cast<unsigned long>(e - '0');
            for (int k = 0; k < 2 && peek() >= '0' && peek() <= '7'; ++k) {
              cp = cp * 8 + static_cast<unsigned long>(peek() - '0');
              ++pos_;
            }
            out.push_back(static_cast<char>(cp));
          } else {
            out.push_back('\\');
            out.push_back(e);
          }
      }
    }
  }
};

struct Numeric {
  enum class Kind { integer, real, complex } kind;
  BigInt integer;
  double real = 0.0;
  double imag = 0.0;
};

std::optional<Numeric> as_numeric(const Value& v) {
  if (auto b = std::get_if<bool>(&v.data)) return Numeric{Numeric::Kind::integer, BigInt(*b ? 1 : 0)};
  if (auto i = std::get_if<BigInt>(&v.data)) return Numeric{Numeric::Kind::integer, *i};
  if (auto d = std::get_if<double>(&v.data)) return Numeric{Numeric::Kind::real, 0, *d};
  if (auto c = std::get_if<Complex>(&v.data)) return Numeric{Numeric::Kind::complex, 0, c->real, c->imag};
  return std::nullopt;
}

bool real_equal(double a, double b) {
  if (std::isnan(a) && std::isnan(b)) return true;
  return a == b;
}

bool int_equals_real(const BigInt& i, double d) {
  if (!std::isfinite(d) || std::trunc(d) != d) return false;
  return BigInt(d) == i;
}

bool numeric_equal(const Numeric& a, const Numeric& b) {
  using K = Numeric::Kind;
  if (a.kind == K::integer && b.kind == K::integer) return a.integer == b.integer;
  if (a.kind == K::complex || b.kind == K::complex) {
    auto real_part_equal = [](const Numeric& x, const Numeric& y) {
      if (x.kind == K::integer && y.kind == K::integer) return x.integer == y.integer;
      if (x.kind == K::integer) return int_equals_real(x.integer, y.real);
      if (y.kind == K::integer) return int_equals_real(y.integer, x.real);
      return real_equal(x.real, y.real);
    };
    return real_part_equal(a, b) && real_equal(a.imag, b.imag);
  }
  if (a.kind == K::integer) return int_equals_real(a.integer, b.real);
  if (b.kind == K::integer) return int_equals_real(b.integer, a.real);
  return real_equal(a.real, b.real);
}

bool unordered_equal(const std::vector<ValuePtr>& a, const std::vector<ValuePtr>& b) {
  if (a.size() != b.size()) return false;
  std::vector<bool> used(b.size(), false);
  for (const auto& x : a) {
    bool found = false;
    for (std::size_t j = 0; j < b.size(); ++j) {
      if (!used[j] && equivalent(*x, *b[j])) {
        used[j] = true;
        found = true;
        break;
      }
    }
    if (!found) return false;
  }
  return true;
}

}  // namespace

std::optional<Value> parse(std::string_view text) { return Parser(text).parse_all(); }

bool equivalent(const Value& a, const Value& b) {
  auto na = as_numeric(a);
  auto nb = as_numeric(b);
  if (na || nb) {
    return na && nb && numeric_equal(*na, *nb);
  }
  if (a.data.index() != b.data.index()) return false;
  if (std::holds_alternative<NoneValue>(a.data)) return true;
  if (auto s = std::get_if<std::string>(&a.data)) return *s == std::get<std::string>(b.data);
  if (auto s = std::get_if<Bytes>(&a.data)) return s->data == std::get<Bytes>(b.data).data;
  if (auto sa = std::get_if<Sequence>(&a.data)) {
    const auto& sb = std::get<Sequence>(b.data);
    using K = Sequence::Kind;
    const bool a_set = sa->kind == K::set || sa->kind == K::frozenset;
    const bool b_set = sb.kind == K::set || sb.kind == K::frozenset;
    if (a_set || b_set) return a_set && b_set && unordered_equal(sa->items, sb.items);
    if (sa->kind != sb.kind || sa->items.size() != sb.items.size()) return false;
    for (std::size_t i = 0; i < sa->items.size(); ++i) {
      if (!equivalent(*sa->items[i], *sb.items[i])) return false;
    }
    return true;
  }
  const auto& ma = std::get<Mapping>(a.data);
  const auto& mb = std::get<Mapping>(b.data);
  if (ma.items.size() != mb.items.size()) return false;
  for (const auto& [key, value] : ma.items) {
    bool found = false;
    for (const auto& [other_key, other_value] : mb.items) {
      if (equivalent(*key, *other_key)) {
        if (!equivalent(*value, *other_value)) return false;
        found = true;
        break;
      }
    }
    if (!found) return false;
  }
  return true;
}

std::string normalize_text(std::string_view text) {
  std::string out;
  char quote = '\0';
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quote != '\0') {
      if (c == '\\' && i + 1 < text.size()) {
        out.push_back(c);
        out.push_back(text[++i]);
        continue;
      }
      if (c == quote) {
        out.push_back('\'');
        quote = '\0';
        continue;
      }
      out.push_back(c);
      continue;
    }
    if (c == '\'' || c == '"') {
      quote = c;
      out.push_back('\'');
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(c)) == 0) out.push_back(c);
  }
  return out;
}

bool values_match(std::string_view predicted, std::string_view truth) {
  auto a = parse(predicted);
  auto b = parse(truth);
  if (a && b) return equivalent(*a, *b);
  return normalize_text(predicted) == normalize_text(truth);
}

}  // namespace reval::literal
