#pragma once

#include <algorithm>
#include <bit>
#include <compare>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <memory>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "flowdeck/error.hpp"

namespace flowdeck {

class Value;
using ValueList = std::vector<Value>;

/// A small closed algebra of data: 64-bit integers, doubles, UTF-8 text,
/// pairs and lists. Values are immutable; pairs and lists share their
/// children, so copies are cheap.
class Value {
 public:
  enum class Kind : std::uint8_t { kInt = 0, kFloat = 1, kText = 2, kPair = 3, kList = 4 };

  Value() : data_(std::int64_t{0}) {}
  Value(std::int64_t v) : data_(v) {}  // NOLINT(google-explicit-constructor)
  Value(int v) : data_(std::int64_t{v}) {}  // NOLINT
  Value(double v) : data_(v) {}  // NOLINT
  Value(std::string v) : data_(std::move(v)) {}  // NOLINT
  Value(const char* v) : data_(std::string(v)) {}  // NOLINT

  static Value pair(Value first, Value second) {
    Value v;
    ValueList items;
    items.reserve(2);
    items.push_back(std::move(first));
    items.push_back(std::move(second));
    v.data_ = std::make_shared<const Pair>(Pair{std::move(items)});
    return v;
  }

  static Value list(ValueList items) {
    Value v;
    v.data_ = std::make_shared<const ValueList>(std::move(items));
    return v;
  }

  Kind kind() const { return static_cast<Kind>(data_.index()); }
  bool is_int() const { return kind() == Kind::kInt; }
  bool is_float() const { return kind() == Kind::kFloat; }
  bool is_number() const { return is_int() || is_float(); }
  bool is_text() const { return kind() == Kind::kText; }
  bool is_pair() const { return kind() == Kind::kPair; }
  bool is_list() const { return kind() == Kind::kList; }

  std::int64_t as_int() const {
    if (!is_int()) type_mismatch("int");
    return std::get<std::int64_t>(data_);
  }
  double as_float() const {
    if (!is_float()) type_mismatch("float");
    return std::get<double>(data_);
  }
  // Integers widen to double here; nothing else does.
  double as_number() const {
    if (is_int()) return static_cast<double>(std::get<std::int64_t>(data_));
    if (is_float()) return std::get<double>(data_);
    type_mismatch("number");
  }
  const std::string& as_text() const {
    if (!is_text()) type_mismatch("text");
    return std::get<std::string>(data_);
  }
  const Value& first() const { return pair_ref().items[0]; }
  const Value& second() const { return pair_ref().items[1]; }
  const ValueList& as_list() const {
    if (!is_list()) type_mismatch("list");
    return *std::get<std::shared_ptr<const ValueList>>(data_);
  }

  friend std::strong_ordering operator<=>(const Value& a, const Value& b) {
    return compare(a, b);
  }
  friend bool operator==(const Value& a, const Value& b) {
    return compare(a, b) == std::strong_ordering::equal;
  }

  /// FNV-1a (64-bit) over a tagged little-endian encoding of the structure:
  /// one kind byte, then int/float as 8 raw bytes, text as 8-byte length plus
  /// bytes, pairs as both children, lists as 8-byte count plus children.
  /// Multi-byte words are fed low byte first, so the result does not depend
  /// on the host or on the run.
  std::uint64_t stable_hash() const {
    std::uint64_t h = kFnvOffset;
    hash_into(h);
    return h;
  }

  std::string to_string() const {
    std::string out;
    append_to(out);
    return out;
  }

 private:
  // Always two items; a vector because Value is incomplete here.
  struct Pair {
    ValueList items;
  };

  static constexpr std::uint64_t kFnvOffset = 14695981039346656037ULL;
  static constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

  [[noreturn]] void type_mismatch(const char* wanted) const {
    fail(ErrorKind::kTypeError, std::string("expected ") + wanted + ", got " + to_string());
  }

  const Pair& pair_ref() const {
    if (!is_pair()) type_mismatch("pair");
    return *std::get<std::shared_ptr<const Pair>>(data_);
  }

  // Total order on doubles that agrees with bit identity (IEEE totalOrder).
  static std::int64_t float_key(double d) {
    auto bits = std::bit_cast<std::int64_t>(d);
    return bits < 0 ? (bits ^ INT64_MAX) : bits;
  }

  static std::strong_ordering compare(const Value& a, const Value& b) {
    if (auto c = a.data_.index() <=> b.data_.index(); c != 0) return c;
    switch (a.kind()) {
      case Kind::kInt:
        return std::get<std::int64_t>(a.data_) <=> std::get<std::int64_t>(b.data_);
      case Kind::kFloat:
        return float_key(std::get<double>(a.data_)) <=> float_key(std::get<double>(b.data_));
      case Kind::kText:
        return std::get<std::string>(a.data_).compare(std::get<std::string>(b.data_)) <=> 0;
      case Kind::kPair: {
        const auto& pa = a.pair_ref();
        const auto& pb = b.pair_ref();
        if (&pa == &pb) return std::strong_ordering::equal;
        if (auto c = compare(pa.items[0], pb.items[0]); c != 0) return c;
        return compare(pa.items[1], pb.items[1]);
      }
      case Kind::kList: {
        const auto& la = a.as_list();
        const auto& lb = b.as_list();
        if (&la == &lb) return std::strong_ordering::equal;
        const std::size_t n = std::min(la.size(), lb.size());
        for (std::size_t i = 0; i < n; ++i) {
          if (auto c = compare(la[i], lb[i]); c != 0) return c;
        }
        return la.size() <=> lb.size();
      }
    }
    return std::strong_ordering::equal;
  }

  static void mix(std::uint64_t& h, std::uint64_t word) {
    for (int i = 0; i < 8; ++i) {
      h ^= (word >> (8 * i)) & 0xffU;
      h *= kFnvPrime;
    }
  }

  void hash_into(std::uint64_t& h) const {
    h ^= static_cast<std::uint64_t>(data_.index());
    h *= kFnvPrime;
    switch (kind()) {
      case Kind::kInt:
        mix(h, static_cast<std::uint64_t>(std::get<std::int64_t>(data_)));
        break;
      case Kind::kFloat:
        mix(h, std::bit_cast<std::uint64_t>(std::get<double>(data_)));
        break;
      case Kind::kText: {
        const auto& s = std::get<std::string>(data_);
        mix(h, s.size());
        for (unsigned char c : s) {
          h ^= c;
          h *= kFnvPrime;
        }
        break;
      }
      case Kind::kPair:
        first().hash_into(h);
        second().hash_into(h);
        break;
      case Kind::kList: {
        const auto& items = as_list();
        mix(h, items.size());
        for (const auto& item : items) item.hash_into(h);
        break;
      }
    }
  }

  void append_to(std::string& out) const {
    switch (kind()) {
      case Kind::kInt:
        out += std::to_string(std::get<std::int64_t>(data_));
        break;
      case Kind::kFloat: {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.17g", std::get<double>(data_));
        std::string s(buf);
        if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
        out += s;
        break;
      }
      case Kind::kText:
        out += '"';
        for (char c : std::get<std::string>(data_)) {
          if (c == '"' || c == '\\') out += '\\';
          out += c;
        }
        out += '"';
        break;
      case Kind::kPair:
        out += '(';
        first().append_to(out);
        out += ',';
        second().append_to(out);
        out += ')';
        break;
      case Kind::kList: {
        out += '[';
        bool first_item = true;
        for (const auto& item : as_list()) {
          if (!first_item) out += ',';
          first_item = false;
          item.append_to(out);
        }
        out += ']';
        break;
      }
    }
  }

  std::variant<std::int64_t, double, std::string, std::shared_ptr<const Pair>,
               std::shared_ptr<const ValueList>>
      data_;
};

struct ValueHash {
  std::size_t operator()(const Value& v) const noexcept {
    return static_cast<std::size_t>(v.stable_hash());
  }
};

}  // namespace flowdeck
