#pragma once

#include <algorithm>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "flowdeck/error.hpp"
#include "flowdeck/value.hpp"

namespace flowdeck {

/// A keyed or unkeyed datum. Key-based operators call require_key().
struct Record {
  std::optional<Value> key;
  Value payload;

  static Record keyed(Value k, Value v) { return Record{std::move(k), std::move(v)}; }
  static Record unkeyed(Value v) { return Record{std::nullopt, std::move(v)}; }

  bool is_keyed() const { return key.has_value(); }

  const Value& require_key() const {
    if (!key) fail(ErrorKind::kTypeError, "unkeyed record " + to_string() + " reaching a key-based operator");
    return *key;
  }

  std::string to_string() const {
    if (key) return "(" + key->to_string() + " -> " + payload.to_string() + ")";
    return payload.to_string();
  }

  friend bool operator==(const Record&, const Record&) = default;
  friend std::strong_ordering operator<=>(const Record& a, const Record& b) {
    if (auto c = a.key.has_value() <=> b.key.has_value(); c != 0) return c;
    if (a.key) {
      if (auto c = *a.key <=> *b.key; c != 0) return c;
    }
    return a.payload <=> b.payload;
  }
};

/// Encodes a record as a single Value: keyed records become (key, payload)
/// pairs, unkeyed records are their payload.
inline Value record_as_value(const Record& r) {
  return r.key ? Value::pair(*r.key, r.payload) : r.payload;
}

/// A bag of records. Storage keeps insertion order, but equality is bag
/// equality: order is ignored, multiplicity is not.
class Multiset {
 public:
  Multiset() = default;
  Multiset(std::initializer_list<Record> items) : items_(items) {}
  explicit Multiset(std::vector<Record> items) : items_(std::move(items)) {}

  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }
  void add(Record r) { items_.push_back(std::move(r)); }
  void append(const Multiset& other) {
    items_.insert(items_.end(), other.items_.begin(), other.items_.end());
  }
  void append(Multiset&& other) {
    if (items_.empty()) {
      items_ = std::move(other.items_);
      return;
    }
    items_.insert(items_.end(), std::make_move_iterator(other.items_.begin()),
                  std::make_move_iterator(other.items_.end()));
  }

  const std::vector<Record>& records() const { return items_; }
  std::vector<Record>& mutable_records() { return items_; }
  auto begin() const { return items_.begin(); }
  auto end() const { return items_.end(); }

  /// Records in canonical (sorted) order; for display and comparison only.
  std::vector<Record> canonical() const {
    auto sorted = items_;
    std::sort(sorted.begin(), sorted.end());
    return sorted;
  }

  friend bool operator==(const Multiset& a, const Multiset& b);

 private:
  std::vector<Record> items_;
};

/// True iff both bags hold the same records with the same multiplicities.
inline bool bag_equal(const Multiset& a, const Multiset& b) {
  if (a.size() != b.size()) return false;
  return a.canonical() == b.canonical();
}

inline bool operator==(const Multiset& a, const Multiset& b) { return bag_equal(a, b); }

inline Multiset make_multiset(std::span<const Record> records) {
  return Multiset(std::vector<Record>(records.begin(), records.end()));
}

/// One micro-batch of a discretized stream.
struct StreamChunk {
  std::uint64_t seq = 0;
  Multiset batch;

  friend bool operator==(const StreamChunk&, const StreamChunk&) = default;
};

/// Count-based sliding window. slide > size would leave gaps and is rejected.
struct WindowSpec {
  std::size_t size = 1;
  std::size_t slide = 1;

  void validate() const {
    if (size == 0) fail(ErrorKind::kInvalidArgument, "window size must be positive");
    if (slide == 0) fail(ErrorKind::kInvalidArgument, "window slide must be positive");
    if (slide > size) {
      fail(ErrorKind::kInvalidArgument, "window slide " + std::to_string(slide) +
                                            " exceeds size " + std::to_string(size));
    }
  }

  friend bool operator==(const WindowSpec&, const WindowSpec&) = default;
};

/// Chops an ordered record sequence into fixed-size chunks numbered from 0.
/// Only the last chunk may be short; an empty input yields no chunks.
inline std::vector<StreamChunk> discretize(std::span<const Record> records, std::size_t batch_size) {
  if (batch_size == 0) fail(ErrorKind::kInvalidArgument, "batch_size must be at least 1");
  std::vector<StreamChunk> chunks;
  for (std::size_t start = 0; start < records.size(); start += batch_size) {
    const std::size_t end = std::min(records.size(), start + batch_size);
    chunks.push_back(StreamChunk{chunks.size(), make_multiset(records.subspan(start, end - start))});
  }
  return chunks;
}

/// Window i covers positions [i*slide, i*slide + size); trailing partial
/// windows are not emitted.
inline std::vector<Multiset> windows(std::span<const Record> records, const WindowSpec& spec) {
  spec.validate();
  std::vector<Multiset> out;
  for (std::size_t start = 0; start + spec.size <= records.size(); start += spec.slide) {
    out.push_back(make_multiset(records.subspan(start, spec.size)));
  }
  return out;
}

enum class TokenKind { kCollection, kMicroBatch, kTuple, kControl, kEndOfStream };

inline std::string_view to_string(TokenKind k) {
  switch (k) {
    case TokenKind::kCollection: return "Collection";
    case TokenKind::kMicroBatch: return "MicroBatch";
    case TokenKind::kTuple: return "Tuple";
    case TokenKind::kControl: return "Control";
    case TokenKind::kEndOfStream: return "EndOfStream";
  }
  return "?";
}

struct Control {
  std::int64_t tag = 0;
  friend bool operator==(const Control&, const Control&) = default;
};

struct EndOfStream {
  friend bool operator==(const EndOfStream&, const EndOfStream&) = default;
};

/// Identifies one in-flight loop instance and how many times it has been
/// around the loop.
struct IterationTag {
  std::uint64_t tag = 0;
  std::uint64_t iteration = 0;
  friend bool operator==(const IterationTag&, const IterationTag&) = default;
};

/// The unit carried by a channel.
class Token {
 public:
  using Payload = std::variant<Multiset, StreamChunk, Record, Control, EndOfStream>;

  Token() : payload_(EndOfStream{}) {}
  Token(Payload p, std::optional<IterationTag> tag = std::nullopt)  // NOLINT
      : payload_(std::move(p)), tag_(tag) {}

  static Token collection(Multiset m) { return Token(std::move(m)); }
  static Token micro_batch(StreamChunk c) { return Token(std::move(c)); }
  static Token tuple(Record r) { return Token(std::move(r)); }
  static Token control(std::int64_t tag) { return Token(Control{tag}); }
  static Token end_of_stream() { return Token(EndOfStream{}); }

  TokenKind kind() const { return static_cast<TokenKind>(payload_.index()); }
  bool is_data() const {
    return kind() == TokenKind::kCollection || kind() == TokenKind::kMicroBatch ||
           kind() == TokenKind::kTuple;
  }
  bool is_end_of_stream() const { return kind() == TokenKind::kEndOfStream; }

  const Multiset& collection() const { return get<Multiset>("Collection"); }
  const StreamChunk& chunk() const { return get<StreamChunk>("MicroBatch"); }
  const Record& tuple() const { return get<Record>("Tuple"); }
  const Control& control() const { return get<Control>("Control"); }
  Payload& payload() { return payload_; }
  const Payload& payload() const { return payload_; }

  const std::optional<IterationTag>& tag() const { return tag_; }
  void set_tag(std::optional<IterationTag> t) { tag_ = t; }

  /// Records carried by a data token, regardless of granularity.
  std::vector<Record> records() const {
    switch (kind()) {
      case TokenKind::kCollection: return collection().records();
      case TokenKind::kMicroBatch: return chunk().batch.records();
      case TokenKind::kTuple: return {tuple()};
      default: return {};
    }
  }

  std::optional<std::uint64_t> seq() const {
    if (kind() == TokenKind::kMicroBatch) return chunk().seq;
    return std::nullopt;
  }

  friend bool operator==(const Token&, const Token&) = default;

 private:
  template <typename T>
  const T& get(const char* wanted) const {
    if (const auto* p = std::get_if<T>(&payload_)) return *p;
    fail(ErrorKind::kTypeError, std::string("expected ") + wanted + " token, got " +
                                    std::string(to_string(kind())));
  }

  Payload payload_;
  std::optional<IterationTag> tag_;
};

}  // namespace flowdeck
