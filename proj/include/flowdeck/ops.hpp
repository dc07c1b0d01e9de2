#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <unordered_map>
#include <utility>
#include <vector>

#include "flowdeck/data.hpp"
#include "flowdeck/kernels.hpp"

namespace flowdeck::ops {

// Engine-side operator implementations. Keyed operators hash on the key and
// emit groups in order of first key occurrence, so a fixed input order gives
// a fixed output order.

inline std::vector<Record> elementwise(const std::vector<Record>& in, const KernelFn& f) {
  std::vector<Record> out;
  out.reserve(in.size());
  for (const auto& r : in) apply_elementwise(f, r, out);
  return out;
}

namespace detail {

struct KeyedBuckets {
  std::vector<Value> keys;
  std::unordered_map<Value, std::size_t, ValueHash> index;

  std::size_t slot(const Value& k) {
    auto [it, inserted] = index.try_emplace(k, keys.size());
    if (inserted) keys.push_back(k);
    return it->second;
  }
};

}  // namespace detail

inline std::vector<Record> group_by_key(const std::vector<Record>& in) {
  detail::KeyedBuckets buckets;
  std::vector<ValueList> groups;
  for (const auto& r : in) {
    const std::size_t s = buckets.slot(r.require_key());
    if (s == groups.size()) groups.emplace_back();
    groups[s].push_back(r.payload);
  }
  std::vector<Record> out;
  out.reserve(groups.size());
  for (std::size_t i = 0; i < groups.size(); ++i) {
    out.push_back(Record::keyed(buckets.keys[i], Value::list(std::move(groups[i]))));
  }
  return out;
}

inline std::vector<Record> reduce_by_key(const std::vector<Record>& in, const ReduceFn& f) {
  detail::KeyedBuckets buckets;
  std::vector<Value> acc;
  for (const auto& r : in) {
    const std::size_t s = buckets.slot(r.require_key());
    if (s == acc.size()) {
      acc.push_back(r.payload);
    } else {
      acc[s] = f(acc[s], r.payload);
    }
  }
  std::vector<Record> out;
  out.reserve(acc.size());
  for (std::size_t i = 0; i < acc.size(); ++i) out.push_back(Record::keyed(buckets.keys[i], std::move(acc[i])));
  return out;
}

/// Folds every payload; nullopt for empty input.
inline std::optional<Record> reduce(const std::vector<Record>& in, const ReduceFn& f) {
  if (in.empty()) return std::nullopt;
  Value acc = in.front().payload;
  for (std::size_t i = 1; i < in.size(); ++i) acc = f(acc, in[i].payload);
  return Record::unkeyed(std::move(acc));
}

/// Hash join: builds on the right input, probes with the left, emitting in
/// left order.
inline std::vector<Record> join(const std::vector<Record>& left, const std::vector<Record>& right) {
  std::unordered_map<Value, std::vector<const Value*>, ValueHash> built;
  for (const auto& r : right) built[r.require_key()].push_back(&r.payload);
  std::vector<Record> out;
  for (const auto& l : left) {
    auto it = built.find(l.require_key());
    if (it == built.end()) continue;
    for (const Value* v : it->second) out.push_back(Record::keyed(*l.key, Value::pair(l.payload, *v)));
  }
  return out;
}

namespace detail {

// Records travel inside state tokens as [payload] or [key, payload].
inline Value encode_record(const Record& r) {
  return r.key ? Value::list({*r.key, r.payload}) : Value::list({r.payload});
}

inline Record decode_record(const Value& v) {
  const auto& items = v.as_list();
  if (items.size() == 2) return Record::keyed(items[0], items[1]);
  if (items.size() == 1) return Record::unkeyed(items[0]);
  fail(ErrorKind::kTypeError, "malformed record encoding " + v.to_string());
}

inline Value cell_of(const std::optional<Value>& key) {
  return key ? Value::list({*key}) : Value::list({});
}

}  // namespace detail

/// Per-key state cells. The whole table round-trips through a Value so it
/// can live in the state token on an actor's feedback channel.
class StateTable {
 public:
  explicit StateTable(Value init) : init_(std::move(init)) {}

  static StateTable decode(const Value& encoded, Value init) {
    StateTable t(std::move(init));
    for (const auto& entry : encoded.as_list()) t.cells_.emplace(entry.first(), entry.second());
    return t;
  }

  Value encode() const {
    ValueList entries;
    entries.reserve(cells_.size());
    for (const auto& [cell, state] : cells_) entries.push_back(Value::pair(cell, state));
    return Value::list(std::move(entries));
  }

  /// State for `key`, starting from the initial value.
  const Value& get(const std::optional<Value>& key) const {
    auto it = cells_.find(detail::cell_of(key));
    return it == cells_.end() ? init_ : it->second;
  }

  void set(const std::optional<Value>& key, Value v) { cells_[detail::cell_of(key)] = std::move(v); }
  std::size_t size() const { return cells_.size(); }

  /// Runs `f` over `records` in order, emitting one record per input.
  std::vector<Record> fold(const std::vector<Record>& records, const StateFn& f) {
    std::vector<Record> out;
    out.reserve(records.size());
    for (const auto& r : records) {
      auto [next, emitted] = f(get(r.key), r);
      set(r.key, std::move(next));
      out.push_back(std::move(emitted));
    }
    return out;
  }

 private:
  Value init_;
  std::map<Value, Value> cells_;
};

/// Count-based sliding window state: records seen so far plus the last
/// size-1 records, encoded as pair(seen, [records]).
class WindowBuffer {
 public:
  explicit WindowBuffer(WindowSpec spec) : spec_(spec) { spec_.validate(); }

  static Value initial() { return Value::pair(Value(0), Value::list({})); }

  static WindowBuffer decode(const Value& encoded, WindowSpec spec) {
    WindowBuffer w(spec);
    w.seen_ = static_cast<std::uint64_t>(encoded.first().as_int());
    for (const auto& e : encoded.second().as_list()) w.buffer_.push_back(detail::decode_record(e));
    return w;
  }

  Value encode() const {
    ValueList items;
    for (const auto& r : buffer_) items.push_back(detail::encode_record(r));
    return Value::pair(Value(static_cast<std::int64_t>(seen_)), Value::list(std::move(items)));
  }

  std::vector<Record> push_all(const std::vector<Record>& records) {
    std::vector<Record> out;
    for (const auto& r : records) {
      if (auto w = push(r)) out.push_back(std::move(*w));
    }
    return out;
  }

  std::optional<Record> push(const Record& r) {
    buffer_.push_back(r);
    ++seen_;
    std::optional<Record> emitted;
    if (seen_ >= spec_.size && (seen_ - spec_.size) % spec_.slide == 0) {
      ValueList items;
      for (std::size_t i = buffer_.size() - spec_.size; i < buffer_.size(); ++i) {
        items.push_back(record_as_value(buffer_[i]));
      }
      emitted = Record::unkeyed(Value::list(std::move(items)));
    }
    if (buffer_.size() > spec_.size - 1) buffer_.erase(buffer_.begin(), buffer_.end() - (spec_.size - 1));
    return emitted;
  }

 private:
  WindowSpec spec_;
  std::uint64_t seen_ = 0;
  std::vector<Record> buffer_;
};

}  // namespace flowdeck::ops
