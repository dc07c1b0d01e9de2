#pragma once

#include <algorithm>
#include <cctype>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "flowdeck/data.hpp"

namespace flowdeck {

using MapFn = std::function<Record(const Record&)>;
using FlatMapFn = std::function<std::vector<Record>(const Record&)>;
using FilterFn = std::function<bool(const Record&)>;
/// Must be associative and commutative; partitioned folds reorder operands.
using ReduceFn = std::function<Value(const Value&, const Value&)>;
/// (state, record) -> (next state, emitted record).
using StateFn = std::function<std::pair<Value, Record>(const Value&, const Record&)>;
using TerminateFn = std::function<bool(const Multiset&)>;

enum class KernelKind { kMap, kFlatMap, kFilter, kReduce, kState };

inline std::string_view to_string(KernelKind k) {
  switch (k) {
    case KernelKind::kMap: return "map";
    case KernelKind::kFlatMap: return "flat_map";
    case KernelKind::kFilter: return "filter";
    case KernelKind::kReduce: return "reduce";
    case KernelKind::kState: return "state";
  }
  return "?";
}

/// A named kernel. The name (plus optional argument) is how programs refer to
/// kernels in JSON, and how graphs label them.
struct KernelFn {
  std::string name;
  std::variant<MapFn, FlatMapFn, FilterFn, ReduceFn, StateFn> fn;
  std::optional<Value> arg;

  KernelKind kind() const { return static_cast<KernelKind>(fn.index()); }

  std::string display_name() const {
    return arg ? name + "(" + arg->to_string() + ")" : name;
  }

  const MapFn& map() const { return get<MapFn>(KernelKind::kMap); }
  const FlatMapFn& flat_map() const { return get<FlatMapFn>(KernelKind::kFlatMap); }
  const FilterFn& filter() const { return get<FilterFn>(KernelKind::kFilter); }
  const ReduceFn& reduce() const { return get<ReduceFn>(KernelKind::kReduce); }
  const StateFn& state() const { return get<StateFn>(KernelKind::kState); }

 private:
  template <typename F>
  const F& get(KernelKind wanted) const {
    if (const auto* f = std::get_if<F>(&fn)) return *f;
    fail(ErrorKind::kTypeError, "kernel '" + name + "' is a " + std::string(to_string(kind())) +
                                          " kernel, expected " + std::string(to_string(wanted)));
  }
};

struct Predicate {
  std::string name;
  TerminateFn fn;
  std::optional<Value> arg;

  bool operator()(const Multiset& m) const { return fn(m); }
  std::string display_name() const {
    return arg ? name + "(" + arg->to_string() + ")" : name;
  }
};

inline KernelFn make_map(std::string name, MapFn f) { return KernelFn{std::move(name), std::move(f), {}}; }
inline KernelFn make_flat_map(std::string name, FlatMapFn f) { return KernelFn{std::move(name), std::move(f), {}}; }
inline KernelFn make_filter(std::string name, FilterFn f) { return KernelFn{std::move(name), std::move(f), {}}; }
inline KernelFn make_reduce(std::string name, ReduceFn f) { return KernelFn{std::move(name), std::move(f), {}}; }
inline KernelFn make_state(std::string name, StateFn f) { return KernelFn{std::move(name), std::move(f), {}}; }

/// Applies a Map, FlatMap or Filter kernel to one record, yielding zero or
/// more records. Used wherever elementwise kernels are chained.
inline void apply_elementwise(const KernelFn& k, const Record& r, std::vector<Record>& out) {
  switch (k.kind()) {
    case KernelKind::kMap: out.push_back(k.map()(r)); break;
    case KernelKind::kFlatMap: {
      auto produced = k.flat_map()(r);
      out.insert(out.end(), std::make_move_iterator(produced.begin()), std::make_move_iterator(produced.end()));
      break;
    }
    case KernelKind::kFilter:
      if (k.filter()(r)) out.push_back(r);
      break;
    default:
      fail(ErrorKind::kInvalidArgument, "kernel '" + k.name + "' is not elementwise");
  }
}

/// Composes elementwise kernels left to right into one flat-map kernel.
inline KernelFn compose_elementwise(const std::vector<KernelFn>& stages) {
  std::string name;
  for (const auto& s : stages) {
    if (!name.empty()) name += "+";
    name += s.display_name();
  }
  return make_flat_map(name, [stages](const Record& r) {
    std::vector<Record> current{r};
    for (const auto& stage : stages) {
      std::vector<Record> next;
      for (const auto& rec : current) apply_elementwise(stage, rec, next);
      current = std::move(next);
    }
    return current;
  });
}

namespace kernels {

inline Value add(const Value& a, const Value& b) {
  if (a.is_int() && b.is_int()) return Value(a.as_int() + b.as_int());
  return Value(a.as_number() + b.as_number());
}

inline Value multiply(const Value& a, const Value& b) {
  if (a.is_int() && b.is_int()) return Value(a.as_int() * b.as_int());
  return Value(a.as_number() * b.as_number());
}

inline Value subtract(const Value& a, const Value& b) {
  if (a.is_int() && b.is_int()) return Value(a.as_int() - b.as_int());
  return Value(a.as_number() - b.as_number());
}

inline std::vector<std::string> split_words(const std::string& text) {
  std::vector<std::string> words;
  std::string current;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!current.empty()) words.push_back(std::move(current));
      current.clear();
    } else {
      current += c;
    }
  }
  if (!current.empty()) words.push_back(std::move(current));
  return words;
}

inline Value arg_or(const std::optional<Value>& arg, Value fallback) {
  return arg ? *arg : std::move(fallback);
}

[[noreturn]] inline void unknown(std::string_view what, std::string_view name) {
  fail(ErrorKind::kInvalidArgument, "unknown " + std::string(what) + " kernel '" + std::string(name) + "'");
}

/// Looks up a built-in kernel by name. `arg` parameterises kernels such as
/// add(n) or key_mod(n); kernels that take no argument ignore it.
inline KernelFn lookup(std::string_view name, const std::optional<Value>& arg = std::nullopt) {
  KernelFn k;
  const std::string n(name);
  if (n == "identity") {
    k = make_map(n, [](const Record& r) { return r; });
  } else if (n == "add") {
    const Value delta = arg_or(arg, Value(1));
    k = make_map(n, [delta](const Record& r) { return Record{r.key, add(r.payload, delta)}; });
  } else if (n == "scale") {
    const Value factor = arg_or(arg, Value(2));
    k = make_map(n, [factor](const Record& r) { return Record{r.key, multiply(r.payload, factor)}; });
  } else if (n == "halve") {
    k = make_map(n, [](const Record& r) { return Record{r.key, Value(r.payload.as_number() / 2.0)}; });
  } else if (n == "square") {
    k = make_map(n, [](const Record& r) { return Record{r.key, multiply(r.payload, r.payload)}; });
  } else if (n == "constant") {
    const Value c = arg_or(arg, Value(0));
    k = make_map(n, [c](const Record& r) { return Record{r.key, c}; });
  } else if (n == "pair_with_one") {
    k = make_map(n, [](const Record& r) { return Record::keyed(r.payload, Value(1)); });
  } else if (n == "key_mod") {
    const std::int64_t m = arg_or(arg, Value(10)).as_int();
    if (m <= 0) fail(ErrorKind::kInvalidArgument, "key_mod needs a positive modulus");
    k = make_map(n, [m](const Record& r) {
      const std::int64_t x = r.payload.as_int();
      return Record::keyed(Value(((x % m) + m) % m), r.payload);
    });
  } else if (n == "drop_key") {
    k = make_map(n, [](const Record& r) { return Record::unkeyed(r.payload); });
  } else if (n == "window_sum") {
    k = make_map(n, [](const Record& r) {
      Value total(0);
      for (const auto& e : r.payload.as_list()) {
        total = add(total, e.is_pair() ? e.second() : e);
      }
      return Record{r.key, total};
    });
  } else if (n == "window_size") {
    k = make_map(n, [](const Record& r) {
      return Record{r.key, Value(static_cast<std::int64_t>(r.payload.as_list().size()))};
    });
  } else if (n == "split_words") {
    k = make_flat_map(n, [](const Record& r) {
      std::vector<Record> out;
      for (auto& w : split_words(r.payload.as_text())) out.push_back(Record{r.key, Value(std::move(w))});
      return out;
    });
  } else if (n == "explode") {
    k = make_flat_map(n, [](const Record& r) {
      std::vector<Record> out;
      for (const auto& e : r.payload.as_list()) out.push_back(Record{r.key, e});
      return out;
    });
  } else if (n == "duplicate") {
    k = make_flat_map(n, [](const Record& r) { return std::vector<Record>{r, r}; });
  } else if (n == "is_odd") {
    k = make_filter(n, [](const Record& r) { return r.payload.as_int() % 2 != 0; });
  } else if (n == "is_even") {
    k = make_filter(n, [](const Record& r) { return r.payload.as_int() % 2 == 0; });
  } else if (n == "less_than") {
    const double bound = arg_or(arg, Value(0)).as_number();
    k = make_filter(n, [bound](const Record& r) { return r.payload.as_number() < bound; });
  } else if (n == "greater_than") {
    const double bound = arg_or(arg, Value(0)).as_number();
    k = make_filter(n, [bound](const Record& r) { return r.payload.as_number() > bound; });
  } else if (n == "nonempty") {
    k = make_filter(n, [](const Record& r) { return !r.payload.as_text().empty(); });
  } else if (n == "sum") {
    k = make_reduce(n, add);
  } else if (n == "product") {
    k = make_reduce(n, multiply);
  } else if (n == "max") {
    k = make_reduce(n, [](const Value& a, const Value& b) { return std::max(a, b); });
  } else if (n == "min") {
    k = make_reduce(n, [](const Value& a, const Value& b) { return std::min(a, b); });
  } else if (n == "subtract") {
    // Deliberately not associative; exists to exercise the contract checker.
    k = make_reduce(n, subtract);
  } else if (n == "count") {
    k = make_state(n, [](const Value& s, const Record& r) {
      Value next = add(s, Value(1));
      return std::pair{next, Record{r.key, next}};
    });
  } else if (n == "running_sum") {
    k = make_state(n, [](const Value& s, const Record& r) {
      Value next = add(s, r.payload);
      return std::pair{next, Record{r.key, next}};
    });
  } else if (n == "running_max") {
    k = make_state(n, [](const Value& s, const Record& r) {
      Value next = std::max(s, r.payload);
      return std::pair{next, Record{r.key, next}};
    });
  } else {
    unknown("map/flat_map/filter/reduce/state", n);
  }
  k.arg = arg;
  return k;
}

/// Built-in termination predicates for iterations.
inline Predicate predicate(std::string_view name, const std::optional<Value>& arg = std::nullopt) {
  const std::string n(name);
  Predicate p{n, {}, arg};
  if (n == "all_below") {
    const double bound = arg_or(arg, Value(1)).as_number();
    p.fn = [bound](const Multiset& m) {
      return std::all_of(m.begin(), m.end(), [bound](const Record& r) { return r.payload.as_number() < bound; });
    };
  } else if (n == "never") {
    p.fn = [](const Multiset&) { return false; };
  } else if (n == "always") {
    p.fn = [](const Multiset&) { return true; };
  } else if (n == "size_at_most") {
    const auto bound = static_cast<std::size_t>(arg_or(arg, Value(0)).as_int());
    p.fn = [bound](const Multiset& m) { return m.size() <= bound; };
  } else {
    unknown("predicate", n);
  }
  return p;
}

}  // namespace kernels
}  // namespace flowdeck
