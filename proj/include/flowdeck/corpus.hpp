#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "flowdeck/dataset.hpp"
#include "flowdeck/ingest.hpp"
#include "flowdeck/program.hpp"
#include "flowdeck/reference.hpp"
#include "flowdeck/semantic_graph.hpp"
#include "flowdeck/topology.hpp"

namespace flowdeck {

using ProgramSource = std::variant<LogicalProgram, Topology>;

inline SemanticGraph semantic_graph_of(const ProgramSource& p) {
  return std::visit(
      [](const auto& x) -> SemanticGraph {
        if constexpr (std::is_same_v<std::decay_t<decltype(x)>, LogicalProgram>) {
          return translate(x);
        } else {
          return as_semantic_graph(x);
        }
      },
      p);
}

inline Outputs reference_outputs(const ProgramSource& p, const Inputs& inputs) {
  return std::visit([&](const auto& x) { return reference::evaluate(x, inputs); }, p);
}

/// Source names a program reads from, in declaration order.
inline std::vector<std::string> source_names(const ProgramSource& p) {
  std::vector<std::string> out;
  if (const auto* prog = std::get_if<LogicalProgram>(&p)) {
    for (OpId s : prog->sources()) out.push_back(prog->op(s).name);
  } else {
    for (const auto& n : std::get<Topology>(p).nodes()) {
      if (n.is_spout) out.push_back(n.name);
    }
  }
  return out;
}

struct CorpusEntry {
  std::string name;
  std::string description;
  ProgramSource program;
  // Has a from-any actor with more than one input.
  bool from_any = false;
  // Every kernel is insensitive to arrival order, so bags must still agree.
  bool order_insensitive = true;
  // Stateful streaming whose result depends on item order.
  bool order_dependent = false;
  // Random inputs of at most 1000 records.
  std::function<Inputs(std::uint64_t seed)> generate;
};

namespace corpus {

namespace detail {

inline const std::vector<std::string>& vocabulary() {
  static const std::vector<std::string> words = {"alpha", "beta", "gamma", "delta", "dataflow", "actor",
                                                 "token", "stage", "kahn",  "fifo",  "shuffle",  "merge"};
  return words;
}

inline std::vector<Record> random_lines(std::mt19937_64& rng, std::size_t max_lines) {
  std::uniform_int_distribution<std::size_t> lines(0, max_lines);
  std::uniform_int_distribution<std::size_t> words(0, 5);
  std::uniform_int_distribution<std::size_t> pick(0, vocabulary().size() - 1);
  std::vector<Record> out;
  const std::size_t n = lines(rng);
  for (std::size_t i = 0; i < n; ++i) {
    std::string line;
    const std::size_t w = words(rng);
    for (std::size_t j = 0; j < w; ++j) {
      if (j) line += ' ';
      line += vocabulary()[pick(rng)];
    }
    out.push_back(Record::unkeyed(Value(line)));
  }
  return out;
}

inline std::vector<Record> random_ints(std::mt19937_64& rng, std::size_t max_n, std::int64_t lo, std::int64_t hi) {
  std::uniform_int_distribution<std::size_t> count(0, max_n);
  std::uniform_int_distribution<std::int64_t> value(lo, hi);
  std::vector<Record> out;
  const std::size_t n = count(rng);
  for (std::size_t i = 0; i < n; ++i) out.push_back(Record::unkeyed(Value(value(rng))));
  return out;
}

inline std::vector<Record> random_keyed(std::mt19937_64& rng, std::size_t max_n, std::int64_t keys) {
  std::uniform_int_distribution<std::size_t> count(0, max_n);
  std::uniform_int_distribution<std::int64_t> key(0, keys - 1);
  std::uniform_int_distribution<std::int64_t> value(-100, 100);
  std::vector<Record> out;
  const std::size_t n = count(rng);
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(Record::keyed(Value("k" + std::to_string(key(rng))), Value(value(rng))));
  }
  return out;
}

}  // namespace detail

/// source "text" -> flat_map split_words -> map pair_with_one ->
/// reduce_by_key sum -> sink "counts"
inline LogicalProgram wordcount() {
  LogicalProgram p;
  const OpId s = p.source("text");
  const OpId w = p.flat_map(s, kernels::lookup("split_words"));
  const OpId k = p.map(w, kernels::lookup("pair_with_one"));
  const OpId r = p.reduce_by_key(k, kernels::lookup("sum"));
  p.sink(r, "counts");
  return p;
}

/// b = r(m(A)): source "numbers" -> map key_mod(7) -> reduce_by_key sum ->
/// sink "totals"
inline LogicalProgram map_reduce() {
  LogicalProgram p;
  const OpId s = p.source("numbers");
  const OpId m = p.map(s, kernels::lookup("key_mod", Value(7)));
  const OpId r = p.reduce_by_key(m, kernels::lookup("sum"));
  p.sink(r, "totals");
  return p;
}

inline LogicalProgram keyed_join() {
  LogicalProgram p;
  const OpId l = p.source("left");
  const OpId r = p.source("right");
  const OpId j = p.join(l, r);
  p.sink(j, "joined");
  return p;
}

/// Tuple stream: pair_with_one -> per-key running count -> sliding window of
/// 3 -> sum of the counts in the window.
inline LogicalProgram windowed_running_count() {
  LogicalProgram p(ProgramMode::kTupleStream);
  const OpId s = p.source("events");
  const OpId k = p.map(s, kernels::lookup("pair_with_one"));
  const OpId c = p.map_with_state(k, kernels::lookup("count"), Value(0));
  const OpId w = p.window(c, WindowSpec{3, 1});
  const OpId t = p.map(w, kernels::lookup("window_sum"));
  p.sink(t, "window_counts");
  return p;
}

/// Halves every value until all are below 1 (at most 64 rounds).
inline LogicalProgram halving_iteration() {
  LogicalProgram body;
  const OpId in = body.source("in");
  const OpId h = body.map(in, kernels::lookup("halve"));
  body.sink(h, "out");
  LogicalProgram p;
  const OpId s = p.source("values");
  const OpId it = p.iterate(s, std::move(body), kernels::predicate("all_below", Value(1)), 64, "halving");
  p.sink(it, "result");
  return p;
}

/// Two spouts merged by one from-any identity bolt; the bolt's outputs land
/// on the implicit sink "merge.out".
inline Topology from_any_merge() {
  Topology t;
  t.add_spout("left");
  t.add_spout("right");
  t.add_bolt("merge", bolts::identity());
  t.connect("left", "merge");
  t.connect("right", "merge");
  return t;
}

inline std::vector<CorpusEntry> all() {
  using detail::random_ints;
  using detail::random_keyed;
  using detail::random_lines;
  std::vector<CorpusEntry> out;
  out.push_back({"wordcount", "word frequencies over lines of text", wordcount(), false, true, false,
                 [](std::uint64_t seed) {
                   std::mt19937_64 rng(seed);
                   return Inputs{{"text", random_lines(rng, 200)}};
                 }});
  out.push_back({"map-reduce", "integers keyed by residue mod 7, summed per key", map_reduce(), false, true, false,
                 [](std::uint64_t seed) {
                   std::mt19937_64 rng(seed);
                   return Inputs{{"numbers", random_ints(rng, 1000, -1000, 1000)}};
                 }});
  out.push_back({"keyed-join", "inner equi-join of two keyed relations", keyed_join(), false, true, false,
                 [](std::uint64_t seed) {
                   std::mt19937_64 rng(seed);
                   auto left = random_keyed(rng, 200, 50);
                   auto right = random_keyed(rng, 200, 50);
                   return Inputs{{"left", std::move(left)}, {"right", std::move(right)}};
                 }});
  out.push_back({"windowed-running-count", "per-word running counts summed over a sliding window",
                 windowed_running_count(), false, true, true, [](std::uint64_t seed) {
                   std::mt19937_64 rng(seed);
                   std::uniform_int_distribution<std::size_t> count(0, 300);
                   std::uniform_int_distribution<std::size_t> pick(0, 5);
                   std::vector<Record> events;
                   const std::size_t n = count(rng);
                   for (std::size_t i = 0; i < n; ++i) {
                     events.push_back(Record::unkeyed(Value(detail::vocabulary()[pick(rng)])));
                   }
                   return Inputs{{"events", std::move(events)}};
                 }});
  out.push_back({"halving-iteration", "halve every value until all fall below 1", halving_iteration(), false, true,
                 false, [](std::uint64_t seed) {
                   std::mt19937_64 rng(seed);
                   return Inputs{{"values", random_ints(rng, 1000, 0, 1 << 20)}};
                 }});
  out.push_back({"from-any-merge", "two spouts merged by a from-any identity bolt", from_any_merge(), true, true,
                 false, [](std::uint64_t seed) {
                   std::mt19937_64 rng(seed);
                   auto left = random_ints(rng, 500, 0, 999);
                   auto right = random_ints(rng, 500, 1000, 1999);
                   return Inputs{{"left", std::move(left)}, {"right", std::move(right)}};
                 }});
  return out;
}

inline std::vector<std::string> names() {
  std::vector<std::string> out;
  for (const auto& e : all()) out.push_back(e.name);
  return out;
}

inline std::optional<CorpusEntry> find(std::string_view name) {
  for (auto& e : all()) {
    if (e.name == name) return e;
  }
  return std::nullopt;
}

/// Binds files to sources: a single path feeds the only source; otherwise
/// paths are taken in source order. Text files become lines, .csv files
/// keyed records.
inline Inputs load_inputs(const ProgramSource& p, const std::vector<std::string>& paths) {
  const auto sources = source_names(p);
  if (paths.size() != sources.size()) {
    fail(ErrorKind::kInvalidArgument, "program reads " + std::to_string(sources.size()) + " source(s) but " +
                                          std::to_string(paths.size()) + " input file(s) were given");
  }
  Inputs in;
  for (std::size_t i = 0; i < paths.size(); ++i) in[sources[i]] = read_records(paths[i]);
  return in;
}

}  // namespace corpus
}  // namespace flowdeck
