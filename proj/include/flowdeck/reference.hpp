#pragma once

#include <deque>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "flowdeck/dataset.hpp"
#include "flowdeck/program.hpp"
#include "flowdeck/topology.hpp"

namespace flowdeck::reference {

// Sequential, single-threaded evaluation of a LogicalProgram. Everything
// here is written as direct comprehensions with linear scans so that it
// shares no code path with the engine's operators.

inline std::vector<Record> map(const std::vector<Record>& a, const KernelFn& f) {
  std::vector<Record> out;
  for (const auto& v : a) apply_elementwise(f, v, out);
  return out;
}

/// {(k, {v : (k, v) in a})}, keys in order of first appearance.
inline std::vector<Record> group_by_key(const std::vector<Record>& a) {
  std::vector<Value> keys;
  for (const auto& r : a) {
    const Value& k = r.require_key();
    bool seen = false;
    for (const auto& existing : keys) seen = seen || existing == k;
    if (!seen) keys.push_back(k);
  }
  std::vector<Record> out;
  for (const auto& k : keys) {
    ValueList values;
    for (const auto& r : a) {
      if (*r.key == k) values.push_back(r.payload);
    }
    out.push_back(Record::keyed(k, Value::list(std::move(values))));
  }
  return out;
}

/// {(k, (va, vb)) : (k, va) in a and (k, vb) in b}
inline std::vector<Record> join(const std::vector<Record>& a, const std::vector<Record>& b) {
  std::vector<Record> out;
  for (const auto& ra : a) {
    for (const auto& rb : b) {
      if (ra.require_key() == rb.require_key()) {
        out.push_back(Record::keyed(*ra.key, Value::pair(ra.payload, rb.payload)));
      }
    }
  }
  return out;
}

inline std::vector<Record> reduce_by_key(const std::vector<Record>& a, const ReduceFn& f) {
  std::vector<Record> out;
  for (const auto& g : group_by_key(a)) {
    const auto& values = g.payload.as_list();
    Value acc = values.front();
    for (std::size_t i = 1; i < values.size(); ++i) acc = f(acc, values[i]);
    out.push_back(Record::keyed(*g.key, acc));
  }
  return out;
}

inline std::vector<Record> reduce(const std::vector<Record>& a, const ReduceFn& f, bool empty_is_error) {
  if (a.empty()) {
    if (empty_is_error) fail(ErrorKind::kEmptyInput, "reduce over an empty collection");
    return {};
  }
  Value acc = a.front().payload;
  for (std::size_t i = 1; i < a.size(); ++i) acc = f(acc, a[i].payload);
  return {Record::unkeyed(acc)};
}

/// Per-key state cells, looked up by linear scan. Unkeyed records share the
/// cell with an absent key.
class StateCells {
 public:
  explicit StateCells(Value init) : init_(std::move(init)) {}

  Value& at(const std::optional<Value>& key) {
    for (auto& [k, v] : cells_) {
      if (k == key) return v;
    }
    cells_.emplace_back(key, init_);
    return cells_.back().second;
  }

 private:
  Value init_;
  std::vector<std::pair<std::optional<Value>, Value>> cells_;
};

/// Incremental sliding window over an unbounded record sequence.
class WindowCursor {
 public:
  explicit WindowCursor(WindowSpec spec) : spec_(spec) { spec_.validate(); }

  std::vector<Record> push(const Record& r) {
    history_.push_back(r);
    const std::size_t n = history_.size();
    if (n < spec_.size || (n - spec_.size) % spec_.slide != 0) return {};
    ValueList items;
    for (std::size_t i = n - spec_.size; i < n; ++i) items.push_back(record_as_value(history_[i]));
    return {Record::unkeyed(Value::list(std::move(items)))};
  }

 private:
  WindowSpec spec_;
  std::vector<Record> history_;
};

Outputs evaluate(const LogicalProgram& prog, const Inputs& inputs);

namespace detail {

// State carried across chunks / tuples by order-sensitive ops.
struct OpState {
  std::optional<StateCells> cells;
  std::optional<WindowCursor> window;
};

inline std::vector<Record> run_iterate(const IterateParams& params, std::vector<Record> current) {
  const auto& body = *params.body;
  const std::string in_name = body.op(body.sources().front()).name;
  const std::string out_name = body.op(body.sinks().front()).name;
  for (std::size_t i = 0; i < params.max_iterations; ++i) {
    if (params.terminate(Multiset(current))) break;
    Inputs in;
    in[in_name] = current;
    current = evaluate(body, in).at(out_name).records();
  }
  return current;
}

/// Evaluates every op on one "round" of data: a whole collection, one chunk,
/// or one tuple. Stateful ops consume records in the given order.
inline std::vector<std::vector<Record>> run_round(const LogicalProgram& prog,
                                                  const std::map<OpId, std::vector<Record>>& source_data,
                                                  std::vector<OpState>& states, bool empty_reduce_is_error) {
  std::vector<std::vector<Record>> value(prog.ops().size());
  for (const auto& o : prog.ops()) {
    auto in = [&](std::size_t i) -> const std::vector<Record>& { return value[o.inputs[i]]; };
    switch (o.kind) {
      case OpKind::kSource: value[o.id] = source_data.at(o.id); break;
      case OpKind::kSink: value[o.id] = in(0); break;
      case OpKind::kMap:
      case OpKind::kFlatMap:
      case OpKind::kFilter: value[o.id] = map(in(0), *o.kernel); break;
      case OpKind::kGroupByKey: value[o.id] = group_by_key(in(0)); break;
      case OpKind::kReduceByKey: value[o.id] = reduce_by_key(in(0), o.kernel->reduce()); break;
      case OpKind::kReduce: value[o.id] = reduce(in(0), o.kernel->reduce(), empty_reduce_is_error); break;
      case OpKind::kJoin: value[o.id] = join(in(0), in(1)); break;
      case OpKind::kMapWithState: {
        auto& cells = states[o.id].cells;
        if (!cells) cells.emplace(*o.initial_state);
        for (const auto& r : in(0)) {
          auto [next, emitted] = o.kernel->state()(cells->at(r.key), r);
          cells->at(r.key) = std::move(next);
          value[o.id].push_back(std::move(emitted));
        }
        break;
      }
      case OpKind::kWindow: {
        auto& cursor = states[o.id].window;
        if (!cursor) cursor.emplace(*o.window);
        for (const auto& r : in(0)) {
          for (auto& w : cursor->push(r)) value[o.id].push_back(std::move(w));
        }
        break;
      }
      case OpKind::kIterate: value[o.id] = run_iterate(*o.iterate, in(0)); break;
    }
  }
  return value;
}

}  // namespace detail

/// Runs the program sequentially. Batch programs evaluate each collection
/// (or the k-th collection of every source) as a whole; micro-batch programs
/// evaluate chunk by chunk; tuple programs evaluate record by record. Sinks
/// receive the same token shapes the engine would deliver.
inline Outputs evaluate(const LogicalProgram& prog, const Inputs& inputs) {
  prog.validate();
  std::vector<std::vector<std::vector<Record>>> rounds_per_source;  // [source][round]
  std::vector<std::optional<std::uint64_t>> round_seq;
  const auto sources = prog.sources();
  std::size_t rounds = 0;
  bool first = true;
  for (OpId s : sources) {
    const auto& name = prog.op(s).name;
    auto it = inputs.find(name);
    if (it == inputs.end()) fail(ErrorKind::kInvalidArgument, "no input bound to source '" + name + "'");
    std::vector<std::vector<Record>> per_round;
    std::vector<std::optional<std::uint64_t>> seqs;
    std::visit(
        [&](const auto& data) {
          using T = std::decay_t<decltype(data)>;
          if constexpr (std::is_same_v<T, std::vector<Record>>) {
            if (prog.mode() == ProgramMode::kTupleStream) {
              for (const auto& r : data) per_round.push_back({r});
            } else if (prog.mode() == ProgramMode::kMicroBatchStream) {
              fail(ErrorKind::kInvalidArgument, "micro-batch program needs chunked input for '" + name + "'");
            } else {
              per_round.push_back(data);
            }
          } else if constexpr (std::is_same_v<T, std::vector<StreamChunk>>) {
            if (prog.mode() != ProgramMode::kMicroBatchStream) {
              fail(ErrorKind::kInvalidArgument, "chunked input needs a micro-batch program");
            }
            for (const auto& c : data) {
              per_round.push_back(c.batch.records());
              seqs.push_back(c.seq);
            }
          } else {
            if (prog.mode() != ProgramMode::kBatch) {
              fail(ErrorKind::kInvalidArgument, "a list of collections needs a batch program");
            }
            for (const auto& m : data) per_round.push_back(m.records());
          }
        },
        it->second);
    if (first) {
      rounds = per_round.size();
      round_seq = seqs;
      first = false;
    } else if (per_round.size() != rounds && prog.mode() != ProgramMode::kTupleStream) {
      fail(ErrorKind::kInvalidArgument, "sources disagree on the number of collections/chunks");
    }
    rounds_per_source.push_back(std::move(per_round));
  }

  Outputs outputs;
  for (OpId s : prog.sinks()) outputs[prog.op(s).name];
  std::vector<detail::OpState> states(prog.ops().size());

  auto emit_round = [&](const std::vector<std::vector<Record>>& value, std::size_t round) {
    for (OpId s : prog.sinks()) {
      auto& sink = outputs[prog.op(s).name];
      const auto& recs = value[s];
      switch (prog.mode()) {
        case ProgramMode::kBatch: sink.tokens.push_back(Token::collection(Multiset(recs))); break;
        case ProgramMode::kMicroBatchStream: {
          const std::uint64_t seq = round < round_seq.size() && round_seq[round] ? *round_seq[round] : round;
          sink.tokens.push_back(Token::micro_batch(StreamChunk{seq, Multiset(recs)}));
          break;
        }
        case ProgramMode::kTupleStream:
          for (const auto& r : recs) sink.tokens.push_back(Token::tuple(r));
          break;
      }
    }
  };

  if (prog.mode() == ProgramMode::kTupleStream) {
    // Sources are drained one after another; each tuple flows to the sinks
    // before the next one enters.
    for (std::size_t si = 0; si < sources.size(); ++si) {
      for (const auto& tuple : rounds_per_source[si]) {
        std::map<OpId, std::vector<Record>> data;
        for (std::size_t sj = 0; sj < sources.size(); ++sj) data[sources[sj]] = sj == si ? tuple : std::vector<Record>{};
        emit_round(detail::run_round(prog, data, states, false), 0);
      }
    }
    return outputs;
  }

  for (std::size_t round = 0; round < rounds; ++round) {
    std::map<OpId, std::vector<Record>> data;
    for (std::size_t si = 0; si < sources.size(); ++si) data[sources[si]] = rounds_per_source[si][round];
    emit_round(detail::run_round(prog, data, states, prog.mode() == ProgramMode::kBatch), round);
  }
  return outputs;
}

/// Runs a topology sequentially: spouts are drained one after another and
/// every record is pushed through a FIFO worklist before the next one
/// enters. From-any bolts take the lowest-numbered non-empty input first.
/// Bolts without successors deliver to "<bolt>.out".
inline Outputs evaluate(const Topology& topo, const Inputs& inputs) {
  const auto diags = topo.validate();
  if (!diags.empty()) fail(ErrorKind::kInvalidArgument, "invalid topology: " + diags.front());
  const auto& nodes = topo.nodes();
  std::vector<std::vector<std::deque<Record>>> queues(nodes.size());
  std::vector<Value> state(nodes.size());
  Outputs outputs;
  for (const auto& n : nodes) {
    queues[n.id].resize(topo.inputs_of(n.id).size());
    if (n.initial_state) state[n.id] = *n.initial_state;
    if (!n.is_spout && topo.outputs_of(n.id).empty()) outputs[n.name + ".out"];
  }
  auto push = [&](NodeId from, const std::optional<std::size_t>& output, const Record& r) {
    const auto outs = topo.outputs_of(from);
    for (std::size_t k = 0; k < outs.size(); ++k) {
      if (output && *output != k) continue;
      const auto& e = topo.edges()[outs[k]];
      const auto ins = topo.inputs_of(e.to);
      for (std::size_t port = 0; port < ins.size(); ++port) {
        if (ins[port] == outs[k]) queues[e.to][port].push_back(r);
      }
    }
  };
  auto fire_one = [&]() -> bool {
    for (const auto& n : nodes) {
      if (n.is_spout) continue;
      auto& q = queues[n.id];
      std::vector<BoltInput> in;
      if (n.consume == ConsumePolicy::kFromAll) {
        bool all = !q.empty();
        for (const auto& port : q) all = all && !port.empty();
        if (!all) continue;
        for (std::size_t p = 0; p < q.size(); ++p) {
          in.push_back({p, q[p].front()});
          q[p].pop_front();
        }
      } else {
        for (std::size_t p = 0; p < q.size() && in.empty(); ++p) {
          if (q[p].empty()) continue;
          in.push_back({p, q[p].front()});
          q[p].pop_front();
        }
        if (in.empty()) continue;
      }
      Emitter out;
      n.kernel->fn(in, out, state[n.id]);
      const bool terminal = topo.outputs_of(n.id).empty();
      for (const auto& e : out.emitted()) {
        if (terminal) {
          outputs[n.name + ".out"].tokens.push_back(Token::tuple(e.record));
        } else {
          push(n.id, e.output, e.record);
        }
      }
      return true;
    }
    return false;
  };
  for (const auto& n : nodes) {
    if (!n.is_spout) continue;
    std::vector<Record> feed;
    if (auto it = inputs.find(n.name); it != inputs.end()) {
      const auto* recs = std::get_if<std::vector<Record>>(&it->second);
      if (!recs) fail(ErrorKind::kInvalidArgument, "spout '" + n.name + "' needs a record list");
      feed = *recs;
    } else if (n.factory) {
      auto gen = n.factory();
      while (auto r = gen()) feed.push_back(std::move(*r));
    } else {
      fail(ErrorKind::kInvalidArgument, "no input bound to spout '" + n.name + "'");
    }
    for (const auto& r : feed) {
      push(n.id, std::nullopt, r);
      while (fire_one()) {
      }
    }
  }
  return outputs;
}

}  // namespace flowdeck::reference
