#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "flowdeck/data.hpp"
#include "flowdeck/ops.hpp"

namespace flowdeck {

enum class ConsumePolicy { kFromAll, kFromAny };

inline std::string_view to_string(ConsumePolicy p) {
  return p == ConsumePolicy::kFromAll ? "from_all" : "from_any";
}

/// Stream grouping of a topology edge.
enum class Routing { kRoundRobin, kHash };

inline std::string_view to_string(Routing r) { return r == Routing::kHash ? "hash" : "round_robin"; }

/// One record delivered to a bolt activation, tagged with the input edge
/// (in connect order) it arrived on.
struct BoltInput {
  std::size_t port = 0;
  Record record;
};

/// Collects what a bolt activation emits. `emit` goes to every output edge;
/// `emit_to` targets one output edge by its index in connect order.
class Emitter {
 public:
  struct Emitted {
    std::optional<std::size_t> output;
    Record record;
  };

  void emit(Record r) { out_.push_back({std::nullopt, std::move(r)}); }
  void emit_to(std::size_t output, Record r) { out_.push_back({output, std::move(r)}); }
  const std::vector<Emitted>& emitted() const { return out_; }
  std::vector<Emitted> take() { return std::move(out_); }

 private:
  std::vector<Emitted> out_;
};

/// Per-tuple bolt code. `state` is the bolt's local state; it is the only
/// thing a kernel may keep between activations.
using BoltFn = std::function<void(const std::vector<BoltInput>& inputs, Emitter& out, Value& state)>;

struct BoltKernel {
  std::string name;
  BoltFn fn;
  std::optional<Value> arg;

  std::string display_name() const { return arg ? name + "(" + arg->to_string() + ")" : name; }
};

using SpoutGenerator = std::function<std::optional<Record>()>;
/// Builds a fresh generator per run, so a topology can be executed many times.
using SpoutFactory = std::function<SpoutGenerator()>;

using NodeId = std::size_t;

struct TopologyNode {
  NodeId id = 0;
  std::string name;
  bool is_spout = false;
  // Spouts without a factory read the run input bound to their name.
  SpoutFactory factory;
  std::optional<BoltKernel> kernel;
  ConsumePolicy consume = ConsumePolicy::kFromAny;
  std::optional<Value> initial_state;
  std::size_t parallelism = 1;
  bool loop_exit = false;
};

struct TopologyEdge {
  NodeId from = 0;
  NodeId to = 0;
  Routing routing = Routing::kRoundRobin;
};

struct BoltOptions {
  ConsumePolicy consume = ConsumePolicy::kFromAny;
  std::optional<Value> initial_state;
  std::size_t parallelism = 1;
  bool loop_exit = false;
};

/// An explicit graph of spouts and bolts; cycles are allowed through
/// feedback edges.
class Topology {
 public:
  NodeId add_spout(std::string name, SpoutFactory factory = {}) {
    TopologyNode n;
    n.name = std::move(name);
    n.is_spout = true;
    n.factory = std::move(factory);
    return push(std::move(n));
  }

  NodeId add_bolt(std::string name, BoltKernel kernel, BoltOptions opts = {}) {
    if (opts.parallelism == 0) fail(ErrorKind::kInvalidArgument, "bolt parallelism must be positive");
    TopologyNode n;
    n.name = std::move(name);
    n.kernel = std::move(kernel);
    n.consume = opts.consume;
    n.initial_state = std::move(opts.initial_state);
    n.parallelism = opts.parallelism;
    n.loop_exit = opts.loop_exit;
    return push(std::move(n));
  }

  void connect(NodeId from, NodeId to, Routing routing = Routing::kRoundRobin) {
    if (from >= nodes_.size() || to >= nodes_.size()) {
      fail(ErrorKind::kInvalidArgument, "connect: unknown endpoint");
    }
    edges_.push_back({from, to, routing});
  }

  void connect(std::string_view from, std::string_view to, Routing routing = Routing::kRoundRobin) {
    connect(id_of(from), id_of(to), routing);
  }

  NodeId id_of(std::string_view name) const {
    for (const auto& n : nodes_) {
      if (n.name == name) return n.id;
    }
    fail(ErrorKind::kInvalidArgument, "unknown topology node '" + std::string(name) + "'");
  }

  const std::vector<TopologyNode>& nodes() const { return nodes_; }
  const std::vector<TopologyEdge>& edges() const { return edges_; }
  const TopologyNode& node(NodeId id) const { return nodes_.at(id); }

  /// Indices into edges(), in connect order.
  std::vector<std::size_t> inputs_of(NodeId id) const { return edge_indices([id](const TopologyEdge& e) { return e.to == id; }); }
  std::vector<std::size_t> outputs_of(NodeId id) const {
    return edge_indices([id](const TopologyEdge& e) { return e.from == id; });
  }

  /// One diagnostic per violated invariant; empty when the topology is valid.
  std::vector<std::string> validate() const {
    std::vector<std::string> diags;
    for (const auto& n : nodes_) {
      const auto ins = inputs_of(n.id);
      if (n.is_spout && !ins.empty()) diags.push_back("spout '" + n.name + "' has input edges");
      if (!n.is_spout && ins.empty()) diags.push_back("bolt '" + n.name + "' has no inputs");
    }
    for (const auto& scc : cycles()) {
      bool has_exit = false;
      std::string members;
      for (NodeId id : scc) {
        has_exit = has_exit || nodes_[id].loop_exit;
        members += (members.empty() ? "" : ", ") + nodes_[id].name;
      }
      if (!has_exit) diags.push_back("cycle {" + members + "} has no loop-exit bolt");
    }
    return diags;
  }

  /// Node sets of every cycle (strongly connected components with a cycle).
  std::vector<std::set<NodeId>> cycles() const {
    const std::size_t n = nodes_.size();
    std::vector<std::vector<bool>> reach(n, std::vector<bool>(n, false));
    for (NodeId s = 0; s < n; ++s) {
      std::vector<NodeId> stack{s};
      while (!stack.empty()) {
        const NodeId u = stack.back();
        stack.pop_back();
        for (const auto& e : edges_) {
          if (e.from == u && !reach[s][e.to]) {
            reach[s][e.to] = true;
            stack.push_back(e.to);
          }
        }
      }
    }
    std::vector<std::set<NodeId>> out;
    std::vector<bool> assigned(n, false);
    for (NodeId i = 0; i < n; ++i) {
      if (assigned[i] || !reach[i][i]) continue;
      std::set<NodeId> scc;
      for (NodeId j = 0; j < n; ++j) {
        if (reach[i][j] && reach[j][i]) {
          scc.insert(j);
          assigned[j] = true;
        }
      }
      out.push_back(std::move(scc));
    }
    return out;
  }

  /// Edges that close a cycle: back edges of a depth-first walk started at
  /// the spouts (then at any node not yet reached), in node order.
  std::vector<bool> feedback_edges() const {
    std::vector<bool> back(edges_.size(), false);
    std::vector<int> color(nodes_.size(), 0);  // 0 new, 1 on stack, 2 done
    std::function<void(NodeId)> visit = [&](NodeId u) {
      color[u] = 1;
      for (std::size_t ei : outputs_of(u)) {
        const NodeId v = edges_[ei].to;
        if (color[v] == 1) {
          back[ei] = true;
        } else if (color[v] == 0) {
          visit(v);
        }
      }
      color[u] = 2;
    };
    for (const auto& n : nodes_) {
      if (n.is_spout && color[n.id] == 0) visit(n.id);
    }
    for (const auto& n : nodes_) {
      if (color[n.id] == 0) visit(n.id);
    }
    return back;
  }

 private:
  NodeId push(TopologyNode n) {
    if (n.name.empty()) fail(ErrorKind::kInvalidArgument, "topology nodes need a name");
    for (const auto& existing : nodes_) {
      if (existing.name == n.name) fail(ErrorKind::kInvalidArgument, "duplicate node name '" + n.name + "'");
    }
    n.id = nodes_.size();
    nodes_.push_back(std::move(n));
    return nodes_.back().id;
  }

  template <typename Pred>
  std::vector<std::size_t> edge_indices(Pred pred) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < edges_.size(); ++i) {
      if (pred(edges_[i])) out.push_back(i);
    }
    return out;
  }

  std::vector<TopologyNode> nodes_;
  std::vector<TopologyEdge> edges_;
};

namespace bolts {

/// Forwards every input record unchanged.
inline BoltKernel identity() {
  return {"identity", [](const std::vector<BoltInput>& in, Emitter& out, Value&) {
            for (const auto& i : in) out.emit(i.record);
          }, std::nullopt};
}

inline BoltKernel split_words() {
  return {"split_words", [](const std::vector<BoltInput>& in, Emitter& out, Value&) {
            for (const auto& i : in) {
              for (auto& w : kernels::split_words(i.record.payload.as_text())) out.emit(Record::unkeyed(Value(std::move(w))));
            }
          }, std::nullopt};
}

/// Counts occurrences per word (the payload) and emits (word, running count).
/// State is a per-key table; see ops::StateTable.
inline BoltKernel count() {
  return {"count", [](const std::vector<BoltInput>& in, Emitter& out, Value& state) {
            auto table = ops::StateTable::decode(state, Value(0));
            for (const auto& i : in) {
              const Value word = i.record.key ? *i.record.key : i.record.payload;
              Value next = kernels::add(table.get(word), Value(1));
              table.set(word, next);
              out.emit(Record::keyed(word, next));
            }
            state = table.encode();
          }, std::nullopt};
}

/// From-all pairing: emits pair(payload of port 0, payload of port 1, ...).
inline BoltKernel zip() {
  return {"zip", [](const std::vector<BoltInput>& in, Emitter& out, Value&) {
            ValueList parts;
            for (const auto& i : in) parts.push_back(i.record.payload);
            out.emit(Record::unkeyed(parts.size() == 2 ? Value::pair(parts[0], parts[1]) : Value::list(parts)));
          }, std::nullopt};
}

/// Loop body: subtracts one; positive results go back on output 0, the rest
/// leave on output 1.
inline BoltKernel countdown() {
  return {"countdown", [](const std::vector<BoltInput>& in, Emitter& out, Value&) {
            for (const auto& i : in) {
              Record next{i.record.key, kernels::subtract(i.record.payload, Value(1))};
              if (next.payload.as_number() > 0) {
                out.emit_to(0, std::move(next));
              } else {
                out.emit_to(1, std::move(next));
              }
            }
          }, std::nullopt};
}

inline BoltKernel lookup(std::string_view name) {
  if (name == "identity") return identity();
  if (name == "split_words") return split_words();
  if (name == "count") return count();
  if (name == "zip") return zip();
  if (name == "countdown") return countdown();
  fail(ErrorKind::kInvalidArgument, "unknown bolt kernel '" + std::string(name) + "'");
}

/// Initial state a built-in bolt expects when none is given.
inline std::optional<Value> default_state(std::string_view name) {
  if (name == "count") return Value::list({});
  return std::nullopt;
}

}  // namespace bolts
}  // namespace flowdeck
