#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "flowdeck/ops.hpp"
#include "flowdeck/program.hpp"
#include "flowdeck/topology.hpp"

namespace flowdeck {

enum class Granularity { kCollection, kMicroBatch, kTuple };

inline std::string_view to_string(Granularity g) {
  switch (g) {
    case Granularity::kCollection: return "collection";
    case Granularity::kMicroBatch: return "microbatch";
    case Granularity::kTuple: return "tuple";
  }
  return "?";
}

inline Granularity granularity_of(ProgramMode m) {
  switch (m) {
    case ProgramMode::kBatch: return Granularity::kCollection;
    case ProgramMode::kMicroBatchStream: return Granularity::kMicroBatch;
    case ProgramMode::kTupleStream: return Granularity::kTuple;
  }
  return Granularity::kCollection;
}

enum class OutputPolicy { kBroadcast, kHashPartition, kForward };

inline std::string_view to_string(OutputPolicy p) {
  switch (p) {
    case OutputPolicy::kBroadcast: return "broadcast";
    case OutputPolicy::kHashPartition: return "hash_partition";
    case OutputPolicy::kForward: return "forward";
  }
  return "?";
}

enum class ActorKind {
  kSource,
  kSink,
  kMap,
  kFlatMap,
  kFilter,
  kGroupByKey,
  kReduceByKey,
  kReduce,
  kJoin,
  kMapWithState,
  kWindow,
  kIterate,
  kSpout,
  kBolt,
};

inline std::string_view to_string(ActorKind k) {
  switch (k) {
    case ActorKind::kSource: return "source";
    case ActorKind::kSink: return "sink";
    case ActorKind::kMap: return "map";
    case ActorKind::kFlatMap: return "flat_map";
    case ActorKind::kFilter: return "filter";
    case ActorKind::kGroupByKey: return "group_by_key";
    case ActorKind::kReduceByKey: return "reduce_by_key";
    case ActorKind::kReduce: return "reduce";
    case ActorKind::kJoin: return "join";
    case ActorKind::kMapWithState: return "map_with_state";
    case ActorKind::kWindow: return "window";
    case ActorKind::kIterate: return "iterate";
    case ActorKind::kSpout: return "spout";
    case ActorKind::kBolt: return "bolt";
  }
  return "?";
}

inline ActorKind actor_kind_of(OpKind k) {
  switch (k) {
    case OpKind::kSource: return ActorKind::kSource;
    case OpKind::kMap: return ActorKind::kMap;
    case OpKind::kFlatMap: return ActorKind::kFlatMap;
    case OpKind::kFilter: return ActorKind::kFilter;
    case OpKind::kGroupByKey: return ActorKind::kGroupByKey;
    case OpKind::kReduceByKey: return ActorKind::kReduceByKey;
    case OpKind::kReduce: return ActorKind::kReduce;
    case OpKind::kJoin: return ActorKind::kJoin;
    case OpKind::kMapWithState: return ActorKind::kMapWithState;
    case OpKind::kWindow: return ActorKind::kWindow;
    case OpKind::kIterate: return ActorKind::kIterate;
    case OpKind::kSink: return ActorKind::kSink;
  }
  return ActorKind::kMap;
}

inline bool is_elementwise(ActorKind k) {
  return k == ActorKind::kMap || k == ActorKind::kFlatMap || k == ActorKind::kFilter;
}

class SemanticGraph;

struct SemanticActor {
  std::size_t id = 0;
  std::string label;
  ActorKind kind = ActorKind::kMap;
  std::optional<KernelFn> kernel;
  std::optional<BoltKernel> bolt;
  SpoutFactory spout;
  Granularity granularity = Granularity::kCollection;
  ConsumePolicy consume = ConsumePolicy::kFromAll;
  OutputPolicy output_policy = OutputPolicy::kForward;
  bool stateful = false;
  // Per-key initial value for map_with_state; local state for bolts.
  std::optional<Value> initial_state;
  std::optional<WindowSpec> window;
  std::shared_ptr<const SemanticGraph> body;
  std::optional<Predicate> terminate;
  std::size_t max_iterations = 0;
  // Parallelism requested by the topology, 0 when unspecified.
  std::size_t parallelism_hint = 0;
  bool loop_exit = false;
  // Labels of the actors a fused actor replaced, in chain order.
  std::vector<std::string> fused_from;

  /// Name of the kernel for display, or empty.
  std::string kernel_name() const {
    if (kernel) return kernel->display_name();
    if (bolt) return bolt->display_name();
    if (terminate) return "until " + terminate->display_name();
    return {};
  }
};

struct SemanticEdge {
  std::size_t id = 0;
  std::size_t from = 0;
  std::size_t to = 0;
  // Input position at the consumer (join left = 0, right = 1).
  std::size_t port = 0;
  std::string label;
  bool loop = false;
  // Key-hash redistribution; for tuple edges, false means round-robin.
  bool hash = false;
};

/// G = <V, E>: actors and data dependencies, with no explicit parallelism.
class SemanticGraph {
 public:
  std::size_t add_actor(SemanticActor a) {
    a.id = actors_.size();
    actors_.push_back(std::move(a));
    return actors_.back().id;
  }

  std::size_t add_edge(std::size_t from, std::size_t to, std::size_t port, bool hash, bool loop = false,
                       std::string label = {}) {
    if (from >= actors_.size() || to >= actors_.size()) fail(ErrorKind::kInvalidArgument, "edge endpoint out of range");
    SemanticEdge e;
    e.id = edges_.size();
    e.from = from;
    e.to = to;
    e.port = port;
    e.hash = hash;
    e.loop = loop;
    e.label = label.empty() ? "e" + std::to_string(e.id) : std::move(label);
    edges_.push_back(std::move(e));
    return edges_.back().id;
  }

  const std::vector<SemanticActor>& actors() const { return actors_; }
  const std::vector<SemanticEdge>& edges() const { return edges_; }
  const SemanticActor& actor(std::size_t id) const { return actors_.at(id); }
  SemanticActor& mutable_actor(std::size_t id) { return actors_.at(id); }

  std::optional<std::size_t> find(std::string_view label) const {
    for (const auto& a : actors_) {
      if (a.label == label) return a.id;
    }
    return std::nullopt;
  }

  /// Incoming edge ids ordered by port.
  std::vector<std::size_t> inputs_of(std::size_t id) const {
    std::vector<std::size_t> out;
    for (const auto& e : edges_) {
      if (e.to == id) out.push_back(e.id);
    }
    std::stable_sort(out.begin(), out.end(), [this](std::size_t a, std::size_t b) { return edges_[a].port < edges_[b].port; });
    return out;
  }

  /// Outgoing edge ids in creation order.
  std::vector<std::size_t> outputs_of(std::size_t id) const {
    std::vector<std::size_t> out;
    for (const auto& e : edges_) {
      if (e.from == id) out.push_back(e.id);
    }
    return out;
  }

  std::vector<std::size_t> sources() const {
    std::vector<std::size_t> out;
    for (const auto& a : actors_) {
      if (a.kind == ActorKind::kSource || a.kind == ActorKind::kSpout) out.push_back(a.id);
    }
    return out;
  }

  std::vector<std::size_t> sinks() const {
    std::vector<std::size_t> out;
    for (const auto& a : actors_) {
      if (a.kind == ActorKind::kSink) out.push_back(a.id);
    }
    return out;
  }

  /// Recomputes each actor's output policy from its outgoing edges.
  void derive_output_policies() {
    for (auto& a : actors_) {
      const auto outs = outputs_of(a.id);
      bool hash = false;
      for (std::size_t e : outs) hash = hash || edges_[e].hash;
      a.output_policy = hash ? OutputPolicy::kHashPartition
                             : (outs.size() <= 1 ? OutputPolicy::kForward : OutputPolicy::kBroadcast);
    }
  }

  /// Structural problems: granularity mismatch on an edge, from-any on a
  /// non-tuple actor, malformed hierarchical actors, unflagged cycles.
  std::vector<std::string> structure_errors() const {
    std::vector<std::string> errs;
    for (const auto& e : edges_) {
      const auto& a = actors_[e.from];
      const auto& b = actors_[e.to];
      if (a.granularity != b.granularity) {
        errs.push_back("edge " + e.label + " joins " + std::string(to_string(a.granularity)) + " to " +
                       std::string(to_string(b.granularity)));
      }
    }
    for (const auto& a : actors_) {
      if (a.consume == ConsumePolicy::kFromAny && a.granularity != Granularity::kTuple) {
        errs.push_back("actor " + a.label + " consumes from-any without tuple granularity");
      }
      if (a.body) {
        if (a.body->sources().size() != 1 || a.body->sinks().size() != 1) {
          errs.push_back("hierarchical actor " + a.label + " needs one body input and one body output");
        }
        for (auto& inner : a.body->structure_errors()) errs.push_back(a.label + "/" + inner);
      }
    }
    if (!acyclic_without_loops()) errs.push_back("cycle through edges not flagged as loop");
    return errs;
  }

  /// Actor ids in a topological order that ignores loop edges.
  std::vector<std::size_t> topo_order() const {
    std::vector<std::size_t> indeg(actors_.size(), 0);
    for (const auto& e : edges_) {
      if (!e.loop) ++indeg[e.to];
    }
    std::vector<std::size_t> order;
    std::vector<std::size_t> ready;
    for (const auto& a : actors_) {
      if (indeg[a.id] == 0) ready.push_back(a.id);
    }
    while (!ready.empty()) {
      std::sort(ready.begin(), ready.end(), std::greater<>());
      const std::size_t u = ready.back();
      ready.pop_back();
      order.push_back(u);
      for (const auto& e : edges_) {
        if (!e.loop && e.from == u && --indeg[e.to] == 0) ready.push_back(e.to);
      }
    }
    return order;
  }

 private:
  bool acyclic_without_loops() const { return topo_order().size() == actors_.size(); }

  std::vector<SemanticActor> actors_;
  std::vector<SemanticEdge> edges_;
};

/// One actor per logical op, edges following the op DAG. Shuffle ops get
/// hash-partitioned input edges; Iterate becomes a hierarchical actor whose
/// body is the translated sub-program.
inline SemanticGraph translate(const LogicalProgram& prog) {
  prog.validate();
  SemanticGraph g;
  const Granularity gran = granularity_of(prog.mode());
  for (const auto& o : prog.ops()) {
    SemanticActor a;
    a.label = o.label();
    a.kind = actor_kind_of(o.kind);
    a.kernel = o.kernel;
    a.granularity = gran;
    a.consume = ConsumePolicy::kFromAll;
    a.window = o.window;
    if (o.kind == OpKind::kMapWithState) {
      a.stateful = true;
      a.initial_state = o.initial_state;
    }
    if (o.kind == OpKind::kWindow) a.stateful = true;
    if (o.iterate) {
      a.body = std::make_shared<const SemanticGraph>(translate(*o.iterate->body));
      a.terminate = o.iterate->terminate;
      a.max_iterations = o.iterate->max_iterations;
    }
    g.add_actor(std::move(a));
  }
  for (const auto& o : prog.ops()) {
    for (std::size_t port = 0; port < o.inputs.size(); ++port) {
      g.add_edge(o.inputs[port], o.id, port, is_shuffle(o.kind));
    }
  }
  g.derive_output_policies();
  return g;
}

/// Embeds a topology: spouts become source actors, bolts become tuple actors
/// with their consume policy, edges map one to one (feedback edges flagged
/// as loops). Bolts without successors get an implicit sink "<bolt>.out".
inline SemanticGraph as_semantic_graph(const Topology& topo) {
  const auto diags = topo.validate();
  if (!diags.empty()) {
    std::string msg = "invalid topology:";
    for (const auto& d : diags) msg += " " + d + ";";
    fail(ErrorKind::kInvalidArgument, msg);
  }
  SemanticGraph g;
  for (const auto& n : topo.nodes()) {
    SemanticActor a;
    a.label = n.name;
    a.granularity = Granularity::kTuple;
    if (n.is_spout) {
      a.kind = ActorKind::kSpout;
      a.spout = n.factory;
      a.consume = ConsumePolicy::kFromAll;
      a.parallelism_hint = 1;
    } else {
      a.kind = ActorKind::kBolt;
      a.bolt = n.kernel;
      a.consume = n.consume;
      a.stateful = n.initial_state.has_value();
      a.initial_state = n.initial_state;
      a.parallelism_hint = n.parallelism;
      a.loop_exit = n.loop_exit;
    }
    g.add_actor(std::move(a));
  }
  const auto back = topo.feedback_edges();
  // Edges keep connect order so bolt output indices line up with emit_to.
  for (std::size_t i = 0; i < topo.edges().size(); ++i) {
    const auto& e = topo.edges()[i];
    const auto ins = topo.inputs_of(e.to);
    const std::size_t port = static_cast<std::size_t>(std::find(ins.begin(), ins.end(), i) - ins.begin());
    g.add_edge(e.from, e.to, port, e.routing == Routing::kHash, back[i]);
  }
  for (const auto& n : topo.nodes()) {
    if (n.is_spout || !topo.outputs_of(n.id).empty()) continue;
    SemanticActor s;
    s.label = n.name + ".out";
    s.kind = ActorKind::kSink;
    s.granularity = Granularity::kTuple;
    s.consume = ConsumePolicy::kFromAny;
    s.parallelism_hint = 1;
    const std::size_t sid = g.add_actor(std::move(s));
    g.add_edge(n.id, sid, 0, false);
  }
  g.derive_output_policies();
  return g;
}

/// Per-actor intensity flags keyed by label; true marks an actor as
/// compute-intensive. Actors without an entry use the default: elementwise
/// kernels are light, everything else is intensive.
using CostHints = std::map<std::string, bool>;

inline bool is_intensive(const SemanticActor& a, const CostHints& hints) {
  auto it = hints.find(a.label);
  if (it != hints.end()) return it->second;
  return !is_elementwise(a.kind);
}

/// Collapses maximal chains of light, stateless, elementwise actors joined by
/// plain single-consumer edges into one actor running the composed kernel.
inline SemanticGraph fuse(const SemanticGraph& g, const CostHints& hints = {}) {
  const auto& actors = g.actors();
  auto fusible = [&](const SemanticActor& a) {
    return is_elementwise(a.kind) && a.kernel && !a.stateful && !a.body && !is_intensive(a, hints);
  };
  // next[u] = v when u's only output edge goes to v and v's only input is u.
  std::vector<std::optional<std::size_t>> next(actors.size());
  std::vector<bool> has_prev(actors.size(), false);
  for (const auto& a : actors) {
    const auto outs = g.outputs_of(a.id);
    if (outs.size() != 1 || !fusible(a)) continue;
    const auto& e = g.edges()[outs[0]];
    const auto& b = actors[e.to];
    if (e.hash || e.loop || !fusible(b) || b.granularity != a.granularity || g.inputs_of(b.id).size() != 1) continue;
    next[a.id] = b.id;
    has_prev[b.id] = true;
  }

  SemanticGraph out;
  std::vector<std::size_t> remap(actors.size());
  for (const auto& a : actors) {
    if (has_prev[a.id]) continue;
    if (!next[a.id]) {
      SemanticActor copy = a;
      if (copy.body) copy.body = std::make_shared<const SemanticGraph>(fuse(*copy.body, hints));
      remap[a.id] = out.add_actor(std::move(copy));
      continue;
    }
    std::vector<std::size_t> chain{a.id};
    while (next[chain.back()]) chain.push_back(*next[chain.back()]);
    std::vector<KernelFn> kernels_in_chain;
    SemanticActor fused = a;
    fused.label.clear();
    fused.fused_from.clear();
    for (std::size_t id : chain) {
      kernels_in_chain.push_back(*actors[id].kernel);
      fused.label += (fused.label.empty() ? "" : "+") + actors[id].label;
      fused.fused_from.push_back(actors[id].label);
    }
    fused.kind = ActorKind::kFlatMap;
    fused.kernel = compose_elementwise(kernels_in_chain);
    const std::size_t nid = out.add_actor(std::move(fused));
    for (std::size_t id : chain) remap[id] = nid;
  }
  for (const auto& e : g.edges()) {
    if (next[e.from] && *next[e.from] == e.to) continue;
    out.add_edge(remap[e.from], remap[e.to], e.port, e.hash, e.loop);
  }
  out.derive_output_policies();
  return out;
}

namespace detail {

inline std::string dot_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out;
}

inline void dot_body(std::ostringstream& os, const SemanticGraph& g, const std::string& prefix, const std::string& indent) {
  for (const auto& a : g.actors()) {
    std::string label = dot_escape(a.label);
    const std::string k = a.kernel_name();
    if (!k.empty() && k != a.label) label += "\\n" + dot_escape(k);
    label += "\\n" + std::string(to_string(a.granularity)) + " " + std::string(to_string(a.consume)) + " " +
             std::string(to_string(a.output_policy));
    if (a.stateful) label += " stateful";
    os << indent << prefix << a.id << " [label=\"" << label << "\"];\n";
  }
  for (const auto& a : g.actors()) {
    if (!a.body) continue;
    const std::string inner = prefix + std::to_string(a.id) + "_";
    os << indent << "subgraph cluster_" << prefix << a.id << " {\n";
    os << indent << "  label=\"" << dot_escape(a.label) << " body\";\n";
    dot_body(os, *a.body, inner, indent + "  ");
    os << indent << "}\n";
  }
  for (const auto& e : g.edges()) {
    os << indent << prefix << e.from << " -> " << prefix << e.to << " [label=\"" << dot_escape(e.label)
       << (e.hash ? " hash" : "") << "\"";
    if (e.loop) os << ", style=dashed";
    os << "];\n";
  }
}

}  // namespace detail

/// Graphviz rendering: one node per actor labelled with granularity, consume
/// and output policy; loop edges dashed; iteration bodies as clusters.
inline std::string to_dot(const SemanticGraph& g) {
  std::ostringstream os;
  os << "digraph semantic {\n  rankdir=LR;\n";
  detail::dot_body(os, g, "a", "  ");
  os << "}\n";
  return os.str();
}

}  // namespace flowdeck
