#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "flowdeck/behavior.hpp"
#include "flowdeck/semantic_graph.hpp"

namespace flowdeck {

enum class ExecMode { kBsp, kPipelined, kTaggedToken };

inline std::string_view to_string(ExecMode m) {
  switch (m) {
    case ExecMode::kBsp: return "bsp";
    case ExecMode::kPipelined: return "pipelined";
    case ExecMode::kTaggedToken: return "tagged";
  }
  return "?";
}

inline std::optional<ExecMode> exec_mode_from_string(std::string_view s) {
  if (s == "bsp") return ExecMode::kBsp;
  if (s == "pipelined") return ExecMode::kPipelined;
  if (s == "tagged") return ExecMode::kTaggedToken;
  return std::nullopt;
}

enum class IterationStrategy { kBarrierPerSuperstep, kTaggedToken };

enum class ActorRole { kWorker, kScatter, kGather, kDriver };

inline std::string_view to_string(ActorRole r) {
  switch (r) {
    case ActorRole::kWorker: return "worker";
    case ActorRole::kScatter: return "scatter";
    case ActorRole::kGather: return "gather";
    case ActorRole::kDriver: return "driver";
  }
  return "?";
}

/// How one output group spreads a token over its channels. Collection and
/// chunk tokens are split record by record; a tuple goes to one channel.
enum class Route {
  kForward,            // the whole token to the single channel
  kHash,               // by stable key hash mod #channels
  kRoundRobin,         // records/tuples dealt in turn
  kKeyedOrRoundRobin,  // hash for keyed records, round-robin otherwise
};

inline std::string_view to_string(Route r) {
  switch (r) {
    case Route::kForward: return "forward";
    case Route::kHash: return "hash";
    case Route::kRoundRobin: return "round_robin";
    case Route::kKeyedOrRoundRobin: return "keyed_or_round_robin";
  }
  return "?";
}

enum class ChannelRole { kData, kState };

struct Channel {
  std::size_t id = 0;
  std::size_t from = 0;
  std::size_t to = 0;
  ChannelRole role = ChannelRole::kData;
  // Closes a cycle; ignored when ordering actors and computing stages.
  bool loop = false;
  // Carries a key-hash redistribution.
  bool shuffle = false;
  // 0 means unbounded.
  std::size_t capacity = 0;
  std::string label;
};

struct InputPort {
  std::vector<std::size_t> channels;
  bool loop = false;
};

struct OutputGroup {
  std::size_t port = 0;
  Route route = Route::kForward;
  std::vector<std::size_t> channels;
};

struct PlanActor {
  std::size_t id = 0;
  std::size_t origin = 0;
  std::string origin_label;
  std::size_t replica = 0;
  std::size_t replicas = 1;
  ActorRole role = ActorRole::kWorker;
  ActorKind kind = ActorKind::kMap;
  std::string label;
  BehaviorPtr behavior;
  ConsumePolicy consume = ConsumePolicy::kFromAll;
  Granularity granularity = Granularity::kCollection;
  std::vector<InputPort> inputs;
  std::vector<OutputGroup> outputs;
  std::optional<std::size_t> state_channel;
  std::optional<Value> initial_state;
  std::optional<std::size_t> stage;
  bool is_source = false;
  bool is_sink = false;
  // Run input (sources) or output (sinks) name.
  std::string io_name;
  SpoutFactory spout;

  bool stateful() const { return state_channel.has_value(); }
  bool has_loop_input() const {
    return std::any_of(inputs.begin(), inputs.end(), [](const InputPort& p) { return p.loop; });
  }
  std::vector<std::size_t> data_inputs() const {
    std::vector<std::size_t> out;
    for (const auto& p : inputs) out.insert(out.end(), p.channels.begin(), p.channels.end());
    return out;
  }
};

struct Stage {
  std::size_t id = 0;
  std::vector<std::size_t> members;
};

struct ExecutionPlan {
  ExecMode mode = ExecMode::kPipelined;
  Granularity granularity = Granularity::kCollection;
  std::vector<PlanActor> actors;
  std::vector<Channel> channels;
  std::optional<std::vector<Stage>> stages;
  // Effective parallelism per origin label.
  std::map<std::string, std::size_t> parallelism;

  std::vector<std::size_t> sources() const { return filter([](const PlanActor& a) { return a.is_source; }); }
  std::vector<std::size_t> sinks() const { return filter([](const PlanActor& a) { return a.is_sink; }); }

  /// Whether some actor picks among several input channels.
  bool has_from_any() const {
    for (const auto& a : actors) {
      if (a.consume == ConsumePolicy::kFromAny && a.data_inputs().size() > 1) return true;
      if (auto* d = dynamic_cast<const DriverBehavior*>(a.behavior.get()); d && d->body().has_from_any()) return true;
    }
    return false;
  }

  std::vector<std::size_t> replicas_of(std::string_view origin_label, ActorRole role = ActorRole::kWorker) const {
    return filter([&](const PlanActor& a) { return a.origin_label == origin_label && a.role == role; });
  }

  std::optional<std::size_t> find(std::string_view label) const {
    for (const auto& a : actors) {
      if (a.label == label) return a.id;
    }
    return std::nullopt;
  }

  /// Actor ids in topological order, ignoring loop and state channels.
  std::vector<std::size_t> topo_order() const {
    std::vector<std::size_t> indeg(actors.size(), 0);
    for (const auto& c : channels) {
      if (c.role == ChannelRole::kData && !c.loop) ++indeg[c.to];
    }
    std::vector<std::size_t> ready;
    for (const auto& a : actors) {
      if (indeg[a.id] == 0) ready.push_back(a.id);
    }
    std::vector<std::size_t> order;
    while (!ready.empty()) {
      std::sort(ready.begin(), ready.end(), std::greater<>());
      const std::size_t u = ready.back();
      ready.pop_back();
      order.push_back(u);
      for (const auto& c : channels) {
        if (c.role == ChannelRole::kData && !c.loop && c.from == u && --indeg[c.to] == 0) ready.push_back(c.to);
      }
    }
    return order;
  }

  /// Structural diagnostics; empty when the plan is well formed.
  std::vector<std::string> validate() const {
    std::vector<std::string> errs;
    for (const auto& c : channels) {
      if (c.from >= actors.size() || c.to >= actors.size()) errs.push_back("channel " + c.label + " has a dangling endpoint");
    }
    for (const auto& a : actors) {
      std::size_t outs = 0;
      for (const auto& g : a.outputs) outs += g.channels.size();
      const std::size_t ins = a.data_inputs().size();
      if (a.role == ActorRole::kScatter && (ins != 1 || outs != a.replicas)) {
        errs.push_back("scatter " + a.label + " must have 1 input and " + std::to_string(a.replicas) + " outputs");
      }
      if (a.role == ActorRole::kGather && (ins != a.replicas || outs != 1)) {
        errs.push_back("gather " + a.label + " must have " + std::to_string(a.replicas) + " inputs and 1 output");
      }
      if (mode == ExecMode::kBsp && !a.stage) errs.push_back("actor " + a.label + " has no stage");
      if (a.granularity != granularity) errs.push_back("actor " + a.label + " carries a different token kind");
    }
    if (mode != ExecMode::kBsp && stages) errs.push_back("stages present outside BSP mode");
    if (stages) {
      for (const auto& c : channels) {
        if (c.role != ChannelRole::kData || c.loop) continue;
        if (*actors[c.from].stage > *actors[c.to].stage) errs.push_back("channel " + c.label + " runs backwards across stages");
        if (!c.shuffle && *actors[c.from].stage != *actors[c.to].stage) {
          errs.push_back("channel " + c.label + " crosses stages without a shuffle");
        }
      }
    }
    if (topo_order().size() != actors.size()) errs.push_back("cycle through channels not flagged as loop");
    return errs;
  }

 private:
  template <typename Pred>
  std::vector<std::size_t> filter(Pred pred) const {
    std::vector<std::size_t> out;
    for (const auto& a : actors) {
      if (pred(a)) out.push_back(a.id);
    }
    return out;
  }
};

struct ExpandOptions {
  // Requested replicas per origin label; unknown labels are rejected.
  std::map<std::string, std::size_t> parallelism;
  std::size_t default_parallelism = 1;
  // Applied to data channels; 0 keeps them unbounded.
  std::size_t channel_capacity = 0;
};

/// Computes stages: an actor's stage is the largest over its inputs of the
/// producer's stage, plus one across a shuffle channel.
inline ExecutionPlan assign_stages(ExecutionPlan plan) {
  if (plan.mode != ExecMode::kBsp) fail(ErrorKind::kInvalidMode, "stages exist only in BSP mode");
  for (auto& a : plan.actors) a.stage.reset();
  std::size_t max_stage = 0;
  for (std::size_t id : plan.topo_order()) {
    std::size_t s = 0;
    for (const auto& c : plan.channels) {
      if (c.role != ChannelRole::kData || c.loop || c.to != id) continue;
      s = std::max(s, *plan.actors[c.from].stage + (c.shuffle ? 1 : 0));
    }
    plan.actors[id].stage = s;
    max_stage = std::max(max_stage, s);
  }
  std::vector<Stage> stages(plan.actors.empty() ? 0 : max_stage + 1);
  for (std::size_t i = 0; i < stages.size(); ++i) stages[i].id = i;
  for (const auto& a : plan.actors) stages[*a.stage].members.push_back(a.id);
  plan.stages = std::move(stages);
  return plan;
}

ExecutionPlan expand(const SemanticGraph& g, const ExpandOptions& opts, ExecMode mode);

namespace detail {

inline bool has_shuffle_or_iterate(const SemanticGraph& g) {
  for (const auto& e : g.edges()) {
    if (e.hash) return true;
  }
  for (const auto& a : g.actors()) {
    if (a.kind == ActorKind::kIterate) return true;
  }
  return false;
}

inline BehaviorPtr behavior_for(const SemanticActor& a) {
  switch (a.kind) {
    case ActorKind::kSource:
    case ActorKind::kSpout: return std::make_shared<SourceBehavior>();
    case ActorKind::kSink: return std::make_shared<SinkBehavior>();
    case ActorKind::kMap:
    case ActorKind::kFlatMap:
    case ActorKind::kFilter: return std::make_shared<ElementwiseBehavior>(*a.kernel);
    case ActorKind::kGroupByKey: return std::make_shared<GroupByKeyBehavior>();
    case ActorKind::kReduceByKey: return std::make_shared<ReduceByKeyBehavior>(*a.kernel);
    case ActorKind::kReduce: return std::make_shared<ReduceBehavior>(*a.kernel);
    case ActorKind::kJoin: return std::make_shared<JoinBehavior>();
    case ActorKind::kMapWithState: return std::make_shared<MapWithStateBehavior>(*a.kernel, *a.initial_state);
    case ActorKind::kWindow: return std::make_shared<WindowBehavior>(*a.window);
    case ActorKind::kBolt: return std::make_shared<BoltBehavior>(*a.bolt);
    case ActorKind::kIterate: break;
  }
  fail(ErrorKind::kInvalidArgument, "no behavior for actor " + a.label);
}

/// Initial content of the state token, for stateful actors.
inline std::optional<Value> initial_state_token(const SemanticActor& a) {
  switch (a.kind) {
    case ActorKind::kMapWithState: return MapWithStateBehavior::initial_state();
    case ActorKind::kWindow: return WindowBehavior::initial_state();
    case ActorKind::kBolt: return a.stateful ? a.initial_state : std::nullopt;
    default: return std::nullopt;
  }
}

class PlanBuilder {
 public:
  PlanBuilder(ExecutionPlan& plan, const ExpandOptions& opts) : plan_(plan), opts_(opts) {}

  // The actors that take a semantic actor's input and produce its output.
  struct Ends {
    std::vector<std::size_t> in;
    std::vector<std::size_t> out;
    // Output port used by the producer for edges leaving this actor; only
    // the loop controller differs (its exit port).
    std::optional<std::size_t> out_port;
    // Where the body of a tagged loop ends up (fragment mode).
    std::vector<std::size_t> body_in;
    std::vector<std::size_t> body_out;
  };

  /// Expands `g` into the plan. In fragment mode the graph's source and sink
  /// become pass-through actors wired up by the caller.
  std::vector<Ends> build(const SemanticGraph& g, const std::string& prefix, bool fragment, bool top_level) {
    const auto p = parallelism(g, top_level);
    std::vector<Ends> ends(g.actors().size());
    for (std::size_t id : g.topo_order()) {
      const auto& a = g.actor(id);
      if (top_level) plan_.parallelism[a.label] = p[id];
      if (a.kind == ActorKind::kIterate) {
        ends[id] = plan_.mode == ExecMode::kTaggedToken ? tagged_loop(a, prefix) : driver(a, prefix);
        continue;
      }
      for (std::size_t r = 0; r < p[id]; ++r) {
        PlanActor pa;
        pa.origin = id;
        pa.origin_label = prefix + a.label;
        pa.replica = r;
        pa.replicas = p[id];
        pa.role = ActorRole::kWorker;
        pa.kind = a.kind;
        pa.label = p[id] == 1 ? prefix + a.label : prefix + a.label + "[" + std::to_string(r) + "]";
        pa.consume = a.consume;
        pa.granularity = a.granularity;
        const bool io = a.kind == ActorKind::kSource || a.kind == ActorKind::kSpout || a.kind == ActorKind::kSink;
        if (fragment && io) {
          pa.behavior = std::make_shared<ForwardBehavior>(a.kind == ActorKind::kSink ? "loop-out" : "loop-in");
        } else {
          pa.behavior = behavior_for(a);
          pa.is_source = a.kind == ActorKind::kSource || a.kind == ActorKind::kSpout;
          pa.is_sink = a.kind == ActorKind::kSink;
          pa.io_name = prefix + a.label;
          pa.spout = a.spout;
        }
        const std::size_t aid = add_actor(std::move(pa));
        if (auto init = initial_state_token(a)) add_state_channel(aid, *init);
        ends[id].in.push_back(aid);
        ends[id].out.push_back(aid);
      }
    }
    for (const auto& e : g.edges()) wire(g, e, ends[e.from], ends[e.to]);
    return ends;
  }

 private:
  std::vector<std::size_t> parallelism(const SemanticGraph& g, bool top_level) {
    if (top_level) {
      for (const auto& [label, n] : opts_.parallelism) {
        if (!g.find(label)) fail(ErrorKind::kInvalidArgument, "parallelism given for unknown actor '" + label + "'");
        if (n == 0) fail(ErrorKind::kInvalidArgument, "parallelism for '" + label + "' must be positive");
      }
    }
    if (opts_.default_parallelism == 0) fail(ErrorKind::kInvalidArgument, "default parallelism must be positive");
    // Ancestors of order-sensitive stream actors must keep record order.
    std::vector<bool> keep_order(g.actors().size(), false);
    if (!g.actors().empty() && g.actors().front().granularity == Granularity::kMicroBatch) {
      const auto order = g.topo_order();
      for (auto it = order.rbegin(); it != order.rend(); ++it) {
        const auto& a = g.actor(*it);
        bool k = a.kind == ActorKind::kMapWithState || a.kind == ActorKind::kWindow;
        for (std::size_t e : g.outputs_of(a.id)) k = k || keep_order[g.edges()[e].to];
        keep_order[a.id] = k;
      }
    }
    std::vector<std::size_t> p(g.actors().size(), 1);
    for (const auto& a : g.actors()) {
      std::size_t want = opts_.default_parallelism;
      if (a.parallelism_hint) want = a.parallelism_hint;
      if (top_level) {
        if (auto it = opts_.parallelism.find(a.label); it != opts_.parallelism.end()) want = it->second;
      }
      switch (a.kind) {
        case ActorKind::kSource:
        case ActorKind::kSpout:
        case ActorKind::kSink:
        case ActorKind::kReduce:
        case ActorKind::kIterate: want = 1; break;
        default: break;
      }
      if (a.granularity == Granularity::kTuple && a.kind != ActorKind::kBolt) want = 1;
      if (keep_order[a.id]) want = 1;
      p[a.id] = want;
    }
    return p;
  }

  std::size_t add_actor(PlanActor a) {
    a.id = plan_.actors.size();
    if (a.granularity != plan_.granularity && !plan_.actors.empty()) {
      fail(ErrorKind::kTypeError, "actor " + a.label + " mixes token kinds within one plan");
    }
    plan_.granularity = a.granularity;
    plan_.actors.push_back(std::move(a));
    return plan_.actors.back().id;
  }

  std::size_t add_channel(std::size_t from, std::size_t to, std::size_t in_port, bool loop, bool shuffle) {
    Channel c;
    c.id = plan_.channels.size();
    c.from = from;
    c.to = to;
    c.loop = loop;
    c.shuffle = shuffle;
    c.capacity = opts_.channel_capacity;
    c.label = "c" + std::to_string(c.id);
    auto& consumer = plan_.actors[to];
    if (consumer.inputs.size() <= in_port) consumer.inputs.resize(in_port + 1);
    consumer.inputs[in_port].channels.push_back(c.id);
    consumer.inputs[in_port].loop = consumer.inputs[in_port].loop || loop;
    plan_.channels.push_back(std::move(c));
    return plan_.channels.back().id;
  }

  void add_state_channel(std::size_t actor, Value init) {
    Channel c;
    c.id = plan_.channels.size();
    c.from = actor;
    c.to = actor;
    c.role = ChannelRole::kState;
    c.label = "c" + std::to_string(c.id);
    plan_.actors[actor].state_channel = c.id;
    plan_.actors[actor].initial_state = std::move(init);
    plan_.channels.push_back(std::move(c));
  }

  /// One output group from `from` reaching every actor in `to`.
  void fan_out(std::size_t from, std::size_t out_port, Route route, const std::vector<std::size_t>& to,
               std::size_t in_port, bool loop, bool shuffle) {
    OutputGroup group;
    group.port = out_port;
    group.route = to.size() == 1 && route != Route::kHash ? Route::kForward : route;
    for (std::size_t t : to) group.channels.push_back(add_channel(from, t, in_port, loop, shuffle));
    plan_.actors[from].outputs.push_back(std::move(group));
  }

  std::size_t helper_actor(ActorRole role, const PlanActor& like, std::size_t replicas) {
    PlanActor h;
    h.origin = like.origin;
    h.origin_label = like.origin_label;
    h.role = role;
    h.kind = like.kind;
    h.replicas = replicas;
    h.granularity = like.granularity;
    h.consume = ConsumePolicy::kFromAll;
    h.label = std::string(to_string(role)) + ":" + like.origin_label;
    if (role == ActorRole::kGather) {
      h.behavior = std::make_shared<GatherBehavior>();
    } else {
      h.behavior = std::make_shared<ForwardBehavior>("partition");
    }
    return add_actor(std::move(h));
  }

  void wire(const SemanticGraph& g, const SemanticEdge& e, const Ends& u, const Ends& v) {
    const auto& consumer = g.actor(e.to);
    const auto& producer = g.actor(e.from);
    std::size_t out_port = 0;
    if (u.out_port) {
      out_port = *u.out_port;
    } else if (producer.kind == ActorKind::kBolt) {
      const auto outs = g.outputs_of(producer.id);
      out_port = static_cast<std::size_t>(std::find(outs.begin(), outs.end(), e.id) - outs.begin());
    }
    const std::size_t pu = u.out.size();
    const std::size_t pv = v.in.size();
    if (producer.granularity == Granularity::kTuple || e.loop || e.hash) {
      if (producer.granularity == Granularity::kTuple && consumer.consume == ConsumePolicy::kFromAll && pu > 1 &&
          consumer.kind != ActorKind::kSink) {
        fail(ErrorKind::kUnsupported, "from-all actor '" + consumer.label + "' cannot pair tuples from replicated '" +
                                          producer.label + "'");
      }
      const Route route = e.hash ? Route::kHash : Route::kRoundRobin;
      for (std::size_t from : u.out) fan_out(from, out_port, route, v.in, e.port, e.loop, e.hash);
      return;
    }
    if (pu == pv) {
      for (std::size_t i = 0; i < pu; ++i) fan_out(u.out[i], out_port, Route::kForward, {v.in[i]}, e.port, false, false);
      return;
    }
    std::size_t single = u.out.front();
    if (pu > 1) {
      const std::size_t gather = helper_actor(ActorRole::kGather, plan_.actors[v.in.front()], pu);
      for (std::size_t from : u.out) fan_out(from, out_port, Route::kForward, {gather}, 0, false, false);
      single = gather;
      out_port = 0;
      if (pv == 1) {
        fan_out(gather, 0, Route::kForward, v.in, e.port, false, false);
        return;
      }
    }
    const std::size_t scatter = helper_actor(ActorRole::kScatter, plan_.actors[v.in.front()], pv);
    fan_out(single, out_port, Route::kForward, {scatter}, 0, false, false);
    fan_out(scatter, 0, Route::kKeyedOrRoundRobin, v.in, e.port, false, false);
  }

  Ends driver(const SemanticActor& a, const std::string& prefix) {
    ExpandOptions body_opts;
    body_opts.default_parallelism = opts_.default_parallelism;
    body_opts.channel_capacity = opts_.channel_capacity;
    auto body = std::make_shared<const ExecutionPlan>(expand(*a.body, body_opts, plan_.mode));
    const auto& bg = *a.body;
    PlanActor d;
    d.origin = a.id;
    d.origin_label = prefix + a.label;
    d.role = ActorRole::kDriver;
    d.kind = a.kind;
    d.label = prefix + a.label;
    d.granularity = a.granularity;
    d.consume = ConsumePolicy::kFromAll;
    d.behavior = std::make_shared<DriverBehavior>(body, bg.actor(bg.sources().front()).label,
                                                  bg.actor(bg.sinks().front()).label, *a.terminate, a.max_iterations);
    const std::size_t id = add_actor(std::move(d));
    return Ends{{id}, {id}, std::nullopt, {}, {}};
  }

  Ends tagged_loop(const SemanticActor& a, const std::string& prefix) {
    if (has_shuffle_or_iterate(*a.body)) {
      fail(ErrorKind::kUnsupported, "tagged-token iteration needs a body without shuffles or nested iterations ('" +
                                        a.label + "')");
    }
    PlanActor c;
    c.origin = a.id;
    c.origin_label = prefix + a.label;
    c.role = ActorRole::kWorker;
    c.kind = a.kind;
    c.label = prefix + a.label;
    c.granularity = a.granularity;
    c.consume = ConsumePolicy::kFromAny;
    c.behavior = std::make_shared<LoopControllerBehavior>(*a.terminate, a.max_iterations);
    const std::size_t cid = add_actor(std::move(c));
    add_state_channel(cid, LoopControllerBehavior::initial_state());
    // Reserve the entry port so the loop-back port is port 1.
    plan_.actors[cid].inputs.resize(1);

    const auto& bg = *a.body;
    auto body_ends = build(bg, prefix + a.label + "/", true, false);
    const auto& in = body_ends[bg.sources().front()];
    const auto& out = body_ends[bg.sinks().front()];
    fan_out(cid, LoopControllerBehavior::kToBody, Route::kForward, in.in, 0, false, false);
    for (std::size_t from : out.out) fan_out(from, 0, Route::kForward, {cid}, 1, true, false);
    return Ends{{cid}, {cid}, LoopControllerBehavior::kExit, in.in, out.out};
  }

  ExecutionPlan& plan_;
  const ExpandOptions& opts_;
};

}  // namespace detail

/// Expands a semantic graph into replicated actors and channels. Elementwise
/// chains with equal parallelism stay partition-aligned; other parallelism
/// changes go through scatter/gather actors; shuffle edges become p x q
/// hash-routed channels. Iterate actors become a driver (BSP, pipelined) or
/// an inline tagged loop (tagged mode). BSP plans come back with stages.
inline ExecutionPlan expand(const SemanticGraph& g, const ExpandOptions& opts, ExecMode mode) {
  ExecutionPlan plan;
  plan.mode = mode;
  if (!g.actors().empty()) plan.granularity = g.actors().front().granularity;
  detail::PlanBuilder builder(plan, opts);
  builder.build(g, "", false, true);
  if (mode == ExecMode::kBsp) plan = assign_stages(std::move(plan));
  return plan;
}

/// Stand-alone plan for one hierarchical actor: source "in" -> loop -> sink
/// "out".
inline ExecutionPlan expand_iteration(const SemanticActor& actor, IterationStrategy strategy,
                                      const ExpandOptions& opts = {}) {
  if (!actor.body) fail(ErrorKind::kInvalidArgument, "actor '" + actor.label + "' has no hierarchical body");
  SemanticGraph g;
  SemanticActor in;
  in.label = "in";
  in.kind = ActorKind::kSource;
  in.granularity = actor.granularity;
  SemanticActor loop = actor;
  SemanticActor out;
  out.label = "out";
  out.kind = ActorKind::kSink;
  out.granularity = actor.granularity;
  const std::size_t a = g.add_actor(std::move(in));
  const std::size_t b = g.add_actor(std::move(loop));
  const std::size_t c = g.add_actor(std::move(out));
  g.add_edge(a, b, 0, false);
  g.add_edge(b, c, 0, false);
  g.derive_output_policies();
  ExpandOptions o = opts;
  o.parallelism.clear();
  return expand(g, o, strategy == IterationStrategy::kTaggedToken ? ExecMode::kTaggedToken : ExecMode::kBsp);
}

/// Graphviz rendering of a plan: stages as clusters, replicated actors with
/// a double periphery, state channels as self-loops.
inline std::string to_dot(const ExecutionPlan& plan) {
  std::ostringstream os;
  os << "digraph plan {\n  rankdir=LR;\n";
  auto node = [&](const PlanActor& a, const std::string& indent) {
    os << indent << "p" << a.id << " [label=\"" << detail::dot_escape(a.label) << "\\n" << to_string(a.role);
    if (a.behavior) os << " " << detail::dot_escape(a.behavior->name());
    os << "\"";
    if (a.replicas > 1 && a.role == ActorRole::kWorker) os << ", peripheries=2";
    if (a.role == ActorRole::kScatter || a.role == ActorRole::kGather) os << ", shape=diamond";
    if (a.role == ActorRole::kDriver) os << ", shape=box3d";
    os << "];\n";
  };
  if (plan.stages) {
    for (const auto& s : *plan.stages) {
      os << "  subgraph cluster_stage" << s.id << " {\n    label=\"Stage " << s.id << "\";\n";
      for (std::size_t id : s.members) node(plan.actors[id], "    ");
      os << "  }\n";
    }
  } else {
    for (const auto& a : plan.actors) node(a, "  ");
  }
  for (const auto& c : plan.channels) {
    os << "  p" << c.from << " -> p" << c.to << " [label=\"" << c.label;
    if (c.shuffle) os << " hash";
    os << "\"";
    if (c.loop || c.role == ChannelRole::kState) os << ", style=dashed";
    os << "];\n";
  }
  os << "}\n";
  return os.str();
}

}  // namespace flowdeck
