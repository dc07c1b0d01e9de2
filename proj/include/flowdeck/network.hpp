#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "flowdeck/dataset.hpp"
#include "flowdeck/plan.hpp"
#include "flowdeck/trace.hpp"

namespace flowdeck {

enum class Dispatch { kRoundRobin, kOnDemand };

inline std::string_view to_string(Dispatch d) { return d == Dispatch::kRoundRobin ? "round_robin" : "on_demand"; }

inline std::optional<Dispatch> dispatch_from_string(std::string_view s) {
  if (s == "round_robin" || s == "rr") return Dispatch::kRoundRobin;
  if (s == "on_demand" || s == "ondemand") return Dispatch::kOnDemand;
  return std::nullopt;
}

enum class RuntimeKind { kScheduled, kProcess };

inline std::string_view to_string(RuntimeKind r) { return r == RuntimeKind::kScheduled ? "scheduled" : "process"; }

inline std::optional<RuntimeKind> runtime_kind_from_string(std::string_view s) {
  if (s == "scheduled") return RuntimeKind::kScheduled;
  if (s == "process") return RuntimeKind::kProcess;
  return std::nullopt;
}

struct RunConfig {
  std::size_t workers = 1;
  Dispatch dispatch = Dispatch::kRoundRobin;
  std::uint64_t seed = 0;
  // Overrides the plan's data channel capacity when nonzero.
  std::size_t channel_capacity = 0;
  std::uint64_t watchdog_ms = 10000;
  // Upper bound of the seed-derived sleep injected before each task.
  std::uint64_t jitter_us = 0;
  RuntimeKind runtime = RuntimeKind::kScheduled;
};

struct RunStats {
  std::uint64_t tasks = 0;
  std::uint64_t supersteps = 0;
  std::int64_t wall_ns = 0;
};

struct RunResult {
  Outputs outputs;
  Trace trace;
  RunStats stats;
};

/// A kernel failed; carries the failing task and the trace up to the abort.
class RunAborted : public Error {
 public:
  RunAborted(std::string actor, std::uint64_t task, const std::string& message, Trace trace)
      : Error(ErrorKind::kRuntimeAbort, "task " + std::to_string(task) + " (" + actor + ") failed: " + message),
        actor_(std::move(actor)),
        task_(task),
        cause_(message),
        trace_(std::move(trace)) {}

  RunAborted with_trace(Trace trace) const { return RunAborted(actor_, task_, cause_, std::move(trace)); }
  const std::string& cause() const { return cause_; }

  const std::string& actor() const { return actor_; }
  std::uint64_t task() const { return task_; }
  const Trace& trace() const { return trace_; }

 private:
  std::string actor_;
  std::uint64_t task_;
  std::string cause_;
  Trace trace_;
};

/// Where a (possibly nested) run reports: label prefix and superstep.
struct RunScope {
  std::string prefix;
  std::optional<std::int64_t> superstep;
};

namespace detail {

inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t string_seed(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (char c : s) h = (h ^ static_cast<unsigned char>(c)) * 1099511628211ULL;
  return h;
}

}  // namespace detail

/// One input channel as seen by its consumer.
struct Slot {
  std::size_t channel = 0;
  std::size_t port = 0;
  bool loop = false;
  std::deque<std::pair<Token, std::uint64_t>> queue;  // token, position on channel
  bool ended = false;
};

/// Firing rules over a consumer's slots.
namespace firing {

inline bool ready(const std::vector<Slot>& slots, ConsumePolicy policy) {
  if (slots.empty()) return false;
  if (policy == ConsumePolicy::kFromAll) {
    return std::all_of(slots.begin(), slots.end(), [](const Slot& s) { return !s.queue.empty(); });
  }
  return std::any_of(slots.begin(), slots.end(), [](const Slot& s) { return !s.queue.empty(); });
}

/// Indices of the slots a firing consumes from: all of them (from-all) or
/// one non-empty slot picked with `rng` (from-any).
inline std::vector<std::size_t> choose(const std::vector<Slot>& slots, ConsumePolicy policy, std::mt19937_64& rng) {
  std::vector<std::size_t> picked;
  if (policy == ConsumePolicy::kFromAll) {
    for (std::size_t i = 0; i < slots.size(); ++i) picked.push_back(i);
    return picked;
  }
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (!slots[i].queue.empty()) candidates.push_back(i);
  }
  if (candidates.empty()) return picked;
  std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
  picked.push_back(candidates[pick(rng)]);
  return picked;
}

}  // namespace firing

inline std::vector<Slot> make_slots(const PlanActor& a, const ExecutionPlan& plan) {
  std::vector<Slot> slots;
  for (std::size_t p = 0; p < a.inputs.size(); ++p) {
    for (std::size_t ch : a.inputs[p].channels) {
      Slot s;
      s.channel = ch;
      s.port = p;
      s.loop = plan.channels[ch].loop;
      slots.push_back(std::move(s));
    }
  }
  return slots;
}

/// Splits a token over an output group's channels: returns (channel index
/// within group, token) pairs. Every channel of a split collection or chunk
/// gets a token, possibly empty, so from-all consumers stay aligned.
inline std::vector<std::pair<std::size_t, Token>> route_token(const OutputGroup& g, const Token& t, std::uint64_t& rr) {
  const std::size_t n = g.channels.size();
  std::vector<std::pair<std::size_t, Token>> out;
  if (n == 0) return out;
  if (g.route == Route::kForward || n == 1) {
    out.emplace_back(0, t);
    return out;
  }
  auto target = [&](const Record& r) -> std::size_t {
    switch (g.route) {
      case Route::kHash: return static_cast<std::size_t>(r.require_key().stable_hash() % n);
      case Route::kRoundRobin: return static_cast<std::size_t>(rr++ % n);
      case Route::kKeyedOrRoundRobin:
        return r.key ? static_cast<std::size_t>(r.key->stable_hash() % n) : static_cast<std::size_t>(rr++ % n);
      case Route::kForward: break;
    }
    return 0;
  };
  if (t.kind() == TokenKind::kTuple) {
    out.emplace_back(target(t.tuple()), t);
    return out;
  }
  std::vector<std::vector<Record>> parts(n);
  for (const auto& r : t.records()) parts[target(r)].push_back(r);
  for (std::size_t i = 0; i < n; ++i) {
    if (t.kind() == TokenKind::kCollection) {
      out.emplace_back(i, Token(Multiset(std::move(parts[i])), t.tag()));
    } else if (t.kind() == TokenKind::kMicroBatch) {
      out.emplace_back(i, Token(StreamChunk{*t.seq(), Multiset(std::move(parts[i]))}, t.tag()));
    } else {
      fail(ErrorKind::kTypeError, "cannot route a " + std::string(to_string(t.kind())) + " token");
    }
  }
  return out;
}

/// One firing handed to an executor.
struct Task {
  std::uint64_t id = 0;
  std::size_t actor = 0;
  std::optional<std::uint64_t> round;
  std::optional<std::int64_t> tag;
  std::uint64_t sleep_us = 0;
  FireContext ctx;
};

using SubplanRunner = std::function<Outputs(const ExecutionPlan&, const Inputs&, const RunScope&)>;

/// Channel contents and actor bookkeeping for one run. Not synchronized:
/// the owning runtime serializes access.
class Network {
 public:
  Network(const ExecutionPlan& plan, const Inputs& inputs, const RunConfig& cfg, TraceCollector& trace, RunScope scope,
          SubplanRunner runner)
      : plan_(plan),
        cfg_(cfg),
        trace_(trace),
        scope_(std::move(scope)),
        runner_(std::move(runner)),
        rng_(detail::mix64(cfg.seed ^ detail::string_seed(scope_.prefix))),
        actors_(plan.actors.size()),
        sent_(plan.channels.size(), 0),
        consumer_slot_(plan.channels.size(), {0, 0}) {
    const auto diags = plan.validate();
    if (!diags.empty()) fail(ErrorKind::kInvalidArgument, "malformed plan: " + diags.front());
    order_ = plan.topo_order();
    counting_gate_ = plan.mode == ExecMode::kBsp && plan.granularity != Granularity::kTuple;
    for (const auto& a : plan.actors) {
      auto& st = actors_[a.id];
      st.slots = make_slots(a, plan);
      for (std::size_t i = 0; i < st.slots.size(); ++i) consumer_slot_[st.slots[i].channel] = {a.id, i};
      st.rr.assign(a.outputs.size(), 0);
      st.loop = a.has_loop_input();
      if (a.is_source) load_feed(a, inputs);
      if (a.is_sink) outputs_[a.io_name];
    }
    for (const auto& a : plan.actors) {
      if (a.stateful()) put_state(a.id, *a.initial_state, -1);
    }
    if (plan.stages) {
      stage_open_count_.assign(plan.stages->size(), 0);
      for (const auto& a : plan.actors) ++stage_open_count_[*a.stage];
    }
  }

  const ExecutionPlan& plan() const { return plan_; }
  std::string label(std::size_t a) const { return scope_.prefix + plan_.actors[a].label; }

  bool enabled(std::size_t a) const {
    const auto& pa = plan_.actors[a];
    const auto& st = actors_[a];
    if (st.busy || st.closed || !st.outbox.empty()) return false;
    if (pa.stateful() && !st.state) return false;
    if (!gate_open(a)) return false;
    if (!outputs_have_room(a)) return false;
    if (pa.is_source) return feed_available(a);
    return firing::ready(st.slots, pa.consume);
  }

  /// Takes the tokens for one firing of `a`, or nullopt if it cannot fire.
  std::optional<Task> take(std::size_t a, std::int64_t worker) {
    if (!enabled(a)) return std::nullopt;
    const auto& pa = plan_.actors[a];
    auto& st = actors_[a];
    Task t;
    t.id = next_task_++;
    t.actor = a;
    if (counting_gate_) t.round = st.fired;
    ++st.fired;
    t.ctx.ports.resize(pa.inputs.size());
    if (pa.is_source) {
      t.ctx.feed = next_feed(a);
    } else {
      for (std::size_t i : firing::choose(st.slots, pa.consume, rng_)) {
        auto& slot = st.slots[i];
        auto [token, pos] = std::move(slot.queue.front());
        slot.queue.pop_front();
        if (!t.tag && token.tag()) t.tag = static_cast<std::int64_t>(token.tag()->tag);
        log_transfer(TraceKind::kReceive, a, slot.channel, pos, worker, t.id, token.tag(), {});
        t.ctx.ports[slot.port].push_back(std::move(token));
      }
    }
    if (t.ctx.feed && t.ctx.feed->tag()) t.tag = static_cast<std::int64_t>(t.ctx.feed->tag()->tag);
    if (pa.stateful()) {
      t.ctx.state = std::move(*st.state);
      st.state.reset();
      log_transfer(TraceKind::kReceive, a, *pa.state_channel, st.state_pos, worker, t.id, std::nullopt, "state");
    }
    if (pa.role == ActorRole::kDriver) attach_driver_hooks(t, worker);
    if (cfg_.jitter_us > 0) {
      t.sleep_us = detail::mix64(cfg_.seed * 0x100000001b3ULL ^ (a << 32) ^ st.fired) % (cfg_.jitter_us + 1);
    }
    st.busy = true;
    ++tasks_;
    return t;
  }

  void log_task(TraceKind kind, const Task& t, std::int64_t worker, std::string detail = {}) {
    TraceEvent e;
    e.kind = kind;
    e.actor = label(t.actor);
    e.worker = worker;
    e.task = t.id;
    e.round = t.round;
    e.tag = t.tag;
    e.superstep = scope_.superstep;
    e.detail = std::move(detail);
    if (const auto& s = plan_.actors[t.actor].stage) e.stage = static_cast<std::int64_t>(*s);
    trace_.record(std::move(e));
  }

  /// Applies a finished firing: state back onto the feedback channel,
  /// emissions routed onto output channels, sink deliveries recorded.
  /// Returns actors whose inputs changed.
  std::vector<std::size_t> complete(const Task& t, FireResult result, std::int64_t worker) {
    const std::size_t a = t.actor;
    const auto& pa = plan_.actors[a];
    auto& st = actors_[a];
    st.busy = false;
    supersteps_ += static_cast<std::uint64_t>(result.supersteps);
    if (pa.stateful()) {
      put_state(a, result.state ? std::move(*result.state) : Value(), worker);
    }
    if (pa.is_sink) {
      auto& sink = outputs_[pa.io_name];
      for (auto& tok : result.delivered) sink.tokens.push_back(std::move(tok));
    }
    std::set<std::size_t> touched;
    for (const auto& em : result.emissions) {
      if (!em.token.is_data()) fail(ErrorKind::kTypeError, "actor " + pa.label + " emitted a control token");
      for (std::size_t gi = 0; gi < pa.outputs.size(); ++gi) {
        const auto& g = pa.outputs[gi];
        if (em.port && g.port != *em.port) continue;
        for (auto& [ci, tok] : route_token(g, em.token, st.rr[gi])) {
          const std::size_t ch = g.channels[ci];
          st.outbox.emplace_back(ch, std::move(tok));
        }
      }
    }
    flush_outbox(a, worker, touched);
    if (counting_gate_ && t.round) advance_gate(*t.round, *pa.stage);
    touched.insert(a);
    return {touched.begin(), touched.end()};
  }

  /// Moves pending writes of `a` onto channels while they have room.
  void flush_outbox(std::size_t a, std::int64_t worker, std::set<std::size_t>& touched) {
    auto& st = actors_[a];
    while (!st.outbox.empty()) {
      const std::size_t ch = st.outbox.front().first;
      if (full(ch)) break;
      deliver(a, ch, std::move(st.outbox.front().second), worker);
      st.outbox.pop_front();
      touched.insert(plan_.channels[ch].to);
    }
  }

  /// Retries blocked writes of every producer. True if anything moved.
  bool drain_blocked(std::int64_t worker) {
    bool moved = false;
    std::set<std::size_t> touched;
    for (const auto& pa : plan_.actors) {
      auto& st = actors_[pa.id];
      if (st.outbox.empty()) continue;
      const std::size_t before = st.outbox.size();
      flush_outbox(pa.id, worker, touched);
      moved = moved || st.outbox.size() != before;
    }
    return moved;
  }

  /// True when some data channel has a finite capacity.
  bool bounded() const {
    if (cfg_.channel_capacity) return true;
    return std::any_of(plan_.channels.begin(), plan_.channels.end(),
                       [](const Channel& c) { return c.capacity > 0 && c.role == ChannelRole::kData; });
  }

  /// Closes every finished actor that does not sit on a cycle, sending
  /// EndOfStream downstream, until nothing changes. Returns affected actors.
  std::vector<std::size_t> close_ready() {
    std::set<std::size_t> touched;
    bool changed = true;
    while (changed) {
      changed = false;
      for (std::size_t a : order_) {
        if (!actors_[a].loop && closable(a)) {
          close(a, touched);
          changed = true;
        }
      }
    }
    return {touched.begin(), touched.end()};
  }

  /// At quiescence: closes actors on cycles whose loop inputs have drained.
  bool close_loop_actors() {
    bool any = false;
    std::set<std::size_t> touched;
    for (std::size_t a : order_) {
      if (actors_[a].loop && closable(a)) {
        close(a, touched);
        any = true;
      }
    }
    if (any) close_ready();
    return any;
  }

  bool all_closed() const {
    return std::all_of(actors_.begin(), actors_.end(), [](const ActorState& s) { return s.closed; });
  }

  bool busy(std::size_t a) const { return actors_[a].busy; }

  /// Why the run cannot finish, for error reports.
  std::pair<ErrorKind, std::string> stuck_reason() const {
    for (const auto& pa : plan_.actors) {
      const auto& st = actors_[pa.id];
      if (st.closed) continue;
      if (!st.outbox.empty()) {
        return {ErrorKind::kDeadlock, "actor " + label(pa.id) + " is blocked writing to a full channel"};
      }
      bool has_tokens = false;
      bool has_ended = false;
      for (const auto& s : st.slots) {
        has_tokens = has_tokens || !s.queue.empty();
        has_ended = has_ended || (s.ended && s.queue.empty());
      }
      if (has_tokens && has_ended) {
        return {ErrorKind::kRuntimeAbort, "actor " + label(pa.id) + " holds tokens that can never be matched"};
      }
    }
    return {ErrorKind::kDeadlock, "no actor can fire and the network has not drained"};
  }

  std::uint64_t wake_epoch() const { return wake_epoch_; }
  Outputs take_outputs() { return std::move(outputs_); }
  std::uint64_t tasks() const { return tasks_; }
  std::uint64_t supersteps() const { return supersteps_; }
  const RunScope& scope() const { return scope_; }

 private:
  struct ActorState {
    std::vector<Slot> slots;
    std::optional<Value> state;
    std::uint64_t state_pos = 0;
    bool busy = false;
    bool closed = false;
    bool loop = false;
    std::deque<Token> feed;
    SpoutGenerator generator;
    std::optional<Token> peeked;
    std::deque<std::pair<std::size_t, Token>> outbox;
    std::vector<std::uint64_t> rr;
    std::uint64_t fired = 0;
  };

  void load_feed(const PlanActor& a, const Inputs& inputs) {
    auto& st = actors_[a.id];
    auto it = inputs.find(a.io_name);
    if (it == inputs.end()) {
      if (a.spout) {
        st.generator = a.spout();
        return;
      }
      fail(ErrorKind::kInvalidArgument, "no input bound to source '" + a.io_name + "'");
    }
    const Granularity g = plan_.granularity;
    std::visit(
        [&](const auto& data) {
          using T = std::decay_t<decltype(data)>;
          if constexpr (std::is_same_v<T, std::vector<Record>>) {
            if (g == Granularity::kCollection) {
              st.feed.push_back(Token::collection(Multiset(data)));
            } else if (g == Granularity::kTuple) {
              for (const auto& r : data) st.feed.push_back(Token::tuple(r));
            } else {
              fail(ErrorKind::kInvalidArgument, "micro-batch plan needs chunked input for '" + a.io_name + "'");
            }
          } else if constexpr (std::is_same_v<T, std::vector<StreamChunk>>) {
            if (g != Granularity::kMicroBatch) fail(ErrorKind::kInvalidArgument, "chunked input needs a micro-batch plan");
            for (const auto& c : data) st.feed.push_back(Token::micro_batch(c));
          } else {
            if (g != Granularity::kCollection) {
              fail(ErrorKind::kInvalidArgument, "a list of collections needs a collection plan");
            }
            for (const auto& m : data) st.feed.push_back(Token::collection(m));
          }
        },
        it->second);
  }

  bool feed_available(std::size_t a) const {
    const auto& st = actors_[a];
    if (!st.feed.empty()) return true;
    if (!st.generator) return false;
    auto& mst = const_cast<ActorState&>(st);
    if (!mst.peeked) {
      if (auto r = mst.generator()) {
        mst.peeked = Token::tuple(std::move(*r));
      } else {
        mst.generator = nullptr;
      }
    }
    return mst.peeked.has_value();
  }

  Token next_feed(std::size_t a) {
    auto& st = actors_[a];
    if (!st.feed.empty()) {
      Token t = std::move(st.feed.front());
      st.feed.pop_front();
      return t;
    }
    Token t = std::move(*st.peeked);
    st.peeked.reset();
    return t;
  }

  bool gate_open(std::size_t a) const {
    if (!plan_.stages) return true;
    const std::size_t stage = *plan_.actors[a].stage;
    if (counting_gate_) return actors_[a].fired == frontier_round_ && stage == frontier_stage_;
    for (std::size_t s = 0; s < stage; ++s) {
      if (stage_open_count_[s] > 0) return false;
    }
    return true;
  }

  void advance_gate(std::uint64_t round, std::size_t stage) {
    if (round != frontier_round_ || stage != frontier_stage_) return;
    if (++frontier_done_ < (*plan_.stages)[frontier_stage_].members.size()) return;
    frontier_done_ = 0;
    log_barrier(TraceKind::kBarrierEnter, frontier_stage_, frontier_round_);
    if (++frontier_stage_ == plan_.stages->size()) {
      frontier_stage_ = 0;
      ++frontier_round_;
    }
    log_barrier(TraceKind::kBarrierExit, frontier_stage_, frontier_round_);
    ++wake_epoch_;
  }

  void log_barrier(TraceKind kind, std::size_t stage, std::uint64_t round) {
    TraceEvent e;
    e.kind = kind;
    e.actor = scope_.prefix + "barrier";
    e.stage = static_cast<std::int64_t>(stage);
    e.round = round;
    e.superstep = scope_.superstep;
    trace_.record(std::move(e));
  }

  bool full(std::size_t ch) const {
    std::size_t cap = plan_.channels[ch].capacity;
    if (cfg_.channel_capacity) cap = cfg_.channel_capacity;
    if (cap == 0 || plan_.channels[ch].role == ChannelRole::kState) return false;
    const auto [consumer, slot] = consumer_slot_[ch];
    return actors_[consumer].slots[slot].queue.size() >= cap;
  }

  bool outputs_have_room(std::size_t a) const {
    for (const auto& g : plan_.actors[a].outputs) {
      for (std::size_t ch : g.channels) {
        if (full(ch)) return false;
      }
    }
    return true;
  }

  void deliver(std::size_t producer, std::size_t ch, Token tok, std::int64_t worker) {
    const std::uint64_t pos = sent_[ch]++;
    log_transfer(TraceKind::kSend, producer, ch, pos, worker, std::nullopt, tok.tag(), {});
    const auto [consumer, slot] = consumer_slot_[ch];
    actors_[consumer].slots[slot].queue.emplace_back(std::move(tok), pos);
  }

  void put_state(std::size_t a, Value v, std::int64_t worker) {
    auto& st = actors_[a];
    const std::size_t ch = *plan_.actors[a].state_channel;
    st.state_pos = sent_[ch]++;
    log_transfer(TraceKind::kSend, a, ch, st.state_pos, worker, std::nullopt, std::nullopt, "state");
    st.state = std::move(v);
  }

  void log_transfer(TraceKind kind, std::size_t actor, std::size_t ch, std::uint64_t pos, std::int64_t worker,
                    std::optional<std::uint64_t> task, const std::optional<IterationTag>& tag, std::string detail) {
    TraceEvent e;
    e.kind = kind;
    e.actor = label(actor);
    e.channel = scope_.prefix + plan_.channels[ch].label;
    e.worker = worker;
    e.token = pos;
    e.task = task;
    e.superstep = scope_.superstep;
    if (tag) e.tag = static_cast<std::int64_t>(tag->tag);
    if (const auto& s = plan_.actors[actor].stage) e.stage = static_cast<std::int64_t>(*s);
    e.detail = std::move(detail);
    trace_.record(std::move(e));
  }

  bool closable(std::size_t a) const {
    const auto& pa = plan_.actors[a];
    const auto& st = actors_[a];
    if (st.closed || st.busy || !st.outbox.empty()) return false;
    if (pa.is_source && feed_available(a)) return false;
    for (const auto& s : st.slots) {
      if (!s.queue.empty() || (!s.ended && !s.loop)) return false;
    }
    return pa.behavior->may_close(st.state);
  }

  void close(std::size_t a, std::set<std::size_t>& touched) {
    auto& st = actors_[a];
    st.closed = true;
    if (plan_.stages) --stage_open_count_[*plan_.actors[a].stage];
    for (const auto& g : plan_.actors[a].outputs) {
      for (std::size_t ch : g.channels) {
        log_transfer(TraceKind::kSend, a, ch, sent_[ch], -1, std::nullopt, std::nullopt, "eos");
        const auto [consumer, slot] = consumer_slot_[ch];
        actors_[consumer].slots[slot].ended = true;
        touched.insert(consumer);
      }
    }
    ++wake_epoch_;
  }

  void attach_driver_hooks(Task& t, std::int64_t worker) {
    const std::string driver = label(t.actor);
    const auto stage = plan_.actors[t.actor].stage;
    t.ctx.run_subplan = [runner = runner_, driver](const ExecutionPlan& body, const Inputs& in, std::int64_t n) {
      return runner(body, in, RunScope{driver + "@" + std::to_string(n) + "/", n});
    };
    t.ctx.mark_superstep = [this, driver, worker, stage](bool begin, std::int64_t n) {
      TraceEvent e;
      e.kind = begin ? TraceKind::kSuperstepBegin : TraceKind::kSuperstepEnd;
      e.actor = driver;
      e.worker = worker;
      e.superstep = n;
      if (stage) e.stage = static_cast<std::int64_t>(*stage);
      trace_.record(std::move(e));
    };
  }

  const ExecutionPlan& plan_;
  const RunConfig& cfg_;
  TraceCollector& trace_;
  RunScope scope_;
  SubplanRunner runner_;
  std::mt19937_64 rng_;
  std::vector<ActorState> actors_;
  std::vector<std::uint64_t> sent_;
  std::vector<std::pair<std::size_t, std::size_t>> consumer_slot_;
  std::vector<std::size_t> order_;
  Outputs outputs_;
  bool counting_gate_ = false;
  std::uint64_t frontier_round_ = 0;
  std::size_t frontier_stage_ = 0;
  std::size_t frontier_done_ = 0;
  std::vector<std::size_t> stage_open_count_;
  std::uint64_t next_task_ = 0;
  std::uint64_t tasks_ = 0;
  std::uint64_t supersteps_ = 0;
  std::uint64_t wake_epoch_ = 0;
};

/// A single plan actor with its own input queues, for firing it by hand.
/// Mirrors what the runtimes do for one actor.
class ActorInstance {
 public:
  ActorInstance(const ExecutionPlan& plan, std::size_t actor, std::uint64_t seed = 0)
      : plan_(plan), actor_(plan.actors.at(actor)), slots_(make_slots(actor_, plan)), rng_(seed) {
    if (actor_.stateful()) state_ = *actor_.initial_state;
  }

  const PlanActor& actor() const { return actor_; }

  /// Queues a token on the `index`-th channel of input `port`.
  void offer(std::size_t port, Token t, std::size_t index = 0) {
    std::size_t seen = 0;
    for (auto& s : slots_) {
      if (s.port != port) continue;
      if (seen++ == index) {
        s.queue.emplace_back(std::move(t), 0);
        return;
      }
    }
    fail(ErrorKind::kInvalidArgument, "actor " + actor_.label + " has no input " + std::to_string(port) + "/" +
                                          std::to_string(index));
  }

  bool can_fire() const { return firing::ready(slots_, actor_.consume); }

  /// Fires once if the firing rule holds: returns emissions (as produced,
  /// before routing) or nullopt.
  std::optional<FireResult> try_fire() {
    if (!can_fire()) return std::nullopt;
    FireContext ctx;
    ctx.ports.resize(actor_.inputs.size());
    for (std::size_t i : firing::choose(slots_, actor_.consume, rng_)) {
      ctx.ports[slots_[i].port].push_back(std::move(slots_[i].queue.front().first));
      slots_[i].queue.pop_front();
    }
    ctx.state = state_;
    FireResult r = actor_.behavior->fire(ctx);
    if (actor_.stateful()) state_ = r.state;
    return r;
  }

  Value checkpoint_state() const {
    require_stateful();
    return *state_;
  }

  void restore_state(Value v) {
    require_stateful();
    state_ = std::move(v);
  }

  std::size_t queued(std::size_t port) const {
    std::size_t n = 0;
    for (const auto& s : slots_) {
      if (s.port == port) n += s.queue.size();
    }
    return n;
  }

 private:
  void require_stateful() const {
    if (!actor_.stateful()) fail(ErrorKind::kInvalidArgument, "actor " + actor_.label + " is stateless");
  }

  const ExecutionPlan& plan_;
  const PlanActor& actor_;
  std::vector<Slot> slots_;
  std::mt19937_64 rng_;
  std::optional<Value> state_;
};

}  // namespace flowdeck
