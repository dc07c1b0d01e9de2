#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "flowdeck/dataset.hpp"
#include "flowdeck/ops.hpp"
#include "flowdeck/semantic_graph.hpp"

namespace flowdeck {

struct ExecutionPlan;

/// A token leaving an actor. `port` selects the output groups bound to that
/// semantic output port; nullopt sends to every group.
struct Emission {
  std::optional<std::size_t> port;
  Token token;
};

/// What one firing sees: the tokens the firing rule matched, grouped by
/// input port in channel order, plus the state token if the actor is
/// stateful.
struct FireContext {
  std::vector<std::vector<Token>> ports;
  std::optional<Value> state;
  // Next input item, for source actors.
  std::optional<Token> feed;
  // Runs a nested plan to completion; provided to hierarchical actors.
  std::function<Outputs(const ExecutionPlan& plan, const Inputs& inputs, std::int64_t superstep)> run_subplan;
  // Records SuperstepBegin/SuperstepEnd events for hierarchical actors.
  std::function<void(bool begin, std::int64_t superstep)> mark_superstep;
};

struct FireResult {
  std::vector<Emission> emissions;
  std::optional<Value> state;
  // Tokens a sink delivered to the run's outputs.
  std::vector<Token> delivered;
  std::int64_t supersteps = 0;
  std::string note;
};

/// The kernel side of an actor. fire() must not keep anything between calls:
/// everything an actor remembers travels in the state token.
class Behavior {
 public:
  virtual ~Behavior() = default;
  virtual std::string name() const = 0;
  virtual FireResult fire(FireContext& ctx) const = 0;
  /// Whether the actor may shut down given its final state.
  virtual bool may_close(const std::optional<Value>& /*state*/) const { return true; }
};

using BehaviorPtr = std::shared_ptr<const Behavior>;

namespace detail {

inline std::vector<Record> union_records(const std::vector<Token>& tokens) {
  std::vector<Record> out;
  for (const auto& t : tokens) {
    auto recs = t.records();
    out.insert(out.end(), std::make_move_iterator(recs.begin()), std::make_move_iterator(recs.end()));
  }
  return out;
}

/// Packs records into tokens shaped like `like`: one collection, one chunk
/// with the same seq, or one tuple per record. Tags carry over.
inline void emit_like(const Token& like, std::vector<Record> recs, std::vector<Emission>& out,
                      std::optional<std::size_t> port = std::nullopt) {
  switch (like.kind()) {
    case TokenKind::kCollection:
      out.push_back({port, Token(Multiset(std::move(recs)), like.tag())});
      break;
    case TokenKind::kMicroBatch:
      out.push_back({port, Token(StreamChunk{*like.seq(), Multiset(std::move(recs))}, like.tag())});
      break;
    case TokenKind::kTuple:
      for (auto& r : recs) out.push_back({port, Token(std::move(r), like.tag())});
      break;
    default:
      fail(ErrorKind::kTypeError, "cannot emit data shaped like a " + std::string(to_string(like.kind())) + " token");
  }
}

inline const Token& first_token(const FireContext& ctx) {
  for (const auto& p : ctx.ports) {
    if (!p.empty()) return p.front();
  }
  fail(ErrorKind::kInvalidArgument, "firing without input tokens");
}

}  // namespace detail

class SourceBehavior : public Behavior {
 public:
  std::string name() const override { return "source"; }
  FireResult fire(FireContext& ctx) const override {
    FireResult r;
    if (!ctx.feed) fail(ErrorKind::kInvalidArgument, "source fired without input");
    r.emissions.push_back({std::nullopt, std::move(*ctx.feed)});
    return r;
  }
};

class SinkBehavior : public Behavior {
 public:
  std::string name() const override { return "sink"; }
  FireResult fire(FireContext& ctx) const override {
    FireResult r;
    for (auto& p : ctx.ports) {
      for (auto& t : p) r.delivered.push_back(std::move(t));
    }
    return r;
  }
};

/// Forwards tokens unchanged; output routing does the splitting or merging.
class ForwardBehavior : public Behavior {
 public:
  explicit ForwardBehavior(std::string name = "forward") : name_(std::move(name)) {}
  std::string name() const override { return name_; }
  FireResult fire(FireContext& ctx) const override {
    FireResult r;
    for (auto& p : ctx.ports) {
      for (auto& t : p) r.emissions.push_back({std::nullopt, std::move(t)});
    }
    return r;
  }

 private:
  std::string name_;
};

/// Unions one token from every input channel into a single token.
class GatherBehavior : public Behavior {
 public:
  std::string name() const override { return "union"; }
  FireResult fire(FireContext& ctx) const override {
    FireResult r;
    detail::emit_like(detail::first_token(ctx), detail::union_records(ctx.ports.at(0)), r.emissions);
    return r;
  }
};

class ElementwiseBehavior : public Behavior {
 public:
  explicit ElementwiseBehavior(KernelFn f) : f_(std::move(f)) {}
  std::string name() const override { return f_.display_name(); }
  FireResult fire(FireContext& ctx) const override {
    FireResult r;
    for (const auto& t : ctx.ports.at(0)) detail::emit_like(t, ops::elementwise(t.records(), f_), r.emissions);
    return r;
  }

 private:
  KernelFn f_;
};

class GroupByKeyBehavior : public Behavior {
 public:
  std::string name() const override { return "group_by_key"; }
  FireResult fire(FireContext& ctx) const override {
    FireResult r;
    detail::emit_like(detail::first_token(ctx), ops::group_by_key(detail::union_records(ctx.ports.at(0))), r.emissions);
    return r;
  }
};

class ReduceByKeyBehavior : public Behavior {
 public:
  explicit ReduceByKeyBehavior(KernelFn f) : f_(std::move(f)) {}
  std::string name() const override { return "reduce_by_key " + f_.display_name(); }
  FireResult fire(FireContext& ctx) const override {
    FireResult r;
    detail::emit_like(detail::first_token(ctx), ops::reduce_by_key(detail::union_records(ctx.ports.at(0)), f_.reduce()),
                      r.emissions);
    return r;
  }

 private:
  KernelFn f_;
};

class ReduceBehavior : public Behavior {
 public:
  explicit ReduceBehavior(KernelFn f) : f_(std::move(f)) {}
  std::string name() const override { return "reduce " + f_.display_name(); }
  FireResult fire(FireContext& ctx) const override {
    FireResult r;
    const Token& like = detail::first_token(ctx);
    auto folded = ops::reduce(detail::union_records(ctx.ports.at(0)), f_.reduce());
    if (!folded && like.kind() == TokenKind::kCollection) {
      fail(ErrorKind::kEmptyInput, "reduce over an empty collection");
    }
    std::vector<Record> recs;
    if (folded) recs.push_back(std::move(*folded));
    detail::emit_like(like, std::move(recs), r.emissions);
    return r;
  }

 private:
  KernelFn f_;
};

class JoinBehavior : public Behavior {
 public:
  std::string name() const override { return "join"; }
  FireResult fire(FireContext& ctx) const override {
    FireResult r;
    detail::emit_like(detail::first_token(ctx),
                      ops::join(detail::union_records(ctx.ports.at(0)), detail::union_records(ctx.ports.at(1))),
                      r.emissions);
    return r;
  }
};

/// Per-key left fold; the key table is the state token.
class MapWithStateBehavior : public Behavior {
 public:
  MapWithStateBehavior(KernelFn f, Value init) : f_(std::move(f)), init_(std::move(init)) {}
  std::string name() const override { return "map_with_state " + f_.display_name(); }
  static Value initial_state() { return Value::list({}); }

  FireResult fire(FireContext& ctx) const override {
    FireResult r;
    auto table = ops::StateTable::decode(ctx.state.value_or(initial_state()), init_);
    for (const auto& t : ctx.ports.at(0)) detail::emit_like(t, table.fold(t.records(), f_.state()), r.emissions);
    r.state = table.encode();
    return r;
  }

 private:
  KernelFn f_;
  Value init_;
};

class WindowBehavior : public Behavior {
 public:
  explicit WindowBehavior(WindowSpec spec) : spec_(spec) {}
  std::string name() const override {
    return "window(" + std::to_string(spec_.size) + "," + std::to_string(spec_.slide) + ")";
  }
  static Value initial_state() { return ops::WindowBuffer::initial(); }

  FireResult fire(FireContext& ctx) const override {
    FireResult r;
    auto buffer = ops::WindowBuffer::decode(ctx.state.value_or(initial_state()), spec_);
    for (const auto& t : ctx.ports.at(0)) detail::emit_like(t, buffer.push_all(t.records()), r.emissions);
    r.state = buffer.encode();
    return r;
  }

 private:
  WindowSpec spec_;
};

class BoltBehavior : public Behavior {
 public:
  explicit BoltBehavior(BoltKernel k) : k_(std::move(k)) {}
  std::string name() const override { return k_.display_name(); }

  FireResult fire(FireContext& ctx) const override {
    std::vector<BoltInput> in;
    for (std::size_t p = 0; p < ctx.ports.size(); ++p) {
      for (const auto& t : ctx.ports[p]) in.push_back({p, t.tuple()});
    }
    Value state = ctx.state.value_or(Value());
    Emitter out;
    k_.fn(in, out, state);
    FireResult r;
    for (auto& e : out.take()) r.emissions.push_back({e.output, Token::tuple(std::move(e.record))});
    if (ctx.state) r.state = std::move(state);
    return r;
  }

 private:
  BoltKernel k_;
};

/// Runs an iteration body to completion once per superstep, checking the
/// termination predicate between supersteps.
class DriverBehavior : public Behavior {
 public:
  DriverBehavior(std::shared_ptr<const ExecutionPlan> body, std::string body_in, std::string body_out,
                 Predicate terminate, std::size_t max_iterations)
      : body_(std::move(body)),
        body_in_(std::move(body_in)),
        body_out_(std::move(body_out)),
        terminate_(std::move(terminate)),
        max_iterations_(max_iterations) {}

  std::string name() const override { return "driver until " + terminate_.display_name(); }
  const ExecutionPlan& body() const { return *body_; }

  FireResult fire(FireContext& ctx) const override {
    FireResult r;
    const Token& like = detail::first_token(ctx);
    std::vector<Record> current = detail::union_records(ctx.ports.at(0));
    std::int64_t n = 0;
    while (static_cast<std::size_t>(n) < max_iterations_ && !terminate_(Multiset(current))) {
      if (ctx.mark_superstep) ctx.mark_superstep(true, n);
      Inputs in;
      in[body_in_] = current;
      current = ctx.run_subplan(*body_, in, n).at(body_out_).records();
      if (ctx.mark_superstep) ctx.mark_superstep(false, n);
      ++n;
    }
    r.supersteps = n;
    r.note = "iterations=" + std::to_string(n);
    detail::emit_like(like, std::move(current), r.emissions);
    return r;
  }

 private:
  std::shared_ptr<const ExecutionPlan> body_;
  std::string body_in_;
  std::string body_out_;
  Predicate terminate_;
  std::size_t max_iterations_;
};

/// Entry and exit of a tagged-token loop. Port 0 takes new collections,
/// port 1 takes body results coming back around the loop. Output port 0
/// feeds the body, output port 1 leaves the loop. State: pair(next tag,
/// loop instances in flight).
class LoopControllerBehavior : public Behavior {
 public:
  static constexpr std::size_t kToBody = 0;
  static constexpr std::size_t kExit = 1;

  LoopControllerBehavior(Predicate terminate, std::size_t max_iterations)
      : terminate_(std::move(terminate)), max_iterations_(max_iterations) {}

  std::string name() const override { return "loop until " + terminate_.display_name(); }
  static Value initial_state() { return Value::pair(Value(0), Value(0)); }

  FireResult fire(FireContext& ctx) const override {
    FireResult r;
    const Value s = ctx.state.value_or(initial_state());
    std::int64_t next_tag = s.first().as_int();
    std::int64_t in_flight = s.second().as_int();
    for (std::size_t port = 0; port < ctx.ports.size(); ++port) {
      for (const auto& t : ctx.ports[port]) {
        IterationTag tag;
        if (port == 0) {
          tag = IterationTag{static_cast<std::uint64_t>(next_tag++), 0};
          ++in_flight;
        } else {
          if (!t.tag()) fail(ErrorKind::kTypeError, "untagged token on a loop-back channel");
          tag = *t.tag();
          ++tag.iteration;
        }
        auto recs = t.records();
        const bool done = tag.iteration >= max_iterations_ || terminate_(Multiset(recs));
        if (done) {
          --in_flight;
          Token out(Multiset(std::move(recs)));
          r.emissions.push_back({kExit, std::move(out)});
          r.note = "tag=" + std::to_string(tag.tag) + " iterations=" + std::to_string(tag.iteration);
        } else {
          Token out(Multiset(std::move(recs)), tag);
          r.emissions.push_back({kToBody, std::move(out)});
        }
      }
    }
    r.state = Value::pair(Value(next_tag), Value(in_flight));
    return r;
  }

  bool may_close(const std::optional<Value>& state) const override {
    return !state || state->second().as_int() == 0;
  }

 private:
  Predicate terminate_;
  std::size_t max_iterations_;
};

}  // namespace flowdeck
