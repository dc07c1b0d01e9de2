#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "flowdeck/data.hpp"
#include "flowdeck/kernels.hpp"

namespace flowdeck {

enum class OpKind {
  kSource,
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
  kSink,
};

inline std::string_view to_string(OpKind k) {
  switch (k) {
    case OpKind::kSource: return "source";
    case OpKind::kMap: return "map";
    case OpKind::kFlatMap: return "flat_map";
    case OpKind::kFilter: return "filter";
    case OpKind::kGroupByKey: return "group_by_key";
    case OpKind::kReduceByKey: return "reduce_by_key";
    case OpKind::kReduce: return "reduce";
    case OpKind::kJoin: return "join";
    case OpKind::kMapWithState: return "map_with_state";
    case OpKind::kWindow: return "window";
    case OpKind::kIterate: return "iterate";
    case OpKind::kSink: return "sink";
  }
  return "?";
}

inline std::optional<OpKind> op_kind_from_string(std::string_view s) {
  for (int i = 0; i <= static_cast<int>(OpKind::kSink); ++i) {
    if (to_string(static_cast<OpKind>(i)) == s) return static_cast<OpKind>(i);
  }
  return std::nullopt;
}

/// Whether the op reorders data by key (and so ends a stage when parallel).
inline bool is_shuffle(OpKind k) {
  return k == OpKind::kGroupByKey || k == OpKind::kReduceByKey || k == OpKind::kJoin;
}

inline bool is_elementwise(OpKind k) {
  return k == OpKind::kMap || k == OpKind::kFlatMap || k == OpKind::kFilter;
}

enum class ProgramMode { kBatch, kMicroBatchStream, kTupleStream };

inline std::string_view to_string(ProgramMode m) {
  switch (m) {
    case ProgramMode::kBatch: return "batch";
    case ProgramMode::kMicroBatchStream: return "microbatch";
    case ProgramMode::kTupleStream: return "tuple";
  }
  return "?";
}

using OpId = std::size_t;

class LogicalProgram;

struct IterateParams {
  std::shared_ptr<const LogicalProgram> body;
  Predicate terminate;
  std::size_t max_iterations = 1;
};

struct LogicalOp {
  OpId id = 0;
  OpKind kind = OpKind::kSource;
  // Source/sink name, or a user label for other ops.
  std::string name;
  std::optional<KernelFn> kernel;
  std::vector<OpId> inputs;
  std::optional<WindowSpec> window;
  std::optional<Value> initial_state;
  std::optional<IterateParams> iterate;

  /// Stable label used as the op's origin name in every lower layer.
  std::string label() const {
    if (!name.empty()) return name;
    return std::string(to_string(kind)) + "#" + std::to_string(id);
  }
};

/// A logical description of a computation: a DAG of operators plus named
/// sources and sinks. Building a program does not run anything.
class LogicalProgram {
 public:
  explicit LogicalProgram(ProgramMode mode = ProgramMode::kBatch) : mode_(mode) {}

  ProgramMode mode() const { return mode_; }
  const std::vector<LogicalOp>& ops() const { return ops_; }
  const LogicalOp& op(OpId id) const {
    check_upstream(id);
    return ops_[id];
  }

  OpId source(std::string name) {
    if (name.empty()) fail(ErrorKind::kInvalidArgument, "source needs a name");
    for (const auto& o : ops_) {
      if (o.kind == OpKind::kSource && o.name == name) {
        fail(ErrorKind::kInvalidArgument, "duplicate source '" + name + "'");
      }
    }
    LogicalOp o;
    o.kind = OpKind::kSource;
    o.name = std::move(name);
    return push(std::move(o));
  }

  OpId sink(OpId upstream, std::string name) {
    if (name.empty()) fail(ErrorKind::kInvalidArgument, "sink needs a name");
    for (const auto& o : ops_) {
      if (o.kind == OpKind::kSink && o.name == name) {
        fail(ErrorKind::kInvalidArgument, "duplicate sink '" + name + "'");
      }
    }
    return unary(OpKind::kSink, upstream, std::nullopt, std::move(name));
  }

  OpId map(OpId upstream, KernelFn f, std::string label = {}) {
    f.map();
    return unary(OpKind::kMap, upstream, std::move(f), std::move(label));
  }

  OpId flat_map(OpId upstream, KernelFn f, std::string label = {}) {
    f.flat_map();
    return unary(OpKind::kFlatMap, upstream, std::move(f), std::move(label));
  }

  OpId filter(OpId upstream, KernelFn f, std::string label = {}) {
    f.filter();
    return unary(OpKind::kFilter, upstream, std::move(f), std::move(label));
  }

  OpId group_by_key(OpId upstream, std::string label = {}) {
    require_not_tuple(OpKind::kGroupByKey);
    return unary(OpKind::kGroupByKey, upstream, std::nullopt, std::move(label));
  }

  OpId reduce_by_key(OpId upstream, KernelFn f, std::string label = {}) {
    f.reduce();
    require_not_tuple(OpKind::kReduceByKey);
    return unary(OpKind::kReduceByKey, upstream, std::move(f), std::move(label));
  }

  OpId reduce(OpId upstream, KernelFn f, std::string label = {}) {
    f.reduce();
    require_not_tuple(OpKind::kReduce);
    return unary(OpKind::kReduce, upstream, std::move(f), std::move(label));
  }

  OpId join(OpId left, OpId right, std::string label = {}) {
    if (mode_ != ProgramMode::kBatch) {
      fail(ErrorKind::kUnsupportedInStream, "join is defined on collections only");
    }
    check_upstream(left);
    check_upstream(right);
    LogicalOp o;
    o.kind = OpKind::kJoin;
    o.name = std::move(label);
    o.inputs = {left, right};
    return push(std::move(o));
  }

  OpId map_with_state(OpId upstream, KernelFn f, Value init, std::string label = {}) {
    f.state();
    if (mode_ == ProgramMode::kBatch) {
      fail(ErrorKind::kInvalidMode, "map_with_state needs a stream-mode program");
    }
    LogicalOp o;
    o.kind = OpKind::kMapWithState;
    o.name = std::move(label);
    o.kernel = std::move(f);
    o.initial_state = std::move(init);
    o.inputs = {checked(upstream)};
    return push(std::move(o));
  }

  OpId window(OpId upstream, WindowSpec spec, std::string label = {}) {
    spec.validate();
    if (mode_ == ProgramMode::kBatch) fail(ErrorKind::kInvalidMode, "window needs a stream-mode program");
    LogicalOp o;
    o.kind = OpKind::kWindow;
    o.name = std::move(label);
    o.window = spec;
    o.inputs = {checked(upstream)};
    return push(std::move(o));
  }

  OpId iterate(OpId upstream, LogicalProgram body, Predicate terminate, std::size_t max_iterations,
               std::string label = {}) {
    if (max_iterations == 0) fail(ErrorKind::kInvalidArgument, "max_iterations must be positive");
    if (mode_ != ProgramMode::kBatch) fail(ErrorKind::kInvalidMode, "iterate needs a batch program");
    if (body.mode() != ProgramMode::kBatch) fail(ErrorKind::kInvalidMode, "iteration body must be a batch program");
    if (body.sources().size() != 1 || body.sinks().size() != 1) {
      fail(ErrorKind::kInvalidArgument, "iteration body must have exactly one source and one sink");
    }
    body.validate();
    LogicalOp o;
    o.kind = OpKind::kIterate;
    o.name = std::move(label);
    o.inputs = {checked(upstream)};
    o.iterate = IterateParams{std::make_shared<const LogicalProgram>(std::move(body)), std::move(terminate),
                              max_iterations};
    return push(std::move(o));
  }

  std::vector<OpId> sources() const { return ids_of(OpKind::kSource); }
  std::vector<OpId> sinks() const { return ids_of(OpKind::kSink); }

  std::vector<OpId> successors(OpId id) const {
    std::vector<OpId> out;
    for (const auto& o : ops_) {
      for (OpId in : o.inputs) {
        if (in == id) out.push_back(o.id);
      }
    }
    return out;
  }

  /// Checks the structural invariants: predecessors exist, join is binary,
  /// every non-sink feeds something, labels are unique, and at least one
  /// sink exists.
  void validate() const {
    if (sinks().empty()) fail(ErrorKind::kInvalidArgument, "program has no sink");
    std::set<std::string> labels;
    for (const auto& o : ops_) {
      if (!labels.insert(o.label()).second) {
        fail(ErrorKind::kInvalidArgument, "duplicate op label '" + o.label() + "'");
      }
      if (o.kind != OpKind::kSource && o.inputs.empty()) {
        fail(ErrorKind::kInvalidArgument, "op '" + o.label() + "' has no predecessor");
      }
      if (o.kind == OpKind::kJoin && o.inputs.size() != 2) {
        fail(ErrorKind::kInvalidArgument, "join '" + o.label() + "' needs exactly two inputs");
      }
      if (o.kind != OpKind::kSink && successors(o.id).empty()) {
        fail(ErrorKind::kInvalidArgument, "op '" + o.label() + "' output is never consumed");
      }
    }
  }

 private:
  friend LogicalProgram lift_to_stream(const LogicalProgram& prog);

  OpId push(LogicalOp o) {
    o.id = ops_.size();
    ops_.push_back(std::move(o));
    return ops_.back().id;
  }

  void check_upstream(OpId id) const {
    if (id >= ops_.size()) fail(ErrorKind::kInvalidArgument, "unknown upstream op " + std::to_string(id));
  }

  OpId checked(OpId id) const {
    check_upstream(id);
    if (ops_[id].kind == OpKind::kSink) fail(ErrorKind::kInvalidArgument, "a sink cannot feed other ops");
    return id;
  }

  void require_not_tuple(OpKind k) const {
    if (mode_ == ProgramMode::kTupleStream) {
      fail(ErrorKind::kUnsupportedInStream,
           std::string(to_string(k)) + " needs collections or micro-batches, not single tuples");
    }
  }

  OpId unary(OpKind kind, OpId upstream, std::optional<KernelFn> f, std::string label) {
    LogicalOp o;
    o.kind = kind;
    o.name = std::move(label);
    o.kernel = std::move(f);
    o.inputs = {checked(upstream)};
    return push(std::move(o));
  }

  std::vector<OpId> ids_of(OpKind k) const {
    std::vector<OpId> out;
    for (const auto& o : ops_) {
      if (o.kind == k) out.push_back(o.id);
    }
    return out;
  }

  ProgramMode mode_;
  std::vector<LogicalOp> ops_;
};

/// Re-targets a batch program at micro-batched streams: every operator is
/// forwarded to each chunk independently.
inline LogicalProgram lift_to_stream(const LogicalProgram& prog) {
  if (prog.mode() != ProgramMode::kBatch) fail(ErrorKind::kInvalidMode, "lift_to_stream expects a batch program");
  for (const auto& o : prog.ops()) {
    if (o.kind == OpKind::kJoin || o.kind == OpKind::kIterate) {
      fail(ErrorKind::kUnsupportedInStream,
           "cannot lift '" + o.label() + "': " + std::string(to_string(o.kind)) + " has no stream semantics");
    }
  }
  LogicalProgram lifted(ProgramMode::kMicroBatchStream);
  lifted.ops_ = prog.ops_;
  return lifted;
}

}  // namespace flowdeck
