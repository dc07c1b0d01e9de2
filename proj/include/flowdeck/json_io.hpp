#pragma once

#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "flowdeck/corpus.hpp"
#include "flowdeck/harness.hpp"
#include "flowdeck/plan.hpp"
#include "flowdeck/runtime.hpp"
#include "flowdeck/semantic_graph.hpp"
#include "flowdeck/trace.hpp"

namespace flowdeck::json_io {

using Json = nlohmann::json;

/// Parses JSON text; syntax errors carry line and column.
inline Json parse(const std::string& text, const std::string& origin = "<input>") {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    std::size_t line = 1;
    std::size_t column = 1;
    const std::size_t end = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    for (std::size_t i = 0; i < end; ++i) {
      if (text[i] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    std::string what = e.what();
    if (const auto pos = what.find("syntax error"); pos != std::string::npos) what = what.substr(pos);
    fail(ErrorKind::kParseError, origin + ":" + std::to_string(line) + ":" + std::to_string(column) + ": " + what);
  }
}

inline Json parse_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kInvalidArgument, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path);
}

namespace detail {

[[noreturn]] inline void bad(const std::string& where, const std::string& msg) {
  fail(ErrorKind::kParseError, where + ": " + msg);
}

inline void only_keys(const Json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) bad(where, "expected an object");
  for (const auto& [k, _] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || k == a;
    if (!ok) bad(where, "unknown field '" + k + "'");
  }
}

inline std::string get_string(const Json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) bad(where, std::string("missing field '") + key + "'");
  if (!j.at(key).is_string()) bad(where + "." + key, "expected a string");
  return j.at(key).get<std::string>();
}

inline std::string opt_string(const Json& j, const char* key, const std::string& where, std::string fallback = {}) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_string()) bad(where + "." + key, "expected a string");
  return j.at(key).get<std::string>();
}

inline std::uint64_t opt_uint(const Json& j, const char* key, const std::string& where, std::uint64_t fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
    bad(where + "." + key, "expected a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

inline bool opt_bool(const Json& j, const char* key, const std::string& where, bool fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_boolean()) bad(where + "." + key, "expected a boolean");
  return j.at(key).get<bool>();
}

}  // namespace detail

// ---- values and records -------------------------------------------------

/// ints, floats and strings map directly; arrays are lists; {"pair": [a, b]}
/// is a pair.
inline Value value_from_json(const Json& j, const std::string& where = "value") {
  if (j.is_number_integer()) return Value(j.get<std::int64_t>());
  if (j.is_number_float()) return Value(j.get<double>());
  if (j.is_string()) return Value(j.get<std::string>());
  if (j.is_array()) {
    ValueList items;
    for (std::size_t i = 0; i < j.size(); ++i) items.push_back(value_from_json(j[i], where + "[" + std::to_string(i) + "]"));
    return Value::list(std::move(items));
  }
  if (j.is_object() && j.size() == 1 && j.contains("pair") && j.at("pair").is_array() && j.at("pair").size() == 2) {
    return Value::pair(value_from_json(j.at("pair")[0], where), value_from_json(j.at("pair")[1], where));
  }
  detail::bad(where, "unsupported value " + j.dump());
}

inline Json to_json(const Value& v) {
  switch (v.kind()) {
    case Value::Kind::kInt: return v.as_int();
    case Value::Kind::kFloat: return v.as_float();
    case Value::Kind::kText: return v.as_text();
    case Value::Kind::kPair: return Json{{"pair", Json::array({to_json(v.first()), to_json(v.second())})}};
    case Value::Kind::kList: {
      Json a = Json::array();
      for (const auto& x : v.as_list()) a.push_back(to_json(x));
      return a;
    }
  }
  return nullptr;
}

inline Json to_json(const Record& r) {
  Json j;
  j["key"] = r.key ? to_json(*r.key) : Json(nullptr);
  j["value"] = to_json(r.payload);
  return j;
}

inline Json to_json(const Token& t) {
  Json j;
  j["kind"] = std::string(to_string(t.kind()));
  if (t.seq()) j["seq"] = *t.seq();
  if (t.tag()) j["tag"] = {t.tag()->tag, t.tag()->iteration};
  Json recs = Json::array();
  if (t.is_data()) {
    for (const auto& r : t.records()) recs.push_back(to_json(r));
  }
  j["records"] = recs;
  return j;
}

/// Raw sink outputs: every token in arrival order.
inline Json to_json(const Outputs& outs) {
  Json j = Json::object();
  for (const auto& [sink, out] : outs) {
    Json toks = Json::array();
    for (const auto& t : out.tokens) toks.push_back(to_json(t));
    j[sink] = toks;
  }
  return j;
}

// ---- programs and topologies ----------------------------------------------

namespace detail {

inline ProgramMode program_mode_from(const std::string& s, const std::string& where) {
  if (s == "batch") return ProgramMode::kBatch;
  if (s == "microbatch" || s == "micro_batch") return ProgramMode::kMicroBatchStream;
  if (s == "tuple") return ProgramMode::kTupleStream;
  bad(where, "unknown mode '" + s + "'");
}

inline std::optional<Value> opt_value(const Json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) return std::nullopt;
  return value_from_json(j.at(key), where + "." + key);
}

inline LogicalProgram program_from_json(const Json& j, const std::string& where);

inline KernelFn kernel_of(const Json& op, const std::string& where) {
  const std::string name = get_string(op, "kernel", where);
  try {
    return kernels::lookup(name, opt_value(op, "arg", where));
  } catch (const Error& e) {
    bad(where + ".kernel", e.what());
  }
}

inline LogicalProgram program_from_json(const Json& j, const std::string& where) {
  only_keys(j, where, {"mode", "ops", "edges", "kind", "name", "description"});
  const ProgramMode mode = program_mode_from(opt_string(j, "mode", where, "batch"), where + ".mode");
  if (!j.contains("ops") || !j.at("ops").is_array()) bad(where, "missing array 'ops'");
  const Json& ops = j.at("ops");

  struct Pending {
    Json op;
    std::string id;
    std::vector<std::string> inputs;
    std::string where;
  };
  std::vector<Pending> pending;
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < ops.size(); ++i) {
    const std::string w = where + ".ops[" + std::to_string(i) + "]";
    const Json& op = ops[i];
    only_keys(op, w, {"id", "kind", "kernel", "arg", "inputs", "name", "window", "initial_state", "body", "terminate",
                      "max_iterations"});
    Pending p{op, get_string(op, "id", w), {}, w};
    if (index.count(p.id)) bad(w + ".id", "duplicate op id '" + p.id + "'");
    if (op.contains("inputs")) {
      if (!op.at("inputs").is_array()) bad(w + ".inputs", "expected an array of op ids");
      for (const auto& in : op.at("inputs")) {
        if (!in.is_string()) bad(w + ".inputs", "expected an array of op ids");
        p.inputs.push_back(in.get<std::string>());
      }
    }
    index[p.id] = pending.size();
    pending.push_back(std::move(p));
  }
  if (j.contains("edges")) {
    const Json& edges = j.at("edges");
    if (!edges.is_array()) bad(where + ".edges", "expected an array");
    for (std::size_t i = 0; i < edges.size(); ++i) {
      const std::string w = where + ".edges[" + std::to_string(i) + "]";
      std::string from;
      std::string to;
      if (edges[i].is_array() && edges[i].size() == 2 && edges[i][0].is_string() && edges[i][1].is_string()) {
        from = edges[i][0].get<std::string>();
        to = edges[i][1].get<std::string>();
      } else {
        only_keys(edges[i], w, {"from", "to"});
        from = get_string(edges[i], "from", w);
        to = get_string(edges[i], "to", w);
      }
      if (!index.count(to)) bad(w, "unknown op '" + to + "'");
      pending[index.at(to)].inputs.push_back(from);
    }
  }
  for (const auto& p : pending) {
    for (const auto& in : p.inputs) {
      if (!index.count(in)) bad(p.where + ".inputs", "unknown op '" + in + "'");
    }
  }

  LogicalProgram prog(mode);
  std::map<std::string, OpId> built;
  std::set<std::string> visiting;
  std::function<OpId(std::size_t)> build = [&](std::size_t i) -> OpId {
    const Pending& p = pending[i];
    if (auto it = built.find(p.id); it != built.end()) return it->second;
    if (!visiting.insert(p.id).second) bad(p.where, "cycle through op '" + p.id + "'");
    std::vector<OpId> in;
    for (const auto& name : p.inputs) in.push_back(build(index.at(name)));
    const Json& op = p.op;
    const std::string kind_name = get_string(op, "kind", p.where);
    const auto kind = op_kind_from_string(kind_name);
    if (!kind) bad(p.where + ".kind", "unknown op kind '" + kind_name + "'");
    const std::string label = opt_string(op, "name", p.where);
    auto arity = [&](std::size_t n) {
      if (in.size() != n) {
        bad(p.where, kind_name + " takes " + std::to_string(n) + " input(s), got " + std::to_string(in.size()));
      }
    };
    OpId id = 0;
    try {
      switch (*kind) {
        case OpKind::kSource:
          arity(0);
          id = prog.source(label.empty() ? p.id : label);
          break;
        case OpKind::kSink:
          arity(1);
          id = prog.sink(in[0], label.empty() ? p.id : label);
          break;
        case OpKind::kMap: arity(1); id = prog.map(in[0], kernel_of(op, p.where), label); break;
        case OpKind::kFlatMap: arity(1); id = prog.flat_map(in[0], kernel_of(op, p.where), label); break;
        case OpKind::kFilter: arity(1); id = prog.filter(in[0], kernel_of(op, p.where), label); break;
        case OpKind::kGroupByKey: arity(1); id = prog.group_by_key(in[0], label); break;
        case OpKind::kReduceByKey: arity(1); id = prog.reduce_by_key(in[0], kernel_of(op, p.where), label); break;
        case OpKind::kReduce: arity(1); id = prog.reduce(in[0], kernel_of(op, p.where), label); break;
        case OpKind::kJoin: arity(2); id = prog.join(in[0], in[1], label); break;
        case OpKind::kMapWithState: {
          arity(1);
          Value init = opt_value(op, "initial_state", p.where).value_or(Value(0));
          id = prog.map_with_state(in[0], kernel_of(op, p.where), std::move(init), label);
          break;
        }
        case OpKind::kWindow: {
          arity(1);
          if (!op.contains("window")) bad(p.where, "window op needs 'window': {size, slide}");
          const Json& w = op.at("window");
          only_keys(w, p.where + ".window", {"size", "slide"});
          WindowSpec spec;
          spec.size = opt_uint(w, "size", p.where + ".window", 1);
          spec.slide = opt_uint(w, "slide", p.where + ".window", 1);
          id = prog.window(in[0], spec, label);
          break;
        }
        case OpKind::kIterate: {
          arity(1);
          if (!op.contains("body")) bad(p.where, "iterate op needs a 'body' program");
          LogicalProgram body = program_from_json(op.at("body"), p.where + ".body");
          Predicate pred = kernels::predicate("never");
          if (op.contains("terminate")) {
            const Json& t = op.at("terminate");
            if (t.is_string()) {
              pred = kernels::predicate(t.get<std::string>());
            } else {
              only_keys(t, p.where + ".terminate", {"predicate", "arg"});
              pred = kernels::predicate(get_string(t, "predicate", p.where + ".terminate"),
                                        opt_value(t, "arg", p.where + ".terminate"));
            }
          }
          const std::size_t max_it = opt_uint(op, "max_iterations", p.where, 64);
          id = prog.iterate(in[0], std::move(body), std::move(pred), max_it, label);
          break;
        }
      }
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::kParseError) throw;
      bad(p.where, e.what());
    }
    visiting.erase(p.id);
    built[p.id] = id;
    return id;
  };
  for (std::size_t i = 0; i < pending.size(); ++i) build(i);
  try {
    prog.validate();
  } catch (const Error& e) {
    bad(where, e.what());
  }
  return prog;
}

inline ConsumePolicy consume_from(const std::string& s, const std::string& where) {
  if (s == "from_any") return ConsumePolicy::kFromAny;
  if (s == "from_all") return ConsumePolicy::kFromAll;
  bad(where, "unknown consume_policy '" + s + "'");
}

inline Topology topology_from_json(const Json& j, const std::string& where) {
  only_keys(j, where, {"kind", "name", "description", "spouts", "bolts", "edges"});
  Topology t;
  if (j.contains("spouts")) {
    if (!j.at("spouts").is_array()) bad(where + ".spouts", "expected an array");
    for (std::size_t i = 0; i < j.at("spouts").size(); ++i) {
      const Json& s = j.at("spouts")[i];
      const std::string w = where + ".spouts[" + std::to_string(i) + "]";
      if (s.is_string()) {
        t.add_spout(s.get<std::string>());
      } else {
        only_keys(s, w, {"name"});
        t.add_spout(get_string(s, "name", w));
      }
    }
  }
  if (j.contains("bolts")) {
    if (!j.at("bolts").is_array()) bad(where + ".bolts", "expected an array");
    for (std::size_t i = 0; i < j.at("bolts").size(); ++i) {
      const Json& b = j.at("bolts")[i];
      const std::string w = where + ".bolts[" + std::to_string(i) + "]";
      only_keys(b, w, {"name", "kernel", "consume_policy", "parallelism", "loop_exit", "initial_state"});
      const std::string kernel = get_string(b, "kernel", w);
      BoltOptions opts;
      opts.consume = consume_from(opt_string(b, "consume_policy", w, "from_any"), w + ".consume_policy");
      opts.parallelism = opt_uint(b, "parallelism", w, 1);
      opts.loop_exit = opt_bool(b, "loop_exit", w, false);
      opts.initial_state = opt_value(b, "initial_state", w);
      if (!opts.initial_state) opts.initial_state = bolts::default_state(kernel);
      try {
        t.add_bolt(get_string(b, "name", w), bolts::lookup(kernel), opts);
      } catch (const Error& e) {
        bad(w, e.what());
      }
    }
  }
  if (j.contains("edges")) {
    if (!j.at("edges").is_array()) bad(where + ".edges", "expected an array");
    for (std::size_t i = 0; i < j.at("edges").size(); ++i) {
      const Json& e = j.at("edges")[i];
      const std::string w = where + ".edges[" + std::to_string(i) + "]";
      only_keys(e, w, {"from", "to", "routing"});
      const std::string routing = opt_string(e, "routing", w, "round_robin");
      if (routing != "round_robin" && routing != "hash") bad(w + ".routing", "unknown routing '" + routing + "'");
      try {
        t.connect(std::string_view(get_string(e, "from", w)), std::string_view(get_string(e, "to", w)),
                  routing == "hash" ? Routing::kHash : Routing::kRoundRobin);
      } catch (const Error& ex) {
        if (ex.kind() == ErrorKind::kParseError) throw;
        bad(w, ex.what());
      }
    }
  }
  const auto diags = t.validate();
  if (!diags.empty()) bad(where, diags.front());
  return t;
}

}  // namespace detail

/// A program document: `"kind": "topology"` selects the spout/bolt form,
/// anything else is an op list.
inline ProgramSource program_from_json(const Json& j) {
  if (j.is_object() && j.value("kind", std::string()) == "topology") return detail::topology_from_json(j, "program");
  return detail::program_from_json(j, "program");
}

inline ProgramSource load_program(const std::string& path) { return program_from_json(parse_file(path)); }

// ---- graph dumps ----------------------------------------------------------

inline Json to_json(const SemanticGraph& g) {
  Json ops = Json::array();
  for (const auto& a : g.actors()) {
    Json op;
    op["id"] = a.label;
    op["kind"] = std::string(to_string(a.kind));
    const std::string kernel = a.kernel_name();
    if (!kernel.empty()) op["kernel"] = kernel;
    Json inputs = Json::array();
    for (std::size_t e : g.inputs_of(a.id)) inputs.push_back(g.actors()[g.edges()[e].from].label);
    op["inputs"] = inputs;
    op["granularity"] = std::string(to_string(a.granularity));
    op["consume_policy"] = std::string(to_string(a.consume));
    op["output_policy"] = std::string(to_string(a.output_policy));
    op["stateful"] = a.stateful;
    if (!a.fused_from.empty()) op["fused_from"] = a.fused_from;
    if (a.body) op["body"] = to_json(*a.body);
    ops.push_back(op);
  }
  Json edges = Json::array();
  for (const auto& e : g.edges()) {
    edges.push_back({{"from", g.actors()[e.from].label},
                     {"to", g.actors()[e.to].label},
                     {"port", e.port},
                     {"hash", e.hash},
                     {"loop", e.loop}});
  }
  return Json{{"ops", ops}, {"edges", edges}};
}

// ---- run configuration ------------------------------------------------------

/// What `run` needs beyond the program: plan shape plus runtime settings.
struct RunSettings {
  ExecMode mode = ExecMode::kPipelined;
  std::size_t parallelism = 1;
  bool fuse = false;
  RunConfig run;
};

inline ExecMode exec_mode_from(const std::string& s, const std::string& where) {
  auto m = exec_mode_from_string(s);
  if (!m) detail::bad(where, "unknown mode '" + s + "'");
  return *m;
}

inline Dispatch dispatch_from(const std::string& s, const std::string& where) {
  auto d = dispatch_from_string(s);
  if (!d) detail::bad(where, "unknown dispatch '" + s + "'");
  return *d;
}

inline RuntimeKind runtime_from(const std::string& s, const std::string& where) {
  auto r = runtime_kind_from_string(s);
  if (!r) detail::bad(where, "unknown runtime '" + s + "'");
  return *r;
}

inline RunSettings run_settings_from_json(const Json& j, RunSettings base = {}) {
  const std::string w = "runconfig";
  detail::only_keys(j, w, {"mode", "workers", "dispatch", "seed", "channel_capacity", "watchdog_ms", "runtime",
                           "jitter_us", "parallelism", "fuse"});
  RunSettings s = base;
  if (j.contains("mode")) s.mode = exec_mode_from(detail::get_string(j, "mode", w), w + ".mode");
  s.run.workers = detail::opt_uint(j, "workers", w, s.run.workers);
  if (s.run.workers == 0) detail::bad(w + ".workers", "must be positive");
  if (j.contains("dispatch")) s.run.dispatch = dispatch_from(detail::get_string(j, "dispatch", w), w + ".dispatch");
  s.run.seed = detail::opt_uint(j, "seed", w, s.run.seed);
  s.run.channel_capacity = detail::opt_uint(j, "channel_capacity", w, s.run.channel_capacity);
  s.run.watchdog_ms = detail::opt_uint(j, "watchdog_ms", w, s.run.watchdog_ms);
  if (j.contains("runtime")) s.run.runtime = runtime_from(detail::get_string(j, "runtime", w), w + ".runtime");
  s.run.jitter_us = detail::opt_uint(j, "jitter_us", w, s.run.jitter_us);
  s.parallelism = detail::opt_uint(j, "parallelism", w, s.parallelism);
  if (s.parallelism == 0) detail::bad(w + ".parallelism", "must be positive");
  s.fuse = detail::opt_bool(j, "fuse", w, s.fuse);
  return s;
}

inline Json to_json(const RunSettings& s) {
  return Json{{"mode", std::string(to_string(s.mode))},
              {"workers", s.run.workers},
              {"dispatch", std::string(to_string(s.run.dispatch))},
              {"seed", s.run.seed},
              {"channel_capacity", s.run.channel_capacity},
              {"watchdog_ms", s.run.watchdog_ms},
              {"runtime", std::string(to_string(s.run.runtime))},
              {"jitter_us", s.run.jitter_us},
              {"parallelism", s.parallelism},
              {"fuse", s.fuse}};
}

// ---- sweep matrix and verdict -------------------------------------------------

inline RunMatrix run_matrix_from_json(const Json& j) {
  const std::string w = "matrix";
  detail::only_keys(j, w, {"program", "dataset", "workers", "dispatch", "modes", "seeds", "repetitions",
                           "parallelism", "runtime", "jitter_us", "channel_capacity", "fuse", "concurrent_cells"});
  RunMatrix m;
  m.program = detail::get_string(j, "program", w);
  m.dataset = detail::opt_string(j, "dataset", w, m.dataset);
  auto array_of = [&](const char* key) -> const Json* {
    if (!j.contains(key)) return nullptr;
    if (!j.at(key).is_array() || j.at(key).empty()) detail::bad(w + "." + key, "expected a non-empty array");
    return &j.at(key);
  };
  auto uint_of = [&](const Json& v, const std::string& where) -> std::uint64_t {
    if (!v.is_number_integer() || v.get<std::int64_t>() < 0) detail::bad(where, "expected a non-negative integer");
    return v.get<std::uint64_t>();
  };
  if (const Json* a = array_of("workers")) {
    m.workers.clear();
    for (const auto& v : *a) m.workers.push_back(uint_of(v, w + ".workers"));
  }
  if (const Json* a = array_of("dispatch")) {
    m.dispatch.clear();
    for (const auto& v : *a) {
      if (!v.is_string()) detail::bad(w + ".dispatch", "expected strings");
      m.dispatch.push_back(dispatch_from(v.get<std::string>(), w + ".dispatch"));
    }
  }
  if (const Json* a = array_of("modes")) {
    m.modes.clear();
    for (const auto& v : *a) {
      if (!v.is_string()) detail::bad(w + ".modes", "expected strings");
      m.modes.push_back(exec_mode_from(v.get<std::string>(), w + ".modes"));
    }
  }
  if (const Json* a = array_of("seeds")) {
    m.seeds.clear();
    for (const auto& v : *a) m.seeds.push_back(uint_of(v, w + ".seeds"));
  }
  m.repetitions = detail::opt_uint(j, "repetitions", w, m.repetitions);
  m.parallelism = detail::opt_uint(j, "parallelism", w, m.parallelism);
  if (j.contains("runtime")) m.runtime = runtime_from(detail::get_string(j, "runtime", w), w + ".runtime");
  m.jitter_us = detail::opt_uint(j, "jitter_us", w, m.jitter_us);
  m.channel_capacity = detail::opt_uint(j, "channel_capacity", w, m.channel_capacity);
  m.fuse = detail::opt_bool(j, "fuse", w, m.fuse);
  m.concurrent_cells = detail::opt_bool(j, "concurrent_cells", w, m.concurrent_cells);
  const auto errs = m.check();
  if (!errs.empty()) detail::bad(w, errs.front());
  return m;
}

inline Json to_json(const CellConfig& c) {
  return Json{{"run_id", c.run_id},
              {"mode", std::string(to_string(c.mode))},
              {"workers", c.workers},
              {"dispatch", std::string(to_string(c.dispatch))},
              {"seed", c.seed},
              {"repetition", c.repetition},
              {"parallelism", c.parallelism},
              {"runtime", std::string(to_string(c.runtime))},
              {"jitter_us", c.jitter_us},
              {"channel_capacity", c.channel_capacity},
              {"fuse", c.fuse}};
}

inline Json to_json(const Verdict& v) {
  Json witnesses = Json::array();
  for (const auto& w : v.witnesses) {
    witnesses.push_back({{"claim", w.claim}, {"sink", w.sink}, {"first", to_json(w.first)}, {"second", to_json(w.second)}});
  }
  Json violations = Json::array();
  for (const auto& [cfg, viol] : v.violations) {
    violations.push_back({{"run", to_json(cfg)}, {"invariant", viol.invariant}, {"message", viol.message}});
  }
  Json aborts = Json::array();
  for (const auto& [cfg, err] : v.aborts) aborts.push_back({{"run", to_json(cfg)}, {"error", err}});
  Json j{{"program", v.program},
         {"cells", v.cells},
         {"from_any", v.from_any},
         {"deterministic_bag", v.deterministic_bag},
         {"deterministic_order", v.deterministic_order},
         {"witnesses", witnesses},
         {"violations", violations},
         {"aborts", aborts},
         {"ok", v.ok()}};
  if (v.order_dependent) j["order_dependent"] = "informational";
  return j;
}

// ---- traces -------------------------------------------------------------------

inline Json to_json(const TraceEvent& e) {
  auto opt = [](const auto& o) -> Json { return o ? Json(*o) : Json(nullptr); };
  Json j{{"seq", e.seq},
         {"wall_ns", e.wall_ns},
         {"kind", std::string(to_string(e.kind))},
         {"actor", e.actor},
         {"channel", e.channel.empty() ? Json(nullptr) : Json(e.channel)},
         {"worker", opt(e.worker)},
         {"stage", opt(e.stage)},
         {"superstep", opt(e.superstep)},
         {"tag", opt(e.tag)}};
  if (e.task) j["task"] = *e.task;
  if (e.token) j["token"] = *e.token;
  if (e.round) j["round"] = *e.round;
  if (!e.detail.empty()) j["detail"] = e.detail;
  return j;
}

inline void write_trace_jsonl(std::ostream& os, const Trace& t) {
  for (const auto& e : t) os << to_json(e).dump() << '\n';
}

/// Checks one JSONL trace line; returns an error message or nullopt.
inline std::optional<std::string> check_trace_event(const Json& j) {
  if (!j.is_object()) return "event is not an object";
  static const char* kRequired[] = {"seq", "wall_ns", "kind", "actor", "channel", "worker", "stage", "superstep", "tag"};
  for (const char* k : kRequired) {
    if (!j.contains(k)) return std::string("missing field '") + k + "'";
  }
  if (!j.at("seq").is_number_unsigned() && !j.at("seq").is_number_integer()) return "seq must be an integer";
  if (!j.at("wall_ns").is_number_integer()) return "wall_ns must be an integer";
  if (!j.at("kind").is_string() || !trace_kind_from_string(j.at("kind").get<std::string>())) return "unknown kind";
  if (!j.at("actor").is_string()) return "actor must be a string";
  if (!j.at("channel").is_null() && !j.at("channel").is_string()) return "channel must be a string or null";
  for (const char* k : {"worker", "stage", "superstep", "tag"}) {
    if (!j.at(k).is_null() && !j.at(k).is_number_integer()) return std::string(k) + " must be an integer or null";
  }
  return std::nullopt;
}

/// Validates a whole JSONL trace: schema per line plus strictly increasing
/// seq. Returns "line N: message" errors.
inline std::vector<std::string> validate_trace_jsonl(std::istream& in) {
  std::vector<std::string> errs;
  std::string line;
  std::size_t n = 0;
  std::optional<std::uint64_t> prev;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      errs.push_back("line " + std::to_string(n) + ": not JSON");
      continue;
    }
    if (auto err = check_trace_event(j)) {
      errs.push_back("line " + std::to_string(n) + ": " + *err);
      continue;
    }
    const auto seq = j.at("seq").get<std::uint64_t>();
    if (prev && seq <= *prev) errs.push_back("line " + std::to_string(n) + ": seq not increasing");
    prev = seq;
  }
  return errs;
}

inline TraceEvent trace_event_from_json(const Json& j) {
  if (auto err = check_trace_event(j)) fail(ErrorKind::kParseError, "trace event: " + *err);
  TraceEvent e;
  e.seq = j.at("seq").get<std::uint64_t>();
  e.wall_ns = j.at("wall_ns").get<std::int64_t>();
  e.kind = *trace_kind_from_string(j.at("kind").get<std::string>());
  e.actor = j.at("actor").get<std::string>();
  if (j.at("channel").is_string()) e.channel = j.at("channel").get<std::string>();
  auto opt_i = [&](const char* k, std::optional<std::int64_t>& out) {
    if (j.contains(k) && !j.at(k).is_null()) out = j.at(k).get<std::int64_t>();
  };
  auto opt_u = [&](const char* k, std::optional<std::uint64_t>& out) {
    if (j.contains(k) && !j.at(k).is_null()) out = j.at(k).get<std::uint64_t>();
  };
  opt_i("worker", e.worker);
  opt_i("stage", e.stage);
  opt_i("superstep", e.superstep);
  opt_i("tag", e.tag);
  opt_u("task", e.task);
  opt_u("token", e.token);
  opt_u("round", e.round);
  if (j.contains("detail")) e.detail = j.at("detail").get<std::string>();
  return e;
}

inline Trace read_trace_jsonl(std::istream& in) {
  Trace t;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) t.push_back(trace_event_from_json(parse(line, "trace")));
  }
  return t;
}

}  // namespace flowdeck::json_io
