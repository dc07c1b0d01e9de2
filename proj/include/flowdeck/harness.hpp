#pragma once

#include <cstdint>
#include <future>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "flowdeck/corpus.hpp"
#include "flowdeck/plan.hpp"
#include "flowdeck/runtime.hpp"

namespace flowdeck {

struct RunMatrix {
  std::string program;
  // "generated:<seed>" or comma-separated input paths.
  std::string dataset = "generated:0";
  std::vector<std::size_t> workers = {1, 2, 4};
  std::vector<Dispatch> dispatch = {Dispatch::kRoundRobin, Dispatch::kOnDemand};
  std::vector<ExecMode> modes = {ExecMode::kBsp, ExecMode::kPipelined};
  std::vector<std::uint64_t> seeds = {1, 2};
  std::size_t repetitions = 1;
  // Replicas per actor, the same in every cell so plans are comparable.
  std::size_t parallelism = 4;
  RuntimeKind runtime = RuntimeKind::kScheduled;
  std::uint64_t jitter_us = 0;
  std::size_t channel_capacity = 0;
  bool fuse = false;
  bool concurrent_cells = false;

  std::size_t cells() const { return workers.size() * dispatch.size() * modes.size() * seeds.size() * repetitions; }

  std::vector<std::string> check() const {
    std::vector<std::string> errs;
    if (program.empty()) errs.push_back("program is empty");
    if (workers.empty() || dispatch.empty() || modes.empty() || seeds.empty()) errs.push_back("an axis is empty");
    for (auto w : workers) {
      if (w == 0) errs.push_back("worker counts must be positive");
    }
    if (repetitions == 0) errs.push_back("repetitions must be positive");
    if (parallelism == 0) errs.push_back("parallelism must be positive");
    return errs;
  }
};

/// Everything needed to re-execute one cell.
struct CellConfig {
  std::size_t run_id = 0;
  ExecMode mode = ExecMode::kBsp;
  std::size_t workers = 1;
  Dispatch dispatch = Dispatch::kRoundRobin;
  std::uint64_t seed = 0;
  std::size_t repetition = 0;
  std::size_t parallelism = 1;
  RuntimeKind runtime = RuntimeKind::kScheduled;
  std::uint64_t jitter_us = 0;
  std::size_t channel_capacity = 0;
  bool fuse = false;

  RunConfig run_config() const {
    RunConfig c;
    c.workers = workers;
    c.dispatch = dispatch;
    c.seed = seed;
    c.runtime = runtime;
    c.jitter_us = jitter_us;
    c.channel_capacity = channel_capacity;
    return c;
  }

  std::string describe() const {
    std::ostringstream os;
    os << "run " << run_id << " (" << to_string(mode) << ", " << workers << " workers, " << to_string(dispatch)
       << ", seed " << seed << ", rep " << repetition << ")";
    return os.str();
  }
};

struct CellResult {
  CellConfig config;
  bool aborted = false;
  std::string error;
  Outputs outputs;
  // Per-sink token sequence encodings.
  std::map<std::string, std::string> sequences;
  std::vector<Violation> violations;
  RunStats stats;
};

struct Witness {
  // "bag" or "order".
  std::string claim;
  std::string sink;
  CellConfig first;
  CellConfig second;
};

struct Verdict {
  std::string program;
  std::size_t cells = 0;
  bool from_any = false;
  bool order_dependent = false;
  bool deterministic_bag = true;
  bool deterministic_order = true;
  std::vector<Witness> witnesses;
  std::vector<std::pair<CellConfig, Violation>> violations;
  std::vector<std::pair<CellConfig, std::string>> aborts;

  bool ok() const { return violations.empty() && aborts.empty(); }
  int exit_code() const { return ok() ? 0 : 1; }
};

/// A program with its inputs, ready to sweep.
struct SweepSubject {
  std::string name;
  ProgramSource program;
  Inputs inputs;
  bool order_insensitive = true;
  bool order_dependent = false;
};

namespace harness {

inline ExecutionPlan plan_for(const ProgramSource& program, ExecMode mode, std::size_t parallelism, bool fused) {
  SemanticGraph g = semantic_graph_of(program);
  if (fused) g = fuse(g);
  ExpandOptions opts;
  opts.default_parallelism = parallelism;
  return expand(g, opts, mode);
}

inline std::vector<Violation> trace_violations(const Trace& t, ExecMode mode) {
  auto out = trace_checks::basic(t);
  if (mode == ExecMode::kBsp) {
    for (auto& v : trace_checks::bsp_barrier(t)) out.push_back(std::move(v));
  }
  return out;
}

inline CellResult run_cell(const ExecutionPlan& plan, const Inputs& inputs, const CellConfig& cfg) {
  CellResult r;
  r.config = cfg;
  try {
    auto res = run(plan, inputs, cfg.run_config());
    r.outputs = std::move(res.outputs);
    r.stats = res.stats;
    r.violations = trace_violations(res.trace, cfg.mode);
    for (const auto& [sink, out] : r.outputs) r.sequences[sink] = encode_tokens(out.tokens);
  } catch (const std::exception& e) {
    r.aborted = true;
    r.error = e.what();
  }
  return r;
}

inline std::vector<CellConfig> cells_of(const RunMatrix& m) {
  std::vector<CellConfig> out;
  for (ExecMode mode : m.modes) {
    for (std::size_t w : m.workers) {
      for (Dispatch d : m.dispatch) {
        for (std::uint64_t seed : m.seeds) {
          for (std::size_t rep = 0; rep < m.repetitions; ++rep) {
            CellConfig c;
            c.run_id = out.size();
            c.mode = mode;
            c.workers = w;
            c.dispatch = d;
            c.seed = seed;
            c.repetition = rep;
            c.parallelism = m.parallelism;
            c.runtime = m.runtime;
            c.jitter_us = m.jitter_us;
            c.channel_capacity = m.channel_capacity;
            c.fuse = m.fuse;
            out.push_back(c);
          }
        }
      }
    }
  }
  return out;
}

/// Resolves a built-in program name and dataset id.
inline SweepSubject subject_for(const std::string& program, const std::string& dataset) {
  auto entry = corpus::find(program);
  if (!entry) fail(ErrorKind::kInvalidArgument, "unknown program '" + program + "'");
  SweepSubject s;
  s.name = entry->name;
  s.program = entry->program;
  s.order_insensitive = entry->order_insensitive;
  s.order_dependent = entry->order_dependent;
  const std::string prefix = "generated:";
  if (dataset.rfind(prefix, 0) == 0) {
    std::uint64_t seed = 0;
    try {
      seed = std::stoull(dataset.substr(prefix.size()));
    } catch (const std::exception&) {
      fail(ErrorKind::kInvalidArgument, "bad dataset id '" + dataset + "'");
    }
    s.inputs = entry->generate(seed);
  } else {
    std::vector<std::string> paths;
    std::stringstream ss(dataset);
    for (std::string p; std::getline(ss, p, ',');) {
      if (!p.empty()) paths.push_back(p);
    }
    s.inputs = corpus::load_inputs(s.program, paths);
  }
  return s;
}

/// Re-executes one cell of a sweep.
inline CellResult replay(const SweepSubject& subject, const CellConfig& cfg) {
  const auto plan = plan_for(subject.program, cfg.mode, cfg.parallelism, cfg.fuse);
  return run_cell(plan, subject.inputs, cfg);
}

/// Runs every cell, checks trace invariants per run and compares sink
/// outputs pairwise against the first successful cell: bags over the union
/// of sinks, sequences per sink. Bag agreement with the sequential
/// reference is checked too.
inline Verdict sweep(const SweepSubject& subject, const RunMatrix& matrix) {
  const auto errs = matrix.check();
  if (!errs.empty()) fail(ErrorKind::kInvalidArgument, "bad run matrix: " + errs.front());
  Verdict v;
  v.program = subject.name;
  v.order_dependent = subject.order_dependent;
  std::map<ExecMode, ExecutionPlan> plans;
  for (ExecMode mode : matrix.modes) {
    plans.emplace(mode, plan_for(subject.program, mode, matrix.parallelism, matrix.fuse));
    v.from_any = v.from_any || plans.at(mode).has_from_any();
  }
  const auto cells = cells_of(matrix);
  v.cells = cells.size();
  std::vector<CellResult> results(cells.size());
  if (matrix.concurrent_cells) {
    std::vector<std::future<CellResult>> futures;
    for (const auto& c : cells) {
      futures.push_back(std::async(std::launch::async, [&, c] { return run_cell(plans.at(c.mode), subject.inputs, c); }));
    }
    for (std::size_t i = 0; i < cells.size(); ++i) results[i] = futures[i].get();
  } else {
    for (std::size_t i = 0; i < cells.size(); ++i) results[i] = run_cell(plans.at(cells[i].mode), subject.inputs, cells[i]);
  }

  std::optional<Outputs> expected;
  try {
    expected = reference_outputs(subject.program, subject.inputs);
  } catch (const Error&) {
    // The reference rejects what the engine rejects; aborts are recorded per cell.
  }

  const CellResult* base = nullptr;
  for (const auto& r : results) {
    if (r.aborted) {
      v.aborts.emplace_back(r.config, r.error);
      continue;
    }
    for (const auto& viol : r.violations) v.violations.emplace_back(r.config, viol);
    if (expected && !bag_equal(*expected, r.outputs)) {
      v.violations.emplace_back(r.config, Violation{"reference", "sink bags differ from the sequential reference"});
    }
    if (!base) {
      base = &r;
      continue;
    }
    if (v.deterministic_bag && !bag_equal(base->outputs, r.outputs)) {
      v.deterministic_bag = false;
      v.witnesses.push_back({"bag", "*", base->config, r.config});
    }
    for (const auto& [sink, seq] : r.sequences) {
      auto it = base->sequences.find(sink);
      if (it == base->sequences.end() || it->second == seq) continue;
      if (v.deterministic_order) v.witnesses.push_back({"order", sink, base->config, r.config});
      v.deterministic_order = false;
    }
  }
  if (!v.deterministic_bag && (!v.from_any || subject.order_insensitive)) {
    const auto& w = v.witnesses.front();
    v.violations.emplace_back(w.second, Violation{v.from_any ? "from-any-bag-stability" : "kahn-determinism",
                                                  "sink bags differ between " + w.first.describe() + " and " +
                                                      w.second.describe()});
  }
  if (!v.deterministic_order && !v.from_any) {
    for (const auto& w : v.witnesses) {
      if (w.claim != "order") continue;
      v.violations.emplace_back(w.second, Violation{"kahn-determinism", "sink " + w.sink + " sequence differs between " +
                                                                            w.first.describe() + " and " +
                                                                            w.second.describe()});
    }
  }
  return v;
}

inline Verdict sweep(const RunMatrix& matrix) { return sweep(subject_for(matrix.program, matrix.dataset), matrix); }

inline std::string format_table(const Verdict& v) {
  std::ostringstream os;
  os << "program            " << v.program << "\n";
  os << "cells              " << v.cells << "\n";
  os << "from-any           " << (v.from_any ? "yes" : "no") << "\n";
  os << "deterministic bag  " << (v.deterministic_bag ? "yes" : "no") << "\n";
  os << "deterministic order" << " " << (v.deterministic_order ? "yes" : "no") << "\n";
  if (v.order_dependent) os << "order-dependent    informational\n";
  for (const auto& w : v.witnesses) {
    os << "witness (" << w.claim << ", " << w.sink << "): " << w.first.describe() << " vs " << w.second.describe()
       << "\n";
  }
  for (const auto& [cfg, viol] : v.violations) {
    os << "violation [" << viol.invariant << "] " << cfg.describe() << ": " << viol.message << "\n";
  }
  for (const auto& [cfg, err] : v.aborts) os << "abort " << cfg.describe() << ": " << err << "\n";
  os << "result             " << (v.ok() ? "ok" : "FAILED") << "\n";
  return os.str();
}

struct ContractResult {
  bool ok = true;
  std::string witness;
};

/// Samples random integer triples and checks that a reduce kernel is
/// associative and commutative.
inline ContractResult kernel_contract_check(const KernelFn& f, std::size_t samples, std::uint64_t seed) {
  const ReduceFn& g = f.reduce();
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::int64_t> value(-50, 50);
  ContractResult r;
  auto show = [](const Value& x) { return x.to_string(); };
  for (std::size_t i = 0; i < samples; ++i) {
    const Value a(value(rng));
    const Value b(value(rng));
    const Value c(value(rng));
    const Value left = g(a, g(b, c));
    const Value right = g(g(a, b), c);
    if (left != right) {
      r.ok = false;
      r.witness = f.name + "(" + show(a) + ", " + f.name + "(" + show(b) + ", " + show(c) + ")) = " + show(left) +
                  " but " + f.name + "(" + f.name + "(" + show(a) + ", " + show(b) + "), " + show(c) +
                  ") = " + show(right);
      return r;
    }
    const Value ab = g(a, b);
    const Value ba = g(b, a);
    if (ab != ba) {
      r.ok = false;
      r.witness = f.name + "(" + show(a) + ", " + show(b) + ") = " + show(ab) + " but " + f.name + "(" + show(b) +
                  ", " + show(a) + ") = " + show(ba);
      return r;
    }
  }
  return r;
}

}  // namespace harness
}  // namespace flowdeck
