// flowdeck command-line driver: plan | run | sweep | validate.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "flowdeck/flowdeck.hpp"

namespace fd = flowdeck;
namespace jio = flowdeck::json_io;

namespace {

constexpr int kOk = 0;
constexpr int kRuntimeFailure = 1;
constexpr int kUsage = 2;

struct Loaded {
  std::string name;
  fd::ProgramSource program;
  std::optional<fd::CorpusEntry> builtin;
};

Loaded load_program(const std::string& ref) {
  if (auto e = fd::corpus::find(ref)) return {e->name, e->program, e};
  if (std::filesystem::exists(ref)) return {ref, jio::load_program(ref), std::nullopt};
  std::string known;
  for (const auto& n : fd::corpus::names()) known += (known.empty() ? "" : ", ") + n;
  fd::fail(fd::ErrorKind::kInvalidArgument, "unknown program '" + ref + "' (built-ins: " + known + ")");
}

std::uint64_t default_seed() {
  if (const char* s = std::getenv("FLOWDECK_SEED")) {
    try {
      return std::stoull(s);
    } catch (const std::exception&) {
      fd::fail(fd::ErrorKind::kInvalidArgument, std::string("FLOWDECK_SEED is not a number: ") + s);
    }
  }
  return 0;
}

void write_out(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) fd::fail(fd::ErrorKind::kInvalidArgument, "cannot write " + path);
  out << text;
}

std::string display(const fd::Value& v) { return v.is_text() ? v.as_text() : v.to_string(); }

// Sorted copy for display; the stored outputs stay as produced.
std::string render_outputs(const fd::Outputs& outs) {
  std::ostringstream os;
  for (const auto& [sink, out] : outs) {
    auto recs = out.records();
    std::sort(recs.begin(), recs.end());
    os << "# " << sink << " (" << recs.size() << " records, " << out.tokens.size() << " tokens)\n";
    for (const auto& r : recs) {
      if (r.key) os << display(*r.key) << '\t';
      os << display(r.payload) << '\n';
    }
  }
  return os.str();
}

fd::Value numeric(const fd::Value& v) {
  if (!v.is_text()) return v;
  const std::string& s = v.as_text();
  try {
    std::size_t used = 0;
    const long long i = std::stoll(s, &used);
    if (used == s.size()) return fd::Value(static_cast<std::int64_t>(i));
    const double d = std::stod(s, &used);
    if (used == s.size()) return fd::Value(d);
  } catch (const std::exception&) {
  }
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"flowdeck: a small dataflow engine"};
  app.require_subcommand(1, 1);

  // plan
  auto* plan_cmd = app.add_subcommand("plan", "emit the semantic or parallel graph as DOT");
  std::string plan_program;
  std::string layer = "semantic";
  std::size_t plan_p = 1;
  std::string plan_mode = "pipelined";
  bool plan_fuse = false;
  bool plan_json = false;
  std::string plan_out;
  plan_cmd->add_option("program", plan_program, "built-in name or program JSON")->required();
  plan_cmd->add_option("--layer", layer, "semantic | parallel")->check(CLI::IsMember({"semantic", "parallel"}));
  plan_cmd->add_option("-p,--parallelism", plan_p, "replicas per actor")->check(CLI::PositiveNumber);
  plan_cmd->add_option("--mode", plan_mode, "bsp | pipelined | tagged")
      ->check(CLI::IsMember({"bsp", "pipelined", "tagged"}));
  plan_cmd->add_flag("--fuse", plan_fuse, "fuse light elementwise chains first");
  plan_cmd->add_flag("--json", plan_json, "semantic layer as JSON instead of DOT");
  plan_cmd->add_option("-o,--output", plan_out, "output file (default stdout)");

  // run
  auto* run_cmd = app.add_subcommand("run", "execute a program and print its sink outputs");
  std::string run_program;
  std::vector<std::string> run_inputs;
  std::string run_config_path;
  std::optional<std::string> run_mode;
  std::optional<std::size_t> run_workers;
  std::optional<std::string> run_dispatch;
  std::optional<std::uint64_t> run_seed;
  std::optional<std::string> run_runtime;
  std::optional<std::size_t> run_p;
  std::optional<std::uint64_t> run_generate;
  std::string trace_path;
  std::string outputs_json;
  bool run_fuse = false;
  bool run_numeric = false;
  run_cmd->add_option("program", run_program, "built-in name or program JSON")->required();
  run_cmd->add_option("inputs", run_inputs, "input files, one per source in declaration order");
  run_cmd->add_option("-c,--config", run_config_path, "run configuration JSON");
  run_cmd->add_option("--mode", run_mode, "bsp | pipelined | tagged")->check(CLI::IsMember({"bsp", "pipelined", "tagged"}));
  run_cmd->add_option("-w,--workers", run_workers, "workers / executors")->check(CLI::PositiveNumber);
  run_cmd->add_option("--dispatch", run_dispatch, "round_robin | on_demand")
      ->check(CLI::IsMember({"round_robin", "on_demand"}));
  run_cmd->add_option("--seed", run_seed, "run seed (default: FLOWDECK_SEED or 0)");
  run_cmd->add_option("--runtime", run_runtime, "scheduled | process")->check(CLI::IsMember({"scheduled", "process"}));
  run_cmd->add_option("-p,--parallelism", run_p, "replicas per actor")->check(CLI::PositiveNumber);
  run_cmd->add_option("--generate", run_generate, "use the built-in program's random inputs with this seed");
  run_cmd->add_option("--trace", trace_path, "write the trace as JSONL");
  run_cmd->add_option("--outputs-json", outputs_json, "write raw sink tokens as JSON");
  run_cmd->add_flag("--fuse", run_fuse, "fuse light elementwise chains first");
  run_cmd->add_flag("--numeric", run_numeric, "parse numeric text input lines as numbers");

  // sweep
  auto* sweep_cmd = app.add_subcommand("sweep", "run a determinism sweep from a matrix JSON");
  std::string matrix_path;
  std::string verdict_json;
  sweep_cmd->add_option("matrix", matrix_path, "run matrix JSON")->required()->check(CLI::ExistingFile);
  sweep_cmd->add_option("--json", verdict_json, "also write the verdict JSON here ('-' for stdout)");

  // validate
  auto* validate_cmd = app.add_subcommand("validate", "check a program, run config, matrix or trace file");
  std::string validate_path;
  std::string validate_kind = "auto";
  validate_cmd->add_option("file", validate_path, "file to check")->required()->check(CLI::ExistingFile);
  validate_cmd->add_option("--kind", validate_kind, "auto | program | runconfig | matrix | trace")
      ->check(CLI::IsMember({"auto", "program", "runconfig", "matrix", "trace"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*plan_cmd) {
      const Loaded l = load_program(plan_program);
      fd::SemanticGraph g = fd::semantic_graph_of(l.program);
      if (plan_fuse) g = fd::fuse(g);
      if (layer == "semantic") {
        write_out(plan_out, plan_json ? jio::to_json(g).dump(2) + "\n" : fd::to_dot(g));
      } else {
        fd::ExpandOptions opts;
        opts.default_parallelism = plan_p;
        const auto plan = fd::expand(g, opts, *fd::exec_mode_from_string(plan_mode));
        write_out(plan_out, fd::to_dot(plan));
      }
      return kOk;
    }

    if (*run_cmd) {
      const Loaded l = load_program(run_program);
      jio::RunSettings s;
      s.run.seed = default_seed();
      if (!run_config_path.empty()) s = jio::run_settings_from_json(jio::parse_file(run_config_path), s);
      if (run_mode) s.mode = *fd::exec_mode_from_string(*run_mode);
      if (run_workers) s.run.workers = *run_workers;
      if (run_dispatch) s.run.dispatch = *fd::dispatch_from_string(*run_dispatch);
      if (run_seed) s.run.seed = *run_seed;
      if (run_runtime) s.run.runtime = *fd::runtime_kind_from_string(*run_runtime);
      if (run_p) s.parallelism = *run_p;
      if (run_fuse) s.fuse = true;

      fd::Inputs inputs;
      if (!run_inputs.empty()) {
        inputs = fd::corpus::load_inputs(l.program, run_inputs);
      } else if (l.builtin) {
        inputs = l.builtin->generate(run_generate.value_or(s.run.seed));
      } else if (run_generate) {
        fd::fail(fd::ErrorKind::kInvalidArgument, "--generate needs a built-in program");
      }
      if (run_numeric) {
        for (auto& [name, data] : inputs) {
          if (auto* recs = std::get_if<std::vector<fd::Record>>(&data)) {
            for (auto& r : *recs) r.payload = numeric(r.payload);
          }
        }
      }

      fd::SemanticGraph g = fd::semantic_graph_of(l.program);
      if (s.fuse) g = fd::fuse(g);
      fd::ExpandOptions opts;
      opts.default_parallelism = s.parallelism;
      const auto plan = fd::expand(g, opts, s.mode);

      fd::RunResult res;
      try {
        res = fd::run(plan, inputs, s.run);
      } catch (const fd::RunAborted& e) {
        if (!trace_path.empty()) {
          std::ofstream t(trace_path);
          jio::write_trace_jsonl(t, e.trace());
        }
        std::cerr << "flowdeck: run aborted: failing task " << e.task() << " (" << e.actor() << "): " << e.cause()
                  << "\n";
        return kRuntimeFailure;
      }
      if (!trace_path.empty()) {
        std::ofstream t(trace_path);
        if (!t) fd::fail(fd::ErrorKind::kInvalidArgument, "cannot write " + trace_path);
        jio::write_trace_jsonl(t, res.trace);
      }
      if (!outputs_json.empty()) write_out(outputs_json, jio::to_json(res.outputs).dump(2) + "\n");
      std::cout << render_outputs(res.outputs);
      std::cout << "# tasks=" << res.stats.tasks << " supersteps=" << res.stats.supersteps
                << " wall_ms=" << static_cast<double>(res.stats.wall_ns) / 1e6 << "\n";
      return kOk;
    }

    if (*sweep_cmd) {
      fd::RunMatrix m = jio::run_matrix_from_json(jio::parse_file(matrix_path));
      // Relative paths in a matrix are relative to the matrix file.
      const auto base = std::filesystem::path(matrix_path).parent_path();
      auto resolve = [&](const std::string& item) {
        std::filesystem::path p = item;
        return (p.is_relative() ? base / p : p).string();
      };
      std::string dataset = m.dataset;
      if (dataset.rfind("generated:", 0) != 0) {
        std::string joined;
        std::stringstream ss(dataset);
        for (std::string item; std::getline(ss, item, ',');) joined += (joined.empty() ? "" : ",") + resolve(item);
        dataset = joined;
      }
      fd::SweepSubject subject;
      if (fd::corpus::find(m.program)) {
        subject = fd::harness::subject_for(m.program, dataset);
      } else {
        subject.name = m.program;
        subject.program = jio::load_program(resolve(m.program));
        std::vector<std::string> paths;
        std::stringstream ss(dataset);
        for (std::string item; std::getline(ss, item, ',');) paths.push_back(item);
        subject.inputs = fd::corpus::load_inputs(subject.program, paths);
      }
      const fd::Verdict v = fd::harness::sweep(subject, m);
      if (verdict_json == "-") {
        std::cout << jio::to_json(v).dump(2) << "\n";
      } else {
        std::cout << fd::harness::format_table(v);
        if (!verdict_json.empty()) write_out(verdict_json, jio::to_json(v).dump(2) + "\n");
      }
      return v.exit_code();
    }

    if (*validate_cmd) {
      std::string kind = validate_kind;
      if (kind == "auto") {
        if (validate_path.size() >= 6 && validate_path.compare(validate_path.size() - 6, 6, ".jsonl") == 0) {
          kind = "trace";
        } else {
          const auto j = jio::parse_file(validate_path);
          if (j.is_object() && j.contains("ops")) {
            kind = "program";
          } else if (j.is_object() && j.value("kind", std::string()) == "topology") {
            kind = "program";
          } else if (j.is_object() && j.contains("program")) {
            kind = "matrix";
          } else {
            kind = "runconfig";
          }
        }
      }
      if (kind == "trace") {
        std::ifstream in(validate_path);
        const auto errs = jio::validate_trace_jsonl(in);
        for (const auto& e : errs) std::cerr << validate_path << ": " << e << "\n";
        if (!errs.empty()) return kUsage;
        std::cout << validate_path << ": valid trace\n";
        return kOk;
      }
      const auto j = jio::parse_file(validate_path);
      if (kind == "program") {
        const auto p = jio::program_from_json(j);
        const auto g = fd::semantic_graph_of(p);
        std::cout << validate_path << ": valid program (" << g.actors().size() << " actors)\n";
      } else if (kind == "matrix") {
        const auto m = jio::run_matrix_from_json(j);
        std::cout << validate_path << ": valid matrix (" << m.cells() << " cells)\n";
      } else {
        jio::run_settings_from_json(j);
        std::cout << validate_path << ": valid run configuration\n";
      }
      return kOk;
    }
  } catch (const fd::Error& e) {
    std::cerr << "flowdeck: " << e.what() << "\n";
    switch (e.kind()) {
      case fd::ErrorKind::kRuntimeAbort:
      case fd::ErrorKind::kDeadlock:
        return kRuntimeFailure;
      default:
        return kUsage;
    }
  } catch (const std::exception& e) {
    std::cerr << "flowdeck: " << e.what() << "\n";
    return kRuntimeFailure;
  }
  return kOk;
}
