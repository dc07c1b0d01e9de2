#include <gtest/gtest.h>

#include <sstream>

#include "flowdeck/json_io.hpp"

using namespace flowdeck;
namespace jio = flowdeck::json_io;

namespace {

std::string sample(const std::string& name) { return std::string(FLOWDECK_SAMPLES_DIR) + "/" + name; }

std::string parse_error_of(const std::string& text) {
  try {
    jio::program_from_json(jio::parse(text, "doc"));
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kParseError);
    return e.what();
  }
  return {};
}

}  // namespace

TEST(ProgramJson, WordCountMatchesBuiltin) {
  const auto loaded = jio::load_program(sample("wordcount.json"));
  ASSERT_TRUE(std::holds_alternative<LogicalProgram>(loaded));
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto in = corpus::find("wordcount")->generate(seed);
    const auto a = reference_outputs(loaded, Inputs{{"text", in.at("text")}});
    const auto b = reference_outputs(corpus::wordcount(), in);
    ASSERT_EQ(a.size(), 1u);
    EXPECT_TRUE(bag_equal(a.begin()->second.bag(), b.begin()->second.bag()));
  }
}

TEST(ProgramJson, HalvingIterates) {
  const auto p = jio::load_program(sample("halving.json"));
  const auto out = reference_outputs(p, Inputs{{"values", std::vector<Record>{Record::unkeyed(Value(8))}}});
  EXPECT_EQ(out.at("result").records(), std::vector<Record>{Record::unkeyed(Value(0.5))});
}

TEST(ProgramJson, EdgesListAndTopology) {
  const auto p = jio::program_from_json(jio::parse(R"({"ops": [{"id": "s", "kind": "source"},
      {"id": "m", "kind": "map", "kernel": "scale", "arg": 3}, {"id": "k", "kind": "sink"}],
      "edges": [["s", "m"], {"from": "m", "to": "k"}]})"));
  const auto out = reference_outputs(p, Inputs{{"s", std::vector<Record>{Record::unkeyed(Value(2))}}});
  EXPECT_EQ(out.at("k").records(), std::vector<Record>{Record::unkeyed(Value(6))});

  const auto t = jio::load_program(sample("merge-topology.json"));
  ASSERT_TRUE(std::holds_alternative<Topology>(t));
  EXPECT_EQ(std::get<Topology>(t).nodes().size(), 3u);
}

TEST(ProgramJson, SyntaxErrorsCarryLineAndColumn) {
  const auto msg = parse_error_of("{\n  \"ops\": [,]\n}");
  EXPECT_NE(msg.find("doc:2:11:"), std::string::npos) << msg;
  try {
    jio::parse_file(sample("broken-matrix.json"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kParseError);
    EXPECT_NE(std::string(e.what()).find("broken-matrix.json:1:"), std::string::npos);
  }
}

TEST(ProgramJson, StructuralErrors) {
  EXPECT_NE(parse_error_of(R"({"ops": [{"id": "s", "kind": "source", "colour": 1}]})").find("colour"), std::string::npos);
  EXPECT_NE(parse_error_of(R"({"ops": [{"id": "s", "kind": "teleport"}]})").find("teleport"), std::string::npos);
  EXPECT_NE(parse_error_of(R"({"ops": [{"id": "k", "kind": "sink", "inputs": ["ghost"]}]})").find("ghost"),
            std::string::npos);
  EXPECT_FALSE(parse_error_of(R"({"ops": [{"id": "s", "kind": "source"}, {"id": "s", "kind": "source"}]})").empty());
  EXPECT_FALSE(parse_error_of(R"({"ops": [{"id": "s", "kind": "source"},
      {"id": "j", "kind": "join", "inputs": ["s"]}, {"id": "k", "kind": "sink", "inputs": ["j"]}]})").empty());
  EXPECT_FALSE(parse_error_of(R"({"ops": [{"id": "a", "kind": "map", "kernel": "identity", "inputs": ["b"]},
      {"id": "b", "kind": "map", "kernel": "identity", "inputs": ["a"]}]})").empty());
  EXPECT_FALSE(parse_error_of(R"({"mode": "sideways", "ops": []})").empty());
  EXPECT_FALSE(parse_error_of(R"({"kind": "topology", "spouts": ["a"], "bolts": [{"name": "b", "kernel": "zzz"}]})").empty());
}

TEST(RunSettingsJson, ParsesAndRoundTrips) {
  const auto s = jio::run_settings_from_json(jio::parse_file(sample("runconfig.json")));
  EXPECT_EQ(s.mode, ExecMode::kBsp);
  EXPECT_EQ(s.run.workers, 4u);
  EXPECT_EQ(s.run.dispatch, Dispatch::kOnDemand);
  EXPECT_EQ(s.run.seed, 7u);
  EXPECT_EQ(s.parallelism, 4u);
  const auto again = jio::run_settings_from_json(jio::to_json(s));
  EXPECT_EQ(jio::to_json(again), jio::to_json(s));
  EXPECT_THROW(jio::run_settings_from_json(jio::parse(R"({"workers": 0})")), Error);
  EXPECT_THROW(jio::run_settings_from_json(jio::parse(R"({"mode": "warp"})")), Error);
  EXPECT_THROW(jio::run_settings_from_json(jio::parse(R"({"speed": 1})")), Error);
}

TEST(MatrixJson, Parses) {
  const auto m = jio::run_matrix_from_json(jio::parse_file(sample("wordcount-matrix.json")));
  EXPECT_EQ(m.program, "wordcount");
  EXPECT_EQ(m.workers, (std::vector<std::size_t>{1, 2, 4}));
  EXPECT_EQ(m.cells(), 36u);
  EXPECT_THROW(jio::run_matrix_from_json(jio::parse(R"({"program": "wordcount", "workers": []})")), Error);
  EXPECT_THROW(jio::run_matrix_from_json(jio::parse(R"({"program": "wordcount", "seeds": [-1]})")), Error);
  EXPECT_THROW(jio::run_matrix_from_json(jio::parse(R"({"workers": [1]})")), Error);
}

TEST(TraceJsonl, WriteReadValidate) {
  const auto plan = expand(semantic_graph_of(corpus::wordcount()), ExpandOptions{{}, 2, 0}, ExecMode::kBsp);
  RunConfig cfg;
  cfg.workers = 2;
  const auto res = run(plan, corpus::find("wordcount")->generate(1), cfg);
  std::stringstream ss;
  jio::write_trace_jsonl(ss, res.trace);
  const std::string text = ss.str();
  {
    std::istringstream in(text);
    EXPECT_TRUE(jio::validate_trace_jsonl(in).empty());
  }
  std::istringstream in(text);
  const auto back = jio::read_trace_jsonl(in);
  ASSERT_EQ(back.size(), res.trace.size());
  for (std::size_t i = 0; i < back.size(); ++i) {
    EXPECT_EQ(jio::to_json(back[i]), jio::to_json(res.trace[i]));
  }
  EXPECT_TRUE(trace_checks::basic(back).empty());
}

TEST(TraceJsonl, ValidatorRejects) {
  const std::string ok =
      R"({"seq":1,"wall_ns":5,"kind":"Send","actor":"a","channel":"a->b","worker":null,"stage":null,"superstep":null,"tag":null})";
  const std::string again =
      R"({"seq":1,"wall_ns":6,"kind":"Send","actor":"a","channel":"a->b","worker":null,"stage":null,"superstep":null,"tag":null})";
  std::istringstream repeated(ok + "\n" + again + "\n");
  auto errs = jio::validate_trace_jsonl(repeated);
  ASSERT_EQ(errs.size(), 1u);
  EXPECT_EQ(errs[0], "line 2: seq not increasing");

  std::istringstream bad("{\"seq\":1}\nnot json\n" +
                         std::string(R"({"seq":2,"wall_ns":5,"kind":"Teleport","actor":"a","channel":null,"worker":null,"stage":null,"superstep":null,"tag":null})") +
                         "\n");
  errs = jio::validate_trace_jsonl(bad);
  ASSERT_EQ(errs.size(), 3u);
  EXPECT_NE(errs[0].find("missing field"), std::string::npos);
  EXPECT_EQ(errs[1], "line 2: not JSON");
  EXPECT_EQ(errs[2], "line 3: unknown kind");
}

TEST(VerdictJson, Shape) {
  Verdict v;
  v.program = "x";
  v.order_dependent = true;
  const auto j = jio::to_json(v);
  EXPECT_EQ(j.at("ok"), true);
  EXPECT_EQ(j.at("order_dependent"), "informational");
  EXPECT_TRUE(j.at("witnesses").is_array());
}
