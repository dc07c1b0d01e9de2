#include <gtest/gtest.h>

#include <random>
#include <regex>

#include "flowdeck/corpus.hpp"
#include "flowdeck/plan.hpp"
#include "flowdeck/runtime.hpp"
#include "flowdeck/semantic_graph.hpp"

using namespace flowdeck;

namespace {

std::size_t count_matches(const std::string& text, const std::string& pattern) {
  const std::regex re(pattern);
  return static_cast<std::size_t>(std::distance(std::sregex_iterator(text.begin(), text.end(), re), std::sregex_iterator()));
}

std::size_t dot_nodes(const std::string& dot) { return count_matches(dot, R"(\n\s*a[0-9_]+ \[label=)"); }
std::size_t dot_edges(const std::string& dot) { return count_matches(dot, R"(\n\s*a[0-9_]+ -> )"); }

LogicalProgram map_chain(int n) {
  LogicalProgram p;
  OpId cur = p.source("in");
  for (int i = 0; i < n; ++i) cur = p.map(cur, kernels::lookup("add", Value(i + 1)), "m" + std::to_string(i));
  p.sink(cur, "out");
  return p;
}

std::vector<std::pair<std::string, std::string>> edge_labels(const SemanticGraph& g) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& e : g.edges()) out.emplace_back(g.actors()[e.from].label, g.actors()[e.to].label);
  return out;
}

}  // namespace

TEST(Translate, WordCountIsFiveActorChain) {
  const auto g = translate(corpus::wordcount());
  ASSERT_EQ(g.actors().size(), 5u);
  EXPECT_EQ(g.edges().size(), 4u);
  const std::vector<ActorKind> kinds{ActorKind::kSource, ActorKind::kFlatMap, ActorKind::kMap,
                                     ActorKind::kReduceByKey, ActorKind::kSink};
  for (std::size_t i = 0; i < kinds.size(); ++i) EXPECT_EQ(g.actors()[i].kind, kinds[i]);
  // only the shuffle edge into reduceByKey is hash partitioned
  int hashed = 0;
  for (const auto& e : g.edges()) hashed += e.hash ? 1 : 0;
  EXPECT_EQ(hashed, 1);
  EXPECT_TRUE(g.edges()[2].hash);
  EXPECT_EQ(g.actors()[2].output_policy, OutputPolicy::kHashPartition);
  EXPECT_EQ(g.actors()[1].output_policy, OutputPolicy::kForward);
  EXPECT_TRUE(g.structure_errors().empty());
}

TEST(Translate, MapThenReduceChain) {
  LogicalProgram p;
  const OpId m = p.map(p.source("A"), kernels::lookup("key_mod", Value(3)), "m");
  p.sink(p.reduce_by_key(m, kernels::lookup("sum"), "r"), "b");
  const auto g = translate(p);
  const auto edges = edge_labels(g);
  EXPECT_NE(std::find(edges.begin(), edges.end(), std::pair<std::string, std::string>{"m", "r"}), edges.end());
  EXPECT_EQ(g.actors().size(), 4u);
}

TEST(Translate, SourceSinkOnly) {
  LogicalProgram p;
  p.sink(p.source("in"), "out");
  const auto g = translate(p);
  EXPECT_EQ(g.actors().size(), 2u);
  EXPECT_EQ(g.edges().size(), 1u);
}

TEST(Translate, GranularityFollowsMode) {
  EXPECT_EQ(translate(corpus::wordcount()).actors()[0].granularity, Granularity::kCollection);
  EXPECT_EQ(translate(lift_to_stream(corpus::wordcount())).actors()[3].granularity, Granularity::kMicroBatch);
  const auto tuples = translate(corpus::windowed_running_count());
  for (const auto& a : tuples.actors()) EXPECT_EQ(a.granularity, Granularity::kTuple);
}

TEST(Translate, IterateIsHierarchical) {
  const auto g = translate(corpus::halving_iteration());
  const auto it = g.find("halving");
  ASSERT_TRUE(it.has_value());
  const auto& a = g.actors()[*it];
  EXPECT_EQ(a.kind, ActorKind::kIterate);
  ASSERT_TRUE(a.body);
  EXPECT_EQ(a.body->sources().size(), 1u);
  EXPECT_EQ(a.body->sinks().size(), 1u);
  EXPECT_EQ(a.max_iterations, 64u);
  EXPECT_TRUE(g.structure_errors().empty());
}

TEST(Translate, IsDeterministic) {
  for (const auto& entry : corpus::all()) {
    const auto a = semantic_graph_of(entry.program);
    const auto b = semantic_graph_of(entry.program);
    EXPECT_EQ(to_dot(a), to_dot(b)) << entry.name;
    EXPECT_EQ(edge_labels(a), edge_labels(b)) << entry.name;
  }
}

TEST(Fuse, FlatMapMapCollapse) {
  const auto g = translate(corpus::wordcount());
  const auto f = fuse(g);
  EXPECT_EQ(f.actors().size(), g.actors().size() - 1);
  std::size_t fused = 0;
  for (const auto& a : f.actors()) {
    if (!a.fused_from.empty()) {
      ++fused;
      EXPECT_EQ(a.fused_from.size(), 2u);
    }
  }
  EXPECT_EQ(fused, 1u);
  EXPECT_EQ(f.actors()[2].kind, ActorKind::kReduceByKey);
  EXPECT_TRUE(f.structure_errors().empty());
}

TEST(Fuse, MapChainBecomesOneActor) {
  const auto f = fuse(translate(map_chain(3)));
  ASSERT_EQ(f.actors().size(), 3u);
  EXPECT_EQ(f.actors()[1].fused_from, (std::vector<std::string>{"m0", "m1", "m2"}));
  std::vector<Record> out;
  apply_elementwise(*f.actors()[1].kernel, Record::unkeyed(Value(10)), out);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].payload, Value(16));
}

TEST(Fuse, IntensiveHintsBlockFusion) {
  const auto g = translate(map_chain(3));
  const auto f = fuse(g, CostHints{{"m0", true}, {"m1", true}, {"m2", true}});
  EXPECT_EQ(to_dot(f), to_dot(g));
  const auto partial = fuse(g, CostHints{{"m1", true}});
  EXPECT_EQ(partial.actors().size(), g.actors().size());
}

TEST(Fuse, StatefulAndShuffleNotCrossed) {
  const auto g = translate(corpus::windowed_running_count());
  const auto f = fuse(g);
  EXPECT_EQ(f.actors().size(), g.actors().size());
}

TEST(Fuse, SoundOnRandomInputs) {
  for (const auto& entry : corpus::all()) {
    const auto g = semantic_graph_of(entry.program);
    const auto fused = fuse(g);
    const auto plain_plan = expand(g, ExpandOptions{{}, 2, 0}, ExecMode::kPipelined);
    const auto fused_plan = expand(fused, ExpandOptions{{}, 2, 0}, ExecMode::kPipelined);
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const auto in = entry.generate(seed);
      RunConfig cfg;
      cfg.workers = 2;
      cfg.seed = seed;
      const auto a = run(plain_plan, in, cfg).outputs;
      const auto b = run(fused_plan, in, cfg).outputs;
      EXPECT_TRUE(bag_equal(a, b)) << entry.name << " seed " << seed;
    }
  }
}

TEST(Dot, CountsAndStyles) {
  LogicalProgram p;
  p.sink(p.source("in"), "out");
  const auto two = to_dot(translate(p));
  EXPECT_EQ(dot_nodes(two), 2u);
  EXPECT_EQ(dot_edges(two), 1u);
  EXPECT_EQ(two.rfind("digraph", 0), 0u);

  const auto empty = to_dot(SemanticGraph{});
  EXPECT_EQ(dot_nodes(empty), 0u);
  EXPECT_EQ(dot_edges(empty), 0u);

  const auto iter = to_dot(translate(corpus::halving_iteration()));
  EXPECT_NE(iter.find("subgraph cluster_"), std::string::npos);

  const auto wc = to_dot(translate(corpus::wordcount()));
  EXPECT_NE(wc.find("collection"), std::string::npos);
  EXPECT_NE(wc.find("hash"), std::string::npos);

  const auto cyc = to_dot(semantic_graph_of(corpus::from_any_merge()));
  EXPECT_NE(cyc.find("from_any"), std::string::npos);
}

TEST(Structure, DetectsGranularityMismatchAndUnflaggedCycle) {
  SemanticGraph g;
  SemanticActor a;
  a.label = "a";
  a.kind = ActorKind::kSource;
  SemanticActor b;
  b.label = "b";
  b.kind = ActorKind::kMap;
  b.granularity = Granularity::kTuple;
  g.add_actor(a);
  g.add_actor(b);
  g.add_edge(0, 1, 0, false);
  EXPECT_EQ(g.structure_errors().size(), 1u);

  SemanticGraph c;
  SemanticActor x;
  x.label = "x";
  x.kind = ActorKind::kMap;
  SemanticActor y = x;
  y.label = "y";
  c.add_actor(x);
  c.add_actor(y);
  c.add_edge(0, 1, 0, false);
  c.add_edge(1, 0, 0, false);
  EXPECT_FALSE(c.structure_errors().empty());
}
