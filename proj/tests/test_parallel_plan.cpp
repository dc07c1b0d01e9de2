#include <gtest/gtest.h>

#include <random>

#include "flowdeck/corpus.hpp"
#include "flowdeck/network.hpp"
#include "flowdeck/plan.hpp"
#include "flowdeck/runtime.hpp"

using namespace flowdeck;

namespace {

LogicalProgram map_then_reduce() {
  LogicalProgram p;
  const OpId m = p.map(p.source("A"), kernels::lookup("key_mod", Value(5)), "m");
  p.sink(p.reduce_by_key(m, kernels::lookup("sum"), "r"), "b");
  return p;
}

std::size_t shuffle_edges(const SemanticGraph& g) {
  std::size_t n = 0;
  for (const auto& e : g.edges()) n += e.hash ? 1 : 0;
  return n;
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorKind::kUnsupported;
}

}  // namespace

TEST(Expand, EightMapReplicasFeedReduceThroughHashChannels) {
  const auto plan = expand(translate(map_then_reduce()), ExpandOptions{{{"m", 8}}, 1, 0}, ExecMode::kPipelined);
  EXPECT_TRUE(plan.validate().empty());
  const auto maps = plan.replicas_of("m");
  ASSERT_EQ(maps.size(), 8u);
  const auto reduces = plan.replicas_of("r");
  ASSERT_EQ(reduces.size(), 1u);
  std::size_t hashed = 0;
  for (const auto& c : plan.channels) {
    if (c.to == reduces[0]) {
      EXPECT_TRUE(c.shuffle);
      EXPECT_NE(std::find(maps.begin(), maps.end(), c.from), maps.end());
      ++hashed;
    }
  }
  EXPECT_EQ(hashed, 8u);
  EXPECT_EQ(plan.parallelism.at("m"), 8u);
  for (std::size_t id : maps) {
    EXPECT_EQ(plan.actors[id].behavior->name(), plan.actors[maps[0]].behavior->name());
    EXPECT_EQ(plan.actors[id].consume, plan.actors[maps[0]].consume);
  }
}

TEST(Expand, ParallelismOneMirrorsSemanticGraph) {
  for (const auto& entry : corpus::all()) {
    const auto g = semantic_graph_of(entry.program);
    const auto plan = expand(g, ExpandOptions{}, ExecMode::kPipelined);
    EXPECT_EQ(plan.actors.size(), g.actors().size()) << entry.name;
    std::size_t data = 0;
    for (const auto& c : plan.channels) data += c.role == ChannelRole::kData ? 1 : 0;
    EXPECT_EQ(data, g.edges().size()) << entry.name;
    EXPECT_FALSE(plan.stages.has_value());
  }
}

TEST(Expand, UnknownOriginRejected) {
  EXPECT_EQ(kind_of([] { expand(translate(map_then_reduce()), ExpandOptions{{{"zz", 2}}, 1, 0}, ExecMode::kBsp); }),
            ErrorKind::kInvalidArgument);
  EXPECT_EQ(kind_of([] { expand(translate(map_then_reduce()), ExpandOptions{{{"m", 0}}, 1, 0}, ExecMode::kBsp); }),
            ErrorKind::kInvalidArgument);
}

TEST(Expand, ScatterGatherAroundParallelismChange) {
  const auto plan = expand(translate(map_then_reduce()), ExpandOptions{{{"m", 3}}, 1, 0}, ExecMode::kPipelined);
  const auto scatters = plan.replicas_of("m", ActorRole::kScatter);
  ASSERT_EQ(scatters.size(), 1u);
  EXPECT_EQ(plan.actors[scatters[0]].data_inputs().size(), 1u);
  EXPECT_EQ(plan.actors[scatters[0]].outputs.at(0).channels.size(), 3u);

  LogicalProgram p;
  const OpId a = p.map(p.source("in"), kernels::lookup("add"), "a");
  p.sink(p.map(a, kernels::lookup("add"), "b"), "out");
  const auto gp = expand(translate(p), ExpandOptions{{{"a", 4}, {"b", 2}}, 1, 0}, ExecMode::kPipelined);
  EXPECT_TRUE(gp.validate().empty());
  EXPECT_EQ(gp.replicas_of("b", ActorRole::kGather).size() + gp.replicas_of("b", ActorRole::kScatter).size(), 2u);
}

TEST(Expand, AlignedElementwiseChainHasNoHelpers) {
  const auto plan = expand(translate(corpus::wordcount()), ExpandOptions{{}, 4, 0}, ExecMode::kPipelined);
  std::size_t helpers = 0;
  for (const auto& a : plan.actors) helpers += a.role == ActorRole::kScatter || a.role == ActorRole::kGather ? 1 : 0;
  // one scatter after the source, one gather before the sink
  EXPECT_EQ(helpers, 2u);
}

TEST(Stages, WordCountSplitsAtShuffle) {
  const auto g = translate(corpus::wordcount());
  const auto plan = expand(g, ExpandOptions{{}, 4, 0}, ExecMode::kBsp);
  ASSERT_TRUE(plan.stages.has_value());
  EXPECT_EQ(plan.stages->size(), shuffle_edges(g) + 1);
  EXPECT_EQ(plan.stages->size(), 2u);
  EXPECT_TRUE(plan.validate().empty());
  for (const auto& a : plan.actors) {
    const bool late = a.origin_label == "reduce_by_key#3" || a.origin_label == "counts";
    EXPECT_EQ(*a.stage, late ? 1u : 0u) << a.label;
  }
}

TEST(Stages, NoShuffleIsSingleStageTwoShufflesThree) {
  LogicalProgram flat;
  flat.sink(flat.map(flat.source("in"), kernels::lookup("add")), "out");
  EXPECT_EQ(expand(translate(flat), ExpandOptions{{}, 3, 0}, ExecMode::kBsp).stages->size(), 1u);

  LogicalProgram two;
  const OpId k = two.map(two.source("in"), kernels::lookup("key_mod", Value(4)));
  two.sink(two.group_by_key(two.reduce_by_key(k, kernels::lookup("sum"))), "out");
  const auto g = translate(two);
  EXPECT_EQ(shuffle_edges(g), 2u);
  const auto plan = expand(g, ExpandOptions{{}, 2, 0}, ExecMode::kBsp);
  EXPECT_EQ(plan.stages->size(), 3u);
  EXPECT_TRUE(plan.validate().empty());
}

TEST(Stages, PipelinedHasNoStagesAndRejectsAssignment) {
  const auto plan = expand(translate(corpus::wordcount()), ExpandOptions{{}, 2, 0}, ExecMode::kPipelined);
  EXPECT_FALSE(plan.stages.has_value());
  EXPECT_EQ(kind_of([&] { assign_stages(plan); }), ErrorKind::kInvalidMode);
}

TEST(Stages, CrossStageChannelsGoForward) {
  for (const auto& entry : corpus::all()) {
    if (!std::holds_alternative<LogicalProgram>(entry.program)) continue;
    const auto plan = expand(semantic_graph_of(entry.program), ExpandOptions{{}, 4, 0}, ExecMode::kBsp);
    for (const auto& c : plan.channels) {
      if (c.role != ChannelRole::kData || c.loop) continue;
      EXPECT_LE(*plan.actors[c.from].stage, *plan.actors[c.to].stage) << entry.name;
    }
    EXPECT_TRUE(plan.validate().empty()) << entry.name;
  }
}

TEST(Scatter, PartitionsAreCompleteAndKeyDisjoint) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng() % 8;
    OutputGroup g;
    g.route = trial % 2 ? Route::kKeyedOrRoundRobin : Route::kHash;
    for (std::size_t i = 0; i < n; ++i) g.channels.push_back(i);
    Multiset in;
    const bool keyed = g.route == Route::kHash || rng() % 2;
    for (std::size_t i = 0; i < rng() % 40; ++i) {
      const Value v(static_cast<int>(rng() % 100));
      in.add(keyed ? Record::keyed(Value("k" + std::to_string(rng() % 6)), v) : Record::unkeyed(v));
    }
    std::uint64_t rr = 0;
    const auto parts = route_token(g, Token::collection(in), rr);
    ASSERT_EQ(parts.size(), n);
    Multiset unioned;
    std::map<Value, std::set<std::size_t>> key_home;
    for (const auto& [ch, tok] : parts) {
      for (const auto& r : tok.records()) {
        unioned.add(r);
        if (r.key) key_home[*r.key].insert(ch);
      }
    }
    EXPECT_TRUE(bag_equal(unioned, in));
    for (const auto& [k, homes] : key_home) EXPECT_EQ(homes.size(), 1u) << k.to_string();
  }
}

TEST(Iteration, BarrierPerSuperstepRunsFourSupersteps) {
  const auto g = translate(corpus::halving_iteration());
  const auto& actor = g.actors()[*g.find("halving")];
  const auto plan = expand_iteration(actor, IterationStrategy::kBarrierPerSuperstep);
  const auto drivers = plan.replicas_of("halving", ActorRole::kDriver);
  ASSERT_EQ(drivers.size(), 1u);
  RunConfig cfg;
  cfg.workers = 2;
  const auto res = run(plan, Inputs{{"in", std::vector<Record>{Record::unkeyed(Value(8))}}}, cfg);
  const auto out = res.outputs.at("out").records();
  ASSERT_EQ(out.size(), 1u);
  EXPECT_DOUBLE_EQ(out[0].payload.as_number(), 0.5);
  EXPECT_EQ(trace_checks::superstep_count(res.trace, "halving"), 4u);
  EXPECT_TRUE(trace_checks::supersteps(res.trace).empty());
}

TEST(Iteration, ZeroIterationsNeverFiresBody) {
  const auto g = translate(corpus::halving_iteration());
  const auto& actor = g.actors()[*g.find("halving")];
  for (auto strategy : {IterationStrategy::kBarrierPerSuperstep, IterationStrategy::kTaggedToken}) {
    const auto plan = expand_iteration(actor, strategy);
    const auto res = run(plan, Inputs{{"in", std::vector<Record>{Record::unkeyed(Value(0.25))}}}, RunConfig{});
    EXPECT_EQ(res.outputs.at("out").records(), std::vector<Record>{Record::unkeyed(Value(0.25))});
    for (const auto& e : res.trace) {
      if (e.kind == TraceKind::kTaskStart) { EXPECT_EQ(e.actor.find("halve"), std::string::npos) << e.actor; }
    }
  }
}

TEST(Iteration, TaggedTokensOverlap) {
  const auto g = translate(corpus::halving_iteration());
  const auto& actor = g.actors()[*g.find("halving")];
  const auto plan = expand_iteration(actor, IterationStrategy::kTaggedToken);
  const std::vector<Multiset> three{Multiset{Record::unkeyed(Value(8))}, Multiset{Record::unkeyed(Value(64))},
                                    Multiset{Record::unkeyed(Value(1024))}};
  bool overlapped = false;
  for (std::uint64_t seed = 1; seed <= 10 && !overlapped; ++seed) {
    RunConfig cfg;
    cfg.workers = 4;
    cfg.dispatch = Dispatch::kOnDemand;
    // the halve kernel is too cheap to be preempted; give each task some duration
    cfg.jitter_us = 100;
    cfg.seed = seed;
    const auto res = run(plan, Inputs{{"in", three}}, cfg);
    EXPECT_TRUE(bag_equal(res.outputs.at("out").bag(),
                          Multiset{Record::unkeyed(Value(0.5)), Record::unkeyed(Value(0.5)), Record::unkeyed(Value(0.5))}));
    overlapped = trace_checks::max_concurrent_tags(res.trace) >= 2;
  }
  EXPECT_TRUE(overlapped);
}

TEST(Iteration, TaggedBodyWithShuffleUnsupported) {
  LogicalProgram body;
  const OpId k = body.map(body.source("x"), kernels::lookup("key_mod", Value(2)));
  body.sink(body.map(body.reduce_by_key(k, kernels::lookup("sum")), kernels::lookup("drop_key")), "y");
  LogicalProgram p;
  p.sink(p.iterate(p.source("in"), body, kernels::predicate("never"), 2, "loop"), "out");
  const auto g = translate(p);
  EXPECT_EQ(kind_of([&] { expand(g, ExpandOptions{}, ExecMode::kTaggedToken); }), ErrorKind::kUnsupported);
  EXPECT_NO_THROW(expand(g, ExpandOptions{}, ExecMode::kBsp));
}

TEST(Iteration, NoHierarchicalBodyRejected) {
  SemanticActor plain;
  plain.label = "x";
  EXPECT_EQ(kind_of([&] { expand_iteration(plain, IterationStrategy::kTaggedToken); }), ErrorKind::kInvalidArgument);
}

TEST(Semantics, PlansMatchReference) {
  std::mt19937_64 rng(41);
  for (const auto& entry : corpus::all()) {
    const auto g = semantic_graph_of(entry.program);
    for (ExecMode mode : {ExecMode::kBsp, ExecMode::kPipelined, ExecMode::kTaggedToken}) {
      for (std::size_t p : {1u, 3u, 8u}) {
        const auto plan = expand(g, ExpandOptions{{}, p, 0}, mode);
        EXPECT_TRUE(plan.validate().empty()) << entry.name;
        const auto in = entry.generate(rng());
        RunConfig cfg;
        cfg.workers = 1 + rng() % 4;
        cfg.seed = rng();
        const auto res = run(plan, in, cfg);
        EXPECT_TRUE(bag_equal(res.outputs, reference_outputs(entry.program, in)))
            << entry.name << " " << to_string(mode) << " p=" << p;
      }
    }
  }
}

TEST(Dot, PlanRendersStagesAndReplicas) {
  const auto plan = expand(translate(corpus::wordcount()), ExpandOptions{{}, 4, 0}, ExecMode::kBsp);
  const auto dot = to_dot(plan);
  EXPECT_NE(dot.find("subgraph cluster_stage0"), std::string::npos);
  EXPECT_NE(dot.find("subgraph cluster_stage1"), std::string::npos);
  EXPECT_NE(dot.find("peripheries=2"), std::string::npos);
  const auto piped = to_dot(expand(translate(corpus::wordcount()), ExpandOptions{{}, 4, 0}, ExecMode::kPipelined));
  EXPECT_EQ(piped.find("cluster_stage"), std::string::npos);
}
