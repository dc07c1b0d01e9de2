#include <gtest/gtest.h>

#include "flowdeck/reference.hpp"
#include "flowdeck/semantic_graph.hpp"
#include "flowdeck/topology.hpp"

using namespace flowdeck;

namespace {

Topology wordcount_topology() {
  Topology t;
  t.add_spout("lines");
  t.add_bolt("split", bolts::split_words());
  t.add_bolt("count", bolts::count(), BoltOptions{ConsumePolicy::kFromAny, bolts::default_state("count"), 1, false});
  t.connect("lines", "split");
  t.connect("split", "count", Routing::kHash);
  return t;
}

// spout -> countdown (feeds itself on output 0) -> done on output 1
Topology countdown_topology(bool declare_exit) {
  Topology t;
  t.add_spout("start");
  t.add_bolt("loop", bolts::countdown(), BoltOptions{ConsumePolicy::kFromAny, std::nullopt, 1, declare_exit});
  t.add_bolt("done", bolts::identity());
  t.connect("start", "loop");
  t.connect("loop", "loop");
  t.connect("loop", "done");
  return t;
}

std::vector<Record> texts(std::initializer_list<const char*> xs) {
  std::vector<Record> out;
  for (const char* x : xs) out.push_back(Record::unkeyed(Value(x)));
  return out;
}

}  // namespace

TEST(Topology, Construction) {
  Topology t;
  const NodeId s = t.add_spout("src");
  const NodeId b = t.add_bolt("split", bolts::split_words());
  t.connect(s, b);
  EXPECT_EQ(t.nodes().size(), 2u);
  EXPECT_EQ(t.edges().size(), 1u);
  EXPECT_TRUE(t.validate().empty());
  EXPECT_THROW(t.connect("src", "nowhere"), Error);
  EXPECT_THROW(t.connect(s, 17), Error);
  EXPECT_THROW(t.add_spout("src"), Error);
  EXPECT_THROW(t.add_bolt("p0", bolts::identity(), BoltOptions{ConsumePolicy::kFromAny, std::nullopt, 0, false}),
               Error);
}

TEST(Topology, FanInAccepted) {
  Topology t;
  t.add_spout("a");
  t.add_spout("b");
  t.add_bolt("merge", bolts::identity());
  t.connect("a", "merge");
  t.connect("b", "merge");
  EXPECT_TRUE(t.validate().empty());
  EXPECT_EQ(t.inputs_of(t.id_of("merge")).size(), 2u);
}

TEST(Topology, ValidateDiagnostics) {
  EXPECT_TRUE(wordcount_topology().validate().empty());
  EXPECT_EQ(countdown_topology(false).validate().size(), 1u);
  EXPECT_TRUE(countdown_topology(true).validate().empty());
  Topology orphan;
  orphan.add_spout("s");
  orphan.add_bolt("lonely", bolts::identity());
  const auto diags = orphan.validate();
  ASSERT_EQ(diags.size(), 1u);
  EXPECT_NE(diags[0].find("lonely"), std::string::npos);
}

TEST(Topology, FeedbackEdges) {
  const auto t = countdown_topology(true);
  const auto back = t.feedback_edges();
  ASSERT_EQ(back.size(), 3u);
  EXPECT_FALSE(back[0]);
  EXPECT_TRUE(back[1]);
  EXPECT_FALSE(back[2]);
  ASSERT_EQ(t.cycles().size(), 1u);
  EXPECT_EQ(t.cycles()[0], std::set<NodeId>{t.id_of("loop")});
}

TEST(Topology, SemanticEmbedding) {
  const auto g = as_semantic_graph(wordcount_topology());
  // three topology nodes plus the implicit sink for the terminal bolt
  ASSERT_EQ(g.actors().size(), 4u);
  EXPECT_EQ(g.edges().size(), 3u);
  EXPECT_EQ(g.actors()[0].kind, ActorKind::kSpout);
  EXPECT_EQ(g.actors()[2].kind, ActorKind::kBolt);
  EXPECT_TRUE(g.actors()[2].stateful);
  EXPECT_EQ(g.actors()[3].label, "count.out");
  for (const auto& a : g.actors()) EXPECT_EQ(a.granularity, Granularity::kTuple);
  EXPECT_TRUE(g.edges()[1].hash);

  Topology single;
  single.add_spout("only");
  EXPECT_EQ(as_semantic_graph(single).actors().size(), 1u);

  const auto cyc = as_semantic_graph(countdown_topology(true));
  int loops = 0;
  for (const auto& e : cyc.edges()) loops += e.loop ? 1 : 0;
  EXPECT_EQ(loops, 1);
  EXPECT_THROW(as_semantic_graph(countdown_topology(false)), Error);
}

TEST(Topology, ReferenceWordCount) {
  const auto out = reference::evaluate(wordcount_topology(), Inputs{{"lines", texts({"a b a", "b"})}});
  const auto recs = out.at("count.out").records();
  const std::vector<Record> expected{Record::keyed(Value("a"), Value(1)), Record::keyed(Value("b"), Value(1)),
                                     Record::keyed(Value("a"), Value(2)), Record::keyed(Value("b"), Value(2))};
  EXPECT_EQ(recs, expected);
}

TEST(Topology, ReferenceCycleDrains) {
  const auto out = reference::evaluate(
      countdown_topology(true), Inputs{{"start", std::vector<Record>{Record::unkeyed(Value(3)), Record::unkeyed(Value(1))}}});
  EXPECT_TRUE(bag_equal(out.at("done.out").bag(), Multiset{Record::unkeyed(Value(0)), Record::unkeyed(Value(0))}));
}

TEST(Topology, ReferenceFromAnyTakesLowestPortFirst) {
  Topology t;
  t.add_spout("a");
  t.add_spout("b");
  t.add_bolt("merge", bolts::identity());
  t.connect("a", "merge");
  t.connect("b", "merge");
  const auto out = reference::evaluate(t, Inputs{{"a", texts({"x", "y"})}, {"b", texts({"z"})}});
  EXPECT_EQ(out.at("merge.out").records(), texts({"x", "y", "z"}));
}

TEST(Topology, SpoutFactoryFeedsRecords) {
  Topology t;
  t.add_spout("gen", [] {
    auto n = std::make_shared<int>(0);
    return [n]() -> std::optional<Record> {
      if (*n >= 3) return std::nullopt;
      return Record::unkeyed(Value((*n)++));
    };
  });
  t.add_bolt("id", bolts::identity());
  t.connect("gen", "id");
  for (int run = 0; run < 2; ++run) {
    const auto out = reference::evaluate(t, Inputs{});
    EXPECT_EQ(out.at("id.out").records().size(), 3u);
  }
}

TEST(Topology, BoltLookup) {
  EXPECT_EQ(bolts::lookup("zip").name, "zip");
  EXPECT_THROW(bolts::lookup("nope"), Error);
  EXPECT_TRUE(bolts::default_state("count").has_value());
  EXPECT_FALSE(bolts::default_state("identity").has_value());
}
