#include <gtest/gtest.h>

#include <random>

#include "flowdeck/corpus.hpp"
#include "flowdeck/runtime.hpp"

using namespace flowdeck;

namespace {

ExecutionPlan plan_of(const ProgramSource& p, ExecMode mode, std::size_t parallelism = 1) {
  return expand(semantic_graph_of(p), ExpandOptions{{}, parallelism, 0}, mode);
}

Record kv(const char* k, Value v) { return Record::keyed(Value(k), std::move(v)); }

std::vector<Record> numbers(std::size_t n) {
  std::vector<Record> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(Record::unkeyed(Value(static_cast<int>(i))));
  return out;
}

// tuple stream: in -> map "m" (+1) -> out
LogicalProgram two_actor_pipeline() {
  LogicalProgram p(ProgramMode::kTupleStream);
  p.sink(p.map(p.source("in"), kernels::lookup("add", Value(1)), "m"), "out");
  return p;
}

Topology counting_topology() {
  Topology t;
  t.add_spout("words");
  t.add_bolt("count", bolts::count(), BoltOptions{ConsumePolicy::kFromAny, bolts::default_state("count"), 1, false});
  t.connect("words", "count");
  return t;
}

bool sends_interleave(const Trace& t, const std::string& a, const std::string& b) {
  // some Send of b lies strictly between two Sends of a
  std::optional<std::uint64_t> first_a;
  std::optional<std::uint64_t> last_a;
  for (const auto& e : t) {
    if (e.kind == TraceKind::kSend && e.actor == a && e.is_data_transfer()) {
      if (!first_a) first_a = e.seq;
      last_a = e.seq;
    }
  }
  if (!first_a) return false;
  for (const auto& e : t) {
    if (e.kind == TraceKind::kSend && e.actor == b && e.is_data_transfer() && e.seq > *first_a && e.seq < *last_a) {
      return true;
    }
  }
  return false;
}

}  // namespace

TEST(Firing, FromAllNeedsEveryInput) {
  const auto plan = plan_of(corpus::keyed_join(), ExecMode::kPipelined);
  const auto join = plan.find("join#2");
  ASSERT_TRUE(join.has_value());
  ActorInstance a(plan, *join);
  a.offer(0, Token::collection(Multiset{kv("k", 1)}));
  EXPECT_FALSE(a.can_fire());
  EXPECT_FALSE(a.try_fire().has_value());
  a.offer(1, Token::collection(Multiset{kv("k", 2)}));
  ASSERT_TRUE(a.can_fire());
  const auto r = a.try_fire();
  ASSERT_TRUE(r.has_value());
  ASSERT_EQ(r->emissions.size(), 1u);
  EXPECT_TRUE(bag_equal(r->emissions[0].token.collection(), Multiset{kv("k", Value::pair(1, 2))}));
  EXPECT_EQ(a.queued(0) + a.queued(1), 0u);
  EXPECT_FALSE(a.can_fire());
}

TEST(Firing, FromAnyTakesOneToken) {
  const auto plan = plan_of(corpus::from_any_merge(), ExecMode::kPipelined);
  const auto merge = plan.find("merge");
  ASSERT_TRUE(merge.has_value());
  ActorInstance a(plan, *merge);
  EXPECT_FALSE(a.can_fire());
  a.offer(1, Token::tuple(Record::unkeyed(Value(2))));
  const auto r = a.try_fire();
  ASSERT_TRUE(r.has_value());
  ASSERT_EQ(r->emissions.size(), 1u);
  EXPECT_EQ(r->emissions[0].token.tuple(), Record::unkeyed(Value(2)));
  a.offer(0, Token::tuple(Record::unkeyed(Value(5))));
  a.offer(1, Token::tuple(Record::unkeyed(Value(6))));
  ASSERT_TRUE(a.try_fire().has_value());
  EXPECT_EQ(a.queued(0) + a.queued(1), 1u);
}

TEST(State, CheckpointRestoreContinuesLeftFold) {
  const auto plan = plan_of(counting_topology(), ExecMode::kPipelined);
  const std::size_t id = *plan.find("count");
  ActorInstance fresh(plan, id);
  EXPECT_EQ(fresh.checkpoint_state(), *bolts::default_state("count"));

  ActorInstance a(plan, id);
  for (int i = 0; i < 2; ++i) {
    a.offer(0, Token::tuple(Record::unkeyed(Value("a"))));
    ASSERT_TRUE(a.try_fire().has_value());
  }
  const Value saved = a.checkpoint_state();
  EXPECT_EQ(ops::StateTable::decode(saved, Value(0)).get(Value("a")), Value(2));

  ActorInstance b(plan, id);
  b.restore_state(saved);
  b.offer(0, Token::tuple(Record::unkeyed(Value("a"))));
  const auto r = b.try_fire();
  ASSERT_TRUE(r.has_value());
  ASSERT_EQ(r->emissions.size(), 1u);
  EXPECT_EQ(r->emissions[0].token.tuple(), kv("a", 3));

  // the original continues identically
  a.offer(0, Token::tuple(Record::unkeyed(Value("a"))));
  EXPECT_EQ(a.try_fire()->emissions[0].token.tuple(), kv("a", 3));
}

TEST(State, StatelessActorRejectsCheckpoint) {
  const auto plan = plan_of(corpus::from_any_merge(), ExecMode::kPipelined);
  ActorInstance a(plan, *plan.find("merge"));
  try {
    (void)a.checkpoint_state();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kInvalidArgument);
  }
  EXPECT_THROW(a.restore_state(Value(0)), Error);
}

TEST(Scheduled, RoundRobinAssignsTaskModuloWorkers) {
  const auto plan = plan_of(corpus::wordcount(), ExecMode::kPipelined, 4);
  const auto in = corpus::find("wordcount")->generate(3);
  for (std::size_t workers : {1u, 2u, 3u, 4u}) {
    RunConfig cfg;
    cfg.workers = workers;
    cfg.dispatch = Dispatch::kRoundRobin;
    const auto res = run_scheduled(plan, in, cfg);
    std::size_t starts = 0;
    for (const auto& e : res.trace) {
      if (e.kind != TraceKind::kTaskStart) continue;
      ++starts;
      ASSERT_TRUE(e.task && e.worker);
      EXPECT_EQ(static_cast<std::uint64_t>(*e.worker), *e.task % workers);
    }
    EXPECT_GT(starts, 0u);
  }
}

TEST(Scheduled, SingleWorkerSerializes) {
  for (const auto& entry : corpus::all()) {
    if (entry.name == "halving-iteration") continue;
    const auto plan = plan_of(entry.program, ExecMode::kPipelined, 3);
    const auto in = entry.generate(5);
    RunConfig cfg;
    const auto res = run_scheduled(plan, in, cfg);
    std::optional<std::uint64_t> open;
    for (const auto& e : res.trace) {
      if (e.kind == TraceKind::kTaskStart) {
        EXPECT_FALSE(open.has_value()) << entry.name;
        open = e.task;
      } else if (e.kind == TraceKind::kTaskEnd) {
        EXPECT_EQ(open, e.task) << entry.name;
        open.reset();
      }
    }
    EXPECT_TRUE(bag_equal(res.outputs, reference_outputs(entry.program, in))) << entry.name;
  }
}

TEST(Scheduled, BspStagesDoNotOverlap) {
  const auto plan = plan_of(corpus::wordcount(), ExecMode::kBsp, 4);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    RunConfig cfg;
    cfg.workers = 4;
    cfg.seed = seed;
    cfg.dispatch = seed % 2 ? Dispatch::kOnDemand : Dispatch::kRoundRobin;
    const auto in = corpus::find("wordcount")->generate(seed);
    const auto res = run_scheduled(plan, in, cfg);
    EXPECT_TRUE(trace_checks::bsp_barrier(res.trace).empty());
    // direct oracle: per round, last stage-0 TaskEnd precedes first stage-1 TaskStart
    std::map<std::uint64_t, std::pair<std::uint64_t, std::uint64_t>> by_round;  // round -> (max end s0, min start s1)
    for (const auto& e : res.trace) {
      if (!e.stage) continue;
      auto& span = by_round.try_emplace(e.round.value_or(0), 0, UINT64_MAX).first->second;
      if (e.kind == TraceKind::kTaskEnd && *e.stage == 0) span.first = std::max(span.first, e.seq);
      if (e.kind == TraceKind::kTaskStart && *e.stage == 1) span.second = std::min(span.second, e.seq);
    }
    for (const auto& [round, span] : by_round) {
      if (span.second != UINT64_MAX) { EXPECT_LT(span.first, span.second) << "round " << round; }
    }
    EXPECT_TRUE(bag_equal(res.outputs, reference_outputs(corpus::wordcount(), in)));
  }
}

TEST(Process, PipelineOverlapsWithTwoExecutors) {
  const auto plan = plan_of(two_actor_pipeline(), ExecMode::kPipelined);
  bool overlapped = false;
  for (std::uint64_t seed = 1; seed <= 20 && !overlapped; ++seed) {
    RunConfig cfg;
    cfg.workers = 2;
    cfg.seed = seed;
    cfg.jitter_us = seed > 5 ? 50 : 0;
    const auto res = run_process_based(plan, Inputs{{"in", numbers(100)}}, cfg);
    ASSERT_EQ(res.outputs.at("out").records().size(), 100u);
    overlapped = sends_interleave(res.trace, "in", "m") || trace_checks::pipelining_witness(res.trace, "m", "out");
  }
  EXPECT_TRUE(overlapped);
}

TEST(Process, SingleActorIsPlainEvaluation) {
  LogicalProgram p;
  p.sink(p.source("in"), "out");
  const auto res = run_process_based(plan_of(p, ExecMode::kPipelined), Inputs{{"in", numbers(10)}}, RunConfig{});
  EXPECT_EQ(res.outputs.at("out").records(), numbers(10));
}

TEST(Process, FromAnyMergeDeliversEveryTokenOnce) {
  const auto entry = *corpus::find("from-any-merge");
  const auto plan = plan_of(entry.program, ExecMode::kPipelined);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto in = entry.generate(seed);
    RunConfig cfg;
    cfg.workers = 3;
    cfg.seed = seed;
    const auto res = run_process_based(plan, in, cfg);
    Multiset expected;
    for (const auto& name : {"left", "right"}) {
      for (const auto& r : std::get<std::vector<Record>>(in.at(name))) expected.add(r);
    }
    EXPECT_TRUE(bag_equal(res.outputs.at("merge.out").bag(), expected));
  }
}

TEST(Runtime, TracesKeepFifoAndConservation) {
  std::mt19937_64 rng(77);
  for (const auto& entry : corpus::all()) {
    for (RuntimeKind kind : {RuntimeKind::kScheduled, RuntimeKind::kProcess}) {
      for (ExecMode mode : {ExecMode::kBsp, ExecMode::kPipelined}) {
        const auto plan = plan_of(entry.program, mode, 3);
        RunConfig cfg;
        cfg.runtime = kind;
        cfg.workers = 1 + rng() % 4;
        cfg.seed = rng();
        const auto in = entry.generate(rng());
        const auto res = run(plan, in, cfg);
        EXPECT_TRUE(trace_checks::fifo(res.trace).empty()) << entry.name;
        EXPECT_TRUE(trace_checks::conservation(res.trace).empty()) << entry.name;
        EXPECT_TRUE(trace_checks::supersteps(res.trace).empty()) << entry.name;
        std::uint64_t prev = 0;
        for (std::size_t i = 0; i < res.trace.size(); ++i) {
          if (i) { EXPECT_GT(res.trace[i].seq, prev); }
          prev = res.trace[i].seq;
        }
        EXPECT_TRUE(bag_equal(res.outputs, reference_outputs(entry.program, in)))
            << entry.name << " " << to_string(kind) << " " << to_string(mode);
      }
    }
  }
}

TEST(Runtime, FromAllTasksReceiveFromEveryInput) {
  const auto plan = plan_of(corpus::keyed_join(), ExecMode::kPipelined, 2);
  const auto res = run(plan, corpus::find("keyed-join")->generate(9), RunConfig{4, Dispatch::kOnDemand, 9});
  std::map<std::uint64_t, std::string> task_actor;
  for (const auto& e : res.trace) {
    if (e.kind == TraceKind::kTaskStart && e.task) task_actor[*e.task] = e.actor;
  }
  for (const auto& [task, n] : trace_checks::receives_per_task(res.trace)) {
    const auto& a = plan.actors[*plan.find(task_actor.at(task))];
    if (a.consume == ConsumePolicy::kFromAll) { EXPECT_EQ(n, a.data_inputs().size()) << a.label; }
  }
}

TEST(Runtime, FromAnyTasksReceiveExactlyOne) {
  const auto plan = plan_of(corpus::from_any_merge(), ExecMode::kPipelined);
  const auto merge = *plan.find("merge");
  const auto res = run(plan, corpus::find("from-any-merge")->generate(4), RunConfig{2, Dispatch::kOnDemand, 4});
  std::set<std::uint64_t> merge_tasks;
  for (const auto& e : res.trace) {
    if (e.kind == TraceKind::kTaskStart && e.actor == plan.actors[merge].label) merge_tasks.insert(*e.task);
  }
  const auto per_task = trace_checks::receives_per_task(res.trace);
  for (auto t : merge_tasks) EXPECT_EQ(per_task.at(t), 1u);
}

TEST(Runtime, KernelFailureIdentifiesTask) {
  LogicalProgram p(ProgramMode::kTupleStream);
  const auto boom = make_map("boom", [](const Record& r) {
    if (r.payload.as_int() == 13) throw std::runtime_error("unlucky");
    return r;
  });
  p.sink(p.map(p.source("in"), boom, "boom"), "out");
  const auto plan = plan_of(p, ExecMode::kPipelined);
  for (RuntimeKind kind : {RuntimeKind::kScheduled, RuntimeKind::kProcess}) {
    RunConfig cfg;
    cfg.runtime = kind;
    cfg.workers = 2;
    try {
      run(plan, Inputs{{"in", numbers(40)}}, cfg);
      FAIL() << "run should abort";
    } catch (const RunAborted& e) {
      EXPECT_EQ(e.kind(), ErrorKind::kRuntimeAbort);
      EXPECT_EQ(e.actor(), "boom");
      EXPECT_NE(e.cause().find("unlucky"), std::string::npos);
      bool found = false;
      for (const auto& ev : e.trace()) {
        if (ev.kind == TraceKind::kTaskEnd && ev.task == e.task()) {
          found = true;
          EXPECT_EQ(ev.actor, "boom");
          EXPECT_NE(ev.detail.find("unlucky"), std::string::npos);
        }
      }
      EXPECT_TRUE(found);
    }
  }
}

TEST(Runtime, BoundedChannelsKeepSemantics) {
  for (const auto& entry : corpus::all()) {
    const auto plan = plan_of(entry.program, ExecMode::kPipelined, 2);
    const auto in = entry.generate(12);
    for (RuntimeKind kind : {RuntimeKind::kScheduled, RuntimeKind::kProcess}) {
      RunConfig cfg;
      cfg.runtime = kind;
      cfg.workers = 3;
      cfg.channel_capacity = 1;
      const auto res = run(plan, in, cfg);
      EXPECT_TRUE(bag_equal(res.outputs, reference_outputs(entry.program, in))) << entry.name;
      EXPECT_TRUE(trace_checks::basic(res.trace).empty()) << entry.name;
    }
  }
}

TEST(Runtime, BoundedFeedbackLoopReportsDeadlock) {
  // Every activation sends two tokens around a self-loop of capacity 1.
  BoltKernel twice{"twice", [](const std::vector<BoltInput>& in, Emitter& out, Value&) {
                     for (const auto& i : in) {
                       const auto v = i.record.payload.as_int();
                       if (v > 0) {
                         out.emit_to(0, Record::unkeyed(Value(v - 1)));
                         out.emit_to(0, Record::unkeyed(Value(v - 1)));
                       } else {
                         out.emit_to(1, i.record);
                       }
                     }
                   },
                   std::nullopt};
  Topology t;
  t.add_spout("s");
  t.add_bolt("loop", twice, BoltOptions{ConsumePolicy::kFromAny, std::nullopt, 1, true});
  t.add_bolt("done", bolts::identity());
  t.connect("s", "loop");
  t.connect("loop", "loop");
  t.connect("loop", "done");
  const auto plan = plan_of(t, ExecMode::kPipelined);
  const Inputs in{{"s", std::vector<Record>{Record::unkeyed(Value(6))}}};

  RunConfig unbounded;
  unbounded.workers = 2;
  EXPECT_EQ(run(plan, in, unbounded).outputs.at("done.out").records().size(), 64u);

  for (RuntimeKind kind : {RuntimeKind::kScheduled, RuntimeKind::kProcess}) {
    RunConfig cfg;
    cfg.runtime = kind;
    cfg.workers = 2;
    cfg.channel_capacity = 1;
    cfg.watchdog_ms = 2000;
    try {
      run(plan, in, cfg);
      FAIL() << "bounded loop should not drain";
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::kDeadlock) << e.what();
    }
  }
}

TEST(Runtime, IterationRunsFourSupersteps) {
  const auto plan = plan_of(corpus::halving_iteration(), ExecMode::kBsp);
  for (RuntimeKind kind : {RuntimeKind::kScheduled, RuntimeKind::kProcess}) {
    RunConfig cfg;
    cfg.runtime = kind;
    cfg.workers = 4;
    const auto res = run(plan, Inputs{{"values", std::vector<Record>{Record::unkeyed(Value(8))}}}, cfg);
    const auto out = res.outputs.at("result").records();
    ASSERT_EQ(out.size(), 1u);
    EXPECT_DOUBLE_EQ(out[0].payload.as_number(), 0.5);
    EXPECT_EQ(res.stats.supersteps, 4u);
    EXPECT_EQ(trace_checks::superstep_count(res.trace, "halving"), 4u);
    EXPECT_TRUE(trace_checks::supersteps(res.trace).empty());
  }
}

TEST(Runtime, KahnDeterminismWithoutFromAny) {
  const auto entry = *corpus::find("map-reduce");
  const auto in = entry.generate(8);
  std::optional<std::string> first;
  for (std::size_t workers : {1u, 2u, 4u}) {
    for (Dispatch d : {Dispatch::kRoundRobin, Dispatch::kOnDemand}) {
      for (std::uint64_t seed : {1u, 2u}) {
        const auto plan = plan_of(entry.program, ExecMode::kPipelined, 4);
        RunConfig cfg;
        cfg.workers = workers;
        cfg.dispatch = d;
        cfg.seed = seed;
        const auto res = run(plan, in, cfg);
        ASSERT_FALSE(plan.has_from_any());
        std::string enc;
        for (const auto& [name, out] : res.outputs) enc += name + ":" + encode_tokens(out.tokens);
        if (!first) first = enc;
        EXPECT_EQ(enc, *first);
      }
    }
  }
}

TEST(Runtime, MapWithStateMatchesPerKeyFold) {
  std::mt19937_64 rng(5);
  LogicalProgram p(ProgramMode::kTupleStream);
  p.sink(p.map_with_state(p.source("in"), kernels::lookup("running_sum"), Value(0)), "out");
  const auto plan = plan_of(p, ExecMode::kPipelined, 4);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Record> stream;
    for (std::size_t i = 0; i < rng() % 60; ++i) {
      stream.push_back(Record::keyed(Value("k" + std::to_string(rng() % 4)), Value(static_cast<int>(rng() % 10))));
    }
    std::map<Value, std::int64_t> acc;
    std::map<Value, std::vector<Record>> expected;
    for (const auto& r : stream) {
      acc[*r.key] += r.payload.as_int();
      expected[*r.key].push_back(Record::keyed(*r.key, Value(acc[*r.key])));
    }
    RunConfig cfg;
    cfg.workers = 3;
    cfg.seed = rng();
    const auto res = run(plan, Inputs{{"in", stream}}, cfg);
    std::map<Value, std::vector<Record>> got;
    for (const auto& t : res.outputs.at("out").tokens) got[*t.tuple().key].push_back(t.tuple());
    EXPECT_EQ(got, expected);
  }
}
