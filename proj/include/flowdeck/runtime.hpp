#pragma once

#include <chrono>
#include <condition_variable>
#include <deque>
#include <exception>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "flowdeck/network.hpp"

namespace flowdeck {

namespace detail {

struct Completion {
  Task task;
  std::optional<FireResult> result;
  std::string error;
  std::exception_ptr nested;
  std::int64_t worker = -1;
};

/// Runs one firing outside any lock, logging TaskStart/TaskEnd.
inline Completion execute_task(Network& net, Task task, std::int64_t worker) {
  Completion c;
  c.worker = worker;
  net.log_task(TraceKind::kTaskStart, task, worker);
  if (task.sleep_us) std::this_thread::sleep_for(std::chrono::microseconds(task.sleep_us));
  try {
    c.result = net.plan().actors[task.actor].behavior->fire(task.ctx);
  } catch (const RunAborted& e) {
    c.error = e.what();
    c.nested = std::current_exception();
  } catch (const std::exception& e) {
    c.error = e.what();
  }
  net.log_task(TraceKind::kTaskEnd, task, worker, c.error.empty() ? std::string() : "error: " + c.error);
  c.task = std::move(task);
  return c;
}

[[noreturn]] inline void abort_with(const Network& net, const Completion& c, TraceCollector& trace) {
  if (c.nested) std::rethrow_exception(c.nested);
  throw RunAborted(net.label(c.task.actor), c.task.id, c.error, trace.events());
}

[[noreturn]] inline void throw_stuck(const Network& net) {
  const auto [kind, message] = net.stuck_reason();
  fail(kind, message);
}

/// Master-worker execution: the calling thread owns the network and hands
/// ready firings to worker threads.
inline Outputs execute_scheduled(const ExecutionPlan& plan, const Inputs& inputs, const RunConfig& cfg,
                                 TraceCollector& trace, const RunScope& scope, RunStats& stats) {
  SubplanRunner runner = [&cfg, &trace](const ExecutionPlan& p, const Inputs& in, const RunScope& s) {
    RunStats inner;
    return execute_scheduled(p, in, cfg, trace, s, inner);
  };
  Network net(plan, inputs, cfg, trace, scope, runner);
  const std::size_t n = std::max<std::size_t>(1, cfg.workers);
  const bool round_robin = cfg.dispatch == Dispatch::kRoundRobin;

  std::mutex mu;
  std::condition_variable work_cv;
  std::condition_variable done_cv;
  std::vector<std::deque<Task>> queues(round_robin ? n : 1);
  std::deque<Completion> completions;
  bool stop = false;

  auto worker_main = [&](std::size_t w) {
    auto& q = queues[round_robin ? w : 0];
    for (;;) {
      Task task;
      {
        std::unique_lock<std::mutex> lk(mu);
        work_cv.wait(lk, [&] { return stop || !q.empty(); });
        if (stop) return;
        task = std::move(q.front());
        q.pop_front();
      }
      Completion c = execute_task(net, std::move(task), static_cast<std::int64_t>(w));
      {
        std::lock_guard<std::mutex> lk(mu);
        completions.push_back(std::move(c));
      }
      done_cv.notify_one();
    }
  };

  std::vector<std::thread> threads;
  threads.reserve(n);
  for (std::size_t w = 0; w < n; ++w) threads.emplace_back(worker_main, w);
  auto shutdown = [&] {
    {
      std::lock_guard<std::mutex> lk(mu);
      stop = true;
    }
    work_cv.notify_all();
    for (auto& t : threads) t.join();
  };

  std::size_t running = 0;
  std::uint64_t dispatched = 0;
  try {
    for (;;) {
      std::deque<Completion> batch;
      {
        std::lock_guard<std::mutex> lk(mu);
        batch.swap(completions);
      }
      for (auto& c : batch) {
        --running;
        if (!c.error.empty()) abort_with(net, c, trace);
        try {
          net.complete(c.task, std::move(*c.result), c.worker);
        } catch (const std::exception& e) {
          c.error = e.what();
          abort_with(net, c, trace);
        }
      }
      bool progress = true;
      while (progress) {
        progress = false;
        net.close_ready();
        for (std::size_t a = 0; a < plan.actors.size(); ++a) {
          const std::size_t w = round_robin ? dispatched % n : 0;
          auto task = net.take(a, round_robin ? static_cast<std::int64_t>(w) : -1);
          if (!task) continue;
          {
            std::lock_guard<std::mutex> lk(mu);
            queues[w].push_back(std::move(*task));
          }
          work_cv.notify_all();
          ++running;
          ++dispatched;
          progress = true;
        }
        if (net.drain_blocked(-1)) progress = true;
      }
      if (running == 0) {
        if (net.close_loop_actors()) continue;
        if (net.all_closed()) break;
        throw_stuck(net);
      }
      std::unique_lock<std::mutex> lk(mu);
      while (completions.empty()) {
        const std::size_t seen = trace.size();
        if (cfg.watchdog_ms == 0) {
          done_cv.wait(lk, [&] { return !completions.empty(); });
        } else if (!done_cv.wait_for(lk, std::chrono::milliseconds(cfg.watchdog_ms),
                                     [&] { return !completions.empty(); }) &&
                   trace.size() == seen) {
          fail(ErrorKind::kDeadlock, "watchdog: no progress for " + std::to_string(cfg.watchdog_ms) + " ms");
        }
      }
    }
  } catch (...) {
    shutdown();
    throw;
  }
  shutdown();
  stats.tasks += net.tasks();
  stats.supersteps += net.supersteps();
  return net.take_outputs();
}

/// Process-per-actor execution: executors pick runnable actors, fire them
/// repeatedly and deliver straight into consumer queues.
inline Outputs execute_process(const ExecutionPlan& plan, const Inputs& inputs, const RunConfig& cfg,
                               TraceCollector& trace, const RunScope& scope, RunStats& stats) {
  constexpr int kBurst = 16;
  SubplanRunner runner = [&cfg, &trace](const ExecutionPlan& p, const Inputs& in, const RunScope& s) {
    RunStats inner;
    return execute_process(p, in, cfg, trace, s, inner);
  };
  Network net(plan, inputs, cfg, trace, scope, runner);
  const std::size_t n = std::max<std::size_t>(1, cfg.workers);
  const bool bounded = net.bounded();

  std::mutex mu;
  std::condition_variable cv;
  std::condition_variable main_cv;
  std::deque<std::size_t> runq;
  std::vector<char> queued(plan.actors.size(), 0);
  std::size_t active = 0;
  bool done = false;
  std::exception_ptr failure;
  std::uint64_t progress = 0;
  std::uint64_t epoch = net.wake_epoch();

  auto schedule = [&](std::size_t a) {
    if (queued[a] || !net.enabled(a)) return;
    queued[a] = 1;
    runq.push_back(a);
    cv.notify_one();
  };
  auto scan = [&] {
    for (std::size_t a = 0; a < plan.actors.size(); ++a) schedule(a);
  };
  auto finish = [&](std::exception_ptr err) {
    if (!failure) failure = err;
    done = true;
    cv.notify_all();
    main_cv.notify_all();
  };
  // Caller holds mu. Decides what happens once nothing is running.
  auto settle = [&] {
    if (done || active != 0 || !runq.empty()) return;
    net.close_ready();
    net.drain_blocked(-1);
    scan();
    if (runq.empty() && net.close_loop_actors()) scan();
    if (!runq.empty()) return;
    if (net.all_closed()) {
      finish(nullptr);
    } else {
      try {
        throw_stuck(net);
      } catch (...) {
        finish(std::current_exception());
      }
    }
  };

  auto executor = [&](std::size_t e) {
    const auto worker = static_cast<std::int64_t>(e);
    std::unique_lock<std::mutex> lk(mu);
    for (;;) {
      cv.wait(lk, [&] { return done || !runq.empty(); });
      if (done) return;
      const std::size_t a = runq.front();
      runq.pop_front();
      ++active;
      for (int k = 0; k < kBurst && !done; ++k) {
        auto task = net.take(a, worker);
        if (!task) break;
        if (bounded) scan();
        lk.unlock();
        Completion c = execute_task(net, std::move(*task), worker);
        lk.lock();
        ++progress;
        if (done) break;
        try {
          if (!c.error.empty()) abort_with(net, c, trace);
          try {
            for (std::size_t t : net.complete(c.task, std::move(*c.result), worker)) schedule(t);
          } catch (const RunAborted&) {
            throw;
          } catch (const std::exception& ex) {
            c.error = ex.what();
            abort_with(net, c, trace);
          }
        } catch (...) {
          finish(std::current_exception());
          break;
        }
        for (std::size_t t : net.close_ready()) schedule(t);
        if (net.drain_blocked(worker) || bounded || net.wake_epoch() != epoch) {
          epoch = net.wake_epoch();
          scan();
        }
      }
      queued[a] = 0;
      if (!done) schedule(a);
      --active;
      settle();
    }
  };

  std::vector<std::thread> threads;
  {
    std::unique_lock<std::mutex> lk(mu);
    scan();
    settle();
  }
  threads.reserve(n);
  for (std::size_t e = 0; e < n; ++e) threads.emplace_back(executor, e);
  {
    std::unique_lock<std::mutex> lk(mu);
    while (!done) {
      const std::uint64_t seen = progress;
      const std::size_t events = trace.size();
      if (cfg.watchdog_ms == 0) {
        main_cv.wait(lk, [&] { return done; });
      } else if (!main_cv.wait_for(lk, std::chrono::milliseconds(cfg.watchdog_ms), [&] { return done; }) &&
                 progress == seen && trace.size() == events) {
        try {
          fail(ErrorKind::kDeadlock, "watchdog: no progress for " + std::to_string(cfg.watchdog_ms) + " ms");
        } catch (...) {
          finish(std::current_exception());
        }
      }
    }
  }
  for (auto& t : threads) t.join();
  if (failure) std::rethrow_exception(failure);
  stats.tasks += net.tasks();
  stats.supersteps += net.supersteps();
  return net.take_outputs();
}

}  // namespace detail

/// Runs a plan to completion and returns sink outputs with the full trace.
inline RunResult run(const ExecutionPlan& plan, const Inputs& inputs, const RunConfig& cfg) {
  TraceCollector trace;
  RunResult r;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    r.outputs = cfg.runtime == RuntimeKind::kScheduled
                    ? detail::execute_scheduled(plan, inputs, cfg, trace, {}, r.stats)
                    : detail::execute_process(plan, inputs, cfg, trace, {}, r.stats);
  } catch (const RunAborted& e) {
    throw e.with_trace(trace.events());
  }
  r.stats.wall_ns =
      std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - t0).count();
  r.trace = trace.events();
  return r;
}

inline RunResult run_scheduled(const ExecutionPlan& plan, const Inputs& inputs, RunConfig cfg) {
  cfg.runtime = RuntimeKind::kScheduled;
  return run(plan, inputs, cfg);
}

inline RunResult run_process_based(const ExecutionPlan& plan, const Inputs& inputs, RunConfig cfg) {
  cfg.runtime = RuntimeKind::kProcess;
  return run(plan, inputs, cfg);
}

}  // namespace flowdeck
