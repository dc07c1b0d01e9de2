#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace flowdeck {

enum class TraceKind {
  kTaskStart,
  kTaskEnd,
  kSend,
  kReceive,
  kBarrierEnter,
  kBarrierExit,
  kSuperstepBegin,
  kSuperstepEnd,
};

inline std::string_view to_string(TraceKind k) {
  switch (k) {
    case TraceKind::kTaskStart: return "TaskStart";
    case TraceKind::kTaskEnd: return "TaskEnd";
    case TraceKind::kSend: return "Send";
    case TraceKind::kReceive: return "Receive";
    case TraceKind::kBarrierEnter: return "BarrierEnter";
    case TraceKind::kBarrierExit: return "BarrierExit";
    case TraceKind::kSuperstepBegin: return "SuperstepBegin";
    case TraceKind::kSuperstepEnd: return "SuperstepEnd";
  }
  return "?";
}

inline std::optional<TraceKind> trace_kind_from_string(std::string_view s) {
  for (int i = 0; i <= static_cast<int>(TraceKind::kSuperstepEnd); ++i) {
    if (to_string(static_cast<TraceKind>(i)) == s) return static_cast<TraceKind>(i);
  }
  return std::nullopt;
}

struct TraceEvent {
  std::uint64_t seq = 0;
  std::int64_t wall_ns = 0;
  TraceKind kind = TraceKind::kTaskStart;
  std::string actor;
  std::string channel;
  std::optional<std::int64_t> worker;
  std::optional<std::int64_t> stage;
  std::optional<std::int64_t> superstep;
  std::optional<std::int64_t> tag;
  std::optional<std::uint64_t> task;
  // Position of the token on its channel (Send/Receive of data tokens).
  std::optional<std::uint64_t> token;
  // Per-actor firing index, recorded when tasks are gated round by round.
  std::optional<std::uint64_t> round;
  // "eos" / "state" for control traffic; free text on TaskEnd.
  std::string detail;

  bool is_data_transfer() const {
    return (kind == TraceKind::kSend || kind == TraceKind::kReceive) && detail.empty();
  }
};

using Trace = std::vector<TraceEvent>;

/// Thread-safe event sink. Sequence numbers and wall-clock stamps are taken
/// under one lock, so both orders agree.
class TraceCollector {
 public:
  TraceCollector() : start_(std::chrono::steady_clock::now()) {}

  std::uint64_t record(TraceEvent e) {
    std::lock_guard<std::mutex> lock(mu_);
    e.seq = events_.size();
    e.wall_ns = std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - start_).count();
    events_.push_back(std::move(e));
    return events_.back().seq;
  }

  Trace events() const {
    std::lock_guard<std::mutex> lock(mu_);
    return events_;
  }

  std::size_t size() const {
    std::lock_guard<std::mutex> lock(mu_);
    return events_.size();
  }

 private:
  mutable std::mutex mu_;
  std::chrono::steady_clock::time_point start_;
  Trace events_;
};

struct Violation {
  std::string invariant;
  std::string message;
};

namespace trace_checks {

/// Receive order equals send order on every channel.
inline std::vector<Violation> fifo(const Trace& t) {
  std::map<std::string, std::vector<std::uint64_t>> sent;
  std::map<std::string, std::uint64_t> received;
  std::vector<Violation> out;
  for (const auto& e : t) {
    if (!e.is_data_transfer() || !e.token) continue;
    if (e.kind == TraceKind::kSend) {
      sent[e.channel].push_back(*e.token);
    } else {
      auto& next = received[e.channel];
      const auto& s = sent[e.channel];
      if (next >= s.size()) {
        out.push_back({"fifo", "channel " + e.channel + ": receive of token " + std::to_string(*e.token) + " before it was sent"});
      } else if (s[next] != *e.token) {
        out.push_back({"fifo", "channel " + e.channel + ": received token " + std::to_string(*e.token) + ", expected " +
                                   std::to_string(s[next])});
      }
      ++next;
    }
  }
  return out;
}

/// #Send == #Receive per channel, data tokens only.
inline std::vector<Violation> conservation(const Trace& t) {
  std::map<std::string, std::pair<std::uint64_t, std::uint64_t>> counts;
  for (const auto& e : t) {
    if (!e.is_data_transfer()) continue;
    auto& c = counts[e.channel];
    (e.kind == TraceKind::kSend ? c.first : c.second) += 1;
  }
  std::vector<Violation> out;
  for (const auto& [ch, c] : counts) {
    if (c.first != c.second) {
      out.push_back({"conservation", "channel " + ch + ": " + std::to_string(c.first) + " sent, " +
                                         std::to_string(c.second) + " received"});
    }
  }
  return out;
}

/// In every scope, no task of a later (round, stage) starts before every
/// task of an earlier one ends. Tasks of nested runs are checked within
/// their own scope.
inline std::vector<Violation> bsp_barrier(const Trace& t) {
  struct Span {
    std::uint64_t min_start = std::numeric_limits<std::uint64_t>::max();
    std::uint64_t max_end = 0;
  };
  // scope -> (round, stage) -> span
  std::map<std::string, std::map<std::pair<std::uint64_t, std::int64_t>, Span>> spans;
  auto scope_of = [](const std::string& actor) {
    const auto slash = actor.rfind('/');
    return slash == std::string::npos ? std::string() : actor.substr(0, slash);
  };
  for (const auto& e : t) {
    if ((e.kind != TraceKind::kTaskStart && e.kind != TraceKind::kTaskEnd) || !e.stage) continue;
    auto& s = spans[scope_of(e.actor)][{e.round.value_or(0), *e.stage}];
    if (e.kind == TraceKind::kTaskStart) {
      s.min_start = std::min(s.min_start, e.seq);
    } else {
      s.max_end = std::max(s.max_end, e.seq);
    }
  }
  std::vector<Violation> out;
  for (const auto& [scope, by_key] : spans) {
    std::uint64_t prefix_end = 0;
    bool any = false;
    std::string prev;
    for (const auto& [key, span] : by_key) {
      const std::string name = "round " + std::to_string(key.first) + " stage " + std::to_string(key.second);
      if (any && span.min_start < prefix_end) {
        out.push_back({"bsp-barrier", (scope.empty() ? std::string() : scope + ": ") + name + " starts at seq " +
                                          std::to_string(span.min_start) + " before " + prev + " ended (seq " +
                                          std::to_string(prefix_end) + ")"});
      }
      prefix_end = std::max(prefix_end, span.max_end);
      prev = name;
      any = true;
    }
  }
  return out;
}

/// Supersteps of one driver are disjoint and in order, and every event of
/// the nested run for superstep n lies between SuperstepBegin(n) and
/// SuperstepEnd(n).
inline std::vector<Violation> supersteps(const Trace& t) {
  std::vector<Violation> out;
  // driver -> superstep -> [begin, end]
  std::map<std::string, std::map<std::int64_t, std::pair<std::uint64_t, std::uint64_t>>> spans;
  for (const auto& e : t) {
    if (!e.superstep) continue;
    if (e.kind == TraceKind::kSuperstepBegin) spans[e.actor][*e.superstep].first = e.seq;
    if (e.kind == TraceKind::kSuperstepEnd) spans[e.actor][*e.superstep].second = e.seq;
  }
  for (const auto& [driver, steps] : spans) {
    std::optional<std::uint64_t> prev_end;
    std::int64_t expected = 0;
    for (const auto& [n, span] : steps) {
      if (n != expected) out.push_back({"supersteps", driver + ": superstep " + std::to_string(n) + " out of sequence"});
      expected = n + 1;
      if (span.second < span.first) out.push_back({"supersteps", driver + ": superstep " + std::to_string(n) + " never ended"});
      if (prev_end && span.first < *prev_end) {
        out.push_back({"supersteps", driver + ": superstep " + std::to_string(n) + " overlaps the previous one"});
      }
      prev_end = span.second;
    }
  }
  for (const auto& e : t) {
    if (!e.superstep || e.kind == TraceKind::kSuperstepBegin || e.kind == TraceKind::kSuperstepEnd) continue;
    const auto at = e.actor.rfind('@');
    if (at == std::string::npos) continue;
    const std::string driver = e.actor.substr(0, at);
    auto it = spans.find(driver);
    if (it == spans.end()) continue;
    auto st = it->second.find(*e.superstep);
    if (st == it->second.end() || e.seq < st->second.first || e.seq > st->second.second) {
      out.push_back({"supersteps", e.actor + ": event seq " + std::to_string(e.seq) + " outside superstep " +
                                       std::to_string(*e.superstep)});
    }
  }
  return out;
}

/// Number of completed supersteps recorded for `driver`.
inline std::size_t superstep_count(const Trace& t, const std::string& driver) {
  std::size_t n = 0;
  for (const auto& e : t) {
    if (e.kind == TraceKind::kSuperstepEnd && e.actor == driver) ++n;
  }
  return n;
}

/// True when some task of `downstream` starts before the last task of
/// `upstream` ends.
inline bool pipelining_witness(const Trace& t, const std::string& upstream, const std::string& downstream) {
  std::optional<std::uint64_t> first_down_start;
  std::optional<std::uint64_t> last_up_end;
  for (const auto& e : t) {
    if (e.kind == TraceKind::kTaskStart && e.actor == downstream && !first_down_start) first_down_start = e.seq;
    if (e.kind == TraceKind::kTaskEnd && e.actor == upstream) last_up_end = e.seq;
  }
  return first_down_start && last_up_end && *first_down_start < *last_up_end;
}

/// Largest number of distinct tags whose tasks are running at one instant.
inline std::size_t max_concurrent_tags(const Trace& t) {
  std::map<std::uint64_t, std::int64_t> running_task_tag;
  std::map<std::int64_t, std::size_t> active;
  std::size_t best = 0;
  for (const auto& e : t) {
    if (!e.task || !e.tag) continue;
    if (e.kind == TraceKind::kTaskStart) {
      running_task_tag[*e.task] = *e.tag;
      ++active[*e.tag];
      best = std::max(best, active.size());
    } else if (e.kind == TraceKind::kTaskEnd) {
      auto it = running_task_tag.find(*e.task);
      if (it == running_task_tag.end()) continue;
      if (--active[it->second] == 0) active.erase(it->second);
      running_task_tag.erase(it);
    }
  }
  return best;
}

/// Data receives per task id.
inline std::map<std::uint64_t, std::size_t> receives_per_task(const Trace& t) {
  std::map<std::uint64_t, std::size_t> out;
  for (const auto& e : t) {
    if (e.kind == TraceKind::kReceive && e.is_data_transfer() && e.task) ++out[*e.task];
  }
  return out;
}

inline std::vector<Violation> basic(const Trace& t) {
  auto out = fifo(t);
  for (auto& v : conservation(t)) out.push_back(std::move(v));
  for (auto& v : supersteps(t)) out.push_back(std::move(v));
  return out;
}

}  // namespace trace_checks
}  // namespace flowdeck
