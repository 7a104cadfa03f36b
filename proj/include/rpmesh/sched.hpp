// Copyright (c) 2026 the rpmesh authors
// Distributed under the MIT license, see LICENSE.
#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <tuple>
#include <utility>

#include "rpmesh/time.hpp"

namespace rpmesh {

// Deterministic discrete-event executor over a virtual clock.
//
// Tasks are ordered by (time, lane, sequence number): tasks due at the same
// instant run in ascending lane order, ties broken by insertion order. Node
// work runs on lane 0; observers that must see the state left behind by all
// node work at an instant (metrics samplers, assertions) use lane 1.
class Scheduler {
 public:
  explicit Scheduler(TimePoint start = kSimEpoch) : now_(start) {}

  TimePoint now() const { return now_; }

  // Schedules fn; a time in the past runs at the current instant, after
  // everything already queued there.
  void post(TimePoint at, int lane, std::function<void()> fn) {
    if (at < now_) at = now_;
    tasks_.emplace(Key{at, lane, seq_++}, std::move(fn));
  }

  void post_in(Duration d, int lane, std::function<void()> fn) {
    post(now_ + d, lane, std::move(fn));
  }

  // Runs the next task, advancing the clock to it. False when idle.
  bool step() {
    if (tasks_.empty()) return false;
    auto node = tasks_.extract(tasks_.begin());
    now_ = std::get<0>(node.key());
    node.mapped()();
    return true;
  }

  // Runs every task due at or before `until`, including tasks they enqueue
  // inside the window, then advances the clock to `until`.
  void run_until(TimePoint until) {
    while (!tasks_.empty() && std::get<0>(tasks_.begin()->first) <= until) step();
    if (now_ < until) now_ = until;
  }

  std::size_t pending() const { return tasks_.size(); }

 private:
  using Key = std::tuple<TimePoint, int, std::uint64_t>;

  TimePoint now_;
  std::uint64_t seq_ = 0;
  std::map<Key, std::function<void()>> tasks_;
};

}  // namespace rpmesh
