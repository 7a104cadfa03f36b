// Copyright (c) 2026 the rpmesh authors
// Distributed under the MIT license, see LICENSE.
#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "rpmesh/config.hpp"
#include "rpmesh/connlog.hpp"
#include "rpmesh/lists.hpp"
#include "rpmesh/rng.hpp"
#include "rpmesh/rp_adapter.hpp"
#include "rpmesh/time.hpp"
#include "rpmesh/vrp.hpp"

namespace rpmesh {

// Picks the TAL processing order for one validation cycle. On a node's very
// first cycle the leading TAL is pinned to tals[node_index mod |tals|], so a
// freshly booted group spreads its initial load across the registries; the
// remainder of the order, and the whole order on later cycles, is a uniform
// shuffle.
inline std::vector<std::string> shuffle_tals(std::vector<std::string> tals,
                                             std::size_t node_index, bool first_run,
                                             std::mt19937_64& rng) {
  if (tals.size() < 2) return tals;
  if (first_run) {
    std::swap(tals[0], tals[node_index % tals.size()]);
    for (std::size_t i = tals.size() - 1; i > 1; --i) {
      const auto j = 1 + static_cast<std::size_t>(uniform_u64(rng, i));
      std::swap(tals[i], tals[j]);
    }
  } else {
    shuffle_in_place(tals, rng);
  }
  return tals;
}

// Supervises the relying party: runs validation cycles TAL by TAL, watches
// the connection log for crashes and stalling, maintains the local skiplist,
// and publishes the merged local VRP set at the end of each cycle.
//
// The monitor is driven by tick(now): each call performs at most one state
// transition (poll the relying party, or start the next cycle) and returns
// the instant at which it wants to run again. A simulation posts that to its
// scheduler; a live node sleeps until then.
class Monitor {
 public:
  enum class Phase { Idle, Validating, Sleeping };

  struct Hooks {
    std::function<void(const VrpSet&, TimePoint)> on_publish;
    std::function<void(const std::string&, SkipSource, TimePoint)> on_skiplist_add;
    std::function<void(const Skiplist&, TimePoint)> on_skiplist_change;
    std::function<void(TimePoint)> on_cycle_complete;
    std::function<void(const std::string&)> on_warning;
  };

  // The master_skiplist callback supplies the current voted skiplist; it is
  // re-queried at every TAL start so a mid-cycle vote update takes effect
  // immediately. May be empty (standalone monitor).
  Monitor(NodeConfig cfg, RpAdapter& adapter, DnsBook dnsbook,
          std::function<std::set<std::string>()> master_skiplist,
          std::mt19937_64 rng)
      : cfg_(std::move(cfg)),
        adapter_(adapter),
        dnsbook_(std::move(dnsbook)),
        master_skiplist_(std::move(master_skiplist)),
        rng_(rng) {}

  Hooks hooks;

  TimePoint tick(TimePoint now) {
    run_expiry(now);
    if (phase_ == Phase::Idle) {
      start_cycle(now);
    } else if (phase_ == Phase::Sleeping) {
      if (now >= next_cycle_at_) start_cycle(now);
    } else {
      step_validation(now);
    }
    return phase_ == Phase::Sleeping ? next_cycle_at_ : now + cfg_.status_poll;
  }

  Phase phase() const { return phase_; }
  const Skiplist& local_skiplist() const { return local_; }
  const VrpSet& published_vrps() const { return published_; }
  std::optional<TimePoint> published_at() const { return published_at_; }
  std::size_t cycles_completed() const { return cycles_; }
  std::optional<std::string> current_tal() const {
    if (phase_ == Phase::Validating && tal_idx_ < order_.size()) return order_[tal_idx_];
    return std::nullopt;
  }

  // The skiplist fed to the relying party: the voted master plus everything
  // this node has flagged locally. The local half keeps a node away from a
  // publication point that hurt it even before the vote catches up (and
  // after the master entry lapses, until its own entry expires too).
  std::set<std::string> validation_skiplist() const {
    std::set<std::string> skips = master_skiplist_ ? master_skiplist_() : std::set<std::string>{};
    for (const auto& d : local_.domains()) skips.insert(d);
    return skips;
  }

 private:
  struct TalResult {
    VrpSet vrps;
    TimePoint succeeded_at{};
  };

  void start_cycle(TimePoint now) {
    order_ = shuffle_tals(cfg_.tals, cfg_.node_index, first_run_, rng_);
    first_run_ = false;
    tal_idx_ = 0;
    cycle_started_at_ = now;
    if (!cfg_.tal_cache) retained_.clear();
    phase_ = Phase::Validating;
    start_next_tal(now);
  }

  void start_next_tal(TimePoint now) {
    while (tal_idx_ < order_.size()) {
      try {
        handle_ = adapter_.start_validation(order_[tal_idx_], validation_skiplist(), now);
        return;
      } catch (const std::exception& e) {
        warn("validation start failed for " + order_[tal_idx_] + ": " + e.what());
        ++tal_idx_;  // treated like a nonzero exit with nothing to inspect
      }
    }
    finish_cycle(now);
  }

  void step_validation(TimePoint now) {
    if (!handle_) {
      start_next_tal(now);
      return;
    }
    if (handle_->poll(now) == RpHandle::Status::Running) {
      std::vector<std::string> warns;
      const auto stalled = detect_stalling(handle_->log_at(now), dnsbook_, now,
                                           cfg_.consensus, &warns);
      emit(warns);
      if (!stalled.empty()) {
        handle_->kill(now);
        add_domains(stalled, now, SkipSource::Stall);
        // Reaped on a later poll; an external process needs a moment to die.
      }
      return;
    }
    auto outcome = handle_->collect(now);
    handle_.reset();
    const std::string tal = order_[tal_idx_];
    if (!outcome.killed && outcome.exit_status && *outcome.exit_status == 0) {
      retained_[tal] = TalResult{std::move(outcome.vrps), now};
    } else if (!outcome.killed) {
      std::vector<std::string> warns;
      const auto dead = detect_crash(outcome.log, dnsbook_, &warns);
      emit(warns);
      add_domains(dead, now, SkipSource::Crash);
    }
    ++tal_idx_;
    start_next_tal(now);
  }

  void finish_cycle(TimePoint now) {
    VrpSet out;
    for (auto it = retained_.begin(); it != retained_.end();) {
      if (cfg_.tal_cache &&
          now - it->second.succeeded_at > cfg_.consensus.staleness_tolerance) {
        it = retained_.erase(it);
        continue;
      }
      out.merge(it->second.vrps);
      ++it;
    }
    published_ = std::move(out);
    published_at_ = now;
    ++cycles_;
    if (hooks.on_publish) hooks.on_publish(published_, now);
    if (hooks.on_cycle_complete) hooks.on_cycle_complete(now);
    next_cycle_at_ = now + cfg_.refresh_interval;
    phase_ = Phase::Sleeping;
  }

  void add_domains(const std::vector<std::string>& domains, TimePoint now,
                   SkipSource source) {
    if (domains.empty()) return;
    update_skiplist(local_, domains, now, source);
    if (hooks.on_skiplist_add)
      for (const auto& d : domains) hooks.on_skiplist_add(d, source, now);
    if (hooks.on_skiplist_change) hooks.on_skiplist_change(local_, now);
  }

  void run_expiry(TimePoint now) {
    const auto before = local_.entries.size();
    expire_skiplist(local_, now, cfg_.consensus.blacklist_expiry);
    if (local_.entries.size() != before && hooks.on_skiplist_change)
      hooks.on_skiplist_change(local_, now);
  }

  void emit(const std::vector<std::string>& warns) {
    for (const auto& w : warns) warn(w);
  }
  void warn(const std::string& w) {
    if (hooks.on_warning) hooks.on_warning(w);
  }

  NodeConfig cfg_;
  RpAdapter& adapter_;
  DnsBook dnsbook_;
  std::function<std::set<std::string>()> master_skiplist_;
  std::mt19937_64 rng_;

  Phase phase_ = Phase::Idle;
  bool first_run_ = true;
  std::vector<std::string> order_;
  std::size_t tal_idx_ = 0;
  TimePoint cycle_started_at_{};
  TimePoint next_cycle_at_{};
  std::unique_ptr<RpHandle> handle_;
  std::map<std::string, TalResult> retained_;
  Skiplist local_;
  VrpSet published_;
  std::optional<TimePoint> published_at_;
  std::size_t cycles_ = 0;
};

}  // namespace rpmesh
