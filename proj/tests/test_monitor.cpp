// Copyright (c) 2026 the rpmesh authors
// Distributed under the MIT license, see LICENSE.
#include <catch2/catch_amalgamated.hpp>

#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "rpmesh/monitor.hpp"
#include "rpmesh/rng.hpp"
#include "rpmesh/sim_rpki.hpp"
#include "support/oracles.hpp"

using namespace rpmesh;

namespace {

// Scripted relying party: every start_validation returns a handle that is
// already finished, with the next outcome from the per-TAL script. Records
// the skiplist each run was given.
struct ScriptedAdapter : RpAdapter {
  struct Step {
    int exit_status = 0;
    VrpSet vrps;
    ConnectionLog log;
    bool throw_on_start = false;
  };

  std::map<std::string, std::vector<Step>> script;
  std::map<std::string, std::size_t> calls;
  std::vector<std::set<std::string>> skiplists_seen;

  struct DoneHandle : RpHandle {
    ValidationOutcome out;
    std::string tal() const override { return out.tal; }
    TimePoint started_at() const override { return out.started_at; }
    Status poll(TimePoint) override { return Status::Exited; }
    void kill(TimePoint) override {}
    ConnectionLog log_at(TimePoint) override { return out.log; }
    ValidationOutcome collect(TimePoint) override { return out; }
  };

  std::unique_ptr<RpHandle> start_validation(const std::string& tal,
                                             const std::set<std::string>& skips,
                                             TimePoint now) override {
    skiplists_seen.push_back(skips);
    Step step;  // default: clean success, empty set
    auto it = script.find(tal);
    if (it != script.end() && !it->second.empty()) {
      const auto idx = std::min(calls[tal], it->second.size() - 1);
      step = it->second[idx];
    }
    ++calls[tal];
    if (step.throw_on_start) throw std::runtime_error("no binary for " + tal);
    auto h = std::make_unique<DoneHandle>();
    h->out.tal = tal;
    h->out.started_at = now;
    h->out.ended_at = now;
    h->out.exit_status = step.exit_status;
    if (step.exit_status == 0) h->out.vrps = step.vrps;
    h->out.log = step.log;
    return h;
  }
};

struct Events {
  std::vector<std::pair<std::string, SkipSource>> adds;
  std::vector<std::string> warnings;
  std::vector<VrpSet> published;
  int cycles = 0;
};

void attach(Monitor& m, Events& ev) {
  m.hooks.on_skiplist_add = [&](const std::string& d, SkipSource s, TimePoint) {
    ev.adds.emplace_back(d, s);
  };
  m.hooks.on_warning = [&](const std::string& w) { ev.warnings.push_back(w); };
  m.hooks.on_publish = [&](const VrpSet& v, TimePoint) { ev.published.push_back(v); };
  m.hooks.on_cycle_complete = [&](TimePoint) { ++ev.cycles; };
}

// Drives tick() until the monitor has completed `cycles` cycles (or the time
// budget runs out, which fails the test).
TimePoint drive(Monitor& m, TimePoint t, std::size_t cycles,
                Duration budget = hours(2)) {
  const TimePoint deadline = t + budget;
  while (m.cycles_completed() < cycles) {
    REQUIRE(t < deadline);
    t = m.tick(t);
  }
  return t;
}

NodeConfig sim_node_config() {
  NodeConfig cfg;
  cfg.node_index = 0;
  return cfg;
}

ScenarioConfig crashing_ripe(TimePoint at) {
  ScenarioConfig sc = scenario_preset("benign-A");
  PpBehavior b;
  b.kind = PpBehavior::Kind::Crashing;
  sc.schedule.push_back({at, "rpki.ripe.net", b});
  return sc;
}

}  // namespace

TEST_CASE("benign cycle publishes the union and sleeps") {
  const ScenarioConfig sc = scenario_preset("benign-A");
  NodeConfig cfg = sim_node_config();
  SimRpAdapter adapter(sc, 0, cfg.consensus, 42);
  Monitor m(cfg, adapter, scenario_dnsbook(sc), {}, make_rng(42, 1));
  Events ev;
  attach(m, ev);

  CHECK(m.phase() == Monitor::Phase::Idle);
  TimePoint t = drive(m, kSimEpoch, 1);
  CHECK(m.phase() == Monitor::Phase::Sleeping);
  CHECK(m.published_vrps() == scenario_union(sc));
  CHECK(m.published_vrps().size() == 48);
  REQUIRE(m.published_at().has_value());
  CHECK(ev.cycles == 1);
  REQUIRE(ev.published.size() == 1);
  CHECK(ev.adds.empty());
  CHECK(ev.warnings.empty());
  CHECK(m.local_skiplist().entries.empty());

  // drive() leaves t at the announced wakeup, i.e. the next cycle start. An
  // early tick is a no-op that re-announces the same wakeup.
  CHECK(m.tick(t - sec(1)) == t);
  CHECK(m.phase() == Monitor::Phase::Sleeping);
  m.tick(t);
  CHECK(m.phase() == Monitor::Phase::Validating);
  CHECK(m.current_tal().has_value());
}

TEST_CASE("crash drops the TAL, skiplists the point, next cycle recovers") {
  const ScenarioConfig sc = crashing_ripe(kSimEpoch);
  NodeConfig cfg = sim_node_config();
  SimRpAdapter adapter(sc, 0, cfg.consensus, 7);
  Monitor m(cfg, adapter, scenario_dnsbook(sc), {}, make_rng(7, 1));
  Events ev;
  attach(m, ev);

  TimePoint t = drive(m, kSimEpoch, 1);
  // The whole TAL run died, so even the healthy sibling PP contributes
  // nothing this cycle.
  VrpSet no_ripe = scenario_union(sc);
  for (const auto& pp : sc.tals.at("ripe"))
    no_ripe = vrp_difference(no_ripe, pp.contribution);
  CHECK(m.published_vrps() == no_ripe);
  CHECK(m.published_vrps().size() == 34);
  REQUIRE(ev.adds.size() == 1);
  CHECK(ev.adds[0].first == "rpki.ripe.net");
  CHECK(ev.adds[0].second == SkipSource::Crash);
  CHECK(m.validation_skiplist().count("rpki.ripe.net") == 1);

  // With the bad point skiplisted the sibling PP comes back.
  drive(m, t, 2);
  VrpSet expect = vrp_difference(scenario_union(sc),
                                 find_pp(sc, "rpki.ripe.net")->contribution);
  CHECK(m.published_vrps() == expect);
  CHECK(m.published_vrps().size() == 38);
  CHECK(ev.adds.size() == 1);
}

TEST_CASE("retained TAL results bridge a failed cycle when caching is on") {
  // Crash arrives mid-life: cycle 1 is clean, cycle 2 fails, cycle 3 runs
  // with the point skiplisted.
  const ScenarioConfig sc = crashing_ripe(kSimEpoch + minutes(5));
  NodeConfig cfg = sim_node_config();
  cfg.refresh_interval = minutes(6);
  REQUIRE(cfg.tal_cache);
  SimRpAdapter adapter(sc, 0, cfg.consensus, 7);
  Monitor m(cfg, adapter, scenario_dnsbook(sc), {}, make_rng(7, 1));
  Events ev;
  attach(m, ev);

  TimePoint t = drive(m, kSimEpoch, 1);
  CHECK(m.published_vrps().size() == 48);

  t = drive(m, t, 2);
  // Cycle 2: the fresh ripe result from cycle 1 masks the failure.
  CHECK(m.published_vrps().size() == 48);
  CHECK(ev.adds.size() == 1);

  drive(m, t, 3);
  // Cycle 3: a fresh partial ripe result replaces the cached one.
  CHECK(m.published_vrps().size() == 38);
}

TEST_CASE("without caching a failed cycle loses the whole TAL") {
  const ScenarioConfig sc = crashing_ripe(kSimEpoch + minutes(5));
  NodeConfig cfg = sim_node_config();
  cfg.refresh_interval = minutes(6);
  cfg.tal_cache = false;
  SimRpAdapter adapter(sc, 0, cfg.consensus, 7);
  Monitor m(cfg, adapter, scenario_dnsbook(sc), {}, make_rng(7, 1));

  TimePoint t = drive(m, kSimEpoch, 1);
  CHECK(m.published_vrps().size() == 48);
  t = drive(m, t, 2);
  CHECK(m.published_vrps().size() == 34);
  drive(m, t, 3);
  CHECK(m.published_vrps().size() == 38);
}

TEST_CASE("cached TAL results are dropped once stale") {
  ScriptedAdapter adapter;
  VrpSet ripe_objs;
  ripe_objs.roas.insert(testsupport::roa(65000, "198.51.100.0/24", 24, "RIPE"));
  // One clean run, then failures with nothing attributable in the log.
  adapter.script["ripe"] = {{0, ripe_objs, {}, false}, {1, {}, {}, false}};

  NodeConfig cfg = sim_node_config();
  cfg.refresh_interval = sec(90);
  cfg.consensus.staleness_tolerance = minutes(2);
  Monitor m(cfg, adapter, DnsBook{}, {}, make_rng(1, 1));

  TimePoint t = drive(m, kSimEpoch, 1);
  CHECK(m.published_vrps().roas.count(*ripe_objs.roas.begin()) == 1);
  t = drive(m, t, 2);
  // 90 seconds old: still within tolerance.
  CHECK(m.published_vrps().roas.count(*ripe_objs.roas.begin()) == 1);
  drive(m, t, 3);
  // 180 seconds old: pruned.
  CHECK(m.published_vrps().roas.count(*ripe_objs.roas.begin()) == 0);
  CHECK(m.local_skiplist().entries.empty());
}

TEST_CASE("a start failure warns and the cycle carries on") {
  ScriptedAdapter adapter;
  adapter.script["apnic"] = {{0, {}, {}, true}};
  VrpSet one;
  one.roas.insert(testsupport::roa(65001, "203.0.113.0/24", 24, "ARIN"));
  adapter.script["arin"] = {{0, one, {}, false}};

  NodeConfig cfg = sim_node_config();
  Monitor m(cfg, adapter, DnsBook{}, {}, make_rng(1, 1));
  Events ev;
  attach(m, ev);

  drive(m, kSimEpoch, 1);
  CHECK(ev.cycles == 1);
  REQUIRE(ev.warnings.size() == 1);
  CHECK(ev.warnings[0].find("apnic") != std::string::npos);
  CHECK(m.published_vrps() == one);
  CHECK(adapter.calls["arin"] == 1);
  CHECK(adapter.calls["apnic"] == 1);
}

TEST_CASE("stalled run is killed and the point skiplisted") {
  ScenarioConfig sc = scenario_preset("benign-A");
  PpBehavior stall;
  stall.kind = PpBehavior::Kind::Stalling;
  stall.hold = minutes(30);
  for (auto& pp : sc.tals.at("ripe"))
    if (pp.domain == "rpki.ripe.net") pp.behavior = stall;

  NodeConfig cfg = sim_node_config();
  SimRpAdapter adapter(sc, 0, cfg.consensus, 13);
  Monitor m(cfg, adapter, scenario_dnsbook(sc), {}, make_rng(13, 1));
  Events ev;
  attach(m, ev);

  TimePoint t = drive(m, kSimEpoch, 1);
  REQUIRE(ev.adds.size() == 1);
  CHECK(ev.adds[0].first == "rpki.ripe.net");
  CHECK(ev.adds[0].second == SkipSource::Stall);
  // The killed run yields nothing for its TAL.
  CHECK(m.published_vrps().size() == 34);

  drive(m, t, 2);
  CHECK(m.published_vrps().size() == 38);
  CHECK(ev.adds.size() == 1);
}

TEST_CASE("voted master skiplist keeps the relying party away") {
  const ScenarioConfig sc = scenario_preset("benign-A");
  NodeConfig cfg = sim_node_config();
  SimRpAdapter adapter(sc, 0, cfg.consensus, 3);
  std::set<std::string> seen;
  adapter.set_contact_observer(
      [&](const std::string& d, TimePoint) { seen.insert(d); });
  Monitor m(cfg, adapter, scenario_dnsbook(sc),
            [] { return std::set<std::string>{"rpki.ripe.net"}; },
            make_rng(3, 1));

  drive(m, kSimEpoch, 1);
  CHECK(seen.count("rpki.ripe.net") == 0);
  CHECK(seen.count("rrdp.ripe.net") == 1);
  CHECK(m.published_vrps().size() == 38);
  CHECK(m.local_skiplist().entries.empty());
  CHECK(m.validation_skiplist().count("rpki.ripe.net") == 1);
}

TEST_CASE("local skiplist entries expire and the point is probed again") {
  const ScenarioConfig sc = crashing_ripe(kSimEpoch);
  NodeConfig cfg = sim_node_config();
  cfg.refresh_interval = sec(90);
  cfg.consensus.blacklist_expiry = minutes(3);
  SimRpAdapter adapter(sc, 0, cfg.consensus, 17);
  std::vector<std::pair<std::string, TimePoint>> contacts;
  adapter.set_contact_observer([&](const std::string& d, TimePoint at) {
    contacts.emplace_back(d, at);
  });
  Monitor m(cfg, adapter, scenario_dnsbook(sc), {}, make_rng(17, 1));
  Events ev;
  attach(m, ev);
  std::vector<TimePoint> add_times;
  m.hooks.on_skiplist_add = [&](const std::string& d, SkipSource, TimePoint at) {
    CHECK(d == "rpki.ripe.net");
    add_times.push_back(at);
  };

  TimePoint t = kSimEpoch;
  const TimePoint stop = kSimEpoch + minutes(10);
  while (t < stop) t = m.tick(t);

  // Crashed, expired, probed again, crashed again.
  REQUIRE(add_times.size() >= 2);
  CHECK(add_times[1] - add_times[0] > cfg.consensus.blacklist_expiry);
  std::vector<TimePoint> bad_contacts;
  for (const auto& [d, at] : contacts)
    if (d == "rpki.ripe.net") bad_contacts.push_back(at);
  REQUIRE(bad_contacts.size() >= 2);
  // No contact while the entry was live.
  for (const auto at : bad_contacts) {
    const bool before_add = at <= add_times[0];
    const bool after_expiry = at > add_times[0] + cfg.consensus.blacklist_expiry;
    CHECK((before_add || after_expiry));
  }
}

TEST_CASE("scripted runs see the merged validation skiplist") {
  ScriptedAdapter adapter;
  NodeConfig cfg = sim_node_config();
  Monitor m(cfg, adapter, DnsBook{},
            [] { return std::set<std::string>{"voted.example.net"}; },
            make_rng(1, 1));
  drive(m, kSimEpoch, 1);
  REQUIRE(adapter.skiplists_seen.size() == cfg.tals.size());
  for (const auto& s : adapter.skiplists_seen)
    CHECK(s.count("voted.example.net") == 1);
}
