// SPDX-License-Identifier: MIT
#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rpmesh/config.hpp"
#include "rpmesh/lists.hpp"
#include "rpmesh/node.hpp"
#include "rpmesh/node_service.hpp"
#include "rpmesh/rng.hpp"
#include "rpmesh/sched.hpp"
#include "rpmesh/sim_rpki.hpp"
#include "rpmesh/time.hpp"
#include "rpmesh/transport.hpp"
#include "rpmesh/vote.hpp"
#include "rpmesh/vrp.hpp"

namespace rpmesh {

// ---------------------------------------------------------------------------
// Byzantine peers for experiments. A stub does no validation of its own; it
// serves fabricated documents and otherwise behaves like a cooperative node.

struct StubSpec {
  enum class Kind { Poison, Censor, Split };
  Kind kind = Kind::Poison;
  // Poison: entries added on top of the honest set. Censor: entries removed
  // from it. Split: entries added, but only for the listed targets.
  VrpSet objects;
  std::set<PeerAddress> targets;
};

class ByzantineStub : public EndpointHandler {
 public:
  ByzantineStub(PeerAddress self, Peerlist peers, VrpSet honest, StubSpec spec)
      : self_(std::move(self)),
        peers_(std::move(peers)),
        honest_(std::move(honest)),
        spec_(std::move(spec)) {}

  VrpSet view_for(const PeerAddress& client) const {
    switch (spec_.kind) {
      case StubSpec::Kind::Poison: {
        VrpSet v = honest_;
        v.merge(spec_.objects);
        return v;
      }
      case StubSpec::Kind::Censor:
        return vrp_difference(honest_, spec_.objects);
      case StubSpec::Kind::Split:
        if (spec_.targets.count(client)) {
          VrpSet v = honest_;
          v.merge(spec_.objects);
          return v;
        }
        return honest_;
    }
    return honest_;
  }

  // What a neutral observer sees; for a split stub, the clean side.
  VrpSet default_view() const { return view_for(PeerAddress{}); }

  std::optional<Doc> serve(const PeerAddress& client, const std::string& path,
                           TimePoint now) override {
    Doc d;
    d.generated_at = now;
    if (path == kPathPeerlist) {
      d.body = serialize_peerlist(peers_, self_);
    } else if (path == kPathSkiplist) {
      d.body = serialize_skiplist(std::set<std::string>{});
    } else if (path == kPathVrps || path == kPathMaster) {
      d.body = serialize_vrp_file(view_for(client));
    } else {
      return std::nullopt;
    }
    return d;
  }

 private:
  PeerAddress self_;
  Peerlist peers_;
  VrpSet honest_;
  StubSpec spec_;
};

// ---------------------------------------------------------------------------
// Metrics. One sample per poll period across the whole cluster.

struct MetricsSample {
  TimePoint time{};
  std::size_t consensus = 0;   // entries voted in by a majority
  std::size_t union_size = 0;  // entries any participant holds
  std::vector<std::size_t> local;     // per node: published local entries
  std::vector<std::size_t> skiplist;  // per node: local skiplist entries
  std::vector<std::string> status;    // per node: idle/validating/sleeping

  // The sets behind the counts. Kept out of the CSV; assertions use them.
  VrpSet consensus_set;
  VrpSet union_set;
  std::set<std::string> voted_skiplist;
};

// Seconds since the cluster epoch; milliseconds only when needed.
inline std::string format_sample_time(TimePoint t) {
  const long long ms =
      std::chrono::duration_cast<std::chrono::milliseconds>(t - kSimEpoch)
          .count();
  if (ms % 1000 == 0) return std::to_string(ms / 1000);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%lld.%03lld", ms / 1000,
                ms >= 0 ? ms % 1000 : -(ms % 1000));
  return buf;
}

inline std::string metrics_csv(const std::vector<MetricsSample>& samples,
                               std::size_t n_nodes) {
  std::string out = "time,consensus,union";
  for (std::size_t i = 0; i < n_nodes; ++i) out += ",local_" + std::to_string(i);
  for (std::size_t i = 0; i < n_nodes; ++i)
    out += ",skiplist_" + std::to_string(i);
  for (std::size_t i = 0; i < n_nodes; ++i) out += ",status_" + std::to_string(i);
  out += "\n";
  for (const auto& s : samples) {
    out += format_sample_time(s.time);
    out += "," + std::to_string(s.consensus);
    out += "," + std::to_string(s.union_size);
    for (std::size_t i = 0; i < n_nodes; ++i)
      out += "," + std::to_string(i < s.local.size() ? s.local[i] : 0);
    for (std::size_t i = 0; i < n_nodes; ++i)
      out += "," + std::to_string(i < s.skiplist.size() ? s.skiplist[i] : 0);
    for (std::size_t i = 0; i < n_nodes; ++i)
      out += "," + (i < s.status.size() ? s.status[i] : std::string("down"));
    out += "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Everything notable that happened during a run, in order.

struct ClusterEvents {
  struct SkiplistAdd {
    std::size_t node;
    std::string domain;
    SkipSource source;
    TimePoint time{};
  };
  struct Contact {
    std::size_t node;
    std::string domain;
    TimePoint time{};
  };
  struct Cycle {
    std::size_t node;
    TimePoint time{};
  };
  struct Publish {
    std::size_t node;
    std::size_t entries;
    TimePoint time{};
  };
  struct Admission {
    std::size_t node;
    PeerAddress peer;
    TimePoint time{};
  };

  std::vector<SkiplistAdd> skiplist_adds;
  std::vector<Contact> contacts;
  std::vector<Cycle> completions;
  std::vector<Publish> publishes;
  std::vector<Admission> admissions;
  std::vector<std::string> warnings;
};

// Time at which the k-th distinct node (1-based) finished its first
// validation cycle.
inline std::optional<TimePoint> kth_first_completion(const ClusterEvents& ev,
                                                     std::size_t k) {
  std::map<std::size_t, TimePoint> first;
  for (const auto& c : ev.completions)
    if (!first.count(c.node)) first[c.node] = c.time;
  std::vector<TimePoint> times;
  times.reserve(first.size());
  for (const auto& [_, t] : first) times.push_back(t);
  std::sort(times.begin(), times.end());
  if (k == 0 || times.size() < k) return std::nullopt;
  return times[k - 1];
}

// ---------------------------------------------------------------------------
// A simulated cluster: n nodes on an in-memory network, each with its own
// simulated relying party, plus optional byzantine stubs. Deterministic for
// a fixed option set.

struct ClusterOptions {
  ScenarioConfig scenario;
  std::size_t n_nodes = 5;
  std::uint64_t seed = 1;
  NodeConfig base;  // template; the scenario profile is applied on top

  Duration boot_stagger = sec(20);
  std::map<std::size_t, Duration> boot_override;  // node -> offset from epoch

  enum class Topology { Full, Chain };
  Topology topology = Topology::Full;
  std::map<std::size_t, Peerlist> bootstrap_override;

  std::vector<StubSpec> stubs;
  bool sample_metrics = true;
};

class SimCluster {
 public:
  explicit SimCluster(ClusterOptions opts)
      : opts_(std::move(opts)),
        sched_(kSimEpoch),
        net_([this] { return sched_.now(); }) {
    build();
  }

  SimCluster(const SimCluster&) = delete;
  SimCluster& operator=(const SimCluster&) = delete;

  void run_for(Duration d) { sched_.run_until(sched_.now() + d); }
  void run_until(TimePoint t) { sched_.run_until(t); }
  TimePoint now() const { return sched_.now(); }

  std::size_t size() const { return nodes_.size(); }
  NodeCore& node(std::size_t i) { return *nodes_.at(i).core; }
  const NodeCore& node(std::size_t i) const { return *nodes_.at(i).core; }
  PeerAddress address(std::size_t i) const { return nodes_.at(i).addr; }
  std::vector<PeerAddress> addresses() const {
    std::vector<PeerAddress> out;
    out.reserve(nodes_.size());
    for (const auto& n : nodes_) out.push_back(n.addr);
    return out;
  }
  PeerAddress stub_address(std::size_t j) const { return stubs_.at(j).addr; }

  const ScenarioConfig& scenario() const { return opts_.scenario; }
  const NodeConfig& base_config() const { return base_; }
  VrpSet ground_truth() const { return scenario_union(opts_.scenario); }

  const std::vector<MetricsSample>& samples() const { return samples_; }
  const ClusterEvents& events() const { return events_; }
  // Union of every voted set node i ever held; for "never let X in" checks.
  const VrpSet& master_ever(std::size_t i) const {
    return nodes_.at(i).master_ever;
  }
  std::string csv() const { return metrics_csv(samples_, nodes_.size()); }

  MemoryNetwork& network() { return net_; }
  // A transport whose client identity is outside the cluster, for operator
  // tooling such as the cross-node audit.
  std::unique_ptr<PeerTransport> observer_transport() {
    return net_.transport_for(PeerAddress{"observer.test", 1});
  }

 private:
  struct HonestNode {
    PeerAddress addr;
    TimePoint boot_at{};
    std::unique_ptr<NodeCore> core;
    VrpSet master_ever;
  };
  struct StubNode {
    PeerAddress addr;
    std::unique_ptr<ByzantineStub> handler;
  };

  void build() {
    if (opts_.n_nodes == 0) throw std::invalid_argument("cluster needs nodes");
    if (opts_.topology == ClusterOptions::Topology::Chain &&
        !opts_.stubs.empty())
      throw std::invalid_argument("stubs need the full topology");

    base_ = opts_.base;
    base_.mode = NodeMode::Sim;
    for (const auto& [k, v] : opts_.scenario.profile) apply_config_kv(base_, k, v);
    base_.seed = opts_.seed;

    std::vector<PeerAddress> honest_addrs;
    for (std::size_t i = 0; i < opts_.n_nodes; ++i)
      honest_addrs.push_back({"node" + std::to_string(i) + ".test",
                              kDefaultNodePort});
    Peerlist everyone;
    everyone.peers.insert(honest_addrs.begin(), honest_addrs.end());
    for (std::size_t j = 0; j < opts_.stubs.size(); ++j)
      everyone.peers.insert({"stub" + std::to_string(j) + ".test",
                             kDefaultNodePort});

    const VrpSet truth = scenario_union(opts_.scenario);
    for (std::size_t j = 0; j < opts_.stubs.size(); ++j) {
      StubNode s;
      s.addr = PeerAddress{"stub" + std::to_string(j) + ".test",
                           kDefaultNodePort};
      s.handler = std::make_unique<ByzantineStub>(s.addr, everyone, truth,
                                                  opts_.stubs[j]);
      net_.attach(s.addr, s.handler.get());
      stubs_.push_back(std::move(s));
    }

    for (std::size_t i = 0; i < opts_.n_nodes; ++i) {
      NodeConfig cfg = base_;
      cfg.node_index = static_cast<std::uint32_t>(i);
      cfg.advertised_host = honest_addrs[i].host;
      cfg.https_port = honest_addrs[i].port;

      auto adapter = std::make_unique<SimRpAdapter>(
          opts_.scenario, cfg.node_index, cfg.consensus, opts_.seed);
      adapter->set_contact_observer(
          [this, i](const std::string& domain, TimePoint t) {
            events_.contacts.push_back({i, domain, t});
          });

      Peerlist bootstrap;
      if (const auto it = opts_.bootstrap_override.find(i);
          it != opts_.bootstrap_override.end()) {
        bootstrap = it->second;
      } else if (opts_.topology == ClusterOptions::Topology::Full) {
        bootstrap = everyone;
      } else if (i > 0) {
        bootstrap.peers.insert(honest_addrs[i - 1]);
      }

      HonestNode nd;
      nd.addr = honest_addrs[i];
      nd.boot_at = kSimEpoch + boot_offset(i);
      nd.core = std::make_unique<NodeCore>(
          cfg, std::move(adapter), net_.transport_for(nd.addr),
          scenario_dnsbook(opts_.scenario), bootstrap);

      NodeCore::Hooks& h = nd.core->hooks;
      h.on_skiplist_add = [this, i](const std::string& d, SkipSource s,
                                    TimePoint t) {
        events_.skiplist_adds.push_back({i, d, s, t});
      };
      h.on_cycle_complete = [this, i](TimePoint t) {
        events_.completions.push_back({i, t});
      };
      h.on_publish = [this, i](const VrpSet& v, TimePoint t) {
        events_.publishes.push_back({i, v.size(), t});
      };
      h.on_peer_admitted = [this, i](const PeerAddress& p, TimePoint t) {
        events_.admissions.push_back({i, p, t});
      };
      h.on_master = [this, i](const MasterState& m, TimePoint) {
        nodes_[i].master_ever.merge(m.vrps);
      };
      h.on_warning = [this, i](const std::string& w) {
        events_.warnings.push_back("node" + std::to_string(i) + ": " + w);
      };

      net_.attach(nd.addr, &nd.core->endpoints());
      nodes_.push_back(std::move(nd));
    }

    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      sched_.post(nodes_[i].boot_at, 0, [this, i] {
        nodes_[i].core->boot(sched_.now());
        schedule_monitor(i, sched_.now());
        schedule_peering(i, sched_.now() + base_.consensus.poll_period);
      });
    }
    if (opts_.sample_metrics) schedule_sample(kSimEpoch);
  }

  Duration boot_offset(std::size_t i) const {
    if (const auto it = opts_.boot_override.find(i);
        it != opts_.boot_override.end())
      return it->second;
    return opts_.boot_stagger * static_cast<long>(i);
  }

  void schedule_monitor(std::size_t i, TimePoint at) {
    sched_.post(at, 0, [this, i] {
      const TimePoint next = nodes_[i].core->monitor_tick(sched_.now());
      schedule_monitor(i, next);
    });
  }

  void schedule_peering(std::size_t i, TimePoint at) {
    sched_.post(at, 0, [this, i] {
      const TimePoint next = nodes_[i].core->peering_tick(sched_.now());
      schedule_peering(i, next);
    });
  }

  void schedule_sample(TimePoint at) {
    sched_.post(at, 1, [this] {
      take_sample(sched_.now());
      schedule_sample(sched_.now() + base_.consensus.poll_period);
    });
  }

  static const char* phase_name(Monitor::Phase p) {
    switch (p) {
      case Monitor::Phase::Idle: return "idle";
      case Monitor::Phase::Validating: return "validating";
      case Monitor::Phase::Sleeping: return "sleeping";
    }
    return "?";
  }

  void take_sample(TimePoint t) {
    MetricsSample s;
    s.time = t;

    std::vector<std::pair<std::string, VrpSet>> views;
    views.reserve(nodes_.size() + stubs_.size());
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      const Monitor& m = nodes_[i].core->monitor();
      s.local.push_back(m.published_vrps().size());
      s.skiplist.push_back(m.local_skiplist().entries.size());
      s.status.push_back(phase_name(m.phase()));
      views.emplace_back("node" + std::to_string(i), m.published_vrps());
    }
    for (std::size_t j = 0; j < stubs_.size(); ++j)
      views.emplace_back("stub" + std::to_string(j),
                         stubs_[j].handler->default_view());

    auto vote_kind = [&](auto member) {
      VoteInstance inst;
      inst.c = base_.consensus.c;
      for (const auto& [id, v] : views) inst.participants.emplace_back(id, member(v));
      return threshold_vote(inst);
    };
    s.consensus_set.roas = vote_kind([](const VrpSet& v) { return v.roas; });
    s.consensus_set.aspas = vote_kind([](const VrpSet& v) { return v.aspas; });
    s.consensus_set.bgpsec_keys =
        vote_kind([](const VrpSet& v) { return v.bgpsec_keys; });
    for (const auto& [_, v] : views) s.union_set.merge(v);

    VoteInstance skips;
    skips.c = base_.consensus.c;
    for (std::size_t i = 0; i < nodes_.size(); ++i)
      skips.participants.emplace_back(
          "node" + std::to_string(i),
          nodes_[i].core->monitor().local_skiplist().domains());
    for (std::size_t j = 0; j < stubs_.size(); ++j)
      skips.participants.emplace_back("stub" + std::to_string(j),
                                      std::set<std::string>{});
    s.voted_skiplist = threshold_vote(skips);

    s.consensus = s.consensus_set.size();
    s.union_size = s.union_set.size();
    samples_.push_back(std::move(s));
  }

  ClusterOptions opts_;
  NodeConfig base_;
  Scheduler sched_;
  MemoryNetwork net_;
  std::vector<HonestNode> nodes_;
  std::vector<StubNode> stubs_;
  std::vector<MetricsSample> samples_;
  ClusterEvents events_;
};

// Convenience wrapper used by the command line: run a preset scenario and
// hand back the cluster for inspection.
struct RunResult {
  std::unique_ptr<SimCluster> cluster;
  std::string csv;
};

inline RunResult run_cluster(ClusterOptions opts, Duration duration) {
  RunResult r;
  r.cluster = std::make_unique<SimCluster>(std::move(opts));
  r.cluster->run_for(duration);
  r.csv = r.cluster->csv();
  return r;
}

}  // namespace rpmesh
