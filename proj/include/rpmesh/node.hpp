// SPDX-License-Identifier: MIT
#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <set>
#include <string>
#include <utility>

#include "rpmesh/config.hpp"
#include "rpmesh/connlog.hpp"
#include "rpmesh/lists.hpp"
#include "rpmesh/monitor.hpp"
#include "rpmesh/node_service.hpp"
#include "rpmesh/peering.hpp"
#include "rpmesh/rng.hpp"
#include "rpmesh/rp_adapter.hpp"
#include "rpmesh/rtr.hpp"
#include "rpmesh/sim_rpki.hpp"
#include "rpmesh/time.hpp"
#include "rpmesh/transport.hpp"
#include "rpmesh/vote.hpp"
#include "rpmesh/vrp.hpp"

namespace rpmesh {

// One relying-party node: the monitor that runs validation cycles, the
// peering state that polls other nodes and votes, the served documents, and
// the RTR cache fed from the voted output. Transport and relying party are
// injected so the same core runs against the simulator or live services.
//
// The core is single-threaded by design: monitor_tick and peering_tick must
// be called from one thread (or one scheduler lane). Each returns the time
// at which it wants to run next.
class NodeCore {
 public:
  struct Hooks {
    std::function<void(const VrpSet&, TimePoint)> on_publish;
    std::function<void(const std::string&, SkipSource, TimePoint)> on_skiplist_add;
    std::function<void(TimePoint)> on_cycle_complete;
    std::function<void(const MasterState&, TimePoint)> on_master;
    std::function<void(const PeerAddress&, TimePoint)> on_peer_admitted;
    std::function<void(const std::string&)> on_warning;
  };

  NodeCore(NodeConfig cfg, std::unique_ptr<RpAdapter> adapter,
           std::unique_ptr<PeerTransport> transport, DnsBook dnsbook,
           Peerlist bootstrap)
      : cfg_(std::move(cfg)),
        adapter_(std::move(adapter)),
        transport_(std::move(transport)),
        monitor_(
            cfg_, *adapter_, std::move(dnsbook),
            [this] { return master_.skiplist; },
            make_rng(cfg_.seed, 0x10000u + cfg_.node_index)),
        peering_rng_(make_rng(cfg_.seed, 0x20000u + cfg_.node_index)) {
    peering_.self = self_address(cfg_);
    for (const auto& p : bootstrap.peers)
      if (p != peering_.self) peering_.peerlist.peers.insert(p);
    cache_.session_id =
        static_cast<std::uint16_t>(uniform_u64(peering_rng_, 65536));
    wire_monitor();
  }

  Hooks hooks;

  // Publishes the initial (empty) documents so early peer fetches see
  // well-formed bodies rather than 404s.
  void boot(TimePoint now) {
    endpoints_.put(kPathVrps, serialize_vrp_file(monitor_.published_vrps()),
                   now);
    endpoints_.put(kPathSkiplist, serialize_skiplist(monitor_.local_skiplist()),
                   now);
    endpoints_.put(kPathMaster, serialize_vrp_file(master_.vrps), now);
    endpoints_.put(kPathPeerlist,
                   serialize_peerlist(peering_.peerlist, peering_.self), now);
    booted_ = true;
  }

  // Drives the validation monitor. Returns the next wakeup time.
  TimePoint monitor_tick(TimePoint now) { return monitor_.tick(now); }

  // One peering round: refresh peers, discover and admit candidates, vote,
  // publish the voted view. Returns the next wakeup time.
  TimePoint peering_tick(TimePoint now) {
    PeeringRoundResult res = peering_round(
        peering_, *transport_, endpoints_.drain_access_log(),
        monitor_.published_vrps(), monitor_.local_skiplist().domains(),
        cfg_.consensus, now, peering_rng_);
    master_ = res.master;
    publish_update(cache_, master_.vrps);
    endpoints_.put(kPathMaster, serialize_vrp_file(master_.vrps), now);
    endpoints_.put(kPathPeerlist,
                   serialize_peerlist(peering_.peerlist, peering_.self), now);
    for (const auto& w : res.warnings)
      if (hooks.on_warning) hooks.on_warning(w);
    for (const auto& a : res.admitted)
      if (hooks.on_peer_admitted) hooks.on_peer_admitted(a, now);
    if (hooks.on_master) hooks.on_master(master_, now);
    return now + cfg_.consensus.poll_period;
  }

  const NodeConfig& cfg() const { return cfg_; }
  NodeEndpoints& endpoints() { return endpoints_; }
  Monitor& monitor() { return monitor_; }
  const Monitor& monitor() const { return monitor_; }
  const PeeringState& peering() const { return peering_; }
  const MasterState& master() const { return master_; }
  const CacheState& cache() const { return cache_; }
  bool booted() const { return booted_; }

 private:
  void wire_monitor() {
    monitor_.hooks.on_publish = [this](const VrpSet& v, TimePoint t) {
      endpoints_.put(kPathVrps, serialize_vrp_file(v), t);
      if (hooks.on_publish) hooks.on_publish(v, t);
    };
    monitor_.hooks.on_skiplist_change = [this](const Skiplist& sl,
                                               TimePoint t) {
      endpoints_.put(kPathSkiplist, serialize_skiplist(sl), t);
    };
    monitor_.hooks.on_skiplist_add = [this](const std::string& d, SkipSource s,
                                            TimePoint t) {
      if (hooks.on_skiplist_add) hooks.on_skiplist_add(d, s, t);
    };
    monitor_.hooks.on_cycle_complete = [this](TimePoint t) {
      if (hooks.on_cycle_complete) hooks.on_cycle_complete(t);
    };
    monitor_.hooks.on_warning = [this](const std::string& w) {
      if (hooks.on_warning) hooks.on_warning(w);
    };
  }

  NodeConfig cfg_;
  NodeEndpoints endpoints_;
  std::unique_ptr<RpAdapter> adapter_;
  std::unique_ptr<PeerTransport> transport_;
  Monitor monitor_;
  std::mt19937_64 peering_rng_;
  PeeringState peering_;
  MasterState master_;
  CacheState cache_;
  bool booted_ = false;
};

}  // namespace rpmesh
